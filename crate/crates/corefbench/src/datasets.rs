//! Line-delimited JSON dataset adapters and the unified interchange format.
//!
//! | format     | fields                                                        |
//! |------------|---------------------------------------------------------------|
//! | winogrande | `qID`?, `sentence`, `option1`, `option2`, `answer` ("1"/"2"/"") |
//! | wsc        | `id`?, `text`, `candidates` (two strings), `label` (0/1)?      |
//! | dpr        | `id`?, `sentence`, `candidate_a`, `candidate_b`, `correct` ("a"/"b")? |
//! | unified    | `id`, `text`, `candidate1`, `candidate2`, `answer` (1/2)?      |
//!
//! Instances without an id get `<stem>-<line>`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use corefbench_core::schema::{Overrides, SchemaInstance};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: malformed JSON: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: missing field {field:?}")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field {field:?}: {message}")]
    BadField {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        source: corefbench_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Winogrande,
    Wsc,
    Dpr,
    Unified,
}

impl DatasetFormat {
    pub fn name(self) -> &'static str {
        match self {
            DatasetFormat::Winogrande => "winogrande",
            DatasetFormat::Wsc => "wsc",
            DatasetFormat::Dpr => "dpr",
            DatasetFormat::Unified => "unified",
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "winogrande" => Ok(DatasetFormat::Winogrande),
            "wsc" => Ok(DatasetFormat::Wsc),
            "dpr" => Ok(DatasetFormat::Dpr),
            "unified" => Ok(DatasetFormat::Unified),
            other => Err(format!(
                "unknown format {other:?} (valid: winogrande, wsc, dpr, unified)"
            )),
        }
    }
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    line: usize,
}

impl Fields<'_> {
    fn get(&self, field: &'static str) -> Result<&Value, DataError> {
        self.obj.get(field).ok_or(DataError::MissingField {
            line: self.line,
            field,
        })
    }

    fn bad(&self, field: &'static str, message: impl Into<String>) -> DataError {
        DataError::BadField {
            line: self.line,
            field,
            message: message.into(),
        }
    }

    fn string(&self, field: &'static str) -> Result<String, DataError> {
        match self.get(field)? {
            Value::String(s) => Ok(s.clone()),
            other => Err(self.bad(field, format!("expected a string, got {other}"))),
        }
    }

    fn opt_string(&self, field: &'static str) -> Result<Option<String>, DataError> {
        match self.obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(self.bad(field, format!("expected a string, got {other}"))),
        }
    }

    /// A string id or a number rendered as text.
    fn opt_id(&self, field: &'static str) -> Result<Option<String>, DataError> {
        match self.obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(other) => {
                Err(self.bad(field, format!("expected a string or number, got {other}")))
            }
        }
    }

    fn opt_uint(&self, field: &'static str) -> Result<Option<u64>, DataError> {
        match self.obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Number(n)) => n
                .as_u64()
                .map(Some)
                .ok_or_else(|| self.bad(field, format!("{n} is not a non-negative integer"))),
            Some(other) => Err(self.bad(field, format!("expected an integer, got {other}"))),
        }
    }
}

fn parse_object(
    line_text: &str,
    line: usize,
    format: DatasetFormat,
    stem: &str,
) -> Result<SchemaInstance, DataError> {
    let value: Value = serde_json::from_str(line_text).map_err(|e| DataError::Malformed {
        line,
        message: e.to_string(),
    })?;
    let Value::Object(obj) = &value else {
        return Err(DataError::Malformed {
            line,
            message: "expected a JSON object".into(),
        });
    };
    let f = Fields { obj, line };
    let fallback_id = || format!("{stem}-{line}");
    let (id, text, c1, c2, answer) = match format {
        DatasetFormat::Winogrande => {
            let answer = match f.opt_string("answer")?.as_deref() {
                None | Some("") => None,
                Some("1") => Some(1),
                Some("2") => Some(2),
                Some(other) => {
                    return Err(f.bad("answer", format!("expected \"1\" or \"2\", got {other:?}")))
                }
            };
            let id = f.opt_id("qID")?.unwrap_or_else(fallback_id);
            (
                id,
                f.string("sentence")?,
                f.string("option1")?,
                f.string("option2")?,
                answer,
            )
        }
        DatasetFormat::Wsc => {
            let cands = match f.get("candidates")? {
                Value::Array(a) if a.len() == 2 => a
                    .iter()
                    .map(|v| v.as_str().map(str::to_owned))
                    .collect::<Option<Vec<String>>>()
                    .ok_or_else(|| f.bad("candidates", "expected two strings"))?,
                _ => return Err(f.bad("candidates", "expected an array of two strings")),
            };
            let answer = match f.opt_uint("label")? {
                None => None,
                Some(l @ (0 | 1)) => Some(l as u8 + 1),
                Some(l) => return Err(f.bad("label", format!("expected 0 or 1, got {l}"))),
            };
            let id = f.opt_id("id")?.unwrap_or_else(fallback_id);
            let [c1, c2]: [String; 2] = cands.try_into().expect("length checked");
            (id, f.string("text")?, c1, c2, answer)
        }
        DatasetFormat::Dpr => {
            let answer = match f.opt_string("correct")?.as_deref() {
                None | Some("") => None,
                Some("a") => Some(1),
                Some("b") => Some(2),
                Some(other) => {
                    return Err(f.bad("correct", format!("expected \"a\" or \"b\", got {other:?}")))
                }
            };
            let id = f.opt_id("id")?.unwrap_or_else(fallback_id);
            (
                id,
                f.string("sentence")?,
                f.string("candidate_a")?,
                f.string("candidate_b")?,
                answer,
            )
        }
        DatasetFormat::Unified => {
            let answer = match f.opt_uint("answer")? {
                None => None,
                Some(a @ (1 | 2)) => Some(a as u8),
                Some(a) => return Err(f.bad("answer", format!("expected 1 or 2, got {a}"))),
            };
            (
                f.string("id")?,
                f.string("text")?,
                f.string("candidate1")?,
                f.string("candidate2")?,
                answer,
            )
        }
    };
    SchemaInstance::new(id, text, c1, c2, answer)
        .map_err(|source| DataError::Invalid { line, source })
}

/// Parse every non-blank line of `reader`; line numbers are 1-based.
/// `stem` names instances that carry no id.
pub fn parse_schema_jsonl<R: BufRead>(
    reader: R,
    format: DatasetFormat,
    stem: &str,
) -> Result<Vec<SchemaInstance>, DataError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|source| DataError::Io {
            path: format!("{stem} (line {line_no})"),
            source,
        })?;
        if text.trim().is_empty() {
            continue;
        }
        out.push(parse_object(&text, line_no, format, stem)?);
    }
    let [a, b] = corefbench_core::schema::answer_balance(&out);
    log::info!(
        "{stem}: {} instances ({format}), answers {a}/{b}",
        out.len()
    );
    Ok(out)
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>, DataError> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
}

pub fn read_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<SchemaInstance>, DataError> {
    let stem = path
        .file_stem()
        .map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned());
    parse_schema_jsonl(open(path)?, format, &stem)
}

/// One JSON object per line, fields in unified order.
pub fn write_unified<W: Write>(mut w: W, data: &[SchemaInstance]) -> std::io::Result<()> {
    for inst in data {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct OverrideLine {
    id: String,
    candidate_index: usize,
    replacement: String,
}

/// Override file: `{"id", "candidate_index", "replacement"}` per line, with
/// `candidate_index` 1 or 2 as in the unified `answer` field.
pub fn parse_overrides<R: BufRead>(reader: R) -> Result<Overrides, DataError> {
    let mut out = Overrides::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|source| DataError::Io {
            path: format!("overrides (line {line_no})"),
            source,
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let o: OverrideLine = serde_json::from_str(&text).map_err(|e| DataError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if !(1..=2).contains(&o.candidate_index) {
            return Err(DataError::BadField {
                line: line_no,
                field: "candidate_index",
                message: format!("expected 1 or 2, got {}", o.candidate_index),
            });
        }
        out.insert(o.id, o.candidate_index - 1, o.replacement);
    }
    Ok(out)
}

pub fn read_overrides(path: &Path) -> Result<Overrides, DataError> {
    parse_overrides(open(path)?)
}

/// One row of the mismatch report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MismatchRow {
    pub id: String,
    pub c1_found: bool,
    pub c2_found: bool,
    /// `unchanged`, `override`, `heuristic` or `unrepairable`.
    pub action: String,
}

pub const MISMATCH_HEADER: &str = "id\tc1_found\tc2_found\taction";

pub fn mismatch_tsv(rows: &[MismatchRow]) -> String {
    let mut s = String::from(MISMATCH_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.id, r.c1_found, r.c2_found, r.action
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(format: DatasetFormat, text: &str) -> Result<Vec<SchemaInstance>, DataError> {
        parse_schema_jsonl(text.as_bytes(), format, "t")
    }

    #[test]
    fn adapters_agree_on_one_instance() {
        let wg = r#"{"qID":"q1","sentence":"The _ is small.","option1":"garage","option2":"backyard","answer":"1"}"#;
        let wsc =
            r#"{"id":"q1","text":"The _ is small.","candidates":["garage","backyard"],"label":0}"#;
        let dpr = r#"{"id":"q1","sentence":"The _ is small.","candidate_a":"garage","candidate_b":"backyard","correct":"a"}"#;
        let uni = r#"{"id":"q1","text":"The _ is small.","candidate1":"garage","candidate2":"backyard","answer":1}"#;
        let want =
            SchemaInstance::new("q1", "The _ is small.", "garage", "backyard", Some(1)).unwrap();
        for (f, line) in [
            (DatasetFormat::Winogrande, wg),
            (DatasetFormat::Wsc, wsc),
            (DatasetFormat::Dpr, dpr),
            (DatasetFormat::Unified, uni),
        ] {
            assert_eq!(parse(f, line).unwrap(), vec![want.clone()], "{f}");
        }
    }

    #[test]
    fn unlabeled_and_missing_ids() {
        let wg =
            "\n{\"sentence\":\"A _ b.\",\"option1\":\"x\",\"option2\":\"y\",\"answer\":\"\"}\n";
        let got = parse(DatasetFormat::Winogrande, wg).unwrap();
        assert_eq!(got[0].id, "t-2");
        assert_eq!(got[0].answer, None);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let two =
            "{\"id\":\"a\",\"text\":\"_ x\",\"candidate1\":\"p\",\"candidate2\":\"q\"}\n{oops";
        let e = parse(DatasetFormat::Unified, two).unwrap_err();
        assert!(matches!(e, DataError::Malformed { line: 2, .. }), "{e}");
        let e = parse(
            DatasetFormat::Winogrande,
            r#"{"sentence":"_ x","option1":"p","answer":"1"}"#,
        )
        .unwrap_err();
        assert!(
            matches!(
                e,
                DataError::MissingField {
                    line: 1,
                    field: "option2"
                }
            ),
            "{e}"
        );
        let e = parse(
            DatasetFormat::Unified,
            r#"{"id":"a","text":"no gap","candidate1":"p","candidate2":"q"}"#,
        )
        .unwrap_err();
        assert!(matches!(e, DataError::Invalid { line: 1, .. }), "{e}");
        assert!(parse(DatasetFormat::Unified, "").unwrap().is_empty());
    }

    #[test]
    fn overrides_are_one_based() {
        let o = parse_overrides(
            r#"{"id":"m","candidate_index":2,"replacement":"her trainer"}"#.as_bytes(),
        )
        .unwrap();
        assert_eq!(
            o.get("m").unwrap().get(&1).map(String::as_str),
            Some("her trainer")
        );
        assert!(
            parse_overrides(r#"{"id":"m","candidate_index":0,"replacement":"x"}"#.as_bytes())
                .is_err()
        );
    }
}
