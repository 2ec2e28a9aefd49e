//! Per-run JSON records, one file per run named after the run id.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use corefbench_core::training::{Evaluation, RunResult};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub result: RunResult,
    /// Extra evaluation sets scored with the final model, by column name.
    #[serde(default)]
    pub evaluations: BTreeMap<String, Evaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

impl RunRecord {
    pub fn new(result: RunResult) -> Self {
        RunRecord {
            result,
            evaluations: BTreeMap::new(),
            checkpoint: None,
        }
    }

    pub fn run_id(&self) -> String {
        self.result.config.run_id()
    }

    /// Accuracy for a report column; the run's own dev set is `dev_name`.
    pub fn accuracy(&self, column: &str, dev_name: &str) -> Option<f64> {
        if column == dev_name {
            Some(self.result.final_dev_accuracy)
        } else {
            self.evaluations.get(column).map(|e| e.accuracy)
        }
    }
}

pub fn record_path(dir: &Path, run_id: &str) -> PathBuf {
    dir.join(format!("{run_id}.json"))
}

/// Write to a temporary sibling, then rename, so readers never see a
/// partial record.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f =
            std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn save_record(dir: &Path, record: &RunRecord) -> Result<PathBuf> {
    let path = record_path(dir, &record.run_id());
    let mut bytes = serde_json::to_vec_pretty(record)?;
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    Ok(path)
}

pub fn load_record(path: &Path) -> Result<RunRecord> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing run record {}", path.display()))
}

/// Every record matching `pattern`, sorted by path.
pub fn load_records(pattern: &str) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad glob pattern {pattern:?}"))?
        .collect::<std::result::Result<_, _>>()?;
    paths.sort();
    paths.iter().map(|p| load_record(p)).collect()
}


#[cfg(test)]
mod tests {
    use super::tests_support::fake_result;
    use super::*;
    use corefbench_core::objectives::Objective;

    #[test]
    fn records_round_trip_and_glob() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = RunRecord::new(fake_result(Objective::Css, 3, 0.1 + 0.7));
        rec.evaluations.insert(
            "wsc".into(),
            Evaluation {
                accuracy: 0.5,
                correct: 1,
                total: 2,
                ties: 0,
                excluded: 1,
            },
        );
        let path = save_record(dir.path(), &rec).unwrap();
        assert_eq!(path.file_name().unwrap(), "css_1e-5_8_16_3.json");
        assert!(!path.with_extension("json.tmp").exists());
        save_record(
            dir.path(),
            &RunRecord::new(fake_result(Objective::Css, 4, 0.5)),
        )
        .unwrap();
        let all = load_records(&format!("{}/*.json", dir.path().display())).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0], rec);
        assert_eq!(all[0].accuracy("wsc", "dev"), Some(0.5));
        assert_eq!(all[0].accuracy("dev", "dev"), Some(0.1 + 0.7));
        assert_eq!(all[1].accuracy("dpr", "dev"), None);
    }
}
