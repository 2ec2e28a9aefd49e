use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::aggregate::SampleStats;

pub const MISSING: &str = "—";

/// Caption text stating how the spread is computed.
pub const STD_NOTE: &str =
    "standard deviation is the sample standard deviation (n - 1 denominator)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportStyle {
    /// Rows are objectives, columns are datasets, cells are `mean (std)`.
    Table1,
    /// Maximum, average, standard deviation and converged count per objective.
    Table2,
}

/// Markdown and TSV renderings of one table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub markdown: String,
    pub tsv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub datasets: Vec<String>,
    pub rows: Vec<(String, Vec<Option<SampleStats>>)>,
}

fn pct1(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

fn pct2(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// `78.2 (1.00)`; the spread is dropped for a single value and the whole cell
/// is `—` when nothing survived.
pub fn format_cell(stats: Option<&SampleStats>) -> String {
    match stats.and_then(|s| s.mean.map(|m| (m, s.std))) {
        None => MISSING.into(),
        Some((m, Some(sd))) => format!("{} ({})", pct1(m), pct2(sd)),
        Some((m, None)) => pct1(m),
    }
}

pub fn format_converged(converged: usize, total: usize) -> String {
    format!("{converged} out of {total}")
}

/// Inverse of [`format_cell`] (ignoring a trailing best-marker `*`), in percent.
pub fn parse_cell(cell: &str) -> Option<(f64, Option<f64>)> {
    let cell = cell
        .trim()
        .trim_end_matches('*')
        .trim_start_matches("**")
        .trim_end_matches("**");
    if cell == MISSING {
        return None;
    }
    match cell.split_once(" (") {
        Some((m, sd)) => Some((m.parse().ok()?, Some(sd.strip_suffix(')')?.parse().ok()?))),
        None => Some((cell.parse().ok()?, None)),
    }
}

fn column_best(rows: &[(String, Vec<Option<SampleStats>>)], col: usize) -> Option<f64> {
    rows.iter()
        .filter_map(|(_, cells)| cells.get(col).copied().flatten().and_then(|s| s.mean))
        .map(|m| libm::round(m * 1000.0))
        .fold(None, |acc: Option<f64>, m| {
            Some(acc.map_or(m, |a| a.max(m)))
        })
}

fn md_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

pub fn render_table1(table: &Table1) -> Rendered {
    let mut md = format!("Accuracy in %, mean (std) over converged runs; {STD_NOTE}.\n\n");
    let mut header = alloc::vec![String::from("Objective")];
    header.extend(table.datasets.iter().cloned());
    md.push_str(&md_row(&header));
    md.push_str(&md_row(&alloc::vec![String::from("---"); header.len()]));
    let mut tsv = header.join("\t");
    tsv.push('\n');
    let best: Vec<Option<f64>> = (0..table.datasets.len())
        .map(|c| column_best(&table.rows, c))
        .collect();
    for (name, cells) in &table.rows {
        let mut md_cells = alloc::vec![name.clone()];
        let mut tsv_cells = alloc::vec![name.clone()];
        for (c, best) in best.iter().enumerate() {
            let stats = cells.get(c).copied().flatten();
            let text = format_cell(stats.as_ref());
            let is_best = stats
                .and_then(|s| s.mean)
                .zip(*best)
                .is_some_and(|(m, b)| libm::round(m * 1000.0) == b);
            if is_best {
                md_cells.push(format!("**{text}**"));
                tsv_cells.push(format!("{text}*"));
            } else {
                md_cells.push(text.clone());
                tsv_cells.push(text);
            }
        }
        md.push_str(&md_row(&md_cells));
        tsv.push_str(&tsv_cells.join("\t"));
        tsv.push('\n');
    }
    Rendered { markdown: md, tsv }
}

pub fn render_table2(rows: &[(String, SampleStats)]) -> Rendered {
    let header = [
        "Objective",
        "Maximum",
        "Average",
        "Standard deviation",
        "Converged",
    ]
    .map(String::from);
    let mut md = format!("Accuracy in % over converged runs; {STD_NOTE}.\n\n");
    md.push_str(&md_row(&header));
    md.push_str(&md_row(&alloc::vec![String::from("---"); header.len()]));
    let mut tsv = header.join("\t");
    tsv.push('\n');
    for (name, s) in rows {
        let cells = [
            name.clone(),
            s.max.map_or(MISSING.into(), pct1),
            s.mean.map_or(MISSING.into(), pct1),
            s.std.map_or(MISSING.into(), pct2),
            format_converged(s.n, s.n_total),
        ];
        md.push_str(&md_row(&cells));
        tsv.push_str(&cells.join("\t"));
        tsv.push('\n');
    }
    Rendered { markdown: md, tsv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::summarize;

    fn stats(mean: f64, std: Option<f64>, n: usize, n_total: usize) -> SampleStats {
        SampleStats {
            n,
            n_total,
            mean: Some(mean),
            std,
            max: Some(mean),
        }
    }

    #[test]
    fn cell_formats() {
        assert_eq!(
            format_cell(Some(&stats(0.782, Some(0.0100), 20, 20))),
            "78.2 (1.00)"
        );
        assert_eq!(format_converged(49, 96), "49 out of 96");
        assert_eq!(format_cell(Some(&summarize(&[], 3))), "—");
        assert_eq!(format_cell(None), "—");
        assert_eq!(format_cell(Some(&stats(0.5, None, 1, 2))), "50.0");
    }

    #[test]
    fn table1_bolds_best_and_round_trips() {
        let t = Table1 {
            datasets: alloc::vec!["WG-dev".into(), "WSC".into()],
            rows: alloc::vec![
                (
                    "wg-sr".into(),
                    alloc::vec![Some(stats(0.782, Some(0.01), 18, 20)), None]
                ),
                (
                    "css".into(),
                    alloc::vec![
                        Some(stats(0.70123, Some(0.02346), 20, 20)),
                        Some(stats(0.902, Some(0.0051), 20, 20))
                    ]
                ),
            ],
        };
        let r = render_table1(&t);
        assert!(r.markdown.contains("| wg-sr | **78.2 (1.00)** | — |"));
        assert!(r.markdown.contains("sample standard deviation"));
        let lines: Vec<&str> = r.tsv.lines().collect();
        assert_eq!(lines[0], "Objective\tWG-dev\tWSC");
        let row: Vec<&str> = lines[2].split('\t').collect();
        assert_eq!(parse_cell(row[1]), Some((70.1, Some(2.35))));
        assert_eq!(parse_cell(row[2]), Some((90.2, Some(0.51))));
        assert!(row[2].ends_with('*'));
        assert_eq!(parse_cell(lines[1].split('\t').nth(2).unwrap()), None);
    }

    #[test]
    fn table2_layout() {
        let s = summarize(&[0.8, 0.7, 0.75], 96);
        let r = render_table2(&[("wg-sr".into(), s)]);
        let row: Vec<&str> = r.tsv.lines().nth(1).unwrap().split('\t').collect();
        assert_eq!(row, ["wg-sr", "80.0", "75.0", "5.00", "3 out of 96"]);
        let empty = render_table2(&[("mas".into(), summarize(&[], 96))]);
        assert!(empty.tsv.contains("mas\t—\t—\t—\t0 out of 96"));
    }
}
