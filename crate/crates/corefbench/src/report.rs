//! Aggregate run records into the seed-wise and grid-wide report tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Result};
use corefbench_core::objectives::Objective;
use corefbench_core::stats::{
    aggregate, render_table1, render_table2, significance_matrix, summarize, Rendered, SampleStats,
    Table1,
};

use crate::records::{write_atomic, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Style {
    /// Objectives by datasets, mean (std) over converged seeds.
    Table1,
    /// Maximum, average, spread and converged count per objective.
    Table2,
}

fn by_objective(records: &[RunRecord]) -> Vec<(Objective, Vec<&RunRecord>)> {
    Objective::ALL
        .into_iter()
        .map(|o| {
            (
                o,
                records
                    .iter()
                    .filter(|r| r.result.config.objective == o)
                    .collect::<Vec<_>>(),
            )
        })
        .filter(|(_, rs)| !rs.is_empty())
        .collect()
}

/// Report columns: the dev set first, then every extra evaluation set seen.
pub fn columns(records: &[RunRecord], dev_name: &str) -> Vec<String> {
    let extra: BTreeSet<&String> = records.iter().flat_map(|r| r.evaluations.keys()).collect();
    std::iter::once(dev_name.to_string())
        .chain(extra.into_iter().filter(|c| *c != dev_name).cloned())
        .collect()
}

/// Accuracies on `column` of the converged runs that were scored on it,
/// and how many runs were scored on it at all.
fn converged_column(runs: &[&RunRecord], column: &str, dev_name: &str) -> (Vec<f64>, usize) {
    let scored: Vec<(&RunRecord, f64)> = runs
        .iter()
        .filter_map(|r| r.accuracy(column, dev_name).map(|a| (*r, a)))
        .collect();
    let values = scored
        .iter()
        .filter(|(r, _)| r.result.converged)
        .map(|(_, a)| *a)
        .collect();
    (values, scored.len())
}

pub fn table1(records: &[RunRecord], dev_name: &str) -> Table1 {
    let datasets = columns(records, dev_name);
    let rows = by_objective(records)
        .into_iter()
        .map(|(o, runs)| {
            let cells = datasets
                .iter()
                .map(|col| {
                    let (values, total) = converged_column(&runs, col, dev_name);
                    (total > 0).then(|| summarize(&values, total))
                })
                .collect();
            (o.name().to_string(), cells)
        })
        .collect();
    Table1 { datasets, rows }
}

pub fn table2(records: &[RunRecord]) -> Result<Vec<(String, SampleStats)>> {
    by_objective(records)
        .into_iter()
        .map(|(o, runs)| {
            let results: Vec<_> = runs.iter().map(|r| r.result.clone()).collect();
            Ok((o.name().to_string(), aggregate(&results, true)?))
        })
        .collect()
}

pub const SIGNIFICANCE_HEADER: &str = "dataset\tobjective_a\tobjective_b\tt\tdf\tp\tsignificant";

/// Pooled t-tests between every pair of objectives on every column, over
/// converged runs. Pairs where either side has fewer than two runs are
/// marked untestable.
pub fn significance(records: &[RunRecord], dev_name: &str) -> Result<String> {
    let groups = by_objective(records);
    let mut out = String::from(SIGNIFICANCE_HEADER);
    out.push('\n');
    if groups.len() < 2 {
        return Ok(out);
    }
    for col in columns(records, dev_name) {
        let samples: Vec<(String, Vec<f64>)> = groups
            .iter()
            .map(|(o, runs)| {
                (
                    o.name().to_string(),
                    converged_column(runs, &col, dev_name).0,
                )
            })
            .collect();
        let m = significance_matrix(&samples)?;
        for i in 0..m.names.len() {
            for j in i + 1..m.names.len() {
                write!(out, "{col}\t{}\t{}\t", m.names[i], m.names[j])?;
                match m.cells[i][j] {
                    Some(t) => {
                        let mark = if m.significant(i, j) { "*" } else { "" };
                        writeln!(
                            out,
                            "{:.6}\t{}\t{:.6}\t{mark}",
                            t.t_statistic, t.degrees_of_freedom, t.two_tailed_p
                        )?;
                    }
                    None => writeln!(out, "untestable\tuntestable\tuntestable\t")?,
                }
            }
        }
    }
    Ok(out)
}

fn write_pair(dir: &Path, stem: &str, r: &Rendered) -> Result<Vec<PathBuf>> {
    let md = dir.join(format!("{stem}.md"));
    let tsv = dir.join(format!("{stem}.tsv"));
    write_atomic(&md, r.markdown.as_bytes())?;
    write_atomic(&tsv, r.tsv.as_bytes())?;
    Ok(vec![md, tsv])
}

/// Render `records` in `style` into `dir`; returns the files written.
pub fn write_report(
    records: &[RunRecord],
    style: Style,
    dev_name: &str,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    ensure!(!records.is_empty(), "no run records to report on");
    std::fs::create_dir_all(dir)?;
    match style {
        Style::Table1 => {
            let mut files = write_pair(
                dir,
                "report_table1",
                &render_table1(&table1(records, dev_name)),
            )?;
            let sig = dir.join("significance.tsv");
            write_atomic(&sig, significance(records, dev_name)?.as_bytes())?;
            files.push(sig);
            Ok(files)
        }
        Style::Table2 => write_pair(dir, "report_table2", &render_table2(&table2(records)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::tests_support::fake_result;
    use corefbench_core::training::Evaluation;

    fn rec(o: Objective, seed: u64, dev: f64, wsc: Option<f64>) -> RunRecord {
        let mut r = RunRecord::new(fake_result(o, seed, dev));
        if let Some(a) = wsc {
            r.evaluations.insert(
                "wsc".into(),
                Evaluation {
                    accuracy: a,
                    correct: 0,
                    total: 1,
                    ties: 0,
                    excluded: 0,
                },
            );
        }
        r
    }

    #[test]
    fn table1_filters_on_dev_convergence() {
        let rs = vec![
            rec(Objective::Css, 0, 0.8, Some(0.9)),
            rec(Objective::Css, 1, 0.55, Some(0.99)),
            rec(Objective::Css, 2, 0.7, Some(0.8)),
            rec(Objective::WgSr, 0, 0.75, None),
        ];
        let t = table1(&rs, "dev");
        assert_eq!(t.datasets, ["dev", "wsc"]);
        assert_eq!(t.rows[0].0, "wg-sr");
        assert!(t.rows[0].1[1].is_none());
        let css_wsc = t.rows[1].1[1].unwrap();
        assert_eq!((css_wsc.n, css_wsc.n_total), (2, 3));
        assert!((css_wsc.mean.unwrap() - 0.85).abs() < 1e-12);
        let sig = significance(&rs, "dev").unwrap();
        assert!(sig.contains("dev\twg-sr\tcss\tuntestable"));
    }

    #[test]
    fn table2_counts_out_of_all_runs() {
        let rs: Vec<RunRecord> = (0..4)
            .map(|s| rec(Objective::Mas, s, [0.5, 0.7, 0.8, 0.6][s as usize], None))
            .collect();
        let rows = table2(&rs).unwrap();
        let r = render_table2(&rows);
        assert!(
            r.tsv.contains("mas\t80.0\t75.0\t7.07\t2 out of 4"),
            "{}",
            r.tsv
        );
        let dir = tempfile::tempdir().unwrap();
        assert!(write_report(&[], Style::Table2, "dev", dir.path()).is_err());
    }
}
