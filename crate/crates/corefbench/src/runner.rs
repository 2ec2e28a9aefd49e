//! Executes batches of runs: resume from existing records, bounded
//! parallelism, per-run record files.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{Context, Result};
use corefbench_core::encoder::Vocab;
use corefbench_core::numerics::ParamStore;
use corefbench_core::schema::SchemaInstance;
use corefbench_core::training::{evaluate, prepare_set, train_run_observed, RunConfig, RunData};

use crate::checkpoint::Checkpoint;
use crate::records::{load_record, record_path, save_record, RunRecord};

/// Everything a run needs besides its configuration. Shared read-only
/// between worker threads.
pub struct Workload {
    pub train: Vec<SchemaInstance>,
    pub dev: Vec<SchemaInstance>,
    pub vocab: Vocab,
    pub pretrained: Option<ParamStore>,
    /// Additional labeled sets scored with each run's final model.
    pub eval_sets: Vec<(String, Vec<SchemaInstance>)>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Workload {
    pub fn execute(&self, config: &RunConfig) -> Result<RunRecord> {
        let start = Instant::now();
        let data = RunData {
            train: &self.train,
            dev: &self.dev,
            vocab: &self.vocab,
            pretrained: self.pretrained.as_ref(),
        };
        let trained = train_run_observed(config, data, |e| {
            log::trace!(
                "{} epoch {} step {} loss {:.5} lr {:.3e}",
                config.run_id(),
                e.epoch,
                e.step,
                e.loss,
                e.lr
            );
        })?;
        let mut record = RunRecord::new(trained.result);
        for (name, set) in &self.eval_sets {
            let prepared = prepare_set(config.objective, set, &self.vocab)?;
            let ev = evaluate(&trained.model, &trained.store, &prepared)
                .with_context(|| format!("evaluating {name}"))?;
            record.evaluations.insert(name.clone(), ev);
        }
        if let Some(dir) = &self.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}.json", config.run_id()));
            Checkpoint::new(
                config.encoder,
                &self.vocab,
                Some(config.objective),
                &trained.store,
            )
            .save(&path)?;
            record.checkpoint = Some(path.display().to_string());
        }
        record.result.wall_time_secs = start.elapsed().as_secs_f64();
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// A record for this run id was already on disk.
    Resumed(RunRecord),
    Trained(RunRecord),
    Failed {
        run_id: String,
        error: String,
    },
}

impl Outcome {
    pub fn record(&self) -> Option<&RunRecord> {
        match self {
            Outcome::Resumed(r) | Outcome::Trained(r) => Some(r),
            Outcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Summary {
    pub resumed: usize,
    pub trained: usize,
    pub failed: usize,
}

pub fn summarize(outcomes: &[Outcome]) -> Summary {
    let mut s = Summary::default();
    for o in outcomes {
        match o {
            Outcome::Resumed(_) => s.resumed += 1,
            Outcome::Trained(_) => s.trained += 1,
            Outcome::Failed { .. } => s.failed += 1,
        }
    }
    s
}

fn run_one<F>(config: &RunConfig, records_dir: &Path, run: &F) -> Outcome
where
    F: Fn(&RunConfig) -> Result<RunRecord>,
{
    let run_id = config.run_id();
    let path = record_path(records_dir, &run_id);
    if path.exists() {
        match load_record(&path) {
            Ok(r) => {
                log::info!("{run_id}: record exists, skipping");
                return Outcome::Resumed(r);
            }
            Err(e) => log::warn!("{run_id}: unreadable record ({e:#}), retraining"),
        }
    }
    log::info!("{run_id}: training");
    let result = run(config).and_then(|r| save_record(records_dir, &r).map(|_| r));
    match result {
        Ok(r) => {
            log::info!(
                "{run_id}: dev accuracy {:.4}{} ({:.1}s)",
                r.result.final_dev_accuracy,
                if r.result.converged {
                    ""
                } else {
                    ", not converged"
                },
                r.result.wall_time_secs
            );
            Outcome::Trained(r)
        }
        Err(e) => {
            log::error!("{run_id}: failed: {e:#}");
            Outcome::Failed {
                run_id,
                error: format!("{e:#}"),
            }
        }
    }
}

/// Run every configuration not already recorded in `records_dir`, using up
/// to `jobs` threads. Outcomes come back in configuration order; failures
/// are reported but not written.
pub fn run_configs<F>(
    configs: &[RunConfig],
    records_dir: &Path,
    jobs: usize,
    run: F,
) -> Result<Vec<Outcome>>
where
    F: Fn(&RunConfig) -> Result<RunRecord> + Sync,
{
    std::fs::create_dir_all(records_dir)
        .with_context(|| format!("creating {}", records_dir.display()))?;
    let jobs = jobs.clamp(1, configs.len().max(1));
    if jobs == 1 {
        return Ok(configs
            .iter()
            .map(|c| run_one(c, records_dir, &run))
            .collect());
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Outcome>>> = Mutex::new(vec![None; configs.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = configs.get(i) else { break };
                let outcome = run_one(config, records_dir, &run);
                slots
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });
    Ok(slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|o| o.expect("every slot filled"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::tests_support::fake_result;
    use corefbench_core::objectives::Objective;
    use std::sync::atomic::AtomicUsize;

    fn configs(n: u64) -> Vec<RunConfig> {
        (0..n)
            .map(|s| fake_result(Objective::Bwp, s, 0.7).config)
            .collect()
    }

    #[test]
    fn resumes_and_keeps_order() {
        let dir = tempfile::tempdir().unwrap();
        let cs = configs(6);
        let calls = AtomicUsize::new(0);
        let run = |c: &RunConfig| {
            calls.fetch_add(1, Ordering::SeqCst);
            if c.seed == 4 {
                anyhow::bail!("boom");
            }
            Ok(RunRecord::new(fake_result(
                Objective::Bwp,
                c.seed,
                0.5 + c.seed as f64 / 100.0,
            )))
        };
        let first = run_configs(&cs[..3], dir.path(), 2, run).unwrap();
        assert_eq!(summarize(&first).trained, 3);
        let all = run_configs(&cs, dir.path(), 3, run).unwrap();
        assert_eq!(
            summarize(&all),
            Summary {
                resumed: 3,
                trained: 2,
                failed: 1
            }
        );
        assert_eq!(calls.load(Ordering::SeqCst), 6);
        for (o, c) in all.iter().zip(&cs) {
            if let Some(r) = o.record() {
                assert_eq!(r.result.config.seed, c.seed);
            }
        }
        assert!(!record_path(dir.path(), &cs[4].run_id()).exists());
    }
}
