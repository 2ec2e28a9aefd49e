use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::run::{is_converged, RunConfig, RunResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpace {
    pub learning_rates: Vec<f64>,
    pub epochs: Vec<usize>,
    pub batch_sizes: Vec<usize>,
}

impl Default for GridSpace {
    fn default() -> Self {
        GridSpace {
            learning_rates: alloc::vec![5e-6, 1e-5, 3e-5, 5e-5],
            epochs: alloc::vec![3, 4, 5, 8],
            batch_sizes: alloc::vec![8, 16],
        }
    }
}

pub const DEFAULT_GRID_SEEDS: [u64; 3] = [0, 1, 2];

impl GridSpace {
    pub fn single(learning_rate: f64, epochs: usize, batch_size: usize) -> Self {
        GridSpace {
            learning_rates: alloc::vec![learning_rate],
            epochs: alloc::vec![epochs],
            batch_sizes: alloc::vec![batch_size],
        }
    }

    pub fn num_points(&self) -> usize {
        self.learning_rates.len() * self.epochs.len() * self.batch_sizes.len()
    }

    /// Every (point, seed) combination, seeds innermost.
    pub fn configs(&self, base: &RunConfig, seeds: &[u64]) -> Vec<RunConfig> {
        let mut out = Vec::with_capacity(self.num_points() * seeds.len());
        for &lr in &self.learning_rates {
            for &epochs in &self.epochs {
                for &batch in &self.batch_sizes {
                    for &seed in seeds {
                        out.push(RunConfig {
                            learning_rate: lr,
                            num_epochs: epochs,
                            batch_size: batch,
                            seed,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// Result of one grid or sweep entry; failures do not stop the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunOutcome {
    Done(RunResult),
    Failed { config: RunConfig, error: String },
}

impl RunOutcome {
    pub fn config(&self) -> &RunConfig {
        match self {
            RunOutcome::Done(r) => &r.config,
            RunOutcome::Failed { config, .. } => config,
        }
    }

    pub fn result(&self) -> Option<&RunResult> {
        match self {
            RunOutcome::Done(r) => Some(r),
            RunOutcome::Failed { .. } => None,
        }
    }
}

fn run_all<F>(configs: Vec<RunConfig>, mut run: F) -> Vec<RunOutcome>
where
    F: FnMut(&RunConfig) -> Result<RunResult>,
{
    configs
        .into_iter()
        .map(|config| match run(&config) {
            Ok(r) => RunOutcome::Done(r),
            Err(e) => {
                log::warn!("run {} failed: {e}", config.run_id());
                RunOutcome::Failed {
                    error: e.to_string(),
                    config,
                }
            }
        })
        .collect()
}

/// Run every configuration of `space` under each seed, in order.
pub fn grid_search<F>(space: &GridSpace, base: &RunConfig, seeds: &[u64], run: F) -> Vec<RunOutcome>
where
    F: FnMut(&RunConfig) -> Result<RunResult>,
{
    run_all(space.configs(base, seeds), run)
}

/// Seeds `base_seed..base_seed + n`.
pub fn sweep_configs(config: &RunConfig, n_seeds: usize, base_seed: u64) -> Result<Vec<RunConfig>> {
    if n_seeds == 0 {
        return Err(Error::InvalidConfig(
            "a seed sweep needs at least one seed".into(),
        ));
    }
    Ok((0..n_seeds as u64)
        .map(|i| RunConfig {
            seed: base_seed + i,
            ..config.clone()
        })
        .collect())
}

pub fn seed_sweep<F>(
    config: &RunConfig,
    n_seeds: usize,
    base_seed: u64,
    run: F,
) -> Result<Vec<RunOutcome>>
where
    F: FnMut(&RunConfig) -> Result<RunResult>,
{
    Ok(run_all(sweep_configs(config, n_seeds, base_seed)?, run))
}

/// The grid point whose best seed has the highest final dev accuracy.
/// Diverged runs are ignored. Ties go to the lower learning rate, then fewer
/// epochs, then the smaller batch. Returns the best run's configuration.
pub fn select_best(results: &[RunResult]) -> Result<RunConfig> {
    let mut points: Vec<(&RunResult, f64)> = Vec::new();
    for r in results.iter().filter(|r| !r.diverged) {
        match points
            .iter_mut()
            .find(|(p, _)| p.config.same_point(&r.config))
        {
            Some((best, acc)) => {
                if r.final_dev_accuracy > *acc {
                    *best = r;
                    *acc = r.final_dev_accuracy;
                }
            }
            None => points.push((r, r.final_dev_accuracy)),
        }
    }
    let key = |r: &RunResult| {
        (
            r.config.learning_rate,
            r.config.num_epochs,
            r.config.batch_size,
        )
    };
    let mut best: Option<(&RunResult, f64)> = None;
    for &(r, acc) in &points {
        best = match best {
            None => Some((r, acc)),
            Some((b, bacc)) => {
                if acc > bacc {
                    Some((r, acc))
                } else if acc == bacc {
                    let (lr, e, bs) = key(r);
                    let (blr, be, bbs) = key(b);
                    let earlier = lr < blr || (lr == blr && (e < be || (e == be && bs < bbs)));
                    if earlier {
                        log::info!(
                            "select_best: tie at {acc}, preferring {}",
                            r.config.run_id()
                        );
                        Some((r, acc))
                    } else {
                        log::info!("select_best: tie at {acc}, keeping {}", b.config.run_id());
                        Some((b, bacc))
                    }
                } else {
                    Some((b, bacc))
                }
            }
        };
    }
    best.map(|(r, _)| r.config.clone())
        .ok_or(Error::AllRunsDiverged)
}

/// Number of results flagged converged, and whether every flag matches
/// [`is_converged`] on the stored accuracy.
pub fn convergence_count(results: &[RunResult]) -> (usize, bool) {
    let n = results.iter().filter(|r| r.converged).count();
    let consistent = results
        .iter()
        .all(|r| r.converged == (!r.diverged && is_converged(r.final_dev_accuracy)));
    (n, consistent)
}
