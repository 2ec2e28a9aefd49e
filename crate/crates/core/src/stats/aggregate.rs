use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::RunResult;

/// Summary of one population of accuracies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    /// Values that survived filtering.
    pub n: usize,
    /// Values before filtering.
    pub n_total: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (`n − 1` denominator); absent for `n < 2`.
    pub std: Option<f64>,
    pub max: Option<f64>,
}

/// Two-pass mean and sample standard deviation.
pub fn summarize(values: &[f64], n_total: usize) -> SampleStats {
    let n = values.len();
    if n == 0 {
        return SampleStats {
            n,
            n_total,
            mean: None,
            std: None,
            max: None,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (n >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        libm::sqrt(ss / (n - 1) as f64)
    });
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    SampleStats {
        n,
        n_total,
        mean: Some(mean),
        std,
        max: Some(max),
    }
}

/// Final dev accuracies of `results`, optionally keeping only converged runs.
pub fn converged_accuracies(results: &[RunResult], filter_converged: bool) -> Vec<f64> {
    results
        .iter()
        .filter(|r| !filter_converged || r.converged)
        .map(|r| r.final_dev_accuracy)
        .collect()
}

pub fn aggregate(results: &[RunResult], filter_converged: bool) -> Result<SampleStats> {
    if results.is_empty() {
        return Err(Error::EmptyInput("run results"));
    }
    Ok(summarize(
        &converged_accuracies(results, filter_converged),
        results.len(),
    ))
}
