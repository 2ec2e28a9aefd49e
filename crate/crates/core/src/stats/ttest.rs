use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Student's two-sample t-test with pooled variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub two_tailed_p: f64,
    /// Both samples have zero variance but different means.
    pub degenerate: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

pub fn t_test_pooled(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("t-test sample"));
        }
    }
    let (n1, n2) = (a.len(), b.len());
    let df = n1 + n2 - 2;
    let (m1, v1) = mean_var(a);
    let (m2, v2) = mean_var(b);
    let pooled = ((n1 - 1) as f64 * v1 + (n2 - 1) as f64 * v2) / df as f64;
    let diff = m1 - m2;
    if diff == 0.0 {
        return Ok(TTestResult {
            t_statistic: 0.0,
            degrees_of_freedom: df,
            two_tailed_p: 1.0,
            degenerate: false,
        });
    }
    if pooled == 0.0 {
        log::warn!("t-test on two constant samples with different means");
        return Ok(TTestResult {
            t_statistic: f64::INFINITY.copysign(diff),
            degrees_of_freedom: df,
            two_tailed_p: 0.0,
            degenerate: true,
        });
    }
    let t = diff / libm::sqrt(pooled * (1.0 / n1 as f64 + 1.0 / n2 as f64));
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        two_tailed_p: t_two_tailed_p(t, df as f64),
        degenerate: false,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn t_two_tailed_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    reg_inc_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    // the fraction converges fast only below the mean of the distribution
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_fraction(1.0 - x, b, a) / b
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let tiny = |v: f64| if v.abs() < TINY { TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / tiny(1.0 - (a + b) * x / (a + 1.0));
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let num = m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
        d = 1.0 / tiny(1.0 + num * d);
        c = tiny(1.0 + num / c);
        h *= d * c;
        let num = -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
        d = 1.0 / tiny(1.0 + num * d);
        c = tiny(1.0 + num / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Pairwise p-values between named samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub names: Vec<alloc::string::String>,
    /// `cells[i][j]` is `None` on the diagonal and where either sample is untestable.
    pub cells: Vec<Vec<Option<TTestResult>>>,
    pub testable: Vec<bool>,
}

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

impl SignificanceMatrix {
    pub fn p(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i][j].map(|c| c.two_tailed_p)
    }

    pub fn significant(&self, i: usize, j: usize) -> bool {
        self.p(i, j).is_some_and(|p| p < SIGNIFICANCE_LEVEL)
    }

    /// Header row, then one row per sample; untestable rows are marked.
    pub fn to_tsv(&self) -> alloc::string::String {
        use core::fmt::Write;
        let mut s = alloc::string::String::from("objective");
        for n in &self.names {
            let _ = write!(s, "\t{n}");
        }
        s.push('\n');
        for (i, n) in self.names.iter().enumerate() {
            s.push_str(n);
            for j in 0..self.names.len() {
                s.push('\t');
                if !self.testable[i] || !self.testable[j] {
                    s.push_str("untestable");
                } else if i == j {
                    s.push('—');
                } else if let Some(p) = self.p(i, j) {
                    let mark = if self.significant(i, j) { "*" } else { "" };
                    let _ = write!(s, "{p:.6}{mark}");
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Test every unordered pair; samples with fewer than two values are untestable.
pub fn significance_matrix(
    samples: &[(alloc::string::String, Vec<f64>)],
) -> Result<SignificanceMatrix> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let k = samples.len();
    let testable: Vec<bool> = samples.iter().map(|(_, v)| v.len() >= 2).collect();
    let mut cells = alloc::vec![alloc::vec![None; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            if testable[i] && testable[j] {
                let r = t_test_pooled(&samples[i].1, &samples[j].1)?;
                cells[i][j] = Some(r);
                cells[j][i] = Some(TTestResult {
                    t_statistic: -r.t_statistic,
                    ..r
                });
            }
        }
    }
    Ok(SignificanceMatrix {
        names: samples.iter().map(|(n, _)| n.clone()).collect(),
        cells,
        testable,
    })
}
