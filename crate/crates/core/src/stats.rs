//! Correlation coefficients and significance tests.
//!
//! p-values use the normal approximation throughout: Fisher's transform for
//! single correlations and Steiger's Z1* statistic for two dependent
//! correlations that share one variable.

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub coefficient: f64,
    pub n: usize,
    pub p_value: f64,
}

impl CorrelationResult {
    pub fn is_significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn standard_normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

pub fn fisher_z(r: f64) -> Result<f64> {
    if !(r.abs() < 1.0) {
        return Err(Error::Domain(format!("Fisher transform undefined for r = {r}")));
    }
    // atanh is evaluated on |r| so that the transform is exactly odd
    Ok(r.signum() * r.abs().atanh())
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::Domain(format!("correlation needs at least 3 samples, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("correlation input contains a non-finite value".into()));
    }
    Ok(())
}

fn product_moment(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Domain("correlation undefined for constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn with_p_value(r: f64, n: usize) -> CorrelationResult {
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        standard_normal_two_sided(r.abs().atanh() * ((n - 3) as f64).sqrt())
    };
    CorrelationResult {
        coefficient: r,
        n,
        p_value,
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    check_pair(x, y)?;
    let r = product_moment(x, y)?;
    Ok(with_p_value(r, x.len()))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    check_pair(x, y)?;
    let rho = product_moment(&average_ranks(x), &average_ranks(y))?;
    Ok(with_p_value(rho, x.len()))
}

/// Steiger's Z1* test for two dependent correlations sharing variable `j`.
///
/// `r_jk` and `r_jh` are the two correlations being compared, `r_kh` the
/// correlation between the non-shared variables. Returns `(Z, two-sided p)`.
pub fn steiger_z(r_jk: f64, r_jh: f64, r_kh: f64, n: usize) -> Result<(f64, f64)> {
    if n < 4 {
        return Err(Error::Domain(format!("Steiger's test needs n >= 4, got {n}")));
    }
    for r in [r_jk, r_jh, r_kh] {
        if !(r.abs() < 1.0) {
            return Err(Error::Domain(format!("correlation {r} outside (-1, 1)")));
        }
    }
    let z1 = fisher_z(r_jk)?;
    let z2 = fisher_z(r_jh)?;
    if z1 == z2 {
        return Ok((0.0, 1.0));
    }
    let rm = (r_jk + r_jh) / 2.0;
    let rm2 = rm * rm;
    let psi = r_kh * (1.0 - 2.0 * rm2) - 0.5 * rm2 * (1.0 - 2.0 * rm2 - r_kh * r_kh);
    let s = psi / ((1.0 - rm2) * (1.0 - rm2));
    let z = (z1 - z2) * ((n as f64 - 3.0) / (2.0 - 2.0 * s)).sqrt();
    if !z.is_finite() {
        return Err(Error::Domain("Steiger statistic is not finite".into()));
    }
    Ok((z, standard_normal_two_sided(z)))
}
