use serde::{Deserialize, Serialize};

use super::ChemError;

/// Two-sample Kolmogorov–Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub critical: f64,
    pub reject: bool,
}

/// Asymptotic coefficient `c(α)` of the two-sample critical value.
///
/// The usual table entries are returned as printed; other levels use
/// `√(−½·ln(α/2))`.
pub fn ks_coefficient(alpha: f64) -> Result<f64, ChemError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ChemError::Alpha(alpha));
    }
    const TABLE: [(f64, f64); 6] = [
        (0.10, 1.224),
        (0.05, 1.358),
        (0.025, 1.480),
        (0.01, 1.628),
        (0.005, 1.731),
        (0.001, 1.949),
    ];
    if let Some(&(_, c)) = TABLE.iter().find(|(a, _)| (a - alpha).abs() < 1e-12) {
        return Ok(c);
    }
    Ok((-0.5 * (alpha / 2.0).ln()).sqrt())
}

pub fn ks_critical(n: usize, m: usize, alpha: f64) -> Result<f64, ChemError> {
    let (n, m) = (n as f64, m as f64);
    Ok(ks_coefficient(alpha)? * ((n + m) / (n * m)).sqrt())
}

/// Largest vertical gap between the two empirical CDFs, by a merge over the
/// sorted samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, ChemError> {
    if a.is_empty() || b.is_empty() {
        return Err(ChemError::EmptySample);
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(ChemError::NanSample);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] == v {
            i += 1;
        }
        while j < y.len() && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult, ChemError> {
    let d = ks_statistic(a, b)?;
    let critical = ks_critical(a.len(), b.len(), alpha)?;
    Ok(KsResult {
        d,
        n: a.len(),
        m: b.len(),
        alpha,
        critical,
        reject: d > critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        let a = [0.1, 0.5, 0.5, 2.0];
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[0.0; 5], &[1.0; 3]).unwrap(), 1.0);
        assert!(ks_statistic(&[], &[1.0]).is_err());
    }

    #[test]
    fn critical_value() {
        let c = ks_critical(1000, 1000, 0.05).unwrap();
        assert!((c - 1.358 * (2.0f64 / 1000.0).sqrt()).abs() < 1e-12);
        assert!((c - 0.0607).abs() < 1e-4);
        assert!(ks_coefficient(0.0).is_err());
        let r = ks_two_sample(&[1.0, 2.0], &[1.0, 2.0], 0.05).unwrap();
        assert!(!r.reject);
    }

    #[test]
    fn ties_across_samples() {
        // CDFs only compared after all copies of a value are consumed
        let d = ks_statistic(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
    }
}
