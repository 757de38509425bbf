use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Kolmogorov–Smirnov distance between the empirical CDF of `sample` and the
/// `N(0, sigma2)` CDF.
pub fn ks_statistic(sample: &[f64], sigma2: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::invalid("KS statistic of an empty sample"));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid("reference variance must be positive"));
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("sample contains NaN"));
    }
    let reference = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = reference.cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// `N(0, sigma2)` quantiles at the plotting positions `(k − ½)/m`.
pub fn normal_reference_quantiles(m: usize, sigma2: f64) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid("reference variance must be positive"));
    }
    let reference = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((0..m)
        .map(|k| reference.inverse_cdf((k as f64 + 0.5) / m as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample_at_center() {
        assert_eq!(ks_statistic(&[0.0; 10], 1.0).unwrap(), 0.5);
    }

    #[test]
    fn reflection_symmetry() {
        let s = [0.3, -1.2, 2.5, 0.01, -0.4, 0.9];
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let a = ks_statistic(&s, 1.7).unwrap();
        let b = ks_statistic(&neg, 1.7).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(ks_statistic(&[], 1.0).is_err());
        assert!(ks_statistic(&[1.0], 0.0).is_err());
        assert!(ks_statistic(&[1.0], -1.0).is_err());
        assert!(normal_reference_quantiles(3, 0.0).is_err());
    }

    #[test]
    fn quantiles_are_symmetric() {
        let q = normal_reference_quantiles(4, 4.0).unwrap();
        assert!((q[0] + q[3]).abs() < 1e-12 && (q[1] + q[2]).abs() < 1e-12);
        assert!(q.windows(2).all(|w| w[0] < w[1]));
    }
}
