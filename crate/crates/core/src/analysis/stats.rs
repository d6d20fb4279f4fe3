use super::AnalysisError;

/// Two-sided 95% normal quantile used by the Fisher interval.
pub const Z95: f64 = 1.96;

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(AnalysisError::InsufficientData {
            n: x.len(),
            need: 2,
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) || !sxy.is_finite() {
        return Err(AnalysisError::DegenerateVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 95% confidence interval for a correlation via the Fisher transform.
pub fn pearson_ci95(r: f64, n: usize) -> Result<(f64, f64), AnalysisError> {
    if n <= 3 {
        return Err(AnalysisError::Domain(format!(
            "confidence interval needs n > 3, got {n}"
        )));
    }
    if r.is_nan() || r.abs() >= 1.0 {
        return Err(AnalysisError::Domain(format!(
            "confidence interval needs |r| < 1, got {r}"
        )));
    }
    let z = r.atanh();
    let half = Z95 / ((n - 3) as f64).sqrt();
    Ok(((z - half).tanh(), (z + half).tanh()))
}

/// White audience by exclusion: everyone not targeted as Hispanic,
/// African-American or Asian-American. Unknown race lands here too.
pub fn derive_residual_race(
    total: u64,
    hispanic: u64,
    african_american: u64,
    asian_american: u64,
) -> Result<u64, AnalysisError> {
    let named = hispanic as u128 + african_american as u128 + asian_american as u128;
    if named > total as u128 {
        return Err(AnalysisError::NegativeResidual { total, named });
    }
    Ok(total - named as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_race() {
        assert_eq!(derive_residual_race(100, 20, 15, 5).unwrap(), 60);
        assert_eq!(derive_residual_race(100, 0, 0, 0).unwrap(), 100);
        assert!(matches!(
            derive_residual_race(10, 5, 5, 1),
            Err(AnalysisError::NegativeResidual {
                total: 10,
                named: 11
            })
        ));
    }

    #[test]
    fn pearson_edges() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(AnalysisError::DegenerateVariance)
        ));
        assert!(matches!(
            pearson(&[1.0], &[1.0]),
            Err(AnalysisError::InsufficientData { .. })
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(AnalysisError::LengthMismatch(2, 1))
        ));
    }

    #[test]
    fn ci_domain() {
        assert!(pearson_ci95(1.0, 50).is_err());
        assert!(pearson_ci95(0.5, 3).is_err());
        let (lo, hi) = pearson_ci95(0.0, 20).unwrap();
        assert!((lo + hi).abs() < 1e-15);
    }
}
