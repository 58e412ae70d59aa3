use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(ln N, ln value)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

/// Fits `ln value = intercept + slope · ln n` by ordinary least squares.
pub fn fit_log_slope(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientSample { got: points.len(), need: 3 });
    }
    let mut logs = Vec::with_capacity(points.len());
    for (index, &(n, value)) in points.iter().enumerate() {
        if !(n > 0.0) {
            return Err(Error::LogOfNonpositive { index, value: n });
        }
        if !(value > 0.0) {
            return Err(Error::LogOfNonpositive { index, value });
        }
        logs.push((n.ln(), value.ln()));
    }
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-12 * mx.abs().max(1.0).powi(2) {
        return Err(Error::DegenerateAbscissae(format!("{} points share abscissa ln n = {mx}", points.len())));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>().max(0.0);
    let stderr = (ssr / (m - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(RateFit { slope, intercept, stderr, r_squared, points: logs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ns() -> Vec<f64> {
        (5..=11).map(|k| 2f64.powi(k)).collect()
    }

    #[test]
    fn exact_inverse_sqrt() {
        let pts: Vec<_> = ns().into_iter().map(|n| (n, 3.0 / n.sqrt())).collect();
        let f = fit_log_slope(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.stderr < 1e-10);
    }

    #[test]
    fn constant_has_zero_slope() {
        let pts: Vec<_> = ns().into_iter().map(|n| (n, 0.7)).collect();
        assert!(fit_log_slope(&pts).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn permille_noise() {
        let noise = [1.0007, 0.9992, 1.0004, 0.9999, 0.9991, 1.0010, 0.9996];
        let pts: Vec<_> = ns().into_iter().zip(noise).map(|(n, e)| (n, e / n.sqrt())).collect();
        assert!((fit_log_slope(&pts).unwrap().slope + 0.5).abs() < 0.01);
    }

    #[test]
    fn errors() {
        assert!(matches!(fit_log_slope(&[(1.0, 1.0), (2.0, 1.0)]), Err(Error::InsufficientSample { .. })));
        assert!(matches!(
            fit_log_slope(&[(4.0, 1.0), (4.0, 2.0), (4.0, 3.0)]),
            Err(Error::DegenerateAbscissae(_))
        ));
        assert!(matches!(
            fit_log_slope(&[(1.0, 1.0), (2.0, 0.0), (4.0, 3.0)]),
            Err(Error::LogOfNonpositive { index: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn recovers_power_laws(c in 0.01f64..100.0, s in -2.0f64..2.0) {
            let pts: Vec<_> = ns().into_iter().map(|n| (n, c * n.powf(s))).collect();
            let f = fit_log_slope(&pts).unwrap();
            prop_assert!((f.slope - s).abs() < 1e-9);
            prop_assert!(f.stderr >= 0.0);
        }
    }
}
