//! Heat-kernel norms of functions and of empirical fluctuations.

mod field;
mod grid;
mod pairwise;

pub use field::{s_n_field, EmpiricalField, Field, ModelField, Scaled, Sum, ZeroField};
pub use grid::{
    norm_calw, norm_estimate, norm_in, norm_scrw, norm_w, NormEstimate, QuadratureSpec, XRule,
};
pub use pairwise::{mu_norm_sq, PairwiseHNorm};
pub(crate) use grid::{power_completion, t_nodes};

use crate::error::{Error, Result};
use crate::kernels::{phi_norm, NormParams, Space};
use crate::measures::MeasureModel;

/// `E‖μ_N^ε - μ^ε‖²_{H^{-α}} = (‖Φ_ε‖² - ‖μ^ε‖²) / N`.
pub fn h_second_moment_exact(model: &MeasureModel, alpha: f64, eps: f64, n: usize) -> Result<f64> {
    let d = model.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    if eps == 0.0 && alpha <= 0.5 * d as f64 {
        return Err(Error::NotInSpace(format!(
            "point masses are not in H^-alpha for alpha = {alpha} <= d/2 = {}",
            0.5 * d as f64
        )));
    }
    let params = NormParams::new(alpha, 2.0, d, eps)?;
    let phi = phi_norm(&params, Space::Cal)?;
    let mu = mu_norm_sq(model, alpha, eps)?;
    let diff = phi * phi - mu;
    // Point masses cancel to rounding level.
    let diff = if diff <= 1e-12 * phi * phi { 0.0 } else { diff };
    Ok(diff / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_gaussian_second_moment() {
        let g = MeasureModel::gaussian(vec![0.0], 1.0).unwrap();
        let v = h_second_moment_exact(&g, 1.0, 0.0, 1).unwrap();
        assert!((v - 0.192_434_6).abs() < 1e-7, "{v}");
        let v50 = h_second_moment_exact(&g, 1.0, 0.0, 50).unwrap();
        assert!((v50 * 50.0 - v).abs() < 1e-15);
    }

    #[test]
    fn point_mass_second_moment_vanishes() {
        let v = h_second_moment_exact(&MeasureModel::dirac(1), 1.0, 0.0, 7).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn below_half_dimension_is_rejected() {
        let g = MeasureModel::gaussian(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(h_second_moment_exact(&g, 1.0, 0.0, 10), Err(Error::NotInSpace(_))));
        assert!(h_second_moment_exact(&g, 1.0, 0.01, 10).is_ok());
    }

    #[test]
    fn pairwise_agrees_with_grid_norm() {
        let g = MeasureModel::gaussian(vec![0.0], 1.0).unwrap();
        let eps = 0.05;
        let h = PairwiseHNorm::new(&g, 1.0, eps).unwrap();
        let params = NormParams::new(1.0, 2.0, 1, eps).unwrap();
        let quad = QuadratureSpec::default();
        for seed in 0..3 {
            let s = g.sample(12, seed).unwrap();
            let pair = h.norm(&s.empirical_measure());
            let grid = norm_calw(&s_n_field(&s, &g, eps), &params, &quad).unwrap();
            assert!((pair - grid).abs() < 5e-3 * grid, "{pair} {grid}");
        }
    }
}
