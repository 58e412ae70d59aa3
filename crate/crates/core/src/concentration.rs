//! Subgaussian proxies, the maximal-function bound on `σ(x, t)`, and
//! Gaussian tail reference curves. Every bound is reported without its
//! absolute constant; callers fit the constant.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{phi_norm, unit_ball_volume, NormParams, Regime, Space};
use crate::measures::{default_radius_grid, log_grid, replica_seed, MeasureModel};
use crate::norms::{power_completion, t_nodes, QuadratureSpec, XRule};

/// Draws required by [`psi2_estimate`].
pub const MIN_PSI2_DRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Psi2Method {
    MomentRatio,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psi2Estimate {
    pub value: f64,
    pub method: Psi2Method,
    pub max_order: u32,
    pub n_samples: usize,
}

/// `sup_{k even, k <= 12} (E|Z|^k)^{1/k} / √k` over the sample.
pub fn psi2_estimate(draws: &[f64]) -> Result<Psi2Estimate> {
    psi2_estimate_with(draws, 12)
}

pub fn psi2_estimate_with(draws: &[f64], max_order: u32) -> Result<Psi2Estimate> {
    if draws.len() < MIN_PSI2_DRAWS {
        return Err(Error::InsufficientSample { got: draws.len(), need: MIN_PSI2_DRAWS });
    }
    if max_order < 2 || max_order % 2 != 0 {
        return Err(Error::InvalidParameter(format!("max_order must be even and >= 2, got {max_order}")));
    }
    let scale = draws.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let mut value = 0.0f64;
    if scale > 0.0 {
        let n = draws.len() as f64;
        for k in (2..=max_order).step_by(2) {
            // Moments of |Z|/max stay in [0, 1].
            let m: f64 = draws.iter().map(|z| (z.abs() / scale).powi(k as i32)).sum::<f64>() / n;
            value = value.max(scale * m.powf(1.0 / k as f64) / (k as f64).sqrt());
        }
    }
    Ok(Psi2Estimate { value, method: Psi2Method::MomentRatio, max_order, n_samples: draws.len() })
}

/// `(4πt)^{-d/2} exp(-1 / (4t (V_d Mμ(x))^{2/d}))`, the shape of the bound on
/// `‖Φ_t(x - X_1)‖_ψ₂` without its constant.
pub fn sigma_bound_rhs(x: &[f64], t: f64, model: &MeasureModel) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("t must lie in (0, 1), got {t}")));
    }
    let m = model.maximal_function(x, &default_radius_grid());
    Ok(sigma_shape(x.len(), t, gauss_scale(x.len(), m)))
}

/// `(V_d M)^{-2/d}`; zero where the maximal function is infinite.
fn gauss_scale(d: usize, maximal: f64) -> f64 {
    if maximal.is_infinite() {
        0.0
    } else if maximal <= 0.0 {
        f64::INFINITY
    } else {
        (unit_ball_volume(d) * maximal).powf(-2.0 / d as f64)
    }
}

#[inline]
fn sigma_shape(d: usize, t: f64, scale: f64) -> f64 {
    (4.0 * PI * t).powf(-0.5 * d as f64) * (-scale / (4.0 * t)).exp()
}

/// Result of comparing the weighted `L^p` size of the `σ` bound with
/// `d^{1/p} ‖Φ_ε‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub space: Space,
    /// Smallest resolved `t`; the rest is a power-law completion.
    pub t_lo: f64,
    pub nodes: usize,
}

const SIGMA_NODE_CAP: [usize; 2] = [200_000, 40_000];

/// Evaluates both sides of the `σ`-integral inequality in the space picked
/// by `α` (calligraphic for fractional `α`, script for integer `α`).
pub fn sigma_integral_check(model: &MeasureModel, params: &NormParams, quad: &QuadratureSpec) -> Result<SigmaCheck> {
    let d = params.dim;
    if model.dim() != d {
        return Err(Error::InvalidParameter(format!("model dimension {} != {d}", model.dim())));
    }
    if d > 2 {
        return Err(Error::InvalidParameter("sigma check supports d <= 2".into()));
    }
    let (eps, p, alpha) = (params.eps, params.p, params.alpha);
    if eps == 0.0 && params.regime() != Regime::Supercritical {
        return Err(Error::Divergent(format!(
            "‖Φ_0‖ is infinite unless alpha > d/q (alpha = {alpha}, d/q = {})",
            d as f64 / params.q()
        )));
    }
    let XRule::TensorGrid { points_per_axis, nodes_per_width, max_nodes, .. } = quad.x_rule else {
        return Err(Error::InvalidParameter("sigma check needs a tensor grid rule".into()));
    };
    let space = Space::Auto.resolve(alpha);
    let rhs = (d as f64).powf(1.0 / p) * phi_norm(params, space)?;

    let (mut lo, mut hi) = model.mass_box(quad.tail_tol);
    let reach = (4.0 * (1.0 + eps) * (1.0 / quad.tail_tol).ln()).sqrt() + 1.0;
    for j in 0..d {
        lo[j] -= reach;
        hi[j] += reach;
    }
    let extent: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
    let volume: f64 = extent.iter().product();
    let cap = max_nodes.min(SIGMA_NODE_CAP[d - 1]) as f64;
    let min_extent = extent.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_res = (2.0 * (quad.t_min + eps)).sqrt() / nodes_per_width;
    let h = h_res.max((volume / cap).powf(1.0 / d as f64)).min(min_extent / points_per_axis as f64);
    let t_lo = ((nodes_per_width * h).powi(2) / 2.0 - eps).clamp(quad.t_min, 0.5);

    // Node coordinates i·h inside the box.
    let ranges: Vec<(i64, i64)> =
        lo.iter().zip(&hi).map(|(a, b)| ((a / h).ceil() as i64, (b / h).floor() as i64)).collect();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    match d {
        1 => xs.extend((ranges[0].0..=ranges[0].1).map(|i| vec![i as f64 * h])),
        _ => {
            for i in ranges[0].0..=ranges[0].1 {
                for j in ranges[1].0..=ranges[1].1 {
                    xs.push(vec![i as f64 * h, j as f64 * h]);
                }
            }
        }
    }
    let diag = volume.powf(1.0 / d as f64) * 2.0;
    let radii = log_grid(1e-4 * h.min(1.0), diag, 200);
    let scales: Vec<f64> =
        xs.par_iter().map(|x| gauss_scale(d, model.maximal_function(x, &radii))).collect();

    let nodes = t_nodes(t_lo, quad);
    let cell = h.powi(d as i32);
    let lhs_p = match space {
        Space::Scr => {
            let per_x: Vec<f64> = scales
                .par_iter()
                .map(|&m| {
                    let g: Vec<f64> = nodes
                        .iter()
                        .map(|&(t, _)| t.powf(alpha - 1.0) * sigma_shape(d, t + eps, m).powi(2))
                        .collect();
                    let body: f64 = g.iter().zip(&nodes).map(|(g, (_, w))| g * w).sum();
                    let tail = power_completion(nodes[0].0, g[0], nodes[1].0, g[1], t_lo).unwrap_or(0.0);
                    (body + tail).powf(0.5 * p)
                })
                .collect();
            per_x.iter().sum::<f64>() * cell
        }
        _ => {
            let g: Vec<f64> = nodes
                .par_iter()
                .map(|&(t, _)| {
                    let s: f64 = scales.iter().map(|&m| sigma_shape(d, t + eps, m).powf(p)).sum();
                    t.powf(0.5 * alpha * p - 1.0) * s * cell
                })
                .collect();
            let body: f64 = g.iter().zip(&nodes).map(|(g, (_, w))| g * w).sum();
            let tail = power_completion(nodes[0].0, g[0], nodes[1].0, g[1], t_lo).ok_or_else(|| {
                Error::Divergent("σ integral is not integrable at t = 0".into())
            })?;
            body + tail
        }
    };
    let lhs = lhs_p.powf(1.0 / p);
    Ok(SigmaCheck { lhs, rhs, ratio: lhs / rhs, space, t_lo, nodes: xs.len() })
}

/// `N / (d^{2/p} p ‖Φ_ε‖²)`: the factor multiplying `λ²` in the tail exponent.
pub fn tail_scale(n: usize, phi_norm: f64, p: f64, d: usize) -> Result<f64> {
    if !(phi_norm > 0.0) || !phi_norm.is_finite() {
        return Err(Error::InvalidParameter(format!("phi_norm must be positive and finite, got {phi_norm}")));
    }
    Ok(n as f64 / ((d as f64).powf(2.0 / p) * p * phi_norm * phi_norm))
}

/// `2 exp(-N λ² / (d^{2/p} p ‖Φ_ε‖²))` on `lambda_grid`.
pub fn tail_curve(lambda_grid: &[f64], n: usize, phi_norm: f64, p: f64, d: usize) -> Result<Vec<f64>> {
    let k = tail_scale(n, phi_norm, p, d)?;
    Ok(lambda_grid.iter().map(|l| 2.0 * (-k * l * l).exp()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub lambda: f64,
    pub empirical_p: f64,
    pub bound_p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Smallest `C` for which the curve dominates every point beyond the median.
    pub c_envelope: f64,
    /// Least-squares `C` from `ln(p̂/2) = -x/C`.
    pub c_regression: f64,
    pub median: f64,
    pub dominated: bool,
    pub points: Vec<TailPoint>,
}

/// Fits the constant of the Gaussian tail curve to the empirical CCDF of
/// `values` at every order statistic beyond the median.
pub fn fit_tail_constant(values: &[f64], n: usize, phi_norm: f64, p: f64, d: usize) -> Result<TailFit> {
    if values.len() < 2 {
        return Err(Error::InsufficientSample { got: values.len(), need: 2 });
    }
    let k = tail_scale(n, phi_norm, p, d)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len();
    let median = sorted[r / 2];
    let mut raw = Vec::new();
    let mut i = r / 2;
    while i < r {
        let lambda = sorted[i];
        // Strict exceedance: skip ties.
        let mut j = i;
        while j < r && sorted[j] == lambda {
            j += 1;
        }
        raw.push((lambda, (r - j) as f64 / r as f64));
        i = j;
    }
    let mut c_env = 0.0f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(lambda, ph) in &raw {
        if ph > 0.0 && lambda > 0.0 {
            let x = k * lambda * lambda;
            c_env = c_env.max(x / (2.0 / ph).ln());
            let y = (ph / 2.0).ln();
            sxy += x * y;
            sxx += x * x;
        }
    }
    if c_env == 0.0 {
        return Err(Error::DegenerateZero);
    }
    let c_reg = if sxy < 0.0 { -sxx / sxy } else { f64::INFINITY };
    let points: Vec<TailPoint> = raw
        .iter()
        .map(|&(lambda, ph)| TailPoint {
            lambda,
            empirical_p: ph,
            bound_p: 2.0 * (-k * lambda * lambda / c_env).exp(),
        })
        .collect();
    let dominated = points.iter().all(|pt| pt.empirical_p <= pt.bound_p * (1.0 + 1e-12));
    Ok(TailFit { c_envelope: c_env, c_regression: c_reg, median, dominated, points })
}

/// Independent draws of `S_N(x, t) = (μ_N - μ) * Φ_t(x)`; draw `k` uses
/// the sample seeded by `replica_seed(seed, n, k)`.
pub fn s_n_draws(model: &MeasureModel, x: &[f64], t: f64, n: usize, draws: usize, seed: u64) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let mean = model.density_unchecked(t, x);
    (0..draws)
        .into_par_iter()
        .map(|k| {
            let sample = model.sample(n, replica_seed(seed, n, k))?;
            let d = sample.dim();
            let total: f64 = (0..n)
                .map(|i| {
                    let r2: f64 = sample.point(i).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    (4.0 * PI * t).powf(-0.5 * d as f64) * (-r2 / (4.0 * t)).exp()
                })
                .sum();
            Ok(total / n as f64 - mean)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_variable_band() {
        let c = 2.5;
        let e = psi2_estimate(&vec![c; 2000]).unwrap();
        assert!(e.value >= c / 2f64.sqrt() - 1e-12 && e.value <= c);
        assert_eq!(e.method, Psi2Method::MomentRatio);
        assert_eq!(e.max_order, 12);
    }

    #[test]
    fn gaussian_proxy_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e = psi2_estimate(&z).unwrap();
        assert!(e.value >= 0.7 && e.value <= 1.4, "{}", e.value);
        // moment oracle E|Z|^k = (k-1)!!, so the k = 2 term is 1/√2
        assert!((e.value - 0.5f64.sqrt()).abs() < 5e-3);
    }

    #[test]
    fn too_few_draws() {
        assert!(matches!(
            psi2_estimate(&[1.0; 999]),
            Err(Error::InsufficientSample { got: 999, need: 1000 })
        ));
    }

    #[test]
    fn point_mass_heat_variable_is_constant() {
        let m = MeasureModel::dirac(1);
        let t = 0.1;
        let c = (4.0 * PI * t).powf(-0.5);
        let draws: Vec<f64> = m
            .sample(1000, 4)
            .unwrap()
            .points()
            .iter()
            .map(|x| c * (-x * x / (4.0 * t)).exp())
            .collect();
        let e = psi2_estimate(&draws).unwrap();
        assert!(e.value >= c / 2f64.sqrt() - 1e-12 && e.value <= c);
    }

    #[test]
    fn sigma_bound_examples() {
        let m = MeasureModel::dirac(1);
        let v = sigma_bound_rhs(&[1.0], 0.1, &m).unwrap();
        let expected = (-2.5f64).exp() / (0.4 * PI).sqrt();
        assert!((v - expected).abs() < 1e-12 * expected, "{v}");
        assert!((v - 0.0732).abs() < 1e-4);
        let at_atom = sigma_bound_rhs(&[0.0], 0.1, &m).unwrap();
        assert!((at_atom - (0.4 * PI).powf(-0.5)).abs() < 1e-15);
        assert!(sigma_bound_rhs(&[0.0], 1.0, &m).is_err());
    }

    #[test]
    fn sigma_bound_decreases_away_from_center() {
        let g = MeasureModel::gaussian(vec![0.0], 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for x in [0.0, 0.5, 1.0, 2.0, 3.0] {
            let v = sigma_bound_rhs(&[x], 0.2, &g).unwrap();
            assert!(v <= prev * (1.0 + 1e-9));
            prev = v;
        }
    }

    #[test]
    fn point_mass_sigma_integral_is_phi_norm() {
        // For δ₀ the bound is Φ_t itself, so the ratio is d^{-1/p}.
        let q = QuadratureSpec::default();
        for &(alpha, p, d, eps) in &[(1.5, 2.0, 1usize, 0.0), (0.7, 3.0, 1, 0.01), (1.0, 2.0, 1, 0.1), (1.6, 2.0, 2, 0.0)] {
            let par = NormParams::new(alpha, p, d, eps).unwrap();
            let c = sigma_integral_check(&MeasureModel::dirac(d), &par, &q).unwrap();
            let want = (d as f64).powf(-1.0 / p);
            assert!((c.ratio - want).abs() < 1e-3 * want, "{alpha} {p} {d} {eps}: {}", c.ratio);
        }
    }

    #[test]
    fn sigma_ratio_stable_in_eps() {
        let q = QuadratureSpec::default();
        let g = MeasureModel::gaussian(vec![0.0], 1.0).unwrap();
        let ratios: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&e| sigma_integral_check(&g, &NormParams::new(1.5, 2.0, 1, e).unwrap(), &q).unwrap().ratio)
            .collect();
        for r in &ratios {
            assert!(r.is_finite() && *r > 0.0);
            assert!((r / ratios[0] - 1.0).abs() < 0.2, "{ratios:?}");
        }
        // subcritical α with ε > 0
        let sub = sigma_integral_check(&g, &NormParams::new(0.3, 2.0, 1, 0.1).unwrap(), &q).unwrap();
        assert!(sub.ratio.is_finite());
    }

    #[test]
    fn sigma_check_divergent_regime() {
        let q = QuadratureSpec::default();
        let par = NormParams::new(0.4, 2.0, 1, 0.0).unwrap();
        assert!(matches!(sigma_integral_check(&MeasureModel::dirac(1), &par, &q), Err(Error::Divergent(_))));
    }

    #[test]
    fn tail_curve_basics() {
        let c = tail_curve(&[0.0, 0.1], 10, 1.0, 2.0, 1).unwrap();
        assert_eq!(c[0], 2.0);
        // doubling N halves λ² for the same value
        let a = tail_curve(&[0.2], 10, 1.0, 2.0, 1).unwrap()[0];
        let b = tail_curve(&[0.2 / 2f64.sqrt()], 20, 1.0, 2.0, 1).unwrap()[0];
        assert!((a - b).abs() < 1e-15);
        assert!(tail_curve(&[0.1], 10, 0.0, 2.0, 1).is_err());
    }

    #[test]
    fn fitted_tail_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).map(|z: f64| z.abs() / 10.0).collect();
        let f = fit_tail_constant(&v, 100, 1.0, 2.0, 1).unwrap();
        assert!(f.dominated);
        assert!(f.c_envelope > 0.0 && f.c_regression > 0.0);
        assert!(f.points.iter().all(|p| p.lambda >= f.median));
    }

    #[test]
    fn hoeffding_draws_have_zero_mean() {
        let g = MeasureModel::gaussian(vec![0.0], 1.0).unwrap();
        let s = s_n_draws(&g, &[0.0], 0.1, 50, 2000, 3).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let sd = (s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64).sqrt();
        assert!(mean.abs() < 4.0 * sd / (s.len() as f64).sqrt());
        assert_eq!(s, s_n_draws(&g, &[0.0], 0.1, 50, 2000, 3).unwrap());
    }
}
