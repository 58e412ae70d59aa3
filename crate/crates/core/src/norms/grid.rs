//! Quadrature evaluation of the CAL and SCR norms of a [`Field`].
//!
//! The `t` integral runs on the `ln t` axis with composite Gauss-Legendre
//! panels down to `t_lo`; the sliver `[0, t_lo]` is completed analytically
//! from the power law measured at the two smallest nodes. The `x` integral
//! is a trapezoid rule on a uniform grid (spectrally accurate for smooth,
//! decaying integrands) or, for `d >= 4`, importance-sampled Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{tail_factor, Field};
use crate::error::{Error, Result};
use crate::kernels::{NormParams, Space};
use crate::measures::MeasureModel;
use crate::quadrature::{composite_gauss_legendre, pairwise_sum};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum XRule {
    TensorGrid {
        /// Minimum number of nodes across the domain on each axis.
        #[serde(default = "default_points_per_axis")]
        points_per_axis: usize,
        /// Nodes per feature width `width(t)`.
        #[serde(default = "default_nodes_per_width")]
        nodes_per_width: f64,
        /// Cap on nodes per grid; sets the smallest resolvable `t`.
        #[serde(default = "default_max_nodes")]
        max_nodes: usize,
        /// Fixed half-width of the domain cube; automatic when absent.
        #[serde(default)]
        radius: Option<f64>,
    },
    MonteCarlo {
        n_nodes: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_points_per_axis() -> usize {
    64
}
fn default_nodes_per_width() -> f64 {
    3.0
}
fn default_max_nodes() -> usize {
    1 << 21
}

impl Default for XRule {
    fn default() -> Self {
        XRule::TensorGrid {
            points_per_axis: default_points_per_axis(),
            nodes_per_width: default_nodes_per_width(),
            max_nodes: default_max_nodes(),
            radius: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub t_min: f64,
    pub t_points: usize,
    /// Gauss-Legendre order per `ln t` panel.
    pub t_order: usize,
    pub x_rule: XRule,
    pub tail_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            t_min: 1e-8,
            t_points: 96,
            t_order: 8,
            x_rule: XRule::default(),
            tail_tol: 1e-12,
        }
    }
}

impl QuadratureSpec {
    /// Default rule for dimension `d`: tensor grid up to `d = 3`, Monte
    /// Carlo beyond.
    pub fn default_for(d: usize) -> Self {
        if d <= 3 {
            Self::default()
        } else {
            QuadratureSpec {
                x_rule: XRule::MonteCarlo { n_nodes: 100_000, seed: 0 },
                ..Self::default()
            }
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min < 1.0) {
            return Err(Error::InvalidParameter(format!("t_min = {} must lie in (0, 1)", self.t_min)));
        }
        if self.t_order == 0 || self.t_points < self.t_order {
            return Err(Error::InvalidParameter("t_points must be >= t_order >= 1".into()));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::InvalidParameter("tail_tol must lie in (0, 1)".into()));
        }
        match &self.x_rule {
            XRule::TensorGrid { points_per_axis, nodes_per_width, max_nodes, radius } => {
                if d > 3 {
                    return Err(Error::InvalidParameter(format!(
                        "tensor grids are limited to d <= 3 (d = {d}); use monte_carlo"
                    )));
                }
                if *points_per_axis < 2 || !(*nodes_per_width > 0.0) || *max_nodes < 8 {
                    return Err(Error::InvalidParameter("degenerate tensor grid settings".into()));
                }
                if let Some(r) = radius {
                    if !(*r > 0.0) {
                        return Err(Error::InvalidParameter("grid radius must be positive".into()));
                    }
                }
            }
            XRule::MonteCarlo { n_nodes, .. } => {
                if *n_nodes < 2 {
                    return Err(Error::InvalidParameter("monte_carlo needs n_nodes >= 2".into()));
                }
            }
        }
        Ok(())
    }

    /// The same rule with every resolution multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let t_points = ((self.t_points as f64 * factor).round() as usize).max(self.t_order);
        let x_rule = match &self.x_rule {
            XRule::TensorGrid { points_per_axis, nodes_per_width, max_nodes, radius } => {
                XRule::TensorGrid {
                    points_per_axis: ((*points_per_axis as f64 * factor).round() as usize).max(2),
                    nodes_per_width: nodes_per_width * factor,
                    max_nodes: ((*max_nodes as f64 * factor).round() as usize).max(8),
                    radius: *radius,
                }
            }
            XRule::MonteCarlo { n_nodes, seed } => XRule::MonteCarlo {
                n_nodes: ((*n_nodes as f64 * factor).round() as usize).max(2),
                seed: *seed,
            },
        };
        QuadratureSpec { t_points, x_rule, ..self.clone() }
    }
}

/// A norm value with the change observed under a coarser rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub refinement_error: f64,
    /// Lower end of the resolved `t` range.
    pub t_lo: f64,
}

/// Gauss-Legendre nodes `(t, weight)` for `∫_{t_lo}^1 g(t) dt`, with the
/// `dt = t dv` Jacobian folded into the weight; ascending in `t`.
pub(crate) fn t_nodes(t_lo: f64, quad: &QuadratureSpec) -> Vec<(f64, f64)> {
    let panels = (quad.t_points / quad.t_order).max(1);
    let (v, w) = composite_gauss_legendre(t_lo.ln(), 0.0, panels, quad.t_order);
    v.iter().zip(&w).map(|(v, w)| (v.exp(), w * v.exp())).collect()
}

/// `∫_0^{t_lo} g` for `g(t) ≈ g1 (t/t1)^γ`, with `γ` measured from two nodes.
pub(crate) fn power_completion(t1: f64, g1: f64, t2: f64, g2: f64, t_lo: f64) -> Option<f64> {
    if !(g1 > 0.0 && g2 > 0.0) {
        return Some(0.0);
    }
    let gamma = (g2 / g1).ln() / (t2 / t1).ln();
    if gamma <= -1.0 {
        return None;
    }
    Some(g1 * (t_lo / t1).powf(gamma) * t_lo / (gamma + 1.0))
}

struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Domain {
    fn at<F: Field + ?Sized>(u: &F, t: f64, quad: &QuadratureSpec) -> Domain {
        let d = u.dim();
        if let XRule::TensorGrid { radius: Some(r), .. } = quad.x_rule {
            return Domain { lo: vec![-r; d], hi: vec![r; d] };
        }
        let (mut lo, mut hi) = u.support_box(quad.tail_tol);
        let reach = tail_factor(quad.tail_tol) * u.spread(t);
        for j in 0..d {
            lo[j] -= reach;
            hi[j] += reach;
        }
        Domain { lo, hi }
    }

    fn min_extent(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min)
    }

    /// Integer index ranges `[start, end]` of the nodes `i·h` inside.
    fn index_ranges(&self, h: f64) -> Vec<(i64, i64)> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| ((a / h).ceil() as i64, ((b / h).floor() as i64).max((a / h).ceil() as i64)))
            .collect()
    }

    fn node_count(&self, h: f64) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| ((b - a) / h).floor() + 1.0).product()
    }
}

fn grid_params(quad: &QuadratureSpec) -> (usize, f64, usize) {
    match quad.x_rule {
        XRule::TensorGrid { points_per_axis, nodes_per_width, max_nodes, .. } => {
            (points_per_axis, nodes_per_width, max_nodes)
        }
        XRule::MonteCarlo { .. } => unreachable!("tensor settings requested for monte carlo"),
    }
}

/// Smallest `t` in `[t_min, 1]` with `cost(t) <= cap`, assuming `cost`
/// decreases in `t`.
fn resolvable_t(t_min: f64, cap: f64, cost: impl Fn(f64) -> f64) -> Result<f64> {
    if cost(t_min) <= cap {
        return Ok(t_min);
    }
    if cost(1.0) > cap {
        return Err(Error::InvalidParameter(
            "grid node cap too small to resolve even t = 1".into(),
        ));
    }
    let (mut a, mut b) = (t_min.ln(), 0.0f64);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if cost(m.exp()) <= cap {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(b.exp())
}

#[inline]
fn abs_pow(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v * v
    } else {
        v.abs().powf(p)
    }
}

/// Visits every node of the tensor grid given by `ranges` and spacing `h`,
/// returning per-first-axis-row sums of `f(x)` in a fixed order.
fn grid_row_sums<G>(ranges: &[(i64, i64)], h: f64, f: G) -> Vec<f64>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let d = ranges.len();
    let (r0a, r0b) = ranges[0];
    (r0a..=r0b)
        .into_par_iter()
        .map(|i0| {
            let mut x = vec![0.0; d];
            x[0] = i0 as f64 * h;
            if d == 1 {
                return f(&x);
            }
            let mut idx: Vec<i64> = ranges[1..].iter().map(|r| r.0).collect();
            for (j, v) in idx.iter().enumerate() {
                x[j + 1] = *v as f64 * h;
            }
            let mut acc = 0.0;
            loop {
                acc += f(&x);
                // odometer over the trailing axes
                let mut j = d - 2;
                loop {
                    idx[j] += 1;
                    if idx[j] <= ranges[j + 1].1 {
                        x[j + 1] = idx[j] as f64 * h;
                        break;
                    }
                    idx[j] = ranges[j + 1].0;
                    x[j + 1] = idx[j] as f64 * h;
                    if j == 0 {
                        return acc;
                    }
                    j -= 1;
                }
            }
        })
        .collect()
}

/// Importance-sampling nodes `(x, weight)` drawn from a defensive mixture of
/// the reference model smoothed at `ε + t̄` and at `ε + 1`.
fn monte_carlo_nodes<F: Field + ?Sized>(u: &F, n: usize, seed: u64, t_bar: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = u.dim();
    let fallback;
    let (model, eps) = match u.reference_model() {
        Some(m) => m,
        None => {
            let (lo, hi) = u.support_box(1e-12);
            let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            let half: f64 = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max);
            fallback = MeasureModel::gaussian(center, half * half + 1.0)?;
            (&fallback, 0.0)
        }
    };
    let base = model.sample(n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let s_near = eps + t_bar;
    let s_far = eps + 1.0;
    let mut xs = Vec::with_capacity(n * d);
    for i in 0..n {
        let s = if i % 2 == 0 { s_near } else { s_far };
        let sd = (2.0 * s).sqrt();
        for &y in base.point(i) {
            let z: f64 = StandardNormal.sample(&mut rng);
            xs.push(y + sd * z);
        }
    }
    let weights = xs
        .chunks_exact(d)
        .map(|x| {
            let q = 0.5 * model.density_unchecked(s_near, x) + 0.5 * model.density_unchecked(s_far, x);
            1.0 / (n as f64 * q)
        })
        .collect();
    Ok((xs, weights))
}

fn check_dims<F: Field + ?Sized>(u: &F, params: &NormParams, quad: &QuadratureSpec) -> Result<()> {
    if u.dim() != params.dim {
        return Err(Error::InvalidParameter(format!(
            "field dimension {} differs from params dimension {}",
            u.dim(),
            params.dim
        )));
    }
    quad.validate(params.dim)
}

/// `(∫_0^1 t^{αp/2-1} ‖u * Φ_t‖_p^p dt)^{1/p}`, returning `(value, t_lo)`.
fn cal_core<F: Field + ?Sized>(u: &F, params: &NormParams, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    check_dims(u, params, quad)?;
    let (p, a) = (params.p, 0.5 * params.alpha * params.p);
    let d = params.dim as i32;
    let (t_lo, lp_pp): (f64, Box<dyn Fn(f64) -> f64 + Sync + '_>) = match quad.x_rule {
        XRule::TensorGrid { .. } => {
            let (ppa, npw, cap) = grid_params(quad);
            let spacing = move |t: f64| {
                let dom = Domain::at(u, t, quad);
                (dom.min_extent() / ppa as f64).min(u.width(t) / npw)
            };
            let t_lo = resolvable_t(quad.t_min, cap as f64, |t| {
                Domain::at(u, t, quad).node_count(spacing(t))
            })?;
            let f = move |t: f64| {
                let h = spacing(t);
                let ranges = Domain::at(u, t, quad).index_ranges(h);
                let rows = grid_row_sums(&ranges, h, |x| abs_pow(u.eval(x, t), p));
                pairwise_sum(&rows) * h.powi(d)
            };
            (t_lo, Box::new(f))
        }
        XRule::MonteCarlo { n_nodes, seed } => {
            let t_lo = quad.t_min;
            let (xs, ws) = monte_carlo_nodes(u, n_nodes, seed, t_lo.sqrt())?;
            let dim = params.dim;
            let f = move |t: f64| {
                let terms: Vec<f64> = xs
                    .par_chunks_exact(dim)
                    .zip(ws.par_iter())
                    .map(|(x, w)| w * abs_pow(u.eval(x, t), p))
                    .collect();
                pairwise_sum(&terms)
            };
            (t_lo, Box::new(f))
        }
    };
    let nodes = t_nodes(t_lo, quad);
    let g: Vec<f64> = nodes.iter().map(|&(t, _)| t.powf(a - 1.0) * lp_pp(t)).collect();
    if let Some((i, _)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::QuadratureOverflow { t: nodes[i].0 });
    }
    let terms: Vec<f64> = nodes.iter().zip(&g).map(|(&(_, w), gi)| w * gi).collect();
    let mut total = pairwise_sum(&terms);
    let tail = power_completion(nodes[0].0, g[0], nodes[1].0, g[1], t_lo).ok_or_else(|| {
        Error::Divergent(format!("integrand is not integrable at t = 0 (measured near t = {t_lo:e})"))
    })?;
    total += tail;
    if !total.is_finite() {
        return Err(Error::QuadratureOverflow { t: t_lo });
    }
    Ok((total.max(0.0).powf(1.0 / p), t_lo))
}

/// 4-point Lagrange weights at fractional offset `f ∈ [0, 1)` for the
/// stencil `-1, 0, 1, 2`.
#[inline]
fn cubic_weights(f: f64) -> [f64; 4] {
    [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ]
}

/// Upsamples axis `axis` of a row-major array from level nodes
/// `l_lo..l_lo+shape[axis]` (stride `m` fine cells) onto fine indices
/// `c_lo..=c_hi`.
fn upsample_axis(data: &[f64], shape: &mut [usize], axis: usize, m: i64, l_lo: i64, c_lo: i64, c_hi: i64) -> Vec<f64> {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let n_src = shape[axis];
    let n_dst = (c_hi - c_lo + 1) as usize;
    let stencil: Vec<(usize, [f64; 4])> = (c_lo..=c_hi)
        .map(|i| {
            let l0 = i.div_euclid(m);
            let f = (i - l0 * m) as f64 / m as f64;
            ((l0 - 1 - l_lo) as usize, cubic_weights(f))
        })
        .collect();
    let mut out = vec![0.0; outer * n_dst * inner];
    for o in 0..outer {
        for (c, (s0, w)) in stencil.iter().enumerate() {
            let dst = &mut out[(o * n_dst + c) * inner..(o * n_dst + c + 1) * inner];
            for (k, wk) in w.iter().enumerate() {
                let src = &data[(o * n_src + s0 + k) * inner..(o * n_src + s0 + k + 1) * inner];
                for (dv, sv) in dst.iter_mut().zip(src) {
                    *dv += wk * sv;
                }
            }
        }
    }
    shape[axis] = n_dst;
    out
}

/// Row-major evaluation of `f` on the tensor grid `ranges` (integer indices
/// scaled by `h`).
fn grid_values<G>(ranges: &[(i64, i64)], h: f64, f: G) -> Vec<f64>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let d = ranges.len();
    let shape: Vec<usize> = ranges.iter().map(|r| (r.1 - r.0 + 1) as usize).collect();
    let total: usize = shape.iter().product();
    (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut x = [0.0; 3];
            let mut rem = flat;
            for j in (0..d).rev() {
                let k = rem % shape[j];
                rem /= shape[j];
                x[j] = (ranges[j].0 + k as i64) as f64 * h;
            }
            f(&x[..d])
        })
        .collect()
}

/// `(∫ (∫_0^1 t^{α-1} |u * Φ_t|² dt)^{p/2} dx)^{1/p}`, returning
/// `(value, t_lo)`.
fn scr_core<F: Field + ?Sized>(u: &F, params: &NormParams, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    check_dims(u, params, quad)?;
    let (p, alpha) = (params.p, params.alpha);
    let d = params.dim;
    match quad.x_rule {
        XRule::TensorGrid { .. } => {
            let (ppa, npw, cap) = grid_params(quad);
            let outer = Domain::at(u, 1.0, quad);
            let spacing = |t_lo: f64| (outer.min_extent() / ppa as f64).min(u.width(t_lo) / npw);
            let t_lo = resolvable_t(quad.t_min, cap as f64, |t| outer.node_count(spacing(t)))?;
            let h0 = spacing(t_lo);
            let fine = outer.index_ranges(h0);
            let fine_shape: Vec<usize> = fine.iter().map(|r| (r.1 - r.0 + 1) as usize).collect();
            let n_fine: usize = fine_shape.iter().product();
            let mut acc = vec![0.0; n_fine];
            let mut g_first = vec![0.0; n_fine];
            let mut g_second = vec![0.0; n_fine];
            let nodes = t_nodes(t_lo, quad);
            for (level, &(t, w)) in nodes.iter().enumerate() {
                // Coarsest power-of-two stride that still resolves u * Φ_t
                // well enough for cubic interpolation.
                let mut m: i64 = 1;
                while h0 * (2 * m) as f64 <= u.width(t) / npw.max(4.0) {
                    m *= 2;
                }
                let dom = Domain::at(u, t, quad);
                let mut cover = Vec::with_capacity(d);
                for (j, r) in dom.index_ranges(h0).iter().enumerate() {
                    let lo = r.0.max(fine[j].0);
                    let hi = r.1.min(fine[j].1);
                    cover.push((lo, hi.max(lo)));
                }
                let (values, shape) = if m == 1 {
                    let vals = grid_values(&cover, h0, |x| u.eval(x, t));
                    let shape: Vec<usize> = cover.iter().map(|r| (r.1 - r.0 + 1) as usize).collect();
                    (vals, shape)
                } else {
                    let level: Vec<(i64, i64)> = cover
                        .iter()
                        .map(|r| (r.0.div_euclid(m) - 1, r.1.div_euclid(m) + 2))
                        .collect();
                    let hm = h0 * m as f64;
                    let mut vals = grid_values(&level, hm, |x| u.eval(x, t));
                    let mut shape: Vec<usize> = level.iter().map(|r| (r.1 - r.0 + 1) as usize).collect();
                    for j in 0..d {
                        vals = upsample_axis(&vals, &mut shape, j, m, level[j].0, cover[j].0, cover[j].1);
                    }
                    (vals, shape)
                };
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    let _ = v;
                    return Err(Error::QuadratureOverflow { t });
                }
                let wt = w * t.powf(alpha - 1.0);
                let gt = t.powf(alpha - 1.0);
                // scatter the covered sub-box into the fine arrays
                let sub_total: usize = shape.iter().product();
                for (k, v) in values.iter().enumerate().take(sub_total) {
                    let mut rem = k;
                    let mut flat = 0usize;
                    let mut stride = 1usize;
                    let mut offs = [0usize; 3];
                    for j in (0..d).rev() {
                        offs[j] = rem % shape[j];
                        rem /= shape[j];
                    }
                    for j in (0..d).rev() {
                        let idx = (cover[j].0 - fine[j].0) as usize + offs[j];
                        flat += idx * stride;
                        stride *= fine_shape[j];
                    }
                    let v2 = v * v;
                    acc[flat] += wt * v2;
                    if level == 0 {
                        g_first[flat] = gt * v2;
                    } else if level == 1 {
                        g_second[flat] = gt * v2;
                    }
                }
            }
            let (t1, t2) = (nodes[0].0, nodes[1].0);
            let half_p = 0.5 * p;
            let terms: Vec<f64> = (0..n_fine)
                .into_par_iter()
                .map(|i| {
                    let tail = power_completion(t1, g_first[i], t2, g_second[i], t_lo).unwrap_or(0.0);
                    abs_pow(acc[i] + tail, half_p)
                })
                .collect();
            let total = pairwise_sum(&terms) * h0.powi(d as i32);
            if !total.is_finite() {
                return Err(Error::QuadratureOverflow { t: t_lo });
            }
            Ok((total.powf(1.0 / p), t_lo))
        }
        XRule::MonteCarlo { n_nodes, seed } => {
            let t_lo = quad.t_min;
            let (xs, ws) = monte_carlo_nodes(u, n_nodes, seed, t_lo.sqrt())?;
            let nodes = t_nodes(t_lo, quad);
            let (t1, t2) = (nodes[0].0, nodes[1].0);
            let terms: Vec<f64> = xs
                .par_chunks_exact(d)
                .zip(ws.par_iter())
                .map(|(x, wx)| {
                    let mut inner = 0.0;
                    let mut g = [0.0; 2];
                    for (level, &(t, w)) in nodes.iter().enumerate() {
                        let v = u.eval(x, t);
                        let gt = t.powf(alpha - 1.0) * v * v;
                        inner += w * gt;
                        if level < 2 {
                            g[level] = gt;
                        }
                    }
                    inner += power_completion(t1, g[0], t2, g[1], t_lo).unwrap_or(0.0);
                    wx * abs_pow(inner, 0.5 * p)
                })
                .collect();
            let total = pairwise_sum(&terms);
            if !total.is_finite() {
                return Err(Error::QuadratureOverflow { t: t_lo });
            }
            Ok((total.powf(1.0 / p), t_lo))
        }
    }
}

pub fn norm_calw<F: Field + ?Sized>(u: &F, params: &NormParams, quad: &QuadratureSpec) -> Result<f64> {
    cal_core(u, params, quad).map(|r| r.0)
}

pub fn norm_scrw<F: Field + ?Sized>(u: &F, params: &NormParams, quad: &QuadratureSpec) -> Result<f64> {
    scr_core(u, params, quad).map(|r| r.0)
}

/// The `W^{-α,p}` norm: SCR for integer `α`, CAL otherwise.
pub fn norm_w<F: Field + ?Sized>(u: &F, params: &NormParams, quad: &QuadratureSpec) -> Result<f64> {
    norm_in(u, params, quad, Space::Auto)
}

pub fn norm_in<F: Field + ?Sized>(u: &F, params: &NormParams, quad: &QuadratureSpec, space: Space) -> Result<f64> {
    match space.resolve(params.alpha) {
        Space::Scr => norm_scrw(u, params, quad),
        _ => norm_calw(u, params, quad),
    }
}

/// Norm in `space` together with its change under a rule of half the
/// resolution.
pub fn norm_estimate<F: Field + ?Sized>(
    u: &F,
    params: &NormParams,
    quad: &QuadratureSpec,
    space: Space,
) -> Result<NormEstimate> {
    let core = |q: &QuadratureSpec| match space.resolve(params.alpha) {
        Space::Scr => scr_core(u, params, q),
        _ => cal_core(u, params, q),
    };
    let (value, t_lo) = core(quad)?;
    let (coarse, _) = core(&quad.scaled(0.5))?;
    Ok(NormEstimate { value, refinement_error: (value - coarse).abs(), t_lo })
}
