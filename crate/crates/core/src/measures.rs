//! Analytic probability measures with closed-form heat smoothing.
//!
//! Bandwidth convention: smoothing at time `s` convolves with the heat kernel
//! `Φ_s`, a centered Gaussian with covariance `2s·I`. A Gaussian component of
//! variance `σ²` therefore has variance `σ² + 2s` after smoothing.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::kernels::unit_ball_volume;
use crate::quadrature::Adaptive;

/// Exponent cutoff for truncated Gaussian sums: terms below `e^{-40}` of the
/// peak are dropped.
pub(crate) const GAUSS_CUTOFF: f64 = 40.0;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl GaussianMixture {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
    pub fn mean(&self, k: usize, dim: usize) -> &[f64] {
        &self.means[k * dim..(k + 1) * dim]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl UniformBox {
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
    fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }
}

/// Weighted point masses, stored sorted by first coordinate with coincident
/// locations merged.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteAtoms {
    dim: usize,
    weights: Vec<f64>,
    locations: Vec<f64>,
}

impl DiscreteAtoms {
    fn build(dim: usize, mut pairs: Vec<(Vec<f64>, f64)>) -> Self {
        pairs.sort_by(|a, b| {
            for (x, y) in a.0.iter().zip(&b.0) {
                match x.total_cmp(y) {
                    std::cmp::Ordering::Equal => continue,
                    o => return o,
                }
            }
            std::cmp::Ordering::Equal
        });
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut locations = Vec::with_capacity(pairs.len() * dim);
        let mut last: Option<Vec<f64>> = None;
        for (loc, w) in pairs {
            if last.as_ref() == Some(&loc) {
                *weights.last_mut().unwrap() += w;
            } else {
                locations.extend_from_slice(&loc);
                weights.push(w);
                last = Some(loc);
            }
        }
        DiscreteAtoms { dim, weights, locations }
    }

    /// Empirical measure of a flat point list; repeated points share one atom
    /// whose weight is `count / n`.
    pub fn empirical(dim: usize, points: &[f64]) -> Self {
        let n = points.len() / dim;
        let pairs: Vec<(Vec<f64>, f64)> =
            points.chunks_exact(dim).map(|p| (p.to_vec(), 1.0)).collect();
        let mut atoms = Self::build(dim, pairs);
        for w in &mut atoms.weights {
            *w /= n as f64;
        }
        atoms
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn location(&self, i: usize) -> &[f64] {
        &self.locations[i * self.dim..(i + 1) * self.dim]
    }

    /// Index range of atoms whose first coordinate lies in `[lo, hi]`.
    fn window(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let d = self.dim;
        let first = |i: usize| self.locations[i * d];
        let n = self.len();
        let start = partition_point(n, |i| first(i) < lo);
        let end = partition_point(n, |i| first(i) <= hi);
        start..end.max(start)
    }

    /// `Σ w_i Φ_s(x - a_i)`, truncated where the kernel is below `e^{-40}` of
    /// its peak.
    pub fn heat_sum(&self, s: f64, x: &[f64]) -> f64 {
        let d = self.dim;
        let inv = 1.0 / (4.0 * s);
        let reach = (4.0 * s * GAUSS_CUTOFF).sqrt();
        let mut acc = 0.0;
        for i in self.window(x[0] - reach, x[0] + reach) {
            let loc = &self.locations[i * d..(i + 1) * d];
            let r2: f64 = loc.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            acc += self.weights[i] * (-r2 * inv).exp();
        }
        acc * (4.0 * std::f64::consts::PI * s).powf(-0.5 * d as f64)
    }
}

fn partition_point(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    GaussianMixture(GaussianMixture),
    UniformBox(UniformBox),
    Discrete(DiscreteAtoms),
}

/// A probability measure on `R^d` with closed-form heat smoothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct MeasureModel {
    dim: usize,
    kind: ModelKind,
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidModel("empty weight list".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidModel(format!("negative or non-finite weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidModel(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

fn flatten(dim: usize, points: &[Vec<f64>], what: &str) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(points.len() * dim);
    for p in points {
        if p.len() != dim {
            return Err(Error::InvalidModel(format!(
                "{what} has dimension {}, expected {dim}",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!("{what} has non-finite coordinate")));
        }
        flat.extend_from_slice(p);
    }
    Ok(flat)
}

impl MeasureModel {
    pub fn gaussian_mixture(
        dim: usize,
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        check_weights(&weights)?;
        if means.len() != weights.len() || variances.len() != weights.len() {
            return Err(Error::InvalidModel("component list lengths differ".into()));
        }
        if let Some(v) = variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidModel(format!("component variance {v} must be positive")));
        }
        let means = flatten(dim, &means, "mean")?;
        Ok(MeasureModel {
            dim,
            kind: ModelKind::GaussianMixture(GaussianMixture { weights, means, variances }),
        })
    }

    /// Single isotropic Gaussian `N(mean, variance·I)`.
    pub fn gaussian(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let dim = mean.len();
        Self::gaussian_mixture(dim, vec![1.0], vec![mean], vec![variance])
    }

    pub fn uniform_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let dim = lower.len();
        if dim == 0 || upper.len() != dim {
            return Err(Error::InvalidModel("box corners must share a positive dimension".into()));
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("box corners must be finite".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| a >= b) {
            return Err(Error::InvalidModel("box requires lower < upper coordinatewise".into()));
        }
        Ok(MeasureModel { dim, kind: ModelKind::UniformBox(UniformBox { lower, upper }) })
    }

    pub fn discrete(dim: usize, weights: Vec<f64>, locations: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        check_weights(&weights)?;
        if locations.len() != weights.len() {
            return Err(Error::InvalidModel("weights and locations differ in length".into()));
        }
        flatten(dim, &locations, "location")?;
        let pairs = locations.into_iter().zip(weights).collect();
        Ok(MeasureModel { dim, kind: ModelKind::Discrete(DiscreteAtoms::build(dim, pairs)) })
    }

    /// Point mass at the origin of `R^d`.
    pub fn dirac(dim: usize) -> Self {
        Self::discrete(dim, vec![1.0], vec![vec![0.0; dim]]).expect("valid point mass")
    }

    pub fn from_atoms(atoms: DiscreteAtoms) -> Self {
        MeasureModel { dim: atoms.dim, kind: ModelKind::Discrete(atoms) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        !matches!(self.kind, ModelKind::Discrete(_))
    }

    /// Axis-aligned box holding all but a Gaussian tail of relative size
    /// `tail_tol` of the mass.
    pub fn mass_box(&self, tail_tol: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let k = (2.0 * (1.0 / tail_tol).ln()).sqrt();
        match &self.kind {
            ModelKind::GaussianMixture(g) => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for (c, v) in g.variances.iter().enumerate() {
                    let m = g.mean(c, d);
                    let r = k * v.sqrt();
                    for j in 0..d {
                        lo[j] = lo[j].min(m[j] - r);
                        hi[j] = hi[j].max(m[j] + r);
                    }
                }
                (lo, hi)
            }
            ModelKind::UniformBox(b) => (b.lower.clone(), b.upper.clone()),
            ModelKind::Discrete(a) => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for i in 0..a.len() {
                    for (j, v) in a.location(i).iter().enumerate() {
                        lo[j] = lo[j].min(*v);
                        hi[j] = hi[j].max(*v);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Smallest intrinsic variance of the model, zero for models with sharp
    /// features.
    pub fn min_feature_variance(&self) -> f64 {
        match &self.kind {
            ModelKind::GaussianMixture(g) => g.variances.iter().copied().fold(f64::INFINITY, f64::min),
            _ => 0.0,
        }
    }

    /// Density of `μ * Φ_s` at `x`.
    pub fn smoothed_density(&self, s: f64, x: &[f64]) -> Result<f64> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth s = {s} must be >= 0")));
        }
        if x.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "point has dimension {}, model has {}",
                x.len(),
                self.dim
            )));
        }
        if s == 0.0 {
            if let ModelKind::Discrete(_) = self.kind {
                return Err(Error::DensityUndefined(
                    "point masses have no density at s = 0".into(),
                ));
            }
        }
        Ok(self.density_unchecked(s, x))
    }

    /// Hot-path variant of [`smoothed_density`](Self::smoothed_density);
    /// callers guarantee `s > 0` for discrete models and matching dimension.
    pub fn density_unchecked(&self, s: f64, x: &[f64]) -> f64 {
        let d = self.dim;
        match &self.kind {
            ModelKind::GaussianMixture(g) => {
                let mut acc = 0.0;
                for (c, (&w, &var)) in g.weights.iter().zip(&g.variances).enumerate() {
                    let v = var + 2.0 * s;
                    let m = g.mean(c, d);
                    let r2: f64 = m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    acc += w * (2.0 * std::f64::consts::PI * v).powf(-0.5 * d as f64)
                        * (-r2 / (2.0 * v)).exp();
                }
                acc
            }
            ModelKind::UniformBox(b) => {
                let mut acc = 1.0;
                for j in 0..d {
                    let (lo, hi) = (b.lower[j], b.upper[j]);
                    let len = hi - lo;
                    let f = if s == 0.0 {
                        if x[j] >= lo && x[j] <= hi {
                            1.0 / len
                        } else {
                            0.0
                        }
                    } else {
                        let sigma = (2.0 * s).sqrt();
                        normal_interval_prob((x[j] - hi) / sigma, (x[j] - lo) / sigma) / len
                    };
                    acc *= f;
                    if acc == 0.0 {
                        break;
                    }
                }
                acc
            }
            ModelKind::Discrete(a) => a.heat_sum(s, x),
        }
    }

    /// `μ(B(center, r))` for the closed ball.
    pub fn ball_mass(&self, center: &[f64], r: f64) -> f64 {
        let d = self.dim;
        if r < 0.0 {
            return 0.0;
        }
        match &self.kind {
            ModelKind::GaussianMixture(g) => {
                let mut acc = 0.0;
                for (c, (&w, &var)) in g.weights.iter().zip(&g.variances).enumerate() {
                    let m = g.mean(c, d);
                    let sigma = var.sqrt();
                    acc += w * if d == 1 {
                        normal_interval_prob((center[0] - r - m[0]) / sigma, (center[0] + r - m[0]) / sigma)
                    } else {
                        let lambda: f64 =
                            m.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / var;
                        noncentral_chi2_cdf(d, lambda, r * r / var)
                    };
                }
                acc.min(1.0)
            }
            ModelKind::UniformBox(b) => {
                (box_ball_volume(&b.lower, &b.upper, center, r) / b.volume()).clamp(0.0, 1.0)
            }
            ModelKind::Discrete(a) => {
                // A few ulps of slack so that r = |x - a| always captures a.
                let r2 = r * r * (1.0 + 4.0 * f64::EPSILON);
                let mut acc = 0.0;
                for i in a.window(center[0] - r, center[0] + r) {
                    let dist2: f64 =
                        a.location(i).iter().zip(center).map(|(p, q)| (p - q) * (p - q)).sum();
                    if dist2 <= r2 {
                        acc += a.weights[i];
                    }
                }
                acc.min(1.0)
            }
        }
    }

    /// Draws `n` i.i.d. points, deterministically from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<EmpiricalSample> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample size must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim;
        let mut points = Vec::with_capacity(n * d);
        match &self.kind {
            ModelKind::GaussianMixture(g) => {
                let pick = WeightedIndex::new(&g.weights)
                    .map_err(|e| Error::InvalidModel(e.to_string()))?;
                for _ in 0..n {
                    let c = if g.weights.len() == 1 { 0 } else { pick.sample(&mut rng) };
                    let sigma = g.variances[c].sqrt();
                    let m = g.mean(c, d);
                    for mj in m {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        points.push(mj + sigma * z);
                    }
                }
            }
            ModelKind::UniformBox(b) => {
                for _ in 0..n {
                    for j in 0..d {
                        let u: f64 = rng.random();
                        points.push(b.lower[j] + (b.upper[j] - b.lower[j]) * u);
                    }
                }
            }
            ModelKind::Discrete(a) => {
                let pick =
                    WeightedIndex::new(&a.weights).map_err(|e| Error::InvalidModel(e.to_string()))?;
                for _ in 0..n {
                    let i = if a.len() == 1 { 0 } else { pick.sample(&mut rng) };
                    points.extend_from_slice(a.location(i));
                }
            }
        }
        Ok(EmpiricalSample { points, dim: d, seed, source: self.clone() })
    }

    /// Lower bound for the Hardy-Littlewood maximal function `Mμ(x)`: the
    /// supremum of `μ(B(x,r)) / (V_d r^d)` over `radius_grid`, refined where
    /// an exact candidate set or a local optimisation is available.
    pub fn maximal_function(&self, x: &[f64], radius_grid: &[f64]) -> f64 {
        let d = self.dim;
        let vd = unit_ball_volume(d);
        let avg = |r: f64| self.ball_mass(x, r) / (vd * r.powi(d as i32));
        let mut best = 0.0f64;
        let mut best_idx = None;
        for (i, &r) in radius_grid.iter().enumerate() {
            let v = avg(r);
            if v > best {
                best = v;
                best_idx = Some(i);
            }
        }
        match &self.kind {
            ModelKind::Discrete(a) => {
                // The ball average jumps up exactly when r reaches an atom.
                for i in 0..a.len() {
                    let dist: f64 = a
                        .location(i)
                        .iter()
                        .zip(x)
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum::<f64>()
                        .sqrt();
                    if dist == 0.0 {
                        return f64::INFINITY;
                    }
                    best = best.max(avg(dist));
                }
            }
            kind => {
                let interior = match kind {
                    ModelKind::UniformBox(b) => {
                        (0..d).all(|j| x[j] > b.lower[j] && x[j] < b.upper[j])
                    }
                    _ => true,
                };
                if interior {
                    // Limit of ball averages as r -> 0 at a continuity point.
                    best = best.max(self.density_unchecked(0.0, x));
                }
                if let Some(i) = best_idx {
                    let lo = radius_grid[i.saturating_sub(1)];
                    let hi = radius_grid[(i + 1).min(radius_grid.len() - 1)];
                    if lo < hi {
                        best = best.max(golden_max(|v| avg(v.exp()), lo.ln(), hi.ln(), 60));
                    }
                }
            }
        }
        best
    }
}

/// Seed of replica `replica` at sample size `n`: `base ^ (n << 32) ^ replica`.
pub fn replica_seed(base: u64, n: usize, replica: usize) -> u64 {
    base ^ ((n as u64) << 32) ^ replica as u64
}

/// 400 log-spaced radii over `[1e-6, 1e3]`.
pub fn default_radius_grid() -> Vec<f64> {
    log_grid(1e-6, 1e3, 400)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// `P(lo <= Z <= hi)` for standard normal `Z`, without cancellation in the
/// tails.
pub(crate) fn normal_interval_prob(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let sq = std::f64::consts::SQRT_2;
    if lo >= 0.0 {
        0.5 * (erfc(lo / sq) - erfc(hi / sq))
    } else if hi <= 0.0 {
        0.5 * (erfc(-hi / sq) - erfc(-lo / sq))
    } else {
        1.0 - 0.5 * (erfc(-lo / sq) + erfc(hi / sq))
    }
}

/// CDF of the noncentral chi-square law with `d` degrees of freedom and
/// noncentrality `lambda`, as a Poisson mixture of central laws.
fn noncentral_chi2_cdf(d: usize, lambda: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let half = 0.5 * lambda;
    let a0 = 0.5 * d as f64;
    if half == 0.0 {
        return gamma_lr(a0, 0.5 * x);
    }
    let center = half.floor() as i64;
    let spread = (10.0 * half.sqrt() + 30.0) as i64;
    let lo = (center - spread).max(0);
    let hi = center + spread;
    let mut acc = 0.0;
    for j in lo..=hi {
        let jf = j as f64;
        let log_w = -half + jf * half.ln() - ln_gamma(jf + 1.0);
        let w = log_w.exp();
        if w == 0.0 {
            continue;
        }
        acc += w * gamma_lr(a0 + jf, 0.5 * x);
    }
    acc.clamp(0.0, 1.0)
}

/// Lebesgue measure of `box ∩ B(center, r)`.
fn box_ball_volume(lower: &[f64], upper: &[f64], center: &[f64], r: f64) -> f64 {
    let lo = lower[0].max(center[0] - r);
    let hi = upper[0].min(center[0] + r);
    if hi <= lo {
        return 0.0;
    }
    if lower.len() == 1 {
        // Measured from the center so a ball inside the box gives exactly 2r.
        return (upper[0] - center[0]).min(r) + (center[0] - lower[0]).min(r);
    }
    let q = Adaptive { rel_tol: 1e-10, abs_tol: 1e-14, max_panels: 400, initial_panels: 2 };
    // The section radius has square-root kinks where it vanishes or where
    // the box faces are crossed, so split at those points.
    let mut breaks = vec![lo, hi];
    for j in 1..lower.len() {
        for face in [lower[j], upper[j]] {
            let h2 = r * r - (face - center[j]).powi(2);
            if h2 > 0.0 {
                for x in [center[0] - h2.sqrt(), center[0] + h2.sqrt()] {
                    if x > lo && x < hi {
                        breaks.push(x);
                    }
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    q.integrate_pieces(
        |x| {
            let h2 = r * r - (x - center[0]).powi(2);
            if h2 <= 0.0 {
                0.0
            } else {
                box_ball_volume(&lower[1..], &upper[1..], &center[1..], h2.sqrt())
            }
        },
        &breaks,
    )
    .value
}

/// `N` draws from a [`MeasureModel`] together with the seed that produced
/// them.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSample {
    points: Vec<f64>,
    dim: usize,
    seed: u64,
    source: MeasureModel,
}

impl EmpiricalSample {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn source(&self) -> &MeasureModel {
        &self.source
    }
    pub fn points(&self) -> &[f64] {
        &self.points
    }
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
    /// The empirical measure `μ_N` as merged atoms.
    pub fn empirical_measure(&self) -> DiscreteAtoms {
        DiscreteAtoms::empirical(self.dim, &self.points)
    }
}

/// `μ * Φ_s` as a standalone density.
#[derive(Clone, Debug)]
pub struct SmoothedDensity {
    base: MeasureModel,
    bandwidth: f64,
}

impl SmoothedDensity {
    pub fn new(base: MeasureModel, bandwidth: f64) -> Result<Self> {
        if !(bandwidth >= 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth {bandwidth} must be >= 0")));
        }
        if bandwidth == 0.0 && !base.is_absolutely_continuous() {
            return Err(Error::DensityUndefined("point masses have no density at s = 0".into()));
        }
        Ok(SmoothedDensity { base, bandwidth })
    }
    pub fn base(&self) -> &MeasureModel {
        &self.base
    }
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.base.density_unchecked(self.bandwidth, x)
    }
    /// Smoothing composes additively in time.
    pub fn smooth(&self, s: f64) -> Result<Self> {
        Self::new(self.base.clone(), self.bandwidth + s)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ModelDoc {
    GaussianMixture { dim: usize, weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64> },
    UniformBox { dim: usize, lower: Vec<f64>, upper: Vec<f64> },
    Discrete { dim: usize, weights: Vec<f64>, locations: Vec<Vec<f64>> },
}

impl TryFrom<ModelDoc> for MeasureModel {
    type Error = Error;
    fn try_from(doc: ModelDoc) -> Result<Self> {
        match doc {
            ModelDoc::GaussianMixture { dim, weights, means, variances } => {
                MeasureModel::gaussian_mixture(dim, weights, means, variances)
            }
            ModelDoc::UniformBox { dim, lower, upper } => {
                if lower.len() != dim {
                    return Err(Error::InvalidModel(format!(
                        "box corners have dimension {}, expected {dim}",
                        lower.len()
                    )));
                }
                MeasureModel::uniform_box(lower, upper)
            }
            ModelDoc::Discrete { dim, weights, locations } => {
                MeasureModel::discrete(dim, weights, locations)
            }
        }
    }
}

impl From<MeasureModel> for ModelDoc {
    fn from(m: MeasureModel) -> Self {
        let dim = m.dim;
        match m.kind {
            ModelKind::GaussianMixture(g) => ModelDoc::GaussianMixture {
                dim,
                means: g.means.chunks_exact(dim).map(|c| c.to_vec()).collect(),
                weights: g.weights,
                variances: g.variances,
            },
            ModelKind::UniformBox(b) => ModelDoc::UniformBox { dim, lower: b.lower, upper: b.upper },
            ModelKind::Discrete(a) => ModelDoc::Discrete {
                dim,
                locations: a.locations.chunks_exact(dim).map(|c| c.to_vec()).collect(),
                weights: a.weights,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn std_normal() -> MeasureModel {
        MeasureModel::gaussian(vec![0.0], 1.0).unwrap()
    }

    fn unit_interval() -> MeasureModel {
        MeasureModel::uniform_box(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn construction_rejects_bad_models() {
        assert!(MeasureModel::gaussian_mixture(1, vec![0.5, 0.4], vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).is_err());
        assert!(MeasureModel::gaussian(vec![0.0], 0.0).is_err());
        assert!(MeasureModel::uniform_box(vec![1.0], vec![0.0]).is_err());
        assert!(MeasureModel::discrete(2, vec![1.0], vec![vec![0.0]]).is_err());
        assert!(MeasureModel::discrete(1, vec![-0.5, 1.5], vec![vec![0.0], vec![1.0]]).is_err());
    }

    #[test]
    fn sampling_point_mass() {
        let s = MeasureModel::dirac(1).sample(5, 3).unwrap();
        assert_eq!(s.points(), &[0.0; 5]);
        assert!(MeasureModel::dirac(1).sample(0, 3).is_err());
    }

    #[test]
    fn sampling_gaussian_mean() {
        let n = 100_000;
        let s = std_normal().sample(n, 11).unwrap();
        let mean: f64 = s.points().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn sampling_uniform_cdf() {
        let n = 100_000;
        let s = unit_interval().sample(n, 5).unwrap();
        let below = s.points().iter().filter(|&&x| x <= 0.5).count() as f64 / n as f64;
        assert!((below - 0.5).abs() < 0.01);
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = MeasureModel::gaussian_mixture(
            2,
            vec![0.3, 0.7],
            vec![vec![0.0, 1.0], vec![-1.0, 2.0]],
            vec![0.5, 2.0],
        )
        .unwrap();
        assert_eq!(m.sample(50, 42).unwrap(), m.sample(50, 42).unwrap());
        assert_ne!(m.sample(50, 42).unwrap().points(), m.sample(50, 43).unwrap().points());
    }

    #[test]
    fn smoothed_density_examples() {
        let atom = MeasureModel::dirac(1);
        let v = atom.smoothed_density(1.0 / (4.0 * PI), &[0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        assert!(matches!(atom.smoothed_density(0.0, &[0.0]), Err(Error::DensityUndefined(_))));

        let v = std_normal().smoothed_density(0.0, &[0.0]).unwrap();
        assert!((v - 0.398_942_3).abs() < 1e-7);
    }

    #[test]
    fn smoothed_uniform_matches_numerical_convolution() {
        // Riemann-midpoint convolution of 1_[0,1] with Φ_s on a fine grid.
        let s = 0.01;
        let x = 0.5;
        let n = 200_000;
        let h = 1.0 / n as f64;
        let mut oracle = 0.0;
        for i in 0..n {
            let y = (i as f64 + 0.5) * h;
            oracle += h * (4.0 * PI * s).powf(-0.5) * (-(x - y) * (x - y) / (4.0 * s)).exp();
        }
        let v = unit_interval().smoothed_density(s, &[x]).unwrap();
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
    }

    #[test]
    fn semigroup_gaussian_mixture() {
        let m = MeasureModel::gaussian_mixture(
            1,
            vec![0.25, 0.75],
            vec![vec![-1.0], vec![2.0]],
            vec![0.3, 1.2],
        )
        .unwrap();
        let once = SmoothedDensity::new(m.clone(), 0.7).unwrap();
        let twice = SmoothedDensity::new(m, 0.2).unwrap().smooth(0.5).unwrap();
        for x in [-3.0, -1.0, 0.0, 0.4, 2.0, 5.0] {
            assert!((once.eval(&[x]) - twice.eval(&[x])).abs() <= 1e-10);
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        let models = [
            MeasureModel::gaussian_mixture(2, vec![0.5, 0.5], vec![vec![0.0, 0.0], vec![1.0, -1.0]], vec![0.4, 0.9]).unwrap(),
            MeasureModel::uniform_box(vec![0.0, -1.0], vec![1.0, 0.5]).unwrap(),
            MeasureModel::discrete(2, vec![0.2, 0.8], vec![vec![0.0, 0.0], vec![0.5, 1.0]]).unwrap(),
        ];
        for m in &models {
            let s = 0.05;
            let h = 0.02;
            let lim = 6.0;
            let n = (2.0 * lim / h) as i64;
            let mut total = 0.0;
            for i in 0..=n {
                for j in 0..=n {
                    let x = [-lim + i as f64 * h, -lim + j as f64 * h];
                    total += m.density_unchecked(s, &x);
                }
            }
            total *= h * h;
            assert!((total - 1.0).abs() < 1e-6, "{m:?}: {total}");
        }
    }

    #[test]
    fn ball_mass_examples() {
        assert_eq!(MeasureModel::dirac(1).ball_mass(&[0.0], 0.0), 1.0);
        assert_eq!(MeasureModel::dirac(1).ball_mass(&[0.0], 3.0), 1.0);
        assert!((unit_interval().ball_mass(&[0.5], 0.25) - 0.5).abs() < 1e-15);
        let erf_oracle = statrs::function::erf::erf(1.0 / 2f64.sqrt());
        assert!((std_normal().ball_mass(&[0.0], 1.0) - erf_oracle).abs() < 1e-12);
        assert!((std_normal().ball_mass(&[0.0], 1.0) - 0.682_689_5).abs() < 1e-7);
    }

    #[test]
    fn ball_mass_higher_dimensions() {
        // Centered standard Gaussian in d=2: P(|Z| <= r) = 1 - e^{-r^2/2}.
        let g = MeasureModel::gaussian(vec![0.0, 0.0], 1.0).unwrap();
        for r in [0.3, 1.0, 2.5] {
            assert!((g.ball_mass(&[0.0, 0.0], r) - (1.0 - (-r * r / 2.0).exp())).abs() < 1e-12);
        }
        // Off-center: compare with a polar-coordinates quadrature oracle.
        let c = [1.5, 0.0];
        let r = 1.2;
        let q = Adaptive::with_rel_tol(1e-12);
        let oracle = q
            .integrate(
                |rho| {
                    q.integrate(
                        |th: f64| {
                            let x = c[0] + rho * th.cos();
                            let y = c[1] + rho * th.sin();
                            rho * (-(x * x + y * y) / 2.0).exp() / (2.0 * PI)
                        },
                        0.0,
                        2.0 * PI,
                    )
                    .value
                },
                0.0,
                r,
            )
            .value;
        assert!((g.ball_mass(&c, r) - oracle).abs() < 1e-9);

        // Unit square, ball fully inside and straddling a corner.
        let b = MeasureModel::uniform_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!((b.ball_mass(&[0.5, 0.5], 0.3) - PI * 0.09).abs() < 1e-8);
        assert!((b.ball_mass(&[0.0, 0.0], 0.5) - PI * 0.25 / 4.0).abs() < 1e-8);
        assert!((b.ball_mass(&[0.5, 0.5], 2.0) - 1.0).abs() < 1e-9);
        // Unit cube: quarter of a ball along an edge.
        let cube = MeasureModel::uniform_box(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let v = cube.ball_mass(&[0.5, 0.0, 0.0], 0.2);
        assert!((v - 4.0 / 3.0 * PI * 0.008 / 4.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn ball_mass_monotone_and_tends_to_one() {
        let m = MeasureModel::gaussian_mixture(2, vec![0.4, 0.6], vec![vec![0.0, 0.0], vec![2.0, 1.0]], vec![0.5, 1.5]).unwrap();
        let mut prev = 0.0;
        for r in log_grid(1e-3, 50.0, 60) {
            let v = m.ball_mass(&[0.5, -0.5], r);
            assert!(v + 1e-14 >= prev);
            prev = v;
        }
        assert!((prev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximal_function_examples() {
        let grid = default_radius_grid();
        let atom = MeasureModel::dirac(1);
        let v = atom.maximal_function(&[0.5], &grid);
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        // brute-force grid oracle: dense radii
        let dense = log_grid(1e-4, 10.0, 20_000);
        let brute = dense
            .iter()
            .map(|&r| atom.ball_mass(&[0.5], r) / (2.0 * r))
            .fold(0.0, f64::max);
        assert!(brute <= v + 1e-12 && brute > 0.99);

        let u = unit_interval();
        let v = u.maximal_function(&[0.5], &grid);
        assert!((v - 1.0).abs() < 1e-12);

        let g = std_normal();
        for x in [0.0, 0.7, 3.0] {
            let m = g.maximal_function(&[x], &grid);
            assert!(m >= g.ball_mass(&[x], 1.0) / 2.0);
        }
        assert_eq!(atom.maximal_function(&[0.0], &grid), f64::INFINITY);
    }

    #[test]
    fn maximal_function_grid_subset_is_smaller() {
        let g = MeasureModel::gaussian_mixture(1, vec![0.5, 0.5], vec![vec![-2.0], vec![2.0]], vec![0.2, 0.2]).unwrap();
        let full = log_grid(1e-3, 100.0, 200);
        let sub: Vec<f64> = full.iter().step_by(7).copied().collect();
        for x in [-3.0, 0.0, 1.0, 4.0] {
            let a = g.maximal_function(&[x], &full);
            let b = g.maximal_function(&[x], &sub);
            assert!(b <= a * (1.0 + 1e-9), "x={x}: {b} > {a}");
        }
    }

    #[test]
    fn json_round_trip_and_schema_errors() {
        let m = MeasureModel::gaussian_mixture(2, vec![0.3, 0.7], vec![vec![0.0, 1.0], vec![-1.0, 2.0]], vec![0.5, 2.0]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"type\":\"gaussian_mixture\""));
        let back: MeasureModel = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        let bad = r#"{"type":"gaussian_mixture","dim":1,"weights":[0.5],"means":[[0]],"variances":[1]}"#;
        assert!(serde_json::from_str::<MeasureModel>(bad).is_err());
        let unknown = r#"{"type":"uniform_box","dim":1,"lower":[0],"upper":[1],"extra":3}"#;
        assert!(serde_json::from_str::<MeasureModel>(unknown).is_err());
        let ok = r#"{"type":"discrete","dim":1,"weights":[1.0],"locations":[[0.0]]}"#;
        assert_eq!(serde_json::from_str::<MeasureModel>(ok).unwrap(), MeasureModel::dirac(1));
    }

    #[test]
    fn empirical_measure_merges_duplicates() {
        let atoms = DiscreteAtoms::empirical(1, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms.weights(), &[0.75, 0.25]);
        let single = DiscreteAtoms::empirical(1, &[0.0; 7]);
        assert_eq!(single, match MeasureModel::dirac(1).kind() {
            ModelKind::Discrete(a) => a.clone(),
            _ => unreachable!(),
        });
    }
}
