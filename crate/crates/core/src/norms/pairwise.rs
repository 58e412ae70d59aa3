//! The `p = 2` norm of `μ_N^ε - μ^ε` as a double sum over sample pairs.
//!
//! With `K(z) = ∫_0^1 t^{α-1} Φ_{2(t+ε)}(z) dt` and `L = K * μ`,
//!
//! ```text
//! ‖μ_N^ε - μ^ε‖² = Σ_ij w_i w_j K(X_i - X_j) - 2 Σ_i w_i L(X_i) + ∫ L dμ.
//! ```
//!
//! `K` and the per-component parts of `L` are radial and tabulated once.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::measures::{normal_interval_prob, DiscreteAtoms, MeasureModel, ModelKind};
use crate::quadrature::Adaptive;

const TABLE_SIZE: usize = 4096;
/// Tables are cut where the Gaussian factor drops below `e^{-46}`.
const TABLE_CUTOFF: f64 = 46.0;

fn t_quad() -> Adaptive {
    Adaptive { rel_tol: 1e-11, abs_tol: 1e-300, max_panels: 2000, initial_panels: 2 }
}

/// `(∫_0^1 t^{α-1} G_v(r) dt, ∫_0^1 t^{α-1} G_v(r) (-r²/v) dt)` for the
/// isotropic Gaussian density `G_v` of variance `v(t) = var0 + 4(t+ε)` in
/// `R^d`. The second entry is the derivative with respect to `ln r`.
fn gauss_t_integral(alpha: f64, d: usize, var0: f64, eps: f64, r: f64) -> (f64, f64) {
    let dh = 0.5 * d as f64;
    let r2 = r * r;
    let v_at = |t: f64| var0 + 4.0 * (t + eps);
    let shape = |t: f64| {
        let v = v_at(t);
        let g = (2.0 * PI * v).powf(-dh) * (-r2 / (2.0 * v)).exp();
        (g, -g * r2 / v)
    };
    // Feature locations in t: where 4(t+ε) overtakes var0, and where v ~ r².
    let mut breaks: Vec<f64> = vec![var0 / 4.0 - eps, r2 / 4.0 - var0 / 4.0 - eps, eps]
        .into_iter()
        .filter(|b| *b > 1e-300 && *b < 1.0)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let singular = var0 + 4.0 * eps == 0.0;
    let q = t_quad();
    let first = breaks.first().copied().unwrap_or(1.0);
    let mut out = [0.0f64; 2];
    for (k, slot) in out.iter_mut().enumerate() {
        let pick = |t: f64| if k == 0 { shape(t).0 } else { shape(t).1 };
        // Near t = 0 the density factor is t^{-d/2} times a regular part when
        // there is no base variance.
        let head = if singular {
            if r2 == 0.0 {
                // ∫_0^first t^{α-1-d/2} (8π)^{-d/2} dt, exactly.
                let g = alpha - dh;
                if k == 0 {
                    (8.0 * PI).powf(-dh) * first.powf(g) / g
                } else {
                    0.0
                }
            } else {
                let lo = (r2 / (8.0 * 750.0)).min(first);
                if lo < first {
                    q.integrate_log_axis(|t| t.powf(alpha - 1.0) * pick(t), lo, first).value
                } else {
                    0.0
                }
            }
        } else {
            q.integrate_power_origin(pick, alpha - 1.0, first).value
        };
        let mut pts = breaks.clone();
        pts.push(1.0);
        let mut total = head;
        for w in pts.windows(2) {
            total += q.integrate_log_axis(|t| t.powf(alpha - 1.0) * pick(t), w[0], w[1]).value;
        }
        *slot = total;
    }
    (out[0], out[1])
}

/// Cubic Hermite table of a radial function on a logarithmic `r` grid.
#[derive(Clone, Debug)]
struct RadialTable {
    ln_r0: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    at_zero: f64,
    /// Exponent of `f(r) - f(0)` for `r` below the first node.
    small_power: f64,
    r0: f64,
    r_max: f64,
}

impl RadialTable {
    fn build(f: impl Fn(f64) -> (f64, f64), at_zero: f64, r0: f64, r_max: f64, small_power: f64) -> Self {
        let ln_r0 = r0.ln();
        let step = (r_max.ln() - ln_r0) / (TABLE_SIZE - 1) as f64;
        let mut values = Vec::with_capacity(TABLE_SIZE);
        let mut slopes = Vec::with_capacity(TABLE_SIZE);
        for i in 0..TABLE_SIZE {
            let (v, s) = f((ln_r0 + step * i as f64).exp());
            values.push(v);
            slopes.push(s);
        }
        RadialTable { ln_r0, step, values, slopes, at_zero, small_power, r0, r_max }
    }

    #[inline]
    fn eval(&self, r: f64) -> f64 {
        if r >= self.r_max {
            return 0.0;
        }
        if r <= self.r0 {
            if r == 0.0 {
                return self.at_zero;
            }
            return self.at_zero + (self.values[0] - self.at_zero) * (r / self.r0).powf(self.small_power);
        }
        let x = (r.ln() - self.ln_r0) / self.step;
        let i = (x as usize).min(TABLE_SIZE - 2);
        let f = x - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let f2 = f * f;
        let f3 = f2 * f;
        (2.0 * f3 - 3.0 * f2 + 1.0) * y0
            + (f3 - 2.0 * f2 + f) * m0
            + (-2.0 * f3 + 3.0 * f2) * y1
            + (f3 - f2) * m1
    }
}

fn table_for(alpha: f64, d: usize, var0: f64, eps: f64) -> RadialTable {
    let at_zero = gauss_t_integral(alpha, d, var0, eps, 0.0).0;
    let base = var0 + 4.0 * eps;
    let scale = if base > 0.0 { base.sqrt() } else { 1.0 };
    let r0 = 1e-7 * scale.min(1.0);
    let r_max = (2.0 * (var0 + 4.0 * (1.0 + eps)) * TABLE_CUTOFF).sqrt();
    let small_power = if base > 0.0 { 2.0 } else { (2.0 * alpha - d as f64).min(2.0) };
    RadialTable::build(|r| gauss_t_integral(alpha, d, var0, eps, r), at_zero, r0, r_max, small_power)
}

#[derive(Clone, Debug)]
enum Potential {
    /// One radial table per Gaussian component.
    Gaussian { tables: Vec<RadialTable>, weights: Vec<f64>, means: Vec<f64> },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Atoms(DiscreteAtoms),
}

/// Squared `H^{-α}` distance between the smoothed empirical measure and
/// the smoothed model, evaluated through pair sums.
#[derive(Clone, Debug)]
pub struct PairwiseHNorm {
    model: MeasureModel,
    alpha: f64,
    eps: f64,
    kernel: RadialTable,
    potential: Potential,
    self_energy: f64,
}

impl PairwiseHNorm {
    pub fn new(model: &MeasureModel, alpha: f64, eps: f64) -> Result<Self> {
        let d = model.dim();
        if !(alpha > 0.0) || !(eps >= 0.0) {
            return Err(Error::InvalidParameter("alpha must be > 0 and eps >= 0".into()));
        }
        if eps == 0.0 && alpha <= 0.5 * d as f64 {
            return Err(Error::NotInSpace(format!(
                "point masses are not in H^-alpha for alpha = {alpha} <= d/2 = {}",
                0.5 * d as f64
            )));
        }
        let kernel = table_for(alpha, d, 0.0, eps);
        let potential = match model.kind() {
            ModelKind::GaussianMixture(g) => Potential::Gaussian {
                tables: g.variances().iter().map(|v| table_for(alpha, d, *v, eps)).collect(),
                weights: g.weights().to_vec(),
                means: (0..g.weights().len()).flat_map(|k| g.mean(k, d).to_vec()).collect(),
            },
            ModelKind::UniformBox(b) => {
                Potential::Box { lower: b.lower().to_vec(), upper: b.upper().to_vec() }
            }
            ModelKind::Discrete(a) => Potential::Atoms(a.clone()),
        };
        let mut this =
            PairwiseHNorm { model: model.clone(), alpha, eps, kernel, potential, self_energy: 0.0 };
        this.self_energy = match &this.potential {
            Potential::Atoms(a) => this.pair_energy(a),
            _ => mu_norm_sq(model, alpha, eps)?,
        };
        Ok(this)
    }

    pub fn model(&self) -> &MeasureModel {
        &self.model
    }

    /// `‖Φ_ε‖²_{H^{-α}} = K(0)`.
    pub fn phi_norm_sq(&self) -> f64 {
        self.kernel.at_zero
    }

    /// `‖μ^ε‖²_{H^{-α}}`.
    pub fn mu_norm_sq(&self) -> f64 {
        self.self_energy
    }

    /// `K(z)` for `|z| = r`.
    pub fn kernel(&self, r: f64) -> f64 {
        self.kernel.eval(r)
    }

    /// `Σ_ij w_i w_j K(a_i - a_j)`; atoms are sorted by first coordinate so
    /// the inner loop stops at the kernel cutoff.
    fn pair_energy(&self, atoms: &DiscreteAtoms) -> f64 {
        let w = atoms.weights();
        let n = atoms.len();
        let cut = self.kernel.r_max;
        let k0 = self.kernel.at_zero;
        let mut diag = 0.0;
        let mut off = 0.0;
        for i in 0..n {
            diag += w[i] * w[i] * k0;
            let xi = atoms.location(i);
            let mut row = 0.0;
            for j in i + 1..n {
                let xj = atoms.location(j);
                if xj[0] - xi[0] >= cut {
                    break;
                }
                let r2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                row += w[j] * self.kernel.eval(r2.sqrt());
            }
            off += w[i] * row;
        }
        diag + 2.0 * off
    }

    /// `L(y) = ∫_0^1 t^{α-1} μ_{2(t+ε)}(y) dt`.
    pub fn potential(&self, y: &[f64]) -> f64 {
        let d = y.len();
        match &self.potential {
            Potential::Gaussian { tables, weights, means } => tables
                .iter()
                .enumerate()
                .map(|(k, tab)| {
                    let m = &means[k * d..(k + 1) * d];
                    let r2: f64 = m.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                    weights[k] * tab.eval(r2.sqrt())
                })
                .sum(),
            Potential::Box { lower, upper } => {
                let (alpha, eps) = (self.alpha, self.eps);
                let dens = |t: f64| {
                    let s = 2.0 * (t + eps);
                    let mut acc = 1.0;
                    for j in 0..d {
                        let len = upper[j] - lower[j];
                        acc *= if s == 0.0 {
                            f64::from(u8::from(y[j] >= lower[j] && y[j] <= upper[j])) / len
                        } else {
                            let sd = (2.0 * s).sqrt();
                            normal_interval_prob((y[j] - upper[j]) / sd, (y[j] - lower[j]) / sd) / len
                        };
                    }
                    acc
                };
                let mut breaks = vec![0.0];
                for j in 0..d {
                    for e in [lower[j], upper[j]] {
                        let tb = (y[j] - e).powi(2) / 4.0 - eps;
                        if tb > 0.0 && tb < 1.0 {
                            breaks.push(tb);
                        }
                    }
                }
                breaks.sort_by(f64::total_cmp);
                breaks.push(1.0);
                let q = t_quad();
                let mut total = q.integrate_power_origin(dens, alpha - 1.0, breaks[1]).value;
                for w in breaks[1..].windows(2) {
                    total += q.integrate(|t| t.powf(alpha - 1.0) * dens(t), w[0], w[1]).value;
                }
                total
            }
            Potential::Atoms(a) => {
                let cut = self.kernel.r_max;
                (0..a.len())
                    .filter(|&i| (a.location(i)[0] - y[0]).abs() < cut)
                    .map(|i| {
                        let r2: f64 =
                            a.location(i).iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                        a.weights()[i] * self.kernel.eval(r2.sqrt())
                    })
                    .sum()
            }
        }
    }

    /// `‖μ_N^ε - μ^ε‖²_{H^{-α}}` for the empirical measure `atoms`.
    pub fn norm_sq(&self, atoms: &DiscreteAtoms) -> f64 {
        let cross: f64 = (0..atoms.len())
            .map(|i| atoms.weights()[i] * self.potential(atoms.location(i)))
            .sum();
        (self.pair_energy(atoms) - 2.0 * cross + self.self_energy).max(0.0)
    }

    pub fn norm(&self, atoms: &DiscreteAtoms) -> f64 {
        self.norm_sq(atoms).sqrt()
    }
}

/// `∫∫_{[0,L]²} N(x - y; 0, σ²) dx dy`.
fn interval_self_overlap(len: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return len;
    }
    let z = len / sd;
    2.0 * (len * (normal_interval_prob(0.0, z)) - sd / (2.0 * PI).sqrt() * (1.0 - (-0.5 * z * z).exp()))
}

/// `‖μ^ε‖²_{H^{-α}} = ∫_0^1 t^{α-1} ‖μ * Φ_{t+ε}‖²_{L²} dt` from closed-form
/// pairwise overlaps.
pub fn mu_norm_sq(model: &MeasureModel, alpha: f64, eps: f64) -> Result<f64> {
    let d = model.dim();
    match model.kind() {
        ModelKind::GaussianMixture(g) => {
            let k = g.weights().len();
            let mut total = 0.0;
            for a in 0..k {
                for b in 0..k {
                    let r2: f64 =
                        g.mean(a, d).iter().zip(g.mean(b, d)).map(|(x, y)| (x - y) * (x - y)).sum();
                    let var0 = g.variances()[a] + g.variances()[b];
                    total += g.weights()[a]
                        * g.weights()[b]
                        * gauss_t_integral(alpha, d, var0, eps, r2.sqrt()).0;
                }
            }
            Ok(total)
        }
        ModelKind::UniformBox(b) => {
            let f = |t: f64| {
                let s = t + eps;
                (0..d)
                    .map(|j| {
                        let len = b.upper()[j] - b.lower()[j];
                        interval_self_overlap(len, (4.0 * s).sqrt()) / (len * len)
                    })
                    .product::<f64>()
            };
            Ok(t_quad().integrate_power_origin(f, alpha - 1.0, 1.0).value)
        }
        ModelKind::Discrete(a) => {
            if eps == 0.0 && alpha <= 0.5 * d as f64 {
                return Err(Error::NotInSpace(format!(
                    "point masses are not in H^-alpha for alpha = {alpha} <= d/2"
                )));
            }
            let mut total = 0.0;
            for i in 0..a.len() {
                for j in 0..a.len() {
                    let r2: f64 = a
                        .location(i)
                        .iter()
                        .zip(a.location(j))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    total += a.weights()[i] * a.weights()[j] * gauss_t_integral(alpha, d, 0.0, eps, r2.sqrt()).0;
                }
            }
            Ok(total)
        }
    }
}
