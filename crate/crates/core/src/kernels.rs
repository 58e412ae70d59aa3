//! The heat kernel, dimensional constants and the special integrals that
//! give closed forms for the norms of a smoothed point mass.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{Adaptive, Integral};

/// Band used when comparing `α p` with `d (p - 1)`.
pub const REGIME_TOL: f64 = 1e-12;

/// `Φ_t(x) = (4πt)^{-d/2} exp(-|x|²/4t)` with `d = x.len()`.
pub fn heat_kernel(x: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("heat kernel needs t > 0, got {t}")));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok(heat_kernel_r2(r2, t, x.len()))
}

#[inline]
pub(crate) fn heat_kernel_r2(r2: f64, t: f64, d: usize) -> f64 {
    (4.0 * PI * t).powf(-0.5 * d as f64) * (-r2 / (4.0 * t)).exp()
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    PI.powf(h) / gamma(h + 1.0)
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Which of the two heat-kernel norms to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Cal,
    Scr,
    /// `Scr` for integer `α`, `Cal` otherwise.
    Auto,
}

impl Space {
    pub fn resolve(self, alpha: f64) -> Space {
        match self {
            Space::Auto if is_integer(alpha) => Space::Scr,
            Space::Auto => Space::Cal,
            s => s,
        }
    }
}

pub fn is_integer(alpha: f64) -> bool {
    (alpha - alpha.round()).abs() < 1e-12
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct NormParams {
    pub alpha: f64,
    pub p: f64,
    pub dim: usize,
    pub eps: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    alpha: f64,
    p: f64,
    dim: usize,
    #[serde(default)]
    eps: f64,
}

impl TryFrom<RawParams> for NormParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        NormParams::new(r.alpha, r.p, r.dim, r.eps)
    }
}

impl NormParams {
    pub fn new(alpha: f64, p: f64, dim: usize, eps: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {p} must lie in (1, inf)")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps = {eps} must be >= 0")));
        }
        Ok(NormParams { alpha, p, dim, eps })
    }

    pub fn with_eps(self, eps: f64) -> Self {
        NormParams { eps, ..self }
    }

    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// `d / q`, the threshold separating the regimes.
    pub fn threshold(&self) -> f64 {
        self.dim as f64 * (self.p - 1.0) / self.p
    }

    pub fn regime(&self) -> Regime {
        let gap = self.alpha * self.p - self.dim as f64 * (self.p - 1.0);
        if gap.abs() <= REGIME_TOL {
            Regime::Critical
        } else if gap > 0.0 {
            Regime::Supercritical
        } else {
            Regime::Subcritical
        }
    }

    /// `a = αp/2`, the power of `s` in the CAL integrand.
    fn a(&self) -> f64 {
        0.5 * self.alpha * self.p
    }

    /// `b = (p-1)d/2`, the decay power of `(1+s)` in the CAL integrand.
    fn b(&self) -> f64 {
        0.5 * (self.p - 1.0) * self.dim as f64
    }

    fn d(&self) -> f64 {
        self.dim as f64
    }
}

fn inner_quad() -> Adaptive {
    Adaptive { rel_tol: 1e-11, abs_tol: 1e-300, max_panels: 4000, initial_panels: 4 }
}

fn outer_quad() -> Adaptive {
    Adaptive { rel_tol: 1e-9, abs_tol: 1e-300, max_panels: 4000, initial_panels: 4 }
}

/// `I_ε(r) = ∫_0^{1/ε} s^{α-1} (1+s)^{-d} exp(-r²/2(1+s)) ds`.
///
/// With `ε = 0` the integral is improper at infinity and converges only
/// for `α < d`.
pub fn i_eps(r: f64, params: &NormParams) -> Result<f64> {
    let (alpha, d, eps) = (params.alpha, params.d(), params.eps);
    if r < 0.0 || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("r = {r} must be finite and >= 0")));
    }
    if eps == 0.0 && alpha >= d {
        return Err(Error::Divergent(format!(
            "I_0(r) diverges for alpha = {alpha} >= d = {d}"
        )));
    }
    let gauss = |s: f64| (-r * r / (2.0 * (1.0 + s))).exp();
    let q = inner_quad();
    let upper = if eps == 0.0 { f64::INFINITY } else { 1.0 / eps };
    let head_end = upper.min(1.0);
    let head = q.integrate_power_origin(|s| (1.0 + s).powf(-d) * gauss(s), alpha - 1.0, head_end);
    if upper <= 1.0 {
        return Ok(head.value);
    }
    let tail = if eps == 0.0 {
        q.integrate_power_infinity(
            |s| (s / (1.0 + s)).powf(d) * gauss(s),
            alpha - 1.0 - d,
            1.0,
        )
    } else {
        // Split where the Gaussian factor switches on.
        let knee = (0.5 * r * r - 1.0).clamp(1.0, upper);
        let f = |s: f64| s.powf(alpha - 1.0) * (1.0 + s).powf(-d) * gauss(s);
        q.integrate_log_axis(f, 1.0, knee).add(q.integrate_log_axis(f, knee, upper))
    };
    Ok(head.value + tail.value)
}

/// Uniform upper bound on `I_ε(r)` over `r`, valid for `0 < ε <= 1`.
pub fn i_eps_unify_bound(params: &NormParams) -> f64 {
    let (alpha, d, eps) = (params.alpha, params.d(), params.eps);
    if (alpha - d).abs() < REGIME_TOL {
        1.0 / alpha + (1.0 / eps).ln()
    } else {
        1.0 / alpha + (eps.powf(d - alpha) - 1.0) / (alpha - d)
    }
}

/// `∫_L^U t^{d-α-1} e^{-t} dt` with `L = εr²/2(1+ε)` and `U = r²/2`.
fn gamma_window(r: f64, params: &NormParams) -> f64 {
    let (alpha, d, eps) = (params.alpha, params.d(), params.eps);
    let lo = eps * r * r / (2.0 * (1.0 + eps));
    let hi = 0.5 * r * r;
    inner_quad()
        .integrate_log_axis(|t| t.powf(d - alpha - 1.0) * (-t).exp(), lo, hi)
        .value
}

/// The two-sided bound on `I_ε(r)` in terms of an incomplete gamma window,
/// as `(lower, upper)` with lower constant `min(1, 2^{1-α})`.
pub fn i_eps_sandwich(r: f64, params: &NormParams) -> (f64, f64) {
    let (alpha, d) = (params.alpha, params.d());
    let c_alpha = 1f64.min(2f64.powf(1.0 - alpha));
    let scale = r.powf(-2.0 * (d - alpha));
    let window = gamma_window(r, params);
    (c_alpha * scale * window, scale * window)
}

/// `I_ε(r)` through the substitution `t = r²/2(1+s)`:
/// `2^{d-α} r^{-2(d-α)} ∫_L^U (1 - 2t/r²)^{α-1} t^{d-α-1} e^{-t} dt`.
/// Independent of [`i_eps`] and used to cross-check it.
pub fn i_eps_substituted(r: f64, params: &NormParams) -> Result<f64> {
    let (alpha, d, eps) = (params.alpha, params.d(), params.eps);
    if !(r > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidParameter("substituted form needs r > 0 and eps > 0".into()));
    }
    let lo = eps * r * r / (2.0 * (1.0 + eps));
    let hi = 0.5 * r * r;
    let mid = 0.5 * (lo + hi);
    let q = inner_quad();
    let body = |t: f64| (1.0 - t / hi).powf(alpha - 1.0) * t.powf(d - alpha - 1.0) * (-t).exp();
    let left = q.integrate_log_axis(body, lo, mid);
    // u = hi - t removes the endpoint power (1 - t/hi)^{α-1} = (u/hi)^{α-1}.
    let right = q.integrate_power_origin(
        |u| hi.powf(1.0 - alpha) * (hi - u).powf(d - alpha - 1.0) * (-(hi - u)).exp(),
        alpha - 1.0,
        hi - mid,
    );
    Ok(2f64.powf(d - alpha) * r.powf(-2.0 * (d - alpha)) * (left.value + right.value))
}

/// `𝓑₀(ε) = ∫_0^{1/ε} s^{αp/2-1} (1+s)^{-(p-1)d/2} ds`.
///
/// At `ε = 0` the integral converges only in the subcritical regime; in the
/// supercritical regime use [`cal_scaled`], whose `ε → 0` limit is finite.
pub fn b0_cal(params: &NormParams) -> Result<f64> {
    let (a, b, eps) = (params.a(), params.b(), params.eps);
    if eps == 0.0 && params.regime() != Regime::Subcritical {
        return Err(Error::Divergent(format!(
            "B0(0) diverges in the {:?} regime",
            params.regime()
        )));
    }
    let q = inner_quad();
    let upper = if eps == 0.0 { f64::INFINITY } else { 1.0 / eps };
    let head = q.integrate_power_origin(|s| (1.0 + s).powf(-b), a - 1.0, upper.min(1.0));
    if upper <= 1.0 {
        return Ok(head.value);
    }
    let tail = if eps == 0.0 {
        q.integrate_power_infinity(|s| (s / (1.0 + s)).powf(b), a - b - 1.0, 1.0)
    } else {
        q.integrate_log_axis(|s| s.powf(a - 1.0) * (1.0 + s).powf(-b), 1.0, upper)
    };
    Ok(head.value + tail.value)
}

/// `ε^{(α-d/q)p/2} 𝓑₀(ε) = ∫_0^1 t^{αp/2-1} (t+ε)^{-(p-1)d/2} dt`, finite at
/// `ε = 0` in the supercritical regime where it equals `2/(αp - d(p-1))`.
pub fn cal_scaled(params: &NormParams) -> Result<f64> {
    let (a, b, eps) = (params.a(), params.b(), params.eps);
    if eps == 0.0 {
        return match params.regime() {
            Regime::Supercritical => Ok(1.0 / (a - b)),
            r => Err(Error::Divergent(format!("scaled B0 at eps = 0 diverges in the {r:?} regime"))),
        };
    }
    let q = inner_quad();
    let knee = eps.min(1.0);
    let head = q.integrate_power_origin(|t| (t + eps).powf(-b), a - 1.0, knee);
    let tail = if knee < 1.0 {
        q.integrate_log_axis(|t| t.powf(a - 1.0) * (t + eps).powf(-b), knee, 1.0)
    } else {
        Integral::zero()
    };
    Ok(head.value + tail.value)
}

/// Radial integral `A_{d-1} ∫_0^∞ f(r) r^{d-1} dr` split at the given
/// increasing positive break points, log axis between them, with an
/// analytic power-law completion below the first break.
fn radial_integral<F: Fn(f64) -> f64>(f: F, breaks: &[f64], d: usize) -> f64 {
    let q = outer_quad();
    let g = |r: f64| f(r) * r.powi(d as i32 - 1);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += q.integrate_log_axis(&g, w[0], w[1]).value;
    }
    // Below the first break the integrand behaves like a power of r.
    let r0 = breaks[0];
    let (g0, g1) = (g(r0), g(2.0 * r0));
    if g0 > 0.0 && g1 > 0.0 {
        let gamma = (g1 / g0).ln() / 2f64.ln();
        if gamma > -1.0 {
            total += g0 * r0 / (gamma + 1.0);
        }
    }
    sphere_area(d) * total
}

fn sorted_breaks(mut v: Vec<f64>) -> Vec<f64> {
    v.retain(|x| x.is_finite() && *x > 0.0);
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a / *b - 1.0).abs() < 1e-12);
    v
}

/// `𝒮𝓑₀(ε) = A_{d-1} ∫_0^∞ I_ε(r)^{p/2} r^{d-1} dr`.
pub fn b0_scr(params: &NormParams) -> Result<f64> {
    let eps = params.eps;
    if eps == 0.0 {
        return Err(Error::Divergent("scr B0 requires eps > 0".into()));
    }
    let half_p = 0.5 * params.p;
    // Past r_far the window lower limit εr²/2(1+ε) exceeds 750 and I_ε vanishes.
    let r_far = (1500.0 * (1.0 + eps) / eps).sqrt();
    let breaks = sorted_breaks(vec![
        1e-6 * eps.sqrt().min(1.0),
        eps.sqrt(),
        1.0,
        1.0 / eps.sqrt(),
        r_far,
    ]);
    let err = std::cell::Cell::new(None);
    let v = radial_integral(
        |r| match i_eps(r, params) {
            Ok(v) => v.powf(half_p),
            Err(e) => {
                err.set(Some(e.to_string()));
                0.0
            }
        },
        &breaks,
        params.dim,
    );
    match err.take() {
        Some(msg) => Err(Error::Divergent(msg)),
        None => Ok(v),
    }
}

/// `J_ε(r) = ∫_0^1 t^{α-1} (t+ε)^{-d} exp(-r²/2(t+ε)) dt = ε^{α-d} I_ε(r/√ε)`.
fn j_eps(r: f64, params: &NormParams) -> f64 {
    let (alpha, d, eps) = (params.alpha, params.d(), params.eps);
    let f = |t: f64| t.powf(alpha - 1.0) * (t + eps).powf(-d) * (-r * r / (2.0 * (t + eps))).exp();
    let q = inner_quad();
    let mut breaks = vec![eps, 0.5 * r * r];
    breaks.retain(|b| *b > 0.0 && *b < 1.0);
    breaks.sort_by(f64::total_cmp);
    let first = breaks.first().copied().unwrap_or(1.0);
    // Near t = 0 the exponential factor already kills the integrand when ε = 0.
    let head = if eps > 0.0 {
        q.integrate_power_origin(
            |t| (t + eps).powf(-d) * (-r * r / (2.0 * (t + eps))).exp(),
            alpha - 1.0,
            first,
        )
        .value
    } else {
        let lo = (r * r / 1500.0).min(first);
        if lo < first {
            q.integrate_log_axis(f, lo, first).value
        } else {
            0.0
        }
    };
    let mut pts = breaks;
    pts.push(1.0);
    let mut total = head;
    for w in pts.windows(2) {
        total += q.integrate_log_axis(f, w[0], w[1]).value;
    }
    total
}

/// `ε^{(α-d/q)p/2} 𝒮𝓑₀(ε) = A_{d-1} ∫_0^∞ J_ε(r)^{p/2} r^{d-1} dr`, finite at
/// `ε = 0` in the supercritical regime.
pub fn scr_scaled(params: &NormParams) -> Result<f64> {
    let eps = params.eps;
    if eps == 0.0 && params.regime() != Regime::Supercritical {
        return Err(Error::Divergent(format!(
            "scaled scr B0 at eps = 0 diverges in the {:?} regime",
            params.regime()
        )));
    }
    let half_p = 0.5 * params.p;
    let r_far = (1500.0 * (1.0 + eps)).sqrt();
    let lo = if eps > 0.0 { 1e-6 * eps.sqrt().min(1.0) } else { 1e-8 };
    let breaks = sorted_breaks(vec![lo, eps.sqrt(), 1.0, r_far]);
    Ok(radial_integral(|r| j_eps(r, params).powf(half_p), &breaks, params.dim))
}

/// `‖Φ_ε‖` in the requested space, from the closed forms in terms of the
/// scaled integrals.
pub fn phi_norm(params: &NormParams, space: Space) -> Result<f64> {
    let (d, p) = (params.d(), params.p);
    match space.resolve(params.alpha) {
        Space::Cal => {
            let q = params.q();
            let b = cal_scaled(params)?;
            Ok(p.powf(-d / (2.0 * p)) * (4.0 * PI).powf(-d / (2.0 * q)) * b.powf(1.0 / p))
        }
        Space::Scr => {
            let b = scr_scaled(params)?;
            Ok((4.0 * PI).powf(-0.5 * d) * b.powf(1.0 / p))
        }
        Space::Auto => unreachable!("resolved above"),
    }
}

/// `‖δ₀‖`, the `ε → 0` limit of [`phi_norm`].
pub fn delta_norm(params: &NormParams, space: Space) -> Result<f64> {
    if params.regime() != Regime::Supercritical {
        return Err(Error::DeltaNotInSpace { alpha: params.alpha, threshold: params.threshold() });
    }
    phi_norm(&params.with_eps(0.0), space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn np(alpha: f64, p: f64, d: usize, eps: f64) -> NormParams {
        NormParams::new(alpha, p, d, eps).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn heat_kernel_examples() {
        assert!((heat_kernel(&[0.0], 1.0 / (4.0 * PI)).unwrap() - 1.0).abs() < 1e-14);
        assert!((heat_kernel(&[0.0], 1.0).unwrap() - 0.282_094_8).abs() < 1e-7);
        let v = heat_kernel(&[2.0, 0.0], 1.0).unwrap();
        assert!((v - (-1f64).exp() / (4.0 * PI)).abs() < 1e-15);
        assert!(heat_kernel(&[0.0], 0.0).is_err());
    }

    #[test]
    fn heat_kernel_integrates_to_one() {
        for t in [0.05f64, 0.3, 1.0] {
            let q = Adaptive::with_rel_tol(1e-12);
            let lim = 40.0 * t.sqrt();
            let one_d = |x: f64| heat_kernel(&[x], t).unwrap();
            let m1 = q.integrate(one_d, -lim, lim).value;
            assert!((m1 - 1.0).abs() < 1e-8);
            // The kernel factorizes, so tensor quadrature in d = 2, 3 is a
            // product of 1-D rules; check one genuinely 2-D evaluation too.
            let m2 = q
                .integrate(|x| q.integrate(|y| heat_kernel(&[x, y], t).unwrap(), -lim, lim).value, -lim, lim)
                .value;
            assert!((m2 - 1.0).abs() < 1e-8);
            assert!((m1 * m1 * m1 - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn ball_constants() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.188_790_2).abs() < 1e-7);
    }

    #[test]
    fn params_and_regimes() {
        let p = np(1.0, 3.0, 2, 0.0);
        assert!((p.q() * (p.p - 1.0) - p.p).abs() < 1e-12);
        assert_eq!(np(1.0, 2.0, 1, 0.0).regime(), Regime::Supercritical);
        assert_eq!(np(1.0, 2.0, 2, 0.0).regime(), Regime::Critical);
        assert_eq!(np(0.5, 2.0, 2, 0.0).regime(), Regime::Subcritical);
        assert!(NormParams::new(1.0, 1.0, 1, 0.0).is_err());
        assert!(NormParams::new(-1.0, 2.0, 1, 0.0).is_err());
        assert_eq!(Space::Auto.resolve(1.0), Space::Scr);
        assert_eq!(Space::Auto.resolve(0.5), Space::Cal);
    }

    #[test]
    fn i_eps_log_two() {
        let v = i_eps(0.0, &np(1.0, 2.0, 1, 1.0)).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn i_eps_matches_substituted_form() {
        for &(alpha, d) in &[(0.5, 1usize), (1.0, 2), (2.5, 2), (3.0, 3)] {
            for &eps in &[1.0, 0.1, 1e-3] {
                for &r in &[0.05, 0.7, 3.0, 12.0] {
                    let p = np(alpha, 2.0, d, eps);
                    let a = i_eps(r, &p).unwrap();
                    let b = i_eps_substituted(r, &p).unwrap();
                    assert!(rel(a, b) < 1e-8, "{alpha} {d} {eps} {r}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn i_eps_at_zero_eps() {
        // α < d: converges; compare with a small ε.
        let p = np(0.5, 2.0, 1, 0.0);
        let v0 = i_eps(1.0, &p).unwrap();
        let v1 = i_eps(1.0, &p.with_eps(1e-9)).unwrap();
        assert!(rel(v0, v1) < 1e-4);
        assert!(matches!(i_eps(1.0, &np(1.0, 2.0, 1, 0.0)), Err(Error::Divergent(_))));
    }

    #[test]
    fn i_eps_spec_example_value() {
        let p = np(1.0, 2.0, 2, 0.1);
        let v = i_eps(3.0, &p).unwrap();
        assert!((v - 0.145_13).abs() < 5e-5, "{v}");
        let (_, upper) = i_eps_sandwich(3.0, &p);
        // The stated upper bound is half the true value at this point.
        assert!((v / upper - 2.0).abs() < 1e-6);
    }

    #[test]
    fn b0_cal_examples() {
        let v = b0_cal(&np(1.0, 2.0, 1, 1.0)).unwrap();
        assert!((v - 2.0 * (2f64.sqrt() - 1.0)).abs() < 1e-10);
        assert!((v - 0.828_427_1).abs() < 1e-7);
        // Critical (1,2,2): B0 = ln(1 + 1/ε).
        let v = b0_cal(&np(1.0, 2.0, 2, 1e-6)).unwrap();
        assert!(rel(v, (1.0 + 1e6f64).ln()) < 1e-9);
        assert!(matches!(b0_cal(&np(1.0, 2.0, 1, 0.0)), Err(Error::Divergent(_))));
        // Subcritical at ε = 0: α=0.5, p=2, d=2 gives ∫ s^{-1/2}(1+s)^{-1} = π.
        let v = b0_cal(&np(0.5, 2.0, 2, 0.0)).unwrap();
        assert!(rel(v, PI) < 1e-9);
    }

    #[test]
    fn scaled_forms_agree_with_unscaled() {
        for &(alpha, p, d) in &[(1.0, 2.0, 1usize), (1.5, 3.0, 2), (0.5, 2.0, 2), (2.0, 1.5, 3)] {
            for &eps in &[1.0, 0.1, 1e-3] {
                let par = np(alpha, p, d, eps);
                let k = eps.powf(par.a() - par.b());
                let c = cal_scaled(&par).unwrap();
                assert!(rel(c, k * b0_cal(&par).unwrap()) < 1e-9);
                let s = scr_scaled(&par).unwrap();
                let direct = k * b0_scr(&par).unwrap();
                assert!(rel(s, direct) < 1e-6, "({alpha},{p},{d},{eps}) {s} vs {direct}");
            }
        }
    }

    #[test]
    fn supercritical_limit() {
        let v = cal_scaled(&np(1.0, 2.0, 1, 0.0)).unwrap();
        assert_eq!(v, 2.0);
        let par = np(1.0, 2.0, 1, 1e-6);
        let scaled = par.eps.powf(par.a() - par.b()) * b0_cal(&par).unwrap();
        assert!(rel(scaled, 2.0) < 0.01);
    }

    #[test]
    fn p_two_coincidence() {
        for &(alpha, d) in &[(0.5, 1usize), (1.0, 1), (1.5, 2), (2.0, 3)] {
            for &eps in &[1.0, 0.1, 0.01] {
                let par = np(alpha, 2.0, d, eps);
                let c = phi_norm(&par, Space::Cal).unwrap();
                let s = phi_norm(&par, Space::Scr).unwrap();
                assert!(rel(c, s) < 1e-5, "({alpha},{d},{eps}) {c} vs {s}");
            }
        }
    }

    #[test]
    fn closed_form_in_terms_of_b0() {
        let par = np(0.7, 3.0, 2, 0.05);
        let d = 2.0;
        let q = par.q();
        let expect = par.eps.powf(0.5 * (par.alpha - d / q))
            * 3f64.powf(-d / 6.0)
            * (4.0 * PI).powf(-d / (2.0 * q))
            * b0_cal(&par).unwrap().powf(1.0 / 3.0);
        assert!(rel(phi_norm(&par, Space::Cal).unwrap(), expect) < 1e-10);
        let expect = par.eps.powf(0.5 * (par.alpha - d / q))
            * (4.0 * PI).powf(-d / 2.0)
            * b0_scr(&par).unwrap().powf(1.0 / 3.0);
        assert!(rel(phi_norm(&par, Space::Scr).unwrap(), expect) < 1e-6);
    }

    #[test]
    fn delta_norm_d1() {
        let par = np(1.0, 2.0, 1, 0.0);
        // ∫_0^1 (8πt)^{-1/2} dt = 2 (8π)^{-1/2}
        let oracle = Adaptive::default()
            .integrate_power_origin(|_| (8.0 * PI).powf(-0.5), -0.5, 1.0)
            .value;
        assert!((oracle - 0.398_942_3).abs() < 1e-7);
        for space in [Space::Cal, Space::Scr, Space::Auto] {
            let v = delta_norm(&par, space).unwrap();
            assert!(rel(v * v, oracle) < 1e-7, "{space:?}: {v}");
            assert!((v - 0.631_618_8).abs() < 1e-7);
        }
        assert!(matches!(
            delta_norm(&np(0.5, 2.0, 1, 0.0), Space::Cal),
            Err(Error::DeltaNotInSpace { .. })
        ));
    }

    #[test]
    fn delta_norm_blows_up_near_threshold() {
        // (αp - d(p-1))^{1/p} ‖δ₀‖ is constant in α for the CAL norm.
        let k = |alpha: f64| {
            let par = np(alpha, 3.0, 2, 0.0);
            let gap = alpha * 3.0 - 4.0;
            delta_norm(&par, Space::Cal).unwrap() * gap.powf(1.0 / 3.0)
        };
        assert!(rel(k(4.0 / 3.0 + 1e-3), k(2.0)) < 1e-12);
    }

    #[test]
    fn subcritical_divergence_exponent() {
        let par = np(0.5, 2.0, 3, 0.0);
        let expo = -(par.threshold() - par.alpha) / 2.0;
        let v: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| phi_norm(&par.with_eps(e), Space::Cal).unwrap())
            .collect();
        let slope = (v[2] / v[0]).ln() / (1e-4f64 / 1e-2).ln();
        assert!((slope - expo).abs() < 0.02 * expo.abs(), "{slope} vs {expo}");
    }

    #[test]
    fn scr_subcritical_limit_is_finite() {
        let par = np(0.5, 3.0, 2, 0.0);
        let a = b0_scr(&par.with_eps(1e-4)).unwrap();
        let b = b0_scr(&par.with_eps(1e-6)).unwrap();
        assert!(a > 0.0 && b > a && rel(a, b) < 0.05, "{a} {b}");
    }

    #[test]
    fn critical_log_rate() {
        let par = np(1.0, 2.0, 2, 1e-6);
        let ratio = b0_cal(&par).unwrap() / 1e-6f64.ln().abs();
        assert!((0.95..=1.05).contains(&ratio));
        let scr = b0_scr(&par).unwrap() / 1e-6f64.ln().abs();
        assert!(scr.is_finite() && scr > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn unify_bound_holds(alpha in 0.2f64..3.0, d in 1usize..4, le in -4.0f64..0.0, r in 0.0f64..10.0) {
            let par = np(alpha, 2.0, d, 10f64.powf(le));
            let v = i_eps(r, &par).unwrap();
            prop_assert!(v <= i_eps_unify_bound(&par) * (1.0 + 1e-8));
        }

        #[test]
        fn sandwich_lower_side_holds(alpha in 0.2f64..1.0, d in 1usize..4, le in -3.0f64..0.0, r in 0.1f64..8.0) {
            let par = np(alpha, 2.0, d, 10f64.powf(le));
            let v = i_eps(r, &par).unwrap();
            let (lower, _) = i_eps_sandwich(r, &par);
            prop_assert!(lower <= v * (1.0 + 1e-8));
            // The exact substitution carries an extra 2^{d-α}.
            let exact = i_eps_substituted(r, &par).unwrap();
            prop_assert!(rel(v, exact) < 1e-7);
        }

        #[test]
        fn b0_cal_nonincreasing_in_eps(alpha in 0.2f64..3.0, p in 1.2f64..4.0, d in 1usize..4, le in -5.0f64..0.0) {
            let e1 = 10f64.powf(le);
            let e2 = e1 / 3.0;
            let a = b0_cal(&np(alpha, p, d, e1)).unwrap();
            let b = b0_cal(&np(alpha, p, d, e2)).unwrap();
            prop_assert!(a <= b * (1.0 + 1e-10));
        }
    }
}
