//! Monte Carlo replica sweeps, rate fits, the exact second-moment check,
//! tail fits and their persisted reports.

mod config;
mod fit;
mod report;

pub use config::{ExperimentConfig, ExperimentKind, NormRoute, Thresholds, SCHEMA_VERSION};
pub use fit::{fit_log_slope, RateFit};
pub use report::{read_replicas, read_summary, write_report, ReportPaths};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::{fit_tail_constant, psi2_estimate, s_n_draws, TailFit};
use crate::error::{Error, Result};
use crate::kernels::{phi_norm, Regime, Space};
use crate::measures::{replica_seed, MeasureModel};
use crate::norms::{h_second_moment_exact, norm_w, s_n_field, PairwiseHNorm};

/// One Monte Carlo replica: a CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRow {
    pub n: usize,
    pub replica: usize,
    pub seed: u64,
    pub norm_value: f64,
    pub wall_ms: f64,
}

/// Per-`N` aggregate of `‖μ_N^ε - μ^ε‖^p` over replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    /// Mean of the `p`-th powers.
    pub mean_pow: f64,
    /// Standard error of `mean_pow`.
    pub stderr_pow: f64,
    /// `mean_pow^{1/p}`.
    pub value: f64,
    /// Exact mean of the squared norm, when `p = 2`.
    pub exact: Option<f64>,
    pub budget: Option<f64>,
    pub within: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSummary {
    pub n: usize,
    pub phi_norm: f64,
    pub fit: TailFit,
    /// Empirical 50%, 90% and 99% quantiles of the norm.
    pub quantiles: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Details {
    RateSweep { per_n: Vec<MomentSummary>, fit: RateFit },
    IdentityCheck { per_n: Vec<MomentSummary> },
    TailSweep { per_n: Vec<TailSummary>, c_mean: f64 },
}

/// The JSON half of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub pass: bool,
    /// Human-readable reasons for a failed check.
    pub failures: Vec<String>,
    pub seeds: Vec<u64>,
    pub details: Details,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub summary: Summary,
    pub rows: Vec<ReplicaRow>,
}

/// Evaluates replica norms for one configuration.
pub struct ReplicaEngine<'a> {
    config: &'a ExperimentConfig,
    pairwise: Option<PairwiseHNorm>,
}

impl<'a> ReplicaEngine<'a> {
    pub fn new(config: &'a ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let par = &config.params;
        if par.eps == 0.0 && par.regime() != Regime::Supercritical {
            return Err(Error::NotInSpace(format!(
                "eps = 0 needs alpha > d/q (alpha = {}, d/q = {})",
                par.alpha,
                par.dim as f64 / par.q()
            )));
        }
        let pairwise = if config.uses_pairwise() {
            Some(PairwiseHNorm::new(&config.model, par.alpha, par.eps)?)
        } else {
            None
        };
        Ok(ReplicaEngine { config, pairwise })
    }

    /// `‖μ_N^ε - μ^ε‖` for the sample with the given seed.
    pub fn norm(&self, n: usize, seed: u64) -> Result<f64> {
        let sample = self.config.model.sample(n, seed)?;
        match &self.pairwise {
            Some(h) => Ok(h.norm(&sample.empirical_measure())),
            None => {
                let field = s_n_field(&sample, &self.config.model, self.config.params.eps);
                norm_w(&field, &self.config.params, &self.config.quad)
            }
        }
    }

    /// All replicas at sample size `n`, in replica order.
    pub fn replicas(&self, n: usize) -> Result<Vec<ReplicaRow>> {
        let base = self.config.base_seed;
        (0..self.config.replicas)
            .into_par_iter()
            .map(|replica| {
                let seed = replica_seed(base, n, replica);
                let start = Instant::now();
                let norm_value = self
                    .norm(n, seed)
                    .map_err(|e| Error::Replica { seed, source: Box::new(e) })?;
                Ok(ReplicaRow { n, replica, seed, norm_value, wall_ms: start.elapsed().as_secs_f64() * 1e3 })
            })
            .collect()
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

fn moment_summary(config: &ExperimentConfig, rows: &[ReplicaRow], n: usize) -> Result<MomentSummary> {
    let p = config.params.p;
    let pows: Vec<f64> = rows.iter().map(|r| r.norm_value.powf(p)).collect();
    let (mean_pow, stderr_pow) = mean_and_stderr(&pows);
    let (exact, budget, within) = if p == 2.0 {
        let exact = h_second_moment_exact(&config.model, config.params.alpha, config.params.eps, n)?;
        let phi = phi_norm(&config.params, Space::Cal)?;
        let budget = config.thresholds.quad_budget_rel * phi * phi / n as f64;
        let ok = (mean_pow - exact).abs() <= config.thresholds.sigmas * stderr_pow + budget;
        (Some(exact), Some(budget), Some(ok))
    } else {
        (None, None, None)
    };
    Ok(MomentSummary { n, mean_pow, stderr_pow, value: mean_pow.powf(1.0 / p), exact, budget, within })
}

fn require(kind: ExperimentKind, config: &ExperimentConfig) -> Result<()> {
    if config.experiment != kind {
        return Err(Error::InvalidParameter(format!(
            "config is for {:?}, not {kind:?}",
            config.experiment
        )));
    }
    Ok(())
}

/// Averages `‖μ_N^ε - μ^ε‖^p` over replicas for each `N`, takes the `1/p`
/// root and fits the log-log slope.
pub fn rate_sweep(config: &ExperimentConfig) -> Result<Outcome> {
    require(ExperimentKind::RateSweep, config)?;
    let engine = ReplicaEngine::new(config)?;
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    for &n in &config.n_grid {
        let r = engine.replicas(n)?;
        per_n.push(moment_summary(config, &r, n)?);
        rows.extend(r);
    }
    if per_n.iter().all(|s| s.value == 0.0) {
        return Err(Error::DegenerateZero);
    }
    let pts: Vec<(f64, f64)> = per_n.iter().map(|s| (s.n as f64, s.value)).collect();
    let fit = fit_log_slope(&pts)?;
    let th = &config.thresholds;
    let mut failures = Vec::new();
    if (fit.slope - th.slope_target).abs() > th.slope_tol {
        failures.push(format!("slope {:.4} outside {} ± {}", fit.slope, th.slope_target, th.slope_tol));
    }
    if fit.r_squared < th.min_r_squared {
        failures.push(format!("r² {:.4} below {}", fit.r_squared, th.min_r_squared));
    }
    for s in &per_n {
        if s.within == Some(false) {
            failures.push(format!(
                "N = {}: mean square {:.6e} vs exact {:.6e} (stderr {:.2e})",
                s.n,
                s.mean_pow,
                s.exact.unwrap_or(f64::NAN),
                s.stderr_pow
            ));
        }
    }
    Ok(finish(config, rows, failures, Details::RateSweep { per_n, fit }))
}

/// Compares the Monte Carlo mean of `‖μ_N^ε - μ^ε‖²_{H^{-α}}` with its exact
/// value at each `N`.
pub fn identity_check(config: &ExperimentConfig) -> Result<Outcome> {
    require(ExperimentKind::IdentityCheck, config)?;
    let engine = ReplicaEngine::new(config)?;
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    let mut failures = Vec::new();
    for &n in &config.n_grid {
        let r = engine.replicas(n)?;
        let s = moment_summary(config, &r, n)?;
        if s.within != Some(true) {
            failures.push(format!(
                "N = {n}: |{:.6e} - {:.6e}| > {} x {:.2e} + {:.1e}",
                s.mean_pow,
                s.exact.unwrap_or(f64::NAN),
                config.thresholds.sigmas,
                s.stderr_pow,
                s.budget.unwrap_or(0.0)
            ));
        }
        per_n.push(s);
        rows.extend(r);
    }
    Ok(finish(config, rows, failures, Details::IdentityCheck { per_n }))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Empirical tail of the norm at each `N` against the Gaussian tail curve,
/// with the curve's constant fitted per `N`.
pub fn tail_sweep(config: &ExperimentConfig) -> Result<Outcome> {
    require(ExperimentKind::TailSweep, config)?;
    let engine = ReplicaEngine::new(config)?;
    let par = &config.params;
    let phi = phi_norm(par, Space::Auto.resolve(par.alpha))?;
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    let mut failures = Vec::new();
    for &n in &config.n_grid {
        let r = engine.replicas(n)?;
        let values: Vec<f64> = r.iter().map(|x| x.norm_value).collect();
        let fit = fit_tail_constant(&values, n, phi, par.p, par.dim)?;
        if !fit.dominated {
            failures.push(format!("N = {n}: fitted curve does not dominate the empirical tail"));
        }
        let mut sorted = values;
        sorted.sort_by(f64::total_cmp);
        let quantiles = [quantile(&sorted, 0.5), quantile(&sorted, 0.9), quantile(&sorted, 0.99)];
        per_n.push(TailSummary { n, phi_norm: phi, fit, quantiles });
        rows.extend(r);
    }
    let c_mean = per_n.iter().map(|s| s.fit.c_envelope).sum::<f64>() / per_n.len() as f64;
    for s in &per_n {
        let dev = s.fit.c_envelope / c_mean - 1.0;
        if dev.abs() > config.thresholds.tail_c_tol {
            failures.push(format!(
                "N = {}: fitted C {:.4} deviates {:+.1}% from the mean {:.4}",
                s.n,
                s.fit.c_envelope,
                100.0 * dev,
                c_mean
            ));
        }
    }
    Ok(finish(config, rows, failures, Details::TailSweep { per_n, c_mean }))
}

/// Dispatches on `config.experiment`.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    match config.experiment {
        ExperimentKind::RateSweep => rate_sweep(config),
        ExperimentKind::IdentityCheck => identity_check(config),
        ExperimentKind::TailSweep => tail_sweep(config),
    }
}

fn finish(config: &ExperimentConfig, rows: Vec<ReplicaRow>, failures: Vec<String>, details: Details) -> Outcome {
    Outcome {
        summary: Summary {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            pass: failures.is_empty(),
            failures,
            seeds: rows.iter().map(|r| r.seed).collect(),
            details,
        },
        rows,
    }
}

/// `ψ₂` proxy of `S_N(x, t)` at each `N` and the fitted decay exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psi2Scaling {
    pub values: Vec<(usize, f64)>,
    pub fit: RateFit,
}

pub fn psi2_scaling(
    model: &MeasureModel,
    x: &[f64],
    t: f64,
    n_grid: &[usize],
    draws: usize,
    seed: u64,
) -> Result<Psi2Scaling> {
    let mut values = Vec::new();
    for &n in n_grid {
        let z = s_n_draws(model, x, t, n, draws, seed)?;
        values.push((n, psi2_estimate(&z)?.value));
    }
    let pts: Vec<(f64, f64)> = values.iter().map(|&(n, v)| (n as f64, v)).collect();
    Ok(Psi2Scaling { fit: fit_log_slope(&pts)?, values })
}
