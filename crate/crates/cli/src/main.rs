mod jobs;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use sobemp::concentration::sigma_integral_check;
use sobemp::experiments::{
    run, write_report, Details, ExperimentConfig, ExperimentKind, NormRoute, Outcome, SCHEMA_VERSION,
};
use sobemp::kernels::{b0_cal, b0_scr, cal_scaled, phi_norm, NormParams, Regime, Space};
use sobemp::norms::{norm_in, s_n_field, PairwiseHNorm};

use jobs::{B0Job, GaussianNormJob, NormJob, SigmaJob};

#[derive(Parser)]
#[command(name = "sobemp", version, about = "Heat-kernel negative Sobolev norms of empirical measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file; built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value by dotted key, e.g. `params.alpha=1.25`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value = "sobemp-out")]
    output_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "SOBEMP_THREADS")]
    threads: Option<usize>,
    /// Validate the config and print the resolved plan without computing.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Norm of the smoothed fluctuation of one sample.
    Norm(Common),
    /// Norms of the heat kernel over a grid of regularizations.
    GaussianNorm(Common),
    /// The dimensionless integrals behind the heat kernel norms.
    B0(Common),
    /// Log-log rate of the mean norm against the sample size.
    RateSweep(Common),
    /// Monte Carlo check of the exact second-moment identity.
    IdentityCheck(Common),
    /// Empirical tails against the Gaussian tail curve.
    TailSweep(Common),
    /// Weighted integral of the subgaussian bound against the heat kernel norm.
    SigmaCheck(Common),
}

enum Failure {
    /// Exit 2: bad flags, config or parameters.
    Usage(String),
    /// Exit 1: a check failed or the computation broke down.
    Check(String),
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn check(e: impl std::fmt::Display) -> Failure {
    Failure::Check(e.to_string())
}

/// Loads `T` from the config file (or `default`), applies `--set` overrides
/// and `--seed`. Unknown keys are errors.
fn load<T: Serialize + DeserializeOwned>(common: &Common, default: T, seed_key: &str) -> CliResult<T> {
    let origin = common.config.as_ref().map_or("<defaults>".to_string(), |p| p.display().to_string());
    let mut doc: Value = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{origin}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{origin}: {e}")))?
        }
        None => serde_json::to_value(default).map_err(usage)?,
    };
    match doc.get("schema_version").and_then(Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        other => {
            return Err(usage(format!(
                "{origin}: schema_version {other:?} is not supported (expected {SCHEMA_VERSION})"
            )))
        }
    }
    let mut pairs: Vec<(String, String)> = Vec::new();
    for raw in &common.overrides {
        let (k, v) = raw
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{raw}`")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = common.seed {
        pairs.push((seed_key.to_string(), seed.to_string()));
    }
    for (key, value) in &pairs {
        let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.clone()));
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = match slot {
                Value::Object(map) => map.get_mut(part),
                Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
                _ => None,
            }
            .ok_or_else(|| usage(format!("{origin}: unknown config key `{key}`")))?;
        }
        *slot = parsed;
    }
    serde_json::from_value(doc).map_err(|e| usage(format!("{origin}: {e}")))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| check(format!("{}: {e}", dir.display())))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| check(format!("{}: {e}", path.display())))?;
    w.write_record(header).map_err(check)?;
    for r in rows {
        w.write_record(r).map_err(check)?;
    }
    w.flush().map_err(|e| check(format!("{}: {e}", path.display())))
}

fn print_plan<T: Serialize>(what: &str, job: &T, lines: &[String]) -> CliResult<()> {
    println!("plan: {what}");
    for l in lines {
        println!("  {l}");
    }
    println!("{}", serde_json::to_string_pretty(job).map_err(usage)?);
    Ok(())
}

fn cmd_norm(common: &Common) -> CliResult<()> {
    let job: NormJob = load(common, NormJob::default(), "seed")?;
    if job.model.dim() != job.params.dim {
        return Err(usage("model dimension does not match params.dim"));
    }
    let pairwise = match job.route {
        NormRoute::Pairwise => true,
        NormRoute::Grid => false,
        NormRoute::Auto => job.params.p == 2.0,
    };
    if pairwise && job.params.p != 2.0 {
        return Err(usage("route `pairwise` needs params.p = 2"));
    }
    if !pairwise {
        job.quad.validate(job.params.dim).map_err(usage)?;
    }
    if common.dry_run {
        let route = if pairwise { "pairwise" } else { "grid" };
        return print_plan("norm", &job, &[format!("one sample of size {} via the {route} route", job.n)]);
    }
    let sample = job.model.sample(job.n, job.seed).map_err(usage)?;
    let value = if pairwise {
        PairwiseHNorm::new(&job.model, job.params.alpha, job.params.eps)
            .map_err(usage)?
            .norm(&sample.empirical_measure())
    } else {
        let field = s_n_field(&sample, &job.model, job.params.eps);
        norm_in(&field, &job.params, &job.quad, job.space).map_err(|e| match e {
            sobemp::Error::Divergent(_) | sobemp::Error::InvalidParameter(_) => usage(e),
            other => check(other),
        })?
    };
    ensure_dir(&common.output_dir)?;
    let space = format!("{:?}", job.space.resolve(job.params.alpha)).to_lowercase();
    write_csv(
        &common.output_dir.join("norm.csv"),
        &["n", "seed", "space", "norm_value"],
        &[vec![job.n.to_string(), job.seed.to_string(), space, format!("{value:e}")]],
    )?;
    println!("norm = {value:.10e}");
    Ok(())
}

fn cmd_gaussian_norm(common: &Common) -> CliResult<()> {
    let job: GaussianNormJob = load(common, GaussianNormJob::default(), "seed")?;
    let params: Vec<NormParams> = job
        .eps_grid
        .iter()
        .map(|&e| NormParams::new(job.alpha, job.p, job.dim, e))
        .collect::<sobemp::Result<_>>()
        .map_err(usage)?;
    if common.dry_run {
        return print_plan("gaussian-norm", &job, &[format!("{} values of eps", params.len())]);
    }
    let mut rows = Vec::new();
    for par in &params {
        let regime = par.regime();
        let b0 = b0_cal(par).ok();
        let scaled = cal_scaled(par).map_err(check)?;
        let cal = phi_norm(par, Space::Cal).map_err(check)?;
        let scr = phi_norm(par, Space::Scr).map_err(check)?;
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        rows.push(vec![
            format!("{:e}", par.eps),
            format!("{regime:?}").to_lowercase(),
            fmt(b0),
            format!("{scaled:e}"),
            format!("{cal:e}"),
            format!("{scr:e}"),
        ]);
        println!("eps = {:e}: eps^((α-d/q)p/2)·B0 = {scaled:.8}, ‖Φ_ε‖ = {cal:.8e} / {scr:.8e}", par.eps);
    }
    if params.first().is_some_and(|p| p.regime() == Regime::Supercritical) {
        let a = job.alpha * job.p - job.dim as f64 * (job.p - 1.0);
        println!("eps -> 0 limit of eps^((α-d/q)p/2)·B0: {:.8}", 2.0 / a);
    }
    ensure_dir(&common.output_dir)?;
    write_csv(
        &common.output_dir.join("gaussian_norm.csv"),
        &["eps", "regime", "b0", "scaled_b0", "phi_norm_cal", "phi_norm_scr"],
        &rows,
    )
}

fn cmd_b0(common: &Common) -> CliResult<()> {
    let job: B0Job = load(common, B0Job::default(), "seed")?;
    let par = NormParams::new(job.alpha, job.p, job.dim, job.eps).map_err(usage)?;
    if common.dry_run {
        return print_plan("b0", &job, &[format!("regime {:?}", par.regime())]);
    }
    let cal = b0_cal(&par).map_err(check)?;
    let scr = b0_scr(&par).map_err(check)?;
    println!("B0 = {cal:.12e}\nSB0 = {scr:.12e}");
    ensure_dir(&common.output_dir)?;
    write_csv(
        &common.output_dir.join("b0.csv"),
        &["alpha", "p", "dim", "eps", "b0_cal", "b0_scr"],
        &[vec![
            job.alpha.to_string(),
            job.p.to_string(),
            job.dim.to_string(),
            format!("{:e}", job.eps),
            format!("{cal:e}"),
            format!("{scr:e}"),
        ]],
    )
}

fn cmd_experiment(common: &Common, kind: ExperimentKind) -> CliResult<()> {
    let cfg: ExperimentConfig = load(common, ExperimentConfig::default_for(kind), "base_seed")?;
    if cfg.experiment != kind {
        return Err(usage(format!("config describes {:?}, not {kind:?}", cfg.experiment)));
    }
    cfg.validate().map_err(usage)?;
    if common.dry_run {
        let total: usize = cfg.n_grid.len() * cfg.replicas;
        let route = if cfg.uses_pairwise() { "pairwise" } else { "grid" };
        return print_plan(
            &format!("{kind:?}"),
            &cfg,
            &[
                format!("N grid {:?}, {} replicas each ({total} norms) via the {route} route", cfg.n_grid, cfg.replicas),
                format!("outputs under {}", common.output_dir.display()),
            ],
        );
    }
    let outcome = run(&cfg).map_err(|e| match e {
        sobemp::Error::NotInSpace(_) | sobemp::Error::InvalidParameter(_) | sobemp::Error::Schema(_) => usage(e),
        other => check(other),
    })?;
    let paths = write_report(&outcome, &common.output_dir).map_err(check)?;
    report_outcome(&outcome, &common.output_dir)?;
    println!("wrote {} and {}", paths.replicas.display(), paths.summary.display());
    if outcome.summary.pass {
        println!("PASS");
        Ok(())
    } else {
        Err(check(format!("FAIL: {}", outcome.summary.failures.join("; "))))
    }
}

fn report_outcome(outcome: &Outcome, dir: &Path) -> CliResult<()> {
    match &outcome.summary.details {
        Details::RateSweep { per_n, fit } => {
            for s in per_n {
                println!("N = {:>6}: mean norm^p = {:.6e} ± {:.2e}, value = {:.6e}", s.n, s.mean_pow, s.stderr_pow, s.value);
            }
            println!("slope = {:.4} ± {:.4}, r² = {:.5}", fit.slope, fit.stderr, fit.r_squared);
        }
        Details::IdentityCheck { per_n } => {
            for s in per_n {
                println!(
                    "N = {:>6}: MC mean = {:.6e} ± {:.2e}, exact = {:.6e}",
                    s.n,
                    s.mean_pow,
                    s.stderr_pow,
                    s.exact.unwrap_or(f64::NAN)
                );
            }
        }
        Details::TailSweep { per_n, c_mean } => {
            let mut rows = Vec::new();
            for s in per_n {
                println!("N = {:>6}: fitted C = {:.5}, dominated = {}", s.n, s.fit.c_envelope, s.fit.dominated);
                for pt in &s.fit.points {
                    rows.push(vec![
                        s.n.to_string(),
                        format!("{:e}", pt.lambda),
                        format!("{:e}", pt.empirical_p),
                        format!("{:e}", pt.bound_p),
                        format!("{:e}", s.fit.c_envelope),
                    ]);
                }
            }
            println!("mean fitted C = {c_mean:.5}");
            write_csv(&dir.join("tail.csv"), &["n", "lambda", "empirical_p", "bound_p", "fitted_c"], &rows)?;
        }
    }
    Ok(())
}

fn cmd_sigma(common: &Common) -> CliResult<()> {
    let job: SigmaJob = load(common, SigmaJob::default(), "seed")?;
    let d = job.model.dim();
    job.quad.validate(d).map_err(usage)?;
    let mut grid = Vec::new();
    for &alpha in &job.alphas {
        for &p in &job.ps {
            for &eps in &job.eps_grid {
                grid.push(NormParams::new(alpha, p, d, eps).map_err(usage)?);
            }
        }
    }
    if common.dry_run {
        return print_plan("sigma-check", &job, &[format!("{} grid points", grid.len())]);
    }
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for par in &grid {
        let (lhs, rhs, ratio) = match sigma_integral_check(&job.model, par, &job.quad) {
            Ok(c) => (c.lhs, c.rhs, c.ratio),
            Err(sobemp::Error::Divergent(_)) => (f64::INFINITY, f64::INFINITY, f64::NAN),
            Err(e) => return Err(check(e)),
        };
        if !(ratio.is_finite() && ratio > 0.0) && !(par.eps == 0.0 && par.regime() != Regime::Supercritical) {
            bad.push(format!("α={} p={} ε={}", par.alpha, par.p, par.eps));
        }
        println!("α = {}, p = {}, ε = {:e}: lhs = {lhs:.6e}, rhs = {rhs:.6e}, ratio = {ratio:.5}", par.alpha, par.p, par.eps);
        rows.push(vec![
            par.alpha.to_string(),
            par.p.to_string(),
            format!("{:e}", par.eps),
            format!("{lhs:e}"),
            format!("{rhs:e}"),
            format!("{ratio:e}"),
        ]);
    }
    ensure_dir(&common.output_dir)?;
    write_csv(&common.output_dir.join("sigma.csv"), &["alpha", "p", "eps", "lhs", "rhs", "ratio"], &rows)?;
    if bad.is_empty() {
        println!("PASS");
        Ok(())
    } else {
        Err(check(format!("FAIL: unbounded ratio at {}", bad.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Norm(c)
        | Command::GaussianNorm(c)
        | Command::B0(c)
        | Command::RateSweep(c)
        | Command::IdentityCheck(c)
        | Command::TailSweep(c)
        | Command::SigmaCheck(c) => c.clone(),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Norm(c) => cmd_norm(c),
        Command::GaussianNorm(c) => cmd_gaussian_norm(c),
        Command::B0(c) => cmd_b0(c),
        Command::RateSweep(c) => cmd_experiment(c, ExperimentKind::RateSweep),
        Command::IdentityCheck(c) => cmd_experiment(c, ExperimentKind::IdentityCheck),
        Command::TailSweep(c) => cmd_experiment(c, ExperimentKind::TailSweep),
        Command::SigmaCheck(c) => cmd_sigma(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
