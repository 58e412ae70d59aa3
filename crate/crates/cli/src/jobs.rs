//! Job descriptions for the subcommands that are not Monte Carlo sweeps.

use serde::{Deserialize, Serialize};

use sobemp::experiments::{NormRoute, SCHEMA_VERSION};
use sobemp::kernels::{NormParams, Space};
use sobemp::measures::MeasureModel;
use sobemp::norms::QuadratureSpec;

/// `‖μ_N^ε - μ^ε‖` for one sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormJob {
    pub schema_version: u32,
    pub model: MeasureModel,
    pub params: NormParams,
    #[serde(default)]
    pub quad: QuadratureSpec,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "auto_space")]
    pub space: Space,
    #[serde(default)]
    pub route: NormRoute,
}

fn auto_space() -> Space {
    Space::Auto
}

impl Default for NormJob {
    fn default() -> Self {
        NormJob {
            schema_version: SCHEMA_VERSION,
            model: MeasureModel::gaussian(vec![0.0], 1.0).expect("valid model"),
            params: NormParams::new(1.5, 2.0, 1, 0.0).expect("valid params"),
            quad: QuadratureSpec::default(),
            n: 256,
            seed: 0,
            space: Space::Auto,
            route: NormRoute::Auto,
        }
    }
}

/// `‖Φ_ε‖` and the dimensionless integrals over a grid of `ε`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianNormJob {
    pub schema_version: u32,
    pub alpha: f64,
    pub p: f64,
    pub dim: usize,
    pub eps_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GaussianNormJob {
    fn default() -> Self {
        GaussianNormJob {
            schema_version: SCHEMA_VERSION,
            alpha: 1.0,
            p: 2.0,
            dim: 1,
            eps_grid: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
            seed: 0,
        }
    }
}

/// Both dimensionless integrals at a single `ε`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct B0Job {
    pub schema_version: u32,
    pub alpha: f64,
    pub p: f64,
    pub dim: usize,
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for B0Job {
    fn default() -> Self {
        B0Job { schema_version: SCHEMA_VERSION, alpha: 1.0, p: 2.0, dim: 1, eps: 1e-3, seed: 0 }
    }
}

/// The `σ`-integral inequality over a grid of `(α, p, ε)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaJob {
    pub schema_version: u32,
    pub model: MeasureModel,
    pub alphas: Vec<f64>,
    pub ps: Vec<f64>,
    pub eps_grid: Vec<f64>,
    #[serde(default)]
    pub quad: QuadratureSpec,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SigmaJob {
    fn default() -> Self {
        SigmaJob {
            schema_version: SCHEMA_VERSION,
            model: MeasureModel::gaussian(vec![0.0], 1.0).expect("valid model"),
            alphas: vec![0.75, 1.5],
            ps: vec![2.0, 3.0],
            eps_grid: vec![0.1, 0.01, 0.001],
            quad: QuadratureSpec::default(),
            seed: 0,
        }
    }
}
