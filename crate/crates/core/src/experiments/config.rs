use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::kernels::NormParams;
use crate::measures::MeasureModel;
use crate::norms::QuadratureSpec;

/// Current version of the experiment config and summary formats.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RateSweep,
    IdentityCheck,
    TailSweep,
}

/// How each replica norm is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormRoute {
    /// Pair sums when `p = 2`, grid quadrature otherwise.
    #[default]
    Auto,
    Pairwise,
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub slope_target: f64,
    pub slope_tol: f64,
    pub min_r_squared: f64,
    /// Allowed distance from the exact mean, in standard errors.
    pub sigmas: f64,
    /// Quadrature budget relative to `‖Φ_ε‖² / N`.
    pub quad_budget_rel: f64,
    /// Allowed relative spread of the fitted tail constant around its mean.
    pub tail_c_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            slope_target: -0.5,
            slope_tol: 0.05,
            min_r_squared: 0.98,
            sigmas: 3.0,
            quad_budget_rel: 1e-6,
            tail_c_tol: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub model: MeasureModel,
    pub params: NormParams,
    #[serde(default)]
    pub quad: QuadratureSpec,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub norm_route: NormRoute,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Create a missing output directory instead of failing.
    #[serde(default = "yes")]
    pub create_output_dir: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    /// Standard configuration for `kind` on the standard normal in one
    /// dimension.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let gauss = MeasureModel::gaussian(vec![0.0], 1.0).expect("valid model");
        let (params, n_grid, replicas) = match kind {
            ExperimentKind::RateSweep => (
                NormParams::new(1.5, 2.0, 1, 0.0),
                (5..=11).map(|k| 1usize << k).collect(),
                200,
            ),
            ExperimentKind::IdentityCheck => (NormParams::new(1.0, 2.0, 1, 0.0), vec![50], 2000),
            ExperimentKind::TailSweep => (NormParams::new(1.0, 2.0, 1, 0.0), vec![32, 128, 512], 2000),
        };
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment: kind,
            model: gauss,
            params: params.expect("valid params"),
            quad: QuadratureSpec::default(),
            n_grid,
            replicas,
            base_seed: 20240601,
            norm_route: NormRoute::Auto,
            thresholds: Thresholds::default(),
            create_output_dir: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        check_version(&v)?;
        let cfg: ExperimentConfig = serde_json::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.model.dim() != self.params.dim {
            return Err(Error::InvalidParameter(format!(
                "model dimension {} does not match params.dim {}",
                self.model.dim(),
                self.params.dim
            )));
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::InvalidParameter("n_grid must be non-empty with positive entries".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("n_grid must be strictly increasing".into()));
        }
        let need = if self.experiment == ExperimentKind::TailSweep { 500 } else { 30 };
        if self.replicas < need {
            return Err(Error::InvalidParameter(format!(
                "replicas = {} is below the minimum {need} for this experiment",
                self.replicas
            )));
        }
        let p2 = self.params.p == 2.0;
        if self.norm_route == NormRoute::Pairwise && !p2 {
            return Err(Error::InvalidParameter("the pairwise route needs p = 2".into()));
        }
        if self.experiment == ExperimentKind::IdentityCheck && !p2 {
            return Err(Error::InvalidParameter("identity_check needs p = 2".into()));
        }
        if self.uses_pairwise() {
            Ok(())
        } else {
            self.quad.validate(self.params.dim)
        }
    }

    pub fn uses_pairwise(&self) -> bool {
        match self.norm_route {
            NormRoute::Pairwise => true,
            NormRoute::Grid => false,
            NormRoute::Auto => self.params.p == 2.0,
        }
    }

    /// Replaces the value at a dotted path such as `params.alpha`. The path
    /// must already exist in the serialized config; `value` is parsed as
    /// JSON and otherwise taken as a string.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        self.with_overrides(&[(key.to_string(), value.to_string())])
    }

    /// Applies every override before validating the result once.
    pub fn with_overrides(&self, pairs: &[(String, String)]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for (key, value) in pairs {
            let parsed: Value =
                serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.clone()));
            let mut slot = &mut doc;
            for part in key.split('.') {
                slot = match slot {
                    Value::Object(map) => map.get_mut(part),
                    Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
                    _ => None,
                }
                .ok_or_else(|| Error::Schema(format!("unknown config key `{key}`")))?;
            }
            *slot = parsed;
        }
        let cfg: ExperimentConfig = serde_json::from_value(doc)
            .map_err(|e| Error::Schema(format!("invalid override: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn check_version(v: &Value) -> Result<()> {
    match v.get("schema_version").and_then(Value::as_u64) {
        Some(x) if x == u64::from(SCHEMA_VERSION) => Ok(()),
        Some(x) => Err(Error::Schema(format!("schema_version {x} is not supported (expected {SCHEMA_VERSION})"))),
        None => Err(Error::Schema("missing schema_version".into())),
    }
}

pub(crate) fn check_summary_version(v: &Value) -> Result<()> {
    check_version(v)
}
