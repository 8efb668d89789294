//! Effective test configuration: defaults, then the JSON config file, then
//! command-line flags, in increasing precedence. The resolved settings are
//! echoed into every summary for provenance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use seqtest::regress::{
    RegressorKind, DEFAULT_KNN_K, DEFAULT_MLP_ADAM_LR, DEFAULT_MLP_HIDDEN, DEFAULT_RIDGE_L2,
    DEFAULT_RIDGE_LR,
};
use seqtest::TestConfig;

use crate::HarnessError;

/// Flat JSON config file; every field is optional and CLI flags override.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub t0: Option<u64>,
    pub eps_scale: Option<f64>,
    pub gamma: Option<f64>,
    pub var_floor: Option<f64>,
    pub var_ceiling: Option<f64>,
    pub seed: Option<u64>,
    pub regressor: Option<String>,
    #[serde(rename = "knn.k")]
    pub knn_k: Option<usize>,
    #[serde(rename = "ridge.lr")]
    pub ridge_lr: Option<f64>,
    #[serde(rename = "ridge.l2")]
    pub ridge_l2: Option<f64>,
    #[serde(rename = "mlp.hidden")]
    pub mlp_hidden: Option<Vec<usize>>,
    #[serde(rename = "mlp.adam_lr")]
    pub mlp_adam_lr: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }
}

/// Command-line overrides, passed down from the argument parser.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub t0: Option<u64>,
    pub eps_scale: Option<f64>,
    pub gamma: Option<f64>,
    pub var_floor: Option<f64>,
    pub seed: Option<u64>,
    pub regressor: Option<String>,
}

/// Regressor family selection. `Oracle` plugs in the true conditional mean
/// and variance of a synthetic generator and is therefore only available to
/// `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "regressor")]
pub enum RegressorSel {
    Knn { k: usize },
    Ridge { lr: f64, l2: f64 },
    Mlp { hidden: Vec<usize>, adam_lr: f64 },
    Oracle,
    Constant,
}

impl RegressorSel {
    /// The buildable family for learned regressors; `None` for `Oracle`,
    /// which is wired separately from the generator's truth.
    pub fn family(&self) -> Option<RegressorKind<f64>> {
        match self {
            RegressorSel::Knn { k } => Some(RegressorKind::Knn { k: *k }),
            RegressorSel::Ridge { lr, l2 } => Some(RegressorKind::Ridge { lr: *lr, l2: *l2 }),
            RegressorSel::Mlp { hidden, adam_lr } => {
                Some(RegressorKind::Mlp { hidden: hidden.clone(), adam_lr: *adam_lr })
            }
            RegressorSel::Constant => Some(RegressorKind::Constant(None)),
            RegressorSel::Oracle => None,
        }
    }
}

/// Fully resolved settings used by a run, echoed into summaries.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    #[serde(flatten)]
    pub cfg: TestConfig,
    #[serde(flatten)]
    pub regressor: RegressorSel,
}

/// Resolves defaults, file, and flags into the effective settings.
pub fn resolve(file: &FileConfig, flags: &CliOverrides) -> Result<Settings, HarnessError> {
    let defaults = TestConfig::default();
    let cfg = TestConfig {
        alpha: flags.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        rho: flags.rho.or(file.rho).unwrap_or(defaults.rho),
        t0: flags.t0.or(file.t0).unwrap_or(defaults.t0),
        eps_scale: flags.eps_scale.or(file.eps_scale).unwrap_or(defaults.eps_scale),
        gamma: flags.gamma.or(file.gamma).unwrap_or(defaults.gamma),
        var_floor: flags.var_floor.or(file.var_floor).unwrap_or(defaults.var_floor),
        var_ceiling: file.var_ceiling.unwrap_or(defaults.var_ceiling),
        seed: flags.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    let name = flags
        .regressor
        .clone()
        .or_else(|| file.regressor.clone())
        .unwrap_or_else(|| "knn".to_string());
    let regressor = match name.as_str() {
        "knn" => RegressorSel::Knn { k: file.knn_k.unwrap_or(DEFAULT_KNN_K) },
        "ridge" => RegressorSel::Ridge {
            lr: file.ridge_lr.unwrap_or(DEFAULT_RIDGE_LR),
            l2: file.ridge_l2.unwrap_or(DEFAULT_RIDGE_L2),
        },
        "mlp" => RegressorSel::Mlp {
            hidden: file.mlp_hidden.clone().unwrap_or_else(|| DEFAULT_MLP_HIDDEN.to_vec()),
            adam_lr: file.mlp_adam_lr.unwrap_or(DEFAULT_MLP_ADAM_LR),
        },
        "oracle" => RegressorSel::Oracle,
        "constant" => RegressorSel::Constant,
        other => {
            return Err(HarnessError::Config(format!(
                "unknown regressor {other:?}; expected knn|ridge|mlp|oracle|constant"
            )))
        }
    };
    let settings = Settings { cfg, regressor };
    // surface hard range violations now, with warnings to stderr
    match settings.cfg.validate() {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
        }
        Err(e) => return Err(HarnessError::Config(e.to_string())),
    }
    Ok(settings)
}
