//! TOML run configuration.
//!
//! Every key is optional. Values left out fall back to library defaults, and
//! command-line flags are applied on top by the caller. Unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//! workers = 4
//!
//! [dgp]
//! kind = "hinge"
//! outcome = "binary"
//!
//! [estimator.regressor]
//! kind = "linear"
//! ridge = 0.1
//!
//! [bench]
//! horizons = [1, 5]
//! n_seeds = 3
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::bench::{BenchPlan, GroundTruthMode};
use crate::dgp::{DgpConfig, DgpKind, OutcomeType};
use crate::estimators::{EstimatorConfig, EstimatorKind};
use crate::panel::{OutcomeKind, Schema};
use crate::regressor::{RegressorKind, RegressorSpec};
use crate::targeting::{SolveMethod, TargetingConfig, TiltMode, DEFAULT_ETA, DEFAULT_ROUNDS};
use crate::weights::{Importance, MatchConfig, StepRule};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub svg: Option<bool>,
    pub dgp: Option<DgpSection>,
    pub panel: Option<PanelSection>,
    pub estimator: Option<EstimatorSection>,
    pub bench: Option<BenchSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSection {
    pub kind: Option<DgpKind>,
    pub outcome: Option<OutcomeType>,
    pub n_units: Option<usize>,
    pub periods: Option<usize>,
    pub p: Option<usize>,
    pub covariate_range: Option<(f64, f64)>,
    pub noise_sd: Option<f64>,
    /// Pre-treatment periods of the simulated panel.
    pub t0: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSection {
    pub path: Option<PathBuf>,
    pub schema: Option<Schema>,
    /// Unit id of the treated unit.
    pub treated: Option<String>,
    /// Time label of the first treated period, or a count of pre-treatment periods.
    pub t0: Option<String>,
    pub outcome: Option<OutcomeType>,
    pub bounds: Option<(f64, f64)>,
}

impl PanelSection {
    pub fn outcome_kind(&self) -> OutcomeKind {
        match self.outcome {
            Some(OutcomeType::Binary) => OutcomeKind::Binary,
            _ => OutcomeKind::Continuous { bounds: self.bounds },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub kind: Option<String>,
    pub horizons: Option<Vec<usize>>,
    pub cross_fit_folds: Option<usize>,
    pub matching: Option<MatchingSection>,
    pub regressor: Option<RegressorSection>,
    pub targeting: Option<TargetingSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingSection {
    /// Diagonal of `V`; identity when absent.
    pub importance: Option<Vec<f64>>,
    pub ridge_lambda: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    /// `lipschitz`, `line_search` or `fixed`.
    pub step: Option<String>,
    pub step_size: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorSection {
    /// `mlp` or `linear`.
    pub kind: Option<String>,
    pub hidden_units: Option<usize>,
    pub learning_rate: Option<f64>,
    pub steps: Option<usize>,
    pub ridge: Option<f64>,
    pub seed: Option<u64>,
    pub standardize_inputs: Option<bool>,
    pub standardize_targets: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetingSection {
    pub mode: Option<TiltMode>,
    /// `newton`, `bisection` or `gradient_descent`.
    pub method: Option<String>,
    pub eta: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub eps_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub kinds: Option<Vec<DgpKind>>,
    pub outcomes: Option<Vec<OutcomeType>>,
    pub estimators: Option<Vec<String>>,
    pub horizons: Option<Vec<usize>>,
    pub n_seeds: Option<usize>,
    pub ground_truth: Option<GroundTruthMode>,
    pub workers: Option<usize>,
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn dgp_config(&self) -> DgpConfig {
        let s = self.dgp.clone().unwrap_or_default();
        let d = DgpConfig::default();
        DgpConfig {
            kind: s.kind.unwrap_or(d.kind),
            n_units: s.n_units.unwrap_or(d.n_units),
            periods: s.periods.or(d.periods),
            p: s.p.unwrap_or(d.p),
            covariate_range: s.covariate_range.unwrap_or(d.covariate_range),
            outcome: s.outcome.unwrap_or(d.outcome),
            seed: self.seed(),
            noise_sd: s.noise_sd.or(d.noise_sd),
        }
    }

    /// Estimator kind named in `[estimator]`, if any.
    pub fn estimator_kind(&self) -> Result<Option<EstimatorKind>> {
        match self.estimator.as_ref().and_then(|e| e.kind.as_deref()) {
            Some(k) => k.parse().map(Some).map_err(|e: crate::estimators::EstimatorError| invalid(e.to_string())),
            None => Ok(None),
        }
    }

    /// Settings for `kind` with the `[estimator]` overrides applied.
    pub fn estimator_config(&self, kind: EstimatorKind) -> Result<EstimatorConfig> {
        let mut cfg = EstimatorConfig::new(kind);
        cfg.regressor.seed = self.seed();
        let Some(sec) = &self.estimator else { return Ok(cfg) };
        cfg.horizons = sec.horizons.clone();
        cfg.cross_fit_folds = sec.cross_fit_folds;
        if let Some(m) = &sec.matching {
            cfg.matching = matching(m)?;
        }
        if let Some(r) = &sec.regressor {
            cfg.regressor = regressor(r, self.seed())?;
        }
        if let Some(t) = &sec.targeting {
            cfg.targeting = targeting(t)?;
        }
        Ok(cfg)
    }

    pub fn bench_plan(&self) -> Result<BenchPlan> {
        let mut plan = BenchPlan::default();
        let b = self.bench.clone().unwrap_or_default();
        let base = self.dgp_config();
        let kinds = b.kinds.unwrap_or_else(|| crate::dgp::DgpKind::ALL.to_vec());
        let outcomes = b.outcomes.unwrap_or_else(|| vec![OutcomeType::Continuous, OutcomeType::Binary]);
        plan.dgps = outcomes
            .iter()
            .flat_map(|&o| {
                let base = base.clone();
                kinds.iter().map(move |&k| DgpConfig { kind: k, outcome: o, ..base.clone() })
            })
            .collect();
        let names = b.estimators.unwrap_or_else(|| EstimatorKind::ALL.iter().map(|k| k.short_name().to_string()).collect());
        plan.estimators = names
            .iter()
            .map(|n| {
                let kind: EstimatorKind = n.parse().map_err(|e: crate::estimators::EstimatorError| invalid(e.to_string()))?;
                self.estimator_config(kind)
            })
            .collect::<Result<_>>()?;
        if let Some(h) = b.horizons {
            plan.horizons = h;
        }
        if let Some(n) = b.n_seeds {
            plan.n_seeds = n;
        }
        if let Some(g) = b.ground_truth {
            plan.ground_truth = g;
        }
        plan.workers = b.workers.or(self.workers).unwrap_or(plan.workers);
        Ok(plan)
    }
}

fn matching(m: &MatchingSection) -> Result<MatchConfig> {
    let d = MatchConfig::default();
    let step = match m.step.as_deref() {
        None => match m.step_size {
            Some(s) => StepRule::Fixed(s),
            None => d.step,
        },
        Some("lipschitz") => StepRule::Lipschitz,
        Some("line_search") => StepRule::LineSearch,
        Some("fixed") => StepRule::Fixed(m.step_size.ok_or_else(|| invalid("step = \"fixed\" needs step_size"))?),
        Some(other) => return Err(invalid(format!("unknown step rule `{other}`"))),
    };
    let cfg = MatchConfig {
        importance: m.importance.clone().map(Importance::Diagonal).unwrap_or(d.importance),
        ridge_lambda: m.ridge_lambda.unwrap_or(d.ridge_lambda),
        max_iters: m.max_iters.unwrap_or(d.max_iters),
        tol: m.tol.unwrap_or(d.tol),
        step,
    };
    cfg.check().map_err(|e| invalid(e.to_string()))?;
    Ok(cfg)
}

fn regressor(r: &RegressorSection, seed: u64) -> Result<RegressorSpec> {
    let base = match r.kind.as_deref().unwrap_or("mlp") {
        "mlp" => {
            let RegressorKind::Mlp { hidden_units, learning_rate, steps } = RegressorSpec::default().kind else {
                unreachable!("default regressor is an MLP")
            };
            RegressorSpec::mlp(
                r.hidden_units.unwrap_or(hidden_units),
                r.learning_rate.unwrap_or(learning_rate),
                r.steps.unwrap_or(steps),
            )
        }
        "linear" => RegressorSpec::linear(r.ridge.unwrap_or(0.0)),
        other => return Err(invalid(format!("unknown regressor kind `{other}`"))),
    };
    let spec = RegressorSpec {
        seed: r.seed.unwrap_or(seed),
        standardize_inputs: r.standardize_inputs.unwrap_or(base.standardize_inputs),
        standardize_targets: r.standardize_targets.unwrap_or(base.standardize_targets),
        ..base
    };
    spec.check().map_err(|e| invalid(e.to_string()))?;
    Ok(spec)
}

fn targeting(t: &TargetingSection) -> Result<TargetingConfig> {
    let d = TargetingConfig::default();
    let method = match t.method.as_deref() {
        None => d.method,
        Some("newton") => SolveMethod::Newton,
        Some("bisection") => SolveMethod::Bisection,
        Some("gradient_descent") => SolveMethod::GradientDescent {
            eta: t.eta.unwrap_or(DEFAULT_ETA),
            max_iters: t.max_iters.unwrap_or(DEFAULT_ROUNDS),
        },
        Some(other) => return Err(invalid(format!("unknown targeting method `{other}`"))),
    };
    if let Some(e) = t.eps_max {
        if !(e.is_finite() && e > 0.0) {
            return Err(invalid("eps_max must be positive"));
        }
    }
    Ok(TargetingConfig {
        mode: t.mode.unwrap_or(d.mode),
        method,
        tol: t.tol.unwrap_or(d.tol),
        eps_max: t.eps_max.or(d.eps_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c.dgp_config(), DgpConfig::default());
        assert_eq!(c.estimator_config(EstimatorKind::Tsc).unwrap(), EstimatorConfig::new(EstimatorKind::Tsc));
        assert_eq!(c.bench_plan().unwrap(), BenchPlan::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml_str("[dgp]\nkinds = \"linear\"\n").unwrap_err();
        assert!(err.to_string().contains("kinds"), "{err}");
        assert!(RunConfig::from_toml_str("colour = 1").is_err());
    }

    #[test]
    fn nested_overrides() {
        let c = RunConfig::from_toml_str(
            r#"
seed = 9
[dgp]
kind = "time_varying"
outcome = "binary"
[estimator]
kind = "tsc"
[estimator.regressor]
kind = "linear"
ridge = 0.5
[estimator.targeting]
method = "bisection"
[bench]
horizons = [1, 2]
n_seeds = 2
kinds = ["hinge"]
outcomes = ["continuous"]
estimators = ["sc", "tsc"]
"#,
        )
        .unwrap();
        let d = c.dgp_config();
        assert_eq!((d.kind, d.outcome, d.seed), (DgpKind::TimeVarying, OutcomeType::Binary, 9));
        let e = c.estimator_config(c.estimator_kind().unwrap().unwrap()).unwrap();
        assert_eq!(e.regressor.kind, RegressorKind::Linear { ridge: 0.5 });
        assert_eq!(e.regressor.seed, 9);
        assert_eq!(e.targeting.method, SolveMethod::Bisection);
        let p = c.bench_plan().unwrap();
        assert_eq!(p.dgps.len(), 1);
        assert_eq!(p.dgps[0].kind, DgpKind::Hinge);
        assert_eq!(p.estimators.len(), 2);
        assert_eq!(p.horizons, vec![1, 2]);
    }

    #[test]
    fn bad_values_rejected() {
        let c = RunConfig::from_toml_str("[estimator.matching]\nstep = \"fixed\"\n").unwrap();
        assert!(c.estimator_config(EstimatorKind::ClassicalSc).is_err());
        let c = RunConfig::from_toml_str("[estimator.regressor]\nkind = \"forest\"\n").unwrap();
        assert!(c.estimator_config(EstimatorKind::Tsc).is_err());
    }
}
