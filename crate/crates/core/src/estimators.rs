//! Counterfactual estimators for the treated unit's untreated outcome.
//!
//! All four share one interface: [`estimate`] takes a validated panel and an
//! [`EstimatorConfig`] and returns `psi_hat` and `tau_hat = Y_1t - psi_hat` for
//! each requested post-treatment horizon.
//!
//! | kind          | counterfactual                                     |
//! |---------------|----------------------------------------------------|
//! | `ClassicalSc` | `sum_j w_j Y_jt`                                   |
//! | `PlugIn`      | `m_t(X_1)`                                         |
//! | `AugmentedSc` | `m_t(X_1) + sum_j w_j (Y_jt - m_t(X_j))`           |
//! | `Tsc`         | `sum_j w*_j Y_jt`, `w*` the targeted weights       |

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{PanelDataset, PanelError};
use crate::regressor::{
    cross_fit_control_predictions, fit_outcome_model, OutcomeModel, RegressorError, RegressorSpec,
};
use crate::seed::{derive_seed, streams};
use crate::targeting::{compute_scores, targeted_weights, TargetingConfig, TargetingError, TargetingResult};
use crate::weights::{solve_sc_weights, weighted_average, MatchConfig, MatchSolution, SimplexWeights, WeightsError};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error(transparent)]
    Targeting(#[from] TargetingError),
    #[error("invalid horizon {horizon}: panel has {available} post-treatment periods")]
    InvalidHorizon { horizon: usize, available: usize },
    #[error("unknown estimator '{0}' (expected sc, plugin, asc or tsc)")]
    UnknownEstimator(String),
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    ClassicalSc,
    PlugIn,
    AugmentedSc,
    Tsc,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] =
        [EstimatorKind::ClassicalSc, EstimatorKind::PlugIn, EstimatorKind::AugmentedSc, EstimatorKind::Tsc];

    /// Short name used in file names and on the command line.
    pub fn short_name(&self) -> &'static str {
        match self {
            EstimatorKind::ClassicalSc => "sc",
            EstimatorKind::PlugIn => "plugin",
            EstimatorKind::AugmentedSc => "asc",
            EstimatorKind::Tsc => "tsc",
        }
    }

    pub fn uses_regressor(&self) -> bool {
        !matches!(self, EstimatorKind::ClassicalSc)
    }

    pub fn uses_weights(&self) -> bool {
        !matches!(self, EstimatorKind::PlugIn)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::ClassicalSc => "Classical SCM",
            EstimatorKind::PlugIn => "Plug-in",
            EstimatorKind::AugmentedSc => "Augmented SCM",
            EstimatorKind::Tsc => "TSC",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sc" | "scm" | "classical" | "classical_sc" => Ok(EstimatorKind::ClassicalSc),
            "plugin" | "plug_in" | "plug-in" => Ok(EstimatorKind::PlugIn),
            "asc" | "ascm" | "augmented" | "augmented_sc" => Ok(EstimatorKind::AugmentedSc),
            "tsc" | "targeted" => Ok(EstimatorKind::Tsc),
            other => Err(EstimatorError::UnknownEstimator(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub matching: MatchConfig,
    pub regressor: RegressorSpec,
    pub targeting: TargetingConfig,
    /// Post-treatment offsets (1 = first treated period). `None` means every post period.
    pub horizons: Option<Vec<usize>>,
    /// Fit control predictions out-of-fold with this many folds.
    pub cross_fit_folds: Option<usize>,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind) -> Self {
        EstimatorConfig {
            kind,
            matching: MatchConfig::default(),
            regressor: RegressorSpec::default(),
            targeting: TargetingConfig::default(),
            horizons: None,
            cross_fit_folds: None,
        }
    }

    pub fn with_regressor(mut self, spec: RegressorSpec) -> Self {
        self.regressor = spec;
        self
    }

    /// Matching config actually used: TSC always starts from unpenalized weights.
    pub fn effective_matching(&self) -> MatchConfig {
        match self.kind {
            EstimatorKind::Tsc => MatchConfig { ridge_lambda: 0.0, ..self.matching.clone() },
            _ => self.matching.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonEstimate {
    /// 1-based offset from the treatment time.
    pub offset: usize,
    /// 0-based period index.
    pub period: usize,
    pub observed: f64,
    pub psi_hat: f64,
    pub tau_hat: f64,
    /// Weights that produced the counterfactual (targeted weights for TSC).
    pub weights_used: Option<SimplexWeights>,
    /// `m_t(X_1)`, when a regression was fitted.
    pub model_treated: Option<f64>,
    pub targeting: Option<TargetingResult>,
    /// Bounds used for the violation flag.
    pub bounds: (f64, f64),
    pub bounds_violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub kind: EstimatorKind,
    pub horizons: Vec<HorizonEstimate>,
    /// Matching weights (initial weights for TSC).
    pub initial_weights: Option<SimplexWeights>,
    /// `|| X_1 - sum_j w_j X_j ||_V^2` of the matching weights.
    pub pretreatment_fit: Option<f64>,
    pub warnings: Vec<String>,
}

/// A fitted regression at one post-treatment period together with its predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonFit {
    pub period: usize,
    pub model: OutcomeModel,
    /// Predictions for the controls, out-of-fold when cross-fitting.
    pub control_preds: Vec<f64>,
    pub treated_pred: f64,
}

/// Weights and regressions shared between estimators run on the same panel.
#[derive(Debug, Default)]
pub struct FitCache {
    matches: HashMap<String, Arc<MatchSolution>>,
    models: HashMap<String, Arc<HorizonFit>>,
}

impl FitCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn matching(&mut self, dataset: &PanelDataset, cfg: &MatchConfig) -> Result<Arc<MatchSolution>> {
        let key = format!("{cfg:?}");
        if let Some(hit) = self.matches.get(&key) {
            return Ok(hit.clone());
        }
        let sol = Arc::new(fit_initial_weights(dataset, cfg)?);
        self.matches.insert(key, sol.clone());
        Ok(sol)
    }

    fn horizon(
        &mut self,
        dataset: &PanelDataset,
        spec: &RegressorSpec,
        folds: Option<usize>,
        period: usize,
    ) -> Result<Arc<HorizonFit>> {
        let key = format!("{spec:?}/{folds:?}/{period}");
        if let Some(hit) = self.models.get(&key) {
            return Ok(hit.clone());
        }
        let fit = Arc::new(fit_horizon(dataset, spec, folds, period)?);
        self.models.insert(key, fit.clone());
        Ok(fit)
    }
}

pub fn fit_initial_weights(dataset: &PanelDataset, cfg: &MatchConfig) -> Result<MatchSolution> {
    Ok(solve_sc_weights(&dataset.treated_feature(), &dataset.control_features(), cfg)?)
}

/// Fits `m_t` for one post-treatment period. The regressor seed is derived
/// from `spec.seed` and the period so every horizon gets its own stream.
pub fn fit_horizon(dataset: &PanelDataset, spec: &RegressorSpec, folds: Option<usize>, period: usize) -> Result<HorizonFit> {
    let features = dataset.control_features();
    let targets = dataset.control_outcomes_at(period);
    let spec = spec.with_seed(derive_seed(spec.seed, streams::HORIZON_BASE + period as u64));
    let mut model = fit_outcome_model(&features, &targets, &spec)?;
    model.horizon = Some(period);
    let control_preds = match folds {
        Some(k) => cross_fit_control_predictions(&features, &targets, &spec, k)?.predictions,
        None => model.predict_many(&features)?,
    };
    let treated_pred = model.predict(&dataset.treated_feature())?;
    Ok(HorizonFit { period, model, control_preds, treated_pred })
}

fn resolve_periods(dataset: &PanelDataset, horizons: &Option<Vec<usize>>) -> Result<Vec<(usize, usize)>> {
    let available = dataset.n_post();
    let offsets: Vec<usize> = match horizons {
        Some(h) => h.clone(),
        None => (1..=available).collect(),
    };
    offsets
        .into_iter()
        .map(|h| {
            if h == 0 || h > available {
                Err(EstimatorError::InvalidHorizon { horizon: h, available })
            } else {
                Ok((h, dataset.t0() + h - 1))
            }
        })
        .collect()
}

/// `sum_j w_j y_j`, kept inside `[min y, max y]` against rounding.
pub fn convex_combination(w: &SimplexWeights, ys: &[f64]) -> Result<f64> {
    let v = weighted_average(w, ys)?;
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(*y), b.max(*y)));
    Ok(v.clamp(lo, hi))
}

/// `m(X_1) + sum_j w_j (Y_j - m(X_j))`.
pub fn augmented_value(treated_pred: f64, w: &SimplexWeights, ys: &[f64], control_preds: &[f64]) -> Result<f64> {
    let residuals: Vec<f64> = ys.iter().zip(control_preds).map(|(y, m)| y - m).collect();
    Ok(treated_pred + weighted_average(w, &residuals)?)
}

/// Tilts `w0` until the weighted residual vanishes and returns `sum_j w*_j Y_j`.
pub fn targeted_value(
    w0: &SimplexWeights,
    ys: &[f64],
    control_preds: &[f64],
    cfg: &TargetingConfig,
) -> Result<(f64, TargetingResult)> {
    let residuals: Vec<f64> = ys.iter().zip(control_preds).map(|(y, m)| y - m).collect();
    let scores = compute_scores(control_preds, ys, w0, cfg.mode)?;
    let targeted = targeted_weights(w0, &residuals, &scores, cfg)?;
    Ok((convex_combination(&targeted.targeted_weights, ys)?, targeted))
}

/// Bounds for violation reporting: declared, else `[0, 1]` for binary, else the control range.
pub fn reporting_bounds(dataset: &PanelDataset, period: usize) -> (f64, f64) {
    dataset.kind().declared_bounds().unwrap_or_else(|| dataset.control_range_at(period))
}

fn horizon_estimate(
    dataset: &PanelDataset,
    offset: usize,
    period: usize,
    psi_hat: f64,
    weights_used: Option<SimplexWeights>,
    model_treated: Option<f64>,
    targeting: Option<TargetingResult>,
) -> HorizonEstimate {
    let observed = dataset.outcome(dataset.treated(), period);
    let bounds = reporting_bounds(dataset, period);
    HorizonEstimate {
        offset,
        period,
        observed,
        psi_hat,
        tau_hat: observed - psi_hat,
        weights_used,
        model_treated,
        targeting,
        bounds,
        bounds_violation: psi_hat < bounds.0 || psi_hat > bounds.1,
    }
}

/// Runs the configured estimator.
pub fn estimate(dataset: &PanelDataset, cfg: &EstimatorConfig) -> Result<EstimatorResult> {
    estimate_cached(dataset, cfg, &mut FitCache::new())
}

/// Like [`estimate`], reusing weights and regressions already in `cache`.
/// The cache must only ever see one dataset.
pub fn estimate_cached(dataset: &PanelDataset, cfg: &EstimatorConfig, cache: &mut FitCache) -> Result<EstimatorResult> {
    let periods = resolve_periods(dataset, &cfg.horizons)?;
    let matching = if cfg.kind.uses_weights() { Some(cache.matching(dataset, &cfg.effective_matching())?) } else { None };
    let mut horizons = Vec::with_capacity(periods.len());
    let mut warnings = Vec::new();
    for (offset, period) in periods {
        let ys = dataset.control_outcomes_at(period);
        let fit = if cfg.kind.uses_regressor() {
            let fit = cache.horizon(dataset, &cfg.regressor, cfg.cross_fit_folds, period)?;
            warnings.extend(fit.model.warnings.iter().map(|w| format!("period {period}: {w}")));
            Some(fit)
        } else {
            None
        };
        let est = match cfg.kind {
            EstimatorKind::ClassicalSc => {
                let w = &matching.as_ref().expect("weights").weights;
                horizon_estimate(dataset, offset, period, convex_combination(w, &ys)?, Some(w.clone()), None, None)
            }
            EstimatorKind::PlugIn => {
                let fit = fit.expect("regression");
                horizon_estimate(dataset, offset, period, fit.treated_pred, None, Some(fit.treated_pred), None)
            }
            EstimatorKind::AugmentedSc => {
                let fit = fit.expect("regression");
                let w = &matching.as_ref().expect("weights").weights;
                let psi = augmented_value(fit.treated_pred, w, &ys, &fit.control_preds)?;
                horizon_estimate(dataset, offset, period, psi, Some(w.clone()), Some(fit.treated_pred), None)
            }
            EstimatorKind::Tsc => {
                let fit = fit.expect("regression");
                let w0 = &matching.as_ref().expect("weights").weights;
                let (psi, targeted) = targeted_value(w0, &ys, &fit.control_preds, &cfg.targeting)?;
                let w_star = targeted.targeted_weights.clone();
                horizon_estimate(dataset, offset, period, psi, Some(w_star), Some(fit.treated_pred), Some(targeted))
            }
        };
        horizons.push(est);
    }
    Ok(EstimatorResult {
        kind: cfg.kind,
        horizons,
        initial_weights: matching.as_ref().map(|m| m.weights.clone()),
        pretreatment_fit: matching.as_ref().map(|m| m.objective),
        warnings,
    })
}

pub fn estimate_classical_sc(dataset: &PanelDataset, cfg: &EstimatorConfig) -> Result<EstimatorResult> {
    estimate(dataset, &EstimatorConfig { kind: EstimatorKind::ClassicalSc, ..cfg.clone() })
}

pub fn estimate_plugin(dataset: &PanelDataset, cfg: &EstimatorConfig) -> Result<EstimatorResult> {
    estimate(dataset, &EstimatorConfig { kind: EstimatorKind::PlugIn, ..cfg.clone() })
}

pub fn estimate_augmented_sc(dataset: &PanelDataset, cfg: &EstimatorConfig) -> Result<EstimatorResult> {
    estimate(dataset, &EstimatorConfig { kind: EstimatorKind::AugmentedSc, ..cfg.clone() })
}

pub fn estimate_tsc(dataset: &PanelDataset, cfg: &EstimatorConfig) -> Result<EstimatorResult> {
    estimate(dataset, &EstimatorConfig { kind: EstimatorKind::Tsc, ..cfg.clone() })
}

/// The two terms of `sum_j w_j Y_jt = sum_j w_j m(X_j) + sum_j w_j (Y_jt - m(X_j))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub weighted_model_avg: f64,
    pub weighted_residual: f64,
    pub sum: f64,
    /// `sum_j w_j Y_jt` computed directly.
    pub direct: f64,
}

pub fn decomposition_check(
    dataset: &PanelDataset,
    weights: &SimplexWeights,
    model: &OutcomeModel,
    period: usize,
) -> Result<Decomposition> {
    let preds = model.predict_many(&dataset.control_features())?;
    decompose(weights, &dataset.control_outcomes_at(period), &preds)
}

/// [`decomposition_check`] from precomputed control predictions.
pub fn decompose(weights: &SimplexWeights, outcomes: &[f64], preds: &[f64]) -> Result<Decomposition> {
    let residuals: Vec<f64> = outcomes.iter().zip(preds).map(|(y, m)| y - m).collect();
    if preds.len() != outcomes.len() {
        return Err(WeightsError::LengthMismatch { expected: outcomes.len(), got: preds.len() }.into());
    }
    let weighted_model_avg = weighted_average(weights, preds)?;
    let weighted_residual = weighted_average(weights, &residuals)?;
    Ok(Decomposition {
        weighted_model_avg,
        weighted_residual,
        sum: weighted_model_avg + weighted_residual,
        direct: weighted_average(weights, outcomes)?,
    })
}
