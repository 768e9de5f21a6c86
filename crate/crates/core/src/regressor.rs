//! Outcome regressions `m_t(x)` fitted on the control units, one per horizon.
//!
//! Two backends: closed-form ridge least squares, and a one-hidden-layer ReLU
//! network trained by full-batch gradient descent on squared error.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::FeatureVector;
use crate::seed::{derive_seed, streams};

#[derive(Debug, Error, PartialEq)]
pub enum RegressorError {
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least {needed} controls, got {got}")]
    TooFewControls { needed: usize, got: usize },
    #[error("invalid regressor spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, RegressorError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegressorKind {
    Linear { ridge: f64 },
    Mlp { hidden_units: usize, learning_rate: f64, steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub seed: u64,
    pub standardize_inputs: bool,
    /// Fit on z-scored targets and map predictions back.
    pub standardize_targets: bool,
}

impl Default for RegressorSpec {
    fn default() -> Self {
        RegressorSpec::mlp(100, 1e-2, 2000)
    }
}

impl RegressorSpec {
    pub fn linear(ridge: f64) -> Self {
        RegressorSpec { kind: RegressorKind::Linear { ridge }, seed: 0, standardize_inputs: false, standardize_targets: false }
    }

    pub fn mlp(hidden_units: usize, learning_rate: f64, steps: usize) -> Self {
        RegressorSpec {
            kind: RegressorKind::Mlp { hidden_units, learning_rate, steps },
            seed: 0,
            standardize_inputs: true,
            standardize_targets: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<()> {
        match self.kind {
            RegressorKind::Linear { ridge } if !(ridge >= 0.0) || !ridge.is_finite() => {
                Err(RegressorError::InvalidSpec(format!("ridge = {ridge}")))
            }
            RegressorKind::Mlp { hidden_units, learning_rate, steps } => {
                if hidden_units == 0 || steps == 0 || !(learning_rate > 0.0) || !learning_rate.is_finite() {
                    Err(RegressorError::InvalidSpec(format!(
                        "mlp hidden_units={hidden_units} learning_rate={learning_rate} steps={steps}"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Per-feature z-scoring with statistics from the training rows.
#[derive(Debug, Clone, PartialEq)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let dim = rows[0].len();
        let mean: Vec<f64> = (0..dim).map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / n).collect();
        let scale = (0..dim)
            .map(|d| {
                let var = rows.iter().map(|r| (r[d] - mean[d]).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}

/// One-hidden-layer ReLU network with scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    inputs: usize,
    hidden: usize,
    /// `hidden x inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Mlp { inputs, hidden, w1: vec![0.0; hidden * inputs], b1: vec![0.0; hidden], w2: vec![0.0; hidden], b2: 0.0 }
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization for every layer.
    pub fn init<R: Rng>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let mut m = Mlp::zeros(inputs, hidden);
        let a1 = 1.0 / (inputs.max(1) as f64).sqrt();
        let a2 = 1.0 / (hidden as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        m.b1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        m.w2.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        m.b2 = rng.random_range(-a2..a2);
        m
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend(&self.w1);
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params(), "parameter vector length");
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.hidden);
        let (c, d) = rest.split_at(self.hidden);
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2 = d[0];
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|h| {
                let row = &self.w1[h * self.inputs..(h + 1) * self.inputs];
                let z = self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                z.max(0.0)
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let a = self.hidden_activations(x);
        self.b2 + a.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>()
    }

    /// Mean squared error over the batch and its gradient in [`Mlp::params`] order.
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
        let n = xs.len() as f64;
        let mut gw1 = vec![0.0; self.w1.len()];
        let mut gb1 = vec![0.0; self.hidden];
        let mut gw2 = vec![0.0; self.hidden];
        let mut gb2 = 0.0;
        let mut loss = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let a = self.hidden_activations(x);
            let pred = self.b2 + a.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>();
            let err = pred - y;
            loss += err * err / n;
            let dpred = 2.0 * err / n;
            gb2 += dpred;
            for h in 0..self.hidden {
                gw2[h] += dpred * a[h];
                if a[h] > 0.0 {
                    let dz = dpred * self.w2[h];
                    gb1[h] += dz;
                    let row = &mut gw1[h * self.inputs..(h + 1) * self.inputs];
                    row.iter_mut().zip(x).for_each(|(g, v)| *g += dz * v);
                }
            }
        }
        let mut grad = gw1;
        grad.extend(gb1);
        grad.extend(gw2);
        grad.push(gb2);
        (loss, grad)
    }

    /// Full-batch gradient descent; returns the loss before each step.
    pub fn train(&mut self, xs: &[Vec<f64>], ys: &[f64], learning_rate: f64, steps: usize) -> Vec<f64> {
        let mut losses = Vec::with_capacity(steps);
        let mut p = self.params();
        for _ in 0..steps {
            let (loss, g) = self.loss_and_grad(xs, ys);
            losses.push(loss);
            p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi -= learning_rate * gi);
            self.set_params(&p);
        }
        losses
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Linear { coef: Vec<f64>, intercept: f64 },
    Mlp(Mlp),
}

/// A fitted `m_t`. Prediction is a pure function of the stored state.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    pub horizon: Option<usize>,
    pub spec: RegressorSpec,
    scaler: Option<Standardizer>,
    /// `(mean, sd)` of the training targets when they were standardized.
    target_scale: Option<(f64, f64)>,
    pub params: ModelParams,
    /// Training loss per step (MLP only).
    pub training_loss: Vec<f64>,
    /// Non-fatal fitting notes, e.g. a rank-deficient linear design.
    pub warnings: Vec<String>,
}

impl OutcomeModel {
    /// A model with the given parameters and no input scaling.
    pub fn from_params(params: ModelParams, spec: RegressorSpec) -> Self {
        OutcomeModel {
            horizon: None,
            spec,
            scaler: None,
            target_scale: None,
            params,
            training_loss: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match &self.params {
            ModelParams::Linear { coef, .. } => coef.len(),
            ModelParams::Mlp(m) => m.inputs,
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(RegressorError::LengthMismatch { expected: self.input_dim(), got: x.len() });
        }
        let scaled;
        let input = match &self.scaler {
            Some(s) => {
                scaled = s.apply(x.as_slice());
                scaled.as_slice()
            }
            None => x.as_slice(),
        };
        let raw = match &self.params {
            ModelParams::Linear { coef, intercept } => intercept + coef.iter().zip(input).map(|(b, v)| b * v).sum::<f64>(),
            ModelParams::Mlp(m) => m.forward(input),
        };
        Ok(match self.target_scale {
            Some((mean, sd)) => mean + sd * raw,
            None => raw,
        })
    }

    pub fn predict_many(&self, xs: &[FeatureVector]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

fn check_training_data(features: &[FeatureVector], targets: &[f64]) -> Result<usize> {
    if features.is_empty() {
        return Err(RegressorError::TooFewControls { needed: 1, got: 0 });
    }
    if features.len() != targets.len() {
        return Err(RegressorError::LengthMismatch { expected: features.len(), got: targets.len() });
    }
    let dim = features[0].len();
    for f in features {
        if f.len() != dim {
            return Err(RegressorError::LengthMismatch { expected: dim, got: f.len() });
        }
        if f.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(RegressorError::NonFiniteInput("features".into()));
        }
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(RegressorError::NonFiniteInput("targets".into()));
    }
    Ok(dim)
}

/// Fits `m_t` on the controls' features and their outcomes at one horizon.
pub fn fit_outcome_model(features: &[FeatureVector], targets: &[f64], spec: &RegressorSpec) -> Result<OutcomeModel> {
    spec.check()?;
    let dim = check_training_data(features, targets)?;
    let raw: Vec<Vec<f64>> = features.iter().map(|f| f.0.clone()).collect();
    let scaler = spec.standardize_inputs.then(|| Standardizer::fit(&raw));
    let xs: Vec<Vec<f64>> = match &scaler {
        Some(s) => raw.iter().map(|r| s.apply(r)).collect(),
        None => raw,
    };
    let target_scale = spec.standardize_targets.then(|| {
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let sd = (targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
        (mean, if sd > 0.0 { sd } else { 1.0 })
    });
    let scaled_targets: Vec<f64>;
    let targets = match target_scale {
        Some((mean, sd)) => {
            scaled_targets = targets.iter().map(|y| (y - mean) / sd).collect();
            &scaled_targets[..]
        }
        None => targets,
    };
    let mut warnings = Vec::new();
    let mut training_loss = Vec::new();
    let params = match spec.kind {
        RegressorKind::Linear { ridge } => {
            let (coef, intercept, rank) = fit_linear(&xs, targets, ridge);
            if ridge == 0.0 && rank < dim {
                warnings.push(format!("rank-deficient design (rank {rank} < {dim}); using the minimum-norm solution"));
            }
            ModelParams::Linear { coef, intercept }
        }
        RegressorKind::Mlp { hidden_units, learning_rate, steps } => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut net = Mlp::init(dim, hidden_units, &mut rng);
            training_loss = net.train(&xs, targets, learning_rate, steps);
            if !net.params().iter().all(|p| p.is_finite()) {
                return Err(RegressorError::NonFiniteInput("MLP training diverged".into()));
            }
            ModelParams::Mlp(net)
        }
    };
    Ok(OutcomeModel { horizon: None, spec: *spec, scaler, target_scale, params, training_loss, warnings })
}

/// Centered (ridge) least squares with a free intercept. Returns `(coef, intercept, rank)`.
fn fit_linear(xs: &[Vec<f64>], ys: &[f64], ridge: f64) -> (Vec<f64>, f64, usize) {
    let n = xs.len();
    let dim = xs[0].len();
    let x_mean: Vec<f64> = (0..dim).map(|d| xs.iter().map(|r| r[d]).sum::<f64>() / n as f64).collect();
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, dim, |i, d| xs[i][d] - x_mean[d]);
    let yc = DVector::from_iterator(n, ys.iter().map(|y| y - y_mean));

    let svd = xc.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = smax * 1e-12 * (n.max(dim) as f64);
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();

    let beta = if dim == 0 || smax == 0.0 {
        DVector::zeros(dim)
    } else {
        // beta = V diag(s / (s^2 + ridge)) U^T y, dropping numerically zero singular values.
        let u = svd.u.as_ref().expect("svd u");
        let vt = svd.v_t.as_ref().expect("svd v_t");
        let uty = u.transpose() * &yc;
        let scaled = DVector::from_iterator(
            uty.len(),
            uty.iter().zip(svd.singular_values.iter()).map(|(c, s)| if *s > cutoff { c * s / (s * s + ridge) } else { 0.0 }),
        );
        vt.transpose() * scaled
    };
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    (beta.iter().copied().collect(), intercept, rank)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossFit {
    /// Out-of-fold prediction for each control.
    pub predictions: Vec<f64>,
    /// Fold index of each control.
    pub fold_of: Vec<usize>,
    pub n_models: usize,
}

/// Out-of-fold predictions: controls are shuffled with a seeded generator and
/// dealt into `k_folds` folds; each fold is predicted by a model fitted on the others.
pub fn cross_fit_control_predictions(
    features: &[FeatureVector],
    targets: &[f64],
    spec: &RegressorSpec,
    k_folds: usize,
) -> Result<CrossFit> {
    spec.check()?;
    check_training_data(features, targets)?;
    let n = features.len();
    if k_folds < 2 || n < k_folds {
        return Err(RegressorError::TooFewControls { needed: k_folds.max(2), got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, streams::CROSS_FIT_SHUFFLE)));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k_folds;
    }
    let mut predictions = vec![0.0; n];
    for fold in 0..k_folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let fx: Vec<FeatureVector> = train.iter().map(|&i| features[i].clone()).collect();
        let fy: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
        let fold_spec = spec.with_seed(derive_seed(spec.seed, streams::FOLD_BASE + fold as u64));
        let model = fit_outcome_model(&fx, &fy, &fold_spec)?;
        for i in (0..n).filter(|&i| fold_of[i] == fold) {
            predictions[i] = model.predict(&features[i])?;
        }
    }
    Ok(CrossFit { predictions, fold_of, n_models: k_folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, Normal};

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector(v.to_vec())
    }

    fn linear_fixture(n: usize, dim: usize, noise: f64, seed: u64) -> (Vec<FeatureVector>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let beta: Vec<f64> = (0..dim).map(|d| 0.5 * d as f64 - 1.0).collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..10.0)).collect();
            let y = 2.0 + x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + noise * normal.sample(&mut rng);
            xs.push(fv(&x));
            ys.push(y);
        }
        (xs, ys)
    }

    #[test]
    fn constant_targets_linear() {
        let (xs, _) = linear_fixture(6, 3, 0.0, 1);
        let ys = vec![4.2; 6];
        let m = fit_outcome_model(&xs, &ys, &RegressorSpec::linear(0.0)).unwrap();
        for x in &xs {
            assert_abs_diff_eq!(m.predict(x).unwrap(), 4.2, epsilon = 1e-6);
        }
    }

    #[test]
    fn constant_targets_mlp() {
        let (xs, _) = linear_fixture(4, 5, 0.0, 2);
        let ys = vec![3.0; 4];
        let m = fit_outcome_model(&xs, &ys, &RegressorSpec::mlp(20, 1e-2, 4000)).unwrap();
        for x in &xs {
            assert_abs_diff_eq!(m.predict(x).unwrap(), 3.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn exact_linear_interpolation() {
        let (xs, ys) = linear_fixture(10, 4, 0.0, 3);
        let m = fit_outcome_model(&xs, &ys, &RegressorSpec::linear(0.0)).unwrap();
        assert!(m.warnings.is_empty());
        for (x, y) in xs.iter().zip(&ys) {
            assert_abs_diff_eq!(m.predict(x).unwrap(), *y, epsilon = 1e-8);
        }
    }

    #[test]
    fn rank_deficient_falls_back_with_warning() {
        let (xs, ys) = linear_fixture(4, 10, 0.3, 4);
        let m = fit_outcome_model(&xs, &ys, &RegressorSpec::linear(0.0)).unwrap();
        assert_eq!(m.warnings.len(), 1);
        // Minimum-norm solution still interpolates an underdetermined system.
        for (x, y) in xs.iter().zip(&ys) {
            assert_abs_diff_eq!(m.predict(x).unwrap(), *y, epsilon = 1e-8);
        }
    }

    #[test]
    fn linear_prediction_is_affine() {
        let m = OutcomeModel::from_params(
            ModelParams::Linear { coef: vec![1.5, -2.0], intercept: 0.25 },
            RegressorSpec::linear(0.0),
        );
        assert_eq!(m.predict(&fv(&[2.0, 1.0])).unwrap(), 0.25 + 3.0 - 2.0);
        assert!(matches!(m.predict(&fv(&[1.0])), Err(RegressorError::LengthMismatch { .. })));
    }

    #[test]
    fn zero_network_predicts_zero() {
        let m = OutcomeModel::from_params(ModelParams::Mlp(Mlp::zeros(3, 7)), RegressorSpec::default());
        assert_eq!(m.predict(&fv(&[1.0, -5.0, 100.0])).unwrap(), 0.0);
    }

    #[test]
    fn mlp_fit_is_deterministic() {
        let (xs, ys) = linear_fixture(4, 6, 1.0, 5);
        let spec = RegressorSpec::mlp(16, 1e-2, 300).with_seed(11);
        let a = fit_outcome_model(&xs, &ys, &spec).unwrap();
        let b = fit_outcome_model(&xs, &ys, &spec).unwrap();
        assert_eq!(a, b);
        let c = fit_outcome_model(&xs, &ys, &spec.with_seed(12)).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn invalid_specs() {
        let (xs, ys) = linear_fixture(3, 2, 0.0, 6);
        assert!(fit_outcome_model(&xs, &ys, &RegressorSpec::mlp(0, 1e-2, 10)).is_err());
        assert!(fit_outcome_model(&xs, &ys, &RegressorSpec::mlp(4, 0.0, 10)).is_err());
        assert!(fit_outcome_model(&xs, &ys, &RegressorSpec::linear(-1.0)).is_err());
        let err = fit_outcome_model(&xs, &[1.0, f64::NAN, 0.0], &RegressorSpec::linear(0.0)).unwrap_err();
        assert!(matches!(err, RegressorError::NonFiniteInput(_)));
    }

    #[test]
    fn leave_one_out_constant() {
        let (xs, _) = linear_fixture(5, 3, 0.0, 7);
        let ys = vec![-1.5; 5];
        let cf = cross_fit_control_predictions(&xs, &ys, &RegressorSpec::linear(0.0), 5).unwrap();
        assert_eq!(cf.n_models, 5);
        for p in cf.predictions {
            assert_abs_diff_eq!(p, -1.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn two_folds_on_four_controls() {
        let (xs, ys) = linear_fixture(4, 2, 0.5, 8);
        let cf = cross_fit_control_predictions(&xs, &ys, &RegressorSpec::linear(0.1), 2).unwrap();
        assert_eq!(cf.n_models, 2);
        for fold in 0..2 {
            assert_eq!(cf.fold_of.iter().filter(|&&f| f == fold).count(), 2);
        }
        // Each control's prediction equals a model fitted on the other fold only.
        for fold in 0..2 {
            let train: Vec<usize> = (0..4).filter(|&i| cf.fold_of[i] != fold).collect();
            let fx: Vec<_> = train.iter().map(|&i| xs[i].clone()).collect();
            let fy: Vec<_> = train.iter().map(|&i| ys[i]).collect();
            let m = fit_outcome_model(&fx, &fy, &RegressorSpec::linear(0.1)).unwrap();
            for i in (0..4).filter(|&i| cf.fold_of[i] == fold) {
                assert_eq!(cf.predictions[i], m.predict(&xs[i]).unwrap());
            }
        }
    }

    #[test]
    fn out_of_fold_differs_from_in_sample() {
        let (xs, ys) = linear_fixture(12, 2, 1.0, 9);
        let spec = RegressorSpec::linear(0.0);
        let full = fit_outcome_model(&xs, &ys, &spec).unwrap();
        let in_sample = full.predict_many(&xs).unwrap();
        let cf = cross_fit_control_predictions(&xs, &ys, &spec, 12).unwrap();
        let diff: f64 = in_sample.iter().zip(&cf.predictions).map(|(a, b)| (a - b).abs()).sum();
        assert!(diff > 1e-3, "out-of-fold predictions should differ, got total diff {diff}");
    }

    #[test]
    fn too_few_controls_for_folds() {
        let (xs, ys) = linear_fixture(3, 2, 0.0, 10);
        let err = cross_fit_control_predictions(&xs, &ys, &RegressorSpec::linear(0.0), 4).unwrap_err();
        assert!(matches!(err, RegressorError::TooFewControls { .. }));
        assert!(cross_fit_control_predictions(&xs, &ys, &RegressorSpec::linear(0.0), 1).is_err());
    }
}
