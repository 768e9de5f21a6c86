//! Targeted update of the synthetic-control weights.
//!
//! The initial weights `w0` are tilted along the exponential family
//!
//! ```text
//! w_j(eps) = w0_j exp(eps S_j) / sum_k w0_k exp(eps S_k)
//! ```
//!
//! and `eps` is chosen so that the weighted control residuals
//! `f(eps) = sum_j w_j(eps) (Y_j - m(X_j))` vanish. With residual scores
//! (`S_j = Y_j - m(X_j)`) `f` is the derivative of the convex function
//! `L(eps) = log sum_j w0_j exp(eps r_j)`, so it is nondecreasing and its root
//! is found by bracketing. With centered-prediction scores the fixed-step
//! iteration `eps <- eps - eta f(eps)` is run instead.
//!
//! Controls with `w0_j = 0` keep zero weight for every `eps`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::weights::SimplexWeights;

#[derive(Debug, Error, PartialEq)]
pub enum TargetingError {
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid bracket: eps_max = {0}")]
    InvalidBracket(f64),
}

pub type Result<T> = std::result::Result<T, TargetingError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TiltMode {
    /// `S_j = Y_j - m(X_j)`.
    #[default]
    ResidualScore,
    /// `S_j = m(X_j) - sum_k w0_k m(X_k)`, iterated with fixed-step descent.
    CenteredPrediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltScores {
    pub values: Vec<f64>,
    pub mode: TiltMode,
}

impl TiltScores {
    pub fn residual(outcomes: &[f64], model_preds: &[f64]) -> Result<Self> {
        check_len(outcomes.len(), model_preds.len())?;
        Ok(TiltScores { values: outcomes.iter().zip(model_preds).map(|(y, m)| y - m).collect(), mode: TiltMode::ResidualScore })
    }

    pub fn centered(model_preds: &[f64], w0: &SimplexWeights) -> Result<Self> {
        check_len(w0.len(), model_preds.len())?;
        let mean: f64 = w0.as_slice().iter().zip(model_preds).map(|(w, m)| w * m).sum();
        Ok(TiltScores { values: model_preds.iter().map(|m| m - mean).collect(), mode: TiltMode::CenteredPrediction })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Scores for `mode`. Residual scores need the control outcomes at the horizon.
pub fn compute_scores(model_preds: &[f64], outcomes: &[f64], w0: &SimplexWeights, mode: TiltMode) -> Result<TiltScores> {
    match mode {
        TiltMode::ResidualScore => TiltScores::residual(outcomes, model_preds),
        TiltMode::CenteredPrediction => TiltScores::centered(model_preds, w0),
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(TargetingError::LengthMismatch { expected, got });
    }
    Ok(())
}

fn tilt_raw(w0: &[f64], s: &[f64], eps: f64) -> Vec<f64> {
    if eps == 0.0 {
        return w0.to_vec();
    }
    let shift = w0
        .iter()
        .zip(s)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, s)| eps * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = w0
        .iter()
        .zip(s)
        .map(|(w, s)| if *w > 0.0 { w * (eps * s - shift).exp() } else { 0.0 })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

/// Exponentially tilted weights `w(eps)`, computed with a max-shift.
pub fn tilt_weights(w0: &SimplexWeights, scores: &TiltScores, epsilon: f64) -> Result<SimplexWeights> {
    check_len(w0.len(), scores.len())?;
    if !epsilon.is_finite() {
        return Err(TargetingError::NonFiniteInput(format!("epsilon = {epsilon}")));
    }
    if scores.values.iter().any(|v| !v.is_finite()) {
        return Err(TargetingError::NonFiniteInput("scores".into()));
    }
    SimplexWeights::new(tilt_raw(w0.as_slice(), &scores.values, epsilon))
        .map_err(|e| TargetingError::NonFiniteInput(e.to_string()))
}

/// `f = sum_j w_j r_j`.
pub fn score_equation(w: &SimplexWeights, residuals: &[f64]) -> Result<f64> {
    check_len(w.len(), residuals.len())?;
    Ok(w.as_slice().iter().zip(residuals).map(|(a, b)| a * b).sum())
}

/// `L(eps) = log sum_j w0_j exp(eps r_j)`, the convex objective whose derivative is `f`
/// under residual tilting.
pub fn tilt_log_partition(w0: &SimplexWeights, residuals: &[f64], epsilon: f64) -> f64 {
    let terms: Vec<(f64, f64)> = w0
        .as_slice()
        .iter()
        .zip(residuals)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, r)| (*w, epsilon * r))
        .collect();
    let shift = terms.iter().map(|(_, e)| *e).fold(f64::NEG_INFINITY, f64::max);
    shift + terms.iter().map(|(w, e)| w * (e - shift).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SolveMethod {
    Bisection,
    /// Newton's method on `L`, safeguarded by the bracket.
    Newton,
    GradientDescent { eta: f64, max_iters: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetingConfig {
    pub mode: TiltMode,
    pub method: SolveMethod,
    /// Tolerance on `|f(eps)|`.
    pub tol: f64,
    /// Half-width of the search interval; `None` uses `50 / max_j |S_j|`.
    pub eps_max: Option<f64>,
}

impl Default for TargetingConfig {
    fn default() -> Self {
        TargetingConfig { mode: TiltMode::ResidualScore, method: SolveMethod::Newton, tol: 1e-10, eps_max: None }
    }
}

/// Step size and iteration count of the fixed-step iteration when none are configured.
pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_ROUNDS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetingResult {
    pub epsilon_hat: f64,
    pub targeted_weights: SimplexWeights,
    /// `f(eps_hat)`, the weighted residual at the solution.
    pub score_at_solution: f64,
    pub root_found: bool,
    pub iterations: usize,
    /// `eps_hat` sits on the boundary of `[-eps_max, eps_max]`.
    pub clamped: bool,
}

pub fn default_eps_max(scores: &[f64]) -> f64 {
    let m = scores.iter().fold(0.0_f64, |a, s| a.max(s.abs()));
    if m > 0.0 { 50.0 / m } else { 1.0 }
}

/// Solves for `eps_hat`. The returned weights are `w(eps_hat)`.
pub fn solve_epsilon(
    w0: &SimplexWeights,
    residuals: &[f64],
    scores: &TiltScores,
    cfg: &TargetingConfig,
) -> Result<TargetingResult> {
    check_len(w0.len(), residuals.len())?;
    check_len(w0.len(), scores.len())?;
    if residuals.iter().chain(&scores.values).any(|v| !v.is_finite()) {
        return Err(TargetingError::NonFiniteInput("residuals or scores".into()));
    }
    let eps_max = cfg.eps_max.unwrap_or_else(|| default_eps_max(&scores.values));
    if !(eps_max > 0.0) || !eps_max.is_finite() {
        return Err(TargetingError::InvalidBracket(eps_max));
    }
    let f = |eps: f64| -> f64 {
        tilt_raw(w0.as_slice(), &scores.values, eps).iter().zip(residuals).map(|(w, r)| w * r).sum()
    };
    let finish = |eps: f64, iterations: usize, clamped: bool| -> Result<TargetingResult> {
        let weights = tilt_weights(w0, scores, eps)?;
        let value = score_equation(&weights, residuals)?;
        Ok(TargetingResult {
            epsilon_hat: eps,
            targeted_weights: weights,
            score_at_solution: value,
            root_found: value.abs() <= cfg.tol,
            iterations,
            clamped,
        })
    };

    if scores.mode == TiltMode::CenteredPrediction {
        let (eta, rounds) = match cfg.method {
            SolveMethod::GradientDescent { eta, max_iters } => (eta, max_iters),
            _ => (DEFAULT_ETA, DEFAULT_ROUNDS),
        };
        let mut eps = 0.0;
        let mut clamped = false;
        for _ in 0..rounds {
            eps -= eta * f(eps);
            if eps.abs() >= eps_max {
                eps = eps.clamp(-eps_max, eps_max);
                clamped = true;
            } else {
                clamped = false;
            }
        }
        return finish(eps, rounds, clamped);
    }

    if f(0.0).abs() <= cfg.tol {
        return finish(0.0, 0, false);
    }
    let (lo, hi) = (-eps_max, eps_max);
    let (f_lo, f_hi) = (f(lo), f(hi));
    // f is nondecreasing, so without a sign change |f| is smallest at one end.
    if f_lo > 0.0 {
        return finish(lo, 0, true);
    }
    if f_hi < 0.0 {
        return finish(hi, 0, true);
    }
    let (eps, iters) = match cfg.method {
        SolveMethod::Bisection => bisect(&f, lo, hi, cfg.tol),
        SolveMethod::Newton => newton(w0, residuals, scores, lo, hi, cfg.tol),
        SolveMethod::GradientDescent { eta, max_iters } => {
            let mut eps = 0.0;
            let mut it = 0;
            while it < max_iters {
                let v = f(eps);
                if v.abs() <= cfg.tol {
                    break;
                }
                eps = (eps - eta * v).clamp(lo, hi);
                it += 1;
            }
            (eps, it)
        }
    };
    finish(eps, iters, false)
}

/// Bisection on a bracket with `f(lo) <= 0 <= f(hi)`.
fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, usize) {
    let mut it = 0;
    let mut mid = 0.5 * (lo + hi);
    while it < 400 {
        it += 1;
        mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() <= tol || mid <= lo || mid >= hi {
            break;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (mid, it)
}

/// Newton steps on `L`; a step leaving the current bracket is replaced by bisection.
fn newton(
    w0: &SimplexWeights,
    residuals: &[f64],
    scores: &TiltScores,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, usize) {
    let mut eps = 0.0_f64.clamp(lo, hi);
    for it in 1..=200 {
        let w = tilt_raw(w0.as_slice(), &scores.values, eps);
        let v: f64 = w.iter().zip(residuals).map(|(a, r)| a * r).sum();
        if v.abs() <= tol {
            return (eps, it);
        }
        if v < 0.0 {
            lo = eps;
        } else {
            hi = eps;
        }
        // f'(eps) = sum_j w_j S_j r_j - f * sum_j w_j S_j; the variance of r for residual scores.
        let ws: f64 = w.iter().zip(&scores.values).map(|(a, s)| a * s).sum();
        let wsr: f64 = w.iter().zip(&scores.values).zip(residuals).map(|((a, s), r)| a * s * r).sum();
        let slope = wsr - v * ws;
        let candidate = eps - v / slope;
        eps = if slope > 0.0 && candidate > lo && candidate < hi { candidate } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1e-300) {
            return (eps, it);
        }
    }
    (eps, 200)
}

/// `solve_epsilon` followed by the tilt; the result carries `w* = w(eps_hat)`.
pub fn targeted_weights(
    w0: &SimplexWeights,
    residuals: &[f64],
    scores: &TiltScores,
    cfg: &TargetingConfig,
) -> Result<TargetingResult> {
    solve_epsilon(w0, residuals, scores, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn w(v: &[f64]) -> SimplexWeights {
        SimplexWeights::new(v.to_vec()).unwrap()
    }

    #[test]
    fn centered_scores() {
        let s = TiltScores::centered(&[2.0, 2.0, 2.0], &SimplexWeights::uniform(3)).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
        let s = TiltScores::centered(&[2.0, 4.0], &w(&[0.5, 0.5])).unwrap();
        assert_eq!(s.values, vec![-1.0, 1.0]);
    }

    #[test]
    fn residual_scores() {
        let s = TiltScores::residual(&[1.0, 0.0], &[0.4, 0.3]).unwrap();
        assert_abs_diff_eq!(s.values[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(s.values[1], -0.3, epsilon = 1e-15);
        assert!(TiltScores::residual(&[1.0], &[0.4, 0.3]).is_err());
    }

    #[test]
    fn tilt_examples() {
        let w0 = w(&[0.2, 0.3, 0.5]);
        let s = TiltScores { values: vec![1.0, -2.0, 0.5], mode: TiltMode::ResidualScore };
        assert_eq!(tilt_weights(&w0, &s, 0.0).unwrap(), w0);
        let flat = TiltScores { values: vec![3.0; 3], mode: TiltMode::ResidualScore };
        for eps in [-5.0, 0.3, 40.0] {
            let t = tilt_weights(&w0, &flat, eps).unwrap();
            for (a, b) in t.as_slice().iter().zip(w0.as_slice()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
        // w0 = (1/2, 1/2), S = (1, -1), eps = ln(3)/2: e^{2 eps} = 3 so w = (3/4, 1/4).
        let s = TiltScores { values: vec![1.0, -1.0], mode: TiltMode::ResidualScore };
        let t = tilt_weights(&w(&[0.5, 0.5]), &s, 0.5 * 3f64.ln()).unwrap();
        assert_abs_diff_eq!(t.as_slice()[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(t.as_slice()[1], 0.25, epsilon = 1e-15);
        assert!(tilt_weights(&w0, &s, 1.0).is_err());
        assert!(tilt_weights(&w(&[0.5, 0.5]), &s, f64::NAN).is_err());
    }

    #[test]
    fn tilt_survives_huge_exponents() {
        let s = TiltScores { values: vec![1e3, -1e3], mode: TiltMode::ResidualScore };
        let t = tilt_weights(&w(&[0.5, 0.5]), &s, 10.0).unwrap();
        assert_eq!(t.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn zero_initial_weight_stays_zero() {
        let s = TiltScores { values: vec![5.0, 0.0, -1.0], mode: TiltMode::ResidualScore };
        let t = tilt_weights(&w(&[0.0, 0.5, 0.5]), &s, 3.0).unwrap();
        assert_eq!(t.as_slice()[0], 0.0);
    }

    #[test]
    fn score_equation_examples() {
        assert_eq!(score_equation(&w(&[0.3, 0.7]), &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(score_equation(&w(&[0.5, 0.5]), &[1.0, -1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(score_equation(&w(&[0.75, 0.25]), &[0.6, -0.3]).unwrap(), 0.375, epsilon = 1e-15);
    }

    fn solve(w0: &[f64], r: &[f64], method: SolveMethod) -> TargetingResult {
        let scores = TiltScores { values: r.to_vec(), mode: TiltMode::ResidualScore };
        let cfg = TargetingConfig { method, ..Default::default() };
        solve_epsilon(&w(w0), r, &scores, &cfg).unwrap()
    }

    #[test]
    fn symmetric_residuals_give_zero_epsilon() {
        let res = solve(&[0.5, 0.5], &[1.0, -1.0], SolveMethod::Newton);
        assert_eq!(res.epsilon_hat, 0.0);
        assert!(res.root_found);
        assert_eq!(res.score_at_solution, 0.0);
    }

    #[test]
    fn closed_form_root() {
        // 2 e^{2 eps} = e^{-eps}  =>  eps = -ln(2)/3, w* = (1/3, 2/3).
        for method in [SolveMethod::Bisection, SolveMethod::Newton, SolveMethod::GradientDescent { eta: 0.5, max_iters: 10_000 }] {
            let res = solve(&[0.5, 0.5], &[2.0, -1.0], method);
            assert!(res.root_found, "{method:?}");
            assert_abs_diff_eq!(res.epsilon_hat, -(2f64.ln()) / 3.0, epsilon = 1e-9);
            assert_abs_diff_eq!(res.targeted_weights.as_slice()[0], 1.0 / 3.0, epsilon = 1e-9);
            assert_abs_diff_eq!(res.targeted_weights.as_slice()[1], 2.0 / 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn one_signed_residuals_clamp() {
        let res = solve(&[0.5, 0.5], &[1.0, 2.0], SolveMethod::Bisection);
        let eps_max = 50.0 / 2.0;
        assert_eq!(res.epsilon_hat, -eps_max);
        assert!(res.clamped && !res.root_found);
        assert!(res.score_at_solution >= 1.0);
        let res = solve(&[0.5, 0.5], &[-1.0, -2.0], SolveMethod::Newton);
        assert_eq!(res.epsilon_hat, eps_max);
        assert!(res.clamped && res.score_at_solution <= -1.0);
    }

    #[test]
    fn zero_residuals_are_a_no_op() {
        let w0 = w(&[0.1, 0.2, 0.7]);
        let r = [0.0; 3];
        let scores = TiltScores { values: r.to_vec(), mode: TiltMode::ResidualScore };
        let res = targeted_weights(&w0, &r, &scores, &TargetingConfig::default()).unwrap();
        assert_eq!(res.epsilon_hat, 0.0);
        assert_eq!(res.targeted_weights, w0);
    }

    #[test]
    fn single_control_cannot_move() {
        let res = solve(&[1.0], &[0.7], SolveMethod::Newton);
        assert_eq!(res.targeted_weights.as_slice(), &[1.0]);
        assert!(res.clamped && !res.root_found);
        assert_eq!(res.score_at_solution, 0.7);
    }

    #[test]
    fn invalid_bracket() {
        let scores = TiltScores { values: vec![1.0, -1.0], mode: TiltMode::ResidualScore };
        let cfg = TargetingConfig { eps_max: Some(0.0), ..Default::default() };
        let err = solve_epsilon(&w(&[0.5, 0.5]), &[1.0, -1.0], &scores, &cfg).unwrap_err();
        assert_eq!(err, TargetingError::InvalidBracket(0.0));
    }

    #[test]
    fn centered_mode_runs_fixed_steps() {
        let w0 = w(&[0.5, 0.5]);
        // Residuals rise with the prediction, so f increases along the tilt.
        let preds = [1.0, 3.0];
        let outcomes = [0.5, 4.0];
        let r: Vec<f64> = outcomes.iter().zip(&preds).map(|(y, m)| y - m).collect();
        let scores = TiltScores::centered(&preds, &w0).unwrap();
        let cfg = TargetingConfig { mode: TiltMode::CenteredPrediction, ..Default::default() };
        let res = solve_epsilon(&w0, &r, &scores, &cfg).unwrap();
        assert_eq!(res.iterations, DEFAULT_ROUNDS);
        // Replay the iteration by hand.
        let mut eps = 0.0;
        for _ in 0..DEFAULT_ROUNDS {
            let t = tilt_weights(&w0, &scores, eps).unwrap();
            eps -= DEFAULT_ETA * score_equation(&t, &r).unwrap();
        }
        assert_abs_diff_eq!(res.epsilon_hat, eps, epsilon = 1e-12);
        assert!(res.root_found);
    }

    #[test]
    fn log_partition_is_convex_with_derivative_f() {
        let w0 = w(&[0.1, 0.4, 0.5]);
        let r = [1.5, -0.5, 0.2];
        let scores = TiltScores { values: r.to_vec(), mode: TiltMode::ResidualScore };
        let h = 1e-5;
        for k in -20..=20 {
            let eps = k as f64 * 0.25;
            let d = (tilt_log_partition(&w0, &r, eps + h) - tilt_log_partition(&w0, &r, eps - h)) / (2.0 * h);
            let f = score_equation(&tilt_weights(&w0, &scores, eps).unwrap(), &r).unwrap();
            assert_abs_diff_eq!(d, f, epsilon = 1e-7);
        }
    }
}
