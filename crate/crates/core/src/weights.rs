//! Simplex-constrained matching of the treated unit's pre-treatment features.
//!
//! Initial synthetic-control weights solve
//!
//! ```text
//! min_{w in simplex}  || X_1 - sum_j w_j X_j ||_V^2 + lambda * ||w||^2
//! ```
//!
//! by projected gradient descent. The projection is the exact
//! sort-and-threshold Euclidean projection onto the probability simplex.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::FeatureVector;

/// Tolerance on `|sum(w) - 1|` for a valid weight vector.
pub const SUM_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum WeightsError {
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("no control units to match against")]
    NoControls,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("not a simplex vector: {0}")]
    NotOnSimplex(String),
    #[error("invalid matching config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, WeightsError>;

/// Nonnegative weights over the controls that sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(WeightsError::NotOnSimplex("empty weight vector".into()));
        }
        if let Some(j) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(WeightsError::NotOnSimplex(format!("w[{j}] = {}", w[j])));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(WeightsError::NotOnSimplex(format!("weights sum to {s}")));
        }
        Ok(SimplexWeights(w))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform weights need at least one entry");
        SimplexWeights(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut w = vec![0.0; n];
        w[at] = 1.0;
        SimplexWeights(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// The matrix `V` of the matching norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Importance {
    #[default]
    Identity,
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `1 / L` with `L` the largest Hessian eigenvalue.
    #[default]
    Lipschitz,
    Fixed(f64),
    /// Backtracking along the projection arc.
    LineSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub importance: Importance,
    pub ridge_lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub step: StepRule,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            importance: Importance::Identity,
            ridge_lambda: 0.0,
            max_iters: 10_000,
            tol: 1e-10,
            step: StepRule::Lipschitz,
        }
    }
}

impl MatchConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.ridge_lambda >= 0.0) || !self.ridge_lambda.is_finite() {
            return Err(WeightsError::InvalidConfig(format!("ridge_lambda = {}", self.ridge_lambda)));
        }
        if self.max_iters == 0 {
            return Err(WeightsError::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(WeightsError::InvalidConfig(format!("tol = {}", self.tol)));
        }
        if let StepRule::Fixed(s) = self.step {
            if !(s > 0.0) || !s.is_finite() {
                return Err(WeightsError::InvalidConfig(format!("step = {s}")));
            }
        }
        if let Importance::Diagonal(v) = &self.importance {
            if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(WeightsError::InvalidConfig("importance entries must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(WeightsError::NonFiniteInput("empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(WeightsError::NonFiniteInput("vector to project".into()));
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    Ok(SimplexWeights(w))
}

/// `sum_j w_j values_j`.
pub fn weighted_average(w: &SimplexWeights, values: &[f64]) -> Result<f64> {
    if w.len() != values.len() {
        return Err(WeightsError::LengthMismatch { expected: w.len(), got: values.len() });
    }
    Ok(w.0.iter().zip(values).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchSolution {
    pub weights: SimplexWeights,
    /// `|| X_1 - sum_j w_j X_j ||_V^2` at the solution, without the ridge term.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Full penalized objective after each iteration (starting with the initial point).
    pub history: Vec<f64>,
}

struct Problem<'a> {
    target: Vec<f64>,
    donors: Vec<Vec<f64>>,
    v: Option<&'a [f64]>,
    lambda: f64,
}

impl Problem<'_> {
    fn v(&self, d: usize) -> f64 {
        self.v.map_or(1.0, |v| v[d])
    }

    fn residual(&self, w: &[f64]) -> Vec<f64> {
        let mut r = self.target.clone();
        for (wj, xj) in w.iter().zip(&self.donors) {
            if *wj != 0.0 {
                r.iter_mut().zip(xj).for_each(|(ri, xi)| *ri -= wj * xi);
            }
        }
        r
    }

    fn fit(&self, r: &[f64]) -> f64 {
        r.iter().enumerate().map(|(d, x)| self.v(d) * x * x).sum()
    }

    fn penalized(&self, w: &[f64], r: &[f64]) -> f64 {
        self.fit(r) + self.lambda * w.iter().map(|x| x * x).sum::<f64>()
    }

    fn gradient(&self, w: &[f64], r: &[f64]) -> Vec<f64> {
        self.donors
            .iter()
            .zip(w)
            .map(|(xj, wj)| {
                let dot: f64 = xj.iter().zip(r).enumerate().map(|(d, (x, ri))| self.v(d) * x * ri).sum();
                -2.0 * dot + 2.0 * self.lambda * wj
            })
            .collect()
    }

    /// Largest eigenvalue of the Hessian `2 (D V D^T + lambda I)`.
    fn lipschitz(&self) -> f64 {
        let n = self.donors.len();
        let gram = |a: usize, b: usize| -> f64 {
            (0..self.target.len()).map(|d| self.v(d) * self.donors[a][d] * self.donors[b][d]).sum()
        };
        let top = nalgebra::DMatrix::from_fn(n, n, gram)
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |m, &e| m.max(e));
        2.0 * (top + self.lambda)
    }
}

/// Projected-gradient solve for the initial synthetic-control weights.
pub fn solve_sc_weights(
    x_treated: &FeatureVector,
    x_controls: &[FeatureVector],
    cfg: &MatchConfig,
) -> Result<MatchSolution> {
    cfg.check()?;
    if x_controls.is_empty() {
        return Err(WeightsError::NoControls);
    }
    let dim = x_treated.len();
    for x in x_controls {
        if x.len() != dim {
            return Err(WeightsError::LengthMismatch { expected: dim, got: x.len() });
        }
    }
    if x_treated.as_slice().iter().chain(x_controls.iter().flat_map(|x| x.as_slice())).any(|v| !v.is_finite()) {
        return Err(WeightsError::NonFiniteInput("feature vectors".into()));
    }
    let v = match &cfg.importance {
        Importance::Identity => None,
        Importance::Diagonal(v) => {
            if v.len() != dim {
                return Err(WeightsError::LengthMismatch { expected: dim, got: v.len() });
            }
            Some(v.as_slice())
        }
    };

    // On the simplex, subtracting the donor mean from every vector leaves the
    // residual unchanged and shrinks the Hessian's common-mode eigenvalue.
    let n = x_controls.len();
    let center: Vec<f64> =
        (0..dim).map(|d| x_controls.iter().map(|x| x.0[d]).sum::<f64>() / n as f64).collect();
    let problem = Problem {
        target: x_treated.0.iter().zip(&center).map(|(a, c)| a - c).collect(),
        donors: x_controls.iter().map(|x| x.0.iter().zip(&center).map(|(a, c)| a - c).collect()).collect(),
        v,
        lambda: cfg.ridge_lambda,
    };

    let mut w = vec![1.0 / n as f64; n];
    let mut r = problem.residual(&w);
    let mut obj = problem.penalized(&w, &r);
    let mut history = vec![obj];
    let mut converged = false;
    let mut iterations = 0;

    let lipschitz = problem.lipschitz();
    if n == 1 || lipschitz <= 0.0 {
        // Single donor, or all donors coincide with the target after centering.
        let fit = problem.fit(&r);
        return Ok(MatchSolution { weights: SimplexWeights(w), objective: fit, iterations: 0, converged: true, history });
    }
    let mut step = match cfg.step {
        StepRule::Lipschitz => 1.0 / lipschitz,
        StepRule::Fixed(s) => s,
        StepRule::LineSearch => 2.0 / lipschitz,
    };

    while iterations < cfg.max_iters {
        iterations += 1;
        let g = problem.gradient(&w, &r);
        let (next_w, next_r, next_obj) = match cfg.step {
            StepRule::LineSearch => {
                let mut s = step * 2.0;
                loop {
                    let cand = project_simplex(&axpy(&w, -s, &g))?.0;
                    let cand_r = problem.residual(&cand);
                    let cand_obj = problem.penalized(&cand, &cand_r);
                    let diff: Vec<f64> = cand.iter().zip(&w).map(|(a, b)| a - b).collect();
                    let model = obj
                        + g.iter().zip(&diff).map(|(a, b)| a * b).sum::<f64>()
                        + diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * s);
                    if cand_obj <= model || s < 1e-20 {
                        step = s;
                        break (cand, cand_r, cand_obj);
                    }
                    s *= 0.5;
                }
            }
            _ => {
                let cand = project_simplex(&axpy(&w, -step, &g))?.0;
                let cand_r = problem.residual(&cand);
                let cand_obj = problem.penalized(&cand, &cand_r);
                (cand, cand_r, cand_obj)
            }
        };
        if next_obj > obj {
            // Rounding-level increase at the optimum; keep the better point.
            converged = true;
            break;
        }
        let moved = next_w.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        w = next_w;
        r = next_r;
        obj = next_obj;
        history.push(obj);
        if moved <= cfg.tol {
            converged = true;
            break;
        }
    }

    let fit = problem.fit(&r);
    Ok(MatchSolution { weights: SimplexWeights(w), objective: fit, iterations, converged, history })
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}
