//! Synthetic panel generators.
//!
//! Each unit draws a covariate vector `x` uniformly from `[0, 10]^p`; outcomes
//! are `Y(x, t) = delta(t) + r(x) + lambda(x, t) + noise` for the linear, hinge
//! and quadratic kinds, and a latent factor model with covariate-driven loadings
//! for the time-varying kind. Time `t` runs over `1..=T`. Unit 0 is the treated
//! unit; no treatment effect is injected, so its untreated draw is the ground
//! truth for the counterfactual.
//!
//! Binary panels min-max normalize the latent continuous panel (global extrema
//! over all units and periods) into success probabilities and draw Bernoulli
//! outcomes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{GroundTruth, OutcomeKind, PanelDataset, PanelError};
use crate::seed::{derive_seed, streams};

#[derive(Debug, Error)]
pub enum DgpError {
    #[error("invalid DGP config: {0}")]
    InvalidConfig(String),
    #[error("latent panel has zero range; cannot min-max normalize")]
    DegenerateRange,
    #[error("binarize expects a continuous panel")]
    AlreadyBinary,
    #[error(transparent)]
    Panel(#[from] PanelError),
}

pub type Result<T> = std::result::Result<T, DgpError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    Linear,
    Hinge,
    Quadratic,
    TimeVarying,
}

impl DgpKind {
    pub const ALL: [DgpKind; 4] = [DgpKind::Linear, DgpKind::Hinge, DgpKind::Quadratic, DgpKind::TimeVarying];

    pub fn name(&self) -> &'static str {
        match self {
            DgpKind::Linear => "linear",
            DgpKind::Hinge => "hinge",
            DgpKind::Quadratic => "quadratic",
            DgpKind::TimeVarying => "time_varying",
        }
    }

    pub fn default_periods(&self) -> usize {
        match self {
            DgpKind::TimeVarying => 100,
            _ => 50,
        }
    }

    pub fn default_noise_sd(&self) -> f64 {
        match self {
            DgpKind::TimeVarying => 0.8,
            _ => 1.0,
        }
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DgpKind {
    type Err = DgpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "linear" => Ok(DgpKind::Linear),
            "hinge" => Ok(DgpKind::Hinge),
            "quadratic" => Ok(DgpKind::Quadratic),
            "time_varying" | "timevarying" => Ok(DgpKind::TimeVarying),
            other => Err(DgpError::InvalidConfig(format!("unknown dgp kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeType {
    #[default]
    Continuous,
    Binary,
}

impl fmt::Display for OutcomeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeType::Continuous => "continuous",
            OutcomeType::Binary => "binary",
        })
    }
}

impl FromStr for OutcomeType {
    type Err = DgpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" => Ok(OutcomeType::Continuous),
            "binary" => Ok(OutcomeType::Binary),
            other => Err(DgpError::InvalidConfig(format!("unknown outcome type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub kind: DgpKind,
    pub n_units: usize,
    /// Number of periods `T`; defaults to 50 (100 for the time-varying kind).
    pub periods: Option<usize>,
    pub p: usize,
    pub covariate_range: (f64, f64),
    pub outcome: OutcomeType,
    pub seed: u64,
    /// Outcome noise standard deviation; defaults to 1 (0.8 for the time-varying kind).
    pub noise_sd: Option<f64>,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            kind: DgpKind::Linear,
            n_units: 5,
            periods: None,
            p: 12,
            covariate_range: (0.0, 10.0),
            outcome: OutcomeType::Continuous,
            seed: 0,
            noise_sd: None,
        }
    }
}

impl DgpConfig {
    pub fn new(kind: DgpKind, outcome: OutcomeType, seed: u64) -> Self {
        DgpConfig { kind, outcome, seed, ..Default::default() }
    }

    pub fn n_periods(&self) -> usize {
        self.periods.unwrap_or_else(|| self.kind.default_periods())
    }

    pub fn noise(&self) -> f64 {
        self.noise_sd.unwrap_or_else(|| self.kind.default_noise_sd())
    }

    /// Short label such as `linear_binary`.
    pub fn label(&self) -> String {
        format!("{}_{}", self.kind, self.outcome)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(DgpError::InvalidConfig(m));
        if self.n_units < 2 {
            return bad(format!("n_units = {} (need >= 2)", self.n_units));
        }
        if self.n_periods() < 2 {
            return bad(format!("periods = {} (need >= 2)", self.n_periods()));
        }
        if self.p < 1 {
            return bad("p must be at least 1".into());
        }
        let (lo, hi) = self.covariate_range;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return bad(format!("covariate_range = [{lo}, {hi}]"));
        }
        let sd = self.noise();
        if !(sd >= 0.0) || !sd.is_finite() {
            return bad(format!("noise_sd = {sd}"));
        }
        Ok(())
    }
}

pub fn positive_part(u: f64) -> f64 {
    u.max(0.0)
}

/// Additive pieces of `Y(x, t)` without noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    pub trend: f64,
    pub unit: f64,
    pub interaction: f64,
}

impl Components {
    pub fn total(&self) -> f64 {
        self.trend + self.unit + self.interaction
    }
}

/// Kink location of the hinge trend.
pub const HINGE_T0: f64 = 10.0;
/// Threshold of the hinge covariate effect.
pub const HINGE_C: f64 = 0.0;

pub fn linear_components(x: &[f64], t: f64) -> Components {
    let s: f64 = x.iter().sum();
    Components { trend: 0.05 * t, unit: 0.02 * s, interaction: 0.1 * s + 0.05 * t + 0.004 * s * t }
}

pub fn hinge_components(x: &[f64], t: f64) -> Components {
    let s: f64 = x.iter().sum();
    let m = s / x.len() as f64;
    let kink = positive_part(t - HINGE_T0);
    Components {
        trend: 0.03 * t + 0.04 * kink,
        unit: 0.1 * s + 0.15 * positive_part(s - HINGE_C),
        interaction: 0.1 * m + 0.04 * t + 0.02 * m * kink,
    }
}

/// The unit term writes a bare `x_i` next to the covariate mean; it is read as
/// the centered per-coordinate term summed over coordinates.
pub fn quadratic_components(x: &[f64], t: f64) -> Components {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let unit = x.iter().map(|xi| 0.1 * (xi - m) + 0.03 * (xi - m).powi(2)).sum();
    Components {
        trend: 0.04 * t + 0.002 * t * t,
        unit,
        interaction: 0.1 * m + 0.05 * t + 0.01 * m * t + 0.005 * m * m,
    }
}

pub fn eval_linear(x: &[f64], t: f64) -> f64 {
    linear_components(x, t).total()
}

pub fn eval_hinge(x: &[f64], t: f64) -> f64 {
    hinge_components(x, t).total()
}

pub fn eval_quadratic(x: &[f64], t: f64) -> f64 {
    quadratic_components(x, t).total()
}

/// `tau_t = (t - 1) / (T - 1)`.
pub fn rescaled_time(t: f64, periods: usize) -> f64 {
    (t - 1.0) / (periods as f64 - 1.0)
}

/// Common trend `2 + 18 tau + 14 tau^2`.
pub fn tv_trend(tau: f64) -> f64 {
    2.0 + 18.0 * tau + 14.0 * tau * tau
}

/// Factor basis `(tau - 1/2, (tau - 1/2)^2 - 1/12, sin(2 pi tau))`.
pub fn time_basis(tau: f64) -> [f64; 3] {
    let c = tau - 0.5;
    [c, c * c - 1.0 / 12.0, (2.0 * PI * tau).sin()]
}

const TV_INTERCEPT: [f64; 3] = [0.6, -0.4, 0.3];
const TV_THETA: [[f64; 9]; 3] = [
    [1.0, -0.6, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.2, -0.5, 0.3, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.8, 0.4, -0.7],
];
const TV_LOADING_SCALE: [f64; 3] = [2.0, 4.0, 1.0];
const SD_GUARD: f64 = 1e-6;

/// Population standard deviation.
pub fn population_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Unit intercepts and factor loadings of the time-varying kind.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeVaryingState {
    /// Standardized covariates, one row per unit.
    pub z: Vec<Vec<f64>>,
    /// `mu_i = z_i . a + 0.8 xi_i`.
    pub intercepts: Vec<f64>,
    /// Loadings before the column rescaling.
    pub raw_loadings: Vec<[f64; 3]>,
    /// Rescaled loadings, including the shift of the treated unit's second loading.
    pub loadings: Vec<[f64; 3]>,
    pub periods: usize,
}

impl TimeVaryingState {
    /// `covariates` is `N x p`; `xi` holds one standard normal draw per unit.
    pub fn new(covariates: &DMatrix<f64>, xi: &[f64], periods: usize) -> Self {
        let (n, p) = covariates.shape();
        let cols: Vec<Vec<f64>> = (0..p).map(|k| covariates.column(k).iter().copied().collect()).collect();
        let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
        let sds: Vec<f64> = cols.iter().map(|c| population_sd(c)).collect();
        let z: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..p).map(|k| (covariates[(i, k)] - means[k]) / (sds[k] + SD_GUARD)).collect())
            .collect();
        let intercepts: Vec<f64> = z
            .iter()
            .zip(xi)
            .map(|(zi, x)| zi.iter().zip(TV_INTERCEPT).map(|(a, b)| a * b).sum::<f64>() + 0.8 * x)
            .collect();
        let raw_loadings: Vec<[f64; 3]> = z
            .iter()
            .map(|zi| {
                let mut b = [0.0; 3];
                for (c, row) in TV_THETA.iter().enumerate() {
                    b[c] = zi.iter().zip(row).map(|(a, th)| a * th).sum();
                }
                b
            })
            .collect();
        let mut loadings = raw_loadings.clone();
        for c in 0..3 {
            let col: Vec<f64> = raw_loadings.iter().map(|b| b[c]).collect();
            let sd = population_sd(&col);
            for b in loadings.iter_mut() {
                b[c] = TV_LOADING_SCALE[c] * b[c] / (sd + SD_GUARD);
            }
        }
        loadings[0][1] += 2.0;
        TimeVaryingState { z, intercepts, raw_loadings, loadings, periods }
    }

    /// Noiseless outcome of `unit` at time `t` (1-based).
    pub fn eval(&self, unit: usize, t: f64) -> f64 {
        let tau = rescaled_time(t, self.periods);
        let f = time_basis(tau);
        let b = &self.loadings[unit];
        self.intercepts[unit] + tv_trend(tau) + b[0] * f[0] + b[1] * f[1] + b[2] * f[2]
    }
}

/// Every draw behind a generated continuous panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub covariates: DMatrix<f64>,
    /// Noiseless outcomes, `N x T`.
    pub mean: DMatrix<f64>,
    pub noise: DMatrix<f64>,
    /// `mean + noise`.
    pub latent: DMatrix<f64>,
    pub time_varying: Option<TimeVaryingState>,
}

/// Draws covariates, factor intercepts and noise in that order from one seeded stream.
pub fn simulate(cfg: &DgpConfig) -> Result<Simulation> {
    cfg.check()?;
    let n = cfg.n_units;
    let t = cfg.n_periods();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, streams::DGP_COVARIATES));
    let (lo, hi) = cfg.covariate_range;
    let mut covariates = DMatrix::zeros(n, cfg.p);
    for i in 0..n {
        for k in 0..cfg.p {
            covariates[(i, k)] = rng.random_range(lo..hi);
        }
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let time_varying = (cfg.kind == DgpKind::TimeVarying).then(|| {
        let xi: Vec<f64> = (0..n).map(|_| std_normal.sample(&mut rng)).collect();
        TimeVaryingState::new(&covariates, &xi, t)
    });
    let sd = cfg.noise();
    let mut noise = DMatrix::zeros(n, t);
    for i in 0..n {
        for j in 0..t {
            noise[(i, j)] = sd * std_normal.sample(&mut rng);
        }
    }
    let mean = DMatrix::from_fn(n, t, |i, j| {
        let x: Vec<f64> = covariates.row(i).iter().copied().collect();
        let time = (j + 1) as f64;
        match cfg.kind {
            DgpKind::Linear => eval_linear(&x, time),
            DgpKind::Hinge => eval_hinge(&x, time),
            DgpKind::Quadratic => eval_quadratic(&x, time),
            DgpKind::TimeVarying => time_varying.as_ref().expect("state").eval(i, time),
        }
    });
    let latent = &mean + &noise;
    Ok(Simulation { covariates, mean, noise, latent, time_varying })
}

/// Generates a panel with treatment time `t0` (number of pre-treatment periods).
pub fn gen_panel(cfg: &DgpConfig, t0: usize) -> Result<PanelDataset> {
    let sim = simulate(cfg)?;
    let t = cfg.n_periods();
    if t0 < 1 || t0 >= t {
        return Err(DgpError::InvalidConfig(format!("t0 = {t0} must lie in [1, {})", t)));
    }
    let truth = GroundTruth {
        realized: sim.latent.row(0).iter().copied().collect(),
        mean: sim.mean.row(0).iter().copied().collect(),
    };
    let panel = PanelDataset::new(sim.latent, sim.covariates, 0, t0, OutcomeKind::continuous())?
        .with_ground_truth(truth)?;
    match cfg.outcome {
        OutcomeType::Continuous => Ok(panel),
        OutcomeType::Binary => binarize(&panel, derive_seed(cfg.seed, streams::DGP_BINARIZE)),
    }
}

/// Min-max normalizes the whole panel into probabilities and draws Bernoulli outcomes.
pub fn binarize(panel: &PanelDataset, seed: u64) -> Result<PanelDataset> {
    if panel.kind().is_binary() {
        return Err(DgpError::AlreadyBinary);
    }
    let y = panel.outcomes();
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(DgpError::DegenerateRange);
    }
    let probs = y.map(|v| min_max(v, lo, hi));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, t) = y.shape();
    let mut draws = DMatrix::zeros(n, t);
    for i in 0..n {
        for j in 0..t {
            let u: f64 = rng.random();
            draws[(i, j)] = if u < probs[(i, j)] { 1.0 } else { 0.0 };
        }
    }
    let treated = panel.treated();
    let truth = GroundTruth {
        realized: draws.row(treated).iter().copied().collect(),
        mean: probs.row(treated).iter().copied().collect(),
    };
    Ok(PanelDataset::new(draws, panel.covariates().clone(), treated, panel.t0(), OutcomeKind::Binary)?
        .with_labels(panel.unit_ids().to_vec(), panel.time_labels().to_vec())?
        .with_ground_truth(truth)?)
}

/// `(v - lo) / (hi - lo)`, clamped into `[0, 1]`.
pub fn min_max(v: f64, lo: f64, hi: f64) -> f64 {
    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
}
