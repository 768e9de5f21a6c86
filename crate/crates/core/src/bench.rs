//! Benchmark harness: RMSE tables over generators x horizons x estimators x
//! seeds, a bound-violation report, and initial-vs-targeted weight snapshots.
//!
//! For every (generator, seed) cell one panel is simulated and every
//! estimator sees that same panel. For a horizon `h` the treatment time is
//! `t0 = T - h` and the RMSE runs over the `h` post-treatment periods.
//! Cells are independent jobs; the report is assembled in job order, so the
//! output does not depend on the worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dgp::{gen_panel, DgpConfig, DgpError, DgpKind, OutcomeType};
use crate::estimators::{estimate_cached, EstimatorConfig, EstimatorError, EstimatorKind, EstimatorResult, FitCache};
use crate::panel::PanelDataset;
use crate::seed::{derive_seed, streams};
use crate::svg;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("length mismatch: {0} estimates vs {1} truths")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Dgp(#[from] DgpError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruthMode {
    /// The realized untreated draw of the treated unit.
    #[default]
    Realized,
    /// The noiseless mean (success probability for binary panels).
    Noiseless,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub dgps: Vec<DgpConfig>,
    pub estimators: Vec<EstimatorConfig>,
    pub horizons: Vec<usize>,
    pub n_seeds: usize,
    pub ground_truth: GroundTruthMode,
    pub workers: usize,
}

impl Default for BenchPlan {
    /// Every generator with continuous and binary outcomes, the four
    /// estimators with default settings, horizons 1, 5, 10 and five seeds.
    fn default() -> Self {
        let dgps = [OutcomeType::Continuous, OutcomeType::Binary]
            .into_iter()
            .flat_map(|o| DgpKind::ALL.into_iter().map(move |k| DgpConfig::new(k, o, 0)))
            .collect();
        BenchPlan {
            dgps,
            estimators: EstimatorKind::ALL.into_iter().map(EstimatorConfig::new).collect(),
            horizons: vec![1, 5, 10],
            n_seeds: 5,
            ground_truth: GroundTruthMode::Realized,
            workers: 1,
        }
    }
}

impl BenchPlan {
    pub fn check(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(BenchError::InvalidPlan("n_seeds must be at least 1".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(BenchError::InvalidPlan("horizons must be nonempty and positive".into()));
        }
        if self.dgps.is_empty() || self.estimators.is_empty() {
            return Err(BenchError::InvalidPlan("need at least one generator and one estimator".into()));
        }
        let max_h = *self.horizons.iter().max().expect("nonempty");
        for d in &self.dgps {
            d.check()?;
            if max_h >= d.n_periods() {
                return Err(BenchError::InvalidPlan(format!(
                    "horizon {max_h} leaves no pre-treatment period for {} (T = {})",
                    d.label(),
                    d.n_periods()
                )));
            }
        }
        Ok(())
    }

    /// Seed of run `k` for generator `dgp`.
    pub fn run_seed(dgp: &DgpConfig, k: usize) -> u64 {
        derive_seed(dgp.seed, k as u64)
    }
}

/// `sqrt(mean((est - truth)^2))`.
pub fn rmse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(BenchError::LengthMismatch(estimates.len(), truths.len()));
    }
    if estimates.is_empty() {
        return Err(BenchError::Empty);
    }
    let mse = estimates.iter().zip(truths).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / estimates.len() as f64;
    Ok(mse.sqrt())
}

/// Percentages of per-horizon counterfactuals above and below the bounds.
/// With `bounds = None` each estimate is checked against its own recorded bounds.
pub fn violation_rate(results: &[EstimatorResult], bounds: Option<(f64, f64)>) -> Result<(f64, f64)> {
    let cells: Vec<_> = results.iter().flat_map(|r| &r.horizons).collect();
    if cells.is_empty() {
        return Err(BenchError::Empty);
    }
    let (mut upper, mut lower) = (0usize, 0usize);
    for h in &cells {
        let (a, b) = bounds.unwrap_or(h.bounds);
        if h.psi_hat > b {
            upper += 1;
        }
        if h.psi_hat < a {
            lower += 1;
        }
    }
    let n = cells.len() as f64;
    Ok((100.0 * upper as f64 / n, 100.0 * lower as f64 / n))
}

/// Mean and standard error (`sd / sqrt(n)`, zero for a single value).
pub fn mean_and_stderr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseCell {
    pub dgp: DgpKind,
    pub outcome: OutcomeType,
    pub horizon: usize,
    pub estimator: EstimatorKind,
    /// RMSE per seed; `None` where the estimator failed.
    pub per_seed: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub errors: Vec<String>,
}

impl RmseCell {
    pub fn n_ok(&self) -> usize {
        self.per_seed.iter().flatten().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationCell {
    pub dgp: DgpKind,
    pub outcome: OutcomeType,
    pub estimator: EstimatorKind,
    pub upper_pct: f64,
    pub lower_pct: f64,
    pub n_estimates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub run: String,
    pub control_ids: Vec<String>,
    pub initial: Vec<f64>,
    pub targeted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySnapshot {
    pub run: String,
    pub t0: usize,
    pub treated: Vec<f64>,
    pub controls: Vec<Vec<f64>>,
    /// `(estimator label, [(period, psi_hat)])`.
    pub counterfactuals: Vec<(String, Vec<(usize, f64)>)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rmse_table: Vec<RmseCell>,
    pub violation_table: Vec<ViolationCell>,
    pub weight_snapshots: Vec<WeightSnapshot>,
    pub trajectories: Vec<TrajectorySnapshot>,
    /// `(dgp label, seed index, run seed)` for every job.
    pub seeds: Vec<(String, usize, u64)>,
}

impl BenchReport {
    pub fn cell(&self, dgp: DgpKind, outcome: OutcomeType, horizon: usize, estimator: EstimatorKind) -> Option<&RmseCell> {
        self.rmse_table
            .iter()
            .find(|c| c.dgp == dgp && c.outcome == outcome && c.horizon == horizon && c.estimator == estimator)
    }

    pub fn violations(&self, dgp: DgpKind, outcome: OutcomeType, estimator: EstimatorKind) -> Option<&ViolationCell> {
        self.violation_table.iter().find(|c| c.dgp == dgp && c.outcome == outcome && c.estimator == estimator)
    }
}

/// Signature of the per-panel estimator hook used by [`run_bench_with`].
pub type Runner = dyn Fn(&PanelDataset, &EstimatorConfig, &mut FitCache) -> std::result::Result<EstimatorResult, EstimatorError>
    + Sync;

struct JobOutput {
    /// `[horizon][estimator]`.
    results: Vec<Vec<std::result::Result<(EstimatorResult, f64), String>>>,
    run_seed: u64,
    control_ids: Vec<String>,
    panel: PanelDataset,
}

pub fn run_bench(plan: &BenchPlan) -> Result<BenchReport> {
    run_bench_with(plan, &estimate_cached)
}

/// [`run_bench`] with a custom estimator hook.
pub fn run_bench_with(plan: &BenchPlan, runner: &Runner) -> Result<BenchReport> {
    plan.check()?;
    let jobs: Vec<(usize, usize)> =
        (0..plan.dgps.len()).flat_map(|d| (0..plan.n_seeds).map(move |k| (d, k))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let outputs: Vec<Result<JobOutput>> =
        pool.install(|| jobs.par_iter().map(|&(d, k)| run_job(plan, d, k, runner)).collect());
    let outputs: Vec<JobOutput> = outputs.into_iter().collect::<Result<_>>()?;
    Ok(assemble(plan, &jobs, &outputs))
}

fn run_job(plan: &BenchPlan, d: usize, k: usize, runner: &Runner) -> Result<JobOutput> {
    let base = &plan.dgps[d];
    let run_seed = BenchPlan::run_seed(base, k);
    let dgp = DgpConfig { seed: run_seed, ..base.clone() };
    let t = dgp.n_periods();
    let max_h = *plan.horizons.iter().max().expect("checked");
    let panel = gen_panel(&dgp, t - max_h)?;
    let mut results = Vec::with_capacity(plan.horizons.len());
    for &h in &plan.horizons {
        let data = panel.with_t0(t - h).map_err(DgpError::from)?;
        let truth = truth_slice(&data, plan.ground_truth);
        let mut cache = FitCache::new();
        let row = plan
            .estimators
            .iter()
            .map(|cfg| {
                let mut cfg = cfg.clone();
                cfg.horizons = None;
                cfg.regressor.seed = derive_seed(run_seed.wrapping_add(cfg.regressor.seed), streams::BENCH_REGRESSOR);
                let res = runner(&data, &cfg, &mut cache).map_err(|e| e.to_string())?;
                let est: Vec<f64> = res.horizons.iter().map(|h| h.psi_hat).collect();
                let err = rmse(&est, &truth).map_err(|e| e.to_string())?;
                Ok((res, err))
            })
            .collect();
        results.push(row);
    }
    let control_ids = panel.controls().into_iter().map(|j| panel.unit_ids()[j].clone()).collect();
    Ok(JobOutput { results, run_seed, control_ids, panel })
}

fn truth_slice(data: &PanelDataset, mode: GroundTruthMode) -> Vec<f64> {
    match data.ground_truth() {
        Some(gt) => {
            let (realized, mean) = gt.post(data.t0());
            match mode {
                GroundTruthMode::Realized => realized.to_vec(),
                GroundTruthMode::Noiseless => mean.to_vec(),
            }
        }
        None => data.treated_trajectory()[data.t0()..].to_vec(),
    }
}

fn run_label(dgp: &DgpConfig, k: usize) -> String {
    format!("{}_seed{}", dgp.label(), k)
}

fn assemble(plan: &BenchPlan, jobs: &[(usize, usize)], outputs: &[JobOutput]) -> BenchReport {
    let mut report = BenchReport::default();
    for (&(d, k), out) in jobs.iter().zip(outputs) {
        report.seeds.push((plan.dgps[d].label(), k, out.run_seed));
    }
    for (d, dgp) in plan.dgps.iter().enumerate() {
        let mine: Vec<&JobOutput> =
            jobs.iter().zip(outputs).filter(|((dd, _), _)| *dd == d).map(|(_, o)| o).collect();
        for (hi, &h) in plan.horizons.iter().enumerate() {
            for (ei, cfg) in plan.estimators.iter().enumerate() {
                let mut per_seed = Vec::with_capacity(mine.len());
                let mut errors = Vec::new();
                for (k, out) in mine.iter().enumerate() {
                    match &out.results[hi][ei] {
                        Ok((_, e)) => per_seed.push(Some(*e)),
                        Err(msg) => {
                            per_seed.push(None);
                            errors.push(format!("seed {k}: {msg}"));
                        }
                    }
                }
                let ok: Vec<f64> = per_seed.iter().flatten().copied().collect();
                let stats = mean_and_stderr(&ok);
                report.rmse_table.push(RmseCell {
                    dgp: dgp.kind,
                    outcome: dgp.outcome,
                    horizon: h,
                    estimator: cfg.kind,
                    per_seed,
                    mean: stats.map(|s| s.0),
                    stderr: stats.map(|s| s.1),
                    errors,
                });
            }
        }
        for (ei, cfg) in plan.estimators.iter().enumerate() {
            let results: Vec<EstimatorResult> = mine
                .iter()
                .flat_map(|out| out.results.iter().filter_map(move |row| row[ei].as_ref().ok().map(|(r, _)| r.clone())))
                .collect();
            let n_estimates = results.iter().map(|r| r.horizons.len()).sum();
            let (upper_pct, lower_pct) = violation_rate(&results, None).unwrap_or((0.0, 0.0));
            report.violation_table.push(ViolationCell {
                dgp: dgp.kind,
                outcome: dgp.outcome,
                estimator: cfg.kind,
                upper_pct,
                lower_pct,
                n_estimates,
            });
        }
        for (k, out) in mine.iter().enumerate() {
            snapshot_run(plan, &run_label(dgp, k), out, &mut report);
        }
    }
    report
}

fn snapshot_run(plan: &BenchPlan, run: &str, out: &JobOutput, report: &mut BenchReport) {
    // Weights at the first post-treatment period of the shortest horizon.
    let first_h = plan.horizons.iter().enumerate().min_by_key(|(_, h)| **h).map(|(i, _)| i).expect("horizons");
    if let Some(tsc) = plan.estimators.iter().position(|c| c.kind == EstimatorKind::Tsc) {
        if let Ok((res, _)) = &out.results[first_h][tsc] {
            if let (Some(w0), Some(first)) = (&res.initial_weights, res.horizons.first()) {
                if let Some(ws) = &first.weights_used {
                    report.weight_snapshots.push(WeightSnapshot {
                        run: run.to_string(),
                        control_ids: out.control_ids.clone(),
                        initial: w0.as_slice().to_vec(),
                        targeted: ws.as_slice().to_vec(),
                    });
                }
            }
        }
    }
    // Trajectories from the longest horizon.
    let (long_h, &h) = plan.horizons.iter().enumerate().max_by_key(|(_, h)| **h).expect("horizons");
    let panel = &out.panel;
    let t0 = panel.n_periods() - h;
    let counterfactuals = plan
        .estimators
        .iter()
        .zip(&out.results[long_h])
        .filter_map(|(cfg, r)| {
            r.as_ref().ok().map(|(res, _)| {
                (cfg.kind.to_string(), res.horizons.iter().map(|e| (e.period, e.psi_hat)).collect())
            })
        })
        .collect();
    report.trajectories.push(TrajectorySnapshot {
        run: run.to_string(),
        t0,
        treated: panel.treated_trajectory(),
        controls: panel.controls().into_iter().map(|j| panel.outcomes().row(j).iter().copied().collect()).collect(),
        counterfactuals,
    });
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn rmse_table_csv(report: &BenchReport) -> String {
    let mut s = String::from("dgp,outcome,horizon,estimator,mean_rmse,stderr,n_seeds,n_failed,errors\n");
    for c in &report.rmse_table {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            c.dgp,
            c.outcome,
            c.horizon,
            c.estimator.short_name(),
            opt(c.mean),
            opt(c.stderr),
            c.n_ok(),
            c.per_seed.len() - c.n_ok(),
            csv_field(&c.errors.join("; "))
        );
    }
    s
}

pub fn violations_csv(report: &BenchReport) -> String {
    let mut s = String::from("dgp,outcome,estimator,upper_pct,lower_pct,n_estimates\n");
    for c in &report.violation_table {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            c.dgp,
            c.outcome,
            c.estimator.short_name(),
            c.upper_pct,
            c.lower_pct,
            c.n_estimates
        );
    }
    s
}

pub fn weights_csv(snap: &WeightSnapshot) -> String {
    let mut s = String::from("control_id,initial_weight,targeted_weight\n");
    for ((id, a), b) in snap.control_ids.iter().zip(&snap.initial).zip(&snap.targeted) {
        let _ = writeln!(s, "{},{a},{b}", csv_field(id));
    }
    s
}

/// Formats with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    // Take the magnitude after rounding so 0.9999999 becomes 1.00000, not 1.000000.
    let sci = format!("{x:.5e}");
    let mag: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        sci
    }
}

/// Plain-text rendering of the RMSE and violation tables.
pub fn render_tables(report: &BenchReport) -> String {
    let mut s = String::new();
    let mut groups: Vec<(OutcomeType, usize)> = Vec::new();
    for c in &report.rmse_table {
        if !groups.contains(&(c.outcome, c.horizon)) {
            groups.push((c.outcome, c.horizon));
        }
    }
    let mut kinds: Vec<DgpKind> = Vec::new();
    let mut ests: Vec<EstimatorKind> = Vec::new();
    for c in &report.rmse_table {
        if !kinds.contains(&c.dgp) {
            kinds.push(c.dgp);
        }
        if !ests.contains(&c.estimator) {
            ests.push(c.estimator);
        }
    }
    for outcome in [OutcomeType::Continuous, OutcomeType::Binary] {
        let hs: Vec<usize> = groups.iter().filter(|g| g.0 == outcome).map(|g| g.1).collect();
        if hs.is_empty() {
            continue;
        }
        let _ = writeln!(s, "RMSE ({outcome} outcomes), mean +/- standard error");
        let _ = write!(s, "{:<8} {:<14}", "horizon", "estimator");
        for k in &kinds {
            let _ = write!(s, " {:>24}", k.name());
        }
        s.push('\n');
        for h in hs {
            for e in &ests {
                let _ = write!(s, "{:<8} {:<14}", h, e.to_string());
                for k in &kinds {
                    let cell = report.cell(*k, outcome, h, *e);
                    let txt = match cell.and_then(|c| c.mean.zip(c.stderr)) {
                        // A single successful seed has no spread to report.
                        Some((m, _)) if cell.is_some_and(|c| c.n_ok() == 1) => format!("{} (n=1)", sig6(m)),
                        Some((m, se)) => format!("{} +/- {}", sig6(m), sig6(se)),
                        None if cell.is_some() => "failed".to_string(),
                        None => "-".to_string(),
                    };
                    let _ = write!(s, " {txt:>24}");
                }
                s.push('\n');
            }
        }
        s.push('\n');
    }
    let _ = writeln!(s, "Out-of-bounds counterfactuals (% above / % below)");
    for v in &report.violation_table {
        let _ = writeln!(
            s,
            "{:<24} {:<14} {:>8}% {:>8}%",
            format!("{}_{}", v.dgp, v.outcome),
            v.estimator.to_string(),
            format!("{:.2}", v.upper_pct),
            format!("{:.2}", v.lower_pct)
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportOptions {
    pub svg: bool,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions { svg: true }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}

/// Writes `rmse_table.csv`, `violations.csv`, `weights_{run}.csv`, `tables.txt`
/// and, when enabled, `weights_{run}.svg` and `trajectory_{run}.svg`.
pub fn export_report(report: &BenchReport, dir: impl AsRef<Path>, options: ExportOptions) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| BenchError::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    let mut put = |name: String, contents: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    put("rmse_table.csv".into(), rmse_table_csv(report))?;
    put("violations.csv".into(), violations_csv(report))?;
    put("tables.txt".into(), render_tables(report))?;
    for snap in &report.weight_snapshots {
        put(format!("weights_{}.csv", snap.run), weights_csv(snap))?;
        if options.svg {
            put(
                format!("weights_{}.svg", snap.run),
                svg::weight_bars(&snap.control_ids, &snap.initial, &snap.targeted, &snap.run),
            )?;
        }
    }
    if options.svg {
        for tr in &report.trajectories {
            put(
                format!("trajectory_{}.svg", tr.run),
                svg::trajectory(&tr.treated, &tr.controls, &tr.counterfactuals, tr.t0, &tr.run),
            )?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[3.0], &[0.0]).unwrap(), 3.0);
        assert!(matches!(rmse(&[], &[]), Err(BenchError::Empty)));
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(BenchError::LengthMismatch(1, 2))));
    }

    #[test]
    fn stderr_definition() {
        assert_eq!(mean_and_stderr(&[4.0]), Some((4.0, 0.0)));
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((se - sd / 2.0).abs() < 1e-15);
        assert_eq!(mean_and_stderr(&[]), None);
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(sig6(7.087123456), "7.08712");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(0.9999999990271381), "1.00000");
        assert_eq!(sig6(999999.9), "1.00000e6");
        assert_eq!(sig6(-0.0000999999999), "-0.000100000");
    }

    #[test]
    fn plan_validation() {
        let mut plan = BenchPlan { n_seeds: 0, ..Default::default() };
        assert!(plan.check().is_err());
        plan.n_seeds = 1;
        plan.horizons = vec![];
        assert!(plan.check().is_err());
        plan.horizons = vec![60];
        assert!(plan.check().is_err());
        plan.horizons = vec![1];
        assert!(plan.check().is_ok());
    }
}
