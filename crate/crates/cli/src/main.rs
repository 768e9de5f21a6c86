//! `tsc`: simulate panels, fit estimators, run the benchmark, inspect weights.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tsc_core::bench::{self, sig6, BenchError, ExportOptions, GroundTruthMode};
use tsc_core::config::{ConfigError, DgpSection, PanelSection, RunConfig};
use tsc_core::dgp::{gen_panel, DgpError, DgpKind, OutcomeType};
use tsc_core::estimators::{estimate_cached, EstimatorError, EstimatorKind, EstimatorResult, FitCache};
use tsc_core::panel::{
    load_panel_csv, panel_csv_string, LoadOptions, PanelDataset, PanelError, Schema, TreatedUnit, TreatmentTime,
};
use tsc_core::svg;

#[derive(Parser, Debug)]
#[command(name = "tsc", version, about = "Targeted synthetic control toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write SVG charts (default).
    #[arg(long, global = true, overrides_with = "no_svg")]
    svg: bool,
    #[arg(long = "no-svg", global = true)]
    no_svg: bool,
    #[arg(long = "ground-truth", global = true, value_enum)]
    ground_truth: Option<TruthArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TruthArg {
    Realized,
    Noiseless,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a panel and write panel.csv, truth.csv and meta.toml.
    Simulate(SimulateArgs),
    /// Fit estimators on a panel CSV.
    Fit(FitArgs),
    /// Run the benchmark and write the RMSE and violation tables.
    Benchmark(BenchArgs),
    /// Export initial vs targeted TSC weights.
    Weights(WeightsArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct DgpArgs {
    /// linear, hinge, quadratic or time_varying.
    #[arg(long)]
    dgp: Option<String>,
    /// continuous or binary.
    #[arg(long)]
    outcome: Option<String>,
    #[arg(long)]
    n_units: Option<usize>,
    #[arg(long)]
    periods: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
struct PanelArgs {
    /// Panel CSV. Without it a panel is simulated from the generator settings.
    #[arg(long)]
    panel: Option<PathBuf>,
    /// wide or long.
    #[arg(long)]
    schema: Option<String>,
    /// Unit id of the treated unit (default: first unit).
    #[arg(long)]
    treated: Option<String>,
    /// Label of the first treated period, or a count of pre-treatment periods.
    #[arg(long)]
    t0: Option<String>,
    /// Treat the panel outcome as binary.
    #[arg(long)]
    binary: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    /// Pre-treatment periods (default: T - 10).
    #[arg(long)]
    t0: Option<usize>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[command(flatten)]
    dgp: DgpArgs,
    /// sc, plugin, asc, tsc or all.
    #[arg(long)]
    estimator: Option<String>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    /// Number of seeds per generator.
    #[arg(long)]
    seeds: Option<usize>,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct WeightsArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[command(flatten)]
    dgp: DgpArgs,
    /// Post-treatment offset (1 = first treated period).
    #[arg(long, default_value_t = 1)]
    horizon: usize,
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => format!("config error: {m}"),
            CliError::Data(m) => format!("data error: {m}"),
            CliError::Numerical(m) => format!("numerical error: {m}"),
            CliError::Io(m) => format!("i/o error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<PanelError> for CliError {
    fn from(e: PanelError) -> Self {
        match e {
            PanelError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DgpError> for CliError {
    fn from(e: DgpError) -> Self {
        match e {
            DgpError::InvalidConfig(_) => CliError::Config(e.to_string()),
            DgpError::Panel(p) => p.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Panel(p) => p.into(),
            EstimatorError::InvalidHorizon { .. } | EstimatorError::UnknownEstimator(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::InvalidPlan(_) => CliError::Config(e.to_string()),
            BenchError::Io { .. } => CliError::Io(e.to_string()),
            BenchError::Dgp(d) => d.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    apply_common(&mut cfg, &cli.common);
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let svg = cfg.svg.unwrap_or(true);
    match cli.command {
        Command::Simulate(a) => {
            apply_dgp(&mut cfg, &a.dgp)?;
            if let Some(t0) = a.t0 {
                cfg.dgp.get_or_insert_with(Default::default).t0 = Some(t0);
            }
            cmd_simulate(&cfg, &out)
        }
        Command::Fit(a) => {
            apply_dgp(&mut cfg, &a.dgp)?;
            apply_panel(&mut cfg, &a.panel)?;
            if let Some(e) = a.estimator {
                cfg.estimator.get_or_insert_with(Default::default).kind = Some(e);
            }
            cmd_fit(&cfg, &out, svg)
        }
        Command::Benchmark(a) => {
            apply_dgp(&mut cfg, &a.dgp)?;
            let b = cfg.bench.get_or_insert_with(Default::default);
            if let Some(n) = a.seeds {
                b.n_seeds = Some(n);
            }
            if let Some(h) = a.horizons {
                b.horizons = Some(h);
            }
            // A generator or outcome flag narrows the benchmark to it.
            if let Some(k) = &a.dgp.dgp {
                b.kinds = Some(vec![parse_kind(k)?]);
            }
            if let Some(o) = &a.dgp.outcome {
                b.outcomes = Some(vec![parse_outcome(o)?]);
            }
            cmd_benchmark(&cfg, &out, svg)
        }
        Command::Weights(a) => {
            apply_dgp(&mut cfg, &a.dgp)?;
            apply_panel(&mut cfg, &a.panel)?;
            cmd_weights(&cfg, &out, svg, a.horizon)
        }
    }
}

fn apply_common(cfg: &mut RunConfig, c: &Common) {
    if c.seed.is_some() {
        cfg.seed = c.seed;
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    if let Some(w) = c.workers {
        cfg.workers = Some(w);
        cfg.bench.get_or_insert_with(Default::default).workers = Some(w);
    }
    if c.svg {
        cfg.svg = Some(true);
    }
    if c.no_svg {
        cfg.svg = Some(false);
    }
    if let Some(g) = c.ground_truth {
        cfg.bench.get_or_insert_with(Default::default).ground_truth = Some(match g {
            TruthArg::Realized => GroundTruthMode::Realized,
            TruthArg::Noiseless => GroundTruthMode::Noiseless,
        });
    }
}

fn parse_kind(s: &str) -> Result<DgpKind> {
    s.parse().map_err(|e: DgpError| CliError::Config(format!("--dgp: {e}")))
}

fn parse_outcome(s: &str) -> Result<OutcomeType> {
    s.parse().map_err(|e: DgpError| CliError::Config(format!("--outcome: {e}")))
}

fn apply_dgp(cfg: &mut RunConfig, a: &DgpArgs) -> Result<()> {
    let d: &mut DgpSection = cfg.dgp.get_or_insert_with(Default::default);
    if let Some(k) = &a.dgp {
        d.kind = Some(parse_kind(k)?);
    }
    if let Some(o) = &a.outcome {
        d.outcome = Some(parse_outcome(o)?);
    }
    if a.n_units.is_some() {
        d.n_units = a.n_units;
    }
    if a.periods.is_some() {
        d.periods = a.periods;
    }
    Ok(())
}

fn apply_panel(cfg: &mut RunConfig, a: &PanelArgs) -> Result<()> {
    let p: &mut PanelSection = cfg.panel.get_or_insert_with(Default::default);
    if a.panel.is_some() {
        p.path = a.panel.clone();
    }
    if let Some(s) = &a.schema {
        p.schema = Some(match s.to_ascii_lowercase().as_str() {
            "wide" => Schema::Wide,
            "long" => Schema::Long,
            other => return Err(CliError::Config(format!("--schema: unknown schema `{other}`"))),
        });
    }
    if a.treated.is_some() {
        p.treated = a.treated.clone();
    }
    if a.t0.is_some() {
        p.t0 = a.t0.clone();
    }
    if a.binary {
        p.outcome = Some(OutcomeType::Binary);
    }
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Pre-treatment periods for a simulated panel: `[dgp] t0`, else `T - 10`.
fn simulated_t0(cfg: &RunConfig, periods: usize) -> usize {
    cfg.dgp.as_ref().and_then(|d| d.t0).unwrap_or(periods.saturating_sub(10).max(1))
}

fn simulate_panel(cfg: &RunConfig) -> Result<PanelDataset> {
    let dgp = cfg.dgp_config();
    let t0 = simulated_t0(cfg, dgp.n_periods());
    Ok(gen_panel(&dgp, t0)?)
}

/// Loads `[panel] path` if set, otherwise simulates a panel.
fn obtain_panel(cfg: &RunConfig) -> Result<PanelDataset> {
    let Some(sec) = cfg.panel.as_ref().filter(|p| p.path.is_some()) else {
        return simulate_panel(cfg);
    };
    let path = sec.path.as_ref().expect("filtered");
    let t0 = match &sec.t0 {
        Some(s) => TreatmentTime::Auto(s.clone()),
        None => return Err(CliError::Config("--t0 is required with --panel".into())),
    };
    let mut opts = LoadOptions::new(sec.schema.unwrap_or_default(), t0);
    opts.treated = sec.treated.clone().map(TreatedUnit::Name).unwrap_or_default();
    opts.kind = sec.outcome_kind();
    Ok(load_panel_csv(path, &opts)?)
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let dgp = cfg.dgp_config();
    let panel = simulate_panel(cfg)?;
    ensure_dir(out)?;
    write(&out.join("panel.csv"), &panel_csv_string(&panel, Schema::Wide))?;
    let gt = panel.ground_truth().expect("simulated panels carry ground truth");
    let mut truth = String::from("period,time,realized,mean\n");
    for (t, label) in panel.time_labels().iter().enumerate() {
        let _ = writeln!(truth, "{},{label},{},{}", t + 1, gt.realized[t], gt.mean[t]);
    }
    write(&out.join("truth.csv"), &truth)?;
    let mut meta = String::new();
    let _ = writeln!(meta, "generator = \"{}\"", dgp.kind);
    let _ = writeln!(meta, "outcome = \"{}\"", dgp.outcome);
    let _ = writeln!(meta, "seed = {}", dgp.seed);
    let _ = writeln!(meta, "n_units = {}", dgp.n_units);
    let _ = writeln!(meta, "periods = {}", dgp.n_periods());
    let _ = writeln!(meta, "p = {}", dgp.p);
    let _ = writeln!(meta, "noise_sd = {}", dgp.noise());
    let _ = writeln!(meta, "t0 = {}", panel.t0());
    let _ = writeln!(meta, "treated = \"{}\"", panel.unit_ids()[panel.treated()]);
    let _ = writeln!(meta, "version = \"{}\"", env!("CARGO_PKG_VERSION"));
    write(&out.join("meta.toml"), &meta)?;
    println!(
        "simulated {} panel: {} units x {} periods, t0 = {}, written to {}",
        dgp.label(),
        panel.n_units(),
        panel.n_periods(),
        panel.t0(),
        out.display()
    );
    Ok(())
}

fn selected_estimators(cfg: &RunConfig) -> Result<Vec<EstimatorKind>> {
    match cfg.estimator.as_ref().and_then(|e| e.kind.as_deref()) {
        None | Some("all") => Ok(EstimatorKind::ALL.to_vec()),
        Some(_) => Ok(vec![cfg.estimator_kind()?.expect("kind present")]),
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn result_csv(panel: &PanelDataset, res: &EstimatorResult) -> String {
    let mut s = String::from(
        "offset,period,time,observed,psi_hat,tau_hat,lower_bound,upper_bound,violation,model_treated,epsilon_hat,score,root_found,clamped\n",
    );
    for h in &res.horizons {
        let t = h.targeting.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            h.offset,
            h.period + 1,
            panel.time_labels()[h.period],
            h.observed,
            h.psi_hat,
            h.tau_hat,
            h.bounds.0,
            h.bounds.1,
            h.bounds_violation,
            opt_num(h.model_treated),
            opt_num(t.map(|t| t.epsilon_hat)),
            opt_num(t.map(|t| t.score_at_solution)),
            t.map(|t| t.root_found.to_string()).unwrap_or_default(),
            t.map(|t| t.clamped.to_string()).unwrap_or_default(),
        );
    }
    s
}

fn weights_table(panel: &PanelDataset, res: &EstimatorResult) -> Option<String> {
    let w0 = res.initial_weights.as_ref()?;
    let mut s = String::from("control_id,initial_weight");
    let targeted = res.kind == EstimatorKind::Tsc;
    if targeted {
        for h in &res.horizons {
            let _ = write!(s, ",targeted_{}", panel.time_labels()[h.period]);
        }
    }
    s.push('\n');
    for (k, j) in panel.controls().into_iter().enumerate() {
        let _ = write!(s, "{},{}", panel.unit_ids()[j], w0.as_slice()[k]);
        if targeted {
            for h in &res.horizons {
                let _ = write!(s, ",{}", opt_num(h.weights_used.as_ref().map(|w| w.as_slice()[k])));
            }
        }
        s.push('\n');
    }
    Some(s)
}

fn cmd_fit(cfg: &RunConfig, out: &Path, svg_on: bool) -> Result<()> {
    let panel = obtain_panel(cfg)?;
    let kinds = selected_estimators(cfg)?;
    ensure_dir(out)?;
    let mut cache = FitCache::new();
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "panel: {} units x {} periods, treated = {}, first treated period = {}",
        panel.n_units(),
        panel.n_periods(),
        panel.unit_ids()[panel.treated()],
        panel.time_labels()[panel.t0()]
    );
    let mut curves = Vec::new();
    for kind in kinds {
        let ecfg = cfg.estimator_config(kind)?;
        let res = estimate_cached(&panel, &ecfg, &mut cache)?;
        write(&out.join(format!("result_{}.csv", kind.short_name())), &result_csv(&panel, &res))?;
        if let Some(w) = weights_table(&panel, &res) {
            write(&out.join(format!("weights_{}.csv", kind.short_name())), &w)?;
        }
        let _ = writeln!(summary, "\n{kind}");
        if let Some(fit) = res.pretreatment_fit {
            let _ = writeln!(summary, "  pre-treatment fit: {}", sig6(fit));
        }
        for w in &res.warnings {
            let _ = writeln!(summary, "  warning: {w}");
        }
        let _ = writeln!(summary, "  {:<10} {:>12} {:>12} {:>12} {:>12}", "time", "observed", "psi_hat", "tau_hat", "epsilon");
        for h in &res.horizons {
            let eps = h
                .targeting
                .as_ref()
                .map(|t| {
                    let flag = if t.root_found { "" } else if t.clamped { " (clamped)" } else { " (no root)" };
                    format!("{}{flag}", sig6(t.epsilon_hat))
                })
                .unwrap_or_default();
            let _ = writeln!(
                summary,
                "  {:<10} {:>12} {:>12} {:>12} {:>12}",
                panel.time_labels()[h.period],
                sig6(h.observed),
                sig6(h.psi_hat),
                sig6(h.tau_hat),
                eps
            );
        }
        curves.push((kind.to_string(), res.horizons.iter().map(|h| (h.period, h.psi_hat)).collect()));
    }
    write(&out.join("summary.txt"), &summary)?;
    if svg_on {
        let controls: Vec<Vec<f64>> =
            panel.controls().into_iter().map(|j| panel.outcomes().row(j).iter().copied().collect()).collect();
        let chart = svg::trajectory(&panel.treated_trajectory(), &controls, &curves, panel.t0(), "counterfactual trajectories");
        write(&out.join("trajectory.svg"), &chart)?;
    }
    print!("{summary}");
    Ok(())
}

fn manifest(cfg: &RunConfig, plan: &bench::BenchPlan, report: &bench::BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "version = \"{}\"", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "seed = {}", cfg.seed());
    let _ = writeln!(s, "n_seeds = {}", plan.n_seeds);
    let _ = writeln!(s, "horizons = {:?}", plan.horizons);
    let _ = writeln!(
        s,
        "ground_truth = \"{}\"",
        match plan.ground_truth {
            GroundTruthMode::Realized => "realized",
            GroundTruthMode::Noiseless => "noiseless",
        }
    );
    let names: Vec<String> = plan.estimators.iter().map(|e| format!("\"{}\"", e.kind.short_name())).collect();
    let _ = writeln!(s, "estimators = [{}]", names.join(", "));
    let _ = writeln!(s, "\n[regressor]\n# {:?}", plan.estimators.first().map(|e| e.regressor.kind));
    for (label, k, seed) in &report.seeds {
        let _ = writeln!(s, "\n[[runs]]\ngenerator = \"{label}\"\nseed_index = {k}\nseed = {seed}");
    }
    s
}

fn cmd_benchmark(cfg: &RunConfig, out: &Path, svg_on: bool) -> Result<()> {
    let plan = cfg.bench_plan()?;
    let report = bench::run_bench(&plan)?;
    bench::export_report(&report, out, ExportOptions { svg: svg_on })?;
    write(&out.join("manifest.toml"), &manifest(cfg, &plan, &report))?;
    print!("{}", bench::render_tables(&report));
    let failed: usize = report.rmse_table.iter().map(|c| c.errors.len()).sum();
    if failed > 0 {
        eprintln!("warning: {failed} estimator runs failed; see rmse_table.csv");
    }
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_weights(cfg: &RunConfig, out: &Path, svg_on: bool, horizon: usize) -> Result<()> {
    let panel = obtain_panel(cfg)?;
    let mut ecfg = cfg.estimator_config(EstimatorKind::Tsc)?;
    ecfg.horizons = Some(vec![horizon]);
    let res = estimate_cached(&panel, &ecfg, &mut FitCache::new())?;
    let h = &res.horizons[0];
    let w0 = res.initial_weights.as_ref().expect("TSC has initial weights");
    let ws = h.weights_used.as_ref().expect("TSC has targeted weights");
    let ids: Vec<String> = panel.controls().into_iter().map(|j| panel.unit_ids()[j].clone()).collect();
    let snap = bench::WeightSnapshot {
        run: panel.time_labels()[h.period].clone(),
        control_ids: ids.clone(),
        initial: w0.as_slice().to_vec(),
        targeted: ws.as_slice().to_vec(),
    };
    ensure_dir(out)?;
    write(&out.join("weights.csv"), &bench::weights_csv(&snap))?;
    let t = h.targeting.as_ref().expect("TSC targeting result");
    let diag = format!(
        "time,epsilon_hat,score,root_found,clamped,iterations\n{},{},{},{},{},{}\n",
        panel.time_labels()[h.period],
        t.epsilon_hat,
        t.score_at_solution,
        t.root_found,
        t.clamped,
        t.iterations
    );
    write(&out.join("diagnostics.csv"), &diag)?;
    if svg_on {
        let title = format!("weights at {}", panel.time_labels()[h.period]);
        write(&out.join("weights.svg"), &svg::weight_bars(&ids, &snap.initial, &snap.targeted, &title))?;
    }
    println!("{:<12} {:>12} {:>12}", "control", "initial", "targeted");
    for (k, id) in ids.iter().enumerate() {
        println!("{:<12} {:>12} {:>12}", id, sig6(snap.initial[k]), sig6(snap.targeted[k]));
    }
    println!(
        "epsilon = {}, f = {}, root_found = {}, clamped = {}",
        sig6(t.epsilon_hat),
        sig6(t.score_at_solution),
        t.root_found,
        t.clamped
    );
    Ok(())
}
