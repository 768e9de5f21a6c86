//! Panel data model for a single treated unit.
//!
//! A [`PanelDataset`] holds `N` units observed over `T` periods. Unit
//! `treated` is the only treated unit; every other row is a control. Periods
//! `0..t0` (0-based) are pre-treatment and `t0..T` are post-treatment, so a
//! dataset with `t0 = T - h` has `h` post-treatment periods.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("panel has no control units")]
    NoControls,
    #[error("invalid treatment time t0={t0} for T={periods} (need 1 <= t0 < T)")]
    InvalidT0 { t0: usize, periods: usize },
    #[error("binary outcome at unit {unit}, period {period} is {value}, expected 0 or 1")]
    NonBinaryValue { unit: usize, period: usize, value: f64 },
    #[error("control outcome {value} at unit {unit}, period {period} is outside [{lo}, {hi}]")]
    OutOfBounds { unit: usize, period: usize, value: f64, lo: f64, hi: f64 },
    #[error("invalid bounds [{0}, {1}]")]
    InvalidBounds(f64, f64),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("ragged panel: no outcome for unit '{unit}' at time '{time}'")]
    RaggedPanel { unit: String, time: String },
    #[error("covariate '{column}' is not constant within unit '{unit}'")]
    CovariateNotConstant { unit: String, column: String },
    #[error("unknown unit '{0}'")]
    UnknownUnit(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, PanelError>;

/// Outcome type of a panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OutcomeKind {
    Continuous { bounds: Option<(f64, f64)> },
    Binary,
}

impl Default for OutcomeKind {
    fn default() -> Self {
        OutcomeKind::continuous()
    }
}

impl OutcomeKind {
    pub fn continuous() -> Self {
        OutcomeKind::Continuous { bounds: None }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, OutcomeKind::Binary)
    }

    /// Bounds declared by the outcome type; binary outcomes imply `[0, 1]`.
    pub fn declared_bounds(&self) -> Option<(f64, f64)> {
        match *self {
            OutcomeKind::Continuous { bounds } => bounds,
            OutcomeKind::Binary => Some((0.0, 1.0)),
        }
    }
}

/// Untreated trajectory of the treated unit, known only for simulated data.
///
/// Both vectors span all `T` periods so the same truth serves every choice
/// of `t0`; [`GroundTruth::post`] slices out the post-treatment part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// The realized untreated draw `Y_1t(0)`.
    pub realized: Vec<f64>,
    /// The same draw without outcome noise (the success probability for binary panels).
    pub mean: Vec<f64>,
}

impl GroundTruth {
    pub fn post(&self, t0: usize) -> (&[f64], &[f64]) {
        (&self.realized[t0..], &self.mean[t0..])
    }
}

/// Feature vector `X_i = (Z_i, Y_i1, ..., Y_i,t0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A validated panel. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    outcomes: DMatrix<f64>,
    covariates: DMatrix<f64>,
    treated: usize,
    t0: usize,
    kind: OutcomeKind,
    unit_ids: Vec<String>,
    time_labels: Vec<String>,
    ground_truth: Option<GroundTruth>,
}

impl PanelDataset {
    /// Builds and validates a panel. `outcomes` is `N x T`, `covariates` is `N x p`.
    pub fn new(
        outcomes: DMatrix<f64>,
        covariates: DMatrix<f64>,
        treated: usize,
        t0: usize,
        kind: OutcomeKind,
    ) -> Result<Self> {
        let n = outcomes.nrows();
        let t = outcomes.ncols();
        let d = PanelDataset {
            outcomes,
            covariates,
            treated,
            t0,
            kind,
            unit_ids: (1..=n).map(|i| format!("u{i}")).collect(),
            time_labels: (1..=t).map(|i| format!("y_{i}")).collect(),
            ground_truth: None,
        };
        validate(d)
    }

    pub fn with_labels(mut self, unit_ids: Vec<String>, time_labels: Vec<String>) -> Result<Self> {
        self.unit_ids = unit_ids;
        self.time_labels = time_labels;
        validate(self)
    }

    pub fn with_ground_truth(mut self, truth: GroundTruth) -> Result<Self> {
        self.ground_truth = Some(truth);
        validate(self)
    }

    /// Same panel with a different treatment time.
    pub fn with_t0(&self, t0: usize) -> Result<Self> {
        let mut d = self.clone();
        d.t0 = t0;
        validate(d)
    }

    pub fn n_units(&self) -> usize {
        self.outcomes.nrows()
    }

    pub fn n_periods(&self) -> usize {
        self.outcomes.ncols()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn n_post(&self) -> usize {
        self.n_periods() - self.t0
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn treated(&self) -> usize {
        self.treated
    }

    pub fn kind(&self) -> OutcomeKind {
        self.kind
    }

    pub fn outcomes(&self) -> &DMatrix<f64> {
        &self.outcomes
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn time_labels(&self) -> &[String] {
        &self.time_labels
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        self.ground_truth.as_ref()
    }

    /// Control unit indices in row order.
    pub fn controls(&self) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| i != self.treated).collect()
    }

    pub fn n_controls(&self) -> usize {
        self.n_units() - 1
    }

    pub fn outcome(&self, unit: usize, period: usize) -> f64 {
        self.outcomes[(unit, period)]
    }

    pub fn treated_trajectory(&self) -> Vec<f64> {
        self.outcomes.row(self.treated).iter().copied().collect()
    }

    /// Control outcomes at `period`, in control order.
    pub fn control_outcomes_at(&self, period: usize) -> Vec<f64> {
        self.controls().into_iter().map(|j| self.outcomes[(j, period)]).collect()
    }

    /// `(min, max)` of the control outcomes at `period`.
    pub fn control_range_at(&self, period: usize) -> (f64, f64) {
        self.control_outcomes_at(period)
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)))
    }

    pub fn feature(&self, unit: usize) -> FeatureVector {
        let mut v = Vec::with_capacity(self.n_covariates() + self.t0);
        v.extend(self.covariates.row(unit).iter().copied());
        v.extend((0..self.t0).map(|t| self.outcomes[(unit, t)]));
        FeatureVector(v)
    }

    /// One feature vector per unit: covariates first, then pre-treatment outcomes in time order.
    pub fn build_features(&self) -> Vec<FeatureVector> {
        (0..self.n_units()).map(|i| self.feature(i)).collect()
    }

    pub fn control_features(&self) -> Vec<FeatureVector> {
        self.controls().into_iter().map(|j| self.feature(j)).collect()
    }

    pub fn treated_feature(&self) -> FeatureVector {
        self.feature(self.treated)
    }
}

/// Checks every panel invariant and returns the dataset unchanged on success.
pub fn validate(d: PanelDataset) -> Result<PanelDataset> {
    let n = d.outcomes.nrows();
    let t = d.outcomes.ncols();
    if n == 0 || t < 2 {
        return Err(PanelError::DimensionMismatch(format!(
            "need at least one unit and two periods, got {n} x {t}"
        )));
    }
    if n < 2 {
        return Err(PanelError::NoControls);
    }
    if d.covariates.nrows() != n {
        return Err(PanelError::DimensionMismatch(format!(
            "covariates have {} rows for {n} units",
            d.covariates.nrows()
        )));
    }
    if d.treated >= n {
        return Err(PanelError::DimensionMismatch(format!(
            "treated index {} out of range for {n} units",
            d.treated
        )));
    }
    if d.t0 < 1 || d.t0 >= t {
        return Err(PanelError::InvalidT0 { t0: d.t0, periods: t });
    }
    if d.unit_ids.len() != n || d.time_labels.len() != t {
        return Err(PanelError::DimensionMismatch(format!(
            "{} unit ids and {} time labels for a {n} x {t} panel",
            d.unit_ids.len(),
            d.time_labels.len()
        )));
    }
    if let Some((i, j)) = first_non_finite(&d.outcomes) {
        return Err(PanelError::NonFinite(format!("outcome of unit {i} at period {j}")));
    }
    if let Some((i, j)) = first_non_finite(&d.covariates) {
        return Err(PanelError::NonFinite(format!("covariate {j} of unit {i}")));
    }
    match d.kind {
        OutcomeKind::Binary => {
            for i in 0..n {
                for j in 0..t {
                    let v = d.outcomes[(i, j)];
                    if v != 0.0 && v != 1.0 {
                        return Err(PanelError::NonBinaryValue { unit: i, period: j, value: v });
                    }
                }
            }
        }
        OutcomeKind::Continuous { bounds: Some((lo, hi)) } => {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(PanelError::InvalidBounds(lo, hi));
            }
            for i in (0..n).filter(|&i| i != d.treated) {
                for j in 0..t {
                    let v = d.outcomes[(i, j)];
                    if v < lo || v > hi {
                        return Err(PanelError::OutOfBounds { unit: i, period: j, value: v, lo, hi });
                    }
                }
            }
        }
        OutcomeKind::Continuous { bounds: None } => {}
    }
    if let Some(gt) = &d.ground_truth {
        if gt.realized.len() != t || gt.mean.len() != t {
            return Err(PanelError::DimensionMismatch(format!(
                "ground truth has lengths ({}, {}) for T={t}",
                gt.realized.len(),
                gt.mean.len()
            )));
        }
    }
    Ok(d)
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    /// One row per unit: `unit, z_1..z_p, <time columns>`.
    #[default]
    Wide,
    /// One row per unit-period: `unit, time, outcome, z_1..z_p`.
    Long,
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schema::Wide => write!(f, "wide"),
            Schema::Long => write!(f, "long"),
        }
    }
}

/// How to pick the treated unit from a CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum TreatedUnit {
    /// The first unit in file order.
    #[default]
    First,
    Name(String),
    Index(usize),
}

/// How to place the treatment time.
#[derive(Debug, Clone, PartialEq)]
pub enum TreatmentTime {
    /// Number of pre-treatment periods.
    Periods(usize),
    /// Label of the first treated period.
    StartLabel(String),
    /// A time label if one matches, otherwise a number of pre-treatment periods.
    Auto(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub schema: Schema,
    pub treated: TreatedUnit,
    pub t0: TreatmentTime,
    pub kind: OutcomeKind,
}

impl LoadOptions {
    pub fn new(schema: Schema, t0: TreatmentTime) -> Self {
        LoadOptions { schema, treated: TreatedUnit::First, t0, kind: OutcomeKind::continuous() }
    }
}

struct RawPanel {
    unit_ids: Vec<String>,
    time_labels: Vec<String>,
    covariates: Vec<Vec<f64>>,
    outcomes: Vec<Vec<f64>>,
}

pub fn load_panel_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<PanelDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| PanelError::Io { path: path.to_path_buf(), source })?;
    parse_panel_csv(&text, options)
}

/// Parses panel CSV text; `load_panel_csv` without the file read.
pub fn parse_panel_csv(text: &str, options: &LoadOptions) -> Result<PanelDataset> {
    if text.trim().is_empty() {
        return Err(PanelError::Parse("empty input".into()));
    }
    let raw = match options.schema {
        Schema::Wide => read_wide(text)?,
        Schema::Long => read_long(text)?,
    };
    assemble(raw, options)
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| PanelError::Parse(format!("cannot parse {what} value '{s}'")))
}

fn csv_err(e: csv::Error) -> PanelError {
    PanelError::Parse(e.to_string())
}

fn read_wide(text: &str) -> Result<RawPanel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 3 {
        return Err(PanelError::Parse("wide header needs a unit column and at least two time columns".into()));
    }
    let z_cols: Vec<usize> = (1..header.len()).filter(|&c| is_covariate(&header[c])).collect();
    let t_cols: Vec<usize> = (1..header.len()).filter(|&c| !is_covariate(&header[c])).collect();
    let mut raw = RawPanel {
        unit_ids: Vec::new(),
        time_labels: t_cols.iter().map(|&c| header[c].clone()).collect(),
        covariates: Vec::new(),
        outcomes: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let unit = rec[0].trim().to_string();
        let mut z = Vec::with_capacity(z_cols.len());
        for &c in &z_cols {
            z.push(parse_f64(&rec[c], &header[c])?);
        }
        let mut y = Vec::with_capacity(t_cols.len());
        for &c in &t_cols {
            if rec[c].trim().is_empty() {
                return Err(PanelError::RaggedPanel { unit, time: header[c].clone() });
            }
            y.push(parse_f64(&rec[c], &header[c])?);
        }
        raw.unit_ids.push(unit);
        raw.covariates.push(z);
        raw.outcomes.push(y);
    }
    if raw.unit_ids.is_empty() {
        return Err(PanelError::Parse("no data rows".into()));
    }
    Ok(raw)
}

fn is_covariate(name: &str) -> bool {
    name.strip_prefix("z_").is_some_and(|rest| !rest.is_empty())
}

fn read_long(text: &str) -> Result<RawPanel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PanelError::Parse(format!("long schema requires a '{name}' column")))
    };
    let (uc, tc, yc) = (find("unit")?, find("time")?, find("outcome")?);
    let z_cols: Vec<usize> = (0..header.len()).filter(|&c| is_covariate(&header[c])).collect();
    if let Some(extra) = (0..header.len()).find(|&c| c != uc && c != tc && c != yc && !z_cols.contains(&c)) {
        return Err(PanelError::Parse(format!("unexpected column '{}'", header[extra])));
    }

    let mut unit_ids: Vec<String> = Vec::new();
    let mut time_labels: Vec<String> = Vec::new();
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    let mut covs: Vec<Option<Vec<f64>>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let unit = rec[uc].trim().to_string();
        let time = rec[tc].trim().to_string();
        let ui = match unit_ids.iter().position(|u| *u == unit) {
            Some(i) => i,
            None => {
                unit_ids.push(unit.clone());
                covs.push(None);
                unit_ids.len() - 1
            }
        };
        let ti = match time_labels.iter().position(|t| *t == time) {
            Some(i) => i,
            None => {
                time_labels.push(time.clone());
                time_labels.len() - 1
            }
        };
        let mut z = Vec::with_capacity(z_cols.len());
        for &c in &z_cols {
            z.push(parse_f64(&rec[c], &header[c])?);
        }
        match &covs[ui] {
            None => covs[ui] = Some(z),
            Some(prev) => {
                if let Some(k) = (0..z.len()).find(|&k| prev[k] != z[k]) {
                    return Err(PanelError::CovariateNotConstant { unit, column: header[z_cols[k]].clone() });
                }
            }
        }
        if rec[yc].trim().is_empty() {
            return Err(PanelError::RaggedPanel { unit, time });
        }
        cells.push((ui, ti, parse_f64(&rec[yc], "outcome")?));
    }
    if unit_ids.is_empty() {
        return Err(PanelError::Parse("no data rows".into()));
    }

    // Numeric time labels are ordered numerically, anything else by first appearance.
    let numeric: Option<Vec<f64>> = time_labels.iter().map(|t| t.parse::<f64>().ok()).collect();
    let mut order: Vec<usize> = (0..time_labels.len()).collect();
    if let Some(vals) = numeric {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    }
    let mut rank = vec![0usize; order.len()];
    for (pos, &orig) in order.iter().enumerate() {
        rank[orig] = pos;
    }

    let n = unit_ids.len();
    let t = time_labels.len();
    let mut grid: Vec<Vec<Option<f64>>> = vec![vec![None; t]; n];
    for (ui, ti, y) in cells {
        let slot = &mut grid[ui][rank[ti]];
        if slot.is_some() {
            return Err(PanelError::Parse(format!(
                "duplicate cell for unit '{}' at time '{}'",
                unit_ids[ui], time_labels[ti]
            )));
        }
        *slot = Some(y);
    }
    let sorted_labels: Vec<String> = order.iter().map(|&i| time_labels[i].clone()).collect();
    let mut outcomes = Vec::with_capacity(n);
    for (ui, row) in grid.into_iter().enumerate() {
        let mut y = Vec::with_capacity(t);
        for (k, cell) in row.into_iter().enumerate() {
            match cell {
                Some(v) => y.push(v),
                None => {
                    return Err(PanelError::RaggedPanel {
                        unit: unit_ids[ui].clone(),
                        time: sorted_labels[k].clone(),
                    })
                }
            }
        }
        outcomes.push(y);
    }
    Ok(RawPanel {
        unit_ids,
        time_labels: sorted_labels,
        covariates: covs.into_iter().map(|c| c.unwrap_or_default()).collect(),
        outcomes,
    })
}

fn assemble(raw: RawPanel, options: &LoadOptions) -> Result<PanelDataset> {
    let n = raw.unit_ids.len();
    let t = raw.time_labels.len();
    let p = raw.covariates.first().map_or(0, Vec::len);
    let treated = match &options.treated {
        TreatedUnit::First => 0,
        TreatedUnit::Index(i) => *i,
        TreatedUnit::Name(name) => raw
            .unit_ids
            .iter()
            .position(|u| u == name)
            .ok_or_else(|| PanelError::UnknownUnit(name.clone()))?,
    };
    let t0 = match &options.t0 {
        TreatmentTime::Periods(k) => *k,
        TreatmentTime::StartLabel(label) => raw
            .time_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| PanelError::Parse(format!("unknown time label '{label}'")))?,
        TreatmentTime::Auto(s) => match raw.time_labels.iter().position(|l| l == s) {
            Some(k) => k,
            None => s
                .trim()
                .parse::<usize>()
                .map_err(|_| PanelError::Parse(format!("'{s}' is neither a time label nor a period count")))?,
        },
    };
    let outcomes = DMatrix::from_fn(n, t, |i, j| raw.outcomes[i][j]);
    let covariates = DMatrix::from_fn(n, p, |i, j| raw.covariates[i][j]);
    PanelDataset::new(outcomes, covariates, treated, t0, options.kind)?.with_labels(raw.unit_ids, raw.time_labels)
}

pub fn write_panel_csv(dataset: &PanelDataset, path: impl AsRef<Path>, schema: Schema) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| PanelError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    out.write_all(panel_csv_string(dataset, schema).as_bytes()).map_err(io_err)?;
    out.flush().map_err(io_err)
}

/// Renders a panel as CSV. `f64` values use the shortest round-trip form.
pub fn panel_csv_string(d: &PanelDataset, schema: Schema) -> String {
    let p = d.n_covariates();
    let z_names: Vec<String> = (1..=p).map(|k| format!("z_{k}")).collect();
    let mut s = String::new();
    match schema {
        Schema::Wide => {
            let mut header = vec!["unit".to_string()];
            header.extend(z_names);
            header.extend(d.time_labels.iter().cloned());
            push_row(&mut s, &header);
            for i in 0..d.n_units() {
                let mut row = vec![d.unit_ids[i].clone()];
                row.extend(d.covariates.row(i).iter().map(|v| v.to_string()));
                row.extend(d.outcomes.row(i).iter().map(|v| v.to_string()));
                push_row(&mut s, &row);
            }
        }
        Schema::Long => {
            let mut header = vec!["unit".to_string(), "time".to_string(), "outcome".to_string()];
            header.extend(z_names);
            push_row(&mut s, &header);
            for i in 0..d.n_units() {
                for j in 0..d.n_periods() {
                    let mut row = vec![d.unit_ids[i].clone(), d.time_labels[j].clone(), d.outcomes[(i, j)].to_string()];
                    row.extend(d.covariates.row(i).iter().map(|v| v.to_string()));
                    push_row(&mut s, &row);
                }
            }
        }
    }
    s
}

fn push_row(s: &mut String, fields: &[String]) {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(fields).expect("in-memory csv write");
    s.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory csv flush")).expect("utf8 csv"));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: OutcomeKind) -> PanelDataset {
        let y = DMatrix::from_row_slice(3, 4, &[1.0, 2.0, 3.0, 4.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        PanelDataset::new(y, DMatrix::zeros(3, 0), 0, 2, kind).unwrap()
    }

    #[test]
    fn accepts_app_d_shape() {
        let y = DMatrix::from_fn(5, 50, |i, j| (i * 50 + j) as f64);
        let d = PanelDataset::new(y, DMatrix::zeros(5, 12), 0, 49, OutcomeKind::continuous()).unwrap();
        assert_eq!(d.n_controls(), 4);
        assert_eq!(d.n_post(), 1);
    }

    #[test]
    fn rejects_single_unit() {
        let y = DMatrix::from_element(1, 5, 1.0);
        let err = PanelDataset::new(y, DMatrix::zeros(1, 0), 0, 2, OutcomeKind::continuous()).unwrap_err();
        assert!(matches!(err, PanelError::NoControls));
    }

    #[test]
    fn rejects_bad_t0() {
        let y = DMatrix::from_element(3, 5, 1.0);
        for t0 in [0, 5, 9] {
            let err = PanelDataset::new(y.clone(), DMatrix::zeros(3, 0), 0, t0, OutcomeKind::continuous()).unwrap_err();
            assert!(matches!(err, PanelError::InvalidT0 { .. }));
        }
    }

    #[test]
    fn rejects_non_binary_value() {
        let mut y = DMatrix::from_element(3, 4, 1.0);
        y[(1, 2)] = 0.5;
        let err = PanelDataset::new(y, DMatrix::zeros(3, 0), 0, 2, OutcomeKind::Binary).unwrap_err();
        assert!(matches!(err, PanelError::NonBinaryValue { unit: 1, period: 2, .. }));
    }

    #[test]
    fn bounds_apply_to_controls_only() {
        let mut y = DMatrix::from_element(3, 4, 0.5);
        y[(0, 3)] = 7.0;
        let kind = OutcomeKind::Continuous { bounds: Some((0.0, 1.0)) };
        assert!(PanelDataset::new(y.clone(), DMatrix::zeros(3, 0), 0, 2, kind).is_ok());
        y[(2, 3)] = 1.5;
        let err = PanelDataset::new(y, DMatrix::zeros(3, 0), 0, 2, kind).unwrap_err();
        assert!(matches!(err, PanelError::OutOfBounds { unit: 2, .. }));
        let bad = OutcomeKind::Continuous { bounds: Some((1.0, 1.0)) };
        let y = DMatrix::from_element(3, 4, 1.0);
        assert!(matches!(
            PanelDataset::new(y, DMatrix::zeros(3, 0), 0, 2, bad).unwrap_err(),
            PanelError::InvalidBounds(..)
        ));
    }

    #[test]
    fn covariate_row_mismatch() {
        let y = DMatrix::from_element(3, 4, 1.0);
        let err = PanelDataset::new(y, DMatrix::zeros(2, 1), 0, 2, OutcomeKind::continuous()).unwrap_err();
        assert!(matches!(err, PanelError::DimensionMismatch(_)));
    }

    #[test]
    fn validate_is_idempotent() {
        let d = small(OutcomeKind::continuous());
        let again = validate(d.clone()).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn features_without_covariates_are_history() {
        let y = DMatrix::from_fn(2, 6, |i, j| (i * 10 + j + 1) as f64);
        let d = PanelDataset::new(y, DMatrix::zeros(2, 0), 0, 3, OutcomeKind::continuous()).unwrap();
        assert_eq!(d.feature(0).0, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn features_put_covariates_first() {
        let y = DMatrix::from_row_slice(2, 3, &[10.0, 20.0, 30.0, 1.0, 2.0, 3.0]);
        let z = DMatrix::from_row_slice(2, 2, &[-1.0, -2.0, 5.0, 6.0]);
        let d = PanelDataset::new(y, z, 0, 2, OutcomeKind::continuous()).unwrap();
        assert_eq!(d.feature(0).0, vec![-1.0, -2.0, 10.0, 20.0]);
        assert!(d.build_features().iter().all(|f| f.len() == 4));
    }

    #[test]
    fn treated_unit_need_not_be_first() {
        let y = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let d = PanelDataset::new(y, DMatrix::zeros(3, 0), 1, 2, OutcomeKind::continuous()).unwrap();
        assert_eq!(d.controls(), vec![0, 2]);
        assert_eq!(d.control_outcomes_at(2), vec![3.0, 9.0]);
        assert_eq!(d.control_range_at(2), (3.0, 9.0));
        assert_eq!(d.treated_feature().0, vec![4.0, 5.0]);
    }

    #[test]
    fn empty_input_is_parse_error() {
        let opts = LoadOptions::new(Schema::Wide, TreatmentTime::Periods(1));
        assert!(matches!(parse_panel_csv("", &opts), Err(PanelError::Parse(_))));
        let opts = LoadOptions::new(Schema::Long, TreatmentTime::Periods(1));
        assert!(matches!(parse_panel_csv("  \n", &opts), Err(PanelError::Parse(_))));
    }

    #[test]
    fn long_missing_cell_is_ragged() {
        let text = "unit,time,outcome\nA,1,1.0\nA,2,2.0\nB,1,3.0\n";
        let opts = LoadOptions::new(Schema::Long, TreatmentTime::Periods(1));
        match parse_panel_csv(text, &opts) {
            Err(PanelError::RaggedPanel { unit, time }) => {
                assert_eq!(unit, "B");
                assert_eq!(time, "2");
            }
            other => panic!("expected RaggedPanel, got {other:?}"),
        }
    }

    #[test]
    fn wide_blank_cell_is_ragged() {
        let text = "unit,y_1,y_2\nA,1,2\nB,3,\n";
        let opts = LoadOptions::new(Schema::Wide, TreatmentTime::Periods(1));
        assert!(matches!(parse_panel_csv(text, &opts), Err(PanelError::RaggedPanel { .. })));
    }

    #[test]
    fn long_covariate_must_be_constant() {
        let text = "unit,time,outcome,z_1\nA,1,1,0.5\nA,2,2,0.5\nB,1,3,1\nB,2,4,2\n";
        let opts = LoadOptions::new(Schema::Long, TreatmentTime::Periods(1));
        assert!(matches!(parse_panel_csv(text, &opts), Err(PanelError::CovariateNotConstant { .. })));
    }

    #[test]
    fn long_times_sorted_numerically() {
        let text = "unit,time,outcome\nA,10,3\nA,2,1\nA,9,2\nB,9,5\nB,2,4\nB,10,6\n";
        let opts = LoadOptions::new(Schema::Long, TreatmentTime::Periods(2));
        let d = parse_panel_csv(text, &opts).unwrap();
        assert_eq!(d.time_labels(), &["2", "9", "10"]);
        assert_eq!(d.treated_trajectory(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn treated_by_name_and_start_label() {
        let text = "unit,1994,1995,1996,1997\nA,1,2,3,4\nNH,5,6,7,8\nC,9,9,9,9\n";
        let mut opts = LoadOptions::new(Schema::Wide, TreatmentTime::Auto("1996".into()));
        opts.treated = TreatedUnit::Name("NH".into());
        let d = parse_panel_csv(text, &opts).unwrap();
        assert_eq!(d.treated(), 1);
        assert_eq!(d.t0(), 2);
        opts.t0 = TreatmentTime::Auto("3".into());
        assert_eq!(parse_panel_csv(text, &opts).unwrap().t0(), 3);
        opts.treated = TreatedUnit::Name("XX".into());
        assert!(matches!(parse_panel_csv(text, &opts), Err(PanelError::UnknownUnit(_))));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let d = small(OutcomeKind::continuous());
        let err = write_panel_csv(&d, "/nonexistent-dir/x/panel.csv", Schema::Wide).unwrap_err();
        assert!(matches!(err, PanelError::Io { .. }));
    }
}
