//! Targeted synthetic control (TSC) for a single treated unit.
//!
//! The crate provides the classical synthetic control, plug-in and augmented
//! synthetic control baselines next to the targeted estimator, which tilts the
//! initial donor weights along an exponential family until the weighted control
//! residuals of an outcome regression vanish. Because the targeted weights stay
//! on the simplex, the counterfactual is always a convex combination of observed
//! control outcomes.
//!
//! Module map:
//! - [`panel`]: panel data model, feature construction, CSV I/O.
//! - [`weights`]: simplex projection and constrained pre-treatment matching.
//! - [`regressor`]: per-horizon outcome regressions (ridge and one-layer MLP).
//! - [`targeting`]: tilt scores, the exponential tilt and the 1-d solve for epsilon.
//! - [`estimators`]: the four counterfactual estimators.
//! - [`dgp`]: synthetic panel generators.
//! - [`bench`]: benchmark harness, report export and SVG figures.
//! - [`config`]: the TOML run configuration shared by the CLI.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod dgp;
pub mod estimators;
pub mod panel;
pub mod regressor;
pub mod seed;
pub mod svg;
pub mod targeting;
pub mod weights;

pub use estimators::{EstimatorConfig, EstimatorKind, EstimatorResult};
pub use panel::{PanelDataset, OutcomeKind};
pub use weights::SimplexWeights;
