use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;

use tsc_core::dgp::{gen_panel, DgpConfig, DgpKind, OutcomeType};
use tsc_core::estimators::{
    augmented_value, decompose, estimate, reporting_bounds, targeted_value, EstimatorConfig, EstimatorKind,
};
use tsc_core::panel::{OutcomeKind, PanelDataset};
use tsc_core::regressor::RegressorSpec;
use tsc_core::targeting::TargetingConfig;
use tsc_core::weights::SimplexWeights;

fn run(d: &PanelDataset, kind: EstimatorKind, spec: RegressorSpec) -> tsc_core::estimators::EstimatorResult {
    estimate(d, &EstimatorConfig::new(kind).with_regressor(spec)).unwrap()
}

#[test]
fn linear_plugin_recovers_noiseless_linear_truth() {
    let cfg = DgpConfig {
        n_units: 40,
        periods: Some(12),
        noise_sd: Some(0.0),
        ..DgpConfig::new(DgpKind::Linear, OutcomeType::Continuous, 3)
    };
    let d = gen_panel(&cfg, 9).unwrap();
    let truth = d.ground_truth().unwrap().mean.clone();
    let res = run(&d, EstimatorKind::PlugIn, RegressorSpec::linear(0.0));
    assert_eq!(res.horizons.len(), 3);
    for h in &res.horizons {
        assert_abs_diff_eq!(h.psi_hat, truth[h.period], epsilon = 1e-6);
    }
}

/// Treated unit is the mean of two controls and outcomes are linear in the covariates.
fn in_hull_panel() -> PanelDataset {
    let z = [[1.0, 4.0], [3.0, 0.0], [5.0, 8.0], [0.0, 9.0], [7.0, 2.0]];
    let z_treated = [(z[0][0] + z[2][0]) / 2.0, (z[0][1] + z[2][1]) / 2.0];
    let rows: Vec<[f64; 2]> = std::iter::once(z_treated).chain(z).collect();
    let y = |zz: &[f64; 2], t: usize| 1.0 + 0.5 * zz[0] - 0.3 * zz[1] + 0.2 * t as f64;
    let outcomes = DMatrix::from_fn(rows.len(), 6, |i, t| y(&rows[i], t));
    let covs = DMatrix::from_fn(rows.len(), 2, |i, k| rows[i][k]);
    PanelDataset::new(outcomes, covs, 0, 4, OutcomeKind::continuous()).unwrap()
}

#[test]
fn all_estimators_agree_on_noiseless_in_hull_panel() {
    let d = in_hull_panel();
    let spec = RegressorSpec::linear(0.0);
    let results: Vec<_> = EstimatorKind::ALL.into_iter().map(|k| run(&d, k, spec)).collect();
    for t in 0..2 {
        let truth = d.outcome(0, 4 + t);
        for r in &results {
            assert_abs_diff_eq!(r.horizons[t].psi_hat, truth, epsilon = 1e-8);
        }
    }
}

#[test]
fn zero_residuals_leave_tsc_equal_to_sc() {
    let d = in_hull_panel();
    let spec = RegressorSpec::linear(0.0);
    let sc = run(&d, EstimatorKind::ClassicalSc, spec);
    let tsc = run(&d, EstimatorKind::Tsc, spec);
    for (a, b) in sc.horizons.iter().zip(&tsc.horizons) {
        let t = b.targeting.as_ref().unwrap();
        assert_eq!(t.epsilon_hat, 0.0);
        assert_eq!(b.weights_used.as_ref(), tsc.initial_weights.as_ref());
        assert_abs_diff_eq!(a.psi_hat, b.psi_hat, epsilon = 1e-12);
    }
}

#[test]
fn perfect_single_donor_gives_zero_effect() {
    let y = DMatrix::from_row_slice(
        4,
        5,
        &[3.0, 1.0, 4.0, 1.0, 5.0, 0.0, 2.0, 0.0, 2.0, 9.0, 3.0, 1.0, 4.0, 1.0, 5.0, 8.0, 8.0, 1.0, 0.0, 2.0],
    );
    let d = PanelDataset::new(y, DMatrix::zeros(4, 0), 0, 3, OutcomeKind::continuous()).unwrap();
    let res = run(&d, EstimatorKind::ClassicalSc, RegressorSpec::linear(1.0));
    let w = res.initial_weights.unwrap();
    assert_abs_diff_eq!(w.as_slice()[1], 1.0, epsilon = 1e-6);
    for h in &res.horizons {
        assert_abs_diff_eq!(h.psi_hat, d.outcome(2, h.period), epsilon = 1e-5);
        assert_abs_diff_eq!(h.tau_hat, 0.0, epsilon = 1e-5);
    }
}

#[test]
fn binary_tsc_and_sc_stay_in_unit_interval() {
    for kind in DgpKind::ALL {
        for seed in 0..2 {
            let cfg = DgpConfig { periods: Some(30), ..DgpConfig::new(kind, OutcomeType::Binary, seed) };
            let d = gen_panel(&cfg, 25).unwrap();
            for est in [EstimatorKind::ClassicalSc, EstimatorKind::Tsc] {
                let spec = RegressorSpec::mlp(32, 1e-2, 300).with_seed(seed);
                for h in run(&d, est, spec).horizons {
                    assert!((0.0..=1.0).contains(&h.psi_hat), "{kind:?} {est:?} {}", h.psi_hat);
                    assert!(!h.bounds_violation);
                    assert_eq!(h.bounds, (0.0, 1.0));
                }
            }
        }
    }
}

#[test]
fn augmented_correction_can_leave_probability_range() {
    let w = SimplexWeights::new(vec![0.5, 0.5]).unwrap();
    // Residuals (0.6, 0.0) average to 0.3.
    let psi = augmented_value(0.9, &w, &[1.0, 0.0], &[0.4, 0.0]).unwrap();
    assert_abs_diff_eq!(psi, 1.2, epsilon = 1e-12);
    let y = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    let d = PanelDataset::new(y, DMatrix::zeros(3, 0), 0, 1, OutcomeKind::Binary).unwrap();
    let (a, b) = reporting_bounds(&d, 1);
    assert!(psi > b && a == 0.0);
}

#[test]
fn two_control_targeting_closed_form() {
    let w0 = SimplexWeights::new(vec![0.5, 0.5]).unwrap();
    let ys = [6.0, 3.0];
    let preds = [4.0, 4.0];
    let (psi, t) = targeted_value(&w0, &ys, &preds, &TargetingConfig::default()).unwrap();
    assert!(t.root_found);
    assert_abs_diff_eq!(t.epsilon_hat, -(2f64.ln()) / 3.0, epsilon = 1e-9);
    assert_abs_diff_eq!(t.targeted_weights.as_slice()[0], 1.0 / 3.0, epsilon = 1e-9);
    assert_abs_diff_eq!(psi, ys[0] / 3.0 + 2.0 * ys[1] / 3.0, epsilon = 1e-9);
    let dec = decompose(&t.targeted_weights, &ys, &preds).unwrap();
    assert!(dec.weighted_residual.abs() <= 1e-10);
}

#[test]
fn tsc_weighted_residual_vanishes_on_simulated_panels() {
    for kind in DgpKind::ALL {
        let cfg = DgpConfig { periods: Some(30), ..DgpConfig::new(kind, OutcomeType::Continuous, 7) };
        let d = gen_panel(&cfg, 25).unwrap();
        let res = run(&d, EstimatorKind::Tsc, RegressorSpec::linear(10.0));
        for h in &res.horizons {
            let t = h.targeting.as_ref().unwrap();
            if t.root_found {
                assert!(t.score_at_solution.abs() <= 1e-10, "{kind:?} {}", t.score_at_solution);
            }
            let (lo, hi) = d.control_range_at(h.period);
            assert!(h.psi_hat >= lo && h.psi_hat <= hi);
        }
    }
}

#[test]
fn mlp_backend_is_deterministic() {
    let cfg = DgpConfig { periods: Some(20), ..DgpConfig::new(DgpKind::Hinge, OutcomeType::Continuous, 11) };
    let d = gen_panel(&cfg, 15).unwrap();
    let spec = RegressorSpec::mlp(16, 1e-2, 200).with_seed(5);
    for kind in [EstimatorKind::PlugIn, EstimatorKind::AugmentedSc, EstimatorKind::Tsc] {
        assert_eq!(run(&d, kind, spec), run(&d, kind, spec));
    }
}
