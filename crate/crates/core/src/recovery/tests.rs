use super::*;
use crate::matrix::{l12_norm, polar_decompose};
use crate::rng::{standard_normal_vec, stream_rng};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::index::sample;

fn lowrank(k: usize, n: usize, s: usize, r: usize, seed: u64) -> (DenseMatrix, Subspace) {
    let mut rng = stream_rng(seed, 3);
    let support = sample(&mut rng, n, s).into_vec();
    let h = DMatrix::from_vec(k, r, standard_normal_vec(&mut rng, k * r));
    let w = DMatrix::from_vec(r, s, standard_normal_vec(&mut rng, r * s));
    let block = &h * w;
    let mut z = DMatrix::zeros(k, n);
    for (j, &i) in support.iter().enumerate() {
        z.set_column(i, &block.column(j));
    }
    let cols: Vec<DVector<f64>> = h.column_iter().map(|c| c.into_owned()).collect();
    (DenseMatrix::from_dmatrix(z).unwrap(), Subspace::span_of(k, &cols).unwrap())
}

fn from_norms(norms: &[f64]) -> DenseMatrix {
    DenseMatrix::from_dmatrix(DMatrix::from_fn(2, norms.len(), |r, c| if r == 0 { norms[c] } else { 0.0 })).unwrap()
}

#[test]
fn exactly_sparse_estimate_selects_its_support() {
    let (z, _) = lowrank(4, 15, 3, 2, 1);
    let sel = select_support(&z, 3, 1.0 - 1e-12).unwrap();
    assert_eq!(sel, polar_decompose(&z).support());
}

#[test]
fn equal_norms_break_ties_by_index() {
    let z = from_norms(&[1.0; 10]);
    let sel = select_support(&z, 1, 0.5).unwrap();
    assert_eq!(sel.indices(), &[0, 1, 2, 3, 4]);
}

#[test]
fn prefix_rule_can_miss_small_support_columns() {
    // off-support mass ratio 0.5/10.501 < 1 − τ, yet the tiny support column
    // at index 1 loses to the off-support column at index 2
    let z = from_norms(&[10.0, 0.001, 0.5]);
    let sel = select_support(&z, 2, 0.95).unwrap();
    assert_eq!(sel.indices(), &[0, 2]);
}

proptest! {
    #[test]
    fn selection_is_the_shortest_qualifying_prefix(
        norms in proptest::collection::vec(0.0f64..5.0, 1..30),
        tau in 0.01f64..0.99,
        s_frac in 0.0f64..1.0,
    ) {
        let n = norms.len();
        let s = 1 + ((n - 1) as f64 * s_frac) as usize;
        let z = from_norms(&norms);
        let sel = select_support(&z, s, tau).unwrap();
        prop_assert!(sel.len() >= s);
        let total: f64 = norms.iter().sum();
        let mass: f64 = sel.indices().iter().map(|&i| norms[i]).sum();
        prop_assert!(mass >= tau * total * (1.0 - 1e-12));
        // every selected column is at least as large as every unselected one
        let min_in = sel.indices().iter().map(|&i| norms[i]).fold(f64::INFINITY, f64::min);
        let max_out = sel.complement().indices().iter().map(|&i| norms[i]).fold(0.0, f64::max);
        prop_assert!(min_in >= max_out);
        if sel.len() > s {
            let smallest = sel.indices().iter().map(|&i| norms[i]).fold(f64::INFINITY, f64::min);
            prop_assert!(mass - smallest < tau * total * (1.0 + 1e-12));
        }
        let mut top: Vec<f64> = norms.clone();
        top.sort_by(|a, b| b.total_cmp(a));
        if top[..s].iter().sum::<f64>() >= tau * total {
            prop_assert_eq!(sel.len(), s);
        }
    }
}

#[test]
fn nast_recovers_easy_instance() {
    let (k, n, s) = (5, 30, 3);
    let (z0, _) = lowrank(k, n, s, 1, 7);
    let a = MeasurementOp::sample_gaussian(k, n, 40, 7).unwrap();
    let b = a.apply(&z0).unwrap();
    let out = nast(&a, &b, &NastConfig::new(s)).unwrap();
    assert!(out.solution.relative_error(&z0) < 1e-3);
    assert!(out.support.len() >= s);
    assert!(polar_decompose(&z0).support().is_subset_of(&out.support));
    let json = serde_json::to_value(&out.diagnostics).unwrap();
    assert_eq!(json["selected"].as_array().unwrap().len(), out.support.len());
}

#[test]
fn nast_config_is_validated() {
    let a = MeasurementOp::sample_gaussian(2, 5, 4, 0).unwrap();
    let b = MeasurementVector::zeros(4);
    let mut cfg = NastConfig::new(2);
    cfg.tau_thresh = 1.0;
    assert!(nast(&a, &b, &cfg).is_err());
    assert!(nast(&a, &b, &NastConfig::new(6)).is_err());
}

#[test]
fn zero_measurements_stop_on_iterate_change() {
    let a = MeasurementOp::sample_gaussian(3, 8, 6, 2).unwrap();
    let out = column_streamline(&a, &MeasurementVector::zeros(6), &StreamlineConfig::new(1)).unwrap();
    assert_eq!(out.stop, StopReason::IterateChange);
    assert_eq!(out.history.len(), 2);
    assert_eq!(out.solution.frobenius_norm(), 0.0);
}

#[test]
fn true_range_is_a_fixed_point() {
    let (k, n, s) = (6, 25, 4);
    for seed in 0..3 {
        let (z0, h0) = lowrank(k, n, s, 2, 20 + seed);
        let a = MeasurementOp::sample_gaussian(k, n, 45, 20 + seed).unwrap();
        let b = a.apply(&z0).unwrap();
        let prep = PreparedOp::new(&a);
        let res = prep.solve_streamlined(&b, &h0, &SolverConfig::default()).unwrap();
        assert!(res.objective <= l12_norm(&z0) + 1e-6);
    }
}

#[test]
fn history_is_well_formed() {
    let (k, n, s) = (6, 30, 4);
    let (z0, _) = lowrank(k, n, s, 2, 31);
    let a = MeasurementOp::sample_gaussian(k, n, 40, 31).unwrap();
    let b = a.apply(&z0).unwrap();
    let mut cfg = StreamlineConfig::new(2);
    cfg.max_iters = Some(4);
    cfg.change_eps = None;
    let out = column_streamline(&a, &b, &cfg).unwrap();
    assert_eq!(out.stop, StopReason::MaxIters);
    assert_eq!(out.history.len(), 5);
    for (q, step) in out.history.iter().enumerate() {
        assert_eq!(step.q, q);
        assert!(step.singular_values.windows(2).all(|w| w[0] >= w[1]));
        if let Some(d) = step.drift {
            assert!((0.0..=1.0).contains(&d));
        }
    }
    assert!(out.history[0].drift.is_none());
    let json: serde_json::Value = serde_json::from_str(&out.to_json()).unwrap();
    assert_eq!(json["stop"], "max_iters");
}

#[test]
fn oracle_subspace_recovers_rank_one() {
    let (k, n, s) = (6, 30, 4);
    let mut successes = 0;
    for seed in 0..5 {
        let (z0, h0) = lowrank(k, n, s, 1, 40 + seed);
        let a = MeasurementOp::sample_gaussian(k, n, 30, 40 + seed).unwrap();
        let b = a.apply(&z0).unwrap();
        let mut cfg = StreamlineConfig::new(1);
        cfg.max_iters = Some(3);
        let out = column_streamline_from(&PreparedOp::new(&a), &b, &h0, &cfg).unwrap();
        if out.solution.relative_error(&z0) < 1e-3 {
            successes += 1;
        }
    }
    assert!(successes >= 4, "{successes}/5");
}

#[test]
fn early_capture_hands_off_to_nuclear_solve() {
    let (k, n, s) = (5, 30, 3);
    let (z0, _) = lowrank(k, n, s, 1, 50);
    let a = MeasurementOp::sample_gaussian(k, n, 40, 50).unwrap();
    let b = a.apply(&z0).unwrap();
    let mut cfg = StreamlineConfig::new(1);
    cfg.early_capture = Some(2 * s);
    let out = column_streamline(&a, &b, &cfg).unwrap();
    assert_eq!(out.stop, StopReason::EarlyCapture);
    let captured = out.captured.as_ref().unwrap();
    assert!(captured.len() <= 2 * s);
    assert!(out.solution.relative_error(&z0) < 1e-3);
}

#[test]
fn streamline_config_is_validated() {
    let mut cfg = StreamlineConfig::new(3);
    assert!(cfg.validate(3, 10).is_err());
    cfg.r = 1;
    cfg.max_iters = None;
    cfg.change_eps = None;
    assert!(cfg.validate(3, 10).is_err());
    cfg.sv_eps = Some(1e-6);
    assert!(cfg.validate(3, 10).is_ok());
    cfg.column_eps = Some((10, 1e-3));
    assert!(cfg.validate(3, 10).is_err());
}

