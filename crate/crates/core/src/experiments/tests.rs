use super::*;
use crate::matrix::singular_values;
use proptest::prelude::*;
use statrs::function::erf::erf;

fn spec(k: usize, n: usize, s: usize, r: usize, seed: u64) -> InstanceSpec {
    InstanceSpec { k, n, s, r, seed }
}

fn small_sweep(algorithms: Vec<Algorithm>, jobs: usize) -> SweepConfig {
    SweepConfig {
        algorithms,
        k: 3,
        n: 20,
        s: 2,
        ranks: vec![1],
        m_values: vec![24],
        trials: 2,
        master_seed: 99,
        jobs: Some(jobs),
        settings: TrialSettings::default(),
    }
}

#[test]
fn rank_one_instances_share_one_direction() {
    let inst = generate_instance(&spec(6, 30, 5, 1, 3)).unwrap();
    let h = inst.range.basis().column(0).into_owned();
    for &i in inst.support.indices() {
        let d = inst.polar.direction(i).unwrap();
        assert!((d.dot(&h).abs() - 1.0).abs() < 1e-12);
    }
    let sv = singular_values(&inst.matrix);
    assert!(sv[1] < 1e-12 * sv[0]);
    assert_eq!(inst.partition.blocks().len(), 1);
    assert!((inst.partition.lambda() - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn instances_respect_rank_and_support(k in 1usize..8, n in 1usize..25, s_frac in 0.0f64..1.0, r_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let s = 1 + ((n - 1) as f64 * s_frac) as usize;
        let r = 1 + ((k.min(s) - 1) as f64 * r_frac) as usize;
        let inst = generate_instance(&spec(k, n, s, r, seed)).unwrap();
        prop_assert_eq!(inst.polar.support(), inst.support.clone());
        prop_assert_eq!(inst.support.len(), s);
        let sv = singular_values(&inst.matrix);
        let rank = sv.iter().filter(|&&v| v > 1e-10 * sv[0]).count();
        prop_assert!(rank <= r);
        prop_assert_eq!(inst.range.dim(), r);
    }
}

#[test]
fn rank_one_column_norms_are_half_normal() {
    // Kolmogorov–Smirnov against F(x) = erf(x/√2) on 10⁴ norms
    let mut norms = Vec::new();
    for seed in 0..1000 {
        let inst = generate_instance(&spec(10, 10, 10, 1, seed)).unwrap();
        norms.extend(inst.matrix.column_norms());
    }
    norms.sort_by(f64::total_cmp);
    let len = norms.len() as f64;
    let d = norms
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let f = erf(x / std::f64::consts::SQRT_2);
            (f - j as f64 / len).abs().max(((j + 1) as f64 / len - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value
    assert!(d < 1.63 / len.sqrt(), "KS statistic {d}");
}

#[test]
fn specs_are_validated_and_hashed() {
    assert!(spec(3, 5, 6, 1, 0).validate().is_err());
    assert!(spec(3, 5, 2, 3, 0).validate().is_err());
    assert!(spec(3, 5, 2, 0, 0).validate().is_err());
    assert!(generate_instance(&spec(2, 5, 3, 3, 0)).is_err());
    let h = spec(3, 5, 2, 1, 0).hash();
    assert_eq!(h.len(), 64);
    assert_eq!(h, spec(3, 5, 2, 1, 0).hash());
    assert_ne!(h, spec(3, 5, 2, 1, 1).hash());
}

#[test]
fn sweep_csv_is_byte_identical_across_runs_and_thread_counts() {
    let bytes = |jobs| {
        let recs = run_sweep(&small_sweep(vec![Algorithm::L12], jobs)).unwrap();
        let mut buf = Vec::new();
        ResultTable::from_trials(&recs).write_csv(&mut buf).unwrap();
        buf
    };
    let first = bytes(1);
    assert_eq!(first, bytes(1));
    assert_eq!(first, bytes(2));
}

#[test]
fn trials_regenerate_from_their_record() {
    let cfg = small_sweep(vec![Algorithm::L12, Algorithm::Nast], 1);
    let recs = run_sweep(&cfg).unwrap();
    assert_eq!(recs.len(), 4);
    for rec in &recs {
        assert!(rec.error.is_none());
        assert_eq!(rec.success, rec.rel_error < SUCCESS_TOL);
        assert_eq!(rec.angular_errors.len(), rec.s);
        let again = run_trial(&spec(rec.k, rec.n, rec.s, rec.r, rec.seed), rec.m, rec.trial, rec.algorithm, &cfg.settings);
        assert!((again.rel_error - rec.rel_error).abs() <= 1e-12);
        assert_eq!(again.spec_hash, rec.spec_hash);
    }
    // both algorithms of a trial see the same instance
    assert_eq!(recs[0].seed, recs[1].seed);
}

#[test]
fn sweep_writes_csv_jsonl_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sweep(vec![Algorithm::L12], 1);
    let recs = run_sweep(&cfg).unwrap();
    write_sweep(dir.path(), &cfg, &recs).unwrap();
    let table = ResultTable::read_csv(std::fs::File::open(dir.path().join("results.csv")).unwrap()).unwrap();
    assert_eq!(table, ResultTable::from_trials(&recs));
    let lines = std::fs::read_to_string(dir.path().join("results.jsonl")).unwrap();
    let parsed: Vec<TrialRecord> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed.len(), recs.len());
    assert_eq!(parsed[0].rel_error, recs[0].rel_error);
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["master_seed"], 99);
}

#[test]
fn failed_trials_are_recorded() {
    let rec = run_trial(&spec(3, 5, 9, 1, 0), 4, 0, Algorithm::L12, &TrialSettings::default());
    assert!(rec.error.is_some());
    assert!(!rec.success);
}

#[test]
fn sweep_config_is_validated() {
    let mut cfg = small_sweep(vec![], 1);
    assert!(run_sweep(&cfg).is_err());
    cfg.algorithms = vec![Algorithm::L12];
    cfg.ranks = vec![3];
    assert!(run_sweep(&cfg).is_err());
    cfg.ranks = vec![1];
    cfg.jobs = Some(0);
    assert!(run_sweep(&cfg).is_err());
}

#[test]
fn empty_tables_emit_header_only_files() {
    for fig in [Figure::Fig6, Figure::Fig7] {
        let mut buf = Vec::new();
        emit_figure_data(&ResultTable::from_trials(&[]), fig, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("algorithm,r,m,"));
    }
    let mut t = ResultTable::new(vec!["k".into(), "s".into(), "m_value".into()]);
    let mut buf = Vec::new();
    emit_figure_data(&t, Figure::Fig8, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "k,s,mu\n");
    t.push(vec!["1".into(), "2".into(), "3".into()]).unwrap();
    assert!(t.push(vec!["1".into()]).is_err());
}

#[test]
fn missing_columns_are_reported() {
    let t = ResultTable::new(vec!["algorithm".into(), "m".into()]);
    let err = emit_figure_data(&t, Figure::Fig6, Vec::new()).unwrap_err();
    assert!(matches!(err, Error::MissingColumn(ref c) if c == "r"));
    assert!(matches!(emit_figure_data(&t, Figure::Fig3, Vec::new()), Err(Error::MissingColumn(_))));
}

#[test]
fn success_counts_aggregate_by_algorithm_rank_and_m() {
    let mk = |alg: &str, m: usize, err: f64| {
        vec![alg.to_string(), "1".to_string(), m.to_string(), err.to_string()]
    };
    let mut t = ResultTable::new(vec!["algorithm".into(), "r".into(), "m".into(), "rel_error".into()]);
    for row in [
        mk("nast", 120, 1e-4),
        mk("nast", 120, 5e-3),
        mk("nast", 110, 1e-5),
        mk("nast", 110, f64::NAN),
        mk("l12", 110, 0.5),
    ] {
        t.push(row).unwrap();
    }
    let counts = success_table(&t).unwrap();
    assert_eq!(counts.len(), 3);
    assert_eq!((counts[0].algorithm.as_str(), counts[0].m, counts[0].success), ("l12", 110, 0));
    assert_eq!((counts[1].m, counts[1].trials, counts[1].success, counts[1].near_success), (110, 2, 1, 1));
    assert_eq!((counts[2].m, counts[2].success, counts[2].near_success), (120, 1, 2));
    assert_eq!(counts[1].isotonic_rate, 0.5);
}

#[test]
fn fig5_alpha_zero_rows_equal_the_exact_threshold() {
    let table = threshold_table(Figure::Fig5).unwrap();
    let mut buf = Vec::new();
    emit_figure_data(&table, Figure::Fig5, &mut buf).unwrap();
    let data = ResultTable::read_csv(buf.as_slice()).unwrap();
    assert_eq!(data.len(), 40);
    let exact = m_soft(&ConeParams::new(10, 10, 100, 0.0, 0.5).unwrap()).m_value;
    let mut seen = 0;
    for row in data.rows() {
        let m0: f64 = row[3].parse().unwrap();
        assert!((m0 - exact).abs() < 1e-9);
        if row[1] == "0" {
            assert_eq!(row[2], row[3]);
            seen += 1;
        }
    }
    assert_eq!(seen, 2);
}

#[test]
fn fig4_quotients_fall_for_moderate_angles() {
    let table = threshold_table(Figure::Fig4).unwrap();
    let mut buf = Vec::new();
    emit_figure_data(&table, Figure::Fig4, &mut buf).unwrap();
    let data = ResultTable::read_csv(buf.as_slice()).unwrap();
    let mut prev: Option<(String, String, f64)> = None;
    for row in data.rows() {
        let alpha: f64 = row[2].parse().unwrap();
        let q: f64 = row[5].parse().unwrap();
        if alpha <= PI / 4.0 {
            assert!(q <= 1.0 + 1e-12, "{row:?}");
        }
        if let Some((c, s, q_prev)) = &prev {
            // the large column gains at every angle
            if c == "large" && *c == row[0] && *s == row[1] {
                assert!(q < *q_prev, "{row:?}");
            }
        }
        prev = Some((row[0].clone(), row[1].clone(), q));
    }
}

#[test]
fn fig8_mu_grows_with_k() {
    let table = threshold_table(Figure::Fig8).unwrap();
    assert_eq!(table.len(), 26 * 26);
    let mut buf = Vec::new();
    emit_figure_data(&table, Figure::Fig8, &mut buf).unwrap();
    let data = ResultTable::read_csv(buf.as_slice()).unwrap();
    let mut mu = BTreeMap::new();
    for row in data.rows() {
        let k: usize = row[0].parse().unwrap();
        let s: usize = row[1].parse().unwrap();
        mu.insert((s, k), row[2].parse::<f64>().unwrap());
    }
    for s in 5..=30 {
        for k in 5..30 {
            assert!(mu[&(s, k + 1)] > mu[&(s, k)], "s={s}, k={k}");
        }
    }
}

#[test]
fn fig3_grid_covers_both_column_types() {
    let table = threshold_table(Figure::Fig3).unwrap();
    assert_eq!(table.len(), 2 * 15 * 15);
    assert!(threshold_table(Figure::Fig6).is_err());
}

/// `max_{j≤i} min_{l≥i}` of weighted block means.
fn minmax_oracle(v: &[f64], w: &[f64]) -> Vec<f64> {
    let mean = |j: usize, l: usize| {
        let ws: f64 = w[j..=l].iter().sum();
        v[j..=l].iter().zip(&w[j..=l]).map(|(a, b)| a * b).sum::<f64>() / ws
    };
    (0..v.len())
        .map(|i| {
            (0..=i)
                .map(|j| (i..v.len()).map(|l| mean(j, l)).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

proptest! {
    #[test]
    fn isotonic_fit_matches_minmax_formula(pairs in proptest::collection::vec((0.0f64..1.0, 0.5f64..3.0), 1..12)) {
        let (v, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let fit = isotonic_fit(&v, &w);
        prop_assert!(fit.windows(2).all(|p| p[0] <= p[1] + 1e-15));
        for (a, b) in fit.iter().zip(minmax_oracle(&v, &w)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn isotonic_fit_keeps_sorted_input() {
    let v = [0.0, 0.1, 0.1, 0.7, 1.0];
    assert_eq!(isotonic_fit(&v, &[1.0; 5]), v.to_vec());
    assert_eq!(isotonic_fit(&[1.0, 0.0], &[1.0, 1.0]), vec![0.5, 0.5]);
}

#[test]
fn names_round_trip() {
    for a in Algorithm::ALL {
        assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
    }
    for f in Figure::ALL {
        assert_eq!(f.name().parse::<Figure>().unwrap(), f);
        assert_eq!(f.sweep(1, 0).is_some(), f.is_empirical());
    }
    assert!("fig9".parse::<Figure>().is_err());
    assert!(column_ratio("small", 3).is_err());
}

#[test]
fn l1_alternative_holds_on_a_few_instances() {
    for (m, seed) in [(15, 0), (25, 1), (40, 2)] {
        let rec = l1_alternative_trial(60, 5, m, seed, &SolverConfig::default()).unwrap();
        assert!(rec.holds, "{rec:?}");
    }
    assert!(l1_alternative_trial(5, 6, 3, 0, &SolverConfig::default()).is_err());
}
