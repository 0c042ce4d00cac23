use std::hint::black_box;

use colsparse::certificates::{find_exact_cert, find_soft_cert};
use colsparse::recovery::{column_streamline_prepared, nast_prepared};
use colsparse::{NastConfig, PreparedOp, SolverConfig, StreamlineConfig};
use colsparse_bench::fixture;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn recovery(c: &mut Criterion) {
    let mut g = c.benchmark_group("recovery");
    g.sample_size(10);
    let cfg = SolverConfig::default();
    for m in [200, 250] {
        let (_, op, b) = fixture(1, m, 0);
        let prep = PreparedOp::new(&op);
        g.bench_with_input(BenchmarkId::new("solve_l12", m), &m, |bch, _| {
            bch.iter(|| prep.solve_l12(black_box(&b), &cfg))
        });
        g.bench_with_input(BenchmarkId::new("nast", m), &m, |bch, _| {
            bch.iter(|| nast_prepared(&prep, black_box(&b), &NastConfig::new(10)))
        });
    }
    let (_, op, b) = fixture(2, 140, 0);
    let prep = PreparedOp::new(&op);
    let mut scfg = StreamlineConfig::new(2);
    scfg.max_iters = Some(3);
    g.bench_function("streamline_3_iters_m140", |bch| {
        bch.iter(|| column_streamline_prepared(&prep, black_box(&b), &scfg))
    });
    g.bench_function("prepare_m250", |bch| bch.iter(|| PreparedOp::new(black_box(&op))));
    g.finish();
}

fn certificates(c: &mut Criterion) {
    let mut g = c.benchmark_group("certificates");
    g.sample_size(10);
    let cfg = SolverConfig::default();
    let (inst, op, _) = fixture(1, 280, 0);
    g.bench_function("find_exact_m280", |bch| {
        bch.iter(|| find_exact_cert(&op, black_box(&inst.polar), &inst.support, &cfg))
    });
    let (inst, op, _) = fixture(1, 220, 0);
    let w = inst.polar.weights();
    let i_star = (0..w.len()).max_by(|&x, &y| w[x].total_cmp(&w[y])).unwrap();
    g.bench_function("find_soft_m220", |bch| {
        bch.iter(|| find_soft_cert(&op, black_box(&inst.polar), &inst.support, i_star, std::f64::consts::PI / 10.0, &cfg))
    });
    g.finish();
}

criterion_group!(benches, recovery, certificates);
criterion_main!(benches);
