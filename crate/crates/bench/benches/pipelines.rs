use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use serde_json::Map;

use shiftspec_core::classify::{classify_point, estimate_prime_period, ClassificationConfig};
use shiftspec_core::flow::{advance_flow, exit_time, FlowConfig};
use shiftspec_core::growth::gamma2_estimate;
use shiftspec_core::semigroup::apply_u;
use shiftspec_core::{builtin, Problem, ProblemConfig};

fn problem(name: &str) -> Problem {
    builtin(name, &Map::new()).unwrap()
}

fn half_line() -> Problem {
    ProblemConfig::from_json(
        r#"{"custom": {
            "dimension": 1,
            "field": ["1"],
            "h": "0.7",
            "domain": {"box": [[0.0, null]]},
            "p": 2.0,
            "kappa": 1.0,
            "sample_box": [[0.0, 30.0]]
        }}"#,
    )
    .unwrap()
    .build()
    .unwrap()
}

fn bench_flow(c: &mut Criterion) {
    let cfg = FlowConfig::default();
    let rotation = problem("rotation");
    c.bench_function("advance_flow/rotation_10_units", |b| {
        b.iter(|| advance_flow(&rotation, black_box(&[1.0, 0.0]), black_box(10.0), &cfg).unwrap())
    });
    let vfp = problem("vfp_fourier");
    c.bench_function("advance_flow/vfp_5_units", |b| {
        b.iter(|| advance_flow(&vfp, black_box(&[1.0, 0.0]), black_box(5.0), &cfg).unwrap())
    });
    let slab = problem("slab_constant");
    c.bench_function("exit_time/slab_with_bisection", |b| {
        b.iter(|| exit_time(&slab, black_box(&[0.3]), 5.0, &cfg).unwrap())
    });
}

fn bench_classification(c: &mut Criterion) {
    let rotation = problem("rotation");
    let cfg = ClassificationConfig::with_horizon(20.0);
    c.bench_function("classify_point/rotation_periodic", |b| {
        b.iter(|| classify_point(&rotation, black_box(&[0.8, 0.3]), &cfg).unwrap())
    });
    c.bench_function("prime_period/rotation", |b| {
        b.iter(|| estimate_prime_period(&rotation, black_box(&[0.8, 0.3]), &cfg).unwrap())
    });
}

fn bench_spectral(c: &mut Criterion) {
    let hl = half_line();
    let cfg = ClassificationConfig::with_horizon(25.0);
    let points: Vec<Vec<f64>> = (1..=12).map(|i| vec![2.0 * i as f64]).collect();
    let sample = shiftspec_core::classify::classify_sample(&hl, &points, &cfg)
        .unwrap()
        .points;
    let grid: Vec<f64> = (1..=10).map(|k| 1.5 * k as f64).collect();
    c.bench_function("gamma2/half_line_12_points", |b| {
        b.iter(|| gamma2_estimate(&hl, black_box(&sample), &grid, &cfg.flow).unwrap())
    });

    let rotation = problem("rotation");
    let f = |x: &[f64]| num_complex::Complex64::new(x[0], 0.0);
    c.bench_function("apply_u/rotation_quarter_turn", |b| {
        b.iter(|| {
            apply_u(
                &rotation,
                &f,
                std::f64::consts::FRAC_PI_2,
                black_box(&[1.0, 0.0]),
                &cfg.flow,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, bench_flow, bench_classification, bench_spectral);
criterion_main!(benches);
