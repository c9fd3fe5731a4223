use std::hint::black_box;

use antisync::covariance::{
    check_physicality, diffusion_matrix, drift_matrix, initial_covariance, lyapunov_rhs,
    DriftConvention,
};
use antisync::discord::{gaussian_discord, reduce};
use antisync::meanfield::{integrate, rhs, Sampling, SolverConfig};
use antisync::{DiscordOptions, MeanFieldState, SystemParams};
use criterion::{criterion_group, criterion_main, Criterion};

fn on_cycle() -> MeanFieldState {
    MeanFieldState::from_array(0.0, [12.0, -4240.0, 4.1e5, -3.0e4, 250.0, 60.0])
}

fn kernels(c: &mut Criterion) {
    let p = SystemParams::baseline();
    let s = on_cycle();
    c.bench_function("meanfield_rhs", |b| {
        b.iter(|| rhs(black_box(&s), &p).unwrap())
    });
    c.bench_function("drift_matrix", |b| {
        b.iter(|| drift_matrix(black_box(&s), &p, DriftConvention::Corrected))
    });

    let a = drift_matrix(&s, &p, DriftConvention::Corrected);
    let d = diffusion_matrix(&p);
    let v = initial_covariance(0.0).unwrap();
    c.bench_function("lyapunov_rhs", |b| {
        b.iter(|| lyapunov_rhs(black_box(&a), v.matrix(), &d))
    });
    c.bench_function("check_physicality", |b| {
        b.iter(|| check_physicality(black_box(&v)))
    });

    let mut m = *v.matrix();
    m[(0, 2)] = 0.3;
    m[(2, 0)] = 0.3;
    m[(1, 3)] = -0.3;
    m[(3, 1)] = -0.3;
    let v4 = reduce(&antisync::CovMatrix6::from_matrix(m));
    c.bench_function("gaussian_discord", |b| {
        b.iter(|| gaussian_discord(black_box(&v4), &DiscordOptions::default()).unwrap())
    });
}

fn integration(c: &mut Criterion) {
    let p = SystemParams::baseline();
    let mut g = c.benchmark_group("integrate");
    g.sample_size(10);
    g.bench_function("dp45_1e3", |b| {
        b.iter(|| {
            integrate(
                &p,
                &MeanFieldState::zero(),
                1e3,
                &SolverConfig::default(),
                &Sampling::uniform(1.0),
            )
            .unwrap()
        })
    });
    g.bench_function("rk4_1e2", |b| {
        b.iter(|| {
            integrate(
                &p,
                &MeanFieldState::zero(),
                1e2,
                &SolverConfig::rk4(1e-3),
                &Sampling::uniform(1.0),
            )
            .unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, kernels, integration);
criterion_main!(benches);
