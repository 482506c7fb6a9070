use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use irw::critical::conjectured_critical_n;
use irw::lyapunov::{ergodic_certificate_search, ErgodicSearchOptions};
use irw::nonlinear::{bd_stationary, evolve_law, gamma_fixed_point, DEFAULT_TRUNCATION};
use irw::sim::Engine;
use irw::{ModelSpec, ParticleState, ProbabilityVector};

fn engine_events(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine");
    for n in [10, 100, 1000] {
        let model = ModelSpec::small_jump(n, 0.2, 3.0).unwrap();
        group.bench_function(format!("100k events, N={n}"), |b| {
            b.iter_batched(
                || (Engine::new(&model, &ParticleState::zeros(n)).unwrap(), irw::rng::stream(1, &[n as u64])),
                |(mut engine, mut rng)| {
                    for _ in 0..100_000 {
                        black_box(engine.advance(f64::INFINITY, &mut rng).unwrap());
                    }
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn nonlinear(c: &mut Criterion) {
    let fp = gamma_fixed_point(0.5, 3.0, &ProbabilityVector::point_mass(0), 1000, 1e-10).unwrap();
    c.bench_function("gamma map at the fixed point", |b| {
        b.iter(|| bd_stationary(black_box(&fp.measure), 0.5, 3.0, DEFAULT_TRUNCATION).unwrap())
    });
    c.bench_function("fixed point from the origin", |b| {
        b.iter(|| gamma_fixed_point(0.5, 3.0, &ProbabilityVector::point_mass(0), 1000, 1e-10).unwrap())
    });
    c.bench_function("master equation to T=5", |b| {
        b.iter(|| evolve_law(&ProbabilityVector::point_mass(0), 0.0, 2.0, 5.0, 1e-8).unwrap())
    });
}

fn certificates(c: &mut Criterion) {
    c.bench_function("critical root N=10^4", |b| {
        b.iter(|| conjectured_critical_n(black_box(10_000), 1.0).unwrap())
    });
    let opts = ErgodicSearchOptions {
        box_radius: 15,
        ..Default::default()
    };
    c.bench_function("ergodic search N=3 box 15", |b| {
        b.iter(|| ergodic_certificate_search(3, 0.1, 2.0, &opts).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = engine_events, nonlinear, certificates
}
criterion_main!(benches);
