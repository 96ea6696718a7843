use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use metastab::dynamics::{sa_velocity, usa_velocity};
use metastab::energy::{energy, grad_angular, hessian_angular};
use metastab::initgen::{gen_separated_measure, sample_uniform_sphere, MeasureSpec};
use metastab::meanfield::integrate_meanfield;
use metastab::renorm::{integrate_modified, StaircaseSpec};
use metastab::{integrate, AngularConfiguration, IntegratorSpec, Model, Scheme};

fn velocities(c: &mut Criterion) {
    let mut g = c.benchmark_group("velocity");
    for n in [16, 64, 256] {
        let x = sample_uniform_sphere(8, n, 1).unwrap();
        g.bench_with_input(BenchmarkId::new("sa", n), &x, |b, x| b.iter(|| sa_velocity(black_box(x), 9.0)));
        g.bench_with_input(BenchmarkId::new("usa", n), &x, |b, x| b.iter(|| usa_velocity(black_box(x), 9.0)));
        g.bench_with_input(BenchmarkId::new("energy", n), &x, |b, x| b.iter(|| energy(black_box(x), 9.0)));
    }
    g.finish();
}

fn angular(c: &mut Criterion) {
    let theta: Vec<f64> = (0..32).map(|i| 0.19 * i as f64).collect();
    let w = vec![1.0; 32];
    c.bench_function("grad_angular/32", |b| b.iter(|| grad_angular(black_box(&theta), &w, 20.0)));
    c.bench_function("hessian_angular/32", |b| b.iter(|| hessian_angular(black_box(&theta), &w, 20.0)));
}

fn trajectories(c: &mut Criterion) {
    let mut g = c.benchmark_group("trajectory");
    g.sample_size(10);
    let x = sample_uniform_sphere(3, 32, 2).unwrap();
    let spec = IntegratorSpec::new(Scheme::Rk4Project, 0.01, 5.0).with_cadence(50);
    g.bench_function("rk4_usa_n32_500_steps", |b| b.iter(|| integrate(&Model::usa(10.0), &x, &spec, &mut []).unwrap()));

    let ladder = AngularConfiguration::uniform(vec![0.04, 0.08, 0.16, 0.32, 0.64]);
    g.bench_function("staircase_n5_beta100", |b| {
        b.iter(|| integrate_modified(black_box(&ladder), &StaircaseSpec::new(100.0)).unwrap())
    });

    let spec_mf = MeasureSpec { dim: 2, k: 2, eps: 0.01, beta: 60.0, atoms_per_cap: 64, centers: None };
    let (mu, cert) = gen_separated_measure(&spec_mf, 0).unwrap();
    let mf = IntegratorSpec::new(Scheme::Rk4Project, 0.02, 2.0).with_cadence(10);
    g.bench_function("meanfield_128_atoms_100_steps", |b| {
        b.iter(|| integrate_meanfield(&mu, 60.0, &mf, Some(&cert)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, velocities, angular, trajectories);
criterion_main!(benches);
