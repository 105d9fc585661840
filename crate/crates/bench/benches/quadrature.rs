use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use revuz_bench::{perturbed, perturbed_limit, spike, unit_indicator};
use revuz_core::kernels::{self, Potential};
use revuz_core::quad::{integrate, QuadOptions};
use revuz_core::{ProcessModel, SmoothMeasure};

const TOL: f64 = 1e-9;

fn gauss_kronrod(c: &mut Criterion) {
    let f = |x: f64| (-x * x).exp() * (5.0 * x).cos();
    c.bench_function("integrate/gaussian_cosine", |b| {
        b.iter(|| integrate(f, -6.0, 6.0, &[], QuadOptions::abs(1e-12)).unwrap().value)
    });
}

fn energies(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy");
    let cases: [(&str, ProcessModel, SmoothMeasure); 3] = [
        ("free_bm/indicator", ProcessModel::FreeBm, unit_indicator()),
        ("absorbed_bm/spike(64)", ProcessModel::AbsorbedBm, spike(64)),
        (
            "killed_static/indicator",
            ProcessModel::KilledStatic,
            SmoothMeasure::indicator(0.2, 0.9),
        ),
    ];
    for (name, model, mu) in &cases {
        group.bench_function(*name, |b| b.iter(|| kernels::energy(*model, 1.0, mu, mu, TOL).unwrap()));
    }
    group.finish();
}

fn rho_ladder(c: &mut Criterion) {
    let mut group = c.benchmark_group("rho_squared/spike");
    let zero = SmoothMeasure::zero();
    for n in [4u32, 16, 64] {
        let mu = spike(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &mu, |b, mu| {
            b.iter(|| kernels::rho_squared(ProcessModel::AbsorbedBm, mu, &zero, TOL).unwrap())
        });
    }
    group.finish();
}

fn perturbed_distance(c: &mut Criterion) {
    let limit = perturbed_limit();
    c.bench_function("rho_squared/killed_static/perturbed(16)", |b| {
        b.iter(|| kernels::rho_squared(ProcessModel::KilledStatic, &perturbed(16), &limit, TOL).unwrap())
    });
}

fn potential(c: &mut Criterion) {
    let mu = unit_indicator();
    let pot = Potential::new(ProcessModel::FreeBm, 1.0, &mu, TOL).unwrap();
    c.bench_function("potential/free_bm/eval", |b| {
        let mut x = -2.0;
        b.iter(|| {
            x = if x > 3.0 { -2.0 } else { x + 1e-3 };
            pot.eval(x)
        })
    });
}

criterion_group!(
    benches,
    gauss_kronrod,
    energies,
    rho_ladder,
    perturbed_distance,
    potential
);
criterion_main!(benches);
