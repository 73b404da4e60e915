use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mpemba_core::liouvillian::complex_dense;
use mpemba_core::propagation::LindbladRhs;
use mpemba_core::{
    build_hamiltonian, build_superoperator, spectral_decomposition, Boundary, DissipationSpec, Dissipator,
    HamiltonianSpec, HermitianOperator, IntegratorOptions, Method, ModelPoint, PreparedModel, SectorBasis,
    TemperatureSpec, TimeGrid, C64,
};
use std::hint::black_box;

fn model(l: usize, boundary: Boundary) -> (HermitianOperator, Dissipator) {
    let basis = SectorBasis::new(l, l / 2).unwrap();
    let mut h = build_hamiltonian(&HamiltonianSpec::xxz(l, 1.0, boundary), &basis).unwrap();
    h.eigendecompose().unwrap();
    let diss = Dissipator::dephasing(&DissipationSpec::uniform(l, 1.0).unwrap(), &basis).unwrap();
    (h, diss)
}

fn sector_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("sector_build");
    for l in [10, 12, 14] {
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, &l| {
            b.iter(|| SectorBasis::new(black_box(l), l / 2).unwrap())
        });
    }
    group.finish();
}

fn rhs_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("rhs_apply");
    for l in [8, 10] {
        let (h, diss) = model(l, Boundary::Periodic);
        let rhs = LindbladRhs::new(&h, &diss).unwrap();
        let d = diss.dim();
        let rho: Vec<C64> = (0..d * d).map(|k| C64::new((k % 7) as f64, (k % 3) as f64)).collect();
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, _| {
            b.iter(|| rhs.apply(black_box(&rho), &mut out))
        });
    }
    group.finish();
}

fn dopri_trajectory(c: &mut Criterion) {
    let spec = HamiltonianSpec::xxz(6, 1.0, Boundary::Periodic);
    let model = PreparedModel::new(
        ModelPoint::half_filled(spec, 1.0).unwrap(),
        Method::Integrate,
        IntegratorOptions::default(),
    )
    .unwrap();
    let rho0 = model.thermal(TemperatureSpec::Finite(1.0)).unwrap();
    let grid = TimeGrid::log_with_zero(1e-2, 20.0, 50).unwrap();
    let mut group = c.benchmark_group("dopri_trajectory");
    group.sample_size(10);
    group.bench_function("L6", |b| {
        b.iter(|| model.evolve(black_box(&rho0), &grid, false).unwrap())
    });
    group.finish();
}

fn spectral(c: &mut Criterion) {
    let (h, diss) = model(6, Boundary::Open);
    let sup = build_superoperator(&complex_dense(&h), &diss).unwrap();
    let mut group = c.benchmark_group("spectral_decomposition");
    group.sample_size(10);
    group.bench_function("L6_open", |b| {
        b.iter(|| spectral_decomposition(black_box(&sup)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, sector_build, rhs_apply, dopri_trajectory, spectral);
criterion_main!(benches);
