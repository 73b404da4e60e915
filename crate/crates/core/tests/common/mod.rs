//! Brute-force reference constructions shared by the integration tests.
#![allow(dead_code)]

use faer::Mat;
use mpemba_core::{Boundary, HamiltonianSpec, SectorBasis, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |r, col| a[(r / br, col / bc)] * b[(r % br, col % bc)])
}

/// Local spin-1/2 operators in the basis (|down>, |up>).
pub fn spin_ops() -> [Mat<C64>; 3] {
    let sx = Mat::from_fn(2, 2, |r, col| if r != col { c(0.5) } else { c(0.0) });
    let sy = Mat::from_fn(2, 2, |r, col| match (r, col) {
        (1, 0) => C64::new(0.0, 0.5),
        (0, 1) => C64::new(0.0, -0.5),
        _ => c(0.0),
    });
    let sz = Mat::from_fn(2, 2, |r, col| match (r, col) {
        (0, 0) => c(-0.5),
        (1, 1) => c(0.5),
        _ => c(0.0),
    });
    [sx, sy, sz]
}

/// `op` acting on `site` of an `l`-site chain; site 0 is the least
/// significant bit of the full-space index.
pub fn site_op(op: &Mat<C64>, site: usize, l: usize) -> Mat<C64> {
    let id = Mat::<C64>::identity(2, 2);
    let mut out = Mat::<C64>::identity(1, 1);
    for s in (0..l).rev() {
        out = kron(&out, if s == site { op } else { &id });
    }
    out
}

/// Full `2^L` Hamiltonian from tensor products of spin operators.
pub fn full_hamiltonian(spec: &HamiltonianSpec) -> Mat<C64> {
    let l = spec.num_sites;
    let n = 1usize << l;
    let [sx, sy, sz] = spin_ops();
    let ops: Vec<[Mat<C64>; 3]> = (0..l)
        .map(|j| [site_op(&sx, j, l), site_op(&sy, j, l), site_op(&sz, j, l)])
        .collect();
    let mut h = Mat::<C64>::zeros(n, n);
    for (range, j, delta) in [(1, spec.j1, spec.delta1), (2, spec.j2, spec.delta2)] {
        if j == 0.0 {
            continue;
        }
        let bonds: Vec<(usize, usize)> = match spec.boundary {
            Boundary::Open => (0..l).filter(|j| j + range < l).map(|j| (j, j + range)).collect(),
            Boundary::Periodic => (0..l).map(|j| (j, (j + range) % l)).collect(),
        };
        for (a, b) in bonds {
            let term =
                &ops[a][0] * &ops[b][0] + &ops[a][1] * &ops[b][1] + (&ops[a][2] * &ops[b][2]) * faer::Scale(c(delta));
            h += term * faer::Scale(c(j));
        }
    }
    h
}

/// `P† A P` with `P` the isometry onto the sector configurations.
pub fn project(full: &Mat<C64>, basis: &SectorBasis) -> Mat<C64> {
    let cfg = basis.configs();
    Mat::from_fn(cfg.len(), cfg.len(), |r, col| {
        full[(cfg[r] as usize, cfg[col] as usize)]
    })
}

/// Total magnetization on the full space.
pub fn full_magnetization(l: usize) -> Mat<C64> {
    let [_, _, sz] = spin_ops();
    let mut m = Mat::<C64>::zeros(1 << l, 1 << l);
    for j in 0..l {
        m += site_op(&sz, j, l);
    }
    m
}

pub fn real_to_complex(m: &Mat<f64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |r, col| c(m[(r, col)]))
}

/// Random Hermitian, positive, unit-trace `d × d` matrix.
pub fn random_density(d: usize, rng: &mut impl Rng) -> Mat<C64> {
    let a = Mat::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let p = &a * a.adjoint();
    let tr: C64 = (0..d).map(|k| p[(k, k)]).sum();
    p * faer::Scale(tr.inv())
}

/// Random Hermitian matrix (not normalized).
pub fn random_hermitian(d: usize, rng: &mut impl Rng) -> Mat<C64> {
    let a = Mat::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (&a + a.adjoint()) * faer::Scale(c(0.5))
}

pub fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    (a - b).norm_max()
}
