//! J1–J2 XXZ chain Hamiltonian on a sector basis.
//!
//! ```text
//! H = Σ_{n=1,2} Σ_j J_n ( S^x_j S^x_{j+n} + S^y_j S^y_{j+n} + Δ_n S^z_j S^z_{j+n} )
//! ```
//!
//! Energies are in units of the exchange scale `J` (ħ = 1).

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sector_basis::{SectorBasis, SparseOperator};

/// Largest dimension for which a dense eigensystem is computed.
pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "open" | "obc" => Ok(Boundary::Open),
            "periodic" | "pbc" => Ok(Boundary::Periodic),
            other => Err(format!("unknown boundary '{other}' (expected open or periodic)")),
        }
    }
}

/// Couplings and geometry of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub j1: f64,
    pub j2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub boundary: Boundary,
    pub num_sites: usize,
}

impl HamiltonianSpec {
    /// Nearest-neighbour XXZ chain with `J1 = -1` (ferromagnetic exchange),
    /// so that `Δ = 1` and `Δ = -1` are the two isotropic critical points.
    pub fn xxz(num_sites: usize, delta: f64, boundary: Boundary) -> Self {
        Self {
            j1: -1.0,
            j2: 0.0,
            delta1: delta,
            delta2: 0.0,
            boundary,
            num_sites,
        }
    }

    /// Isotropic-anisotropy J1–J2 chain with `J2 = ratio * J1` and
    /// `Δ1 = Δ2 = delta`.
    pub fn j1j2(num_sites: usize, j1: f64, ratio: f64, delta: f64, boundary: Boundary) -> Self {
        Self {
            j1,
            j2: ratio * j1,
            delta1: delta,
            delta2: delta,
            boundary,
            num_sites,
        }
    }

    /// The same chain with every coupling negated.
    pub fn negated(&self) -> Self {
        Self {
            j1: -self.j1,
            j2: -self.j2,
            ..*self
        }
    }

    /// Bonds `(j, j + n)` of range `n`, wrapped for periodic chains.
    pub fn bonds(&self, range: usize) -> Result<Vec<(usize, usize)>> {
        let l = self.num_sites;
        match self.boundary {
            Boundary::Open => Ok((0..l.saturating_sub(range)).map(|j| (j, j + range)).collect()),
            Boundary::Periodic => {
                if range >= l {
                    return Err(Error::Domain(format!(
                        "periodic chain of {l} sites cannot host range-{range} bonds"
                    )));
                }
                Ok((0..l).map(|j| (j, (j + range) % l)).collect())
            }
        }
    }
}

/// Full eigensystem of a real symmetric operator.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    /// Ascending eigenvalues.
    pub energies: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `energies`.
    pub vectors: Mat<f64>,
}

/// A real symmetric operator on a sector, stored sparsely, with an optional
/// dense eigensystem.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    terms: SparseOperator,
    eigen: Option<Eigensystem>,
}

impl HermitianOperator {
    pub fn from_sparse(terms: SparseOperator) -> Self {
        Self { terms, eigen: None }
    }

    pub fn from_dense(m: &Mat<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut triplets = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                if m[(r, c)] != 0.0 {
                    triplets.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_sparse(SparseOperator::from_triplets(m.nrows(), triplets))
    }

    pub fn dim(&self) -> usize {
        self.terms.dim()
    }

    pub fn sparse(&self) -> &SparseOperator {
        &self.terms
    }

    pub fn to_dense(&self) -> Mat<f64> {
        self.terms.to_dense()
    }

    /// The operator `-H`, with the eigensystem carried over when present.
    pub fn negated(&self) -> Self {
        let terms = SparseOperator::zeros(self.dim()).add_scaled(&self.terms, -1.0);
        let eigen = self.eigen.as_ref().map(|e| {
            let n = e.energies.len();
            Eigensystem {
                energies: e.energies.iter().rev().map(|&x| -x).collect(),
                vectors: Mat::from_fn(n, n, |r, c| e.vectors[(r, n - 1 - c)]),
            }
        });
        Self { terms, eigen }
    }

    pub fn eigensystem(&self) -> Option<&Eigensystem> {
        self.eigen.as_ref()
    }

    pub fn energies(&self) -> Option<&[f64]> {
        self.eigen.as_ref().map(|e| e.energies.as_slice())
    }

    /// Computes the dense eigensystem; a no-op if it already exists.
    pub fn eigendecompose(&mut self) -> Result<()> {
        self.eigendecompose_with_cap(DEFAULT_DENSE_CAP)
    }

    pub fn eigendecompose_with_cap(&mut self, dense_cap: usize) -> Result<()> {
        if self.eigen.is_some() {
            return Ok(());
        }
        let n = self.dim();
        if n > dense_cap {
            return Err(Error::Resource(format!(
                "dense eigensystem of dimension {n} exceeds cap {dense_cap}"
            )));
        }
        let dense = self.to_dense();
        let evd = dense
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
        let u = evd.U();
        self.eigen = Some(Eigensystem {
            energies: order.iter().map(|&k| s[k]).collect(),
            vectors: Mat::from_fn(n, n, |r, c| u[(r, order[c])]),
        });
        Ok(())
    }

    /// `max_n ‖H ψ_n − E_n ψ_n‖`, or `None` without an eigensystem.
    pub fn eigen_residual(&self) -> Option<f64> {
        let e = self.eigen.as_ref()?;
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let mut norm2 = 0.0;
            for r in 0..n {
                let hv: f64 = self.terms.row(r).map(|(c, v)| v * e.vectors[(c, k)]).sum();
                let d = hv - e.energies[k] * e.vectors[(r, k)];
                norm2 += d * d;
            }
            worst = worst.max(norm2.sqrt());
        }
        Some(worst)
    }
}

/// Assembles the Hamiltonian of `spec` on `basis`.
pub fn build_hamiltonian(spec: &HamiltonianSpec, basis: &SectorBasis) -> Result<HermitianOperator> {
    if spec.num_sites != basis.num_sites() {
        return Err(Error::shape(
            format!("{} sites", spec.num_sites),
            format!("basis with {} sites", basis.num_sites()),
        ));
    }
    let mut triplets = Vec::new();
    for (range, coupling, anisotropy) in [(1, spec.j1, spec.delta1), (2, spec.j2, spec.delta2)] {
        if coupling == 0.0 {
            continue;
        }
        for (i, j) in spec.bonds(range)? {
            let ff = basis.bond_flip_flop(i, j)?;
            triplets.extend(ff.triplets().map(|(r, c, v)| (r, c, coupling * v)));
            if anisotropy != 0.0 {
                let zz = basis.zz_coupling(i, j)?;
                triplets.extend(
                    zz.into_iter()
                        .enumerate()
                        .map(|(k, v)| (k, k, coupling * anisotropy * v)),
                );
            }
        }
    }
    Ok(HermitianOperator::from_sparse(SparseOperator::from_triplets(
        basis.dim(),
        triplets,
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_xxz_matrix() {
        let b = SectorBasis::new(2, 1).unwrap();
        let spec = HamiltonianSpec::xxz(2, 1.0, Boundary::Open);
        let mut h = build_hamiltonian(&spec, &b).unwrap();
        let m = h.to_dense();
        assert_eq!(m[(0, 0)], 0.25);
        assert_eq!(m[(1, 1)], 0.25);
        assert_eq!(m[(0, 1)], -0.5);
        assert_eq!(m[(1, 0)], -0.5);
        h.eigendecompose().unwrap();
        let e = h.energies().unwrap();
        assert!((e[0] + 0.25).abs() < 1e-14 && (e[1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn zero_couplings_give_zero_matrix() {
        let b = SectorBasis::new(6, 3).unwrap();
        let spec = HamiltonianSpec {
            j1: 0.0,
            j2: 0.0,
            ..HamiltonianSpec::xxz(6, 1.0, Boundary::Periodic)
        };
        let mut h = build_hamiltonian(&spec, &b).unwrap();
        assert_eq!(h.sparse().nnz(), 0);
        h.eigendecompose().unwrap();
        assert!(h.energies().unwrap().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn diagonal_eigensystem_is_sorted_permutation() {
        let mut m = Mat::<f64>::zeros(3, 3);
        m[(0, 0)] = 3.0;
        m[(1, 1)] = 1.0;
        m[(2, 2)] = 2.0;
        let mut h = HermitianOperator::from_dense(&m);
        h.eigendecompose().unwrap();
        let e = h.eigensystem().unwrap();
        assert_eq!(e.energies, vec![1.0, 2.0, 3.0]);
        for (col, row) in [(0, 1), (1, 2), (2, 0)] {
            assert!((e.vectors[(row, col)].abs() - 1.0).abs() < 1e-14);
        }
        // idempotent
        h.eigendecompose().unwrap();
        assert_eq!(h.energies().unwrap(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn eigenvectors_orthonormal_and_residual_small() {
        let b = SectorBasis::new(8, 4).unwrap();
        let spec = HamiltonianSpec::j1j2(8, -1.0, -0.2, 0.7, Boundary::Periodic);
        let mut h = build_hamiltonian(&spec, &b).unwrap();
        h.eigendecompose().unwrap();
        let v = &h.eigensystem().unwrap().vectors;
        let vtv = v.transpose() * v;
        for r in 0..70 {
            for c in 0..70 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((vtv[(r, c)] - want).abs() < 1e-12);
            }
        }
        let norm = h.sparse().max_abs() * 70.0;
        assert!(h.eigen_residual().unwrap() <= 1e-10 * norm);
        assert_eq!(h.sparse().asymmetry(), 0.0);
        assert!(h.energies().unwrap().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn dense_cap_is_enforced() {
        let b = SectorBasis::new(6, 3).unwrap();
        let mut h = build_hamiltonian(&HamiltonianSpec::xxz(6, 1.0, Boundary::Open), &b).unwrap();
        assert!(matches!(h.eigendecompose_with_cap(10), Err(Error::Resource(_))));
    }

    #[test]
    fn periodic_range_must_fit() {
        let b = SectorBasis::new(2, 1).unwrap();
        let spec = HamiltonianSpec::j1j2(2, -1.0, 0.5, 1.0, Boundary::Periodic);
        assert!(matches!(build_hamiltonian(&spec, &b), Err(Error::Domain(_))));
        let open = HamiltonianSpec {
            boundary: Boundary::Open,
            ..spec
        };
        assert!(build_hamiltonian(&open, &b).is_ok());
    }

    #[test]
    fn site_count_mismatch() {
        let b = SectorBasis::new(4, 2).unwrap();
        let spec = HamiltonianSpec::xxz(6, 1.0, Boundary::Open);
        assert!(matches!(build_hamiltonian(&spec, &b), Err(Error::Shape { .. })));
    }

    #[test]
    fn negation_flips_spectrum() {
        let b = SectorBasis::new(6, 3).unwrap();
        let spec = HamiltonianSpec::xxz(6, 0.4, Boundary::Periodic);
        let mut h = build_hamiltonian(&spec, &b).unwrap();
        h.eigendecompose().unwrap();
        let n = h.negated();
        let (e, en) = (h.energies().unwrap(), n.energies().unwrap());
        for k in 0..e.len() {
            assert_eq!(en[k], -e[e.len() - 1 - k]);
        }
    }
}
