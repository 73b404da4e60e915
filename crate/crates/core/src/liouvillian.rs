//! Lindblad generator with diagonal (dephasing-type) jump operators.
//!
//! ```text
//! dρ/dt = -i[H, ρ] + Σ_j γ_j ( L_j ρ L_j† − ½{L_j† L_j, ρ} )
//! ```
//!
//! Vectorization is column stacking, `vec[a + b d] = ρ[a, b]`, so that
//! `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.
//!
//! The full spectrum is obtained from the real matrix that represents the
//! generator in an orthonormal basis of Hermitian matrices (the generator
//! maps Hermitian matrices to Hermitian matrices). Left modes are the rows
//! of the inverse right-mode matrix, which biorthonormalizes degenerate
//! clusters without any pairing step.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HermitianOperator;
use crate::sector_basis::SectorBasis;
use crate::thermal::DensityMatrix;

/// Largest sector dimension `d` for which the dense `d² × d²` generator is built.
pub const DEFAULT_SUPEROPERATOR_CAP: usize = 128;

/// Biorthonormality residual above which a spectrum is treated as defective.
pub const BIORTHONORMALITY_LIMIT: f64 = 1e-6;

/// Real part above which an eigenvalue counts as a zero mode.
pub const ZERO_MODE_THRESHOLD: f64 = 1e-9;

/// Sort resolution for eigenvalue ties.
const ORDER_RESOLUTION: f64 = 1e-9;

/// Relative distance below which eigenvalues are treated as one cluster.
const CLUSTER_TOLERANCE: f64 = 1e-4;

/// Relative spread of a cluster block below which it counts as `λ I`.
const SEMISIMPLE_TOLERANCE: f64 = 1e-9;

/// Smallest acceptable `σ_min / σ_max` of a cluster's eigenvector matrix.
const BLOCK_CONDITIONING: f64 = 1e-6;

const SUBSPACE_ITERATIONS: usize = 60;
const SUBSPACE_TOLERANCE: f64 = 1e-13;
const SUBSPACE_ACCEPT: f64 = 1e-9;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Per-site dephasing rates for jumps `L_j = S^z_j + 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationSpec {
    rates: Vec<f64>,
}

impl DissipationSpec {
    pub fn uniform(num_sites: usize, gamma: f64) -> Result<Self> {
        Self::per_site(vec![gamma; num_sites])
    }

    pub fn per_site(rates: Vec<f64>) -> Result<Self> {
        if let Some(bad) = rates.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return Err(Error::Domain(format!(
                "dephasing rates must be finite and >= 0, got {bad}"
            )));
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// True when every rate vanishes.
    pub fn is_trivial(&self) -> bool {
        self.rates.iter().all(|&g| g == 0.0)
    }
}

/// One jump channel with a real diagonal jump operator.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub rate: f64,
    pub diagonal: Vec<f64>,
}

/// Dissipator restricted to a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Dissipator {
    dim: usize,
    channels: Vec<JumpChannel>,
}

impl Dissipator {
    /// Dephasing `L_j = S^z_j + 1/2` on every site of `basis`.
    pub fn dephasing(spec: &DissipationSpec, basis: &SectorBasis) -> Result<Self> {
        if spec.rates().len() != basis.num_sites() {
            return Err(Error::shape(
                format!("{} rates", basis.num_sites()),
                format!("{} rates", spec.rates().len()),
            ));
        }
        let channels = spec
            .rates()
            .iter()
            .enumerate()
            .filter(|(_, &g)| g != 0.0)
            .map(|(j, &g)| {
                Ok(JumpChannel {
                    rate: g,
                    diagonal: basis.up_projector_diagonal(j)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            dim: basis.dim(),
            channels,
        })
    }

    /// Arbitrary diagonal Hermitian jumps.
    pub fn from_channels(dim: usize, channels: Vec<JumpChannel>) -> Result<Self> {
        for ch in &channels {
            if ch.diagonal.len() != dim {
                return Err(Error::shape(dim, ch.diagonal.len()));
            }
            if !ch.rate.is_finite() || ch.rate < 0.0 {
                return Err(Error::Domain(format!("jump rate must be >= 0, got {}", ch.rate)));
            }
        }
        Ok(Self { dim, channels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    /// `K[a, b]` such that the dissipator acts as `ρ[a, b] ↦ K[a, b] ρ[a, b]`:
    /// `K[a, b] = −½ Σ_j γ_j (l_j[a] − l_j[b])²` for real diagonal jumps.
    pub fn coherence_rates(&self) -> Vec<f64> {
        let d = self.dim;
        let mut k = vec![0.0; d * d];
        for ch in &self.channels {
            for b in 0..d {
                for a in 0..d {
                    let diff = ch.diagonal[a] - ch.diagonal[b];
                    k[a + b * d] -= 0.5 * ch.rate * diff * diff;
                }
            }
        }
        k
    }
}

/// Dense complex copy of a real sparse Hamiltonian.
pub fn complex_dense(h: &HermitianOperator) -> Mat<C64> {
    let real = h.to_dense();
    Mat::from_fn(h.dim(), h.dim(), |r, c| C64::new(real[(r, c)], 0.0))
}

fn check_square(m: &Mat<C64>, dim: usize, what: &str) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::shape(
            format!("{what} {dim}x{dim}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

fn diag_matrix(diag: &[f64]) -> Mat<C64> {
    let n = diag.len();
    Mat::from_fn(n, n, |r, c| if r == c { C64::new(diag[r], 0.0) } else { ZERO })
}

/// Lindblad right-hand side evaluated from matrix products.
pub fn apply_lindblad_rhs(h: &Mat<C64>, diss: &Dissipator, rho: &Mat<C64>) -> Result<Mat<C64>> {
    let d = diss.dim();
    check_square(h, d, "Hamiltonian")?;
    check_square(rho, d, "density matrix")?;
    let mut out = (h * rho - rho * h) * faer::Scale(-I);
    for ch in diss.channels() {
        let l = diag_matrix(&ch.diagonal);
        let l_dag = l.adjoint().to_owned();
        let ldl = &l_dag * &l;
        let term = &l * rho * &l_dag - (&ldl * rho + rho * &ldl) * faer::Scale(C64::new(0.5, 0.0));
        out += term * faer::Scale(C64::new(ch.rate, 0.0));
    }
    Ok(out)
}

/// `out += scale · (x ⊗ y)`, skipping zero entries of `x`.
fn add_kron(out: &mut Mat<C64>, scale: C64, x: &Mat<C64>, y: &Mat<C64>) {
    let d = y.nrows();
    for xc in 0..x.ncols() {
        for xr in 0..x.nrows() {
            let xv = x[(xr, xc)];
            if xv == ZERO {
                continue;
            }
            let s = scale * xv;
            for yc in 0..d {
                let col = xc * d + yc;
                for yr in 0..d {
                    let yv = y[(yr, yc)];
                    if yv != ZERO {
                        out[(xr * d + yr, col)] += s * yv;
                    }
                }
            }
        }
    }
}

/// Dense `d² × d²` generator in the column-stacking convention.
pub fn build_superoperator(h: &Mat<C64>, diss: &Dissipator) -> Result<Mat<C64>> {
    build_superoperator_with_cap(h, diss, DEFAULT_SUPEROPERATOR_CAP)
}

pub fn build_superoperator_with_cap(h: &Mat<C64>, diss: &Dissipator, dim_cap: usize) -> Result<Mat<C64>> {
    let d = diss.dim();
    check_square(h, d, "Hamiltonian")?;
    if d > dim_cap {
        return Err(Error::Resource(format!(
            "superoperator for sector dimension {d} exceeds cap {dim_cap}; use the integrator"
        )));
    }
    let n = d * d;
    let id = Mat::<C64>::identity(d, d);
    let h_t = h.transpose().to_owned();
    let mut sup = Mat::<C64>::zeros(n, n);
    add_kron(&mut sup, -I, &id, h);
    add_kron(&mut sup, I, &h_t, &id);
    for ch in diss.channels() {
        let g = C64::new(ch.rate, 0.0);
        let l = diag_matrix(&ch.diagonal);
        let l_conj = l.conjugate().to_owned();
        let ldl = l.adjoint() * &l;
        let ldl_t = ldl.transpose().to_owned();
        add_kron(&mut sup, g, &l_conj, &l);
        add_kron(&mut sup, g * -0.5, &id, &ldl);
        add_kron(&mut sup, g * -0.5, &ldl_t, &id);
    }
    Ok(sup)
}

/// Applies `sup` to `vec(ρ)` and reshapes the result.
pub fn apply_superoperator(sup: &Mat<C64>, rho: &DensityMatrix) -> Mat<C64> {
    let d = rho.dim();
    let v = rho.to_vec();
    let mut out = Mat::<C64>::zeros(d, d);
    for (j, &x) in v.iter().enumerate() {
        if x == ZERO {
            continue;
        }
        let col = sup.col_as_slice(j);
        for (i, &s) in col.iter().enumerate() {
            out[(i % d, i / d)] += s * x;
        }
    }
    out
}

/// Orthonormal basis of Hermitian `d × d` matrices, one per vectorized index.
///
/// Column `k = a + b d` of the change of basis is `E_aa` when `a == b`,
/// `(E_ab + E_ba)/√2` when `a < b`, and `i(E_ba − E_ab)/√2` when `a > b`.
/// Every row and every column has at most two nonzeros.
struct HermitianBasis {
    d: usize,
}

impl HermitianBasis {
    /// Nonzeros of column `k` as `(row, value)`.
    fn column(&self, k: usize) -> [(usize, C64); 2] {
        let d = self.d;
        let (a, b) = (k % d, k / d);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        if a == b {
            [(k, C64::new(1.0, 0.0)), (k, ZERO)]
        } else if a < b {
            [(a + b * d, C64::new(s, 0.0)), (b + a * d, C64::new(s, 0.0))]
        } else {
            // pair p = b < q = a: i (E_pq − E_qp) / √2
            let (p, q) = (b, a);
            [(p + q * d, C64::new(0.0, s)), (q + p * d, C64::new(0.0, -s))]
        }
    }

    /// Nonzeros of row `i` as `(column, value)`; same pattern as the columns.
    fn row(&self, i: usize) -> [(usize, C64); 2] {
        let d = self.d;
        let (a, b) = (i % d, i / d);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        if a == b {
            [(i, C64::new(1.0, 0.0)), (i, ZERO)]
        } else {
            let (p, q) = (a.min(b), a.max(b));
            let sym = p + q * d;
            let anti = q + p * d;
            let anti_val = if a < b { C64::new(0.0, s) } else { C64::new(0.0, -s) };
            [(sym, C64::new(s, 0.0)), (anti, anti_val)]
        }
    }

    /// `U x` for a matrix `x` with `d²` rows.
    fn apply(&self, x: &Mat<C64>) -> Mat<C64> {
        let n = self.d * self.d;
        let mut out = Mat::<C64>::zeros(n, x.ncols());
        for c in 0..x.ncols() {
            let src = x.col_as_slice(c);
            let dst = out.col_as_slice_mut(c);
            for (i, slot) in dst.iter_mut().enumerate() {
                let [(k0, u0), (k1, u1)] = self.row(i);
                *slot = u0 * src[k0] + u1 * src[k1];
            }
        }
        out
    }

    /// The real matrix `U† S U`, or `None` if `S` does not preserve
    /// Hermiticity.
    fn represent(&self, sup: &Mat<C64>) -> Option<Mat<f64>> {
        let n = self.d * self.d;
        // t = S U, built column by column
        let mut t = Mat::<C64>::zeros(n, n);
        for k in 0..n {
            let [(r0, u0), (r1, u1)] = self.column(k);
            let (c0, c1) = (sup.col_as_slice(r0), sup.col_as_slice(r1));
            let dst = t.col_as_slice_mut(k);
            for i in 0..n {
                dst[i] = c0[i] * u0 + c1[i] * u1;
            }
        }
        let scale = sup.norm_max().max(f64::MIN_POSITIVE);
        let mut worst_imag: f64 = 0.0;
        let mut m = Mat::<f64>::zeros(n, n);
        for l in 0..n {
            let col = t.col_as_slice(l);
            for k in 0..n {
                let [(r0, u0), (r1, u1)] = self.column(k);
                let v = u0.conj() * col[r0] + u1.conj() * col[r1];
                worst_imag = worst_imag.max(v.im.abs());
                m[(k, l)] = v.re;
            }
        }
        (worst_imag <= 1e-12 * scale).then_some(m)
    }
}

/// Eigenvalues and biorthonormal eigenmodes of the generator, sorted by
/// descending real part (ties: ascending `|Im|`, then ascending `Im`).
#[derive(Debug, Clone)]
pub struct LiouvillianSpectrum {
    dim_rho: usize,
    eigenvalues: Vec<C64>,
    /// Columns are `vec(r_n)`, each of unit Frobenius norm.
    right: Mat<C64>,
    /// Columns are `vec(l_n)` with `Tr(l_m† r_n) = δ_mn`.
    left: Mat<C64>,
    blocks: Vec<ModeBlock>,
    probe_residual: f64,
}

fn mode_key(z: &C64) -> (i64, i64, i64) {
    let q = |x: f64| (x / ORDER_RESOLUTION).round() as i64;
    (-q(z.re), q(z.im.abs()), q(z.im))
}

/// Sorting permutation for eigenvalues in mode order.
pub fn mode_order(eigenvalues: &[C64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        mode_key(&eigenvalues[a])
            .cmp(&mode_key(&eigenvalues[b]))
            .then(eigenvalues[b].re.total_cmp(&eigenvalues[a].re))
            .then(eigenvalues[a].im.total_cmp(&eigenvalues[b].im))
    });
    order
}

fn sector_dim(sup: &Mat<C64>) -> Result<usize> {
    let n = sup.nrows();
    let d = (n as f64).sqrt().round() as usize;
    if sup.ncols() != n || d * d != n {
        return Err(Error::shape(
            "square matrix of size d^2",
            format!("{}x{}", n, sup.ncols()),
        ));
    }
    Ok(d)
}

/// Sorted eigenvalues only.
pub fn liouvillian_eigenvalues(sup: &Mat<C64>) -> Result<Vec<C64>> {
    let d = sector_dim(sup)?;
    let basis = HermitianBasis { d };
    let ev = match basis.represent(sup) {
        Some(real) => real.eigenvalues(),
        None => sup.eigenvalues(),
    }
    .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    Ok(mode_order(&ev).into_iter().map(|k| ev[k]).collect())
}

/// `max` that lets NaN win, so residual checks cannot pass on NaN.
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Full eigendecomposition of the generator.
///
/// Repeated eigenvalues can come back with nearly parallel eigenvectors, and
/// dephased chains can have genuine Jordan blocks. When the biorthonormality
/// probe fails, every cluster of close eigenvalues is replaced by an
/// orthonormal basis of its invariant subspace. A cluster on which the
/// generator is diagonalizable is split back into modes; otherwise it is kept
/// as a [`ModeBlock`] and propagated with the matrix exponential of its block.
pub fn spectral_decomposition(sup: &Mat<C64>) -> Result<LiouvillianSpectrum> {
    let d = sector_dim(sup)?;
    let n = d * d;
    let basis = HermitianBasis { d };
    let real = basis.represent(sup);
    let (values, vectors) = match &real {
        Some(m) => {
            let evd = m.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
            (
                evd.S().column_vector().iter().copied().collect::<Vec<_>>(),
                evd.U().to_owned(),
            )
        }
        None => {
            let evd = sup.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
            (evd.S().column_vector().iter().copied().collect(), evd.U().to_owned())
        }
    };
    let order = mode_order(&values);
    let eigenvalues: Vec<C64> = order.iter().map(|&k| values[k]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    let is_real = real.is_some();
    let to_standard = |v: &Mat<C64>| if is_real { basis.apply(v) } else { v.clone() };

    let spectrum = assemble(d, eigenvalues.clone(), to_standard(&vectors), Vec::new());
    if spectrum.probe_residual <= BIORTHONORMALITY_LIMIT {
        return Ok(spectrum);
    }
    log::debug!(
        "eigenvector probe residual {:.3e}; rebuilding clustered eigenvalues",
        spectrum.probe_residual
    );
    drop(spectrum);
    let generator = match &real {
        Some(m) => Mat::from_fn(n, n, |r, c| C64::new(m[(r, c)], 0.0)),
        None => sup.clone(),
    };
    drop(real);
    let units = cluster_units(&generator, &eigenvalues, &vectors)?;
    drop(generator);
    drop(vectors);
    let (eigenvalues, vectors, blocks) = lay_out(n, units);
    let spectrum = assemble(d, eigenvalues, to_standard(&vectors), blocks);
    if !(spectrum.probe_residual <= BIORTHONORMALITY_LIMIT) {
        return Err(Error::DefectiveSpectrum {
            residual: spectrum.probe_residual,
            limit: BIORTHONORMALITY_LIMIT,
        });
    }
    Ok(spectrum)
}

/// Columns `start..start + len` of the mode matrices span an invariant
/// subspace on which the generator acts as `generator` (`len × len`).
#[derive(Debug, Clone)]
pub struct ModeBlock {
    pub start: usize,
    pub generator: Mat<C64>,
}

impl ModeBlock {
    pub fn len(&self) -> usize {
        self.generator.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len()
    }
}

/// One eigenvalue with its vector, or one defective block.
struct Unit {
    value: C64,
    columns: Mat<C64>,
    block: Option<Mat<C64>>,
}

fn assemble(d: usize, eigenvalues: Vec<C64>, mut right: Mat<C64>, blocks: Vec<ModeBlock>) -> LiouvillianSpectrum {
    for c in 0..right.ncols() {
        if blocks.iter().any(|b| b.range().contains(&c)) {
            continue;
        }
        let col = right.col_as_slice_mut(c);
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        col.iter_mut().for_each(|z| *z /= norm);
    }
    // rows of R⁻¹ are l_n†
    let inv = right.partial_piv_lu().inverse();
    let left = inv.adjoint().to_owned();
    drop(inv);
    let mut spectrum = LiouvillianSpectrum {
        dim_rho: d,
        eigenvalues,
        right,
        left,
        blocks,
        probe_residual: 0.0,
    };
    spectrum.probe_residual = spectrum.probe_biorthonormality(3);
    spectrum
}

/// Groups eigenvalues closer than the cluster tolerance (transitively) and
/// rebuilds each multi-member group from its invariant subspace.
fn cluster_units(generator: &Mat<C64>, eigenvalues: &[C64], vectors: &Mat<C64>) -> Result<Vec<Unit>> {
    let n = eigenvalues.len();
    let scale = generator.norm_max().max(1.0);
    let tol = CLUSTER_TOLERANCE * scale;
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (eigenvalues[i] - eigenvalues[j]).norm() <= tol {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = root(&mut parent, i);
        groups[r].push(i);
    }
    let mut units = Vec::with_capacity(n);
    for group in groups.into_iter().filter(|g| !g.is_empty()) {
        if group.len() == 1 {
            let i = group[0];
            units.push(Unit {
                value: eigenvalues[i],
                columns: vectors.subcols(i, 1).to_owned(),
                block: None,
            });
            continue;
        }
        let k = group.len();
        let mean = group.iter().map(|&i| eigenvalues[i]).sum::<C64>() / k as f64;
        let isolation = (0..n)
            .filter(|i| !group.contains(i))
            .map(|i| (eigenvalues[i] - mean).norm())
            .fold(f64::INFINITY, f64::min);
        let q = invariant_subspace(generator, mean, isolation, k, scale)?;
        let b = q.adjoint() * (generator * &q);
        let centre = (0..k).map(|i| b[(i, i)]).sum::<C64>() / k as f64;
        let spread = Mat::from_fn(k, k, |r, c| b[(r, c)] - if r == c { centre } else { ZERO }).norm_max();
        if spread <= SEMISIMPLE_TOLERANCE * scale {
            for c in 0..k {
                units.push(Unit {
                    value: centre,
                    columns: q.subcols(c, 1).to_owned(),
                    block: None,
                });
            }
            continue;
        }
        let evd = b.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let mut x = evd.U().to_owned();
        for c in 0..k {
            let col = x.col_as_slice_mut(c);
            let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            col.iter_mut().for_each(|z| *z /= norm);
        }
        let sv = x.singular_values().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let conditioning = sv.iter().cloned().fold(f64::INFINITY, f64::min) / sv.iter().cloned().fold(0.0, f64::max);
        if conditioning >= BLOCK_CONDITIONING {
            let cols = &q * &x;
            for (c, &value) in evd.S().column_vector().iter().enumerate() {
                units.push(Unit {
                    value,
                    columns: cols.subcols(c, 1).to_owned(),
                    block: None,
                });
            }
        } else {
            log::debug!("keeping a {k}-dimensional defective block at {centre}");
            units.push(Unit {
                value: centre,
                columns: q,
                block: Some(b),
            });
        }
    }
    Ok(units)
}

/// Orthonormal basis of the `k`-dimensional invariant subspace belonging to
/// the eigenvalues around `centre`, by shift-invert subspace iteration.
/// `isolation` is the distance to the nearest eigenvalue outside the cluster.
fn invariant_subspace(generator: &Mat<C64>, centre: C64, isolation: f64, k: usize, scale: f64) -> Result<Mat<C64>> {
    let n = generator.nrows();
    // Shifting onto a defective eigenvalue would amplify its Jordan chain by
    // 1/δ^k and flatten the other directions below rounding; a shift at a
    // small fraction of the isolation keeps them resolvable.
    let offset = if isolation.is_finite() {
        0.2 * isolation
    } else {
        1e-3 * scale
    };
    let sigma = centre + C64::new(0.0, offset);
    let shifted = Mat::from_fn(n, n, |r, c| generator[(r, c)] - if r == c { sigma } else { ZERO });
    let lu = shifted.partial_piv_lu();
    drop(shifted);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1f00 + k as u64);
    let mut q = Mat::from_fn(n, k, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let mut best = f64::INFINITY;
    let mut best_q = q.clone();
    for _ in 0..SUBSPACE_ITERATIONS {
        q = lu.solve(&q).qr().compute_thin_Q();
        let mq = generator * &q;
        let b = q.adjoint() * &mq;
        let residual = (mq - &q * b).norm_max();
        if residual <= SUBSPACE_TOLERANCE * scale {
            return Ok(q);
        }
        if residual < 0.5 * best {
            best = residual;
            best_q = q.clone();
        } else if best <= SUBSPACE_ACCEPT * scale {
            // stagnated at the rounding floor of the shifted solve
            return Ok(best_q);
        }
    }
    if best <= SUBSPACE_ACCEPT * scale {
        return Ok(best_q);
    }
    Err(Error::Eigensolver(format!(
        "invariant subspace of dimension {k} at {centre} did not converge (residual {best:e})"
    )))
}

fn lay_out(n: usize, units: Vec<Unit>) -> (Vec<C64>, Mat<C64>, Vec<ModeBlock>) {
    let reps: Vec<C64> = units.iter().map(|u| u.value).collect();
    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = Mat::<C64>::zeros(n, n);
    let mut blocks = Vec::new();
    for i in mode_order(&reps) {
        let unit = &units[i];
        let start = eigenvalues.len();
        for c in 0..unit.columns.ncols() {
            vectors
                .col_as_slice_mut(start + c)
                .copy_from_slice(unit.columns.col_as_slice(c));
            eigenvalues.push(unit.value);
        }
        if let Some(b) = &unit.block {
            blocks.push(ModeBlock {
                start,
                generator: b.clone(),
            });
        }
    }
    (eigenvalues, vectors, blocks)
}

/// `exp(a)` for a small dense matrix by scaling and squaring a Taylor series.
fn expm_small(a: &Mat<C64>) -> Mat<C64> {
    let k = a.nrows();
    let norm: f64 = (0..k)
        .map(|c| (0..k).map(|r| a[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * faer::Scale(C64::new(0.5f64.powi(squarings), 0.0));
    let mut out = Mat::<C64>::identity(k, k);
    let mut term = Mat::<C64>::identity(k, k);
    for j in 1..=20 {
        term = &term * &scaled * faer::Scale(C64::new(1.0 / j as f64, 0.0));
        out += &term;
    }
    for _ in 0..squarings {
        out = &out * &out;
    }
    out
}

impl LiouvillianSpectrum {
    /// Sector dimension `d`.
    pub fn dim_rho(&self) -> usize {
        self.dim_rho
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn right_modes(&self) -> &Mat<C64> {
        &self.right
    }

    pub fn left_modes(&self) -> &Mat<C64> {
        &self.left
    }

    /// Right mode `r_n` (0-based `n`) as a `d × d` matrix.
    pub fn right_mode(&self, n: usize) -> Mat<C64> {
        let d = self.dim_rho;
        let col = self.right.col_as_slice(n);
        Mat::from_fn(d, d, |r, c| col[r + c * d])
    }

    pub fn left_mode(&self, n: usize) -> Mat<C64> {
        let d = self.dim_rho;
        let col = self.left.col_as_slice(n);
        Mat::from_fn(d, d, |r, c| col[r + c * d])
    }

    /// Residual of `L† R x = x` on random probe vectors.
    pub fn probe_residual(&self) -> f64 {
        self.probe_residual
    }

    fn probe_biorthonormality(&self, probes: usize) -> f64 {
        let n = self.len();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let x: Vec<C64> = (0..n)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut y = vec![ZERO; n];
            for (c, &xc) in x.iter().enumerate() {
                for (yi, &r) in y.iter_mut().zip(self.right.col_as_slice(c)) {
                    *yi += r * xc;
                }
            }
            for (m, &xm) in x.iter().enumerate() {
                let back: C64 = self
                    .left
                    .col_as_slice(m)
                    .iter()
                    .zip(&y)
                    .map(|(l, yi)| l.conj() * yi)
                    .sum();
                worst = nan_max(worst, (back - xm).norm());
            }
        }
        worst
    }

    /// `max_{m,n} |Tr(l_m† r_n) − δ_mn|`, computed exactly (cubic cost).
    pub fn biorthonormality_residual(&self) -> f64 {
        let g = self.left.adjoint() * &self.right;
        let n = self.len();
        let mut worst: f64 = 0.0;
        for c in 0..n {
            for r in 0..n {
                let want = if r == c { 1.0 } else { 0.0 };
                worst = nan_max(worst, (g[(r, c)] - want).norm());
            }
        }
        worst
    }

    /// Overlap coefficients `c_n = Tr(l_n† ρ0)`.
    pub fn coefficients(&self, rho0: &DensityMatrix) -> Result<Vec<C64>> {
        if rho0.dim() != self.dim_rho {
            return Err(Error::shape(self.dim_rho, rho0.dim()));
        }
        let v = rho0.to_vec();
        Ok((0..self.len())
            .map(|n| {
                self.left
                    .col_as_slice(n)
                    .iter()
                    .zip(&v)
                    .map(|(l, x)| l.conj() * x)
                    .sum()
            })
            .collect())
    }

    /// `Σ_n c_n e^{λ_n t} vec(r_n)` restricted to the listed modes. A listed
    /// member of a defective block brings in the whole block, whose
    /// coefficients evolve with `exp(B t)`.
    pub fn reconstruct_vec(&self, coeffs: &[C64], modes: &[usize], t: f64) -> Vec<C64> {
        let n = self.len();
        let mut out = vec![ZERO; n];
        let mut add = |m: usize, w: C64| {
            for (o, &r) in out.iter_mut().zip(self.right.col_as_slice(m)) {
                *o += w * r;
            }
        };
        let mut in_block = vec![false; n];
        let mut listed = vec![false; n];
        for &m in modes {
            listed[m] = true;
        }
        for b in &self.blocks {
            let range = b.range();
            in_block[range.clone()].iter_mut().for_each(|x| *x = true);
            if !listed[range.clone()].iter().any(|&x| x) {
                continue;
            }
            let prop = expm_small(&(&b.generator * faer::Scale(C64::new(t, 0.0))));
            for (i, m) in range.clone().enumerate() {
                let w: C64 = range.clone().enumerate().map(|(j, l)| prop[(i, j)] * coeffs[l]).sum();
                add(m, w);
            }
        }
        for &m in modes {
            if !in_block[m] {
                add(m, coeffs[m] * (self.eigenvalues[m] * t).exp());
            }
        }
        out
    }

    /// Defective clusters that are propagated as blocks.
    pub fn blocks(&self) -> &[ModeBlock] {
        &self.blocks
    }

    /// Number of modes with `Re λ > −ZERO_MODE_THRESHOLD`.
    pub fn zero_mode_count(&self) -> usize {
        self.eigenvalues
            .iter()
            .take_while(|z| z.re > -ZERO_MODE_THRESHOLD)
            .count()
    }

    /// `|Re λ_2|`, the slowest nonzero relaxation rate.
    pub fn gap(&self) -> Option<f64> {
        self.eigenvalues.get(1).map(|z| z.re.abs())
    }

    /// The unique stationary state `r_1 / Tr r_1`.
    pub fn steady_state(&self) -> Result<DensityMatrix> {
        let zeros = self.zero_mode_count();
        if zeros != 1 {
            return Err(Error::DegenerateSteadyState {
                multiplicity: zeros,
                threshold: ZERO_MODE_THRESHOLD,
            });
        }
        let r = self.right_mode(0);
        let tr: C64 = (0..self.dim_rho).map(|k| r[(k, k)]).sum();
        let mut rho = DensityMatrix::new_unchecked(r * faer::Scale(tr.inv()));
        rho.hermitize();
        let min = rho.eigenvalues()?.first().copied().unwrap_or(0.0);
        if min < -1e-10 {
            return Err(Error::Numerical(format!(
                "steady state has negative eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    /// Accepts `target` as the steady state if it lies in the zero-mode
    /// subspace; resolves degenerate stationary manifolds.
    pub fn steady_state_with_target(&self, target: &DensityMatrix) -> Result<DensityMatrix> {
        let c = self.coefficients(target)?;
        let zeros = self.zero_mode_count();
        let leak = c[zeros..].iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if leak > 1e-8 {
            return Err(Error::Numerical(format!(
                "target state is not stationary (weight {leak:e} outside the zero modes)"
            )));
        }
        Ok(target.clone())
    }
}

/// Deviation `max |ρ_ss − I/d|` of a steady state from the maximally mixed state.
pub fn deviation_from_maximally_mixed(rho: &DensityMatrix) -> f64 {
    let target = DensityMatrix::maximally_mixed(rho.dim());
    (rho.matrix() - target.matrix()).norm_max()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qubit_dephasing() -> (Mat<C64>, Dissipator) {
        let diss = Dissipator::from_channels(
            2,
            vec![JumpChannel {
                rate: 1.0,
                diagonal: vec![1.0, 0.0],
            }],
        )
        .unwrap();
        (Mat::<C64>::zeros(2, 2), diss)
    }

    #[test]
    fn qubit_rhs_by_hand() {
        let (h, diss) = qubit_dephasing();
        let rho = Mat::from_fn(2, 2, |_, _| C64::new(0.5, 0.0));
        let out = apply_lindblad_rhs(&h, &diss, &rho).unwrap();
        assert!((out[(0, 0)]).norm() < 1e-16);
        assert!((out[(1, 1)]).norm() < 1e-16);
        assert!((out[(0, 1)] - C64::new(-0.25, 0.0)).norm() < 1e-16);
        assert!((out[(1, 0)] - C64::new(-0.25, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn zero_generator() {
        let diss = Dissipator::from_channels(3, vec![]).unwrap();
        let rho = Mat::from_fn(3, 3, |r, c| C64::new((r + c) as f64, r as f64 - c as f64));
        let out = apply_lindblad_rhs(&Mat::zeros(3, 3), &diss, &rho).unwrap();
        assert_eq!(out.norm_max(), 0.0);
    }

    #[test]
    fn qubit_spectrum() {
        let (h, diss) = qubit_dephasing();
        let sup = build_superoperator(&h, &diss).unwrap();
        let spec = spectral_decomposition(&sup).unwrap();
        let want = [0.0, 0.0, -0.5, -0.5];
        for (z, w) in spec.eigenvalues().iter().zip(want) {
            assert!((z - C64::new(w, 0.0)).norm() < 1e-12);
        }
        assert!(spec.biorthonormality_residual() < 1e-12);
        assert!(matches!(
            spec.steady_state(),
            Err(Error::DegenerateSteadyState { multiplicity: 2, .. })
        ));
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_eq!(spec.steady_state_with_target(&mixed).unwrap(), mixed);
        let plus = DensityMatrix::from_vec(2, &[C64::new(0.5, 0.0); 4]);
        assert!(spec.steady_state_with_target(&plus).is_err());
    }

    #[test]
    fn shape_errors() {
        let (h, diss) = qubit_dephasing();
        assert!(apply_lindblad_rhs(&Mat::zeros(3, 3), &diss, &Mat::zeros(2, 2)).is_err());
        assert!(apply_lindblad_rhs(&h, &diss, &Mat::zeros(3, 3)).is_err());
        assert!(Dissipator::from_channels(
            2,
            vec![JumpChannel {
                rate: 1.0,
                diagonal: vec![1.0]
            }]
        )
        .is_err());
        assert!(DissipationSpec::per_site(vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn superoperator_cap() {
        let diss = Dissipator::from_channels(5, vec![]).unwrap();
        assert!(matches!(
            build_superoperator_with_cap(&Mat::zeros(5, 5), &diss, 4),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn mode_order_ties() {
        let ev = [
            C64::new(-1.0, 0.5),
            C64::new(-1.0, -0.5),
            C64::new(0.0, 0.0),
            C64::new(-1.0, 0.0),
            C64::new(-0.5, 2.0),
        ];
        let sorted: Vec<C64> = mode_order(&ev).into_iter().map(|k| ev[k]).collect();
        assert_eq!(
            sorted,
            vec![
                C64::new(0.0, 0.0),
                C64::new(-0.5, 2.0),
                C64::new(-1.0, 0.0),
                C64::new(-1.0, -0.5),
                C64::new(-1.0, 0.5)
            ]
        );
    }

    #[test]
    fn hermitian_basis_is_unitary() {
        let b = HermitianBasis { d: 3 };
        let n = 9;
        let u = b.apply(&Mat::<C64>::identity(n, n));
        let utu = u.adjoint() * &u;
        assert!((utu - Mat::<C64>::identity(n, n)).norm_max() < 1e-15);
        for k in 0..n {
            // each basis element is Hermitian
            let col = u.col_as_slice(k);
            for a in 0..3 {
                for bb in 0..3 {
                    assert!((col[a + bb * 3] - col[bb + a * 3].conj()).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn block_exponential_of_jordan_block() {
        let a = C64::new(-0.3, 0.7);
        let j = Mat::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) | (1, 1) => a,
            (0, 1) => C64::new(1.0, 0.0),
            _ => ZERO,
        });
        for t in [0.0, 0.5, 3.0, 40.0] {
            let e = expm_small(&(&j * faer::Scale(C64::new(t, 0.0))));
            let f = (a * t).exp();
            let want = [[f, f * t], [ZERO, f]];
            for r in 0..2 {
                for c in 0..2 {
                    assert!((e[(r, c)] - want[r][c]).norm() <= 1e-13 * (1.0 + t), "{t}");
                }
            }
        }
    }
}
