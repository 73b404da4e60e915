//! Fixed-magnetization subspaces of a spin-1/2 chain and the elementary
//! operators restricted to them.
//!
//! Configurations are `u64` bit patterns with bit `j` set when site `j`
//! carries spin up. Within a basis the configurations are kept in ascending
//! integer order, so basis indices are reproducible across runs.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest supported chain length (one bit per site in a `u64`).
pub const MAX_SITES: usize = 63;

/// Default cap on `dim²`, the number of entries of a density matrix on the
/// basis. `binomial(14, 7)² ≈ 1.2e7` fits; `binomial(16, 8)²` does not.
pub const DEFAULT_MAX_STATE_ENTRIES: usize = 1 << 24;

/// Ordered list of spin configurations spanning either one magnetization
/// sector or the full `2^L` space.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    num_sites: usize,
    num_up: Option<usize>,
    configs: Vec<u64>,
    lookup: HashMap<u64, usize>,
}

impl SectorBasis {
    /// Enumerates the sector with `num_up` up spins on `num_sites` sites.
    pub fn new(num_sites: usize, num_up: usize) -> Result<Self> {
        Self::with_limit(num_sites, num_up, DEFAULT_MAX_STATE_ENTRIES)
    }

    /// Like [`SectorBasis::new`] with an explicit cap on `dim²`.
    pub fn with_limit(num_sites: usize, num_up: usize, max_state_entries: usize) -> Result<Self> {
        check_sites(num_sites)?;
        if num_up > num_sites {
            return Err(Error::Domain(format!("num_up = {num_up} outside [0, {num_sites}]")));
        }
        let dim = binomial(num_sites as u64, num_up as u64);
        check_size(dim, max_state_entries)?;
        let configs = combinations(num_sites, num_up);
        debug_assert_eq!(configs.len() as u128, dim);
        Ok(Self::from_configs(num_sites, Some(num_up), configs))
    }

    /// The full `2^L`-dimensional space (all sectors together).
    pub fn full_space(num_sites: usize) -> Result<Self> {
        check_sites(num_sites)?;
        check_size(1u128 << num_sites, DEFAULT_MAX_STATE_ENTRIES)?;
        let configs = (0..1u64 << num_sites).collect();
        Ok(Self::from_configs(num_sites, None, configs))
    }

    fn from_configs(num_sites: usize, num_up: Option<usize>, configs: Vec<u64>) -> Self {
        let lookup = configs.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        Self {
            num_sites,
            num_up,
            configs,
            lookup,
        }
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    /// Up-spin count of the sector, or `None` for the full space.
    pub fn num_up(&self) -> Option<usize> {
        self.num_up
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn config(&self, index: usize) -> u64 {
        self.configs[index]
    }

    pub fn index_of(&self, config: u64) -> Option<usize> {
        self.lookup.get(&config).copied()
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.num_sites {
            return Err(Error::Index {
                index: site,
                len: self.num_sites,
            });
        }
        Ok(())
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.check_site(i)?;
        self.check_site(j)?;
        if i == j {
            return Err(Error::Domain(format!("bond needs two distinct sites, got ({i}, {j})")));
        }
        Ok(())
    }

    /// Diagonal of `S^z_j`: `+1/2` where bit `j` is set, `-1/2` otherwise.
    pub fn sz_diagonal(&self, site: usize) -> Result<Vec<f64>> {
        self.check_site(site)?;
        Ok(self
            .configs
            .iter()
            .map(|&c| if bit(c, site) { 0.5 } else { -0.5 })
            .collect())
    }

    /// Diagonal of the projector `S^z_j + 1/2` onto spin up at `site`.
    pub fn up_projector_diagonal(&self, site: usize) -> Result<Vec<f64>> {
        self.check_site(site)?;
        Ok(self
            .configs
            .iter()
            .map(|&c| if bit(c, site) { 1.0 } else { 0.0 })
            .collect())
    }

    /// Diagonal of `S^z_i S^z_j`.
    pub fn zz_coupling(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        self.check_pair(i, j)?;
        Ok(self
            .configs
            .iter()
            .map(|&c| if bit(c, i) == bit(c, j) { 0.25 } else { -0.25 })
            .collect())
    }

    /// `S^x_i S^x_j + S^y_i S^y_j = (S^+_i S^-_j + S^-_i S^+_j) / 2`.
    ///
    /// Each column has at most one nonzero entry: the configuration with the
    /// antiparallel spins at `i` and `j` exchanged.
    pub fn bond_flip_flop(&self, i: usize, j: usize) -> Result<SparseOperator> {
        self.check_pair(i, j)?;
        let mut triplets = Vec::new();
        for (col, &c) in self.configs.iter().enumerate() {
            if bit(c, i) != bit(c, j) {
                let flipped = c ^ (1 << i) ^ (1 << j);
                let row = self.index_of(flipped).expect("exchange preserves the up-spin count");
                triplets.push((row, col, 0.5));
            }
        }
        Ok(SparseOperator::from_triplets(self.dim(), triplets))
    }

    /// Diagonal of the total magnetization `Σ_j S^z_j`.
    pub fn total_sz_diagonal(&self) -> Vec<f64> {
        let half = self.num_sites as f64 / 2.0;
        self.configs.iter().map(|&c| c.count_ones() as f64 - half).collect()
    }
}

fn check_sites(num_sites: usize) -> Result<()> {
    if num_sites == 0 || num_sites > MAX_SITES {
        return Err(Error::Domain(format!(
            "number of sites must lie in [1, {MAX_SITES}], got {num_sites}"
        )));
    }
    Ok(())
}

fn check_size(dim: u128, max_state_entries: usize) -> Result<()> {
    let entries = dim.saturating_mul(dim);
    if entries > max_state_entries as u128 {
        return Err(Error::Resource(format!(
            "basis dimension {dim} gives {entries} density-matrix entries (cap {max_state_entries})"
        )));
    }
    Ok(())
}

#[inline]
fn bit(config: u64, site: usize) -> bool {
    (config >> site) & 1 == 1
}

/// `n choose k` in exact integer arithmetic.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `num_sites`-bit patterns with `num_up` bits set, ascending.
fn combinations(num_sites: usize, num_up: usize) -> Vec<u64> {
    if num_up == 0 {
        return vec![0];
    }
    let limit = 1u64 << num_sites;
    let mut out = Vec::new();
    let mut c = (1u64 << num_up) - 1;
    while c < limit {
        out.push(c);
        // Gosper's hack: next larger integer with the same popcount.
        let low = c & c.wrapping_neg();
        let ripple = c + low;
        c = (((ripple ^ c) >> 2) / low) | ripple;
    }
    out
}

/// Real sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::from_triplets(diag.len(), diag.iter().enumerate().map(|(k, &v)| (k, k, v)).collect())
    }

    /// Builds the matrix from `(row, col, value)` entries; duplicates are
    /// summed and exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows: Vec<usize> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
            }
        }
        let mut keep_cols = Vec::with_capacity(cols.len());
        let mut keep_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dim,
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzeros of one row as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// All nonzeros as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(col, _)| col == c).map_or(0.0, |(_, v)| v)
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v)).collect())
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &SparseOperator, scale: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        let triplets = self
            .triplets()
            .chain(other.triplets().map(|(r, c, v)| (r, c, scale * v)))
            .collect();
        Self::from_triplets(self.dim, triplets)
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest absolute entry of `self - selfᵀ`.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_half_filling() {
        let b = SectorBasis::new(2, 1).unwrap();
        assert_eq!(b.configs(), &[0b01, 0b10]);
        assert_eq!(b.dim(), 2);
    }

    #[test]
    fn sector_dimensions() {
        assert_eq!(SectorBasis::new(8, 4).unwrap().dim(), 70);
        assert_eq!(SectorBasis::new(14, 7).unwrap().dim(), 3432);
        assert_eq!(SectorBasis::new(5, 0).unwrap().configs(), &[0]);
        assert_eq!(SectorBasis::new(5, 5).unwrap().configs(), &[0b11111]);
    }

    #[test]
    fn lookup_inverts_configs() {
        let b = SectorBasis::new(10, 4).unwrap();
        for (k, &c) in b.configs().iter().enumerate() {
            assert_eq!(b.index_of(c), Some(k));
        }
        assert!(b.configs().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_bad_sectors() {
        assert!(matches!(SectorBasis::new(4, 5), Err(Error::Domain(_))));
        assert!(matches!(SectorBasis::new(0, 0), Err(Error::Domain(_))));
        assert!(matches!(SectorBasis::new(16, 8), Err(Error::Resource(_))));
        assert!(matches!(SectorBasis::with_limit(8, 4, 100), Err(Error::Resource(_))));
    }

    #[test]
    fn sz_entries() {
        let b = SectorBasis::new(2, 1).unwrap();
        // configs 01, 10: site 0 is up in the first, down in the second
        assert_eq!(b.sz_diagonal(0).unwrap(), vec![0.5, -0.5]);
        assert_eq!(b.sz_diagonal(1).unwrap(), vec![-0.5, 0.5]);
        assert_eq!(SectorBasis::new(1, 1).unwrap().sz_diagonal(0).unwrap(), vec![0.5]);
        assert!(matches!(b.sz_diagonal(2), Err(Error::Index { .. })));
    }

    #[test]
    fn sz_sum_is_magnetization() {
        let b = SectorBasis::new(7, 3).unwrap();
        let mut total = vec![0.0; b.dim()];
        for j in 0..7 {
            for (t, s) in total.iter_mut().zip(b.sz_diagonal(j).unwrap()) {
                *t += s;
            }
        }
        assert!(total.iter().all(|&t| t == 3.0 - 3.5));
    }

    #[test]
    fn zz_entries() {
        let b = SectorBasis::new(2, 1).unwrap();
        assert_eq!(b.zz_coupling(0, 1).unwrap(), vec![-0.25, -0.25]);
        let full = SectorBasis::new(2, 2).unwrap();
        assert_eq!(full.zz_coupling(0, 1).unwrap(), vec![0.25]);
        assert!(matches!(b.zz_coupling(1, 1), Err(Error::Domain(_))));
        let b = SectorBasis::new(6, 3).unwrap();
        let (zi, zj, zz) = (
            b.sz_diagonal(1).unwrap(),
            b.sz_diagonal(4).unwrap(),
            b.zz_coupling(1, 4).unwrap(),
        );
        for k in 0..b.dim() {
            assert_eq!(zz[k], zi[k] * zj[k]);
        }
    }

    #[test]
    fn flip_flop_two_sites() {
        let b = SectorBasis::new(2, 1).unwrap();
        let ff = b.bond_flip_flop(0, 1).unwrap().to_dense();
        assert_eq!(ff[(0, 0)], 0.0);
        assert_eq!(ff[(0, 1)], 0.5);
        assert_eq!(ff[(1, 0)], 0.5);
        assert_eq!(ff[(1, 1)], 0.0);
    }

    #[test]
    fn flip_flop_annihilates_parallel_spins() {
        let b = SectorBasis::new(4, 2).unwrap();
        let ff = b.bond_flip_flop(0, 1).unwrap();
        let col = b.index_of(0b0011).unwrap();
        assert!(ff.triplets().all(|(_, c, _)| c != col));
        assert_eq!(ff.asymmetry(), 0.0);
    }

    #[test]
    fn sparse_triplets_merge_and_transpose() {
        let m = SparseOperator::from_triplets(3, vec![(0, 1, 1.0), (0, 1, 2.0), (2, 0, -1.0), (1, 1, 0.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.transpose().get(1, 0), 3.0);
        assert_eq!(m.add_scaled(&m, -1.0).nnz(), 0);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(8, 4), 70);
        assert_eq!(binomial(14, 7), 3432);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(62, 31), 465428353255261088);
    }
}
