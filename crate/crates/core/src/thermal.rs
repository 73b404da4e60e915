//! Density matrices and Gibbs states on a sector eigenbasis.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HermitianOperator;

/// Relative width (in units of the spectral spread) of the multiplet that
/// the zero-temperature limits mix with equal weight.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// A complex `d × d` density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Mat<C64>);

impl DensityMatrix {
    /// Wraps `m` after checking Hermiticity, unit trace and positivity.
    pub fn new(m: Mat<C64>) -> Result<Self> {
        let rho = Self(m);
        rho.validate(1e-12, 1e-10)?;
        Ok(rho)
    }

    /// Wraps `m` without validation.
    pub fn new_unchecked(m: Mat<C64>) -> Self {
        Self(m)
    }

    /// The maximally mixed state `I / d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let w = 1.0 / dim as f64;
        Self(Mat::from_fn(dim, dim, |r, c| {
            if r == c {
                C64::new(w, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    pub fn pure(psi: &[C64]) -> Self {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let n = psi.len();
        Self(Mat::from_fn(n, n, |r, c| psi[r] * psi[c].conj() / norm2))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.0
    }

    /// Column-stacked entries, `vec[a + b d] = ρ[a, b]`.
    pub fn to_vec(&self) -> Vec<C64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for c in 0..d {
            out.extend((0..d).map(|r| self.0[(r, c)]));
        }
        out
    }

    pub fn from_vec(dim: usize, v: &[C64]) -> Self {
        assert_eq!(v.len(), dim * dim);
        Self(Mat::from_fn(dim, dim, |r, c| v[r + c * dim]))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|k| self.0[(k, k)]).sum()
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for c in 0..d {
            for r in 0..=c {
                worst = worst.max((self.0[(r, c)] - self.0[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Replaces the matrix by its Hermitian part `(ρ + ρ†) / 2`.
    pub fn hermitize(&mut self) {
        let d = self.dim();
        for c in 0..d {
            for r in 0..=c {
                let avg = (self.0[(r, c)] + self.0[(c, r)].conj()) * 0.5;
                self.0[(r, c)] = avg;
                self.0[(c, r)] = avg.conj();
            }
        }
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut h = self.clone();
        h.hermitize();
        let mut ev =
            h.0.self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    pub fn validate(&self, tol: f64, psd_tol: f64) -> Result<()> {
        let mut problems = Vec::new();
        let herm = self.hermiticity_error();
        if herm > tol {
            problems.push(format!("hermiticity error {herm:e}"));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            problems.push(format!("trace {tr}"));
        }
        if let Some(&min) = self.eigenvalues()?.first() {
            if min < -psd_tol {
                problems.push(format!("negative eigenvalue {min:e}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Numerical(format!(
                "not a density matrix: {}",
                problems.join(", ")
            )))
        }
    }
}

/// Temperature of a Gibbs state, in units of `J` with `k_B = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TemperatureSpec {
    /// Finite, nonzero temperature; negative values weight high energies.
    Finite(f64),
    /// `T → 0⁺`: the ground multiplet.
    ZeroPlus,
    /// `T → 0⁻`: the top multiplet.
    ZeroMinus,
    /// `T = ±∞`: the maximally mixed state.
    Infinite,
}

impl fmt::Display for TemperatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemperatureSpec::Finite(t) => write!(f, "{}", crate::io::fmt_f64(*t)),
            TemperatureSpec::ZeroPlus => f.write_str("0+"),
            TemperatureSpec::ZeroMinus => f.write_str("0-"),
            TemperatureSpec::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for TemperatureSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "0+" => Ok(TemperatureSpec::ZeroPlus),
            "0-" => Ok(TemperatureSpec::ZeroMinus),
            "inf" | "infinite" => Ok(TemperatureSpec::Infinite),
            other => {
                let t: f64 = other.parse().map_err(|_| format!("invalid temperature '{other}'"))?;
                if t == 0.0 {
                    Err("temperature 0 is ambiguous; use 0+ or 0-".to_string())
                } else if !t.is_finite() {
                    Err(format!("invalid temperature '{other}'"))
                } else {
                    Ok(TemperatureSpec::Finite(t))
                }
            }
        }
    }
}

impl From<TemperatureSpec> for String {
    fn from(t: TemperatureSpec) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for TemperatureSpec {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

/// Boltzmann weights `w_n ∝ exp(-E_n / T)` for ascending energies.
pub fn gibbs_weights(energies: &[f64], temp: TemperatureSpec) -> Result<Vec<f64>> {
    let n = energies.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (e_min, e_max) = (energies[0], energies[n - 1]);
    let tol = DEGENERACY_TOLERANCE * (e_max - e_min);
    let mut w: Vec<f64> = match temp {
        TemperatureSpec::Infinite => vec![1.0; n],
        TemperatureSpec::ZeroPlus => energies
            .iter()
            .map(|&e| if e - e_min <= tol { 1.0 } else { 0.0 })
            .collect(),
        TemperatureSpec::ZeroMinus => energies
            .iter()
            .map(|&e| if e_max - e <= tol { 1.0 } else { 0.0 })
            .collect(),
        TemperatureSpec::Finite(t) => {
            if t == 0.0 || !t.is_finite() {
                return Err(Error::Domain(format!(
                    "finite temperature must be nonzero and finite, got {t}"
                )));
            }
            // shift by the dominant energy so the largest weight is exp(0)
            let shift = if t > 0.0 { e_min } else { e_max };
            energies.iter().map(|&e| (-(e - shift) / t).exp()).collect()
        }
    };
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    Ok(w)
}

/// Gibbs state `Σ_n w_n |ψ_n⟩⟨ψ_n|` of `h` at temperature `temp`.
pub fn thermal_state(h: &HermitianOperator, temp: TemperatureSpec) -> Result<DensityMatrix> {
    let eig = h.eigensystem().ok_or(Error::MissingEigensystem)?;
    let d = h.dim();
    match temp {
        TemperatureSpec::Infinite => return Ok(DensityMatrix::maximally_mixed(d)),
        // negative temperatures go through −H so that thermal(H, T) and
        // thermal(−H, −T) share one code path bit for bit
        TemperatureSpec::ZeroMinus => return thermal_state(&h.negated(), TemperatureSpec::ZeroPlus),
        TemperatureSpec::Finite(t) if t < 0.0 => return thermal_state(&h.negated(), TemperatureSpec::Finite(-t)),
        _ => {}
    }
    let w = gibbs_weights(&eig.energies, temp)?;
    let active: Vec<usize> = (0..d).filter(|&k| w[k] > 0.0).collect();
    let v = Mat::from_fn(d, active.len(), |r, c| eig.vectors[(r, active[c])]);
    let scaled = Mat::from_fn(d, active.len(), |r, c| v[(r, c)] * w[active[c]]);
    let rho = &scaled * v.transpose();
    let mut out = Mat::from_fn(d, d, |r, c| C64::new(rho[(r, c)], 0.0));
    // exact symmetry
    for c in 0..d {
        for r in 0..c {
            out[(c, r)] = out[(r, c)];
        }
    }
    Ok(DensityMatrix::new_unchecked(out))
}

/// Scalar summaries of a density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateDiagnostics {
    pub trace: f64,
    pub purity: f64,
    pub entropy: f64,
    pub min_eigenvalue: f64,
}

pub fn purity_and_diagnostics(rho: &DensityMatrix) -> Result<StateDiagnostics> {
    let m = rho.matrix();
    let d = rho.dim();
    let mut purity = 0.0;
    for c in 0..d {
        for r in 0..d {
            purity += (m[(r, c)] * m[(c, r)]).re;
        }
    }
    let ev = rho.eigenvalues()?;
    let entropy = -ev.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
    Ok(StateDiagnostics {
        trace: rho.trace().re,
        purity,
        entropy,
        min_eigenvalue: ev.first().copied().unwrap_or(0.0),
    })
}
