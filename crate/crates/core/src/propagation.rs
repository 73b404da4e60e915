//! Time evolution of density matrices and the distance observable
//! `D(t) = Tr[(ρ(t) − ρ_ss)²]`.
//!
//! Two routes are provided: reconstruction from the Liouvillian eigenmodes,
//! and matrix-free Dormand–Prince 5(4) integration with dense output.

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HermitianOperator;
use crate::liouvillian::{Dissipator, LiouvillianSpectrum, DEFAULT_SUPEROPERATOR_CAP};
use crate::sector_basis::SparseOperator;
use crate::thermal::DensityMatrix;

/// Number of logarithmic points in the default grid (t = 0 is added on top).
pub const DEFAULT_GRID_POINTS: usize = 400;
/// First nonzero time of the default grid.
pub const DEFAULT_GRID_START: f64 = 1e-2;
/// Default horizon, in gap units, when the spectrum is known.
pub const GAP_HORIZON: f64 = 15.0;
/// Default horizon for integrator runs.
pub const DEFAULT_INTEGRATOR_T_MAX: f64 = 100.0;
/// Coefficients below this modulus are skipped in spectral reconstruction.
pub const ACTIVE_MODE_CUTOFF: f64 = 1e-14;

/// Evolution route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Auto,
    Spectral,
    Integrate,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::Spectral => "spectral",
            Method::Integrate => "integrate",
        }
    }

    /// Resolves `Auto` against the sector dimension.
    pub fn resolve(self, dim: usize) -> Result<Method> {
        match self {
            Method::Auto if dim <= DEFAULT_SUPEROPERATOR_CAP => Ok(Method::Spectral),
            Method::Auto => Ok(Method::Integrate),
            Method::Spectral if dim > DEFAULT_SUPEROPERATOR_CAP => Err(Error::Resource(format!(
                "spectral method needs sector dimension <= {DEFAULT_SUPEROPERATOR_CAP}, got {dim}"
            ))),
            m => Ok(m),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Method::Auto),
            "spectral" => Ok(Method::Spectral),
            "integrate" => Ok(Method::Integrate),
            other => Err(Error::Domain(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    LogWithZero,
    Custom,
}

/// Strictly increasing sample times starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
    spacing: Spacing,
}

impl TimeGrid {
    /// `n` evenly spaced points on `[0, t_max]`.
    pub fn linear(t_max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::Domain(format!(
                "linear grid needs n >= 2 and t_max > 0 (n={n}, t_max={t_max})"
            )));
        }
        let step = t_max / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
        points[n - 1] = t_max;
        Ok(Self {
            points,
            spacing: Spacing::Linear,
        })
    }

    /// `t = 0` followed by `n` log-spaced points from `t_min` to `t_max`.
    pub fn log_with_zero(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(t_min > 0.0) || !(t_max > t_min) || !t_max.is_finite() {
            return Err(Error::Domain(format!(
                "log grid needs n >= 2 and 0 < t_min < t_max (n={n}, t_min={t_min}, t_max={t_max})"
            )));
        }
        let (a, b) = (t_min.ln(), t_max.ln());
        let mut points = Vec::with_capacity(n + 1);
        points.push(0.0);
        points.extend((0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()));
        points[1] = t_min;
        points[n] = t_max;
        Ok(Self {
            points,
            spacing: Spacing::LogWithZero,
        })
    }

    /// The default grid for a given horizon.
    pub fn default_for(t_max: f64) -> Result<Self> {
        Self::log_with_zero(DEFAULT_GRID_START, t_max, DEFAULT_GRID_POINTS)
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.first() != Some(&0.0) {
            return Err(Error::Domain("time grid must start at t = 0".into()));
        }
        if points.iter().any(|t| !t.is_finite()) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("time grid must be finite and strictly increasing".into()));
        }
        Ok(Self {
            points,
            spacing: Spacing::Custom,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.points.last().unwrap_or(&0.0)
    }
}

/// Grid recipe whose horizon may be left to the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_max: Option<f64>,
    pub t_min: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t_max: None,
            t_min: DEFAULT_GRID_START,
            points: DEFAULT_GRID_POINTS,
            spacing: Spacing::LogWithZero,
        }
    }
}

impl GridSpec {
    /// Builds the grid, using `default_t_max` when no horizon is set.
    pub fn build(&self, default_t_max: f64) -> Result<TimeGrid> {
        let t_max = self.t_max.unwrap_or(default_t_max);
        match self.spacing {
            Spacing::Linear => TimeGrid::linear(t_max, self.points),
            Spacing::LogWithZero => TimeGrid::log_with_zero(self.t_min, t_max, self.points),
            Spacing::Custom => Err(Error::Domain("custom grids cannot be built from a recipe".into())),
        }
    }
}

/// How a trajectory was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub label: String,
    pub method: Method,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub active_modes: Option<usize>,
    /// `max_k |Tr ρ(t_k) − 1|` before any correction.
    pub max_trace_drift: f64,
    /// `max_k max|ρ(t_k) − ρ(t_k)†|` before re-Hermitization.
    pub max_hermiticity_drift: f64,
}

impl TrajectoryMeta {
    fn new(method: Method) -> Self {
        Self {
            label: String::new(),
            method,
            rtol: None,
            atol: None,
            accepted_steps: 0,
            rejected_steps: 0,
            active_modes: None,
            max_trace_drift: 0.0,
            max_hermiticity_drift: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub distances: Vec<f64>,
    pub states: Option<Vec<DensityMatrix>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.meta.label = label.into();
        self
    }

    /// Builds a trajectory from externally computed distances.
    pub fn from_distances(grid: TimeGrid, distances: Vec<f64>) -> Result<Self> {
        if grid.len() != distances.len() {
            return Err(Error::shape(grid.len(), distances.len()));
        }
        Ok(Self {
            grid,
            distances,
            states: None,
            meta: TrajectoryMeta::new(Method::Auto),
        })
    }
}

/// `Tr[(ρ − σ)²]` as the entrywise squared modulus of the Hermitian part
/// of the difference.
pub fn distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    matrix_distance(rho.matrix(), sigma.matrix())
}

fn matrix_distance(a: &Mat<C64>, b: &Mat<C64>) -> Result<f64> {
    let d = a.nrows();
    if b.nrows() != d || a.ncols() != d || b.ncols() != d {
        return Err(Error::shape(format!("{d}x{d}"), format!("{}x{}", b.nrows(), b.ncols())));
    }
    let mut sum = 0.0;
    for c in 0..d {
        for r in 0..d {
            let x = 0.5 * ((a[(r, c)] - b[(r, c)]) + (a[(c, r)] - b[(c, r)]).conj());
            sum += x.norm_sqr();
        }
    }
    Ok(sum)
}

fn vec_distance(v: &[C64], reference: &Mat<C64>) -> f64 {
    let d = reference.nrows();
    let mut sum = 0.0;
    for c in 0..d {
        for r in 0..d {
            let x = 0.5 * ((v[r + c * d] - reference[(r, c)]) + (v[c + r * d] - reference[(c, r)]).conj());
            sum += x.norm_sqr();
        }
    }
    sum
}

fn vec_drifts(v: &[C64], d: usize) -> (f64, f64) {
    let tr: C64 = (0..d).map(|k| v[k + k * d]).sum();
    let mut herm: f64 = 0.0;
    for c in 0..d {
        for r in 0..c + 1 {
            herm = herm.max((v[r + c * d] - v[c + r * d].conj()).norm());
        }
    }
    ((tr - 1.0).norm(), herm)
}

fn hermitized_state(v: &[C64], d: usize) -> DensityMatrix {
    let mut rho = DensityMatrix::from_vec(d, v);
    rho.hermitize();
    rho
}

/// Reconstructs `ρ(t_k) = Σ_n c_n e^{λ_n t_k} r_n` with `c_n = Tr(l_n† ρ0)`,
/// skipping modes whose coefficient is below [`ACTIVE_MODE_CUTOFF`].
pub fn evolve_spectral(
    spectrum: &LiouvillianSpectrum,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    reference: &DensityMatrix,
    store_states: bool,
) -> Result<Trajectory> {
    let d = spectrum.dim_rho();
    if rho0.dim() != d || reference.dim() != d {
        return Err(Error::shape(
            d,
            if rho0.dim() != d { rho0.dim() } else { reference.dim() },
        ));
    }
    let coeffs = spectrum.coefficients(rho0)?;
    let active: Vec<usize> = (0..coeffs.len())
        .filter(|&n| coeffs[n].norm() > ACTIVE_MODE_CUTOFF)
        .collect();
    let mut meta = TrajectoryMeta::new(Method::Spectral);
    meta.active_modes = Some(active.len());
    let mut distances = Vec::with_capacity(grid.len());
    let mut states = store_states.then(Vec::new);
    for &t in grid.points() {
        let v = spectrum.reconstruct_vec(&coeffs, &active, t);
        let (tr, herm) = vec_drifts(&v, d);
        meta.max_trace_drift = meta.max_trace_drift.max(tr);
        meta.max_hermiticity_drift = meta.max_hermiticity_drift.max(herm);
        distances.push(vec_distance(&v, reference.matrix()));
        if let Some(s) = states.as_mut() {
            s.push(hermitized_state(&v, d));
        }
    }
    Ok(Trajectory {
        grid: grid.clone(),
        distances,
        states,
        meta,
    })
}

/// Matrix-free Lindblad right-hand side on column-stacked states.
#[derive(Debug, Clone)]
pub struct LindbladRhs {
    d: usize,
    h: SparseOperator,
    h_t: SparseOperator,
    rates: Vec<f64>,
}

impl LindbladRhs {
    pub fn new(h: &HermitianOperator, diss: &Dissipator) -> Result<Self> {
        if h.dim() != diss.dim() {
            return Err(Error::shape(diss.dim(), h.dim()));
        }
        Ok(Self {
            d: h.dim(),
            h: h.sparse().clone(),
            h_t: h.sparse().transpose(),
            rates: diss.coherence_rates(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `out = −i(Hρ − ρH) + K ∘ ρ`.
    pub fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let d = self.d;
        for (o, (&k, &x)) in out.iter_mut().zip(self.rates.iter().zip(rho)) {
            *o = k * x;
        }
        for b in 0..d {
            let col_in = &rho[b * d..(b + 1) * d];
            // commutator accumulated as c = Hρ − ρH for column b
            let mut acc = vec![C64::new(0.0, 0.0); d];
            for (a, slot) in acc.iter_mut().enumerate() {
                for (c, h) in self.h.row(a) {
                    *slot += h * col_in[c];
                }
            }
            // (ρH)[:, b] = Σ_c ρ[:, c] H[c, b]
            for (c, h) in self.h_t.row(b) {
                let col_c = &rho[c * d..(c + 1) * d];
                for (slot, &x) in acc.iter_mut().zip(col_c) {
                    *slot -= h * x;
                }
            }
            for (o, a) in out[b * d..(b + 1) * d].iter_mut().zip(acc) {
                *o += C64::new(a.im, -a.re);
            }
        }
    }
}

/// Step-size control for [`Integrator`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub store_states: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 10_000_000,
            store_states: false,
        }
    }
}

// Dormand–Prince 5(4) tableau with Hairer's dense-output coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Workspace {
    k: [Vec<C64>; 7],
    y_stage: Vec<C64>,
    y_new: Vec<C64>,
    err: Vec<C64>,
    cont: [Vec<C64>; 5],
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = || vec![C64::new(0.0, 0.0); n];
        Self {
            k: std::array::from_fn(|_| z()),
            y_stage: z(),
            y_new: z(),
            err: z(),
            cont: std::array::from_fn(|_| z()),
        }
    }
}

/// Adaptive Dormand–Prince integrator for the Lindblad equation.
#[derive(Debug, Clone)]
pub struct Integrator {
    rhs: LindbladRhs,
    opts: IntegratorOptions,
}

/// Step statistics of one integration run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

impl Integrator {
    pub fn new(h: &HermitianOperator, diss: &Dissipator, opts: IntegratorOptions) -> Result<Self> {
        if !(opts.rtol > 0.0) || !(opts.atol >= 0.0) {
            return Err(Error::Domain(format!(
                "integrator tolerances must be positive (rtol={}, atol={})",
                opts.rtol, opts.atol
            )));
        }
        Ok(Self {
            rhs: LindbladRhs::new(h, diss)?,
            opts,
        })
    }

    pub fn options(&self) -> &IntegratorOptions {
        &self.opts
    }

    pub fn rhs(&self) -> &LindbladRhs {
        &self.rhs
    }

    fn error_norm(&self, y0: &[C64], y1: &[C64], err: &[C64]) -> f64 {
        let mut sum = 0.0;
        for ((a, b), e) in y0.iter().zip(y1).zip(err) {
            let sc = self.opts.atol + self.opts.rtol * a.norm().max(b.norm());
            sum += (e.norm() / sc).powi(2);
        }
        (sum / y0.len() as f64).sqrt()
    }

    fn initial_step(&self, y0: &[C64], f0: &[C64], t_end: f64) -> f64 {
        let d0 = self.error_norm(y0, y0, y0);
        let d1 = self.error_norm(y0, y0, f0);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(t_end)
    }

    /// Integrates `y0` over `times` (first entry is the start time) and calls
    /// `visit(k, y)` at every requested time.
    pub fn integrate_vec<F>(&self, y0: &[C64], times: &[f64], mut visit: F) -> Result<StepStats>
    where
        F: FnMut(usize, &[C64]),
    {
        let n = y0.len();
        if n != self.rhs.dim() * self.rhs.dim() {
            return Err(Error::shape(self.rhs.dim() * self.rhs.dim(), n));
        }
        let mut stats = StepStats::default();
        let Some((&t0, rest)) = times.split_first() else {
            return Ok(stats);
        };
        visit(0, y0);
        let Some(&t_end) = rest.last() else {
            return Ok(stats);
        };
        let mut ws = Workspace::new(n);
        let mut y = y0.to_vec();
        let mut t = t0;
        let mut next = 1;
        self.rhs.apply(&y, &mut ws.k[0]);
        let mut h = self.initial_step(&y, &ws.k[0], t_end - t0);
        while next < times.len() {
            if stats.accepted + stats.rejected >= self.opts.max_steps {
                return Err(Error::Numerical(format!(
                    "step budget {} exhausted at t = {t}",
                    self.opts.max_steps
                )));
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h });
            }
            h = h.min(t_end - t);
            self.stages(&mut ws, &y, h);
            let err = self.error_norm(&y, &ws.y_new, &ws.err);
            if !err.is_finite() {
                return Err(Error::Numerical(format!(
                    "integrator produced non-finite state at t = {t}"
                )));
            }
            if err > 1.0 {
                stats.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).max(0.2);
                continue;
            }
            stats.accepted += 1;
            let t_new = if t + h >= t_end { t_end } else { t + h };
            if times[next] <= t_new {
                self.prepare_dense(&mut ws, &y, h);
            }
            while next < times.len() && times[next] <= t_new {
                let theta = ((times[next] - t) / h).clamp(0.0, 1.0);
                dense_eval(&ws.cont, theta, &mut ws.y_stage);
                visit(next, &ws.y_stage);
                next += 1;
            }
            std::mem::swap(&mut y, &mut ws.y_new);
            ws.k.swap(0, 6);
            t = t_new;
            let fac = if err == 0.0 {
                10.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
            };
            h *= fac;
        }
        Ok(stats)
    }

    fn stages(&self, ws: &mut Workspace, y: &[C64], h: f64) {
        let n = y.len();
        let combos: [&[f64]; 5] = [
            &[A21],
            &[A31, A32],
            &[A41, A42, A43],
            &[A51, A52, A53, A54],
            &[A61, A62, A63, A64, A65],
        ];
        for (s, coeffs) in combos.iter().enumerate() {
            #[allow(clippy::needless_range_loop)]
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for (j, &a) in coeffs.iter().enumerate() {
                    acc += a * ws.k[j][i];
                }
                ws.y_stage[i] = y[i] + h * acc;
            }
            let (_, tail) = ws.k.split_at_mut(s + 1);
            self.rhs.apply(&ws.y_stage, &mut tail[0]);
        }
        for i in 0..n {
            let k = &ws.k;
            ws.y_new[i] = y[i] + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        let (head, tail) = ws.k.split_at_mut(6);
        self.rhs.apply(&ws.y_new, &mut tail[0]);
        for i in 0..n {
            ws.err[i] = h
                * (E1 * head[0][i]
                    + E3 * head[2][i]
                    + E4 * head[3][i]
                    + E5 * head[4][i]
                    + E6 * head[5][i]
                    + E7 * tail[0][i]);
        }
    }

    fn prepare_dense(&self, ws: &mut Workspace, y: &[C64], h: f64) {
        let k = &ws.k;
        for i in 0..y.len() {
            let dy = ws.y_new[i] - y[i];
            let bspl = h * k[0][i] - dy;
            ws.cont[0][i] = y[i];
            ws.cont[1][i] = dy;
            ws.cont[2][i] = bspl;
            ws.cont[3][i] = dy - h * k[6][i] - bspl;
            ws.cont[4][i] =
                h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
        }
    }

    /// Evolves `rho0` over `grid`, measuring `D` against `reference`.
    pub fn evolve(&self, rho0: &DensityMatrix, grid: &TimeGrid, reference: &DensityMatrix) -> Result<Trajectory> {
        let d = self.rhs.dim();
        if rho0.dim() != d || reference.dim() != d {
            return Err(Error::shape(
                d,
                if rho0.dim() != d { rho0.dim() } else { reference.dim() },
            ));
        }
        let mut meta = TrajectoryMeta::new(Method::Integrate);
        meta.rtol = Some(self.opts.rtol);
        meta.atol = Some(self.opts.atol);
        let mut distances = vec![0.0; grid.len()];
        let mut states = self.opts.store_states.then(|| Vec::with_capacity(grid.len()));
        let stats = self.integrate_vec(&rho0.to_vec(), grid.points(), |k, v| {
            let (tr, herm) = vec_drifts(v, d);
            meta.max_trace_drift = meta.max_trace_drift.max(tr);
            meta.max_hermiticity_drift = meta.max_hermiticity_drift.max(herm);
            distances[k] = vec_distance(v, reference.matrix());
            if let Some(s) = states.as_mut() {
                s.push(hermitized_state(v, d));
            }
        })?;
        meta.accepted_steps = stats.accepted;
        meta.rejected_steps = stats.rejected;
        if meta.max_trace_drift > 1e-9 {
            log::warn!("trace drift {:e} exceeds 1e-9", meta.max_trace_drift);
        }
        Ok(Trajectory {
            grid: grid.clone(),
            distances,
            states,
            meta,
        })
    }
}

fn dense_eval(cont: &[Vec<C64>; 5], theta: f64, out: &mut [C64]) {
    let theta1 = 1.0 - theta;
    for (i, o) in out.iter_mut().enumerate() {
        *o = cont[0][i] + theta * (cont[1][i] + theta1 * (cont[2][i] + theta * (cont[3][i] + theta1 * cont[4][i])));
    }
}

/// One-shot integrator run with the given options.
pub fn evolve_integrate(
    h: &HermitianOperator,
    diss: &Dissipator,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    opts: IntegratorOptions,
    reference: &DensityMatrix,
) -> Result<Trajectory> {
    Integrator::new(h, diss, opts)?.evolve(rho0, grid, reference)
}

/// `t ↦ D(ρ(t), reference)` for times at or after some `t_lo`.
pub type DistanceFn<'a> = Box<dyn Fn(f64) -> Result<f64> + 'a>;

/// Anything that can advance a state by a time `t`.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;
    fn propagate(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix>;

    /// Distance to `reference` of the state evolved from `rho0`, to be
    /// evaluated at times `t >= t_lo`. The default restarts from `ρ(t_lo)`.
    fn distance_fn<'a>(
        &'a self,
        rho0: &DensityMatrix,
        reference: &'a DensityMatrix,
        t_lo: f64,
    ) -> Result<DistanceFn<'a>> {
        let rho_lo = self.propagate(rho0, t_lo)?;
        Ok(Box::new(move |t| {
            distance(&self.propagate(&rho_lo, t - t_lo)?, reference)
        }))
    }
}

impl Dynamics for LiouvillianSpectrum {
    fn dim(&self) -> usize {
        self.dim_rho()
    }

    fn propagate(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        let coeffs = self.coefficients(rho)?;
        let active: Vec<usize> = (0..coeffs.len())
            .filter(|&n| coeffs[n].norm() > ACTIVE_MODE_CUTOFF)
            .collect();
        Ok(hermitized_state(
            &self.reconstruct_vec(&coeffs, &active, t),
            self.dim_rho(),
        ))
    }

    fn distance_fn<'a>(
        &'a self,
        rho0: &DensityMatrix,
        reference: &'a DensityMatrix,
        _t_lo: f64,
    ) -> Result<DistanceFn<'a>> {
        let coeffs = self.coefficients(rho0)?;
        let active: Vec<usize> = (0..coeffs.len())
            .filter(|&n| coeffs[n].norm() > ACTIVE_MODE_CUTOFF)
            .collect();
        Ok(Box::new(move |t| {
            Ok(vec_distance(
                &self.reconstruct_vec(&coeffs, &active, t),
                reference.matrix(),
            ))
        }))
    }
}

impl Dynamics for Integrator {
    fn dim(&self) -> usize {
        self.rhs.dim()
    }

    fn propagate(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        if rho.dim() != self.rhs.dim() {
            return Err(Error::shape(self.rhs.dim(), rho.dim()));
        }
        if t == 0.0 {
            return Ok(rho.clone());
        }
        let mut out = Vec::new();
        self.integrate_vec(&rho.to_vec(), &[0.0, t], |k, v| {
            if k == 1 {
                out = v.to_vec();
            }
        })?;
        Ok(hermitized_state(&out, self.rhs.dim()))
    }
}

/// Result of a log-linear fit of `D(t)` on a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Implied `Re λ_max`, half the slope of `ln D`.
    pub rate: f64,
    /// RMS residual of the fit in `ln D`; large values flag oscillation.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares slope of `ln D` on `[window.0, window.1]`, halved because
/// `D` is quadratic in `ρ − ρ_ss`.
pub fn late_time_rate(traj: &Trajectory, window: (f64, f64)) -> Result<RateFit> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::Domain(format!("empty fit window [{lo}, {hi}]")));
    }
    let times = traj.times();
    if lo < times[0] || hi > traj.grid.t_max() {
        return Err(Error::Domain(format!(
            "fit window [{lo}, {hi}] outside the grid [{}, {}]",
            times[0],
            traj.grid.t_max()
        )));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&traj.distances)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(&t, &dd)| (t, dd))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Domain(format!(
            "fit window holds {} points, need at least 3",
            pts.len()
        )));
    }
    if let Some((t, dd)) = pts.iter().find(|(_, dd)| !(*dd > 0.0)) {
        return Err(Error::Numerical(format!("nonpositive distance {dd:e} at t = {t}")));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1.ln() - ym)).sum();
    let slope = sxy / sxx;
    let residual = (pts
        .iter()
        .map(|p| (p.1.ln() - ym - slope * (p.0 - tm)).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(RateFit {
        rate: slope / 2.0,
        residual,
        points: pts.len(),
    })
}
