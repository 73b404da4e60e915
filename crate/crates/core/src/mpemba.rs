//! Crossing detection, none/weak/strong classification, overlap spectra and
//! parameter sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, Boundary, HamiltonianSpec, HermitianOperator};
use crate::liouvillian::{
    build_superoperator, complex_dense, deviation_from_maximally_mixed, spectral_decomposition, DissipationSpec,
    Dissipator, LiouvillianSpectrum,
};
use crate::propagation::{
    evolve_spectral, Dynamics, GridSpec, Integrator, IntegratorOptions, Method, TimeGrid, Trajectory,
    DEFAULT_INTEGRATOR_T_MAX, GAP_HORIZON,
};
use crate::sector_basis::SectorBasis;
use crate::thermal::{thermal_state, DensityMatrix, TemperatureSpec};

/// `|D_cold − D_hot|` below this is treated as sign-less.
pub const NOISE_FLOOR: f64 = 1e-12;
/// Grid points after a crossing that must keep the new sign.
pub const PERSISTENCE: usize = 3;
/// Relative precision of bisection refinement.
pub const REFINE_TOLERANCE: f64 = 1e-4;
/// Default slow-mode weight threshold.
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 1e-10;
/// Hot temperatures used to certify a strong effect.
pub const DEFAULT_HOT_GRID: [f64; 6] = [0.5, 1.0, 2.0, 5.0, 10.0, 100.0];

pub fn default_hot_grid() -> Vec<TemperatureSpec> {
    DEFAULT_HOT_GRID.iter().map(|&t| TemperatureSpec::Finite(t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub crossed: bool,
    pub t_cross: Option<f64>,
    /// `D_cold − D_hot` at the last grid time.
    pub margin: f64,
    /// Grid times bracketing the crossing.
    pub bracket: Option<(f64, f64)>,
    /// Whether `t_cross` was refined on the dynamics or interpolated.
    pub refined: bool,
}

/// Re-evaluates both trajectories between grid points.
pub struct CrossingRefiner<'a> {
    pub dynamics: &'a dyn Dynamics,
    pub cold0: &'a DensityMatrix,
    pub hot0: &'a DensityMatrix,
    pub reference: &'a DensityMatrix,
}

impl CrossingRefiner<'_> {
    fn refine(&self, lo: f64, hi: f64) -> Result<f64> {
        let cold = self.dynamics.distance_fn(self.cold0, self.reference, lo)?;
        let hot = self.dynamics.distance_fn(self.hot0, self.reference, lo)?;
        let g = |tau: f64| -> Result<f64> { Ok(cold(lo + tau)? - hot(lo + tau)?) };
        let (mut a, mut b) = (0.0, hi - lo);
        while b - a > REFINE_TOLERANCE * (lo + b) {
            let mid = 0.5 * (a + b);
            if g(mid)? > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(lo + 0.5 * (a + b))
    }
}

/// First persistent sign change of `g = D_cold − D_hot` from positive to
/// negative.
pub fn detect_crossing(
    cold: &Trajectory,
    hot: &Trajectory,
    refiner: Option<&CrossingRefiner<'_>>,
) -> Result<CrossingReport> {
    if cold.grid != hot.grid {
        return Err(Error::Domain("crossing detection needs identical time grids".into()));
    }
    let g: Vec<f64> = cold.distances.iter().zip(&hot.distances).map(|(c, h)| c - h).collect();
    let (Some(&g0), Some(&margin)) = (g.first(), g.last()) else {
        return Err(Error::Domain("empty trajectories".into()));
    };
    if !(g0 > NOISE_FLOOR) {
        return Err(Error::InitialOrdering {
            cold: cold.distances[0],
            hot: hot.distances[0],
        });
    }
    let times = cold.times();
    let mut last_positive = 0;
    for k in 1..g.len() {
        if g[k] > NOISE_FLOOR {
            last_positive = k;
            continue;
        }
        if g[k] >= -NOISE_FLOOR {
            continue;
        }
        let persistent = k + PERSISTENCE <= g.len() && g[k..k + PERSISTENCE].iter().all(|&x| x < 0.0);
        if !persistent {
            continue;
        }
        let (lo, hi) = (times[last_positive], times[k]);
        let (t_cross, refined) = match refiner {
            Some(r) => (r.refine(lo, hi)?, true),
            None => {
                let (ga, gb) = (g[last_positive], g[k]);
                (lo + (hi - lo) * ga / (ga - gb), false)
            }
        };
        return Ok(CrossingReport {
            crossed: true,
            t_cross: Some(t_cross),
            margin,
            bracket: Some((lo, hi)),
            refined,
        });
    }
    Ok(CrossingReport {
        crossed: false,
        t_cross: None,
        margin: if margin.abs() <= NOISE_FLOOR { 0.0 } else { margin },
        bracket: None,
        refined: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QmeClass {
    None,
    Weak,
    Strong,
}

impl QmeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            QmeClass::None => "none",
            QmeClass::Weak => "weak",
            QmeClass::Strong => "strong",
        }
    }

    pub fn from_reports(reports: &[CrossingReport]) -> Self {
        let hits = reports.iter().filter(|r| r.crossed).count();
        if hits == 0 {
            QmeClass::None
        } else if hits == reports.len() {
            QmeClass::Strong
        } else {
            QmeClass::Weak
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotResult {
    pub temperature: TemperatureSpec,
    pub initial_distance: f64,
    pub report: CrossingReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmeVerdict {
    pub class: QmeClass,
    pub cold: TemperatureSpec,
    pub cold_initial_distance: f64,
    pub tested: Vec<HotResult>,
    /// Hot temperatures not strictly closer to the steady state than the cold one.
    pub dropped: Vec<TemperatureSpec>,
    pub method: Method,
    pub t_max: f64,
}

/// A chain with dephasing in one magnetization sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub spec: HamiltonianSpec,
    /// Number of up spins, or `None` for the full `2^L` space.
    pub num_up: Option<usize>,
    pub dissipation: DissipationSpec,
}

impl ModelPoint {
    /// Zero-magnetization sector (`num_up = L/2`) with uniform rate `gamma`.
    pub fn half_filled(spec: HamiltonianSpec, gamma: f64) -> Result<Self> {
        Ok(Self {
            num_up: Some(spec.num_sites / 2),
            dissipation: DissipationSpec::uniform(spec.num_sites, gamma)?,
            spec,
        })
    }
}

/// Everything needed to evolve states of one model point.
pub struct PreparedModel {
    pub point: ModelPoint,
    pub basis: SectorBasis,
    pub hamiltonian: HermitianOperator,
    pub dissipator: Dissipator,
    /// Stationary state against which distances are measured.
    pub reference: DensityMatrix,
    method: Method,
    spectrum: Option<LiouvillianSpectrum>,
    integrator: Integrator,
}

impl PreparedModel {
    /// Builds the sector operators and, for the spectral method, the
    /// eigenmodes. A spectrum without a biorthonormal eigenbasis switches the
    /// point to the integrator.
    pub fn new(point: ModelPoint, method: Method, opts: IntegratorOptions) -> Result<Self> {
        let basis = match point.num_up {
            Some(up) => SectorBasis::new(point.spec.num_sites, up)?,
            None => SectorBasis::full_space(point.spec.num_sites)?,
        };
        let mut hamiltonian = build_hamiltonian(&point.spec, &basis)?;
        hamiltonian.eigendecompose()?;
        let dissipator = Dissipator::dephasing(&point.dissipation, &basis)?;
        let mut method = method.resolve(basis.dim())?;
        let integrator = Integrator::new(&hamiltonian, &dissipator, opts)?;
        let mixed = DensityMatrix::maximally_mixed(basis.dim());
        let mut spectrum = None;
        if method == Method::Spectral {
            let sup = build_superoperator(&complex_dense(&hamiltonian), &dissipator)?;
            match spectral_decomposition(&sup) {
                Ok(s) => spectrum = Some(s),
                Err(Error::DefectiveSpectrum { residual, .. }) => {
                    log::warn!("eigenmodes are not biorthonormal (residual {residual:e}); integrating instead");
                    method = Method::Integrate;
                }
                Err(e) => return Err(e),
            }
        }
        let (spectrum, reference) = match spectrum {
            Some(spectrum) => {
                let reference = match spectrum.steady_state() {
                    Ok(ss) => {
                        let dev = deviation_from_maximally_mixed(&ss);
                        log::debug!("steady state deviates from I/d by {dev:e}");
                        ss
                    }
                    Err(Error::DegenerateSteadyState { multiplicity, .. }) => {
                        log::warn!("{multiplicity} stationary modes; measuring distances to I/d");
                        spectrum.steady_state_with_target(&mixed)?
                    }
                    Err(e) => return Err(e),
                };
                (Some(spectrum), reference)
            }
            None => {
                let mut out = vec![num_complex::Complex64::new(0.0, 0.0); basis.dim() * basis.dim()];
                integrator.rhs().apply(&mixed.to_vec(), &mut out);
                let residual = out.iter().fold(0.0f64, |m, z| m.max(z.norm()));
                if residual > 1e-12 {
                    return Err(Error::Numerical(format!(
                        "I/d is not stationary (residual {residual:e})"
                    )));
                }
                (None, mixed)
            }
        };
        Ok(Self {
            point,
            basis,
            hamiltonian,
            dissipator,
            reference,
            method,
            spectrum,
            integrator,
        })
    }

    /// Uses an already computed spectrum instead of diagonalizing again.
    pub fn with_spectrum(point: ModelPoint, spectrum: LiouvillianSpectrum, opts: IntegratorOptions) -> Result<Self> {
        let mut model = Self::new(point, Method::Integrate, opts)?;
        if spectrum.dim_rho() != model.basis.dim() {
            return Err(Error::shape(model.basis.dim(), spectrum.dim_rho()));
        }
        model.reference = spectrum
            .steady_state()
            .or_else(|_| spectrum.steady_state_with_target(&model.reference))?;
        model.spectrum = Some(spectrum);
        model.method = Method::Spectral;
        Ok(model)
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn spectrum(&self) -> Option<&LiouvillianSpectrum> {
        self.spectrum.as_ref()
    }

    pub fn into_spectrum(self) -> Option<LiouvillianSpectrum> {
        self.spectrum
    }

    pub fn integrator(&self) -> &Integrator {
        &self.integrator
    }

    pub fn thermal(&self, temp: TemperatureSpec) -> Result<DensityMatrix> {
        thermal_state(&self.hamiltonian, temp)
    }

    /// `15/|Re λ_2|` with a known spectrum, else the integrator horizon.
    pub fn default_t_max(&self) -> f64 {
        match self.spectrum.as_ref().and_then(|s| s.gap()) {
            Some(gap) if gap > 0.0 => GAP_HORIZON / gap,
            _ => DEFAULT_INTEGRATOR_T_MAX,
        }
    }

    pub fn default_grid(&self) -> Result<TimeGrid> {
        TimeGrid::default_for(self.default_t_max())
    }

    pub fn evolve(&self, rho0: &DensityMatrix, grid: &TimeGrid, store_states: bool) -> Result<Trajectory> {
        match &self.spectrum {
            Some(s) => evolve_spectral(s, rho0, grid, &self.reference, store_states),
            None => {
                if store_states && !self.integrator.options().store_states {
                    let opts = IntegratorOptions {
                        store_states: true,
                        ..*self.integrator.options()
                    };
                    Integrator::new(&self.hamiltonian, &self.dissipator, opts)?.evolve(rho0, grid, &self.reference)
                } else {
                    self.integrator.evolve(rho0, grid, &self.reference)
                }
            }
        }
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        match &self.spectrum {
            Some(s) => s,
            None => &self.integrator,
        }
    }
}

/// Options shared by classification and sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Refine crossing times on the dynamics (otherwise interpolate).
    pub refine: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { refine: true }
    }
}

/// Evolves the cold state and every hot state and classifies the crossings.
pub fn classify_qme(
    model: &PreparedModel,
    cold: TemperatureSpec,
    hot: &[TemperatureSpec],
    grid: &TimeGrid,
    opts: ClassifyOptions,
) -> Result<QmeVerdict> {
    if hot.is_empty() {
        return Err(Error::Domain("hot temperature grid is empty".into()));
    }
    let cold0 = model.thermal(cold)?;
    let cold_d0 = crate::propagation::distance(&cold0, &model.reference)?;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for &t in hot {
        let rho = model.thermal(t)?;
        let d0 = crate::propagation::distance(&rho, &model.reference)?;
        if d0 + NOISE_FLOOR < cold_d0 {
            kept.push((t, rho, d0));
        } else {
            log::warn!("dropping hot temperature {t}: D(0) = {d0:e} is not below the cold D(0) = {cold_d0:e}");
            dropped.push(t);
        }
    }
    if kept.is_empty() {
        return Err(Error::Domain(format!(
            "no hot temperature starts closer to the steady state than {cold}"
        )));
    }
    let cold_traj = model.evolve(&cold0, grid, false)?;
    let tested = kept
        .iter()
        .map(|(t, rho, d0)| {
            let traj = model.evolve(rho, grid, false)?;
            let refiner = CrossingRefiner {
                dynamics: model.dynamics(),
                cold0: &cold0,
                hot0: rho,
                reference: &model.reference,
            };
            let report = detect_crossing(&cold_traj, &traj, opts.refine.then_some(&refiner))?;
            Ok(HotResult {
                temperature: *t,
                initial_distance: *d0,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<CrossingReport> = tested.iter().map(|h| h.report.clone()).collect();
    Ok(QmeVerdict {
        class: QmeClass::from_reports(&reports),
        cold,
        cold_initial_distance: cold_d0,
        tested,
        dropped,
        method: model.method(),
        t_max: grid.t_max(),
    })
}

/// Mode weights `w_n = |Tr(l_n† ρ0)|` in sorted mode order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSpectrum {
    pub weights: Vec<f64>,
    pub steady_weight: f64,
    pub zero_modes: usize,
    pub threshold: f64,
    /// 1-based sorted index of the slowest non-stationary mode with weight
    /// above `threshold`.
    pub first_slow_index: Option<usize>,
    /// `(Re λ, Im λ)` of that mode.
    pub first_slow_eigenvalue: Option<(f64, f64)>,
    /// `max |ρ0 − Σ_n c_n r_n|`.
    pub reconstruction_residual: f64,
}

pub fn overlap_spectrum(
    spectrum: &LiouvillianSpectrum,
    rho0: &DensityMatrix,
    threshold: f64,
) -> Result<OverlapSpectrum> {
    let coeffs = spectrum.coefficients(rho0)?;
    let weights: Vec<f64> = coeffs.iter().map(|c| c.norm()).collect();
    let zero_modes = spectrum.zero_mode_count().max(1);
    let first = (zero_modes..weights.len()).find(|&n| weights[n] > threshold);
    let all: Vec<usize> = (0..coeffs.len()).collect();
    let rebuilt = spectrum.reconstruct_vec(&coeffs, &all, 0.0);
    let reconstruction_residual = rebuilt
        .iter()
        .zip(rho0.to_vec())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    Ok(OverlapSpectrum {
        steady_weight: weights.first().copied().unwrap_or(0.0),
        weights,
        zero_modes,
        threshold,
        first_slow_index: first.map(|n| n + 1),
        first_slow_eigenvalue: first.map(|n| (spectrum.eigenvalues()[n].re, spectrum.eigenvalues()[n].im)),
        reconstruction_residual,
    })
}

/// `start, start + step, …` up to `stop` (inclusive within 1e-9 step).
pub fn parameter_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Domain(format!(
            "invalid range start={start} stop={stop} step={step}"
        )));
    }
    if stop < start {
        return Err(Error::Domain(format!("empty range: stop {stop} < start {start}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| round_grid(start + k as f64 * step)).collect())
}

fn round_grid(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub num_sites: usize,
    pub delta: f64,
    pub j2_over_j1: f64,
    pub temperature: TemperatureSpec,
    pub gamma: f64,
    pub boundary: Boundary,
    pub crossed: Option<bool>,
    pub t_cross: Option<f64>,
    pub verdict: Option<QmeClass>,
    pub error: Option<String>,
}

/// Contiguous runs of crossing parameter values for one `(L, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaWindow {
    pub num_sites: usize,
    pub temperature: TemperatureSpec,
    pub intervals: Vec<(f64, f64)>,
    /// The interval that contains `Δ = 1`, if any.
    pub critical: Option<(f64, f64)>,
    /// `hi − lo` of `critical`.
    pub width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSweepParams {
    /// Nearest-neighbour exchange; `-1` is the ferromagnetic convention.
    pub j1: f64,
    pub sizes: Vec<usize>,
    pub temperatures: Vec<TemperatureSpec>,
    pub deltas: Vec<f64>,
    pub cold: TemperatureSpec,
    pub boundary: Boundary,
    pub gamma: f64,
    pub method: Method,
    pub grid: GridSpec,
    pub integrator: IntegratorOptions,
    pub classify: ClassifyOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweep {
    pub rows: Vec<SweepRow>,
    pub windows: Vec<DeltaWindow>,
}

fn grid_for(model: &PreparedModel, grid: &GridSpec) -> Result<TimeGrid> {
    grid.build(model.default_t_max())
}

fn crossing_row(
    model: &PreparedModel,
    cold0: &DensityMatrix,
    cold_traj: &Trajectory,
    hot: TemperatureSpec,
    grid: &TimeGrid,
    opts: ClassifyOptions,
) -> Result<CrossingReport> {
    let hot0 = model.thermal(hot)?;
    let traj = model.evolve(&hot0, grid, false)?;
    let refiner = CrossingRefiner {
        dynamics: model.dynamics(),
        cold0,
        hot0: &hot0,
        reference: &model.reference,
    };
    detect_crossing(cold_traj, &traj, opts.refine.then_some(&refiner))
}

/// Crossing scan over `Δ` for every `(L, T)`; points run in parallel.
pub fn delta_window_sweep(params: &DeltaSweepParams) -> Result<DeltaSweep> {
    if params.deltas.is_empty() || params.sizes.is_empty() || params.temperatures.is_empty() {
        return Err(Error::Domain(
            "sweep needs at least one size, temperature and delta".into(),
        ));
    }
    let jobs: Vec<(usize, f64)> = params
        .sizes
        .iter()
        .flat_map(|&l| params.deltas.iter().map(move |&d| (l, d)))
        .collect();
    let blocks: Vec<Vec<SweepRow>> = jobs
        .par_iter()
        .map(|&(l, delta)| {
            let row = |temp, outcome: Result<CrossingReport>| {
                let (crossed, t_cross, error) = match outcome {
                    Ok(r) => (Some(r.crossed), r.t_cross, None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                SweepRow {
                    num_sites: l,
                    delta,
                    j2_over_j1: 0.0,
                    temperature: temp,
                    gamma: params.gamma,
                    boundary: params.boundary,
                    crossed,
                    t_cross,
                    verdict: None,
                    error,
                }
            };
            let spec = HamiltonianSpec {
                j1: params.j1,
                ..HamiltonianSpec::xxz(l, delta, params.boundary)
            };
            let prepared = ModelPoint::half_filled(spec, params.gamma).and_then(|point| {
                let m = PreparedModel::new(point, params.method, params.integrator)?;
                let grid = grid_for(&m, &params.grid)?;
                let cold0 = m.thermal(params.cold)?;
                let cold_traj = m.evolve(&cold0, &grid, false)?;
                Ok((m, grid, cold0, cold_traj))
            });
            match prepared {
                Ok((m, grid, cold0, cold_traj)) => params
                    .temperatures
                    .iter()
                    .map(|&t| row(t, crossing_row(&m, &cold0, &cold_traj, t, &grid, params.classify)))
                    .collect(),
                Err(e) => {
                    log::warn!("sweep point L={l} delta={delta} failed: {e}");
                    let msg = e.to_string();
                    params
                        .temperatures
                        .iter()
                        .map(|&t| row(t, Err(Error::Numerical(msg.clone()))))
                        .collect()
                }
            }
        })
        .collect();
    let mut rows: Vec<SweepRow> = blocks.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.num_sites, temp_key(a.temperature))
            .partial_cmp(&(b.num_sites, temp_key(b.temperature)))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.delta.total_cmp(&b.delta))
    });
    let mut windows = Vec::new();
    for &l in &params.sizes {
        for &t in &params.temperatures {
            let series: Vec<(f64, bool)> = rows
                .iter()
                .filter(|r| r.num_sites == l && r.temperature == t)
                .map(|r| (r.delta, r.crossed == Some(true)))
                .collect();
            windows.push(window_from_series(l, t, &series));
        }
    }
    Ok(DeltaSweep { rows, windows })
}

fn temp_key(t: TemperatureSpec) -> f64 {
    match t {
        TemperatureSpec::Finite(x) => x,
        TemperatureSpec::ZeroPlus => 0.0,
        TemperatureSpec::ZeroMinus => -0.0,
        TemperatureSpec::Infinite => f64::INFINITY,
    }
}

/// Groups consecutive crossing points of an ascending series into intervals.
pub fn window_from_series(num_sites: usize, temperature: TemperatureSpec, series: &[(f64, bool)]) -> DeltaWindow {
    let mut intervals = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for &(x, hit) in series {
        match (hit, open.as_mut()) {
            (true, Some(iv)) => iv.1 = x,
            (true, None) => open = Some((x, x)),
            (false, Some(_)) => intervals.extend(open.take()),
            (false, None) => {}
        }
    }
    intervals.extend(open);
    let critical = intervals
        .iter()
        .copied()
        .find(|&(lo, hi)| lo - 1e-9 <= 1.0 && 1.0 <= hi + 1e-9);
    DeltaWindow {
        num_sites,
        temperature,
        intervals,
        critical,
        width: critical.map(|(lo, hi)| round_grid(hi - lo)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct J1J2SweepParams {
    pub ratios: Vec<f64>,
    /// `J1`, `Δ1`, `Δ2`, boundary and size; `J2` is replaced by `ratio · J1`.
    pub base: HamiltonianSpec,
    pub cold: TemperatureSpec,
    pub temperatures: Vec<TemperatureSpec>,
    pub gamma: f64,
    pub method: Method,
    pub grid: GridSpec,
    pub integrator: IntegratorOptions,
    pub classify: ClassifyOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct J1J2Point {
    pub ratio: f64,
    pub verdict: Option<QmeVerdict>,
    pub error: Option<String>,
}

/// Classification per `J2/J1` ratio at fixed `Δ1 = Δ2`.
pub fn j1j2_sweep(params: &J1J2SweepParams) -> Result<Vec<J1J2Point>> {
    if params.ratios.is_empty() || params.temperatures.is_empty() {
        return Err(Error::Domain(
            "sweep needs at least one ratio and one temperature".into(),
        ));
    }
    Ok(params
        .ratios
        .par_iter()
        .map(|&ratio| {
            let spec = HamiltonianSpec {
                j2: ratio * params.base.j1,
                ..params.base
            };
            let run = || -> Result<QmeVerdict> {
                let model = PreparedModel::new(
                    ModelPoint::half_filled(spec, params.gamma)?,
                    params.method,
                    params.integrator,
                )?;
                let grid = grid_for(&model, &params.grid)?;
                classify_qme(&model, params.cold, &params.temperatures, &grid, params.classify)
            };
            match run() {
                Ok(v) => J1J2Point {
                    ratio,
                    verdict: Some(v),
                    error: None,
                },
                Err(e) => {
                    log::warn!("sweep point J2/J1={ratio} failed: {e}");
                    J1J2Point {
                        ratio,
                        verdict: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect())
}

/// Flattens a `J2/J1` sweep into table rows, one per tested temperature.
pub fn j1j2_rows(params: &J1J2SweepParams, points: &[J1J2Point]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for p in points {
        let base = SweepRow {
            num_sites: params.base.num_sites,
            delta: params.base.delta1,
            j2_over_j1: p.ratio,
            temperature: params.cold,
            gamma: params.gamma,
            boundary: params.base.boundary,
            crossed: None,
            t_cross: None,
            verdict: None,
            error: p.error.clone(),
        };
        match &p.verdict {
            Some(v) => rows.extend(v.tested.iter().map(|h| SweepRow {
                temperature: h.temperature,
                crossed: Some(h.report.crossed),
                t_cross: h.report.t_cross,
                verdict: Some(v.class),
                ..base.clone()
            })),
            None => rows.extend(params.temperatures.iter().map(|&t| SweepRow {
                temperature: t,
                ..base.clone()
            })),
        }
    }
    rows
}
