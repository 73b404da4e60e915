//! Run configuration and plain-text result formats.
//!
//! Configurations are flat `key = value` documents with dotted sections:
//!
//! ```text
//! model = xxz
//! model.Delta1 = 1
//! lattice.L = 8
//! lattice.boundary = periodic
//! initial.hot = 1, 10, 100
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::{Boundary, HamiltonianSpec};
use crate::liouvillian::{DissipationSpec, LiouvillianSpectrum, DEFAULT_SUPEROPERATOR_CAP};
use crate::mpemba::{
    default_hot_grid, ClassifyOptions, DeltaWindow, ModelPoint, OverlapSpectrum, QmeVerdict, SweepRow,
    DEFAULT_OVERLAP_THRESHOLD,
};
use crate::propagation::{GridSpec, IntegratorOptions, Method, Spacing, Trajectory};
use crate::sector_basis::{binomial, MAX_SITES};
use crate::thermal::{DensityMatrix, TemperatureSpec};

/// Shortest round-trip decimal text for `x`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || (x.abs() >= 1e-4 && x.abs() < 1e15) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn fmt_list<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Xxz,
    J1J2,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Xxz => "xxz",
            ModelKind::J1J2 => "j1j2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub grid: GridSpec,
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also dump right and left eigenmodes in binary form.
    pub modes: bool,
    /// Also write the full density matrix at every grid time.
    pub states: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub temperatures: Vec<TemperatureSpec>,
    pub delta_start: f64,
    pub delta_stop: f64,
    pub delta_step: f64,
    pub ratios: Vec<f64>,
    pub refine: bool,
}

/// Validated run configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub j1: f64,
    pub j2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub num_sites: usize,
    pub boundary: Boundary,
    /// `None` selects the full space (`lattice.num_up = all`).
    pub num_up: Option<usize>,
    /// One entry for a uniform rate, otherwise one per site.
    pub gamma: Vec<f64>,
    pub cold: TemperatureSpec,
    pub hot: Vec<TemperatureSpec>,
    pub time: TimeConfig,
    pub method: Method,
    pub output: OutputConfig,
    pub seed: u64,
    pub sweep: SweepConfig,
    pub overlap_threshold: f64,
}

const KEYS: &[&str] = &[
    "model",
    "model.J1",
    "model.J2",
    "model.Delta1",
    "model.Delta2",
    "lattice.L",
    "lattice.boundary",
    "lattice.num_up",
    "dissipation.gamma",
    "initial.cold",
    "initial.hot",
    "time.t_max",
    "time.t_min",
    "time.points",
    "time.spacing",
    "time.rtol",
    "time.atol",
    "method",
    "output.dir",
    "output.modes",
    "output.states",
    "seed",
    "sweep.L",
    "sweep.T",
    "sweep.delta_start",
    "sweep.delta_stop",
    "sweep.delta_step",
    "sweep.ratios",
    "sweep.refine",
    "overlaps.threshold",
];

/// Collects typed values and every problem found along the way.
struct Reader<'a> {
    values: &'a BTreeMap<String, (usize, String)>,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.values.get(key).map(|(line, v)| (*line, v.as_str()))
    }

    fn get<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> std::result::Result<T, String>) -> T {
        match self.raw(key) {
            None => default,
            Some((line, v)) => match parse(v) {
                Ok(x) => x,
                Err(e) => {
                    self.errors.push(format!("line {line}: {key}: {e}"));
                    default
                }
            },
        }
    }

    fn list<T>(
        &mut self,
        key: &str,
        default: Vec<T>,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Vec<T> {
        self.get(key, default, |v| {
            if v.trim().is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|item| parse(item.trim())).collect()
        })
    }
}

fn num(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.trim().parse().map_err(|_| format!("'{v}' is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{v}' is not finite"))
    }
}

fn int(v: &str) -> std::result::Result<usize, String> {
    v.trim()
        .parse()
        .map_err(|_| format!("'{v}' is not a nonnegative integer"))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("'{other}' is not true or false")),
    }
}

fn temperature(v: &str) -> std::result::Result<TemperatureSpec, String> {
    v.parse()
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut values = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(Error::Parse {
                line,
                message: format!("expected 'key = value', got '{trimmed}'"),
            });
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Parse {
                line,
                message: format!("unknown key '{key}'"),
            });
        }
        if values
            .insert(key.to_string(), (line, value.trim().to_string()))
            .is_some()
        {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
    }
    let mut r = Reader {
        values: &values,
        errors: Vec::new(),
    };

    let model = r.get("model", ModelKind::Xxz, |v| match v {
        "xxz" => Ok(ModelKind::Xxz),
        "j1j2" => Ok(ModelKind::J1J2),
        other => Err(format!("unknown model '{other}' (expected xxz or j1j2)")),
    });
    let j1 = r.get("model.J1", -1.0, num);
    let j2 = r.get("model.J2", 0.0, num);
    let delta1 = r.get("model.Delta1", 1.0, num);
    let delta2_default = if model == ModelKind::J1J2 { delta1 } else { 0.0 };
    let delta2 = r.get("model.Delta2", delta2_default, num);
    if r.raw("lattice.L").is_none() {
        r.errors.push("lattice.L is required".into());
    }
    let num_sites = r.get("lattice.L", 0, int);
    let boundary = r.get("lattice.boundary", Boundary::Periodic, |v| v.parse());
    let num_up = r.get("lattice.num_up", Some(num_sites / 2), |v| match v {
        "all" => Ok(None),
        v => int(v).map(Some),
    });
    let gamma = r.list("dissipation.gamma", vec![1.0], num);
    let cold = r.get("initial.cold", TemperatureSpec::ZeroPlus, temperature);
    let hot = r.list("initial.hot", default_hot_grid(), temperature);
    let defaults = GridSpec::default();
    let t_max = r.get("time.t_max", None, |v| num(v).map(Some));
    let t_min = r.get("time.t_min", defaults.t_min, num);
    let points = r.get("time.points", defaults.points, int);
    let spacing = r.get("time.spacing", Spacing::LogWithZero, |v| match v {
        "log" => Ok(Spacing::LogWithZero),
        "linear" => Ok(Spacing::Linear),
        other => Err(format!("unknown spacing '{other}' (expected log or linear)")),
    });
    let int_defaults = IntegratorOptions::default();
    let rtol = r.get("time.rtol", int_defaults.rtol, num);
    let atol = r.get("time.atol", int_defaults.atol, num);
    let method = r.get("method", Method::Auto, |v| v.parse().map_err(|e: Error| e.to_string()));
    let dir = r.get("output.dir", PathBuf::from("out"), |v| Ok(PathBuf::from(v)));
    let modes = r.get("output.modes", false, boolean);
    let states = r.get("output.states", false, boolean);
    let seed = r.get("seed", 0u64, |v| {
        v.parse().map_err(|_| format!("'{v}' is not an integer"))
    });
    let sizes = r.list("sweep.L", vec![num_sites], int);
    let temps = r.list("sweep.T", vec![TemperatureSpec::Finite(1.0)], temperature);
    let delta_start = r.get("sweep.delta_start", 0.0, num);
    let delta_stop = r.get("sweep.delta_stop", 3.0, num);
    let delta_step = r.get("sweep.delta_step", 0.01, num);
    let ratios = r.list("sweep.ratios", vec![-0.2499, -0.25, -0.3], num);
    let refine = r.get("sweep.refine", false, boolean);
    let overlap_threshold = r.get("overlaps.threshold", DEFAULT_OVERLAP_THRESHOLD, num);

    let e = &mut r.errors;
    if num_sites != 0 && !(1..=MAX_SITES).contains(&num_sites) {
        e.push(format!("lattice.L must be in 1..={MAX_SITES}, got {num_sites}"));
    }
    let min_periodic = if model == ModelKind::J1J2 { 3 } else { 2 };
    if num_sites != 0 && boundary == Boundary::Periodic && num_sites < min_periodic {
        e.push(format!(
            "periodic {} chains need lattice.L >= {min_periodic}",
            model.as_str()
        ));
    }
    if let Some(up) = num_up {
        if up > num_sites {
            e.push(format!("lattice.num_up must be in 0..={num_sites} or all, got {up}"));
        }
    }
    if model == ModelKind::Xxz && (j2 != 0.0 || delta2 != 0.0) {
        e.push("model.J2 and model.Delta2 must be 0 for the xxz model (use model = j1j2)".into());
    }
    if gamma.iter().any(|g| *g < 0.0) {
        e.push("dissipation.gamma must be >= 0".into());
    }
    if gamma.is_empty() || (gamma.len() != 1 && gamma.len() != num_sites) {
        e.push(format!(
            "dissipation.gamma needs one value or one per site ({num_sites}), got {}",
            gamma.len()
        ));
    }
    if hot.is_empty() {
        e.push("initial.hot must list at least one temperature".into());
    }
    if let Some(t) = t_max {
        if !(t > 0.0) {
            e.push(format!("time.t_max must be > 0, got {t}"));
        } else if spacing == Spacing::LogWithZero && t <= t_min {
            e.push(format!("time.t_max ({t}) must exceed time.t_min ({t_min})"));
        }
    }
    if !(t_min > 0.0) {
        e.push(format!("time.t_min must be > 0, got {t_min}"));
    }
    if points < 2 {
        e.push(format!("time.points must be >= 2, got {points}"));
    }
    if !(rtol > 0.0) {
        e.push(format!("time.rtol must be > 0, got {rtol}"));
    }
    if !(atol >= 0.0) {
        e.push(format!("time.atol must be >= 0, got {atol}"));
    }
    let dim = match num_up {
        Some(up) if up <= num_sites && num_sites <= MAX_SITES => Some(binomial(num_sites as u64, up as u64)),
        None if num_sites <= MAX_SITES => Some(1u128 << num_sites),
        _ => None,
    };
    if let (Method::Spectral, Some(dim)) = (method, dim) {
        if dim > DEFAULT_SUPEROPERATOR_CAP as u128 {
            e.push(format!(
                "method = spectral needs sector dimension <= {DEFAULT_SUPEROPERATOR_CAP}, got {dim}"
            ));
        }
    }
    if sizes.iter().any(|&l| !(1..=MAX_SITES).contains(&l)) {
        e.push(format!("sweep.L entries must be in 1..={MAX_SITES}"));
    }
    if !(delta_step > 0.0) {
        e.push(format!("sweep.delta_step must be > 0, got {delta_step}"));
    }
    if !(delta_stop >= delta_start) {
        e.push(format!(
            "empty Delta range: sweep.delta_stop ({delta_stop}) < sweep.delta_start ({delta_start})"
        ));
    }
    if !(overlap_threshold >= 0.0) {
        e.push(format!("overlaps.threshold must be >= 0, got {overlap_threshold}"));
    }
    if !r.errors.is_empty() {
        return Err(Error::Validation(r.errors));
    }
    Ok(RunConfig {
        model,
        j1,
        j2,
        delta1,
        delta2,
        num_sites,
        boundary,
        num_up,
        gamma,
        cold,
        hot,
        time: TimeConfig {
            grid: GridSpec {
                t_max,
                t_min,
                points,
                spacing,
            },
            rtol,
            atol,
        },
        method,
        output: OutputConfig { dir, modes, states },
        seed,
        sweep: SweepConfig {
            sizes,
            temperatures: temps,
            delta_start,
            delta_stop,
            delta_step,
            ratios,
            refine,
        },
        overlap_threshold,
    })
}

impl RunConfig {
    /// Canonical text form; `parse_config(cfg.to_text())` reproduces `cfg`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("model", self.model.as_str().into());
        kv("model.J1", fmt_f64(self.j1));
        kv("model.J2", fmt_f64(self.j2));
        kv("model.Delta1", fmt_f64(self.delta1));
        kv("model.Delta2", fmt_f64(self.delta2));
        kv("lattice.L", self.num_sites.to_string());
        kv("lattice.boundary", self.boundary.as_str().into());
        kv("lattice.num_up", self.num_up.map_or("all".into(), |u| u.to_string()));
        kv("dissipation.gamma", fmt_list(&self.gamma, |g| fmt_f64(*g)));
        kv("initial.cold", self.cold.to_string());
        kv("initial.hot", fmt_list(&self.hot, |t| t.to_string()));
        if let Some(t) = self.time.grid.t_max {
            kv("time.t_max", fmt_f64(t));
        }
        kv("time.t_min", fmt_f64(self.time.grid.t_min));
        kv("time.points", self.time.grid.points.to_string());
        kv(
            "time.spacing",
            match self.time.grid.spacing {
                Spacing::Linear => "linear",
                _ => "log",
            }
            .into(),
        );
        kv("time.rtol", fmt_f64(self.time.rtol));
        kv("time.atol", fmt_f64(self.time.atol));
        kv("method", self.method.as_str().into());
        kv("output.dir", self.output.dir.display().to_string());
        kv("output.modes", self.output.modes.to_string());
        kv("output.states", self.output.states.to_string());
        kv("seed", self.seed.to_string());
        kv("sweep.L", fmt_list(&self.sweep.sizes, |l| l.to_string()));
        kv("sweep.T", fmt_list(&self.sweep.temperatures, |t| t.to_string()));
        kv("sweep.delta_start", fmt_f64(self.sweep.delta_start));
        kv("sweep.delta_stop", fmt_f64(self.sweep.delta_stop));
        kv("sweep.delta_step", fmt_f64(self.sweep.delta_step));
        kv("sweep.ratios", fmt_list(&self.sweep.ratios, |x| fmt_f64(*x)));
        kv("sweep.refine", self.sweep.refine.to_string());
        kv("overlaps.threshold", fmt_f64(self.overlap_threshold));
        s
    }

    pub fn hamiltonian_spec(&self) -> HamiltonianSpec {
        HamiltonianSpec {
            j1: self.j1,
            j2: self.j2,
            delta1: self.delta1,
            delta2: self.delta2,
            boundary: self.boundary,
            num_sites: self.num_sites,
        }
    }

    pub fn dissipation(&self) -> Result<DissipationSpec> {
        match self.gamma.as_slice() {
            [g] => DissipationSpec::uniform(self.num_sites, *g),
            rates => DissipationSpec::per_site(rates.to_vec()),
        }
    }

    pub fn model_point(&self) -> Result<ModelPoint> {
        Ok(ModelPoint {
            spec: self.hamiltonian_spec(),
            num_up: self.num_up,
            dissipation: self.dissipation()?,
        })
    }

    pub fn integrator_options(&self) -> IntegratorOptions {
        IntegratorOptions {
            rtol: self.time.rtol,
            atol: self.time.atol,
            store_states: self.output.states,
            ..IntegratorOptions::default()
        }
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            refine: self.sweep.refine,
        }
    }

    /// The scalar rate, or the mean of per-site rates.
    pub fn gamma_summary(&self) -> f64 {
        self.gamma.iter().sum::<f64>() / self.gamma.len() as f64
    }
}

/// `n,re,im` rows, `n` 1-based in sorted mode order.
pub fn spectrum_csv(spectrum: &LiouvillianSpectrum) -> String {
    eigenvalues_csv(spectrum.eigenvalues())
}

/// `n,re,im` rows with 1-based `n`.
pub fn eigenvalues_csv(eigenvalues: &[C64]) -> String {
    let mut s = String::from("n,re,im\n");
    for (n, z) in eigenvalues.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", n + 1, fmt_f64(z.re), fmt_f64(z.im));
    }
    s
}

/// Mode weights per initial state: `n,re,im,<label1>,<label2>,…`.
pub fn overlaps_csv(eigenvalues: &[C64], columns: &[(String, &OverlapSpectrum)]) -> Result<String> {
    if let Some((label, _)) = columns.iter().find(|(_, o)| o.weights.len() != eigenvalues.len()) {
        return Err(Error::shape(eigenvalues.len(), format!("weights for {label}")));
    }
    let mut s = String::from("n,re,im");
    for (label, _) in columns {
        let _ = write!(s, ",{label}");
    }
    s.push('\n');
    for (n, z) in eigenvalues.iter().enumerate() {
        let _ = write!(s, "{},{},{}", n + 1, fmt_f64(z.re), fmt_f64(z.im));
        for (_, o) in columns {
            let _ = write!(s, ",{}", fmt_f64(o.weights[n]));
        }
        s.push('\n');
    }
    Ok(s)
}

/// One row per hot temperature: `T,D0,crossed,t_cross,margin,refined`.
pub fn crossings_csv(verdict: &QmeVerdict) -> String {
    let mut s = String::from("T,D0,crossed,t_cross,margin,refined\n");
    for h in &verdict.tested {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            h.temperature,
            fmt_f64(h.initial_distance),
            h.report.crossed,
            opt_f64(h.report.t_cross),
            fmt_f64(h.report.margin),
            h.report.refined,
        );
    }
    s
}

/// `L,T,lo,hi,width,intervals` with all crossing intervals joined by `;`.
pub fn windows_csv(windows: &[DeltaWindow]) -> String {
    let mut s = String::from("L,T,lo,hi,width,intervals\n");
    for w in windows {
        let intervals: Vec<String> = w
            .intervals
            .iter()
            .map(|(a, b)| format!("{}:{}", fmt_f64(*a), fmt_f64(*b)))
            .collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            w.num_sites,
            w.temperature,
            opt_f64(w.critical.map(|c| c.0)),
            opt_f64(w.critical.map(|c| c.1)),
            opt_f64(w.width),
            intervals.join(";"),
        );
    }
    s
}

/// `t,D` rows.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t,D\n");
    for (t, d) in traj.times().iter().zip(&traj.distances) {
        let _ = writeln!(s, "{},{}", fmt_f64(*t), fmt_f64(*d));
    }
    s
}

/// One row per trajectory sharing a grid: `t,<label1>,<label2>,…`.
pub fn trajectories_csv(trajs: &[&Trajectory]) -> Result<String> {
    let Some(first) = trajs.first() else {
        return Ok(String::from("t\n"));
    };
    if trajs.iter().any(|t| t.grid != first.grid) {
        return Err(Error::Domain("trajectories do not share a grid".into()));
    }
    let mut s = String::from("t");
    for t in trajs {
        let _ = write!(s, ",{}", t.meta.label);
    }
    s.push('\n');
    for (k, t) in first.times().iter().enumerate() {
        s.push_str(&fmt_f64(*t));
        for tr in trajs {
            let _ = write!(s, ",{}", fmt_f64(tr.distances[k]));
        }
        s.push('\n');
    }
    Ok(s)
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Sweep table with columns
/// `L,Delta,J2_over_J1,T,gamma,boundary,crossed,t_cross,verdict,error`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("L,Delta,J2_over_J1,T,gamma,boundary,crossed,t_cross,verdict,error\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.num_sites,
            fmt_f64(r.delta),
            fmt_f64(r.j2_over_j1),
            r.temperature,
            fmt_f64(r.gamma),
            r.boundary.as_str(),
            r.crossed.map(|c| c.to_string()).unwrap_or_default(),
            opt_f64(r.t_cross),
            r.verdict.map(|v| v.as_str()).unwrap_or(""),
            r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        );
    }
    s
}

/// Binary mode dump: `d` as little-endian `u64`, then for every mode in
/// sorted order the `d × d` matrix in row-major order as little-endian
/// `(re, im)` `f64` pairs.
pub fn write_modes(out: &mut impl std::io::Write, dim_rho: usize, modes: &Mat<C64>) -> Result<()> {
    let d = dim_rho;
    if modes.nrows() != d * d {
        return Err(Error::shape(d * d, modes.nrows()));
    }
    out.write_all(&(d as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * d * d);
    for n in 0..modes.ncols() {
        buf.clear();
        let col = modes.col_as_slice(n);
        for r in 0..d {
            for c in 0..d {
                let z = col[r + c * d];
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

/// State dump in the [`write_modes`] layout, one matrix per grid time.
pub fn write_states(out: &mut impl std::io::Write, states: &[DensityMatrix]) -> Result<()> {
    let d = states.first().map_or(0, DensityMatrix::dim);
    let mut stacked = Mat::<C64>::zeros(d * d, states.len());
    for (k, rho) in states.iter().enumerate() {
        if rho.dim() != d {
            return Err(Error::shape(d, rho.dim()));
        }
        for (r, z) in rho.to_vec().into_iter().enumerate() {
            stacked[(r, k)] = z;
        }
    }
    write_modes(out, d, &stacked)
}

/// Inverse of [`write_modes`]; returns `d` and the modes as `d × d` matrices.
pub fn read_modes(bytes: &[u8]) -> Result<(usize, Vec<Mat<C64>>)> {
    let bad = |m: &str| Error::Numerical(format!("malformed mode dump: {m}"));
    let header: [u8; 8] = bytes.get(..8).ok_or_else(|| bad("missing header"))?.try_into().unwrap();
    let d = u64::from_le_bytes(header) as usize;
    let body = &bytes[8..];
    let per_mode = 16 * d * d;
    if per_mode == 0 || !body.len().is_multiple_of(per_mode) {
        return Err(bad("length is not a whole number of modes"));
    }
    let f = |k: usize| f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().unwrap());
    let modes = (0..body.len() / per_mode)
        .map(|n| {
            let base = n * 2 * d * d;
            Mat::from_fn(d, d, |r, c| {
                let k = base + 2 * (r * d + c);
                C64::new(f(k), f(k + 1))
            })
        })
        .collect();
    Ok((d, modes))
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}
