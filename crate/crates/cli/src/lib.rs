//! Command orchestration behind the `mpemba` binary.
//!
//! Every run writes its results, a canonical copy of the configuration and a
//! `manifest.json` with SHA-256 checksums into one output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use mpemba_core::io::{
    crossings_csv, eigenvalues_csv, overlaps_csv, spectrum_csv, sweep_csv, trajectories_csv, windows_csv, write_file,
    write_modes, write_states,
};
use mpemba_core::liouvillian::complex_dense;
use mpemba_core::mpemba::{j1j2_rows, parameter_range, ClassifyOptions, DeltaSweepParams, J1J2SweepParams};
use mpemba_core::{
    build_superoperator, classify_qme, delta_window_sweep, j1j2_sweep, liouvillian_eigenvalues, overlap_spectrum,
    parse_config, Error, Method, PreparedModel, Result, RunConfig, TemperatureSpec, Trajectory,
};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Liouvillian eigenvalues of one model point.
    Spectrum,
    /// Distance trajectories for the cold and hot initial states.
    Evolve,
    /// Crossing classification of the cold state against the hot grid,
    /// with crossing times refined on the dynamics.
    Classify,
    /// Crossing windows in Δ for every size and temperature.
    SweepDelta,
    /// Classification per J2/J1 ratio.
    SweepJ1j2,
    /// Mode overlaps of the initial states.
    Overlaps,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Classify => "classify",
            Command::SweepDelta => "sweep-delta",
            Command::SweepJ1j2 => "sweep-j1j2",
            Command::Overlaps => "overlaps",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mpemba", version, about = "Mpemba relaxation of dephased spin chains")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Process exit status for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Validation(_) | Error::Domain(_) | Error::InitialOrdering { .. } => 2,
        Error::Resource(_) => 3,
        Error::Numerical(_)
        | Error::Eigensolver(_)
        | Error::DefectiveSpectrum { .. }
        | Error::StepUnderflow { .. }
        | Error::DegenerateSteadyState { .. }
        | Error::MissingEigensystem => 4,
        _ => 1,
    }
}

/// One output file.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            name: name.into(),
            bytes: bytes.into(),
        }
    }

    fn json(name: impl Into<String>, value: &Value) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values always serialize");
        bytes.push(b'\n');
        Self::new(name, bytes)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Reads the configuration, sizes the thread pool and runs the command.
/// Returns the path of the written manifest.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Validation(vec!["--jobs must be at least 1".into()]));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let text = std::fs::read_to_string(&cli.config)?;
    let cfg = parse_config(&text)?;
    let out_dir = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    run_command(cli.command, &cfg, &out_dir)
}

/// Runs `command` on a validated configuration and writes every artifact
/// plus the manifest into `out_dir`.
pub fn run_command(command: Command, cfg: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    let start = Instant::now();
    let canonical = cfg.to_text();
    log::info!(
        "{} on L={} ({}), writing to {}",
        command.as_str(),
        cfg.num_sites,
        cfg.boundary.as_str(),
        out_dir.display()
    );
    let mut artifacts = vec![Artifact::new("config.conf", canonical.clone())];
    artifacts.extend(match command {
        Command::Spectrum => spectrum(cfg)?,
        Command::Evolve => evolve(cfg)?,
        Command::Classify => classify(cfg)?,
        Command::SweepDelta => sweep_delta(cfg)?,
        Command::SweepJ1j2 => sweep_j1j2(cfg)?,
        Command::Overlaps => overlaps(cfg)?,
    });
    let mut files = Vec::with_capacity(artifacts.len());
    for a in &artifacts {
        write_file(&out_dir.join(&a.name), &a.bytes)?;
        files.push(json!({"path": a.name, "bytes": a.bytes.len(), "sha256": sha256_hex(&a.bytes)}));
    }
    let manifest = json!({
        "command": command.as_str(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": sha256_hex(canonical.as_bytes()),
        "threads": rayon::current_num_threads(),
        "seconds": start.elapsed().as_secs_f64(),
        "files": files,
    });
    let path = out_dir.join("manifest.json");
    let Artifact { bytes, .. } = Artifact::json("manifest.json", &manifest);
    write_file(&path, &bytes)?;
    log::info!(
        "wrote {} files in {:.2} s",
        artifacts.len() + 1,
        start.elapsed().as_secs_f64()
    );
    Ok(path)
}

fn model(cfg: &RunConfig, method: Method) -> Result<PreparedModel> {
    PreparedModel::new(cfg.model_point()?, method, cfg.integrator_options())
}

fn initial_temperatures(cfg: &RunConfig) -> Vec<TemperatureSpec> {
    std::iter::once(cfg.cold).chain(cfg.hot.iter().copied()).collect()
}

fn spectrum(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let model = model(cfg, Method::Spectral)?;
    let d = model.basis.dim();
    let Some(spec) = model.spectrum() else {
        log::warn!("no biorthonormal eigenbasis; writing eigenvalues only");
        let sup = build_superoperator(&complex_dense(&model.hamiltonian), &model.dissipator)?;
        let eigenvalues = liouvillian_eigenvalues(&sup)?;
        let summary = json!({
            "sector_dim": d,
            "modes": eigenvalues.len(),
            "decomposed": false,
        });
        return Ok(vec![
            Artifact::new("spectrum.csv", eigenvalues_csv(&eigenvalues)),
            Artifact::json("spectrum.json", &summary),
        ]);
    };
    let blocks: Vec<Value> = spec
        .blocks()
        .iter()
        .map(|b| json!({"start": b.start + 1, "len": b.len()}))
        .collect();
    let summary = json!({
        "sector_dim": d,
        "modes": spec.len(),
        "decomposed": true,
        "zero_modes": spec.zero_mode_count(),
        "gap": spec.gap(),
        "probe_residual": spec.probe_residual(),
        "biorthonormality_residual": spec.biorthonormality_residual(),
        "jordan_blocks": blocks,
    });
    let mut out = vec![
        Artifact::new("spectrum.csv", spectrum_csv(spec)),
        Artifact::json("spectrum.json", &summary),
    ];
    if cfg.output.modes {
        for (name, modes) in [
            ("right_modes.bin", spec.right_modes()),
            ("left_modes.bin", spec.left_modes()),
        ] {
            let mut bytes = Vec::new();
            write_modes(&mut bytes, d, modes)?;
            out.push(Artifact::new(name, bytes));
        }
    }
    Ok(out)
}

fn evolve(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let model = model(cfg, cfg.method)?;
    let grid = cfg.time.grid.build(model.default_t_max())?;
    let temps = initial_temperatures(cfg);
    let trajs: Vec<Trajectory> = temps
        .par_iter()
        .map(|&t| {
            Ok(model
                .evolve(&model.thermal(t)?, &grid, cfg.output.states)?
                .with_label(t.to_string()))
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&Trajectory> = trajs.iter().collect();
    let mut out = vec![Artifact::new("trajectories.csv", trajectories_csv(&refs)?)];
    let mut metas = Vec::new();
    for (k, tr) in trajs.iter().enumerate() {
        let mut meta = json!(tr.meta);
        if let Some(states) = &tr.states {
            let name = format!("states_{k}.bin");
            let mut bytes = Vec::new();
            write_states(&mut bytes, states)?;
            meta["states_file"] = json!(name);
            out.push(Artifact::new(name, bytes));
        }
        metas.push(meta);
    }
    let summary = json!({
        "method": model.method(),
        "t_max": grid.points().last(),
        "grid_points": grid.points().len(),
        "trajectories": metas,
    });
    out.insert(1, Artifact::json("trajectories.json", &summary));
    Ok(out)
}

fn classify(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let model = model(cfg, cfg.method)?;
    let grid = cfg.time.grid.build(model.default_t_max())?;
    let verdict = classify_qme(&model, cfg.cold, &cfg.hot, &grid, ClassifyOptions::default())?;
    log::info!("verdict: {}", verdict.class.as_str());
    Ok(vec![
        Artifact::json("verdict.json", &json!(verdict)),
        Artifact::new("crossings.csv", crossings_csv(&verdict)),
    ])
}

fn sweep_gamma(cfg: &RunConfig) -> f64 {
    if cfg.gamma.len() > 1 {
        log::warn!("sweeps use a uniform rate; taking the mean of the per-site rates");
    }
    cfg.gamma_summary()
}

fn sweep_delta(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let params = DeltaSweepParams {
        j1: cfg.j1,
        sizes: cfg.sweep.sizes.clone(),
        temperatures: cfg.sweep.temperatures.clone(),
        deltas: parameter_range(cfg.sweep.delta_start, cfg.sweep.delta_stop, cfg.sweep.delta_step)?,
        cold: cfg.cold,
        boundary: cfg.boundary,
        gamma: sweep_gamma(cfg),
        method: cfg.method,
        grid: cfg.time.grid,
        integrator: cfg.integrator_options(),
        classify: cfg.classify_options(),
    };
    let sweep = delta_window_sweep(&params)?;
    Ok(vec![
        Artifact::new("sweep.csv", sweep_csv(&sweep.rows)),
        Artifact::new("windows.csv", windows_csv(&sweep.windows)),
        Artifact::json("windows.json", &json!(sweep.windows)),
    ])
}

fn sweep_j1j2(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let params = J1J2SweepParams {
        ratios: cfg.sweep.ratios.clone(),
        base: cfg.hamiltonian_spec(),
        cold: cfg.cold,
        temperatures: cfg.hot.clone(),
        gamma: sweep_gamma(cfg),
        method: cfg.method,
        grid: cfg.time.grid,
        integrator: cfg.integrator_options(),
        classify: cfg.classify_options(),
    };
    let points = j1j2_sweep(&params)?;
    Ok(vec![
        Artifact::new("sweep.csv", sweep_csv(&j1j2_rows(&params, &points))),
        Artifact::json("sweep.json", &json!(points)),
    ])
}

fn overlaps(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    if cfg.method == Method::Integrate {
        return Err(Error::Validation(
            vec!["overlaps need method = spectral or auto".into()],
        ));
    }
    let model = model(cfg, Method::Spectral)?;
    let spec = model
        .spectrum()
        .ok_or_else(|| Error::Numerical("no biorthonormal eigenbasis for overlaps".into()))?;
    let temps = initial_temperatures(cfg);
    let spectra = temps
        .iter()
        .map(|&t| overlap_spectrum(spec, &model.thermal(t)?, cfg.overlap_threshold))
        .collect::<Result<Vec<_>>>()?;
    let columns: Vec<(String, _)> = temps.iter().map(|t| t.to_string()).zip(spectra.iter()).collect();
    let summary: Vec<Value> = temps
        .iter()
        .zip(&spectra)
        .map(|(t, o)| {
            json!({
                "temperature": t,
                "threshold": o.threshold,
                "steady_weight": o.steady_weight,
                "zero_modes": o.zero_modes,
                "first_slow_index": o.first_slow_index,
                "first_slow_eigenvalue": o.first_slow_eigenvalue,
                "reconstruction_residual": o.reconstruction_residual,
            })
        })
        .collect();
    Ok(vec![
        Artifact::new("overlaps.csv", overlaps_csv(spec.eigenvalues(), &columns)?),
        Artifact::json("overlaps.json", &json!(summary)),
    ])
}
