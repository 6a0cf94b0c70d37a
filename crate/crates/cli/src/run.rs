//! Experiment execution and artifact output.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use wgarray::eigenmodes::eigen_scan;
use wgarray::table::{format_float, write_csv};
use wgarray::{
    cascade, decompose, ensemble_spectrum, evolve, lattice_t, mft_t, optical_thickness_approx,
    rms_from_depth, run_storage_protocol, spectrum, AtomArray, DetuningSchedule, DriveField,
    DriveSchedule, EvolveSettings, LatticeDepthSpec, LatticeSpec, PolarizationVector,
    PositionModel, ScatteringCoefficients, SpectrumTable, StorageConfig, WaveguideParams,
};

use crate::config::{ConfigError, ConfigErrors, Kind, ModelKind, RunConfig};
use crate::recipes::grid;

/// One output file, held in memory until the whole run has succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Default)]
pub struct Output {
    pub artifacts: Vec<Artifact>,
    /// Extra facts recorded in the metadata sidecar.
    pub notes: serde_json::Map<String, serde_json::Value>,
}

impl Output {
    fn single(name: &str, bytes: Vec<u8>) -> Self {
        Self {
            artifacts: vec![Artifact {
                name: name.to_string(),
                bytes,
            }],
            notes: Default::default(),
        }
    }
}

fn config_error(path: &str, message: &str) -> anyhow::Error {
    ConfigErrors(vec![ConfigError::new(path, message)]).into()
}

fn params(cfg: &RunConfig) -> Result<WaveguideParams> {
    Ok(WaveguideParams::with_loss_ratio(cfg.gamma_ratio)?)
}

fn drive(cfg: &RunConfig) -> Complex64 {
    Complex64::new(cfg.drive.amplitude, cfg.drive.amplitude_im)
}

/// Positions in units of λ, from explicit positions or the lattice keys.
fn positions(cfg: &RunConfig) -> Vec<f64> {
    match &cfg.array.positions {
        Some(x) => x.clone(),
        None => (0..cfg.array.n)
            .map(|j| j as f64 * cfg.array.spacing)
            .collect(),
    }
}

/// The configured array with detunings `common + offsets`.
pub fn array(cfg: &RunConfig, p: &WaveguideParams, common: f64) -> Result<AtomArray> {
    let x: Vec<f64> = positions(cfg).iter().map(|v| v * p.wavelength()).collect();
    let offsets = cfg
        .array
        .detunings
        .clone()
        .unwrap_or_else(|| vec![0.0; x.len()]);
    let det = offsets.iter().map(|d| (d + common) * p.gamma_w()).collect();
    Ok(AtomArray::new(x, det)?)
}

/// Arrays for an eigen scan, keyed by the moving atom's position in units of λ.
pub fn scan_configs(cfg: &RunConfig, p: &WaveguideParams) -> Result<Vec<(f64, AtomArray)>> {
    let Some(atom) = cfg.eigen.scan_atom else {
        return Ok(vec![(0.0, array(cfg, p, 0.0)?)]);
    };
    let e = &cfg.eigen;
    let base = positions(cfg);
    let offsets = cfg
        .array
        .detunings
        .clone()
        .unwrap_or_else(|| vec![0.0; base.len()]);
    (0..e.scan_steps)
        .map(|i| {
            let x = e.scan_min + (e.scan_max - e.scan_min) * i as f64 / (e.scan_steps - 1) as f64;
            let mut xs = base.clone();
            xs[atom - 1] = x;
            let a = AtomArray::new(
                xs.iter().map(|v| v * p.wavelength()).collect(),
                offsets.iter().map(|d| d * p.gamma_w()).collect(),
            )?;
            Ok((x, a))
        })
        .collect()
}

pub fn storage_config(cfg: &RunConfig) -> Result<StorageConfig> {
    let s = &cfg.storage;
    let mut c = StorageConfig::with_atoms(s.n_atoms)?;
    c.spacing = s.spacing;
    c.drive = drive(cfg);
    if let Some(d) = &s.detunings {
        c.detunings = d.clone();
    }
    c.switch_time = s.switch_time;
    c.ramp = s.ramp;
    c.horizon = s.horizon;
    c.tol = s.tol;
    c.sample_dt = s.sample_dt;
    Ok(c)
}

fn regular_lattice(cfg: &RunConfig, p: &WaveguideParams, what: &str) -> Result<LatticeSpec> {
    if cfg.array.positions.is_some() {
        return Err(config_error(
            "array.positions",
            &format!("{what} needs a regular lattice (array.n, array.spacing)"),
        ));
    }
    if cfg.array.detunings.is_some() {
        return Err(config_error(
            "array.detunings",
            &format!("{what} needs identical atoms"),
        ));
    }
    Ok(LatticeSpec::new(
        cfg.array.n,
        cfg.array.spacing * p.wavelength(),
        0.0,
    )?)
}

fn at(e: wgarray::Error, delta: f64) -> wgarray::Error {
    wgarray::Error::AtDetuning {
        delta,
        source: Box::new(e),
    }
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> wgarray::Result<()>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write(&mut out)?;
    Ok(out)
}

/// Runs the experiment selected by `cfg.kind`.
pub fn execute(cfg: &RunConfig) -> Result<Output> {
    let kind = cfg
        .kind
        .clone()
        .ok_or_else(|| config_error("kind", "no experiment selected"))?;
    let p = params(cfg)?;
    let gw = p.gamma_w();
    match kind {
        Kind::Spectrum => {
            let a = array(cfg, &p, 0.0)?;
            let t = spectrum(&a, &p, &DriveField::new(drive(cfg)), &grid(cfg, &p)?)
                .context("steady-state spectrum")?;
            Ok(Output::single(
                "spectrum.csv",
                csv_bytes(|o| t.write_csv(o, gw))?,
            ))
        }
        Kind::Eigen => {
            let scan = eigen_scan(&scan_configs(cfg, &p)?, &p).context("eigendecomposition")?;
            Ok(Output::single(
                "eigen.csv",
                csv_bytes(|o| scan.write_csv(o, &p))?,
            ))
        }
        Kind::Evolve => evolve_run(cfg, &p),
        Kind::Storage => {
            let run =
                run_storage_protocol(&storage_config(cfg)?, &p).context("storage protocol")?;
            let weights = csv_bytes(|o| run.protocol.write_csv(o, gw))?;
            let excitation = csv_bytes(|o| run.write_normalized_csv(o, gw))?;
            let mut out = Output::single("storage_weights.csv", weights);
            out.artifacts.push(Artifact {
                name: "storage_excitation.csv".into(),
                bytes: excitation,
            });
            out.notes.insert(
                "stored_drift".into(),
                run.stored_drift(cfg.storage.horizon - run.release_time())
                    .into(),
            );
            Ok(out)
        }
        Kind::Ensemble => {
            let spec = regular_lattice(cfg, &p, "an ensemble")?;
            let e = &cfg.ensemble;
            let model = match e.model {
                ModelKind::Fixed => PositionModel::Fixed,
                ModelKind::Gauss => {
                    let rms = match (e.rms, e.depth) {
                        (Some(r), _) => r * p.wavelength(),
                        (None, Some(s)) => rms_from_depth(&LatticeDepthSpec {
                            spacing: spec.spacing,
                            depth: s,
                        })?,
                        (None, None) => {
                            return Err(config_error(
                                "ensemble.rms",
                                "the gauss model needs a width",
                            ))
                        }
                    };
                    PositionModel::gaussian(rms)?
                }
                ModelKind::Uniform => PositionModel::uniform(e.interval * p.wavelength())?,
            };
            let r = ensemble_spectrum(
                &model,
                &spec,
                &p,
                &DriveField::new(drive(cfg)),
                &grid(cfg, &p)?,
                e.realizations,
                cfg.seed,
            )
            .context("ensemble average")?;
            let mut out = Output::single("ensemble.csv", csv_bytes(|o| r.write_csv(o, gw))?);
            out.notes
                .insert("failed_solves".into(), r.failures.len().into());
            Ok(out)
        }
        Kind::Analytic => analytic(cfg, &p),
        Kind::Figure(id) => id.compute(cfg),
    }
}

fn evolve_run(cfg: &RunConfig, p: &WaveguideParams) -> Result<Output> {
    let ev = &cfg.evolve;
    let gw = p.gamma_w();
    let a = array(cfg, p, ev.delta)?;
    let det = DetuningSchedule::constant(a.detunings());
    let d0 = drive(cfg);
    let schedule = match ev.drive_off {
        Some(t) => DriveSchedule::ramp(d0, Complex64::new(0.0, 0.0), t / gw, (t + ev.ramp) / gw)?,
        None => DriveSchedule::constant(d0),
    };
    let settings = EvolveSettings {
        tol: ev.tol,
        sample_dt: ev.sample_dt / gw,
    };
    let mut tr = evolve(
        &a,
        p,
        &det,
        &schedule,
        &PolarizationVector::zeros(a.len()),
        (0.0, ev.t_end / gw),
        &settings,
    )
    .context("time evolution")?;
    let modes = decompose(&a, p).context("eigendecomposition")?;
    tr.attach_weights(&modes).context("mode weights")?;
    let mut out = Output::single("evolve.csv", csv_bytes(|o| tr.write_csv(o, gw))?);
    out.notes.insert(
        "zero_binorm_modes".into(),
        modes
            .zero_binorm_flags()
            .iter()
            .filter(|f| **f)
            .count()
            .into(),
    );
    Ok(out)
}

fn analytic(cfg: &RunConfig, p: &WaveguideParams) -> Result<Output> {
    let spec = regular_lattice(cfg, p, "the analytic solution")?;
    let g = grid(cfg, p)?;
    let n = spec.n_atoms;
    let rows: Vec<Result<Vec<String>>> = g
        .values()
        .par_iter()
        .map(|&delta| {
            let a = spec.to_array(delta);
            let c = match (lattice_t(n, spec.spacing, delta, p), cascade(&a, p)) {
                (Ok(t), Ok(m)) => ScatteringCoefficients::from_amplitudes(t, m.r),
                (Err(wgarray::Error::TotalReflection(_)), _)
                | (_, Err(wgarray::Error::TotalReflection(_))) => {
                    // The first atom is a perfect mirror.
                    let x1 = a.positions()[0];
                    let r = -Complex64::from_polar(1.0, 2.0 * p.k() * x1);
                    ScatteringCoefficients::from_amplitudes(Complex64::new(0.0, 0.0), r)
                }
                (Err(e), _) | (_, Err(e)) => return Err(at(e, delta).into()),
            };
            let table = SpectrumTable {
                detunings: vec![delta],
                rows: vec![c],
            };
            let mut row = table.record(0, p.gamma_w());
            let approx = optical_thickness_approx(n, spec.spacing, delta, p).unwrap_or(f64::NAN);
            row.push(format_float(mft_t(n, delta, p).norm_sqr()));
            row.push(format_float(-c.transmittance.ln()));
            row.push(format_float(approx));
            Ok(row)
        })
        .collect();
    let rows = rows
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .context("transfer-matrix solution")?;
    let mut header: Vec<&str> = SpectrumTable::HEADER.to_vec();
    header.extend(["T_mft", "D_exact", "D_approx"]);
    let mut out = Vec::new();
    write_csv(&mut out, &header, rows)?;
    Ok(Output::single("analytic.csv", out))
}

/// Metadata sidecar contents.
pub fn metadata(cfg: &RunConfig, output: &Output) -> Result<Vec<u8>> {
    let kind = cfg.kind.as_ref().map(Kind::name).unwrap_or_default();
    let meta = serde_json::json!({
        "tool": "wgarray",
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": wgarray::VERSION,
        "command": kind,
        "seed": cfg.seed,
        "config": cfg,
        "artifacts": output.artifacts.iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
        "notes": output.notes,
    });
    let mut bytes = serde_json::to_vec_pretty(&meta)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes every artifact, or none: files are staged under temporary names
/// and renamed only once all of them are on disk.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let staged: Vec<(PathBuf, PathBuf)> = artifacts
        .iter()
        .map(|a| (dir.join(format!(".{}.partial", a.name)), dir.join(&a.name)))
        .collect();
    let cleanup = |upto: usize| {
        for (tmp, _) in &staged[..upto] {
            let _ = fs::remove_file(tmp);
        }
    };
    for (i, (a, (tmp, _))) in artifacts.iter().zip(&staged).enumerate() {
        if let Err(e) = fs::write(tmp, &a.bytes) {
            cleanup(i + 1);
            return Err(e).with_context(|| format!("writing {}", tmp.display()));
        }
    }
    for (i, (tmp, dest)) in staged.iter().enumerate() {
        if let Err(e) = fs::rename(tmp, dest) {
            for (_, done) in &staged[..i] {
                let _ = fs::remove_file(done);
            }
            for (t, _) in &staged[i..] {
                let _ = fs::remove_file(t);
            }
            return Err(e).with_context(|| format!("moving {} into place", dest.display()));
        }
    }
    Ok(staged.into_iter().map(|(_, d)| d).collect())
}
