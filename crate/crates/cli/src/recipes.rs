//! Named figure presets and the computations behind them.

use std::fmt;

use anyhow::{Context, Result};
use num_complex::Complex64;
use serde::{Serialize, Serializer};
use wgarray::eigenmodes::eigen_scan;
use wgarray::table::{format_float, write_csv};
use wgarray::{
    ensemble_spectrum, run_storage_protocol, spectrum, AtomArray, DetuningGrid, DriveField,
    EigenmodeSet, EnsembleResult, LatticeSpec, PositionModel, SpectrumTable, WaveguideParams,
};

use crate::config::{RunConfig, StorageSection};
use crate::run::{storage_config, Artifact, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    TwoAtomAntisymmetric,
    TwoAtomSymmetric,
    TwoAtomSpectra,
    ThreeAtomSuperradiant,
    ThreeAtomNarrow,
    ThreeAtomBroad,
    ThreeAtomSpectrum,
    WavelengthLattice,
    QuarterLattice,
    Lattice04,
    StorageWeights,
    StorageExcitation,
    FluctuationsQuarter,
    FluctuationsHalf,
    Lossless,
    Lossy,
}

const IDS: [(&str, FigureId); 16] = [
    ("1a", FigureId::TwoAtomAntisymmetric),
    ("1b", FigureId::TwoAtomSymmetric),
    ("1c", FigureId::TwoAtomSpectra),
    ("2a", FigureId::ThreeAtomSuperradiant),
    ("2b", FigureId::ThreeAtomNarrow),
    ("2c", FigureId::ThreeAtomBroad),
    ("2d", FigureId::ThreeAtomSpectrum),
    ("3", FigureId::WavelengthLattice),
    ("4a", FigureId::QuarterLattice),
    ("4b", FigureId::Lattice04),
    ("5a", FigureId::StorageWeights),
    ("5b", FigureId::StorageExcitation),
    ("6a", FigureId::FluctuationsQuarter),
    ("6b", FigureId::FluctuationsHalf),
    ("7a", FigureId::Lossless),
    ("7b", FigureId::Lossy),
];

impl FigureId {
    pub fn parse(s: &str) -> Option<Self> {
        IDS.iter().find(|(name, _)| *name == s).map(|(_, id)| *id)
    }

    pub fn all() -> impl Iterator<Item = FigureId> {
        IDS.iter().map(|(_, id)| *id)
    }

    pub fn name(self) -> &'static str {
        IDS.iter()
            .find(|(_, id)| *id == self)
            .map(|(n, _)| *n)
            .expect("every id is listed")
    }

    /// Writes the panel's parameters into `cfg`.
    pub fn apply_preset(self, cfg: &mut RunConfig) {
        use FigureId::*;
        let defaults = RunConfig::default();
        cfg.gamma_ratio = 1.0;
        cfg.grid = defaults.grid.clone();
        cfg.array.detunings = None;
        match self {
            TwoAtomAntisymmetric | TwoAtomSymmetric => {
                cfg.array.n = 2;
                cfg.array.positions = Some(vec![0.0, 0.5]);
                cfg.eigen.scan_atom = Some(2);
                cfg.eigen.scan_min = 0.01;
                cfg.eigen.scan_max = 1.0;
                cfg.eigen.scan_steps = 100;
            }
            TwoAtomSpectra => {
                cfg.array.n = 2;
                cfg.array.positions = None;
            }
            ThreeAtomSuperradiant | ThreeAtomNarrow | ThreeAtomBroad => {
                cfg.array.positions = Some(vec![0.0, 0.4, 0.81]);
                cfg.eigen.scan_atom = Some(3);
                cfg.eigen.scan_min = 0.45;
                cfg.eigen.scan_max = 1.25;
                cfg.eigen.scan_steps = 161;
            }
            ThreeAtomSpectrum => cfg.array.positions = Some(vec![0.0, 0.4, 0.81]),
            WavelengthLattice => {
                cfg.array.positions = None;
                cfg.array.spacing = 1.0;
            }
            QuarterLattice | Lattice04 => {
                cfg.array.positions = None;
                cfg.array.spacing = if self == QuarterLattice { 0.25 } else { 0.4 };
            }
            StorageWeights | StorageExcitation => {
                cfg.storage = StorageSection { ..defaults.storage }
            }
            FluctuationsQuarter | FluctuationsHalf | Lossless | Lossy => {
                cfg.array.positions = None;
                cfg.array.n = 8;
                cfg.array.spacing = if self == FluctuationsHalf { 0.5 } else { 0.25 };
                cfg.ensemble.realizations = 400;
                cfg.ensemble.interval = 2.0;
                if self == Lossy {
                    cfg.gamma_ratio = 0.5;
                }
            }
        }
    }

    /// Computes the panel. Only the fields written by
    /// [`FigureId::apply_preset`], the seed and the realization count are
    /// read from `cfg`.
    pub fn compute(self, cfg: &RunConfig) -> Result<Output> {
        use FigureId::*;
        let p = WaveguideParams::with_loss_ratio(cfg.gamma_ratio)?;
        let file = format!("figure_{}.csv", self.name());
        let mut notes = serde_json::Map::new();
        let bytes = match self {
            TwoAtomAntisymmetric => {
                mode_track(cfg, &p, "x12_over_lambda", ModePick::Antisymmetric)?
            }
            TwoAtomSymmetric => mode_track(cfg, &p, "x12_over_lambda", ModePick::Symmetric)?,
            ThreeAtomSuperradiant => mode_track(cfg, &p, "x3_over_lambda", ModePick::Rank(0))?,
            ThreeAtomNarrow => mode_track(cfg, &p, "x3_over_lambda", ModePick::Rank(2))?,
            ThreeAtomBroad => mode_track(cfg, &p, "x3_over_lambda", ModePick::Rank(1))?,
            TwoAtomSpectra => {
                let curves =
                    [0.5, 0.45, 0.35].map(|x| (format!("x12={x}"), positions(&[0.0, x], &p)));
                spectra(cfg, &p, &curves)?
            }
            ThreeAtomSpectrum => {
                let x = cfg.array.positions.clone().unwrap_or_default();
                spectra(cfg, &p, &[("x3=0.81".to_string(), positions(&x, &p))])?
            }
            WavelengthLattice | QuarterLattice | Lattice04 => {
                let ns: &[usize] = if self == WavelengthLattice {
                    &[1, 2, 4, 8]
                } else {
                    &[2, 4, 8]
                };
                let curves: Vec<(String, AtomArray)> = ns
                    .iter()
                    .map(|&n| {
                        (
                            format!("N={n}"),
                            lattice(n, cfg.array.spacing, &p).to_array(0.0),
                        )
                    })
                    .collect();
                spectra(cfg, &p, &curves)?
            }
            StorageWeights | StorageExcitation => {
                let run =
                    run_storage_protocol(&storage_config(cfg)?, &p).context("storage protocol")?;
                let mut out = Vec::new();
                if self == StorageWeights {
                    run.protocol.write_csv(&mut out, p.gamma_w())?;
                } else {
                    run.write_normalized_csv(&mut out, p.gamma_w())?;
                }
                out
            }
            FluctuationsQuarter | FluctuationsHalf => {
                let models = [
                    ("fixed", PositionModel::Fixed),
                    ("rms=1/32", PositionModel::gaussian(p.wavelength() / 32.0)?),
                    ("rms=1/16", PositionModel::gaussian(p.wavelength() / 16.0)?),
                    ("rms=1/8", PositionModel::gaussian(p.wavelength() / 8.0)?),
                    (
                        "uniform=2",
                        PositionModel::uniform(cfg.ensemble.interval * p.wavelength())?,
                    ),
                ];
                let spec = lattice(cfg.array.n, cfg.array.spacing, &p);
                let curves: Vec<(String, LatticeSpec, PositionModel)> = models
                    .into_iter()
                    .map(|(l, m)| (l.to_string(), spec, m))
                    .collect();
                ensembles(cfg, &p, &curves, &mut notes)?
            }
            Lossless | Lossy => {
                let quarter = lattice(cfg.array.n, 0.25, &p);
                let half = lattice(cfg.array.n, 0.5, &p);
                let curves = vec![
                    ("d=0.25".to_string(), quarter, PositionModel::Fixed),
                    (
                        "uniform=2".to_string(),
                        quarter,
                        PositionModel::uniform(cfg.ensemble.interval * p.wavelength())?,
                    ),
                    ("d=0.5".to_string(), half, PositionModel::Fixed),
                ];
                ensembles(cfg, &p, &curves, &mut notes)?
            }
        };
        Ok(Output {
            artifacts: vec![Artifact { name: file, bytes }],
            notes,
        })
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for FigureId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

fn positions(x: &[f64], p: &WaveguideParams) -> AtomArray {
    AtomArray::with_common_detuning(x.iter().map(|v| v * p.wavelength()).collect(), 0.0)
        .expect("preset positions are finite")
}

fn lattice(n: usize, spacing: f64, p: &WaveguideParams) -> LatticeSpec {
    LatticeSpec::new(n, spacing * p.wavelength(), 0.0).expect("preset lattices are valid")
}

pub fn grid(cfg: &RunConfig, p: &WaveguideParams) -> Result<DetuningGrid> {
    let g = &cfg.grid;
    Ok(DetuningGrid::linspace(
        g.delta_min * p.gamma_w(),
        g.delta_max * p.gamma_w(),
        g.steps,
    )?)
}

fn drive(cfg: &RunConfig) -> DriveField {
    DriveField::new(Complex64::new(cfg.drive.amplitude, cfg.drive.amplitude_im))
}

fn spectra(
    cfg: &RunConfig,
    p: &WaveguideParams,
    curves: &[(String, AtomArray)],
) -> Result<Vec<u8>> {
    let g = grid(cfg, p)?;
    let d = drive(cfg);
    let tables: Vec<(&String, SpectrumTable)> = curves
        .iter()
        .map(|(label, a)| {
            Ok((
                label,
                spectrum(a, p, &d, &g)
                    .with_context(|| format!("steady-state spectrum ({label})"))?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut header = vec!["curve"];
    header.extend(SpectrumTable::HEADER);
    let rows = tables.iter().flat_map(|(label, t)| {
        (0..t.rows.len()).map(move |i| {
            let mut r = vec![label.to_string()];
            r.extend(t.record(i, p.gamma_w()));
            r
        })
    });
    let mut out = Vec::new();
    write_csv(&mut out, &header, rows)?;
    Ok(out)
}

fn ensembles(
    cfg: &RunConfig,
    p: &WaveguideParams,
    curves: &[(String, LatticeSpec, PositionModel)],
    notes: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<Vec<u8>> {
    let g = grid(cfg, p)?;
    let d = drive(cfg);
    let mut results: Vec<(&String, EnsembleResult)> = Vec::new();
    for (label, spec, model) in curves {
        let r = ensemble_spectrum(model, spec, p, &d, &g, cfg.ensemble.realizations, cfg.seed)
            .with_context(|| format!("ensemble average ({label})"))?;
        notes.insert(format!("failed_solves[{label}]"), r.failures.len().into());
        results.push((label, r));
    }
    let mut header = vec!["curve"];
    header.extend(EnsembleResult::HEADER);
    let rows = results.iter().flat_map(|(label, r)| {
        (0..r.detunings.len()).map(move |i| {
            vec![
                label.to_string(),
                format_float(r.detunings[i] / p.gamma_w()),
                format_float(r.mean_t[i]),
                format_float(r.stderr_t[i]),
                format_float(r.mean_coherent_t[i]),
            ]
        })
    });
    let mut out = Vec::new();
    write_csv(&mut out, &header, rows)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum ModePick {
    /// Mode with opposite-sign amplitudes on the two atoms.
    Antisymmetric,
    Symmetric,
    /// Position in the linewidth ordering.
    Rank(usize),
}

impl ModePick {
    fn select(self, set: &EigenmodeSet) -> usize {
        let overlap = |i: usize| {
            let v = &set.mode(i).vector;
            (v[0] * v[1].conj()).re
        };
        match self {
            ModePick::Rank(r) => r,
            ModePick::Antisymmetric => (0..set.len()).find(|&i| overlap(i) < 0.0).unwrap_or(0),
            ModePick::Symmetric => (0..set.len()).find(|&i| overlap(i) >= 0.0).unwrap_or(0),
        }
    }
}

/// One mode followed across the position scan of the preset's moving atom.
fn mode_track(
    cfg: &RunConfig,
    p: &WaveguideParams,
    column: &str,
    pick: ModePick,
) -> Result<Vec<u8>> {
    let configs = crate::run::scan_configs(cfg, p)?;
    let scan = eigen_scan(&configs, p).context("eigenmode scan")?;
    let gw = p.gamma_w();
    let rows = scan.parameters.iter().zip(&scan.sets).map(|(x, set)| {
        let m = set.mode(pick.select(set));
        vec![
            format_float(*x),
            format_float(m.shift / gw),
            format_float(m.linewidth / gw),
        ]
    });
    let mut out = Vec::new();
    write_csv(
        &mut out,
        &[column, "delta_over_gw", "upsilon_over_gw"],
        rows,
    )?;
    Ok(out)
}
