//! Run configuration: defaults, TOML documents and validation.
//!
//! Every problem in a document is collected before anything is reported,
//! each tagged with the dotted path of the offending key.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use toml::{Table, Value};

use crate::recipes::FigureId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// All problems found in one configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "invalid configuration ({} problem{})",
            self.0.len(),
            if self.0.len() == 1 { "" } else { "s" }
        )?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Spectrum,
    Eigen,
    Evolve,
    Storage,
    Ensemble,
    Analytic,
    Figure(FigureId),
}

impl Kind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "spectrum" => Kind::Spectrum,
            "eigen" => Kind::Eigen,
            "evolve" => Kind::Evolve,
            "storage" => Kind::Storage,
            "ensemble" => Kind::Ensemble,
            "analytic" => Kind::Analytic,
            _ => return None,
        })
    }

    pub fn name(&self) -> String {
        match self {
            Kind::Spectrum => "spectrum".into(),
            Kind::Eigen => "eigen".into(),
            Kind::Evolve => "evolve".into(),
            Kind::Storage => "storage".into(),
            Kind::Ensemble => "ensemble".into(),
            Kind::Analytic => "analytic".into(),
            Kind::Figure(id) => format!("figure_{id}"),
        }
    }
}

/// Geometry shared by spectrum, eigen, evolve, ensemble and analytic runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArraySection {
    pub n: usize,
    /// Lattice spacing in units of λ.
    pub spacing: f64,
    /// Explicit positions in units of λ; replaces `n` and `spacing`.
    pub positions: Option<Vec<f64>>,
    /// Per-atom detuning offsets in units of γ_w, added to the scan detuning.
    pub detunings: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSection {
    pub delta_min: f64,
    pub delta_max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriveSection {
    pub amplitude: f64,
    pub amplitude_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSection {
    /// 1-based index of the atom whose position is scanned.
    pub scan_atom: Option<usize>,
    pub scan_min: f64,
    pub scan_max: f64,
    pub scan_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveSection {
    /// Common detuning in units of γ_w.
    pub delta: f64,
    pub t_end: f64,
    /// Time at which the drive starts to ramp to zero.
    pub drive_off: Option<f64>,
    pub ramp: f64,
    pub tol: f64,
    pub sample_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StorageSection {
    pub n_atoms: usize,
    pub spacing: f64,
    pub detunings: Option<Vec<f64>>,
    pub switch_time: f64,
    pub ramp: f64,
    pub horizon: f64,
    pub tol: f64,
    pub sample_dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fixed,
    Gauss,
    Uniform,
}

impl ModelKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fixed" => Some(ModelKind::Fixed),
            "gauss" => Some(ModelKind::Gauss),
            "uniform" => Some(ModelKind::Uniform),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSection {
    pub model: ModelKind,
    /// Gaussian rms width in units of λ.
    pub rms: Option<f64>,
    /// Lattice depth in recoil energies; converted to an rms width.
    pub depth: Option<f64>,
    /// Length of the uniform interval in units of λ.
    pub interval: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub kind: Option<Kind>,
    pub seed: u64,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
    /// γ_w/γ_t.
    pub gamma_ratio: f64,
    pub array: ArraySection,
    pub grid: GridSection,
    pub drive: DriveSection,
    pub eigen: EigenSection,
    pub evolve: EvolveSection,
    pub storage: StorageSection,
    pub ensemble: EnsembleSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 0,
            threads: None,
            out: PathBuf::from("."),
            gamma_ratio: 1.0,
            array: ArraySection {
                n: 4,
                spacing: 0.25,
                positions: None,
                detunings: None,
            },
            grid: GridSection {
                delta_min: -4.0,
                delta_max: 4.0,
                steps: 400,
            },
            drive: DriveSection {
                amplitude: 1.0,
                amplitude_im: 0.0,
            },
            eigen: EigenSection {
                scan_atom: None,
                scan_min: 0.05,
                scan_max: 1.0,
                scan_steps: 96,
            },
            evolve: EvolveSection {
                delta: 0.0,
                t_end: 20.0,
                drive_off: None,
                ramp: 0.0,
                tol: 1e-10,
                sample_dt: 0.01,
            },
            storage: StorageSection {
                n_atoms: 4,
                spacing: 1.0,
                detunings: None,
                switch_time: 6.0,
                ramp: 0.2,
                horizon: 16.2,
                tol: 1e-10,
                sample_dt: 0.01,
            },
            ensemble: EnsembleSection {
                model: ModelKind::Fixed,
                rms: None,
                depth: None,
                interval: 2.0,
                realizations: 100,
            },
        }
    }
}

/// Typed access to a parsed document that remembers which keys were read.
struct Reader<'a> {
    root: &'a Table,
    seen: BTreeSet<String>,
    errors: Vec<ConfigError>,
}

impl<'a> Reader<'a> {
    fn lookup(&mut self, path: &str) -> Option<&'a Value> {
        self.seen.insert(path.to_string());
        let mut parts = path.split('.').peekable();
        let mut table = self.root;
        while let Some(part) = parts.next() {
            let v = table.get(part)?;
            if parts.peek().is_none() {
                return Some(v);
            }
            table = v.as_table()?;
        }
        None
    }

    fn mismatch(&mut self, path: &str, want: &str, got: &Value) {
        self.errors.push(ConfigError::new(
            path,
            format!("expected {want}, found {}", got.type_str()),
        ));
    }

    fn f64(&mut self, path: &str) -> Option<f64> {
        let v = self.lookup(path)?;
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.mismatch(path, "a number", other);
                None
            }
        }
    }

    fn u64(&mut self, path: &str) -> Option<u64> {
        let v = self.lookup(path)?;
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::Integer(_) => {
                self.errors
                    .push(ConfigError::new(path, "must be nonnegative"));
                None
            }
            other => {
                self.mismatch(path, "an integer", other);
                None
            }
        }
    }

    fn usize(&mut self, path: &str) -> Option<usize> {
        self.u64(path).map(|x| x as usize)
    }

    fn str(&mut self, path: &str) -> Option<&'a str> {
        let v = self.lookup(path)?;
        match v {
            Value::String(s) => Some(s),
            other => {
                self.mismatch(path, "a string", other);
                None
            }
        }
    }

    fn f64_list(&mut self, path: &str) -> Option<Vec<f64>> {
        let v = self.lookup(path)?;
        let Value::Array(items) = v else {
            self.mismatch(path, "an array of numbers", v);
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            match item {
                Value::Float(x) => out.push(*x),
                Value::Integer(n) => out.push(*n as f64),
                other => {
                    self.mismatch(&format!("{path}[{i}]"), "a number", other);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn unknown_keys(&mut self) {
        let mut leaves = Vec::new();
        collect_leaves(self.root, "", &mut leaves);
        for (path, is_table) in leaves {
            if is_table {
                if !self.seen.iter().any(|s| s.starts_with(&format!("{path}."))) {
                    self.errors.push(ConfigError::new(path, "unknown key"));
                }
            } else if !self.seen.contains(&path) {
                self.errors.push(ConfigError::new(path, "unknown key"));
            }
        }
    }
}

/// Leaf keys of a document; empty tables are reported as table leaves.
fn collect_leaves(table: &Table, prefix: &str, out: &mut Vec<(String, bool)>) {
    for (k, v) in table {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) if t.is_empty() => out.push((path, true)),
            Value::Table(t) => collect_leaves(t, &path, out),
            _ => out.push((path, false)),
        }
    }
}

/// Parses a TOML document over the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut cfg = RunConfig::default();
    let mut errors = apply_document(&mut cfg, text);
    errors.extend(validate(&cfg));
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(errors))
    }
}

/// Overlays the keys of `text` onto `cfg`, returning the unknown keys and
/// type errors. Constraints are checked separately by [`validate`].
pub fn apply_document(cfg: &mut RunConfig, text: &str) -> Vec<ConfigError> {
    let root: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            let e: toml::de::Error = e;
            return vec![ConfigError::new("<document>", e.message().to_string())];
        }
    };
    let mut r = Reader {
        root: &root,
        seen: BTreeSet::new(),
        errors: Vec::new(),
    };

    let kind = r.str("kind");
    let figure = r.str("figure");
    match (kind, figure) {
        (Some(_), Some(_)) => r.errors.push(ConfigError::new(
            "figure",
            "`kind` and `figure` are mutually exclusive",
        )),
        (Some(k), None) => match Kind::parse(k) {
            Some(k) => cfg.kind = Some(k),
            None => r.errors.push(ConfigError::new(
                "kind",
                format!("unknown experiment kind `{k}`"),
            )),
        },
        (None, Some(f)) => match FigureId::parse(f) {
            Some(id) => {
                cfg.kind = Some(Kind::Figure(id));
                id.apply_preset(cfg);
            }
            None => r.errors.push(ConfigError::new(
                "figure",
                format!("unknown figure id `{f}`"),
            )),
        },
        (None, None) => {}
    }
    set(&mut cfg.seed, r.u64("seed"));
    if let Some(t) = r.usize("threads") {
        cfg.threads = Some(t);
    }
    if let Some(o) = r.str("out") {
        cfg.out = PathBuf::from(o);
    }
    set(&mut cfg.gamma_ratio, r.f64("gamma_ratio"));

    set(&mut cfg.array.n, r.usize("array.n"));
    set(&mut cfg.array.spacing, r.f64("array.spacing"));
    set_opt(&mut cfg.array.positions, r.f64_list("array.positions"));
    set_opt(&mut cfg.array.detunings, r.f64_list("array.detunings"));

    set(&mut cfg.grid.delta_min, r.f64("grid.delta_min"));
    set(&mut cfg.grid.delta_max, r.f64("grid.delta_max"));
    set(&mut cfg.grid.steps, r.usize("grid.steps"));

    set(&mut cfg.drive.amplitude, r.f64("drive.amplitude"));
    set(&mut cfg.drive.amplitude_im, r.f64("drive.amplitude_im"));

    set_opt(&mut cfg.eigen.scan_atom, r.usize("eigen.scan_atom"));
    set(&mut cfg.eigen.scan_min, r.f64("eigen.scan_min"));
    set(&mut cfg.eigen.scan_max, r.f64("eigen.scan_max"));
    set(&mut cfg.eigen.scan_steps, r.usize("eigen.scan_steps"));

    set(&mut cfg.evolve.delta, r.f64("evolve.delta"));
    set(&mut cfg.evolve.t_end, r.f64("evolve.t_end"));
    set_opt(&mut cfg.evolve.drive_off, r.f64("evolve.drive_off"));
    set(&mut cfg.evolve.ramp, r.f64("evolve.ramp"));
    set(&mut cfg.evolve.tol, r.f64("evolve.tol"));
    set(&mut cfg.evolve.sample_dt, r.f64("evolve.sample_dt"));

    set(&mut cfg.storage.n_atoms, r.usize("storage.n_atoms"));
    set(&mut cfg.storage.spacing, r.f64("storage.spacing"));
    set_opt(&mut cfg.storage.detunings, r.f64_list("storage.detunings"));
    set(&mut cfg.storage.switch_time, r.f64("storage.switch_time"));
    set(&mut cfg.storage.ramp, r.f64("storage.ramp"));
    set(&mut cfg.storage.horizon, r.f64("storage.horizon"));
    set(&mut cfg.storage.tol, r.f64("storage.tol"));
    set(&mut cfg.storage.sample_dt, r.f64("storage.sample_dt"));

    if let Some(m) = r.str("ensemble.model") {
        match ModelKind::parse(m) {
            Some(m) => cfg.ensemble.model = m,
            None => r.errors.push(ConfigError::new(
                "ensemble.model",
                format!("expected fixed, gauss or uniform, found `{m}`"),
            )),
        }
    }
    set_opt(&mut cfg.ensemble.rms, r.f64("ensemble.rms"));
    set_opt(&mut cfg.ensemble.depth, r.f64("ensemble.depth"));
    set(&mut cfg.ensemble.interval, r.f64("ensemble.interval"));
    set(
        &mut cfg.ensemble.realizations,
        r.usize("ensemble.realizations"),
    );

    r.unknown_keys();
    r.errors
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn positive(errors: &mut Vec<ConfigError>, path: &str, x: f64) {
    if !(x > 0.0 && x.is_finite()) {
        errors.push(ConfigError::new(
            path,
            format!("must be positive and finite, found {x}"),
        ));
    }
}

fn finite(errors: &mut Vec<ConfigError>, path: &str, x: f64) {
    if !x.is_finite() {
        errors.push(ConfigError::new(path, "must be finite"));
    }
}

/// Constraint checks on a fully resolved configuration.
pub fn validate(cfg: &RunConfig) -> Vec<ConfigError> {
    let mut e = Vec::new();
    if cfg.gamma_ratio > 1.0 {
        e.push(ConfigError::new(
            "gamma_ratio",
            "gamma_w must not exceed gamma_t",
        ));
    } else {
        positive(&mut e, "gamma_ratio", cfg.gamma_ratio);
    }
    if cfg.threads == Some(0) {
        e.push(ConfigError::new("threads", "must be at least 1"));
    }

    let a = &cfg.array;
    let n_atoms = match &a.positions {
        Some(x) => {
            if x.is_empty() {
                e.push(ConfigError::new("array.positions", "must not be empty"));
            }
            if x.iter().any(|v| !v.is_finite()) {
                e.push(ConfigError::new("array.positions", "must be finite"));
            }
            x.len()
        }
        None => {
            if a.n == 0 {
                e.push(ConfigError::new("array.n", "must be at least 1"));
            }
            positive(&mut e, "array.spacing", a.spacing);
            a.n
        }
    };
    if let Some(d) = &a.detunings {
        if d.len() != n_atoms {
            e.push(ConfigError::new(
                "array.detunings",
                format!("expected {n_atoms} values, found {}", d.len()),
            ));
        }
        if d.iter().any(|v| !v.is_finite()) {
            e.push(ConfigError::new("array.detunings", "must be finite"));
        }
    }

    let g = &cfg.grid;
    finite(&mut e, "grid.delta_min", g.delta_min);
    finite(&mut e, "grid.delta_max", g.delta_max);
    if !(g.delta_min < g.delta_max) {
        e.push(ConfigError::new(
            "grid.delta_max",
            "must exceed grid.delta_min",
        ));
    }
    if g.steps < 2 {
        e.push(ConfigError::new("grid.steps", "must be at least 2"));
    }

    finite(&mut e, "drive.amplitude", cfg.drive.amplitude);
    finite(&mut e, "drive.amplitude_im", cfg.drive.amplitude_im);

    let eg = &cfg.eigen;
    if let Some(i) = eg.scan_atom {
        if i == 0 || i > n_atoms {
            e.push(ConfigError::new(
                "eigen.scan_atom",
                format!("must be between 1 and {n_atoms}"),
            ));
        }
    }
    finite(&mut e, "eigen.scan_min", eg.scan_min);
    finite(&mut e, "eigen.scan_max", eg.scan_max);
    if !(eg.scan_min < eg.scan_max) {
        e.push(ConfigError::new(
            "eigen.scan_max",
            "must exceed eigen.scan_min",
        ));
    }
    if eg.scan_steps < 2 {
        e.push(ConfigError::new("eigen.scan_steps", "must be at least 2"));
    }

    let ev = &cfg.evolve;
    finite(&mut e, "evolve.delta", ev.delta);
    positive(&mut e, "evolve.t_end", ev.t_end);
    positive(&mut e, "evolve.tol", ev.tol);
    positive(&mut e, "evolve.sample_dt", ev.sample_dt);
    if !(ev.ramp >= 0.0 && ev.ramp.is_finite()) {
        e.push(ConfigError::new("evolve.ramp", "must be nonnegative"));
    }
    if let Some(t) = ev.drive_off {
        if !(t >= 0.0 && t.is_finite()) {
            e.push(ConfigError::new("evolve.drive_off", "must be nonnegative"));
        }
    }

    let s = &cfg.storage;
    if s.n_atoms < 2 {
        e.push(ConfigError::new("storage.n_atoms", "must be at least 2"));
    }
    positive(&mut e, "storage.spacing", s.spacing);
    if (2.0 * s.spacing - (2.0 * s.spacing).round()).abs() > 1e-9 {
        e.push(ConfigError::new(
            "storage.spacing",
            "must be a multiple of 1/2",
        ));
    }
    positive(&mut e, "storage.switch_time", s.switch_time);
    if !(s.ramp >= 0.0 && s.ramp.is_finite()) {
        e.push(ConfigError::new("storage.ramp", "must be nonnegative"));
    }
    if !(s.horizon > s.switch_time + s.ramp) {
        e.push(ConfigError::new(
            "storage.horizon",
            "must extend past the end of the ramp",
        ));
    }
    positive(&mut e, "storage.tol", s.tol);
    positive(&mut e, "storage.sample_dt", s.sample_dt);
    if let Some(d) = &s.detunings {
        if d.len() != s.n_atoms {
            e.push(ConfigError::new(
                "storage.detunings",
                format!("expected {} values, found {}", s.n_atoms, d.len()),
            ));
        } else {
            match wgarray::check_inverse_sum(d) {
                Ok(res) if res.abs() > wgarray::storage::INVERSE_SUM_TOL => {
                    e.push(ConfigError::new(
                        "storage.detunings",
                        format!("inverse detunings must sum to zero (residual {res:e})"),
                    ))
                }
                Ok(_) => {}
                Err(err) => e.push(ConfigError::new("storage.detunings", err.to_string())),
            }
        }
    }

    let en = &cfg.ensemble;
    if en.realizations == 0 {
        e.push(ConfigError::new(
            "ensemble.realizations",
            "must be at least 1",
        ));
    }
    if en.model == ModelKind::Gauss {
        match (en.rms, en.depth) {
            (Some(_), Some(_)) => e.push(ConfigError::new(
                "ensemble.depth",
                "give either ensemble.rms or ensemble.depth",
            )),
            (None, None) => e.push(ConfigError::new(
                "ensemble.rms",
                "the gauss model needs ensemble.rms or ensemble.depth",
            )),
            (Some(r), None) if !(r >= 0.0 && r.is_finite()) => {
                e.push(ConfigError::new("ensemble.rms", "must be nonnegative"))
            }
            (None, Some(d)) => positive(&mut e, "ensemble.depth", d),
            _ => {}
        }
        if a.positions.is_some() {
            e.push(ConfigError::new(
                "array.positions",
                "ensembles need a regular lattice (array.n, array.spacing)",
            ));
        }
    }
    if en.model == ModelKind::Uniform {
        positive(&mut e, "ensemble.interval", en.interval);
    }
    e
}
