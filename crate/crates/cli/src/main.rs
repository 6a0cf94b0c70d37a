//! `wgarray`: command-line front end for waveguide atom-array simulations.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use wgarray_cli::config::{
    apply_document, validate, ConfigError, ConfigErrors, Kind, ModelKind, RunConfig,
};
use wgarray_cli::recipes::FigureId;
use wgarray_cli::run;

#[derive(Parser, Debug)]
#[command(
    name = "wgarray",
    version,
    about = "Atom arrays coupled to a one-dimensional waveguide"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Steady-state transmission and reflection over a detuning grid.
    Spectrum(ArrayArgs),
    /// Collective eigenmodes, optionally scanning one atom's position.
    Eigen {
        #[command(flatten)]
        array: ArrayArgs,
        /// 1-based index of the atom to move.
        #[arg(long)]
        scan_atom: Option<usize>,
        #[arg(long)]
        scan_min: Option<f64>,
        #[arg(long)]
        scan_max: Option<f64>,
        #[arg(long)]
        scan_steps: Option<usize>,
    },
    /// Time evolution from the ground state under a constant drive.
    Evolve {
        #[command(flatten)]
        array: ArrayArgs,
        /// Common detuning added to every atom, in units of γ_w.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Time at which the drive starts ramping to zero.
        #[arg(long)]
        drive_off: Option<f64>,
        #[arg(long)]
        ramp: Option<f64>,
    },
    /// Subradiant storage protocol on a wavelength-spaced lattice.
    Storage {
        #[arg(long)]
        n_atoms: Option<usize>,
        #[arg(long)]
        switch_time: Option<f64>,
        #[arg(long)]
        ramp: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Transmission averaged over random atom positions.
    Ensemble {
        #[command(flatten)]
        array: ArrayArgs,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        /// Gaussian rms displacement in units of λ.
        #[arg(long)]
        rms: Option<f64>,
        /// Lattice depth in recoil units, converted to an rms width.
        #[arg(long)]
        depth: Option<f64>,
        /// Uniform interval length in units of λ.
        #[arg(long)]
        interval: Option<f64>,
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Exact lattice transmission with mean-field and optical-depth columns.
    Analytic(ArrayArgs),
    /// Reproduce one figure panel by id.
    Figure {
        /// Panel id such as 1c, 4a or 7b.
        id: String,
    },
}

#[derive(Args, Debug, Default)]
struct ArrayArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Lattice spacing in units of λ.
    #[arg(long)]
    spacing: Option<f64>,
    /// Explicit positions in units of λ, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    positions: Option<Vec<f64>>,
    /// γ_w/γ_t.
    #[arg(long)]
    loss_ratio: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta_max: Option<f64>,
    #[arg(long)]
    delta_steps: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Fixed,
    Gauss,
    Uniform,
}

fn put<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl ArrayArgs {
    fn apply(self, cfg: &mut RunConfig) {
        put(&mut cfg.array.n, self.n);
        put(&mut cfg.array.spacing, self.spacing);
        if self.positions.is_some() {
            cfg.array.positions = self.positions;
        } else if self.n.is_some() || self.spacing.is_some() {
            cfg.array.positions = None;
        }
        put(&mut cfg.gamma_ratio, self.loss_ratio);
        put(&mut cfg.grid.delta_min, self.delta_min);
        put(&mut cfg.grid.delta_max, self.delta_max);
        put(&mut cfg.grid.steps, self.delta_steps);
    }
}

/// Defaults, then a figure preset, then the config document, then flags.
fn resolve(cli: Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut errors = Vec::new();
    let figure = match &cli.command {
        Some(Command::Figure { id }) => match FigureId::parse(id) {
            Some(f) => {
                f.apply_preset(&mut cfg);
                Some(f)
            }
            None => {
                errors.push(ConfigError::new(
                    "figure",
                    format!("unknown figure id `{id}`"),
                ));
                None
            }
        },
        _ => None,
    };
    if let Some(path) = &cli.config {
        match std::fs::read_to_string(path) {
            Ok(text) => errors.extend(apply_document(&mut cfg, &text)),
            Err(e) => {
                return Err(ConfigErrors(vec![ConfigError::new(
                    "--config",
                    format!("{}: {e}", path.display()),
                )])
                .into())
            }
        }
    }
    put(&mut cfg.seed, cli.seed);
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    match cli.command {
        None => {}
        Some(Command::Spectrum(a)) => {
            cfg.kind = Some(Kind::Spectrum);
            a.apply(&mut cfg);
        }
        Some(Command::Eigen {
            array,
            scan_atom,
            scan_min,
            scan_max,
            scan_steps,
        }) => {
            cfg.kind = Some(Kind::Eigen);
            array.apply(&mut cfg);
            if scan_atom.is_some() {
                cfg.eigen.scan_atom = scan_atom;
            }
            put(&mut cfg.eigen.scan_min, scan_min);
            put(&mut cfg.eigen.scan_max, scan_max);
            put(&mut cfg.eigen.scan_steps, scan_steps);
        }
        Some(Command::Evolve {
            array,
            delta,
            t_end,
            drive_off,
            ramp,
        }) => {
            cfg.kind = Some(Kind::Evolve);
            array.apply(&mut cfg);
            put(&mut cfg.evolve.delta, delta);
            put(&mut cfg.evolve.t_end, t_end);
            if drive_off.is_some() {
                cfg.evolve.drive_off = drive_off;
            }
            put(&mut cfg.evolve.ramp, ramp);
        }
        Some(Command::Storage {
            n_atoms,
            switch_time,
            ramp,
            horizon,
        }) => {
            cfg.kind = Some(Kind::Storage);
            if let Some(n) = n_atoms {
                if n != cfg.storage.n_atoms {
                    cfg.storage.detunings = None;
                }
                cfg.storage.n_atoms = n;
            }
            put(&mut cfg.storage.switch_time, switch_time);
            put(&mut cfg.storage.ramp, ramp);
            put(&mut cfg.storage.horizon, horizon);
        }
        Some(Command::Ensemble {
            array,
            model,
            rms,
            depth,
            interval,
            realizations,
        }) => {
            cfg.kind = Some(Kind::Ensemble);
            array.apply(&mut cfg);
            if let Some(m) = model {
                cfg.ensemble.model = match m {
                    ModelArg::Fixed => ModelKind::Fixed,
                    ModelArg::Gauss => ModelKind::Gauss,
                    ModelArg::Uniform => ModelKind::Uniform,
                };
            }
            if rms.is_some() {
                cfg.ensemble.rms = rms;
                cfg.ensemble.depth = None;
            }
            if depth.is_some() {
                cfg.ensemble.depth = depth;
                cfg.ensemble.rms = None;
            }
            put(&mut cfg.ensemble.interval, interval);
            put(&mut cfg.ensemble.realizations, realizations);
        }
        Some(Command::Analytic(a)) => {
            cfg.kind = Some(Kind::Analytic);
            a.apply(&mut cfg);
        }
        Some(Command::Figure { .. }) => {
            if let Some(f) = figure {
                cfg.kind = Some(Kind::Figure(f));
            }
        }
    }
    if cfg.kind.is_none() && errors.is_empty() {
        errors.push(ConfigError::new(
            "kind",
            "no experiment selected; give a subcommand or a `kind` key",
        ));
    }
    errors.extend(validate(&cfg));
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(errors).into())
    }
}

fn execute(cfg: &RunConfig) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().context("starting worker pool")?;
    let mut output = pool.install(|| run::execute(cfg))?;
    let kind = cfg.kind.as_ref().map(Kind::name).unwrap_or_default();
    let meta = run::metadata(cfg, &output)?;
    output.artifacts.push(run::Artifact {
        name: format!("{kind}.meta.json"),
        bytes: meta,
    });
    for path in run::write_artifacts(&cfg.out, &output.artifacts)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigErrors>().is_some() {
        2
    } else if e
        .chain()
        .any(|c| c.downcast_ref::<wgarray::Error>().is_some())
    {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match resolve(cli).and_then(|cfg| execute(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
