//! Light storage in the dark modes of a λ-spaced lattice, and the reduced
//! two-mode description of the same dynamics.
//!
//! Phase 1 drives the array with per-atom detunings whose inverses sum to
//! zero, so the steady state has no weight on the bright mode. At `t_s` the
//! detunings and the drive are ramped to zero together over `τ`; the
//! excitation left in the dark manifold no longer decays.

use std::io::Write;

use nalgebra::{DVector, Matrix2, Vector2};
use num_complex::Complex64;

use crate::dynamics::{
    evolve, total_excitation, DetuningSchedule, DriveSchedule, EvolveSettings, Trajectory,
};
use crate::eigenmodes::{
    canonical_basis_wavelength_lattice, half_wave_sign_map, EigenmodeSet, Mode,
};
use crate::error::{Error, Result};
use crate::model::{
    drive_vector, AtomArray, DriveField, LatticeSpec, PolarizationVector, WaveguideParams,
};
use crate::ode::Dopri5;
use crate::steady_state::solve_steady;
use crate::table::{format_float, write_csv};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest accepted |Σ γ_w/Δ_j| for a storage detuning pattern.
pub const INVERSE_SUM_TOL: f64 = 1e-9;

/// Σ_j γ_w/Δ_j with detunings in units of γ_w.
pub fn check_inverse_sum(detunings: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (index, &d) in detunings.iter().enumerate() {
        if d == 0.0 {
            return Err(Error::ZeroDetuning { index });
        }
        s += 1.0 / d;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageConfig {
    pub n_atoms: usize,
    /// Lattice spacing in units of λ; must be a multiple of 1/2.
    pub spacing: f64,
    pub drive: Complex64,
    /// Phase-1 detunings in units of γ_w, in lattice order.
    pub detunings: Vec<f64>,
    pub switch_time: f64,
    pub ramp: f64,
    pub horizon: f64,
    pub tol: f64,
    pub sample_dt: f64,
}

impl StorageConfig {
    /// Δ_1 = 2γ_w/(N−1), Δ_j = −2γ_w otherwise; t_s = 6/γ_w, τ = 0.2/γ_w and
    /// 10/γ_w of free evolution after the ramp.
    pub fn with_atoms(n_atoms: usize) -> Result<Self> {
        if n_atoms < 2 {
            return Err(Error::InvalidParameter(
                "storage needs at least two atoms".into(),
            ));
        }
        let mut detunings = vec![-2.0; n_atoms];
        detunings[0] = 2.0 / (n_atoms as f64 - 1.0);
        Ok(Self {
            n_atoms,
            spacing: 1.0,
            drive: Complex64::new(1.0, 0.0),
            detunings,
            switch_time: 6.0,
            ramp: 0.2,
            horizon: 16.2,
            tol: 1e-10,
            sample_dt: 0.01,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.detunings.len() != self.n_atoms {
            return Err(Error::DimensionMismatch {
                expected: self.n_atoms,
                found: self.detunings.len(),
            });
        }
        if !(self.switch_time > 0.0) {
            return Err(Error::InvalidParameter(
                "switch time must be positive".into(),
            ));
        }
        if !(self.ramp >= 0.0) {
            return Err(Error::InvalidParameter(
                "ramp duration must be nonnegative".into(),
            ));
        }
        if !(self.horizon > self.switch_time + self.ramp) {
            return Err(Error::InvalidParameter(
                "horizon must extend past the end of the ramp".into(),
            ));
        }
        let res = check_inverse_sum(&self.detunings)?;
        if res.abs() > INVERSE_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "inverse detunings must sum to zero for storage (residual {res:e})"
            )));
        }
        Ok(())
    }

    fn lattice(&self, params: &WaveguideParams) -> Result<AtomArray> {
        let spec = LatticeSpec::new(self.n_atoms, self.spacing * params.wavelength(), 0.0)?;
        spec.to_array(0.0).with_detunings(
            self.detunings
                .iter()
                .map(|d| d * params.gamma_w())
                .collect(),
        )
    }
}

impl Default for StorageConfig {
    fn default() -> Self {
        Self::with_atoms(4).expect("four atoms is a valid storage configuration")
    }
}

/// Output of [`run_storage_protocol`].
#[derive(Debug, Clone, PartialEq)]
pub struct StorageRun {
    pub config: StorageConfig,
    /// Protocol run with weights against the λ-lattice basis.
    pub protocol: Trajectory,
    /// Same drive with all detunings zero throughout.
    pub comparison: Trajectory,
    pub protocol_steady: PolarizationVector,
    pub comparison_steady: PolarizationVector,
    pub modes: EigenmodeSet,
}

impl StorageRun {
    pub fn release_time(&self) -> f64 {
        self.config.switch_time + self.config.ramp
    }

    /// Largest relative change of the total excitation between the end of the
    /// ramp and `window` later.
    pub fn stored_drift(&self, window: f64) -> f64 {
        let t0 = self.release_time();
        let i0 = self.protocol.index_at(t0);
        let e0 = self.protocol.total_excitation[i0];
        self.protocol
            .times
            .iter()
            .zip(&self.protocol.total_excitation)
            .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t0 + window + 1e-12)
            .map(|(_, e)| ((e - e0) / e0).abs())
            .fold(0.0, f64::max)
    }

    /// Least-squares decay rate of the comparison excitation over `window`
    /// after the ramp.
    pub fn comparison_decay_rate(&self, window: f64) -> f64 {
        let t0 = self.release_time();
        let pts: Vec<(f64, f64)> = self
            .comparison
            .times
            .iter()
            .zip(&self.comparison.total_excitation)
            .filter(|(t, e)| **t >= t0 - 1e-12 && **t <= t0 + window + 1e-12 && **e > 0.0)
            .map(|(t, e)| (*t, e.ln()))
            .collect();
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        -sxy / sxx
    }

    /// Total excitation of each run divided by its own steady-state value.
    pub fn normalized_excitation(&self) -> (Vec<f64>, Vec<f64>) {
        let ep = total_excitation(&self.protocol_steady);
        let ec = total_excitation(&self.comparison_steady);
        (
            self.protocol
                .total_excitation
                .iter()
                .map(|e| e / ep)
                .collect(),
            self.comparison
                .total_excitation
                .iter()
                .map(|e| e / ec)
                .collect(),
        )
    }

    /// `t_gw,protocol,comparison` with normalized excitations.
    pub fn write_normalized_csv<W: Write>(&self, out: W, gamma_w: f64) -> Result<()> {
        let (p, c) = self.normalized_excitation();
        let rows = (0..p.len()).map(|i| {
            vec![
                format_float(self.protocol.times[i] * gamma_w),
                format_float(p[i]),
                format_float(c[i]),
            ]
        });
        write_csv(out, &["t_gw", "protocol", "comparison"], rows)
    }
}

/// λ-lattice basis, mapped by the half-wave signs when the spacing is an odd
/// multiple of λ/2.
fn storage_modes(array: &AtomArray, params: &WaveguideParams) -> Result<EigenmodeSet> {
    let signs = half_wave_sign_map(array, params)?;
    let base = EigenmodeSet::wavelength_lattice(array.len(), params)?;
    Ok(EigenmodeSet::from_modes(
        base.modes()
            .iter()
            .map(|m| Mode {
                vector: signs.apply_vector(&m.vector),
                ..m.clone()
            })
            .collect(),
    ))
}

/// Steady state from the mode expansion, skipping undriven modes. Needed
/// when A is singular but the drive has no weight on the null space.
fn modal_steady_state(modes: &EigenmodeSet, f: &DVector<Complex64>) -> Result<PolarizationVector> {
    let mut b = DVector::zeros(f.len());
    let scale = f.norm();
    for m in modes.modes() {
        let c = m.vector.dot(f);
        if c.norm() <= 1e-12 * scale {
            continue;
        }
        if m.eigenvalue.norm() == 0.0 {
            return Err(Error::SingularSystem { pivot_ratio: 0.0 });
        }
        b -= &m.vector * (c / m.eigenvalue);
    }
    Ok(PolarizationVector::new(b))
}

/// Runs the storage protocol and the all-resonant comparison.
pub fn run_storage_protocol(
    config: &StorageConfig,
    params: &WaveguideParams,
) -> Result<StorageRun> {
    config.validate()?;
    let array = config.lattice(params)?;
    let modes = storage_modes(&array, params)?;
    let gw = params.gamma_w();
    let (ts, te, horizon) = (
        config.switch_time / gw,
        (config.switch_time + config.ramp) / gw,
        config.horizon / gw,
    );
    let settings = EvolveSettings {
        tol: config.tol,
        sample_dt: config.sample_dt / gw,
    };
    let zero = Complex64::new(0.0, 0.0);
    let drive = DriveSchedule::ramp(config.drive, zero, ts, te)?;
    let n = config.n_atoms;

    let det = DetuningSchedule::ramp(array.detunings(), &vec![0.0; n], ts, te)?;
    let mut protocol = evolve(
        &array,
        params,
        &det,
        &drive,
        &PolarizationVector::zeros(n),
        (0.0, horizon),
        &settings,
    )?;
    protocol.attach_weights(&modes)?;

    let flat = array.zero_detunings();
    let mut comparison = evolve(
        &flat,
        params,
        &DetuningSchedule::constant(&vec![0.0; n]),
        &drive,
        &PolarizationVector::zeros(n),
        (0.0, horizon),
        &settings,
    )?;
    comparison.attach_weights(&modes)?;

    let field = DriveField::new(config.drive);
    let protocol_steady = solve_steady(&array, params, &field)?;
    let comparison_steady = modal_steady_state(&modes, &drive_vector(&flat, params, &field))?;
    Ok(StorageRun {
        config: config.clone(),
        protocol,
        comparison,
        protocol_steady,
        comparison_steady,
        modes,
    })
}

/// Amplitudes on the bright mode v_1 and the dark combination v_sub.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeState {
    pub c1: Complex64,
    pub cprime: Complex64,
}

/// ċ_1 = i(Δ + Δ′ + iυ_1)c_1 + iκc′ + F̄_1 and
/// ċ′ = i(Δ + Δ″ + iυ′)c′ + iκc_1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeModel {
    pub delta: f64,
    pub delta_prime: f64,
    /// Diagonal shift of the dark combination (zero for the default pattern).
    pub delta_sub: f64,
    pub kappa: f64,
    pub upsilon1: f64,
    /// Linewidth of the dark combination, γ_t − γ_w.
    pub upsilon_sub: f64,
    pub f1: Complex64,
}

impl TwoModeModel {
    /// Four atoms on a λ lattice at the origin with Δ′ = −4γ_w/3 and
    /// κ = −2γ_w/√3.
    pub fn four_atom_defaults(params: &WaveguideParams, drive: Complex64) -> Self {
        let gw = params.gamma_w();
        Self {
            delta: 0.0,
            delta_prime: -4.0 * gw / 3.0,
            delta_sub: 0.0,
            kappa: -2.0 * gw / 3f64.sqrt(),
            upsilon1: params.gamma_t() + 3.0 * gw,
            upsilon_sub: params.gamma_l(),
            f1: 2.0 * 2.0 * I * gw / params.k() * drive,
        }
    }

    /// Couplings for a λ lattice at the origin with detunings (in units of
    /// γ_w) of the form (Δ_1, Δ_2, …, Δ_2).
    pub fn from_detunings(
        detunings: &[f64],
        params: &WaveguideParams,
        drive: Complex64,
    ) -> Result<Self> {
        let n = detunings.len();
        let (v1, w) = bright_and_dark(n)?;
        let gw = params.gamma_w();
        let d = DVector::from_iterator(n, detunings.iter().map(|x| x * gw));
        let dv1 = d.component_mul(&v1);
        let dw = d.component_mul(&w);
        let f1 = (n as f64).sqrt() * 2.0 * I * gw / params.k() * drive;
        Ok(Self {
            delta: 0.0,
            delta_prime: v1.dot(&dv1),
            delta_sub: w.dot(&dw),
            kappa: v1.dot(&dw),
            upsilon1: params.gamma_t() + (n as f64 - 1.0) * gw,
            upsilon_sub: params.gamma_l(),
            f1,
        })
    }

    fn matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(
            Complex64::new(-self.upsilon1, self.delta + self.delta_prime),
            I * self.kappa,
            I * self.kappa,
            Complex64::new(-self.upsilon_sub, self.delta + self.delta_sub),
        )
    }

    pub fn steady_state(&self) -> Result<TwoModeState> {
        let m = self.matrix();
        let c = m
            .try_inverse()
            .map(|inv| -(inv * Vector2::new(self.f1, Complex64::new(0.0, 0.0))))
            .ok_or(Error::Singular("two-mode steady state"))?;
        Ok(TwoModeState {
            c1: c[0],
            cprime: c[1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<TwoModeState>,
}

/// Integrates the two-mode equations from `initial` on a uniform grid.
pub fn two_mode_evolve(
    model: &TwoModeModel,
    initial: TwoModeState,
    t_span: (f64, f64),
    tol: f64,
    sample_dt: f64,
) -> Result<TwoModeTrajectory> {
    let (t0, t1) = t_span;
    if !(t0 < t1) || !(tol > 0.0) || !(sample_dt > 0.0) {
        return Err(Error::InvalidParameter(
            "need start < end and positive tolerance and spacing".into(),
        ));
    }
    let m = model.matrix();
    let f1 = model.f1;
    let rhs = |_t: f64, y: &DVector<Complex64>| {
        DVector::from_vec(vec![
            m[(0, 0)] * y[0] + m[(0, 1)] * y[1] + f1,
            m[(1, 0)] * y[0] + m[(1, 1)] * y[1],
        ])
    };
    let steps = ((t1 - t0) / sample_dt).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=steps)
        .map(|i| t0 + (t1 - t0) * i as f64 / steps as f64)
        .collect();
    let mut solver = Dopri5::new(tol, tol * 1e-3);
    let mut y = DVector::from_vec(vec![initial.c1, initial.cprime]);
    let mut states = vec![initial];
    for w in times.windows(2) {
        y = solver.advance(&rhs, w[0], y, w[1])?;
        states.push(TwoModeState {
            c1: y[0],
            cprime: y[1],
        });
    }
    Ok(TwoModeTrajectory { times, states })
}

fn bright_and_dark(n: usize) -> Result<(DVector<f64>, DVector<f64>)> {
    if n < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: n,
        });
    }
    let basis = canonical_basis_wavelength_lattice(n)?;
    let mut w = DVector::zeros(n);
    for v in &basis[1..] {
        w += v;
    }
    w /= ((n - 1) as f64).sqrt();
    Ok((basis[0].clone(), w))
}

/// c_1 = v_1ᵀb and c′ = (v_2 + … + v_N)ᵀb/√(N−1) in the λ-lattice basis.
pub fn project_two_mode(b: &PolarizationVector, n_atoms: usize) -> Result<TwoModeState> {
    if b.len() != n_atoms {
        return Err(Error::DimensionMismatch {
            expected: n_atoms,
            found: b.len(),
        });
    }
    let (v1, w) = bright_and_dark(n_atoms)?;
    let dot = |v: &DVector<f64>| {
        b.iter()
            .zip(v.iter())
            .map(|(z, x)| z * *x)
            .sum::<Complex64>()
    };
    Ok(TwoModeState {
        c1: dot(&v1),
        cprime: dot(&w),
    })
}
