//! Shared fixtures for the solver benchmarks.

use num_complex::Complex64;
use wgarray::{
    AtomArray, DetuningGrid, DetuningSchedule, DriveSchedule, EvolveSettings, LatticeSpec,
    PolarizationVector, WaveguideParams,
};

/// Quarter-wave lattice of `n` atoms at common detuning `delta`.
pub fn quarter_wave(n: usize, delta: f64) -> AtomArray {
    LatticeSpec::new(n, 0.25, 0.0)
        .expect("valid lattice")
        .to_array(delta)
}

/// Irregular array with positions spread over a few wavelengths.
pub fn irregular(n: usize) -> AtomArray {
    let x = (0..n)
        .map(|j| 0.37 * j as f64 + 0.05 * ((j * 7919) % 13) as f64)
        .collect();
    AtomArray::with_common_detuning(x, 0.3).expect("finite positions")
}

pub fn lossy() -> WaveguideParams {
    WaveguideParams::with_loss_ratio(0.5).expect("valid ratio")
}

pub fn grid(steps: usize) -> DetuningGrid {
    DetuningGrid::linspace(-4.0, 4.0, steps).expect("valid grid")
}

/// Everything [`wgarray::evolve`] needs for a constant unit drive from the ground state.
pub struct EvolveCase {
    pub array: AtomArray,
    pub detunings: DetuningSchedule,
    pub drive: DriveSchedule,
    pub b0: PolarizationVector,
    pub settings: EvolveSettings,
}

pub fn evolve_case(n: usize) -> EvolveCase {
    let array = quarter_wave(n, 0.5);
    EvolveCase {
        detunings: DetuningSchedule::constant(array.detunings()),
        drive: DriveSchedule::constant(Complex64::new(1.0, 0.0)),
        b0: PolarizationVector::zeros(n),
        settings: EvolveSettings {
            tol: 1e-10,
            sample_dt: 0.1,
        },
        array,
    }
}
