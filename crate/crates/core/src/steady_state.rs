//! Driven steady state of the coupled-dipole equations and the far-field
//! transmission and reflection it produces.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    build_evolution_matrix, drive_vector, eta, green_function, polarizability, AtomArray,
    DriveField, PolarizationVector, WaveguideParams,
};
use crate::table::{format_float, write_csv};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smallest accepted ratio of the smallest to the largest LU pivot modulus.
pub const PIVOT_RATIO_MIN: f64 = 1e-13;

/// Far-field amplitudes and powers for unit incident intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringCoefficients {
    pub t: Complex64,
    pub r: Complex64,
    pub transmittance: f64,
    pub reflectance: f64,
}

impl ScatteringCoefficients {
    pub fn from_amplitudes(t: Complex64, r: Complex64) -> Self {
        Self {
            t,
            r,
            transmittance: t.norm_sqr(),
            reflectance: r.norm_sqr(),
        }
    }

    /// Fraction scattered out of the guide, 1 − T − R.
    pub fn loss(&self) -> f64 {
        1.0 - self.transmittance - self.reflectance
    }
}

/// Solves A b + F = 0 by LU with partial pivoting.
pub fn solve_steady(
    array: &AtomArray,
    params: &WaveguideParams,
    drive: &DriveField,
) -> Result<PolarizationVector> {
    let a = build_evolution_matrix(array, params);
    let f = drive_vector(array, params, drive);
    if f.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
        return Ok(PolarizationVector::zeros(array.len()));
    }
    let lu = a.lu();
    let u = lu.u();
    let pivots = u.diagonal().map(|z| z.norm());
    let max = pivots.max();
    let ratio = if max > 0.0 { pivots.min() / max } else { 0.0 };
    if !(ratio >= PIVOT_RATIO_MIN) {
        return Err(Error::SingularSystem { pivot_ratio: ratio });
    }
    let b = lu
        .solve(&(-f))
        .ok_or(Error::SingularSystem { pivot_ratio: ratio })?;
    Ok(PolarizationVector::new(b))
}

/// Relative residual of 𝔓_j = α_j D(x_j) + η_j Σ_{l≠j} e^{ik|x_j−x_l|} 𝔓_l.
pub fn steady_state_residual(
    b: &PolarizationVector,
    array: &AtomArray,
    params: &WaveguideParams,
    drive: &DriveField,
) -> Result<f64> {
    check_len(b, array)?;
    let x = array.positions();
    let k = params.k();
    let mut num = 0.0_f64;
    let mut scale = 0.0_f64;
    for j in 0..array.len() {
        let dj = array.detunings()[j];
        let src = polarizability(dj, params) * drive.at(x[j], k);
        let mut sum = Complex64::new(0.0, 0.0);
        for l in 0..array.len() {
            if l != j {
                sum += (I * k * (x[j] - x[l]).abs()).exp() * b[l];
            }
        }
        let res = b[j] - src - eta(dj, params) * sum;
        num = num.max(res.norm());
        scale = scale.max(b[j].norm()).max(src.norm());
    }
    Ok(if scale > 0.0 { num / scale } else { num })
}

/// Incident plus scattered field at `x`, D_0 e^{ikx} + Σ_l G(x − x_l) 𝔓_l.
pub fn total_field(
    b: &PolarizationVector,
    array: &AtomArray,
    params: &WaveguideParams,
    drive: &DriveField,
    x: f64,
) -> Result<Complex64> {
    check_len(b, array)?;
    let scattered: Complex64 = array
        .positions()
        .iter()
        .zip(b.iter())
        .map(|(&xl, &p)| green_function(x - xl, params.k()) * p)
        .sum();
    Ok(drive.at(x, params.k()) + scattered)
}

/// t = 1 + (ik/2D_0) Σ e^{−ikx_l} 𝔓_l and r = (ik/2D_0) Σ e^{ikx_l} 𝔓_l.
pub fn scattering_coefficients(
    b: &PolarizationVector,
    array: &AtomArray,
    params: &WaveguideParams,
    drive: &DriveField,
) -> Result<ScatteringCoefficients> {
    check_len(b, array)?;
    if drive.amplitude == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroDrive);
    }
    let k = params.k();
    let pre = 0.5 * I * k / drive.amplitude;
    let mut fwd = Complex64::new(0.0, 0.0);
    let mut bwd = Complex64::new(0.0, 0.0);
    for (&x, &p) in array.positions().iter().zip(b.iter()) {
        let ph = (I * k * x).exp();
        fwd += p / ph;
        bwd += p * ph;
    }
    Ok(ScatteringCoefficients::from_amplitudes(
        1.0 + pre * fwd,
        pre * bwd,
    ))
}

fn check_len(b: &PolarizationVector, array: &AtomArray) -> Result<()> {
    if b.len() != array.len() {
        return Err(Error::DimensionMismatch {
            expected: array.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Strictly increasing, nonempty list of detunings.
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningGrid(Vec<f64>);

impl DetuningGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("detuning grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "detuning grid must be finite".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "detuning grid must be strictly increasing".into(),
            ));
        }
        Ok(Self(values))
    }

    /// `steps` evenly spaced points from `min` to `max` inclusive.
    pub fn linspace(min: f64, max: f64, steps: usize) -> Result<Self> {
        match steps {
            0 => Err(Error::InvalidParameter(
                "detuning grid needs at least one point".into(),
            )),
            1 => Self::new(vec![min]),
            _ => {
                if !(max > min) {
                    return Err(Error::InvalidParameter(
                        "delta_max must exceed delta_min".into(),
                    ));
                }
                let h = (max - min) / (steps - 1) as f64;
                let mut v: Vec<f64> = (0..steps).map(|i| min + i as f64 * h).collect();
                v[steps - 1] = max;
                Self::new(v)
            }
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Transmission and reflection over a detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub detunings: Vec<f64>,
    pub rows: Vec<ScatteringCoefficients>,
}

impl SpectrumTable {
    pub const HEADER: [&'static str; 7] =
        ["delta_over_gw", "t_re", "t_im", "r_re", "r_im", "T", "R"];

    pub fn transmittance(&self) -> Vec<f64> {
        self.rows.iter().map(|c| c.transmittance).collect()
    }

    pub fn reflectance(&self) -> Vec<f64> {
        self.rows.iter().map(|c| c.reflectance).collect()
    }

    /// CSV fields of row `i` in [`Self::HEADER`] order, detuning in units of γ_w.
    pub fn record(&self, i: usize, gamma_w: f64) -> Vec<String> {
        let c = &self.rows[i];
        [
            self.detunings[i] / gamma_w,
            c.t.re,
            c.t.im,
            c.r.re,
            c.r.im,
            c.transmittance,
            c.reflectance,
        ]
        .iter()
        .map(|&v| format_float(v))
        .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W, gamma_w: f64) -> Result<()> {
        write_csv(
            out,
            &Self::HEADER,
            (0..self.rows.len()).map(|i| self.record(i, gamma_w)),
        )
    }
}

/// Steady-state spectrum with each grid value added to every atom's detuning.
///
/// Grid points are evaluated in parallel; the result does not depend on the
/// number of worker threads. The first failing grid point, in grid order,
/// is reported.
pub fn spectrum(
    array: &AtomArray,
    params: &WaveguideParams,
    drive: &DriveField,
    grid: &DetuningGrid,
) -> Result<SpectrumTable> {
    if drive.amplitude == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroDrive);
    }
    let rows: Vec<Result<ScatteringCoefficients>> = grid
        .values()
        .par_iter()
        .map(|&delta| {
            let shifted = array.offset_detunings(delta);
            solve_steady(&shifted, params, drive)
                .and_then(|b| scattering_coefficients(&b, &shifted, params, drive))
                .map_err(|e| e.at_detuning(delta))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SpectrumTable {
        detunings: grid.values().to_vec(),
        rows,
    })
}
