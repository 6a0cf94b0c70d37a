//! Time evolution ḃ = A(t) b + F(t) under piecewise-linear detuning and
//! drive schedules.

use std::io::Write;
use std::ops::{Add, Mul};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::eigenmodes::{mode_weights, EigenmodeSet};
use crate::error::{Error, Result};
use crate::model::{coupling_matrix, AtomArray, PolarizationVector, WaveguideParams};
use crate::ode::Dopri5;
use crate::table::{format_float, write_csv};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Piecewise-linear function of time, constant outside its breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear<T> {
    times: Vec<f64>,
    values: Vec<T>,
}

impl<T> PiecewiseLinear<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    pub fn new(times: Vec<f64>, values: Vec<T>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidParameter(
                "schedule needs at least one breakpoint".into(),
            ));
        }
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                found: values.len(),
            });
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(
                "schedule times must be finite".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "schedule breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: T) -> Self {
        Self {
            times: vec![0.0],
            values: vec![value],
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> T {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let s = (t - t0) / (t1 - t0);
        self.values[i] * (1.0 - s) + self.values[i + 1] * s
    }
}

/// Δ_j(t) per atom, indexed in sorted-position order.
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningSchedule {
    per_atom: Vec<PiecewiseLinear<f64>>,
}

impl DetuningSchedule {
    pub fn new(per_atom: Vec<PiecewiseLinear<f64>>) -> Result<Self> {
        if per_atom
            .iter()
            .any(|s| s.values.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "detuning values must be finite".into(),
            ));
        }
        Ok(Self { per_atom })
    }

    pub fn constant(detunings: &[f64]) -> Self {
        Self {
            per_atom: detunings
                .iter()
                .map(|&d| PiecewiseLinear::constant(d))
                .collect(),
        }
    }

    /// Holds `from` until `t_start`, then ramps linearly to `to` by `t_end`.
    pub fn ramp(from: &[f64], to: &[f64], t_start: f64, t_end: f64) -> Result<Self> {
        if from.len() != to.len() {
            return Err(Error::DimensionMismatch {
                expected: from.len(),
                found: to.len(),
            });
        }
        let per_atom = from
            .iter()
            .zip(to)
            .map(|(&a, &b)| ramp_segment(a, b, t_start, t_end))
            .collect::<Result<Vec<_>>>()?;
        Self::new(per_atom)
    }

    pub fn len(&self) -> usize {
        self.per_atom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_atom.is_empty()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.per_atom.iter().map(|s| s.eval(t)).collect()
    }

    fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_atom.iter().flat_map(|s| s.times.iter().copied())
    }
}

/// Complex drive envelope D_0(t).
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSchedule(pub PiecewiseLinear<Complex64>);

impl DriveSchedule {
    pub fn constant(amplitude: Complex64) -> Self {
        Self(PiecewiseLinear::constant(amplitude))
    }

    pub fn ramp(from: Complex64, to: Complex64, t_start: f64, t_end: f64) -> Result<Self> {
        Ok(Self(ramp_segment(from, to, t_start, t_end)?))
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.0.eval(t)
    }
}

fn ramp_segment<T>(from: T, to: T, t_start: f64, t_end: f64) -> Result<PiecewiseLinear<T>>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    if t_end < t_start {
        return Err(Error::InvalidParameter(
            "ramp must end after it starts".into(),
        ));
    }
    if t_end == t_start {
        let eps = 1e-12 * t_start.abs().max(1.0);
        return PiecewiseLinear::new(vec![t_start - eps, t_start], vec![from, to]);
    }
    PiecewiseLinear::new(vec![t_start, t_end], vec![from, to])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveSettings {
    /// Local relative error tolerance.
    pub tol: f64,
    /// Spacing of the uniform output grid; breakpoints are added to it.
    pub sample_dt: f64,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            sample_dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PolarizationVector>,
    pub total_excitation: Vec<f64>,
    /// L_j(t) against a fixed mode set, if attached.
    pub mode_weights: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    /// Computes L_j(t) for every sample; states with no weight on any mode
    /// (such as b = 0) get all-zero weights.
    pub fn attach_weights(&mut self, modes: &EigenmodeSet) -> Result<()> {
        let mut out = Vec::with_capacity(self.states.len());
        for b in &self.states {
            match mode_weights(modes, b) {
                Ok(w) => out.push(w),
                Err(Error::ZeroState) => out.push(vec![0.0; modes.len()]),
                Err(e) => return Err(e),
            }
        }
        self.mode_weights = Some(out);
        Ok(())
    }

    /// Index of the sample closest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&x| x < t);
        if i == 0 {
            return 0;
        }
        if i == self.times.len() {
            return i - 1;
        }
        if (self.times[i] - t).abs() < (t - self.times[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t_gw".to_string(), "total_excitation".to_string()];
        if let Some(w) = self.mode_weights.as_ref().and_then(|w| w.first()) {
            h.extend((1..=w.len()).map(|j| format!("L{j}")));
        }
        h
    }

    /// Writes `t_gw,total_excitation[,L1..LN]` with time in units of 1/γ_w.
    pub fn write_csv<W: Write>(&self, out: W, gamma_w: f64) -> Result<()> {
        let header = self.header();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = (0..self.times.len()).map(|i| {
            let mut r = vec![
                format_float(self.times[i] * gamma_w),
                format_float(self.total_excitation[i]),
            ];
            if let Some(w) = &self.mode_weights {
                r.extend(w[i].iter().map(|&x| format_float(x)));
            }
            r
        });
        write_csv(out, &header, rows)
    }
}

/// Σ_j |𝔓_j|².
pub fn total_excitation(b: &PolarizationVector) -> f64 {
    b.iter().map(|z| z.norm_sqr()).sum()
}

/// Output times: a uniform grid over the span plus every interior breakpoint.
fn sample_times(t0: f64, t1: f64, dt: f64, breaks: impl Iterator<Item = f64>) -> Vec<f64> {
    let n = ((t1 - t0) / dt).round().max(1.0) as usize;
    let mut ts: Vec<f64> = (0..=n)
        .map(|i| t0 + (t1 - t0) * i as f64 / n as f64)
        .collect();
    ts.extend(breaks.filter(|&b| b > t0 && b < t1));
    ts.sort_by(f64::total_cmp);
    let tol = 1e-12 * (t1 - t0).abs().max(1.0);
    let mut out: Vec<f64> = Vec::with_capacity(ts.len());
    for t in ts {
        if out.last().is_none_or(|&l| t - l > tol) {
            out.push(t);
        }
    }
    out
}

/// Integrates the coupled-dipole equations over `t_span`.
///
/// The array supplies positions only; detunings come from `detunings`.
pub fn evolve(
    array: &AtomArray,
    params: &WaveguideParams,
    detunings: &DetuningSchedule,
    drive: &DriveSchedule,
    b0: &PolarizationVector,
    t_span: (f64, f64),
    settings: &EvolveSettings,
) -> Result<Trajectory> {
    let n = array.len();
    if detunings.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: detunings.len(),
        });
    }
    if b0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b0.len(),
        });
    }
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
        return Err(Error::InvalidParameter(
            "time span must satisfy start < end".into(),
        ));
    }
    if !(settings.tol > 0.0) || !(settings.sample_dt > 0.0) {
        return Err(Error::InvalidParameter(
            "tolerance and sample spacing must be positive".into(),
        ));
    }

    let coupling = coupling_matrix(array.positions(), params);
    let k = params.k();
    let unit_drive: DVector<Complex64> = DVector::from_iterator(
        n,
        array
            .positions()
            .iter()
            .map(|&x| 2.0 * I * params.gamma_w() / k * (I * k * x).exp()),
    );
    let gt = params.gamma_t();
    let rhs = |t: f64, b: &DVector<Complex64>| {
        let mut db = &coupling * b;
        let d0 = drive.eval(t);
        for (j, dj) in detunings.per_atom.iter().enumerate() {
            db[j] += Complex64::new(-gt, dj.eval(t)) * b[j] + unit_drive[j] * d0;
        }
        db
    };

    let breaks: Vec<f64> = detunings
        .breakpoints()
        .chain(drive.0.times.iter().copied())
        .collect();
    let times = sample_times(t0, t1, settings.sample_dt, breaks.iter().copied());

    let mut solver = Dopri5::new(settings.tol, settings.tol * 1e-3);
    let mut y = b0.amplitudes().clone();
    let mut states = Vec::with_capacity(times.len());
    states.push(PolarizationVector::new(y.clone()));
    let mut t = t0;
    for &ts in &times[1..] {
        let crosses_break = breaks.iter().any(|&b| b > t && b <= ts);
        y = solver.advance(&rhs, t, y, ts)?;
        if crosses_break {
            solver.h = 0.0;
        }
        t = ts;
        states.push(PolarizationVector::new(y.clone()));
    }
    let total_excitation = states.iter().map(total_excitation).collect();
    Ok(Trajectory {
        times,
        states,
        total_excitation,
        mode_weights: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenmodes::half_wave_sign_map;
    use crate::model::{DriveField, LatticeSpec};
    use crate::steady_state::solve_steady;
    use proptest::prelude::*;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn piecewise_linear_eval() {
        let p = PiecewiseLinear::new(vec![1.0, 2.0, 4.0], vec![0.0, 1.0, -1.0]).unwrap();
        assert_eq!(p.eval(0.0), 0.0);
        assert_eq!(p.eval(1.5), 0.5);
        assert_eq!(p.eval(3.0), 0.0);
        assert_eq!(p.eval(10.0), -1.0);
        assert!(PiecewiseLinear::new(vec![1.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(PiecewiseLinear::<f64>::new(vec![], vec![]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn single_atom_free_decay() {
        let p = WaveguideParams::with_loss_ratio(0.5).unwrap();
        let arr = AtomArray::new(vec![0.0], vec![0.3]).unwrap();
        let tol = 1e-10;
        let tr = evolve(
            &arr,
            &p,
            &DetuningSchedule::constant(&[0.3]),
            &DriveSchedule::constant(Complex64::new(0.0, 0.0)),
            &PolarizationVector::from_vec(vec![one()]),
            (0.0, 3.0),
            &EvolveSettings {
                tol,
                sample_dt: 0.1,
            },
        )
        .unwrap();
        for (t, e) in tr.times.iter().zip(&tr.total_excitation) {
            let exact = (-2.0 * p.gamma_t() * t).exp();
            assert!((e - exact).abs() <= 10.0 * tol * exact.max(1e-3), "t={t}");
        }
    }

    #[test]
    fn long_run_reaches_steady_state() {
        let p = WaveguideParams::with_loss_ratio(0.5).unwrap();
        let arr = AtomArray::new(vec![0.0, 0.3, 0.75], vec![0.2, -0.4, 0.1]).unwrap();
        let d = Complex64::new(0.7, 0.2);
        let tol = 1e-10;
        let tr = evolve(
            &arr,
            &p,
            &DetuningSchedule::constant(arr.detunings()),
            &DriveSchedule::constant(d),
            &PolarizationVector::zeros(3),
            (0.0, 40.0),
            &EvolveSettings {
                tol,
                sample_dt: 1.0,
            },
        )
        .unwrap();
        let ss = solve_steady(&arr, &p, &DriveField::new(d)).unwrap();
        let last = tr.states.last().unwrap();
        let err = (last.amplitudes() - ss.amplitudes()).norm() / ss.amplitudes().norm();
        assert!(err < 10.0 * tol, "err {err}");
    }

    #[test]
    fn dark_state_does_not_decay() {
        let p = WaveguideParams::lossless();
        let arr = LatticeSpec::new(4, 1.0, 0.0).unwrap().to_array(0.0);
        let b0 = PolarizationVector::from_vec(vec![
            one(),
            -one(),
            Complex64::new(0.0, 2.0),
            Complex64::new(0.0, -2.0),
        ]);
        let tol = 1e-10;
        let tr = evolve(
            &arr,
            &p,
            &DetuningSchedule::constant(&[0.0; 4]),
            &DriveSchedule::constant(Complex64::new(0.0, 0.0)),
            &b0,
            (0.0, 10.0),
            &EvolveSettings {
                tol,
                sample_dt: 0.5,
            },
        )
        .unwrap();
        let e0 = tr.total_excitation[0];
        assert!(tr
            .total_excitation
            .iter()
            .all(|e| ((e - e0) / e0).abs() < tol));
    }

    #[test]
    fn superradiant_decay_rate() {
        let p = WaveguideParams::lossless();
        let n = 5;
        let arr = LatticeSpec::new(n, 1.0, 0.0).unwrap().to_array(0.0);
        let tr = evolve(
            &arr,
            &p,
            &DetuningSchedule::constant(&vec![0.0; n]),
            &DriveSchedule::constant(Complex64::new(0.0, 0.0)),
            &PolarizationVector::from_vec(vec![one(); n]),
            (0.0, 1.0),
            &EvolveSettings::default(),
        )
        .unwrap();
        let i = tr.index_at(1.0);
        let rate = -(tr.total_excitation[i] / tr.total_excitation[0]).ln() / tr.times[i];
        let expect = 2.0 * (p.gamma_t() + (n as f64 - 1.0) * p.gamma_w());
        assert!((rate / expect - 1.0).abs() < 0.01);
    }

    #[test]
    fn total_excitation_examples() {
        assert_eq!(total_excitation(&PolarizationVector::zeros(3)), 0.0);
        assert_eq!(
            total_excitation(&PolarizationVector::from_vec(vec![one()])),
            1.0
        );
        let p = WaveguideParams::lossless();
        let s =
            half_wave_sign_map(&LatticeSpec::new(3, 0.5, 0.0).unwrap().to_array(0.0), &p).unwrap();
        let b = PolarizationVector::from_vec(vec![
            one(),
            Complex64::new(0.3, 0.4),
            Complex64::new(-2.0, 0.1),
        ]);
        assert_eq!(
            total_excitation(&s.apply(&b).unwrap()),
            total_excitation(&b)
        );
    }

    #[test]
    fn samples_include_breakpoints() {
        let p = WaveguideParams::lossless();
        let arr = AtomArray::new(vec![0.0, 0.4], vec![0.0, 0.0]).unwrap();
        let det = DetuningSchedule::ramp(&[1.0, -1.0], &[0.0, 0.0], 0.33, 0.77).unwrap();
        let tr = evolve(
            &arr,
            &p,
            &det,
            &DriveSchedule::constant(one()),
            &PolarizationVector::zeros(2),
            (0.0, 1.0),
            &EvolveSettings {
                tol: 1e-9,
                sample_dt: 0.25,
            },
        )
        .unwrap();
        assert!(tr.times.contains(&0.33) && tr.times.contains(&0.77));
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(tr.states.len(), tr.times.len());
    }

    #[test]
    fn refining_the_grid_keeps_shared_samples() {
        let p = WaveguideParams::lossless();
        let arr = AtomArray::new(vec![0.0, 0.4, 0.9], vec![0.0; 3]).unwrap();
        let det = DetuningSchedule::ramp(&[1.0, -1.0, 0.5], &[0.0; 3], 1.0, 1.5).unwrap();
        let drive = DriveSchedule::ramp(one(), Complex64::new(0.0, 0.0), 1.0, 1.5).unwrap();
        let run = |dt| {
            evolve(
                &arr,
                &p,
                &det,
                &drive,
                &PolarizationVector::zeros(3),
                (0.0, 3.0),
                &EvolveSettings {
                    tol: 1e-10,
                    sample_dt: dt,
                },
            )
            .unwrap()
        };
        let coarse = run(0.5);
        let fine = run(0.05);
        for (i, &t) in coarse.times.iter().enumerate() {
            let j = fine.index_at(t);
            assert!((fine.times[j] - t).abs() < 1e-12);
            let d = (coarse.states[i].amplitudes() - fine.states[j].amplitudes()).norm();
            assert!(d < 1e-8, "t={t} d={d}");
        }
    }

    #[test]
    fn csv_columns() {
        let p = WaveguideParams::lossless();
        let arr = LatticeSpec::new(2, 1.0, 0.0).unwrap().to_array(0.0);
        let mut tr = evolve(
            &arr,
            &p,
            &DetuningSchedule::constant(&[0.0, 0.0]),
            &DriveSchedule::constant(one()),
            &PolarizationVector::zeros(2),
            (0.0, 0.5),
            &EvolveSettings {
                tol: 1e-8,
                sample_dt: 0.25,
            },
        )
        .unwrap();
        tr.attach_weights(&EigenmodeSet::wavelength_lattice(2, &p).unwrap())
            .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, 1.0).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t_gw,total_excitation,L1,L2\n"));
        assert_eq!(s.lines().count(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn linear_in_initial_state(re in prop::collection::vec(-1.0f64..1.0, 3), d in 0.05f64..1.0) {
            let p = WaveguideParams::with_loss_ratio(0.8).unwrap();
            let arr = LatticeSpec::new(3, d, 0.0).unwrap().to_array(0.0);
            let det = DetuningSchedule::ramp(&[0.5, -0.5, 0.0], &[0.0; 3], 0.5, 1.0).unwrap();
            let drive = DriveSchedule::constant(Complex64::new(0.0, 0.0));
            let b0 = PolarizationVector::from_vec(re.iter().map(|&x| Complex64::new(x, 0.5 * x)).collect());
            let b2 = PolarizationVector::new(b0.amplitudes() * Complex64::new(2.0, 0.0));
            let s = EvolveSettings { tol: 1e-10, sample_dt: 0.5 };
            let a = evolve(&arr, &p, &det, &drive, &b0, (0.0, 2.0), &s).unwrap();
            let b = evolve(&arr, &p, &det, &drive, &b2, (0.0, 2.0), &s).unwrap();
            for (x, y) in a.states.iter().zip(&b.states) {
                let scale = x.amplitudes().norm().max(1e-12);
                prop_assert!((x.amplitudes() * Complex64::new(2.0, 0.0) - y.amplitudes()).norm() / scale < 1e-9);
            }
        }
    }
}
