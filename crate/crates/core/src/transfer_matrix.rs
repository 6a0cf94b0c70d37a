//! 2×2 transfer matrices for atoms in a waveguide, with the closed-form
//! lattice transmission and the optical-thickness expansion.
//!
//! A transfer matrix maps the (right-moving, left-moving) amplitudes just
//! left of a scatterer to those just right of it. Amplitudes returned by
//! [`transmission_from_matrix`] refer to the local coordinates of the first
//! and last atom; [`cascade`] and [`lattice_t`] convert to the convention of
//! the steady-state solver, where the free-propagation phase is removed.

use std::ops::Mul;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result, TotalReflection};
use crate::model::{eta, AtomArray, WaveguideParams};
use crate::steady_state::ScatteringCoefficients;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix(pub Matrix2<Complex64>);

impl TransferMatrix {
    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, rhs: TransferMatrix) -> TransferMatrix {
        TransferMatrix(self.0 * rhs.0)
    }
}

/// Single-atom matrix [[(2η+1)/(η+1), η/(η+1)], [−η/(η+1), 1/(η+1)]].
pub fn atom_matrix(delta: f64, params: &WaveguideParams) -> Result<TransferMatrix> {
    if delta == 0.0 && params.is_lossless() {
        return Err(Error::TotalReflection(TotalReflection {
            delta,
            spacing: None,
            n_atoms: 1,
        }));
    }
    let e = eta(delta, params);
    let inv = 1.0 / (e + 1.0);
    Ok(TransferMatrix(Matrix2::new(
        (2.0 * e + 1.0) * inv,
        e * inv,
        -e * inv,
        inv,
    )))
}

/// Free propagation over `dx`: diag(e^{ik·dx}, e^{−ik·dx}).
pub fn propagation_matrix(dx: f64, k: f64) -> TransferMatrix {
    let p = (I * k * dx).exp();
    TransferMatrix(Matrix2::new(
        p,
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        p.inv(),
    ))
}

/// (t, r) = (1/M₂₂, −M₂₁/M₂₂) for a unimodular matrix.
pub fn transmission_from_matrix(m: &TransferMatrix) -> Result<(Complex64, Complex64)> {
    let m22 = m.entry(1, 1);
    if m22.norm() == 0.0 || !m22.is_finite() {
        return Err(Error::Pole);
    }
    Ok((1.0 / m22, -m.entry(1, 0) / m22))
}

/// Transfer-matrix product over an array, returned in the steady-state
/// solver's phase convention.
pub fn cascade(array: &AtomArray, params: &WaveguideParams) -> Result<ScatteringCoefficients> {
    let x = array.positions();
    let k = params.k();
    let mut m = TransferMatrix::identity();
    for (j, &d) in array.detunings().iter().enumerate() {
        if j > 0 {
            m = propagation_matrix(x[j] - x[j - 1], k) * m;
        }
        let a = atom_matrix(d, params).map_err(|e| match e {
            Error::TotalReflection(tr) => Error::TotalReflection(TotalReflection {
                n_atoms: array.len(),
                ..tr
            }),
            other => other,
        })?;
        m = a * m;
    }
    let (t, r) = transmission_from_matrix(&m)?;
    let len = x[x.len() - 1] - x[0];
    Ok(ScatteringCoefficients::from_amplitudes(
        t * (-I * k * len).exp(),
        r * (2.0 * I * k * x[0]).exp(),
    ))
}

/// Single-atom amplitudes with the reflection phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleAtomScattering {
    pub t: Complex64,
    pub r: Complex64,
    pub transmittance: f64,
    pub reflectance: f64,
    /// arg r, so that r = √R e^{i·phase}.
    pub phase: f64,
}

/// t = 1 + η = ((γ_w − γ_t) + iΔ)/(iΔ − γ_t), r = η.
pub fn single_atom_scattering(delta: f64, params: &WaveguideParams) -> SingleAtomScattering {
    let r = eta(delta, params);
    let t = 1.0 + r;
    SingleAtomScattering {
        t,
        r,
        transmittance: t.norm_sqr(),
        reflectance: r.norm_sqr(),
        phase: r.arg(),
    }
}

/// Two-atom transmission t₁t₂ / (1 − √(R₁R₂) ζ₁ζ₂ e^{2ikx₁₂}).
pub fn two_atom_t(
    delta1: f64,
    delta2: f64,
    x12: f64,
    params: &WaveguideParams,
) -> Result<Complex64> {
    if !(x12 > 0.0) {
        return Err(Error::InvalidParameter(
            "atom separation must be positive".into(),
        ));
    }
    let a = single_atom_scattering(delta1, params);
    let b = single_atom_scattering(delta2, params);
    let den = 1.0 - a.r * b.r * (2.0 * I * params.k() * x12).exp();
    if den.norm() == 0.0 {
        return Err(Error::Pole);
    }
    Ok(a.t * b.t / den)
}

/// Partial sum of the multiple-reflection series for two atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrentSeries {
    pub partial_sum: Complex64,
    /// Common ratio √(R₁R₂) e^{i(φ₁+φ₂+2kx₁₂)}.
    pub ratio: Complex64,
    /// False when |ratio| ≥ 1 and the series does not converge.
    pub converges: bool,
}

/// t₂t₁ Σ_{m<n_terms} (√(R₁R₂) e^{iφ})^m.
pub fn recurrent_series(
    delta1: f64,
    delta2: f64,
    x12: f64,
    params: &WaveguideParams,
    n_terms: usize,
) -> Result<RecurrentSeries> {
    if n_terms == 0 {
        return Err(Error::InvalidParameter(
            "series needs at least one term".into(),
        ));
    }
    let a = single_atom_scattering(delta1, params);
    let b = single_atom_scattering(delta2, params);
    let q = (a.reflectance * b.reflectance).sqrt()
        * Complex64::from_polar(1.0, a.phase + b.phase + 2.0 * params.k() * x12);
    let mut term = a.t * b.t;
    let mut sum = Complex64::new(0.0, 0.0);
    for _ in 0..n_terms {
        sum += term;
        term *= q;
    }
    Ok(RecurrentSeries {
        partial_sum: sum,
        ratio: q,
        converges: q.norm() < 1.0,
    })
}

/// Exact transmission of a regular lattice of identical atoms.
pub fn lattice_t(
    n_atoms: usize,
    spacing: f64,
    delta: f64,
    params: &WaveguideParams,
) -> Result<Complex64> {
    if n_atoms == 0 {
        return Err(Error::InvalidParameter(
            "a lattice needs at least one atom".into(),
        ));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter(
            "lattice spacing must be positive".into(),
        ));
    }
    if delta == 0.0 && params.is_lossless() {
        return Err(Error::TotalReflection(TotalReflection {
            delta,
            spacing: Some(spacing),
            n_atoms,
        }));
    }
    let e = eta(delta, params);
    let xi2 = (2.0 * I * params.k() * spacing).exp();
    let s = 2.0 * (e + 1.0);
    let a = (2.0 * e + 1.0) * xi2;
    let b = (xi2 - 1.0).sqrt() * ((2.0 * e + 1.0).powi(2) * xi2 - 1.0).sqrt();
    let t = if b.norm() < 1e-7 * a.norm() {
        lattice_t_series(n_atoms, (a + 1.0) / s, (a - 1.0) / s, b / s)
    } else {
        lattice_t_roots(n_atoms, a, b, s)
    };
    if !t.is_finite() {
        return Err(Error::Pole);
    }
    Ok(t)
}

pub(crate) fn lattice_t_roots(n: usize, a: Complex64, b: Complex64, s: Complex64) -> Complex64 {
    let rp = (a + b + 1.0) / s;
    let rm = (a - b + 1.0) / s;
    let n = n as i32;
    let den = (a + b - 1.0) * rm.powi(n) + (-a + b + 1.0) * rp.powi(n);
    2.0 * b / den
}

/// 1 / [Σ_even C(N,k) u^{N−k} β^k − w Σ_odd C(N,k) u^{N−k} β^{k−1}].
fn lattice_t_series(n: usize, u: Complex64, w: Complex64, beta: Complex64) -> Complex64 {
    let b2 = beta * beta;
    let mut u_pow = vec![ONE; n + 1];
    for j in 1..=n {
        u_pow[j] = u_pow[j - 1] * u;
    }
    let mut even = Complex64::new(0.0, 0.0);
    let mut odd = Complex64::new(0.0, 0.0);
    let mut binom = 1.0_f64;
    let mut b2_pow = ONE;
    for k in 0..=n {
        if k > 0 {
            binom *= (n - k + 1) as f64 / k as f64;
        }
        if k % 2 == 0 {
            let term = binom * u_pow[n - k] * b2_pow;
            even += term;
            if k >= 2 && term.norm() <= 1e-18 * even.norm() {
                break;
            }
        } else {
            odd += binom * u_pow[n - k] * b2_pow;
            b2_pow *= b2;
        }
    }
    1.0 / (even - w * odd)
}

/// Mean-field transmission [t^(1)]^N.
pub fn mft_t(n_atoms: usize, delta: f64, params: &WaveguideParams) -> Complex64 {
    single_atom_scattering(delta, params).t.powi(n_atoms as i32)
}

fn thickness(n_atoms: usize, delta: f64, params: &WaveguideParams, cot: f64) -> f64 {
    let (gw, gt) = (params.gamma_w(), params.gamma_t());
    let n = n_atoms as f64;
    let den = gt * gt + delta * delta;
    2.0 * gt * gw * n / den
        + 2.0 * gw * gw * n * (gt * gt + gt * delta * cot - delta * delta) / (den * den)
}

fn cot_checked(angle: f64, what: &'static str) -> Result<f64> {
    let s = angle.sin();
    if s.abs() < 1e-12 {
        return Err(Error::Singular(what));
    }
    Ok(angle.cos() / s)
}

/// Second-order expansion of the optical thickness −ln T with cot(2kd).
pub fn optical_thickness_approx(
    n_atoms: usize,
    spacing: f64,
    delta: f64,
    params: &WaveguideParams,
) -> Result<f64> {
    let c = cot_checked(
        2.0 * params.k() * spacing,
        "sin(2kd) = 0 in the optical-thickness expansion",
    )?;
    Ok(thickness(n_atoms, delta, params, c))
}

/// The same expansion with cot(kd), which reproduces the exact antisymmetric
/// part of −ln T for dilute lattices.
pub fn corrected_optical_thickness(
    n_atoms: usize,
    spacing: f64,
    delta: f64,
    params: &WaveguideParams,
) -> Result<f64> {
    let c = cot_checked(
        params.k() * spacing,
        "sin(kd) = 0 in the optical-thickness expansion",
    )?;
    Ok(thickness(n_atoms, delta, params, c))
}

/// Δ_L = ½ cot(2kd) γ_w.
pub fn line_shift(spacing: f64, params: &WaveguideParams) -> Result<f64> {
    let c = cot_checked(
        2.0 * params.k() * spacing,
        "sin(2kd) = 0; at half-wavelength multiples the line is symmetric and there is no shift",
    )?;
    Ok(0.5 * c * params.gamma_w())
}

/// Δ_L = ½ cot(kd) γ_w, the shift of the absorption maximum for small
/// γ_w N / γ_t.
pub fn corrected_line_shift(spacing: f64, params: &WaveguideParams) -> Result<f64> {
    let c = cot_checked(
        params.k() * spacing,
        "sin(kd) = 0; at half-wavelength multiples the line is symmetric and there is no shift",
    )?;
    Ok(0.5 * c * params.gamma_w())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DriveField, LatticeSpec};
    use crate::steady_state::{scattering_coefficients, solve_steady};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn far_detuned_atom_is_identity() {
        let p = WaveguideParams::lossless();
        let m = atom_matrix(1e12, &p).unwrap();
        assert!((m.0 - Matrix2::identity()).norm() < 1e-11);
    }

    #[test]
    fn resonant_lossless_atom_signals_total_reflection() {
        let p = WaveguideParams::lossless();
        match atom_matrix(0.0, &p) {
            Err(Error::TotalReflection(tr)) => assert_eq!(tr.n_atoms, 1),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            lattice_t(3, 0.3, 0.0, &p),
            Err(Error::TotalReflection(TotalReflection { n_atoms: 3, .. }))
        ));
        let arr = LatticeSpec::new(4, 0.2, 0.0).unwrap().to_array(0.0);
        assert!(matches!(
            cascade(&arr, &p),
            Err(Error::TotalReflection(TotalReflection { n_atoms: 4, .. }))
        ));
    }

    #[test]
    fn propagation_examples() {
        let k = 2.0 * PI;
        assert_eq!(propagation_matrix(0.0, k), TransferMatrix::identity());
        assert!((propagation_matrix(1.0, k).0 - Matrix2::identity()).norm() < 1e-14);
        assert!((propagation_matrix(0.37, k).det() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn identity_transmits() {
        assert_eq!(
            transmission_from_matrix(&TransferMatrix::identity()).unwrap(),
            (c(1.0, 0.0), c(0.0, 0.0))
        );
        let z = TransferMatrix(Matrix2::new(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
        ));
        assert_eq!(transmission_from_matrix(&z), Err(Error::Pole));
    }

    #[test]
    fn single_atom_amplitudes() {
        let p = WaveguideParams::with_loss_ratio(0.6).unwrap();
        let (gw, gt) = (p.gamma_w(), p.gamma_t());
        for delta in [-2.0, 0.0, 0.3, 5.0] {
            let (t, r) = transmission_from_matrix(&atom_matrix(delta, &p).unwrap()).unwrap();
            let expect_t = c(gw - gt, delta) / c(-gt, delta);
            assert!((t - expect_t).norm() < 1e-14);
            assert!((r - eta(delta, &p)).norm() < 1e-14);
            let s = single_atom_scattering(delta, &p);
            assert!(
                (s.r - s.reflectance.sqrt() * Complex64::from_polar(1.0, s.phase)).norm() < 1e-15
            );
            assert!((s.reflectance - gw * gw / (gt * gt + delta * delta)).abs() < 1e-15);
        }
    }

    #[test]
    fn lattice_single_atom_reduction() {
        let p = WaveguideParams::with_loss_ratio(0.3).unwrap();
        for d in [0.1, 0.25, 0.5, 1.0] {
            let t = lattice_t(1, d, 0.7, &p).unwrap();
            assert!((t - single_atom_scattering(0.7, &p).t).norm() < 1e-13);
        }
    }

    #[test]
    fn lattice_wavelength_spacing_uses_series_branch() {
        let p = WaveguideParams::lossless();
        for n in [1, 2, 5, 20] {
            let e = eta(0.8, &p);
            let t = lattice_t(n, 1.0, 0.8, &p).unwrap();
            let expect = (1.0 + e) / (1.0 - (n as f64 - 1.0) * e);
            assert!((t - expect).norm() < 1e-9, "n={n}: {t} vs {expect}");
            let t2 = lattice_t(n, 0.5, 0.8, &p).unwrap();
            assert!((t2.norm() - expect.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn fig4_full_transmission() {
        let p = WaveguideParams::lossless();
        let s2 = 2f64.sqrt();
        for d in [
            s2,
            -s2,
            (2.0 * (2.0 + s2)).sqrt(),
            -(2.0 * (2.0 - s2)).sqrt(),
        ] {
            assert!((lattice_t(8, 0.25, d, &p).unwrap().norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn two_atom_fano_peak() {
        let p = WaveguideParams::lossless();
        let tr = |d: f64| two_atom_t(d, d, 0.45, &p).unwrap().norm_sqr();
        let (mut best, mut at) = (0.0, 0.0);
        for i in 1..=2000 {
            let d = i as f64 * 1e-3;
            if tr(d) > best {
                best = tr(d);
                at = d;
            }
        }
        assert!((0.30..=0.34).contains(&at), "peak at {at}");
    }

    #[test]
    fn recurrent_series_limits() {
        let p = WaveguideParams::lossless();
        let one = recurrent_series(0.4, -0.2, 0.3, &p, 1).unwrap();
        let a = single_atom_scattering(0.4, &p);
        let b = single_atom_scattering(-0.2, &p);
        assert_eq!(one.partial_sum, a.t * b.t);
        assert!(!recurrent_series(0.0, 0.0, 0.3, &p, 5).unwrap().converges);
        assert!(recurrent_series(0.4, 0.0, 0.3, &p, 0).is_err());
        let exact = two_atom_t(0.4, -0.2, 0.3, &p).unwrap();
        let mut prev = f64::INFINITY;
        for n in [1, 2, 4, 8, 16, 32] {
            let s = recurrent_series(0.4, -0.2, 0.3, &p, n).unwrap();
            assert!(s.converges);
            let err = (s.partial_sum - exact).norm();
            let bound = (a.t * b.t).norm() * s.ratio.norm().powi(n as i32) / (1.0 - s.ratio.norm());
            assert!(err <= bound * (1.0 + 1e-9) + 1e-15);
            assert!(err <= prev);
            prev = err;
        }
    }

    #[test]
    fn weak_coupling_two_atoms_transmit() {
        let p = WaveguideParams::new(1e-12, 1.0, 2.0 * PI).unwrap();
        assert!((two_atom_t(0.1, 0.2, 0.3, &p).unwrap() - 1.0).norm() < 1e-11);
    }

    #[test]
    fn mft_examples() {
        let p = WaveguideParams::with_loss_ratio(0.5).unwrap();
        assert_eq!(mft_t(1, 0.3, &p), single_atom_scattering(0.3, &p).t);
        let t1 = single_atom_scattering(0.3, &p).t.norm();
        assert!((mft_t(7, 0.3, &p).norm() - t1.powi(7)).abs() < 1e-14);
        let lossless = WaveguideParams::lossless();
        for n in [2, 5, 10] {
            let exact = lattice_t(n, 0.3, 100.0, &lossless).unwrap();
            let diff = (exact - mft_t(n, 100.0, &lossless)).norm();
            assert!(diff < n as f64 * 1e-4, "{n} {diff}");
        }
    }

    #[test]
    fn thickness_on_resonance() {
        let p = WaveguideParams::with_loss_ratio(0.1).unwrap();
        let (gw, gt) = (p.gamma_w(), p.gamma_t());
        let d = optical_thickness_approx(30, 0.3, 0.0, &p).unwrap();
        assert!((d - (2.0 * gw * 30.0 / gt + 2.0 * gw * gw * 30.0 / (gt * gt))).abs() < 1e-12);
        assert!(optical_thickness_approx(30, 0.25, 0.0, &p).is_err());
    }

    #[test]
    fn thickness_odd_part_scales_with_cot() {
        let p = WaveguideParams::with_loss_ratio(0.1).unwrap();
        let odd = |d: f64| {
            optical_thickness_approx(10, d, 3.0, &p).unwrap()
                - optical_thickness_approx(10, d, -3.0, &p).unwrap()
        };
        let k = p.k();
        let ratio = odd(0.3) / odd(0.4);
        assert!(
            (ratio - (2.0 * k * 0.3).tan().recip() / (2.0 * k * 0.4).tan().recip()).abs() < 1e-10
        );
    }

    #[test]
    fn line_shift_examples() {
        let p = WaveguideParams::lossless();
        assert!(matches!(line_shift(0.25, &p), Err(Error::Singular(_))));
        assert!(matches!(line_shift(0.5, &p), Err(Error::Singular(_))));
        assert!((line_shift(0.45, &p).unwrap() + 0.688_190_960_235_587_2).abs() < 1e-12);
        assert!(line_shift(0.375, &p).unwrap().abs() < 1e-12);
        assert!((corrected_line_shift(0.25, &p).unwrap()).abs() < 1e-12);
        assert!(corrected_line_shift(0.5, &p).is_err());
    }

    #[test]
    fn cascade_matches_direct_solver_for_one_and_two_atoms() {
        let p = WaveguideParams::with_loss_ratio(0.8).unwrap();
        let arr = AtomArray::new(vec![0.31, 1.07], vec![0.4, -0.9]).unwrap();
        let direct = {
            let b = solve_steady(&arr, &p, &DriveField::unit()).unwrap();
            scattering_coefficients(&b, &arr, &p, &DriveField::unit()).unwrap()
        };
        let tm = cascade(&arr, &p).unwrap();
        assert!((direct.t - tm.t).norm() < 1e-13);
        assert!((direct.r - tm.r).norm() < 1e-13);
        let t12 = two_atom_t(0.4, -0.9, 0.76, &p).unwrap();
        assert!((t12 - tm.t).norm() < 1e-13);
    }

    fn lattice_case() -> impl Strategy<Value = (usize, f64, f64, f64)> {
        (1usize..=12, 0.05f64..1.5, -4.0f64..4.0, 0.05f64..=1.0)
    }

    proptest! {
        #[test]
        fn determinants_are_one(deltas in prop::collection::vec(-5.0f64..5.0, 1..8), dx in 0.0f64..2.0, ratio in 0.05f64..0.99) {
            let p = WaveguideParams::with_loss_ratio(ratio).unwrap();
            let mut m = TransferMatrix::identity();
            for d in deltas {
                let a = atom_matrix(d, &p).unwrap();
                prop_assert!((a.det() - 1.0).norm() < 1e-12 * a.0.norm_squared().max(1.0));
                m = a * propagation_matrix(dx, p.k()) * m;
            }
            prop_assert!((m.det() - 1.0).norm() < 1e-12 * m.0.norm_squared().max(1.0));
        }

        #[test]
        fn closed_form_matches_cascade((n, d, delta, ratio) in lattice_case()) {
            prop_assume!(!(ratio == 1.0 && delta == 0.0));
            let p = WaveguideParams::with_loss_ratio(ratio).unwrap();
            let arr = LatticeSpec::new(n, d, 0.13).unwrap().to_array(delta);
            let tm = cascade(&arr, &p).unwrap();
            let cf = lattice_t(n, d, delta, &p).unwrap();
            prop_assert!((tm.t - cf).norm() < 1e-10, "{} vs {}", tm.t, cf);
        }

        #[test]
        fn branch_invariance((n, d, delta, ratio) in lattice_case()) {
            prop_assume!(!(ratio == 1.0 && delta == 0.0));
            let p = WaveguideParams::with_loss_ratio(ratio).unwrap();
            let e = eta(delta, &p);
            let xi2 = (2.0 * I * p.k() * d).exp();
            let s = 2.0 * (e + 1.0);
            let a = (2.0 * e + 1.0) * xi2;
            let b = (xi2 - 1.0).sqrt() * ((2.0 * e + 1.0).powi(2) * xi2 - 1.0).sqrt();
            prop_assume!(b.norm() > 1e-6);
            let plus = lattice_t_roots(n, a, b, s);
            let minus = lattice_t_roots(n, a, -b, s);
            prop_assert!((plus - minus).norm() < 1e-12 * plus.norm().max(1.0));
        }

        #[test]
        fn round_trip_phase((n, d, delta, ratio) in lattice_case()) {
            prop_assume!(!(ratio == 1.0 && delta == 0.0));
            let p = WaveguideParams::with_loss_ratio(ratio).unwrap();
            let a = lattice_t(n, d, delta, &p).unwrap().norm();
            let b = lattice_t(n, d + 0.5, delta, &p).unwrap().norm();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn lossless_cascade_conserves_energy(xs in prop::collection::vec(0.0f64..3.0, 1..10), delta in 0.01f64..3.0) {
            let p = WaveguideParams::lossless();
            let arr = AtomArray::with_common_detuning(xs, delta).unwrap();
            let c = cascade(&arr, &p).unwrap();
            prop_assert!((c.transmittance + c.reflectance - 1.0).abs() < 1e-10);
        }

        #[test]
        fn two_atom_matches_cascade(d1 in -3.0f64..3.0, d2 in -3.0f64..3.0, x12 in 0.01f64..2.0, ratio in 0.05f64..0.99) {
            let p = WaveguideParams::with_loss_ratio(ratio).unwrap();
            let arr = AtomArray::new(vec![0.0, x12], vec![d1, d2]).unwrap();
            prop_assert!((two_atom_t(d1, d2, x12, &p).unwrap() - cascade(&arr, &p).unwrap().t).norm() < 1e-12);
        }
    }
}
