//! Physical parameters, the 1D Green's function and the coupled-dipole
//! evolution matrix shared by every solver.
//!
//! Units: rates are measured in γ_w and lengths in λ, so the default
//! wavenumber is k = 2π. Nothing here enforces those units; they are the
//! convention used by the presets and the CLI.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Decay rates and wavenumber of the waveguide mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideParams {
    gamma_w: f64,
    gamma_t: f64,
    k: f64,
}

impl WaveguideParams {
    pub fn new(gamma_w: f64, gamma_t: f64, k: f64) -> Result<Self> {
        if !(gamma_w.is_finite() && gamma_t.is_finite() && k.is_finite()) {
            return Err(Error::InvalidParameter(
                "rates and wavenumber must be finite".into(),
            ));
        }
        if gamma_w <= 0.0 {
            return Err(Error::InvalidParameter("gamma_w must be positive".into()));
        }
        if gamma_t < gamma_w {
            return Err(Error::InvalidParameter(
                "gamma_w must not exceed gamma_t".into(),
            ));
        }
        if k <= 0.0 {
            return Err(Error::InvalidParameter(
                "wavenumber must be positive".into(),
            ));
        }
        Ok(Self {
            gamma_w,
            gamma_t,
            k,
        })
    }

    /// γ_w = γ_t = 1, λ = 1.
    pub fn lossless() -> Self {
        Self {
            gamma_w: 1.0,
            gamma_t: 1.0,
            k: 2.0 * PI,
        }
    }

    /// γ_w = 1, λ = 1 and γ_t = 1 / `ratio`, where `ratio` is γ_w/γ_t.
    pub fn with_loss_ratio(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(Error::InvalidParameter(
                "gamma_w/gamma_t must be positive".into(),
            ));
        }
        if ratio > 1.0 {
            return Err(Error::InvalidParameter(
                "gamma_w must not exceed gamma_t".into(),
            ));
        }
        Self::new(1.0, 1.0 / ratio, 2.0 * PI)
    }

    pub fn gamma_w(&self) -> f64 {
        self.gamma_w
    }

    pub fn gamma_t(&self) -> f64 {
        self.gamma_t
    }

    /// Loss rate out of the guide, γ_l = γ_t − γ_w.
    pub fn gamma_l(&self) -> f64 {
        self.gamma_t - self.gamma_w
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k
    }

    pub fn is_lossless(&self) -> bool {
        self.gamma_l() == 0.0
    }
}

/// Atom positions and per-atom detunings Δ_j = Ω − (ω_0 + δω_j).
///
/// Positions are kept sorted ascending. `original_index(j)` maps the sorted
/// slot `j` back to the index the caller supplied, and the detunings travel
/// with their atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomArray {
    positions: Vec<f64>,
    detunings: Vec<f64>,
    order: Vec<usize>,
}

impl AtomArray {
    pub fn new(positions: Vec<f64>, detunings: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter(
                "an atom array needs at least one atom".into(),
            ));
        }
        if positions.len() != detunings.len() {
            return Err(Error::DimensionMismatch {
                expected: positions.len(),
                found: detunings.len(),
            });
        }
        if positions.iter().chain(&detunings).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "positions and detunings must be finite".into(),
            ));
        }
        let mut order: Vec<usize> = (0..positions.len()).collect();
        order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
        let sorted_positions = order.iter().map(|&i| positions[i]).collect();
        let sorted_detunings = order.iter().map(|&i| detunings[i]).collect();
        Ok(Self {
            positions: sorted_positions,
            detunings: sorted_detunings,
            order,
        })
    }

    /// All atoms share the detuning `delta`.
    pub fn with_common_detuning(positions: Vec<f64>, delta: f64) -> Result<Self> {
        let n = positions.len();
        Self::new(positions, vec![delta; n])
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn original_index(&self, sorted_slot: usize) -> usize {
        self.order[sorted_slot]
    }

    /// Copy with `offset` added to every detuning (per-atom shifts survive).
    pub fn offset_detunings(&self, offset: f64) -> Self {
        Self {
            positions: self.positions.clone(),
            detunings: self.detunings.iter().map(|d| d + offset).collect(),
            order: self.order.clone(),
        }
    }

    /// Copy with detunings replaced; `detunings` is indexed in sorted order.
    pub fn with_detunings(&self, detunings: Vec<f64>) -> Result<Self> {
        if detunings.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: detunings.len(),
            });
        }
        if detunings.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter("detunings must be finite".into()));
        }
        Ok(Self {
            positions: self.positions.clone(),
            detunings,
            order: self.order.clone(),
        })
    }

    pub fn zero_detunings(&self) -> Self {
        Self {
            positions: self.positions.clone(),
            detunings: vec![0.0; self.len()],
            order: self.order.clone(),
        }
    }
}

/// A regular lattice x_j = origin + (j − 1)·spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub n_atoms: usize,
    pub spacing: f64,
    pub origin: f64,
}

impl LatticeSpec {
    pub fn new(n_atoms: usize, spacing: f64, origin: f64) -> Result<Self> {
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
        if !origin.is_finite() {
            return Err(Error::InvalidParameter(
                "lattice origin must be finite".into(),
            ));
        }
        Ok(Self {
            n_atoms,
            spacing,
            origin,
        })
    }

    pub fn sites(&self) -> Vec<f64> {
        (0..self.n_atoms)
            .map(|j| self.origin + j as f64 * self.spacing)
            .collect()
    }

    pub fn to_array(&self, delta: f64) -> AtomArray {
        AtomArray::with_common_detuning(self.sites(), delta)
            .expect("validated lattice always expands to a valid array")
    }
}

/// Incident plane wave D_0 e^{ikx}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveField {
    pub amplitude: Complex64,
}

impl DriveField {
    pub fn new(amplitude: Complex64) -> Self {
        Self { amplitude }
    }

    pub fn unit() -> Self {
        Self {
            amplitude: Complex64::new(1.0, 0.0),
        }
    }

    pub fn at(&self, x: f64, k: f64) -> Complex64 {
        self.amplitude * (I * k * x).exp()
    }
}

/// Complex dipole amplitudes 𝔓^(j), one per atom, in sorted-atom order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationVector(DVector<Complex64>);

impl PolarizationVector {
    pub fn new(amplitudes: DVector<Complex64>) -> Self {
        Self(amplitudes)
    }

    pub fn from_vec(amplitudes: Vec<Complex64>) -> Self {
        Self(DVector::from_vec(amplitudes))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<Complex64> {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.0.iter()
    }
}

impl std::ops::Index<usize> for PolarizationVector {
    type Output = Complex64;

    fn index(&self, j: usize) -> &Complex64 {
        &self.0[j]
    }
}

/// Microscopic inputs of the decay rate into the guide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleCouplingInputs {
    pub reduced_dipole: f64,
    pub mode_radius: f64,
    pub k: f64,
    pub hbar: f64,
    pub epsilon_0: f64,
}

/// γ_w = k𝒟² / (2π ξ² ħ ε_0).
pub fn derive_gamma_w(inputs: &DipoleCouplingInputs) -> Result<f64> {
    let DipoleCouplingInputs {
        reduced_dipole,
        mode_radius,
        k,
        hbar,
        epsilon_0,
    } = *inputs;
    if [reduced_dipole, mode_radius, k, hbar, epsilon_0]
        .iter()
        .any(|v| !(*v > 0.0 && v.is_finite()))
    {
        return Err(Error::InvalidParameter(
            "coupling inputs must be positive and finite".into(),
        ));
    }
    Ok(k * reduced_dipole * reduced_dipole
        / (2.0 * PI * mode_radius * mode_radius * hbar * epsilon_0))
}

/// Green's function of the 1D Helmholtz operator, (ik/2) e^{ik|x|}.
pub fn green_function(x: f64, k: f64) -> Complex64 {
    0.5 * I * k * (I * k * x.abs()).exp()
}

/// Single-atom polarizability α = −2γ_w / (k(Δ + iγ_t)).
pub fn polarizability(delta: f64, params: &WaveguideParams) -> Complex64 {
    -2.0 * params.gamma_w / (params.k * Complex64::new(delta, params.gamma_t))
}

/// η = iαk/2 = γ_w / (iΔ − γ_t).
pub fn eta(delta: f64, params: &WaveguideParams) -> Complex64 {
    params.gamma_w / Complex64::new(-params.gamma_t, delta)
}

/// Off-diagonal coupling −γ_w e^{ik|x_j − x_l|} with a zero diagonal.
pub(crate) fn coupling_matrix(positions: &[f64], params: &WaveguideParams) -> DMatrix<Complex64> {
    let n = positions.len();
    let mut c = DMatrix::zeros(n, n);
    for j in 0..n {
        for l in (j + 1)..n {
            let v = -params.gamma_w * (I * params.k * (positions[j] - positions[l]).abs()).exp();
            c[(j, l)] = v;
            c[(l, j)] = v;
        }
    }
    c
}

/// Matrix A of ḃ = A b + F: A_jj = iΔ_j − γ_t, A_jl = −γ_w e^{ik|x_j − x_l|}.
pub fn build_evolution_matrix(array: &AtomArray, params: &WaveguideParams) -> DMatrix<Complex64> {
    let mut a = coupling_matrix(array.positions(), params);
    for (j, &d) in array.detunings().iter().enumerate() {
        a[(j, j)] = Complex64::new(-params.gamma_t, d);
    }
    a
}

/// F_j = (2iγ_w/k) D_0 e^{ikx_j}.
pub fn drive_vector(
    array: &AtomArray,
    params: &WaveguideParams,
    drive: &DriveField,
) -> DVector<Complex64> {
    let pre = 2.0 * I * params.gamma_w / params.k;
    DVector::from_iterator(
        array.len(),
        array
            .positions()
            .iter()
            .map(|&x| pre * drive.at(x, params.k)),
    )
}
