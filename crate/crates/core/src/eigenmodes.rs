//! Collective eigenmodes of the evolution matrix, their biorthogonal
//! normalization and the weights of arbitrary states on them.
//!
//! Mode n has eigenvalue λ_n = iδ_n − υ_n of A (built with Δ_j = 0), so δ_n is
//! the collective line shift and υ_n the collective linewidth. In terms of a
//! Hamiltonian-like matrix ℋ with iℋ = A, the ℋ eigenvalue is δ_n + iυ_n.
//!
//! Because A is complex symmetric, eigenvectors are paired with the
//! transpose (vᵀw), not the conjugate transpose. Within a degenerate cluster
//! the basis is fixed by bilinear Gram–Schmidt of the projected unit vectors
//! e_1, e_2, … in index order.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{build_evolution_matrix, AtomArray, PolarizationVector, WaveguideParams};
use crate::table::{format_float, write_csv};

/// Modes with |vᵀv| below this (for unit Euclidean v) are flagged.
pub const BINORM_TOL: f64 = 1e-8;
/// Deflation thresholds tried in turn. Simple eigenvalues are refined
/// afterwards, so a loose threshold costs no accuracy.
const SCHUR_EPS: [f64; 3] = [1e-13, 1e-12, 1e-11];

/// Eigenvalues closer than this (relative to ‖A‖_F) form one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;
const NULL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub eigenvalue: Complex64,
    /// δ = Im λ.
    pub shift: f64,
    /// υ = −Re λ.
    pub linewidth: f64,
    pub vector: DVector<Complex64>,
    /// vᵀv after normalization (1 unless flagged).
    pub binorm: Complex64,
    pub zero_binorm: bool,
}

impl Mode {
    fn new(
        eigenvalue: Complex64,
        vector: DVector<Complex64>,
        binorm: Complex64,
        zero_binorm: bool,
    ) -> Self {
        Self {
            eigenvalue,
            shift: eigenvalue.im,
            linewidth: -eigenvalue.re,
            vector,
            binorm,
            zero_binorm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenmodeSet {
    modes: Vec<Mode>,
}

impl EigenmodeSet {
    pub fn from_modes(modes: Vec<Mode>) -> Self {
        Self { modes }
    }

    /// The canonical basis of a λ-spaced lattice with its exact eigenvalues.
    pub fn wavelength_lattice(n_atoms: usize, params: &WaveguideParams) -> Result<Self> {
        let basis = canonical_basis_wavelength_lattice(n_atoms)?;
        let (gw, gt) = (params.gamma_w(), params.gamma_t());
        let modes = basis
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                let lam = if j == 0 {
                    -(gt + (n_atoms as f64 - 1.0) * gw)
                } else {
                    -(gt - gw)
                };
                Mode::new(
                    Complex64::new(lam, 0.0),
                    v.map(|x| Complex64::new(x, 0.0)),
                    Complex64::new(1.0, 0.0),
                    false,
                )
            })
            .collect();
        Ok(Self { modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, n: usize) -> &Mode {
        &self.modes[n]
    }

    pub fn shifts(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.shift).collect()
    }

    pub fn linewidths(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.linewidth).collect()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    pub fn eigenvectors(&self) -> Vec<&DVector<Complex64>> {
        self.modes.iter().map(|m| &m.vector).collect()
    }

    pub fn binorms(&self) -> Vec<Complex64> {
        self.modes.iter().map(|m| m.binorm).collect()
    }

    pub fn zero_binorm_flags(&self) -> Vec<bool> {
        self.modes.iter().map(|m| m.zero_binorm).collect()
    }

    /// Expansion coefficients c_n = v_nᵀb; flagged modes get 0.
    pub fn coefficients(&self, b: &PolarizationVector) -> Result<Vec<Complex64>> {
        let n = self.modes.first().map_or(0, |m| m.vector.len());
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        Ok(self
            .modes
            .iter()
            .map(|m| {
                if m.zero_binorm {
                    Complex64::new(0.0, 0.0)
                } else {
                    m.vector.dot(b.amplitudes())
                }
            })
            .collect())
    }

    /// Σ_n c_n v_n over non-flagged modes.
    pub fn reconstruct(&self, coefficients: &[Complex64]) -> DVector<Complex64> {
        let n = self.modes.first().map_or(0, |m| m.vector.len());
        let mut out = DVector::zeros(n);
        for (m, c) in self.modes.iter().zip(coefficients) {
            if !m.zero_binorm {
                out += &m.vector * *c;
            }
        }
        out
    }
}

/// Eigenmodes of A for the positions of `array` with every Δ_j = 0.
pub fn decompose(array: &AtomArray, params: &WaveguideParams) -> Result<EigenmodeSet> {
    decompose_matrix(&build_evolution_matrix(&array.zero_detunings(), params))
}

/// Eigenmodes of an arbitrary complex symmetric matrix.
pub fn decompose_matrix(a: &DMatrix<Complex64>) -> Result<EigenmodeSet> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::EigenSolver(
            "matrix must be square and nonempty".into(),
        ));
    }
    if a.iter().any(|z| !z.is_finite()) {
        return Err(Error::EigenSolver("matrix has non-finite entries".into()));
    }
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let schur = SCHUR_EPS
        .iter()
        .find_map(|&eps| a.clone().try_schur(eps, 10_000 * n))
        .ok_or_else(|| Error::EigenSolver("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let eig: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();

    let clusters = cluster(&eig, CLUSTER_TOL * scale);
    let mut groups: Vec<Vec<Mode>> = Vec::with_capacity(clusters.len());
    for members in clusters {
        let m = members.len();
        let mean = members.iter().map(|&i| eig[i]).sum::<Complex64>() / m as f64;
        let (sv, vecs) = null_space(a, mean)?;
        let null_dim = sv.iter().take_while(|&&s| s <= NULL_TOL * scale).count();
        let modes = if m == 1 {
            let v = vecs.column(0).into_owned();
            let lambda = rayleigh(a, &v).unwrap_or(mean);
            let (v, b, flag) = normalize(v);
            vec![Mode::new(lambda, v, b, flag)]
        } else if null_dim >= m {
            let q = vecs.columns(0, m).into_owned();
            degenerate_basis(&q, mean)
        } else {
            let mut out = Vec::with_capacity(m);
            for &i in &members {
                let (_, v) = null_space(a, eig[i])?;
                let (v, b, _) = normalize(v.column(0).into_owned());
                out.push(Mode::new(eig[i], v, b, true));
            }
            out
        };
        groups.push(modes);
    }

    let key_scale = 1e-9 * scale;
    let rounded = |x: f64| (x / key_scale).round();
    groups.sort_by(|ga, gb| {
        let (a0, b0) = (&ga[0], &gb[0]);
        rounded(b0.linewidth)
            .total_cmp(&rounded(a0.linewidth))
            .then(rounded(a0.shift).total_cmp(&rounded(b0.shift)))
            .then(a0.linewidth.total_cmp(&b0.linewidth).reverse())
            .then(a0.shift.total_cmp(&b0.shift))
    });
    let mut modes = Vec::with_capacity(n);
    for mut g in groups {
        g.sort_by(|x, y| lexicographic(&x.vector, &y.vector));
        modes.extend(g);
    }
    Ok(EigenmodeSet { modes })
}

fn lexicographic(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Ordering {
    let r = |x: f64| (x * 1e12).round();
    for (x, y) in a.iter().zip(b.iter()) {
        let o = r(x.re)
            .total_cmp(&r(y.re))
            .then(r(x.im).total_cmp(&r(y.im)));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Single-linkage clusters of eigenvalues, each sorted by index.
fn cluster(eig: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = eig.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (eig[i] - eig[j]).norm() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Singular values of A − λI in ascending order with the matching right
/// singular vectors as columns.
fn null_space(a: &DMatrix<Complex64>, lambda: Complex64) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    let shifted = a - DMatrix::from_diagonal_element(n, n, lambda);
    let svd = shifted.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::EigenSolver("SVD did not return right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        for r in 0..n {
            vecs[(r, c)] = v_t[(i, r)].conj();
        }
    }
    Ok((sv, vecs))
}

/// vᵀAv / vᵀv, accurate to second order in the error of v.
fn rayleigh(a: &DMatrix<Complex64>, v: &DVector<Complex64>) -> Option<Complex64> {
    let b = v.dot(v);
    (b.norm() >= BINORM_TOL * v.norm_squared()).then(|| v.dot(&(a * v)) / b)
}

fn fix_phase(v: &mut DVector<Complex64>) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let idx = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-12))
        .unwrap_or(0);
    let ph = v[idx].conj() / v[idx].norm();
    *v *= ph;
}

/// Phase-fixed, binorm-normalized vector plus its binorm and flag.
fn normalize(mut v: DVector<Complex64>) -> (DVector<Complex64>, Complex64, bool) {
    fix_phase(&mut v);
    let norm = v.norm();
    v /= Complex64::new(norm, 0.0);
    let b = v.dot(&v);
    if b.norm() < BINORM_TOL {
        return (v, b, true);
    }
    v /= b.sqrt();
    let after = v.dot(&v);
    (v, after, false)
}

fn degenerate_basis(q: &DMatrix<Complex64>, lambda: Complex64) -> Vec<Mode> {
    let (n, m) = q.shape();
    let g = q.transpose() * q;
    let fallback = || {
        (0..m)
            .map(|c| {
                let (v, b, _) = normalize(q.column(c).into_owned());
                Mode::new(lambda, v, b, true)
            })
            .collect::<Vec<_>>()
    };
    let gi = match g.clone().try_inverse() {
        Some(gi) if (gi.norm() * g.norm()) < 1e8 => gi,
        _ => return fallback(),
    };
    let p = q * gi * q.transpose();
    let mut accepted: Vec<DVector<Complex64>> = Vec::with_capacity(m);
    for i in 0..n {
        if accepted.len() == m {
            break;
        }
        let mut s = p.column(i).into_owned();
        for u in &accepted {
            let c = u.dot(&s);
            s -= u * c;
        }
        let sn = s.norm();
        if sn < 1e-8 {
            continue;
        }
        fix_phase(&mut s);
        let b = s.dot(&s);
        if b.norm() < BINORM_TOL * sn * sn {
            continue;
        }
        s /= b.sqrt();
        accepted.push(s);
    }
    if accepted.len() < m {
        return fallback();
    }
    accepted
        .into_iter()
        .map(|v| {
            let b = v.dot(&v);
            Mode::new(lambda, v, b, false)
        })
        .collect()
}

/// L_j = |v_jᵀb|² / Σ_i |v_iᵀb|², with flagged modes excluded and given 0.
pub fn mode_weights(modes: &EigenmodeSet, b: &PolarizationVector) -> Result<Vec<f64>> {
    let c = modes.coefficients(b)?;
    let w: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = w.iter().sum();
    let floor = (1e-14 * b.amplitudes().norm()).powi(2);
    if !(total > floor) || total == 0.0 {
        return Err(Error::ZeroState);
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeClass {
    Superradiant,
    Subradiant,
    Neutral,
}

/// Superradiant when υ > γ_t, subradiant when υ < γ_t.
pub fn classify(modes: &EigenmodeSet, params: &WaveguideParams) -> Vec<ModeClass> {
    let gt = params.gamma_t();
    let tol = 1e-9 * gt.max(1.0);
    modes
        .modes
        .iter()
        .map(|m| {
            if m.linewidth > gt + tol {
                ModeClass::Superradiant
            } else if m.linewidth < gt - tol {
                ModeClass::Subradiant
            } else {
                ModeClass::Neutral
            }
        })
        .collect()
}

/// Real orthonormal basis for a lattice with spacing a multiple of λ.
///
/// v_1 = (1,…,1)/√N spans the superradiant mode. The remaining vectors are
/// the symmetric orthonormalization of the differences e_j − e_1, so they
/// are treated alike under permutations of atoms 2..N and each sums to 0.
pub fn canonical_basis_wavelength_lattice(n_atoms: usize) -> Result<Vec<DVector<f64>>> {
    if n_atoms == 0 {
        return Err(Error::InvalidParameter(
            "basis needs at least one atom".into(),
        ));
    }
    let n = n_atoms as f64;
    let mut out = vec![DVector::from_element(n_atoms, 1.0 / n.sqrt())];
    if n_atoms > 1 {
        let c = (1.0 / n.sqrt() - 1.0) / (n - 1.0);
        for j in 1..n_atoms {
            let mut u = DVector::from_element(n_atoms, c);
            u[0] = -1.0 - c * (n - 1.0);
            u[j] += 1.0;
            out.push(u);
        }
    }
    Ok(out)
}

/// The difference vectors (e_j − e_1)/√2 with v_1 = (1,…,1)/√N, as printed
/// for four atoms. They span the dark subspace but are not mutually
/// orthogonal.
pub fn difference_basis(n_atoms: usize) -> Result<Vec<DVector<f64>>> {
    if n_atoms == 0 {
        return Err(Error::InvalidParameter(
            "basis needs at least one atom".into(),
        ));
    }
    let mut out = vec![DVector::from_element(
        n_atoms,
        1.0 / (n_atoms as f64).sqrt(),
    )];
    for j in 1..n_atoms {
        let mut u = DVector::zeros(n_atoms);
        u[0] = -std::f64::consts::FRAC_1_SQRT_2;
        u[j] = std::f64::consts::FRAC_1_SQRT_2;
        out.push(u);
    }
    Ok(out)
}

/// Signs s_j = e^{ik(x_j − x_1)} = ±1 for atoms on half-wavelength sites.
#[derive(Debug, Clone, PartialEq)]
pub struct SignMap {
    signs: Vec<f64>,
}

impl SignMap {
    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn is_identity(&self) -> bool {
        self.signs.iter().all(|&s| s > 0.0)
    }

    /// 𝔓̃_j = s_j 𝔓_j. The map is its own inverse.
    pub fn apply(&self, b: &PolarizationVector) -> Result<PolarizationVector> {
        if b.len() != self.signs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.signs.len(),
                found: b.len(),
            });
        }
        Ok(PolarizationVector::from_vec(
            b.iter().zip(&self.signs).map(|(z, s)| z * *s).collect(),
        ))
    }

    /// S A S with S = diag(s).
    pub fn conjugate(&self, a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = a.clone();
        for j in 0..a.nrows() {
            for l in 0..a.ncols() {
                out[(j, l)] *= self.signs[j] * self.signs[l];
            }
        }
        out
    }

    pub fn apply_vector(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        DVector::from_iterator(v.len(), v.iter().zip(&self.signs).map(|(z, s)| z * *s))
    }
}

/// Sign map taking a half-wavelength-site array to the λ-spaced dynamics.
pub fn half_wave_sign_map(array: &AtomArray, params: &WaveguideParams) -> Result<SignMap> {
    let half = PI / params.k();
    let x0 = array.positions()[0];
    let mut signs = Vec::with_capacity(array.len());
    for (j, &x) in array.positions().iter().enumerate() {
        let off = (x - x0) / half;
        let m = off.round();
        if (off - m).abs() > 1e-9 {
            return Err(Error::NotHalfWaveMultiple {
                index: j,
                offset: off - m,
            });
        }
        signs.push(if (m as i64).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        });
    }
    Ok(SignMap { signs })
}

/// Modes for a family of geometries, one row per (parameter, mode).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenScan {
    pub parameters: Vec<f64>,
    pub sets: Vec<EigenmodeSet>,
}

impl EigenScan {
    pub const HEADER: [&'static str; 5] = [
        "geometry_param",
        "mode_index",
        "delta_over_gw",
        "upsilon_over_gw",
        "is_superradiant",
    ];

    pub fn write_csv<W: Write>(&self, out: W, params: &WaveguideParams) -> Result<()> {
        let gw = params.gamma_w();
        let mut rows = Vec::new();
        for (p, set) in self.parameters.iter().zip(&self.sets) {
            for (i, (m, c)) in set.modes.iter().zip(classify(set, params)).enumerate() {
                rows.push(vec![
                    format_float(*p),
                    i.to_string(),
                    format_float(m.shift / gw),
                    format_float(m.linewidth / gw),
                    (c == ModeClass::Superradiant).to_string(),
                ]);
            }
        }
        write_csv(out, &Self::HEADER, rows)
    }
}

/// Decomposes each configuration in parallel, keeping input order.
pub fn eigen_scan(configs: &[(f64, AtomArray)], params: &WaveguideParams) -> Result<EigenScan> {
    let sets: Vec<Result<EigenmodeSet>> = configs
        .par_iter()
        .map(|(_, a)| decompose(a, params))
        .collect();
    Ok(EigenScan {
        parameters: configs.iter().map(|(p, _)| *p).collect(),
        sets: sets.into_iter().collect::<Result<Vec<_>>>()?,
    })
}
