//! Positional disorder and seeded ensemble averages of the transmission.
//!
//! Realization `r` of an ensemble with master seed `s` draws from a ChaCha8
//! generator seeded with `s` on stream `r`, so every realization is fixed by
//! (s, r) alone and the result does not depend on scheduling.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{AtomArray, DriveField, LatticeSpec, WaveguideParams};
use crate::steady_state::{scattering_coefficients, solve_steady, spectrum, DetuningGrid};
use crate::table::{format_float, write_csv};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PositionModel {
    Fixed,
    /// Independent Gaussian displacement of rms `rms` about each site.
    GaussianSites {
        rms: f64,
    },
    /// N independent uniform positions on [x_1, x_1 + length].
    UniformInterval {
        length: f64,
    },
}

impl PositionModel {
    pub fn gaussian(rms: f64) -> Result<Self> {
        if !(rms >= 0.0 && rms.is_finite()) {
            return Err(Error::InvalidParameter(
                "rms width must be nonnegative".into(),
            ));
        }
        Ok(Self::GaussianSites { rms })
    }

    pub fn uniform(length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter(
                "interval length must be positive".into(),
            ));
        }
        Ok(Self::UniformInterval { length })
    }
}

/// Lattice spacing and depth s in units of the recoil energy π²ħ²/(2md²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeDepthSpec {
    pub spacing: f64,
    pub depth: f64,
}

/// ℓ = d s^{−1/4} / (√2 π).
pub fn rms_from_depth(spec: &LatticeDepthSpec) -> Result<f64> {
    if !(spec.depth > 0.0) || !(spec.spacing > 0.0) {
        return Err(Error::InvalidParameter(
            "lattice depth and spacing must be positive".into(),
        ));
    }
    Ok(spec.spacing * spec.depth.powf(-0.25) / (2f64.sqrt() * PI))
}

/// Depth s that gives rms width `rms` at spacing `spacing`.
pub fn depth_from_rms(spacing: f64, rms: f64) -> Result<f64> {
    if !(rms > 0.0) || !(spacing > 0.0) {
        return Err(Error::InvalidParameter(
            "rms width and spacing must be positive".into(),
        ));
    }
    Ok((spacing / (2f64.sqrt() * PI * rms)).powi(4))
}

pub fn sample_positions<R: Rng + ?Sized>(
    model: &PositionModel,
    lattice: &LatticeSpec,
    rng: &mut R,
) -> Vec<f64> {
    let sites = lattice.sites();
    match *model {
        PositionModel::Fixed => sites,
        PositionModel::GaussianSites { rms } => {
            if rms == 0.0 {
                return sites;
            }
            let normal = Normal::new(0.0, rms).expect("validated rms");
            sites.into_iter().map(|x| x + normal.sample(rng)).collect()
        }
        PositionModel::UniformInterval { length } => {
            let u = Uniform::new_inclusive(lattice.origin, lattice.origin + length)
                .expect("validated interval");
            let mut xs: Vec<f64> = (0..lattice.n_atoms).map(|_| u.sample(rng)).collect();
            xs.sort_by(f64::total_cmp);
            xs
        }
    }
}

/// Generator for realization `index` of an ensemble seeded with `seed`.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationFailure {
    pub realization: usize,
    pub delta: f64,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub detunings: Vec<f64>,
    pub mean_t: Vec<f64>,
    pub stderr_t: Vec<f64>,
    /// |⟨t⟩|² over the same realizations.
    pub mean_coherent_t: Vec<f64>,
    /// Realizations that contributed at each grid point.
    pub counts: Vec<usize>,
    pub n_realizations: usize,
    pub seed: u64,
    pub failures: Vec<RealizationFailure>,
}

impl EnsembleResult {
    pub const HEADER: [&'static str; 4] =
        ["delta_over_gw", "mean_T", "stderr_T", "mean_coherent_T"];

    pub fn write_csv<W: Write>(&self, out: W, gamma_w: f64) -> Result<()> {
        let rows = (0..self.detunings.len()).map(|i| {
            vec![
                format_float(self.detunings[i] / gamma_w),
                format_float(self.mean_t[i]),
                format_float(self.stderr_t[i]),
                format_float(self.mean_coherent_t[i]),
            ]
        });
        write_csv(out, &Self::HEADER, rows)
    }
}

type Sample = Vec<std::result::Result<Complex64, Error>>;

fn realization(
    model: &PositionModel,
    lattice: &LatticeSpec,
    params: &WaveguideParams,
    drive: &DriveField,
    grid: &DetuningGrid,
    seed: u64,
    index: usize,
) -> Sample {
    let mut rng = realization_rng(seed, index as u64);
    let xs = sample_positions(model, lattice, &mut rng);
    let array = AtomArray::with_common_detuning(xs, 0.0).expect("sampled positions are finite");
    grid.values()
        .iter()
        .map(|&d| {
            let a = array.offset_detunings(d);
            solve_steady(&a, params, drive)
                .and_then(|b| scattering_coefficients(&b, &a, params, drive))
                .map(|c| c.t)
        })
        .collect()
}

/// Mean transmitted intensity over `n_realizations` position samples.
///
/// Grid points where a realization's steady state is singular are left out
/// of that point's average and listed in `failures`.
pub fn ensemble_spectrum(
    model: &PositionModel,
    lattice: &LatticeSpec,
    params: &WaveguideParams,
    drive: &DriveField,
    grid: &DetuningGrid,
    n_realizations: usize,
    seed: u64,
) -> Result<EnsembleResult> {
    if n_realizations == 0 {
        return Err(Error::InvalidParameter(
            "need at least one realization".into(),
        ));
    }
    if drive.amplitude == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroDrive);
    }
    let m = grid.len();
    if let PositionModel::Fixed = model {
        let s = spectrum(&lattice.to_array(0.0), params, drive, grid)?;
        return Ok(EnsembleResult {
            detunings: grid.values().to_vec(),
            mean_t: s.transmittance(),
            stderr_t: vec![0.0; m],
            mean_coherent_t: s.rows.iter().map(|c| c.t.norm_sqr()).collect(),
            counts: vec![n_realizations; m],
            n_realizations,
            seed,
            failures: Vec::new(),
        });
    }

    let samples: Vec<Sample> = (0..n_realizations)
        .into_par_iter()
        .map(|r| realization(model, lattice, params, drive, grid, seed, r))
        .collect();

    let mut sum = vec![0.0; m];
    let mut sum_sq = vec![0.0; m];
    let mut sum_t = vec![Complex64::new(0.0, 0.0); m];
    let mut counts = vec![0usize; m];
    let mut failures = Vec::new();
    for (r, s) in samples.into_iter().enumerate() {
        for (i, v) in s.into_iter().enumerate() {
            match v {
                Ok(t) => {
                    let x = t.norm_sqr();
                    sum[i] += x;
                    sum_sq[i] += x * x;
                    sum_t[i] += t;
                    counts[i] += 1;
                }
                Err(error) => failures.push(RealizationFailure {
                    realization: r,
                    delta: grid.values()[i],
                    error,
                }),
            }
        }
    }
    let mut mean_t = vec![f64::NAN; m];
    let mut stderr_t = vec![f64::NAN; m];
    let mut mean_coherent_t = vec![f64::NAN; m];
    for i in 0..m {
        let n = counts[i] as f64;
        if counts[i] == 0 {
            continue;
        }
        let mean = sum[i] / n;
        mean_t[i] = mean;
        mean_coherent_t[i] = (sum_t[i] / n).norm_sqr();
        stderr_t[i] = if counts[i] > 1 {
            let var = ((sum_sq[i] - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
    }
    Ok(EnsembleResult {
        detunings: grid.values().to_vec(),
        mean_t,
        stderr_t,
        mean_coherent_t,
        counts,
        n_realizations,
        seed,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(n: usize, d: f64) -> LatticeSpec {
        LatticeSpec::new(n, d, 0.0).unwrap()
    }

    #[test]
    fn depth_conversions() {
        let s = depth_from_rms(0.25, 1.0 / 32.0).unwrap();
        assert!((9.5..=11.5).contains(&s), "{s}");
        let s = depth_from_rms(0.5, 1.0 / 32.0).unwrap();
        assert!((160.0..=176.0).contains(&s), "{s}");
        let l = rms_from_depth(&LatticeDepthSpec {
            spacing: 0.25,
            depth: s / 16.0,
        })
        .unwrap();
        assert!((l - 1.0 / 32.0).abs() < 1e-15);
        assert!(
            rms_from_depth(&LatticeDepthSpec {
                spacing: 0.25,
                depth: 1e40
            })
            .unwrap()
                < 1e-10
        );
        assert!(rms_from_depth(&LatticeDepthSpec {
            spacing: 0.25,
            depth: 0.0
        })
        .is_err());
    }

    #[test]
    fn fixed_and_zero_width_models_return_sites() {
        let l = lat(5, 0.3);
        let mut rng = realization_rng(1, 0);
        assert_eq!(
            sample_positions(&PositionModel::Fixed, &l, &mut rng),
            l.sites()
        );
        assert_eq!(
            sample_positions(&PositionModel::gaussian(0.0).unwrap(), &l, &mut rng),
            l.sites()
        );
        assert!(PositionModel::gaussian(-1.0).is_err());
        assert!(PositionModel::uniform(0.0).is_err());
    }

    #[test]
    fn gaussian_displacements_are_centred() {
        let l = lat(10, 0.25);
        let rms = 0.05;
        let mut rng = realization_rng(7, 3);
        let model = PositionModel::gaussian(rms).unwrap();
        let draws = 10_000;
        let mut s = 0.0;
        for _ in 0..draws {
            for (x, site) in sample_positions(&model, &l, &mut rng).iter().zip(l.sites()) {
                s += x - site;
            }
        }
        let n = (draws * 10) as f64;
        assert!((s / n).abs() < 5.0 * rms / n.sqrt());
    }

    #[test]
    fn uniform_positions_are_sorted_and_bounded() {
        let l = LatticeSpec::new(8, 0.25, 1.0).unwrap();
        let mut rng = realization_rng(9, 0);
        let xs = sample_positions(&PositionModel::uniform(2.0).unwrap(), &l, &mut rng);
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
        assert!(xs.iter().all(|&x| (1.0..=3.0).contains(&x)));
    }

    #[test]
    fn fixed_ensemble_equals_deterministic_spectrum() {
        let p = WaveguideParams::lossless();
        let l = lat(4, 0.25);
        let g = DetuningGrid::linspace(-2.0, 2.0, 9).unwrap();
        let s = spectrum(&l.to_array(0.0), &p, &DriveField::unit(), &g).unwrap();
        for n in [1, 7] {
            let e = ensemble_spectrum(&PositionModel::Fixed, &l, &p, &DriveField::unit(), &g, n, 3)
                .unwrap();
            assert_eq!(e.mean_t, s.transmittance());
            assert!(e.stderr_t.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn tiny_disorder_matches_lattice() {
        let p = WaveguideParams::lossless();
        let l = lat(8, 0.25);
        let g = DetuningGrid::linspace(-3.0, 3.0, 13).unwrap();
        let fixed = ensemble_spectrum(&PositionModel::Fixed, &l, &p, &DriveField::unit(), &g, 1, 0)
            .unwrap();
        let e = ensemble_spectrum(
            &PositionModel::gaussian(1e-6).unwrap(),
            &l,
            &p,
            &DriveField::unit(),
            &g,
            100,
            11,
        )
        .unwrap();
        for i in 0..g.len() {
            assert!((e.mean_t[i] - fixed.mean_t[i]).abs() < 1e-3);
        }
    }

    #[test]
    fn reproducible_and_single_realization_has_zero_stderr() {
        let p = WaveguideParams::with_loss_ratio(0.5).unwrap();
        let l = lat(6, 0.25);
        let g = DetuningGrid::linspace(-2.0, 2.0, 5).unwrap();
        let m = PositionModel::gaussian(0.03).unwrap();
        let a = ensemble_spectrum(&m, &l, &p, &DriveField::unit(), &g, 20, 42).unwrap();
        let b = ensemble_spectrum(&m, &l, &p, &DriveField::unit(), &g, 20, 42).unwrap();
        assert_eq!(a, b);
        let c = ensemble_spectrum(&m, &l, &p, &DriveField::unit(), &g, 20, 43).unwrap();
        assert_ne!(a.mean_t, c.mean_t);
        let one = ensemble_spectrum(&m, &l, &p, &DriveField::unit(), &g, 1, 42).unwrap();
        assert!(one.stderr_t.iter().all(|&x| x == 0.0));
        assert!(ensemble_spectrum(&m, &l, &p, &DriveField::unit(), &g, 0, 42).is_err());
    }

    #[test]
    fn stderr_scales_with_inverse_root_n() {
        let p = WaveguideParams::lossless();
        let l = lat(8, 0.25);
        let g = DetuningGrid::new(vec![1.3, 2.5]).unwrap();
        let m = PositionModel::gaussian(1.0 / 16.0).unwrap();
        let a = ensemble_spectrum(&m, &l, &p, &DriveField::unit(), &g, 100, 5).unwrap();
        let b = ensemble_spectrum(&m, &l, &p, &DriveField::unit(), &g, 400, 5).unwrap();
        for i in 0..2 {
            let r = a.stderr_t[i] / b.stderr_t[i];
            assert!(
                (1.4..2.8).contains(&r),
                "ratio {r} {:?} {:?} {:?} {:?}",
                a.stderr_t,
                b.stderr_t,
                a.mean_t,
                b.mean_t
            );
        }
    }

    #[test]
    fn csv_header() {
        let p = WaveguideParams::lossless();
        let g = DetuningGrid::new(vec![0.5]).unwrap();
        let e = ensemble_spectrum(
            &PositionModel::Fixed,
            &lat(2, 0.25),
            &p,
            &DriveField::unit(),
            &g,
            1,
            0,
        )
        .unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf, 1.0).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("delta_over_gw,mean_T,stderr_T,mean_coherent_T\n"));
    }
}
