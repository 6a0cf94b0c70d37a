use num_complex::Complex64;
use proptest::prelude::*;
use wgarray::*;

fn positions() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..4.0, 1..7).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn irregular_arrays_agree_with_cascade(x in positions(), delta in -4.0f64..4.0, ratio in 0.05f64..0.95) {
        let p = WaveguideParams::with_loss_ratio(ratio).unwrap();
        let a = AtomArray::with_common_detuning(x, delta).unwrap();
        let d = DriveField::unit();
        let b = solve_steady(&a, &p, &d).unwrap();
        let direct = scattering_coefficients(&b, &a, &p, &d).unwrap();
        let tm = cascade(&a, &p).unwrap();
        prop_assert!((direct.t - tm.t).norm() < 1e-10);
        prop_assert!((direct.r - tm.r).norm() < 1e-10);
    }

    #[test]
    fn mode_expansion_reproduces_steady_state(x in positions(), delta in -3.0f64..3.0, ratio in 0.2f64..0.9) {
        let p = WaveguideParams::with_loss_ratio(ratio).unwrap();
        let a = AtomArray::with_common_detuning(x, delta).unwrap();
        let set = decompose(&a.zero_detunings(), &p).unwrap();
        prop_assume!(set.zero_binorm_flags().iter().all(|f| !f));
        let b = solve_steady(&a, &p, &DriveField::unit()).unwrap();
        let c = set.coefficients(&b).unwrap();
        let back = set.reconstruct(&c);
        prop_assert!((back - b.amplitudes()).norm() < 1e-8 * b.amplitudes().norm().max(1.0));
    }
}

#[test]
fn long_drive_relaxes_to_steady_state() {
    let p = WaveguideParams::with_loss_ratio(0.5).unwrap();
    let a = LatticeSpec::new(3, 0.3, 0.0).unwrap().to_array(0.4);
    let drive = Complex64::new(0.7, 0.2);
    let tr = evolve(
        &a,
        &p,
        &DetuningSchedule::constant(a.detunings()),
        &DriveSchedule::constant(drive),
        &PolarizationVector::zeros(3),
        (0.0, 40.0),
        &EvolveSettings {
            tol: 1e-11,
            sample_dt: 0.5,
        },
    )
    .unwrap();
    let steady = solve_steady(&a, &p, &DriveField::new(drive)).unwrap();
    let last = tr.states.last().unwrap();
    assert!((last.amplitudes() - steady.amplitudes()).norm() < 1e-8);
}

#[test]
fn half_wave_arrays_share_the_wavelength_spectrum_of_modes() {
    let p = WaveguideParams::with_loss_ratio(0.5).unwrap();
    let a = AtomArray::with_common_detuning(vec![0.0, 0.5, 2.0, 3.5], 0.0).unwrap();
    let lam = LatticeSpec::new(4, 1.0, 0.0).unwrap().to_array(0.0);
    let s1 = decompose(&a, &p).unwrap();
    let s2 = decompose(&lam, &p).unwrap();
    for (u, v) in s1.eigenvalues().iter().zip(s2.eigenvalues()) {
        assert!((u - v).norm() < 1e-10);
    }
    let signs = half_wave_sign_map(&a, &p).unwrap();
    assert_eq!(signs.signs(), &[1.0, -1.0, 1.0, -1.0]);
}

#[test]
fn closed_form_and_mean_field_meet_far_from_resonance() {
    let p = WaveguideParams::with_loss_ratio(0.1).unwrap();
    let exact = lattice_t(20, 0.27, 400.0, &p).unwrap();
    let mft = mft_t(20, 400.0, &p);
    assert!((exact - mft).norm() < 1e-4);
}

#[test]
fn spectrum_csv_is_stable_across_runs() {
    let p = WaveguideParams::lossless();
    let a = LatticeSpec::new(4, 0.25, 0.0).unwrap().to_array(0.0);
    let g = DetuningGrid::linspace(-3.0, 3.0, 30).unwrap();
    let mut first = Vec::new();
    let mut second = Vec::new();
    spectrum(&a, &p, &DriveField::unit(), &g)
        .unwrap()
        .write_csv(&mut first, 1.0)
        .unwrap();
    spectrum(&a, &p, &DriveField::unit(), &g)
        .unwrap()
        .write_csv(&mut second, 1.0)
        .unwrap();
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().count(), 31);
}
