use frameflow_core::dynamics::{lookup, RegistryOptions, Trajectory};
use frameflow_core::hyperbolicity::{
    certify_uniform_contraction, check_index_constancy, extremal_exponent_bounds, lyapunov_spectrum,
    oseledets_splitting, periodic_spectrum, realize_reordering, CertifyParams, IndexVerdict, SpectrumParams,
    SplittingParams,
};
use frameflow_core::shadowing::{enumerate_periodic_toral, first_return, refine_periodic, PeriodicOrbit};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_vec(x.to_vec())
}

fn cat_orbits(max_period: usize) -> Vec<PeriodicOrbit> {
    let a = DMatrix::from_row_slice(2, 2, &[2i64, 1, 1, 1]);
    (1..=max_period).flat_map(|m| enumerate_periodic_toral(&a, m).unwrap()).collect()
}

const CAT: f64 = 0.962_423_650_119_206_9;

#[test]
fn empirical_spectra_match_periodic_bounds() {
    let sys = lookup("cat", &RegistryOptions::default()).unwrap();
    let bounds = extremal_exponent_bounds(&cat_orbits(3)).unwrap();
    assert!((bounds.sigma_bound + CAT).abs() < 1e-12);
    assert!((bounds.varsigma_bound - CAT).abs() < 1e-12);
    assert!(bounds.separated);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 0..20 {
        let w = v(&[rng.random(), rng.random()]);
        let params = SpectrumParams { seed, ..Default::default() };
        let est = lyapunov_spectrum(&sys, &w, 2, 10_000.0, &params).unwrap();
        assert!((est.exponents[0] - bounds.sigma_bound).abs() < 1e-3);
        assert!((est.exponents[1] - bounds.varsigma_bound).abs() < 1e-3);
    }
}

#[test]
fn periodic_and_empirical_spectra_agree_on_orbits() {
    let sys = lookup("cat", &RegistryOptions::default()).unwrap();
    for orbit in cat_orbits(3) {
        let p = periodic_spectrum(&orbit).unwrap();
        assert_eq!(p.len(), orbit.exponents.len());
        for (a, b) in p.iter().zip(&orbit.exponents) {
            assert!((a - b).abs() < 1e-12);
        }
        let params = SpectrumParams { burn_in: 60.0, seed: 3, ..Default::default() };
        let est = lyapunov_spectrum(&sys, &orbit.point, 2, 1000.0, &params).unwrap();
        for (a, b) in p.iter().zip(&est.exponents) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn perturbed_orbit_spectrum_matches_frame_average_along_it() {
    let sys = lookup("cat-perturbed", &RegistryOptions::default()).unwrap();
    let traj = Trajectory::orbit(&sys, &v(&[0.35, 0.55]), 10_000).unwrap();
    let seg = first_return(&traj, 0, 0.05, 2.0).unwrap().unwrap();
    let orbit = refine_periodic(&sys, &seg, 1e-10).unwrap();
    let p = periodic_spectrum(&orbit).unwrap();
    // Frame cocycle over many laps of the stored cycle.
    let jac: Vec<_> = orbit.cycle.iter().map(|x| sys.jacobian(x)).collect();
    let mut q = DMatrix::<f64>::identity(2, 2);
    let mut sums = [0.0; 2];
    let laps = 2000 / orbit.cycle.len() + 2;
    for lap in 0..laps {
        for j in &jac {
            let qr = (j * &q).qr();
            let r = qr.r();
            q = qr.q();
            if lap >= 1 {
                for i in 0..2 {
                    sums[i] += r[(i, i)].abs().ln();
                }
            }
        }
    }
    let steps = ((laps - 1) * orbit.cycle.len()) as f64;
    let mut est = [sums[0] / steps, sums[1] / steps];
    est.sort_by(f64::total_cmp);
    assert!((est[0] - p[0]).abs() < 1e-6 && (est[1] - p[1]).abs() < 1e-6, "{est:?} vs {p:?}");
}

#[test]
fn index_constancy_for_cat_orbits() {
    let verdict = check_index_constancy(&cat_orbits(8), 1e-6).unwrap();
    assert!(matches!(verdict, IndexVerdict::Constant { index: 1, excluded, .. } if excluded.is_empty()));
}

#[test]
fn reorderings_realize_exponent_multiset() {
    let fixed = &cat_orbits(1)[0];
    for perm in [[0usize, 1], [1, 0]] {
        let r = realize_reordering(fixed, &perm).unwrap();
        assert!(r.realized);
        let mut a = r.achieved.clone();
        a.sort_by(f64::total_cmp);
        assert!((a[0] + CAT).abs() < 1e-8 && (a[1] - CAT).abs() < 1e-8);
    }
    let r = realize_reordering(fixed, &[1, 0]).unwrap();
    // Column 0 starts along the unstable eigendirection (1, (√5 − 1)/2).
    let slope = r.frame[(1, 0)] / r.frame[(0, 0)];
    assert!((slope - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
    assert!((r.achieved[0] - CAT).abs() < 1e-8 && (r.achieved[1] + CAT).abs() < 1e-8);
}

#[test]
fn splitting_frames_contract_at_their_rates() {
    let delta = 0.05;
    let t = 50;
    // Diagonal: plain forward transport is exact.
    let sys = lookup("diag:2,0.5", &RegistryOptions::default()).unwrap();
    let est = oseledets_splitting(&sys, &v(&[0.3, 0.2]), &SplittingParams::default()).unwrap();
    let mut s = est.stable_frame.column(0).into_owned();
    let mut u = est.unstable_frame.column(0).into_owned();
    for _ in 0..t {
        s = sys.jacobian(&v(&[0.0, 0.0])) * s;
        u = sys.inverse_jacobian(&v(&[0.0, 0.0])).unwrap() * u;
    }
    let lm = -(2f64.ln());
    assert!(s.norm() <= ((lm + delta) * t as f64).exp());
    assert!(u.norm() <= ((lm + delta) * t as f64).exp());

    // Cat map: transport stepwise through the splitting at each iterate, so
    // that rounding in the complementary direction is not amplified.
    let sys = lookup("cat", &RegistryOptions::default()).unwrap();
    let traj = Trajectory::orbit(&sys, &v(&[0.31, 0.47]), t).unwrap();
    let mut log_s = 0.0;
    let mut log_u = 0.0;
    for k in 0..t {
        let here = oseledets_splitting(&sys, &traj.states[k], &SplittingParams::default()).unwrap();
        let next = oseledets_splitting(&sys, &traj.states[k + 1], &SplittingParams::default()).unwrap();
        let es = sys.jacobian(&traj.states[k]) * here.stable_frame.column(0);
        let proj = next.stable_frame.column(0).dot(&es);
        assert!((es.norm() - proj.abs()).abs() < 1e-9);
        log_s += es.norm().ln();
        let eu = sys.inverse_jacobian(&traj.states[k + 1]).unwrap() * next.unstable_frame.column(0);
        log_u += eu.norm().ln();
    }
    assert!(log_s <= (-CAT + delta) * t as f64);
    assert!(log_u <= (-CAT + delta) * t as f64);
    // Direct transport over a horizon short enough for double precision.
    let short = 12;
    let mut s = oseledets_splitting(&sys, &traj.states[0], &SplittingParams::default()).unwrap().stable_frame.column(0).into_owned();
    for k in 0..short {
        s = sys.jacobian(&traj.states[k]) * s;
    }
    assert!(s.norm() <= ((-CAT + delta) * short as f64).exp());
}

#[test]
fn perturbed_splitting_angle_stays_away_from_zero() {
    let sys = lookup("cat-perturbed", &RegistryOptions::default()).unwrap();
    let traj = Trajectory::orbit(&sys, &v(&[0.2, 0.9]), 99).unwrap();
    let params = SplittingParams { stable_dim: Some(1), ..Default::default() };
    let min = traj
        .states
        .iter()
        .map(|x| oseledets_splitting(&sys, x, &params).unwrap().angle)
        .fold(f64::INFINITY, f64::min);
    assert!(min > 1.2, "{min}");
}

#[test]
fn certificate_is_monotone_in_sigma() {
    let sys = lookup("cat-perturbed", &RegistryOptions::default()).unwrap();
    let traj = Trajectory::orbit(&sys, &v(&[0.6, 0.3]), 4).unwrap();
    let params = SplittingParams { stable_dim: Some(1), ..Default::default() };
    let samples: Vec<_> = traj
        .states
        .iter()
        .map(|x| (x.clone(), oseledets_splitting(&sys, x, &params).unwrap().stable_frame.column(0).into_owned()))
        .collect();
    let mut previous = true;
    for sigma in [0.5, 1.0, 1.5, 1.8, 1.9, 2.0] {
        let c = CertifyParams { sigma, t0: 5.0, tmax: 100.0, stable_dim: Some(1), ..Default::default() };
        let certified = certify_uniform_contraction(&sys, &samples, &c).unwrap().is_certified();
        assert!(previous || !certified, "certified at {sigma} after failing a smaller sigma");
        previous = certified;
    }
}
