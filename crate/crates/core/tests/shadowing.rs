use frameflow_core::dynamics::{lookup, RegistryOptions, Trajectory};
use frameflow_core::shadowing::{
    enumerate_periodic_toral, find_recurrences, refine_periodic, verify_shadow, PeriodicOrbit, RecurrentSegment,
};
use frameflow_core::Error;
use nalgebra::{DMatrix, DVector};

fn cat_matrix() -> DMatrix<i64> {
    DMatrix::from_row_slice(2, 2, &[2, 1, 1, 1])
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_vec(x.to_vec())
}

/// `|det(A^m − I)|` for a 2×2 integer matrix, by direct expansion.
fn det_oracle(m: usize) -> i64 {
    let a = cat_matrix();
    let mut p = DMatrix::<i64>::identity(2, 2);
    for _ in 0..m {
        p = &a * p;
    }
    ((p[(0, 0)] - 1) * (p[(1, 1)] - 1) - p[(0, 1)] * p[(1, 0)]).abs()
}

#[test]
fn enumeration_counts_match_determinants() {
    for m in 1..=8 {
        let orbits = enumerate_periodic_toral(&cat_matrix(), m).unwrap();
        let points: usize = orbits.iter().map(|o| o.cycle.len()).sum();
        assert_eq!(points as i64, det_oracle(m), "m = {m}");
        for o in &orbits {
            assert_eq!(m % o.cycle.len(), 0);
            assert!(o.residual < 1e-12);
        }
    }
}

#[test]
fn enumerated_points_solve_the_congruence() {
    for m in 1..=4 {
        let a = cat_matrix();
        let mut p = DMatrix::<i64>::identity(2, 2);
        for _ in 0..m {
            p = &a * p;
        }
        for o in enumerate_periodic_toral(&a, m).unwrap() {
            let e = o.exact.unwrap();
            let r = DVector::from_vec(e.numerators.clone());
            let image = &p * &r - &r;
            assert!(image.iter().all(|x| x % e.denominator == 0), "{e:?}");
        }
    }
}

#[test]
fn newton_recovers_every_short_cat_orbit() {
    let sys = lookup("cat", &RegistryOptions::default()).unwrap();
    for m in 1..=3 {
        for exact in enumerate_periodic_toral(&cat_matrix(), m).unwrap() {
            for start in &exact.cycle {
                let seed = v(&[start[0] + 1e-3, start[1] - 1e-3]);
                let traj = Trajectory::orbit(&sys, &seed, exact.cycle.len()).unwrap();
                let seg = RecurrentSegment::from_trajectory(&traj, 0, exact.cycle.len()).unwrap();
                let orbit = refine_periodic(&sys, &seg, 1e-10).unwrap();
                assert_eq!(orbit.period, exact.period);
                assert!(sys.geometry.distance(&orbit.point, start) < 1e-10);
                assert!(orbit.residual <= 1e-10);
            }
        }
    }
}

#[test]
fn index_is_constant_on_cat_orbits() {
    for m in 1..=8 {
        for o in enumerate_periodic_toral(&cat_matrix(), m).unwrap() {
            assert_eq!(o.index, 1);
            let min = o.exponents.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
            assert!(min >= 0.9624 - 1e-9);
        }
    }
}

#[test]
fn periodic_orbit_recurs_with_its_period() {
    let sys = lookup("cat", &RegistryOptions::default()).unwrap();
    let orbit = &enumerate_periodic_toral(&cat_matrix(), 3).unwrap()[3];
    let traj = Trajectory::orbit(&sys, &orbit.point, 9).unwrap();
    let found = find_recurrences(&traj, 0.01, 1.0, None).unwrap();
    assert_eq!(found[0].span, orbit.period);
    assert!(found[0].gap < 1e-12);
}

#[test]
fn cat_orbit_has_recurrences() {
    let sys = lookup("cat", &RegistryOptions::default()).unwrap();
    let traj = Trajectory::orbit(&sys, &v(&[0.2718, 0.3141]), 10_000).unwrap();
    let found = find_recurrences(&traj, 1e-2, 1.0, None).unwrap();
    assert!(!found.is_empty());
    // Direct scan oracle for the shortest span.
    let shortest = (1..10_000usize)
        .find(|&s| (0..=10_000 - s).any(|i| traj.geometry.distance(&traj.states[i], &traj.states[i + s]) < 1e-2))
        .unwrap();
    assert_eq!(found[0].span as usize, shortest);
}

#[test]
fn shadowing_of_a_nearby_start() {
    let sys = lookup("cat", &RegistryOptions::default()).unwrap();
    let orbit: PeriodicOrbit = enumerate_periodic_toral(&cat_matrix(), 5).unwrap().pop().unwrap();
    let m = orbit.steps();
    let start = &orbit.point + v(&[1e-9, 0.0]);
    let traj = Trajectory::orbit(&sys, &start, m).unwrap();
    let report = verify_shadow(&traj, &orbit, 1e-6);
    assert!(report.shadows);
    let lambda = (3.0 + 5f64.sqrt()) / 2.0;
    assert!(report.worst_offset <= lambda.powi(m as i32) * 1e-9 * (1.0 + 1e-6));
    let strict = verify_shadow(&traj, &orbit, report.worst_offset * 0.5);
    assert!(!strict.shadows);
    assert_eq!(strict.worst_offset, report.worst_offset);
    assert!(verify_shadow(&Trajectory::orbit(&sys, &orbit.point, m).unwrap(), &orbit, 1e-12).shadows);
}

#[test]
fn linear_shadowing_obeys_a_priori_bound() {
    let sys = lookup("cat", &RegistryOptions::default()).unwrap();
    let traj = Trajectory::orbit(&sys, &v(&[0.577, 0.211]), 5_000).unwrap();
    let lambda = (3.0 + 5f64.sqrt()) / 2.0;
    for seg in find_recurrences(&traj, 0.05, 2.0, Some(40.0)).unwrap().into_iter().take(5) {
        let orbit = refine_periodic(&sys, &seg, 1e-10).unwrap();
        let end = seg.start_index + seg.span as usize;
        let arc = Trajectory {
            states: traj.states[seg.start_index..end].to_vec(),
            times: (0..seg.span as usize).map(|t| t as f64).collect(),
            step: None,
            geometry: traj.geometry.clone(),
        };
        if orbit.steps() != seg.span as usize {
            continue;
        }
        let report = verify_shadow(&arc, &orbit, 1.0);
        assert!(report.worst_offset <= seg.gap * lambda / (lambda - 1.0) * 1.0001, "{report:?} gap {}", seg.gap);
    }
}

#[test]
fn non_hyperbolic_period_is_an_error() {
    let id = DMatrix::from_row_slice(2, 2, &[1i64, 0, 0, 1]);
    assert_eq!(enumerate_periodic_toral(&id, 3).unwrap_err(), Error::NonHyperbolicPeriod { period: 3 });
}

#[test]
fn orbit_json_fields() {
    let o = &enumerate_periodic_toral(&cat_matrix(), 2).unwrap()[1];
    let value = serde_json::to_value(o).unwrap();
    for key in ["point", "period", "multipliers", "exponents", "index", "residual"] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    let back: PeriodicOrbit = serde_json::from_value(value).unwrap();
    assert_eq!(&back, o);
}
