use frameflow_core::dynamics::{evolve_tangent, lookup, suspend, RegistryOptions, Span, SystemSpec};
use frameflow_core::frame::{
    evolve_frame, qualitative_rate, transported_growth, transversal_project, FrameState,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// `log |Ψ_t x|` by one RK4 step of the variational equation, projected.
fn log_transversal_norm(sys: &SystemSpec, w: &DVector<f64>, x: &DVector<f64>, t: f64) -> f64 {
    let xm = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
    let (end, y) = evolve_tangent(sys, w, &xm, Span::Time { t, h: t.abs() }).unwrap();
    let s = sys.velocity(&end).unwrap();
    transversal_project(&s, &y.column(0).into_owned()).unwrap().norm().ln()
}

fn fd_errors(sys: &SystemSpec, samples: &[(DVector<f64>, DVector<f64>)], h: f64) -> f64 {
    samples
        .iter()
        .map(|(w, x)| {
            let fs = FrameState::new(sys, w.clone(), DMatrix::from_column_slice(x.len(), 1, x.as_slice())).unwrap();
            let u = fs.columns.column(0).into_owned();
            let analytic = qualitative_rate(sys, &fs, 0).unwrap().value;
            let fd = (log_transversal_norm(sys, w, &u, h) - log_transversal_norm(sys, w, &u, -h)) / (2.0 * h);
            (fd - analytic).abs()
        })
        .sum()
}

fn samples(sys: &SystemSpec, count: usize, seed: u64) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut w = random_vec(&mut rng, sys.dim(), 1.0);
            let d = sys.dim();
            w[d - 1] = rng.random_range(0.0..0.9);
            (w, random_vec(&mut rng, d, 1.0))
        })
        .collect()
}

#[test]
fn analytic_rate_matches_central_difference_at_second_order() {
    let opts = RegistryOptions::default();
    let systems = [
        lookup("rotation-flow", &opts).unwrap(),
        lookup("suspension:diag:2,0.5", &opts).unwrap(),
    ];
    for sys in &systems {
        let s = samples(sys, 100, 21);
        let coarse = fd_errors(sys, &s, 2e-2);
        let fine = fd_errors(sys, &s, 1e-2);
        let ratio = coarse / fine;
        assert!((3.6..=4.4).contains(&ratio), "{}: ratio {ratio}", sys.name);
        assert!(fine / 100.0 < 1e-3, "{}: mean error {}", sys.name, fine / 100.0);
    }
}

#[test]
fn growth_identity_on_linear_fields() {
    let opts = RegistryOptions::default();
    let cat = lookup("cat", &opts).unwrap();
    let systems = [
        lookup("rotation-flow", &opts).unwrap(),
        suspend(&cat, 1.0).unwrap().covering_flow(),
        lookup("suspension:diag:2,0.5", &opts).unwrap(),
    ];
    for sys in &systems {
        for (w, x) in samples(sys, 20, 5) {
            let g = transported_growth(sys, &w, &x, 10.0, 1e-3).unwrap();
            let gap = (g.log_norm - g.rate_integral).abs() / g.time;
            assert!(gap <= 1e-6, "{}: {gap}", sys.name);
        }
    }
}

#[test]
fn columns_stay_orthonormal_and_transversal() {
    let opts = RegistryOptions::default();
    let sys = lookup("suspension:cat", &opts).unwrap();
    let mut fs = FrameState::random(&sys, DVector::from_vec(vec![0.3, 0.1, 0.2]), 2, 4).unwrap();
    for _ in 0..20 {
        fs = evolve_frame(&sys, &fs, Span::Time { t: 0.5, h: 1e-3 }, 3).unwrap();
        let gram = fs.columns.transpose() * &fs.columns;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-10);
        let s = sys.velocity(&fs.base).unwrap();
        for c in fs.columns.column_iter() {
            assert!(c.dot(&s).abs() / s.norm() < 1e-10);
        }
    }
}

#[test]
fn evolution_is_deterministic() {
    let opts = RegistryOptions::default();
    let sys = lookup("rotation-flow", &opts).unwrap();
    let w = DVector::from_vec(vec![0.2, 0.1, 0.0]);
    let a = evolve_frame(&sys, &FrameState::random(&sys, w.clone(), 2, 9).unwrap(), Span::Time { t: 2.0, h: 1e-3 }, 4).unwrap();
    let b = evolve_frame(&sys, &FrameState::random(&sys, w, 2, 9).unwrap(), Span::Time { t: 2.0, h: 1e-3 }, 4).unwrap();
    assert_eq!(a.log_growth, b.log_growth);
    assert_eq!(a.columns, b.columns);
}
