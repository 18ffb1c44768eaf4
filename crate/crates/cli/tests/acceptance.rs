//! End-to-end acceptance run: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use frameflow_core::dynamics::{
    evolve_tangent, lookup, suspend, Geometry, RegistryOptions, Span, SystemSpec, Trajectory,
};
use frameflow_core::frame::{qualitative_rate, transported_growth, transversal_project, FrameState};
use frameflow_core::hyperbolicity::{
    check_index_constancy, extremal_exponent_bounds, lyapunov_spectrum, realize_reordering, IndexVerdict,
    SpectrumParams,
};
use frameflow_core::measures::{bl_distance, DiscreteMeasure, Provenance};
use frameflow_core::shadowing::{enumerate_periodic_toral, refine_periodic, PeriodicOrbit, RecurrentSegment};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// `log((3 + √5)/2)`.
const CAT: f64 = 0.962_423_650_119_206_9;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_vec(x.to_vec())
}

fn frameflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frameflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Result<Value, String> {
    serde_json::from_slice(&out.stdout).map_err(|e| format!("bad JSON on stdout: {e}"))
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .map(|a| a.iter().filter_map(Value::as_f64).collect())
        .unwrap_or_default()
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn cat_matrix() -> DMatrix<i64> {
    DMatrix::from_row_slice(2, 2, &[2, 1, 1, 1])
}

fn cat_orbits(max_period: usize) -> Vec<PeriodicOrbit> {
    (1..=max_period)
        .flat_map(|m| {
            enumerate_periodic_toral(&cat_matrix(), m)
                .unwrap()
                .into_iter()
                .filter(move |o| o.steps() == m)
        })
        .collect()
}

fn random_pairs(sys: &SystemSpec, count: usize, seed: u64) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = sys.dim();
    (0..count)
        .map(|_| {
            let mut w = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            w[d - 1] = rng.random_range(0.0..0.9);
            (w, DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)))
        })
        .collect()
}

fn c1_cat_spectrum() -> Outcome {
    let start = Instant::now();
    let out = frameflow(&["spectrum", "--system", "cat", "--steps", "10000", "--format", "json"]);
    let elapsed = start.elapsed();
    check(out.status.code() == Some(0), format!("exit {:?}", out.status.code()))?;
    let e = floats(&json_of(&out)?["result"]["exponents"]);
    check(e.len() == 2, "expected two exponents")?;
    let err = (e[0] + CAT).abs().max((e[1] - CAT).abs());
    check(err < 1e-3, format!("exponents {e:?}"))?;
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("exponents {:.8}, {:.8} (error {err:.1e}) in {elapsed:.2?}", e[0], e[1]))
}

fn c2_growth_identity() -> Outcome {
    let opts = RegistryOptions::default();
    let cat = lookup("cat", &opts).unwrap();
    let systems = [
        lookup("rotation-flow", &opts).unwrap(),
        suspend(&cat, 1.0).unwrap().covering_flow(),
        lookup("suspension:diag:2,0.5", &opts).unwrap(),
    ];
    let mut worst = 0f64;
    for sys in &systems {
        for (w, x) in random_pairs(sys, 20, 5) {
            let g = transported_growth(sys, &w, &x, 10.0, 1e-3).map_err(|e| e.to_string())?;
            worst = worst.max((g.log_norm - g.rate_integral).abs() / g.time);
        }
    }
    check(worst <= 1e-6, format!("gap {worst:e}"))?;
    Ok(format!("largest gap {worst:.1e} over 3 flows x 20 samples"))
}

/// `log |Ψ_t x|` after one RK4 step, projected onto the transversal.
fn log_transversal_norm(sys: &SystemSpec, w: &DVector<f64>, x: &DVector<f64>, t: f64) -> f64 {
    let xm = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
    let (end, y) = evolve_tangent(sys, w, &xm, Span::Time { t, h: t.abs() }).unwrap();
    let s = sys.velocity(&end).unwrap();
    transversal_project(&s, &y.column(0).into_owned()).unwrap().norm().ln()
}

fn fd_error(sys: &SystemSpec, samples: &[(DVector<f64>, DVector<f64>)], h: f64) -> f64 {
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

fn c3_rate_formula() -> Outcome {
    let opts = RegistryOptions::default();
    let mut ratios = Vec::new();
    for name in ["rotation-flow", "suspension:diag:2,0.5"] {
        let sys = lookup(name, &opts).unwrap();
        let s = random_pairs(&sys, 100, 21);
        let ratio = fd_error(&sys, &s, 2e-2) / fd_error(&sys, &s, 1e-2);
        check((3.6..=4.4).contains(&ratio), format!("{name}: error ratio {ratio}"))?;
        ratios.push(format!("{name} {ratio:.3}"));
    }
    Ok(format!("error ratio on halving h: {}", ratios.join(", ")))
}

fn c4_periodic_points() -> Outcome {
    let sys = lookup("cat", &RegistryOptions::default()).unwrap();
    let mut counts = Vec::new();
    let mut worst = 0f64;
    for m in 1..=3 {
        let orbits = enumerate_periodic_toral(&cat_matrix(), m).map_err(|e| e.to_string())?;
        counts.push(orbits.iter().map(|o| o.cycle.len()).sum::<usize>());
        for exact in &orbits {
            for p in &exact.cycle {
                let seed = v(&[p[0] + 1e-3, p[1] - 1e-3]);
                let traj = Trajectory::orbit(&sys, &seed, exact.cycle.len()).unwrap();
                let seg = RecurrentSegment::from_trajectory(&traj, 0, exact.cycle.len()).unwrap();
                let orbit = refine_periodic(&sys, &seg, 1e-10).map_err(|e| e.to_string())?;
                worst = worst.max(sys.geometry.distance(&orbit.point, p));
            }
        }
    }
    check(counts == [1, 5, 16], format!("counts {counts:?}"))?;
    check(worst <= 1e-10, format!("Newton error {worst:e}"))?;
    let out = frameflow(&["periodic", "--system", "cat", "--max-period", "3", "--exact", "--format", "json"]);
    check(out.status.code() == Some(0), "periodic --exact failed")?;
    let fixed = &json_of(&out)?["result"]["summary"]["fixed_point_counts"];
    check(fixed["1"] == 1 && fixed["2"] == 5 && fixed["3"] == 16, format!("cli counts {fixed}"))?;
    Ok(format!("counts {counts:?}; Newton recovers all 22 points to {worst:.1e}"))
}

fn c5_extremal_bounds() -> Outcome {
    let sys = lookup("cat", &RegistryOptions::default()).unwrap();
    let bounds = extremal_exponent_bounds(&cat_orbits(3)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0f64;
    for seed in 0..20 {
        let w = v(&[rng.random(), rng.random()]);
        let est = lyapunov_spectrum(&sys, &w, 2, 10_000.0, &SpectrumParams { seed, ..Default::default() })
            .map_err(|e| e.to_string())?;
        worst = worst
            .max((est.exponents[0] - bounds.sigma_bound).abs())
            .max((est.exponents[1] - bounds.varsigma_bound).abs());
    }
    check(worst < 1e-3, format!("deviation {worst:e}"))?;
    Ok(format!(
        "bounds ({:.8}, {:.8}); 20 empirical spectra within {worst:.1e}",
        bounds.sigma_bound, bounds.varsigma_bound
    ))
}

fn c6_index_constancy() -> Outcome {
    let orbits = cat_orbits(8);
    let verdict = check_index_constancy(&orbits, 1e-6).map_err(|e| e.to_string())?;
    check(
        matches!(&verdict, IndexVerdict::Constant { index: 1, excluded, .. } if excluded.is_empty()),
        format!("{verdict:?}"),
    )?;
    let min = orbits
        .iter()
        .flat_map(|o| o.exponents.iter().map(|e| e.abs()))
        .fold(f64::INFINITY, f64::min);
    check(min >= 0.96, format!("min |exponent| {min}"))?;
    Ok(format!("{} orbits of period <= 8, index 1, min |exponent| {min:.8}", orbits.len()))
}

fn c7_certificate() -> Outcome {
    let out = frameflow(&[
        "certify", "--system", "cat", "--sigma", "0.96", "--t0", "10", "--tmax", "1000", "--format", "json",
    ]);
    check(out.status.code() == Some(0), format!("cat exit {:?}", out.status.code()))?;
    let worst = json_of(&out)?["result"]["stable"]["worst_window_average"]
        .as_f64()
        .ok_or("no worst window")?;
    check((worst + CAT).abs() <= 1e-9, format!("worst window {worst}"))?;
    let out = frameflow(&[
        "certify", "--system", "diag:1,2", "--sigma", "0.5", "--t0", "10", "--tmax", "100", "--format", "json",
    ]);
    check(out.status.code() == Some(4), format!("diag exit {:?}", out.status.code()))?;
    let doc = json_of(&out)?;
    let witness = &doc["result"]["verdict"]["witness"];
    check(witness["average"].as_f64().is_some(), "no stored witness")?;
    Ok(format!(
        "cat certified, worst window {worst:.10}; diag(1,2) refuted, witness average {}",
        witness["average"]
    ))
}

fn c8_bl_metric() -> Outcome {
    let mut worst = 0f64;
    for t in [0.1, 0.5, 1.0] {
        let a = DiscreteMeasure::dirac(v(&[0.0, 0.0]), Geometry::Euclidean);
        let b = DiscreteMeasure::dirac(v(&[0.0, t]), Geometry::Euclidean);
        let d = bl_distance(&a, &b).map_err(|e| e.to_string())?;
        worst = worst.max((d - 2.0 * t / (2.0 + t)).abs());
    }
    check(worst <= 1e-9, format!("Dirac error {worst:e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let random_measure = |rng: &mut ChaCha8Rng| {
        let k = rng.random_range(1..6);
        let atoms = (0..k).map(|_| v(&[rng.random(), rng.random()])).collect();
        let weights = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        DiscreteMeasure::new(atoms, weights, Geometry::Torus, Provenance::Custom).unwrap()
    };
    for _ in 0..100 {
        let (a, b, c) = (random_measure(&mut rng), random_measure(&mut rng), random_measure(&mut rng));
        let d = |x: &DiscreteMeasure, y: &DiscreteMeasure| bl_distance(x, y).unwrap();
        let (ab, ba, bc, ac) = (d(&a, &b), d(&b, &a), d(&b, &c), d(&a, &c));
        check(ab >= 0.0 && d(&a, &a) <= 1e-9, "positivity")?;
        check((ab - ba).abs() <= 1e-9, "symmetry")?;
        check(ac <= ab + bc + 1e-9, format!("triangle {ac} > {ab} + {bc}"))?;
    }
    Ok(format!("Dirac pairs within {worst:.1e}; axioms hold on 100 triples"))
}

fn c9_periodic_measures() -> Outcome {
    let out = frameflow(&[
        "measures", "--system", "cat", "--steps", "50000", "--state", "0.1234567,0.7654321",
        "--alphas", "0.2,0.1,0.05,0.03", "--format", "json",
    ]);
    check(out.status.code() == Some(0), format!("exit {:?}", out.status.code()))?;
    let doc = json_of(&out)?;
    let rows = doc["result"]["rows"].as_array().ok_or("no rows")?;
    let d: Vec<f64> = rows.iter().filter_map(|r| r["bl_distance"].as_f64()).collect();
    check(d.len() >= 4, format!("{} levels", d.len()))?;
    for w in d.windows(2) {
        check(w[1] <= 1.1 * w[0], format!("distances {d:?}"))?;
    }
    Ok(format!("{} levels, distances {:?}", d.len(), d.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>()))
}

fn c10_suspension() -> Outcome {
    let out = frameflow(&["suspend-spectrum", "--system", "cat", "--time", "1000", "--format", "json"]);
    check(out.status.code() == Some(0), format!("exit {:?}", out.status.code()))?;
    let doc = json_of(&out)?;
    let flow = floats(&doc["result"]["flow"]["exponents"]);
    let base = floats(&doc["result"]["base"]["exponents"]);
    let diff = flow.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(flow.len() == 2 && diff <= 5e-3, format!("flow {flow:?} vs base {base:?}"))?;
    Ok(format!("flow {flow:.5?} vs base {base:.5?} (difference {diff:.1e})"))
}

fn c11_reordering() -> Outcome {
    let diag = lookup("diag:2,0.5", &RegistryOptions::default()).unwrap();
    let traj = Trajectory::orbit(&diag, &v(&[0.0, 0.0]), 1).unwrap();
    let seg = RecurrentSegment::from_trajectory(&traj, 0, 1).unwrap();
    let diag_fixed = refine_periodic(&diag, &seg, 1e-12).map_err(|e| e.to_string())?;
    let cat_fixed = cat_orbits(1).remove(0);
    let mut worst = 0f64;
    for orbit in [&diag_fixed, &cat_fixed] {
        for perm in [[0usize, 1], [1, 0]] {
            let r = realize_reordering(orbit, &perm).map_err(|e| e.to_string())?;
            let err = r.achieved.iter().zip(&r.requested).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            check(r.realized && err <= 1e-8, format!("{perm:?}: {:?} vs {:?}", r.achieved, r.requested))?;
            check(r.requested == [orbit.exponents[perm[0]], orbit.exponents[perm[1]]], "requested order")?;
            worst = worst.max(err);
        }
    }
    Ok(format!("both orderings realized on both fixed points to {worst:.1e}"))
}

fn c12_determinism() -> Outcome {
    let runs = [
        vec!["certify", "--system", "cat-perturbed", "--tmax", "200", "--seed", "11"],
        vec!["spectrum", "--system", "rotation-flow", "--time", "5", "--seed", "3"],
        vec!["periodic", "--system", "cat", "--steps", "20000", "--max-period", "5", "--seed", "2"],
    ];
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = 0;
    for args in &runs {
        let mut payloads = Vec::new();
        for k in 0..2 {
            let dir = tmp.path().join(format!("{}-{k}", args[0]));
            let mut full = args.clone();
            let dir_s = dir.display().to_string();
            full.extend(["--output", &dir_s]);
            let out = frameflow(&full);
            check(matches!(out.status.code(), Some(0 | 4 | 5)), format!("{args:?}: exit {:?}", out.status.code()))?;
            check(Path::new(&dir.join(format!("{}.meta.json", args[0]))).exists(), "missing metadata")?;
            payloads.push(std::fs::read(dir.join(format!("{}.json", args[0]))).map_err(|e| e.to_string())?);
        }
        check(payloads[0] == payloads[1], format!("{} payloads differ", args[0]))?;
        bytes += payloads[0].len();
    }
    Ok(format!("3 commands, {bytes} bytes of JSON identical across runs"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("cat-map spectrum", c1_cat_spectrum),
        ("growth identity", c2_growth_identity),
        ("qualitative rate formula", c3_rate_formula),
        ("periodic-point counts", c4_periodic_points),
        ("periodic extremal bounds", c5_extremal_bounds),
        ("index constancy", c6_index_constancy),
        ("uniform contraction certificate", c7_certificate),
        ("bounded-Lipschitz metric", c8_bl_metric),
        ("periodic measure approximation", c9_periodic_measures),
        ("suspension invariance", c10_suspension),
        ("reordering realization", c11_reordering),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: panicked", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
