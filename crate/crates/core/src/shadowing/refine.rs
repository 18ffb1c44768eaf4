use nalgebra::{DMatrix, DVector};

use super::{cycle_exponents, summarise_exponents, PeriodicOrbit, RecurrentSegment, MONODROMY_LOG_SPREAD};
use crate::dynamics::{evolve_flow, evolve_tangent, flow_step, Geometry, Span, SystemKind, SystemSpec, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::linalg::{eigen_magnitudes, orthogonal_complement};

pub const MAX_NEWTON_ITER: usize = 50;

/// Largest cyclic system solved by dense LU; longer cycles use CGNR.
const DENSE_LIMIT: usize = 240;

const DIVERGED: f64 = 1e6;

/// Close a recurrent segment into a periodic orbit by Newton's method.
///
/// Maps use multiple shooting on the lifted arc: one unknown per iterate,
/// with the integer translates fixed by the seed, and the residual is the
/// largest one-step closing defect. Flows solve `γ(φ(τ, p)) = p` for the
/// point and the period together, where `γ` is the deck transformation
/// closest to the identity, with the phase fixed on the hyperplane through
/// the segment start orthogonal to the field.
pub fn refine_periodic(sys: &SystemSpec, seg: &RecurrentSegment, tol: f64) -> Result<PeriodicOrbit> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if seg.kind != sys.kind {
        return Err(Error::WrongKind {
            expected: match seg.kind {
                SystemKind::Map => "discrete map",
                SystemKind::Flow => "flow",
            },
            system: sys.name.clone(),
        });
    }
    sys.check_dim(&seg.start)?;
    match sys.kind {
        SystemKind::Map => refine_map(sys, seg, tol),
        SystemKind::Flow => refine_flow(sys, seg, tol),
    }
}

fn lattice_offsets(sys: &SystemSpec, w: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let m = w.len();
    (0..m)
        .map(|t| {
            let next = &w[(t + 1) % m];
            let image = sys.evaluate(&w[t]);
            match sys.geometry {
                Geometry::Torus => (image - next).map(|d| d.round()),
                _ => DVector::zeros(next.len()),
            }
        })
        .collect()
}

fn defects(sys: &SystemSpec, w: &[DVector<f64>], k: &[DVector<f64>]) -> Result<(Vec<DVector<f64>>, f64)> {
    let m = w.len();
    let mut worst = 0.0f64;
    let mut out = Vec::with_capacity(m);
    for t in 0..m {
        let f = sys.evaluate(&w[t]) - &k[t] - &w[(t + 1) % m];
        let norm = f.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite {
                at: w[t].iter().cloned().collect(),
            });
        }
        worst = worst.max(norm);
        out.push(f);
    }
    Ok((out, worst))
}

fn nearest_neutral(monodromy: &DMatrix<f64>) -> f64 {
    monodromy
        .clone()
        .complex_eigenvalues()
        .iter()
        .min_by(|a, b| (*a - 1.0).norm().total_cmp(&(*b - 1.0).norm()))
        .map(|z| z.norm())
        .unwrap_or(f64::NAN)
}

fn product(jacobians: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = jacobians[0].nrows();
    jacobians.iter().fold(DMatrix::identity(n, n), |acc, j| j * acc)
}

/// Solve `J_t x_t − x_{t+1} = b_t` (indices mod m).
fn solve_cyclic(jacobians: &[DMatrix<f64>], rhs: &[DVector<f64>]) -> Option<Vec<DVector<f64>>> {
    let m = jacobians.len();
    let n = jacobians[0].nrows();
    if m * n <= DENSE_LIMIT {
        let mut big = DMatrix::zeros(m * n, m * n);
        let mut b = DVector::zeros(m * n);
        for t in 0..m {
            let mut blk = big.view_mut((t * n, t * n), (n, n));
            blk += &jacobians[t];
            let u = (t + 1) % m;
            for i in 0..n {
                big[(t * n + i, u * n + i)] -= 1.0;
            }
            b.rows_mut(t * n, n).copy_from(&rhs[t]);
        }
        let lu = big.lu();
        if lu.u().diagonal().iter().any(|d| d.abs() < 1e-13) {
            return None;
        }
        let x = lu.solve(&b)?;
        return Some((0..m).map(|t| x.rows(t * n, n).into_owned()).collect());
    }
    Some(cgnr(jacobians, rhs))
}

fn cgnr(jacobians: &[DMatrix<f64>], rhs: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let m = jacobians.len();
    let apply = |x: &[DVector<f64>]| -> Vec<DVector<f64>> {
        (0..m).map(|t| &jacobians[t] * &x[t] - &x[(t + 1) % m]).collect()
    };
    let apply_t = |y: &[DVector<f64>]| -> Vec<DVector<f64>> {
        (0..m)
            .map(|t| jacobians[t].transpose() * &y[t] - &y[(t + m - 1) % m])
            .collect()
    };
    let dot = |a: &[DVector<f64>], b: &[DVector<f64>]| -> f64 { a.iter().zip(b).map(|(x, y)| x.dot(y)).sum() };
    let n = rhs[0].len();
    let mut x: Vec<DVector<f64>> = vec![DVector::zeros(n); m];
    let mut r: Vec<DVector<f64>> = rhs.to_vec();
    let mut z = apply_t(&r);
    let mut p = z.clone();
    let mut zz = dot(&z, &z);
    let target = 1e-28 * zz.max(f64::MIN_POSITIVE);
    for _ in 0..(20 * m * n).max(100) {
        if zz <= target {
            break;
        }
        let w = apply(&p);
        let alpha = zz / dot(&w, &w);
        for t in 0..m {
            x[t].axpy(alpha, &p[t], 1.0);
            r[t].axpy(-alpha, &w[t], 1.0);
        }
        z = apply_t(&r);
        let next = dot(&z, &z);
        let beta = next / zz;
        zz = next;
        for t in 0..m {
            p[t] = &z[t] + &p[t] * beta;
        }
    }
    x
}

fn minimal_period(geometry: &Geometry, cycle: &[DVector<f64>]) -> usize {
    let m = cycle.len();
    (1..m)
        .filter(|&d| m.is_multiple_of(d))
        .find(|&d| (0..m).all(|t| geometry.distance(&cycle[t], &cycle[(t + d) % m]) < 1e-8))
        .unwrap_or(m)
}

fn refine_map(sys: &SystemSpec, seg: &RecurrentSegment, tol: f64) -> Result<PeriodicOrbit> {
    let m = seg.arc.len();
    if m == 0 {
        return Err(Error::InvalidParameter("segment has no steps".into()));
    }
    let n = sys.dim();
    let mut w = seg.arc.clone();
    let k = lattice_offsets(sys, &w);
    if m * n <= DENSE_LIMIT {
        let jac: Vec<_> = w.iter().map(|x| sys.jacobian(x)).collect();
        let mono = product(&jac);
        let mu = nearest_neutral(&mono);
        let neutral = mono
            .clone()
            .complex_eigenvalues()
            .iter()
            .any(|z| (*z - 1.0).norm() < 1e-10);
        if neutral {
            return Err(Error::SingularNewton { multiplier: mu });
        }
    }
    let mut steps = 0;
    loop {
        let (f, res) = defects(sys, &w, &k)?;
        if res <= tol {
            break;
        }
        if steps == MAX_NEWTON_ITER || res > DIVERGED {
            return Err(Error::NewtonDivergence {
                iterations: steps,
                residual: res,
            });
        }
        let jac: Vec<_> = w.iter().map(|x| sys.jacobian(x)).collect();
        let rhs: Vec<_> = f.iter().map(|x| -x).collect();
        let delta = solve_cyclic(&jac, &rhs).ok_or_else(|| Error::SingularNewton {
            multiplier: nearest_neutral(&product(&jac)),
        })?;
        for (x, d) in w.iter_mut().zip(delta) {
            *x += d;
        }
        steps += 1;
    }
    log::debug!("map orbit of span {m} refined in {steps} Newton steps");

    let mut cycle: Vec<DVector<f64>> = w
        .into_iter()
        .map(|mut x| {
            sys.geometry.reduce(&mut x);
            x
        })
        .collect();
    let d = minimal_period(&sys.geometry, &cycle);
    cycle.truncate(d);
    finish_map_orbit(sys, cycle, tol)
}

/// Populate the spectrum and re-verify a map cycle by direct iteration.
pub(crate) fn finish_map_orbit(sys: &SystemSpec, cycle: Vec<DVector<f64>>, tol: f64) -> Result<PeriodicOrbit> {
    let d = cycle.len();
    let mut residual = 0.0f64;
    for t in 0..d {
        let image = sys.map_step(&cycle[t])?;
        residual = residual.max(sys.geometry.distance(&image, &cycle[(t + 1) % d]));
    }
    if !(residual <= tol) {
        return Err(Error::UnverifiedOrbit);
    }
    let jac: Vec<_> = cycle.iter().map(|x| sys.jacobian(x)).collect();
    let qr_exponents = cycle_exponents(&jac);
    let spread = qr_exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - qr_exponents.iter().cloned().fold(f64::INFINITY, f64::min);
    let period = d as f64;
    let (monodromy, exponents) = if spread.abs() * period < MONODROMY_LOG_SPREAD {
        let mono = product(&jac);
        let e = eigen_magnitudes(&mono).iter().map(|x| x.ln() / period).collect();
        (Some(mono), e)
    } else {
        (None, qr_exponents)
    };
    let (exponents, multipliers, index) = summarise_exponents(exponents, period);
    Ok(PeriodicOrbit {
        point: cycle[0].clone(),
        period,
        kind: SystemKind::Map,
        cycle,
        multipliers,
        exponents,
        index,
        residual,
        monodromy,
        verified: true,
        exact: None,
        geometry: sys.geometry.clone(),
    })
}

fn flow_defect(sys: &SystemSpec, p: &DVector<f64>, tau: f64) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let d = sys.dim();
    let (q, phi) = evolve_tangent(sys, p, &DMatrix::identity(d, d), Span::Time { t: tau, h: DEFAULT_STEP })?;
    let deck = sys.geometry.deck_towards(p, &q);
    let dg = deck.derivative(&sys.geometry, &q);
    let f = deck.apply(&sys.geometry, &q) - p;
    Ok((f, phi, dg, q))
}

fn refine_flow(sys: &SystemSpec, seg: &RecurrentSegment, tol: f64) -> Result<PeriodicOrbit> {
    let c = seg.start.clone();
    let d = sys.dim();
    let s0 = sys.velocity(&c)?;
    let nu = &s0 / s0.norm();
    let mut p = c.clone();
    let mut tau = seg.span;
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter("flow segment needs a positive span".into()));
    }
    let mut steps = 0;
    let (mut phi, mut dg);
    loop {
        let (f, phi_now, dg_now, q) = flow_defect(sys, &p, tau)?;
        phi = phi_now;
        dg = dg_now;
        let phase = nu.dot(&(&p - &c));
        let res = f.norm().max(phase.abs());
        if res <= tol {
            break;
        }
        if steps == MAX_NEWTON_ITER || res > DIVERGED || !res.is_finite() {
            return Err(Error::NewtonDivergence {
                iterations: steps,
                residual: res,
            });
        }
        let sq = sys.velocity(&q)?;
        let mut big = DMatrix::zeros(d + 1, d + 1);
        big.view_mut((0, 0), (d, d)).copy_from(&(&dg * &phi - DMatrix::identity(d, d)));
        big.view_mut((0, d), (d, 1)).copy_from(&(&dg * sq));
        big.view_mut((d, 0), (1, d)).copy_from(&nu.transpose());
        let mut rhs = DVector::zeros(d + 1);
        rhs.rows_mut(0, d).copy_from(&(-f));
        rhs[d] = -phase;
        let delta = big.lu().solve(&rhs).ok_or_else(|| Error::SingularNewton {
            multiplier: nearest_neutral(&transversal_monodromy(sys, &p, &(&dg * &phi)).unwrap_or_else(|_| DMatrix::identity(1, 1))),
        })?;
        p += delta.rows(0, d);
        tau += delta[d];
        if !(tau > 0.0) {
            return Err(Error::NewtonDivergence {
                iterations: steps + 1,
                residual: res,
            });
        }
        steps += 1;
    }
    log::debug!("flow orbit refined in {steps} Newton steps, period {tau}");
    let mono = transversal_monodromy(sys, &p, &(&dg * &phi))?;

    let mut point = p.clone();
    sys.geometry.reduce(&mut point);
    let end = evolve_flow(sys, &point, tau, DEFAULT_STEP)?;
    let residual = sys.geometry.distance(&point, &end);
    if !(residual <= tol) {
        return Err(Error::UnverifiedOrbit);
    }
    let samples = (tau / DEFAULT_STEP - 1e-9).ceil().max(1.0) as usize;
    let dt = tau / samples as f64;
    let mut cycle = Vec::with_capacity(samples);
    let mut state = point.clone();
    for _ in 0..samples {
        cycle.push(state.clone());
        flow_step(sys, &mut state, None, dt)?;
    }
    let exponents = eigen_magnitudes(&mono).iter().map(|m| m.ln() / tau).collect();
    let (exponents, multipliers, index) = summarise_exponents(exponents, tau);
    Ok(PeriodicOrbit {
        point,
        period: tau,
        kind: SystemKind::Flow,
        cycle,
        multipliers,
        exponents,
        index,
        residual,
        monodromy: Some(mono),
        verified: true,
        exact: None,
        geometry: sys.geometry.clone(),
    })
}

/// Return-map derivative on the hyperplane orthogonal to `S(p)`.
fn transversal_monodromy(sys: &SystemSpec, p: &DVector<f64>, full: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = orthogonal_complement(&sys.velocity(p)?);
    Ok(q.transpose() * full * &q)
}
