use nalgebra::{DMatrix, DVector};

use super::{check_finite, Geometry, SystemSpec};
use crate::error::{Error, Result};

/// How far to evolve: a number of map iterates or a flow time with step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Span {
    Steps(i64),
    Time { t: f64, h: f64 },
}

/// `g^n(w)`; negative `n` uses the explicit inverse.
pub fn evolve_map(sys: &SystemSpec, w: &DVector<f64>, n: i64) -> Result<DVector<f64>> {
    sys.require_map()?;
    sys.check_dim(w)?;
    let mut state = w.clone();
    for _ in 0..n.unsigned_abs() {
        state = if n > 0 {
            sys.map_step(&state)?
        } else {
            sys.map_step_back(&state)?
        };
    }
    Ok(state)
}

fn step_count(t: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("step h must be positive, got {h}")));
    }
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite, got {t}")));
    }
    Ok((t.abs() / h).ceil() as usize)
}

/// One classical RK4 step of the extended system `w' = S(w)`, `X' = S'(w) X`
/// followed by reduction to the geometry. Tangent columns are carried by the
/// derivative of the reduction when it is not the identity.
pub fn flow_step(
    sys: &SystemSpec,
    w: &mut DVector<f64>,
    tangent: Option<&mut DMatrix<f64>>,
    dt: f64,
) -> Result<()> {
    let half = 0.5 * dt;
    match tangent {
        None => {
            let k1 = sys.velocity(w)?;
            let k2 = sys.velocity(&(&*w + &k1 * half))?;
            let k3 = sys.velocity(&(&*w + &k2 * half))?;
            let k4 = sys.velocity(&(&*w + &k3 * dt))?;
            *w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            check_finite(w)?;
            sys.geometry.reduce(w);
        }
        Some(x) => {
            let w1 = w.clone();
            let k1 = sys.velocity(&w1)?;
            let l1 = sys.jacobian(&w1) * &*x;
            let w2 = &w1 + &k1 * half;
            let k2 = sys.velocity(&w2)?;
            let l2 = sys.jacobian(&w2) * (&*x + &l1 * half);
            let w3 = &w1 + &k2 * half;
            let k3 = sys.velocity(&w3)?;
            let l3 = sys.jacobian(&w3) * (&*x + &l2 * half);
            let w4 = &w1 + &k3 * dt;
            let k4 = sys.velocity(&w4)?;
            let l4 = sys.jacobian(&w4) * (&*x + &l3 * dt);
            *w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            *x += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (dt / 6.0);
            check_finite(w)?;
            if let Some(deck) = sys.geometry.reduce(w) {
                *x = deck * &*x;
            }
        }
    }
    Ok(())
}

/// `φ(t, w)` by RK4 composed `ceil(|t|/h)` times with equal sub-steps.
pub fn evolve_flow(sys: &SystemSpec, w: &DVector<f64>, t: f64, h: f64) -> Result<DVector<f64>> {
    sys.require_flow()?;
    sys.check_dim(w)?;
    let n = step_count(t, h)?;
    let mut state = w.clone();
    if n == 0 {
        return Ok(state);
    }
    let dt = t / n as f64;
    for _ in 0..n {
        flow_step(sys, &mut state, None, dt)?;
    }
    Ok(state)
}

/// Evolve a state together with tangent vectors (the columns of `x`).
///
/// Flows integrate the extended system; maps apply the chained Jacobian,
/// using the explicit inverse for negative step counts.
pub fn evolve_tangent(
    sys: &SystemSpec,
    w: &DVector<f64>,
    x: &DMatrix<f64>,
    span: Span,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    sys.check_dim(w)?;
    if x.nrows() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: x.nrows(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            at: x.iter().cloned().collect(),
        });
    }
    let mut state = w.clone();
    let mut tangent = x.clone();
    match span {
        Span::Steps(n) => {
            sys.require_map()?;
            for _ in 0..n.unsigned_abs() {
                if n > 0 {
                    tangent = sys.jacobian(&state) * tangent;
                    state = sys.map_step(&state)?;
                } else {
                    tangent = sys.inverse_jacobian(&state)? * tangent;
                    state = sys.map_step_back(&state)?;
                }
            }
        }
        Span::Time { t, h } => {
            sys.require_flow()?;
            let n = step_count(t, h)?;
            if n > 0 {
                let dt = t / n as f64;
                for _ in 0..n {
                    flow_step(sys, &mut state, Some(&mut tangent), dt)?;
                }
            }
        }
    }
    Ok((state, tangent))
}

/// A sampled orbit: iterates of a map or fixed-step samples of a flow.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub times: Vec<f64>,
    /// Integration step for flows.
    pub step: Option<f64>,
    pub geometry: Geometry,
}

impl Trajectory {
    /// `w, g(w), ..., g^n(w)`.
    pub fn orbit(sys: &SystemSpec, w: &DVector<f64>, n: usize) -> Result<Self> {
        sys.require_map()?;
        sys.check_dim(w)?;
        let mut states = Vec::with_capacity(n + 1);
        let mut state = w.clone();
        states.push(state.clone());
        for _ in 0..n {
            state = sys.map_step(&state)?;
            states.push(state.clone());
        }
        Ok(Trajectory {
            times: (0..=n).map(|k| k as f64).collect(),
            states,
            step: None,
            geometry: sys.geometry.clone(),
        })
    }

    /// Samples `φ(k h', w)` for `k = 0..=N`, `N = ceil(t/h)`, `h' = t/N`.
    pub fn integrate(sys: &SystemSpec, w: &DVector<f64>, t: f64, h: f64) -> Result<Self> {
        sys.require_flow()?;
        sys.check_dim(w)?;
        if t < 0.0 {
            return Err(Error::InvalidParameter("trajectory time must be nonnegative".into()));
        }
        let n = step_count(t, h)?;
        let dt = if n > 0 { t / n as f64 } else { h };
        let mut states = Vec::with_capacity(n + 1);
        let mut state = w.clone();
        states.push(state.clone());
        for _ in 0..n {
            flow_step(sys, &mut state, None, dt)?;
            states.push(state.clone());
        }
        Ok(Trajectory {
            times: (0..=n).map(|k| k as f64 * dt).collect(),
            states,
            step: Some(dt),
            geometry: sys.geometry.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}
