//! Recurrent orbit segments, their refinement to true periodic orbits,
//! shadowing checks and exact periodic points of linear toral maps.

mod refine;
mod toral;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Geometry, SystemKind, Trajectory};
use crate::error::{Error, Result};

pub use refine::{refine_periodic, MAX_NEWTON_ITER};
pub use toral::{enumerate_periodic_toral, ExactPoint};

/// An orbit arc whose endpoints nearly coincide.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrentSegment {
    pub start: DVector<f64>,
    /// Index of `start` in the source trajectory.
    pub start_index: usize,
    /// Steps (maps) or time (flows) between the endpoints.
    pub span: f64,
    /// Distance between the endpoints.
    pub gap: f64,
    pub end: DVector<f64>,
    /// Trajectory samples from `start` up to, not including, `end`.
    #[serde(skip)]
    pub arc: Vec<DVector<f64>>,
    pub kind: SystemKind,
    #[serde(skip)]
    pub geometry: Geometry,
}

impl RecurrentSegment {
    /// The arc of `traj` between sample indices `i < j`.
    pub fn from_trajectory(traj: &Trajectory, i: usize, j: usize) -> Result<Self> {
        if i >= j || j >= traj.len() {
            return Err(Error::InvalidParameter(format!(
                "segment [{i}, {j}] outside a trajectory of {} samples",
                traj.len()
            )));
        }
        Ok(RecurrentSegment {
            start: traj.states[i].clone(),
            start_index: i,
            span: traj.times[j] - traj.times[i],
            gap: traj.geometry.distance(&traj.states[i], &traj.states[j]),
            end: traj.states[j].clone(),
            arc: traj.states[i..j].to_vec(),
            kind: if traj.step.is_some() {
                SystemKind::Flow
            } else {
                SystemKind::Map
            },
            geometry: traj.geometry.clone(),
        })
    }
}

/// A verified periodic orbit with its transversal spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub point: DVector<f64>,
    /// Minimal period: steps for maps, return time for flows.
    pub period: f64,
    pub kind: SystemKind,
    /// One period of the orbit: every iterate for maps, equally spaced
    /// samples for flows.
    pub cycle: Vec<DVector<f64>>,
    /// Magnitudes of the (transversal) monodromy eigenvalues, ascending.
    pub multipliers: Vec<f64>,
    /// `log(multiplier) / period`, ascending.
    pub exponents: Vec<f64>,
    /// Number of negative exponents.
    pub index: usize,
    /// Largest one-step closing defect along the cycle.
    pub residual: f64,
    /// (Transversal) monodromy matrix when it is representable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monodromy: Option<DMatrix<f64>>,
    pub verified: bool,
    /// Rational coordinates of `point` when known exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactPoint>,
    pub geometry: Geometry,
}

impl PeriodicOrbit {
    /// Period as a step count (maps).
    pub fn steps(&self) -> usize {
        self.period.round() as usize
    }
}

/// Monodromy is only materialised when its entries stay well inside the
/// floating-point range.
pub(crate) const MONODROMY_LOG_SPREAD: f64 = 25.0;

pub(crate) fn summarise_exponents(mut exponents: Vec<f64>, period: f64) -> (Vec<f64>, Vec<f64>, usize) {
    exponents.sort_by(f64::total_cmp);
    let multipliers = exponents.iter().map(|e| (e * period).exp()).collect();
    let index = exponents.iter().filter(|&&e| e < 0.0).count();
    (exponents, multipliers, index)
}

/// Lyapunov exponents of the cocycle `J_{m-1} ⋯ J_0` per step, by periodic
/// QR iteration around the cycle.
pub(crate) fn cycle_exponents(jacobians: &[DMatrix<f64>]) -> Vec<f64> {
    let m = jacobians.len();
    let n = jacobians[0].nrows();
    let rounds = (400 / m).clamp(4, 64);
    let mut q = DMatrix::<f64>::identity(n, n);
    let mut sums = vec![0.0; n];
    for round in 0..rounds {
        for j in jacobians {
            let qr = (j * &q).qr();
            let r = qr.r();
            q = qr.q();
            // Fix signs so that diag(R) > 0.
            for i in 0..n {
                if r[(i, i)] < 0.0 {
                    q.column_mut(i).neg_mut();
                }
                if round >= rounds / 2 {
                    sums[i] += r[(i, i)].abs().ln();
                }
            }
        }
    }
    let counted = (rounds - rounds / 2) * m;
    sums.iter().map(|s| s / counted as f64).collect()
}

/// All `alpha`-recurrences of the trajectory with span in
/// `[min_span, max_span]`, ordered by span.
///
/// For every span only the start with the smallest gap is kept. Flow spans
/// are bucketed into windows of ten samples and only local minima of the gap
/// along the end index are considered.
pub fn find_recurrences(
    traj: &Trajectory,
    alpha: f64,
    min_span: f64,
    max_span: Option<f64>,
) -> Result<Vec<RecurrentSegment>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let n = traj.len();
    let max_span = max_span.unwrap_or(f64::INFINITY);
    let is_flow = traj.step.is_some();
    let bucket = |span: f64| -> usize {
        match traj.step {
            Some(h) => (span / (10.0 * h)).round() as usize,
            None => span.round() as usize,
        }
    };
    let mut best: std::collections::BTreeMap<usize, (f64, usize, usize)> = Default::default();
    for i in 0..n {
        let gaps_from = |j: usize| traj.geometry.distance(&traj.states[i], &traj.states[j]);
        for j in i + 1..n {
            let span = traj.times[j] - traj.times[i];
            if span > max_span {
                break;
            }
            if span < min_span {
                continue;
            }
            let gap = gaps_from(j);
            if gap >= alpha {
                continue;
            }
            if is_flow {
                let left = if j > i + 1 { gaps_from(j - 1) } else { f64::INFINITY };
                let right = if j + 1 < n { gaps_from(j + 1) } else { f64::INFINITY };
                if gap > left || gap > right {
                    continue;
                }
            }
            let key = bucket(span);
            if best.get(&key).is_none_or(|b| gap < b.0) {
                best.insert(key, (gap, i, j));
            }
        }
    }
    let mut out = best
        .into_values()
        .map(|(_, i, j)| RecurrentSegment::from_trajectory(traj, i, j))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.span.total_cmp(&b.span).then(a.gap.total_cmp(&b.gap)));
    Ok(out)
}

/// The first sample after `start + min_span` within `alpha` of the sample at
/// `start` (for flows: the local minimum of the gap inside that first hit).
pub fn first_return(
    traj: &Trajectory,
    start: usize,
    alpha: f64,
    min_span: f64,
) -> Result<Option<RecurrentSegment>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if start >= traj.len() {
        return Ok(None);
    }
    let x = &traj.states[start];
    let t0 = traj.times[start];
    let dist = |j: usize| traj.geometry.distance(x, &traj.states[j]);
    for j in start + 1..traj.len() {
        if traj.times[j] - t0 < min_span || dist(j) >= alpha {
            continue;
        }
        let mut k = j;
        if traj.step.is_some() {
            while k + 1 < traj.len() && dist(k + 1) < dist(k) {
                k += 1;
            }
        }
        return RecurrentSegment::from_trajectory(traj, start, k).map(Some);
    }
    Ok(None)
}

/// Outcome of a shadowing check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShadowReport {
    pub shadows: bool,
    pub worst_offset: f64,
    pub worst_time: f64,
}

/// Compare the trajectory with the periodic orbit replayed cyclically from
/// its stored cycle. For flows the trajectory sampling is matched to the
/// nearest cycle sample.
pub fn verify_shadow(traj: &Trajectory, orbit: &PeriodicOrbit, eps: f64) -> ShadowReport {
    let m = orbit.cycle.len();
    let mut report = ShadowReport {
        shadows: true,
        worst_offset: 0.0,
        worst_time: 0.0,
    };
    for (state, &t) in traj.states.iter().zip(&traj.times) {
        let k = match orbit.kind {
            SystemKind::Map => (t.round() as usize) % m,
            SystemKind::Flow => {
                let phase = (t - traj.times[0]).rem_euclid(orbit.period) / orbit.period;
                ((phase * m as f64).round() as usize) % m
            }
        };
        let d = traj.geometry.distance(state, &orbit.cycle[k]);
        if d > report.worst_offset {
            report.worst_offset = d;
            report.worst_time = t;
        }
    }
    report.shadows = report.worst_offset < eps;
    report
}
