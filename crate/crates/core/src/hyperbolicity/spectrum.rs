use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::CLUSTER_TOLERANCE;
use crate::dynamics::{Span, SystemSpec, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::frame::{evolve_frame, FrameState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    /// Integration step for flows.
    pub h: f64,
    pub reorth_every: usize,
    /// Steps (maps) or time (flows) run before the averages start.
    pub burn_in: f64,
    pub seed: u64,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams {
            h: DEFAULT_STEP,
            reorth_every: 1,
            burn_in: 0.0,
            seed: 0,
        }
    }
}

/// Finite-time Lyapunov exponents with a convergence diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Ascending.
    pub exponents: Vec<f64>,
    /// `|average over [T/2, T] − average over [0, T]|` per exponent.
    pub drifts: Vec<f64>,
    /// Largest entry of `drifts`.
    pub tail_drift: f64,
    pub horizon: f64,
    pub frame_seed: u64,
    /// Sizes of the clusters of numerically equal exponents, in order.
    pub multiplicities: Vec<usize>,
}

impl SpectrumEstimate {
    /// Rows `index,exponent,tail_drift` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,exponent,tail_drift\n");
        for (i, (e, d)) in self.exponents.iter().zip(&self.drifts).enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, e, d);
        }
        out
    }
}

fn span(sys: &SystemSpec, amount: f64, h: f64) -> Span {
    if sys.is_flow() {
        Span::Time { t: amount, h }
    } else {
        Span::Steps(amount.round() as i64)
    }
}

/// Finite-time spectrum from a random orthonormal `k`-frame at `state`.
///
/// After the burn-in the growth sums are reset, then the frame runs for the
/// horizon in two halves so the tail average can be compared with the full
/// one. Flows use the transversal frame flow.
pub fn lyapunov_spectrum(
    sys: &SystemSpec,
    state: &DVector<f64>,
    k: usize,
    horizon: f64,
    params: &SpectrumParams,
) -> Result<SpectrumEstimate> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    if !(params.burn_in >= 0.0) {
        return Err(Error::InvalidParameter("burn-in must be nonnegative".into()));
    }
    let mut fs = FrameState::random(sys, state.clone(), k, params.seed)?;
    if params.burn_in > 0.0 {
        fs = evolve_frame(sys, &fs, span(sys, params.burn_in, params.h), params.reorth_every)?;
        fs.log_growth.iter_mut().for_each(|g| *g = 0.0);
        fs.rate_integral.iter_mut().for_each(|g| *g = 0.0);
        fs.elapsed = 0.0;
    }
    let first = if sys.is_flow() {
        horizon / 2.0
    } else {
        if horizon < 1.0 || horizon.fract() != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "map horizon must be a positive integer, got {horizon}"
            )));
        }
        (horizon / 2.0).floor()
    };
    let mid = evolve_frame(sys, &fs, span(sys, first, params.h), params.reorth_every)?;
    let end = evolve_frame(sys, &mid, span(sys, horizon - first, params.h), params.reorth_every)?;
    let total = end.elapsed;
    let tail = end.elapsed - mid.elapsed;
    let mut pairs: Vec<(f64, f64)> = end
        .log_growth
        .iter()
        .zip(&mid.log_growth)
        .map(|(g2, g1)| {
            let full = g2 / total;
            let late = if tail > 0.0 { (g2 - g1) / tail } else { full };
            (full, (late - full).abs())
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let exponents: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let drifts: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut multiplicities = Vec::new();
    for (i, e) in exponents.iter().enumerate() {
        if i > 0 && (e - exponents[i - 1]).abs() <= CLUSTER_TOLERANCE {
            *multiplicities.last_mut().expect("nonempty") += 1;
        } else {
            multiplicities.push(1);
        }
    }
    Ok(SpectrumEstimate {
        tail_drift: drifts.iter().cloned().fold(0.0, f64::max),
        exponents,
        drifts,
        horizon: total,
        frame_seed: params.seed,
        multiplicities,
    })
}
