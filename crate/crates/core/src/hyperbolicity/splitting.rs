use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{lyapunov_spectrum, SpectrumParams, ZERO_THRESHOLD};
use crate::dynamics::SystemSpec;
use crate::error::{Error, Result};
use crate::frame::gram_schmidt_matrix;
use crate::linalg::min_principal_angle;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplittingParams {
    /// Steps run from the past (unstable part) and from the future (stable part).
    pub steps: usize,
    /// Dimension of the stable part; read off the spectrum when absent.
    pub stable_dim: Option<usize>,
    pub zero_threshold: f64,
    pub seed: u64,
}

impl Default for SplittingParams {
    fn default() -> Self {
        SplittingParams {
            steps: 50,
            stable_dim: None,
            zero_threshold: ZERO_THRESHOLD,
            seed: 0,
        }
    }
}

/// Stable and unstable subspaces at a point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplittingEstimate {
    pub base: DVector<f64>,
    /// Orthonormal columns spanning the stable subspace.
    pub stable_frame: DMatrix<f64>,
    /// Orthonormal columns spanning the unstable subspace.
    pub unstable_frame: DMatrix<f64>,
    /// Smallest principal angle between the two.
    pub angle: f64,
}

fn random_frame(n: usize, k: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
    Ok(gram_schmidt_matrix(&x)?.0)
}

/// Transport a `k`-frame along `jacobians` in order, reorthonormalising at
/// every step.
fn push(frame: DMatrix<f64>, jacobians: impl Iterator<Item = Result<DMatrix<f64>>>) -> Result<DMatrix<f64>> {
    let mut q = frame;
    for j in jacobians {
        q = gram_schmidt_matrix(&(j? * q))?.0;
    }
    Ok(q)
}

/// Stable subspace at every point of `orbit`, obtained by pulling a random
/// frame back from `extra` steps beyond its end with the inverse derivative.
pub(crate) fn stable_frames_along(
    sys: &SystemSpec,
    orbit: &[DVector<f64>],
    dim: usize,
    extra: usize,
    seed: u64,
) -> Result<Vec<DMatrix<f64>>> {
    let n = sys.dim();
    let mut tail = Vec::with_capacity(extra + 1);
    let mut x = orbit.last().cloned().ok_or(Error::Empty)?;
    tail.push(x.clone());
    for _ in 0..extra {
        x = sys.map_step(&x)?;
        tail.push(x.clone());
    }
    // Inverse derivative at g(y) maps tangent vectors at g(y) back to y.
    let q = push(
        random_frame(n, dim, seed)?,
        tail.iter().skip(1).rev().map(|w| sys.inverse_jacobian(w)),
    )?;
    let mut frames = vec![q; orbit.len()];
    for t in (0..orbit.len() - 1).rev() {
        let j = sys.inverse_jacobian(&orbit[t + 1])?;
        frames[t] = gram_schmidt_matrix(&(j * &frames[t + 1]))?.0;
    }
    Ok(frames)
}

/// Stable and unstable subspaces at `x` from frames transported forward from
/// `g^{-T}(x)` (unstable) and backward from `g^{T}(x)` (stable).
pub fn oseledets_splitting(sys: &SystemSpec, x: &DVector<f64>, params: &SplittingParams) -> Result<SplittingEstimate> {
    sys.require_map()?;
    if !sys.has_inverse() {
        return Err(Error::MissingInverse { system: sys.name.clone() });
    }
    sys.check_dim(x)?;
    let n = sys.dim();
    let t = params.steps.max(1);
    let stable_dim = match params.stable_dim {
        Some(d) => d,
        None => {
            let est = lyapunov_spectrum(
                sys,
                x,
                n,
                (4 * t).max(200) as f64,
                &SpectrumParams { seed: params.seed, burn_in: t as f64, ..Default::default() },
            )?;
            if let Some(e) = est.exponents.iter().find(|e| e.abs() < params.zero_threshold) {
                return Err(Error::Inconclusive(format!(
                    "exponent {e} lies within {} of zero",
                    params.zero_threshold
                )));
            }
            est.exponents.iter().filter(|&&e| e < 0.0).count()
        }
    };
    if stable_dim == 0 || stable_dim >= n {
        return Err(Error::Inconclusive(format!(
            "stable dimension {stable_dim} leaves no splitting of a {n}-dimensional space"
        )));
    }

    let mut past = Vec::with_capacity(t + 1);
    let mut y = x.clone();
    past.push(y.clone());
    for _ in 0..t {
        y = sys.map_step_back(&y)?;
        past.push(y.clone());
    }
    let unstable = push(
        random_frame(n, n - stable_dim, params.seed.wrapping_add(1))?,
        past.iter().skip(1).rev().map(|w| Ok(sys.jacobian(w))),
    )?;
    let stable = stable_frames_along(sys, std::slice::from_ref(x), stable_dim, t, params.seed.wrapping_add(2))?
        .pop()
        .ok_or(Error::Empty)?;
    let angle = min_principal_angle(&stable, &unstable);
    Ok(SplittingEstimate {
        base: x.clone(),
        stable_frame: stable,
        unstable_frame: unstable,
        angle,
    })
}
