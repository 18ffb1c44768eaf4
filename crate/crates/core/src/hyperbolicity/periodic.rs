use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::gram_schmidt_matrix;
use crate::linalg::{eigen_magnitudes, real_eigen};
use crate::shadowing::PeriodicOrbit;

/// Exponents of a verified orbit, recomputed from its monodromy when stored.
pub fn periodic_spectrum(orbit: &PeriodicOrbit) -> Result<Vec<f64>> {
    if !orbit.verified {
        return Err(Error::UnverifiedOrbit);
    }
    let mut out = match &orbit.monodromy {
        Some(m) => eigen_magnitudes(m).iter().map(|x| x.ln() / orbit.period).collect(),
        None => orbit.exponents.clone(),
    };
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtremalBounds {
    /// Largest bottom exponent over the orbits.
    pub sigma_bound: f64,
    /// Smallest top exponent over the orbits.
    pub varsigma_bound: f64,
    /// `sigma_bound < 0 < varsigma_bound`.
    pub separated: bool,
}

/// Tightest `σ`, `ς` with `λ_1(p) ≤ σ` and `λ_n(p) ≥ ς` for every orbit.
pub fn extremal_exponent_bounds(orbits: &[PeriodicOrbit]) -> Result<ExtremalBounds> {
    if orbits.is_empty() {
        return Err(Error::Empty);
    }
    let mut sigma = f64::NEG_INFINITY;
    let mut varsigma = f64::INFINITY;
    for o in orbits {
        let (Some(lo), Some(hi)) = (o.exponents.first(), o.exponents.last()) else {
            return Err(Error::Empty);
        };
        sigma = sigma.max(*lo);
        varsigma = varsigma.min(*hi);
    }
    Ok(ExtremalBounds {
        sigma_bound: sigma,
        varsigma_bound: varsigma,
        separated: sigma < 0.0 && 0.0 < varsigma,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum IndexVerdict {
    Constant {
        index: usize,
        checked: usize,
        /// Orbits with an exponent inside the zero threshold.
        excluded: Vec<usize>,
    },
    Violation {
        reference: usize,
        witness: usize,
        indices: (usize, usize),
    },
    /// Every orbit was excluded.
    Inconclusive { excluded: Vec<usize> },
}

/// Whether all hyperbolic orbits share the same number of negative exponents.
pub fn check_index_constancy(orbits: &[PeriodicOrbit], zero_threshold: f64) -> Result<IndexVerdict> {
    if orbits.is_empty() {
        return Err(Error::Empty);
    }
    let mut excluded = Vec::new();
    let mut reference: Option<usize> = None;
    for (i, o) in orbits.iter().enumerate() {
        if !o.verified || o.exponents.iter().any(|e| e.abs() < zero_threshold) {
            log::warn!("orbit {i} has an exponent within {zero_threshold} of zero; excluded");
            excluded.push(i);
            continue;
        }
        match reference {
            None => reference = Some(i),
            Some(r) if orbits[r].index != o.index => {
                return Ok(IndexVerdict::Violation {
                    reference: r,
                    witness: i,
                    indices: (orbits[r].index, o.index),
                })
            }
            Some(_) => {}
        }
    }
    Ok(match reference {
        Some(r) => IndexVerdict::Constant {
            index: orbits[r].index,
            checked: orbits.len() - excluded.len(),
            excluded,
        },
        None => IndexVerdict::Inconclusive { excluded },
    })
}

/// Frame built from monodromy eigendirections in a requested order and the
/// per-column rates it achieves over one period.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reordering {
    /// Zero-based: column `i` starts along eigendirection `permutation[i]`,
    /// eigendirections being labelled by ascending multiplier magnitude.
    pub permutation: Vec<usize>,
    /// Orthonormalised initial frame.
    pub frame: DMatrix<f64>,
    /// `λ_{ρ(i)}` for each column.
    pub requested: Vec<f64>,
    pub achieved: Vec<f64>,
    /// Achieved equals requested to `1e-8` in every column.
    pub realized: bool,
}

/// Initialise a frame along the eigendirections of the monodromy in the order
/// `perm` and measure the growth rate of every column over one period.
///
/// The flags spanned by eigendirections are invariant, so each column picks
/// up exactly the exponent of the eigendirection it was added with.
pub fn realize_reordering(orbit: &PeriodicOrbit, perm: &[usize]) -> Result<Reordering> {
    if !orbit.verified {
        return Err(Error::UnverifiedOrbit);
    }
    let mono = orbit
        .monodromy
        .as_ref()
        .ok_or_else(|| Error::Unsupported("orbit has no representable monodromy".into()))?;
    let n = mono.nrows();
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidParameter(format!("{perm:?} is not a permutation of 0..{n}")));
    }
    let (values, vectors) = real_eigen(mono)
        .ok_or_else(|| Error::Unsupported("monodromy has complex multipliers".into()))?;
    let mags: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    if mags.windows(2).any(|w| (w[1] - w[0]).abs() <= 1e-9 * w[1].max(1.0)) {
        return Err(Error::Unsupported("monodromy has repeated multiplier magnitudes".into()));
    }
    let exps: Vec<f64> = mags.iter().map(|m| m.ln() / orbit.period).collect();
    let cols: Vec<_> = perm.iter().map(|&p| vectors.column(p).into_owned()).collect();
    let (frame, _) = gram_schmidt_matrix(&DMatrix::from_columns(&cols))?;
    let (_, logs) = gram_schmidt_matrix(&(mono * &frame))?;
    let achieved: Vec<f64> = logs.iter().map(|l| l / orbit.period).collect();
    let requested: Vec<f64> = perm.iter().map(|&p| exps[p]).collect();
    let realized = achieved.iter().zip(&requested).all(|(a, r)| (a - r).abs() <= 1e-8);
    Ok(Reordering {
        permutation: perm.to_vec(),
        frame,
        requested,
        achieved,
        realized,
    })
}
