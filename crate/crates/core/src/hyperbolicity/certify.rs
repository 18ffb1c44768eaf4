use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::splitting::stable_frames_along;
use crate::dynamics::{Span, SystemSpec, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::frame::{evolve_frame, FrameState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifyParams {
    /// Contraction margin; windows must average at most `−sigma/2`.
    pub sigma: f64,
    pub t0: f64,
    pub tmax: f64,
    /// Spacing of window starts and lengths.
    pub stride: f64,
    /// Integration step for flows.
    pub h: f64,
    /// Window averages within this of the bound make the verdict inconclusive.
    pub tolerance: f64,
    /// Dimension of the candidate bundle for maps. When smaller than the
    /// state dimension, transported vectors are kept on the stable subspace
    /// computed from the future of the orbit.
    pub stable_dim: Option<usize>,
    pub seed: u64,
}

impl Default for CertifyParams {
    fn default() -> Self {
        CertifyParams {
            sigma: 0.5,
            t0: 10.0,
            tmax: 1000.0,
            stride: 1.0,
            h: DEFAULT_STEP,
            tolerance: 1e-9,
            stable_dim: None,
            seed: 0,
        }
    }
}

/// A window whose average growth rate violates the bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub sample: usize,
    pub start: f64,
    pub length: f64,
    pub average: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    Refuted { witness: Witness },
    /// Worst window within tolerance of the bound; `margin` is its excess.
    Inconclusive { margin: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperbolicityCertificate {
    pub sigma: f64,
    /// Expansion margin, when the unstable side was checked as well.
    pub varsigma: Option<f64>,
    pub t0: f64,
    pub tmax: f64,
    pub stride: f64,
    pub samples: usize,
    pub windows_checked: u64,
    pub worst_window_average: f64,
    /// Sample, start and length of the worst window.
    pub worst_window: Witness,
    pub verdict: Verdict,
}

impl HyperbolicityCertificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// Per-unit log growth of a transported map direction.
fn map_rates(sys: &SystemSpec, x: &DVector<f64>, v: &DVector<f64>, steps: usize, params: &CertifyParams) -> Result<Vec<f64>> {
    let n = sys.dim();
    let mut orbit = Vec::with_capacity(steps + 1);
    let mut y = x.clone();
    orbit.push(y.clone());
    for _ in 0..steps {
        y = sys.map_step(&y)?;
        orbit.push(y.clone());
    }
    let frames = match params.stable_dim {
        Some(d) if d < n => Some(stable_frames_along(sys, &orbit, d, 50, params.seed)?),
        _ => None,
    };
    let norm = v.norm();
    if !(norm > 0.0) {
        return Err(Error::ZeroVector);
    }
    let mut u = v / norm;
    let mut rates = Vec::with_capacity(steps);
    let mut rescaled = 0usize;
    for t in 0..steps {
        u = sys.jacobian(&orbit[t]) * u;
        if let Some(f) = &frames {
            let q: &DMatrix<f64> = &f[t + 1];
            u = q * (q.transpose() * &u);
        }
        let len = u.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::ZeroVector);
        }
        if !(1e-8..=1e8).contains(&len) {
            rescaled += 1;
        }
        rates.push(len.ln());
        u /= len;
    }
    if rescaled > 0 {
        log::debug!("{rescaled} large rescaling events while transporting a direction");
    }
    Ok(rates)
}

/// Per-block integral of the growth rate of a transported flow direction.
fn flow_rates(sys: &SystemSpec, x: &DVector<f64>, v: &DVector<f64>, blocks: usize, params: &CertifyParams) -> Result<Vec<f64>> {
    let mut fs = FrameState::new(sys, x.clone(), DMatrix::from_column_slice(v.len(), 1, v.as_slice()))?;
    let mut out = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let before = fs.rate_integral[0];
        fs = evolve_frame(sys, &fs, Span::Time { t: params.stride, h: params.h }, 1)?;
        out.push(fs.rate_integral[0] - before);
    }
    Ok(out)
}

/// Sampled check that every window `[s, s + T]`, `T0 ≤ T ≤ Tmax`,
/// `0 ≤ s ≤ Tmax`, with `s` and `T` multiples of the stride, averages a
/// growth rate of at most `−σ/2` along each sample direction.
///
/// For maps the rate is the per-step log contraction of the transported
/// vector; for flows it is the time integral of the transversal growth rate.
pub fn certify_uniform_contraction(
    sys: &SystemSpec,
    samples: &[(DVector<f64>, DVector<f64>)],
    params: &CertifyParams,
) -> Result<HyperbolicityCertificate> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    if !(params.sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", params.sigma)));
    }
    if !(params.stride > 0.0) || !(params.t0 > 0.0) || !(params.t0 < params.tmax) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < t0 < tmax and stride > 0, got t0 = {}, tmax = {}, stride = {}",
            params.t0, params.tmax, params.stride
        )));
    }
    // Everything is measured in units: map steps, or flow blocks of one stride.
    let (unit, stride_units) = if sys.is_flow() {
        (params.stride, 1usize)
    } else {
        if [params.t0, params.tmax, params.stride].iter().any(|x| x.fract() != 0.0) {
            return Err(Error::InvalidParameter("map windows need integer t0, tmax and stride".into()));
        }
        (1.0, params.stride as usize)
    };
    let tmax_units = (params.tmax / unit).floor() as usize;
    let t0_units = (params.t0 / unit).ceil() as usize;
    let horizon = 2 * tmax_units;
    let bound = -params.sigma / 2.0;

    let mut windows = 0u64;
    let mut worst = Witness {
        sample: 0,
        start: 0.0,
        length: 0.0,
        average: f64::NEG_INFINITY,
    };
    for (i, (x, v)) in samples.iter().enumerate() {
        sys.check_dim(x)?;
        sys.check_dim(v)?;
        let rates = if sys.is_flow() {
            flow_rates(sys, x, v, horizon, params)?
        } else {
            map_rates(sys, x, v, horizon, params)?
        };
        let mut prefix = Vec::with_capacity(rates.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for r in &rates {
            acc += r;
            prefix.push(acc);
        }
        for s in (0..=tmax_units).step_by(stride_units) {
            let mut len = t0_units;
            while len <= tmax_units {
                let avg = (prefix[s + len] - prefix[s]) / (len as f64 * unit);
                windows += 1;
                if avg > worst.average {
                    worst = Witness {
                        sample: i,
                        start: s as f64 * unit,
                        length: len as f64 * unit,
                        average: avg,
                    };
                }
                len += stride_units;
            }
        }
    }
    let verdict = if worst.average > bound + params.tolerance {
        Verdict::Refuted { witness: worst }
    } else if worst.average <= bound - params.tolerance {
        Verdict::Certified
    } else {
        Verdict::Inconclusive {
            margin: worst.average - bound,
        }
    };
    Ok(HyperbolicityCertificate {
        sigma: params.sigma,
        varsigma: None,
        t0: params.t0,
        tmax: params.tmax,
        stride: params.stride,
        samples: samples.len(),
        windows_checked: windows,
        worst_window_average: worst.average,
        worst_window: worst,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{lookup, RegistryOptions};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn cat_stable_direction_is_certified() {
        let sys = lookup("cat", &RegistryOptions::default()).unwrap();
        let r5 = 5f64.sqrt();
        let dir = v(&[1.0, -(r5 + 1.0) / 2.0]);
        let params = CertifyParams {
            sigma: 0.9624,
            t0: 10.0,
            tmax: 200.0,
            stable_dim: Some(1),
            ..Default::default()
        };
        let cert = certify_uniform_contraction(&sys, &[(v(&[0.1, 0.7]), dir)], &params).unwrap();
        assert!(cert.is_certified());
        let l = ((3.0 + r5) / 2.0).ln();
        assert!((cert.worst_window_average + l).abs() < 1e-9, "{}", cert.worst_window_average);
    }

    #[test]
    fn neutral_fixed_point_is_refuted() {
        let sys = lookup("diag:1,2", &RegistryOptions::default()).unwrap();
        let params = CertifyParams { sigma: 0.1, t0: 5.0, tmax: 20.0, ..Default::default() };
        let cert = certify_uniform_contraction(&sys, &[(v(&[0.0, 0.0]), v(&[1.0, 0.0]))], &params).unwrap();
        match cert.verdict {
            Verdict::Refuted { witness } => assert_eq!(witness.average, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn diagonal_full_bundle() {
        let sys = lookup("diag:0.5,0.3333333333333333", &RegistryOptions::default()).unwrap();
        let params = CertifyParams { sigma: 2.0 * 2f64.ln(), t0: 5.0, tmax: 40.0, ..Default::default() };
        let samples = [(v(&[0.0, 0.0]), v(&[1.0, 0.0])), (v(&[1.0, 1.0]), v(&[0.6, 0.8]))];
        let cert = certify_uniform_contraction(&sys, &samples, &params).unwrap();
        // Exactly on the bound: worst window is −log 2 = −σ/2.
        assert!((cert.worst_window_average + 2f64.ln()).abs() < 1e-12);
        assert!(matches!(cert.verdict, Verdict::Inconclusive { .. }));
        let params = CertifyParams { sigma: 2f64.ln(), ..params };
        assert!(certify_uniform_contraction(&sys, &samples, &params).unwrap().is_certified());
    }

    #[test]
    fn window_count() {
        let sys = lookup("diag:0.5,0.5", &RegistryOptions::default()).unwrap();
        let params = CertifyParams { sigma: 0.1, t0: 2.0, tmax: 10.0, stride: 2.0, ..Default::default() };
        let cert = certify_uniform_contraction(&sys, &[(v(&[0.0, 0.0]), v(&[1.0, 0.0]))], &params).unwrap();
        // s ∈ {0, 2, …, 10}, T ∈ {2, 4, …, 10}.
        assert_eq!(cert.windows_checked, 6 * 5);
    }

    #[test]
    fn flow_certificate_on_suspension() {
        let sys = lookup("suspension:diag:0.5,0.25", &RegistryOptions::default()).unwrap();
        let params = CertifyParams { sigma: 1.0, t0: 1.0, tmax: 4.0, h: 1e-2, ..Default::default() };
        let cert = certify_uniform_contraction(&sys, &[(v(&[0.0, 0.0, 0.3]), v(&[1.0, 0.0, 0.0]))], &params).unwrap();
        assert!(cert.is_certified());
        assert!((cert.worst_window_average + 2f64.ln()).abs() < 1e-9, "{}", cert.worst_window_average);
    }
}
