use std::sync::Arc;

use frameflow_core::dynamics::{evolve_flow, evolve_tangent, Span, SystemSpec, VectorMap};
use frameflow_core::frame::{gram_schmidt_matrix, transversal_project};
use frameflow_core::hyperbolicity::{
    certify_uniform_contraction, lyapunov_spectrum, oseledets_splitting, CertifyParams, HyperbolicityCertificate,
    SpectrumParams, SplittingParams, Verdict, ZERO_THRESHOLD,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::SystemEcho;
use crate::config::{positive, Options};
use crate::error::{config, failed, Result};
use crate::output::{envelope, Report, Status};

pub const SAMPLES: usize = 4;
pub const MAP_STEPS: u64 = 2_000;
pub const FLOW_TIME: f64 = 100.0;
/// Flow time over which sample directions are pulled back onto the bundle.
const PULLBACK_TIME: f64 = 20.0;

#[derive(Serialize)]
struct Echo {
    #[serde(flatten)]
    system: SystemEcho,
    sigma: f64,
    varsigma: f64,
    t0: f64,
    tmax: f64,
    stride: f64,
    samples: usize,
    spectrum_horizon: f64,
    h: f64,
    zero_threshold: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct Outcome {
    exponents: Vec<f64>,
    stable_dim: usize,
    unstable_dim: usize,
    /// Contraction of the stable bundle under the system.
    #[serde(skip_serializing_if = "Option::is_none")]
    stable: Option<HyperbolicityCertificate>,
    /// Contraction of the unstable bundle under the inverse (or reversed) system.
    #[serde(skip_serializing_if = "Option::is_none")]
    unstable: Option<HyperbolicityCertificate>,
    verdict: Verdict,
}

/// The vector field `−S`.
#[derive(Debug)]
struct Reversed(SystemSpec);

impl VectorMap for Reversed {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, w: &DVector<f64>) -> DVector<f64> {
        -self.0.evaluate(w)
    }

    fn jacobian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        -self.0.jacobian(w)
    }
}

fn backwards(sys: &SystemSpec) -> Result<SystemSpec> {
    if sys.is_flow() {
        Ok(SystemSpec::flow(
            format!("{} reversed", sys.name),
            sys.geometry.clone(),
            Arc::new(Reversed(sys.clone())),
        ))
    } else {
        sys.inverted().map_err(failed("inverted"))
    }
}

fn random_matrix(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, k, |_, _| 2.0 * rng.random::<f64>() - 1.0)
}

/// Directions spanning the candidate bundle of dimension `dim` at `x`:
/// the stable frame of the splitting for maps, random directions pulled
/// back along the flow for flows, and the whole tangent space when the
/// bundle is everything.
fn bundle_directions(sys: &SystemSpec, x: &DVector<f64>, dim: usize, seed: u64, h: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let full = sys.transversal_dim();
    if !sys.is_flow() {
        if dim == full {
            return Ok((x.clone(), DMatrix::identity(full, full)));
        }
        let params = SplittingParams {
            stable_dim: Some(dim),
            seed,
            ..Default::default()
        };
        let split = oseledets_splitting(sys, x, &params).map_err(failed("oseledets_splitting"))?;
        return Ok((x.clone(), split.stable_frame));
    }
    let n = sys.dim();
    let mut y = evolve_flow(sys, x, PULLBACK_TIME, h).map_err(failed("evolve_flow"))?;
    let mut q = random_matrix(n, dim, seed);
    for _ in 0..PULLBACK_TIME.ceil() as usize {
        let (y1, x1) = evolve_tangent(sys, &y, &q, Span::Time { t: -1.0, h }).map_err(failed("evolve_tangent"))?;
        y = y1;
        q = gram_schmidt_matrix(&x1).map_err(failed("gram_schmidt"))?.0;
    }
    let s = sys.velocity(&y).map_err(failed("velocity"))?;
    let projected: Vec<DVector<f64>> = q
        .column_iter()
        .map(|c| transversal_project(&s, &c.into_owned()))
        .collect::<std::result::Result<_, _>>()
        .map_err(failed("transversal_project"))?;
    let m = DMatrix::from_columns(&projected);
    Ok((y, gram_schmidt_matrix(&m).map_err(failed("gram_schmidt"))?.0))
}

fn certify_side(
    sys: &SystemSpec,
    bases: &[DVector<f64>],
    dim: usize,
    params: &CertifyParams,
) -> Result<HyperbolicityCertificate> {
    let mut samples = Vec::new();
    for (i, x) in bases.iter().enumerate() {
        let (base, frame) = bundle_directions(sys, x, dim, params.seed.wrapping_add(i as u64), params.h)?;
        samples.extend(frame.column_iter().map(|c| (base.clone(), c.into_owned())));
    }
    let params = CertifyParams {
        stable_dim: (!sys.is_flow() && dim < sys.dim()).then_some(dim),
        ..*params
    };
    certify_uniform_contraction(sys, &samples, &params).map_err(failed("certify_uniform_contraction"))
}

fn base_points(sys: &SystemSpec, x: &DVector<f64>, count: usize, stride: f64, h: f64) -> Result<Vec<DVector<f64>>> {
    let mut out = vec![x.clone()];
    while out.len() < count {
        let last = out.last().expect("nonempty");
        let next = if sys.is_flow() {
            evolve_flow(sys, last, stride, h).map_err(failed("evolve_flow"))?
        } else {
            sys.map_step(last).map_err(failed("map_step"))?
        };
        out.push(next);
    }
    Ok(out)
}

fn combine(sides: &[&Option<HyperbolicityCertificate>]) -> Verdict {
    let verdicts: Vec<&Verdict> = sides.iter().filter_map(|c| c.as_ref().map(|c| &c.verdict)).collect();
    if let Some(v) = verdicts.iter().find(|v| matches!(v, Verdict::Refuted { .. })) {
        return (*v).clone();
    }
    if let Some(v) = verdicts.iter().find(|v| matches!(v, Verdict::Inconclusive { .. })) {
        return (*v).clone();
    }
    Verdict::Certified
}

pub fn run(opts: &Options) -> Result<Report> {
    let sys = opts.system_spec()?;
    if !sys.is_flow() && !sys.has_inverse() {
        return Err(config(format!("certify needs an invertible map, `{}` has no inverse", sys.name)));
    }
    let state = opts.initial_state(&sys)?;
    let d = CertifyParams::default();
    let sigma = positive("sigma", opts.sigma.unwrap_or(d.sigma))?;
    let varsigma = positive("varsigma", opts.varsigma.unwrap_or(sigma))?;
    let h = opts.step()?;
    let samples = opts.samples.unwrap_or(SAMPLES);
    if samples == 0 {
        return Err(config("--samples must be at least 1"));
    }
    let zero_threshold = positive("zero-threshold", opts.zero_threshold.unwrap_or(ZERO_THRESHOLD))?;
    let params = CertifyParams {
        sigma,
        t0: positive("t0", opts.t0.unwrap_or(d.t0))?,
        tmax: positive("tmax", opts.tmax.unwrap_or(d.tmax))?,
        stride: positive("stride", opts.stride.unwrap_or(d.stride))?,
        h,
        tolerance: positive("tolerance", opts.tolerance.unwrap_or(d.tolerance))?,
        stable_dim: None,
        seed: opts.seed(),
    };
    if params.t0 >= params.tmax {
        return Err(config("--t0 must be smaller than --tmax"));
    }

    let horizon = opts.horizon(&sys, MAP_STEPS, FLOW_TIME)?;
    let spectrum = lyapunov_spectrum(
        &sys,
        &state,
        sys.transversal_dim(),
        horizon,
        &SpectrumParams {
            h,
            reorth_every: opts.reorth_every()?,
            burn_in: if sys.is_flow() { 0.0 } else { super::spectrum::MAP_BURN_IN },
            seed: params.seed,
        },
    )
    .map_err(failed("lyapunov_spectrum"))?;
    let exponents = spectrum.exponents;
    // A neutral exponent belongs to both candidate bundles, so it refutes both.
    let stable_dim = exponents.iter().filter(|&&e| e <= zero_threshold).count();
    let unstable_dim = exponents.iter().filter(|&&e| e >= -zero_threshold).count();
    log::info!("exponents {exponents:?}: stable dimension {stable_dim}, unstable dimension {unstable_dim}");

    let bases = base_points(&sys, &state, samples, params.stride, h)?;
    let mut stable = (stable_dim > 0)
        .then(|| certify_side(&sys, &bases, stable_dim, &params))
        .transpose()?;
    let unstable = if unstable_dim > 0 {
        let back = backwards(&sys)?;
        let p = CertifyParams { sigma: varsigma, ..params };
        Some(certify_side(&back, &bases, unstable_dim, &p)?)
    } else {
        None
    };
    if let (Some(s), Some(_)) = (stable.as_mut(), unstable.as_ref()) {
        s.varsigma = Some(varsigma);
    }
    let verdict = combine(&[&stable, &unstable]);
    let status = match verdict {
        Verdict::Certified => Status::Success,
        Verdict::Refuted { .. } => Status::Refuted,
        Verdict::Inconclusive { .. } => Status::Inconclusive,
    };
    let echo = Echo {
        system: SystemEcho::new(opts, &sys, &state),
        sigma,
        varsigma,
        t0: params.t0,
        tmax: params.tmax,
        stride: params.stride,
        samples,
        spectrum_horizon: horizon,
        h,
        zero_threshold,
        tolerance: params.tolerance,
    };
    let csv = csv(&[("stable", &stable), ("unstable", &unstable)]);
    let outcome = Outcome {
        exponents,
        stable_dim,
        unstable_dim,
        stable,
        unstable,
        verdict,
    };
    Ok(Report {
        command: "certify",
        json: envelope("certify", &echo, &outcome),
        csv: Some(csv),
        status,
    })
}

fn csv(sides: &[(&str, &Option<HyperbolicityCertificate>)]) -> String {
    let mut out = String::from("bundle,sigma,windows_checked,worst_window_average,worst_sample,worst_start,worst_length,status\n");
    for (name, cert) in sides {
        if let Some(c) = cert {
            let status = match c.verdict {
                Verdict::Certified => "certified",
                Verdict::Refuted { .. } => "refuted",
                Verdict::Inconclusive { .. } => "inconclusive",
            };
            out.push_str(&format!(
                "{name},{},{},{},{},{},{},{status}\n",
                c.sigma,
                c.windows_checked,
                c.worst_window_average,
                c.worst_window.sample,
                c.worst_window.start,
                c.worst_window.length
            ));
        }
    }
    out
}
