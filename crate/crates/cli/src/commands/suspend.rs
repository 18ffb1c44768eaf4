use std::fmt::Write as _;

use frameflow_core::dynamics::suspend;
use frameflow_core::hyperbolicity::{lyapunov_spectrum, SpectrumEstimate, SpectrumParams};
use serde::Serialize;

use super::SystemEcho;
use crate::config::{positive, Options};
use crate::error::{config, failed, Result};
use crate::output::{envelope, Report, Status};

pub const FLOW_TIME: f64 = 1000.0;

#[derive(Serialize)]
struct Echo {
    #[serde(flatten)]
    system: SystemEcho,
    time: f64,
    base_steps: u64,
    h: f64,
    reorth_every: usize,
    burn_in: f64,
}

#[derive(Serialize)]
struct Outcome {
    flow: SpectrumEstimate,
    base: SpectrumEstimate,
    /// Base exponents divided by the roof.
    base_per_unit_time: Vec<f64>,
    max_difference: f64,
}

pub fn run(opts: &Options) -> Result<Report> {
    let name = opts.system_name()?;
    let base_name = name.strip_prefix("suspension:").unwrap_or(name).to_string();
    let base_opts = Options {
        system: Some(base_name),
        ..opts.clone()
    };
    let base = base_opts.system_spec()?;
    if base.is_flow() {
        return Err(config(format!("suspend-spectrum needs a map, `{}` is a flow", base.name)));
    }
    let roof = opts.registry().roof;
    let susp = suspend(&base, roof).map_err(failed("suspend"))?;
    let flow = susp.flow();
    let base_state = base_opts.initial_state(&base)?;
    let state = susp.embed(&base_state);

    let time = positive("time", opts.time.unwrap_or(FLOW_TIME))?;
    if opts.steps.is_some() {
        return Err(config("suspend-spectrum takes --time; the base map runs time/roof iterates"));
    }
    let base_steps = (time / roof).round().max(1.0) as u64;
    let burn_in = opts.burn_in.unwrap_or(0.0);
    if !(burn_in >= 0.0 && burn_in.is_finite()) {
        return Err(config(format!("--burn-in must be nonnegative, got {burn_in}")));
    }
    let params = SpectrumParams {
        h: opts.step()?,
        reorth_every: opts.reorth_every()?,
        burn_in,
        seed: opts.seed(),
    };
    let flow_est = lyapunov_spectrum(&flow, &state, flow.transversal_dim(), time, &params)
        .map_err(failed("lyapunov_spectrum"))?;
    let base_params = SpectrumParams {
        burn_in: (burn_in / roof).round(),
        ..params
    };
    let base_est = lyapunov_spectrum(&base, &base_state, base.dim(), base_steps as f64, &base_params)
        .map_err(failed("lyapunov_spectrum"))?;
    let scaled: Vec<f64> = base_est.exponents.iter().map(|e| e / roof).collect();
    let max_difference = flow_est
        .exponents
        .iter()
        .zip(&scaled)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    log::info!("flow {:?} vs base {:?}", flow_est.exponents, scaled);

    let mut csv = String::from("index,flow_exponent,base_exponent_per_time,difference\n");
    for (i, (a, b)) in flow_est.exponents.iter().zip(&scaled).enumerate() {
        let _ = writeln!(csv, "{},{a},{b},{}", i + 1, (a - b).abs());
    }
    let echo = Echo {
        system: SystemEcho::new(opts, &flow, &state),
        time,
        base_steps,
        h: params.h,
        reorth_every: params.reorth_every,
        burn_in,
    };
    let outcome = Outcome {
        flow: flow_est,
        base: base_est,
        base_per_unit_time: scaled,
        max_difference,
    };
    Ok(Report {
        command: "suspend-spectrum",
        json: envelope("suspend-spectrum", &echo, &outcome),
        csv: Some(csv),
        status: Status::Success,
    })
}
