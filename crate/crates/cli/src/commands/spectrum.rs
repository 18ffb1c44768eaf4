use frameflow_core::hyperbolicity::{lyapunov_spectrum, SpectrumParams};
use serde::Serialize;

use super::SystemEcho;
use crate::config::Options;
use crate::error::{config, failed, Result};
use crate::output::{envelope, Report, Status};

pub const MAP_STEPS: u64 = 10_000;
pub const FLOW_TIME: f64 = 100.0;
pub const MAP_BURN_IN: f64 = 100.0;

#[derive(Serialize)]
struct Echo {
    #[serde(flatten)]
    system: SystemEcho,
    horizon: f64,
    h: f64,
    reorth_every: usize,
    burn_in: f64,
}

pub fn run(opts: &Options) -> Result<Report> {
    let sys = opts.system_spec()?;
    let state = opts.initial_state(&sys)?;
    let horizon = opts.horizon(&sys, MAP_STEPS, FLOW_TIME)?;
    let default_burn_in = if sys.is_flow() { 0.0 } else { MAP_BURN_IN };
    let burn_in = opts.burn_in.unwrap_or(default_burn_in);
    if !(burn_in >= 0.0 && burn_in.is_finite()) {
        return Err(config(format!("--burn-in must be nonnegative, got {burn_in}")));
    }
    let params = SpectrumParams {
        h: opts.step()?,
        reorth_every: opts.reorth_every()?,
        burn_in,
        seed: opts.seed(),
    };
    let est = lyapunov_spectrum(&sys, &state, sys.transversal_dim(), horizon, &params)
        .map_err(failed("lyapunov_spectrum"))?;
    log::info!("exponents {:?}, tail drift {:e}", est.exponents, est.tail_drift);
    let echo = Echo {
        system: SystemEcho::new(opts, &sys, &state),
        horizon,
        h: params.h,
        reorth_every: params.reorth_every,
        burn_in,
    };
    Ok(Report {
        command: "spectrum",
        json: envelope("spectrum", &echo, &est),
        csv: Some(est.to_csv()),
        status: Status::Success,
    })
}
