use std::fmt::Write as _;

use frameflow_core::dynamics::Trajectory;
use frameflow_core::measures::{periodic_approximations, ApproximationRow};
use frameflow_core::Error as CoreError;
use serde::Serialize;

use super::SystemEcho;
use crate::config::{positive, Options};
use crate::error::{config, failed, CliError, Result};
use crate::output::{envelope, Report, Status};

pub const ALPHAS: [f64; 3] = [0.1, 0.05, 0.02];
pub const MAP_STEPS: u64 = 100_000;
pub const FLOW_TIME: f64 = 200.0;
pub const TOLERANCE: f64 = 1e-10;
/// Relative increase of the distance tolerated between refinement levels.
pub const NOISE_BAND: f64 = 0.1;

#[derive(Serialize)]
struct Echo {
    #[serde(flatten)]
    system: SystemEcho,
    alphas: Vec<f64>,
    horizon: f64,
    h: f64,
    tolerance: f64,
    noise_band: f64,
}

#[derive(Serialize)]
struct Row {
    i: usize,
    #[serde(flatten)]
    row: ApproximationRow,
    /// Distance at most `1 + noise_band` times the previous level's.
    within_band: bool,
}

#[derive(Serialize)]
struct Outcome {
    rows: Vec<Row>,
    non_increasing: bool,
}

pub fn run(opts: &Options) -> Result<Report> {
    let sys = opts.system_spec()?;
    let state = opts.initial_state(&sys)?;
    let alphas = opts.alphas.clone().unwrap_or_else(|| ALPHAS.to_vec());
    if alphas.is_empty() {
        return Err(config("--alphas must not be empty"));
    }
    for &a in &alphas {
        positive("alphas", a)?;
    }
    let tol = positive("tolerance", opts.tolerance.unwrap_or(TOLERANCE))?;
    let horizon = opts.horizon(&sys, MAP_STEPS, FLOW_TIME)?;
    let h = opts.step()?;
    let (traj, min_span) = if sys.is_flow() {
        (Trajectory::integrate(&sys, &state, horizon, h).map_err(failed("integrate"))?, 1.0)
    } else {
        (Trajectory::orbit(&sys, &state, horizon as usize).map_err(failed("orbit"))?, 1.0)
    };
    let raw = periodic_approximations(&sys, &traj, &alphas, min_span, tol).map_err(failed("periodic_approximations"))?;
    if raw.is_empty() {
        return Err(CliError::Numerical {
            op: "periodic_approximations",
            source: CoreError::Empty,
        });
    }
    let mut rows = Vec::with_capacity(raw.len());
    let mut previous: Option<f64> = None;
    for (i, row) in raw.into_iter().enumerate() {
        let within_band = previous.is_none_or(|p| row.bl_distance <= (1.0 + NOISE_BAND) * p + 1e-12);
        previous = Some(row.bl_distance);
        rows.push(Row { i: i + 1, row, within_band });
    }
    let non_increasing = rows.iter().all(|r| r.within_band);
    if !non_increasing {
        log::warn!("bounded-Lipschitz distances increase beyond the noise band");
    }
    let mut csv = String::from("i,alpha,horizon,period,gap,bl_distance,within_band\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.i, r.row.alpha, r.row.horizon, r.row.period, r.row.gap, r.row.bl_distance, r.within_band
        );
    }
    let echo = Echo {
        system: SystemEcho::new(opts, &sys, &state),
        alphas,
        horizon,
        h,
        tolerance: tol,
        noise_band: NOISE_BAND,
    };
    let outcome = Outcome { rows, non_increasing };
    Ok(Report {
        command: "measures",
        json: envelope("measures", &echo, &outcome),
        csv: Some(csv),
        status: Status::Success,
    })
}
