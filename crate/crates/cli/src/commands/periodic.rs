use std::collections::BTreeMap;
use std::fmt::Write as _;

use frameflow_core::dynamics::{SystemSpec, Trajectory};
use frameflow_core::hyperbolicity::{
    check_index_constancy, extremal_exponent_bounds, ExtremalBounds, IndexVerdict, ZERO_THRESHOLD,
};
use frameflow_core::shadowing::{enumerate_periodic_toral, find_recurrences, refine_periodic, PeriodicOrbit};
use frameflow_core::Error as CoreError;
use serde::Serialize;

use super::SystemEcho;
use crate::config::{positive, Options};
use crate::error::{config, failed, CliError, Result};
use crate::output::{envelope, Report, Status};

pub const MAX_PERIOD: usize = 8;
/// `|det(A^m − I)|` grows geometrically; beyond this the point count is impractical.
pub const MAX_EXACT_PERIOD: usize = 12;
pub const ALPHA: f64 = 0.01;
pub const MAP_STEPS: u64 = 100_000;
pub const FLOW_TIME: f64 = 20.0;
pub const TOLERANCE: f64 = 1e-10;

#[derive(Serialize)]
struct Echo {
    #[serde(flatten)]
    system: SystemEcho,
    method: &'static str,
    max_period: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    tolerance: f64,
}

#[derive(Serialize)]
struct Summary {
    orbit_count: usize,
    /// Orbits per minimal period.
    orbits_by_period: BTreeMap<String, usize>,
    /// `|Fix(A^m)|` for each `m` (exact enumeration only).
    #[serde(skip_serializing_if = "Option::is_none")]
    fixed_point_counts: Option<BTreeMap<usize, usize>>,
    index_histogram: BTreeMap<usize, usize>,
    bounds: ExtremalBounds,
    index_constancy: IndexVerdict,
}

#[derive(Serialize)]
struct Outcome {
    summary: Summary,
    orbits: Vec<PeriodicOrbit>,
}

fn period_key(o: &PeriodicOrbit) -> String {
    match o.kind {
        frameflow_core::dynamics::SystemKind::Map => o.steps().to_string(),
        frameflow_core::dynamics::SystemKind::Flow => format!("{:.6}", o.period),
    }
}

fn exact(sys: &SystemSpec, max_period: usize) -> Result<(Vec<PeriodicOrbit>, BTreeMap<usize, usize>)> {
    let a = sys
        .integer_matrix()
        .ok_or_else(|| config(format!("--exact needs a linear toral automorphism, `{}` is not one", sys.name)))?;
    if max_period > MAX_EXACT_PERIOD {
        return Err(config(format!("--exact supports --max-period up to {MAX_EXACT_PERIOD}")));
    }
    let mut orbits = Vec::new();
    let mut counts = BTreeMap::new();
    for m in 1..=max_period {
        let found = enumerate_periodic_toral(&a, m).map_err(failed("enumerate_periodic_toral"))?;
        counts.insert(m, found.iter().map(|o| o.cycle.len()).sum());
        orbits.extend(found.into_iter().filter(|o| o.steps() == m));
    }
    Ok((orbits, counts))
}

fn same_orbit(a: &PeriodicOrbit, b: &PeriodicOrbit) -> bool {
    (a.period - b.period).abs() <= 1e-6 * a.period.max(1.0)
        && b.cycle.iter().any(|p| a.geometry.distance(&a.point, p) < 1e-6)
}

fn scanned(sys: &SystemSpec, opts: &Options, max_period: usize, alpha: f64, tol: f64) -> Result<Vec<PeriodicOrbit>> {
    let horizon = opts.horizon(sys, MAP_STEPS, FLOW_TIME)?;
    let state = opts.initial_state(sys)?;
    let (traj, min_span) = if sys.is_flow() {
        let h = opts.step()?;
        (Trajectory::integrate(sys, &state, horizon, h).map_err(failed("integrate"))?, 10.0 * h)
    } else {
        (Trajectory::orbit(sys, &state, horizon as usize).map_err(failed("orbit"))?, 1.0)
    };
    let segments =
        find_recurrences(&traj, alpha, min_span, Some(max_period as f64)).map_err(failed("find_recurrences"))?;
    log::info!("{} recurrent segments within {alpha}", segments.len());
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    for seg in &segments {
        match refine_periodic(sys, seg, tol) {
            Ok(o) if !orbits.iter().any(|p| same_orbit(p, &o)) => orbits.push(o),
            Ok(_) => {}
            Err(e) => log::info!("segment of span {} not refined: {e}", seg.span),
        }
    }
    orbits.sort_by(|a, b| {
        a.period.total_cmp(&b.period).then_with(|| {
            a.point
                .iter()
                .zip(b.point.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|c| c.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    Ok(orbits)
}

fn csv(orbits: &[PeriodicOrbit]) -> String {
    let dim = orbits.first().map_or(0, |o| o.point.len());
    let k = orbits.first().map_or(0, |o| o.exponents.len());
    let mut out = String::from("period,index,residual,verified");
    (1..=dim).for_each(|i| {
        let _ = write!(out, ",x{i}");
    });
    (1..=k).for_each(|i| {
        let _ = write!(out, ",lambda{i}");
    });
    out.push('\n');
    for o in orbits {
        let _ = write!(out, "{},{},{},{}", o.period, o.index, o.residual, o.verified);
        o.point.iter().chain(&o.exponents).for_each(|x| {
            let _ = write!(out, ",{x}");
        });
        out.push('\n');
    }
    out
}

pub fn run(opts: &Options) -> Result<Report> {
    let sys = opts.system_spec()?;
    let max_period = opts.max_period.unwrap_or(MAX_PERIOD);
    if max_period == 0 {
        return Err(config("--max-period must be at least 1"));
    }
    let tol = positive("tolerance", opts.tolerance.unwrap_or(TOLERANCE))?;
    let is_exact = opts.exact.unwrap_or(false);
    let state = opts.initial_state(&sys)?;
    let mut echo = Echo {
        system: SystemEcho::new(opts, &sys, &state),
        method: if is_exact { "exact" } else { "recurrence" },
        max_period,
        alpha: None,
        horizon: None,
        h: None,
        tolerance: tol,
    };
    let (orbits, fixed) = if is_exact {
        let (o, c) = exact(&sys, max_period)?;
        (o, Some(c))
    } else {
        let alpha = positive("alpha", opts.alpha.unwrap_or(ALPHA))?;
        echo.alpha = Some(alpha);
        echo.horizon = Some(opts.horizon(&sys, MAP_STEPS, FLOW_TIME)?);
        echo.h = sys.is_flow().then(|| opts.step()).transpose()?;
        (scanned(&sys, opts, max_period, alpha, tol)?, None)
    };
    if orbits.is_empty() {
        return Err(CliError::Numerical {
            op: "refine_periodic",
            source: CoreError::Empty,
        });
    }
    let mut by_period = BTreeMap::new();
    let mut histogram = BTreeMap::new();
    for o in &orbits {
        *by_period.entry(period_key(o)).or_insert(0) += 1;
        *histogram.entry(o.index).or_insert(0) += 1;
    }
    let summary = Summary {
        orbit_count: orbits.len(),
        orbits_by_period: by_period,
        fixed_point_counts: fixed,
        index_histogram: histogram,
        bounds: extremal_exponent_bounds(&orbits).map_err(failed("extremal_exponent_bounds"))?,
        index_constancy: check_index_constancy(&orbits, ZERO_THRESHOLD).map_err(failed("check_index_constancy"))?,
    };
    log::info!("{} orbits, bounds {:?}", orbits.len(), summary.bounds);
    let table = csv(&orbits);
    let outcome = Outcome { summary, orbits };
    Ok(Report {
        command: "periodic",
        json: envelope("periodic", &echo, &outcome),
        csv: Some(table),
        status: Status::Success,
    })
}
