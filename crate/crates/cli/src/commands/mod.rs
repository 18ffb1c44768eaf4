pub mod certify;
pub mod measures;
pub mod periodic;
pub mod spectrum;
pub mod suspend;

use frameflow_core::dynamics::{SystemKind, SystemSpec};
use nalgebra::DVector;
use serde::Serialize;

use crate::config::Options;

/// The part of the configuration echo shared by every command.
#[derive(Debug, Serialize)]
pub struct SystemEcho {
    pub system: String,
    pub kind: SystemKind,
    pub dimension: usize,
    pub seed: u64,
    pub state: Vec<f64>,
    pub eps: f64,
    pub roof: f64,
}

impl SystemEcho {
    pub fn new(opts: &Options, sys: &SystemSpec, state: &DVector<f64>) -> Self {
        let reg = opts.registry();
        SystemEcho {
            system: opts.system.clone().unwrap_or_default(),
            kind: sys.kind,
            dimension: sys.dim(),
            seed: opts.seed(),
            state: state.iter().copied().collect(),
            eps: reg.eps,
            roof: reg.roof,
        }
    }
}
