use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::models::{CatPerturbed, CatPerturbedInverse, LinearMap};
use super::{suspend, Geometry, SystemSpec};
use crate::error::{Error, Result};

pub const REGISTRY_NAMES: &[&str] = &[
    "cat",
    "cat-perturbed",
    "diag:<a>,<b>,...",
    "circle-rotation:<theta>",
    "rotation-flow",
    "constant-flow",
    "suspension:<map-name>",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegistryOptions {
    /// Perturbation size for `cat-perturbed`.
    pub eps: f64,
    /// Roof for `suspension:` systems.
    pub roof: f64,
}

impl Default for RegistryOptions {
    fn default() -> Self {
        RegistryOptions {
            eps: 0.01,
            roof: 1.0,
        }
    }
}

fn cat() -> SystemSpec {
    SystemSpec::map(
        "cat",
        Geometry::Torus,
        Arc::new(LinearMap::from_rows(2, &[2.0, 1.0, 1.0, 1.0])),
        Some(Arc::new(LinearMap::from_rows(2, &[1.0, -1.0, -1.0, 2.0]))),
    )
}

fn parse_list(name: &str, body: &str) -> Result<Vec<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        body.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(Error::Malformed(format!("cannot parse parameters of `{name}`"))),
    }
}

/// Look up a built-in system by name.
pub fn lookup(name: &str, opts: &RegistryOptions) -> Result<SystemSpec> {
    if let Some(inner) = name.strip_prefix("suspension:") {
        let base = lookup(inner, opts)?;
        return Ok(suspend(&base, opts.roof)?.flow());
    }
    if let Some(body) = name.strip_prefix("diag:") {
        let d = parse_list(name, body)?;
        let n = d.len();
        let m = DMatrix::from_diagonal(&DVector::from_vec(d.clone()));
        let inverse = d.iter().all(|&x| x != 0.0).then(|| {
            Arc::new(LinearMap::new(DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                d.iter().map(|x| 1.0 / x),
            )))) as Arc<dyn super::VectorMap>
        });
        return Ok(SystemSpec::map(
            name,
            Geometry::Euclidean,
            Arc::new(LinearMap::new(m)),
            inverse,
        ));
    }
    if let Some(body) = name.strip_prefix("circle-rotation:") {
        let theta = parse_list(name, body)?;
        if theta.len() != 1 {
            return Err(Error::Malformed(format!("`{name}` takes one angle")));
        }
        let forward = LinearMap::affine(DMatrix::identity(1, 1), DVector::from_vec(theta.clone()));
        let back = LinearMap::affine(DMatrix::identity(1, 1), DVector::from_vec(vec![-theta[0]]));
        return Ok(SystemSpec::map(
            name,
            Geometry::Torus,
            Arc::new(forward),
            Some(Arc::new(back)),
        ));
    }
    match name {
        "cat" => Ok(cat()),
        "cat-perturbed" => {
            if !(opts.eps.abs() * std::f64::consts::TAU < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "cat-perturbed needs |eps| < 1/(2π) to stay invertible, got {}",
                    opts.eps
                )));
            }
            Ok(SystemSpec::map(
                "cat-perturbed",
                Geometry::Torus,
                Arc::new(CatPerturbed { eps: opts.eps }),
                Some(Arc::new(CatPerturbedInverse { eps: opts.eps })),
            ))
        }
        // Weakly damped rotation in the (w1, w2) plane with unit drift along w3.
        "rotation-flow" => Ok(SystemSpec::flow(
            "rotation-flow",
            Geometry::Euclidean,
            Arc::new(LinearMap::affine(
                DMatrix::from_row_slice(3, 3, &[0.1, -1.0, 0.0, 1.0, -0.2, 0.0, 0.0, 0.0, 0.0]),
                DVector::from_vec(vec![0.0, 0.0, 1.0]),
            )),
        )),
        "constant-flow" => Ok(SystemSpec::flow(
            "constant-flow",
            Geometry::Euclidean,
            Arc::new(LinearMap::affine(
                DMatrix::zeros(3, 3),
                DVector::from_vec(vec![1.0, 0.5, 0.25]),
            )),
        )),
        _ => Err(Error::UnknownSystem(name.to_string())),
    }
}
