//! Dynamical systems: discrete maps and nonsingular flows, their evolution
//! and tangent cocycles, plus suspension flows built from maps.

mod custom;
mod geometry;
mod integrate;
mod models;
mod registry;
mod suspension;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use custom::{load_system, system_from_json, CustomSystem};
pub use geometry::{Deck, Geometry, MappingTorus};
pub use integrate::{evolve_flow, evolve_map, evolve_tangent, flow_step, Span, Trajectory};
pub use models::{CatPerturbed, CatPerturbedInverse, LinearMap, Term, TermField};
pub use registry::{lookup, RegistryOptions, REGISTRY_NAMES};
pub use suspension::{suspend, SuspensionField, SuspensionSystem};

/// Below this speed a flow is treated as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-10;

/// Default fixed integration step for flows.
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    #[serde(rename = "discrete-map", alias = "map")]
    Map,
    Flow,
}

/// A smooth map `R^d -> R^d` together with its derivative. For maps this is
/// `g` and `Dg`; for flows it is the vector field `S` and `S'`.
pub trait VectorMap: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn eval(&self, w: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&self, w: &DVector<f64>) -> DMatrix<f64>;

    /// The integer matrix of a linear toral automorphism, when this is one.
    fn integer_matrix(&self) -> Option<DMatrix<i64>> {
        None
    }

    /// The matrix `M` when the map is `w -> M w`.
    fn linear_part(&self) -> Option<DMatrix<f64>> {
        None
    }
}

/// A named dynamical system on a given geometry.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub name: String,
    pub kind: SystemKind,
    pub geometry: Geometry,
    field: Arc<dyn VectorMap>,
    inverse: Option<Arc<dyn VectorMap>>,
}

impl SystemSpec {
    pub fn map(
        name: impl Into<String>,
        geometry: Geometry,
        map: Arc<dyn VectorMap>,
        inverse: Option<Arc<dyn VectorMap>>,
    ) -> Self {
        SystemSpec {
            name: name.into(),
            kind: SystemKind::Map,
            geometry,
            field: map,
            inverse,
        }
    }

    pub fn flow(name: impl Into<String>, geometry: Geometry, field: Arc<dyn VectorMap>) -> Self {
        SystemSpec {
            name: name.into(),
            kind: SystemKind::Flow,
            geometry,
            field,
            inverse: None,
        }
    }

    pub fn is_flow(&self) -> bool {
        self.kind == SystemKind::Flow
    }

    /// Length of state vectors (the ambient dimension `n + 1` for flows).
    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    /// Dimension of the tangent directions that carry exponents: `n` for a
    /// flow in `n + 1` dimensions, the full dimension for a map.
    pub fn transversal_dim(&self) -> usize {
        match self.kind {
            SystemKind::Map => self.dim(),
            SystemKind::Flow => self.dim() - 1,
        }
    }

    /// Raw evaluation of the map or vector field (no reduction).
    pub fn evaluate(&self, w: &DVector<f64>) -> DVector<f64> {
        self.field.eval(w)
    }

    pub fn jacobian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        self.field.jacobian(w)
    }

    pub fn integer_matrix(&self) -> Option<DMatrix<i64>> {
        self.field.integer_matrix()
    }

    pub fn linear_part(&self) -> Option<DMatrix<f64>> {
        self.field.linear_part()
    }

    pub fn has_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    /// The inverse map as a system of its own.
    pub fn inverted(&self) -> Result<SystemSpec> {
        self.require_map()?;
        let inverse = self.inverse.clone().ok_or_else(|| Error::MissingInverse {
            system: self.name.clone(),
        })?;
        Ok(SystemSpec {
            name: format!("{}^-1", self.name),
            kind: SystemKind::Map,
            geometry: self.geometry.clone(),
            field: inverse,
            inverse: Some(self.field.clone()),
        })
    }

    pub(crate) fn require_map(&self) -> Result<()> {
        if self.kind != SystemKind::Map {
            return Err(Error::WrongKind {
                expected: "discrete map",
                system: self.name.clone(),
            });
        }
        Ok(())
    }

    pub(crate) fn require_flow(&self) -> Result<()> {
        if self.kind != SystemKind::Flow {
            return Err(Error::WrongKind {
                expected: "flow",
                system: self.name.clone(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_dim(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        Ok(())
    }

    /// One forward step of a map, reduced to the geometry.
    pub fn map_step(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.require_map()?;
        let mut next = self.field.eval(w);
        check_finite(&next)?;
        self.geometry.reduce(&mut next);
        Ok(next)
    }

    /// One backward step of a map through its explicit inverse.
    pub fn map_step_back(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.require_map()?;
        let inverse = self.inverse.as_ref().ok_or_else(|| Error::MissingInverse {
            system: self.name.clone(),
        })?;
        let mut prev = inverse.eval(w);
        check_finite(&prev)?;
        self.geometry.reduce(&mut prev);
        Ok(prev)
    }

    /// Derivative of the inverse map at `w`.
    pub fn inverse_jacobian(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        let inverse = self.inverse.as_ref().ok_or_else(|| Error::MissingInverse {
            system: self.name.clone(),
        })?;
        Ok(inverse.jacobian(w))
    }

    /// Flow velocity `S(w)`, rejecting singular points.
    pub fn velocity(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.field.eval(w);
        let norm = s.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite {
                at: w.iter().cloned().collect(),
            });
        }
        if norm < SINGULAR_THRESHOLD {
            return Err(Error::SingularField {
                at: w.iter().cloned().collect(),
                norm,
            });
        }
        Ok(s)
    }
}

pub(crate) fn check_finite(w: &DVector<f64>) -> Result<()> {
    if w.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            at: w.iter().cloned().collect(),
        })
    }
}
