use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Geometry, MappingTorus, SystemSpec, VectorMap};
use crate::error::{Error, Result};

/// Vector field `(y, s) -> (L y, 1)` whose time-`roof` map is the linear
/// base map on the zero section.
#[derive(Debug, Clone)]
pub struct SuspensionField {
    generator: DMatrix<f64>,
}

impl VectorMap for SuspensionField {
    fn dim(&self) -> usize {
        self.generator.nrows() + 1
    }

    fn eval(&self, w: &DVector<f64>) -> DVector<f64> {
        let n = self.generator.nrows();
        let mut out = DVector::zeros(n + 1);
        let ly = &self.generator * w.rows(0, n);
        out.rows_mut(0, n).copy_from(&ly);
        out[n] = 1.0;
        out
    }

    fn jacobian(&self, _w: &DVector<f64>) -> DMatrix<f64> {
        let n = self.generator.nrows();
        let mut j = DMatrix::zeros(n + 1, n + 1);
        j.view_mut((0, 0), (n, n)).copy_from(&self.generator);
        j
    }
}

/// Suspension of a linear map with unit speed along the fiber.
///
/// States are `(y, s)` with `s` in `[0, roof)`. The flow is smooth in the
/// covering chart; on the quotient the fiber wraps and, for toral bases,
/// `y` is reduced modulo the lattice `exp(s L) Z^n`.
#[derive(Debug, Clone)]
pub struct SuspensionSystem {
    pub base_map: SystemSpec,
    pub roof: f64,
    torus: Arc<MappingTorus>,
    field: Arc<SuspensionField>,
}

/// Build the suspension flow of `map` with constant roof function.
pub fn suspend(map: &SystemSpec, roof: f64) -> Result<SuspensionSystem> {
    map.require_map()?;
    let matrix = map.linear_part().ok_or_else(|| {
        Error::Unsupported(format!(
            "suspension of `{}` needs a linear base map",
            map.name
        ))
    })?;
    let lattice = matches!(map.geometry, Geometry::Torus);
    let torus = Arc::new(MappingTorus::new(&matrix, roof, lattice)?);
    let field = Arc::new(SuspensionField {
        generator: torus.generator(),
    });
    Ok(SuspensionSystem {
        base_map: map.clone(),
        roof,
        torus,
        field,
    })
}

impl SuspensionSystem {
    /// The flow on the mapping torus.
    pub fn flow(&self) -> SystemSpec {
        SystemSpec::flow(
            format!("suspension:{}", self.base_map.name),
            Geometry::MappingTorus(self.torus.clone()),
            self.field.clone(),
        )
    }

    /// The same vector field on the covering space, without any reduction.
    pub fn covering_flow(&self) -> SystemSpec {
        SystemSpec::flow(
            format!("suspension:{}(covering)", self.base_map.name),
            Geometry::Euclidean,
            self.field.clone(),
        )
    }

    pub fn generator(&self) -> DMatrix<f64> {
        self.torus.generator()
    }

    /// `(w, 0)`.
    pub fn embed(&self, base_point: &DVector<f64>) -> DVector<f64> {
        let n = base_point.len();
        let mut w = DVector::zeros(n + 1);
        w.rows_mut(0, n).copy_from(base_point);
        w
    }

    /// Base coordinates of a state flowed back to the zero section.
    pub fn base_point(&self, state: &DVector<f64>) -> DVector<f64> {
        let n = state.len() - 1;
        let mut y = self.torus.exp(-state[n]) * state.rows(0, n);
        self.base_map.geometry.reduce(&mut y);
        y
    }
}
