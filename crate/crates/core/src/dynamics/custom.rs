use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::models::{LinearMap, Term, TermField};
use super::{Geometry, SystemKind, SystemSpec, VectorMap};
use crate::error::{Error, Result};

/// JSON description of a user-supplied system.
///
/// Exactly one of `matrix` (affine `M w + offset`) or `terms` must be given.
/// Linear maps get an inverse automatically when `M` is invertible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomSystem {
    #[serde(default)]
    pub name: Option<String>,
    pub kind: SystemKind,
    pub dimension: usize,
    pub geometry: String,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
    #[serde(default)]
    pub terms: Option<Vec<Term>>,
}

impl CustomSystem {
    pub fn build(&self) -> Result<SystemSpec> {
        let n = self.dimension;
        if n == 0 {
            return Err(Error::Malformed("dimension must be positive".into()));
        }
        let geometry = match self.geometry.as_str() {
            "torus" => Geometry::Torus,
            "euclidean" => Geometry::Euclidean,
            other => return Err(Error::Malformed(format!("unknown geometry `{other}`"))),
        };
        let name = self.name.clone().unwrap_or_else(|| "custom".to_string());
        let (field, inverse): (Arc<dyn VectorMap>, Option<Arc<dyn VectorMap>>) =
            match (&self.matrix, &self.terms) {
                (Some(rows), None) => {
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        return Err(Error::Malformed(format!("matrix must be {n}x{n}")));
                    }
                    let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
                    let m = DMatrix::from_row_slice(n, n, &flat);
                    let b = match &self.offset {
                        Some(o) if o.len() == n => DVector::from_vec(o.clone()),
                        Some(_) => return Err(Error::Malformed(format!("offset must have {n} entries"))),
                        None => DVector::zeros(n),
                    };
                    let inverse = match self.kind {
                        SystemKind::Map => m.clone().try_inverse().map(|mi| {
                            let bi = -(&mi * &b);
                            Arc::new(LinearMap::affine(mi, bi)) as Arc<dyn VectorMap>
                        }),
                        SystemKind::Flow => None,
                    };
                    (Arc::new(LinearMap::affine(m, b)), inverse)
                }
                (None, Some(terms)) => (
                    Arc::new(TermField::new(n, terms.clone()).map_err(Error::Malformed)?),
                    None,
                ),
                _ => {
                    return Err(Error::Malformed(
                        "exactly one of `matrix` or `terms` is required".into(),
                    ))
                }
            };
        Ok(match self.kind {
            SystemKind::Map => SystemSpec::map(name, geometry, field, inverse),
            SystemKind::Flow => SystemSpec::flow(name, geometry, field),
        })
    }
}

pub fn system_from_json(text: &str) -> Result<SystemSpec> {
    let custom: CustomSystem =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    custom.build()
}

pub fn load_system(path: &Path) -> Result<SystemSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    system_from_json(&text)
}
