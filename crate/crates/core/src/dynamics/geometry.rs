use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;

/// The space a system lives on. Tangent vectors are always expressed in
/// the covering chart; reductions only touch them through the derivative
/// of the deck transformation, which is the identity except on mapping tori.
#[derive(Clone, Debug)]
pub enum Geometry {
    Euclidean,
    /// Unit torus, coordinates taken mod 1.
    Torus,
    /// Mapping torus of a linear map, state `(y, s)` with fiber height `s`.
    MappingTorus(Arc<MappingTorus>),
}

/// Mapping torus of a linear map `A = exp(roof * L)` with `L` real and
/// diagonalisable. Base coordinates `y` at fiber height `s` are reduced
/// modulo the moving lattice `exp(s L) Z^n` when the base is a torus.
#[derive(Debug, Clone)]
pub struct MappingTorus {
    pub roof: f64,
    base_dim: usize,
    eigvecs: DMatrix<f64>,
    eigvecs_inv: DMatrix<f64>,
    /// Eigenvalues of `L` (log multipliers per unit time).
    rates: Vec<f64>,
    lattice: bool,
}

impl MappingTorus {
    /// Requires a real diagonalisable `matrix` with positive spectrum.
    pub fn new(matrix: &DMatrix<f64>, roof: f64, lattice: bool) -> Result<Self> {
        if !(roof > 0.0 && roof.is_finite()) {
            return Err(Error::InvalidParameter(format!("roof must be positive, got {roof}")));
        }
        let n = matrix.nrows();
        let off_diag = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .any(|(i, j)| matrix[(i, j)] != 0.0);
        let (values, vecs) = if !off_diag {
            ((0..n).map(|i| matrix[(i, i)]).collect(), DMatrix::identity(n, n))
        } else {
            linalg::real_eigen(matrix).ok_or_else(|| {
                Error::Unsupported("suspension needs a base matrix with real spectrum".into())
            })?
        };
        if values.iter().any(|&v| v <= 0.0) {
            return Err(Error::Unsupported(
                "suspension needs a base matrix with positive eigenvalues".into(),
            ));
        }
        let inv = vecs.clone().try_inverse().ok_or_else(|| {
            Error::Unsupported("suspension needs a diagonalisable base matrix".into())
        })?;
        Ok(MappingTorus {
            roof,
            base_dim: n,
            eigvecs: vecs,
            eigvecs_inv: inv,
            rates: values.iter().map(|v| v.ln() / roof).collect(),
            lattice,
        })
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn has_lattice(&self) -> bool {
        self.lattice
    }

    /// The generator `L` with `exp(roof L) = A`.
    pub fn generator(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_vec(self.rates.clone()));
        &self.eigvecs * d * &self.eigvecs_inv
    }

    /// `exp(s L)`.
    pub fn exp(&self, s: f64) -> DMatrix<f64> {
        let d = DVector::from_iterator(self.base_dim, self.rates.iter().map(|r| (r * s).exp()));
        &self.eigvecs * DMatrix::from_diagonal(&d) * &self.eigvecs_inv
    }

    fn shear(&self, s: f64, k: &DVector<f64>, sign: f64) -> DMatrix<f64> {
        let n = self.base_dim;
        let col = self.generator() * self.exp(s) * k * sign;
        let mut d = DMatrix::identity(n + 1, n + 1);
        for i in 0..n {
            d[(i, n)] = col[i];
        }
        d
    }

    fn reduce(&self, w: &mut DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.base_dim;
        let mut s = w[n].rem_euclid(self.roof);
        if s >= self.roof {
            s = 0.0;
        }
        w[n] = s;
        if !self.lattice {
            return None;
        }
        let y = w.rows(0, n).into_owned();
        let z = self.exp(-s) * &y;
        let k = z.map(|c| c.floor());
        if k.iter().all(|&c| c == 0.0) {
            return None;
        }
        let shifted = y - self.exp(s) * &k;
        w.rows_mut(0, n).copy_from(&shifted);
        Some(self.shear(s, &k, -1.0))
    }

    fn displacement(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let n = self.base_dim;
        let mut best: Option<DVector<f64>> = None;
        for j in [-1.0, 0.0, 1.0] {
            let ds = b[n] + j * self.roof - a[n];
            let mut dy = b.rows(0, n) - a.rows(0, n);
            if self.lattice {
                let mid = a[n] + 0.5 * ds;
                let dz = (self.exp(-mid) * &dy).map(|c| c - c.round());
                dy = self.exp(mid) * dz;
            }
            let mut d = DVector::zeros(n + 1);
            d.rows_mut(0, n).copy_from(&dy);
            d[n] = ds;
            if best.as_ref().is_none_or(|b| d.norm() < b.norm()) {
                best = Some(d);
            }
        }
        best.expect("three candidates")
    }
}

/// A deck transformation of the covering chart.
#[derive(Clone, Debug, PartialEq)]
pub enum Deck {
    Identity,
    Translate(DVector<f64>),
    /// Fiber shift by `shift` followed by the lattice vector `k` at the new height.
    Twisted { shift: f64, k: DVector<f64> },
}

impl Deck {
    pub fn apply(&self, geometry: &Geometry, p: &DVector<f64>) -> DVector<f64> {
        match (self, geometry) {
            (Deck::Identity, _) => p.clone(),
            (Deck::Translate(k), _) => p + k,
            (Deck::Twisted { shift, k }, Geometry::MappingTorus(mt)) => {
                let n = mt.base_dim;
                let s = p[n] + shift;
                let mut q = p.clone();
                let dy = mt.exp(s) * k;
                for i in 0..n {
                    q[i] += dy[i];
                }
                q[n] = s;
                q
            }
            (Deck::Twisted { .. }, _) => p.clone(),
        }
    }

    pub fn derivative(&self, geometry: &Geometry, p: &DVector<f64>) -> DMatrix<f64> {
        let d = p.len();
        match (self, geometry) {
            (Deck::Twisted { shift, k }, Geometry::MappingTorus(mt)) => {
                mt.shear(p[mt.base_dim] + shift, k, 1.0)
            }
            _ => DMatrix::identity(d, d),
        }
    }
}

impl Geometry {
    /// Reduce `w` in place to its fundamental domain. Returns the derivative
    /// of the applied deck transformation when it is not the identity.
    pub fn reduce(&self, w: &mut DVector<f64>) -> Option<DMatrix<f64>> {
        match self {
            Geometry::Euclidean => None,
            Geometry::Torus => {
                for c in w.iter_mut() {
                    let mut r = c.rem_euclid(1.0);
                    if r >= 1.0 {
                        r = 0.0;
                    }
                    *c = r;
                }
                None
            }
            Geometry::MappingTorus(mt) => mt.reduce(w),
        }
    }

    /// Shortest displacement from `a` to `b`.
    pub fn displacement(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        match self {
            Geometry::Euclidean => b - a,
            Geometry::Torus => (b - a).map(|d| d - d.round()),
            Geometry::MappingTorus(mt) => mt.displacement(a, b),
        }
    }

    /// Distance on the geometry: Euclidean, or the minimum over integer
    /// translates on the torus.
    pub fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self {
            Geometry::Euclidean => a.iter().zip(b.iter()).map(|(x, y)| (y - x).powi(2)).sum::<f64>().sqrt(),
            Geometry::Torus => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| {
                    let d = y - x;
                    (d - d.round()).powi(2)
                })
                .sum::<f64>()
                .sqrt(),
            Geometry::MappingTorus(_) => self.displacement(a, b).norm(),
        }
    }

    /// Deck transformation `γ` such that `γ(c)` is the translate of `c`
    /// closest to the covering-space point `q`.
    pub fn deck_towards(&self, q: &DVector<f64>, c: &DVector<f64>) -> Deck {
        match self {
            Geometry::Euclidean => Deck::Identity,
            Geometry::Torus => {
                let k = (q - c).map(|d| d.round());
                if k.iter().all(|&x| x == 0.0) {
                    Deck::Identity
                } else {
                    Deck::Translate(k)
                }
            }
            Geometry::MappingTorus(mt) => {
                let n = mt.base_dim;
                let j = ((q[n] - c[n]) / mt.roof).round();
                let shift = j * mt.roof;
                let k = if mt.lattice {
                    let dy = q.rows(0, n) - c.rows(0, n);
                    (mt.exp(-(c[n] + shift)) * dy).map(|x| x.round())
                } else {
                    DVector::zeros(n)
                };
                Deck::Twisted { shift, k }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Euclidean => "euclidean",
            Geometry::Torus => "torus",
            Geometry::MappingTorus(_) => "mapping-torus",
        }
    }

    /// Whether two geometries measure distances the same way.
    pub fn compatible(&self, other: &Geometry) -> bool {
        match (self, other) {
            (Geometry::Euclidean, Geometry::Euclidean) | (Geometry::Torus, Geometry::Torus) => true,
            (Geometry::MappingTorus(a), Geometry::MappingTorus(b)) => {
                a.roof == b.roof && a.rates == b.rates && a.lattice == b.lattice
            }
            _ => false,
        }
    }
}

impl PartialEq for Geometry {
    fn eq(&self, other: &Geometry) -> bool {
        self.compatible(other)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum GeometryRepr {
    Euclidean,
    Torus,
    MappingTorus {
        roof: f64,
        eigenvectors: Vec<Vec<f64>>,
        rates: Vec<f64>,
        lattice: bool,
    },
}

impl Serialize for Geometry {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            Geometry::Euclidean => GeometryRepr::Euclidean,
            Geometry::Torus => GeometryRepr::Torus,
            Geometry::MappingTorus(mt) => GeometryRepr::MappingTorus {
                roof: mt.roof,
                eigenvectors: mt
                    .eigvecs
                    .row_iter()
                    .map(|r| r.iter().cloned().collect())
                    .collect(),
                rates: mt.rates.clone(),
                lattice: mt.lattice,
            },
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Geometry {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match GeometryRepr::deserialize(deserializer)? {
            GeometryRepr::Euclidean => Ok(Geometry::Euclidean),
            GeometryRepr::Torus => Ok(Geometry::Torus),
            GeometryRepr::MappingTorus {
                roof,
                eigenvectors,
                rates,
                lattice,
            } => {
                let n = rates.len();
                if eigenvectors.len() != n || eigenvectors.iter().any(|r| r.len() != n) {
                    return Err(D::Error::custom("eigenvector matrix has wrong shape"));
                }
                let flat: Vec<f64> = eigenvectors.into_iter().flatten().collect();
                let eigvecs = DMatrix::from_row_slice(n, n, &flat);
                let eigvecs_inv = eigvecs
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| D::Error::custom("singular eigenvector matrix"))?;
                Ok(Geometry::MappingTorus(Arc::new(MappingTorus {
                    roof,
                    base_dim: n,
                    eigvecs,
                    eigvecs_inv,
                    rates,
                    lattice,
                })))
            }
        }
    }
}
