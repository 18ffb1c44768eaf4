use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::VectorMap;

/// Affine map `w -> M w + b`; also used as an affine vector field.
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        LinearMap {
            matrix,
            offset: DVector::zeros(n),
        }
    }

    pub fn affine(matrix: DMatrix<f64>, offset: DVector<f64>) -> Self {
        LinearMap { matrix, offset }
    }

    pub fn from_rows(n: usize, rows: &[f64]) -> Self {
        Self::new(DMatrix::from_row_slice(n, n, rows))
    }
}

impl VectorMap for LinearMap {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn eval(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.matrix * w + &self.offset
    }

    fn jacobian(&self, _w: &DVector<f64>) -> DMatrix<f64> {
        self.matrix.clone()
    }

    fn integer_matrix(&self) -> Option<DMatrix<i64>> {
        let integral = self.matrix.iter().all(|x| x.fract() == 0.0 && x.abs() < 1e15)
            && self.offset.iter().all(|&x| x == 0.0);
        integral.then(|| self.matrix.map(|x| x as i64))
    }

    fn linear_part(&self) -> Option<DMatrix<f64>> {
        self.offset
            .iter()
            .all(|&x| x == 0.0)
            .then(|| self.matrix.clone())
    }
}

/// Cat map with a shear perturbation:
/// `(w1, w2) -> (2 w1 + w2 + eps sin(2π w1), w1 + w2)`.
#[derive(Debug, Clone)]
pub struct CatPerturbed {
    pub eps: f64,
}

impl VectorMap for CatPerturbed {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![
            2.0 * w[0] + w[1] + self.eps * (TAU * w[0]).sin(),
            w[0] + w[1],
        ])
    }

    fn jacobian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[2.0 + self.eps * TAU * (TAU * w[0]).cos(), 1.0, 1.0, 1.0],
        )
    }
}

/// Inverse of [`CatPerturbed`]; solves `w1 + eps sin(2π w1) = u1 - u2` by
/// Newton's method, which is globally monotone for `2π eps < 1`.
#[derive(Debug, Clone)]
pub struct CatPerturbedInverse {
    pub eps: f64,
}

impl CatPerturbedInverse {
    fn solve_first(&self, c: f64) -> f64 {
        let mut x = c;
        for _ in 0..100 {
            let f = x + self.eps * (TAU * x).sin() - c;
            let df = 1.0 + self.eps * TAU * (TAU * x).cos();
            let step = f / df;
            x -= step;
            if step.abs() < 1e-16 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }
}

impl VectorMap for CatPerturbedInverse {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        let w1 = self.solve_first(u[0] - u[1]);
        DVector::from_vec(vec![w1, u[1] - w1])
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let w = self.eval(u);
        let forward = CatPerturbed { eps: self.eps }.jacobian(&w);
        forward
            .try_inverse()
            .expect("perturbed cat map is invertible for small eps")
    }
}

/// One additive term of a component of a [`TermField`].
///
/// Periodic terms use `sin(2π freq w_var)` so that they descend to the torus
/// when `freq` is an integer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "kebab-case")]
pub enum Term {
    Const { out: usize, coef: f64 },
    Linear { out: usize, coef: f64, var: usize },
    Sin { out: usize, coef: f64, var: usize, freq: f64 },
    Cos { out: usize, coef: f64, var: usize, freq: f64 },
    Monomial { out: usize, coef: f64, powers: Vec<u32> },
}

impl Term {
    fn out(&self) -> usize {
        match self {
            Term::Const { out, .. }
            | Term::Linear { out, .. }
            | Term::Sin { out, .. }
            | Term::Cos { out, .. }
            | Term::Monomial { out, .. } => *out,
        }
    }
}

/// A map or field given as a table of additive terms per component.
#[derive(Debug, Clone)]
pub struct TermField {
    dim: usize,
    terms: Vec<Term>,
}

impl TermField {
    pub fn new(dim: usize, terms: Vec<Term>) -> std::result::Result<Self, String> {
        for t in &terms {
            if t.out() >= dim {
                return Err(format!("term output index {} out of range", t.out()));
            }
            let bad_var = match t {
                Term::Linear { var, .. } | Term::Sin { var, .. } | Term::Cos { var, .. } => {
                    *var >= dim
                }
                Term::Monomial { powers, .. } => powers.len() != dim,
                Term::Const { .. } => false,
            };
            if bad_var {
                return Err(format!("term {t:?} refers to a variable out of range"));
            }
        }
        Ok(TermField { dim, terms })
    }
}

impl VectorMap for TermField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for t in &self.terms {
            let v = match t {
                Term::Const { coef, .. } => *coef,
                Term::Linear { coef, var, .. } => coef * w[*var],
                Term::Sin { coef, var, freq, .. } => coef * (TAU * freq * w[*var]).sin(),
                Term::Cos { coef, var, freq, .. } => coef * (TAU * freq * w[*var]).cos(),
                Term::Monomial { coef, powers, .. } => {
                    coef * powers
                        .iter()
                        .zip(w.iter())
                        .map(|(&p, &x)| x.powi(p as i32))
                        .product::<f64>()
                }
            };
            out[t.out()] += v;
        }
        out
    }

    fn jacobian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            match t {
                Term::Const { .. } => {}
                Term::Linear { out, coef, var } => jac[(*out, *var)] += coef,
                Term::Sin { out, coef, var, freq } => {
                    jac[(*out, *var)] += coef * TAU * freq * (TAU * freq * w[*var]).cos()
                }
                Term::Cos { out, coef, var, freq } => {
                    jac[(*out, *var)] -= coef * TAU * freq * (TAU * freq * w[*var]).sin()
                }
                Term::Monomial { out, coef, powers } => {
                    for (j, &pj) in powers.iter().enumerate() {
                        if pj == 0 {
                            continue;
                        }
                        let mut d = coef * pj as f64;
                        for (k, &pk) in powers.iter().enumerate() {
                            let e = if k == j { pk - 1 } else { pk };
                            d *= w[k].powi(e as i32);
                        }
                        jac[(*out, j)] += d;
                    }
                }
            }
        }
        jac
    }
}
