//! Transversal frame flows.
//!
//! Frames are pushed by the tangent cocycle (for flows, the transversal part
//! of it), and reorthonormalised by Gram-Schmidt at a fixed cadence. The logs
//! of the reduced column norms accumulate into per-column growth sums, whose
//! time averages are the finite-time Lyapunov exponents.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::dynamics::{flow_step, Span, SystemSpec};
use crate::error::{Error, Result};

/// Reduced column norms below this are a degenerate frame.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Component of `v` orthogonal to `s`.
pub fn transversal_project(s: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let ss = s.norm_squared();
    if !(ss > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(v - s * (v.dot(s) / ss))
}

fn project_columns(s: &DVector<f64>, x: &mut DMatrix<f64>) {
    let ss = s.norm_squared();
    for mut col in x.column_iter_mut() {
        let c = col.dot(s) / ss;
        col.axpy(-c, s, 1.0);
    }
}

/// Gram-Schmidt on the columns of `x`: returns the orthonormal frame and the
/// logs of the reduced (pre-normalisation) column lengths.
pub fn gram_schmidt_matrix(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut q = x.clone();
    let mut logs = Vec::with_capacity(x.ncols());
    for i in 0..q.ncols() {
        for j in 0..i {
            let (done, mut rest) = q.columns_range_pair_mut(j, i..);
            let mut col = rest.column_mut(0);
            let c = col.dot(&done);
            col.axpy(-c, &done, 1.0);
        }
        let norm = q.column(i).norm();
        if !(norm >= DEGENERACY_THRESHOLD) || !norm.is_finite() {
            return Err(Error::DegenerateFrame {
                column: i,
                norm,
                elapsed: 0.0,
            });
        }
        q.column_mut(i).unscale_mut(norm);
        logs.push(norm.ln());
    }
    Ok((q, logs))
}

/// Gram-Schmidt on a list of vectors.
pub fn gram_schmidt(vectors: &[DVector<f64>]) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    if vectors.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let x = DMatrix::from_columns(vectors);
    let (q, logs) = gram_schmidt_matrix(&x)?;
    Ok((q.column_iter().map(|c| c.into_owned()).collect(), logs))
}

/// A base point with a (transversal) frame and the per-column growth sums.
#[derive(Clone, Debug, Serialize)]
pub struct FrameState {
    pub base: DVector<f64>,
    /// Frame columns; orthonormal right after every reorthonormalisation.
    pub columns: DMatrix<f64>,
    /// Accumulated logs of Gram-Schmidt reduced norms, one per column.
    pub log_growth: Vec<f64>,
    /// Trapezoid integral of the column growth rates (flows only).
    pub rate_integral: Vec<f64>,
    /// Elapsed time (flows) or number of steps (maps).
    pub elapsed: f64,
}

impl FrameState {
    /// Frame from arbitrary columns: projected transversally for flows, then
    /// orthonormalised. Growth sums start at zero.
    pub fn new(sys: &SystemSpec, base: DVector<f64>, columns: DMatrix<f64>) -> Result<Self> {
        sys.check_dim(&base)?;
        let k = columns.ncols();
        if columns.nrows() != sys.dim() {
            return Err(Error::DimensionMismatch {
                expected: sys.dim(),
                got: columns.nrows(),
            });
        }
        if k == 0 || k > sys.transversal_dim() {
            return Err(Error::InvalidParameter(format!(
                "frame needs between 1 and {} columns, got {k}",
                sys.transversal_dim()
            )));
        }
        let mut x = columns;
        if sys.is_flow() {
            let s = sys.velocity(&base)?;
            project_columns(&s, &mut x);
        }
        let (q, _) = gram_schmidt_matrix(&x)?;
        Ok(FrameState {
            base,
            columns: q,
            log_growth: vec![0.0; k],
            rate_integral: vec![0.0; k],
            elapsed: 0.0,
        })
    }

    /// Frame with Gaussian random columns drawn from `seed`.
    pub fn random(sys: &SystemSpec, base: DVector<f64>, k: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = sys.dim();
        let x = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
        FrameState::new(sys, base, x)
    }

    pub fn k(&self) -> usize {
        self.columns.ncols()
    }

    /// `log_growth / elapsed`.
    pub fn averages(&self) -> Vec<f64> {
        self.log_growth.iter().map(|g| g / self.elapsed).collect()
    }
}

/// Growth rate `<u_i, Π S'(w) Π u_i>` of column `i` of an orthonormal
/// transversal frame `q`, with `Π` the projection onto the complement of
/// `span{S(w), u_1, ..., u_{i-1}}`.
fn column_rate(s: &DVector<f64>, jac: &DMatrix<f64>, q: &DMatrix<f64>, i: usize) -> f64 {
    let s_hat = s / s.norm();
    let project = |v: &DVector<f64>| -> DVector<f64> {
        let mut out = v - &s_hat * v.dot(&s_hat);
        for j in 0..i {
            let c = q.column(j);
            out -= c * c.dot(v);
        }
        out
    };
    let u = project(&q.column(i).into_owned());
    u.dot(&(jac * &u))
}

fn all_rates(sys: &SystemSpec, base: &DVector<f64>, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let s = sys.velocity(base)?;
    let jac = sys.jacobian(base);
    let (q, _) = gram_schmidt_matrix(x)?;
    Ok((0..q.ncols()).map(|i| column_rate(&s, &jac, &q, i)).collect())
}

/// Instantaneous growth rate of one column of a flow frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateSample {
    pub base: DVector<f64>,
    pub column_index: usize,
    pub value: f64,
}

/// Analytic growth rate of column `i` (zero-based) of the frame.
pub fn qualitative_rate(sys: &SystemSpec, fs: &FrameState, i: usize) -> Result<RateSample> {
    sys.require_flow()?;
    if i >= fs.k() {
        return Err(Error::InvalidParameter(format!(
            "column {i} out of range for a {}-frame",
            fs.k()
        )));
    }
    let s = sys.velocity(&fs.base)?;
    let mut x = fs.columns.clone();
    project_columns(&s, &mut x);
    let (q, _) = gram_schmidt_matrix(&x)?;
    let value = column_rate(&s, &sys.jacobian(&fs.base), &q, i);
    Ok(RateSample {
        base: fs.base.clone(),
        column_index: i,
        value,
    })
}

fn with_elapsed(e: Error, elapsed: f64) -> Error {
    match e {
        Error::DegenerateFrame { column, norm, .. } => Error::DegenerateFrame {
            column,
            norm,
            elapsed,
        },
        other => other,
    }
}

fn reorthonormalise(fs: &mut FrameState, x: &mut DMatrix<f64>) -> Result<()> {
    let (q, logs) = gram_schmidt_matrix(x).map_err(|e| with_elapsed(e, fs.elapsed))?;
    for (g, l) in fs.log_growth.iter_mut().zip(logs) {
        *g += l;
    }
    *x = q;
    Ok(())
}

/// Evolve a frame by `span`, reorthonormalising every `reorth_every` steps
/// and once more at the end so the growth sums cover the whole span.
///
/// Between reorthonormalisations the columns follow the raw (transversal)
/// tangent cocycle. For flows the column rates are integrated with the
/// trapezoid rule at every integrator step.
pub fn evolve_frame(
    sys: &SystemSpec,
    fs: &FrameState,
    span: Span,
    reorth_every: usize,
) -> Result<FrameState> {
    if reorth_every == 0 {
        return Err(Error::InvalidParameter("reorth_every must be positive".into()));
    }
    let mut out = fs.clone();
    let mut x = fs.columns.clone();
    let mut pending = 0usize;
    match span {
        Span::Steps(n) => {
            sys.require_map()?;
            if n < 0 {
                return Err(Error::InvalidParameter(
                    "frames evolve forward; use the inverse system for backward runs".into(),
                ));
            }
            for _ in 0..n {
                x = sys.jacobian(&out.base) * x;
                out.base = sys.map_step(&out.base)?;
                out.elapsed += 1.0;
                pending += 1;
                if pending == reorth_every {
                    reorthonormalise(&mut out, &mut x)?;
                    pending = 0;
                }
            }
        }
        Span::Time { t, h } => {
            sys.require_flow()?;
            if !(h > 0.0) || !(t >= 0.0) || !t.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "need t >= 0 and h > 0, got t = {t}, h = {h}"
                )));
            }
            let n = (t / h).ceil() as usize;
            let dt = if n > 0 { t / n as f64 } else { 0.0 };
            let mut rates = all_rates(sys, &out.base, &x)?;
            for _ in 0..n {
                flow_step(sys, &mut out.base, Some(&mut x), dt)?;
                let s = sys.velocity(&out.base)?;
                project_columns(&s, &mut x);
                out.elapsed += dt;
                let next = all_rates(sys, &out.base, &x).map_err(|e| with_elapsed(e, out.elapsed))?;
                for ((acc, a), b) in out.rate_integral.iter_mut().zip(&rates).zip(&next) {
                    *acc += 0.5 * dt * (a + b);
                }
                rates = next;
                pending += 1;
                if pending == reorth_every {
                    reorthonormalise(&mut out, &mut x)?;
                    pending = 0;
                }
            }
        }
    }
    if pending > 0 {
        reorthonormalise(&mut out, &mut x)?;
    }
    out.columns = x;
    Ok(out)
}

/// Both sides of the growth identity for one transported direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthRecord {
    pub time: f64,
    /// `log |Ψ_T x|` for the normalised transversal part of `x`.
    pub log_norm: f64,
    /// `∫_0^T ω*(Ψ♯(t, (w, x))) dt`.
    pub rate_integral: f64,
}

/// Transport one transversal direction for time `t` with step `h`.
pub fn transported_growth(
    sys: &SystemSpec,
    w: &DVector<f64>,
    x: &DVector<f64>,
    t: f64,
    h: f64,
) -> Result<GrowthRecord> {
    let fs = FrameState::new(sys, w.clone(), DMatrix::from_column_slice(x.len(), 1, x.as_slice()))?;
    let end = evolve_frame(sys, &fs, Span::Time { t, h }, 1)?;
    Ok(GrowthRecord {
        time: end.elapsed,
        log_norm: end.log_growth[0],
        rate_integral: end.rate_integral[0],
    })
}
