//! Finitely supported measures, observables and the bounded-Lipschitz
//! distance.

mod transport;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::{Geometry, SystemSpec, Trajectory};
use crate::error::{Error, Result};
use crate::shadowing::{first_return, refine_periodic, PeriodicOrbit};

/// Atom count above which a measure is thinned before the exact distance
/// computation.
pub const MAX_EXACT_ATOMS: usize = 2048;

/// Where a measure came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Empirical { start: Vec<f64>, horizon: f64 },
    Periodic { point: Vec<f64>, period: f64 },
    Custom,
}

/// A probability measure with finitely many atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<DVector<f64>>,
    weights: Vec<f64>,
    pub geometry: Geometry,
    pub provenance: Provenance,
}

impl DiscreteMeasure {
    /// Weights must be finite and nonnegative with positive total; they are
    /// normalised to total mass one.
    pub fn new(
        atoms: Vec<DVector<f64>>,
        weights: Vec<f64>,
        geometry: Geometry,
        provenance: Provenance,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty);
        }
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        let d = atoms[0].len();
        if let Some(bad) = atoms.iter().find(|a| a.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("total mass must be positive".into()));
        }
        Ok(DiscreteMeasure {
            atoms,
            weights: weights.into_iter().map(|w| w / total).collect(),
            geometry,
            provenance,
        })
    }

    pub fn dirac(x: DVector<f64>, geometry: Geometry) -> Self {
        DiscreteMeasure {
            atoms: vec![x],
            weights: vec![1.0],
            geometry,
            provenance: Provenance::Custom,
        }
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<DVector<f64>>, geometry: Geometry, provenance: Provenance) -> Result<Self> {
        let w = vec![1.0; points.len()];
        DiscreteMeasure::new(points, w, geometry, provenance)
    }

    pub fn atoms(&self) -> &[DVector<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Image measure under one step of a map.
    pub fn push_forward(&self, sys: &SystemSpec) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| sys.map_step(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(DiscreteMeasure {
            atoms,
            weights: self.weights.clone(),
            geometry: self.geometry.clone(),
            provenance: self.provenance.clone(),
        })
    }

    /// Deterministic thinning to at most `k` atoms: consecutive blocks of
    /// atoms are merged into their first member.
    pub fn thinned(&self, k: usize) -> Self {
        let n = self.atoms.len();
        if n <= k || k == 0 {
            return self.clone();
        }
        let mut atoms = Vec::with_capacity(k);
        let mut weights = vec![0.0; k];
        for b in 0..k {
            atoms.push(self.atoms[b * n / k].clone());
        }
        for (i, w) in self.weights.iter().enumerate() {
            weights[i * k / n] += w;
        }
        DiscreteMeasure {
            atoms,
            weights,
            geometry: self.geometry.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    atoms: Vec<Vec<f64>>,
    geometry: Geometry,
    provenance: Provenance,
}

impl Serialize for DiscreteMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureRepr {
            atoms: self
                .atoms
                .iter()
                .zip(&self.weights)
                .map(|(a, w)| a.iter().cloned().chain(std::iter::once(*w)).collect())
                .collect(),
            geometry: self.geometry.clone(),
            provenance: self.provenance.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = MeasureRepr::deserialize(deserializer)?;
        let mut atoms = Vec::with_capacity(repr.atoms.len());
        let mut weights = Vec::with_capacity(repr.atoms.len());
        for mut row in repr.atoms {
            let w = row.pop().ok_or_else(|| D::Error::custom("empty atom"))?;
            atoms.push(DVector::from_vec(row));
            weights.push(w);
        }
        DiscreteMeasure::new(atoms, weights, repr.geometry, repr.provenance)
            .map_err(D::Error::custom)
    }
}

/// A bounded Lipschitz test function with declared bounds.
type Test = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Observable {
    f: Test,
    /// Lipschitz constant `‖φ‖_L`.
    pub lip_bound: f64,
    /// `‖φ‖_∞`.
    pub sup_bound: f64,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("lip_bound", &self.lip_bound)
            .field("sup_bound", &self.sup_bound)
            .finish_non_exhaustive()
    }
}

impl Observable {
    pub fn new(
        f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        lip_bound: f64,
        sup_bound: f64,
    ) -> Self {
        Observable {
            f: Arc::new(f),
            lip_bound,
            sup_bound,
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        (self.f)(x)
    }

    /// `‖φ‖_∞ + ‖φ‖_L`.
    pub fn bl_norm(&self) -> f64 {
        self.sup_bound + self.lip_bound
    }

    pub fn constant(c: f64) -> Self {
        Observable::new(move |_| c, 0.0, c.abs())
    }

    /// `cos(2π k·x)`, well defined on the torus.
    pub fn fourier(k: Vec<i32>) -> Self {
        let norm = k.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        Observable::new(
            move |x| {
                let phase: f64 = k.iter().zip(x.iter()).map(|(&a, b)| a as f64 * b).sum();
                (std::f64::consts::TAU * phase).cos()
            },
            std::f64::consts::TAU * norm,
            1.0,
        )
    }

    /// Tent `max(0, 1 − dist(x, center)/radius)`.
    pub fn bump(center: DVector<f64>, radius: f64, geometry: Geometry) -> Self {
        Observable::new(
            move |x| (1.0 - geometry.distance(x, &center) / radius).max(0.0),
            1.0 / radius,
            1.0,
        )
    }
}

/// `Σ wᵢ φ(xᵢ)`.
pub fn integrate(m: &DiscreteMeasure, f: &Observable) -> f64 {
    m.atoms
        .iter()
        .zip(&m.weights)
        .map(|(a, w)| w * f.eval(a))
        .sum()
}

/// Time average of the first `horizon` steps (maps: `horizon` atoms of weight
/// `1/horizon`) or over `[0, horizon]` (flows: trapezoid weights).
pub fn empirical_measure(traj: &Trajectory, horizon: f64) -> Result<DiscreteMeasure> {
    if traj.is_empty() {
        return Err(Error::Empty);
    }
    let start: Vec<f64> = traj.states[0].iter().cloned().collect();
    let provenance = Provenance::Empirical { start, horizon };
    match traj.step {
        None => {
            if !(horizon >= 1.0) || horizon.fract() != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "map horizon must be a positive integer, got {horizon}"
                )));
            }
            let n = horizon as usize;
            if traj.len() < n {
                return Err(Error::InvalidParameter(format!(
                    "trajectory has {} states, horizon needs {n}",
                    traj.len()
                )));
            }
            DiscreteMeasure::uniform(traj.states[..n].to_vec(), traj.geometry.clone(), provenance)
        }
        Some(_) => {
            let last = traj.times.last().copied().unwrap_or(0.0);
            if !(horizon > 0.0) || horizon > last * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "flow horizon must lie in (0, {last}], got {horizon}"
                )));
            }
            let k = traj.times.partition_point(|&t| t <= horizon * (1.0 + 1e-12));
            if k < 2 {
                return Err(Error::Empty);
            }
            let mut weights = vec![0.0; k];
            for i in 0..k - 1 {
                let dt = traj.times[i + 1] - traj.times[i];
                weights[i] += 0.5 * dt;
                weights[i + 1] += 0.5 * dt;
            }
            DiscreteMeasure::new(traj.states[..k].to_vec(), weights, traj.geometry.clone(), provenance)
        }
    }
}

/// Uniform measure on a verified periodic orbit (equally spaced samples
/// along one period for flows).
pub fn periodic_measure(orbit: &PeriodicOrbit) -> Result<DiscreteMeasure> {
    if !orbit.verified {
        return Err(Error::UnverifiedOrbit);
    }
    DiscreteMeasure::uniform(
        orbit.cycle.clone(),
        orbit.geometry.clone(),
        Provenance::Periodic {
            point: orbit.point.iter().cloned().collect(),
            period: orbit.period,
        },
    )
}

fn key(x: &DVector<f64>) -> Vec<u64> {
    x.iter().map(|c| (c + 0.0).to_bits()).collect()
}

/// Bounded-Lipschitz distance
/// `sup { ∫φ dm1 − ∫φ dm2 : ‖φ‖_∞ + ‖φ‖_L ≤ 1 }`, exact on the union of the
/// supports. Measures with more than [`MAX_EXACT_ATOMS`] atoms are thinned
/// first.
pub fn bl_distance(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Result<f64> {
    if !m1.geometry.compatible(&m2.geometry) {
        return Err(Error::GeometryMismatch);
    }
    if m1.atoms[0].len() != m2.atoms[0].len() {
        return Err(Error::DimensionMismatch {
            expected: m1.atoms[0].len(),
            got: m2.atoms[0].len(),
        });
    }
    let a = m1.thinned(MAX_EXACT_ATOMS);
    let b = m2.thinned(MAX_EXACT_ATOMS);
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut points: Vec<DVector<f64>> = Vec::new();
    let mut nu: Vec<f64> = Vec::new();
    for (m, sign) in [(&a, 1.0), (&b, -1.0)] {
        for (x, w) in m.atoms.iter().zip(&m.weights) {
            let i = *index.entry(key(x)).or_insert_with(|| {
                points.push(x.clone());
                nu.push(0.0);
                points.len() - 1
            });
            nu[i] += sign * w;
        }
    }
    let pos: Vec<usize> = (0..nu.len()).filter(|&i| nu[i] > 1e-15).collect();
    let neg: Vec<usize> = (0..nu.len()).filter(|&i| nu[i] < -1e-15).collect();
    let sp: f64 = pos.iter().map(|&i| nu[i]).sum();
    let sn: f64 = neg.iter().map(|&i| -nu[i]).sum();
    if pos.is_empty() || neg.is_empty() {
        return Ok(0.0);
    }
    let total = 0.5 * (sp + sn);
    let problem = transport::Problem {
        supply: pos.iter().map(|&i| nu[i] * total / sp).collect(),
        demand: neg.iter().map(|&i| -nu[i] * total / sn).collect(),
        dist: pos
            .iter()
            .flat_map(|&i| neg.iter().map(|&j| a.geometry.distance(&points[i], &points[j])).collect::<Vec<_>>())
            .collect(),
    };
    Ok(problem.bl_value())
}

/// One level of the periodic approximation of an empirical measure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproximationRow {
    pub alpha: f64,
    /// First return time of the trajectory start to within `alpha`.
    pub horizon: f64,
    /// Minimal period of the refined orbit.
    pub period: f64,
    pub gap: f64,
    pub bl_distance: f64,
}

/// For each `alpha`, take the first `alpha`-return of the trajectory start,
/// close it up into a periodic orbit and measure the bounded-Lipschitz
/// distance between its periodic measure and the empirical measure over the
/// same horizon. Levels with no return inside the trajectory are skipped.
pub fn periodic_approximations(
    sys: &SystemSpec,
    traj: &Trajectory,
    alphas: &[f64],
    min_span: f64,
    tol: f64,
) -> Result<Vec<ApproximationRow>> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        let Some(seg) = first_return(traj, 0, alpha, min_span)? else {
            log::info!("no return within {alpha} along the trajectory");
            continue;
        };
        let orbit = refine_periodic(sys, &seg, tol)?;
        let empirical = empirical_measure(traj, seg.span)?;
        let periodic = periodic_measure(&orbit)?;
        rows.push(ApproximationRow {
            alpha,
            horizon: seg.span,
            period: orbit.period,
            gap: seg.gap,
            bl_distance: bl_distance(&periodic, &empirical)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{lookup, RegistryOptions};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn weights_are_normalised() {
        let m = DiscreteMeasure::new(
            vec![v(&[0.0]), v(&[1.0])],
            vec![2.0, 6.0],
            Geometry::Euclidean,
            Provenance::Custom,
        )
        .unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
        assert!(DiscreteMeasure::new(vec![v(&[0.0])], vec![-1.0], Geometry::Euclidean, Provenance::Custom).is_err());
        assert_eq!(
            DiscreteMeasure::uniform(vec![], Geometry::Euclidean, Provenance::Custom),
            Err(Error::Empty)
        );
    }

    #[test]
    fn integrate_examples() {
        let d = DiscreteMeasure::dirac(v(&[0.3, 0.4]), Geometry::Torus);
        let f = Observable::fourier(vec![1, 0]);
        assert_eq!(integrate(&d, &f), f.eval(&v(&[0.3, 0.4])));
        let two = DiscreteMeasure::uniform(vec![v(&[0.0]), v(&[5.0])], Geometry::Euclidean, Provenance::Custom).unwrap();
        let bump = Observable::bump(v(&[0.0]), 1.0, Geometry::Euclidean);
        assert_eq!(integrate(&two, &bump), 0.5);
        assert_eq!(integrate(&two, &Observable::constant(2.5)), 2.5);
    }

    #[test]
    fn empirical_map_measure() {
        let sys = lookup("cat", &RegistryOptions::default()).unwrap();
        let traj = Trajectory::orbit(&sys, &v(&[0.0, 0.0]), 3).unwrap();
        let m = empirical_measure(&traj, 3.0).unwrap();
        assert_eq!(m.len(), 3);
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert!(empirical_measure(&traj, 5.0).is_err());
    }

    #[test]
    fn empirical_flow_measure_uses_trapezoid_weights() {
        let sys = lookup("constant-flow", &RegistryOptions::default()).unwrap();
        let traj = Trajectory::integrate(&sys, &v(&[0.0, 0.0, 0.0]), 1.0, 0.25).unwrap();
        let m = empirical_measure(&traj, 1.0).unwrap();
        assert_eq!(m.weights(), &[0.125, 0.25, 0.25, 0.25, 0.125]);
        // Time average of the first coordinate along t ↦ t is 1/2.
        let x = Observable::new(|w| w[0], 1.0, 1.0);
        assert!((integrate(&m, &x) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bl_examples() {
        let a = DiscreteMeasure::dirac(v(&[0.0, 0.0]), Geometry::Euclidean);
        assert_eq!(bl_distance(&a, &a).unwrap(), 0.0);
        for t in [0.1, 0.5, 1.0] {
            let b = DiscreteMeasure::dirac(v(&[t, 0.0]), Geometry::Euclidean);
            let d = bl_distance(&a, &b).unwrap();
            assert!((d - 2.0 * t / (2.0 + t)).abs() < 1e-12);
        }
        let t = DiscreteMeasure::dirac(v(&[0.0, 0.0]), Geometry::Torus);
        assert_eq!(bl_distance(&a, &t), Err(Error::GeometryMismatch));
    }

    #[test]
    fn torus_distance_wraps() {
        let a = DiscreteMeasure::dirac(v(&[0.05]), Geometry::Torus);
        let b = DiscreteMeasure::dirac(v(&[0.95]), Geometry::Torus);
        let d = bl_distance(&a, &b).unwrap();
        assert!((d - 0.2 / 2.1).abs() < 1e-12);
    }

    #[test]
    fn json_layout() {
        let m = DiscreteMeasure::uniform(vec![v(&[0.0, 0.5]), v(&[0.5, 0.0])], Geometry::Torus, Provenance::Custom).unwrap();
        let value = serde_json::to_value(&m).unwrap();
        assert_eq!(value["atoms"], serde_json::json!([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]));
        assert_eq!(value["geometry"]["kind"], "torus");
        let back: DiscreteMeasure = serde_json::from_value(value).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn thinning_keeps_mass() {
        let pts: Vec<_> = (0..10).map(|i| v(&[i as f64])).collect();
        let m = DiscreteMeasure::uniform(pts, Geometry::Euclidean, Provenance::Custom).unwrap();
        let t = m.thinned(3);
        assert_eq!(t.len(), 3);
        assert!((t.total_mass() - 1.0).abs() < 1e-15);
    }
}
