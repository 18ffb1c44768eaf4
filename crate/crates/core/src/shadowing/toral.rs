use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{summarise_exponents, PeriodicOrbit, MONODROMY_LOG_SPREAD};
use crate::dynamics::{Geometry, SystemKind};
use crate::error::{Error, Result};
use crate::linalg::eigen_magnitudes;

/// A point of the torus with rational coordinates `numerators / denominator`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactPoint {
    pub numerators: Vec<i64>,
    pub denominator: i64,
}

type IMat = Vec<Vec<i128>>;

fn overflow() -> Error {
    Error::InvalidParameter("integer overflow in exact periodic-point arithmetic".into())
}

fn mul(a: &IMat, b: &IMat) -> Result<IMat> {
    let n = a.len();
    let mut out = vec![vec![0i128; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0i128;
            for k in 0..n {
                s = a[i][k]
                    .checked_mul(b[k][j])
                    .and_then(|x| s.checked_add(x))
                    .ok_or_else(overflow)?;
            }
            out[i][j] = s;
        }
    }
    Ok(out)
}

/// Bareiss fraction-free determinant.
fn det(a: &IMat) -> Result<i128> {
    let n = a.len();
    if n == 0 {
        return Ok(1);
    }
    let mut m = a.clone();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&r| m[r][k] != 0) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return Ok(0),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = m[i][j]
                    .checked_mul(m[k][k])
                    .zip(m[i][k].checked_mul(m[k][j]))
                    .and_then(|(x, y)| x.checked_sub(y))
                    .ok_or_else(overflow)?;
                m[i][j] = v / prev;
            }
        }
        prev = m[k][k];
    }
    Ok(sign * m[n - 1][n - 1])
}

fn adjugate(a: &IMat) -> Result<IMat> {
    let n = a.len();
    if n == 1 {
        return Ok(vec![vec![1]]);
    }
    let mut adj = vec![vec![0i128; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: IMat = (0..n)
                .filter(|&r| r != j)
                .map(|r| (0..n).filter(|&c| c != i).map(|c| a[r][c]).collect())
                .collect();
            let s = if (i + j) % 2 == 0 { 1 } else { -1 };
            adj[i][j] = s * det(&minor)?;
        }
    }
    Ok(adj)
}

/// Diagonal of a lower-triangular basis `H = B U` of the lattice `B Z^n`.
fn hermite_diagonal(b: &IMat) -> Result<Vec<i128>> {
    let n = b.len();
    let mut h = b.clone();
    for i in 0..n {
        for j in i + 1..n {
            // Column gcd step on (i, j) so that h[i][j] becomes zero.
            while h[i][j] != 0 {
                let q = h[i][i].checked_div(h[i][j]).unwrap_or(0);
                for r in 0..n {
                    let v = h[r][i]
                        .checked_sub(q.checked_mul(h[r][j]).ok_or_else(overflow)?)
                        .ok_or_else(overflow)?;
                    h[r][i] = v;
                }
                for row in h.iter_mut() {
                    row.swap(i, j);
                }
            }
        }
    }
    Ok((0..n).map(|i| h[i][i].abs()).collect())
}

fn apply_mod(a: &IMat, r: &[i128], d: i128) -> Vec<i128> {
    a.iter()
        .map(|row| {
            row.iter()
                .zip(r)
                .fold(0i128, |s, (x, y)| (s + (x.rem_euclid(d)) * y).rem_euclid(d))
        })
        .collect()
}

/// All points of the torus fixed by `A^m`, grouped into orbits of `A`.
///
/// Solutions of `(A^m − I) p ≡ 0 (mod 1)` are `p = (A^m − I)^{-1} k` for `k`
/// running over coset representatives of `Z^n / (A^m − I) Z^n`, read off a
/// triangular basis of that lattice; there are `|det(A^m − I)|` of them.
/// Orbits are sorted by period, then by their smallest point.
pub fn enumerate_periodic_toral(a: &DMatrix<i64>, m: usize) -> Result<Vec<PeriodicOrbit>> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidParameter("matrix must be square and nonempty".into()));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("period must be positive".into()));
    }
    let ai: IMat = (0..n).map(|i| (0..n).map(|j| a[(i, j)] as i128).collect()).collect();
    let mut power: IMat = (0..n).map(|i| (0..n).map(|j| i128::from(i == j)).collect()).collect();
    for _ in 0..m {
        power = mul(&ai, &power)?;
    }
    let mut b = power;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= 1;
    }
    let d = det(&b)?;
    if d == 0 {
        return Err(Error::NonHyperbolicPeriod { period: m });
    }
    let big = d.abs();
    if big > 50_000_000 {
        return Err(Error::InvalidParameter(format!(
            "{big} periodic points of period {m} are too many to enumerate"
        )));
    }
    let adj = adjugate(&b)?;
    let sign = d.signum();
    let diag = hermite_diagonal(&b)?;
    debug_assert_eq!(diag.iter().product::<i128>(), big);

    let mut points: Vec<Vec<i128>> = Vec::with_capacity(big as usize);
    let mut k = vec![0i128; n];
    loop {
        let r: Vec<i128> = adj
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&k)
                    .fold(0i128, |s, (x, y)| (s + (sign * x).rem_euclid(big) * y).rem_euclid(big))
            })
            .collect();
        points.push(r);
        let mut i = 0;
        while i < n {
            k[i] += 1;
            if k[i] < diag[i] {
                break;
            }
            k[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }

    let af: DMatrix<f64> = a.map(|x| x as f64);
    let exponents_a: Vec<f64> = eigen_magnitudes(&af).iter().map(|x| x.ln()).collect();
    let spread = exponents_a.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - exponents_a.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut seen: HashSet<Vec<i128>> = HashSet::with_capacity(points.len());
    let mut orbits: Vec<Vec<Vec<i128>>> = Vec::new();
    for p in points {
        if seen.contains(&p) {
            continue;
        }
        let mut cycle = vec![p.clone()];
        seen.insert(p.clone());
        let mut q = apply_mod(&ai, &p, big);
        while q != p {
            seen.insert(q.clone());
            cycle.push(q.clone());
            q = apply_mod(&ai, &q, big);
        }
        let start = (0..cycle.len()).min_by(|&x, &y| cycle[x].cmp(&cycle[y])).unwrap_or(0);
        cycle.rotate_left(start);
        orbits.push(cycle);
    }
    orbits.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x[0].cmp(&y[0])));

    let geometry = Geometry::Torus;
    orbits
        .into_iter()
        .map(|cyc| {
            let period = cyc.len();
            let to_f = |r: &Vec<i128>| DVector::from_iterator(n, r.iter().map(|&x| x as f64 / big as f64));
            let cycle: Vec<DVector<f64>> = cyc.iter().map(to_f).collect();
            let mut residual = 0.0f64;
            for t in 0..period {
                let image = &af * &cycle[t];
                residual = residual.max(geometry.distance(&image, &cycle[(t + 1) % period]));
            }
            let monodromy = (spread * period as f64) < MONODROMY_LOG_SPREAD;
            let monodromy = monodromy.then(|| {
                let mut mono = DMatrix::identity(n, n);
                for _ in 0..period {
                    mono = &af * mono;
                }
                mono
            });
            let (exponents, multipliers, index) = summarise_exponents(exponents_a.clone(), period as f64);
            Ok(PeriodicOrbit {
                point: cycle[0].clone(),
                period: period as f64,
                kind: SystemKind::Map,
                cycle,
                multipliers,
                exponents,
                index,
                residual,
                monodromy,
                verified: true,
                exact: Some(ExactPoint {
                    numerators: cyc[0].iter().map(|&x| x as i64).collect(),
                    denominator: big as i64,
                }),
                geometry: geometry.clone(),
            })
        })
        .collect()
}
