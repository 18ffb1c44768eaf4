//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Eigenvalue magnitudes of a square matrix, ascending.
pub fn eigen_magnitudes(a: &DMatrix<f64>) -> Vec<f64> {
    let mut mags: Vec<f64> = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    mags.sort_by(|x, y| x.total_cmp(y));
    mags
}

/// Real eigen-decomposition `(values, vectors)` with unit eigenvectors as
/// columns, sorted by ascending eigenvalue magnitude. Returns `None` when
/// some eigenvalue is complex.
pub fn real_eigen(a: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let scale = a.norm().max(1.0);
    let evs = a.clone().complex_eigenvalues();
    if evs.iter().any(|z| z.im.abs() > 1e-12 * scale) {
        return None;
    }
    let mut values: Vec<f64> = evs.iter().map(|z| z.re).collect();
    values.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let mut vectors = DMatrix::zeros(n, n);
    for (j, &lambda) in values.iter().enumerate() {
        let shifted = a - DMatrix::identity(n, n) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t?;
        // Right singular vector for the smallest singular value.
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))?;
        let mut v: DVector<f64> = v_t.row(imin).transpose();
        // Fix the sign so the largest component is positive.
        let (imax, _) = v
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))?;
        if v[imax] < 0.0 {
            v = -v;
        }
        vectors.set_column(j, &v);
    }
    Some((values, vectors))
}

/// Orthonormal basis (as columns) of the orthogonal complement of `v`.
pub fn orthogonal_complement(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let norm = v.norm();
    let e = v / norm;
    // Householder reflector mapping e to ±e_0.
    let sign = if e[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut u = e.clone();
    u[0] += sign;
    let un = u.norm();
    let h = if un < 1e-300 {
        DMatrix::identity(n, n)
    } else {
        let u = u / un;
        DMatrix::identity(n, n) - &u * u.transpose() * 2.0
    };
    h.columns(1, n - 1).into_owned()
}

/// Smallest principal angle between the column spans of two matrices with
/// orthonormal columns.
pub fn min_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let m = a.transpose() * b;
    let smax = m
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max)
        .min(1.0);
    smax.acos()
}

/// Solve the dense system `a x = b`, `None` if numerically singular.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_eigen_of_cat_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let (vals, vecs) = real_eigen(&a).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((vals[0] - 1.0 / (phi * phi)).abs() < 1e-12);
        assert!((vals[1] - phi * phi).abs() < 1e-12);
        for j in 0..2 {
            let v = vecs.column(j);
            let r = &a * v - v * vals[j];
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_has_no_real_eigen() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(real_eigen(&a).is_none());
        let m = eigen_magnitudes(&a);
        assert!((m[0] - 1.0).abs() < 1e-12 && (m[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complement_is_orthonormal() {
        let v = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let q = orthogonal_complement(&v);
        assert_eq!(q.ncols(), 2);
        assert!((q.transpose() * &q - DMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((q.transpose() * v).norm() < 1e-14);
    }

    #[test]
    fn principal_angle_between_axes() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!((min_principal_angle(&a, &b) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
