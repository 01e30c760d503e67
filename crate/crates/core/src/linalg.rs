//! Small dense linear algebra: symmetric eigendecomposition, Moore-Penrose
//! pseudoinverse, affine projections, and the Gaussian CDF.
//!
//! Matrices here are tiny (hedging dimensions, a handful of children per
//! node), so everything is plain `Vec<Vec<f64>>` with cyclic Jacobi sweeps.

use crate::error::{Error, Result};

pub type Mat = Vec<Vec<f64>>;

/// Standard normal CDF via the error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub fn zeros(rows: usize, cols: usize) -> Mat {
    vec![vec![0.0; cols]; rows]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Mat {
    let rows = a.len();
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    let mut out = zeros(rows, cols);
    for i in 0..rows {
        for k in 0..inner {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..cols {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn transpose(m: &[Vec<f64>]) -> Mat {
    if m.is_empty() {
        return Vec::new();
    }
    let mut out = zeros(m[0].len(), m.len());
    for (i, row) in m.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            out[j][i] = x;
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_offdiag(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.max(m[i][j].abs());
        }
    }
    best
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns of the
/// returned matrix, so `M = V diag(w) V^T`.
pub fn symmetric_eigen(m: &[Vec<f64>]) -> Result<(Vec<f64>, Mat)> {
    let n = m.len();
    for row in m {
        if row.len() != n {
            return Err(Error::InvalidArgument("matrix not square".into()));
        }
    }
    let mut a: Mat = m.to_vec();
    let mut v = identity(n);
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
        .max(1.0);
    let target = 1e-15 * scale;
    for _sweep in 0..100 {
        if max_abs_offdiag(&a) <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() <= target * 1e-2 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let w = (0..n).map(|i| a[i][i]).collect();
    Ok((w, v))
}

/// Moore-Penrose pseudoinverse of a symmetric (PSD in intended use) matrix.
///
/// Eigenvalues with `|w| <= tol * max|w|` are zeroed rather than inverted.
/// Rejects matrices that are not symmetric within `tol` relative to their
/// largest entry.
pub fn pinv_symmetric(m: &[Vec<f64>], tol: f64) -> Result<Mat> {
    let n = m.len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
        .max(1.0);
    for i in 0..n {
        if m[i].len() != n {
            return Err(Error::InvalidArgument("matrix not square".into()));
        }
        for j in 0..n {
            if (m[i][j] - m[j][i]).abs() > tol * scale {
                return Err(Error::InvalidArgument(format!(
                    "matrix not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let (w, v) = symmetric_eigen(m)?;
    let wmax = w.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let cutoff = tol * wmax.max(1e-300);
    let mut out = zeros(n, n);
    for k in 0..n {
        if w[k].abs() <= cutoff {
            continue;
        }
        let inv = 1.0 / w[k];
        for i in 0..n {
            for j in 0..n {
                out[i][j] += v[i][k] * inv * v[j][k];
            }
        }
    }
    Ok(out)
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is numerically singular.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Mat = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (piv, &pval) = m
            .iter()
            .map(|row| &row[col])
            .enumerate()
            .skip(col)
            .max_by(|(_, x), (_, y)| x.abs().total_cmp(&y.abs()))?;
        if pval.abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in (row + 1)..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Euclidean projection of `point` onto the affine set `{x : c x = rhs}`.
///
/// Uses the pseudoinverse of `c c^T`, so redundant rows are harmless.
pub fn project_affine(point: &[f64], c: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    if c.is_empty() {
        return Ok(point.to_vec());
    }
    let cct = mat_mul(c, &transpose(c));
    let inv = pinv_symmetric(&cct, 1e-12)?;
    let residual: Vec<f64> = c
        .iter()
        .zip(rhs)
        .map(|(row, &r)| dot(row, point) - r)
        .collect();
    let lambda = mat_vec(&inv, &residual);
    let correction = mat_vec(&transpose(c), &lambda);
    Ok(point
        .iter()
        .zip(&correction)
        .map(|(&p, &q)| p - q)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pinv_identity_is_identity() {
        let m = identity(3);
        let p = pinv_symmetric(&m, 1e-12).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(p[i][j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pinv_zero_is_zero() {
        let m = zeros(2, 2);
        let p = pinv_symmetric(&m, 1e-12).unwrap();
        assert!(p.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn pinv_diagonal_componentwise() {
        let m = vec![vec![2.0, 0.0], vec![0.0, 0.0]];
        let p = pinv_symmetric(&m, 1e-12).unwrap();
        assert_abs_diff_eq!(p[0][0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1][1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pinv_rejects_asymmetric() {
        let m = vec![vec![1.0, 2.0], vec![0.0, 1.0]];
        assert!(pinv_symmetric(&m, 1e-9).is_err());
    }

    fn penrose_ok(m: &Mat, p: &Mat) -> bool {
        let mpm = mat_mul(&mat_mul(m, p), m);
        let pmp = mat_mul(&mat_mul(p, m), p);
        let mp = mat_mul(m, p);
        let pm = mat_mul(p, m);
        let sym = |a: &Mat| {
            a.iter().enumerate().all(|(i, row)| {
                row.iter()
                    .enumerate()
                    .all(|(j, &x)| (x - a[j][i]).abs() < 1e-9)
            })
        };
        let close = |a: &Mat, b: &Mat| {
            a.iter()
                .zip(b)
                .all(|(r, s)| r.iter().zip(s).all(|(x, y)| (x - y).abs() < 1e-9))
        };
        close(&mpm, m) && close(&pmp, p) && sym(&mp) && sym(&pm)
    }

    /// Random symmetric PSD matrix with eigenvalues either exactly zero or
    /// well separated from zero; the arbitrarily-ill-conditioned middle
    /// ground is not meaningful for a truncating pseudoinverse.
    pub(crate) fn random_psd(n: usize, next: &mut impl FnMut() -> f64) -> Mat {
        // Orthonormal basis by Gram-Schmidt on a random matrix.
        let mut v: Mat = (0..n)
            .map(|_| (0..n).map(|_| next() - 0.5).collect())
            .collect();
        for i in 0..n {
            for j in 0..i {
                let proj = dot(&v[i].clone(), &v[j]);
                for k in 0..n {
                    v[i][k] -= proj * v[j][k];
                }
            }
            let norm = dot(&v[i], &v[i]).sqrt().max(1e-6);
            for k in 0..n {
                v[i][k] /= norm;
            }
        }
        let eigs: Vec<f64> = (0..n)
            .map(|_| {
                let u = next();
                if u < 0.3 {
                    0.0
                } else {
                    0.1 + 4.0 * u
                }
            })
            .collect();
        let mut m = zeros(n, n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    m[i][j] += v[k][i] * eigs[k] * v[k][j];
                }
            }
        }
        // Exact symmetry.
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m[i][j] + m[j][i]);
                m[i][j] = avg;
                m[j][i] = avg;
            }
        }
        m
    }

    #[test]
    fn penrose_identities_on_random_psd() {
        let mut state = 0x9e3779b97f4a7c15_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for n in 1..=4 {
            for _ in 0..50 {
                let m = random_psd(n, &mut next);
                let p = pinv_symmetric(&m, 1e-10).unwrap();
                assert!(penrose_ok(&m, &p));
            }
        }
    }

    #[test]
    fn projection_lands_on_affine_set() {
        // Project (1, 1, 1) onto {x : x1 + x2 + x3 = 1, x1 - x2 = 0}.
        let c = vec![vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0]];
        let rhs = vec![1.0, 0.0];
        let p = project_affine(&[1.0, 1.0, 1.0], &c, &rhs).unwrap();
        assert_abs_diff_eq!(p[0] + p[1] + p[2], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[0] - p[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(2.0 * normal_cdf(1.0) - 1.0, 0.6826894921370859, epsilon = 1e-12);
    }
}
