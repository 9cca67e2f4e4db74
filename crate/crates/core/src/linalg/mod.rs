//! Dense numerical kernel shared by the rest of the crate.
//!
//! Everything here works on small matrices (the design envelope is d ≤ 8, so
//! exterior powers have side at most C(8,4) = 70). Routines favour plain,
//! predictable arithmetic over speed.

mod hull;

pub use hull::{origin_in_hull, HullResult, HULL_EPS, HULL_MARGIN};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

/// Default relative accuracy of [`mat_exp`].
pub const EXP_TOL: f64 = 1e-10;
/// The exponent is scaled until its 1-norm is at most this before the series is summed.
pub const EXP_SCALE_THRESHOLD: f64 = 0.5;
const EXP_MAX_TERMS: usize = 40;

/// Default relative pivot threshold of [`rank_tol`].
pub const RANK_EPS: f64 = 1e-9;

/// Tolerance under which a trace counts as zero.
pub const TRACE_TOL: f64 = 1e-9;

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn is_traceless(m: &Matrix, tol: f64) -> bool {
    m.is_square() && m.trace().abs() <= tol
}

/// Matrix exponential by scaling and squaring around a truncated Taylor core.
///
/// `X` is divided by `2^s` until `‖X/2^s‖₁ ≤ 0.5`; the series is summed until
/// the next term drops below `tol / 2^s` relative to the partial sum (never
/// below machine precision) and the result is squared `s` times.
pub fn mat_exp(x: &Matrix, tol: f64) -> Result<Matrix> {
    if !x.is_square() {
        return Err(Error::arg(format!(
            "mat_exp needs a square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    if !is_finite(x) {
        return Err(Error::arg("mat_exp: non-finite entry"));
    }
    if !(tol > 0.0) {
        return Err(Error::arg("mat_exp: tolerance must be positive"));
    }
    let n = x.nrows();
    let norm = norm1(x);
    let squarings = if norm > EXP_SCALE_THRESHOLD {
        (norm / EXP_SCALE_THRESHOLD).log2().ceil() as i32
    } else {
        0
    };
    let scaled = x / 2f64.powi(squarings);
    let core_tol = (tol / 2f64.powi(squarings)).max(f64::EPSILON / 2.0);

    let mut sum = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    for j in 1..=EXP_MAX_TERMS {
        term = &term * &scaled / j as f64;
        sum += &term;
        if norm1(&term) <= core_tol * norm1(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

/// Numerical rank: number of row-reduction pivots (partial pivoting) whose
/// magnitude exceeds `eps · max(1, max|m_ij|)`.
pub fn rank_tol(m: &Matrix, eps: f64) -> usize {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0;
    }
    let threshold = eps * max_abs(m).max(1.0);
    let mut a = m.clone();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let (pivot_row, pivot) = (rank..rows)
            .map(|r| (r, a[(r, col)].abs()))
            .fold((rank, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= threshold {
            continue;
        }
        a.swap_rows(rank, pivot_row);
        let p = a[(rank, col)];
        for r in rank + 1..rows {
            let f = a[(r, col)] / p;
            if f != 0.0 {
                for c in col..cols {
                    let v = a[(rank, c)];
                    a[(r, c)] -= f * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Lie bracket `XY − YX`.
pub fn bracket(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    if !x.is_square() || x.shape() != y.shape() {
        return Err(Error::arg(format!(
            "bracket needs equal square shapes, got {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    Ok(x * y - y * x)
}

/// Determinant by LU with partial pivoting on a row-major scratch buffer of side `n`.
pub(crate) fn det_in_place(a: &mut [f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    let mut det = 1.0;
    for col in 0..n {
        let mut pivot_row = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                pivot_row = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(col * n + c, pivot_row * n + c);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f != 0.0 {
                for c in col + 1..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
            }
        }
    }
    det
}

/// Determinant of a square matrix.
pub fn det(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::arg("det needs a square matrix"));
    }
    let n = m.nrows();
    let mut buf: Vec<f64> = (0..n * n).map(|i| m[(i / n, i % n)]).collect();
    Ok(det_in_place(&mut buf, n))
}

/// Build a matrix from row-major nested rows.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let r = rows.len();
    if r == 0 {
        return Err(Error::arg("matrix needs at least one row"));
    }
    let c = rows[0].len();
    if c == 0 {
        return Err(Error::arg("matrix needs at least one column"));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(Error::arg(format!(
            "row {} has {} entries, expected {}",
            i + 1,
            row.len(),
            c
        )));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Serde adapter writing a [`Matrix`] as row-major nested arrays.
pub mod rows {
    use super::{from_rows, to_rows, Matrix};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn m(rows: &[&[f64]]) -> Matrix {
        from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = mat_exp(&Matrix::zeros(4, 4), EXP_TOL).unwrap();
        assert_eq!(e, Matrix::identity(4, 4));
    }

    #[test]
    fn exp_of_nilpotent() {
        let x = m(&[&[0.0, 3.5], &[0.0, 0.0]]);
        let e = mat_exp(&x, EXP_TOL).unwrap();
        assert!((e - (Matrix::identity(2, 2) + &x)).norm() < 1e-14);
    }

    #[test]
    fn exp_rejects_non_square() {
        assert!(matches!(
            mat_exp(&Matrix::zeros(2, 3), EXP_TOL),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn exp_of_rotation_block_example() {
        let a = m(&[
            &[1.0, 1.0, 0.0, 0.0],
            &[-1.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, -1.0, 0.5],
            &[0.0, 0.0, -0.5, -1.0],
        ]);
        let e = mat_exp(&(a * FRAC_PI_2), EXP_TOL).unwrap();
        let d = FRAC_PI_2.exp();
        let h = SQRT_2 / 2.0 / d;
        let expected = m(&[
            &[0.0, d, 0.0, 0.0],
            &[-d, 0.0, 0.0, 0.0],
            &[0.0, 0.0, h, h],
            &[0.0, 0.0, -h, h],
        ]);
        assert!((&e - &expected).norm() <= 1e-10 * expected.norm());
    }

    #[test]
    fn exp_matches_symmetric_eigendecomposition() {
        // exp of a symmetric matrix through its eigenpairs is an independent route.
        let s = m(&[
            &[1.0, -2.0, 0.5],
            &[-2.0, 3.0, 1.5],
            &[0.5, 1.5, -4.0],
        ]) * 2.0;
        let eig = s.clone().symmetric_eigen();
        let expected = &eig.eigenvectors
            * Matrix::from_diagonal(&eig.eigenvalues.map(f64::exp))
            * eig.eigenvectors.transpose();
        let e = mat_exp(&s, EXP_TOL).unwrap();
        assert!((&e - &expected).norm() <= 1e-10 * expected.norm());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_tol(&Matrix::identity(5, 5), RANK_EPS), 5);
        assert_eq!(rank_tol(&Matrix::zeros(3, 4), RANK_EPS), 0);
        let dup = m(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &[0.0, 1.0, 5.0]]);
        assert_eq!(rank_tol(&dup, RANK_EPS), 2);
        let wide = m(&[&[1.0, 0.0, 0.0, 1.0], &[2.0, 0.0, 0.0, 2.0]]);
        assert_eq!(rank_tol(&wide, RANK_EPS), 1);
    }

    #[test]
    fn bracket_examples() {
        let h = m(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let e = m(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert_eq!(bracket(&h, &e).unwrap(), e.clone() * 2.0);
        assert_eq!(bracket(&h, &h).unwrap(), Matrix::zeros(2, 2));
        assert!(bracket(&h, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn det_small() {
        let a = m(&[&[0.0, 2.0], &[3.0, 1.0]]);
        assert_eq!(det(&a).unwrap(), -6.0);
        assert_eq!(det(&Matrix::identity(3, 3)).unwrap(), 1.0);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(err.to_string().contains("row 2"));
    }
}
