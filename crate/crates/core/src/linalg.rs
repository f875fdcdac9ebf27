//! Dense matrices and Householder least-squares solves.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[T]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            data: data.to_vec(),
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `Aᵀ v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate().take(self.rows) {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (0..i).all(|j| {
                    let (a, b) = (self[(i, j)], self[(j, i)]);
                    (a - b).abs() <= tol * T::one().max(a.abs()).max(b.abs())
                })
            })
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

fn column_name(names: Option<&[String]>, j: usize) -> String {
    names
        .and_then(|n| n.get(j).cloned())
        .unwrap_or_else(|| format!("column {j}"))
}

/// In-place Householder QR of `a` (column-major work copy), applying the
/// same reflections to `rhs`. Returns `R` (upper triangle of the work copy)
/// and the transformed right-hand side. `pivot_ok(r_jj)` decides whether a
/// diagonal entry is acceptable.
fn householder<T: Scalar>(
    a: &Matrix<T>,
    rhs: &[T],
    mut pivot_ok: impl FnMut(T) -> bool,
    names: Option<&[String]>,
) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let (m, k) = (a.rows, a.cols);
    // cols[j][i] = a[i, j]
    let mut cols: Vec<Vec<T>> = (0..k).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut b = rhs.to_vec();

    for j in 0..k {
        let norm = cols[j][j..].iter().map(|&v| v * v).sum::<T>().sqrt();
        let alpha = if cols[j][j] > T::zero() { -norm } else { norm };
        if !pivot_ok(alpha) {
            return Err(Error::RankDeficient {
                index: j,
                name: column_name(names, j),
            });
        }
        // v = x - alpha e1, stored over cols[j][j..]
        let mut v: Vec<T> = cols[j][j..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().map(|&t| t * t).sum::<T>();
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for col in cols.iter_mut().skip(j + 1) {
                let s = two * v.iter().zip(&col[j..]).map(|(&p, &q)| p * q).sum::<T>() / vnorm2;
                for (c, &p) in col[j..].iter_mut().zip(&v) {
                    *c = *c - s * p;
                }
            }
            let s = two * v.iter().zip(&b[j..]).map(|(&p, &q)| p * q).sum::<T>() / vnorm2;
            for (c, &p) in b[j..].iter_mut().zip(&v) {
                *c = *c - s * p;
            }
        }
        cols[j][j] = alpha;
        for c in cols[j][j + 1..].iter_mut() {
            *c = T::zero();
        }
    }
    Ok((cols, b))
}

fn back_substitute<T: Scalar>(r_cols: &[Vec<T>], b: &[T]) -> Vec<T> {
    let k = r_cols.len();
    let mut x = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = b[i];
        for j in i + 1..k {
            s = s - r_cols[j][i] * x[j];
        }
        x[i] = s / r_cols[i][i];
    }
    x
}

/// Least-squares solution of `design · β ≈ response` via Householder QR.
///
/// A column whose squared QR pivot falls below the rank tolerance times the
/// largest Gram diagonal is reported as rank deficient.
pub fn least_squares<T: Scalar>(
    design: &Matrix<T>,
    response: &[T],
    names: Option<&[String]>,
) -> Result<Vec<T>> {
    let (m, k) = (design.rows, design.cols);
    if response.len() != m {
        return Err(Error::Dimension(format!(
            "response has {} rows, design has {m}",
            response.len()
        )));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    if m < k {
        return Err(Error::Dimension(format!(
            "need at least as many rows ({m}) as columns ({k})"
        )));
    }
    let max_diag = (0..k)
        .map(|j| (0..m).map(|i| design[(i, j)].powi(2)).sum::<T>())
        .fold(T::zero(), T::max);
    let threshold = T::rank_tolerance() * max_diag;
    let (r, b) = householder(design, response, |r_jj| r_jj * r_jj > threshold, names)?;
    Ok(back_substitute(&r, &b))
}

/// Solves the square system `a · x = rhs` by Householder QR.
///
/// Rank deficiency is judged against the largest absolute diagonal of `a`,
/// which for a Gram-type system is the largest column scale.
pub fn solve_square<T: Scalar>(a: &Matrix<T>, rhs: &[T], names: Option<&[String]>) -> Result<Vec<T>> {
    let k = a.rows;
    if a.cols != k || rhs.len() != k {
        return Err(Error::Dimension(format!(
            "expected a square system, got {}x{} with rhs of length {}",
            a.rows,
            a.cols,
            rhs.len()
        )));
    }
    let max_diag = (0..k).map(|j| a[(j, j)].abs()).fold(T::zero(), T::max);
    let threshold = T::rank_tolerance() * max_diag;
    let (r, b) = householder(a, rhs, |r_jj| r_jj.abs() > threshold, names)?;
    Ok(back_substitute(&r, &b))
}
