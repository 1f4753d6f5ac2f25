//! Dense complex linear algebra: a row-major matrix, LU with partial
//! pivoting, and rank-revealing helpers built on the SVD.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_dim, KblError, Result};
use crate::exec::Execution;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Relative singular-value cutoff used for every numerical rank in the crate.
pub const RANK_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Square or rectangular complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * cols);
        for row in rows {
            check_dim(cols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols, data })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(n: usize, columns: &[Vec<C64>]) -> Result<Self> {
        let mut m = Matrix::zeros(n, columns.len());
        for (j, col) in columns.iter().enumerate() {
            check_dim(n, col.len())?;
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn from_diagonal(d: &[C64]) -> Self {
        let mut m = Matrix::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<C64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.cols, v.len())?;
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self^H v`.
    pub fn adjoint_matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.rows, v.len())?;
        let mut out = vec![ZERO; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * vi;
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        self.matmul_with(other, Execution::default())
    }

    /// Row-blocked product; each output row is computed identically under
    /// either execution policy.
    pub fn matmul_with(&self, other: &Matrix, exec: Execution) -> Result<Matrix> {
        check_dim(self.cols, other.rows)?;
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(n, m);
        if m == 0 {
            return Ok(out);
        }
        let policy = if n * k * m < 1 << 18 { Execution::Sequential } else { exec };
        policy.for_each_chunk(&mut out.data, m, |i, row_out| {
            let a_row = &self.data[i * k..(i + 1) * k];
            for (p, &a) in a_row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[p * m..(p + 1) * m];
                for (o, &b) in row_out.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        });
        Ok(out)
    }

    pub fn adjoint(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(C64, C64) -> C64) -> Result<Matrix> {
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &Matrix) -> Result<()> {
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// `self - s I` for square matrices.
    pub fn shift_diagonal(&self, s: C64) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] -= s;
        }
        m
    }

    /// Induced ∞-norm: maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Induced 1-norm: maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, x) in sums.iter_mut().zip(self.row(i)) {
                *s += x.norm();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.rows).all(|i| self.row(i)[(i + 1).min(self.cols)..].iter().all(|&x| x == ZERO))
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|x| x.im == 0.0)
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization `P A = L U` with partial (row) pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Matrix,
    perm: Vec<usize>,
    min_pivot: f64,
}

impl Lu {
    /// Factorizes a square matrix. A pivot of exactly zero, or one below
    /// `1e-14 · ‖A‖_∞`, is reported as singular.
    pub fn new(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(KblError::DimensionMismatch { expected: a.rows, found: a.cols });
        }
        let n = a.rows;
        let scale = a.norm_inf();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 || pmax <= 1e-14 * scale {
                return Err(KblError::Singular { zeta: String::from("(matrix)"), distance: None });
            }
            min_pivot = min_pivot.min(pmax);
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == ZERO {
                    continue;
                }
                let (upper, lower) = lu.data.split_at_mut(i * n);
                let src = &upper[k * n + k + 1..k * n + n];
                for (dst, &u) in lower[k + 1..n].iter_mut().zip(src) {
                    *dst -= factor * u;
                }
            }
        }
        Ok(Lu { n, lu, perm, min_pivot })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.n, b.len())?;
        let n = self.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: C64 = row[..i].iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: C64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = ZERO);
            e[j] = ONE;
            let col = self.solve(&e).expect("dimension checked");
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.rows == 0 || m.cols == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Rank of the span of a list of vectors of length `n`.
pub fn span_rank(n: usize, vectors: &[Vec<C64>]) -> Result<usize> {
    if vectors.is_empty() {
        return Ok(0);
    }
    Ok(numerical_rank(&Matrix::from_columns(n, vectors)?, RANK_TOL))
}

/// Orthonormal basis (left singular vectors) of the span of `vectors`.
pub fn orthonormal_basis(n: usize, vectors: &[Vec<C64>], rel_tol: f64) -> Result<Vec<Vec<C64>>> {
    if vectors.is_empty() || n == 0 {
        return Ok(Vec::new());
    }
    let m = Matrix::from_columns(n, vectors)?.to_nalgebra();
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(Vec::new());
    }
    let mut idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    Ok(idx.into_iter().map(|j| u.column(j).iter().copied().collect()).collect())
}

/// Completes the orthonormal set `q` to a basis of `C^n`, returning the new
/// vectors (an orthonormal basis of the Euclidean orthogonal complement).
pub fn orthogonal_complement(n: usize, q: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = q.to_vec();
    let mut extra = Vec::new();
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = vec![ZERO; n];
        e[k] = ONE;
        let r = orthogonalize(&e, &basis);
        let nr = norm2(&r);
        if nr > 1e-8 {
            let unit: Vec<C64> = r.iter().map(|x| x / nr).collect();
            basis.push(unit.clone());
            extra.push(unit);
        }
    }
    extra
}

/// `v − Q Q^H v` for orthonormal `Q`, two passes of modified Gram–Schmidt.
pub fn orthogonalize(v: &[C64], q: &[Vec<C64>]) -> Vec<C64> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for qi in q {
            let h = dot(qi, &r);
            for (x, &y) in r.iter_mut().zip(qi) {
                *x -= h * y;
            }
        }
    }
    r
}

/// Euclidean distance from `v` to the span of the orthonormal set `q`.
pub fn distance_to_span(v: &[C64], q: &[Vec<C64>]) -> f64 {
    norm2(&orthogonalize(v, q))
}

/// Conjugate-linear in the first argument: `Σ conj(a_i) b_i`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(v: &[C64]) -> f64 {
    let scale = norm_inf(v);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(v: &[C64], s: C64) -> Vec<C64> {
    v.iter().map(|x| x * s).collect()
}

pub fn unit_vector(n: usize, index: usize) -> Vec<C64> {
    let mut e = vec![ZERO; n];
    e[index] = ONE;
    e
}

/// Linear combination `Σ coeffs[k] · vectors[k]`.
pub fn combine(n: usize, vectors: &[Vec<C64>], coeffs: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; n];
    for (v, &ck) in vectors.iter().zip(coeffs) {
        for (o, &x) in out.iter_mut().zip(v) {
            *o += ck * x;
        }
    }
    out
}

/// Minimum-norm least-squares solution of `M x ≈ b` via the SVD.
pub fn least_squares(m: &Matrix, b: &[C64]) -> Result<Vec<C64>> {
    check_dim(m.rows, b.len())?;
    if m.cols == 0 {
        return Ok(Vec::new());
    }
    let svd = m.to_nalgebra().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = svd
        .solve(&rhs, RANK_TOL * smax.max(f64::MIN_POSITIVE))
        .map_err(|e| KblError::InvalidInput(e.to_string()))?;
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Matrix {
        Matrix::from_rows(&[
            vec![real(2.0), real(1.0), c(0.0, 1.0)],
            vec![real(4.0), real(-1.0), real(3.0)],
            vec![c(1.0, -1.0), real(0.5), real(2.0)],
        ])
        .unwrap()
    }

    #[test]
    fn lu_inverse_is_inverse() {
        let a = sample();
        let inv = Lu::new(&a).unwrap().inverse();
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn lu_pivots_on_zero_leading_entry() {
        let a = Matrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]).unwrap();
        let x = Lu::new(&a).unwrap().solve(&[real(3.0), real(5.0)]).unwrap();
        assert_eq!(x, vec![real(5.0), real(3.0)]);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Matrix::from_rows(&[vec![ONE, ONE], vec![ONE, ONE]]).unwrap();
        assert!(matches!(Lu::new(&a), Err(KblError::Singular { .. })));
    }

    #[test]
    fn norms() {
        let a = sample();
        assert!((a.norm_inf() - 8.0).abs() < 1e-15);
        let v = vec![real(3.0), real(4.0)];
        assert_eq!(norm2(&v), 5.0);
        assert_eq!(norm_inf(&v), 4.0);
    }

    #[test]
    fn rank_and_complement() {
        let v = vec![vec![ONE, ONE, ZERO], vec![real(2.0), real(2.0), ZERO]];
        assert_eq!(span_rank(3, &v).unwrap(), 1);
        let q = orthonormal_basis(3, &v, RANK_TOL).unwrap();
        assert_eq!(q.len(), 1);
        let g = orthogonal_complement(3, &q);
        assert_eq!(g.len(), 2);
        for gi in &g {
            assert!(dot(&q[0], gi).norm() < 1e-14);
        }
    }

    #[test]
    fn matmul_policies_agree() {
        let a = Matrix::from_fn(70, 70, |i, j| c((i * j % 7) as f64, (i + j) as f64 * 0.01));
        let s = a.matmul_with(&a, Execution::Sequential).unwrap();
        let p = a.matmul_with(&a, Execution::Parallel).unwrap();
        assert_eq!(s, p);
    }
}
