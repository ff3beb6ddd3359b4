use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{rows}x{cols} matrix needs {} scalars, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        self.matmul_impl(false, rhs, false)
    }

    /// `self^T * rhs`.
    pub fn tmatmul(&self, rhs: &Self) -> Result<Self> {
        self.matmul_impl(true, rhs, false)
    }

    /// `self * rhs^T`.
    pub fn matmul_t(&self, rhs: &Self) -> Result<Self> {
        self.matmul_impl(false, rhs, true)
    }

    fn matmul_impl(&self, ta: bool, rhs: &Self, tb: bool) -> Result<Self> {
        let (m, ka, rsa, csa) = if ta {
            (self.cols, self.rows, 1, self.cols as isize)
        } else {
            (self.rows, self.cols, self.cols as isize, 1)
        };
        let (kb, n, rsb, csb) = if tb {
            (rhs.cols, rhs.rows, 1, rhs.cols as isize)
        } else {
            (rhs.rows, rhs.cols, rhs.cols as isize, 1)
        };
        if ka != kb {
            return Err(Error::dim(format!("inner extents {ka} and {kb} differ in matrix product")));
        }
        let mut out = Self::zeros(m, n);
        T::gemm(
            m, ka, n, T::one(), &self.data, rsa, csa, &rhs.data, rsb, csb, T::zero(), &mut out.data,
            n as isize, 1,
        );
        Ok(out)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: T, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim(format!(
                "cannot add {}x{} to {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        self.data.iter_mut().zip(&other.data).for_each(|(a, &b)| *a += s * b);
        Ok(())
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self.data[i * self.cols + i]).sum()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        let mut out = Self::zeros(r, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.data[i * self.cols + j];
                if a == T::zero() {
                    continue;
                }
                for k in 0..other.rows {
                    let dst = (i * other.rows + k) * c + j * other.cols;
                    let src = &other.data[k * other.cols..(k + 1) * other.cols];
                    for (d, &s) in out.data[dst..dst + other.cols].iter_mut().zip(src) {
                        *d = a * s;
                    }
                }
            }
        }
        out
    }

    /// Largest deviation of `self^T self` from the identity.
    pub fn orthonormality_defect(&self) -> T {
        let g = self.tmatmul(self).expect("square gram");
        let mut worst = T::zero();
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    fn to_col_major(&self) -> Vec<T> {
        self.transpose().data
    }

    fn from_col_major(rows: usize, cols: usize, buf: &[T]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[i * cols + j] = buf[i + j * rows];
            }
        }
        m
    }

    /// Thin QR factorization `self = q * r` with `q` having orthonormal columns.
    pub fn qr(&self) -> Result<(Self, Self)> {
        let (m, n) = (self.rows, self.cols);
        let k = m.min(n);
        let mut a = self.to_col_major();
        let mut r = vec![T::zero(); k * n];
        let info = T::geqrf(m, n, &mut a, &mut r);
        if info != 0 {
            return Err(Error::Lapack { routine: format!("{}geqrf", T::PREFIX), info });
        }
        Ok((Self::from_col_major(m, k, &a), Self::from_col_major(k, n, &r)))
    }

    /// Thin SVD `self = u * diag(s) * vt`, singular values descending.
    pub fn svd(&self) -> Result<(Self, Vec<T>, Self)> {
        let (m, n) = (self.rows, self.cols);
        let k = m.min(n);
        let mut a = self.to_col_major();
        let mut s = vec![T::zero(); k];
        let mut u = vec![T::zero(); m * k];
        let mut vt = vec![T::zero(); k * n];
        let info = T::gesdd(m, n, &mut a, &mut s, &mut u, &mut vt);
        if info != 0 {
            return Err(Error::Lapack { routine: format!("{}gesdd", T::PREFIX), info });
        }
        Ok((Self::from_col_major(m, k, &u), s, Self::from_col_major(k, n, &vt)))
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Relative asymmetry admitted by [`SymmetricMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Square matrix validated to be symmetric within `1e-10 * max|M|`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix<T> {
    inner: Matrix<T>,
}

/// Eigen-decomposition of a symmetric matrix: ascending values, eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigh<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymmetricMatrix<T> {
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::usage(format!("symmetric matrix must be square, got {}x{}", m.rows, m.cols)));
        }
        if m.rows == 0 {
            return Err(Error::usage("symmetric matrix needs a positive dimension"));
        }
        m.ensure_finite()?;
        let asym = max_asymmetry(&m);
        let tol = T::of(SYMMETRY_TOL) * m.max_abs();
        if asym > tol {
            return Err(Error::usage(format!(
                "matrix is not symmetric: max |M_ij - M_ji| = {:.3e} > {:.3e}",
                asym.to_f64_lossy(),
                tol.to_f64_lossy()
            )));
        }
        Ok(Self { inner: m })
    }

    /// Symmetrizes `(m + m^T) / 2`; use only where asymmetry is rounding noise.
    pub fn symmetrized(mut m: Matrix<T>) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::usage("symmetrization needs a square matrix"));
        }
        let n = m.rows;
        let half = T::of(0.5);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = half * (m.data[i * n + j] + m.data[j * n + i]);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        Self::new(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.rows
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.inner
    }

    /// Full eigen-decomposition, eigenvalues ascending.
    pub fn eigh(&self) -> Result<Eigh<T>> {
        let n = self.dim();
        let mut a = self.inner.data.clone();
        let mut w = vec![T::zero(); n];
        let info = T::syev(true, n, &mut a, &mut w);
        if info != 0 {
            return Err(Error::Lapack { routine: format!("{}syevd", T::PREFIX), info });
        }
        // column-major n x n with eigenvectors in columns
        let vectors = Matrix::from_col_major(n, n, &a);
        Ok(Eigh { values: w, vectors })
    }

    /// Eigenvalues only, ascending. Cheaper than [`eigh`](Self::eigh) for large dimensions.
    pub fn eigvalsh(&self) -> Result<Vec<T>> {
        self.clone().into_eigvalsh()
    }

    /// Like [`eigvalsh`](Self::eigvalsh) but reuses the storage.
    pub fn into_eigvalsh(self) -> Result<Vec<T>> {
        let n = self.dim();
        let mut a = self.inner.data;
        let mut w = vec![T::zero(); n];
        let info = T::syev(false, n, &mut a, &mut w);
        if info != 0 {
            return Err(Error::Lapack { routine: format!("{}syev_2stage", T::PREFIX), info });
        }
        Ok(w)
    }

    /// Eigen-decomposition that reuses the storage: ascending values and a
    /// matrix whose row `k` is the `k`-th eigenvector.
    pub fn into_eigh_rows(self) -> Result<(Vec<T>, Matrix<T>)> {
        let n = self.dim();
        let mut a = self.inner.data;
        let mut w = vec![T::zero(); n];
        let info = T::syev(true, n, &mut a, &mut w);
        if info != 0 {
            return Err(Error::Lapack { routine: format!("{}syevd", T::PREFIX), info });
        }
        // column-major eigenvector columns are row-major eigenvector rows
        Ok((w, Matrix { rows: n, cols: n, data: a }))
    }

    /// `y = M x`.
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        let n = self.dim();
        T::gemm(n, n, 1, T::one(), &self.inner.data, n as isize, 1, x, 1, 1, T::zero(), y, 1, 1);
    }
}

fn max_asymmetry<T: Scalar>(m: &Matrix<T>) -> T {
    let n = m.rows;
    let mut worst = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m.data[i * n + j] - m.data[j * n + i]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_symmetric(n: usize, seed: u64) -> SymmetricMatrix<f64> {
        let a = random(n, n, seed);
        SymmetricMatrix::symmetrized(a).unwrap()
    }

    #[test]
    fn eigh_diagonal_returns_sorted_values_and_permutation_vectors() {
        let m = SymmetricMatrix::new(Matrix::<f64>::from_diagonal(&[3.0, 1.0, 2.0])).unwrap();
        let e = m.eigh().unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        // eigenvector of 1.0 is e_1, of 2.0 is e_2, of 3.0 is e_0
        for (k, idx) in [1usize, 2, 0].into_iter().enumerate() {
            assert!((e.vectors[(idx, k)].abs() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eigh_pauli_x() {
        let m = SymmetricMatrix::new(Matrix::<f64>::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
        let vals = m.eigvalsh().unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_random_50_residual_orthonormality_and_trace() {
        let m = random_symmetric(50, 7);
        let e = m.eigh().unwrap();
        let norm = m.matrix().frobenius_norm();
        for k in 0..50 {
            let v = e.vectors.column(k);
            let mv = m.matrix().matvec(&v);
            let res: f64 = mv.iter().zip(&v).map(|(a, b)| (a - e.values[k] * b).powi(2)).sum::<f64>().sqrt();
            assert!(res <= 1e-9 * norm, "residual {res}");
        }
        assert!(e.vectors.orthonormality_defect() < 1e-10);
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let tr = m.matrix().trace();
        let sum: f64 = e.values.iter().sum();
        assert!((tr - sum).abs() <= 1e-9 * tr.abs().max(1.0));
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let m = Matrix::from_vec(2, 2, vec![0.0, 1.0, 0.5, 0.0]).unwrap();
        assert!(matches!(SymmetricMatrix::new(m), Err(Error::Usage(_))));
    }

    #[test]
    fn qr_of_random_8x5() {
        let a = random(8, 5, 3);
        let (q, r) = a.qr().unwrap();
        assert_eq!((q.rows(), q.cols(), r.rows(), r.cols()), (8, 5, 5, 5));
        assert!(q.orthonormality_defect() < 1e-12);
        let back = q.matmul(&r).unwrap();
        let mut diff = back.clone();
        diff.axpy(-1.0, &a).unwrap();
        assert!(diff.frobenius_norm() < 1e-12 * a.frobenius_norm());
        for i in 0..5 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn svd_reconstructs() {
        let a = random(6, 9, 11);
        let (u, s, vt) = a.svd().unwrap();
        let us = Matrix::from_fn(u.rows(), u.cols(), |i, j| u[(i, j)] * s[j]);
        let back = us.matmul(&vt).unwrap();
        let mut diff = back;
        diff.axpy(-1.0, &a).unwrap();
        assert!(diff.frobenius_norm() < 1e-12);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::<f64>::identity(2);
        let k = a.kron(&b);
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(1, 3)], 2.0);
        assert_eq!(k[(3, 1)], 3.0);
        assert_eq!(k[(2, 1)], 0.0);
    }

    #[test]
    fn f32_eigh_works() {
        let m = SymmetricMatrix::new(Matrix::<f32>::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap()).unwrap();
        let vals = m.eigvalsh().unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-6 && (vals[1] - 3.0).abs() < 1e-6);
    }
}
