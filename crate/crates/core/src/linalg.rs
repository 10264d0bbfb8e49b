//! Dense matrices over any [`Scalar`], LU with partial pivoting, Cholesky for
//! real SPD matrices, a banded Cholesky for lattice log-determinants, and
//! spectral radii.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{Float, One};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sizes above this use power iteration instead of a Schur decomposition.
pub const DENSE_EIGEN_LIMIT: usize = 2000;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
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

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Matrix<T> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn to_complex(&self) -> Matrix<Complex64> {
        self.map(Scalar::to_complex)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let t = a.clone() * other[(k, j)].clone();
                    out[(i, j)] += t;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = S::zero();
                for (a, b) in self.row(i).iter().zip(v) {
                    acc += a.clone() * b.clone();
                }
                acc
            })
            .collect()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.clone() - b.clone()).collect(),
        }
    }

    /// `I - self`.
    pub fn identity_minus(&self) -> Self {
        Self::identity(self.rows).sub(self)
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])].clone())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a.clone() - b.clone()).modulus()).fold(0.0, f64::max)
    }

    pub fn lu(&self) -> Lu<S> {
        Lu::new(self)
    }

    pub fn det(&self) -> S {
        self.lu().det()
    }

    pub fn inverse(&self) -> Result<Self> {
        self.lu().inverse()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.modulus().is_finite())
    }

    pub fn abs(&self) -> Matrix<f64> {
        self.map(Scalar::modulus)
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization `PA = LU` with partial pivoting on the largest modulus.
#[derive(Clone, Debug)]
pub struct Lu<S> {
    lu: Matrix<S>,
    perm: Vec<usize>,
    odd: bool,
    singular: bool,
}

impl<S: Scalar> Lu<S> {
    pub fn new(a: &Matrix<S>) -> Self {
        assert!(a.is_square(), "LU of non-square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut odd = false;
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].modulus();
            for i in k + 1..n {
                let m = lu[(i, k)].modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if lu[(p, k)].is_zero() {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                odd = !odd;
            }
            let pivot = lu[(k, k)].clone();
            for i in k + 1..n {
                if lu[(i, k)].is_zero() {
                    continue;
                }
                let factor = lu[(i, k)].clone() / pivot.clone();
                for j in k + 1..n {
                    let t = factor.clone() * lu[(k, j)].clone();
                    lu[(i, j)] -= t;
                }
                lu[(i, k)] = factor;
            }
        }
        Lu { lu, perm, odd, singular }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn det(&self) -> S {
        if self.singular {
            return S::zero();
        }
        let mut d = S::one();
        for i in 0..self.lu.rows {
            d *= self.lu[(i, i)].clone();
        }
        if self.odd {
            -d
        } else {
            d
        }
    }

    /// Diagonal of `U`, whose product is the determinant up to sign.
    pub fn pivots(&self) -> Vec<S> {
        (0..self.lu.rows).map(|i| self.lu[(i, i)].clone()).collect()
    }

    pub fn permutation_is_odd(&self) -> bool {
        self.odd
    }

    pub fn solve(&self, b: &[S]) -> Result<Vec<S>> {
        if self.singular {
            return Err(Error::Numerical("singular matrix in LU solve".into()));
        }
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[(i, j)].clone() * x[j].clone();
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[(i, j)].clone() * x[j].clone();
                x[i] -= t;
            }
            x[i] = x[i].clone() / self.lu[(i, i)].clone();
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Matrix<S>> {
        let n = self.lu.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![S::zero(); n];
        for j in 0..n {
            e[j] = S::one();
            let col = self.solve(&e)?;
            e[j] = S::zero();
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        Ok(inv)
    }
}

/// Lower Cholesky factor of a real symmetric positive definite matrix.
pub fn cholesky(a: &Matrix<f64>) -> Result<Matrix<f64>> {
    let n = a.rows();
    let mut l = Matrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Symmetric positive definite matrix stored by its lower band.
///
/// Row-by-row lattice orderings give bandwidth equal to the row width, so a
/// dense band factorization is enough for the Z² domains used here.
#[derive(Clone, Debug)]
pub struct BandedSpd<T> {
    n: usize,
    bw: usize,
    // band[i][k] holds entry (i, i - bw + k) for k in 0..=bw
    band: Vec<T>,
}

impl<T: Float> BandedSpd<T> {
    /// Builds from lower-or-upper triplets; entries are mirrored and summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Self {
        let bw = triplets.iter().map(|&(i, j, _)| i.abs_diff(j)).max().unwrap_or(0);
        let mut band = vec![T::zero(); n * (bw + 1)];
        for &(i, j, v) in triplets {
            if i >= j {
                band[i * (bw + 1) + bw - (i - j)] = band[i * (bw + 1) + bw - (i - j)] + v;
            }
        }
        BandedSpd { n, bw, band }
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// In-place band Cholesky `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<BandedCholesky<T>> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut l = self.band.clone();
        let at = |i: usize, j: usize| i * w + bw - (i - j);
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut d = l[at(j, j)];
            for k in lo..j {
                d = d - l[at(j, k)] * l[at(j, k)];
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d.to_f64().unwrap_or(f64::NAN) });
            }
            let djj = d.sqrt();
            l[at(j, j)] = djj;
            for i in j + 1..(j + bw + 1).min(n) {
                let lo_i = i.saturating_sub(bw).max(lo);
                let mut s = l[at(i, j)];
                for k in lo_i..j {
                    s = s - l[at(i, k)] * l[at(j, k)];
                }
                l[at(i, j)] = s / djj;
            }
        }
        Ok(BandedCholesky { n, bw, band: l })
    }

    pub fn log_det(&self) -> Result<T> {
        Ok(self.cholesky()?.log_det())
    }
}

/// Band Cholesky factor of a [`BandedSpd`] matrix.
#[derive(Clone, Debug)]
pub struct BandedCholesky<T> {
    n: usize,
    bw: usize,
    band: Vec<T>,
}

impl<T: Float> BandedCholesky<T> {
    fn at(&self, i: usize, j: usize) -> T {
        self.band[i * (self.bw + 1) + self.bw - (i - j)]
    }

    pub fn log_det(&self) -> T {
        let acc = (0..self.n).fold(T::zero(), |acc, i| acc + self.at(i, i).ln());
        acc + acc
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let (n, bw) = (self.n, self.bw);
        assert_eq!(b.len(), n, "right-hand side has the wrong length");
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s = s - self.at(i, k) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s = s - self.at(k, i) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        y
    }
}

fn to_nalgebra(m: &Matrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

const SCHUR_MAX_ITER: usize = 10_000;

fn complex_schur_eigenvalues(m: &DMatrix<Complex64>) -> Option<Vec<Complex64>> {
    let schur = m.clone().try_schur(f64::EPSILON, SCHUR_MAX_ITER)?;
    let (_, t) = schur.unpack();
    Some((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// All eigenvalues.
///
/// Real symmetric input uses the symmetric solver; other real input the
/// real Schur form; complex input the complex Schur form. QR iterations can
/// stall on spectra symmetric about the origin, so on failure the matrix is
/// shifted by a small complex multiple of the identity and the shift removed.
pub fn eigenvalues(m: &Matrix<Complex64>) -> Vec<Complex64> {
    let n = m.rows();
    if n == 0 {
        return Vec::new();
    }
    let real = (0..n).all(|i| (0..n).all(|j| m[(i, j)].im == 0.0));
    if real {
        let r = DMatrix::from_fn(n, n, |i, j| m[(i, j)].re);
        if r == r.transpose() {
            return r.symmetric_eigenvalues().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        }
        if let Some(s) = r.clone().try_schur(f64::EPSILON, SCHUR_MAX_ITER) {
            return s.complex_eigenvalues().iter().copied().collect();
        }
    }
    let base = to_nalgebra(m);
    if let Some(ev) = complex_schur_eigenvalues(&base) {
        return ev;
    }
    let scale = base.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    for k in 1..=8 {
        let shift = Complex64::new(0.37, 0.61) * (scale * 1e-3 * k as f64);
        let shifted = &base + DMatrix::from_diagonal_element(n, n, shift);
        if let Some(ev) = complex_schur_eigenvalues(&shifted) {
            return ev.into_iter().map(|z| z - shift).collect();
        }
    }
    panic!("Schur iteration failed to converge on a {n}x{n} matrix");
}

/// Spectral radius: Schur eigenvalues up to [`DENSE_EIGEN_LIMIT`], power iteration beyond.
pub fn spectral_radius(m: &Matrix<Complex64>) -> f64 {
    if m.rows() == 0 {
        return 0.0;
    }
    if m.rows() <= DENSE_EIGEN_LIMIT {
        eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else {
        power_iteration(m, 1e-10, 100_000)
    }
}

/// Growth rate of `‖Mᵏv‖` from a positive start vector.
///
/// Exact for nonnegative matrices (Perron root); for signed matrices it is an
/// estimate that may miss cancelling eigenvalues.
pub fn power_iteration(m: &Matrix<Complex64>, tol: f64, max_iter: usize) -> f64 {
    let n = m.rows();
    let mut v = vec![Complex64::one(); n];
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let w = m.mul_vec(&v);
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let prev = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let est = norm / prev;
        v = w.into_iter().map(|z| z / norm).collect();
        if (est - last).abs() <= tol * est.max(1.0) {
            return est;
        }
        last = est;
    }
    last
}
