//! Dense linear-algebra kernel.
//!
//! Vectors are plain `f64` slices. [`Matrix`] is a dense row-major matrix,
//! [`Observations`] an `n × p` sample with one observation per row.
//!
//! `vec` stacks columns left to right (column-major), so entry `(i, j)` of a
//! `p × p` matrix lands at position `j * p + i` (0-based). Every `p²`-sized
//! object in the crate (`W`, `B`, the sandwich) uses this ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn check_finite(x: &[f64], what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite entries")))
    }
}

/// Spatial sign `x / |x|`, with `s(0) = 0`.
///
/// The zero test is exact: any vector with a nonzero entry has a unit sign,
/// however small its norm.
pub fn spatial_sign(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::invalid("empty vector"));
    }
    check_finite(x, "vector")?;
    let mut out = vec![0.0; x.len()];
    sign_into(x, &mut out);
    Ok(out)
}

/// Writes `s(x)` into `out` and returns `|x|`. No validation.
#[inline]
pub(crate) fn sign_into(x: &[f64], out: &mut [f64]) -> f64 {
    let r = norm(x);
    if r == 0.0 {
        if x.iter().all(|&v| v == 0.0) {
            out.iter_mut().for_each(|o| *o = 0.0);
            return 0.0;
        }
        // Subnormal entries whose squares underflow: rescale first.
        let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let r_scaled = x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt();
        for (o, v) in out.iter_mut().zip(x) {
            *o = (v / m) / r_scaled;
        }
        return m * r_scaled;
    }
    if !r.is_finite() {
        let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let r_scaled = x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt();
        for (o, v) in out.iter_mut().zip(x) {
            *o = (v / m) / r_scaled;
        }
        return m * r_scaled;
    }
    for (o, v) in out.iter_mut().zip(x) {
        *o = v / r;
    }
    r
}

/// `x ⊗ y` for vectors.
pub fn kron_vec(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter()
        .flat_map(|a| y.iter().map(move |b| a * b))
        .collect()
}

/// Spatial sign together with its outer product `u uᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignOuter {
    u: Vec<f64>,
}

impl SignOuter {
    pub fn new(x: &[f64]) -> Result<Self> {
        Ok(SignOuter {
            u: spatial_sign(x)?,
        })
    }

    pub fn sign(&self) -> &[f64] {
        &self.u
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().all(|&v| v == 0.0)
    }

    pub fn outer(&self) -> Matrix {
        Matrix::outer(&self.u, &self.u)
    }

    /// `vec(u uᵀ) = u ⊗ u`.
    pub fn vec(&self) -> Vec<f64> {
        kron_vec(&self.u, &self.u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(p: usize) -> Self {
        Self::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(d: &[f64]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                format!("{} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::from_row_major(r, c, rows.concat())
    }

    /// Inverse of [`Matrix::vec`]: rebuilds a `p × p` matrix from a
    /// column-stacked vector of length `p²`.
    pub fn from_vec(v: &[f64], p: usize) -> Result<Self> {
        if v.len() != p * p {
            return Err(Error::shape(format!("length {}", p * p), format!("length {}", v.len())));
        }
        Ok(Self::from_fn(p, p, |i, j| v[j * p + i]))
    }

    pub fn outer(x: &[f64], y: &[f64]) -> Self {
        Self::from_fn(x.len(), y.len(), |i, j| x[i] * y[j])
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub(crate) fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scale(&self, c: f64) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn add(&self, other: &Matrix) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn check_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape(
                format!("{} rows on the right", self.cols),
                format!("{} rows", other.rows),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::shape(format!("length {}", self.cols), format!("length {}", x.len())));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Column-stacking `vec`.
    pub fn vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                v.push(self.get(i, j));
            }
        }
        v
    }

    /// Kronecker product; block `(i, j)` equals `self[i, j] · other`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        Matrix::from_fn(r, c, |i, j| {
            self.get(i / other.rows, j / other.cols) * other.get(i % other.rows, j % other.cols)
        })
    }

    /// Horizontal concatenation `(self, other)`.
    pub fn hcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape(format!("{} rows", self.rows), format!("{} rows", other.rows)));
        }
        Ok(Matrix::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self.get(i, j)
            } else {
                other.get(i, j - self.cols)
            }
        }))
    }

    /// Copies the `rows × cols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |i, j| self.get(r0 + i, c0 + j))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        debug_assert!(self.is_square());
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    /// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric
    /// matrix by cyclic Jacobi rotations.
    pub fn symmetric_eigen(&self) -> Result<(Vec<f64>, Matrix)> {
        if !self.is_square() {
            return Err(Error::shape("square matrix", format!("{}x{}", self.rows, self.cols)));
        }
        if !self.is_finite() {
            return Err(Error::invalid("matrix contains non-finite entries"));
        }
        let p = self.rows;
        let mut a = self.symmetrized();
        let mut v = Matrix::identity(p);
        let scale = a.frobenius_norm();
        if scale == 0.0 {
            return Ok((vec![0.0; p], v));
        }
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..p {
                for j in (i + 1)..p {
                    off += a.get(i, j) * a.get(i, j);
                }
            }
            if off.sqrt() <= 1e-15 * scale {
                break;
            }
            for k in 0..p {
                for l in (k + 1)..p {
                    let akl = a.get(k, l);
                    if akl.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let theta = (a.get(l, l) - a.get(k, k)) / (2.0 * akl);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for r in 0..p {
                        let ark = a.get(r, k);
                        let arl = a.get(r, l);
                        a.set(r, k, c * ark - s * arl);
                        a.set(r, l, s * ark + c * arl);
                    }
                    for r in 0..p {
                        let akr = a.get(k, r);
                        let alr = a.get(l, r);
                        a.set(k, r, c * akr - s * alr);
                        a.set(l, r, s * akr + c * alr);
                    }
                    for r in 0..p {
                        let vrk = v.get(r, k);
                        let vrl = v.get(r, l);
                        v.set(r, k, c * vrk - s * vrl);
                        v.set(r, l, s * vrk + c * vrl);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&x, &y| a.get(x, x).total_cmp(&a.get(y, y)));
        let values = order.iter().map(|&k| a.get(k, k)).collect();
        let vectors = Matrix::from_fn(p, p, |i, j| v.get(i, order[j]));
        Ok((values, vectors))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.symmetric_eigen()?.0[0])
    }

    /// Lower-triangular Cholesky factor `L` with `L Lᵀ = self`.
    pub fn cholesky(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::shape("square matrix", format!("{}x{}", self.rows, self.cols)));
        }
        if !self.is_finite() {
            return Err(Error::invalid("matrix contains non-finite entries"));
        }
        let p = self.rows;
        let mut l = Matrix::zeros(p, p);
        for j in 0..p {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if d <= 0.0 {
                return Err(Error::invalid("matrix is not positive definite"));
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in (j + 1)..p {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Ok(l)
    }
}

/// `Σ_ij (A_ij − B_ij)²`.
pub fn frobenius_sq_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    a.check_same_shape(b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

/// An `n × p` sample, one observation per row. All entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Observations {
    pub fn from_row_major(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("observations need at least one coordinate"));
        }
        if data.len() != n * p {
            return Err(Error::shape(format!("{} entries", n * p), format!("{} entries", data.len())));
        }
        check_finite(&data, "observations")?;
        Ok(Observations { n, p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::from_row_major(rows.len(), p, rows.concat())
    }

    /// Wraps already-validated data from a sampler.
    pub(crate) fn from_raw(n: usize, p: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * p);
        Observations { n, p, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Applies `x ↦ f(x)` to every observation; `f` must preserve length.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for r in self.rows() {
            let y = f(r);
            if y.len() != self.p {
                return Err(Error::shape(format!("length {}", self.p), format!("length {}", y.len())));
            }
            data.extend(y);
        }
        Self::from_row_major(self.n, self.p, data)
    }

    pub(crate) fn check_dim(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.p {
            return Err(Error::shape(format!("location of length {}", self.p), format!("length {}", t.len())));
        }
        check_finite(t, "location")
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("empty sample"));
        }
        Ok(())
    }
}
