//! Plug-in estimators of the limiting covariances of the SSCM.
//!
//! With `Zᵢ = vec{s(Xᵢ − t)s(Xᵢ − t)ᵀ}`:
//!
//! * `W = Var(Z)` is the limit covariance of `√n vec(S_n − S)` when the
//!   location is known, or estimated under the symmetry conditions.
//! * Without symmetry the plug-in SSCM at the sample mean has limit
//!   covariance `A Ξ Aᵀ`, where `Ξ` is the joint covariance of `(Xᵢ, Zᵢ)`,
//!   `A = (B, I_{p²})` and
//!   `B = 2 E[(y ⊗ y) yᵀ / |y|⁴] − E[y/|y|²] ⊗ I_p − I_p ⊗ E[y/|y|²]`, `y = X − t`.
//!
//! All covariances use `1/n` normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sign_into, Matrix, Observations};

/// Empirical covariance (`1/n`) of the rows produced by `rows`, each of
/// length `d`. Two-pass for accuracy.
fn covariance(n: usize, d: usize, mut rows: impl FnMut(usize, &mut [f64])) -> Matrix {
    let mut mean = vec![0.0; d];
    let mut buf = vec![0.0; d];
    for i in 0..n {
        rows(i, &mut buf);
        for (m, v) in mean.iter_mut().zip(&buf) {
            *m += v;
        }
    }
    let nf = n as f64;
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut c = Matrix::zeros(d, d);
    for i in 0..n {
        rows(i, &mut buf);
        for (v, m) in buf.iter_mut().zip(&mean) {
            *v -= m;
        }
        for a in 0..d {
            if buf[a] == 0.0 {
                continue;
            }
            for b in a..d {
                c.add_at(a, b, buf[a] * buf[b]);
            }
        }
    }
    Matrix::from_fn(d, d, |a, b| {
        let v = if a <= b { c.get(a, b) } else { c.get(b, a) };
        v / nf
    })
}

/// Writes `vec{s(x − t)s(x − t)ᵀ}` into `out` (length `p²`).
fn sign_vec_into(x: &[f64], t: &[f64], diff: &mut [f64], u: &mut [f64], out: &mut [f64]) {
    for k in 0..x.len() {
        diff[k] = x[k] - t[k];
    }
    sign_into(diff, u);
    let p = u.len();
    for j in 0..p {
        for i in 0..p {
            out[j * p + i] = u[i] * u[j];
        }
    }
}

pub fn estimate_w(x: &Observations, t: &[f64]) -> Result<Matrix> {
    if x.n() < 2 {
        return Err(Error::invalid("W needs at least two observations"));
    }
    x.check_dim(t)?;
    let p = x.p();
    let mut diff = vec![0.0; p];
    let mut u = vec![0.0; p];
    Ok(covariance(x.n(), p * p, |i, out| {
        sign_vec_into(x.row(i), t, &mut diff, &mut u, out)
    }))
}

pub fn estimate_b(x: &Observations, t: &[f64]) -> Result<Matrix> {
    x.require_nonempty()?;
    x.check_dim(t)?;
    let p = x.p();
    let mut third = Matrix::zeros(p * p, p);
    let mut inv = vec![0.0; p];
    let mut used = 0usize;
    let mut y = vec![0.0; p];
    for r in x.rows() {
        for k in 0..p {
            y[k] = r[k] - t[k];
        }
        let sq: f64 = y.iter().map(|v| v * v).sum();
        if sq == 0.0 {
            if y.iter().all(|&v| v == 0.0) {
                continue;
            }
            return Err(Error::invalid("observation too close to the location to evaluate B"));
        }
        used += 1;
        let sq2 = sq * sq;
        for a in 0..p {
            for b in 0..p {
                let yy = y[a] * y[b] / sq2;
                for c in 0..p {
                    third.add_at(a * p + b, c, yy * y[c]);
                }
            }
        }
        for k in 0..p {
            inv[k] += y[k] / sq;
        }
    }
    if used == 0 {
        return Err(Error::DegenerateSample(
            "all observations coincide with the location".into(),
        ));
    }
    let nf = used as f64;
    inv.iter_mut().for_each(|v| *v /= nf);
    let m = Matrix::from_row_major(p, 1, inv)?;
    let id = Matrix::identity(p);
    third
        .scale(2.0 / nf)
        .sub(&m.kron(&id))?
        .sub(&id.kron(&m))
}

/// Covariance of the stacked vectors `(Xᵢ, Zᵢ)`: the joint limit covariance
/// of `(t_n, vec S_n(t))` when `t_n` is the sample mean.
pub fn estimate_xi_mean(x: &Observations, t: &[f64]) -> Result<Matrix> {
    if x.n() < 2 {
        return Err(Error::invalid("Xi needs at least two observations"));
    }
    x.check_dim(t)?;
    let p = x.p();
    let mut diff = vec![0.0; p];
    let mut u = vec![0.0; p];
    Ok(covariance(x.n(), p + p * p, |i, out| {
        let r = x.row(i);
        let (head, z) = out.split_at_mut(p);
        for k in 0..p {
            head[k] = r[k] - t[k];
        }
        sign_vec_into(r, t, &mut diff, &mut u, z);
    }))
}

/// `A = (B, I_{p²})`.
pub fn a_matrix(b: &Matrix) -> Result<Matrix> {
    let q = b.rows();
    b.hcat(&Matrix::identity(q))
}

/// `A Ξ Aᵀ` with `A = (B, I_{p²})`, symmetrized.
pub fn sandwich(b: &Matrix, xi: &Matrix) -> Result<Matrix> {
    let (q, p) = (b.rows(), b.cols());
    if q != p * p {
        return Err(Error::shape(format!("{}x{p}", p * p), format!("{q}x{p}")));
    }
    if xi.rows() != p + q || xi.cols() != p + q {
        return Err(Error::shape(
            format!("{0}x{0}", p + q),
            format!("{}x{}", xi.rows(), xi.cols()),
        ));
    }
    let a = a_matrix(b)?;
    Ok(a.matmul(xi)?.matmul(&a.transpose())?.symmetrized())
}

/// Limit variance of `√n (S_n − S)_{ij}`: the diagonal entry of `W` at the
/// vec position of `(i, j)` (0-based indices).
pub fn element_limit_variance(w: &Matrix, i: usize, j: usize) -> Result<f64> {
    let q = w.rows();
    let p = (q as f64).sqrt().round() as usize;
    if p * p != q || !w.is_square() {
        return Err(Error::shape("p² x p² matrix", format!("{}x{}", w.rows(), w.cols())));
    }
    if i >= p || j >= p {
        return Err(Error::invalid(format!("index ({i}, {j}) out of range for p = {p}")));
    }
    let k = j * p + i;
    Ok(w.get(k, k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsBundle {
    pub w: Matrix,
    pub b: Matrix,
    pub xi: Matrix,
    pub a: Matrix,
    pub sandwich: Matrix,
    pub n_used: usize,
    /// Largest marginal sample kurtosis; very large values signal that the
    /// second-moment assumption behind `Ξ` is doubtful.
    pub max_marginal_kurtosis: f64,
}

/// Every estimator above at the same location `t`.
pub fn asymptotics_bundle(x: &Observations, t: &[f64]) -> Result<AsymptoticsBundle> {
    let w = estimate_w(x, t)?;
    let b = estimate_b(x, t)?;
    let xi = estimate_xi_mean(x, t)?;
    let a = a_matrix(&b)?;
    let sandwich = sandwich(&b, &xi)?;
    let n_used = x.rows().filter(|r| *r != t).count();
    Ok(AsymptoticsBundle {
        w,
        b,
        xi,
        a,
        sandwich,
        n_used,
        max_marginal_kurtosis: max_marginal_kurtosis(x),
    })
}

fn max_marginal_kurtosis(x: &Observations) -> f64 {
    let nf = x.n() as f64;
    (0..x.p())
        .map(|k| {
            let m = x.rows().map(|r| r[k]).sum::<f64>() / nf;
            let (m2, m4) = x.rows().fold((0.0, 0.0), |(a, b), r| {
                let d = (r[k] - m) * (r[k] - m);
                (a + d, b + d * d)
            });
            let (m2, m4) = (m2 / nf, m4 / nf);
            if m2 == 0.0 {
                0.0
            } else {
                m4 / (m2 * m2)
            }
        })
        .fold(0.0, f64::max)
}
