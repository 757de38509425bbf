//! Spatial sign covariance matrices.
//!
//! `S_n(X, t) = n⁻¹ Σ s(Xᵢ − t) s(Xᵢ − t)ᵀ`, its starred variant normalized by
//! the number `n*` of observations different from `t`, the plug-in version at
//! an estimated location, and the symmetrized (pairwise-difference) SSCM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sign_into, Matrix, Observations};
use crate::location::{LocationMethod, LocationResult, MedianOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterVariant {
    FixedLocation,
    PlugIn,
    Starred,
    Symmetrized,
    Population,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterMatrix {
    pub matrix: Matrix,
    pub variant: ScatterVariant,
    /// Number of terms the average runs over: `n`, `n*`, or the number of
    /// distinct pairs.
    pub n_effective: usize,
    pub location_used: Option<Vec<f64>>,
}

impl ScatterMatrix {
    pub fn p(&self) -> usize {
        self.matrix.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceReport {
    pub n: usize,
    pub n_star: usize,
    pub indices_coincident: Vec<usize>,
}

/// Sum of sign outer products about `t` (upper triangle mirrored) and the
/// indices of observations equal to `t`.
fn sign_outer_sum(x: &Observations, t: &[f64]) -> (Matrix, Vec<usize>) {
    let p = x.p();
    let mut acc = Matrix::zeros(p, p);
    let mut diff = vec![0.0; p];
    let mut u = vec![0.0; p];
    let mut coincident = Vec::new();
    for (i, r) in x.rows().enumerate() {
        for k in 0..p {
            diff[k] = r[k] - t[k];
        }
        if sign_into(&diff, &mut u) == 0.0 {
            coincident.push(i);
            continue;
        }
        accumulate_upper(&mut acc, &u);
    }
    mirror_upper(&mut acc);
    (acc, coincident)
}

#[inline]
fn accumulate_upper(acc: &mut Matrix, u: &[f64]) {
    let p = u.len();
    for a in 0..p {
        let ua = u[a];
        for b in a..p {
            acc.add_at(a, b, ua * u[b]);
        }
    }
}

fn mirror_upper(m: &mut Matrix) {
    let p = m.rows();
    for a in 0..p {
        for b in 0..a {
            let v = m.get(b, a);
            m.set(a, b, v);
        }
    }
}

pub fn sscm_fixed(x: &Observations, t: &[f64]) -> Result<ScatterMatrix> {
    x.require_nonempty()?;
    x.check_dim(t)?;
    let (sum, _) = sign_outer_sum(x, t);
    Ok(ScatterMatrix {
        matrix: sum.scale(1.0 / x.n() as f64),
        variant: ScatterVariant::FixedLocation,
        n_effective: x.n(),
        location_used: Some(t.to_vec()),
    })
}

pub fn sscm_star(x: &Observations, t: &[f64]) -> Result<ScatterMatrix> {
    x.require_nonempty()?;
    x.check_dim(t)?;
    let (sum, coincident) = sign_outer_sum(x, t);
    let n_star = x.n() - coincident.len();
    if n_star == 0 {
        return Err(Error::DegenerateSample(
            "all observations coincide with the location".into(),
        ));
    }
    Ok(ScatterMatrix {
        matrix: sum.scale(1.0 / n_star as f64),
        variant: ScatterVariant::Starred,
        n_effective: n_star,
        location_used: Some(t.to_vec()),
    })
}

pub fn coincidence_report(x: &Observations, t: &[f64]) -> Result<CoincidenceReport> {
    x.check_dim(t)?;
    let indices_coincident: Vec<usize> = x
        .rows()
        .enumerate()
        .filter(|(_, r)| *r == t)
        .map(|(i, _)| i)
        .collect();
    Ok(CoincidenceReport {
        n: x.n(),
        n_star: x.n() - indices_coincident.len(),
        indices_coincident,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlugInSscm {
    pub scatter: ScatterMatrix,
    /// `None` when every observation coincides with the location.
    pub starred: Option<ScatterMatrix>,
    pub location: LocationResult,
    pub coincidence: CoincidenceReport,
}

/// SSCM at an estimated location `t_n`.
pub fn sscm_plugin(
    x: &Observations,
    method: &LocationMethod,
    opts: &MedianOptions,
) -> Result<PlugInSscm> {
    if x.n() < 2 {
        return Err(Error::invalid("plug-in SSCM needs at least two observations"));
    }
    let location = method.estimate(x, opts)?;
    let t = &location.estimate;
    let (sum, coincident) = sign_outer_sum(x, t);
    let n = x.n();
    let n_star = n - coincident.len();
    let variant = match method {
        LocationMethod::Fixed(_) => ScatterVariant::FixedLocation,
        _ => ScatterVariant::PlugIn,
    };
    let scatter = ScatterMatrix {
        matrix: sum.scale(1.0 / n as f64),
        variant,
        n_effective: n,
        location_used: Some(t.clone()),
    };
    let starred = (n_star > 0).then(|| ScatterMatrix {
        matrix: sum.scale(1.0 / n_star as f64),
        variant: ScatterVariant::Starred,
        n_effective: n_star,
        location_used: Some(t.clone()),
    });
    Ok(PlugInSscm {
        scatter,
        starred,
        coincidence: CoincidenceReport {
            n,
            n_star,
            indices_coincident: coincident,
        },
        location,
    })
}

/// Symmetrized SSCM (spatial Kendall's tau): average of `s(Xᵢ − Xⱼ)s(Xᵢ − Xⱼ)ᵀ`
/// over unordered pairs `i < j` with `Xᵢ ≠ Xⱼ`.
pub fn ssscm(x: &Observations) -> Result<ScatterMatrix> {
    if x.n() < 2 {
        return Err(Error::invalid("symmetrized SSCM needs at least two observations"));
    }
    let p = x.p();
    let mut acc = Matrix::zeros(p, p);
    let mut diff = vec![0.0; p];
    let mut u = vec![0.0; p];
    let mut pairs = 0usize;
    for i in 0..x.n() {
        let xi = x.row(i);
        for j in (i + 1)..x.n() {
            let xj = x.row(j);
            for k in 0..p {
                diff[k] = xi[k] - xj[k];
            }
            if sign_into(&diff, &mut u) == 0.0 {
                continue;
            }
            pairs += 1;
            accumulate_upper(&mut acc, &u);
        }
    }
    if pairs == 0 {
        return Err(Error::DegenerateSample("all observations are identical".into()));
    }
    mirror_upper(&mut acc);
    Ok(ScatterMatrix {
        matrix: acc.scale(1.0 / pairs as f64),
        variant: ScatterVariant::Symmetrized,
        n_effective: pairs,
        location_used: None,
    })
}

fn signs(x: &Observations, t: &[f64]) -> Vec<f64> {
    let p = x.p();
    let mut out = vec![0.0; x.n() * p];
    let mut diff = vec![0.0; p];
    for (r, u) in x.rows().zip(out.chunks_exact_mut(p)) {
        for k in 0..p {
            diff[k] = r[k] - t[k];
        }
        sign_into(&diff, u);
    }
    out
}

/// `‖S_n(X, t) − p⁻¹ I_p‖²` through the `n × n` Gram matrix of the signs,
/// never forming the `p × p` SSCM. Costs `O(n² p)`.
pub fn frobenius_error_gram(x: &Observations, t: &[f64]) -> Result<f64> {
    x.require_nonempty()?;
    x.check_dim(t)?;
    let (n, p) = (x.n(), x.p());
    let u = signs(x, t);
    let row = |i: usize| &u[i * p..(i + 1) * p];
    let mut diag = 0.0;
    let mut off = 0.0;
    for i in 0..n {
        let ui = row(i);
        let sq: f64 = ui.iter().map(|v| v * v).sum();
        diag += sq * sq;
        for j in (i + 1)..n {
            let g: f64 = ui.iter().zip(row(j)).map(|(a, b)| a * b).sum();
            off += g * g;
        }
    }
    let nf = n as f64;
    let pf = p as f64;
    let trace = u.iter().map(|v| v * v).sum::<f64>() / nf;
    let sq_norm = (diag + 2.0 * off) / (nf * nf);
    Ok((sq_norm - 2.0 * trace / pf + 1.0 / pf).max(0.0))
}

/// `‖S_n(X, t) − p⁻¹ I_p‖²`, choosing the Gram route when `n < p` and the
/// dense route otherwise.
pub fn frobenius_error_to_identity(x: &Observations, t: &[f64]) -> Result<f64> {
    if x.n() < x.p() {
        return frobenius_error_gram(x, t);
    }
    let s = sscm_fixed(x, t)?;
    let p = x.p();
    crate::linalg::frobenius_sq_distance(&s.matrix, &Matrix::identity(p).scale(1.0 / p as f64))
}
