//! Location estimators: the sample mean and the spatial median.
//!
//! The spatial median minimizes `Σ |Xᵢ − μ|`. It is computed with Weiszfeld's
//! reweighting iteration, modified (Vardi & Zhang) so that an iterate sitting
//! exactly on a data point either stops there, when that point satisfies the
//! subgradient condition, or steps off it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, Observations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    Mean,
    SpatialMedian,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationResult {
    pub estimate: Vec<f64>,
    pub method: LocationKind,
    pub iterations: usize,
    pub converged: bool,
    /// The estimate coincides exactly with at least one observation.
    pub anchored: bool,
    /// `Σᵢ |Xᵢ − estimate|`.
    pub objective: f64,
    /// Set when the sample is (numerically) concentrated on a line, where
    /// the spatial median need not be unique.
    pub degenerate_geometry: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianInit {
    ComponentwiseMedian,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianOptions {
    /// Stop once a step is shorter than `tolerance` times the local data
    /// scale: the smaller of the mean distance of the observations to the
    /// starting point and the distance to the nearest observation.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initialization: MedianInit,
}

impl Default for MedianOptions {
    fn default() -> Self {
        MedianOptions {
            tolerance: 1e-10,
            max_iterations: 1000,
            initialization: MedianInit::ComponentwiseMedian,
        }
    }
}

impl MedianOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid("median tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Location estimator selector used by the plug-in SSCM and the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationMethod {
    Mean,
    SpatialMedian,
    Fixed(Vec<f64>),
}

impl LocationMethod {
    pub fn estimate(&self, x: &Observations, opts: &MedianOptions) -> Result<LocationResult> {
        match self {
            LocationMethod::Mean => sample_mean(x),
            LocationMethod::SpatialMedian => spatial_median(x, opts),
            LocationMethod::Fixed(t) => fixed_location(x, t),
        }
    }
}

pub fn l1_objective(x: &Observations, mu: &[f64]) -> Result<f64> {
    x.check_dim(mu)?;
    Ok(objective_unchecked(x, mu))
}

fn objective_unchecked(x: &Observations, mu: &[f64]) -> f64 {
    x.rows().map(|r| dist(r, mu)).sum()
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

fn mean_vector(x: &Observations) -> Vec<f64> {
    let mut m = vec![0.0; x.p()];
    for r in x.rows() {
        for (a, v) in m.iter_mut().zip(r) {
            *a += v;
        }
    }
    let n = x.n() as f64;
    m.iter_mut().for_each(|a| *a /= n);
    m
}

pub fn sample_mean(x: &Observations) -> Result<LocationResult> {
    x.require_nonempty()?;
    let estimate = mean_vector(x);
    Ok(LocationResult {
        objective: objective_unchecked(x, &estimate),
        anchored: x.rows().any(|r| r == estimate.as_slice()),
        estimate,
        method: LocationKind::Mean,
        iterations: 0,
        converged: true,
        degenerate_geometry: false,
    })
}

/// Wraps a user-supplied location in a [`LocationResult`].
pub fn fixed_location(x: &Observations, t: &[f64]) -> Result<LocationResult> {
    x.require_nonempty()?;
    x.check_dim(t)?;
    Ok(LocationResult {
        estimate: t.to_vec(),
        method: LocationKind::Fixed,
        iterations: 0,
        converged: true,
        anchored: x.rows().any(|r| r == t),
        objective: objective_unchecked(x, t),
        degenerate_geometry: false,
    })
}

pub fn spatial_median(x: &Observations, opts: &MedianOptions) -> Result<LocationResult> {
    weiszfeld(x, opts, None)
}

/// Same as [`spatial_median`], also returning the objective value at every
/// iterate (starting point included).
pub fn spatial_median_traced(
    x: &Observations,
    opts: &MedianOptions,
) -> Result<(LocationResult, Vec<f64>)> {
    let mut trace = Vec::new();
    let res = weiszfeld(x, opts, Some(&mut trace))?;
    Ok((res, trace))
}

fn componentwise_median(x: &Observations) -> Vec<f64> {
    let mut col = Vec::with_capacity(x.n());
    (0..x.p())
        .map(|j| {
            col.clear();
            col.extend(x.rows().map(|r| r[j]));
            col.sort_by(f64::total_cmp);
            let n = col.len();
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect()
}

/// One pass over the data at the point `y`.
struct Pass {
    /// Observations coinciding exactly with `y`.
    multiplicity: usize,
    /// `Σ_{Xᵢ≠y} s(Xᵢ − y)`.
    sign_sum: Vec<f64>,
    weight_sum: f64,
    /// `Σ_{Xᵢ≠y} Xᵢ / |Xᵢ − y|`.
    weighted_points: Vec<f64>,
    objective: f64,
    nearest: Option<(usize, f64)>,
}

fn pass(x: &Observations, y: &[f64]) -> Pass {
    let p = x.p();
    let mut out = Pass {
        multiplicity: 0,
        sign_sum: vec![0.0; p],
        weight_sum: 0.0,
        weighted_points: vec![0.0; p],
        objective: 0.0,
        nearest: None,
    };
    let mut diff = vec![0.0; p];
    let mut best = f64::INFINITY;
    for (i, r) in x.as_slice().chunks_exact(p).enumerate() {
        let mut sq = 0.0;
        for k in 0..p {
            diff[k] = r[k] - y[k];
            sq += diff[k] * diff[k];
        }
        if sq == 0.0 && r == y {
            out.multiplicity += 1;
            continue;
        }
        let d = sq.sqrt().max(f64::MIN_POSITIVE);
        out.objective += d;
        let w = 1.0 / d;
        out.weight_sum += w;
        for k in 0..p {
            out.weighted_points[k] += w * r[k];
            out.sign_sum[k] += w * diff[k];
        }
        if d < best {
            best = d;
            out.nearest = Some((i, d));
        }
    }
    out
}

/// Subgradient test at a data point: optimal iff `|Σ_{Xᵢ≠y} s(Xᵢ − y)| ≤ η`.
fn is_optimal_data_point(x: &Observations, y: &[f64]) -> bool {
    let pp = pass(x, y);
    pp.multiplicity > 0 && norm(&pp.sign_sum) <= pp.multiplicity as f64
}

fn weiszfeld(
    x: &Observations,
    opts: &MedianOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<LocationResult> {
    x.require_nonempty()?;
    opts.validate()?;
    let p = x.p();
    let degenerate_geometry = is_collinear(x);

    let mut y = match opts.initialization {
        MedianInit::ComponentwiseMedian => componentwise_median(x),
        MedianInit::Mean => mean_vector(x),
    };
    let scale = objective_unchecked(x, &y) / x.n() as f64;
    let finish = |y: Vec<f64>, iterations: usize, converged: bool| {
        let objective = objective_unchecked(x, &y);
        LocationResult {
            anchored: x.rows().any(|r| r == y.as_slice()),
            estimate: y,
            method: LocationKind::SpatialMedian,
            iterations,
            converged,
            objective,
            degenerate_geometry,
        }
    };
    if scale == 0.0 {
        // every observation equals the starting point
        if let Some(t) = trace.as_deref_mut() {
            t.push(0.0);
        }
        return Ok(finish(y, 0, true));
    }
    let mut last_probe = None;
    let mut last_nearest = None;
    let mut last_move: Option<(Vec<f64>, f64)> = None;

    for iter in 1..=opts.max_iterations {
        let cur = pass(x, &y);
        if let Some(t) = trace.as_deref_mut() {
            t.push(cur.objective);
        }
        let eta = cur.multiplicity as f64;
        let mut next = vec![0.0; p];
        if cur.weight_sum == 0.0 {
            return Ok(finish(y, iter - 1, true));
        }
        for k in 0..p {
            next[k] = cur.weighted_points[k] / cur.weight_sum;
        }
        if cur.multiplicity > 0 {
            let r = norm(&cur.sign_sum);
            if r <= eta {
                return Ok(finish(y, iter - 1, true));
            }
            let lambda = 1.0 - eta / r;
            for k in 0..p {
                next[k] = y[k] + lambda * (next[k] - y[k]);
            }
        }
        let step = dist(&next, &y);

        // Weiszfeld slows to a crawl when the minimizer is a data point, so
        // a nearby observation is tested directly once it is close relative
        // to the step or has stayed the nearest one for two iterations.
        let mut local_scale = scale;
        if let Some((idx, d)) = cur.nearest {
            local_scale = local_scale.min(d);
            let settled = last_nearest == Some(idx) || d <= 4.0 * step;
            last_nearest = Some(idx);
            if settled && last_probe != Some(idx) {
                last_probe = Some(idx);
                let cand = x.row(idx);
                if is_optimal_data_point(x, cand) {
                    let cand = cand.to_vec();
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(objective_unchecked(x, &cand));
                    }
                    return Ok(finish(cand, iter, true));
                }
            }
        }

        // Near-degenerate configurations make the iteration contract slowly
        // along a fixed direction; then jump to the limit of the geometric
        // series of steps, keeping the jump only if it lowers the objective.
        let mv: Vec<f64> = next.iter().zip(&y).map(|(a, b)| a - b).collect();
        let mut jumped = false;
        if let (0, Some((prev, prev_step))) = (cur.multiplicity, &last_move) {
            let ratio = step / prev_step;
            let cos = crate::linalg::dot(&mv, prev) / (step * prev_step);
            if (0.5..1.0).contains(&ratio) && cos > 0.99 {
                let lambda = ratio / (1.0 - ratio);
                let cand: Vec<f64> = next.iter().zip(&mv).map(|(a, m)| a + lambda * m).collect();
                if objective_unchecked(x, &cand) < objective_unchecked(x, &next) {
                    next = cand;
                    jumped = true;
                }
            }
        }
        last_move = if jumped { None } else { Some((mv, step)) };

        y = next;
        if !jumped && step <= opts.tolerance * local_scale {
            if let Some(t) = trace.as_deref_mut() {
                t.push(objective_unchecked(x, &y));
            }
            return Ok(finish(y, iter, true));
        }
    }
    if let Some(t) = trace {
        t.push(objective_unchecked(x, &y));
    }
    Ok(finish(y, opts.max_iterations, false))
}

/// Second singular value of the centered sample below `1e-12` of the first.
fn is_collinear(x: &Observations) -> bool {
    let (n, p) = (x.n(), x.p());
    if n < 2 {
        return false;
    }
    if p == 1 || n == 2 {
        return true;
    }
    let m = mean_vector(x);
    // Columns of the centered data matrix or of its transpose, whichever
    // gives fewer of them; both share the nonzero singular values.
    let cols: Vec<Vec<f64>> = if p <= n {
        (0..p)
            .map(|k| x.rows().map(|r| r[k] - m[k]).collect())
            .collect()
    } else {
        x.rows()
            .map(|r| r.iter().zip(&m).map(|(v, c)| v - c).collect())
            .collect()
    };
    let mut sv = singular_values(cols);
    sv.sort_by(|a, b| b.total_cmp(a));
    sv[0] == 0.0 || sv[1] < 1e-12 * sv[0]
}

/// One-sided Jacobi: orthogonalizes the columns by plane rotations, after
/// which their norms are the singular values. Accurate relative to the
/// largest singular value, unlike the eigenvalues of the Gram matrix.
fn singular_values(mut cols: Vec<Vec<f64>>) -> Vec<f64> {
    let k = cols.len();
    for _ in 0..64 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let (left, right) = cols.split_at_mut(j);
                let (a, b) = (&mut left[i], &mut right[0]);
                let alpha = crate::linalg::dot(a, a);
                let beta = crate::linalg::dot(b, b);
                let gamma = crate::linalg::dot(a, b);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for (u, v) in a.iter_mut().zip(b.iter_mut()) {
                    let (x, y) = (*u, *v);
                    *u = c * x - s * y;
                    *v = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    cols.iter().map(|c| norm(c)).collect()
}
