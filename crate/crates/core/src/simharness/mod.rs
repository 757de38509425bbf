//! Deterministic parallel Monte Carlo experiments.
//!
//! Every replication draws from its own ChaCha8 stream keyed by
//! `(master_seed, cell << 32 | replication)`, never by worker, and results
//! are collected in replication order before any reduction. Output is
//! therefore bitwise identical for any worker count.
//!
//! Within a table cell all location methods see the same samples; the
//! γ-sweep additionally shares streams across γ values (common random
//! numbers), so differences between cells of one sample size come from the
//! estimators rather than from sampling noise.

mod ks;
mod output;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{element_limit_variance, estimate_b, estimate_w, estimate_xi_mean, sandwich};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Observations};
use crate::location::{sample_mean, spatial_median, MedianOptions};
use crate::models::{population_sscm_closed_p2, population_sscm_mc, EllipticalModel, Generator, SeededStream, SimModel};
use crate::scatter::{frobenius_error_to_identity, sscm_fixed, ssscm};

pub use ks::{ks_statistic, normal_reference_quantiles};
pub use output::{config_hash, ExperimentMetadata};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationChoice {
    /// The model center.
    Known,
    Mean,
    #[serde(alias = "median")]
    SpatialMedian,
}

impl LocationChoice {
    pub fn label(&self) -> &'static str {
        match self {
            LocationChoice::Known => "known",
            LocationChoice::Mean => "mean",
            LocationChoice::SpatialMedian => "median",
        }
    }

    fn locate(&self, x: &Observations, center: &[f64], opts: &MedianOptions) -> Result<Vec<f64>> {
        Ok(match self {
            LocationChoice::Known => center.to_vec(),
            LocationChoice::Mean => sample_mean(x)?.estimate,
            LocationChoice::SpatialMedian => spatial_median(x, opts)?.estimate,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunOptions {
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
}

pub fn replication_stream(master_seed: u64, cell: u64, replication: u64) -> SeededStream {
    SeededStream::new(master_seed, (cell << 32) | replication)
}

/// Runs `f(0..reps)` on a pool of `workers` threads and returns the results
/// in replication order.
fn replicate<T, F>(reps: usize, run: &RunOptions, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| (0..reps as u64).into_par_iter().map(&f).collect())
}

/// Mean and standard error (`sd / √m`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub variance: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let variance = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Summary {
        mean,
        se: (variance / m).sqrt(),
        variance,
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::invalid("replications must be at least 1"));
    }
    if reps > u32::MAX as usize {
        return Err(Error::invalid("too many replications for the stream layout"));
    }
    Ok(())
}

fn spherical_model(generator: Generator, p: usize) -> Result<SimModel> {
    Ok(EllipticalModel::new(vec![0.0; p], Matrix::identity(p), generator)?.into())
}

// ---------------------------------------------------------------------------
// Frobenius tables

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub generator: Generator,
    pub dims: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub methods: Vec<LocationChoice>,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub median: MedianOptions,
}

impl TableConfig {
    pub fn validate(&self) -> Result<()> {
        check_reps(self.replications)?;
        if self.dims.is_empty() || self.sample_sizes.is_empty() || self.methods.is_empty() {
            return Err(Error::invalid("table grid must be non-empty"));
        }
        if self.dims.contains(&0) {
            return Err(Error::invalid("dimensions must be positive"));
        }
        if self.sample_sizes.iter().any(|&n| n < 2) {
            return Err(Error::invalid("sample sizes must be at least 2"));
        }
        self.median.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub p: usize,
    pub n: usize,
    pub method: LocationChoice,
    /// Average of `n ‖S_n − p⁻¹ I_p‖²`.
    pub mean: f64,
    pub se: f64,
    pub replications: usize,
    /// Largest `n − n*` seen over the replications.
    pub max_coincident: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableResult {
    pub cells: Vec<TableCell>,
}

impl TableResult {
    pub fn cell(&self, p: usize, n: usize, method: LocationChoice) -> Option<&TableCell> {
        self.cells.iter().find(|c| c.p == p && c.n == n && c.method == method)
    }
}

pub fn run_table_experiment(cfg: &TableConfig, run: &RunOptions) -> Result<TableResult> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut cell_id = 0u64;
    for &p in &cfg.dims {
        let model = spherical_model(cfg.generator, p)?;
        let center = model.center();
        for &n in &cfg.sample_sizes {
            let per_rep = replicate(cfg.replications, run, |rep| {
                let x = model.sample_rng(n, &mut replication_stream(cfg.master_seed, cell_id, rep).rng());
                cfg.methods
                    .iter()
                    .map(|m| {
                        let t = m.locate(&x, &center, &cfg.median)?;
                        let coincident = x.rows().filter(|r| *r == t.as_slice()).count();
                        Ok((n as f64 * frobenius_error_to_identity(&x, &t)?, coincident))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            for (k, &method) in cfg.methods.iter().enumerate() {
                let values: Vec<f64> = per_rep.iter().map(|r| r[k].0).collect();
                let s = summarize(&values);
                cells.push(TableCell {
                    p,
                    n,
                    method,
                    mean: s.mean,
                    se: s.se,
                    replications: cfg.replications,
                    max_coincident: per_rep.iter().map(|r| r[k].1).max().unwrap_or(0),
                });
            }
            cell_id += 1;
        }
    }
    Ok(TableResult { cells })
}

// ---------------------------------------------------------------------------
// Single-element replications

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Sscm(LocationChoice),
    Symmetrized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementConfig {
    pub model: SimModel,
    pub n: usize,
    pub replications: usize,
    pub estimator: Estimator,
    /// 0-based `(i, j)`.
    pub element: (usize, usize),
    pub master_seed: u64,
    #[serde(default)]
    pub median: MedianOptions,
}

/// Entry `(i, j)` of the estimate in each replication.
pub fn replicate_element(cfg: &ElementConfig, run: &RunOptions) -> Result<Vec<f64>> {
    check_reps(cfg.replications)?;
    cfg.median.validate()?;
    let p = cfg.model.p();
    let (i, j) = cfg.element;
    if i >= p || j >= p {
        return Err(Error::invalid(format!("element ({i}, {j}) out of range for p = {p}")));
    }
    if cfg.n < 2 {
        return Err(Error::invalid("sample size must be at least 2"));
    }
    let center = cfg.model.center();
    replicate(cfg.replications, run, |rep| {
        let x = cfg
            .model
            .sample_rng(cfg.n, &mut replication_stream(cfg.master_seed, 0, rep).rng());
        let s = match cfg.estimator {
            Estimator::Sscm(m) => sscm_fixed(&x, &m.locate(&x, &center, &cfg.median)?)?,
            Estimator::Symmetrized => ssscm(&x)?,
        };
        Ok(s.get(i, j))
    })
}

// ---------------------------------------------------------------------------
// QQ data

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitVariance {
    /// `W = Var(Z)` at the model center.
    W,
    /// `A Ξ Aᵀ` for the sample-mean plug-in.
    SandwichMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqConfig {
    pub model: SimModel,
    pub n: usize,
    pub replications: usize,
    pub method: LocationChoice,
    pub element: (usize, usize),
    pub master_seed: u64,
    #[serde(default = "default_limit")]
    pub limit: LimitVariance,
    /// Sample size for estimating the limit variance.
    #[serde(default = "default_big_sample")]
    pub variance_sample_size: usize,
    /// Population SSCM; closed form for bivariate elliptical models,
    /// Monte Carlo with `population_draws` otherwise.
    #[serde(default)]
    pub population: Option<Matrix>,
    #[serde(default = "default_big_sample")]
    pub population_draws: usize,
    #[serde(default)]
    pub median: MedianOptions,
}

fn default_limit() -> LimitVariance {
    LimitVariance::W
}

fn default_big_sample() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqResult {
    /// Sorted `√n (S_n − S)_{ij}`.
    pub empirical: Vec<f64>,
    /// `N(0, σ²)` quantiles at `(k − ½)/m`.
    pub reference: Vec<f64>,
    pub sigma2: f64,
    pub population_value: f64,
    pub population_source: String,
    pub variance_sample_size: usize,
    /// KS distance to `N(0, σ²)` with the limit variance.
    pub ks: f64,
    /// KS distance to `N(0, σ̂²)` with `σ̂²` the empirical mean square;
    /// measures departure from normality in shape only.
    pub ks_fitted: f64,
    pub empirical_mean: f64,
    /// Mean of squares about the population value, `E[n (S_n − S)²_{ij}]`.
    pub empirical_mse: f64,
}

const POPULATION_STREAM: u64 = u64::MAX;
const VARIANCE_STREAM: u64 = u64::MAX - 1;

/// Population SSCM of `model` about its center.
pub fn population_scatter(model: &SimModel, draws: usize, master_seed: u64) -> Result<(Matrix, String)> {
    if let SimModel::Elliptical(m) = model {
        if m.p() == 2 {
            return Ok((population_sscm_closed_p2(m.shape())?.matrix, "closed_form".into()));
        }
        if m.is_spherical() {
            let p = m.p();
            return Ok((Matrix::identity(p).scale(1.0 / p as f64), "symmetry".into()));
        }
    }
    let est = population_sscm_mc(model, draws, SeededStream::new(master_seed, POPULATION_STREAM))?;
    Ok((est.scatter.matrix, format!("monte_carlo({draws})")))
}

/// Limit variance of `√n (S_n − S)_{ij}` from one large sample at the model
/// center.
pub fn limit_element_variance(
    model: &SimModel,
    limit: LimitVariance,
    element: (usize, usize),
    sample_size: usize,
    master_seed: u64,
) -> Result<f64> {
    let big = model.sample(sample_size, SeededStream::new(master_seed, VARIANCE_STREAM))?;
    let t = model.center();
    let (i, j) = element;
    match limit {
        LimitVariance::W => element_limit_variance(&estimate_w(&big, &t)?, i, j),
        LimitVariance::SandwichMean => {
            let s = sandwich(&estimate_b(&big, &t)?, &estimate_xi_mean(&big, &t)?)?;
            element_limit_variance(&s, i, j)
        }
    }
}

pub fn run_qq_experiment(cfg: &QqConfig, run: &RunOptions) -> Result<QqResult> {
    let (pop, source) = match &cfg.population {
        Some(m) => (m.clone(), "supplied".to_string()),
        None => population_scatter(&cfg.model, cfg.population_draws, cfg.master_seed)?,
    };
    let (i, j) = cfg.element;
    let target = pop.get(i, j);
    let sigma2 = limit_element_variance(&cfg.model, cfg.limit, cfg.element, cfg.variance_sample_size, cfg.master_seed)?;
    let raw = replicate_element(
        &ElementConfig {
            model: cfg.model.clone(),
            n: cfg.n,
            replications: cfg.replications,
            estimator: Estimator::Sscm(cfg.method),
            element: cfg.element,
            master_seed: cfg.master_seed,
            median: cfg.median,
        },
        run,
    )?;
    let root_n = (cfg.n as f64).sqrt();
    let mut scaled: Vec<f64> = raw.iter().map(|v| root_n * (v - target)).collect();
    let ks = ks_statistic(&scaled, sigma2)?;
    let m = scaled.len() as f64;
    let empirical_mean = scaled.iter().sum::<f64>() / m;
    let empirical_mse = scaled.iter().map(|v| v * v).sum::<f64>() / m;
    let ks_fitted = ks_statistic(&scaled, empirical_mse)?;
    scaled.sort_by(f64::total_cmp);
    Ok(QqResult {
        reference: normal_reference_quantiles(scaled.len(), sigma2)?,
        empirical: scaled,
        sigma2,
        population_value: target,
        population_source: source,
        variance_sample_size: cfg.variance_sample_size,
        ks,
        ks_fitted,
        empirical_mean,
        empirical_mse,
    })
}

// ---------------------------------------------------------------------------
// Singularity sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub p: usize,
    pub gammas: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub methods: Vec<LocationChoice>,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default = "default_element")]
    pub element: (usize, usize),
    #[serde(default)]
    pub median: MedianOptions,
}

fn default_element() -> (usize, usize) {
    (0, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub gamma: f64,
    pub n: usize,
    pub method: LocationChoice,
    /// Mean of `|S_n(t_n)_{ij}|`; the population value is 0.
    pub mean_abs_error: f64,
    pub se: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, gamma: f64, n: usize, method: LocationChoice) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.gamma == gamma && c.n == n && c.method == method)
    }
}

pub fn run_gamma_sweep(cfg: &SweepConfig, run: &RunOptions) -> Result<SweepResult> {
    check_reps(cfg.replications)?;
    cfg.median.validate()?;
    let (i, j) = cfg.element;
    if i == j || i >= cfg.p || j >= cfg.p {
        return Err(Error::invalid("sweep element must be off-diagonal and in range"));
    }
    if cfg.gammas.is_empty() || cfg.sample_sizes.is_empty() || cfg.methods.is_empty() {
        return Err(Error::invalid("sweep grid must be non-empty"));
    }
    if cfg.sample_sizes.iter().any(|&n| n < 2) {
        return Err(Error::invalid("sample sizes must be at least 2"));
    }
    let mut cells = Vec::new();
    for &gamma in &cfg.gammas {
        let model: SimModel = EllipticalModel::singularity(cfg.p, gamma)?.into();
        let center = model.center();
        for (k, &n) in cfg.sample_sizes.iter().enumerate() {
            let per_rep = replicate(cfg.replications, run, |rep| {
                let x = model.sample_rng(n, &mut replication_stream(cfg.master_seed, k as u64, rep).rng());
                cfg.methods
                    .iter()
                    .map(|m| Ok(sscm_fixed(&x, &m.locate(&x, &center, &cfg.median)?)?.get(i, j).abs()))
                    .collect::<Result<Vec<f64>>>()
            })?;
            for (mi, &method) in cfg.methods.iter().enumerate() {
                let values: Vec<f64> = per_rep.iter().map(|r| r[mi]).collect();
                let s = summarize(&values);
                cells.push(SweepCell {
                    gamma,
                    n,
                    method,
                    mean_abs_error: s.mean,
                    se: s.se,
                    replications: cfg.replications,
                });
            }
        }
    }
    Ok(SweepResult { cells })
}
