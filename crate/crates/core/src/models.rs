//! Elliptical models, seeded samplers and population SSCM oracles.
//!
//! An elliptical model has density `det(V)^{-1/2} g((x−μ)ᵀV⁻¹(x−μ))`. Three
//! generators are supported: Gaussian, elliptical Student t with `ν` degrees
//! of freedom, and the singularity family `F_γ,p` (`μ = 0`, `V = I`) whose
//! norm has density `2γ z^{2γ−1}` on `[0, 1]`.
//!
//! Random streams are ChaCha8 keyed by a 64-bit master seed with the stream
//! index selecting one of ChaCha's 2⁶⁴ independent streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{norm, sign_into, Matrix, Observations};
use crate::scatter::{ScatterMatrix, ScatterVariant};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeededStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        SeededStream {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Generator {
    Gaussian,
    StudentT { nu: f64 },
    Singularity { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct EllipticalModel {
    mu: Vec<f64>,
    shape: Matrix,
    generator: Generator,
    chol: Matrix,
    /// `V = I_p`; lets the sampler skip the Cholesky product.
    spherical: bool,
}

impl EllipticalModel {
    pub fn new(mu: Vec<f64>, shape: Matrix, generator: Generator) -> Result<Self> {
        let p = mu.len();
        if p == 0 {
            return Err(Error::invalid("model dimension must be at least 1"));
        }
        if !mu.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("model center must be finite"));
        }
        if shape.rows() != p || shape.cols() != p {
            return Err(Error::shape(
                format!("{p}x{p} shape matrix"),
                format!("{}x{}", shape.rows(), shape.cols()),
            ));
        }
        if shape.max_asymmetry() > 0.0 {
            return Err(Error::invalid("shape matrix must be symmetric"));
        }
        let chol = shape.cholesky()?;
        let spherical = shape == Matrix::identity(p);
        match generator {
            Generator::Gaussian => {}
            Generator::StudentT { nu } => {
                if !(nu > 0.0 && nu.is_finite()) {
                    return Err(Error::invalid("degrees of freedom must be positive"));
                }
            }
            Generator::Singularity { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::invalid("singularity exponent gamma must be positive"));
                }
                if !spherical || mu.iter().any(|&m| m != 0.0) {
                    return Err(Error::invalid(
                        "the singularity family is defined for mu = 0 and V = I only",
                    ));
                }
            }
        }
        Ok(EllipticalModel {
            mu,
            shape,
            generator,
            chol,
            spherical,
        })
    }

    pub fn gaussian(mu: Vec<f64>, shape: Matrix) -> Result<Self> {
        Self::new(mu, shape, Generator::Gaussian)
    }

    pub fn student_t(mu: Vec<f64>, shape: Matrix, nu: f64) -> Result<Self> {
        Self::new(mu, shape, Generator::StudentT { nu })
    }

    pub fn singularity(p: usize, gamma: f64) -> Result<Self> {
        Self::new(vec![0.0; p], Matrix::identity(p), Generator::Singularity { gamma })
    }

    pub fn standard_gaussian(p: usize) -> Self {
        Self::gaussian(vec![0.0; p], Matrix::identity(p)).expect("identity is SPD")
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn shape(&self) -> &Matrix {
        &self.shape
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn is_spherical(&self) -> bool {
        self.spherical
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::invalid(format!("model json: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    /// Draws one observation into `out` (length `p`). `z` is scratch of
    /// length `p`.
    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        let p = self.p();
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        match self.generator {
            Generator::Singularity { gamma } => {
                let u: f64 = rng.random();
                let radius = u.powf(1.0 / (2.0 * gamma));
                let r = norm(z);
                for k in 0..p {
                    out[k] = radius * z[k] / r;
                }
                return;
            }
            Generator::StudentT { nu } => {
                let w: f64 = ChiSquared::new(nu).expect("validated nu").sample(rng);
                let f = (nu / w).sqrt();
                z.iter_mut().for_each(|v| *v *= f);
            }
            Generator::Gaussian => {}
        }
        if self.spherical {
            for k in 0..p {
                out[k] = self.mu[k] + z[k];
            }
        } else {
            for i in 0..p {
                let li = self.chol.row(i);
                out[i] = self.mu[i] + li[..=i].iter().zip(&z[..=i]).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSpec {
    generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    mu: Vec<f64>,
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
}

impl TryFrom<ModelSpec> for EllipticalModel {
    type Error = Error;

    fn try_from(s: ModelSpec) -> Result<Self> {
        let generator = match s.generator.as_str() {
            "gaussian" => Generator::Gaussian,
            "student_t" | "t" => Generator::StudentT {
                nu: s.nu.ok_or_else(|| Error::invalid("student_t requires nu"))?,
            },
            "singularity" => Generator::Singularity {
                gamma: s.gamma.ok_or_else(|| Error::invalid("singularity requires gamma"))?,
            },
            other => return Err(Error::invalid(format!("unknown generator {other:?}"))),
        };
        EllipticalModel::new(s.mu, Matrix::from_rows(&s.v)?, generator)
    }
}

impl From<EllipticalModel> for ModelSpec {
    fn from(m: EllipticalModel) -> Self {
        let (generator, nu, gamma) = match m.generator {
            Generator::Gaussian => ("gaussian", None, None),
            Generator::StudentT { nu } => ("student_t", Some(nu), None),
            Generator::Singularity { gamma } => ("singularity", None, Some(gamma)),
        };
        ModelSpec {
            generator: generator.into(),
            nu,
            gamma,
            v: m.shape.to_rows(),
            mu: m.mu,
        }
    }
}

/// Asymmetric test distribution `X = M (E − 1)` with `E` a vector of
/// independent standard exponentials. Mean zero, finite second moments,
/// bounded density; not symmetric about its mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewedExponential {
    mixing: Matrix,
}

impl SkewedExponential {
    pub fn new(mixing: Matrix) -> Result<Self> {
        if !mixing.is_square() || mixing.rows() == 0 {
            return Err(Error::invalid("mixing matrix must be square"));
        }
        if !mixing.is_finite() {
            return Err(Error::invalid("mixing matrix must be finite"));
        }
        Ok(SkewedExponential { mixing })
    }

    pub fn p(&self) -> usize {
        self.mixing.rows()
    }

    pub fn mixing(&self) -> &Matrix {
        &self.mixing
    }

    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        for v in z.iter_mut() {
            let e: f64 = rng.sample(Exp1);
            *v = e - 1.0;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = crate::linalg::dot(self.mixing.row(i), z);
        }
    }
}

/// Any distribution the harness can simulate from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SimModel {
    Elliptical(EllipticalModel),
    SkewedExponential(SkewedExponential),
}

impl SimModel {
    pub fn p(&self) -> usize {
        match self {
            SimModel::Elliptical(m) => m.p(),
            SimModel::SkewedExponential(m) => m.p(),
        }
    }

    /// Center of symmetry for elliptical models, the mean otherwise.
    pub fn center(&self) -> Vec<f64> {
        match self {
            SimModel::Elliptical(m) => m.mu.clone(),
            SimModel::SkewedExponential(m) => vec![0.0; m.p()],
        }
    }

    pub fn sample_rng<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Observations {
        let p = self.p();
        let mut data = vec![0.0; n * p];
        let mut z = vec![0.0; p];
        for out in data.chunks_exact_mut(p) {
            match self {
                SimModel::Elliptical(m) => m.draw_into(rng, &mut z, out),
                SimModel::SkewedExponential(m) => m.draw_into(rng, &mut z, out),
            }
        }
        Observations::from_raw(n, p, data)
    }

    pub fn sample(&self, n: usize, stream: SeededStream) -> Result<Observations> {
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        Ok(self.sample_rng(n, &mut stream.rng()))
    }
}

impl From<EllipticalModel> for SimModel {
    fn from(m: EllipticalModel) -> Self {
        SimModel::Elliptical(m)
    }
}

/// `n` i.i.d. draws from `model`, fully determined by `stream`.
pub fn sample(model: &EllipticalModel, n: usize, stream: SeededStream) -> Result<Observations> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let p = model.p();
    let mut rng = stream.rng();
    let mut data = vec![0.0; n * p];
    let mut z = vec![0.0; p];
    for out in data.chunks_exact_mut(p) {
        model.draw_into(&mut rng, &mut z, out);
    }
    Ok(Observations::from_raw(n, p, data))
}

/// Population SSCM of a bivariate elliptical law: eigenvectors of `V`, with
/// eigenvalues `√λₖ / (√λ₁ + √λ₂)`.
pub fn population_sscm_closed_p2(v: &Matrix) -> Result<ScatterMatrix> {
    if v.rows() != 2 || v.cols() != 2 {
        return Err(Error::Unsupported(format!(
            "closed-form population SSCM needs p = 2, got {}x{}",
            v.rows(),
            v.cols()
        )));
    }
    if v.max_asymmetry() > 0.0 {
        return Err(Error::invalid("shape matrix must be symmetric"));
    }
    v.cholesky()?;
    let (vals, vecs) = v.symmetric_eigen()?;
    let roots: Vec<f64> = vals.iter().map(|l| l.max(0.0).sqrt()).collect();
    let total: f64 = roots.iter().sum();
    let d: Vec<f64> = roots.iter().map(|r| r / total).collect();
    let m = vecs.matmul(&Matrix::diag(&d))?.matmul(&vecs.transpose())?;
    Ok(ScatterMatrix {
        matrix: m.symmetrized(),
        variant: ScatterVariant::Population,
        n_effective: 0,
        location_used: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationEstimate {
    pub scatter: ScatterMatrix,
    /// Entrywise Monte Carlo standard errors.
    pub standard_errors: Matrix,
}

/// Monte Carlo estimate of `E s(X − c) s(X − c)ᵀ` about the model center.
pub fn population_sscm_mc(model: &SimModel, draws: usize, stream: SeededStream) -> Result<PopulationEstimate> {
    if draws < 100 {
        return Err(Error::invalid("Monte Carlo population SSCM needs at least 100 draws"));
    }
    let p = model.p();
    let c = model.center();
    let mut rng = stream.rng();
    let mut sum = vec![0.0; p * p];
    let mut sum_sq = vec![0.0; p * p];
    let mut u = vec![0.0; p];
    let mut diff = vec![0.0; p];
    const CHUNK: usize = 4096;
    let mut left = draws;
    while left > 0 {
        let m = left.min(CHUNK);
        let x = model.sample_rng(m, &mut rng);
        for r in x.rows() {
            for k in 0..p {
                diff[k] = r[k] - c[k];
            }
            sign_into(&diff, &mut u);
            for a in 0..p {
                for b in a..p {
                    let v = u[a] * u[b];
                    sum[a * p + b] += v;
                    sum_sq[a * p + b] += v * v;
                }
            }
        }
        left -= m;
    }
    let nf = draws as f64;
    let mut mean = Matrix::zeros(p, p);
    let mut se = Matrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let m = sum[a * p + b] / nf;
            let var = (sum_sq[a * p + b] / nf - m * m).max(0.0) * nf / (nf - 1.0);
            let s = (var / nf).sqrt();
            mean.set(a, b, m);
            mean.set(b, a, m);
            se.set(a, b, s);
            se.set(b, a, s);
        }
    }
    Ok(PopulationEstimate {
        scatter: ScatterMatrix {
            matrix: mean,
            variant: ScatterVariant::Population,
            n_effective: draws,
            location_used: Some(c),
        },
        standard_errors: se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InverseMoment {
    Analytic { value: f64 },
    Estimate { value: f64, standard_error: f64 },
    Divergent,
}

impl InverseMoment {
    pub fn is_finite(&self) -> bool {
        !matches!(self, InverseMoment::Divergent)
    }
}

/// `E |X − μ|^{−q}`.
///
/// Singularity family: exact, finite iff `q < 2γ`. Gaussian and Student t:
/// the radius factorizes out of `|X − μ| = ρ · |L U|` (`ρ` the Gaussian
/// radius, `U` uniform on the sphere, times `√(ν/w)` for t), so its moment is
/// taken in closed form and only the bounded direction term `|L U|^{−q}` is
/// simulated. Finite iff `q < p`.
pub fn inverse_moment(
    model: &EllipticalModel,
    q: f64,
    draws: usize,
    stream: SeededStream,
) -> Result<InverseMoment> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::invalid("inverse moment order must be positive"));
    }
    let p = model.p() as f64;
    if let Generator::Singularity { gamma } = model.generator {
        let two_gamma = 2.0 * gamma;
        return Ok(if q < two_gamma {
            InverseMoment::Analytic {
                value: two_gamma / (two_gamma - q),
            }
        } else {
            InverseMoment::Divergent
        });
    }
    if q >= p {
        return Ok(InverseMoment::Divergent);
    }
    // E ρ^{-q} for ρ ~ χ_p
    let mut radial = (-0.5 * q * std::f64::consts::LN_2 + ln_gamma((p - q) / 2.0) - ln_gamma(p / 2.0)).exp();
    if let Generator::StudentT { nu } = model.generator {
        // E (w/ν)^{q/2}, w ~ χ²_ν
        radial *= (0.5 * q * (2.0 / nu).ln() + ln_gamma((nu + q) / 2.0) - ln_gamma(nu / 2.0)).exp();
    }
    if model.spherical {
        return Ok(InverseMoment::Analytic { value: radial });
    }
    if draws < 2 {
        return Err(Error::invalid("need at least two Monte Carlo draws"));
    }
    let dim = model.p();
    let mut rng = stream.rng();
    let mut z = vec![0.0; dim];
    let mut lz = vec![0.0; dim];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let r = norm(&z);
        for i in 0..dim {
            lz[i] = model.chol.row(i)[..=i].iter().zip(&z[..=i]).map(|(a, b)| a * b).sum::<f64>() / r;
        }
        let v = norm(&lz).powf(-q);
        s1 += v;
        s2 += v * v;
    }
    let nf = draws as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    Ok(InverseMoment::Estimate {
        value: radial * mean,
        standard_error: radial * (var / nf).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma() -> Matrix {
        Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap()
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(EllipticalModel::gaussian(vec![0.0, 0.0], Matrix::identity(3)).is_err());
        let indefinite = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(EllipticalModel::gaussian(vec![0.0, 0.0], indefinite).is_err());
        let asym = Matrix::from_rows(&[vec![1.0, 0.1], vec![0.0, 1.0]]).unwrap();
        assert!(EllipticalModel::gaussian(vec![0.0, 0.0], asym).is_err());
        assert!(EllipticalModel::student_t(vec![0.0, 0.0], sigma(), 0.0).is_err());
        assert!(EllipticalModel::singularity(2, 0.0).is_err());
        assert!(EllipticalModel::new(vec![0.0, 0.0], sigma(), Generator::Singularity { gamma: 0.2 }).is_err());
        assert!(EllipticalModel::new(vec![1.0, 0.0], Matrix::identity(2), Generator::Singularity { gamma: 0.2 }).is_err());
    }

    #[test]
    fn json_round_trip_and_schema() {
        let m = EllipticalModel::student_t(vec![1.0, -2.0], sigma(), 2.0).unwrap();
        let j = m.to_json();
        assert!(j.contains("\"V\""));
        assert!(j.contains("\"nu\":2.0"));
        assert_eq!(EllipticalModel::from_json(&j).unwrap(), m);
        let s = EllipticalModel::from_json(
            r#"{"generator":"singularity","gamma":0.25,"mu":[0,0,0],"V":[[1,0,0],[0,1,0],[0,0,1]]}"#,
        )
        .unwrap();
        assert_eq!(s.generator(), Generator::Singularity { gamma: 0.25 });
        assert!(EllipticalModel::from_json(r#"{"generator":"student_t","mu":[0],"V":[[1]]}"#).is_err());
        assert!(EllipticalModel::from_json(r#"{"generator":"cauchy","mu":[0],"V":[[1]]}"#).is_err());
        assert!(EllipticalModel::from_json(r#"{"generator":"gaussian","mu":[0],"V":[[1]],"x":1}"#).is_err());
    }

    #[test]
    fn closed_form_population_values() {
        let s = population_sscm_closed_p2(&sigma()).unwrap();
        assert!((s.get(0, 1) - 0.13397).abs() < 5e-6, "{}", s.get(0, 1));
        assert!((s.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((s.trace() - 1.0).abs() < 1e-15);
        let s = population_sscm_closed_p2(&Matrix::identity(2)).unwrap();
        assert!(crate::linalg::frobenius_sq_distance(&s.matrix, &Matrix::identity(2).scale(0.5)).unwrap() < 1e-30);
        let s = population_sscm_closed_p2(&Matrix::diag(&[4.0, 1.0])).unwrap();
        assert!((s.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(population_sscm_closed_p2(&Matrix::identity(3)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn singularity_inverse_moments() {
        let m = EllipticalModel::singularity(2, 0.5).unwrap();
        let s = SeededStream::new(0, 0);
        match inverse_moment(&m, 2.0 / 3.0, 0, s).unwrap() {
            InverseMoment::Analytic { value } => assert!((value - 3.0).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
        let m = EllipticalModel::singularity(2, 0.05).unwrap();
        assert_eq!(inverse_moment(&m, 1.0, 0, s).unwrap(), InverseMoment::Divergent);
        assert!(inverse_moment(&m, 0.0, 0, s).is_err());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let m = EllipticalModel::student_t(vec![0.0, 0.0], sigma(), 3.0).unwrap();
        let a = sample(&m, 50, SeededStream::new(7, 3)).unwrap();
        let b = sample(&m, 50, SeededStream::new(7, 3)).unwrap();
        let c = sample(&m, 50, SeededStream::new(7, 4)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert_ne!(a.as_slice(), c.as_slice());
        assert!(sample(&m, 0, SeededStream::new(7, 3)).is_err());
    }
}
