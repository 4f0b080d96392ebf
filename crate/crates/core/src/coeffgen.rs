//! Coefficient models and reproducible samplers for the arrays `(a_k)` and `(b_k)`.

use crate::error::{Error, Result};
use crate::fourier;
use crate::quadrature::{hermite_he, GaussianRule};
use crate::rng::{StreamId, StreamRng};
use crate::spectral::{self, CovarianceSequence, DEFAULT_HERMITE_ORDER};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Law of the i.i.d. innovations. Every family has mean 0 and variance 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationFamily {
    Gaussian,
    Rademacher,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    Uniform,
    /// `values[0]` with probability `p`, `values[1]` otherwise.
    TwoPoint { p: f64, values: [f64; 2] },
}

impl InnovationFamily {
    /// The unique centered, unit-variance two-point law putting mass `p` on its positive atom.
    pub fn two_point(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidModel(format!("two-point probability {p} outside (0, 1)")));
        }
        Ok(Self::TwoPoint { p, values: [((1.0 - p) / p).sqrt(), -(p / (1.0 - p)).sqrt()] })
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::TwoPoint { p, values: [u, v] } = *self {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidModel(format!("two-point probability {p} outside (0, 1)")));
            }
            let mean = p * u + (1.0 - p) * v;
            let var = p * u * u + (1.0 - p) * v * v;
            if mean.abs() > 1e-10 || (var - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidModel(format!(
                    "two-point law has mean {mean} and variance {var}, expected 0 and 1"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Gaussian => rng.sample(StandardNormal),
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Uniform => (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt(),
            Self::TwoPoint { p, values } => {
                if rng.random::<f64>() < p {
                    values[0]
                } else {
                    values[1]
                }
            }
        }
    }

    fn tag(&self) -> String {
        match self {
            Self::Gaussian => "gaussian".into(),
            Self::Rademacher => "rademacher".into(),
            Self::Uniform => "uniform".into(),
            Self::TwoPoint { p, .. } => format!("two_point({p})"),
        }
    }
}

/// A named pointwise map `x -> g(x)` with optional non-smooth points.
#[derive(Clone)]
pub struct PointwiseMap {
    pub name: String,
    pub map: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Jumps or kinks; quadrature panels are split there.
    pub breakpoints: Vec<f64>,
}

impl fmt::Debug for PointwiseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PointwiseMap").field("name", &self.name).field("breakpoints", &self.breakpoints).finish()
    }
}

#[derive(Debug, Clone)]
pub enum FunctionalKind {
    Sign,
    Map(PointwiseMap),
    /// `sum_q c_q He_q(x)`.
    HermiteTruncation(Vec<f64>),
}

/// `x -> (raw(x) - shift) / scale`, applied to the latent Gaussian sequence.
#[derive(Debug, Clone)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    pub shift: f64,
    pub scale: f64,
    /// Declared moment exponent, used only by the exponent calculators.
    pub eta: f64,
}

impl FunctionalSpec {
    pub fn new(kind: FunctionalKind) -> Self {
        Self { kind, shift: 0.0, scale: 1.0, eta: 1.0 }
    }

    pub fn sign() -> Self {
        // Bounded, so every moment is finite.
        Self { eta: f64::INFINITY, ..Self::new(FunctionalKind::Sign) }
    }

    pub fn map<F>(name: &str, f: F, breakpoints: Vec<f64>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(FunctionalKind::Map(PointwiseMap { name: name.into(), map: Arc::new(f), breakpoints }))
    }

    pub fn identity() -> Self {
        Self::map("identity", |x| x, vec![])
    }

    pub fn square() -> Self {
        Self::map("square", |x| x * x, vec![])
    }

    pub fn hermite(coefficients: Vec<f64>) -> Self {
        Self::new(FunctionalKind::HermiteTruncation(coefficients))
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    #[inline]
    pub fn raw(&self, x: f64) -> f64 {
        match &self.kind {
            FunctionalKind::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            FunctionalKind::Map(m) => (m.map)(x),
            FunctionalKind::HermiteTruncation(c) => c.iter().enumerate().map(|(q, c)| c * hermite_he(q, x)).sum(),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.raw(x) - self.shift) / self.scale
    }

    fn breakpoints(&self) -> &[f64] {
        match &self.kind {
            FunctionalKind::Sign => &[0.0],
            FunctionalKind::Map(m) => &m.breakpoints,
            FunctionalKind::HermiteTruncation(_) => &[],
        }
    }

    /// Quadrature rule resolving Hermite projections up to `order`.
    ///
    /// Smooth functionals use Gauss-Hermite of order `max(64, 2 order)`.
    /// Functionals with jumps or kinks use Gaussian-weighted Gauss-Legendre
    /// panels split at the breakpoints, because Gauss-Hermite converges only
    /// like `1/order` across a discontinuity.
    pub fn gaussian_rule(&self, order: usize) -> GaussianRule {
        if self.breakpoints().is_empty() {
            GaussianRule::gauss_hermite(64.max(2 * order))
        } else {
            let half_width = 20.0f64.max(2.0 * (order as f64).sqrt() + 12.0);
            self.gaussian_rule_with(half_width, 0.5, 20)
        }
    }

    pub fn gaussian_rule_with(&self, half_width: f64, panel: f64, points: usize) -> GaussianRule {
        GaussianRule::gaussian_panels(self.breakpoints(), half_width, panel, points)
    }

    pub fn name(&self) -> String {
        let base = match &self.kind {
            FunctionalKind::Sign => "sign".to_string(),
            FunctionalKind::Map(m) => m.name.clone(),
            FunctionalKind::HermiteTruncation(c) => format!("hermite{c:?}"),
        };
        if self.shift == 0.0 && self.scale == 1.0 {
            base
        } else {
            format!("({base}-{:.6})/{:.6}", self.shift, self.scale)
        }
    }

    /// Gaussian mean and variance of the functional.
    pub fn gaussian_moments(&self) -> (f64, f64) {
        let rule = self.gaussian_rule(0);
        let mean = rule.expect(|x| self.eval(x));
        let var = rule.expect(|x| (self.eval(x) - mean).powi(2));
        (mean, var)
    }
}

/// Returns the affine rescaling of `spec` with Gaussian mean 0 and variance 1.
pub fn standardized_functional(spec: &FunctionalSpec) -> Result<FunctionalSpec> {
    let rule = spec.gaussian_rule(0);
    let mean = rule.expect(|x| spec.raw(x));
    let second = rule.expect(|x| spec.raw(x).powi(2));
    if !mean.is_finite() || !second.is_finite() {
        return Err(Error::InvalidModel("functional has no finite second Gaussian moment".into()));
    }
    let variance = rule.expect(|x| (spec.raw(x) - mean).powi(2));
    if variance < 1e-12 {
        return Err(Error::DegenerateFunctional { variance });
    }
    Ok(FunctionalSpec { shift: mean, scale: variance.sqrt(), ..spec.clone() })
}

/// L2 normalization of a moving-average kernel.
pub fn normalize_ma_kernel(c: &[f64]) -> Result<Vec<f64>> {
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if c.is_empty() || norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidModel("moving-average kernel must be non-zero and finite".into()));
    }
    Ok(c.iter().map(|v| v / norm).collect())
}

/// Joint law of the coefficient arrays.
#[derive(Debug, Clone)]
pub enum CoefficientModel {
    Iid(InnovationFamily),
    /// `a_k = sum_j c_j e_{k+j}` with i.i.d. innovations; `m = len - 1` dependent.
    MovingAverage { kernel: Vec<f64>, innovation: InnovationFamily },
    /// `a_k = H(X_k)` with `X` stationary Gaussian of correlation `covariance`.
    GaussianFunctional { covariance: CovarianceSequence, functional: FunctionalSpec },
}

impl CoefficientModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Iid(f) => f.validate(),
            Self::MovingAverage { kernel, innovation } => {
                innovation.validate()?;
                let s: f64 = kernel.iter().map(|c| c * c).sum();
                if kernel.is_empty() || (s - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidModel(format!("kernel squared norm {s}, expected 1")));
                }
                Ok(())
            }
            Self::GaussianFunctional { functional, .. } => {
                let (mean, var) = functional.gaussian_moments();
                if mean.abs() > 1e-10 || (var - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidModel(format!(
                        "functional `{}` is not standardized: mean {mean:.3e}, variance {var}",
                        functional.name()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Dependence range `m`: coefficients more than `m` apart are independent.
    /// `None` for Gaussian functionals, whose range is the covariance support only approximately.
    pub fn dependence_range(&self) -> Option<usize> {
        match self {
            Self::Iid(_) => Some(0),
            Self::MovingAverage { kernel, .. } => Some(kernel.len() - 1),
            Self::GaussianFunctional { .. } => None,
        }
    }

    /// Correlation function of the coefficient sequence.
    pub fn covariance(&self) -> Result<CovarianceSequence> {
        match self {
            Self::Iid(_) => Ok(CovarianceSequence::white()),
            Self::MovingAverage { kernel, .. } => CovarianceSequence::moving_average(kernel),
            Self::GaussianFunctional { covariance, functional } => {
                let exp = spectral::hermite_coefficients(functional, DEFAULT_HERMITE_ORDER)?;
                Ok(spectral::functional_covariance(&exp, covariance))
            }
        }
    }

    /// Whether the coefficients are jointly Gaussian, so the Kac-Rice oracle applies.
    pub fn is_gaussian_linear(&self) -> bool {
        match self {
            Self::Iid(f) | Self::MovingAverage { innovation: f, .. } => *f == InnovationFamily::Gaussian,
            Self::GaussianFunctional { functional, .. } => {
                let id = |x: f64| x;
                let rule = GaussianRule::gauss_hermite(32);
                rule.expect(|x| (functional.eval(x) - id(x)).powi(2)) < 1e-20
            }
        }
    }

    pub fn fingerprint(&self) -> String {
        match self {
            Self::Iid(f) => format!("iid/{}", f.tag()),
            Self::MovingAverage { kernel, innovation } => {
                let k: Vec<String> = kernel.iter().map(|c| format!("{c:.12}")).collect();
                format!("ma[{}]/{}", k.join(","), innovation.tag())
            }
            Self::GaussianFunctional { covariance, functional } => {
                let head: Vec<String> = covariance.values().iter().take(4).map(|c| format!("{c:.9}")).collect();
                format!("gf[K={};{}..]/{}", covariance.support(), head.join(","), functional.name())
            }
        }
    }
}

/// One draw of `(a_1..a_n)` and `(b_1..b_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSample {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub fingerprint: String,
    pub stream: StreamId,
}

/// How stationary Gaussian paths are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianMethod {
    /// Circulant embedding, Cholesky if the embedding is not nonnegative.
    Auto,
    CirculantEmbedding,
    Cholesky,
}

#[derive(Debug, Clone)]
enum Factor {
    /// `sqrt(lambda_k / M)` for the circulant of size `M`.
    Circulant(Vec<f64>),
    Cholesky(DMatrix<f64>),
}

/// Precomputed sampler for length-`n` stationary Gaussian vectors.
#[derive(Debug, Clone)]
pub struct StationaryGaussianSampler {
    n: usize,
    factor: Factor,
}

const CHOLESKY_JITTER: f64 = 1e-10;

impl StationaryGaussianSampler {
    pub fn new(rho: &CovarianceSequence, n: usize, method: GaussianMethod) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("sample length must be positive".into()));
        }
        if method != GaussianMethod::Cholesky {
            match circulant_factor(rho, n) {
                Some(f) => return Ok(Self { n, factor: Factor::Circulant(f) }),
                None if method == GaussianMethod::CirculantEmbedding => {
                    return Err(Error::InvalidCovariance("circulant embedding has negative eigenvalues".into()))
                }
                None => {}
            }
        }
        Ok(Self { n, factor: Factor::Cholesky(cholesky_factor(rho, n)?) })
    }

    pub fn uses_circulant(&self) -> bool {
        matches!(self.factor, Factor::Circulant(_))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Two independent paths. The circulant route gets both from one FFT
    /// (real and imaginary parts).
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        match &self.factor {
            Factor::Circulant(scale) => {
                let mut buf: Vec<Complex64> = scale
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fourier::forward(&mut buf);
                let a = buf[..self.n].iter().map(|z| z.re).collect();
                let b = buf[..self.n].iter().map(|z| z.im).collect();
                (a, b)
            }
            Factor::Cholesky(l) => (cholesky_draw(l, rng), cholesky_draw(l, rng)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_pair(rng).0
    }
}

fn circulant_factor(rho: &CovarianceSequence, n: usize) -> Option<Vec<f64>> {
    let m = (2 * (n + rho.support())).next_power_of_two().max(2);
    let mut row: Vec<Complex64> = (0..m)
        .map(|j| Complex64::new(rho.at(j.min(m - j) as i64), 0.0))
        .collect();
    fourier::forward(&mut row);
    let max = row.iter().map(|z| z.re).fold(0.0, f64::max);
    let min = row.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if min < -1e-10 * max.max(1.0) {
        return None;
    }
    Some(row.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect())
}

fn toeplitz(rho: &CovarianceSequence, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rho.at(i as i64 - j as i64))
}

fn cholesky_factor(rho: &CovarianceSequence, n: usize) -> Result<DMatrix<f64>> {
    let sigma = toeplitz(rho, n);
    if let Some(c) = sigma.clone().cholesky() {
        return Ok(c.unpack());
    }
    let jittered = sigma + DMatrix::identity(n, n) * CHOLESKY_JITTER;
    jittered
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::InvalidCovariance("Toeplitz matrix not positive semidefinite after jitter".into()))
}

fn cholesky_draw<R: Rng + ?Sized>(l: &DMatrix<f64>, rng: &mut R) -> Vec<f64> {
    let n = l.nrows();
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (0..n).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum()).collect()
}

/// One stationary Gaussian path of length `n`.
pub fn sample_stationary_gaussian(rho: &CovarianceSequence, n: usize, stream: StreamId) -> Result<Vec<f64>> {
    let sampler = StationaryGaussianSampler::new(rho, n, GaussianMethod::Auto)?;
    Ok(sampler.sample(&mut stream.rng()))
}

/// Model bound to a degree `n`, with any expensive setup done once.
#[derive(Debug, Clone)]
pub struct CoefficientSampler {
    model: CoefficientModel,
    n: usize,
    gaussian: Option<StationaryGaussianSampler>,
    fingerprint: String,
}

impl CoefficientSampler {
    pub fn new(model: &CoefficientModel, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("degree n must be at least 1".into()));
        }
        model.validate()?;
        let gaussian = match model {
            CoefficientModel::GaussianFunctional { covariance, .. } => {
                Some(StationaryGaussianSampler::new(covariance, n, GaussianMethod::Auto)?)
            }
            _ => None,
        };
        Ok(Self { model: model.clone(), n, gaussian, fingerprint: model.fingerprint() })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    /// Draws `(a, b)` from an already positioned generator.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        match &self.model {
            CoefficientModel::Iid(f) => {
                let a = (0..n).map(|_| f.sample(rng)).collect();
                let b = (0..n).map(|_| f.sample(rng)).collect();
                (a, b)
            }
            CoefficientModel::MovingAverage { kernel, innovation } => {
                let mut one = || {
                    let e: Vec<f64> = (0..n + kernel.len() - 1).map(|_| innovation.sample(rng)).collect();
                    (0..n)
                        .map(|k| kernel.iter().enumerate().map(|(j, c)| c * e[k + j]).sum())
                        .collect::<Vec<f64>>()
                };
                let a = one();
                let b = one();
                (a, b)
            }
            CoefficientModel::GaussianFunctional { functional, .. } => {
                let (x, y) = self.gaussian.as_ref().expect("built in new").sample_pair(rng);
                let a = x.iter().map(|&v| functional.eval(v)).collect();
                let b = y.iter().map(|&v| functional.eval(v)).collect();
                (a, b)
            }
        }
    }

    pub fn sample(&self, stream: StreamId) -> CoefficientSample {
        let mut rng: StreamRng = stream.rng();
        let (a, b) = self.draw(&mut rng);
        CoefficientSample { a, b, fingerprint: self.fingerprint.clone(), stream }
    }
}

/// Independent draws of the two coefficient arrays of degree `n`.
pub fn sample_coefficients(model: &CoefficientModel, n: usize, stream: StreamId) -> Result<CoefficientSample> {
    Ok(CoefficientSampler::new(model, n)?.sample(stream))
}

/// Lag-wise covariance estimates with standard errors across replicates.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalCovariance {
    pub estimates: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicates: usize,
}

impl EmpiricalCovariance {
    /// Normalized by the lag-0 estimate.
    pub fn as_correlation(&self) -> Result<CovarianceSequence> {
        let c0 = self.estimates[0];
        let values = self.estimates.iter().map(|v| (v / c0).clamp(-1.0, 1.0)).collect();
        CovarianceSequence::new(values)
    }

    /// CSV rows `(lag, estimate, stderr)`.
    pub fn rows(&self) -> Vec<(usize, f64, f64)> {
        self.estimates
            .iter()
            .zip(&self.stderr)
            .enumerate()
            .map(|(h, (e, s))| (h, *e, *s))
            .collect()
    }
}

/// Averages `x_i x_{i+h}` over positions, then over replicates. Means are known to be zero.
pub fn empirical_covariance(samples: &[Vec<f64>], maxlag: usize) -> Result<EmpiricalCovariance> {
    if samples.len() < 2 {
        return Err(Error::Argument("need at least two replicates".into()));
    }
    let n = samples[0].len();
    if samples.iter().any(|s| s.len() != n) {
        return Err(Error::Argument("replicates have different lengths".into()));
    }
    if maxlag >= n {
        return Err(Error::Argument(format!("maxlag {maxlag} must be below n = {n}")));
    }
    let r = samples.len() as f64;
    let mut estimates = Vec::with_capacity(maxlag + 1);
    let mut stderr = Vec::with_capacity(maxlag + 1);
    for h in 0..=maxlag {
        let per_rep: Vec<f64> = samples
            .iter()
            .map(|x| (0..n - h).map(|i| x[i] * x[i + h]).sum::<f64>() / (n - h) as f64)
            .collect();
        let mean = per_rep.iter().sum::<f64>() / r;
        let var = per_rep.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
        estimates.push(mean);
        stderr.push((var / r).sqrt());
    }
    Ok(EmpiricalCovariance { estimates, stderr, replicates: samples.len() })
}
