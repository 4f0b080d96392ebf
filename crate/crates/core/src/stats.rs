//! Monte Carlo engines: zero densities, small-ball frequencies, the CLT
//! marginal, tightness and tail moments, plus the exponent calculators.

use crate::coeffgen::{CoefficientModel, CoefficientSampler};
use crate::error::{Error, Result};
use crate::oracle::SincSampler;
use crate::rng::{StreamId, StreamRng};
use crate::trigpoly::{local_field, tightness_exact, TrigPolynomial};
use crate::zeros::{count_zeros, count_zeros_local, DEFAULT_OVERSAMPLE};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;
use std::f64::consts::{SQRT_2, TAU};
use std::time::Instant;

/// Universal limit of `E N(f_n, [0, 2 pi]) / n`.
pub fn universal_limit() -> f64 {
    2.0 / 3f64.sqrt()
}

/// Mean of i.i.d. replicates with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub ci95: [f64; 2],
    pub replicates: usize,
    pub seed: u64,
    pub wall_time: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MCEstimate {
    pub fn from_samples(samples: &[f64], seed: u64, wall_time: f64) -> Result<Self> {
        let r = samples.len();
        if r < 2 {
            return Err(Error::Argument(format!("need at least 2 replicates, got {r}")));
        }
        let mean = samples.iter().sum::<f64>() / r as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
        let stderr = (var / r as f64).sqrt();
        Ok(Self {
            mean,
            stderr,
            ci95: [mean - 1.96 * stderr, mean + 1.96 * stderr],
            replicates: r,
            seed,
            wall_time,
            warnings: Vec::new(),
        })
    }

    /// `|mean - target| / stderr`, infinite when the target is missed with zero spread.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Stream blocks keep every engine and degree on disjoint replicate streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
#[repr(u32)]
pub enum Engine {
    ZerosFull = 1,
    ZerosLocal = 2,
    SmallBall = 3,
    Clt = 4,
    Tightness = 5,
    Tail = 6,
    Sinc = 7,
}

impl Engine {
    /// Stream block of this engine at degree `n`.
    pub fn block(self, n: usize) -> u32 {
        ((self as u32) << 24) | (n as u32 & 0x00ff_ffff)
    }
}

fn stream(seed: u64, engine: Engine, n: usize, rep: usize) -> StreamId {
    StreamId::for_replicate(seed, engine.block(n), rep as u32)
}

fn uniform_angle(rng: &mut StreamRng) -> f64 {
    rng.random::<f64>() * TAU
}

fn draw_poly(sampler: &CoefficientSampler, rng: &mut StreamRng) -> TrigPolynomial {
    let (a, b) = sampler.draw(rng);
    TrigPolynomial::new(a, b).expect("sampler returns finite coefficients")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroEstimator {
    /// `N(f_n, [0, 2 pi]) / n`.
    Full,
    /// `N(S_n, [0, 2 pi])` at a uniform `X`.
    Localized,
}

/// Zero-density run with per-replicate counts.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroDensityRun {
    pub estimate: MCEstimate,
    pub estimator: ZeroEstimator,
    pub n: usize,
    pub counts: Vec<usize>,
    pub suspicious_replicates: usize,
}

impl ZeroDensityRun {
    /// CSV rows `(replicate, n, count)`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.counts.iter().enumerate().map(move |(r, c)| (r, self.n, *c))
    }
}

pub const MIN_ZERO_REPS: usize = 100;

/// Full-interval estimator of `E N(f_n, [0, 2 pi]) / n`.
pub fn mc_expected_zero_density(model: &CoefficientModel, n: usize, reps: usize, seed: u64) -> Result<MCEstimate> {
    Ok(run_zero_density(model, n, reps, seed, ZeroEstimator::Full, DEFAULT_OVERSAMPLE)?.estimate)
}

pub fn run_zero_density(
    model: &CoefficientModel,
    n: usize,
    reps: usize,
    seed: u64,
    estimator: ZeroEstimator,
    oversample: usize,
) -> Result<ZeroDensityRun> {
    if reps < MIN_ZERO_REPS {
        return Err(Error::Argument(format!("need at least {MIN_ZERO_REPS} replicates, got {reps}")));
    }
    let start = Instant::now();
    let sampler = CoefficientSampler::new(model, n)?;
    let engine = match estimator {
        ZeroEstimator::Full => Engine::ZerosFull,
        ZeroEstimator::Localized => Engine::ZerosLocal,
    };
    let results: Vec<(usize, bool)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, engine, n, r).rng();
            let p = draw_poly(&sampler, &mut rng);
            let res = match estimator {
                ZeroEstimator::Full => count_zeros(&p, 0.0, TAU, oversample, None)?,
                ZeroEstimator::Localized => {
                    let x = uniform_angle(&mut rng);
                    count_zeros_local(&local_field(&p, x), oversample)?
                }
            };
            Ok((res.count, res.suspicious_cells > 0))
        })
        .collect::<Result<_>>()?;
    let counts: Vec<usize> = results.iter().map(|r| r.0).collect();
    let suspicious = results.iter().filter(|r| r.1).count();
    let scale = match estimator {
        ZeroEstimator::Full => 1.0 / n as f64,
        ZeroEstimator::Localized => 1.0,
    };
    let values: Vec<f64> = counts.iter().map(|&c| c as f64 * scale).collect();
    let mut estimate = MCEstimate::from_samples(&values, seed, start.elapsed().as_secs_f64())?;
    if suspicious * 100 > reps {
        estimate.warnings.push(format!(
            "zero counter flagged suspicious cells in {suspicious} of {reps} replicates"
        ));
    }
    Ok(ZeroDensityRun { estimate, estimator, n, counts, suspicious_replicates: suspicious })
}

/// Where a small ball is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SmallBallMode {
    AtPoint { t: f64, x: f64 },
    /// `sup_t |S_n(t)|` over a `16 n` grid of `[0, 2 pi]`, with `X` uniform.
    SupNorm,
}

/// Frequency of `|S_n(t)| <= delta` or `||S_n||_inf <= delta`.
pub fn empirical_small_ball(
    model: &CoefficientModel,
    n: usize,
    delta: f64,
    mode: SmallBallMode,
    reps: usize,
    seed: u64,
) -> Result<MCEstimate> {
    if !(delta > 0.0) {
        return Err(Error::Argument(format!("delta must be positive, got {delta}")));
    }
    let start = Instant::now();
    let sampler = CoefficientSampler::new(model, n)?;
    let grid = 16 * n;
    let hits: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Engine::SmallBall, n, r).rng();
            let p = draw_poly(&sampler, &mut rng);
            let inside = match mode {
                SmallBallMode::AtPoint { t, x } => local_field(&p, x).eval(t).abs() <= delta,
                SmallBallMode::SupNorm => {
                    let w = local_field(&p, uniform_angle(&mut rng));
                    (0..grid).all(|j| w.eval(TAU * j as f64 / grid as f64).abs() <= delta)
                }
            };
            if inside {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    MCEstimate::from_samples(&hits, seed, start.elapsed().as_secs_f64())
}

/// `Phi(x)`.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `sup_x |F_emp(x) - Phi(x)|`, checking both sides of every jump.
pub fn kolmogorov_distance(samples: &[f64]) -> Result<f64> {
    if samples.len() < 100 {
        return Err(Error::Argument(format!("need at least 100 samples, got {}", samples.len())));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Argument("samples contain NaN".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let phi = standard_normal_cdf(x);
            ((i + 1) as f64 / n - phi).max(phi - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

/// Draws of `S_n(0) / sqrt(psi(X))` under `P (x) P_X`.
pub fn clt_samples(model: &CoefficientModel, n: usize, reps: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = CoefficientSampler::new(model, n)?;
    let rho = model.covariance()?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Engine::Clt, n, r).rng();
            let p = draw_poly(&sampler, &mut rng);
            let x = uniform_angle(&mut rng);
            let psi = rho.density_at(x);
            if psi < 1e-12 {
                return Err(Error::DegenerateDensity { value: psi });
            }
            Ok(p.evaluate_at(x) / (n as f64 * psi).sqrt())
        })
        .collect()
}

/// One `(s, t)` pair of the tightness check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessRow {
    pub s: f64,
    pub t: f64,
    pub exact: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
}

impl TightnessRow {
    pub fn within_bound(&self) -> bool {
        self.exact <= self.bound * (1.0 + 1e-12)
    }
}

/// `E_X E |S_n(t) - S_n(s)|^2` by Monte Carlo against `(2/n) sum (1 - cos(k (t - s)/n))`.
pub fn tightness_discrepancy(
    model: &CoefficientModel,
    n: usize,
    pairs: &[(f64, f64)],
    reps: usize,
    seed: u64,
) -> Result<Vec<TightnessRow>> {
    if reps < 2 {
        return Err(Error::Argument("need at least 2 replicates".into()));
    }
    let sampler = CoefficientSampler::new(model, n)?;
    let sq: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Engine::Tightness, n, r).rng();
            let p = draw_poly(&sampler, &mut rng);
            let w = local_field(&p, uniform_angle(&mut rng));
            pairs.iter().map(|&(s, t)| (w.eval(t) - w.eval(s)).powi(2)).collect()
        })
        .collect();
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(s, t))| {
            let col: Vec<f64> = sq.iter().map(|row| row[i]).collect();
            let est = MCEstimate::from_samples(&col, seed, 0.0)?;
            Ok(TightnessRow {
                s,
                t,
                exact: tightness_exact(n, t - s),
                empirical: est.mean,
                stderr: est.stderr,
                bound: (t - s).powi(2),
            })
        })
        .collect()
}

pub const DEFAULT_TAIL_EPSILON: f64 = 0.25;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Argument(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    Ok(())
}

/// `E[N^{1+eps}]` from a list of counts.
pub fn tail_moment_of_counts(counts: &[usize], epsilon: f64, seed: u64) -> Result<MCEstimate> {
    let v: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(1.0 + epsilon)).collect();
    MCEstimate::from_samples(&v, seed, 0.0)
}

/// `E[N(S_n, [0, 2 pi])^{1+eps}]` with `X` uniform.
pub fn tail_moment(model: &CoefficientModel, n: usize, epsilon: f64, reps: usize, seed: u64) -> Result<MCEstimate> {
    check_epsilon(epsilon)?;
    let start = Instant::now();
    let sampler = CoefficientSampler::new(model, n)?;
    let counts: Vec<usize> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Engine::Tail, n, r).rng();
            let p = draw_poly(&sampler, &mut rng);
            let w = local_field(&p, uniform_angle(&mut rng));
            Ok(count_zeros_local(&w, DEFAULT_OVERSAMPLE)?.count)
        })
        .collect::<Result<_>>()?;
    let mut est = tail_moment_of_counts(&counts, epsilon, seed)?;
    est.wall_time = start.elapsed().as_secs_f64();
    Ok(est)
}

/// Zero counts of independent sinc paths on `[0, 2 pi)`.
pub fn sinc_zero_counts(sampler: &SincSampler, reps: usize, seed: u64) -> Result<Vec<usize>> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let path = sampler.sample(&mut stream(seed, Engine::Sinc, 0, r).rng());
            Ok(count_zeros(&path, 0.0, TAU, DEFAULT_OVERSAMPLE, None)?.count)
        })
        .collect()
}

/// Mean zero count of the sinc process on `[0, 2 pi)`; the limit is `2 / sqrt 3`.
pub fn sinc_zero_intensity(sampler: &SincSampler, reps: usize, seed: u64) -> Result<MCEstimate> {
    let start = Instant::now();
    let counts = sinc_zero_counts(sampler, reps, seed)?;
    let v: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    MCEstimate::from_samples(&v, seed, start.elapsed().as_secs_f64())
}

/// `E[N(Z, [0, 2 pi])^{1+eps}]` for the sinc process.
pub fn tail_moment_sinc(sampler: &SincSampler, epsilon: f64, reps: usize, seed: u64) -> Result<MCEstimate> {
    check_epsilon(epsilon)?;
    tail_moment_of_counts(&sinc_zero_counts(sampler, reps, seed)?, epsilon, seed)
}

/// Exponents of the convergence-rate analysis for moment parameter `eta` and slack `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub gamma_eps: f64,
    pub beta_eps: f64,
    pub gamma0: f64,
    /// Kolmogorov-distance rate `((1+eta)/(4+6 eta)) (eta/(2(1+eta)) - gamma_eps)`.
    pub rate_exponent: f64,
    pub d0: f64,
}

/// Closed-form exponents; `eta = inf` gives the bounded-moment limits.
pub fn exponent_ledger(eta: f64, epsilon: f64) -> Result<Exponents> {
    if !(eta > 0.0) {
        return Err(Error::Argument(format!("eta must be positive, got {eta}")));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::Argument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let e = epsilon;
    let (gamma_eps, gamma0, rate_exponent, d0) = if eta.is_infinite() {
        let g = 1.0 / (2.0 * (7.0 + 18.0 * e));
        (g, 1.0 / 14.0, (0.5 - g) / 6.0, 28.5)
    } else {
        let g = eta / (2.0 * (5.0 + 7.0 * eta + 3.0 * e * (4.0 + 6.0 * eta)));
        let rate = (1.0 + eta) / (4.0 + 6.0 * eta) * (eta / (2.0 * (1.0 + eta)) - g);
        (g, eta / (2.0 * (5.0 + 7.0 * eta)), rate, 28.5 + 20.0 / eta)
    };
    Ok(Exponents { gamma_eps, beta_eps: (1.0 + 3.0 * e) / (1.0 + 2.0 * e) * gamma_eps, gamma0, rate_exponent, d0 })
}

/// Terms of the small-ball bound for `S_n(0)`: the Gaussian part
/// `min(1, 2 s / sqrt(2 pi kappa))` and the order `n^{-rate}` of the remainder,
/// whose constant is not known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallBallClt {
    pub gaussian_term: f64,
    pub remainder_order: f64,
}

pub fn small_ball_clt_terms(s: f64, kappa: f64, n: usize, eta: f64, gamma: f64) -> Result<SmallBallClt> {
    if !(kappa > 0.0) {
        return Err(Error::DegenerateDensity { value: kappa });
    }
    let cap = if eta.is_infinite() { 0.5 } else { eta / (2.0 * (1.0 + eta)) };
    if !(gamma > 0.0 && gamma < cap) {
        return Err(Error::Argument(format!("gamma must lie in (0, {cap})")));
    }
    let lead = if eta.is_infinite() { 1.0 / 6.0 } else { (1.0 + eta) / (4.0 + 6.0 * eta) };
    Ok(SmallBallClt {
        gaussian_term: (2.0 * s / (TAU * kappa).sqrt()).min(1.0),
        remainder_order: (n as f64).powf(-lead * (cap - gamma)),
    })
}

/// `1 / floor(n^beta)!`, the factorial small-ball radius.
pub fn factorial_radius(n: usize, beta: f64) -> f64 {
    let m = (n as f64).powf(beta).floor() as usize;
    1.0 / (1..=m).map(|k| k as f64).product::<f64>()
}
