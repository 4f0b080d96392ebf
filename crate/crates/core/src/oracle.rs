//! Reference values: Kac-Rice integrals for Gaussian coefficients, the sinc
//! limit process, and the finite-n variance of linear statistics of `S_n`.

use crate::error::{Error, Result};
use crate::spectral::CovarianceSequence;
use crate::zeros::Field;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{PI, TAU};

/// Inputs of the Kac-Rice integral.
#[derive(Debug, Clone)]
pub struct KacRiceSpec {
    pub rho: CovarianceSequence,
    pub n: usize,
    /// Initial number of periodic trapezoid nodes; doubled until converged.
    pub nodes: Option<usize>,
}

impl KacRiceSpec {
    pub fn new(rho: CovarianceSequence, n: usize) -> Self {
        Self { rho, n, nodes: None }
    }
}

/// `(Var f(t), Cov(f(t), f'(t)), Var f'(t))` for independent stationary `a`, `b` with correlation `rho`.
pub fn kac_rice_moments(rho: &CovarianceSequence, n: usize, t: f64) -> (f64, f64, f64) {
    let nf = n as f64;
    let mut v0 = nf;
    let mut v1 = 0.0;
    let mut v2 = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 6.0;
    for h in 1..=rho.support().min(n.saturating_sub(1)) {
        let r = rho.at(h as i64);
        if r == 0.0 {
            continue;
        }
        let (s, c) = (h as f64 * t).sin_cos();
        let hf = h as f64;
        let m = nf - hf;
        // sum_{l=1}^{n-h} l (l + h)
        let cross = m * (m + 1.0) * (2.0 * m + 1.0) / 6.0 + hf * m * (m + 1.0) / 2.0;
        v0 += 2.0 * m * r * c;
        v1 -= m * hf * r * s;
        v2 += 2.0 * r * c * cross;
    }
    (v0, v1, v2)
}

fn kac_rice_integrand(rho: &CovarianceSequence, n: usize, t: f64) -> Result<f64> {
    let (v0, v1, v2) = kac_rice_moments(rho, n, t);
    if !(v0 > 0.0) {
        return Err(Error::InvalidCovariance(format!("Var f(t) = {v0:.3e} <= 0 at t = {t}")));
    }
    Ok((v0 * v2 - v1 * v1).max(0.0).sqrt() / v0 / PI)
}

const KAC_RICE_RTOL: f64 = 1e-8;
const KAC_RICE_MAX_NODES: usize = 1 << 22;

/// `E N(f_n, [0, 2 pi]) = int (1/pi) sqrt(v0 v2 - v1^2) / v0 dt`.
///
/// The integrand is smooth and periodic, so the trapezoid rule converges
/// geometrically; nodes are doubled (reusing old ones) until the relative
/// change drops below `1e-8`.
pub fn kac_rice_expected_zeros(spec: &KacRiceSpec) -> Result<f64> {
    if spec.n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let mut m = spec.nodes.unwrap_or(64).max(8).next_power_of_two().max(4 * (spec.rho.support() + 1)).next_power_of_two();
    let mut sum = 0.0;
    for j in 0..m {
        sum += kac_rice_integrand(&spec.rho, spec.n, TAU * j as f64 / m as f64)?;
    }
    let mut estimate = TAU * sum / m as f64;
    while m < KAC_RICE_MAX_NODES {
        for j in 0..m {
            sum += kac_rice_integrand(&spec.rho, spec.n, TAU * (2 * j + 1) as f64 / (2 * m) as f64)?;
        }
        m *= 2;
        let next = TAU * sum / m as f64;
        let converged = (next - estimate).abs() <= KAC_RICE_RTOL * next.abs();
        estimate = next;
        if converged && m >= 256 {
            return Ok(estimate);
        }
    }
    Ok(estimate)
}

/// `2 sqrt(sum_{k<=n} k^2 / n)`, the i.i.d. Gaussian mean zero count.
pub fn kac_rice_iid(n: usize) -> f64 {
    let nf = n as f64;
    2.0 * ((nf + 1.0) * (2.0 * nf + 1.0) / 6.0).sqrt()
}

#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

pub const MAX_SINC_GRID: usize = 2048;
/// Native grid for zero counting on `[0, 2 pi]`: 1025 nodes at spacing `2 pi / 1024`.
pub const NATIVE_CELLS: usize = 1024;
const EIGEN_CUTOFF: f64 = 1e-13;

/// Sampler for the stationary Gaussian process with covariance `sinc` on a fixed grid.
///
/// The sinc matrix is numerically low rank; it is factored by a symmetric
/// eigendecomposition keeping eigenvalues above `1e-13 * lambda_max`, which
/// also absorbs the negative rounding noise that defeats dense Cholesky.
#[derive(Debug, Clone)]
pub struct SincSampler {
    grid: Vec<f64>,
    /// `V Lambda^{1/2}`, grid values from standard normals.
    loading: DMatrix<f64>,
    /// `V Lambda^{-1/2}`, kriging weights from standard normals.
    weights: DMatrix<f64>,
}

impl SincSampler {
    pub fn new(grid: &[f64]) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::DegenerateGrid("empty grid".into()));
        }
        if grid.len() > MAX_SINC_GRID {
            return Err(Error::DegenerateGrid(format!("{} nodes exceed {MAX_SINC_GRID}", grid.len())));
        }
        if grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::DegenerateGrid("non-finite node".into()));
        }
        let d = grid.len();
        let cov = DMatrix::from_fn(d, d, |i, j| sinc(grid[i] - grid[j]));
        let eig = SymmetricEigen::new(cov);
        let top = eig.eigenvalues.max();
        if !(top > 0.0) || !top.is_finite() {
            return Err(Error::DegenerateGrid("factorization produced no positive eigenvalue".into()));
        }
        let keep: Vec<usize> = (0..d).filter(|&i| eig.eigenvalues[i] > EIGEN_CUTOFF * top).collect();
        let r = keep.len();
        let loading = DMatrix::from_fn(d, r, |i, c| eig.eigenvectors[(i, keep[c])] * eig.eigenvalues[keep[c]].sqrt());
        let weights = DMatrix::from_fn(d, r, |i, c| eig.eigenvectors[(i, keep[c])] / eig.eigenvalues[keep[c]].sqrt());
        Ok(Self { grid: grid.to_vec(), loading, weights })
    }

    /// Grid `2 pi j / 1024`, `j = 0..=1024`.
    pub fn native() -> Result<Self> {
        let grid: Vec<f64> = (0..=NATIVE_CELLS).map(|j| TAU * j as f64 / NATIVE_CELLS as f64).collect();
        Self::new(&grid)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.loading.ncols()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SincPath<'_> {
        let z = DVector::from_fn(self.rank(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let values = (&self.loading * &z).iter().copied().collect();
        let weights = (&self.weights * &z).iter().copied().collect();
        SincPath { sampler: self, values, weights }
    }
}

/// One realization on the sampler grid, extended off-grid by the kriging interpolant.
#[derive(Debug, Clone)]
pub struct SincPath<'a> {
    sampler: &'a SincSampler,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl SincPath<'_> {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl Field for SincPath<'_> {
    fn eval(&self, t: f64) -> f64 {
        self.sampler.grid.iter().zip(&self.weights).map(|(s, w)| sinc(t - s) * w).sum()
    }

    fn eval_grid(&self, lo: f64, hi: f64, m: usize) -> Vec<f64> {
        let g = &self.sampler.grid;
        let matches = g.len() == m + 1
            && (0..=m).all(|j| (g[j] - (lo + (hi - lo) * j as f64 / m as f64)).abs() < 1e-12);
        if matches {
            return self.values.clone();
        }
        let h = (hi - lo) / m as f64;
        (0..=m).map(|j| self.eval(lo + h * j as f64)).collect()
    }

    fn resolution(&self) -> usize {
        1
    }

    fn scale(&self) -> f64 {
        1.0
    }
}

/// One draw of the sinc process on `grid`.
pub fn sample_sinc_process<R: Rng + ?Sized>(grid: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    Ok(SincSampler::new(grid)?.sample(rng).into_values())
}

/// `Var(sum_l xi_l S_n(t_l) | X) / psi(X)`, with the rescaled local field
/// `S_n(t) = n^{-1/2} sum_k a_k cos(kX + kt/n) + b_k sin(kX + kt/n)`.
///
/// Direct grouped sum over lags within the covariance support: `O(n (d + K))`.
pub fn sigma_n_sq(x: f64, t: &[f64], xi: &[f64], rho: &CovarianceSequence, n: usize) -> Result<f64> {
    if t.is_empty() || t.len() != xi.len() {
        return Err(Error::Argument("t and xi must be non-empty and of equal length".into()));
    }
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let psi = rho.density_at(x);
    if psi < 1e-12 {
        return Err(Error::DegenerateDensity { value: psi });
    }
    let nf = n as f64;
    let (c, s): (Vec<f64>, Vec<f64>) = (1..=n)
        .map(|k| {
            let kf = k as f64;
            t.iter().zip(xi).fold((0.0, 0.0), |(c, s), (&tl, &w)| {
                let (sn, cs) = (kf * (x + tl / nf)).sin_cos();
                (c + w * cs, s + w * sn)
            })
        })
        .unzip();
    let mut total: f64 = c.iter().zip(&s).map(|(a, b)| a * a + b * b).sum();
    for h in 1..=rho.support().min(n - 1) {
        let r = rho.at(h as i64);
        if r == 0.0 {
            continue;
        }
        let lag: f64 = (0..n - h).map(|k| c[k] * c[k + h] + s[k] * s[k + h]).sum();
        total += 2.0 * r * lag;
    }
    Ok(total / nf / psi)
}

/// `sum_{k,l} xi_k xi_l sinc(t_k - t_l)`.
pub fn sinc_quadratic_form(t: &[f64], xi: &[f64]) -> f64 {
    t.iter()
        .zip(xi)
        .map(|(tk, xk)| t.iter().zip(xi).map(|(tl, xl)| xk * xl * sinc(tk - tl)).sum::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffgen::{sample_coefficients, CoefficientModel, InnovationFamily};
    use crate::rng::StreamId;
    use crate::trigpoly::TrigPolynomial;
    use crate::zeros::count_zeros;
    use approx::assert_abs_diff_eq;

    fn ma_rho() -> CovarianceSequence {
        CovarianceSequence::moving_average(&[0.8f64.sqrt(), 0.2f64.sqrt()]).unwrap()
    }

    #[test]
    fn kac_rice_iid_closed_form() {
        let v = kac_rice_expected_zeros(&KacRiceSpec::new(CovarianceSequence::white(), 3)).unwrap();
        assert_abs_diff_eq!(v, 2.0 * (14.0f64 / 3.0).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(v, 4.3205, epsilon = 1e-4);
        for n in [1usize, 10, 256, 4096] {
            let v = kac_rice_expected_zeros(&KacRiceSpec::new(CovarianceSequence::white(), n)).unwrap();
            assert!((v - kac_rice_iid(n)).abs() < 1e-9 * v);
        }
        let big = kac_rice_iid(1 << 20) / (1 << 20) as f64;
        assert!((big - 2.0 / 3f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn kac_rice_ma_range_and_trend() {
        let mut prev_gap = f64::INFINITY;
        for n in [256usize, 512, 1024, 2048] {
            let v = kac_rice_expected_zeros(&KacRiceSpec::new(ma_rho(), n)).unwrap() / n as f64;
            assert!((1.10..=1.21).contains(&v), "{v}");
            let gap = (v - 2.0 / 3f64.sqrt()).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
    }

    #[test]
    fn kac_rice_rejects_non_positive_variance() {
        let rho = CovarianceSequence::new(vec![1.0, -1.0]).unwrap();
        // v0(0) = n + 2 (n-1)(-1) < 0 for n >= 3.
        assert!(matches!(
            kac_rice_expected_zeros(&KacRiceSpec::new(rho, 4)),
            Err(Error::InvalidCovariance(_))
        ));
    }

    #[test]
    fn kac_rice_moments_positive_and_bounded_below() {
        let rho = ma_rho();
        let kappa = 1.0 - 2.0 * 0.4;
        for n in [16usize, 256] {
            for j in 0..200 {
                let t = TAU * j as f64 / 200.0;
                let (v0, _, _) = kac_rice_moments(&rho, n, t);
                assert!(v0 > 0.0);
                assert!(v0 >= n as f64 * kappa - 2.0);
            }
        }
    }

    /// Empirical `(Var f, Cov(f, f'), Var f')` at one `t`, and their standard errors.
    fn empirical_moments(model: &CoefficientModel, n: usize, t: f64, reps: u64) -> ([f64; 3], [f64; 3]) {
        let mut prods = vec![[0.0; 3]; reps as usize];
        for r in 0..reps {
            let s = sample_coefficients(model, n, StreamId::new(77, r)).unwrap();
            let p = TrigPolynomial::new(s.a, s.b).unwrap();
            let f = p.evaluate_at(t);
            let df = p.derivative(1).evaluate_at(t);
            prods[r as usize] = [f * f, f * df, df * df];
        }
        let mut mean = [0.0; 3];
        let mut se = [0.0; 3];
        for i in 0..3 {
            let m = prods.iter().map(|p| p[i]).sum::<f64>() / reps as f64;
            let v = prods.iter().map(|p| (p[i] - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
            mean[i] = m;
            se[i] = (v / reps as f64).sqrt();
        }
        (mean, se)
    }

    #[test]
    fn kac_rice_moments_match_monte_carlo() {
        let kernel = [0.8f64.sqrt(), 0.2f64.sqrt()];
        let model = CoefficientModel::MovingAverage { kernel: kernel.to_vec(), innovation: InnovationFamily::Gaussian };
        let n = 12;
        for t in [0.3, 2.0, 4.4] {
            let (v0, v1, v2) = kac_rice_moments(&ma_rho(), n, t);
            let (m, se) = empirical_moments(&model, n, t, 20_000);
            assert!((m[0] - v0).abs() < 5.0 * se[0], "v0 {} vs {v0}", m[0]);
            assert!((m[1] - v1).abs() < 5.0 * se[1], "v1 {} vs {v1}", m[1]);
            assert!((m[2] - v2).abs() < 5.0 * se[2], "v2 {} vs {v2}", m[2]);
        }
    }

    fn mc_zero_mean(model: &CoefficientModel, n: usize, reps: u64, seed: u64) -> (f64, f64) {
        let counts: Vec<f64> = (0..reps)
            .map(|r| {
                let s = sample_coefficients(model, n, StreamId::new(seed, r)).unwrap();
                let p = TrigPolynomial::new(s.a, s.b).unwrap();
                count_zeros(&p, 0.0, TAU, 16, None).unwrap().count as f64
            })
            .collect();
        let m = counts.iter().sum::<f64>() / reps as f64;
        let v = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        (m, (v / reps as f64).sqrt())
    }

    #[test]
    fn kac_rice_matches_monte_carlo() {
        let iid = CoefficientModel::Iid(InnovationFamily::Gaussian);
        let ma = CoefficientModel::MovingAverage {
            kernel: vec![0.8f64.sqrt(), 0.2f64.sqrt()],
            innovation: InnovationFamily::Gaussian,
        };
        for (model, rho) in [(iid, CovarianceSequence::white()), (ma, ma_rho())] {
            for n in [3usize, 64] {
                let kr = kac_rice_expected_zeros(&KacRiceSpec::new(rho.clone(), n)).unwrap();
                let (m, se) = mc_zero_mean(&model, n, 4000, 5);
                assert!((m - kr).abs() < 5.0 * se, "n={n}: {m} +- {se} vs {kr}");
            }
        }
    }

    #[test]
    fn sinc_sampler_diagonal_and_lag_pi() {
        let sampler = SincSampler::native().unwrap();
        assert!(sampler.rank() < 200);
        assert_eq!(sinc(0.0), 1.0);
        // Node 512 sits at t = pi.
        let reps = 10_000u64;
        let pairs: Vec<(f64, f64)> = (0..reps)
            .map(|r| {
                let p = sampler.sample(&mut StreamId::new(3, r).rng());
                (p.values()[0], p.values()[512])
            })
            .collect();
        let var0 = pairs.iter().map(|p| p.0 * p.0).sum::<f64>() / reps as f64;
        assert!((var0 - 1.0).abs() < 5.0 * (2.0 / reps as f64).sqrt());
        let prod: Vec<f64> = pairs.iter().map(|p| p.0 * p.1).collect();
        let m = prod.iter().sum::<f64>() / reps as f64;
        let se = (prod.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0) / reps as f64).sqrt();
        assert!(m.abs() < 5.0 * se);
    }

    #[test]
    fn sinc_interpolant_reproduces_grid() {
        let sampler = SincSampler::native().unwrap();
        let p = sampler.sample(&mut StreamId::new(4, 0).rng());
        for j in [0usize, 1, 333, 1024] {
            assert!((p.eval(sampler.grid()[j]) - p.values()[j]).abs() < 1e-7);
        }
        let g = p.eval_grid(0.0, TAU, NATIVE_CELLS);
        assert_eq!(g, p.values());
    }

    #[test]
    fn sinc_small_grid_and_errors() {
        let x = sample_sinc_process(&[0.0, 1.0, 2.0], &mut StreamId::new(1, 0).rng()).unwrap();
        assert_eq!(x.len(), 3);
        assert!(matches!(sample_sinc_process(&[], &mut StreamId::new(1, 0).rng()), Err(Error::DegenerateGrid(_))));
        let big = vec![0.0; MAX_SINC_GRID + 1];
        assert!(SincSampler::new(&big).is_err());
        // Repeated nodes are a singular covariance; the low-rank factor still yields identical values.
        let x = sample_sinc_process(&[0.5, 0.5], &mut StreamId::new(1, 1).rng()).unwrap();
        assert!((x[0] - x[1]).abs() < 1e-6);
    }

    #[test]
    fn sigma_examples() {
        for n in [1usize, 7, 100] {
            for x in [0.0, 1.3, 5.0] {
                assert_abs_diff_eq!(
                    sigma_n_sq(x, &[0.7], &[1.0], &CovarianceSequence::white(), n).unwrap(),
                    1.0,
                    epsilon = 1e-12
                );
            }
        }
        let v = sigma_n_sq(0.4, &[0.0, PI], &[1.0, 1.0], &CovarianceSequence::white(), 4096).unwrap();
        assert!((v - 2.0).abs() < 1e-3, "{v}");
        assert_abs_diff_eq!(sinc_quadratic_form(&[0.0, PI], &[1.0, 1.0]), 2.0, epsilon = 1e-15);

        let bad = CovarianceSequence::new(vec![1.0, 0.5]).unwrap();
        assert!(matches!(sigma_n_sq(PI, &[0.0], &[1.0], &bad, 8), Err(Error::DegenerateDensity { .. })));
    }

    #[test]
    fn sigma_converges_for_ma() {
        let rho = ma_rho();
        let mut prev = f64::INFINITY;
        for e in 8..=13 {
            let n = 1usize << e;
            let err = (sigma_n_sq(1.0, &[0.0], &[1.0], &rho, n).unwrap() - 1.0).abs();
            assert!(err <= prev * 1.1, "n={n}: {err} after {prev}");
            prev = err;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn sigma_matches_monte_carlo_variance() {
        let kernel = [0.8f64.sqrt(), 0.2f64.sqrt()];
        let model = CoefficientModel::MovingAverage { kernel: kernel.to_vec(), innovation: InnovationFamily::Rademacher };
        let (x, n, reps) = (1.0, 64usize, 20_000u64);
        let psi = ma_rho().density_at(x);
        let vals: Vec<f64> = (0..reps)
            .map(|r| {
                let s = sample_coefficients(&model, n, StreamId::new(21, r)).unwrap();
                let p = TrigPolynomial::new(s.a, s.b).unwrap();
                (p.evaluate_at(x) + 0.5 * p.evaluate_at(x + 2.0 / n as f64)) / (n as f64 * psi).sqrt()
            })
            .collect();
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        let m = sq.iter().sum::<f64>() / reps as f64;
        let se = (sq.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0) / reps as f64).sqrt();
        let exact = sigma_n_sq(x, &[0.0, 2.0], &[1.0, 0.5], &ma_rho(), n).unwrap();
        assert!((m - exact).abs() < 5.0 * se, "{m} +- {se} vs {exact}");
    }
}
