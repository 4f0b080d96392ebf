//! Total-variation bound between a stationary Gaussian vector and the one
//! with truncated covariance, via the whitened difference of Toeplitz matrices.

use crate::error::{Error, Result};
use crate::spectral::{density_from_finite_covariance, truncate_covariance, CovarianceSequence, DEFAULT_GRID};
use nalgebra::DMatrix;
use serde::Serialize;

pub const MAX_TOEPLITZ: usize = 4096;
const MAX_CONDITION: f64 = 1e12;
/// Sizes up to this use a full eigenvalue check of the conditioning.
const EIGEN_CHECK_LIMIT: usize = 1024;

/// Covariance `Sigma` and its perturbation `Sigma~`, with `Sigma~ - Sigma` kept
/// separately so tiny truncation tails do not cancel.
#[derive(Debug, Clone)]
pub struct ToeplitzPair {
    sigma: DMatrix<f64>,
    difference: DMatrix<f64>,
    kappa: Option<f64>,
}

impl ToeplitzPair {
    /// `Sigma(i, j) = rho_G(|i - j|)` and `Sigma~` keeps lags up to `m`.
    pub fn from_truncation(rho_g: &CovarianceSequence, n: usize, m: usize) -> Result<Self> {
        check_size(n)?;
        let sigma = DMatrix::from_fn(n, n, |i, j| rho_g.at(i as i64 - j as i64));
        let difference = DMatrix::from_fn(n, n, |i, j| {
            let h = i.abs_diff(j);
            if h > m {
                -rho_g.at(h as i64)
            } else {
                0.0
            }
        });
        let kappa = density_from_finite_covariance(rho_g, grid_for(rho_g.support())).ok().map(|d| d.kappa());
        Ok(Self { sigma, difference, kappa })
    }

    pub fn from_matrices(sigma: DMatrix<f64>, sigma_tilde: DMatrix<f64>) -> Result<Self> {
        let n = sigma.nrows();
        check_size(n)?;
        if sigma.shape() != (n, n) || sigma_tilde.shape() != (n, n) {
            return Err(Error::Argument("matrices must be square and of equal size".into()));
        }
        let sym = |m: &DMatrix<f64>| (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0);
        if !sym(&sigma) || !sym(&sigma_tilde) {
            return Err(Error::Argument("matrices must be symmetric".into()));
        }
        let difference = &sigma_tilde - &sigma;
        Ok(Self { sigma, difference, kappa: None })
    }

    pub fn size(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_tilde(&self) -> DMatrix<f64> {
        &self.sigma + &self.difference
    }

    /// Same pair with indices listed in reverse order.
    pub fn reversed(&self) -> Self {
        let n = self.size();
        let flip = |m: &DMatrix<f64>| DMatrix::from_fn(n, n, |i, j| m[(n - 1 - i, n - 1 - j)]);
        Self { sigma: flip(&self.sigma), difference: flip(&self.difference), kappa: self.kappa }
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Argument("matrix size must be positive".into()));
    }
    if n > MAX_TOEPLITZ {
        return Err(Error::Resource(format!("n = {n} exceeds {MAX_TOEPLITZ} for dense eigenanalysis")));
    }
    Ok(())
}

fn grid_for(support: usize) -> usize {
    DEFAULT_GRID.max((2 * support + 2).next_power_of_two())
}

/// Eigenvalues of `Sigma^{-1} Sigma~ - I`, from the whitened symmetric
/// matrix `L^{-1} (Sigma~ - Sigma) L^{-T}` with `Sigma = L L^T`.
pub fn whitened_eigenvalues(pair: &ToeplitzPair) -> Result<Vec<f64>> {
    Ok(whiten(pair)?.symmetric_eigenvalues().iter().copied().collect())
}

fn whiten(pair: &ToeplitzPair) -> Result<DMatrix<f64>> {
    let conditioning = |pair: &ToeplitzPair| -> Error {
        let eig = pair.sigma.clone().symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        Error::Conditioning {
            min_eigenvalue: lo,
            condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
            kappa: pair.kappa.unwrap_or(f64::NAN),
        }
    };
    if pair.size() <= EIGEN_CHECK_LIMIT {
        let eig = pair.sigma.clone().symmetric_eigenvalues();
        if !(eig.min() > 0.0) || eig.max() / eig.min() > MAX_CONDITION {
            return Err(conditioning(pair));
        }
    }
    let chol = pair.sigma.clone().cholesky().ok_or_else(|| conditioning(pair))?;
    let l = chol.l();
    let diag_ratio = l.diagonal().max() / l.diagonal().min();
    if !(diag_ratio * diag_ratio <= MAX_CONDITION) {
        return Err(conditioning(pair));
    }
    // X = L^{-1} D, then M = L^{-1} X^T.
    let x = l.solve_lower_triangular(&pair.difference).expect("non-singular factor");
    let mut m = l.solve_lower_triangular(&x.transpose()).expect("non-singular factor");
    let mt = m.transpose();
    m += mt;
    m *= 0.5;
    Ok(m)
}

/// `(3/2) min(1, sqrt(sum lambda_i^2))`; the sum is the squared Frobenius norm
/// of the whitened difference, equal to the sum of squared eigenvalues.
pub fn tv_upper_bound(pair: &ToeplitzPair) -> Result<f64> {
    if pair.difference.iter().all(|&d| d == 0.0) {
        return Ok(0.0);
    }
    let m = whiten(pair)?;
    Ok(1.5 * m.norm().min(1.0))
}

/// `(3/2) min(1, sqrt(n^2 sum_{k>m} rho_G(k)^2 / kappa_G^2))`.
pub fn trace_bound(rho_g: &CovarianceSequence, n: usize, m: usize, kappa_g: f64) -> Result<f64> {
    if !(kappa_g > 0.0) {
        return Err(Error::DegenerateDensity { value: kappa_g });
    }
    let nf = n as f64;
    // Lags beyond n - 1 never enter an n x n matrix.
    let tail: f64 = (m + 1..n.min(rho_g.support() + 1)).map(|k| rho_g.at(k as i64).powi(2)).sum();
    Ok(1.5 * (nf * nf * tail / (kappa_g * kappa_g)).sqrt().min(1.0))
}

/// One row of a truncation sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub tv_bound: f64,
    pub trace_bound: f64,
    /// Infimum of the truncated density on the grid; may be negative.
    pub kappa: f64,
    pub valid: bool,
}

/// Bounds for each truncation lag in `m_list`. `kappa_g` defaults to the refined
/// infimum of the density of `rho_g`.
pub fn truncation_sweep(
    rho_g: &CovarianceSequence,
    n: usize,
    m_list: &[usize],
    kappa_g: Option<f64>,
) -> Result<Vec<SweepRow>> {
    if m_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Argument("m list must be ascending".into()));
    }
    let kappa_g = match kappa_g {
        Some(k) => k,
        None => density_from_finite_covariance(rho_g, grid_for(rho_g.support()))?.kappa(),
    };
    m_list
        .iter()
        .map(|&m| {
            let pair = ToeplitzPair::from_truncation(rho_g, n, m)?;
            let (truncated, valid) = truncate_covariance(rho_g, m);
            let grid = grid_for(truncated.support());
            let kappa = (0..grid)
                .map(|j| truncated.density_at(-std::f64::consts::PI + std::f64::consts::TAU * j as f64 / grid as f64))
                .fold(f64::INFINITY, f64::min);
            Ok(SweepRow {
                m,
                tv_bound: tv_upper_bound(&pair)?,
                trace_bound: trace_bound(rho_g, n, m, kappa_g)?,
                kappa,
                valid,
            })
        })
        .collect()
}
