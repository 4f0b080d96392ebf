//! Covariance sequences, spectral densities and Hermite machinery.
//!
//! Convention used everywhere in this crate:
//! `rho(k) = (1/2pi) * integral_{-pi}^{pi} e^{ikx} psi(x) dx`, so that
//! `psi(x) = sum_k rho(|k|) e^{ikx}` and `(1/2pi) * integral psi = rho(0) = 1`.
//! White noise therefore has `psi == 1`.

use crate::coeffgen::FunctionalSpec;
use crate::error::{Error, Result};
use crate::fourier;
use crate::quadrature::normalized_hermite;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default number of grid points on `[-pi, pi)`.
pub const DEFAULT_GRID: usize = 4096;
/// Default Hermite truncation order.
pub const DEFAULT_HERMITE_ORDER: usize = 41;
/// Densities with `kappa` at or below this are flagged as violating strict positivity.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

const NEGATIVITY_TOL: f64 = 1e-9;

/// Correlation function `rho(0..=K)` of a stationary sequence, zero beyond `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSequence {
    values: Vec<f64>,
}

impl CovarianceSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidCovariance("empty covariance sequence".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        if (values[0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCovariance(format!("rho(0) = {} != 1", values[0])));
        }
        if let Some((h, v)) = values.iter().enumerate().find(|(_, v)| v.abs() > 1.0 + 1e-12) {
            return Err(Error::InvalidCovariance(format!("|rho({h})| = {} > 1", v.abs())));
        }
        let mut values = values;
        values[0] = 1.0;
        Ok(Self { values })
    }

    /// White noise, `rho = delta_0`.
    pub fn white() -> Self {
        Self { values: vec![1.0] }
    }

    pub fn from_fn<F: Fn(usize) -> f64>(support: usize, f: F) -> Result<Self> {
        Self::new((0..=support).map(f).collect())
    }

    /// Discrete Bargmann-Fock correlation `e^{-k^2/2}` cut at `support` (12 leaves a tail below 1e-31).
    pub fn bargmann_fock(support: usize) -> Self {
        Self::from_fn(support, |k| ClosedForm::BargmannFock.correlation(k)).expect("valid")
    }

    /// Exponential correlation `e^{-|k|}` cut at `support` (40 leaves a tail below 1e-17).
    pub fn exponential(support: usize) -> Self {
        Self::from_fn(support, |k| ClosedForm::Exponential.correlation(k)).expect("valid")
    }

    /// Autocorrelation `rho(h) = sum_j c_j c_{j+h}` of a normalized moving-average kernel.
    pub fn moving_average(kernel: &[f64]) -> Result<Self> {
        let m = kernel.len().saturating_sub(1);
        let values = (0..=m)
            .map(|h| (0..kernel.len() - h).map(|j| kernel[j] * kernel[j + h]).sum())
            .collect();
        Self::new(values)
    }

    /// Support length `K`.
    pub fn support(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `rho(|h|)`, zero beyond the support.
    pub fn at(&self, h: i64) -> f64 {
        self.values.get(h.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    /// Direct evaluation of `psi(x) = 1 + 2 sum_h rho(h) cos(hx)`.
    pub fn density_at(&self, x: f64) -> f64 {
        self.values[0]
            + 2.0
                * self.values[1..]
                    .iter()
                    .enumerate()
                    .map(|(i, r)| r * ((i + 1) as f64 * x).cos())
                    .sum::<f64>()
    }

    /// Tail energy `sum_{k > m} rho(k)^2`.
    pub fn tail_energy(&self, m: usize) -> f64 {
        self.values.iter().skip(m + 1).map(|r| r * r).sum()
    }
}

/// The two closed-form Gaussian correlation models with Poisson-summed densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    BargmannFock,
    Exponential,
}

impl ClosedForm {
    pub fn correlation(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            ClosedForm::BargmannFock => (-0.5 * k * k).exp(),
            ClosedForm::Exponential => (-k).exp(),
        }
    }

    pub fn default_support(self) -> usize {
        match self {
            ClosedForm::BargmannFock => 12,
            ClosedForm::Exponential => 40,
        }
    }

    pub fn covariance(self) -> CovarianceSequence {
        match self {
            ClosedForm::BargmannFock => CovarianceSequence::bargmann_fock(self.default_support()),
            ClosedForm::Exponential => CovarianceSequence::exponential(self.default_support()),
        }
    }
}

/// Spectral density sampled on `x_j = -pi + 2 pi j / G`, `j = 0..G`.
///
/// Alongside the grid it keeps cosine coefficients `rho(0..)` so that the
/// density can be evaluated and differentiated off-grid.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    values: Vec<f64>,
    coefficients: Vec<f64>,
    closed_form: Option<ClosedForm>,
    kappa: f64,
}

impl SpectralDensity {
    fn assemble(values: Vec<f64>, coefficients: Vec<f64>, closed_form: Option<ClosedForm>) -> Self {
        let mut d = Self { values, coefficients, closed_form, kappa: f64::NAN };
        d.kappa = refine_kappa(&d);
        d
    }

    /// Builds a density from its cosine coefficients `rho(0..)`, using an inverse FFT.
    pub fn from_coefficients(coefficients: Vec<f64>, grid: usize) -> Result<Self> {
        check_grid(grid, coefficients.len().saturating_sub(1))?;
        let values = synthesize(&coefficients, grid);
        Ok(Self::assemble(values, coefficients, None))
    }

    /// Closed form evaluated on the grid by Poisson summation.
    pub fn closed_form(kind: ClosedForm, grid: usize) -> Result<Self> {
        check_grid(grid, 0)?;
        let values = grid_points(grid).map(|x| closed_form_density(kind, x)).collect();
        let coefficients = (0..=grid / 2).map(|k| kind.correlation(k)).collect();
        Ok(Self::assemble(values, coefficients, Some(kind)))
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn closed_form_kind(&self) -> Option<ClosedForm> {
        self.closed_form
    }

    /// `x_j = -pi + 2 pi j / G`.
    pub fn grid_point(&self, j: usize) -> f64 {
        -PI + 2.0 * PI * j as f64 / self.values.len() as f64
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Whether `kappa > 0` holds (strict spectral positivity).
    pub fn is_positive(&self) -> bool {
        self.kappa > POSITIVITY_FLOOR
    }

    /// Cosine coefficients `rho(0), rho(1), ...`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Off-grid evaluation. Closed forms use the Poisson sum, others the cosine series.
    pub fn eval(&self, x: f64) -> f64 {
        match self.closed_form {
            Some(kind) => closed_form_density(kind, wrap_angle(x)),
            None => cosine_series(&self.coefficients, x, 0),
        }
    }

    /// `(1/2pi) * integral psi`, trapezoid rule on the periodic grid.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Largest asymmetry `|psi(x) - psi(-x)|` over grid pairs.
    pub fn asymmetry(&self) -> f64 {
        let g = self.values.len();
        (1..g).map(|j| (self.values[j] - self.values[g - j]).abs()).fold(0.0, f64::max)
    }

    pub fn grid_min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks nonnegativity, unit mass and symmetry on the grid.
    pub fn validate(&self) -> Result<()> {
        let min = self.grid_min();
        if min < -NEGATIVITY_TOL {
            return Err(Error::NotACovariance { min });
        }
        let mass = self.mass();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidDensity(format!("mass {mass} differs from 1")));
        }
        let asym = self.asymmetry();
        if asym > 1e-9 {
            return Err(Error::InvalidDensity(format!("asymmetry {asym:.3e}")));
        }
        Ok(())
    }

    /// Fourier coefficients recovered from the grid values by FFT.
    pub fn grid_coefficients(&self) -> Vec<f64> {
        let g = self.values.len();
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fourier::inverse(&mut buf);
        // x_j = -pi + 2 pi j/G gives e^{ik x_j} = (-1)^k e^{2 pi i jk/G}
        (0..=g / 2)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                s * buf[k].re / g as f64
            })
            .collect()
    }

    /// CSV rows `(x, psi)`.
    pub fn table(&self) -> Vec<(f64, f64)> {
        (0..self.values.len()).map(|j| (self.grid_point(j), self.values[j])).collect()
    }
}

fn check_grid(grid: usize, support: usize) -> Result<()> {
    if grid < 4 || !grid.is_power_of_two() {
        return Err(Error::Argument(format!("grid size {grid} must be a power of two >= 4")));
    }
    if support >= grid / 2 + 1 {
        return Err(Error::Argument(format!("support {support} needs grid > {}", 2 * support)));
    }
    Ok(())
}

fn grid_points(grid: usize) -> impl Iterator<Item = f64> {
    (0..grid).map(move |j| -PI + 2.0 * PI * j as f64 / grid as f64)
}

fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y < -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// `d^order/dx^order` of `c_0 + 2 sum_h c_h cos(hx)`.
fn cosine_series(coefficients: &[f64], x: f64, order: u32) -> f64 {
    let mut s = if order == 0 { coefficients[0] } else { 0.0 };
    for (i, c) in coefficients.iter().enumerate().skip(1) {
        let h = i as f64;
        let term = match order % 4 {
            0 => (h * x).cos(),
            1 => -(h * x).sin(),
            2 => -(h * x).cos(),
            _ => (h * x).sin(),
        };
        s += 2.0 * c * h.powi(order as i32) * term;
    }
    s
}

/// Grid of `c_0 + 2 sum_h c_h cos(h x_j)` via one inverse FFT.
fn synthesize(coefficients: &[f64], grid: usize) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); grid];
    for (k, &c) in coefficients.iter().enumerate().take(grid / 2 + 1) {
        // e^{-ik x_j} = (-1)^k e^{-2 pi i jk/G}; symmetric sequence so either sign works.
        let s = if k % 2 == 0 { c } else { -c };
        if k == 0 {
            buf[0] += s;
        } else if 2 * k == grid {
            buf[k] += s;
        } else {
            buf[k] += s;
            buf[grid - k] += s;
        }
    }
    fourier::inverse(&mut buf);
    // FFT output ordering places x_j at index j (the (-1)^k factor shifted origin to -pi).
    buf.into_iter().map(|z| z.re).collect()
}

/// Grid minimum followed by one Newton step per grid-local minimizer.
fn refine_kappa(psi: &SpectralDensity) -> f64 {
    let g = psi.values.len();
    let mut best = psi.grid_min();
    let h = 2.0 * PI / g as f64;
    for j in 0..g {
        let prev = psi.values[(j + g - 1) % g];
        let next = psi.values[(j + 1) % g];
        let v = psi.values[j];
        if v > prev || v > next {
            continue;
        }
        let x = psi.grid_point(j);
        let d1 = cosine_series(&psi.coefficients, x, 1);
        let d2 = cosine_series(&psi.coefficients, x, 2);
        if d2 > 0.0 {
            let step = d1 / d2;
            if step.abs() <= h {
                let refined = psi.eval(x - step);
                if refined < best {
                    best = refined;
                }
            }
        }
    }
    best
}

/// `psi(x) = 1 + 2 sum_{h=1}^K rho(h) cos(hx)` on a grid of size `grid`.
pub fn density_from_finite_covariance(rho: &CovarianceSequence, grid: usize) -> Result<SpectralDensity> {
    check_grid(grid, rho.support())?;
    if rho.support() >= grid / 2 {
        return Err(Error::Argument(format!("support {} must be below G/2 = {}", rho.support(), grid / 2)));
    }
    let values: Vec<f64> = grid_points(grid).map(|x| rho.density_at(x)).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -NEGATIVITY_TOL {
        return Err(Error::NotACovariance { min });
    }
    Ok(SpectralDensity::assemble(values, rho.values().to_vec(), None))
}

/// `|sum_j c_j e^{ijx}|^2`, the transfer-function form of a moving-average density.
pub fn ma_transfer_density(kernel: &[f64], x: f64) -> f64 {
    let (re, im) = kernel
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(re, im), (j, c)| (re + c * (j as f64 * x).cos(), im + c * (j as f64 * x).sin()));
    re * re + im * im
}

/// Density of a moving average with a normalized kernel.
pub fn ma_density(kernel: &[f64], grid: usize) -> Result<SpectralDensity> {
    let norm: f64 = kernel.iter().map(|c| c * c).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidModel(format!("kernel has squared norm {norm}, expected 1")));
    }
    density_from_finite_covariance(&CovarianceSequence::moving_average(kernel)?, grid)
}

/// Hermite coefficients `c_q` of a functional, `H = sum_q c_q He_q`.
#[derive(Debug, Clone, Serialize)]
pub struct HermiteExpansion {
    /// `c_0 ..= c_Q`.
    pub coefficients: Vec<f64>,
    /// `c_q^2 q!` for each `q`, the variance carried by chaos `q`.
    pub weights: Vec<f64>,
    pub order: usize,
    /// `1 - sum_{q <= Q} c_q^2 q!`.
    pub residual: f64,
    /// Set when the residual exceeds 0.05.
    pub coarse: bool,
}

impl HermiteExpansion {
    /// Expansion with prescribed coefficients, assumed to have unit total mass.
    pub fn from_coefficients(coefficients: Vec<f64>) -> Self {
        let weights: Vec<f64> = coefficients
            .iter()
            .enumerate()
            .map(|(q, c)| c * c * factorial(q))
            .collect();
        let order = coefficients.len().saturating_sub(1);
        let residual = 1.0 - weights.iter().sum::<f64>();
        Self { coefficients, weights, order, residual, coarse: residual > 0.05 }
    }

    /// `sum_{q>=1} c_q^2 q! r^q`.
    pub fn covariance_map(&self, r: f64) -> f64 {
        let mut p = 1.0;
        let mut s = 0.0;
        for w in self.weights.iter().skip(1) {
            p *= r;
            s += w * p;
        }
        s
    }

    /// Rows `(q, c_q, c_q^2 q!)` for reports.
    pub fn rows(&self) -> Vec<(usize, f64, f64)> {
        self.coefficients
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(q, (c, w))| (q, *c, *w))
            .collect()
    }
}

pub(crate) fn factorial(q: usize) -> f64 {
    (1..=q).map(|k| k as f64).product()
}

/// `c_q = E[H(N) He_q(N)] / q!` by quadrature under the standard Gaussian measure.
pub fn hermite_coefficients(spec: &FunctionalSpec, order: usize) -> Result<HermiteExpansion> {
    let rule = spec.gaussian_rule(order);
    let mut projections = vec![0.0; order + 1];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        if w == 0.0 {
            continue;
        }
        let hx = spec.eval(x);
        for (p, h) in projections.iter_mut().zip(normalized_hermite(x, order)) {
            *p += w * hx * h;
        }
    }
    if projections[0].abs() > 1e-8 {
        return Err(Error::Argument(format!("functional is not centered: E[H(N)] = {}", projections[0])));
    }
    projections[0] = 0.0;
    let coefficients: Vec<f64> = projections
        .iter()
        .enumerate()
        .map(|(q, e)| e / factorial(q).sqrt())
        .collect();
    let weights: Vec<f64> = projections.iter().map(|e| e * e).collect();
    let residual = 1.0 - weights.iter().sum::<f64>();
    Ok(HermiteExpansion { coefficients, weights, order, residual, coarse: residual > 0.05 })
}

/// `rho(h) = sum_{q<=Q} c_q^2 q! rho_G(h)^q` for `h >= 1`; `rho(0) = 1`.
///
/// Setting `rho(0) = 1` places any truncated chaos mass on lag zero, which is
/// the same as adding a white-noise component of size `residual`.
pub fn functional_covariance(exp: &HermiteExpansion, rho_g: &CovarianceSequence) -> CovarianceSequence {
    let mut values: Vec<f64> = rho_g.values().iter().map(|&r| exp.covariance_map(r)).collect();
    values[0] = 1.0;
    CovarianceSequence::new(values).expect("Hermite map preserves |rho| <= 1")
}

/// Density of `H(X_k)` from the density of `X_k`, computed in coefficient space.
///
/// The `q`-fold circular convolution of `psi_G` has Fourier coefficients
/// `rho_G(k)^q`, so the resummation is exact for band-limited inputs.
pub fn functional_density(exp: &HermiteExpansion, psi_g: &SpectralDensity) -> Result<SpectralDensity> {
    let rho_g = psi_g.grid_coefficients();
    if let Some((k, r)) = rho_g.iter().enumerate().find(|(_, r)| r.abs() > 1.0 + 1e-9) {
        return Err(Error::InvalidDensity(format!("Fourier coefficient {k} has modulus {}", r.abs())));
    }
    let mut coefficients: Vec<f64> = rho_g.iter().map(|&r| exp.covariance_map(r)).collect();
    coefficients[0] = 1.0;
    SpectralDensity::from_coefficients(coefficients, psi_g.grid_size())
}

/// Poisson-summed densities of the discrete Bargmann-Fock and exponential correlations.
pub fn closed_form_density(kind: ClosedForm, x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    match kind {
        ClosedForm::BargmannFock => {
            two_pi.sqrt() * (-6..=6).map(|k| (-0.5 * (x + two_pi * k as f64).powi(2)).exp()).sum::<f64>()
        }
        ClosedForm::Exponential => {
            const K: i64 = 10_000;
            let body: f64 = (-K..=K).map(|k| 2.0 / (1.0 + (x + two_pi * k as f64).powi(2))).sum();
            // Midpoint-rule tail for |k| > K.
            let a = K as f64 + 0.5;
            let tail = (PI / 2.0 - (x + two_pi * a).atan() + PI / 2.0 - (two_pi * a - x).atan()) / PI;
            body + tail
        }
    }
}

/// Refined infimum of a spectral density.
pub fn kappa(psi: &SpectralDensity) -> f64 {
    psi.kappa()
}

/// Truncates `rho_G` at lag `m` and reports whether the truncated density stays positive.
pub fn truncate_covariance(rho_g: &CovarianceSequence, m: usize) -> (CovarianceSequence, bool) {
    let keep = m.min(rho_g.support());
    let truncated = CovarianceSequence::new(rho_g.values()[..=keep].to_vec()).expect("prefix of valid sequence");
    let grid = DEFAULT_GRID.max((2 * keep + 2).next_power_of_two());
    let valid = density_from_finite_covariance(&truncated, grid)
        .map(|d| d.is_positive())
        .unwrap_or(false);
    (truncated, valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffgen::{standardized_functional, FunctionalSpec};
    use approx::assert_abs_diff_eq;

    fn sign_weight_exact(q: usize) -> f64 {
        // c_q = 2 phi(0) He_{q-1}(0) / q!, so c_q^2 q! = (2/pi) ((q-2)!!)^2 / q!
        if q % 2 == 0 {
            return 0.0;
        }
        let mut ratio = 2.0 / PI;
        // ((q-2)!!)^2 / q! built incrementally to avoid overflow
        let mut k = 1;
        while k + 2 <= q {
            ratio *= k as f64 / (k + 1) as f64;
            k += 2;
        }
        ratio / q as f64
    }

    #[test]
    fn white_noise_density() {
        let d = density_from_finite_covariance(&CovarianceSequence::white(), 64).unwrap();
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert_abs_diff_eq!(d.kappa(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn lag_one_density() {
        let rho = CovarianceSequence::new(vec![1.0, 0.4]).unwrap();
        let d = density_from_finite_covariance(&rho, 256).unwrap();
        for j in 0..256 {
            assert_abs_diff_eq!(d.values()[j], 1.0 + 0.8 * d.grid_point(j).cos(), epsilon = 1e-14);
        }
        assert_abs_diff_eq!(d.kappa(), 0.2, epsilon = 1e-12);
        assert!(d.is_positive());
    }

    #[test]
    fn boundary_density_is_flagged() {
        let rho = CovarianceSequence::new(vec![1.0, 0.5]).unwrap();
        let d = density_from_finite_covariance(&rho, 256).unwrap();
        assert_abs_diff_eq!(d.values()[0], 0.0, epsilon = 1e-15);
        assert!(!d.is_positive());
    }

    #[test]
    fn negative_density_rejected() {
        let rho = CovarianceSequence::new(vec![1.0, 0.9]).unwrap();
        assert!(matches!(density_from_finite_covariance(&rho, 64), Err(Error::NotACovariance { .. })));
    }

    #[test]
    fn support_must_fit_grid() {
        let rho = CovarianceSequence::exponential(40);
        assert!(density_from_finite_covariance(&rho, 64).is_err());
    }

    #[test]
    fn ma_densities() {
        let d = ma_density(&[1.0], 64).unwrap();
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let k = [0.8f64.sqrt(), 0.2f64.sqrt()];
        let d = ma_density(&k, 512).unwrap();
        assert_abs_diff_eq!(d.eval(0.0), 1.8, epsilon = 1e-12);
        for j in 0..512 {
            assert_abs_diff_eq!(d.values()[j], ma_transfer_density(&k, d.grid_point(j)), epsilon = 1e-12);
        }

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let d = ma_density(&[h, h], 512).unwrap();
        assert!(!d.is_positive());
        assert!(ma_density(&[1.0, 1.0], 64).is_err());
    }

    #[test]
    fn identity_and_square_expansions() {
        let id = standardized_functional(&FunctionalSpec::identity()).unwrap();
        let e = hermite_coefficients(&id, 10).unwrap();
        assert_abs_diff_eq!(e.coefficients[1], 1.0, epsilon = 1e-12);
        for q in [0, 2, 3, 4, 5, 10] {
            assert_abs_diff_eq!(e.coefficients[q], 0.0, epsilon = 1e-12);
        }

        let sq = standardized_functional(&FunctionalSpec::square()).unwrap();
        let e = hermite_coefficients(&sq, 10).unwrap();
        assert_abs_diff_eq!(e.coefficients[2], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(e.coefficients[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.coefficients[4], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.residual, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sign_expansion_matches_closed_form() {
        let sign = FunctionalSpec::sign();
        let e = hermite_coefficients(&sign, 41).unwrap();
        assert_abs_diff_eq!(e.coefficients[1], (2.0 / PI).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.weights[1], 2.0 / PI, epsilon = 1e-12);
        assert_abs_diff_eq!(e.coefficients[3], -(2.0 / PI).sqrt() / 6.0, epsilon = 1e-12);
        for q in 0..=41 {
            assert_abs_diff_eq!(e.weights[q], sign_weight_exact(q), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(e.residual, 0.078528, epsilon = 1e-5);
        assert!(e.coarse);
        // Total mass tends to one as the order grows.
        let e200 = hermite_coefficients(&sign, 200).unwrap();
        assert!(e200.residual < e.residual);
        assert!(e200.residual > -1e-8);
    }

    #[test]
    fn sign_expansion_quadrature_order_converged() {
        // The panel rule at two resolutions agrees far below the needed accuracy.
        let sign = FunctionalSpec::sign();
        let coarse = sign.gaussian_rule_with(20.0, 1.0, 10);
        let fine = sign.gaussian_rule_with(24.0, 0.25, 20);
        for q in [1usize, 3, 5, 21, 41] {
            let f = |rule: &crate::quadrature::GaussianRule| {
                rule.expect(|x| sign.eval(x) * normalized_hermite(x, q)[q])
            };
            assert_abs_diff_eq!(f(&coarse), f(&fine), epsilon = 1e-10);
        }
    }

    #[test]
    fn functional_covariance_cases() {
        let id = standardized_functional(&FunctionalSpec::identity()).unwrap();
        let e = hermite_coefficients(&id, 41).unwrap();
        let rho_g = CovarianceSequence::bargmann_fock(12);
        let rho = functional_covariance(&e, &rho_g);
        for h in 0..=12 {
            assert_abs_diff_eq!(rho.at(h), rho_g.at(h), epsilon = 1e-12);
        }

        let e = hermite_coefficients(&FunctionalSpec::sign(), 41).unwrap();
        let rho = functional_covariance(&e, &CovarianceSequence::new(vec![1.0, 0.5]).unwrap());
        assert_abs_diff_eq!(rho.at(1), 1.0 / 3.0, epsilon = 1e-4);

        let rho = functional_covariance(&e, &CovarianceSequence::new(vec![1.0, 0.0, 0.0]).unwrap());
        assert_eq!(rho.values(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn arcsine_consistency_on_moderate_correlations() {
        let e = hermite_coefficients(&FunctionalSpec::sign(), 41).unwrap();
        for i in -90..=90 {
            let r = i as f64 / 100.0;
            assert_abs_diff_eq!(e.covariance_map(r), 2.0 / PI * r.asin(), epsilon = 1e-3);
        }
    }

    #[test]
    fn functional_density_dual_path() {
        let sign = FunctionalSpec::sign();
        let sq = standardized_functional(&FunctionalSpec::square()).unwrap();
        let id = standardized_functional(&FunctionalSpec::identity()).unwrap();
        for rho_g in [CovarianceSequence::bargmann_fock(12), CovarianceSequence::exponential(40)] {
            let psi_g = density_from_finite_covariance(&rho_g, DEFAULT_GRID).unwrap();
            for spec in [&sign, &sq, &id] {
                let e = hermite_coefficients(spec, 41).unwrap();
                let fourier_path = functional_density(&e, &psi_g).unwrap();
                let direct = density_from_finite_covariance(&functional_covariance(&e, &rho_g), DEFAULT_GRID).unwrap();
                for j in 0..DEFAULT_GRID {
                    assert_abs_diff_eq!(fourier_path.values()[j], direct.values()[j], epsilon = 1e-8);
                }
                assert!(fourier_path.asymmetry() < 1e-9);
                fourier_path.validate().unwrap();
            }
        }
    }

    #[test]
    fn functional_density_special_cases() {
        let id = standardized_functional(&FunctionalSpec::identity()).unwrap();
        let e = hermite_coefficients(&id, 41).unwrap();
        let psi_g = SpectralDensity::closed_form(ClosedForm::BargmannFock, DEFAULT_GRID).unwrap();
        let out = functional_density(&e, &psi_g).unwrap();
        for j in 0..DEFAULT_GRID {
            assert_abs_diff_eq!(out.values()[j], psi_g.values()[j], epsilon = 1e-10);
        }

        let white = density_from_finite_covariance(&CovarianceSequence::white(), 256).unwrap();
        let e = hermite_coefficients(&FunctionalSpec::sign(), 41).unwrap();
        let out = functional_density(&e, &white).unwrap();
        assert!(out.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sign_of_bargmann_fock_is_positive() {
        let e = hermite_coefficients(&FunctionalSpec::sign(), 41).unwrap();
        let psi_g = SpectralDensity::closed_form(ClosedForm::BargmannFock, DEFAULT_GRID).unwrap();
        let out = functional_density(&e, &psi_g).unwrap();
        assert!(out.is_positive());
        assert!(out.asymmetry() < 1e-9);
        let direct = functional_covariance(&e, &CovarianceSequence::bargmann_fock(12));
        assert_abs_diff_eq!(out.eval(0.0), direct.density_at(0.0), epsilon = 1e-6);

        let psi_e = SpectralDensity::closed_form(ClosedForm::Exponential, DEFAULT_GRID).unwrap();
        assert!(functional_density(&e, &psi_e).unwrap().is_positive());
    }

    #[test]
    fn closed_forms() {
        let floor_bf = (2.0 * PI).sqrt() * (-PI * PI / 2.0).exp();
        assert_abs_diff_eq!(floor_bf, 0.01803, epsilon = 1e-5);
        assert!(closed_form_density(ClosedForm::BargmannFock, PI) >= floor_bf);
        let floor_exp = 2.0 / (1.0 + PI * PI);
        for j in 0..=200 {
            let x = -PI + 2.0 * PI * j as f64 / 200.0;
            assert!(closed_form_density(ClosedForm::Exponential, x) > floor_exp);
            // Poisson kernel identity: sum_k e^{-|k|} e^{ikx} = sinh 1 / (cosh 1 - cos x).
            let exact = 1f64.sinh() / (1f64.cosh() - x.cos());
            assert_abs_diff_eq!(closed_form_density(ClosedForm::Exponential, x), exact, epsilon = 1e-12);
            // Bargmann-Fock against its cosine series.
            let series: f64 = 1.0 + 2.0 * (1..40).map(|k| ClosedForm::BargmannFock.correlation(k) * (k as f64 * x).cos()).sum::<f64>();
            assert_abs_diff_eq!(closed_form_density(ClosedForm::BargmannFock, x), series, epsilon = 1e-13);
        }
        for kind in [ClosedForm::BargmannFock, ClosedForm::Exponential] {
            let d = SpectralDensity::closed_form(kind, DEFAULT_GRID).unwrap();
            assert_abs_diff_eq!(d.mass(), 1.0, epsilon = 1e-8);
            d.validate().unwrap();
        }
    }

    #[test]
    fn kappa_values() {
        let d = density_from_finite_covariance(&CovarianceSequence::white(), 64).unwrap();
        assert_eq!(kappa(&d), 1.0);
        // Off-grid minimum: grid of odd spacing relative to the minimizer.
        let rho = CovarianceSequence::new(vec![1.0, 0.4]).unwrap();
        let d = density_from_finite_covariance(&rho, 64).unwrap();
        assert_abs_diff_eq!(kappa(&d), 0.2, epsilon = 1e-12);
        let bf = SpectralDensity::closed_form(ClosedForm::BargmannFock, DEFAULT_GRID).unwrap();
        assert!(kappa(&bf) >= 0.01803);
    }

    #[test]
    fn kappa_newton_refines_off_grid_minimum() {
        // psi(x) = 1 + 2*0.3 cos(x - ...) style asymmetric-in-grid minimum: use lags 1 and 2.
        let rho = CovarianceSequence::new(vec![1.0, -0.2, 0.3]).unwrap();
        let d = density_from_finite_covariance(&rho, 16).unwrap();
        let fine = (0..200_000)
            .map(|i| rho.density_at(-PI + 2.0 * PI * i as f64 / 200_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!(d.grid_min() - fine > 1e-4);
        assert_abs_diff_eq!(d.kappa(), fine, epsilon = 1e-6);
    }

    #[test]
    fn truncation_cases() {
        let rho = CovarianceSequence::exponential(40);
        let (t, valid) = truncate_covariance(&rho, 50);
        assert_eq!(t, rho);
        assert!(valid);
        let (t, valid) = truncate_covariance(&rho, 0);
        assert_eq!(t, CovarianceSequence::white());
        assert!(valid);
        let (t, valid) = truncate_covariance(&rho, 3);
        assert_eq!(t.support(), 3);
        assert!(valid);
        let fine_min = (0..100_000)
            .map(|i| t.density_at(-PI + 2.0 * PI * i as f64 / 100_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!(fine_min > 0.0);
    }

    #[test]
    fn fourier_round_trip() {
        for k in [1usize, 5, 17, 64] {
            let rho = CovarianceSequence::from_fn(k, |h| {
                (1.0 - h as f64 / (k + 1) as f64) * 0.6f64.powi(h as i32) * (0.3 * h as f64).cos()
            }).unwrap();
            let d = density_from_finite_covariance(&rho, DEFAULT_GRID).unwrap();
            let back = d.grid_coefficients();
            for h in 0..=k {
                assert_abs_diff_eq!(back[h], rho.at(h as i64), epsilon = 1e-9);
            }
            for b in back.iter().skip(k + 1) {
                assert!(b.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn from_coefficients_matches_direct() {
        let rho = CovarianceSequence::exponential(40);
        let a = density_from_finite_covariance(&rho, 1024).unwrap();
        let b = SpectralDensity::from_coefficients(rho.values().to_vec(), 1024).unwrap();
        for j in 0..1024 {
            assert_abs_diff_eq!(a.values()[j], b.values()[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetric_grids_give_exact_symmetry() {
        let rho = CovarianceSequence::bargmann_fock(12);
        let d = density_from_finite_covariance(&rho, 1024).unwrap();
        assert!(d.asymmetry() < 1e-12);
    }
}
