//! Thin wrappers around `rustfft` with a per-thread plan cache.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized forward transform: `X_k = sum_j x_j e^{-2 pi i jk/N}`.
pub fn forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// Unnormalized inverse transform: `x_j = sum_k X_k e^{+2 pi i jk/N}`.
pub fn inverse(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_delta_is_flat() {
        let mut v = vec![Complex64::new(0.0, 0.0); 8];
        v[0] = Complex64::new(1.0, 0.0);
        inverse(&mut v);
        assert!(v.iter().all(|z| (z.re - 1.0).abs() < 1e-15 && z.im.abs() < 1e-15));
        forward(&mut v);
        assert!((v[0].re - 8.0).abs() < 1e-12);
    }
}
