//! Quadrature rules for expectations under the standard Gaussian measure.
//!
//! Hermite polynomials follow the probabilists' convention (`He_1(x) = x`,
//! `He_2(x) = x^2 - 1`). Internally the orthonormal family
//! `h_q = He_q / sqrt(q!)` is used so that large orders do not overflow.

use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Nodes and weights of a rule for `E[g(N)]`, `N ~ N(0, 1)`. Weights sum to one.
#[derive(Debug, Clone)]
pub struct GaussianRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussianRule {
    pub fn expect<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| if w == 0.0 { 0.0 } else { w * g(x) })
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Gauss-Hermite rule of the given order for the probabilists' weight.
    ///
    /// Nodes start from the Golub-Welsch eigenvalues and are polished by Newton
    /// steps on `h_order`; weights are Christoffel numbers evaluated in log scale.
    pub fn gauss_hermite(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Hermite order must be positive");
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let off = (k as f64).sqrt();
            jacobi[(k, k - 1)] = off;
            jacobi[(k - 1, k)] = off;
        }
        let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (h_n, h_prev) = scaled_top_pair(*x, order);
                if h_prev == 0.0 {
                    break;
                }
                let step = h_n / ((order as f64).sqrt() * h_prev);
                *x -= step;
                if step.abs() < 1e-15 * x.abs().max(1.0) {
                    break;
                }
            }
        }
        // Enforce exact symmetry so that odd functionals integrate to zero.
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let m = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -m;
            nodes[j] = m;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }

        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&x| (-log_christoffel_sum(x, order)).exp())
            .collect();
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let m = 0.5 * (weights[i] + weights[j]);
            weights[i] = m;
            weights[j] = m;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { nodes, weights }
    }

    /// Composite Gauss-Legendre rule against the Gaussian density on `[-half_width, half_width]`,
    /// with panel boundaries at every breakpoint. Suited to functionals with jumps or kinks.
    pub fn gaussian_panels(breakpoints: &[f64], half_width: f64, panel: f64, points: usize) -> Self {
        let mut cuts: Vec<f64> = vec![-half_width, half_width];
        cuts.extend(breakpoints.iter().copied().filter(|b| b.abs() < half_width));
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();

        let (gl_x, gl_w) = gauss_legendre(points);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let norm = 1.0 / (2.0 * PI).sqrt();
        for seg in cuts.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            let pieces = ((hi - lo) / panel).ceil().max(1.0) as usize;
            let h = (hi - lo) / pieces as f64;
            for p in 0..pieces {
                let a = lo + p as f64 * h;
                let mid = a + 0.5 * h;
                for (&u, &w) in gl_x.iter().zip(&gl_w) {
                    let x = mid + 0.5 * h * u;
                    nodes.push(x);
                    weights.push(0.5 * h * w * norm * (-0.5 * x * x).exp());
                }
            }
        }
        Self { nodes, weights }
    }
}

/// Returns `(h_n(x), h_{n-1}(x))` up to a common positive factor.
fn scaled_top_pair(x: f64, n: usize) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e150 {
            cur /= m;
            prev /= m;
        }
    }
    (cur, prev)
}

/// `ln( sum_{k<n} h_k(x)^2 )`, the reciprocal Christoffel number.
fn log_christoffel_sum(x: f64, n: usize) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum = 0.0;
    let mut log_scale = 0.0;
    for k in 0..n {
        sum += cur * cur;
        if k + 1 == n {
            break;
        }
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e100 {
            cur /= m;
            prev /= m;
            sum /= m * m;
            log_scale += 2.0 * m.ln();
        }
    }
    sum.ln() + log_scale
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Orthonormal probabilists' Hermite values `h_0(x) .. h_q(x)`.
pub fn normalized_hermite(x: f64, q_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(q_max + 1);
    out.push(1.0);
    if q_max == 0 {
        return out;
    }
    out.push(x);
    for k in 1..q_max {
        let next = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// Unnormalized probabilists' Hermite value `He_q(x)`.
pub fn hermite_he(q: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..q {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_hermite_moments() {
        for order in [5usize, 64, 128, 256] {
            let rule = GaussianRule::gauss_hermite(order);
            assert_abs_diff_eq!(rule.expect(|_| 1.0), 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(rule.expect(|x| x * x), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(rule.expect(|x| x.powi(4)), 3.0, epsilon = 1e-11);
            assert_abs_diff_eq!(rule.expect(|x| x.powi(3)), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gauss_hermite_orthonormality() {
        let rule = GaussianRule::gauss_hermite(96);
        for p in 0..30 {
            for q in 0..30 {
                let v = rule.expect(|x| {
                    let h = normalized_hermite(x, 30);
                    h[p] * h[q]
                });
                let want = if p == q { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(v, want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn panels_integrate_half_line() {
        let rule = GaussianRule::gaussian_panels(&[0.0], 20.0, 0.5, 16);
        assert_abs_diff_eq!(rule.expect(|_| 1.0), 1.0, epsilon = 1e-14);
        let mean_abs = rule.expect(|x| x.abs());
        assert_abs_diff_eq!(mean_abs, (2.0 / PI).sqrt(), epsilon = 1e-14);
        let pos = rule.expect(|x| if x > 0.0 { 1.0 } else { 0.0 });
        assert_abs_diff_eq!(pos, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert_abs_diff_eq!(s, 2.0 / 19.0, epsilon = 1e-14);
    }

    #[test]
    fn hermite_conventions() {
        assert_eq!(hermite_he(1, 2.0), 2.0);
        assert_eq!(hermite_he(2, 2.0), 3.0);
        assert_eq!(hermite_he(3, 2.0), 2.0);
        let h = normalized_hermite(2.0, 3);
        assert_abs_diff_eq!(h[3], 2.0 / 6f64.sqrt(), epsilon = 1e-15);
    }
}
