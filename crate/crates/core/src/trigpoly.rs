//! Real trigonometric polynomials without constant term and their local fields.

use crate::error::{Error, Result};
use crate::fourier;
use rustfft::num_complex::Complex64;
use std::f64::consts::TAU;

/// `f(t) = sum_{k=1}^n a_k cos(kt) + b_k sin(kt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TrigPolynomial {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Argument(format!("coefficient lengths differ: {} vs {}", a.len(), b.len())));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Argument("coefficients must be finite".into()));
        }
        Ok(Self { a, b })
    }

    /// `scale * cos(kt)`.
    pub fn cosine(k: usize, scale: f64) -> Self {
        let mut a = vec![0.0; k];
        a[k - 1] = scale;
        Self { b: vec![0.0; k], a }
    }

    /// `scale * sin(kt)`.
    pub fn sine(k: usize, scale: f64) -> Self {
        let mut b = vec![0.0; k];
        b[k - 1] = scale;
        Self { a: vec![0.0; k], b }
    }

    pub fn degree(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn norm_l1(&self) -> f64 {
        self.a.iter().chain(&self.b).map(|v| v.abs()).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.a.iter().chain(&self.b).map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `f(t)` by the Reinsch-modified Clenshaw recurrence.
    pub fn evaluate_at(&self, t: f64) -> f64 {
        clenshaw(&self.a, &self.b, t)
    }

    /// The `order`-th derivative, via `(a_k, b_k) -> (k b_k, -k a_k)`.
    pub fn derivative(&self, order: usize) -> Self {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        for _ in 0..order {
            for k in 0..a.len() {
                let kf = (k + 1) as f64;
                let (ak, bk) = (a[k], b[k]);
                a[k] = kf * bk;
                b[k] = -kf * ak;
            }
        }
        Self { a, b }
    }

    /// Coefficients of `t -> f(x + t)`.
    pub fn shifted(&self, x: f64) -> Self {
        let (a, b) = self
            .a
            .iter()
            .zip(&self.b)
            .enumerate()
            .map(|(k, (&ak, &bk))| {
                let (s, c) = (((k + 1) as f64) * x).sin_cos();
                (ak * c + bk * s, bk * c - ak * s)
            })
            .unzip();
        Self { a, b }
    }
}

/// `sum a_k cos(kt) + b_k sin(kt)`, stable near `t = 0` and `t = pi`.
pub(crate) fn clenshaw(a: &[f64], b: &[f64], t: f64) -> f64 {
    let (s, c) = t.sin_cos();
    let n = a.len();
    let (mut ua, mut da, mut ub, mut db) = (0.0, 0.0, 0.0, 0.0);
    if c >= 0.0 {
        let half = (0.5 * t).sin();
        let lambda = -4.0 * half * half;
        for k in (0..n).rev() {
            da += a[k] + lambda * ua;
            ua += da;
            db += b[k] + lambda * ub;
            ub += db;
        }
        da + 0.5 * lambda * ua + ub * s
    } else {
        let half = (0.5 * t).cos();
        let lambda = 4.0 * half * half;
        for k in (0..n).rev() {
            da = a[k] + lambda * ua - da;
            ua = da - ua;
            db = b[k] + lambda * ub - db;
            ub = db - ub;
        }
        0.5 * lambda * ua - da + ub * s
    }
}

/// `f(2 pi j / size)` for `j < size` by one inverse FFT.
pub fn evaluate_on_grid(p: &TrigPolynomial, size: usize) -> Result<Vec<f64>> {
    let required = 2 * p.degree() + 2;
    if size < required || !size.is_power_of_two() {
        return Err(Error::Aliasing { grid: size, required });
    }
    let mut spec = vec![Complex64::new(0.0, 0.0); size];
    for k in 0..p.degree() {
        spec[k + 1] = Complex64::new(p.a[k], -p.b[k]);
    }
    fourier::inverse(&mut spec);
    Ok(spec.iter().map(|z| z.re).collect())
}

pub fn evaluate_at(p: &TrigPolynomial, t: f64) -> f64 {
    p.evaluate_at(t)
}

pub fn derivative(p: &TrigPolynomial, order: usize) -> TrigPolynomial {
    p.derivative(order)
}

/// `S(t) = f(X + t/n) / sqrt(n)`, with `f` stored rotated by `X`.
#[derive(Debug, Clone)]
pub struct LocalFieldWindow {
    base: TrigPolynomial,
    rotated: TrigPolynomial,
    angle: f64,
    n: usize,
}

impl LocalFieldWindow {
    pub fn base(&self) -> &TrigPolynomial {
        &self.base
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.rotated.evaluate_at(t / self.n as f64) / (self.n as f64).sqrt()
    }

    /// `S^{(order)}` as a window over the differentiated base, rescaled by `n^{-order}`.
    pub fn derivative(&self, order: usize) -> Self {
        let s = (self.n as f64).powi(-(order as i32));
        let scale = |p: TrigPolynomial| TrigPolynomial {
            a: p.a.iter().map(|v| v * s).collect(),
            b: p.b.iter().map(|v| v * s).collect(),
        };
        Self {
            base: scale(self.base.derivative(order)),
            rotated: scale(self.rotated.derivative(order)),
            angle: self.angle,
            n: self.n,
        }
    }

    /// `(t, S(t))` on `size` equispaced points of `[0, 2 pi)`.
    pub fn table(&self, size: usize) -> Vec<(f64, f64)> {
        (0..size)
            .map(|j| {
                let t = TAU * j as f64 / size as f64;
                (t, self.eval(t))
            })
            .collect()
    }
}

pub fn local_field(p: &TrigPolynomial, x: f64) -> LocalFieldWindow {
    LocalFieldWindow { base: p.clone(), rotated: p.shifted(x), angle: x, n: p.degree().max(1) }
}

/// `E_X ||S^{(order)}||^2 = (1/2n) sum_k (k/n)^{2 order} (a_k^2 + b_k^2)`, with `||.||` the mean square on `[0, 2 pi]`.
pub fn sobolev_norm_sq(p: &TrigPolynomial, order: usize) -> f64 {
    let n = p.degree() as f64;
    let sum: f64 = p
        .a
        .iter()
        .zip(&p.b)
        .enumerate()
        .map(|(k, (a, b))| ((k + 1) as f64 / n).powi(2 * order as i32) * (a * a + b * b))
        .sum();
    sum / (2.0 * n)
}

/// `(2/n) sum_{k=1}^n (1 - cos(k delta / n))`.
pub fn tightness_exact(n: usize, delta: f64) -> f64 {
    let nf = n as f64;
    (1..=n).map(|k| 2.0 * (0.5 * k as f64 * delta / nf).sin().powi(2)).sum::<f64>() * 2.0 / nf
}
