//! Real-zero counting by sign changes with refinement, and the exact
//! small-ball oracle for Rademacher coefficients.

use crate::error::{Error, Result};
use crate::trigpoly::{evaluate_on_grid, LocalFieldWindow, TrigPolynomial};
use std::f64::consts::TAU;

/// Something that can be evaluated on the real line.
pub trait Field {
    fn eval(&self, t: f64) -> f64;

    /// Values at `lo + (hi - lo) j / m` for `j = 0..=m`.
    fn eval_grid(&self, lo: f64, hi: f64, m: usize) -> Vec<f64> {
        let h = (hi - lo) / m as f64;
        (0..=m).map(|j| self.eval(lo + h * j as f64)).collect()
    }

    /// Number of oscillations per unit of `2 pi`; sets the base grid size.
    fn resolution(&self) -> usize;

    /// Size of the field, used for the default absolute tolerance.
    fn scale(&self) -> f64;
}

impl Field for TrigPolynomial {
    fn eval(&self, t: f64) -> f64 {
        self.evaluate_at(t)
    }

    fn eval_grid(&self, lo: f64, hi: f64, m: usize) -> Vec<f64> {
        if lo == 0.0 && hi == TAU {
            if let Ok(mut v) = evaluate_on_grid(self, m) {
                v.push(v[0]);
                return v;
            }
        }
        let h = (hi - lo) / m as f64;
        (0..=m).map(|j| self.evaluate_at(lo + h * j as f64)).collect()
    }

    fn resolution(&self) -> usize {
        self.degree().max(1)
    }

    fn scale(&self) -> f64 {
        self.norm_l2()
    }
}

impl Field for LocalFieldWindow {
    fn eval(&self, t: f64) -> f64 {
        LocalFieldWindow::eval(self, t)
    }

    fn resolution(&self) -> usize {
        1
    }

    fn scale(&self) -> f64 {
        self.base().norm_l2() / (self.degree() as f64).sqrt()
    }
}

impl<F: Fn(f64) -> f64> Field for (F, usize) {
    fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }

    fn resolution(&self) -> usize {
        self.1
    }

    fn scale(&self) -> f64 {
        1.0
    }
}

/// Outcome of one zero count on a half-open interval `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCountResult {
    pub count: usize,
    pub roots: Vec<f64>,
    /// Cells with `|f| < abs_tol` and no resolved sign change after subdivision.
    pub suspicious_cells: usize,
    pub oversample: usize,
    pub grid: usize,
    pub abs_tol: f64,
}

pub const MIN_GRID: usize = 1024;
pub const DEFAULT_OVERSAMPLE: usize = 16;
const MAX_REFINE_STEPS: usize = 40;
const ROOT_WIDTH: f64 = 1e-12;
const SUBDIVISIONS: usize = 8;
const SUBDIVISION_DEPTH: usize = 4;

/// `1e-9 (1 + scale)`.
pub fn default_abs_tol<F: Field + ?Sized>(f: &F) -> f64 {
    1e-9 * (1.0 + f.scale())
}

/// Counts zeros of `f` on `[lo, hi)`.
///
/// The base grid has `max(next_pow2(oversample * resolution), 1024)` cells.
/// Exact zeros at nodes count once, strict sign changes are refined inside
/// their cell, and cells that look close to a double root (small values, or a
/// local parabola crossing zero) are subdivided and re-examined.
pub fn count_zeros<F: Field + ?Sized>(
    f: &F,
    lo: f64,
    hi: f64,
    oversample: usize,
    abs_tol: Option<f64>,
) -> Result<ZeroCountResult> {
    if oversample < 8 {
        return Err(Error::Argument(format!("oversample must be at least 8, got {oversample}")));
    }
    if !(hi > lo) {
        return Err(Error::Argument(format!("empty interval [{lo}, {hi})")));
    }
    let abs_tol = abs_tol.unwrap_or_else(|| default_abs_tol(f));
    let m = (oversample * f.resolution()).next_power_of_two().max(MIN_GRID);
    let h = (hi - lo) / m as f64;
    let v = f.eval_grid(lo, hi, m);
    if let Some(j) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Evaluation { t: lo + h * j as f64 });
    }
    // Outer neighbours for the curvature test at the ends.
    let before = checked(f, lo - h)?;
    let after = checked(f, hi + h)?;
    let node = |j: isize, v: &[f64]| -> f64 {
        if j < 0 {
            before
        } else if j as usize > m {
            after
        } else {
            v[j as usize]
        }
    };

    let mut roots = Vec::new();
    let mut suspicious = 0;
    for j in 0..m {
        let (t0, t1) = (lo + h * j as f64, lo + h * (j + 1) as f64);
        let (f0, f1) = (v[j], v[j + 1]);
        if f0 == 0.0 {
            roots.push(t0);
            continue;
        }
        if f1 == 0.0 {
            continue;
        }
        if (f0 < 0.0) != (f1 < 0.0) {
            let ji = j as isize;
            let guess = cubic_root_guess(node(ji - 1, &v), f0, f1, node(ji + 2, &v));
            roots.push(refine(f, t0, t1, f0, f1, abs_tol, t0 + h * guess)?);
            continue;
        }
        let ji = j as isize;
        let near = near_unexplained(node(ji - 1, &v), f0, f1, node(ji + 2, &v), abs_tol);
        let dips = parabola_dips(node(ji - 1, &v), f0, f1, true) || parabola_dips(f0, f1, node(ji + 2, &v), false);
        if near || dips {
            let (found, ambiguous) = subdivide(f, t0, t1, f0, f1, abs_tol, SUBDIVISION_DEPTH)?;
            roots.extend(found);
            suspicious += ambiguous;
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup();
    Ok(ZeroCountResult { count: roots.len(), roots, suspicious_cells: suspicious, oversample, grid: m, abs_tol })
}

/// Zeros of the local field `S` on `[0, 2 pi)`.
pub fn count_zeros_local(w: &LocalFieldWindow, oversample: usize) -> Result<ZeroCountResult> {
    count_zeros(w, 0.0, TAU, oversample, None)
}

fn checked<F: Field + ?Sized>(f: &F, t: f64) -> Result<f64> {
    let y = f.eval(t);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::Evaluation { t })
    }
}

/// Whether a cell `[y0, y1]` with outer neighbours `ym`, `y2` has an endpoint
/// below `abs_tol` that is not the end of a sign change in the adjacent cell.
fn near_unexplained(ym: f64, y0: f64, y1: f64, y2: f64, abs_tol: f64) -> bool {
    let crossed = |outer: f64, y: f64| outer == 0.0 || (outer < 0.0) != (y < 0.0);
    (y0.abs() < abs_tol && !crossed(ym, y0)) || (y1.abs() < abs_tol && !crossed(y2, y1))
}

/// Whether the parabola through three consecutive nodes has its vertex inside
/// the middle cell with sign opposite to the cell's values. `left` selects the
/// cell `[x1, x2]` of nodes `(x0, x1, x2)`; otherwise the cell is `[x0, x1]`.
fn parabola_dips(y0: f64, y1: f64, y2: f64, left: bool) -> bool {
    // Nodes at s = -1, 0, 1.
    let c2 = 0.5 * (y0 + y2) - y1;
    if c2 == 0.0 {
        return false;
    }
    let c1 = 0.5 * (y2 - y0);
    let s = -c1 / (2.0 * c2);
    let inside = if left { (0.0..=1.0).contains(&s) } else { (-1.0..=0.0).contains(&s) };
    if !inside {
        return false;
    }
    let vertex = y1 - c1 * c1 / (4.0 * c2);
    (vertex < 0.0) != (y1 < 0.0) || vertex == 0.0
}

/// Roots in `[t0, t1)` found by splitting it into eighths, recursing into
/// sub-cells that still look like a close pair of roots. Also returns the
/// number of innermost cells left ambiguous.
fn subdivide<F: Field + ?Sized>(
    f: &F,
    t0: f64,
    t1: f64,
    f0: f64,
    f1: f64,
    abs_tol: f64,
    depth: usize,
) -> Result<(Vec<f64>, usize)> {
    let h = (t1 - t0) / SUBDIVISIONS as f64;
    let mut vals = Vec::with_capacity(SUBDIVISIONS + 1);
    vals.push(f0);
    for i in 1..SUBDIVISIONS {
        vals.push(checked(f, t0 + h * i as f64)?);
    }
    vals.push(f1);
    let mut roots = Vec::new();
    let mut ambiguous = 0;
    for i in 0..SUBDIVISIONS {
        let (a, b) = (vals[i], vals[i + 1]);
        let s = t0 + h * i as f64;
        if a == 0.0 {
            if i > 0 {
                roots.push(s);
            }
            continue;
        }
        if b == 0.0 {
            continue;
        }
        if (a < 0.0) != (b < 0.0) {
            roots.push(refine(f, s, s + h, a, b, abs_tol, s + h * a / (a - b))?);
            continue;
        }
        let outer_a = if i > 0 { vals[i - 1] } else { a };
        let outer_b = if i + 2 <= SUBDIVISIONS { vals[i + 2] } else { b };
        let near = near_unexplained(outer_a, a, b, outer_b, abs_tol);
        let dips = (i > 0 && parabola_dips(vals[i - 1], a, b, true))
            || (i + 2 <= SUBDIVISIONS && parabola_dips(a, b, vals[i + 2], false));
        if depth > 0 && (near || dips) {
            let (r, amb) = subdivide(f, s, s + h, a, b, abs_tol, depth - 1)?;
            roots.extend(r);
            ambiguous += amb;
        } else if near {
            ambiguous += 1;
        }
    }
    let flagged = usize::from(ambiguous > 0 && roots.is_empty());
    Ok((roots, flagged))
}

/// Root in `[0, 1]` of the cubic through values at `s = -1, 0, 1, 2`, given a
/// sign change between `s = 0` and `s = 1`. Falls back to the linear root.
fn cubic_root_guess(ym: f64, y0: f64, y1: f64, y2: f64) -> f64 {
    let linear = y0 / (y0 - y1);
    // Newton form on the nodes -1, 0, 1, 2.
    let d1 = y0 - ym;
    let d2 = 0.5 * (y1 - 2.0 * y0 + ym);
    let d3 = (y2 - 3.0 * y1 + 3.0 * y0 - ym) / 6.0;
    let p = |s: f64| ym + (s + 1.0) * (d1 + s * (d2 + (s - 1.0) * d3));
    let dp = |s: f64| d1 + s * (d2 + (s - 1.0) * d3) + (s + 1.0) * (d2 + (2.0 * s - 1.0) * d3);
    let mut s = linear;
    for _ in 0..4 {
        let slope = dp(s);
        if slope == 0.0 {
            return linear;
        }
        s -= p(s) / slope;
    }
    if s > 0.0 && s < 1.0 {
        s
    } else {
        linear
    }
}

/// Bracketed refinement from an initial guess by the Illinois variant of
/// regula falsi, with a bisection step whenever the bracket fails to halve.
fn refine<F: Field + ?Sized>(
    f: &F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    abs_tol: f64,
    guess: f64,
) -> Result<f64> {
    let mut side = 0i8;
    let mut width = b - a;
    let mut first = Some(guess);
    let mut best = if fa.abs() <= fb.abs() { (a, fa.abs()) } else { (b, fb.abs()) };
    for step in 0..MAX_REFINE_STEPS {
        let falsi = first.take().unwrap_or_else(|| (a * fb - b * fa) / (fb - fa));
        let x = if falsi > a && falsi < b { falsi } else { 0.5 * (a + b) };
        let fx = checked(f, x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.abs() < best.1 {
            best = (x, fx.abs());
        }
        if (fx < 0.0) == (fa < 0.0) {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if fx.abs() < 1e-3 * abs_tol || b - a < ROOT_WIDTH {
            break;
        }
        if step >= 2 && b - a > 0.5 * width {
            let mid = 0.5 * (a + b);
            let fm = checked(f, mid)?;
            if fm == 0.0 {
                return Ok(mid);
            }
            if fm.abs() < best.1 {
                best = (mid, fm.abs());
            }
            if (fm < 0.0) == (fa < 0.0) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
                fb = fm;
            }
            side = 0;
        }
        width = b - a;
    }
    Ok(best.0)
}

/// Largest number of combined innovations per side for exhaustive enumeration.
const MAX_ENUMERATED: usize = 22;

/// Exact `P(|S_n(t)| <= delta)` at angle `X` when `a_k = sum_j c_j e_{k+j}`
/// (likewise `b`) with i.i.d. Rademacher innovations `e`. With `kernel = [1]`
/// this is the i.i.d. Rademacher case.
///
/// Each side contributes a sum over `2^{n+m}` equally likely sign vectors;
/// one side is sorted and the other scanned with binary search.
pub fn rademacher_smallball_exact(n: usize, x: f64, t: f64, delta: f64, kernel: &[f64]) -> Result<f64> {
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    if n > 12 {
        return Err(Error::Resource(format!("exact enumeration needs n <= 12, got {n}")));
    }
    if kernel.is_empty() {
        return Err(Error::Argument("empty kernel".into()));
    }
    let m = kernel.len() - 1;
    if n + m > MAX_ENUMERATED {
        return Err(Error::Resource(format!("n + m = {} exceeds {MAX_ENUMERATED}", n + m)));
    }
    let nf = n as f64;
    let angle = |k: usize| k as f64 * x + k as f64 * t / nf;
    // Loading of innovation i on S: sum over k with k = i - j + 1 in 1..=n.
    let loadings = |trig: fn(f64) -> f64| -> Vec<f64> {
        (0..n + m)
            .map(|i| {
                kernel
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j <= i && i - j < n)
                    .map(|(j, c)| c * trig(angle(i - j + 1)))
                    .sum::<f64>()
                    / nf.sqrt()
            })
            .collect()
    };
    let side_a = signed_sums(&loadings(f64::cos));
    let mut side_b = signed_sums(&loadings(f64::sin));
    side_b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let slack = 1e-12 * (1.0 + delta.abs());
    let hits: u64 = side_a
        .iter()
        .map(|&s| {
            let lo = side_b.partition_point(|&v| v < -delta - s - slack);
            let hi = side_b.partition_point(|&v| v <= delta - s + slack);
            (hi - lo) as u64
        })
        .sum();
    Ok(hits as f64 / (side_a.len() as f64 * side_b.len() as f64))
}

fn signed_sums(w: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0];
    for &wi in w {
        let mut next = Vec::with_capacity(sums.len() * 2);
        for &s in &sums {
            next.push(s + wi);
            next.push(s - wi);
        }
        sums = next;
    }
    sums
}
