//! Adaptive Gauss–Legendre quadrature with interval bisection.
//!
//! Each interval is estimated twice, once with a single 15-point rule and
//! once with the rule applied to both halves; the difference is the error
//! estimate. The interval with the largest error is split until the summed
//! error meets the absolute tolerance.

use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 15;
const MAX_INTERVALS: usize = 20_000;

fn gauss_legendre_rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        for i in 0..n {
            // Chebyshev guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// Value and derivative of the Legendre polynomial of degree `n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn fixed_rule<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn estimate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let whole = fixed_rule(f, a, b);
    let m = 0.5 * (a + b);
    let halves = fixed_rule(f, a, m) + fixed_rule(f, m, b);
    Piece { a, b, value: halves, error: (whole - halves).abs() }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::DomainError(format!("non-finite interval [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    let first = estimate(&f, a, b);
    let mut total = first.value;
    let mut err = first.error;
    heap.push(first);
    while err > abs_tol {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureFailure(format!(
                "error estimate {err:.3e} above tolerance {abs_tol:.1e} after {MAX_INTERVALS} intervals"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // Interval can no longer be bisected in floating point.
            return Err(Error::QuadratureFailure("interval collapsed during bisection".into()));
        }
        let left = estimate(&f, worst.a, m);
        let right = estimate(&f, m, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if !total.is_finite() {
            return Err(Error::QuadratureFailure("non-finite integrand value".into()));
        }
    }
    // Re-sum from scratch to shed the running-update rounding.
    Ok(heap.iter().map(|p| p.value).sum())
}

/// Integrates over `[a, b]` an integrand that may blow up like a power at
/// either endpoint. `f` receives the distances `(x - a, b - x)`, both
/// computed without cancellation. Each half is mapped through
/// `x = endpoint ± h t²`, which turns `x^p` with `p > -1/2` into a bounded
/// integrand.
pub fn integrate_endpoint_singular<F: Fn(f64, f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    integrate_endpoint_singular_with(f, a, b, abs_tol, 2)
}

/// As [`integrate_endpoint_singular`] with `x = endpoint ± h t^k`; an
/// endpoint behaviour `x^p` becomes bounded once `k (p + 1) ≥ 1`.
pub fn integrate_endpoint_singular_with<F: Fn(f64, f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    k: i32,
) -> Result<f64> {
    let h = 0.5 * (b - a);
    let kf = k as f64;
    let side = |t: f64, left: bool| {
        let d = h * t.powi(k);
        if d <= 0.0 {
            return 0.0;
        }
        let jac = kf * h * t.powi(k - 1);
        if left { jac * f(d, 2.0 * h - d) } else { jac * f(2.0 * h - d, d) }
    };
    let left = integrate(|t| side(t, true), 0.0, 1.0, 0.5 * abs_tol)?;
    let right = integrate(|t| side(t, false), 0.0, 1.0, 0.5 * abs_tol)?;
    Ok(left + right)
}

/// Integrates `f` over `[a, ∞)` via `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64) -> Result<f64> {
    integrate(
        |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s) / (s * s);
            if v.is_finite() { v } else { 0.0 }
        },
        0.0,
        1.0,
        abs_tol,
    )
}
