//! Fourier coefficients `μ̂_n(s) = ∫ e^{2πist} dμ_n(t)` of the level-`n`
//! approximant, whose density is constant on each level-`n` interval.
//!
//! Writing `T_u(s)` for the subtree sum `Σ_v μ(I_v | I_u) e^{2πis(ℓ_v - ℓ_u)}`
//! over the leaves below `u`,
//!
//! ```text
//! T_u = W0(u) T_{u0} + W1(u) e^{2πis 2^{-|u|-1}} T_{u1},   μ̂_n(s) = 2^n κ_n(s) T_∅,
//! ```
//!
//! with `κ_m(s) = (e^{2πis 2^-m} - 1) / (2πis)`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::cascade::CascadeRealization;
use crate::error::{Error, Result};
use crate::spectral::rho_term;
use crate::weights::WeightLaw;

/// Largest depth for which [`spectrum`] materializes the level as an array.
pub const SPECTRUM_DEPTH_LIMIT: u32 = 24;

/// `s 2^-m mod 1`, exact.
pub(crate) fn turn_fraction(s: u64, m: u32) -> f64 {
    let reduced = if m >= 64 { s } else { s & ((1u64 << m) - 1) };
    reduced as f64 * (-(m as f64)).exp2()
}

/// `(sin πx, cos πx)`, exact at multiples of 1/2 so that dyadic
/// frequencies give exact zeros.
pub(crate) fn sin_cos_pi(x: f64) -> (f64, f64) {
    let r = x.rem_euclid(2.0);
    match r {
        0.0 => (0.0, 1.0),
        0.5 => (1.0, 0.0),
        1.0 => (0.0, -1.0),
        1.5 => (-1.0, 0.0),
        _ => (PI * r).sin_cos(),
    }
}

/// `e^{2πi f}`.
fn turn(f: f64) -> Complex64 {
    let (sin, cos) = sin_cos_pi(2.0 * f);
    Complex64::new(cos, sin)
}

/// `κ_m(s) = (e^{2πis 2^-m} - 1) / (2πis)`, evaluated as
/// `sin(πf) e^{iπf} / (πs)` with `f = s 2^-m mod 1` to avoid cancellation.
pub fn kappa(m: u32, s: u64) -> Complex64 {
    if s == 0 {
        return Complex64::new((-(m as f64)).exp2(), 0.0);
    }
    let f = turn_fraction(s, m);
    let (sin, cos) = sin_cos_pi(f);
    Complex64::new(cos, sin) * (sin / (PI * s as f64))
}

/// `e^{2πis 2^{-(d+1)}}` for `d = 0..n`.
fn twiddles(s: u64, n: u32) -> Vec<Complex64> {
    (0..n).map(|d| turn(turn_fraction(s, d + 1))).collect()
}

/// A Fourier coefficient tagged with its frequency and depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexCoefficient {
    pub s: i64,
    pub n: u32,
    pub re: f64,
    pub im: f64,
}

impl ComplexCoefficient {
    pub fn new(s: i64, n: u32, value: Complex64) -> Self {
        Self { s, n, re: value.re, im: value.im }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn abs2(&self) -> f64 {
        self.value().norm_sqr()
    }
}

fn check_depth(r: &CascadeRealization<'_>, n: u32) -> Result<()> {
    let limit = r.max_depth().min(crate::cascade::TRAVERSAL_DEPTH_LIMIT);
    if n > limit {
        return Err(Error::DepthExceeded { depth: n as usize, limit: limit as usize });
    }
    Ok(())
}

/// `μ̂_n(s)` by the subtree recursion, `O(2^n)` work.
pub fn mu_hat(r: &CascadeRealization<'_>, n: u32, s: u64) -> Result<Complex64> {
    check_depth(r, n)?;
    if s == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let tw = twiddles(s, n);
    let root = subtree_sum(r, 0, 0, n, &tw);
    Ok(root * kappa(n, s) * (n as f64).exp2())
}

/// `μ̂_n(s)` for signed `s`, using `μ̂(-s) = conj μ̂(s)`.
pub fn mu_hat_signed(r: &CascadeRealization<'_>, n: u32, s: i64) -> Result<Complex64> {
    let v = mu_hat(r, n, s.unsigned_abs())?;
    Ok(if s < 0 { v.conj() } else { v })
}

fn subtree_sum(r: &CascadeRealization<'_>, d: u32, i: u64, n: u32, tw: &[Complex64]) -> Complex64 {
    if d == n {
        return Complex64::new(1.0, 0.0);
    }
    let (w0, w1) = r.draw(d, i);
    let left = subtree_sum(r, d + 1, 2 * i, n, tw);
    let right = subtree_sum(r, d + 1, 2 * i + 1, n, tw);
    left * w0 + right * tw[d as usize] * w1
}

/// `μ̂_n(s)` for every `s` in `freqs`, sharing one traversal.
pub fn mu_hat_batch(r: &CascadeRealization<'_>, n: u32, freqs: &[u64]) -> Result<Vec<Complex64>> {
    check_depth(r, n)?;
    let k = freqs.len();
    // tw[d * k + j] = e^{2πi s_j 2^{-(d+1)}}
    let tw: Vec<Complex64> = (0..n).flat_map(|d| freqs.iter().map(move |&s| turn(turn_fraction(s, d + 1)))).collect();
    let mut scratch = vec![vec![Complex64::new(0.0, 0.0); k]; n as usize];
    let mut out = vec![Complex64::new(0.0, 0.0); k];
    batch_sum(r, 0, 0, n, k, &tw, &mut out, &mut scratch);
    Ok(freqs
        .iter()
        .zip(out)
        .map(|(&s, t)| if s == 0 { Complex64::new(1.0, 0.0) } else { t * kappa(n, s) * (n as f64).exp2() })
        .collect())
}

/// Writes the subtree sums of node `(d, i)` into `out`. `scratch[j]` is the
/// right-child buffer for level `d + 1 + j`.
#[allow(clippy::too_many_arguments)]
fn batch_sum(
    r: &CascadeRealization<'_>,
    d: u32,
    i: u64,
    n: u32,
    k: usize,
    tw: &[Complex64],
    out: &mut [Complex64],
    scratch: &mut [Vec<Complex64>],
) {
    if d == n {
        out.fill(Complex64::new(1.0, 0.0));
        return;
    }
    let (w0, w1) = r.draw(d, i);
    let (right, deeper) = scratch.split_first_mut().expect("one buffer per level");
    batch_sum(r, d + 1, 2 * i, n, k, tw, out, deeper);
    batch_sum(r, d + 1, 2 * i + 1, n, k, tw, right, deeper);
    let level = &tw[d as usize * k..(d as usize + 1) * k];
    for j in 0..k {
        out[j] = out[j] * w0 + right[j] * level[j] * w1;
    }
}

/// `μ̂_n(s)` for `s = 0..=s_max` from the exact identity
/// `μ̂_n(s) = 2^n κ_n(s) Σ_k μ(I_k) e^{2πisk/2^n}`; the sum is a length-`2^n`
/// inverse DFT of the level-`n` masses, periodic in `s`.
pub fn spectrum(r: &CascadeRealization<'_>, n: u32, s_max: u64) -> Result<Vec<Complex64>> {
    check_depth(r, n)?;
    if n > SPECTRUM_DEPTH_LIMIT {
        return Err(Error::DepthExceeded { depth: n as usize, limit: SPECTRUM_DEPTH_LIMIT as usize });
    }
    let masses = r.leaf_masses(n)?;
    let len = masses.len();
    let mut buf: Vec<Complex64> = masses.into_iter().map(|m| Complex64::new(m, 0.0)).collect();
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    let scale = len as f64;
    Ok((0..=s_max)
        .map(|s| {
            if s == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                buf[(s % len as u64) as usize] * kappa(n, s) * scale
            }
        })
        .collect())
}

/// `T(u, s, m) = 2 (W0(u) - 1/2) + 2 e^{2πis 2^-m} (W1(u) - 1/2)` for a
/// node at depth `m - 1`.
pub fn t_factor(w0: f64, w1: f64, s: u64, m: u32) -> Complex64 {
    Complex64::new(2.0 * (w0 - 0.5), 0.0) + turn(turn_fraction(s, m)) * (2.0 * (w1 - 0.5))
}

/// How to evaluate a martingale difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceMethod {
    /// `μ̂_m(s) - μ̂_{m-1}(s)`.
    Direct,
    /// `Σ_{|u|=m-1} κ_m(s) e^{2πisℓ_u} Π X(u|_j) T(u, s, m)`.
    Series,
}

/// `D_m(s) = μ̂_m(s) - μ̂_{m-1}(s)`, `m ≥ 1`.
pub fn martingale_difference(
    r: &CascadeRealization<'_>,
    m: u32,
    s: u64,
    method: DifferenceMethod,
) -> Result<Complex64> {
    if m == 0 {
        return Err(Error::ParameterError("martingale differences start at m = 1".into()));
    }
    check_depth(r, m)?;
    match method {
        DifferenceMethod::Direct => {
            // μ̂_0 is the Lebesgue coefficient, zero for s ≥ 1.
            let prev = if m == 1 && s != 0 { Complex64::new(0.0, 0.0) } else { mu_hat(r, m - 1, s)? };
            Ok(mu_hat(r, m, s)? - prev)
        }
        DifferenceMethod::Series => {
            let tw = twiddles(s, m);
            let sum = difference_sum(r, 0, 0, m, s, Complex64::new(1.0, 0.0), 1.0, &tw);
            Ok(sum * kappa(m, s))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn difference_sum(
    r: &CascadeRealization<'_>,
    d: u32,
    i: u64,
    m: u32,
    s: u64,
    phase: Complex64,
    x_prod: f64,
    tw: &[Complex64],
) -> Complex64 {
    let (w0, w1) = r.draw(d, i);
    if d + 1 == m {
        return phase * x_prod * t_factor(w0, w1, s, m);
    }
    let left = difference_sum(r, d + 1, 2 * i, m, s, phase, x_prod * 2.0 * w0, tw);
    let right = difference_sum(r, d + 1, 2 * i + 1, m, s, phase * tw[d as usize], x_prod * 2.0 * w1, tw);
    left + right
}

/// One draw of `Σ_{|u|=n} √Y(u) μ̂_k^{(u)}(1)` together with the top tree's
/// `M2_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DyadicSample {
    pub re: f64,
    pub im: f64,
    pub m2: f64,
}

impl DyadicSample {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// The subtrees below level `n` of a depth-`(n + k)` cascade are independent
/// cascades, and the coefficient at `2^n` factors through them:
/// `Σ_{|u|=n} √Y(u) μ̂_k^{(u)}(1) = (8 E[W0^2])^{-n/2} 2^n μ̂_{n+k}(2^n)`.
pub fn dyadic_sample(law: &WeightLaw, n: u32, k: u32, seed: u64, replica: u64) -> Result<DyadicSample> {
    if k == 0 {
        return Err(Error::ParameterError("inner depth k must be at least 1".into()));
    }
    let r = CascadeRealization::new(law, seed, replica);
    let value = mu_hat(&r, n + k, 1u64 << n)?;
    let norm = (8.0 * law.second_moment()?).powf(-(n as f64) / 2.0) * (n as f64).exp2();
    let m2 = r.martingale_m2(n)?;
    let z = value * norm;
    Ok(DyadicSample { re: z.re, im: z.im, m2 })
}

/// `(Σ_{s=1}^{s_max} (s^α |μ̂_n(s)|)^q)^{2/q}`.
pub fn sobolev_statistic(r: &CascadeRealization<'_>, n: u32, alpha: f64, q: f64, s_max: u64) -> Result<f64> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::ParameterError(format!("alpha = {alpha} must lie in [0, 1/2)")));
    }
    if !(q > 2.0 && q * (1.0 - alpha) > 1.0) {
        return Err(Error::ParameterError(format!("need q > 2 and q (1 - alpha) > 1, got q = {q}, alpha = {alpha}")));
    }
    if s_max == 0 {
        return Err(Error::ParameterError("s_max must be at least 1".into()));
    }
    let coeffs = if n <= SPECTRUM_DEPTH_LIMIT {
        spectrum(r, n, s_max)?
    } else {
        let freqs: Vec<u64> = (0..=s_max).collect();
        mu_hat_batch(r, n, &freqs)?
    };
    let terms: Vec<f64> = (1..=s_max).map(|s| (s as f64).powf(alpha) * coeffs[s as usize].norm()).collect();
    // Factor out the largest term so that high powers neither underflow nor overflow.
    let top = terms.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = terms.iter().map(|t| (t / top).powf(q)).sum();
    Ok(top * top * sum.powf(2.0 / q))
}

/// Smallest depth `n` with `E|μ̂(s) - μ̂_n(s)|^2 ≤ eps^2`.
pub fn depth_for_rms(law: &WeightLaw, s: u64, eps: f64) -> Result<u32> {
    if !(eps > 0.0) || s == 0 {
        return Err(Error::ParameterError("need eps > 0 and s ≥ 1".into()));
    }
    let target = eps * eps;
    let series = crate::spectral::rho_series(law, s, crate::spectral::Truncation::Infinite, 1e-3 * target)?;
    let terms: Vec<f64> = (1..=series.truncation_m).map(|m| rho_term(law, s, m)).collect::<Result<_>>()?;
    let mut tail = series.tail_bound;
    for n in (0..=series.truncation_m).rev() {
        if n < series.truncation_m {
            tail += terms[n as usize];
        }
        if tail > target {
            return Ok(n + 1);
        }
    }
    Ok(0)
}

/// Writes `s,re,im,abs2` rows.
pub fn write_spectrum_csv<W: Write>(coeffs: &[ComplexCoefficient], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "re", "im", "abs2"]).map_err(|e| Error::Io(e.to_string()))?;
    for c in coeffs {
        w.write_record([c.s.to_string(), format!("{:e}", c.re), format!("{:e}", c.im), format!("{:e}", c.abs2())])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
