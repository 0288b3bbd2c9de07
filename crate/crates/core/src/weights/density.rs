//! Weight laws given by a sampled density of `W0` on (0, 1).
//!
//! The table is linearly interpolated between samples. Outside the sampled
//! range each end is extended by a fitted model `C t^β |ln t|^λ` in the
//! distance `t` to the endpoint, which is what decides whether negative
//! moments are finite. The density is then symmetrized,
//! `f(x) = (g(x) + g(1 - x)) / 2`, so that `E[W0] = 1/2` holds exactly.

use crate::error::{Error, Result};
use crate::quadrature;

/// Points used for each endpoint fit.
const TAIL_FIT_POINTS: usize = 4;
/// Sub-cells per interior piece of the sampling table.
const CELLS_PER_PIECE: usize = 64;
/// Smallest weight a sample may take; `1 - w` must stay representable.
pub(crate) const MIN_WEIGHT: f64 = 1.0 / (1u64 << 53) as f64;
/// Fitted exponents this close to a convergence boundary count as on it.
const EXPONENT_TOL: f64 = 1e-6;

/// Endpoint model `C t^β |ln t|^λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub ln_c: f64,
    pub beta: f64,
    pub lambda: f64,
    /// The density vanishes identically next to the endpoint.
    pub vanishing: bool,
}

impl TailModel {
    fn eval(&self, t: f64) -> f64 {
        if self.vanishing || t <= 0.0 {
            return 0.0;
        }
        let lt = t.ln();
        (self.ln_c + self.beta * lt + self.lambda * (-lt).ln()).exp()
    }

    /// `t · model(t)` from `ln t`, usable after `t` itself underflows.
    fn scaled_from_log(&self, ln_t: f64) -> f64 {
        if self.vanishing {
            return 0.0;
        }
        (self.ln_c + (1.0 + self.beta) * ln_t + self.lambda * (-ln_t).ln()).exp()
    }

    /// Whether `∫_0 t^p · model(t) dt` converges.
    fn integrable_with_power(&self, p: f64) -> bool {
        if self.vanishing {
            return true;
        }
        let k = p + self.beta;
        k > -1.0 + EXPONENT_TOL || ((k + 1.0).abs() <= EXPONENT_TOL && self.lambda < -1.0)
    }

    /// Least-squares fit of `ln g = ln C + β ln t + λ ln|ln t|`.
    fn fit(ts: &[f64], gs: &[f64]) -> Self {
        if gs.iter().any(|&g| g <= 0.0) {
            return Self { ln_c: f64::NEG_INFINITY, beta: 0.0, lambda: 0.0, vanishing: true };
        }
        let rows: Vec<[f64; 3]> = ts.iter().map(|&t| [1.0, t.ln(), (-t.ln()).ln()]).collect();
        let ys: Vec<f64> = gs.iter().map(|g| g.ln()).collect();
        if let Some([c, b, l]) = least_squares::<3>(&rows, &ys) {
            if [c, b, l].iter().all(|v| v.is_finite()) {
                // A `1/t` edge is the integrability boundary; keep it exact.
                let b = if (b + 1.0).abs() <= EXPONENT_TOL { -1.0 } else { b };
                return Self { ln_c: c, beta: b, lambda: l, vanishing: false };
            }
        }
        // Too few distinct points for the log factor: plain power law.
        let rows: Vec<[f64; 2]> = ts.iter().map(|&t| [1.0, t.ln()]).collect();
        match least_squares::<2>(&rows, &ys) {
            Some([c, b]) => Self { ln_c: c, beta: b, lambda: 0.0, vanishing: false },
            None => Self { ln_c: ys[0], beta: 0.0, lambda: 0.0, vanishing: false },
        }
    }
}

/// Solves the normal equations of a small linear least-squares problem.
#[allow(clippy::needless_range_loop)]
fn least_squares<const N: usize>(rows: &[[f64; N]], ys: &[f64]) -> Option<[f64; N]> {
    if rows.len() < N {
        return None;
    }
    let mut a = [[0.0; N]; N];
    let mut b = [0.0; N];
    for (r, y) in rows.iter().zip(ys) {
        for i in 0..N {
            b[i] += r[i] * y;
            for j in 0..N {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    let scale = (0..N).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    // Gaussian elimination with partial pivoting.
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for i in (0..N).rev() {
        let s: f64 = (i + 1..N).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CellShape {
    Linear,
    Power,
}

#[derive(Debug, Clone, PartialEq)]
struct Cell {
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
    mass: f64,
    shape: CellShape,
}

impl Cell {
    fn linear(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Self {
        Self { lo, hi, f_lo, f_hi, mass: 0.5 * (hi - lo) * (f_lo + f_hi), shape: CellShape::Linear }
    }

    fn power(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Self {
        let k = power_exponent(lo, hi, f_lo, f_hi);
        let mass = match k {
            None => 0.0,
            Some(k) if (k + 1.0).abs() < 1e-12 => f_hi * hi * (hi / lo).ln(),
            Some(k) => f_hi * hi * (1.0 - (lo / hi).powf(k + 1.0)) / (k + 1.0),
        };
        Self { lo, hi, f_lo, f_hi, mass, shape: CellShape::Power }
    }

    /// Point where the within-cell cumulative mass reaches `r · mass`.
    fn invert(&self, r: f64) -> f64 {
        let h = self.hi - self.lo;
        match self.shape {
            CellShape::Linear => {
                let k = (self.f_hi - self.f_lo) / h;
                let target = r * self.mass;
                let disc = (self.f_lo * self.f_lo + 2.0 * k * target).max(0.0);
                let denom = self.f_lo + disc.sqrt();
                let s = if denom > 0.0 { 2.0 * target / denom } else { r * h };
                self.lo + s.clamp(0.0, h)
            }
            CellShape::Power => match power_exponent(self.lo, self.hi, self.f_lo, self.f_hi) {
                Some(k) if (k + 1.0).abs() >= 1e-12 => {
                    let e = k + 1.0;
                    let q = (self.lo / self.hi).powf(e);
                    self.hi * (q + r * (1.0 - q)).powf(1.0 / e)
                }
                _ => self.lo * (self.hi / self.lo).powf(r),
            },
        }
    }
}

fn power_exponent(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Option<f64> {
    if f_lo <= 0.0 || f_hi <= 0.0 {
        return None;
    }
    Some((f_hi.ln() - f_lo.ln()) / (hi.ln() - lo.ln()))
}

/// A symmetrized, normalized density of `W0` on (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    xs: Vec<f64>,
    gs: Vec<f64>,
    tail_low: TailModel,
    tail_high: TailModel,
    /// Breakpoints of the symmetrized density in (0, 1), sorted.
    breaks: Vec<f64>,
    norm: f64,
    tol: f64,
    cells: Vec<Cell>,
    cumulative: Vec<f64>,
}

impl DensityTable {
    /// Builds a law from samples `(x_i, g_i)`; `x` must be strictly
    /// increasing inside (0, 1) and `g` nonnegative. Needs at least three
    /// points. The table need not be normalized.
    pub fn new(xs: Vec<f64>, gs: Vec<f64>, tol: f64) -> Result<Self> {
        if xs.len() != gs.len() {
            return Err(Error::InvalidLaw("x and density columns differ in length".into()));
        }
        if xs.len() < 3 {
            return Err(Error::InvalidLaw("density table needs at least 3 points".into()));
        }
        if xs.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::InvalidLaw("density abscissae must lie in (0, 1)".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidLaw("density abscissae must be strictly increasing".into()));
        }
        if gs.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
            return Err(Error::InvalidLaw("density values must be finite and nonnegative".into()));
        }
        if gs.iter().all(|&g| g == 0.0) {
            return Err(Error::InvalidLaw("density is identically zero".into()));
        }
        let k = TAIL_FIT_POINTS.min(xs.len());
        let tail_low = TailModel::fit(&xs[..k], &gs[..k]);
        let n = xs.len();
        let ts_high: Vec<f64> = xs[n - k..].iter().rev().map(|x| 1.0 - x).collect();
        let gs_high: Vec<f64> = gs[n - k..].iter().rev().copied().collect();
        let tail_high = TailModel::fit(&ts_high, &gs_high);
        for tail in [&tail_low, &tail_high] {
            if !tail.integrable_with_power(0.0) {
                return Err(Error::InvalidLaw(format!(
                    "fitted endpoint behaviour t^{:.4} |ln t|^{:.4} is not integrable",
                    tail.beta, tail.lambda
                )));
            }
        }
        // Breakpoints of the symmetrized density folded onto (0, 1/2].
        let mut breaks: Vec<f64> =
            xs.iter().map(|&x| if x <= 0.5 { x } else { 1.0 - x }).chain([0.5]).collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
        let mut table = Self {
            xs,
            gs,
            tail_low,
            tail_high,
            breaks,
            norm: 1.0,
            tol,
            cells: Vec::new(),
            cumulative: Vec::new(),
        };
        let mass = table.integrate_kernel(|_, _| 1.0)?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidLaw("density has no usable mass".into()));
        }
        table.norm = mass;
        table.build_sampler();
        if (table.mean()? - 0.5).abs() > 10.0 * tol.max(1e-12) {
            return Err(Error::InvalidLaw("symmetrized density does not have mean 1/2".into()));
        }
        Ok(table)
    }

    pub fn tails(&self) -> (TailModel, TailModel) {
        (self.tail_low, self.tail_high)
    }

    fn raw(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.tail_low.eval(x);
        }
        if x > self.xs[n - 1] {
            return self.tail_high.eval(1.0 - x);
        }
        let i = self.xs.partition_point(|&v| v <= x).clamp(1, n - 1);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let w = (x - x0) / (x1 - x0);
        self.gs[i - 1] * (1.0 - w) + self.gs[i] * w
    }

    /// Table value at `1 - d`, interpolated in the exact distance `d`.
    fn raw_mirrored(&self, d: f64) -> f64 {
        let n = self.xs.len();
        if d < 1.0 - self.xs[n - 1] {
            return self.tail_high.eval(d);
        }
        if 1.0 - d < self.xs[0] {
            return self.tail_low.eval(1.0 - d);
        }
        // Distances to the upper endpoint, decreasing in the table index.
        let i = self.xs.partition_point(|&v| 1.0 - v >= d).clamp(1, n - 1);
        let (d0, d1) = (1.0 - self.xs[i - 1], 1.0 - self.xs[i]);
        let w = (d0 - d) / (d0 - d1);
        self.gs[i - 1] * (1.0 - w) + self.gs[i] * w
    }

    /// Unnormalized symmetrized density at `x ≤ 1/2`.
    fn folded(&self, x: f64) -> f64 {
        0.5 * (self.raw(x) + self.raw_mirrored(x))
    }

    /// Normalized symmetric density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return 0.0;
        }
        self.folded(x.min(1.0 - x)) / self.norm
    }

    /// Unnormalized density at distance `t` from an endpoint, `t` below
    /// the first breakpoint.
    fn edge(&self, t: f64) -> f64 {
        0.5 * (self.tail_low.eval(t) + self.tail_high.eval(t))
    }

    /// Largest `p` with `E[W0^{-p}] < ∞` (the interval is open at `p`).
    pub fn negative_moment_threshold(&self) -> f64 {
        let mut p_star = f64::INFINITY;
        for tail in [self.tail_low, self.tail_high] {
            if !tail.vanishing {
                p_star = p_star.min(1.0 + tail.beta);
            }
        }
        if p_star <= EXPONENT_TOL { 0.0 } else { p_star }
    }

    /// Whether `E[W0^p]` is finite.
    pub fn power_integrable(&self, p: f64) -> bool {
        p >= 0.0 || (self.tail_low.integrable_with_power(p) && self.tail_high.integrable_with_power(p))
    }

    /// Mass of the symmetrized, normalized density touches the endpoints.
    pub fn reaches_endpoints(&self) -> bool {
        !(self.tail_low.vanishing && self.tail_high.vanishing)
    }

    /// Smallest point of the support.
    pub fn support_low(&self) -> f64 {
        if self.reaches_endpoints() {
            return 0.0;
        }
        // Vanishing tails: support starts at the first positive sample of
        // either orientation.
        let first = self.xs.iter().zip(&self.gs).find(|(_, &g)| g > 0.0).map(|(&x, _)| x);
        let last = self.xs.iter().zip(&self.gs).rev().find(|(_, &g)| g > 0.0).map(|(&x, _)| 1.0 - x);
        let lo = first.unwrap_or(0.5).min(last.unwrap_or(0.5));
        // Linear interpolation reaches zero at the previous sample.
        let i = self.xs.partition_point(|&v| v < lo);
        if i > 0 { self.xs[i - 1].min(lo) } else { lo }
    }

    /// `∫_0^1 k(ln x, ln(1-x)) f(x) dx` with `f` the normalized density.
    ///
    /// End pieces are mapped through `t = b e^{-y}` so that power and
    /// logarithmic singularities become exponentially decaying integrands.
    pub fn integrate_kernel<K: Fn(f64, f64) -> f64>(&self, kernel: K) -> Result<f64> {
        let b = self.breaks[0];
        let tol = self.tol;
        let edge = |tol: f64| {
            quadrature::integrate_to_infinity(
                |y: f64| {
                    let ln_t = b.ln() - y;
                    let ln_rest = (-ln_t.exp()).ln_1p();
                    let k = kernel(ln_t, ln_rest) + kernel(ln_rest, ln_t);
                    let scaled = 0.5 * (self.tail_low.scaled_from_log(ln_t) + self.tail_high.scaled_from_log(ln_t));
                    let v = scaled * k;
                    if v.is_finite() { v } else { 0.0 }
                },
                0.0,
                tol,
            )
        };
        let interior = |a: f64, c: f64, tol: f64| {
            quadrature::integrate(
                |x: f64| {
                    let (lx, lr) = (x.ln(), (-x).ln_1p());
                    (kernel(lx, lr) + kernel(lr, lx)) * self.folded(x)
                },
                a,
                c,
                tol,
            )
        };
        let run = |tol: f64| -> Result<f64> {
            let pieces = self.breaks.len() + 1;
            let piece_tol = tol / pieces as f64;
            let mut total = edge(piece_tol)?;
            for w in self.breaks.windows(2) {
                total += interior(w[0], w[1], piece_tol)?;
            }
            Ok(total)
        };
        // First pass fixes the scale, second meets the tolerance relative to it.
        let rough = run(1e-6)?;
        // Relative for large values, absolute below 1: slowly decaying logarithmic
        // tails cannot reach a relative target on tiny integrals.
        let refined = run(tol * rough.abs().max(1.0))?;
        Ok(refined / self.norm)
    }

    pub fn mean(&self) -> Result<f64> {
        self.integrate_kernel(|lx, _| lx.exp())
    }

    fn build_sampler(&mut self) {
        // Sample Z from the density restricted to (0, 1/2]; the law of W0
        // is then Z or 1 - Z with probability 1/2 each.
        let mut cells = Vec::new();
        let b = self.breaks[0];
        // Geometric cells towards zero.
        let mut hi = b;
        let ratio = 0.5f64.powf(0.25);
        let mut f_hi = self.edge(hi);
        while hi > 1e-300 {
            let lo = hi * ratio;
            let f_lo = self.edge(lo);
            cells.push(Cell::power(lo, hi, f_lo, f_hi));
            hi = lo;
            f_hi = f_lo;
        }
        // Whatever mass sits below 1e-300 is lumped into one log-uniform cell.
        let residual = quadrature::integrate_to_infinity(
            |y: f64| {
                let t = (hi.ln() - y).exp();
                t * self.edge(t)
            },
            0.0,
            1e-14,
        )
        .unwrap_or(0.0);
        if residual > 0.0 {
            cells.push(Cell { lo: 1e-308, hi, f_lo: 0.0, f_hi: 0.0, mass: residual, shape: CellShape::Power });
        }
        cells.reverse();
        for w in self.breaks.windows(2) {
            if w[0] >= 0.5 {
                break;
            }
            let (a, c) = (w[0], w[1].min(0.5));
            let h = (c - a) / CELLS_PER_PIECE as f64;
            for j in 0..CELLS_PER_PIECE {
                let lo = a + h * j as f64;
                let hi = if j + 1 == CELLS_PER_PIECE { c } else { lo + h };
                let f = |x: f64| self.folded(x);
                cells.push(Cell::linear(lo, hi, f(lo), f(hi)));
            }
        }
        let mut acc = 0.0;
        self.cumulative = cells
            .iter()
            .map(|c| {
                acc += c.mass;
                acc
            })
            .collect();
        self.cells = cells;
    }

    /// Draws `W0` from two independent uniforms in (0, 1).
    pub fn sample_w0(&self, u: f64, coin: f64) -> f64 {
        let total = *self.cumulative.last().expect("sampler built");
        let target = u * total;
        let i = self.cumulative.partition_point(|&c| c < target).min(self.cells.len() - 1);
        let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        let cell = &self.cells[i];
        let r = if cell.mass > 0.0 { ((target - prev) / cell.mass).clamp(0.0, 1.0) } else { 0.5 };
        let z = cell.invert(r).clamp(MIN_WEIGHT, 0.5);
        if coin < 0.5 { z } else { 1.0 - z }
    }
}
