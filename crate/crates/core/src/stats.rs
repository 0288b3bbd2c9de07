//! Monte Carlo experiments against exact finite-depth oracles.
//!
//! Replica `r` of an experiment with master seed `seed` is the cascade
//! `CascadeRealization::new(law, seed, r)`. Per-replica values are collected
//! in replica order and reduced by pairwise summation, so estimates do not
//! depend on the number of worker threads.

use std::f64::consts::LN_2;
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cascade::CascadeRealization;
use crate::error::{Error, Result};
use crate::ext_real;
use crate::fourier::{dyadic_sample, mu_hat, DyadicSample};
use crate::spectral::{self, rho_series, Truncation};
use crate::weights::WeightLaw;

/// Width of the acceptance band in standard errors.
pub const Z_BAND: f64 = 3.0;

/// Sum in a fixed binary tree over the slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Monte Carlo estimate of a mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSummary {
    pub estimate: f64,
    /// Unbiased sample variance of the per-replica values.
    pub variance: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub master_seed: u64,
    pub wall_time_s: f64,
}

impl McSummary {
    pub fn from_samples(xs: &[f64], master_seed: u64, wall_time_s: f64) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::ParameterError("a summary needs at least 2 replicas".into()));
        }
        let m = mean(xs);
        let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
        let variance = pairwise_sum(&dev) / (xs.len() - 1) as f64;
        Ok(Self {
            estimate: m,
            variance,
            std_error: (variance / xs.len() as f64).sqrt(),
            replicas: xs.len(),
            master_seed,
            wall_time_s,
        })
    }

    /// The summary without its timing, for reproducibility checks.
    pub fn fingerprint(&self) -> [u64; 4] {
        [self.estimate.to_bits(), self.variance.to_bits(), self.std_error.to_bits(), self.replicas as u64]
    }
}

/// `(estimate - oracle) / std_error`; zero when both numerator and
/// standard error vanish.
pub fn z_score(estimate: f64, oracle: f64, std_error: f64) -> f64 {
    let diff = estimate - oracle;
    if diff == 0.0 {
        0.0
    } else if std_error == 0.0 {
        f64::INFINITY.copysign(diff)
    } else {
        diff / std_error
    }
}

/// A Monte Carlo summary next to its exact value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub summary: McSummary,
    pub oracle: f64,
    #[serde(serialize_with = "ext_real::serialize")]
    pub z_score: f64,
    pub within_band: bool,
}

impl Comparison {
    pub fn new(summary: McSummary, oracle: f64) -> Self {
        let z = z_score(summary.estimate, oracle, summary.std_error);
        Self { summary, oracle, z_score: z, within_band: z.abs() <= Z_BAND }
    }
}

fn check_replicas(r: usize, min: usize) -> Result<()> {
    if r < min {
        return Err(Error::ParameterError(format!("need at least {min} replicas, got {r}")));
    }
    Ok(())
}

fn check_depth(n: u32, limit: u32) -> Result<()> {
    if n > limit {
        return Err(Error::DepthExceeded { depth: n as usize, limit: limit as usize });
    }
    Ok(())
}

/// Runs `f` on replicas `0..r` in parallel and returns results in replica order.
fn per_replica<T, F>(r: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..r as u64).into_par_iter().map(&f).collect()
}

fn csv_writer<W: Write>(out: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    Ok(w)
}

fn csv_row<W: Write>(w: &mut csv::Writer<W>, row: &[String]) -> Result<()> {
    w.write_record(row).map_err(|e| Error::Io(e.to_string()))
}

/// `E|μ̂_n(s)|^2` against the partial series sum.
#[derive(Debug, Clone, Serialize)]
pub struct Moment2Report {
    pub n: u32,
    pub s: u64,
    pub result: Comparison,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl Moment2Report {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out, &["replica", "abs2"])?;
        for (i, v) in self.samples.iter().enumerate() {
            csv_row(&mut w, &[i.to_string(), format!("{v:e}")])?;
        }
        Ok(w.flush()?)
    }
}

pub fn moment2_experiment(law: &WeightLaw, n: u32, s: u64, replicas: usize, seed: u64) -> Result<Moment2Report> {
    check_depth(n, 20)?;
    check_replicas(replicas, 100)?;
    let start = Instant::now();
    let samples = per_replica(replicas, |r| Ok(mu_hat(&CascadeRealization::new(law, seed, r), n, s)?.norm_sqr()))?;
    let oracle = if s == 0 { 1.0 } else { rho_series(law, s, Truncation::Finite(n), spectral::DEFAULT_SERIES_TOL)?.value };
    let summary = McSummary::from_samples(&samples, seed, start.elapsed().as_secs_f64())?;
    Ok(Moment2Report { n, s, result: Comparison::new(summary, oracle), samples })
}

/// `E[μ̂_n(1)^2]` against `ϖ`.
#[derive(Debug, Clone, Serialize)]
pub struct VarpiReport {
    pub n: u32,
    pub re: Comparison,
    pub im: Comparison,
    #[serde(skip)]
    pub samples: Vec<Complex64>,
}

impl VarpiReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out, &["replica", "re", "im"])?;
        for (i, v) in self.samples.iter().enumerate() {
            csv_row(&mut w, &[i.to_string(), format!("{:e}", v.re), format!("{:e}", v.im)])?;
        }
        Ok(w.flush()?)
    }
}

pub fn varpi_experiment(law: &WeightLaw, n: u32, replicas: usize, seed: u64) -> Result<VarpiReport> {
    if n < 2 {
        return Err(Error::ParameterError("ϖ is the second moment from depth 2 on".into()));
    }
    check_depth(n, 20)?;
    check_replicas(replicas, 100)?;
    let start = Instant::now();
    let samples = per_replica(replicas, |r| {
        let v = mu_hat(&CascadeRealization::new(law, seed, r), n, 1)?;
        Ok(v * v)
    })?;
    let t = start.elapsed().as_secs_f64();
    let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
    let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
    Ok(VarpiReport {
        n,
        re: Comparison::new(McSummary::from_samples(&re, seed, t)?, spectral::varpi(law)?),
        im: Comparison::new(McSummary::from_samples(&im, seed, t)?, 0.0),
        samples,
    })
}

/// Ordinary least squares `y = a + b x` with heteroskedasticity-robust
/// (HC0) standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::ParameterError("a linear fit needs at least 3 paired points".into()));
    }
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let sxx = pairwise_sum(&dx.iter().map(|d| d * d).collect::<Vec<_>>());
    if sxx == 0.0 {
        return Err(Error::ParameterError("regressor has no spread".into()));
    }
    let sxy = pairwise_sum(&dx.iter().zip(y).map(|(d, v)| d * (v - my)).collect::<Vec<_>>());
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    // Sandwich estimator with the centred design.
    let slope_var = pairwise_sum(&dx.iter().zip(&resid).map(|(d, e)| d * d * e * e).collect::<Vec<_>>()) / (sxx * sxx);
    let w: Vec<f64> = dx.iter().map(|d| 1.0 / n - mx * d / sxx).collect();
    let intercept_var = pairwise_sum(&w.iter().zip(&resid).map(|(wi, e)| wi * wi * e * e).collect::<Vec<_>>());
    Ok(LinearFit { intercept, slope, intercept_se: intercept_var.sqrt(), slope_se: slope_var.sqrt() })
}

/// Covariance of the rescaled coefficient at dyadic frequency `2^n` and its
/// conditional structure given the top `n` levels.
#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub n: u32,
    pub k: u32,
    pub replicas: usize,
    pub master_seed: u64,
    /// `E[(Re Z)^2]` against `(ϱ_k + ϖ)/2`; `Z` has mean zero exactly.
    pub var_re: Comparison,
    /// `E[(Im Z)^2]` against `(ϱ_k - ϖ)/2`.
    pub var_im: Comparison,
    pub cov_re_im: Comparison,
    pub rho_k: f64,
    pub varpi: f64,
    /// `|Z|^2` regressed on `M2_n`: slope against `ϱ_k`, intercept against 0.
    pub regression: LinearFit,
    #[serde(serialize_with = "ext_real::serialize")]
    pub slope_z: f64,
    #[serde(serialize_with = "ext_real::serialize")]
    pub intercept_z: f64,
    /// `Σ |Z|^2 / Σ M2_n`, the fit through the origin.
    pub slope_through_origin: f64,
    #[serde(skip)]
    pub samples: Vec<DyadicSample>,
}

impl CltReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out, &["replica", "re", "im", "m2"])?;
        for (i, z) in self.samples.iter().enumerate() {
            csv_row(&mut w, &[i.to_string(), format!("{:e}", z.re), format!("{:e}", z.im), format!("{:e}", z.m2)])?;
        }
        Ok(w.flush()?)
    }

    pub fn passes(&self) -> bool {
        self.var_re.within_band
            && self.var_im.within_band
            && self.cov_re_im.within_band
            && self.slope_z.abs() <= Z_BAND
            && self.intercept_z.abs() <= Z_BAND
    }
}

pub fn clt_experiment(law: &WeightLaw, n: u32, k: u32, replicas: usize, seed: u64) -> Result<CltReport> {
    check_depth(n + k, 24)?;
    check_replicas(replicas, 500)?;
    let start = Instant::now();
    let samples = per_replica(replicas, |r| dyadic_sample(law, n, k, seed, r))?;
    let t = start.elapsed().as_secs_f64();
    let constants = spectral::clt_covariance_at_depth(law, k)?;
    let re2: Vec<f64> = samples.iter().map(|z| z.re * z.re).collect();
    let im2: Vec<f64> = samples.iter().map(|z| z.im * z.im).collect();
    let cross: Vec<f64> = samples.iter().map(|z| z.re * z.im).collect();
    let abs2: Vec<f64> = samples.iter().map(|z| z.re * z.re + z.im * z.im).collect();
    let m2: Vec<f64> = samples.iter().map(|z| z.m2).collect();
    let regression = linear_fit(&m2, &abs2)?;
    Ok(CltReport {
        n,
        k,
        replicas,
        master_seed: seed,
        var_re: Comparison::new(McSummary::from_samples(&re2, seed, t)?, constants.sigma_re),
        var_im: Comparison::new(McSummary::from_samples(&im2, seed, t)?, constants.sigma_im),
        cov_re_im: Comparison::new(McSummary::from_samples(&cross, seed, t)?, 0.0),
        rho_k: constants.rho,
        varpi: constants.varpi,
        slope_z: z_score(regression.slope, constants.rho, regression.slope_se),
        intercept_z: z_score(regression.intercept, 0.0, regression.intercept_se),
        slope_through_origin: pairwise_sum(&abs2) / pairwise_sum(&m2),
        regression,
        samples,
    })
}

/// Linear-interpolated empirical quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() { sorted[i] * (1.0 - frac) + sorted[i + 1] * frac } else { sorted[i] }
}

pub const M2_QUANTILES: [f64; 5] = [0.01, 0.1, 0.5, 0.9, 0.99];

#[derive(Debug, Clone, Serialize)]
pub struct M2Report {
    pub n: u32,
    pub mean: Comparison,
    /// Quantiles at [`M2_QUANTILES`].
    pub quantiles: Vec<f64>,
    pub eps: f64,
    pub fraction_below_eps: f64,
    pub fraction_se: f64,
    /// `(1/n) ln sup_{|u|=n} Y(u)` against its limit.
    pub log_sup_y_rate: Comparison,
    #[serde(skip)]
    pub samples: Vec<(f64, f64)>,
}

impl M2Report {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out, &["replica", "m2", "log_sup_y_over_n"])?;
        for (i, (m, y)) in self.samples.iter().enumerate() {
            csv_row(&mut w, &[i.to_string(), format!("{m:e}"), format!("{y:e}")])?;
        }
        Ok(w.flush()?)
    }
}

pub fn m2_experiment(law: &WeightLaw, n: u32, replicas: usize, seed: u64, eps: f64) -> Result<M2Report> {
    check_depth(n, 24)?;
    check_replicas(replicas, 2)?;
    if n == 0 {
        return Err(Error::ParameterError("depth must be at least 1".into()));
    }
    let start = Instant::now();
    let samples = per_replica(replicas, |r| {
        let (m2, sup) = CascadeRealization::new(law, seed, r).m2_and_sup_y(n)?;
        Ok((m2, sup.ln() / n as f64))
    })?;
    let t = start.elapsed().as_secs_f64();
    let m2: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let rates: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let mut sorted = m2.clone();
    sorted.sort_by(f64::total_cmp);
    let below = m2.iter().filter(|&&v| v < eps).count() as f64 / replicas as f64;
    Ok(M2Report {
        n,
        mean: Comparison::new(McSummary::from_samples(&m2, seed, t)?, 1.0),
        quantiles: M2_QUANTILES.iter().map(|&q| quantile(&sorted, q)).collect(),
        eps,
        fraction_below_eps: below,
        fraction_se: (below * (1.0 - below) / replicas as f64).sqrt(),
        log_sup_y_rate: Comparison::new(McSummary::from_samples(&rates, seed, t)?, spectral::supy_rate(law)?.value),
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthRow {
    pub depth: u32,
    /// Replica mean of `min_S / (n ln 2)`.
    pub min_slope: f64,
    pub min_slope_se: f64,
    /// Replica mean of `max_S / (n ln 2)`.
    pub max_slope: f64,
    pub max_slope_se: f64,
    /// Largest `ln μ(I)_max + n γ+ ln 2` over replicas.
    pub max_excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    pub rows: Vec<DepthRow>,
    /// `a + b ln(n)/n` fitted to the mean min-side slopes; `a` estimates `γ+`.
    pub gamma_plus_fit: LinearFit,
    pub gamma_minus_fit: LinearFit,
    pub gamma_plus_oracle: f64,
    #[serde(serialize_with = "ext_real::serialize")]
    pub gamma_minus_oracle: f64,
    /// `ln C` with `C` the smallest constant for which `max μ(I) ≤ C 2^{-n γ+}`
    /// holds at every depth but the deepest.
    pub frostman_ln_c: f64,
    /// Whether the fitted bound also holds at the deepest level.
    pub frostman_holds: bool,
    /// The oracle exponent is a boundary limit, so no sharpness claim is made.
    pub skipped_sharpness: bool,
    pub replicas: usize,
    pub master_seed: u64,
    #[serde(skip)]
    pub samples: Vec<Vec<(f64, f64)>>,
}

impl HolderReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out, &["replica", "depth", "min_s", "max_s"])?;
        for (r, per_depth) in self.samples.iter().enumerate() {
            for (row, (lo, hi)) in self.rows.iter().zip(per_depth) {
                csv_row(&mut w, &[r.to_string(), row.depth.to_string(), format!("{lo:e}"), format!("{hi:e}")])?;
            }
        }
        Ok(w.flush()?)
    }
}

pub fn holder_experiment(law: &WeightLaw, depths: &[u32], replicas: usize, seed: u64) -> Result<HolderReport> {
    let max_depth = *depths.iter().max().ok_or_else(|| Error::ParameterError("no depths given".into()))?;
    check_depth(max_depth, 26)?;
    check_replicas(replicas, 2)?;
    if depths.contains(&0) || depths.len() < 3 {
        return Err(Error::ParameterError("need at least 3 positive depths".into()));
    }
    let samples = per_replica(replicas, |r| {
        let profile = CascadeRealization::new(law, seed, r).extremal_profile(max_depth)?;
        Ok(depths.iter().map(|&d| (profile[d as usize].min_s, profile[d as usize].max_s)).collect::<Vec<_>>())
    })?;
    let gp = spectral::gamma_plus(law)?;
    let gm = spectral::gamma_minus(law)?;
    let mut rows = Vec::with_capacity(depths.len());
    for (j, &d) in depths.iter().enumerate() {
        let scale = d as f64 * LN_2;
        let lo: Vec<f64> = samples.iter().map(|s| s[j].0 / scale).collect();
        let hi: Vec<f64> = samples.iter().map(|s| s[j].1 / scale).collect();
        let lo_s = McSummary::from_samples(&lo, seed, 0.0)?;
        let hi_s = McSummary::from_samples(&hi, seed, 0.0)?;
        rows.push(DepthRow {
            depth: d,
            min_slope: lo_s.estimate,
            min_slope_se: lo_s.std_error,
            max_slope: hi_s.estimate,
            max_slope_se: hi_s.std_error,
            // ln(max mass) + n γ+ ln 2 = n γ+ ln 2 - min_S.
            max_excess: samples.iter().map(|s| scale * gp.value - s[j].0).fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let x: Vec<f64> = depths.iter().map(|&d| (d as f64).ln() / d as f64).collect();
    let gamma_plus_fit = linear_fit(&x, &rows.iter().map(|r| r.min_slope).collect::<Vec<_>>())?;
    let gamma_minus_fit = linear_fit(&x, &rows.iter().map(|r| r.max_slope).collect::<Vec<_>>())?;
    let deepest = rows.iter().max_by_key(|r| r.depth).expect("depths is non-empty").depth;
    let frostman_ln_c =
        rows.iter().filter(|r| r.depth != deepest).map(|r| r.max_excess).fold(f64::NEG_INFINITY, f64::max);
    let frostman_holds = rows.iter().filter(|r| r.depth == deepest).all(|r| r.max_excess <= frostman_ln_c);
    Ok(HolderReport {
        rows,
        gamma_plus_fit,
        gamma_minus_fit,
        gamma_plus_oracle: gp.value,
        gamma_minus_oracle: gm.value,
        frostman_ln_c,
        frostman_holds,
        skipped_sharpness: !gp.attained,
        replicas,
        master_seed: seed,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelEstimate {
    pub level: u32,
    pub result: Comparison,
}

#[derive(Debug, Clone, Serialize)]
pub struct FdimReport {
    pub inner_depth: u32,
    pub levels: Vec<LevelEstimate>,
    /// Slope of `log2 E|μ̂(2^j)|^2` against `j` from the Monte Carlo means.
    pub mc_slope: f64,
    /// Standard error of `mc_slope` by propagating the per-level errors.
    pub mc_slope_se: f64,
    /// Same regression on the exact finite-depth values.
    pub oracle_slope: f64,
    /// Same regression on the infinite-depth series.
    pub limit_slope: f64,
    pub d_f: f64,
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

impl FdimReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out, &["level", "replica", "abs2"])?;
        for (lv, xs) in self.levels.iter().zip(&self.samples) {
            for (r, v) in xs.iter().enumerate() {
                csv_row(&mut w, &[lv.level.to_string(), r.to_string(), format!("{v:e}")])?;
            }
        }
        Ok(w.flush()?)
    }
}

/// Plain least-squares slope, for exact data.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Exact regression of `log2 E|μ̂(2^j)|^2` on `j`; `inner_depth = None`
/// uses the infinite series.
pub fn oracle_fdim_slope(law: &WeightLaw, levels: &[u32], inner_depth: Option<u32>) -> Result<f64> {
    if levels.len() < 2 {
        return Err(Error::ParameterError("need at least 2 levels".into()));
    }
    let x: Vec<f64> = levels.iter().map(|&j| j as f64).collect();
    let y = levels
        .iter()
        .map(|&j| {
            let upto = inner_depth.map_or(Truncation::Infinite, |k| Truncation::Finite(j + k));
            Ok(rho_series(law, 1u64 << j, upto, 1e-16)?.value.log2())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(slope(&x, &y))
}

/// Monte Carlo estimate of `E|μ̂_{j+k}(2^j)|^2` for each level `j` and the
/// slope of its base-2 logarithm, which should be `-D_F`.
pub fn fdim_fit(law: &WeightLaw, inner_depth: u32, levels: &[u32], replicas: usize, seed: u64) -> Result<FdimReport> {
    if levels.len() < 2 {
        return Err(Error::ParameterError("need at least 2 levels".into()));
    }
    check_depth(levels.iter().max().expect("non-empty") + inner_depth, 24)?;
    check_replicas(replicas, 2)?;
    let mut out = Vec::with_capacity(levels.len());
    let mut samples = Vec::with_capacity(levels.len());
    for &j in levels {
        let start = Instant::now();
        let n = j + inner_depth;
        // Each level gets its own block of replica indices.
        let xs = per_replica(replicas, |r| {
            Ok(mu_hat(&CascadeRealization::new(law, seed, ((j as u64) << 32) | r), n, 1u64 << j)?.norm_sqr())
        })?;
        let oracle = rho_series(law, 1u64 << j, Truncation::Finite(n), 1e-16)?.value;
        let summary = McSummary::from_samples(&xs, seed, start.elapsed().as_secs_f64())?;
        out.push(LevelEstimate { level: j, result: Comparison::new(summary, oracle) });
        samples.push(xs);
    }
    let x: Vec<f64> = levels.iter().map(|&j| j as f64).collect();
    let y: Vec<f64> = out.iter().map(|l| l.result.summary.estimate.log2()).collect();
    let mx = mean(&x);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    // Delta method: sd(log2 X̄) ≈ SE / (X̄ ln 2); levels are independent.
    let var: f64 = x
        .iter()
        .zip(&out)
        .map(|(a, l)| {
            let s = l.result.summary;
            let sd = s.std_error / (s.estimate * LN_2);
            ((a - mx) / sxx).powi(2) * sd * sd
        })
        .sum();
    Ok(FdimReport {
        inner_depth,
        mc_slope: slope(&x, &y),
        mc_slope_se: var.sqrt(),
        oracle_slope: oracle_fdim_slope(law, levels, Some(inner_depth))?,
        limit_slope: oracle_fdim_slope(law, levels, None)?,
        d_f: spectral::fourier_dimension(law)?,
        levels: out,
        samples,
    })
}

/// Replica mean of the Sobolev statistic at one depth.
pub fn sobolev_experiment(
    law: &WeightLaw,
    n: u32,
    alpha: f64,
    q: f64,
    s_max: u64,
    replicas: usize,
    seed: u64,
) -> Result<McSummary> {
    check_replicas(replicas, 2)?;
    let start = Instant::now();
    let xs = per_replica(replicas, |r| {
        crate::fourier::sobolev_statistic(&CascadeRealization::new(law, seed, r), n, alpha, q, s_max)
    })?;
    McSummary::from_samples(&xs, seed, start.elapsed().as_secs_f64())
}
