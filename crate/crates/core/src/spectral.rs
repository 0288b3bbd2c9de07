//! Closed-form spectral constants of the cascade and the Frostman exponents.
//!
//! With `M = 8 E[W0^2]`, the level-`m` martingale difference of the Fourier
//! coefficient at frequency `s` has second moment
//!
//! ```text
//! E|D_m(s)|^2 = Var[W0] |e^{2πi s 2^-m} - 1|^4 M^{m-1} / (π s)^2
//! ```
//!
//! and these terms are orthogonal, so their partial sums are the exact
//! second moments `E|μ̂_m(s)|^2`.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext_real;
use crate::fourier::sin_cos_pi;
use crate::optimize::minimize_log_scale;
use crate::weights::WeightLaw;

/// Upper end of the search range for both exponents.
pub const P_MAX: f64 = 1e6;
const GRID_POINTS: usize = 241;
const SOLVER_REL_TOL: f64 = 1e-10;
/// Flatness below which the objective counts as still decreasing at `P_MAX`.
const BOUNDARY_FLAT_TOL: f64 = 1e-12;
/// Series tolerance for the assembled constants, well below their use.
pub const DEFAULT_SERIES_TOL: f64 = 1e-15;
/// Hard stop for the infinite series; the bound is reported if it is hit.
const SERIES_MAX_TERMS: u32 = 2000;

/// `D_F = log2(1 / (2 E[W0^2]))`.
pub fn fourier_dimension(law: &WeightLaw) -> Result<f64> {
    Ok(-(2.0 * law.second_moment()?).log2())
}

/// `E|D_m(s)|^2` for `m ≥ 1`, `s ≥ 1`.
pub fn rho_term(law: &WeightLaw, s: u64, m: u32) -> Result<f64> {
    let var = law.variance()?;
    let big_m = 8.0 * law.second_moment()?;
    Ok(term(var, big_m, s, m))
}

fn term(var: f64, big_m: f64, s: u64, m: u32) -> f64 {
    // |e^{iθ} - 1| = 2 |sin(θ/2)|.
    let (sin, _) = sin_cos_pi(crate::fourier::turn_fraction(s, m));
    let sf = s as f64;
    var * 16.0 * sin.powi(4) * big_m.powi(m as i32 - 1) / (PI * PI * sf * sf)
}

/// How far to sum the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Partial sum `m = 1..=m_max`, equal to `E|μ̂_{m_max}(s)|^2`.
    Finite(u32),
    /// Sum until the tail bound drops below the tolerance.
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoSeries {
    pub value: f64,
    /// Last term included.
    pub truncation_m: u32,
    /// Upper bound on the omitted terms `m > truncation_m`.
    pub tail_bound: f64,
}

/// `Σ_m E|D_m(s)|^2`, either to a fixed depth or to convergence.
pub fn rho_series(law: &WeightLaw, s: u64, upto: Truncation, tol: f64) -> Result<RhoSeries> {
    if s == 0 {
        return Err(Error::ParameterError("the series is defined for s ≥ 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::ParameterError(format!("series tolerance {tol} must be positive")));
    }
    let var = law.variance()?;
    let second = law.second_moment()?;
    let big_m = 8.0 * second;
    let last = match upto {
        Truncation::Finite(m) => m,
        Truncation::Infinite => SERIES_MAX_TERMS,
    };
    let mut value = 0.0;
    let mut m = 0;
    let mut tail_bound = f64::INFINITY;
    while m < last {
        m += 1;
        let t = term(var, big_m, s, m);
        value += t;
        tail_bound = tail_after(second, s, m, t);
        if upto == Truncation::Infinite && tail_bound < tol {
            break;
        }
    }
    Ok(RhoSeries { value, truncation_m: m, tail_bound })
}

/// Bound on `Σ_{j > m}` given the `m`-th term. Once `s < 2^m` the ratio of
/// consecutive terms is `E[W0^2] / (2 cos^4(π s 2^{-m-1}))`, which only
/// decreases afterwards, so a geometric bound with the current ratio holds.
fn tail_after(second: f64, s: u64, m: u32, term_m: f64) -> f64 {
    if m < 64 && s >= 1u64 << m {
        return f64::INFINITY;
    }
    let (_, cos) = sin_cos_pi(0.5 * (s as f64) * (-(m as f64)).exp2());
    let r = second / (2.0 * cos.powi(4));
    if r >= 1.0 {
        return f64::INFINITY;
    }
    term_m * r / (1.0 - r)
}

/// `ϖ = E[μ̂(1)^2] = -16 Var[W0] (1 - 2 E[W0^2]) / π^2`.
pub fn varpi(law: &WeightLaw) -> Result<f64> {
    let var = law.variance()?;
    Ok(-16.0 * var * (1.0 - 2.0 * law.second_moment()?) / (PI * PI))
}

/// `D_F`, `ϱ`, `ϖ` and the diagonal of the limiting covariance
/// `Σ = diag(ϱ + ϖ, ϱ - ϖ) / 2` of the rescaled coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralConstants {
    pub d_f: f64,
    pub rho: f64,
    pub varpi: f64,
    pub sigma_re: f64,
    pub sigma_im: f64,
    pub truncation_m: u32,
    pub truncation_error: f64,
}

impl SpectralConstants {
    fn assemble(d_f: f64, series: RhoSeries, varpi: f64) -> Result<Self> {
        let rho = series.value;
        if varpi.abs() >= rho {
            return Err(Error::ConsistencyError(format!("|ϖ| = {} is not below ϱ = {rho}", varpi.abs())));
        }
        Ok(Self {
            d_f,
            rho,
            varpi,
            sigma_re: 0.5 * (rho + varpi),
            sigma_im: 0.5 * (rho - varpi),
            truncation_m: series.truncation_m,
            truncation_error: series.tail_bound,
        })
    }
}

pub fn clt_covariance(law: &WeightLaw) -> Result<SpectralConstants> {
    let series = rho_series(law, 1, Truncation::Infinite, DEFAULT_SERIES_TOL)?;
    SpectralConstants::assemble(fourier_dimension(law)?, series, varpi(law)?)
}

/// As [`clt_covariance`] with `ϱ` replaced by its depth-`k` truncation, the
/// exact covariance of samples built on inner depth `k ≥ 2`.
pub fn clt_covariance_at_depth(law: &WeightLaw, k: u32) -> Result<SpectralConstants> {
    let series = rho_series(law, 1, Truncation::Finite(k), DEFAULT_SERIES_TOL)?;
    let varpi = if k >= 2 { varpi(law)? } else { -rho_term(law, 1, 1)? };
    SpectralConstants::assemble(fourier_dimension(law)?, series, varpi)
}

/// Value and location of an optimal exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentResult {
    #[serde(serialize_with = "ext_real::serialize")]
    pub value: f64,
    /// Optimizing argument; `+∞` for boundary limits.
    #[serde(serialize_with = "ext_real::serialize")]
    pub argmin_p: f64,
    /// False when the optimum is only approached in a limit.
    pub attained: bool,
    #[serde(serialize_with = "ext_real::serialize_pair")]
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// `γ+ = sup_{p>0} -φ(p) / (p ln 2)`.
///
/// The supremum is over `p ≥ 1`: for `p < 1`, `φ(p) > 0`. When the objective
/// still decreases at `P_MAX` the result is the limit `-log2 ess sup max(W0, W1)`.
pub fn gamma_plus(law: &WeightLaw) -> Result<ExponentResult> {
    let objective = |p: f64| law.phi(p).map(|v| v / (p * LN_2)).unwrap_or(f64::NAN);
    let min = minimize_log_scale(objective, 1.0, P_MAX, GRID_POINTS, SOLVER_REL_TOL, BOUNDARY_FLAT_TOL);
    if min.upper_boundary {
        return Ok(ExponentResult {
            value: -law.ess_sup_max().log2(),
            argmin_p: f64::INFINITY,
            attained: false,
            bracket: min.bracket,
            iterations: min.iterations,
        });
    }
    Ok(ExponentResult {
        value: -min.value,
        argmin_p: min.x,
        attained: true,
        bracket: min.bracket,
        iterations: min.iterations,
    })
}

/// `γ- = inf_{p>0} log2 E[W0^{-p} + W1^{-p}] / p`, `+∞` when no negative
/// moment is finite.
pub fn gamma_minus(law: &WeightLaw) -> Result<ExponentResult> {
    let p_star = law.negative_moment_threshold();
    if p_star <= 0.0 {
        return Ok(ExponentResult {
            value: f64::INFINITY,
            argmin_p: f64::NAN,
            attained: false,
            bracket: (0.0, 0.0),
            iterations: 0,
        });
    }
    let hi = p_star.min(P_MAX);
    let lo = 1e-4 * hi.min(1.0);
    let objective = |p: f64| law.phi(-p).map(|v| v / (p * LN_2)).unwrap_or(f64::NAN);
    let min = minimize_log_scale(objective, lo, hi, GRID_POINTS, SOLVER_REL_TOL, BOUNDARY_FLAT_TOL);
    if min.upper_boundary {
        let (value, argmin_p) = if p_star.is_infinite() {
            (-law.ess_inf_min().log2(), f64::INFINITY)
        } else {
            (min.value, hi)
        };
        return Ok(ExponentResult { value, argmin_p, attained: false, bracket: min.bracket, iterations: min.iterations });
    }
    if min.lower_boundary {
        return Err(Error::ConsistencyError("γ- objective decreasing towards p = 0".into()));
    }
    Ok(ExponentResult {
        value: min.value,
        argmin_p: min.x,
        attained: true,
        bracket: min.bracket,
        iterations: min.iterations,
    })
}

/// `ψ(1) - ψ'(1)` for `ψ(β) = φ(2β)`, i.e. `φ(2) - 2 φ'(2)`.
pub fn biggins_margin(law: &WeightLaw) -> Result<f64> {
    Ok(law.phi(2.0)? - 2.0 * law.phi_prime(2.0)?)
}

/// `lim sup (1/n) ln sup_{|u|=n} Y(u) = inf_{β>0} φ(2β)/β - φ(2)`.
///
/// For laws with a largest atom the infimum may sit at `β → ∞`, where the
/// objective tends to `2 ln ess sup max(W0, W1)`.
pub fn supy_rate(law: &WeightLaw) -> Result<ExponentResult> {
    let phi2 = law.phi(2.0)?;
    let objective = |b: f64| law.phi(2.0 * b).map(|v| v / b).unwrap_or(f64::NAN);
    let min = minimize_log_scale(objective, 1e-3, 1e3, GRID_POINTS, SOLVER_REL_TOL, BOUNDARY_FLAT_TOL);
    if min.upper_boundary {
        return Ok(ExponentResult {
            value: 2.0 * law.ess_sup_max().ln() - phi2,
            argmin_p: f64::INFINITY,
            attained: false,
            bracket: min.bracket,
            iterations: min.iterations,
        });
    }
    Ok(ExponentResult {
        value: min.value - phi2,
        argmin_p: min.x,
        attained: true,
        bracket: min.bracket,
        iterations: min.iterations,
    })
}

/// Everything `dims` reports for one law.
#[derive(Debug, Clone, Serialize)]
pub struct DimsReport {
    pub law: String,
    #[serde(rename = "D_F")]
    pub d_f: f64,
    pub rho: f64,
    pub varpi: f64,
    pub sigma_re: f64,
    pub sigma_im: f64,
    pub gamma_plus: ExponentResult,
    pub gamma_minus: ExponentResult,
    pub biggins_margin: f64,
    #[serde(rename = "supY_rate")]
    pub supy_rate: f64,
    pub truncation: RhoSeries,
}

pub fn dims_report(law: &WeightLaw) -> Result<DimsReport> {
    let c = clt_covariance(law)?;
    Ok(DimsReport {
        law: law.label(),
        d_f: c.d_f,
        rho: c.rho,
        varpi: c.varpi,
        sigma_re: c.sigma_re,
        sigma_im: c.sigma_im,
        gamma_plus: gamma_plus(law)?,
        gamma_minus: gamma_minus(law)?,
        biggins_margin: biggins_margin(law)?,
        supy_rate: supy_rate(law)?.value,
        truncation: RhoSeries { value: c.rho, truncation_m: c.truncation_m, tail_bound: c.truncation_error },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn battery() -> Vec<WeightLaw> {
        vec![
            WeightLaw::uniform(),
            WeightLaw::two_point(0.25).unwrap(),
            WeightLaw::symmetric_beta(2.0).unwrap(),
            WeightLaw::symmetric_beta(0.5).unwrap(),
        ]
    }

    #[test]
    fn fourier_dimension_examples() {
        assert_abs_diff_eq!(fourier_dimension(&WeightLaw::uniform()).unwrap(), 0.584962500721156, epsilon = 1e-14);
        let tp = WeightLaw::two_point(0.25).unwrap();
        assert_abs_diff_eq!(fourier_dimension(&tp).unwrap(), 0.678071905112638, epsilon = 1e-14);
        let b2 = WeightLaw::symmetric_beta(2.0).unwrap();
        assert_abs_diff_eq!(fourier_dimension(&b2).unwrap(), 0.736965594166206, epsilon = 1e-14);
    }

    #[test]
    fn rho_examples() {
        let u = WeightLaw::uniform();
        let inf = rho_series(&u, 1, Truncation::Infinite, 1e-12).unwrap();
        assert_abs_diff_eq!(inf.value, 0.250229681698708, epsilon = 1e-12);
        assert!(inf.tail_bound < 1e-12);
        let inf = rho_series(&u, 1, Truncation::Infinite, 1e-16).unwrap();
        assert_abs_diff_eq!(inf.value, 0.250229681698708, epsilon = 1e-15);
        let one = rho_series(&u, 1, Truncation::Finite(1), 1e-12).unwrap();
        assert_abs_diff_eq!(one.value, 4.0 / (3.0 * PI * PI), epsilon = 1e-15);
        let k13 = rho_series(&u, 1, Truncation::Finite(13), 1e-12).unwrap();
        assert_abs_diff_eq!(k13.value, 0.250229681623141, epsilon = 1e-14);
        assert!(inf.value - k13.value <= k13.tail_bound);
        let k10 = rho_series(&u, 1, Truncation::Finite(10), 1e-12).unwrap();
        assert_abs_diff_eq!(k10.value, 0.250229665376209, epsilon = 1e-14);
        assert_abs_diff_eq!(rho_series(&u, 3, Truncation::Finite(10), 1e-12).unwrap().value, 0.136420267669746, epsilon = 1e-14);
        assert_abs_diff_eq!(rho_series(&u, 5, Truncation::Finite(10), 1e-12).unwrap().value, 0.102536442966639, epsilon = 1e-14);
    }

    #[test]
    fn rho_scales_along_dyadic_frequencies() {
        for law in battery() {
            let base = rho_series(&law, 1, Truncation::Infinite, 1e-14).unwrap().value;
            let ratio = 2.0 * law.second_moment().unwrap();
            for n in 1..=10 {
                let v = rho_series(&law, 1 << n, Truncation::Infinite, 1e-14).unwrap().value;
                assert!((v / (base * ratio.powi(n)) - 1.0).abs() < 1e-9, "{} n={n}", law.label());
            }
        }
    }

    #[test]
    fn varpi_examples() {
        assert_abs_diff_eq!(varpi(&WeightLaw::uniform()).unwrap(), -4.0 / (9.0 * PI * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(varpi(&WeightLaw::two_point(0.25).unwrap()).unwrap(), -3.0 / (8.0 * PI * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(varpi(&WeightLaw::symmetric_beta(2.0).unwrap()).unwrap(), -0.32 / (PI * PI), epsilon = 1e-15);
    }

    #[test]
    fn covariance_examples() {
        let c = clt_covariance(&WeightLaw::uniform()).unwrap();
        assert_abs_diff_eq!(c.sigma_re, 0.102599022262168, epsilon = 1e-13);
        assert_abs_diff_eq!(c.sigma_im, 0.147630659436540, epsilon = 1e-13);
        let k = clt_covariance_at_depth(&WeightLaw::uniform(), 13).unwrap();
        assert_abs_diff_eq!(k.sigma_re, 0.10259902222438, epsilon = 1e-13);
        assert_abs_diff_eq!(k.sigma_im, 0.14763065939876, epsilon = 1e-13);
        for law in battery() {
            let c = clt_covariance(&law).unwrap();
            assert_abs_diff_eq!(c.sigma_re + c.sigma_im, c.rho, epsilon = 1e-15);
            assert!(c.sigma_im > c.sigma_re && c.sigma_re > 0.0);
        }
    }

    #[test]
    fn gamma_plus_examples() {
        let g = gamma_plus(&WeightLaw::uniform()).unwrap();
        assert_abs_diff_eq!(g.value, 0.334648916553551, epsilon = 1e-10);
        assert_abs_diff_eq!(g.argmin_p, 3.311070407, epsilon = 1e-5);
        assert!(g.attained);
        let g = gamma_plus(&WeightLaw::two_point(0.25).unwrap()).unwrap();
        assert_abs_diff_eq!(g.value, (4.0f64 / 3.0).log2(), epsilon = 1e-15);
        assert!(!g.attained && g.argmin_p.is_infinite());
        let g = gamma_plus(&WeightLaw::symmetric_beta(2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(g.value, 0.451889618972479, epsilon = 1e-10);
        assert_abs_diff_eq!(g.argmin_p, 3.92408, epsilon = 1e-4);
    }

    #[test]
    fn gamma_minus_examples() {
        let g = gamma_minus(&WeightLaw::uniform()).unwrap();
        assert_abs_diff_eq!(g.value, 3.864037920276918, epsilon = 1e-10);
        assert_abs_diff_eq!(g.argmin_p, 0.6266353823, epsilon = 1e-6);
        assert!(g.attained);
        let g = gamma_minus(&WeightLaw::two_point(0.25).unwrap()).unwrap();
        assert_eq!(g.value, 2.0);
        assert!(!g.attained);
        let g = gamma_minus(&WeightLaw::symmetric_beta(2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(g.value, 2.548581245948585, epsilon = 1e-10);
        assert_abs_diff_eq!(g.argmin_p, 1.178645, epsilon = 1e-5);
    }

    #[test]
    fn gamma_minus_is_infinite_without_negative_moments() {
        let xs: Vec<f64> = (1..=60).map(|i| 0.5 * (-(i as f64) * 0.5).exp()).rev().collect();
        let mut all = xs.clone();
        all.extend(xs.iter().rev().skip(1).map(|x| 1.0 - x));
        let gs: Vec<f64> = all
            .iter()
            .map(|&x| {
                let t: f64 = x.min(1.0 - x);
                1.0 / (t * t.ln().powi(2))
            })
            .collect();
        let law = WeightLaw::numeric_density(all, gs).unwrap();
        let g = gamma_minus(&law).unwrap();
        assert!(g.value.is_infinite() && !g.attained);
    }

    #[test]
    fn margin_and_rate_examples() {
        assert_abs_diff_eq!(biggins_margin(&WeightLaw::uniform()).unwrap(), 0.261201558558502, epsilon = 1e-12);
        let tp = WeightLaw::two_point(0.25).unwrap();
        assert_abs_diff_eq!(biggins_margin(&tp).unwrap(), 0.325082973391448, epsilon = 1e-12);
        let r = supy_rate(&WeightLaw::uniform()).unwrap();
        assert_abs_diff_eq!(r.value, -0.0584567978649044, epsilon = 1e-10);
        assert_abs_diff_eq!(r.argmin_p, 1.6555, epsilon = 1e-3);
        let u = WeightLaw::uniform();
        let witness = u.phi(3.0).unwrap() * 2.0 / 3.0 - u.phi(2.0).unwrap();
        assert!(r.value <= witness);
        for law in battery() {
            assert!(biggins_margin(&law).unwrap() > 0.0);
            assert!(supy_rate(&law).unwrap().value < 0.0);
        }
    }

    #[test]
    fn dims_json_spells_out_infinities() {
        let report = dims_report(&WeightLaw::two_point(0.25).unwrap()).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["gamma_plus"]["argmin_p"], "inf");
        assert!(json["D_F"].as_f64().unwrap() > 0.67);
        assert!(json["truncation"]["tail_bound"].as_f64().unwrap() < 1e-12);
    }
}
