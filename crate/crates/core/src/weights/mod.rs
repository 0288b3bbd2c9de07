//! Laws of the splitting vector `W = (W0, W1)` with `W0 + W1 = 1` and
//! `E[W0] = 1/2`, and their power moments.

mod density;

use std::io::Read;
use std::path::Path;

use rand_distr::{Beta, Distribution};
use serde::Serialize;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::rng::RngStream;

pub use density::{DensityTable, TailModel};
use density::MIN_WEIGHT;

pub const DEFAULT_QUADRATURE_TOLERANCE: f64 = 1e-10;

/// Tolerance used when checking that discrete atoms pair up as `x ↔ 1-x`.
const ATOM_TOL: f64 = 1e-12;

/// One atom `(value, probability)` of a discrete law of `W0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LawKind {
    /// `W0` uniform on (0, 1).
    Uniform,
    /// `W0 ~ Beta(α, α)`.
    SymmetricBeta { alpha: f64 },
    /// `W0 ∈ {a, 1-a}` with probability 1/2 each, `a ∈ (0, 1/2)`.
    SymmetricTwoPoint { a: f64 },
    /// Finitely many atoms, symmetric under `x ↦ 1 - x`.
    DiscreteSymmetric { atoms: Vec<Atom> },
    NumericDensity(Box<DensityTable>),
}

/// A validated law of `W = (W0, W1)`. Construction fails for laws that are
/// degenerate or violate `E[W0] = 1/2`, so every value of this type is
/// usable.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightLaw {
    kind: LawKind,
    quadrature_tolerance: f64,
    /// Cumulative probabilities of the atoms, discrete laws only.
    cdf: Vec<f64>,
}

impl WeightLaw {
    fn from_kind(kind: LawKind) -> Self {
        Self { kind, quadrature_tolerance: DEFAULT_QUADRATURE_TOLERANCE, cdf: Vec::new() }
    }

    pub fn uniform() -> Self {
        Self::from_kind(LawKind::Uniform)
    }

    pub fn symmetric_beta(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidLaw(format!("beta shape must be positive and finite, got {alpha}")));
        }
        Ok(Self::from_kind(LawKind::SymmetricBeta { alpha }))
    }

    pub fn two_point(a: f64) -> Result<Self> {
        if a == 0.5 {
            return Err(Error::DegenerateLaw);
        }
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::InvalidLaw(format!("two-point atom must lie in (0, 1/2), got {a}")));
        }
        Ok(Self::from_kind(LawKind::SymmetricTwoPoint { a }))
    }

    /// Discrete law of `W0`. Atoms must lie in (0, 1), probabilities must
    /// sum to one, and the law must be invariant under `x ↦ 1 - x`.
    pub fn discrete(atoms: Vec<Atom>) -> Result<Self> {
        let mut atoms: Vec<Atom> = atoms.into_iter().filter(|a| a.prob != 0.0).collect();
        if atoms.is_empty() {
            return Err(Error::InvalidLaw("no atoms with positive probability".into()));
        }
        for a in &atoms {
            if !(a.value > 0.0 && a.value < 1.0) {
                return Err(Error::InvalidLaw(format!("atom {} outside (0, 1)", a.value)));
            }
            if !(a.prob > 0.0 && a.prob.is_finite()) {
                return Err(Error::InvalidLaw(format!("atom probability {} is not positive", a.prob)));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidLaw(format!("atom probabilities sum to {total}, not 1")));
        }
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        for a in &atoms {
            let mirror: f64 = atoms
                .iter()
                .filter(|b| (b.value - (1.0 - a.value)).abs() <= ATOM_TOL)
                .map(|b| b.prob)
                .sum();
            let same: f64 = atoms.iter().filter(|b| (b.value - a.value).abs() <= ATOM_TOL).map(|b| b.prob).sum();
            if (mirror - same).abs() > ATOM_TOL {
                return Err(Error::InvalidLaw(format!(
                    "law is not symmetric: P(W0 = {}) = {same} but P(W0 = {}) = {mirror}",
                    a.value,
                    1.0 - a.value
                )));
            }
        }
        if atoms.iter().all(|a| (a.value - 0.5).abs() <= ATOM_TOL) {
            return Err(Error::DegenerateLaw);
        }
        let mut acc = 0.0;
        let cdf = atoms
            .iter()
            .map(|a| {
                acc += a.prob / total;
                acc
            })
            .collect();
        let mut law = Self::from_kind(LawKind::DiscreteSymmetric { atoms });
        law.cdf = cdf;
        Ok(law)
    }

    /// Law with a tabulated density of `W0`, linearly interpolated.
    pub fn numeric_density(xs: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        let table = DensityTable::new(xs, densities, DEFAULT_QUADRATURE_TOLERANCE)?;
        let law = Self::from_kind(LawKind::NumericDensity(Box::new(table)));
        if law.variance()? <= 0.0 {
            return Err(Error::DegenerateLaw);
        }
        Ok(law)
    }

    /// Reads a two-column `x,density` CSV (an optional header is skipped).
    pub fn density_from_csv<R: Read>(reader: R) -> Result<Self> {
        let (xs, ys) = read_two_columns(reader)?;
        Self::numeric_density(xs, ys)
    }

    /// Reads a two-column `value,probability` CSV of atoms of `W0`.
    pub fn discrete_from_csv<R: Read>(reader: R) -> Result<Self> {
        let (xs, ps) = read_two_columns(reader)?;
        Self::discrete(xs.into_iter().zip(ps).map(|(value, prob)| Atom { value, prob }).collect())
    }

    /// Parses `uniform | beta:<α> | twopoint:<a> | discrete:@file | density:@file`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (spec, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::InvalidLaw(format!("law `{name}` needs a parameter")))?;
            a.parse::<f64>().map_err(|_| Error::InvalidLaw(format!("`{a}` is not a number")))
        };
        let file = |a: Option<&str>| -> Result<std::fs::File> {
            let a = a.ok_or_else(|| Error::InvalidLaw(format!("law `{name}` needs @file")))?;
            let path = a
                .strip_prefix('@')
                .ok_or_else(|| Error::InvalidLaw(format!("expected @file, got `{a}`")))?;
            std::fs::File::open(Path::new(path)).map_err(|e| Error::InvalidLaw(format!("{path}: {e}")))
        };
        match name.to_ascii_lowercase().as_str() {
            "uniform" if arg.is_none() => Ok(Self::uniform()),
            "beta" => Self::symmetric_beta(number(arg)?),
            "twopoint" => Self::two_point(number(arg)?),
            "discrete" => Self::discrete_from_csv(file(arg)?),
            "density" => Self::density_from_csv(file(arg)?),
            _ => Err(Error::InvalidLaw(format!("unknown law `{spec}`"))),
        }
    }

    pub fn with_quadrature_tolerance(mut self, tol: f64) -> Self {
        self.quadrature_tolerance = tol;
        self
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn quadrature_tolerance(&self) -> f64 {
        self.quadrature_tolerance
    }

    /// Short human-readable label, e.g. `beta:2`.
    pub fn label(&self) -> String {
        match &self.kind {
            LawKind::Uniform => "uniform".into(),
            LawKind::SymmetricBeta { alpha } => format!("beta:{alpha}"),
            LawKind::SymmetricTwoPoint { a } => format!("twopoint:{a}"),
            LawKind::DiscreteSymmetric { atoms } => format!("discrete[{} atoms]", atoms.len()),
            LawKind::NumericDensity(_) => "density".into(),
        }
    }

    /// Maps a uniform draw to `(w0, w1)` by inverse CDF. For the two-point
    /// law `u ≥ 1/2` selects `W0 = 1 - a`. Beta and tabulated laws need more
    /// than one draw and return `None`.
    pub fn pair_from_uniform(&self, u: f64) -> Option<(f64, f64)> {
        let w0 = match &self.kind {
            LawKind::Uniform => u,
            LawKind::SymmetricTwoPoint { a } => {
                if u < 0.5 { *a } else { 1.0 - a }
            }
            LawKind::DiscreteSymmetric { atoms } => {
                let i = self.cdf.partition_point(|&c| c <= u).min(atoms.len() - 1);
                atoms[i].value
            }
            LawKind::SymmetricBeta { .. } | LawKind::NumericDensity(_) => return None,
        };
        Some((w0, 1.0 - w0))
    }

    /// Draws `(w0, w1)` with `w1 = 1 - w0`.
    #[inline]
    pub fn sample(&self, stream: &mut RngStream) -> (f64, f64) {
        match &self.kind {
            LawKind::Uniform => {
                let w0 = stream.uniform();
                (w0, 1.0 - w0)
            }
            LawKind::SymmetricBeta { alpha } => {
                let beta = Beta::new(*alpha, *alpha).expect("validated shape");
                let w0 = beta.sample(stream).clamp(MIN_WEIGHT, 1.0 - MIN_WEIGHT);
                (w0, 1.0 - w0)
            }
            LawKind::NumericDensity(table) => {
                let u = stream.uniform();
                let coin = stream.uniform();
                let w0 = table.sample_w0(u, coin);
                (w0, 1.0 - w0)
            }
            _ => self.pair_from_uniform(stream.uniform()).expect("single-draw law"),
        }
    }

    /// `E[W0^p]`, possibly `+∞`.
    pub fn moment(&self, p: f64) -> Result<f64> {
        Ok(0.5 * self.moment_sum(p)?)
    }

    /// `E[W0^p + W1^p]`; `+∞` when a negative moment diverges.
    pub fn moment_sum(&self, p: f64) -> Result<f64> {
        if p == 1.0 {
            return Ok(1.0);
        }
        Ok(self.ln_moment_sum(p)?.exp())
    }

    /// `φ_W(p) = ln E[W0^p + W1^p]`, computed in log space so that large
    /// `|p|` neither underflows nor overflows.
    pub fn phi(&self, p: f64) -> Result<f64> {
        self.ln_moment_sum(p)
    }

    fn ln_moment_sum(&self, p: f64) -> Result<f64> {
        if p == 1.0 {
            return Ok(0.0);
        }
        if p == 0.0 {
            return Ok(std::f64::consts::LN_2);
        }
        match &self.kind {
            LawKind::Uniform => {
                if p <= -1.0 {
                    Ok(f64::INFINITY)
                } else {
                    Ok(std::f64::consts::LN_2 - (p + 1.0).ln())
                }
            }
            LawKind::SymmetricBeta { alpha } => {
                let a = *alpha;
                if a + p <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                Ok(std::f64::consts::LN_2 + ln_gamma(a + p) + ln_gamma(2.0 * a) - ln_gamma(a) - ln_gamma(2.0 * a + p))
            }
            LawKind::SymmetricTwoPoint { a } => Ok(log_sum_exp(&[p * a.ln(), p * (1.0 - a).ln()])),
            LawKind::DiscreteSymmetric { atoms } => {
                let terms: Vec<f64> = atoms
                    .iter()
                    .flat_map(|at| {
                        let lp = at.prob.ln();
                        [lp + p * at.value.ln(), lp + p * (-at.value).ln_1p()]
                    })
                    .collect();
                Ok(log_sum_exp(&terms))
            }
            LawKind::NumericDensity(table) => {
                if !table.power_integrable(p) {
                    return Ok(f64::INFINITY);
                }
                // Factor out the peak of x^p on (0,1) to keep the integrand O(1).
                let v = table.integrate_kernel(|lx, l1x| (p * lx).exp() + (p * l1x).exp())?;
                if v > 0.0 {
                    Ok(v.ln())
                } else {
                    Err(Error::QuadratureFailure(format!("moment of order {p} underflowed")))
                }
            }
        }
    }

    /// `E[W0^p ln W0 + W1^p ln W1]`, the derivative of the moment sum.
    pub fn log_moment_sum(&self, p: f64) -> Result<f64> {
        match &self.kind {
            LawKind::NumericDensity(table) => {
                if !table.power_integrable(p) {
                    return Ok(f64::NEG_INFINITY);
                }
                table.integrate_kernel(|lx, l1x| {
                    let a = if lx == f64::NEG_INFINITY { 0.0 } else { (p * lx).exp() * lx };
                    let b = if l1x == f64::NEG_INFINITY { 0.0 } else { (p * l1x).exp() * l1x };
                    a + b
                })
            }
            LawKind::DiscreteSymmetric { atoms } => Ok(atoms
                .iter()
                .map(|at| {
                    let (x, y) = (at.value, 1.0 - at.value);
                    at.prob * (x.powf(p) * x.ln() + y.powf(p) * (-at.value).ln_1p())
                })
                .sum()),
            LawKind::SymmetricTwoPoint { a } => {
                let (x, y) = (*a, 1.0 - a);
                Ok(x.powf(p) * x.ln() + y.powf(p) * y.ln())
            }
            _ => {
                let s = self.moment_sum(p)?;
                if !s.is_finite() {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(s * self.phi_prime(p)?)
            }
        }
    }

    /// `φ'_W(p)`: closed form for the built-in laws, Richardson-extrapolated
    /// central differences for tabulated densities.
    pub fn phi_prime(&self, p: f64) -> Result<f64> {
        match &self.kind {
            LawKind::Uniform => {
                if p <= -1.0 {
                    return Ok(f64::NAN);
                }
                Ok(-1.0 / (p + 1.0))
            }
            LawKind::SymmetricBeta { alpha } => {
                if alpha + p <= 0.0 {
                    return Ok(f64::NAN);
                }
                Ok(digamma(alpha + p) - digamma(2.0 * alpha + p))
            }
            LawKind::SymmetricTwoPoint { .. } | LawKind::DiscreteSymmetric { .. } => {
                // Weighted average of ln W under the tilted law, in log space.
                let pairs = self.atom_pairs();
                let lws: Vec<f64> = pairs.iter().map(|(lp, lw)| lp + p * lw).collect();
                let m = lws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (mut num, mut den) = (0.0, 0.0);
                for ((_, lw), l) in pairs.iter().zip(&lws) {
                    let w = (l - m).exp();
                    num += w * lw;
                    den += w;
                }
                Ok(num / den)
            }
            LawKind::NumericDensity(_) => {
                let h = 1e-5;
                let d = |h: f64| -> Result<f64> { Ok((self.phi(p + h)? - self.phi(p - h)?) / (2.0 * h)) };
                let (d1, d2) = (d(h)?, d(0.5 * h)?);
                Ok((4.0 * d2 - d1) / 3.0)
            }
        }
    }

    /// `(ln prob, ln w)` over both coordinates of every atom.
    fn atom_pairs(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            LawKind::SymmetricTwoPoint { a } => {
                let lh = 0.5f64.ln();
                vec![(lh, a.ln()), (lh, (1.0 - a).ln()), (lh, (1.0 - a).ln()), (lh, a.ln())]
            }
            LawKind::DiscreteSymmetric { atoms } => atoms
                .iter()
                .flat_map(|at| [(at.prob.ln(), at.value.ln()), (at.prob.ln(), (-at.value).ln_1p())])
                .collect(),
            _ => Vec::new(),
        }
    }

    /// `E[W0^2]`, which lies in (1/4, 1/2) for every valid law.
    pub fn second_moment(&self) -> Result<f64> {
        match &self.kind {
            LawKind::Uniform => Ok(1.0 / 3.0),
            LawKind::SymmetricBeta { alpha } => Ok((alpha + 1.0) / (2.0 * (2.0 * alpha + 1.0))),
            LawKind::SymmetricTwoPoint { a } => Ok(0.5 * (a * a + (1.0 - a) * (1.0 - a))),
            _ => self.moment(2.0),
        }
    }

    /// `Var[W0] = E[W0^2] - 1/4`.
    pub fn variance(&self) -> Result<f64> {
        let v = match &self.kind {
            LawKind::Uniform => 1.0 / 12.0,
            LawKind::SymmetricBeta { alpha } => 1.0 / (4.0 * (2.0 * alpha + 1.0)),
            LawKind::SymmetricTwoPoint { a } => (a - 0.5) * (a - 0.5),
            LawKind::DiscreteSymmetric { atoms } => atoms.iter().map(|at| at.prob * (at.value - 0.5).powi(2)).sum(),
            LawKind::NumericDensity(t) => t.integrate_kernel(|lx, _| (lx.exp() - 0.5).powi(2))?,
        };
        if v <= 0.0 {
            return Err(Error::DegenerateLaw);
        }
        Ok(v)
    }

    /// Supremum of `p ≥ 0` with `E[W0^{-p}] < ∞`; the finite range is the
    /// open interval `(0, p*)`.
    pub fn negative_moment_threshold(&self) -> f64 {
        match &self.kind {
            LawKind::Uniform => 1.0,
            LawKind::SymmetricBeta { alpha } => *alpha,
            LawKind::SymmetricTwoPoint { .. } | LawKind::DiscreteSymmetric { .. } => f64::INFINITY,
            LawKind::NumericDensity(t) => t.negative_moment_threshold(),
        }
    }

    /// Essential supremum of `max(W0, W1)`.
    pub fn ess_sup_max(&self) -> f64 {
        match &self.kind {
            LawKind::Uniform | LawKind::SymmetricBeta { .. } => 1.0,
            LawKind::SymmetricTwoPoint { a } => 1.0 - a,
            LawKind::DiscreteSymmetric { atoms } => {
                atoms.iter().map(|at| at.value.max(1.0 - at.value)).fold(0.5, f64::max)
            }
            LawKind::NumericDensity(t) => 1.0 - t.support_low(),
        }
    }

    /// Essential infimum of `min(W0, W1)`.
    pub fn ess_inf_min(&self) -> f64 {
        match &self.kind {
            LawKind::SymmetricTwoPoint { a } => *a,
            LawKind::DiscreteSymmetric { atoms } => atoms.iter().map(|at| at.value.min(1.0 - at.value)).fold(0.5, f64::min),
            _ => 1.0 - self.ess_sup_max(),
        }
    }

    /// Independent quadrature of `E[W0^p + W1^p]` against the law's
    /// density, for laws that have one. Used to cross-check closed forms.
    pub fn moment_sum_by_quadrature(&self, p: f64) -> Result<f64> {
        let tol = self.quadrature_tolerance;
        match &self.kind {
            LawKind::Uniform => quadrature::integrate_endpoint_singular_with(
                |l: f64, r: f64| l.powf(p) + r.powf(p),
                0.0,
                1.0,
                tol,
                substitution_power(p),
            ),
            LawKind::SymmetricBeta { alpha } => {
                let a = *alpha;
                let ln_b = 2.0 * ln_gamma(a) - ln_gamma(2.0 * a);
                let k = substitution_power((a - 1.0 + p).min(a - 1.0));
                quadrature::integrate_endpoint_singular_with(
                    |l: f64, r: f64| {
                        let dens = ((a - 1.0) * (l.ln() + r.ln()) - ln_b).exp();
                        dens * (l.powf(p) + r.powf(p))
                    },
                    0.0,
                    1.0,
                    tol,
                    k,
                )
            }
            LawKind::NumericDensity(t) => t.integrate_kernel(|lx, l1x| (p * lx).exp() + (p * l1x).exp()),
            _ => self.moment_sum(p),
        }
    }
}

/// Substitution power that makes an endpoint behaviour `x^e` smooth.
fn substitution_power(e: f64) -> i32 {
    if e >= 0.0 {
        2
    } else {
        (2.0 / (1.0 + e)).ceil().clamp(2.0, 64.0) as i32
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::INFINITY {
        return m;
    }
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn read_two_columns<R: Read>(reader: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidLaw(format!("csv: {e}")))?;
        if rec.len() < 2 {
            return Err(Error::InvalidLaw(format!("csv row {} has fewer than 2 columns", i + 1)));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            // Header row.
            _ if i == 0 => continue,
            _ => return Err(Error::InvalidLaw(format!("csv row {} is not numeric", i + 1))),
        }
    }
    Ok((xs, ys))
}
