//! `K_V(p) = (1/p) ln E[Σ_i V_i^p]` for random vectors `V` on the simplex.
//!
//! In dimension 2, `K_V` is non-increasing on `[1, 2]`, equivalently
//! `E[Σ V_i^p ln V_i^p] ≤ E[Σ V_i^p] ln E[Σ V_i^p]` there. The search below
//! probes the same property in higher dimension, where it can fail.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::optimize::nelder_mead;
use crate::rng::RngStream;
use crate::weights::WeightLaw;

/// Threshold for "non-increasing" on a grid.
pub const MONOTONE_TOL: f64 = 1e-10;
/// Grid step of the violation metric.
pub const SEARCH_STEP: f64 = 0.005;
const SEARCH_EVALS_PER_RESTART: usize = 1500;

/// One point of a discrete simplex law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexAtom {
    pub coords: Vec<f64>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimplexKind {
    DiscreteAtoms(Vec<SimplexAtom>),
    /// Symmetric Dirichlet with all parameters `α`.
    DirichletSymmetric { alpha: f64 },
    /// `(W0, W1)` of a weight law.
    TwoDFromWeightLaw(WeightLaw),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexLaw {
    dim: usize,
    kind: SimplexKind,
}

impl SimplexLaw {
    pub fn discrete(atoms: Vec<SimplexAtom>) -> Result<Self> {
        let dim = atoms.first().map(|a| a.coords.len()).ok_or_else(|| Error::InvalidLaw("no atoms".into()))?;
        if dim < 2 {
            return Err(Error::DimensionError(format!("dimension {dim} is below 2")));
        }
        let mut total = 0.0;
        for a in &atoms {
            if a.coords.len() != dim {
                return Err(Error::DimensionError("atoms have different dimensions".into()));
            }
            if a.coords.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::InvalidLaw(format!("coordinates {:?} leave the simplex", a.coords)));
            }
            let s: f64 = a.coords.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidLaw(format!("coordinates sum to {s}")));
            }
            if !(a.prob >= 0.0 && a.prob.is_finite()) {
                return Err(Error::InvalidLaw(format!("probability {} is invalid", a.prob)));
            }
            total += a.prob;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}")));
        }
        Ok(Self { dim, kind: SimplexKind::DiscreteAtoms(atoms) })
    }

    /// A single deterministic point.
    pub fn point(coords: Vec<f64>) -> Result<Self> {
        Self::discrete(vec![SimplexAtom { coords, prob: 1.0 }])
    }

    pub fn dirichlet(dim: usize, alpha: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionError(format!("dimension {dim} is below 2")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidLaw(format!("Dirichlet parameter {alpha} must be positive")));
        }
        Ok(Self { dim, kind: SimplexKind::DirichletSymmetric { alpha } })
    }

    pub fn from_weight_law(law: WeightLaw) -> Self {
        Self { dim: 2, kind: SimplexKind::TwoDFromWeightLaw(law) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SimplexKind {
        &self.kind
    }

    /// `(E[Σ V_i^p], E[Σ V_i^p ln V_i])`.
    fn moments(&self, p: f64) -> Result<(f64, f64)> {
        match &self.kind {
            SimplexKind::DiscreteAtoms(atoms) => {
                let (mut a, mut l, mut w) = (0.0, 0.0, 0.0);
                for atom in atoms {
                    let (sa, sl) = atom.coords.iter().filter(|&&c| c > 0.0).fold((0.0, 0.0), |(sa, sl), &c| {
                        let cp = c.powf(p);
                        (sa + cp, sl + cp * c.ln())
                    });
                    a += atom.prob * sa;
                    l += atom.prob * sl;
                    w += atom.prob;
                }
                // Dividing by the recomputed total keeps equality cases exact.
                Ok((a / w, l / w))
            }
            SimplexKind::DirichletSymmetric { alpha } => {
                // Each coordinate is Beta(α, (d-1)α).
                let d = self.dim as f64;
                let ln_e = ln_gamma(alpha + p) - ln_gamma(*alpha) + ln_gamma(d * alpha) - ln_gamma(d * alpha + p);
                let e = ln_e.exp();
                Ok((d * e, d * e * (digamma(alpha + p) - digamma(d * alpha + p))))
            }
            SimplexKind::TwoDFromWeightLaw(law) => Ok((law.moment_sum(p)?, law.log_moment_sum(p)?)),
        }
    }

    /// `E[V0 V1]`, two-dimensional laws only.
    fn cross_moment(&self) -> Result<f64> {
        match &self.kind {
            SimplexKind::DiscreteAtoms(atoms) => {
                let w: f64 = atoms.iter().map(|a| a.prob).sum();
                Ok(atoms.iter().map(|a| a.prob * a.coords[0] * a.coords[1]).sum::<f64>() / w)
            }
            SimplexKind::DirichletSymmetric { alpha } => Ok(alpha / (2.0 * (2.0 * alpha + 1.0))),
            SimplexKind::TwoDFromWeightLaw(law) => Ok(0.25 - law.variance()?),
        }
    }

    fn require_2d(&self) -> Result<()> {
        if self.dim != 2 {
            return Err(Error::DimensionError(format!("needs d = 2, law has d = {}", self.dim)));
        }
        Ok(())
    }
}

/// `K_V(p) = ln(E[Σ V_i^p]) / p`.
pub fn k(v: &SimplexLaw, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::DomainError(format!("K_V is defined for p > 0, got {p}")));
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    Ok(v.moments(p)?.0.ln() / p)
}

/// `K_V` on a grid of `[1, 2]` and its largest forward difference.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub max_forward_difference: f64,
    /// Left end of the grid cell with the largest difference.
    pub at_p: f64,
    pub pass: bool,
}

pub fn monotonicity_report(v: &SimplexLaw, grid_step: f64) -> Result<MonotonicityReport> {
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(Error::ParameterError(format!("grid step {grid_step} must lie in (0, 0.1]")));
    }
    let cells = (1.0 / grid_step).round() as usize;
    let grid: Vec<f64> = (0..=cells).map(|i| (1.0 + i as f64 / cells as f64).min(2.0)).collect();
    let values = grid.iter().map(|&p| k(v, p)).collect::<Result<Vec<_>>>()?;
    let (i, max_forward_difference) = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid has at least two points");
    Ok(MonotonicityReport {
        at_p: grid[i],
        grid,
        values,
        pass: max_forward_difference <= MONOTONE_TOL,
        max_forward_difference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L3L2Check {
    /// `c = E[V0 V1]`.
    pub c: f64,
    /// `(1 - 2c)^3 - (1 - 3c)^2`.
    pub lhs: f64,
    /// `E[V0^2 + V1^2]^3 - E[V0^3 + V1^3]^2` from the moments directly.
    pub rhs: f64,
    pub gap: f64,
    /// `c^2 (3 - 8c)`.
    pub factored: f64,
    pub three_minus_8c: f64,
}

/// Checks `‖V‖⁶_{L²(ℓ²)} - ‖V‖⁶_{L³(ℓ³)} = c²(3 - 8c)` and `3 - 8c ≥ 1`.
pub fn l3l2_identity_check(v: &SimplexLaw) -> Result<L3L2Check> {
    v.require_2d()?;
    let c = v.cross_moment()?;
    let lhs = (1.0 - 2.0 * c).powi(3) - (1.0 - 3.0 * c).powi(2);
    let a2 = v.moments(2.0)?.0;
    let a3 = v.moments(3.0)?.0;
    let rhs = a2.powi(3) - a3.powi(2);
    let three_minus_8c = 3.0 - 8.0 * c;
    if three_minus_8c < 1.0 - 1e-12 {
        return Err(Error::ConsistencyError(format!("3 - 8c = {three_minus_8c} is below 1")));
    }
    Ok(L3L2Check { c, lhs, rhs, gap: lhs - rhs, factored: c * c * three_minus_8c, three_minus_8c })
}

/// `E[Σ V_i^p ln V_i^p] - E[Σ V_i^p] ln E[Σ V_i^p]`, which is `≤ 0` on `[1, 2]`.
pub fn inequality_gap(v: &SimplexLaw, p: f64) -> Result<f64> {
    v.require_2d()?;
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::DomainError(format!("p = {p} outside [1, 2]")));
    }
    let (a, l) = v.moments(p)?;
    Ok(p * l - a * a.ln())
}

/// Largest increase of `K_V` between neighbouring points of the search grid,
/// with the left point where it occurs.
fn violation(v: &SimplexLaw) -> Result<(f64, f64)> {
    let cells = (1.0 / SEARCH_STEP).round() as usize;
    let mut best = (f64::NEG_INFINITY, 1.0);
    let mut prev = k(v, 1.0)?;
    for i in 1..=cells {
        let p = 1.0 + i as f64 / cells as f64;
        let cur = k(v, p)?;
        if cur - prev > best.0 {
            best = (cur - prev, p - SEARCH_STEP);
        }
        prev = cur;
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub dim: usize,
    pub atoms: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    pub violation: f64,
    pub p_location: f64,
    /// True when no increase beyond the tolerance was found.
    pub pass: bool,
    pub evaluations: usize,
    pub restarts: usize,
    pub seed: u64,
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Stick-breaking: `k - 1` reals to `k` probabilities.
fn stick_breaking(z: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    let mut out = Vec::with_capacity(z.len() + 1);
    for &x in z {
        let take = rest / (1.0 + (-x).exp());
        out.push(take);
        rest -= take;
    }
    out.push(rest);
    out
}

fn decode(params: &[f64], dim: usize, n_atoms: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let atoms = (0..n_atoms).map(|j| softmax(&params[j * dim..(j + 1) * dim])).collect();
    let probs = stick_breaking(&params[n_atoms * dim..]);
    (atoms, probs)
}

fn candidate(atoms: &[Vec<f64>], probs: &[f64]) -> SimplexLaw {
    let dim = atoms[0].len();
    let kind = SimplexKind::DiscreteAtoms(
        atoms.iter().zip(probs).map(|(c, &p)| SimplexAtom { coords: c.clone(), prob: p }).collect(),
    );
    // Softmax and stick-breaking land on the simplex by construction.
    SimplexLaw { dim, kind }
}

struct Restart {
    violation: f64,
    p_location: f64,
    atoms: Vec<Vec<f64>>,
    probs: Vec<f64>,
    evaluations: usize,
}

fn run_restart(dim: usize, evals: usize, mut stream: RngStream) -> Restart {
    let n_atoms = 2 + (stream.next_bits() % 3) as usize;
    let start: Vec<f64> = (0..n_atoms * dim + n_atoms - 1)
        .map(|_| 3.0 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut stream))
        .collect();
    let score = |x: &[f64]| {
        let (atoms, probs) = decode(x, dim, n_atoms);
        violation(&candidate(&atoms, &probs)).map(|v| v.0).unwrap_or(f64::NEG_INFINITY)
    };
    let (best, used) = if evals <= 1 {
        (start, 1)
    } else {
        let (x, _, used) = nelder_mead(|x| -score(x), &start, 1.0, evals);
        (x, used)
    };
    let (atoms, probs) = decode(&best, dim, n_atoms);
    let (violation, p_location) = violation(&candidate(&atoms, &probs)).unwrap_or((f64::NEG_INFINITY, f64::NAN));
    Restart { violation, p_location, atoms, probs, evaluations: used }
}

/// Random-restart local search over 2–4 atom laws on the `d`-simplex for the
/// largest increase of `K_V` on `[1, 2]`.
pub fn counterexample_search(dim: usize, budget: usize, seed: u64) -> Result<SearchReport> {
    if dim < 2 {
        return Err(Error::DimensionError(format!("dimension {dim} is below 2")));
    }
    if budget == 0 {
        return Err(Error::ParameterError("budget must be at least 1".into()));
    }
    let per_restart = budget.min(SEARCH_EVALS_PER_RESTART);
    let restarts = budget.div_ceil(per_restart);
    let root = RngStream::for_replica(seed, 0);
    let results: Vec<Restart> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let evals = per_restart.min(budget - i * per_restart);
            run_restart(dim, evals, root.split(i as u64))
        })
        .collect();
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    // Ties go to the earliest restart, so the result does not depend on scheduling.
    let best = results
        .into_iter()
        .reduce(|a, b| if b.violation > a.violation { b } else { a })
        .expect("at least one restart");
    Ok(SearchReport {
        dim,
        pass: best.violation <= MONOTONE_TOL,
        atoms: best.atoms,
        probabilities: best.probs,
        violation: best.violation,
        p_location: best.p_location,
        evaluations,
        restarts,
        seed,
    })
}

/// A reproducible mix of two-dimensional laws: discrete atoms, Dirichlet,
/// and laws induced by weight laws.
pub fn random_battery(count: usize, seed: u64) -> Vec<SimplexLaw> {
    (0..count)
        .map(|i| {
            let mut s = RngStream::for_replica(seed, i as u64);
            match i % 4 {
                0 | 1 => {
                    let n = 1 + (s.next_bits() % 4) as usize;
                    let raw: Vec<f64> = (0..n).map(|_| s.uniform()).collect();
                    let total: f64 = raw.iter().sum();
                    let atoms = raw
                        .iter()
                        .map(|&w| {
                            let x = s.uniform();
                            SimplexAtom { coords: vec![x, 1.0 - x], prob: w / total }
                        })
                        .collect();
                    SimplexLaw::discrete(atoms).expect("valid by construction")
                }
                2 => SimplexLaw::dirichlet(2, 0.05 + 10.0 * s.uniform()).expect("positive parameter"),
                _ => {
                    let law = match s.next_bits() % 3 {
                        0 => WeightLaw::uniform(),
                        1 => WeightLaw::symmetric_beta(0.1 + 8.0 * s.uniform()).expect("positive shape"),
                        _ => WeightLaw::two_point(0.01 + 0.48 * s.uniform()).expect("atom inside (0, 1/2)"),
                    };
                    SimplexLaw::from_weight_law(law)
                }
            }
        })
        .collect()
}
