//! The acceptance suite: fourteen criteria combining exact identities with
//! Monte Carlo checks in 3-SE bands.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::cascade::CascadeRealization;
use crate::entropy::{self, SimplexAtom, SimplexLaw};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::spectral::{self, rho_series, Truncation};
use crate::stats;
use crate::weights::{Atom, WeightLaw};

/// `ϱ` for the uniform law, computed independently to 15 digits.
pub const UNIFORM_RHO: f64 = 0.250229681698708;
pub const UNIFORM_GAMMA_PLUS: f64 = 0.33465;
pub const UNIFORM_GAMMA_MINUS: f64 = 3.8641;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Reduced replica counts and depths for the expensive criteria.
    Quick,
    /// The stated parameters of every criterion.
    Full,
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Profile::Quick),
            "full" => Ok(Profile::Full),
            _ => Err(Error::ParameterError(format!("unknown profile {s:?}, expected quick or full"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Quick => "quick",
            Profile::Full => "full",
        })
    }
}

pub const CRITERIA: [(u8, &str); 14] = [
    (1, "exact-constants"),
    (2, "series-scaling"),
    (3, "exponent-solver"),
    (4, "structural-inequalities"),
    (5, "moment2"),
    (6, "varpi"),
    (7, "clt-covariance"),
    (8, "martingale-m2"),
    (9, "holder-slopes"),
    (10, "entropy"),
    (11, "homeomorphism"),
    (12, "fourier-dimension"),
    (13, "sobolev"),
    (14, "determinism"),
];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub wall_time_s: f64,
    /// Bit patterns of every computed estimate, compared by criterion 14.
    #[serde(skip)]
    pub fingerprint: Vec<u64>,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<24} {:>7.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.wall_time_s,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub profile: Profile,
    pub seed: u64,
    pub passed: bool,
    pub failed: Vec<u8>,
    pub criteria: Vec<CriterionOutcome>,
}

/// Collects pass flags, detail fragments and fingerprint bits.
#[derive(Default)]
struct Check {
    passed: bool,
    parts: Vec<String>,
    bits: Vec<u64>,
}

impl Check {
    fn new() -> Self {
        Self { passed: true, ..Self::default() }
    }

    fn require(&mut self, ok: bool, part: String) {
        self.passed &= ok;
        self.parts.push(if ok { part } else { format!("{part} ✗") });
    }

    fn record(&mut self, values: &[f64]) {
        self.bits.extend(values.iter().map(|v| v.to_bits()));
    }

    fn compare(&mut self, label: &str, c: &stats::Comparison) {
        self.record(&[c.summary.estimate, c.summary.std_error]);
        self.require(
            c.within_band,
            format!("{label} {:.6} vs {:.6} (z {:+.2})", c.summary.estimate, c.oracle, c.z_score),
        );
    }
}

/// A deterministic mix of weight laws for structural checks: symmetric Beta
/// and two-point laws on parameter grids plus random discrete laws.
pub fn law_battery(count: usize, seed: u64) -> Vec<WeightLaw> {
    (0..count)
        .map(|i| {
            let mut s = RngStream::for_replica(seed, i as u64);
            match i % 3 {
                0 => WeightLaw::symmetric_beta((0.2f64.ln() + s.uniform() * (100.0f64).ln()).exp())
                    .expect("positive shape"),
                1 => WeightLaw::two_point(0.01 + 0.48 * s.uniform()).expect("atom inside (0, 1/2)"),
                _ => {
                    let pairs = 1 + (s.next_bits() % 4) as usize;
                    let raw: Vec<f64> = (0..pairs).map(|_| s.uniform()).collect();
                    let total: f64 = raw.iter().sum();
                    let mut atoms = Vec::with_capacity(2 * pairs);
                    for w in raw {
                        let x = 0.005 + 0.49 * s.uniform();
                        atoms.push(Atom { value: x, prob: 0.5 * w / total });
                        atoms.push(Atom { value: 1.0 - x, prob: 0.5 * w / total });
                    }
                    WeightLaw::discrete(atoms).expect("symmetric by construction")
                }
            }
        })
        .collect()
}

fn exact_constants() -> Result<Check> {
    let law = WeightLaw::uniform();
    let mut c = Check::new();
    let d_f = spectral::fourier_dimension(&law)?;
    let varpi = spectral::varpi(&law)?;
    let rho = rho_series(&law, 1, Truncation::Infinite, spectral::DEFAULT_SERIES_TOL)?;
    c.record(&[d_f, varpi, rho.value, rho.tail_bound]);
    c.require((d_f - 1.5f64.log2()).abs() <= 1e-12, format!("D_F {d_f:.12}"));
    c.require((varpi + 4.0 / (9.0 * PI * PI)).abs() <= 1e-12, format!("ϖ {varpi:.12}"));
    c.require(
        (rho.value - UNIFORM_RHO).abs() <= 1e-12 && rho.tail_bound <= 1e-12,
        format!("ϱ {:.12} (tail ≤ {:.1e})", rho.value, rho.tail_bound),
    );
    c.require(varpi.abs() < rho.value, "|ϖ| < ϱ".into());
    Ok(c)
}

fn series_scaling() -> Result<Check> {
    let mut c = Check::new();
    let laws = [WeightLaw::uniform(), WeightLaw::symmetric_beta(2.0)?, WeightLaw::two_point(0.25)?];
    for law in &laws {
        let rho = rho_series(law, 1, Truncation::Infinite, 1e-16)?.value;
        let ratio = 2.0 * law.second_moment()?;
        let mut worst = 0.0f64;
        for n in 1..=10 {
            let v = rho_series(law, 1u64 << n, Truncation::Infinite, 1e-16)?.value;
            c.record(&[v]);
            worst = worst.max((v / (rho * ratio.powi(n)) - 1.0).abs());
        }
        c.require(worst <= 1e-9, format!("{} rel {worst:.1e}", law.label()));
    }
    Ok(c)
}

/// Extremes of an objective over `points` log-spaced samples of `[lo, hi]`.
fn grid_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| f((a + (b - a) * i as f64 / (points - 1) as f64).exp())).fold(f64::INFINITY, f64::min)
}

fn exponent_solver() -> Result<Check> {
    let mut c = Check::new();
    let law = WeightLaw::uniform();
    let gp = spectral::gamma_plus(&law)?;
    let gm = spectral::gamma_minus(&law)?;
    let phi = |p: f64| law.phi(p).unwrap_or(f64::NAN);
    let grid_plus = -grid_min(|p| phi(p) / (p * LN_2), 1.0, 1e3, 100_000);
    let grid_minus = grid_min(|p| phi(-p) / (p * LN_2), 1e-4, 1.0 - 1e-9, 100_000);
    c.record(&[gp.value, gm.value, grid_plus, grid_minus]);
    c.require(
        (gp.value - UNIFORM_GAMMA_PLUS).abs() <= 1e-4 && (gp.value - grid_plus).abs() <= 1e-4,
        format!("γ+ {:.6} (grid {grid_plus:.6})", gp.value),
    );
    c.require(
        (gm.value - UNIFORM_GAMMA_MINUS).abs() <= 1e-4 && (gm.value - grid_minus).abs() <= 1e-4,
        format!("γ- {:.6} (grid {grid_minus:.6})", gm.value),
    );
    let tp = WeightLaw::two_point(0.25)?;
    let tp_plus = spectral::gamma_plus(&tp)?;
    let tp_minus = spectral::gamma_minus(&tp)?;
    c.record(&[tp_plus.value, tp_minus.value]);
    c.require(
        (tp_plus.value - (4.0f64 / 3.0).log2()).abs() <= 1e-12
            && (tp_minus.value - 2.0).abs() <= 1e-12
            && !tp_plus.attained
            && !tp_minus.attained,
        format!("two-point boundary γ+ {:.6} γ- {:.6}", tp_plus.value, tp_minus.value),
    );
    Ok(c)
}

fn structural_inequalities(seed: u64) -> Result<Check> {
    let mut c = Check::new();
    let laws = law_battery(50, seed);
    let mut bad = Vec::new();
    for law in &laws {
        let d_f = spectral::fourier_dimension(law)?;
        let gp = spectral::gamma_plus(law)?.value;
        let gm = spectral::gamma_minus(law)?.value;
        let margin = spectral::biggins_margin(law)?;
        let rate = spectral::supy_rate(law)?.value;
        c.record(&[gp, gm, margin, rate]);
        let ok = 0.0 < gp && gp < 1.0 && 1.0 < gm && gp > d_f / 2.0 && margin > 0.0 && rate < 0.0;
        if !ok {
            bad.push(law.label());
        }
    }
    c.require(bad.is_empty(), format!("{} laws, violations: {bad:?}", laws.len()));
    Ok(c)
}

fn moment2(seed: u64) -> Result<Check> {
    let mut c = Check::new();
    let law = WeightLaw::uniform();
    for s in [1, 3, 5] {
        let r = stats::moment2_experiment(&law, 10, s, 5000, seed)?;
        c.compare(&format!("s={s}"), &r.result);
    }
    Ok(c)
}

fn varpi(profile: Profile, seed: u64) -> Result<Check> {
    let mut c = Check::new();
    let r = match profile {
        Profile::Quick => 5000,
        Profile::Full => 20000,
    };
    let v = stats::varpi_experiment(&WeightLaw::uniform(), 10, r, seed)?;
    c.compare("re", &v.re);
    c.compare("im", &v.im);
    Ok(c)
}

fn clt(profile: Profile, seed: u64) -> Result<Check> {
    let mut c = Check::new();
    let (k, r) = match profile {
        Profile::Quick => (10, 500),
        Profile::Full => (13, 2000),
    };
    let rep = stats::clt_experiment(&WeightLaw::uniform(), 5, k, r, seed)?;
    c.compare("var_re", &rep.var_re);
    c.compare("var_im", &rep.var_im);
    c.compare("cov", &rep.cov_re_im);
    let f = rep.regression;
    c.record(&[f.slope, f.intercept, f.slope_se, f.intercept_se]);
    c.require(rep.slope_z.abs() <= stats::Z_BAND, format!("slope {:.4} vs ϱ_{k} (z {:+.2})", f.slope, rep.slope_z));
    c.require(rep.intercept_z.abs() <= stats::Z_BAND, format!("intercept {:.4} (z {:+.2})", f.intercept, rep.intercept_z));
    Ok(c)
}

fn martingale_m2(seed: u64) -> Result<Check> {
    let mut c = Check::new();
    let law = WeightLaw::uniform();
    let deep = stats::m2_experiment(&law, 16, 2000, seed, 1e-4)?;
    let shallow = stats::m2_experiment(&law, 8, 2000, seed, 1e-4)?;
    c.compare("mean", &deep.mean);
    c.record(&[deep.fraction_below_eps, shallow.fraction_below_eps]);
    let band = stats::Z_BAND * deep.fraction_se.hypot(shallow.fraction_se);
    c.require(
        deep.fraction_below_eps <= shallow.fraction_below_eps + band,
        format!("P(M2<1e-4) {:.4} at n=16 vs {:.4} at n=8", deep.fraction_below_eps, shallow.fraction_below_eps),
    );
    Ok(c)
}

fn holder(profile: Profile, seed: u64) -> Result<Check> {
    let mut c = Check::new();
    let top = match profile {
        Profile::Quick => 20,
        Profile::Full => 24,
    };
    let depths: Vec<u32> = (12..=top).step_by(2).collect();
    let h = stats::holder_experiment(&WeightLaw::uniform(), &depths, 20, seed)?;
    let (gp, gm) = (h.gamma_plus_fit.intercept, h.gamma_minus_fit.intercept);
    c.record(&[gp, gm, h.gamma_plus_fit.slope, h.gamma_minus_fit.slope]);
    c.require((gp - UNIFORM_GAMMA_PLUS).abs() <= 0.05, format!("γ+ fit {gp:.4}"));
    c.require((gm - UNIFORM_GAMMA_MINUS).abs() <= 0.4, format!("γ- fit {gm:.4}"));
    Ok(c)
}

/// Laws supported on the vertices, where every entropy quantity vanishes.
fn vertex_laws() -> Vec<SimplexLaw> {
    let vertex = |x: f64| vec![x, 1.0 - x];
    vec![
        SimplexLaw::point(vertex(1.0)).expect("vertex"),
        SimplexLaw::discrete(vec![
            SimplexAtom { coords: vertex(1.0), prob: 0.3 },
            SimplexAtom { coords: vertex(0.0), prob: 0.7 },
        ])
        .expect("vertex law"),
    ]
}

fn entropy_suite(seed: u64) -> Result<Check> {
    let mut c = Check::new();
    let battery = entropy::random_battery(200, seed);
    let (mut mono, mut gap, mut l3l2) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    for v in &battery {
        mono = mono.max(entropy::monotonicity_report(v, entropy::SEARCH_STEP)?.max_forward_difference);
        for p in [1.0, 1.25, 1.5, 1.75, 2.0] {
            gap = gap.max(entropy::inequality_gap(v, p)?);
        }
        l3l2 = l3l2.max(entropy::l3l2_identity_check(v)?.gap.abs());
    }
    c.record(&[mono, gap, l3l2]);
    c.require(mono <= entropy::MONOTONE_TOL, format!("max ΔK {mono:.1e}"));
    c.require(gap <= 1e-10, format!("max gap {gap:.1e}"));
    c.require(l3l2 <= 1e-10, format!("l3l2 {l3l2:.1e}"));
    let mut exact = true;
    for v in vertex_laws() {
        exact &= entropy::monotonicity_report(&v, entropy::SEARCH_STEP)?.values.iter().all(|&k| k == 0.0);
        for p in [1.0, 1.5, 2.0] {
            exact &= entropy::inequality_gap(&v, p)? == 0.0;
        }
        exact &= entropy::l3l2_identity_check(&v)?.gap == 0.0;
    }
    c.require(exact, "vertex laws identically 0".into());
    Ok(c)
}

fn homeomorphism(seed: u64) -> Result<Check> {
    let mut c = Check::new();
    let law = WeightLaw::uniform();
    let (mut endpoints, mut monotone, mut round_trip, mut refine) = (true, true, 0.0f64, 0.0f64);
    for replica in 0..5 {
        let r = CascadeRealization::new(&law, seed, replica);
        let n = 20;
        endpoints &= r.f_eval(n, 0.0)? == 0.0 && r.f_eval(n, 1.0)? == 1.0;
        let grid = (0..=1000).map(|i| r.f_eval(n, i as f64 / 1000.0)).collect::<Result<Vec<_>>>()?;
        monotone &= grid.windows(2).all(|w| w[0] <= w[1]);
        let mut s = RngStream::for_replica(seed ^ 0x5eed, replica);
        for _ in 0..1000 {
            let y = s.uniform();
            let t = r.f_inverse(n, y, 1e-12)?;
            round_trip = round_trip.max((r.f_eval(n, t)? - y).abs());
        }
        for m in [4, 10] {
            for j in 0..=(1u64 << m) {
                let t = j as f64 / (1u64 << m) as f64;
                refine = refine.max((r.f_eval(m + 1, t)? - r.f_eval(m, t)?).abs());
            }
        }
    }
    c.record(&[round_trip, refine]);
    c.require(endpoints, "endpoints exact".into());
    c.require(monotone, "monotone".into());
    c.require(round_trip <= 1e-9, format!("round trip {round_trip:.1e}"));
    c.require(refine <= 1e-12, format!("refinement {refine:.1e}"));
    Ok(c)
}

fn fourier_dimension(profile: Profile, seed: u64) -> Result<Check> {
    let mut c = Check::new();
    let levels: Vec<u32> = (1..=10).collect();
    for law in [WeightLaw::uniform(), WeightLaw::symmetric_beta(2.0)?, WeightLaw::two_point(0.25)?] {
        let d_f = spectral::fourier_dimension(&law)?;
        let slope = stats::oracle_fdim_slope(&law, &levels, None)?;
        c.record(&[slope]);
        c.require((slope + d_f).abs() <= 1e-9, format!("{} oracle {slope:.9}", law.label()));
    }
    let (k, r) = match profile {
        Profile::Quick => (10, 1000),
        Profile::Full => (14, 3000),
    };
    let f = stats::fdim_fit(&WeightLaw::uniform(), k, &[2, 4, 6], r, seed)?;
    c.record(&[f.mc_slope, f.mc_slope_se]);
    c.require((f.mc_slope + 0.585).abs() <= 0.05, format!("MC slope {:.4} ± {:.4}", f.mc_slope, f.mc_slope_se));
    Ok(c)
}

fn sobolev(seed: u64) -> Result<Check> {
    let mut c = Check::new();
    let law = WeightLaw::uniform();
    let means = [8, 12, 16]
        .iter()
        .map(|&n| Ok(stats::sobolev_experiment(&law, n, 0.2, 32.0, 4096, 200, seed)?.estimate))
        .collect::<Result<Vec<f64>>>()?;
    c.record(&means);
    c.require(
        means[2] <= 1.5 * means[0],
        format!("means {:.4} / {:.4} / {:.4}", means[0], means[1], means[2]),
    );
    Ok(c)
}

fn run_check(id: u8, profile: Profile, seed: u64) -> Result<Check> {
    match id {
        1 => exact_constants(),
        2 => series_scaling(),
        3 => exponent_solver(),
        4 => structural_inequalities(seed),
        5 => moment2(seed),
        6 => varpi(profile, seed),
        7 => clt(profile, seed),
        8 => martingale_m2(seed),
        9 => holder(profile, seed),
        10 => entropy_suite(seed),
        11 => homeomorphism(seed),
        12 => fourier_dimension(profile, seed),
        13 => sobolev(seed),
        _ => Err(Error::ParameterError(format!("no criterion {id}"))),
    }
}

fn name_of(id: u8) -> &'static str {
    CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1)
}

/// Runs criteria 1 to 13; an error counts as a failure.
pub fn run_criterion(id: u8, profile: Profile, seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let (passed, detail, fingerprint) = match run_check(id, profile, seed) {
        Ok(c) => (c.passed, c.parts.join("; "), c.bits),
        Err(e) => (false, format!("error: {e}"), Vec::new()),
    };
    CriterionOutcome { id, name: name_of(id), passed, detail, wall_time_s: start.elapsed().as_secs_f64(), fingerprint }
}

/// Runs the whole suite, calling `on_result` as each criterion finishes.
/// Criterion 14 re-runs the first thirteen and compares fingerprints.
pub fn run_selftest(profile: Profile, seed: u64, mut on_result: impl FnMut(&CriterionOutcome)) -> SelftestReport {
    let mut criteria = Vec::with_capacity(CRITERIA.len());
    for id in 1..=13 {
        let outcome = run_criterion(id, profile, seed);
        on_result(&outcome);
        criteria.push(outcome);
    }
    let start = Instant::now();
    let mismatched: Vec<u8> = criteria
        .iter()
        .filter(|first| {
            let again = run_criterion(first.id, profile, seed);
            again.fingerprint != first.fingerprint || again.detail != first.detail
        })
        .map(|c| c.id)
        .collect();
    let determinism = CriterionOutcome {
        id: 14,
        name: name_of(14),
        passed: mismatched.is_empty(),
        detail: if mismatched.is_empty() {
            "13 criteria reproduced bit-identically".into()
        } else {
            format!("criteria {mismatched:?} differ on re-run")
        },
        wall_time_s: start.elapsed().as_secs_f64(),
        fingerprint: Vec::new(),
    };
    on_result(&determinism);
    criteria.push(determinism);
    let failed: Vec<u8> = criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    SelftestReport { profile, seed, passed: failed.is_empty(), failed, criteria }
}
