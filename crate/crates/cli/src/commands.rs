use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use cascade_core::cascade::CascadeRealization;
use cascade_core::entropy::{self, SimplexLaw};
use cascade_core::fourier::{self, ComplexCoefficient};
use cascade_core::selftest::{self, Profile};
use cascade_core::spectral::{self, rho_series, Truncation};
use cascade_core::stats::{self, Comparison};
use cascade_core::WeightLaw;
use serde_json::{json, Value};

use crate::config::{take, Params};
use crate::CliError;

pub struct Outcome {
    pub result: Value,
    pub passed: bool,
}

impl Outcome {
    fn ok(result: Value) -> Self {
        Self { result, passed: true }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn law(p: &mut Params) -> Result<WeightLaw, CliError> {
    let law = WeightLaw::from_spec(&take(&mut p.law, "uniform".into()))?;
    Ok(match p.tol {
        Some(tol) if tol > 0.0 => law.with_quadrature_tolerance(tol),
        Some(tol) => return Err(CliError::Usage(format!("tolerance {tol} must be positive"))),
        None => law,
    })
}

fn csv_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

/// Whether every z-score is within the optional threshold.
fn within(threshold: Option<f64>, zs: &[f64]) -> bool {
    threshold.is_none_or(|t| zs.iter().all(|z| z.abs() <= t))
}

fn z_of(cs: &[&Comparison]) -> Vec<f64> {
    cs.iter().map(|c| c.z_score).collect()
}

pub fn execute(name: &str, p: &mut Params, profile: Option<String>) -> Result<Outcome, CliError> {
    match name {
        "dims" => {
            let law = law(p)?;
            Ok(Outcome::ok(to_json(&spectral::dims_report(&law)?)))
        }
        "spectrum" => spectrum(p),
        "moments" => {
            let law = law(p)?;
            let (n, s, r, seed) = (take(&mut p.n, 10), take(&mut p.s, 1), take(&mut p.replicas, 1000), p.seed());
            let rep = stats::moment2_experiment(&law, n, s, r, seed)?;
            if let Some(path) = &p.csv {
                rep.write_csv(csv_file(path)?)?;
            }
            let passed = within(p.z_threshold, &z_of(&[&rep.result]));
            Ok(Outcome { result: to_json(&rep), passed })
        }
        "varpi" => {
            let law = law(p)?;
            let (n, r) = (take(&mut p.n, 10), take(&mut p.replicas, 5000));
            let rep = stats::varpi_experiment(&law, n, r, p.seed())?;
            if let Some(path) = &p.csv {
                rep.write_csv(csv_file(path)?)?;
            }
            let passed = within(p.z_threshold, &z_of(&[&rep.re, &rep.im]));
            Ok(Outcome { result: to_json(&rep), passed })
        }
        "clt" => {
            let law = law(p)?;
            let (n, k, r) = (take(&mut p.n, 5), take(&mut p.k, 13), take(&mut p.replicas, 2000));
            let rep = stats::clt_experiment(&law, n, k, r, p.seed())?;
            if let Some(path) = &p.csv {
                rep.write_csv(csv_file(path)?)?;
            }
            let mut zs = z_of(&[&rep.var_re, &rep.var_im, &rep.cov_re_im]);
            zs.extend([rep.slope_z, rep.intercept_z]);
            Ok(Outcome { passed: within(p.z_threshold, &zs), result: to_json(&rep) })
        }
        "m2" => {
            let law = law(p)?;
            let (n, r, eps) = (take(&mut p.n, 16), take(&mut p.replicas, 2000), take(&mut p.eps, 1e-4));
            let rep = stats::m2_experiment(&law, n, r, p.seed(), eps)?;
            if let Some(path) = &p.csv {
                rep.write_csv(csv_file(path)?)?;
            }
            // The sup Y rate is an asymptotic value, so only the mean is gated.
            let passed = within(p.z_threshold, &z_of(&[&rep.mean]));
            Ok(Outcome { result: to_json(&rep), passed })
        }
        "frostman" => {
            let law = law(p)?;
            let depths = take(&mut p.depths, (12..=24).step_by(2).collect());
            let r = take(&mut p.replicas, 20);
            let rep = stats::holder_experiment(&law, &depths, r, p.seed())?;
            if let Some(path) = &p.csv {
                rep.write_csv(csv_file(path)?)?;
            }
            Ok(Outcome::ok(to_json(&rep)))
        }
        "fdim" => {
            let law = law(p)?;
            let (k, r) = (take(&mut p.k, 14), take(&mut p.replicas, 3000));
            let levels = take(&mut p.levels, vec![2, 4, 6]);
            let rep = stats::fdim_fit(&law, k, &levels, r, p.seed())?;
            if let Some(path) = &p.csv {
                rep.write_csv(csv_file(path)?)?;
            }
            let comparisons: Vec<&Comparison> = rep.levels.iter().map(|l| &l.result).collect();
            let passed = within(p.z_threshold, &z_of(&comparisons));
            Ok(Outcome { result: to_json(&rep), passed })
        }
        "entropy" => entropy_command(p),
        "homeo" => homeo(p),
        "selftest" => {
            let profile: Profile = profile.as_deref().unwrap_or("quick").parse()?;
            let report = selftest::run_selftest(profile, p.seed(), |c| eprintln!("{c}"));
            Ok(Outcome { passed: report.passed, result: to_json(&report) })
        }
        other => Err(CliError::Usage(format!("unknown command {other}"))),
    }
}

fn spectrum(p: &mut Params) -> Result<Outcome, CliError> {
    let law = law(p)?;
    let (n, s_max, replica) = (take(&mut p.n, 10), take(&mut p.s_max, 64), take(&mut p.replica, 0));
    let r = CascadeRealization::new(&law, p.seed(), replica);
    let values = fourier::spectrum(&r, n, s_max)?;
    let coeffs: Vec<ComplexCoefficient> =
        values.iter().enumerate().map(|(s, &v)| ComplexCoefficient::new(s as i64, n, v)).collect();
    if let Some(path) = &p.csv {
        fourier::write_spectrum_csv(&coeffs, csv_file(path)?)?;
        let max_abs2 = coeffs.iter().skip(1).map(|c| c.abs2()).fold(0.0, f64::max);
        return Ok(Outcome::ok(json!({ "n": n, "s_max": s_max, "coefficients": coeffs.len(), "max_abs2": max_abs2 })));
    }
    let rows = coeffs
        .iter()
        .map(|c| {
            let expected = if c.s == 0 {
                1.0
            } else {
                rho_series(&law, c.s as u64, Truncation::Finite(n), spectral::DEFAULT_SERIES_TOL)?.value
            };
            Ok(json!({ "s": c.s, "re": c.re, "im": c.im, "abs2": c.abs2(), "expected_abs2": expected }))
        })
        .collect::<Result<Vec<Value>, CliError>>()?;
    Ok(Outcome::ok(json!({ "n": n, "s_max": s_max, "coefficients": rows })))
}

fn entropy_command(p: &mut Params) -> Result<Outcome, CliError> {
    let seed = p.seed();
    match take(&mut p.mode, "check".into()).as_str() {
        "check" => {
            let v = SimplexLaw::from_weight_law(law(p)?);
            let mono = entropy::monotonicity_report(&v, entropy::SEARCH_STEP)?;
            let gaps = [1.0, 1.25, 1.5, 1.75, 2.0]
                .iter()
                .map(|&q| Ok(json!({ "p": q, "gap": entropy::inequality_gap(&v, q)? })))
                .collect::<Result<Vec<Value>, CliError>>()?;
            let l3l2 = entropy::l3l2_identity_check(&v)?;
            let passed = mono.pass && l3l2.gap.abs() <= 1e-10;
            Ok(Outcome {
                result: json!({
                    "max_forward_difference": mono.max_forward_difference,
                    "at_p": mono.at_p,
                    "monotone": mono.pass,
                    "gaps": gaps,
                    "l3l2": l3l2,
                }),
                passed,
            })
        }
        "battery" => {
            let count = take(&mut p.count, 200);
            let battery = entropy::random_battery(count, seed);
            let (mut mono, mut gap, mut l3l2) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
            for v in &battery {
                mono = mono.max(entropy::monotonicity_report(v, entropy::SEARCH_STEP)?.max_forward_difference);
                for q in [1.0, 1.25, 1.5, 1.75, 2.0] {
                    gap = gap.max(entropy::inequality_gap(v, q)?);
                }
                l3l2 = l3l2.max(entropy::l3l2_identity_check(v)?.gap.abs());
            }
            let passed = mono <= entropy::MONOTONE_TOL && gap <= 1e-10 && l3l2 <= 1e-10;
            Ok(Outcome {
                result: json!({
                    "laws": count,
                    "max_forward_difference": mono,
                    "max_gap": gap,
                    "max_l3l2_gap": l3l2,
                    "pass": passed,
                }),
                passed,
            })
        }
        // A violation found by the search is a finding, not a failure.
        "search" => {
            let (dim, budget) = (take(&mut p.dim, 17), take(&mut p.budget, 30_000));
            Ok(Outcome::ok(to_json(&entropy::counterexample_search(dim, budget, seed)?)))
        }
        other => Err(CliError::Usage(format!("unknown entropy mode {other:?}, expected check, battery or search"))),
    }
}

fn homeo(p: &mut Params) -> Result<Outcome, CliError> {
    let law = law(p)?;
    let (n, replica) = (take(&mut p.n, 20), take(&mut p.replica, 0));
    let r = CascadeRealization::new(&law, p.seed(), replica);
    let ts = take(&mut p.t, vec![0.25, 0.5, 0.75]);
    let ys = take(&mut p.y, vec![0.25, 0.5, 0.75]);
    let values = ts
        .iter()
        .map(|&t| Ok(json!({ "t": t, "F": r.f_eval(n, t)? })))
        .collect::<Result<Vec<Value>, CliError>>()?;
    let inverses = ys
        .iter()
        .map(|&y| {
            let t = r.f_inverse(n, y, 1e-12)?;
            Ok(json!({ "y": y, "t": t, "residual": r.f_eval(n, t)? - y }))
        })
        .collect::<Result<Vec<Value>, CliError>>()?;
    if let Some(path) = &p.csv {
        let mut w = csv_file(path)?;
        use std::io::Write;
        writeln!(w, "t,F")?;
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            writeln!(w, "{t},{:e}", r.f_eval(n, t)?)?;
        }
        w.flush()?;
    }
    Ok(Outcome::ok(json!({ "n": n, "values": values, "inverses": inverses })))
}
