use std::f64::consts::{LN_2, PI};

use cascade_core::cascade::CascadeRealization;
use cascade_core::fourier::{martingale_difference, t_factor, DifferenceMethod};
use cascade_core::spectral::{self, rho_series, Truncation};
use cascade_core::stats::{self, McSummary};
use cascade_core::WeightLaw;

fn within_3se(estimate: &McSummary, oracle: f64) -> bool {
    stats::z_score(estimate.estimate, oracle, estimate.std_error).abs() <= 3.0
}

#[test]
fn martingale_differences_have_the_closed_form_second_moment() {
    let law = WeightLaw::uniform();
    for m in 1..=3 {
        for s in [1, 2, 3, 5] {
            let xs: Vec<f64> = (0..4000)
                .map(|r| {
                    let c = CascadeRealization::new(&law, 11, r);
                    martingale_difference(&c, m, s, DifferenceMethod::Series).unwrap().norm_sqr()
                })
                .collect();
            let summary = McSummary::from_samples(&xs, 11, 0.0).unwrap();
            let oracle = spectral::rho_term(&law, s, m).unwrap();
            if s % (1 << m) == 0 {
                assert_eq!(summary.estimate, 0.0, "m={m} s={s}");
            } else {
                assert!(within_3se(&summary, oracle), "m={m} s={s}: {summary:?} vs {oracle}");
            }
        }
    }
}

#[test]
fn t_factor_second_moment() {
    let law = WeightLaw::symmetric_beta(2.0).unwrap();
    let var = law.variance().unwrap();
    for (s, m) in [(1, 1), (1, 2), (3, 3), (5, 4)] {
        let xs: Vec<f64> = (0..20000u64)
            .map(|r| {
                let (w0, w1) = CascadeRealization::new(&law, 12, r).node_weights(cascade_core::NodePath::ROOT).unwrap();
                t_factor(w0, w1, s, m).norm_sqr()
            })
            .collect();
        let summary = McSummary::from_samples(&xs, 12, 0.0).unwrap();
        let theta = 2.0 * PI * s as f64 / (1u64 << m) as f64;
        let oracle = 4.0 * (2.0 - 2.0 * theta.cos()) * var;
        assert!(within_3se(&summary, oracle), "s={s} m={m}: {summary:?} vs {oracle}");
    }
}

#[test]
fn moment2_examples() {
    let law = WeightLaw::uniform();
    let r = stats::moment2_experiment(&law, 10, 1, 5000, 21).unwrap();
    let oracle = rho_series(&law, 1, Truncation::Finite(10), 1e-16).unwrap().value;
    assert_eq!(r.result.oracle, oracle);
    assert!(r.result.within_band, "{:?}", r.result);
    assert!(stats::moment2_experiment(&law, 21, 1, 100, 1).is_err());
    assert!(stats::moment2_experiment(&law, 10, 1, 99, 1).is_err());
}

#[test]
fn standard_error_scales_with_replicas() {
    let law = WeightLaw::uniform();
    let small = stats::moment2_experiment(&law, 8, 1, 500, 31).unwrap().result.summary;
    let large = stats::moment2_experiment(&law, 8, 1, 8000, 31).unwrap().result.summary;
    let ratio = small.std_error / large.std_error;
    assert!((ratio / 4.0 - 1.0).abs() <= 0.15, "ratio {ratio}");
}

#[test]
fn varpi_examples() {
    let tp = WeightLaw::two_point(0.25).unwrap();
    let v = stats::varpi_experiment(&tp, 5, 20000, 41).unwrap();
    assert!((v.re.oracle + 0.0379954).abs() < 1e-7);
    assert!(v.re.within_band && v.im.within_band, "{v:?}");

    let law = WeightLaw::uniform();
    let shallow = stats::varpi_experiment(&law, 2, 20000, 42).unwrap();
    let deep = stats::varpi_experiment(&law, 8, 20000, 43).unwrap();
    assert_eq!(shallow.re.oracle, deep.re.oracle);
    let se = shallow.re.summary.std_error.hypot(deep.re.summary.std_error);
    assert!((shallow.re.summary.estimate - deep.re.summary.estimate).abs() <= 3.0 * se);
    assert!(stats::varpi_experiment(&law, 1, 200, 1).is_err());
}

#[test]
fn clt_report_structure() {
    let law = WeightLaw::uniform();
    let rep = stats::clt_experiment(&law, 4, 8, 1000, 51).unwrap();
    assert!(rep.passes(), "{rep:?}");
    assert_eq!(rep.samples.len(), 1000);
    let oracle = spectral::clt_covariance_at_depth(&law, 8).unwrap();
    assert_eq!(rep.var_re.oracle, oracle.sigma_re);
    assert_eq!(rep.rho_k, oracle.rho);
    let json = serde_json::to_value(&rep).unwrap();
    assert!(json.get("samples").is_none());
    assert!(json["regression"]["slope"].is_f64());
    assert!(stats::clt_experiment(&law, 12, 13, 500, 1).is_err());
}

#[test]
fn sup_y_rate_carries_a_logarithmic_correction() {
    // At finite n the mean of (1/n) ln sup Y sits well below its limit; the
    // gap is the ln(n)/n correction of the minimal walk.
    let law = WeightLaw::uniform();
    let rate = spectral::supy_rate(&law).unwrap().value;
    assert!((rate + 0.0584567978649044).abs() < 1e-9);
    let shallow = stats::m2_experiment(&law, 10, 200, 61, 1e-4).unwrap();
    let deep = stats::m2_experiment(&law, 20, 200, 61, 1e-4).unwrap();
    let (a, b) = (shallow.log_sup_y_rate.summary.estimate, deep.log_sup_y_rate.summary.estimate);
    assert!(a < b && b < rate, "{a} {b} {rate}");
    assert!(deep.mean.within_band);
}

#[test]
fn holder_report_structure() {
    let law = WeightLaw::uniform();
    let depths = [10, 12, 14, 16, 18];
    let h = stats::holder_experiment(&law, &depths, 10, 71).unwrap();
    assert!(!h.skipped_sharpness);
    let d_f = spectral::fourier_dimension(&law).unwrap();
    for row in h.rows.iter().filter(|r| r.depth >= 16) {
        assert!(row.min_slope > d_f / 2.0);
    }
    for row in &h.rows {
        assert!(row.min_slope < h.gamma_minus_oracle && row.max_slope > 1.0);
    }
    let tp = WeightLaw::two_point(0.25).unwrap();
    let h = stats::holder_experiment(&tp, &depths, 4, 72).unwrap();
    assert!(h.skipped_sharpness);
    // Every path of a two-point cascade with n steps has min S ≥ n ln(4/3).
    assert!(h.rows.iter().all(|r| r.min_slope >= (4.0f64 / 3.0).ln() / LN_2 - 1e-12));
    assert!(stats::holder_experiment(&law, &[12, 27, 14], 2, 1).is_err());
}

#[test]
fn fdim_examples() {
    let beta = WeightLaw::symmetric_beta(2.0).unwrap();
    let levels: Vec<u32> = (1..=10).collect();
    let slope = stats::oracle_fdim_slope(&beta, &levels, None).unwrap();
    assert!((slope + 0.736966).abs() < 1e-6);
    let law = WeightLaw::uniform();
    let f = stats::fdim_fit(&law, 8, &[1, 3, 5], 500, 81).unwrap();
    assert!((f.oracle_slope + f.d_f).abs() < 1e-9);
    assert!((f.mc_slope - f.oracle_slope).abs() <= 3.0 * f.mc_slope_se, "{f:?}");
    assert!(stats::fdim_fit(&law, 20, &[2, 6], 10, 1).is_err());
}

#[test]
fn solver_matches_a_dense_grid() {
    let laws = [
        WeightLaw::uniform(),
        WeightLaw::two_point(0.25).unwrap(),
        WeightLaw::symmetric_beta(2.0).unwrap(),
        WeightLaw::symmetric_beta(5.0).unwrap(),
    ];
    let grid = |lo: f64, hi: f64| -> Vec<f64> {
        let (a, b) = (lo.ln(), hi.ln());
        (0..100_000).map(|i| (a + (b - a) * i as f64 / 99_999.0).exp()).collect()
    };
    for law in &laws {
        let plus = grid(1.0, 1e4)
            .into_iter()
            .map(|p| -law.phi(p).unwrap() / (p * LN_2))
            .fold(f64::NEG_INFINITY, f64::max);
        let solved = spectral::gamma_plus(law).unwrap().value;
        assert!((plus - solved).abs() <= 1e-6, "{}: γ+ grid {plus} vs {solved}", law.label());

        let hi = law.negative_moment_threshold().min(1e4);
        let minus = grid(1e-4, hi * (1.0 - 1e-9))
            .into_iter()
            .map(|p| law.phi(-p).unwrap() / (p * LN_2))
            .fold(f64::INFINITY, f64::min);
        let solved = spectral::gamma_minus(law).unwrap().value;
        assert!((minus - solved).abs() <= 1e-6, "{}: γ- grid {minus} vs {solved}", law.label());
    }
}

#[test]
fn summaries_do_not_depend_on_thread_count() {
    let law = WeightLaw::uniform();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let c = stats::clt_experiment(&law, 3, 6, 500, 91).unwrap();
            let m = stats::m2_experiment(&law, 10, 300, 92, 1e-4).unwrap();
            [c.var_re.summary.fingerprint(), c.var_im.summary.fingerprint(), m.mean.summary.fingerprint()]
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn csv_and_json_outputs() {
    let law = WeightLaw::uniform();
    let mut buf = Vec::new();
    stats::clt_experiment(&law, 3, 5, 500, 1).unwrap().write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("replica,re,im,m2\n"));
    assert_eq!(text.lines().count(), 501);

    let h = stats::holder_experiment(&law, &[4, 6, 8], 3, 1).unwrap();
    let mut buf = Vec::new();
    h.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 3 * 3);
    let json = serde_json::to_string(&h).unwrap();
    assert!(json.contains("\"gamma_plus_fit\""));
}
