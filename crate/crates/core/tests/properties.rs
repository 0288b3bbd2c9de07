use cascade_core::cascade::CascadeRealization;
use cascade_core::entropy::{self, SimplexAtom, SimplexLaw};
use cascade_core::fourier::{martingale_difference, mu_hat, mu_hat_signed, DifferenceMethod};
use cascade_core::spectral::{self, rho_series, Truncation};
use cascade_core::{Atom, NodePath, WeightLaw};
use proptest::prelude::*;

fn law() -> impl Strategy<Value = WeightLaw> {
    prop_oneof![
        Just(WeightLaw::uniform()),
        (0.2f64..20.0).prop_map(|a| WeightLaw::symmetric_beta(a).unwrap()),
        (0.01f64..0.49).prop_map(|a| WeightLaw::two_point(a).unwrap()),
        prop::collection::vec((0.01f64..0.49, 0.05f64..1.0), 1..4).prop_map(|pairs| {
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            let atoms = pairs
                .iter()
                .flat_map(|&(x, w)| {
                    let prob = 0.5 * w / total;
                    [Atom { value: x, prob }, Atom { value: 1.0 - x, prob }]
                })
                .collect();
            WeightLaw::discrete(atoms).unwrap()
        }),
    ]
}

/// Laws for tests that build realizations.
fn sampling_law() -> impl Strategy<Value = WeightLaw> {
    prop_oneof![
        Just(WeightLaw::uniform()),
        (0.01f64..0.49).prop_map(|a| WeightLaw::two_point(a).unwrap()),
        (0.5f64..5.0).prop_map(|a| WeightLaw::symmetric_beta(a).unwrap()),
    ]
}

fn simplex2() -> impl Strategy<Value = SimplexLaw> {
    prop_oneof![
        prop::collection::vec((0.0f64..=1.0, 0.01f64..1.0), 1..5).prop_map(|atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            SimplexLaw::discrete(
                atoms.iter().map(|&(x, w)| SimplexAtom { coords: vec![x, 1.0 - x], prob: w / total }).collect(),
            )
            .unwrap()
        }),
        (0.05f64..10.0).prop_map(|a| SimplexLaw::dirichlet(2, a).unwrap()),
        law().prop_map(SimplexLaw::from_weight_law),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moment_sums_are_normalised(law in law()) {
        prop_assert!((law.moment_sum(1.0).unwrap() - 1.0).abs() <= 1e-12);
        let m2 = law.moment_sum(2.0).unwrap();
        prop_assert!(0.5 < m2 && m2 < 1.0);
        for p in [0.5, 1.0, 2.0, 3.0, 5.0] {
            let direct = law.moment(p).unwrap();
            prop_assert!((law.moment_sum(p).unwrap() - 2.0 * direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn phi_is_convex(law in law()) {
        let grid: Vec<f64> = (0..=40).map(|i| 0.25 * i as f64).collect();
        let v: Vec<f64> = grid.iter().map(|&p| law.phi(p).unwrap()).collect();
        for w in v.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        }
    }

    #[test]
    fn spectral_structure(law in law()) {
        let d_f = spectral::fourier_dimension(&law).unwrap();
        let gp = spectral::gamma_plus(&law).unwrap().value;
        let gm = spectral::gamma_minus(&law).unwrap().value;
        prop_assert!(0.0 < gp && gp < 1.0 && 1.0 < gm, "γ+ {gp} γ- {gm}");
        prop_assert!(gp > d_f / 2.0);
        prop_assert!(spectral::biggins_margin(&law).unwrap() > 0.0);
        prop_assert!(spectral::supy_rate(&law).unwrap().value < 0.0);
        let c = spectral::clt_covariance(&law).unwrap();
        prop_assert!(c.varpi.abs() < c.rho && c.sigma_re > 0.0 && c.sigma_im > 0.0);
    }

    #[test]
    fn rho_scales_by_powers_of_two(law in law(), n in 1u32..=10) {
        let base = rho_series(&law, 1, Truncation::Infinite, 1e-16).unwrap();
        let scaled = rho_series(&law, 1 << n, Truncation::Infinite, 1e-16).unwrap();
        let factor = (2.0 * law.second_moment().unwrap()).powi(n as i32);
        let bound = base.tail_bound * factor + scaled.tail_bound + 1e-14 * scaled.value;
        prop_assert!((scaled.value - base.value * factor).abs() <= bound);
    }

    #[test]
    fn finite_rho_is_a_partial_sum(law in law(), s in 1u64..50, n in 1u32..16) {
        let lo = rho_series(&law, s, Truncation::Finite(n), 1e-15).unwrap().value;
        let hi = rho_series(&law, s, Truncation::Finite(n + 1), 1e-15).unwrap().value;
        let term = spectral::rho_term(&law, s, n + 1).unwrap();
        prop_assert!((hi - lo - term).abs() <= 1e-14 * hi.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_is_conserved_and_nested(law in sampling_law(), seed in any::<u64>(), n in 1u32..=14) {
        let r = CascadeRealization::new(&law, seed, 0);
        let masses = r.leaf_masses(n).unwrap();
        let total: f64 = masses.iter().sum();
        prop_assert!((total - 1.0).abs() <= (1u64 << n) as f64 * 1e-15);
        let parents = r.leaf_masses(n - 1).unwrap();
        for (i, p) in parents.iter().enumerate() {
            prop_assert!((masses[2 * i] + masses[2 * i + 1] - p).abs() <= 1e-14 * p);
        }
        let v = NodePath::new(n, seed % (1u64 << n)).unwrap();
        prop_assert_eq!(r.leaf_mass(v).unwrap(), masses[v.index() as usize]);
    }

    #[test]
    fn extremes_grow_with_depth(law in sampling_law(), seed in any::<u64>()) {
        let profile = CascadeRealization::new(&law, seed, 1).extremal_profile(12).unwrap();
        for w in profile.windows(2) {
            prop_assert!(w[1].min_s >= w[0].min_s && w[1].max_s >= w[0].max_s);
        }
    }

    #[test]
    fn sup_y_is_the_minimal_walk(law in sampling_law(), seed in any::<u64>(), n in 1u32..=12) {
        // ln sup Y = -2 min S - n ln(2 E[W0^2]).
        let r = CascadeRealization::new(&law, seed, 2);
        let sup = r.sup_y(n).unwrap().ln();
        let min_s = r.extremal_logmass(n).unwrap().min_s;
        let expected = -2.0 * min_s - n as f64 * (2.0 * law.second_moment().unwrap()).ln();
        prop_assert!((sup - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
    }

    #[test]
    fn homeomorphism_is_monotone_and_refines(law in sampling_law(), seed in any::<u64>(), n in 1u32..=16) {
        let r = CascadeRealization::new(&law, seed, 3);
        let values: Vec<f64> = (0..=1000).map(|i| r.f_eval(n, i as f64 / 1000.0).unwrap()).collect();
        prop_assert_eq!(values[0], 0.0);
        prop_assert_eq!(values[1000], 1.0);
        for w in values.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        let m = n.min(8);
        for j in 0..=(1u64 << m) {
            let t = j as f64 / (1u64 << m) as f64;
            prop_assert!((r.f_eval(n + 1, t).unwrap() - r.f_eval(n, t).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn inverse_round_trips(law in sampling_law(), seed in any::<u64>(), y in 0.0f64..=1.0) {
        let r = CascadeRealization::new(&law, seed, 4);
        let t = r.f_inverse(20, y, 1e-12).unwrap();
        prop_assert!((r.f_eval(20, t).unwrap() - y).abs() <= 1e-9);
    }

    #[test]
    fn realizations_are_pure_functions_of_the_seed(law in sampling_law(), seed in any::<u64>(), replica in any::<u64>()) {
        let a = CascadeRealization::new(&law, seed, replica).leaf_masses(8).unwrap();
        let b = CascadeRealization::new(&law, seed, replica).leaf_masses(8).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn coefficients_are_bounded_and_conjugate(law in sampling_law(), seed in any::<u64>(), n in 1u32..=12, s in 1i64..5000) {
        let r = CascadeRealization::new(&law, seed, 5);
        let plus = mu_hat_signed(&r, n, s).unwrap();
        let minus = mu_hat_signed(&r, n, -s).unwrap();
        prop_assert!(plus.norm() <= 1.0 + 1e-12);
        prop_assert_eq!(minus, plus.conj());
    }

    #[test]
    fn coefficients_vanish_at_multiples_of_the_resolution(law in sampling_law(), seed in any::<u64>(), n in 1u32..=12, j in 1u64..20) {
        let r = CascadeRealization::new(&law, seed, 6);
        prop_assert_eq!(mu_hat(&r, n, j << n).unwrap().norm(), 0.0);
    }

    #[test]
    fn differences_telescope(law in sampling_law(), seed in any::<u64>(), n in 1u32..=10, s in 1u64..200) {
        let r = CascadeRealization::new(&law, seed, 7);
        let mut sum = num_complex::Complex64::new(0.0, 0.0);
        for m in 1..=n {
            sum += martingale_difference(&r, m, s, DifferenceMethod::Series).unwrap();
        }
        prop_assert!((sum - mu_hat(&r, n, s).unwrap()).norm() <= 1e-12);
    }

    #[test]
    fn k_vanishes_at_one_and_is_monotone(v in simplex2()) {
        if let entropy::SimplexKind::DiscreteAtoms(_) = v.kind() {
            prop_assert_eq!(entropy::k(&v, 1.0).unwrap(), 0.0);
        }
        let report = entropy::monotonicity_report(&v, 0.01).unwrap();
        prop_assert!(report.max_forward_difference <= entropy::MONOTONE_TOL);
        for p in [1.0, 1.25, 1.5, 1.75, 2.0] {
            prop_assert!(entropy::inequality_gap(&v, p).unwrap() <= 1e-10);
        }
        prop_assert!(entropy::l3l2_identity_check(&v).unwrap().gap.abs() <= 1e-10);
    }

    #[test]
    fn k_of_reciprocal_is_convex(v in simplex2()) {
        let ts: Vec<f64> = (0..=60).map(|i| 1.0 / 3.0 + i as f64 * (2.0 / 3.0) / 60.0).collect();
        let ks: Vec<f64> = ts.iter().map(|&t| entropy::k(&v, 1.0 / t).unwrap()).collect();
        for w in ks.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        }
    }
}
