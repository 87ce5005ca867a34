mod common;

use common::{random_control, random_map, random_table, tree_contraction};
use crm_core::axioms::{
    classify, evaluate_instance, mirrored, verify, AxiomSystem, Verdict, VerifyOptions,
};
use crm_core::contraction::{
    bound_violations, check_fisher, fit_banach, fit_kannan, fit_reich, Constants, FisherVariant,
    Map, MapSpec,
};
use crm_core::num::DEFAULT_TOL;
use crm_core::orbit::{
    condition_estimate, decay_check, orbit_to_horizon, picard, uniqueness_probe,
};
use crm_core::space::{
    materialize, Carrier, ControlSpec, DistanceSpec, Fallback, Interval, Space, SpaceDef,
};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed_c0de),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Finite points plus one sampled interval with the absolute-difference fallback.
fn mixed_def(finite: Vec<f64>, lo: f64, width: f64, grid_n: usize) -> SpaceDef {
    SpaceDef {
        carrier: Carrier {
            finite: finite.into_iter().map(Into::into).collect(),
            intervals: vec![Interval {
                lo,
                hi: lo + width,
                grid_n,
            }],
        },
        distance: DistanceSpec {
            entries: Vec::new(),
            fallback: Some(Fallback::AbsDifference),
            symmetric_closure: true,
        },
        alpha: ControlSpec::MaxPlus { c: 1.0 },
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn distance_and_control_axioms_hold_structurally(seed in any::<u64>(), n in 2usize..7) {
        let mut r = rng(seed);
        let alpha = random_control(&mut r);
        let s = random_table(&mut r, n, 0.01, 5.0, alpha);
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(s.d(i, j).to_bits(), s.d(j, i).to_bits());
                prop_assert_eq!(s.d(i, j) == 0.0, i == j);
                prop_assert!(s.a(i, j).unwrap() >= 1.0);
            }
        }
    }

    #[test]
    fn materialize_is_idempotent(
        finite in proptest::collection::vec(-3.0f64..3.0, 0..5),
        lo in -2.0f64..2.0,
        width in 0.1f64..3.0,
        grid_n in 2usize..15,
    ) {
        let def = mixed_def(finite, lo, width, grid_n);
        match materialize(&def) {
            Ok(a) => {
                let b = materialize(&def).unwrap();
                prop_assert_eq!(&a, &b);
                for (i, p) in a.iter().enumerate() {
                    for q in &a[i + 1..] {
                        prop_assert!(!p.same_as(q));
                    }
                }
            }
            // two finite literals may collide under different labels
            Err(e) => {
                let conflict = matches!(e, crm_core::Error::ConflictingValue { .. } | crm_core::Error::ConflictingLabel { .. });
                prop_assert!(conflict, "{}", e);
            }
        }
    }

    #[test]
    fn witnesses_re_evaluate_and_mirror(seed in any::<u64>(), n in 4usize..7) {
        let mut r = rng(seed);
        let alpha = random_control(&mut r);
        let s = random_table(&mut r, n, 0.05, 3.0, alpha);
        let opts = VerifyOptions::default();
        for sys in [AxiomSystem::Metric, AxiomSystem::Rectangular, AxiomSystem::ControlledMetric,
                    AxiomSystem::ExtendedRectB, AxiomSystem::ControlledRect] {
            let rep = verify(&s, sys, opts).unwrap();
            let expected = (n * (n - 1) * (n - 2) * if sys.intermediates() == 2 { n - 3 } else { 1 }) as u64;
            prop_assert_eq!(rep.checked_count, expected);
            if let Some(w) = &rep.witness {
                prop_assert_eq!(rep.verdict, Verdict::Violated);
                let again = evaluate_instance(&s, sys, &w.indices).unwrap();
                prop_assert!(again.lhs > again.rhs + opts.tol);
                // both controls in this family are symmetric
                let m = evaluate_instance(&s, sys, &mirrored(&w.indices)).unwrap();
                prop_assert!((m.margin - w.margin).abs() <= 1e-12 * (1.0 + w.margin.abs()));
            } else {
                prop_assert!(rep.min_margin.unwrap() >= -opts.tol);
            }
        }
    }

    #[test]
    fn verification_is_deterministic_across_jobs(seed in any::<u64>(), n in 4usize..8, jobs in 2usize..5) {
        let mut r = rng(seed);
        let alpha = random_control(&mut r);
        let s = random_table(&mut r, n, 0.05, 3.0, alpha);
        let one = verify(&s, AxiomSystem::ControlledRect, VerifyOptions { tol: DEFAULT_TOL, jobs: 1 }).unwrap();
        let many = verify(&s, AxiomSystem::ControlledRect, VerifyOptions { tol: DEFAULT_TOL, jobs }).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn lattice_holds_for_const_control(seed in any::<u64>(), s_const in 1.0f64..3.0) {
        let mut r = rng(seed);
        let s = random_table(&mut r, 5, 0.05, 3.0, ControlSpec::Const { s: s_const });
        let c = classify(&s, VerifyOptions::default()).unwrap();
        prop_assert!(c.lattice_ok(), "{:?}", c.lattice);
        // a rectangular b-metric with constant s is controlled rectangular with alpha = s
        if c.verdict(AxiomSystem::RectangularB(s_const)).unwrap().holds() {
            prop_assert!(c.verdict(AxiomSystem::ControlledRect).unwrap().holds());
        }
    }

    #[test]
    fn fitted_ratios_are_tight(seed in any::<u64>(), n in 3usize..7) {
        let mut r = rng(seed);
        let s = random_table(&mut r, n, 0.1, 3.0, ControlSpec::default());
        let map = random_map(&mut r, &s);
        let eps = 1e-6;
        for cert in [fit_banach(&s, &map, DEFAULT_TOL).unwrap(),
                     fit_kannan(&s, &map, DEFAULT_TOL).unwrap(),
                     fit_reich(&s, &map, DEFAULT_TOL).unwrap()] {
            let Some(pair) = cert.worst_indices else { continue };
            if !cert.worst_ratio.is_finite() {
                continue;
            }
            let with = |k: f64| match cert.constants {
                Constants::Banach { .. } => Constants::Banach { k },
                Constants::Kannan { .. } => Constants::Kannan { k },
                Constants::Reich { .. } => Constants::Reich { lambda: k },
                c => c,
            };
            let below = bound_violations(&s, &map, with(cert.worst_ratio - eps), 0.0).unwrap();
            prop_assert!(below.contains(&pair), "{:?} not in {:?}", pair, below);
            let above = bound_violations(&s, &map, with(cert.worst_ratio + eps), 0.0).unwrap();
            prop_assert!(above.is_empty(), "{:?}", above);
        }
    }

    #[test]
    fn reich_ratio_never_exceeds_banach(seed in any::<u64>(), n in 3usize..7) {
        let mut r = rng(seed);
        let s = random_table(&mut r, n, 0.1, 3.0, ControlSpec::default());
        let map = random_map(&mut r, &s);
        let b = fit_banach(&s, &map, DEFAULT_TOL).unwrap();
        let re = fit_reich(&s, &map, DEFAULT_TOL).unwrap();
        prop_assert!(re.worst_ratio <= b.worst_ratio + DEFAULT_TOL);
        prop_assert_eq!(fit_reich(&s, &map, DEFAULT_TOL).unwrap(), re);
    }

    #[test]
    fn orbits_follow_the_map(seed in any::<u64>(), n in 2usize..9) {
        let mut r = rng(seed);
        let tc = tree_contraction(&mut r, n, ControlSpec::default());
        for x0 in tc.space.points() {
            let t = picard(&tc.space, &tc.map, x0, 1e-9, 50).unwrap();
            for w in t.points.windows(2) {
                let img = tc.map.apply(&tc.space, &w[0]).unwrap();
                prop_assert_eq!(tc.space.distance(&w[1], &img).unwrap(), 0.0);
            }
            let z = t.fixed_point.as_ref().unwrap();
            let tz = tc.map.apply(&tc.space, z).unwrap();
            prop_assert!(tc.space.distance(z, &tz).unwrap() <= 1e-9);
            prop_assert!(t.step_dists.iter().chain(&t.skip_dists).all(|&d| d >= 0.0));
        }
    }

    #[test]
    fn const_control_estimate_is_exactly_s(s_const in 1.0f64..4.0, start in 0usize..11) {
        let mut def = mixed_def(Vec::new(), 1.0, 3.0, 11);
        def.alpha = ControlSpec::Const { s: s_const };
        let space = Space::new(def).unwrap();
        let map = Map::new(&space, serde_json::from_str::<MapSpec>(
            r#"{"kind":"registered","name":"sqrt_clamped","params":{"lo":1,"hi":4,"c":1}}"#).unwrap()).unwrap();
        let x0 = space.point(start).clone();
        prop_assume!(x0.value != Some(1.0));
        let est = condition_estimate(&space, &map, &x0, Constants::Banach { k: 0.5 }, 16, DEFAULT_TOL).unwrap();
        prop_assert!(est.ratio_values.iter().all(|v| v.value == s_const));
        prop_assert_eq!(est.estimate, s_const);
    }

    #[test]
    fn envelope_holds_at_certificate_rate(seed in any::<u64>(), n in 2usize..9) {
        let mut r = rng(seed);
        let tc = tree_contraction(&mut r, n, ControlSpec::default());
        let lambda = r_f64(&mut r, 0.01, 0.9);
        let beta = r_f64(&mut r, 0.01, 0.99 - lambda);
        let certs = [
            fit_banach(&tc.space, &tc.map, DEFAULT_TOL).unwrap(),
            fit_kannan(&tc.space, &tc.map, DEFAULT_TOL).unwrap(),
            fit_reich(&tc.space, &tc.map, DEFAULT_TOL).unwrap(),
            check_fisher(&tc.space, &tc.map, lambda, beta, FisherVariant::Product, DEFAULT_TOL).unwrap(),
        ];
        for cert in certs.iter().filter(|c| c.admissible) {
            let rate = cert.decay_rate.unwrap();
            for x0 in tc.space.points() {
                let t = orbit_to_horizon(&tc.space, &tc.map, x0, n + 2, 1e-12).unwrap();
                let rep = decay_check(&t, rate, 1e-9).unwrap();
                prop_assert!(rep.holds, "{:?} {:?}", cert.scheme, rep);
            }
        }
    }

    #[test]
    fn admissible_contractions_have_one_fixed_point(seed in any::<u64>(), n in 2usize..9) {
        let mut r = rng(seed);
        let alpha = ControlSpec::Const { s: r_f64(&mut r, 1.0, 2.0) };
        let tc = tree_contraction(&mut r, n, alpha);
        let b = fit_banach(&tc.space, &tc.map, DEFAULT_TOL).unwrap();
        prop_assert!(b.admissible);
        let x0 = tc.space.point(n - 1).clone();
        let k = b.worst_ratio.max(1e-3);
        let est = condition_estimate(&tc.space, &tc.map, &x0, Constants::Banach { k }, 8, DEFAULT_TOL).unwrap();
        prop_assume!(est.holds);
        let probe = uniqueness_probe(&tc.space, &tc.map, tc.space.points(), 1e-9, 50).unwrap();
        prop_assert!(probe.unique);
        prop_assert_eq!(probe.fixed_points[0].value, Some(1.0));
    }
}

fn r_f64<R: rand::Rng>(r: &mut R, lo: f64, hi: f64) -> f64 {
    r.gen_range(lo..hi)
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn decay_rates_lie_in_unit_interval(u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let k = u * 0.5;
        prop_assume!(k > 0.0);
        let kannan = Constants::Kannan { k }.decay_rate();
        prop_assert!(kannan > 0.0 && kannan < 1.0);
        prop_assert!((kannan - k / (1.0 - k)).abs() == 0.0);

        let lambda = u / 3.0;
        prop_assume!(lambda > 0.0);
        let reich = Constants::Reich { lambda }.decay_rate();
        prop_assert!(reich > 0.0 && reich < 1.0);

        let (l, b) = (u * (1.0 - 1e-9), v * (1.0 - u) * (1.0 - 1e-9));
        prop_assume!(l > 0.0 && b > 0.0 && l + b < 1.0);
        let fisher = Constants::Fisher { lambda: l, beta: b, variant: FisherVariant::Product };
        prop_assert!(fisher.in_range());
        let rate = fisher.decay_rate();
        prop_assert!(rate > 0.0 && rate < 1.0);
    }
}
