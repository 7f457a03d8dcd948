use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use langfeed::envs::optimization::{clamp_to_domain, TestFunction};
use langfeed::envs::parking::{clamp_action, format_action, integrate, parse_action, wrap_angle, DynamicsParams, VehicleState};
use langfeed::envs::reco::{normalize_title, parse_recommendations};
use langfeed::registry::registered_ids;
use langfeed::text::{numbers, point};
use langfeed::{make, EnvConfig, FeedbackKind, FeedbackSet};

fn env_ids() -> impl Strategy<Value = String> {
    prop::sample::select(registered_ids())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_actions_never_break_an_episode(id in env_ids(), seed in 0u64..1000, actions in prop::collection::vec(".{0,40}", 1..12)) {
        let mut env = make(EnvConfig::new(&id).seed(seed)).unwrap();
        env.reset(None).unwrap();
        for a in &actions {
            let out = env.step(a).unwrap();
            prop_assert!(out.reward.is_finite());
            prop_assert!(!(out.terminated && out.truncated));
            if out.done() {
                prop_assert!(env.step("again").is_err());
                break;
            }
        }
    }

    #[test]
    fn angles_wrap_into_half_open_interval(a in -1e4f64..1e4) {
        let w = wrap_angle(a);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        assert_abs_diff_eq!(w.sin(), a.sin(), epsilon = 1e-9);
        assert_abs_diff_eq!(w.cos(), a.cos(), epsilon = 1e-9);
    }

    #[test]
    fn parking_actions_round_trip(t in -1.0f64..1.0, s in -0.6f64..0.6) {
        let (pt, ps) = parse_action(&format_action(t, s)).unwrap();
        assert_abs_diff_eq!(pt, t, epsilon = 5e-4);
        assert_abs_diff_eq!(ps, s, epsilon = 5e-4);
    }

    #[test]
    fn clamped_actions_stay_in_range(t in -10.0f64..10.0, s in -10.0f64..10.0) {
        let params = DynamicsParams::default();
        let (ct, cs, changed) = clamp_action(t, s, &params);
        prop_assert!((-1.0..=1.0).contains(&ct));
        prop_assert!(cs.abs() <= params.max_steer);
        prop_assert_eq!(changed, ct != t || cs != s);
    }

    #[test]
    fn speed_stays_bounded(v in -3.0f64..5.0, throttle in -1.0f64..1.0, steer in -0.6f64..0.6) {
        let params = DynamicsParams::default();
        let s = VehicleState { x: 0.0, y: 0.0, heading: 0.0, speed: v.clamp(-params.v_max, params.v_max) };
        let next = integrate(&s, throttle, steer, &params).unwrap();
        prop_assert!(next.speed.abs() <= params.v_max);
    }

    #[test]
    fn title_normalization_is_idempotent(title in "[A-Za-z0-9 :,'!-]{0,30}") {
        let once = normalize_title(&title);
        prop_assert_eq!(normalize_title(&once), once.clone());
        prop_assert_eq!(normalize_title(&title.to_uppercase()), once);
    }

    #[test]
    fn recommendation_lists_are_deduplicated(titles in prop::collection::vec("[A-Za-z]{1,8}( [A-Za-z]{1,8})?", 1..8)) {
        let text = titles.iter().enumerate().map(|(i, t)| format!("{}. {t}", i + 1)).collect::<Vec<_>>().join("\n");
        let parsed = parse_recommendations(&text);
        let keys: Vec<String> = parsed.iter().map(|t| normalize_title(t)).collect();
        let unique: std::collections::BTreeSet<&String> = keys.iter().collect();
        prop_assert_eq!(unique.len(), keys.len());
    }

    #[test]
    fn printed_points_parse_back(xs in prop::collection::vec(-100.0f64..100.0, 1..5)) {
        let back = numbers(&point(&xs, 4));
        prop_assert_eq!(back.len(), xs.len());
        for (a, b) in back.iter().zip(&xs) {
            assert_abs_diff_eq!(*a, *b, epsilon = 5e-5);
        }
    }

    #[test]
    fn domain_clamp_is_a_projection(i in 0usize..8, xs in prop::collection::vec(-1e3f64..1e3, 2)) {
        let f = TestFunction::ALL[i];
        let (lo, hi) = f.domain();
        let (c, clamped) = clamp_to_domain(&f, &xs);
        prop_assert!(c.iter().all(|v| (lo..=hi).contains(v)));
        prop_assert_eq!(clamped, c != xs);
        prop_assert_eq!(clamp_to_domain(&f, &c).0, c);
    }

    #[test]
    fn feedback_renders_in_fixed_order(order in Just(FeedbackKind::ALL).prop_shuffle()) {
        let mut set = FeedbackSet::new();
        for k in order {
            set.push(k, k.code());
        }
        let expected = FeedbackKind::ALL.map(|k| k.code()).join("\n");
        prop_assert_eq!(set.render(), expected);
    }
}
