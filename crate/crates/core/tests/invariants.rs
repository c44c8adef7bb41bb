use proptest::prelude::*;

use rwre_core::analytic::{sbar_quenched, sigma2_rcm, velocity_coinflip, velocity_iid_omega, velocity_rcm_continuous, velocity_rcm_discrete};
use rwre_core::envgen::{bias_probabilities, bias_rates, read_snapshot_discrete, write_snapshot_discrete, Reflected};
use rwre_core::oracle::{exact_sbar_periodic, exact_walk_distribution, PeriodicEnv};
use rwre_core::series::SeriesOptions;
use rwre_core::simulate::{right_threshold, run_discrete, WalkOptions};
use rwre_core::{DiscreteEnv, EnvModel, Quenched, RateEnv, ScalarDist, TimeFlavor};

const MODELS: [&str; 5] = [
    "rcm c=uniform:1,10",
    "rcm c=two-point:0.5,3:0.25",
    "iid-omega rho=uniform:0.3,2",
    "coinflip plus=two-point:1,2:0.5 minus=uniform:0.5,4",
    "renewal a=2 gamma=3",
];

fn model(i: usize, time: &str) -> EnvModel {
    format!("{time} {}", MODELS[i]).parse().unwrap()
}

fn two_point() -> impl Strategy<Value = ScalarDist> {
    (0.1f64..10.0, 0.1f64..10.0, 0.0f64..1.0).prop_map(|(a, b, p)| ScalarDist::two_point(a, b, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn thresholds_are_complementary(a in 1e-8f64..1e8, b in 1e-8f64..1e8) {
        prop_assert_eq!(right_threshold(a, b) + right_threshold(b, a), 1u64 << 53);
    }

    #[test]
    fn biased_probabilities(p in 0.001f64..0.999, lambda in -5.0f64..5.0) {
        let (l, r) = bias_probabilities(1.0 - p, p, lambda);
        prop_assert!((l + r - 1.0).abs() < 1e-15);
        let want = p / (1.0 - p) * (2.0 * lambda).exp();
        prop_assert!((r / l - want).abs() <= 1e-12 * want);
        let (l2, r2) = bias_probabilities(p, 1.0 - p, -lambda);
        prop_assert_eq!((l, r), (r2, l2));
        let (rm, rp) = bias_rates(1.0 - p, p, lambda);
        prop_assert!((rp / (rm + rp) - r).abs() < 1e-15);
    }

    #[test]
    fn rcm_velocity_is_odd_monotone_bounded(c in two_point(), l1 in -4.0f64..4.0, l2 in -4.0f64..4.0) {
        let (a, b) = (c.mean(), c.moment(-1.0));
        let v = |l| velocity_rcm_discrete(l, a, b).unwrap().v;
        prop_assert_eq!(v(-l1), -v(l1));
        prop_assert!(v(l1).abs() < 1.0);
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        prop_assert!(v(lo) <= v(hi));
        let w = |l| velocity_rcm_continuous(l, b).unwrap().v;
        prop_assert_eq!(w(-l1), -w(l1));
        prop_assert!(w(lo) <= w(hi));
    }

    #[test]
    fn coinflip_velocity_is_odd_and_monotone(c in two_point(), l1 in -3.0f64..3.0, l2 in -3.0f64..3.0) {
        let (a, b) = (c.mean(), c.moment(-1.0));
        let v = |l| velocity_coinflip(l, a, b).unwrap().v;
        prop_assert_eq!(v(-l1), -v(l1));
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        prop_assert!(v(lo) <= v(hi) + 1e-15 * v(hi).abs());
    }

    #[test]
    fn iid_omega_velocity_under_reflection(rho in two_point(), lambda in -3.0f64..3.0, l2 in -3.0f64..3.0) {
        let (m1, m_inv) = (rho.mean(), rho.moment(-1.0));
        let r = velocity_iid_omega(lambda, m1, m_inv).unwrap();
        let mirrored = velocity_iid_omega(-lambda, m_inv, m1).unwrap();
        prop_assert!((r.v + mirrored.v).abs() <= 1e-14);
        let (lm, lp) = (r.lambda_minus.unwrap(), r.lambda_plus.unwrap());
        prop_assert!(lm <= lp);
        if lambda > lm && lambda < lp {
            prop_assert_eq!(r.v, 0.0);
        }
        let (lo, hi) = if lambda <= l2 { (lambda, l2) } else { (l2, lambda) };
        let v = |l| velocity_iid_omega(l, m1, m_inv).unwrap().v;
        prop_assert!(v(lo) <= v(hi) + 1e-14);
    }

    #[test]
    fn rcm_diffusivity_is_even(c in two_point(), lambda in 0.01f64..4.0) {
        let m = [c.mean(), c.moment(-1.0), c.moment(2.0), c.moment(-2.0)];
        let plus = sigma2_rcm(lambda, m[0], m[1], m[2], m[3]).unwrap().sigma2;
        let minus = sigma2_rcm(-lambda, m[0], m[1], m[2], m[3]).unwrap().sigma2;
        prop_assert_eq!(plus, minus);
        prop_assert!(plus >= 0.0);
    }

    #[test]
    fn exact_distribution_is_a_law(period in 1usize..6, seed in 0u64..1000, lambda in -1.5f64..1.5, n in 0u64..=40) {
        let mut env = PeriodicEnv::random(period, seed, TimeFlavor::Discrete);
        let d = exact_walk_distribution(&mut env, lambda, n).unwrap();
        prop_assert!((d.total() - 1.0).abs() < 1e-12);
        for (x, p) in d.positions() {
            prop_assert!(p >= 0.0);
            if p > 0.0 {
                prop_assert!(x.unsigned_abs() <= n);
                prop_assert_eq!((x - n as i64).rem_euclid(2), 0);
            }
        }
        if n == 1 {
            let (_, r) = env.weights(0);
            let (l, r) = bias_probabilities(1.0 - r, r, lambda);
            prop_assert!((d.mean() - (r - l)).abs() < 1e-15);
        }
    }

    #[test]
    fn periodic_sbar_matches_block_sum(period in 1usize..5, seed in 0u64..1000, lambda in 0.3f64..2.0) {
        let mut env = PeriodicEnv::random(period, seed, TimeFlavor::Discrete);
        let exact = exact_sbar_periodic(&env, lambda);
        let series = sbar_quenched(&mut env, lambda, &SeriesOptions::with_tol(1e-12));
        if exact.is_converged() {
            prop_assert!(series.is_converged());
            prop_assert!((exact.value - series.value).abs() <= series.error_bound + 1e-11 * exact.value);
        }
    }

    #[test]
    fn window_extension_does_not_change_sites(i in 0usize..5, seed in any::<u64>(), x in -3000i64..3000, lo in -3000i64..0, hi in 0i64..3000) {
        let m = model(i, "discrete");
        let mut direct = DiscreteEnv::new(&m, seed).unwrap();
        let at_x = direct.omega_plus(x);
        let mut wide = DiscreteEnv::new(&m, seed).unwrap();
        wide.ensure(lo, hi);
        wide.ensure(lo - 500, hi + 500);
        prop_assert_eq!(wide.omega_plus(x).to_bits(), at_x.to_bits());
        prop_assert!(at_x > 0.0 && at_x < 1.0);
    }

    #[test]
    fn continuous_and_discrete_share_the_environment(i in 0usize..5, seed in any::<u64>(), x in -2000i64..2000) {
        let mut d = DiscreteEnv::new(&model(i, "discrete"), seed).unwrap();
        let mut r = RateEnv::new(&model(i, "continuous"), seed).unwrap();
        let (rm, rp) = r.rates(x);
        prop_assert!((d.omega_plus(x) - rp / (rm + rp)).abs() < 1e-15);
    }

    #[test]
    fn snapshots_round_trip(i in 0usize..5, seed in any::<u64>(), lo in -200i64..0, len in 0i64..400) {
        let mut e = DiscreteEnv::new(&model(i, "discrete"), seed).unwrap();
        e.ensure(lo, lo + len);
        let text = write_snapshot_discrete(&e);
        let mut back = read_snapshot_discrete(&text).unwrap();
        prop_assert_eq!(write_snapshot_discrete(&back), text.clone());
        for x in lo..=lo + len {
            prop_assert_eq!(back.omega_plus(x).to_bits(), e.omega_plus(x).to_bits());
        }
    }

    #[test]
    fn walks_replay_and_reflect(i in 0usize..5, env_seed in any::<u64>(), walk_seed in any::<u64>(), lambda in -1.0f64..1.0, n in 0u64..3000) {
        let m = model(i, "discrete");
        let opts = WalkOptions { record_path: true, ..Default::default() };
        let a = run_discrete(&mut DiscreteEnv::new(&m, env_seed).unwrap(), lambda, n, walk_seed, &opts).unwrap();
        let b = run_discrete(&mut DiscreteEnv::new(&m, env_seed).unwrap(), lambda, n, walk_seed, &opts).unwrap();
        prop_assert_eq!(&a, &b);
        let path = a.path.as_ref().unwrap();
        prop_assert_eq!(path.len() as u64, n + 1);
        prop_assert_eq!((a.final_position - n as i64).rem_euclid(2), 0);

        let mirror = WalkOptions { mirrored: true, ..opts };
        let mut r = Reflected(DiscreteEnv::new(&m, env_seed).unwrap());
        let c = run_discrete(&mut r, -lambda, n, walk_seed, &mirror).unwrap();
        let back = c.path.unwrap();
        prop_assert!(path.iter().zip(&back).all(|(p, q)| p.0 == q.0 && p.1 == -q.1));
    }

    #[test]
    fn two_point_moments(a in 0.1f64..10.0, b in 0.1f64..10.0, p in 0.0f64..1.0, k in -3i32..4) {
        let d = ScalarDist::two_point(a, b, p).unwrap();
        let want = (1.0 - p) * a.powi(k) + p * b.powi(k);
        prop_assert!((d.moment(k as f64) - want).abs() <= 1e-12 * want);
        prop_assert!(d.mean() * d.moment(-1.0) >= 1.0 - 1e-12);
    }

    #[test]
    fn uniform_moments_and_support(lo in 0.1f64..5.0, w in 0.01f64..10.0, u in 0.0f64..1.0) {
        let hi = lo + w;
        let d = ScalarDist::uniform(lo, hi).unwrap();
        prop_assert!((d.mean() - 0.5 * (lo + hi)).abs() <= 1e-14 * hi);
        let inv = (hi / lo).ln() / w;
        prop_assert!((d.moment(-1.0) - inv).abs() <= 1e-12 * inv);
        let x = d.sample(u);
        prop_assert!(x >= lo && x <= hi);
    }
}
