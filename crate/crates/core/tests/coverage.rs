//! Interval coverage of the Monte Carlo estimators in environments where the
//! finite-horizon target is known exactly.

use rwre_core::estimate::{annealed_velocity, variance_estimate, EnsembleConfig, Estimate, Horizon};
use rwre_core::rng::derive_seed;
use rwre_core::simulate::{run_continuous, run_discrete, WalkOptions};
use rwre_core::{DiscreteEnv, EnvModel, RateEnv};

const BATCHES: u64 = 400;

/// Fraction of batches whose 95% interval holds `target`; the binomial
/// standard deviation at 400 batches is about 0.011.
fn coverage(target: f64, mut batch: impl FnMut(u64) -> Estimate) -> f64 {
    let hits = (0..BATCHES)
        .filter(|&k| {
            let e = batch(k);
            (e.mean - target).abs() <= 1.96 * e.std_error
        })
        .count();
    hits as f64 / BATCHES as f64
}

#[test]
fn discrete_velocity_intervals() {
    let model: EnvModel = "discrete rcm c=constant:2".parse().unwrap();
    let lambda = 0.3f64;
    let c = coverage(lambda.tanh(), |k| {
        annealed_velocity(&model, lambda, Horizon::Steps(50), &EnsembleConfig::new(100, derive_seed(77, 0, k))).unwrap().estimate
    });
    assert!((0.915..=0.985).contains(&c), "coverage {c}");
}

#[test]
fn continuous_velocity_intervals() {
    let model: EnvModel = "continuous rcm c=constant:1".parse().unwrap();
    let lambda = 0.5f64;
    let c = coverage(2.0 * lambda.sinh(), |k| {
        annealed_velocity(&model, lambda, Horizon::Time(20.0), &EnsembleConfig::new(100, derive_seed(78, 0, k))).unwrap().estimate
    });
    assert!((0.915..=0.985).contains(&c), "coverage {c}");
}

#[test]
fn variance_intervals() {
    let model: EnvModel = "discrete rcm c=constant:1".parse().unwrap();
    let (lambda, n) = (0.4f64, 40u64);
    let target = n as f64 * (1.0 - lambda.tanh().powi(2));
    let c = coverage(target, |k| {
        let xs: Vec<f64> = (0..400)
            .map(|r| {
                let mut env = DiscreteEnv::new(&model, 0).unwrap();
                run_discrete(&mut env, lambda, n, derive_seed(79, k, r), &WalkOptions::default()).unwrap().final_position as f64
            })
            .collect();
        variance_estimate(&xs)
    });
    assert!((0.915..=0.985).contains(&c), "coverage {c}");
}

#[test]
fn poisson_jump_counts() {
    // constant unit rates: the number of jumps by time t is Poisson(t (e^l + e^-l))
    let model: EnvModel = "continuous rcm c=constant:1".parse().unwrap();
    let (lambda, t) = (0.2f64, 5.0);
    let mean = t * 2.0 * lambda.cosh();
    let c = coverage(mean, |k| {
        let xs: Vec<f64> = (0..200)
            .map(|r| {
                let mut env = RateEnv::new(&model, 0).unwrap();
                run_continuous(&mut env, lambda, t, derive_seed(80, k, r), &WalkOptions::default()).unwrap().jumps as f64
            })
            .collect();
        Estimate::from_samples(&xs)
    });
    assert!((0.915..=0.985).contains(&c), "coverage {c}");
}
