//! Exact small-instance computations: walk distributions by dynamic
//! programming and closed block sums for periodic environments.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::envgen::{bias_probabilities, bias_rates, EnvBounds, EnvKind, EnvModel, PeriodicPattern, Quenched, TimeFlavor};
use crate::error::{Error, Result};
use crate::rng::{site_word, unit_open};
use crate::renewal::check_gamma;
use crate::series::{SeriesStatus, SeriesValue};
use crate::special::{hurwitz_tail, zeta};

pub const MAX_EXACT_STEPS: u64 = 40;

/// A fixed environment repeating with period `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicEnv {
    model: EnvModel,
    pattern: PeriodicPattern,
}

impl PeriodicEnv {
    pub fn new(pattern: PeriodicPattern, time: TimeFlavor) -> Result<Self> {
        let model = EnvModel::new(EnvKind::Periodic { pattern: pattern.clone() }, time)?;
        Ok(Self { model, pattern })
    }

    pub fn discrete(omega_plus: Vec<f64>) -> Result<Self> {
        Self::new(PeriodicPattern::OmegaPlus(omega_plus), TimeFlavor::Discrete)
    }

    pub fn rates(rates: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(PeriodicPattern::Rates(rates), TimeFlavor::Continuous)
    }

    /// Pseudo-random pattern: `omega+` in `(0.05, 0.95)` for discrete time,
    /// rates in `(0.2, 5)` for continuous time.
    pub fn random(period: usize, seed: u64, time: TimeFlavor) -> Self {
        let u = |i: usize, lane: u64| unit_open(site_word(seed, 0x0EC1, i as i64, lane));
        let pattern = match time {
            TimeFlavor::Discrete => PeriodicPattern::OmegaPlus((0..period).map(|i| 0.05 + 0.9 * u(i, 0)).collect()),
            TimeFlavor::Continuous => PeriodicPattern::Rates(
                (0..period).map(|i| (0.2 * 25f64.powf(u(i, 0)), 0.2 * 25f64.powf(u(i, 1)))).collect(),
            ),
        };
        Self::new(pattern, time).expect("generated pattern is valid")
    }

    pub fn period(&self) -> usize {
        self.pattern.len()
    }

    pub fn model(&self) -> &EnvModel {
        &self.model
    }

    pub fn pattern(&self) -> &PeriodicPattern {
        &self.pattern
    }

    #[inline]
    fn at(&self, x: i64) -> (f64, f64) {
        self.pattern.rates_at(x.rem_euclid(self.period() as i64) as usize)
    }
}

impl Quenched for PeriodicEnv {
    fn weights(&mut self, x: i64) -> (f64, f64) {
        self.at(x)
    }

    fn bounds(&self) -> EnvBounds {
        self.model.bounds()
    }
}

/// Exact law of `X_n` on `{-n, ..., n}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkDistribution {
    pub steps: u64,
    /// `masses[k]` is `P(X_n = k - n)`.
    pub masses: Vec<f64>,
}

impl WalkDistribution {
    pub fn mass(&self, x: i64) -> f64 {
        let k = x + self.steps as i64;
        if k < 0 || k as usize >= self.masses.len() {
            0.0
        } else {
            self.masses[k as usize]
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let n = self.steps as i64;
        self.masses.iter().enumerate().map(move |(k, p)| (k as i64 - n, *p))
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.positions().map(|(x, p)| x as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.positions().map(|(x, p)| (x as f64 - m).powi(2) * p).sum()
    }

    /// Total-variation distance to the empirical law of `samples`.
    pub fn total_variation(&self, samples: &[i64]) -> f64 {
        let n = self.steps as i64;
        let mut counts = vec![0u64; self.masses.len()];
        let mut outside = 0u64;
        for &x in samples {
            if x.abs() <= n {
                counts[(x + n) as usize] += 1;
            } else {
                outside += 1;
            }
        }
        let total = samples.len() as f64;
        let inside: f64 = self.masses.iter().zip(&counts).map(|(p, c)| (p - *c as f64 / total).abs()).sum();
        0.5 * (inside + outside as f64 / total)
    }
}

/// Forward dynamic programming over site probabilities, `n <= 40`.  The
/// environment's weights are read as jump probabilities or as rates; in
/// either case the step law is that of the biased jump chain.
pub fn exact_walk_distribution<E: Quenched>(env: &mut E, lambda: f64, n: u64) -> Result<WalkDistribution> {
    if n > MAX_EXACT_STEPS {
        return Err(Error::InvalidArgument(format!("exact distributions are limited to {MAX_EXACT_STEPS} steps, got {n}")));
    }
    let w = n as i64;
    let plus: Vec<f64> = (-w..=w)
        .map(|x| {
            let (l, r) = env.weights(x);
            bias_probabilities(l / (l + r), r / (l + r), lambda).1
        })
        .collect();
    let mut p = vec![0.0; 2 * n as usize + 1];
    p[n as usize] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0; p.len()];
        for (k, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            // the walk never leaves [-n, n] within n steps
            if k + 1 < p.len() {
                next[k + 1] += mass * plus[k];
            }
            if k > 0 {
                next[k - 1] += mass * (1.0 - plus[k]);
            }
        }
        p = next;
    }
    Ok(WalkDistribution { steps: n, masses: p })
}

/// `sum_{i>=0} c_{-i} prod_{j<i} rho_{-j}` for periodic coefficients,
/// summed as one period over `1 - prod_period rho`.
fn block_geometric(c: &[f64], rho: &[f64]) -> SeriesValue {
    let log_block: f64 = rho.iter().map(|r| r.ln()).sum();
    if log_block >= 0.0 {
        return SeriesValue::diverged(c.len() as u64);
    }
    let mut head = 0.0;
    let mut prod = 1.0;
    for (ci, ri) in c.iter().zip(rho) {
        head += ci * prod;
        prod *= ri;
    }
    SeriesValue::exact(head / -log_block.exp_m1())
}

/// Exact `S-bar(lambda)`; diverges iff `prod_period rho * e^{-2 lambda L} >= 1`.
pub fn exact_sbar_periodic(env: &PeriodicEnv, lambda: f64) -> SeriesValue {
    let l = env.period() as i64;
    let (c, rho): (Vec<f64>, Vec<f64>) = (0..l)
        .map(|i| {
            let (a, b) = env.at(-i);
            let (wm, wp) = bias_probabilities(a / (a + b), b / (a + b), lambda);
            (1.0 / wp, wm / wp)
        })
        .unzip();
    block_geometric(&c, &rho)
}

/// Exact `S-hat(lambda)` for the rates of a periodic environment.
pub fn exact_shat_periodic(env: &PeriodicEnv, lambda: f64) -> SeriesValue {
    let l = env.period() as i64;
    let (c, rho): (Vec<f64>, Vec<f64>) = (0..l)
        .map(|i| {
            let (a, b) = env.at(-i);
            let (rm, rp) = bias_rates(a, b, lambda);
            (1.0 / rp, rm / rp)
        })
        .unzip();
    block_geometric(&c, &rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tau1Routes {
    /// Solution of the one-step recursion over a period by LU factorization.
    pub linear_solve: f64,
    /// The block-geometric `S-hat` sum.
    pub block_sum: f64,
}

impl Tau1Routes {
    pub fn relative_gap(&self) -> f64 {
        (self.linear_solve - self.block_sum).abs() / self.block_sum.abs()
    }
}

/// Mean first-passage time from 0 to 1 in continuous time: the recursion
/// `t_x = 1/r+_x(l) + rho_x(l) t_{x-1}` closes over one period.
pub fn exact_tau1_periodic_continuous(env: &PeriodicEnv, lambda: f64) -> Result<Tau1Routes> {
    let l = env.period();
    let mut b = DVector::zeros(l);
    let mut m = DMatrix::identity(l, l);
    // unknown k is the passage time from site -k to -k+1
    let mut log_block = 0.0;
    for k in 0..l {
        let (a, r) = env.at(-(k as i64));
        let (rm, rp) = bias_rates(a, r, lambda);
        b[k] = 1.0 / rp;
        m[(k, (k + 1) % l)] -= rm / rp;
        log_block += (rm / rp).ln();
    }
    if log_block >= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "passage times are infinite: period product of rho(lambda) is {}",
            log_block.exp()
        )));
    }
    let t = m.lu().solve(&b).ok_or_else(|| Error::InvalidArgument("singular passage-time system".into()))?;
    let block = exact_shat_periodic(env, lambda);
    Ok(Tau1Routes { linear_solve: t[0], block_sum: block.value })
}

/// Exact `E[Z_0 ... Z_n]`, `n = 0..=n_max`, for the stationary renewal
/// environment with `Z_k = 1/2` on renewal points and `1` elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalMoments {
    pub gamma: f64,
    pub values: Vec<f64>,
}

pub const MAX_RENEWAL_MOMENTS: usize = 50_000;

impl RenewalMoments {
    pub fn new(gamma: f64, n_max: usize) -> Result<Self> {
        check_gamma(gamma)?;
        if n_max > MAX_RENEWAL_MOMENTS {
            return Err(Error::InvalidArgument(format!("n_max {n_max} exceeds {MAX_RENEWAL_MOMENTS}")));
        }
        let z = zeta(gamma);
        let gap_pmf: Vec<f64> = (0..=n_max)
            .map(|j| if j == 0 { 0.0 } else { (j as f64).powf(-gamma) - ((j + 1) as f64).powf(-gamma) })
            .collect();
        // u[m] = E[2^{-|tau ∩ (0, m]|} | 0 in tau]
        let mut u = vec![0.0; n_max + 1];
        for m in 0..=n_max {
            let mut s = ((m + 1) as f64).powf(-gamma);
            for j in 1..=m {
                s += gap_pmf[j] * 0.5 * u[m - j];
            }
            u[m] = s;
        }
        let first: Vec<f64> = (0..=n_max).map(|m| ((m + 1) as f64).powf(-gamma) / z).collect();
        let values = (0..=n_max)
            .map(|n| {
                let tail = hurwitz_tail(gamma, n as u64 + 2) / z;
                tail + 0.5 * (0..=n).map(|m| first[m] * u[n - m]).sum::<f64>()
            })
            .collect();
        Ok(Self { gamma, values })
    }

    /// `E[S-bar(lambda)] = 1 + 2 sum_i (A e^{-2 lambda})^{i+1} E[Z_0 ... Z_i]`.
    ///
    /// Below the critical bias the terms do not decay and the series diverges.
    /// Above it the tail is bounded by a geometric series.  At the critical
    /// point the tail is estimated from the `n^{1-gamma}` decay and the status
    /// is `Inconclusive`.
    pub fn esbar(&self, a: f64, lambda: f64) -> SeriesValue {
        let g = a * (-2.0 * lambda).exp();
        let n = self.values.len();
        let critical = (g - 1.0).abs() <= 1e-12;
        if g > 1.0 && !critical {
            return SeriesValue::diverged(n as u64);
        }
        let mut pow = 1.0;
        let mut sum = 0.0;
        for &e in &self.values {
            pow *= g;
            sum += pow * e;
        }
        let value = 1.0 + 2.0 * sum;
        let (error_bound, status) = if critical {
            let last = *self.values.last().unwrap_or(&1.0);
            let tail = 2.0 * last * n as f64 / (self.gamma - 2.0);
            (tail, SeriesStatus::Inconclusive)
        } else {
            let tail = 2.0 * pow * g / (1.0 - g);
            let status = if tail <= 1e-12 * value { SeriesStatus::Converged } else { SeriesStatus::Inconclusive };
            (tail, status)
        };
        SeriesValue { value: value + if critical { error_bound } else { 0.0 }, error_bound, status, terms_used: n as u64 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{sbar_quenched, shat_quenched};
    use crate::series::SeriesOptions;

    #[test]
    fn one_step_and_binomial() {
        let mut env = PeriodicEnv::discrete(vec![0.3, 0.6]).unwrap();
        let d = exact_walk_distribution(&mut env, 0.4, 1).unwrap();
        let (wm, wp) = bias_probabilities(0.7, 0.3, 0.4);
        assert!((d.mass(1) - wp).abs() < 1e-15 && (d.mass(-1) - wm).abs() < 1e-15);
        let mut env = PeriodicEnv::discrete(vec![0.5]).unwrap();
        let d = exact_walk_distribution(&mut env, 0.0, 4).unwrap();
        for (x, k) in [(-4, 1.0), (-2, 4.0), (0, 6.0), (2, 4.0), (4, 1.0), (1, 0.0), (-3, 0.0)] {
            assert_eq!(d.mass(x), k / 16.0);
        }
        assert!(exact_walk_distribution(&mut env, 0.0, 41).is_err());
    }

    #[test]
    fn deterministic_mean_near_tanh() {
        let mut env = PeriodicEnv::discrete(vec![0.5]).unwrap();
        let d = exact_walk_distribution(&mut env, 1.0, 30).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert!((d.mean() / 30.0 - 1f64.tanh()).abs() < 0.02);
        let p = 1f64.exp() / (2.0 * 1f64.cosh());
        assert!((d.variance() - 30.0 * 4.0 * p * (1.0 - p)).abs() < 1e-10);
    }

    #[test]
    fn parity_and_normalization() {
        for seed in 0..20 {
            let mut env = PeriodicEnv::random(1 + seed as usize % 5, seed, TimeFlavor::Discrete);
            let n = 5 + seed % 30;
            let d = exact_walk_distribution(&mut env, 0.3, n).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-12);
            for (x, p) in d.positions() {
                if (x - n as i64).rem_euclid(2) == 1 {
                    assert_eq!(p, 0.0);
                }
            }
        }
    }

    #[test]
    fn sbar_examples() {
        let env = PeriodicEnv::discrete(vec![0.5]).unwrap();
        let s = exact_sbar_periodic(&env, 0.5);
        assert!((s.value - 1.0 / 0.5f64.tanh()).abs() < 1e-14);
        let env = PeriodicEnv::discrete(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert_eq!(exact_sbar_periodic(&env, 0.0).status, SeriesStatus::Diverged);
        assert!(exact_sbar_periodic(&env, 1e-3).is_converged());
        assert_eq!(exact_sbar_periodic(&env, -0.1).status, SeriesStatus::Diverged);
    }

    #[test]
    fn sbar_block_sum_matches_series() {
        let opts = SeriesOptions::with_tol(1e-12);
        for l in [1usize, 2, 3, 5] {
            for seed in 0..25 {
                let mut env = PeriodicEnv::random(l, 100 * l as u64 + seed, TimeFlavor::Discrete);
                let lambda = 0.2 + 0.1 * seed as f64;
                let exact = exact_sbar_periodic(&env, lambda);
                let series = sbar_quenched(&mut env, lambda, &opts);
                if !exact.is_converged() {
                    assert_ne!(series.status, SeriesStatus::Converged);
                    continue;
                }
                assert!(series.is_converged(), "L={l} seed={seed}");
                assert!((exact.value - series.value).abs() <= series.error_bound + 1e-12 * exact.value, "L={l} seed={seed}");
            }
        }
    }

    #[test]
    fn tau1_examples() {
        let env = PeriodicEnv::rates(vec![(1.0, 1.0)]).unwrap();
        let t = exact_tau1_periodic_continuous(&env, 1.0).unwrap();
        assert!((t.linear_solve - 0.42545906411966077).abs() < 1e-15);
        assert!(t.relative_gap() < 1e-12);
        let t = exact_tau1_periodic_continuous(&env, 30.0).unwrap();
        assert!(t.linear_solve < 1e-12);
        assert!(exact_tau1_periodic_continuous(&env, 0.0).is_err());
        let mut env = PeriodicEnv::rates(vec![(1.0, 2.0), (3.0, 0.5)]).unwrap();
        let t = exact_tau1_periodic_continuous(&env, 1.0).unwrap();
        assert!(t.relative_gap() < 1e-12);
        let s = shat_quenched(&mut env, 1.0, &SeriesOptions::with_tol(1e-13));
        assert!((s.value - t.linear_solve).abs() < 1e-12);
    }

    #[test]
    fn renewal_moments_small_cases() {
        let r = RenewalMoments::new(3.0, 3000).unwrap();
        // n = 0: E[Z_0] = 1 - P(0 in tau) / 2
        let z = zeta(3.0);
        assert!((r.values[0] - (1.0 - 0.5 / z)).abs() < 1e-15);
        assert!(r.values.windows(2).all(|w| w[1] <= w[0]));
        assert!((r.values[1000] - 4.1672e-7).abs() < 1e-10);
        let s = r.esbar(2.0, 1.0);
        assert!(s.is_converged());
        assert!(s.value > 1.0 && s.value.is_finite());
        assert_eq!(r.esbar(2.0, 0.2).status, SeriesStatus::Diverged);
        let c = r.esbar(2.0, 0.5 * 2f64.ln());
        assert_eq!(c.status, SeriesStatus::Inconclusive);
        assert!((1.0 / c.value - 0.2415).abs() < 1e-3);
        assert!(RenewalMoments::new(2.0, 10).is_err());
    }
}
