//! Quenched trajectory engines for the discrete-time walk and the
//! continuous-time walk.

use rand::{Rng, RngCore};
use rand_distr::Exp1;
use serde::Serialize;
use thiserror::Error;

use crate::envgen::Quenched;
use crate::rng::walk_rng;

pub const DEFAULT_RANGE_CAP: u64 = 10_000_000;
pub const DEFAULT_JUMP_BUDGET: u64 = 1 << 40;

const SCALE: f64 = 9_007_199_254_740_992.0; // 2^53
const ONE: u64 = 1 << 53;
const MASK: u64 = ONE - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum SimError {
    #[error("range cap exceeded: window of {span} sites exceeds cap {cap}")]
    RangeCap { span: u64, cap: u64 },
    #[error("jump budget of {budget} exhausted before the horizon")]
    JumpBudget { budget: u64 },
    #[error("budget of {budget} moves exhausted before reaching level {level}")]
    PassageBudget { budget: u64, level: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkOptions {
    pub range_cap: u64,
    pub jump_budget: u64,
    pub record_path: bool,
    /// Levels whose first hitting times are recorded.
    pub hitting_levels: Vec<i64>,
    /// Use `2^53 - 1 - U` in place of every direction uniform `U`.
    pub mirrored: bool,
}

impl Default for WalkOptions {
    fn default() -> Self {
        Self {
            range_cap: DEFAULT_RANGE_CAP,
            jump_budget: DEFAULT_JUMP_BUDGET,
            record_path: false,
            hitting_levels: Vec::new(),
            mirrored: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Elapsed {
    Steps(u64),
    Time(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub final_position: i64,
    pub elapsed: Elapsed,
    pub jumps: u64,
    pub min_position: i64,
    pub max_position: i64,
    /// `(level, first hitting time)` for every requested level that was reached.
    pub hitting_times: Vec<(i64, f64)>,
    /// `(time, position)` after every jump, starting with `(0, 0)`, when requested.
    pub path: Option<Vec<(f64, i64)>>,
    pub seed: u64,
}

/// Canonical right-step threshold: step right iff `U < threshold` for a
/// 53-bit uniform `U`.  `t(a, b) + t(b, a) = 2^53` holds exactly.
#[inline]
pub fn right_threshold(a: f64, b: f64) -> u64 {
    let s = a + b;
    if b > a {
        ONE - (a / s * SCALE) as u64
    } else {
        (b / s * SCALE) as u64
    }
}

struct Tape {
    lo: i64,
    thr: Vec<u64>,
    rate: Vec<f64>,
    em: f64,
    ep: f64,
    with_rates: bool,
}

impl Tape {
    fn new(lambda: f64, with_rates: bool) -> Self {
        Self { lo: 0, thr: Vec::new(), rate: Vec::new(), em: (-lambda).exp(), ep: lambda.exp(), with_rates }
    }

    fn site<E: Quenched>(&self, env: &mut E, x: i64) -> (u64, f64) {
        let (l, r) = env.weights(x);
        let a = l * self.em;
        let b = r * self.ep;
        (right_threshold(a, b), a + b)
    }

    #[cold]
    fn grow<E: Quenched>(&mut self, env: &mut E, x: i64, cap: u64) -> Result<(), SimError> {
        if self.thr.is_empty() {
            self.lo = x - 64;
            for y in self.lo..=x + 64 {
                let (t, s) = self.site(env, y);
                self.thr.push(t);
                if self.with_rates {
                    self.rate.push(s);
                }
            }
            return Ok(());
        }
        let hi = self.lo + self.thr.len() as i64 - 1;
        let span = self.thr.len() as i64;
        let (new_lo, new_hi) = if x < self.lo { (x.min(self.lo - span), hi) } else { (self.lo, x.max(hi + span)) };
        let width = (new_hi - new_lo + 1) as u64;
        let needed = (hi.max(x) - self.lo.min(x) + 1) as u64;
        if needed > cap {
            return Err(SimError::RangeCap { span: needed, cap });
        }
        let (new_lo, new_hi) = if width > cap {
            if x < self.lo {
                (hi - cap as i64 + 1, hi)
            } else {
                (self.lo, self.lo + cap as i64 - 1)
            }
        } else {
            (new_lo, new_hi)
        };
        if new_lo < self.lo {
            let mut thr = Vec::with_capacity((new_hi - new_lo + 1) as usize);
            let mut rate = Vec::new();
            for y in new_lo..self.lo {
                let (t, s) = self.site(env, y);
                thr.push(t);
                if self.with_rates {
                    rate.push(s);
                }
            }
            thr.extend_from_slice(&self.thr);
            self.thr = thr;
            if self.with_rates {
                rate.extend_from_slice(&self.rate);
                self.rate = rate;
            }
            self.lo = new_lo;
        }
        for y in hi + 1..=new_hi {
            let (t, s) = self.site(env, y);
            self.thr.push(t);
            if self.with_rates {
                self.rate.push(s);
            }
        }
        Ok(())
    }
}

struct Levels {
    up: Vec<i64>,
    down: Vec<i64>,
    iu: usize,
    id: usize,
    hits: Vec<(i64, f64)>,
}

impl Levels {
    fn new(levels: &[i64]) -> Self {
        let mut up: Vec<i64> = levels.iter().copied().filter(|l| *l > 0).collect();
        let mut down: Vec<i64> = levels.iter().copied().filter(|l| *l < 0).collect();
        up.sort_unstable();
        up.dedup();
        down.sort_unstable_by(|a, b| b.cmp(a));
        down.dedup();
        let mut hits = Vec::new();
        if levels.contains(&0) {
            hits.push((0, 0.0));
        }
        Self { up, down, iu: 0, id: 0, hits }
    }

    #[inline]
    fn next_up(&self) -> i64 {
        self.up.get(self.iu).copied().unwrap_or(i64::MAX)
    }

    #[inline]
    fn next_down(&self) -> i64 {
        self.down.get(self.id).copied().unwrap_or(i64::MIN)
    }

    fn finish(mut self) -> Vec<(i64, f64)> {
        self.hits.sort_by_key(|h| h.0);
        self.hits
    }
}

/// `n` steps of the discrete-time walk from 0 under bias `lambda`.
pub fn run_discrete<E: Quenched>(env: &mut E, lambda: f64, n: u64, seed: u64, opts: &WalkOptions) -> Result<Trajectory, SimError> {
    let mut rng = walk_rng(seed);
    let mut tape = Tape::new(lambda, false);
    tape.grow(env, 0, opts.range_cap)?;
    let mask = if opts.mirrored { MASK } else { 0 };
    let mut levels = Levels::new(&opts.hitting_levels);
    let (mut up, mut down) = (levels.next_up(), levels.next_down());
    let mut path = opts.record_path.then(|| vec![(0.0, 0i64)]);
    let (mut x, mut lo, mut hi) = (0i64, 0i64, 0i64);
    for step in 0..n {
        let mut i = x.wrapping_sub(tape.lo) as u64;
        if i >= tape.thr.len() as u64 {
            tape.grow(env, x, opts.range_cap)?;
            i = (x - tape.lo) as u64;
        }
        let u = (rng.next_u64() >> 11) ^ mask;
        x += 2 * ((u < tape.thr[i as usize]) as i64) - 1;
        lo = lo.min(x);
        hi = hi.max(x);
        if x == up {
            levels.hits.push((x, (step + 1) as f64));
            levels.iu += 1;
            up = levels.next_up();
        } else if x == down {
            levels.hits.push((x, (step + 1) as f64));
            levels.id += 1;
            down = levels.next_down();
        }
        if let Some(p) = path.as_mut() {
            p.push(((step + 1) as f64, x));
        }
    }
    Ok(Trajectory {
        final_position: x,
        elapsed: Elapsed::Steps(n),
        jumps: n,
        min_position: lo,
        max_position: hi,
        hitting_times: levels.finish(),
        path,
        seed,
    })
}

/// Continuous-time walk up to time `horizon`: the jump chain of the biased
/// rates with exponential holding times; stops at the first jump after the horizon.
pub fn run_continuous<E: Quenched>(env: &mut E, lambda: f64, horizon: f64, seed: u64, opts: &WalkOptions) -> Result<Trajectory, SimError> {
    let mut rng = walk_rng(seed);
    let mut tape = Tape::new(lambda, true);
    tape.grow(env, 0, opts.range_cap)?;
    let mask = if opts.mirrored { MASK } else { 0 };
    let mut levels = Levels::new(&opts.hitting_levels);
    let (mut up, mut down) = (levels.next_up(), levels.next_down());
    let mut path = opts.record_path.then(|| vec![(0.0, 0i64)]);
    let (mut x, mut lo, mut hi) = (0i64, 0i64, 0i64);
    let mut t = 0.0f64;
    let mut jumps = 0u64;
    loop {
        let mut i = x.wrapping_sub(tape.lo) as u64;
        if i >= tape.thr.len() as u64 {
            tape.grow(env, x, opts.range_cap)?;
            i = (x - tape.lo) as u64;
        }
        let w: f64 = rng.sample(Exp1);
        t += w / tape.rate[i as usize];
        if t > horizon {
            break;
        }
        if jumps >= opts.jump_budget {
            return Err(SimError::JumpBudget { budget: opts.jump_budget });
        }
        let u = (rng.next_u64() >> 11) ^ mask;
        x += 2 * ((u < tape.thr[i as usize]) as i64) - 1;
        jumps += 1;
        lo = lo.min(x);
        hi = hi.max(x);
        if x == up {
            levels.hits.push((x, t));
            levels.iu += 1;
            up = levels.next_up();
        } else if x == down {
            levels.hits.push((x, t));
            levels.id += 1;
            down = levels.next_down();
        }
        if let Some(p) = path.as_mut() {
            p.push((t, x));
        }
    }
    Ok(Trajectory {
        final_position: x,
        elapsed: Elapsed::Time(horizon),
        jumps,
        min_position: lo,
        max_position: hi,
        hitting_times: levels.finish(),
        path,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clock {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageRecord {
    /// `T_1, ..., T_level`.
    pub hitting: Vec<f64>,
    /// `tau_k = T_k - T_{k-1}` with `T_0 = 0`.
    pub increments: Vec<f64>,
    pub moves: u64,
    pub seed: u64,
}

/// Runs until the walk first reaches `level >= 1`; `budget` caps the number of moves.
pub fn first_passage<E: Quenched>(
    env: &mut E,
    lambda: f64,
    level: i64,
    seed: u64,
    budget: u64,
    clock: Clock,
    range_cap: u64,
) -> Result<PassageRecord, SimError> {
    assert!(level >= 1, "level must be at least 1");
    let mut rng = walk_rng(seed);
    let mut tape = Tape::new(lambda, clock == Clock::Continuous);
    tape.grow(env, 0, range_cap)?;
    let mut hitting = Vec::with_capacity(level as usize);
    let (mut x, mut max) = (0i64, 0i64);
    let mut t = 0.0f64;
    let mut moves = 0u64;
    while max < level {
        if moves >= budget {
            return Err(SimError::PassageBudget { budget, level });
        }
        let mut i = x.wrapping_sub(tape.lo) as u64;
        if i >= tape.thr.len() as u64 {
            tape.grow(env, x, range_cap)?;
            i = (x - tape.lo) as u64;
        }
        match clock {
            Clock::Discrete => t += 1.0,
            Clock::Continuous => {
                let w: f64 = rng.sample(Exp1);
                t += w / tape.rate[i as usize];
            }
        }
        let u = rng.next_u64() >> 11;
        x += 2 * ((u < tape.thr[i as usize]) as i64) - 1;
        moves += 1;
        if x > max {
            max = x;
            hitting.push(t);
        }
    }
    let mut increments = Vec::with_capacity(hitting.len());
    let mut prev = 0.0;
    for &h in &hitting {
        increments.push(h - prev);
        prev = h;
    }
    Ok(PassageRecord { hitting, increments, moves, seed })
}

/// Delimited `(time, position)` records, one per line.
pub fn path_to_csv(path: &[(f64, i64)]) -> String {
    let mut s = String::from("time,position\n");
    for (t, x) in path {
        s.push_str(&format!("{t},{x}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgen::{DiscreteEnv, EnvModel, RateEnv, Reflected};

    fn denv(s: &str, seed: u64) -> DiscreteEnv {
        DiscreteEnv::new(&s.parse::<EnvModel>().unwrap(), seed).unwrap()
    }

    #[test]
    fn thresholds_complement() {
        for &(a, b) in &[(0.3, 0.7), (1.0, 1.0), (2.0, 1e-300), (0.1, 0.2), (5.0, 3.0)] {
            assert_eq!(right_threshold(a, b) + right_threshold(b, a), ONE);
        }
        assert_eq!(right_threshold(0.0, 1.0), ONE);
    }

    #[test]
    fn zero_steps_and_saturated_bias() {
        let mut e = denv("discrete rcm c=constant:1", 0);
        let t = run_discrete(&mut e, 0.0, 0, 1, &WalkOptions::default()).unwrap();
        assert_eq!(t.final_position, 0);
        let t = run_discrete(&mut e, 60.0, 1000, 1, &WalkOptions::default()).unwrap();
        assert_eq!(t.final_position, 1000);
    }

    #[test]
    fn replay_is_bit_exact() {
        let mut e = denv("discrete rcm c=uniform:1,4", 3);
        let opts = WalkOptions { record_path: true, hitting_levels: vec![5, -3, 20], ..Default::default() };
        let a = run_discrete(&mut e, 0.3, 5000, 17, &opts).unwrap();
        let mut e2 = denv("discrete rcm c=uniform:1,4", 3);
        let b = run_discrete(&mut e2, 0.3, 5000, 17, &opts).unwrap();
        assert_eq!(a, b);
        let p = a.path.unwrap();
        assert!(p.windows(2).all(|w| (w[1].1 - w[0].1).abs() == 1));
        for (level, time) in &a.hitting_times {
            let first = p.iter().find(|(_, x)| x == level).unwrap().0;
            assert_eq!(first, *time);
        }
    }

    #[test]
    fn mirrored_run_is_reflection() {
        let model = "discrete rcm c=two-point:1,2:0.5";
        let mut e = denv(model, 8);
        let a = run_discrete(&mut e, 0.4, 20_000, 5, &WalkOptions::default()).unwrap();
        let mut r = Reflected(denv(model, 8));
        let b = run_discrete(&mut r, -0.4, 20_000, 5, &WalkOptions { mirrored: true, ..Default::default() }).unwrap();
        assert_eq!(a.final_position, -b.final_position);
        assert_eq!(a.max_position, -b.min_position);

        let m: EnvModel = "continuous coinflip plus=uniform:1,3 minus=uniform:1,3".parse().unwrap();
        let mut e = RateEnv::new(&m, 4).unwrap();
        let a = run_continuous(&mut e, 0.7, 500.0, 9, &WalkOptions::default()).unwrap();
        let mut r = Reflected(RateEnv::new(&m, 4).unwrap());
        let b = run_continuous(&mut r, -0.7, 500.0, 9, &WalkOptions { mirrored: true, ..Default::default() }).unwrap();
        assert_eq!(a.final_position, -b.final_position);
        assert_eq!(a.jumps, b.jumps);
    }

    #[test]
    fn horizon_zero() {
        let m: EnvModel = "continuous rcm c=constant:1".parse().unwrap();
        let mut e = RateEnv::new(&m, 0).unwrap();
        let t = run_continuous(&mut e, 0.0, 0.0, 3, &WalkOptions::default()).unwrap();
        assert_eq!((t.final_position, t.jumps), (0, 0));
    }

    #[test]
    fn range_cap_aborts() {
        let mut e = denv("discrete rcm c=constant:1", 0);
        let opts = WalkOptions { range_cap: 500, ..Default::default() };
        let r = run_discrete(&mut e, 5.0, 10_000, 1, &opts);
        assert!(matches!(r, Err(SimError::RangeCap { .. })));
        assert!(run_discrete(&mut e, 5.0, 400, 1, &opts).is_ok());
    }

    #[test]
    fn jump_budget_aborts() {
        let m: EnvModel = "continuous rcm c=constant:1".parse().unwrap();
        let mut e = RateEnv::new(&m, 0).unwrap();
        let opts = WalkOptions { jump_budget: 100, ..Default::default() };
        assert_eq!(run_continuous(&mut e, 0.0, 1e6, 1, &opts), Err(SimError::JumpBudget { budget: 100 }));
    }

    #[test]
    fn passage_increments() {
        let mut e = denv("discrete rcm c=uniform:1,2", 2);
        let p = first_passage(&mut e, 1.0, 50, 7, 1_000_000, Clock::Discrete, DEFAULT_RANGE_CAP).unwrap();
        assert_eq!(p.hitting.len(), 50);
        assert!(p.increments.iter().all(|t| *t > 0.0));
        let mut e = denv("discrete rcm c=constant:1", 2);
        let p = first_passage(&mut e, 40.0, 100, 7, 1000, Clock::Discrete, DEFAULT_RANGE_CAP).unwrap();
        assert_eq!(p.hitting.last().copied(), Some(100.0));
        assert!(first_passage(&mut e, -2.0, 100, 7, 1000, Clock::Discrete, DEFAULT_RANGE_CAP).is_err());
    }

    #[test]
    fn jump_chain_frequency() {
        let m: EnvModel = "continuous rcm c=uniform:1,3".parse().unwrap();
        let mut env = RateEnv::new(&m, 1).unwrap();
        let lambda = 0.01;
        let t = run_continuous(&mut env, lambda, 200_000.0, 3, &WalkOptions { record_path: true, ..Default::default() }).unwrap();
        let p = t.path.unwrap();
        let mut checked = 0;
        for site in -5..=5i64 {
            let (mut right, mut total) = (0u64, 0u64);
            for w in p.windows(2) {
                if w[0].1 == site {
                    total += 1;
                    right += (w[1].1 == site + 1) as u64;
                }
            }
            if total < 200 {
                continue;
            }
            checked += 1;
            let (l, r) = env.bias(lambda, site);
            let want = r / (l + r);
            let f = right as f64 / total as f64;
            assert!((f - want).abs() < 4.0 * (want * (1.0 - want) / total as f64).sqrt(), "site {site}");
        }
        assert!(checked >= 5);
    }
}
