//! Stationary renewal point process on the integers with gap tail
//! `P(gap >= j) = j^{-gamma}`.

use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::rng::{site_word, unit_open};
use crate::special::{hurwitz_tail, zeta};

const TABLE_LEN: usize = 1_000_000;
const TAG_STRADDLE: u64 = 0x5742;
const TAG_GAP: u64 = 0x6A9;

pub fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("renewal exponent must exceed 2, got {gamma}")))
    }
}

/// Exact inversion of `P(gap >= j) = j^{-gamma}`.
#[inline]
pub fn sample_gap(gamma: f64, u: f64) -> i64 {
    let g = u.powf(-1.0 / gamma).floor();
    if g >= 4.0e18 {
        4_000_000_000_000_000_000
    } else {
        (g as i64).max(1)
    }
}

/// `P(tau_1 = m) = m^{-gamma} / zeta(gamma)`.
pub fn tau1_pmf(gamma: f64, m: i64) -> f64 {
    if m < 1 {
        0.0
    } else {
        (m as f64).powf(-gamma) / zeta(gamma)
    }
}

/// `P(tau_1 > n)`.
pub fn tau1_survival(gamma: f64, n: i64) -> f64 {
    if n < 1 {
        1.0
    } else {
        hurwitz_tail(gamma, n as u64 + 1) / zeta(gamma)
    }
}

/// Law of the length of the gap straddling the origin, `P(G = m) ∝ m P(gap = m)`.
pub struct StraddlingGap {
    gamma: f64,
    zeta: f64,
    // tail[m] = P(G >= m), tail[0] unused
    tail: Vec<f64>,
}

impl StraddlingGap {
    fn build(gamma: f64) -> Self {
        let z = zeta(gamma);
        let mut tail = vec![0.0; TABLE_LEN + 1];
        // h = sum_{k >= m+1} k^{-gamma}
        let mut h = hurwitz_tail(gamma, TABLE_LEN as u64 + 1);
        for m in (1..=TABLE_LEN).rev() {
            let mf = m as f64;
            tail[m] = (mf.powf(1.0 - gamma) + h) / z;
            h += mf.powf(-gamma);
        }
        tail[1] = 1.0;
        Self { gamma, zeta: z, tail }
    }

    /// Shared table for `gamma`, built on first use.
    pub fn get(gamma: f64) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<Vec<Arc<StraddlingGap>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        let mut guard = cache.lock().unwrap();
        if let Some(t) = guard.iter().find(|t| t.gamma.to_bits() == gamma.to_bits()) {
            return t.clone();
        }
        let t = Arc::new(Self::build(gamma));
        guard.push(t.clone());
        t
    }

    /// `P(G >= m)` from the closed form.
    pub fn survival(&self, m: i64) -> f64 {
        if m <= 1 {
            return 1.0;
        }
        let mf = m as f64;
        (mf.powf(1.0 - self.gamma) + hurwitz_tail(self.gamma, m as u64 + 1)) / self.zeta
    }

    pub fn sample(&self, u: f64) -> i64 {
        // G = max { m : P(G >= m) >= u }
        if u <= self.tail[TABLE_LEN] {
            let mut lo = TABLE_LEN as i64;
            let mut hi = lo * 2;
            while self.survival(hi) >= u {
                lo = hi;
                hi *= 2;
                if hi > 1 << 60 {
                    return lo;
                }
            }
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if self.survival(mid) >= u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return lo;
        }
        let (mut lo, mut hi) = (1usize, TABLE_LEN);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.tail[mid] >= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo as i64
    }
}

/// Lazily extended realization: `left` holds `tau_0 > tau_{-1} > ...`,
/// `right` holds `tau_1 < tau_2 < ...`, with `tau_0 <= 0 < tau_1`.
#[derive(Clone)]
pub struct RenewalPoints {
    gamma: f64,
    seed: u64,
    left: Vec<i64>,
    right: Vec<i64>,
}

impl RenewalPoints {
    pub fn new(gamma: f64, seed: u64) -> Result<Self> {
        check_gamma(gamma)?;
        let table = StraddlingGap::get(gamma);
        let g = table.sample(unit_open(site_word(seed, TAG_STRADDLE, 0, 0)));
        let u = unit_open(site_word(seed, TAG_STRADDLE, 0, 1));
        let tau1 = (1 + (u * g as f64) as i64).min(g);
        Ok(Self { gamma, seed, left: vec![tau1 - g], right: vec![tau1] })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau0(&self) -> i64 {
        self.left[0]
    }

    pub fn tau1(&self) -> i64 {
        self.right[0]
    }

    fn gap(&self, index: i64) -> i64 {
        sample_gap(self.gamma, unit_open(site_word(self.seed, TAG_GAP, index, 0)))
    }

    fn cover(&mut self, m: i64) {
        while *self.right.last().unwrap() < m {
            let k = self.right.len() as i64;
            let next = self.right.last().unwrap().saturating_add(self.gap(k));
            self.right.push(next);
        }
        while *self.left.last().unwrap() > m {
            let k = self.left.len() as i64;
            let next = self.left.last().unwrap().saturating_sub(self.gap(-k));
            self.left.push(next);
        }
    }

    pub fn contains(&mut self, m: i64) -> bool {
        self.cover(m);
        if m > 0 {
            self.right.binary_search(&m).is_ok()
        } else {
            self.left.binary_search_by(|p| m.cmp(p)).is_ok()
        }
    }

    /// Ordered points of the process inside `[lo, hi]`.
    pub fn points_in(&mut self, lo: i64, hi: i64) -> Vec<i64> {
        self.cover(lo);
        self.cover(hi);
        let mut out: Vec<i64> = self.left.iter().rev().copied().filter(|p| *p >= lo && *p <= hi).collect();
        out.extend(self.right.iter().copied().filter(|p| *p >= lo && *p <= hi));
        out
    }
}

pub fn sample_stationary_renewal(gamma: f64, seed: u64, lo: i64, hi: i64) -> Result<Vec<i64>> {
    if lo > hi {
        return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi}]")));
    }
    Ok(RenewalPoints::new(gamma, seed)?.points_in(lo, hi))
}

/// First `count` i.i.d. gaps for a seed, independent of the straddling gap.
pub fn iid_gaps(gamma: f64, seed: u64, count: usize) -> Vec<i64> {
    (1..=count as i64)
        .map(|k| sample_gap(gamma, unit_open(site_word(seed, TAG_GAP, k, 0))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_law_exact_at_small_j() {
        let n = 200_000;
        let ones = (0..n)
            .filter(|i| sample_gap(3.0, unit_open(site_word(9, 1, *i, 0))) == 1)
            .count() as f64
            / n as f64;
        let p = 0.875;
        assert!((ones - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn straddling_table_matches_closed_form() {
        let t = StraddlingGap::get(3.0);
        for m in [2i64, 3, 10, 1000, 999_999] {
            let rel = (t.tail[m as usize] - t.survival(m)).abs() / t.survival(m);
            assert!(rel < 1e-10, "m={m} rel={rel}");
        }
        // P(G = 1) = P(gap = 1) / zeta
        let p1 = 1.0 - t.survival(2);
        assert!((p1 - 0.875 / zeta(3.0)).abs() < 1e-14);
    }

    #[test]
    fn straddling_inverse_beyond_table() {
        let t = StraddlingGap::get(3.0);
        let u = t.tail[TABLE_LEN] * 0.3;
        let g = t.sample(u);
        assert!(g > TABLE_LEN as i64);
        assert!(t.survival(g) >= u && t.survival(g + 1) < u);
    }

    #[test]
    fn ordering_around_origin() {
        for seed in 0..200 {
            let mut r = RenewalPoints::new(3.0, seed).unwrap();
            assert!(r.tau0() <= 0 && r.tau1() > 0);
            let pts = r.points_in(-500, 500);
            assert!(pts.windows(2).all(|w| w[0] < w[1]));
            for x in -500..=500 {
                assert_eq!(r.contains(x), pts.binary_search(&x).is_ok());
            }
        }
    }

    #[test]
    fn rejects_small_gamma() {
        assert!(RenewalPoints::new(2.0, 1).is_err());
        assert!(RenewalPoints::new(f64::NAN, 1).is_err());
    }
}
