//! Summation of non-negative series with a truncation-error certificate.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesStatus {
    Converged,
    Diverged,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub error_bound: f64,
    pub status: SeriesStatus,
    pub terms_used: u64,
}

impl SeriesValue {
    pub fn exact(value: f64) -> Self {
        Self { value, error_bound: 0.0, status: SeriesStatus::Converged, terms_used: 0 }
    }

    pub fn diverged(terms_used: u64) -> Self {
        Self { value: f64::INFINITY, error_bound: f64::INFINITY, status: SeriesStatus::Diverged, terms_used }
    }

    pub fn is_converged(&self) -> bool {
        self.status == SeriesStatus::Converged
    }

    /// `a + b * self`.
    pub fn affine(self, a: f64, b: f64) -> Self {
        if self.status == SeriesStatus::Diverged {
            return self;
        }
        Self { value: a + b * self.value, error_bound: b.abs() * self.error_bound, ..self }
    }

    /// Product of two certified values.
    pub fn times(self, other: SeriesValue) -> Self {
        if self.status == SeriesStatus::Diverged || other.status == SeriesStatus::Diverged {
            return Self::diverged(self.terms_used + other.terms_used);
        }
        let status = if self.is_converged() && other.is_converged() {
            SeriesStatus::Converged
        } else {
            SeriesStatus::Inconclusive
        };
        let e = self.value.abs() * other.error_bound
            + other.value.abs() * self.error_bound
            + self.error_bound * other.error_bound;
        Self {
            value: self.value * other.value,
            error_bound: e,
            status,
            terms_used: self.terms_used + other.terms_used,
        }
    }

    /// True when the certified intervals of the two values overlap.
    pub fn agrees_with(&self, other: &SeriesValue, slack: f64) -> bool {
        (self.value - other.value).abs() <= self.error_bound + other.error_bound + slack
    }
}

/// Rigorous facts about the terms `t_i >= 0` that sharpen or replace the
/// windowed heuristics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TailHints {
    /// `t_{i+1} <= r t_i`.
    pub ratio_cap: Option<f64>,
    /// `t_{i+1} >= r t_i`.
    pub ratio_floor: Option<f64>,
    /// `t_i <= c r^i`.
    pub ceiling: Option<(f64, f64)>,
    /// `t_i >= c r^i`.
    pub floor: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub tol: f64,
    pub budget: u64,
    pub window: usize,
    pub divergence_run: usize,
}

impl SeriesOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { tol: 1e-12, budget: 1_000_000, window: 50, divergence_run: 500 }
    }
}

struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sums `t_0 + t_1 + ...` for non-negative terms produced in order.
pub fn sum_series(mut term: impl FnMut(u64) -> f64, hints: &TailHints, opts: &SeriesOptions) -> SeriesValue {
    if let Some((c, r)) = hints.floor {
        if c > 0.0 && r >= 1.0 {
            return SeriesValue::diverged(0);
        }
    }
    let w = opts.window.max(1);
    let mut ring = vec![0.0f64; w + 1];
    let mut acc = Neumaier { sum: 0.0, comp: 0.0 };
    // sums of consecutive blocks of `w` terms, newest last
    let mut blocks = [f64::NAN; 4];
    let mut block = 0.0f64;
    let growth_blocks = opts.divergence_run.div_ceil(w).max(2);
    let mut run = 0usize;
    for i in 0..opts.budget {
        let t = term(i);
        if t.is_nan() || t < 0.0 {
            return SeriesValue { value: acc.value(), error_bound: f64::INFINITY, status: SeriesStatus::Inconclusive, terms_used: i + 1 };
        }
        if t.is_infinite() {
            return SeriesValue::diverged(i + 1);
        }
        acc.add(t);
        block += t;
        ring[(i as usize) % (w + 1)] = t;
        let n = i + 1;
        if i == 0 {
            if let Some(r) = hints.ratio_floor {
                if r >= 1.0 && t > 0.0 {
                    return SeriesValue::diverged(n);
                }
            }
        }
        let rounding = 4.0 * f64::EPSILON * acc.value().abs();
        let mut tail = f64::INFINITY;
        if let Some((c, r)) = hints.ceiling {
            if r < 1.0 {
                tail = tail.min(c * r.powf(n as f64) / (1.0 - r));
            }
        }
        if let Some(r) = hints.ratio_cap {
            if r < 1.0 {
                tail = tail.min(t * r / (1.0 - r));
            }
        }
        if tail <= opts.tol {
            return SeriesValue { value: acc.value(), error_bound: tail + rounding, status: SeriesStatus::Converged, terms_used: n };
        }
        if i as usize >= w {
            let mut rmax = 0.0f64;
            for k in 0..w {
                let a = ring[((i as usize) - w + k) % (w + 1)];
                let b = ring[((i as usize) - w + k + 1) % (w + 1)];
                let r = if b == 0.0 { 0.0 } else if a == 0.0 { f64::INFINITY } else { b / a };
                rmax = rmax.max(r);
            }
            if rmax < 1.0 {
                let est = t * rmax / (1.0 - rmax);
                if est <= opts.tol {
                    return SeriesValue { value: acc.value(), error_bound: est + rounding, status: SeriesStatus::Converged, terms_used: n };
                }
            }
        }
        if n % w as u64 == 0 {
            blocks.rotate_left(1);
            blocks[3] = block;
            block = 0.0;
            if blocks.iter().all(|b| !b.is_nan()) {
                if blocks[3] == 0.0 {
                    return SeriesValue { value: acc.value(), error_bound: rounding, status: SeriesStatus::Converged, terms_used: n };
                }
                // block sums of a summable product series decay roughly geometrically
                let q = (1..4).map(|k| blocks[k] / blocks[k - 1]).fold(0.0f64, f64::max);
                if q < 1.0 {
                    let est = blocks[3] * q / (1.0 - q);
                    if est <= opts.tol {
                        return SeriesValue { value: acc.value(), error_bound: est + rounding, status: SeriesStatus::Converged, terms_used: n };
                    }
                }
            }
            if blocks[2] > 0.0 && blocks[2] >= f64::MIN_POSITIVE * w as f64 {
                run = if blocks[3] >= blocks[2] { run + 1 } else { 0 };
                if run >= growth_blocks {
                    return SeriesValue::diverged(n);
                }
            }
        }
    }
    SeriesValue { value: acc.value(), error_bound: f64::INFINITY, status: SeriesStatus::Inconclusive, terms_used: opts.budget }
}
