//! Positive scalar laws used for conductances, ratios and rates.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// `TwoPoint { a, b, p }` takes value `b` with probability `p` and `a` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ScalarDist {
    Constant { value: f64 },
    TwoPoint { a: f64, b: f64, p: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDistribution(format!("{what} must be finite and positive, got {x}")))
    }
}

impl ScalarDist {
    pub fn constant(value: f64) -> Result<Self> {
        positive(value, "value")?;
        Ok(Self::Constant { value })
    }

    pub fn two_point(a: f64, b: f64, p: f64) -> Result<Self> {
        positive(a, "a")?;
        positive(b, "b")?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidDistribution(format!("p must lie in [0,1], got {p}")));
        }
        Ok(Self::TwoPoint { a, b, p })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        positive(lo, "lo")?;
        positive(hi, "hi")?;
        if lo > hi {
            return Err(Error::InvalidDistribution(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self::Uniform { lo, hi })
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::InvalidDistribution("values and probs must be non-empty and equally long".into()));
        }
        for &v in &values {
            positive(v, "value")?;
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidDistribution("probabilities must be non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self::Discrete { values, probs })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } => Self::constant(*value).map(|_| ()),
            Self::TwoPoint { a, b, p } => Self::two_point(*a, *b, *p).map(|_| ()),
            Self::Uniform { lo, hi } => Self::uniform(*lo, *hi).map(|_| ()),
            Self::Discrete { values, probs } => Self::discrete(values.clone(), probs.clone()).map(|_| ()),
        }
    }

    /// `E[X^p]` for real `p`.
    pub fn moment(&self, p: f64) -> f64 {
        match self {
            Self::Constant { value } => value.powf(p),
            Self::TwoPoint { a, b, p: pb } => (1.0 - pb) * a.powf(p) + pb * b.powf(p),
            Self::Uniform { lo, hi } => {
                if lo == hi {
                    return lo.powf(p);
                }
                if (p + 1.0).abs() < 1e-12 {
                    (hi / lo).ln() / (hi - lo)
                } else {
                    (hi.powf(p + 1.0) - lo.powf(p + 1.0)) / ((p + 1.0) * (hi - lo))
                }
            }
            Self::Discrete { values, probs } => values.iter().zip(probs).map(|(v, w)| w * v.powf(p)).sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1.0)
    }

    /// `E[ln X]`.
    pub fn log_moment(&self) -> f64 {
        match self {
            Self::Constant { value } => value.ln(),
            Self::TwoPoint { a, b, p } => (1.0 - p) * a.ln() + p * b.ln(),
            Self::Uniform { lo, hi } => {
                if lo == hi {
                    return lo.ln();
                }
                (hi * hi.ln() - hi - lo * lo.ln() + lo) / (hi - lo)
            }
            Self::Discrete { values, probs } => values.iter().zip(probs).map(|(v, w)| w * v.ln()).sum(),
        }
    }

    /// Smallest and largest points of the support.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Constant { value } => (*value, *value),
            Self::TwoPoint { a, b, p } => {
                if *p == 0.0 {
                    (*a, *a)
                } else if *p == 1.0 {
                    (*b, *b)
                } else {
                    (a.min(*b), a.max(*b))
                }
            }
            Self::Uniform { lo, hi } => (*lo, *hi),
            Self::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, w)| **w > 0.0)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| (lo.min(*v), hi.max(*v))),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        let (lo, hi) = self.support();
        lo == hi
    }

    /// Inverse-CDF sample from a uniform `u` in (0, 1).
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::TwoPoint { a, b, p } => {
                if u < *p {
                    *b
                } else {
                    *a
                }
            }
            Self::Uniform { lo, hi } => lo + (hi - lo) * u,
            Self::Discrete { values, probs } => {
                let mut acc = 0.0;
                for (v, w) in values.iter().zip(probs) {
                    acc += w;
                    if u < acc {
                        return *v;
                    }
                }
                values[values.len() - 1]
            }
        }
    }

    /// Law of `1/X` when it is representable in the same family.
    pub fn reciprocal(&self) -> Option<Self> {
        match self {
            Self::Constant { value } => Some(Self::Constant { value: 1.0 / value }),
            Self::TwoPoint { a, b, p } => Some(Self::TwoPoint { a: 1.0 / a, b: 1.0 / b, p: *p }),
            Self::Discrete { values, probs } => Some(Self::Discrete {
                values: values.iter().map(|v| 1.0 / v).collect(),
                probs: probs.clone(),
            }),
            Self::Uniform { .. } => None,
        }
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for ScalarDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { value } => write!(f, "constant:{value}"),
            Self::TwoPoint { a, b, p } => write!(f, "two-point:{a},{b}:{p}"),
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Self::Discrete { values, probs } => write!(f, "discrete:{}:{}", join(values), join(probs)),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidDistribution(format!("not a number: {t:?}")))
        })
        .collect()
}

impl FromStr for ScalarDist {
    type Err = Error;

    /// `constant:v`, `two-point:a,b:p`, `uniform:lo,hi`, `discrete:v1,..,vk:p1,..,pk`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::InvalidDistribution(format!("cannot parse {s:?}"));
        match parts.as_slice() {
            ["constant", v] => Self::constant(parse_list(v)?.first().copied().ok_or_else(bad)?),
            ["two-point", ab, p] => {
                let ab = parse_list(ab)?;
                let p = parse_list(p)?;
                if ab.len() != 2 || p.len() != 1 {
                    return Err(bad());
                }
                Self::two_point(ab[0], ab[1], p[0])
            }
            ["uniform", r] => {
                let r = parse_list(r)?;
                if r.len() != 2 {
                    return Err(bad());
                }
                Self::uniform(r[0], r[1])
            }
            ["discrete", v, p] => Self::discrete(parse_list(v)?, parse_list(p)?),
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_text() {
        for s in ["constant:1", "two-point:1,2:0.5", "uniform:1,10", "discrete:1,2,3:0.25,0.25,0.5"] {
            let d: ScalarDist = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
            assert_eq!(d.to_string().parse::<ScalarDist>().unwrap(), d);
        }
    }

    #[test]
    fn rejects_bad_input() {
        for s in ["constant:-1", "two-point:1,2:1.5", "uniform:3,1", "uniform:0,1", "gauss:0,1", "two-point:1:0.5"] {
            assert!(s.parse::<ScalarDist>().is_err(), "{s}");
        }
    }

    #[test]
    fn uniform_moments() {
        let d = ScalarDist::uniform(1.0, 10.0).unwrap();
        assert!((d.moment(1.0) - 5.5).abs() < 1e-14);
        assert!((d.moment(-1.0) - 10f64.ln() / 9.0).abs() < 1e-15);
        assert!((d.moment(2.0) - 37.0).abs() < 1e-12);
        assert!((d.moment(-2.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn two_point_moments() {
        let d = ScalarDist::two_point(1.0, 2.0, 0.5).unwrap();
        assert_eq!(d.moment(1.0), 1.5);
        assert_eq!(d.moment(-1.0), 0.75);
        assert_eq!(d.moment(2.0), 2.5);
        assert_eq!(d.moment(-2.0), 0.625);
        assert!((d.log_moment() - 0.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn uniform_log_moment_by_quadrature() {
        let d = ScalarDist::uniform(1.0, 10.0).unwrap();
        let n = 200_000;
        let h = 9.0 / n as f64;
        let q: f64 = (0..n).map(|i| (1.0 + (i as f64 + 0.5) * h).ln()).sum::<f64>() * h / 9.0;
        assert!((d.log_moment() - q).abs() < 1e-9);
    }

    #[test]
    fn sampling_matches_law() {
        let d = ScalarDist::two_point(1.0, 3.0, 0.25).unwrap();
        let n = 40_000;
        let hits = (0..n).filter(|i| d.sample((*i as f64 + 0.5) / n as f64) == 3.0).count();
        assert_eq!(hits, n / 4);
    }
}
