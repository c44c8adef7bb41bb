//! Environment laws and lazily materialized quenched realizations.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::dist::ScalarDist;
use crate::error::{Error, Result};
use crate::renewal::{check_gamma, RenewalPoints};
use crate::rng::{keyed_word, site_word, stream_key, unit_open};

const TAG_RHO: u64 = 11;
const TAG_COND: u64 = 12;
const TAG_COIN: u64 = 13;
const TAG_PLUS: u64 = 14;
const TAG_MINUS: u64 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeFlavor {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodicPattern {
    /// Jump-to-the-right probabilities.
    OmegaPlus(Vec<f64>),
    /// `(r-, r+)` pairs.
    Rates(Vec<(f64, f64)>),
}

impl PeriodicPattern {
    pub fn len(&self) -> usize {
        match self {
            Self::OmegaPlus(v) => v.len(),
            Self::Rates(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(left, right)` weights at index `i` of one period.
    pub fn rates_at(&self, i: usize) -> (f64, f64) {
        match self {
            Self::OmegaPlus(v) => (1.0 - v[i], v[i]),
            Self::Rates(v) => v[i],
        }
    }

    fn rho_at(&self, i: usize) -> f64 {
        let (l, r) = self.rates_at(i);
        l / r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum EnvKind {
    IidOmega { rho: ScalarDist },
    IidConductance { conductance: ScalarDist },
    Renewal { a: f64, gamma: f64 },
    CoinFlip { plus: ScalarDist, minus: ScalarDist },
    Periodic { pattern: PeriodicPattern },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvModel {
    pub kind: EnvKind,
    pub time: TimeFlavor,
}

/// Deterministic bounds implied by the law, used to certify series tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvBounds {
    pub rho: (f64, f64),
    /// Bounds on every product of consecutive `rho` values, when uniform.
    pub partial_products: Option<(f64, f64)>,
    pub left: (f64, f64),
    pub right: (f64, f64),
}

impl EnvBounds {
    pub fn reflected(&self) -> Self {
        Self {
            rho: (1.0 / self.rho.1, 1.0 / self.rho.0),
            partial_products: self.partial_products.map(|(a, b)| (1.0 / b, 1.0 / a)),
            left: self.right,
            right: self.left,
        }
    }
}

impl EnvModel {
    pub fn new(kind: EnvKind, time: TimeFlavor) -> Result<Self> {
        let m = Self { kind, time };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            EnvKind::IidOmega { rho } => rho.validate(),
            EnvKind::IidConductance { conductance } => conductance.validate(),
            EnvKind::Renewal { a, gamma } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(Error::InvalidModel(format!("renewal A must be positive, got {a}")));
                }
                check_gamma(*gamma)
            }
            EnvKind::CoinFlip { plus, minus } => {
                plus.validate()?;
                minus.validate()
            }
            EnvKind::Periodic { pattern } => {
                if pattern.is_empty() {
                    return Err(Error::InvalidModel("periodic pattern is empty".into()));
                }
                match pattern {
                    PeriodicPattern::OmegaPlus(v) => {
                        if v.iter().any(|w| !(*w > 0.0 && *w < 1.0)) {
                            return Err(Error::InvalidModel("periodic probabilities must lie in (0,1)".into()));
                        }
                    }
                    PeriodicPattern::Rates(v) => {
                        if v.iter().any(|(l, r)| !(l.is_finite() && r.is_finite() && *l > 0.0 && *r > 0.0)) {
                            return Err(Error::InvalidModel("periodic rates must be positive".into()));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            EnvKind::IidOmega { .. } => "iid-omega",
            EnvKind::IidConductance { .. } => "rcm",
            EnvKind::Renewal { .. } => "renewal",
            EnvKind::CoinFlip { .. } => "coinflip",
            EnvKind::Periodic { .. } => "periodic",
        }
    }

    /// True when the reflected environment has the same law.
    pub fn is_reflection_invariant(&self) -> bool {
        match &self.kind {
            EnvKind::IidConductance { .. } | EnvKind::CoinFlip { .. } => true,
            EnvKind::IidOmega { rho } => rho.is_degenerate() && rho.support().0 == 1.0,
            _ => false,
        }
    }

    pub fn bounds(&self) -> EnvBounds {
        match &self.kind {
            EnvKind::IidOmega { rho } => {
                let (a, b) = rho.support();
                EnvBounds {
                    rho: (a, b),
                    partial_products: (a == 1.0 && b == 1.0).then_some((1.0, 1.0)),
                    left: (a / (1.0 + a), b / (1.0 + b)),
                    right: (1.0 / (1.0 + b), 1.0 / (1.0 + a)),
                }
            }
            EnvKind::IidConductance { conductance } => {
                let (a, b) = conductance.support();
                EnvBounds { rho: (a / b, b / a), partial_products: Some((a / b, b / a)), left: (a, b), right: (a, b) }
            }
            EnvKind::Renewal { a, .. } => EnvBounds {
                rho: (a / 2.0, *a),
                partial_products: None,
                left: (*a, *a),
                right: (1.0, 2.0),
            },
            EnvKind::CoinFlip { plus, minus } => {
                let (p0, p1) = plus.support();
                let (m0, m1) = minus.support();
                let lo = (m0 / p1).min(p0 / m1);
                let hi = (m1 / p0).max(p1 / m0);
                let w = (p0.min(m0), p1.max(m1));
                EnvBounds {
                    rho: (lo, hi),
                    partial_products: Some((lo.min(1.0).powi(2), hi.max(1.0).powi(2))),
                    left: w,
                    right: w,
                }
            }
            EnvKind::Periodic { pattern } => {
                let l = pattern.len();
                let rhos: Vec<f64> = (0..l).map(|i| pattern.rho_at(i)).collect();
                let rates: Vec<(f64, f64)> = (0..l).map(|i| pattern.rates_at(i)).collect();
                let fold = |it: &mut dyn Iterator<Item = f64>| {
                    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
                };
                let block: f64 = rhos.iter().product();
                let partial_products = if (block - 1.0).abs() < 1e-12 {
                    let mut lo = 1.0f64;
                    let mut hi = 1.0f64;
                    for s in 0..l {
                        let mut p = 1.0;
                        for k in 0..l {
                            p *= rhos[(s + k) % l];
                            lo = lo.min(p);
                            hi = hi.max(p);
                        }
                    }
                    let slack = 1.0 + 1e-9;
                    Some((lo / slack, hi * slack))
                } else {
                    None
                };
                EnvBounds {
                    rho: fold(&mut rhos.iter().copied()),
                    partial_products,
                    left: fold(&mut rates.iter().map(|r| r.0)),
                    right: fold(&mut rates.iter().map(|r| r.1)),
                }
            }
        }
    }
}

fn fmt_pattern(p: &PeriodicPattern) -> String {
    match p {
        PeriodicPattern::OmegaPlus(v) => format!("omega={}", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
        PeriodicPattern::Rates(v) => format!(
            "rates={}",
            v.iter().map(|(l, r)| format!("{l}/{r}")).collect::<Vec<_>>().join(",")
        ),
    }
}

impl fmt::Display for EnvModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let time = match self.time {
            TimeFlavor::Discrete => "discrete",
            TimeFlavor::Continuous => "continuous",
        };
        match &self.kind {
            EnvKind::IidOmega { rho } => write!(f, "{time} iid-omega rho={rho}"),
            EnvKind::IidConductance { conductance } => write!(f, "{time} rcm c={conductance}"),
            EnvKind::Renewal { a, gamma } => write!(f, "{time} renewal a={a} gamma={gamma}"),
            EnvKind::CoinFlip { plus, minus } => write!(f, "{time} coinflip plus={plus} minus={minus}"),
            EnvKind::Periodic { pattern } => write!(f, "{time} periodic {}", fmt_pattern(pattern)),
        }
    }
}

fn num(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::InvalidModel(format!("not a number: {s:?}")))
}

impl FromStr for EnvModel {
    type Err = Error;

    /// Inverse of `Display`, e.g. `discrete rcm c=two-point:1,2:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let mut words = s.split_whitespace();
        let time = match words.next() {
            Some("discrete") => TimeFlavor::Discrete,
            Some("continuous") => TimeFlavor::Continuous,
            other => return Err(Error::InvalidModel(format!("unknown time flavor {other:?}"))),
        };
        let variant = words.next().ok_or_else(|| Error::InvalidModel("missing variant".into()))?;
        let mut kv = std::collections::BTreeMap::new();
        for w in words {
            let (k, v) = w
                .split_once('=')
                .ok_or_else(|| Error::InvalidModel(format!("expected key=value, got {w:?}")))?;
            kv.insert(k, v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| Error::InvalidModel(format!("missing {k}=")));
        let kind = match variant {
            "iid-omega" => EnvKind::IidOmega { rho: get("rho")?.parse()? },
            "rcm" => EnvKind::IidConductance { conductance: get("c")?.parse()? },
            "renewal" => EnvKind::Renewal { a: num(get("a")?)?, gamma: num(get("gamma")?)? },
            "coinflip" => EnvKind::CoinFlip { plus: get("plus")?.parse()?, minus: get("minus")?.parse()? },
            "periodic" => {
                let pattern = if let Ok(v) = get("omega") {
                    PeriodicPattern::OmegaPlus(v.split(',').map(num).collect::<Result<_>>()?)
                } else {
                    let v = get("rates")?;
                    PeriodicPattern::Rates(
                        v.split(',')
                            .map(|p| {
                                let (l, r) = p
                                    .split_once('/')
                                    .ok_or_else(|| Error::InvalidModel(format!("expected l/r, got {p:?}")))?;
                                Ok((num(l)?, num(r)?))
                            })
                            .collect::<Result<_>>()?,
                    )
                };
                EnvKind::Periodic { pattern }
            }
            other => return Err(Error::InvalidModel(format!("unknown variant {other:?}"))),
        };
        Self::new(kind, time)
    }
}

/// Per-site generator: a pure function of `(seed, x)` except for the
/// renewal variant, whose point set is extended lazily.
#[derive(Clone)]
struct SiteSource {
    kind: EnvKind,
    renewal: Option<RenewalPoints>,
    heads: bool,
    // stream keys: rho or conductance, a+, a-
    keys: [u64; 3],
    last_conductance: Option<(i64, f64)>,
}

impl SiteSource {
    fn new(model: &EnvModel, seed: u64) -> Result<Self> {
        model.validate()?;
        let renewal = match model.kind {
            EnvKind::Renewal { gamma, .. } => Some(RenewalPoints::new(gamma, seed)?),
            _ => None,
        };
        let heads = site_word(seed, TAG_COIN, 0, 0) & 1 == 1;
        let first = match model.kind {
            EnvKind::IidConductance { .. } => TAG_COND,
            _ => TAG_RHO,
        };
        let keys = [stream_key(seed, first, 0), stream_key(seed, TAG_PLUS, 0), stream_key(seed, TAG_MINUS, 0)];
        Ok(Self { kind: model.kind.clone(), renewal, heads, keys, last_conductance: None })
    }

    #[inline]
    fn u(&self, stream: usize, x: i64) -> f64 {
        unit_open(keyed_word(self.keys[stream], x))
    }

    /// `(r-, r+)`; for i.i.d. omega the unit-total-rate pair `(omega-, omega+)`.
    fn rates(&mut self, x: i64) -> (f64, f64) {
        match &self.kind {
            EnvKind::IidOmega { rho } => {
                let r = rho.sample(self.u(0, x));
                (r / (1.0 + r), 1.0 / (1.0 + r))
            }
            EnvKind::IidConductance { conductance } => {
                let prev = match self.last_conductance {
                    Some((y, c)) if y == x - 1 => c,
                    _ => conductance.sample(self.u(0, x - 1)),
                };
                let cur = conductance.sample(self.u(0, x));
                self.last_conductance = Some((x, cur));
                (prev, cur)
            }
            EnvKind::Renewal { a, .. } => {
                let hit = self.renewal.as_mut().unwrap().contains(-x);
                (*a, if hit { 2.0 } else { 1.0 })
            }
            EnvKind::CoinFlip { plus, minus } => {
                let (m, first) = if self.heads {
                    ((x - 1).div_euclid(2), (x - 1).rem_euclid(2) == 0)
                } else {
                    (x.div_euclid(2), x.rem_euclid(2) == 0)
                };
                let ap = plus.sample(self.u(1, m));
                let am = minus.sample(self.u(2, m));
                if first {
                    (am, ap)
                } else {
                    (ap, am)
                }
            }
            EnvKind::Periodic { pattern } => pattern.rates_at(x.rem_euclid(pattern.len() as i64) as usize),
        }
    }

    fn omega_plus(&mut self, x: i64) -> f64 {
        match &self.kind {
            EnvKind::IidOmega { rho } => 1.0 / (1.0 + rho.sample(self.u(0, x))),
            EnvKind::Periodic { pattern: PeriodicPattern::OmegaPlus(v) } => v[x.rem_euclid(v.len() as i64) as usize],
            _ => {
                let (l, r) = self.rates(x);
                r / (l + r)
            }
        }
    }
}

/// Contiguous per-site storage over a growing window.
#[derive(Clone)]
struct Window<T> {
    lo: i64,
    values: Vec<T>,
}

impl<T: Copy> Window<T> {
    fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    fn ensure(&mut self, lo: i64, hi: i64, mut make: impl FnMut(i64) -> T) {
        if self.values.is_empty() {
            self.lo = lo;
            self.values = (lo..=hi).map(&mut make).collect();
            return;
        }
        if lo < self.lo {
            let mut front: Vec<T> = (lo..self.lo).map(&mut make).collect();
            front.extend_from_slice(&self.values);
            self.values = front;
            self.lo = lo;
        }
        let top = self.hi();
        if hi > top {
            self.values.extend((top + 1..=hi).map(&mut make));
        }
    }

    #[inline]
    fn get(&self, x: i64) -> Option<T> {
        let i = x.wrapping_sub(self.lo) as u64;
        if i < self.values.len() as u64 {
            Some(self.values[i as usize])
        } else {
            None
        }
    }
}

/// Read access shared by quenched environments: `(left, right)` weights
/// are probabilities in discrete time and rates in continuous time.
pub trait Quenched {
    fn weights(&mut self, x: i64) -> (f64, f64);
    fn bounds(&self) -> EnvBounds;

    fn rho(&mut self, x: i64) -> f64 {
        let (l, r) = self.weights(x);
        l / r
    }

    /// Materialize everything in `[lo, hi]` ahead of time.
    fn prefetch(&mut self, lo: i64, hi: i64) {
        for x in lo..=hi {
            self.weights(x);
        }
    }
}

fn grow_range(w_lo: i64, w_hi: i64, empty: bool, x: i64) -> (i64, i64) {
    if empty {
        return (x - 32, x + 32);
    }
    let span = (w_hi - w_lo + 1).max(64);
    if x < w_lo {
        (x.min(w_lo - span), w_hi)
    } else {
        (w_lo, x.max(w_hi + span))
    }
}

/// Quenched jump probabilities `omega+_x` at zero bias.
#[derive(Clone)]
pub struct DiscreteEnv {
    model: EnvModel,
    seed: u64,
    source: SiteSource,
    window: Window<f64>,
}

impl DiscreteEnv {
    /// Uses the jump-chain probabilities `r+/(r- + r+)` for rate-defined laws.
    pub fn new(model: &EnvModel, seed: u64) -> Result<Self> {
        Ok(Self {
            model: model.clone(),
            seed,
            source: SiteSource::new(model, seed)?,
            window: Window { lo: 0, values: Vec::new() },
        })
    }

    pub fn model(&self) -> &EnvModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn window(&self) -> Option<(i64, i64)> {
        (!self.window.values.is_empty()).then(|| (self.window.lo, self.window.hi()))
    }

    pub fn ensure(&mut self, lo: i64, hi: i64) {
        let src = &mut self.source;
        self.window.ensure(lo, hi, |x| src.omega_plus(x));
    }

    pub fn omega_plus(&mut self, x: i64) -> f64 {
        if let Some(w) = self.window.get(x) {
            return w;
        }
        let (lo, hi) = grow_range(self.window.lo, self.window.hi(), self.window.values.is_empty(), x);
        self.ensure(lo, hi);
        self.window.get(x).unwrap()
    }

    pub fn omega_minus(&mut self, x: i64) -> f64 {
        1.0 - self.omega_plus(x)
    }

    /// `(omega-_x(lambda), omega+_x(lambda))`.
    pub fn bias(&mut self, lambda: f64, x: i64) -> (f64, f64) {
        let p = self.omega_plus(x);
        bias_probabilities(1.0 - p, p, lambda)
    }
}

impl Quenched for DiscreteEnv {
    #[inline]
    fn weights(&mut self, x: i64) -> (f64, f64) {
        let p = self.omega_plus(x);
        (1.0 - p, p)
    }

    fn bounds(&self) -> EnvBounds {
        let b = self.model.bounds();
        let (r0, r1) = b.rho;
        EnvBounds { left: (r0 / (1.0 + r0), r1 / (1.0 + r1)), right: (1.0 / (1.0 + r1), 1.0 / (1.0 + r0)), ..b }
    }
}

/// Quenched rates `(r-_x, r+_x)` at zero bias.
#[derive(Clone)]
pub struct RateEnv {
    model: EnvModel,
    seed: u64,
    source: SiteSource,
    window: Window<(f64, f64)>,
}

impl RateEnv {
    pub fn new(model: &EnvModel, seed: u64) -> Result<Self> {
        Ok(Self {
            model: model.clone(),
            seed,
            source: SiteSource::new(model, seed)?,
            window: Window { lo: 0, values: Vec::new() },
        })
    }

    pub fn model(&self) -> &EnvModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn window(&self) -> Option<(i64, i64)> {
        (!self.window.values.is_empty()).then(|| (self.window.lo, self.window.hi()))
    }

    pub fn ensure(&mut self, lo: i64, hi: i64) {
        let src = &mut self.source;
        self.window.ensure(lo, hi, |x| src.rates(x));
    }

    pub fn rates(&mut self, x: i64) -> (f64, f64) {
        if let Some(w) = self.window.get(x) {
            return w;
        }
        let (lo, hi) = grow_range(self.window.lo, self.window.hi(), self.window.values.is_empty(), x);
        self.ensure(lo, hi);
        self.window.get(x).unwrap()
    }

    /// `(r-_x(lambda), r+_x(lambda))`.
    pub fn bias(&mut self, lambda: f64, x: i64) -> (f64, f64) {
        let (l, r) = self.rates(x);
        bias_rates(l, r, lambda)
    }

    /// Embedded jump-chain probability `r+/(r- + r+)`.
    pub fn jump_omega_plus(&mut self, x: i64) -> f64 {
        let (l, r) = self.rates(x);
        r / (l + r)
    }
}

impl Quenched for RateEnv {
    #[inline]
    fn weights(&mut self, x: i64) -> (f64, f64) {
        self.rates(x)
    }

    fn bounds(&self) -> EnvBounds {
        self.model.bounds()
    }
}

pub enum Materialized {
    Discrete(DiscreteEnv),
    Rates(RateEnv),
}

/// Realization of `model` with sites `[lo, hi]` already materialized.
pub fn materialize(model: &EnvModel, seed: u64, lo: i64, hi: i64) -> Result<Materialized> {
    if lo > hi {
        return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi}]")));
    }
    Ok(match model.time {
        TimeFlavor::Discrete => {
            let mut e = DiscreteEnv::new(model, seed)?;
            e.ensure(lo, hi);
            Materialized::Discrete(e)
        }
        TimeFlavor::Continuous => {
            let mut e = RateEnv::new(model, seed)?;
            e.ensure(lo, hi);
            Materialized::Rates(e)
        }
    })
}

/// Site-reflected view: weights at `x` are the swapped weights of `-x`.
pub struct Reflected<E>(pub E);

impl<E: Quenched> Quenched for Reflected<E> {
    #[inline]
    fn weights(&mut self, x: i64) -> (f64, f64) {
        let (l, r) = self.0.weights(-x);
        (r, l)
    }

    fn bounds(&self) -> EnvBounds {
        self.0.bounds().reflected()
    }
}

impl<E: Quenched + ?Sized> Quenched for &mut E {
    #[inline]
    fn weights(&mut self, x: i64) -> (f64, f64) {
        (**self).weights(x)
    }

    fn bounds(&self) -> EnvBounds {
        (**self).bounds()
    }
}

pub fn bias_probabilities(omega_minus: f64, omega_plus: f64, lambda: f64) -> (f64, f64) {
    let a = omega_minus * (-lambda).exp();
    let b = omega_plus * lambda.exp();
    (a / (a + b), b / (a + b))
}

pub fn bias_rates(r_minus: f64, r_plus: f64, lambda: f64) -> (f64, f64) {
    (r_minus * (-lambda).exp(), r_plus * lambda.exp())
}

const SNAPSHOT_MAGIC: &str = "# rwre environment snapshot v1";

/// Self-describing text record of the materialized window.
pub fn write_snapshot_discrete(env: &DiscreteEnv) -> String {
    let mut s = format!("{SNAPSHOT_MAGIC}\nmodel: {}\nseed: {}\nvalues: omega-plus\n", env.model, env.seed);
    if let Some((lo, hi)) = env.window() {
        s.push_str(&format!("window: {lo} {hi}\n"));
        for (i, v) in env.window.values.iter().enumerate() {
            s.push_str(&format!("{} {:.16e}\n", lo + i as i64, v));
        }
    }
    s
}

pub fn write_snapshot_rates(env: &RateEnv) -> String {
    let mut s = format!("{SNAPSHOT_MAGIC}\nmodel: {}\nseed: {}\nvalues: rates\n", env.model, env.seed);
    if let Some((lo, hi)) = env.window() {
        s.push_str(&format!("window: {lo} {hi}\n"));
        for (i, (l, r)) in env.window.values.iter().enumerate() {
            s.push_str(&format!("{} {:.16e} {:.16e}\n", lo + i as i64, l, r));
        }
    }
    s
}

struct SnapshotHeader {
    model: EnvModel,
    seed: u64,
    values: String,
    window: Option<(i64, i64)>,
    body_start: usize,
}

fn snap_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Snapshot { line, msg: msg.into() }
}

fn parse_header(lines: &[&str]) -> Result<SnapshotHeader> {
    if lines.first().map(|l| l.trim()) != Some(SNAPSHOT_MAGIC) {
        return Err(snap_err(1, "missing snapshot header"));
    }
    let field = |i: usize, key: &str| -> Result<&str> {
        lines
            .get(i)
            .and_then(|l| l.strip_prefix(key))
            .map(str::trim)
            .ok_or_else(|| snap_err(i + 1, format!("expected {key}")))
    };
    let model: EnvModel = field(1, "model:")?.parse().map_err(|e: Error| snap_err(2, e.to_string()))?;
    let seed = field(2, "seed:")?.parse::<u64>().map_err(|_| snap_err(3, "bad seed"))?;
    let values = field(3, "values:")?.to_string();
    let (window, body_start) = match lines.get(4) {
        None => (None, 4),
        Some(_) => {
            let w: Vec<i64> = field(4, "window:")?
                .split_whitespace()
                .map(|t| t.parse::<i64>().map_err(|_| snap_err(5, "bad window")))
                .collect::<Result<_>>()?;
            if w.len() != 2 || w[0] > w[1] {
                return Err(snap_err(5, "bad window"));
            }
            (Some((w[0], w[1])), 5)
        }
    };
    Ok(SnapshotHeader { model, seed, values, window, body_start })
}

fn parse_rows(lines: &[&str], h: &SnapshotHeader, width: usize) -> Result<Vec<Vec<f64>>> {
    let Some((lo, hi)) = h.window else { return Ok(Vec::new()) };
    let rows: Vec<&str> = lines[h.body_start..].iter().copied().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() as i64 != hi - lo + 1 {
        return Err(snap_err(h.body_start + 1, "row count does not match window"));
    }
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let line = h.body_start + i + 1;
            let t: Vec<&str> = row.split_whitespace().collect();
            if t.len() != width + 1 || t[0].parse::<i64>().ok() != Some(lo + i as i64) {
                return Err(snap_err(line, "malformed row"));
            }
            t[1..].iter().map(|v| v.parse::<f64>().map_err(|_| snap_err(line, "bad value"))).collect()
        })
        .collect()
}

pub fn read_snapshot_discrete(text: &str) -> Result<DiscreteEnv> {
    let lines: Vec<&str> = text.lines().collect();
    let h = parse_header(&lines)?;
    if h.values != "omega-plus" {
        return Err(snap_err(4, "not a discrete snapshot"));
    }
    let rows = parse_rows(&lines, &h, 1)?;
    let mut env = DiscreteEnv::new(&h.model, h.seed)?;
    if let Some((lo, _)) = h.window {
        env.window = Window { lo, values: rows.into_iter().map(|r| r[0]).collect() };
    }
    Ok(env)
}

pub fn read_snapshot_rates(text: &str) -> Result<RateEnv> {
    let lines: Vec<&str> = text.lines().collect();
    let h = parse_header(&lines)?;
    if h.values != "rates" {
        return Err(snap_err(4, "not a rate snapshot"));
    }
    let rows = parse_rows(&lines, &h, 2)?;
    let mut env = RateEnv::new(&h.model, h.seed)?;
    if let Some((lo, _)) = h.window {
        env.window = Window { lo, values: rows.into_iter().map(|r| (r[0], r[1])).collect() };
    }
    Ok(env)
}
