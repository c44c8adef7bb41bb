//! Annealed Monte Carlo estimators over fresh environments, plus the
//! statistics that tie them to the closed forms.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analytic::{rcm_discrete_taylor, velocity_rcm_continuous, velocity_rcm_discrete};
use crate::envgen::{DiscreteEnv, EnvKind, EnvModel, Quenched, RateEnv, Reflected, TimeFlavor};
use crate::error::{Error, Result};
use crate::renewal::{check_gamma, iid_gaps, tau1_survival, RenewalPoints};
use crate::rng::{derive_seed, LANE_AUX, LANE_ENV, LANE_WALK};
use crate::simulate::{first_passage, run_continuous, run_discrete, Clock, SimError, Trajectory, WalkOptions};
use crate::special::{hurwitz_tail, zeta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub count: u64,
    pub ci95: (f64, f64),
}

impl Estimate {
    pub fn new(mean: f64, std_error: f64, count: u64) -> Self {
        Self { mean, std_error, count, ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error) }
    }

    /// Sample mean with standard error `sd / sqrt(count)`.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::new(f64::NAN, f64::NAN, 0);
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self::new(mean, se, n as u64)
    }

    /// `(mean - target) / std_error`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_error
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    pub points: usize,
}

/// Ordinary least squares of `log y` on `log x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<ScalingFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidArgument("a power-law fit needs at least three points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_std_error = (rss / (n - 2.0) / sxx).sqrt();
    Ok(ScalingFit { slope, intercept, slope_std_error, points: lx.len() })
}

/// Step count for discrete-time models, time horizon for continuous-time ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Horizon {
    Steps(u64),
    Time(f64),
}

impl Horizon {
    pub fn value(&self) -> f64 {
        match *self {
            Horizon::Steps(n) => n as f64,
            Horizon::Time(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    Independent,
    /// Site-reflected environment and mirrored direction uniforms of the
    /// replica with the same index.
    Mirrored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub replicas: u64,
    pub seed: u64,
    pub coupling: Coupling,
    pub walk: WalkOptions,
}

impl EnsembleConfig {
    pub fn new(replicas: u64, seed: u64) -> Self {
        Self { replicas, seed, coupling: Coupling::Independent, walk: WalkOptions::default() }
    }

    pub fn mirrored(mut self) -> Self {
        self.coupling = Coupling::Mirrored;
        self
    }
}

pub fn env_seed(root: u64, replica: u64) -> u64 {
    derive_seed(root, LANE_ENV, replica)
}

pub fn walk_seed(root: u64, replica: u64) -> u64 {
    derive_seed(root, LANE_WALK, replica)
}

fn check_horizon(model: &EnvModel, horizon: Horizon) -> Result<()> {
    match (model.time, horizon) {
        (TimeFlavor::Discrete, Horizon::Steps(n)) if n > 0 => Ok(()),
        (TimeFlavor::Continuous, Horizon::Time(t)) if t > 0.0 && t.is_finite() => Ok(()),
        (TimeFlavor::Discrete, Horizon::Steps(_)) | (TimeFlavor::Continuous, Horizon::Time(_)) => {
            Err(Error::InvalidArgument("horizon must be positive".into()))
        }
        _ => Err(Error::InvalidArgument(format!("horizon {horizon:?} does not match a {:?}-time model", model.time))),
    }
}

fn walk<E: Quenched>(env: E, mirrored: bool, lambda: f64, horizon: Horizon, seed: u64, opts: &WalkOptions) -> std::result::Result<Trajectory, SimError> {
    let mut opts = opts.clone();
    opts.mirrored = mirrored;
    match (mirrored, horizon) {
        (false, Horizon::Steps(n)) => run_discrete(&mut { env }, lambda, n, seed, &opts),
        (true, Horizon::Steps(n)) => run_discrete(&mut Reflected(env), lambda, n, seed, &opts),
        (false, Horizon::Time(t)) => run_continuous(&mut { env }, lambda, t, seed, &opts),
        (true, Horizon::Time(t)) => run_continuous(&mut Reflected(env), lambda, t, seed, &opts),
    }
}

/// One annealed replica: a fresh environment and an independent walk.
pub fn replica_trajectory(model: &EnvModel, lambda: f64, horizon: Horizon, cfg: &EnsembleConfig, k: u64) -> Result<std::result::Result<Trajectory, SimError>> {
    let mirrored = cfg.coupling == Coupling::Mirrored;
    let (es, ws) = (env_seed(cfg.seed, k), walk_seed(cfg.seed, k));
    Ok(match model.time {
        TimeFlavor::Discrete => walk(DiscreteEnv::new(model, es)?, mirrored, lambda, horizon, ws, &cfg.walk),
        TimeFlavor::Continuous => walk(RateEnv::new(model, es)?, mirrored, lambda, horizon, ws, &cfg.walk),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aborts {
    pub count: u64,
    pub first: Option<SimError>,
}

fn ensemble<T: Send>(
    model: &EnvModel,
    lambda: f64,
    horizon: Horizon,
    cfg: &EnsembleConfig,
    f: impl Fn(&Trajectory) -> T + Sync,
) -> Result<(Vec<T>, Aborts)> {
    model.validate()?;
    check_horizon(model, horizon)?;
    if cfg.replicas < 2 {
        return Err(Error::InvalidArgument("at least two replicas are needed".into()));
    }
    let results: Vec<Result<std::result::Result<T, SimError>>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|k| replica_trajectory(model, lambda, horizon, cfg, k).map(|r| r.map(|t| f(&t))))
        .collect();
    let mut values = Vec::with_capacity(results.len());
    let mut aborts = Aborts { count: 0, first: None };
    for r in results {
        match r? {
            Ok(v) => values.push(v),
            Err(e) => {
                aborts.count += 1;
                aborts.first.get_or_insert(e);
            }
        }
    }
    Ok((values, aborts))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityEstimate {
    pub estimate: Estimate,
    pub replicas: u64,
    pub aborts: Aborts,
}

/// Mean of `X_n / n` (or `Y_t / t`) over independent environments.
pub fn annealed_velocity(model: &EnvModel, lambda: f64, horizon: Horizon, cfg: &EnsembleConfig) -> Result<VelocityEstimate> {
    let scale = horizon.value();
    let (xs, aborts) = ensemble(model, lambda, horizon, cfg, |t| t.final_position as f64 / scale)?;
    Ok(VelocityEstimate { estimate: Estimate::from_samples(&xs), replicas: cfg.replicas, aborts })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionEstimate {
    /// Sample variance of `Z = (X - v n) / sqrt(n)`.
    pub variance: Estimate,
    pub mean_z: Estimate,
    /// Kolmogorov-Smirnov distance of the standardized sample to N(0, 1).
    pub ks_distance: f64,
    pub velocity: f64,
    pub replicas: u64,
    pub aborts: Aborts,
}

/// Sample variance with the standard error `sqrt((m4 - m2^2) / N)`.
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    Estimate::new(m2 * n / (n - 1.0), ((m4 - m2 * m2) / n).sqrt(), xs.len() as u64)
}

/// Kolmogorov-Smirnov distance between the sample, standardized by its own
/// mean and deviation, and the standard Gaussian.
pub fn ks_distance_gaussian(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let mut z: Vec<f64> = xs.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let mut d = 0.0f64;
    for (i, zi) in z.iter().enumerate() {
        let f = normal.cdf(*zi);
        d = d.max((i + 1) as f64 / n as f64 - f).max(f - i as f64 / n as f64);
    }
    d
}

pub fn annealed_diffusion(model: &EnvModel, lambda: f64, horizon: Horizon, velocity: f64, cfg: &EnsembleConfig) -> Result<DiffusionEstimate> {
    let h = horizon.value();
    let root = h.sqrt();
    let (zs, aborts) = ensemble(model, lambda, horizon, cfg, |t| (t.final_position as f64 - velocity * h) / root)?;
    if zs.len() < 2 {
        return Err(Error::InvalidArgument("every replica aborted".into()));
    }
    Ok(DiffusionEstimate {
        variance: variance_estimate(&zs),
        mean_z: Estimate::from_samples(&zs),
        ks_distance: ks_distance_gaussian(&zs),
        velocity,
        replicas: cfg.replicas,
        aborts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EinsteinRow {
    pub h: f64,
    /// `v(h) / h` from the closed form.
    pub analytic: f64,
    /// Known leading deviation of `v(h) / h` from its limit.
    pub first_order_bias: f64,
    pub mc: Option<Estimate>,
    /// `mc` minus `first_order_bias`.
    pub mc_corrected: Option<Estimate>,
    /// `h sqrt(n) < 1`: the drift is below the diffusive noise of one walk.
    pub low_resolution: bool,
    pub aborts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EinsteinTable {
    /// `sigma^2(0)`: `1/(AB)` in discrete time, `2/B` in continuous time.
    pub limit: f64,
    pub rows: Vec<EinsteinRow>,
}

/// Slopes `v(h)/h` along `h_grid` for a conductance model; the Monte Carlo
/// route runs only when `mc` is given.
pub fn einstein_slope(model: &EnvModel, h_grid: &[f64], mc: Option<(Horizon, &EnsembleConfig)>) -> Result<EinsteinTable> {
    let EnvKind::IidConductance { conductance } = &model.kind else {
        return Err(Error::Unsupported(format!("Einstein slopes for {}", model.tag())));
    };
    let (a, b) = (conductance.mean(), conductance.moment(-1.0));
    let limit = match model.time {
        TimeFlavor::Discrete => 1.0 / (a * b),
        TimeFlavor::Continuous => 2.0 / b,
    };
    let mut rows = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("slope step must be positive, got {h}")));
        }
        let (analytic, first_order_bias) = match model.time {
            TimeFlavor::Discrete => (velocity_rcm_discrete(h, a, b)?.v / h, rcm_discrete_taylor(a, b).1 * h),
            TimeFlavor::Continuous => (velocity_rcm_continuous(h, b)?.v / h, 0.0),
        };
        let mut row = EinsteinRow { h, analytic, first_order_bias, mc: None, mc_corrected: None, low_resolution: false, aborts: 0 };
        if let Some((horizon, cfg)) = mc {
            let est = annealed_velocity(model, h, horizon, cfg)?;
            let e = Estimate::new(est.estimate.mean / h, est.estimate.std_error / h, est.estimate.count);
            row.mc_corrected = Some(Estimate::new(e.mean - first_order_bias, e.std_error, e.count));
            row.mc = Some(e);
            row.low_resolution = h * horizon.value().sqrt() < 1.0;
            row.aborts = est.aborts.count;
        }
        rows.push(row);
    }
    Ok(EinsteinTable { limit, rows })
}

/// Many walks in one environment.
pub fn quenched_velocity(model: &EnvModel, env_seed: u64, lambda: f64, horizon: Horizon, walks: u64, seed: u64, opts: &WalkOptions) -> Result<VelocityEstimate> {
    model.validate()?;
    check_horizon(model, horizon)?;
    let scale = horizon.value();
    let results: Vec<std::result::Result<f64, SimError>> = match model.time {
        TimeFlavor::Discrete => {
            let env = DiscreteEnv::new(model, env_seed)?;
            (0..walks)
                .into_par_iter()
                .map_init(|| env.clone(), |e, k| walk(&mut *e, false, lambda, horizon, walk_seed(seed, k), opts).map(|t| t.final_position as f64 / scale))
                .collect()
        }
        TimeFlavor::Continuous => {
            let env = RateEnv::new(model, env_seed)?;
            (0..walks)
                .into_par_iter()
                .map_init(|| env.clone(), |e, k| walk(&mut *e, false, lambda, horizon, walk_seed(seed, k), opts).map(|t| t.final_position as f64 / scale))
                .collect()
        }
    };
    let mut xs = Vec::new();
    let mut aborts = Aborts { count: 0, first: None };
    for r in results {
        match r {
            Ok(x) => xs.push(x),
            Err(e) => {
                aborts.count += 1;
                aborts.first.get_or_insert(e);
            }
        }
    }
    Ok(VelocityEstimate { estimate: Estimate::from_samples(&xs), replicas: walks, aborts })
}

/// Mean first-passage time to level 1 over fresh environments.
pub fn annealed_tau1(model: &EnvModel, lambda: f64, replicas: u64, seed: u64, budget: u64) -> Result<VelocityEstimate> {
    model.validate()?;
    let clock = match model.time {
        TimeFlavor::Discrete => Clock::Discrete,
        TimeFlavor::Continuous => Clock::Continuous,
    };
    let results: Vec<Result<std::result::Result<f64, SimError>>> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let (es, ws) = (env_seed(seed, k), walk_seed(seed, k));
            let cap = crate::simulate::DEFAULT_RANGE_CAP;
            Ok(match model.time {
                TimeFlavor::Discrete => first_passage(&mut DiscreteEnv::new(model, es)?, lambda, 1, ws, budget, clock, cap),
                TimeFlavor::Continuous => first_passage(&mut RateEnv::new(model, es)?, lambda, 1, ws, budget, clock, cap),
            }
            .map(|p| p.hitting[0]))
        })
        .collect();
    let mut xs = Vec::new();
    let mut aborts = Aborts { count: 0, first: None };
    for r in results {
        match r? {
            Ok(x) => xs.push(x),
            Err(e) => {
                aborts.count += 1;
                aborts.first.get_or_insert(e);
            }
        }
    }
    Ok(VelocityEstimate { estimate: Estimate::from_samples(&xs), replicas, aborts })
}

/// How `E[Z_0 ... Z_n]` is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMode {
    /// `2^{-|tau ∩ [0, n]|}` for a full stationary renewal realization.
    Direct,
    /// The first point `F >= 0` and the gap closing the count are
    /// integrated out exactly; only the gaps in between are sampled.
    Conditional,
}

// Gaps drawn per replica by the conditional estimator; later ones carry weight below 2^-80.
const CONDITIONAL_GAPS: usize = 80;

/// Tables for the first renewal point `F >= 0`, `P(F = m) = (m+1)^{-gamma} / zeta`,
/// and for `F + G` with `G` an independent gap.
struct FirstPoint {
    // sf[m] = P(F > m)
    sf: Vec<f64>,
    // sf2[m] = P(F + G > m)
    sf2: Vec<f64>,
}

impl FirstPoint {
    fn new(gamma: f64, n_max: u64) -> Self {
        let z = zeta(gamma);
        let n = n_max as usize;
        let sf: Vec<f64> = (0..=n_max).map(|m| hurwitz_tail(gamma, m + 2) / z).collect();
        let pmf: Vec<f64> = (0..=n).map(|m| ((m + 1) as f64).powf(-gamma) / z).collect();
        // P(G > j) = (j+1)^{-gamma}
        let gap_sf: Vec<f64> = (0..=n).map(|j| ((j + 1) as f64).powf(-gamma)).collect();
        let sf2 = (0..=n)
            .map(|m| sf[m] + pmf[..=m].iter().zip(gap_sf[..=m].iter().rev()).map(|(p, q)| p * q).sum::<f64>())
            .collect();
        Self { sf, sf2 }
    }

    #[inline]
    fn sf(&self, m: i64) -> f64 {
        if m < 0 {
            1.0
        } else {
            self.sf[m as usize]
        }
    }

    #[inline]
    fn sf2(&self, m: i64) -> f64 {
        if m < 0 {
            1.0
        } else {
            self.sf2[m as usize]
        }
    }

    /// `E[2^{-|tau ∩ [0, n]|} | s]`: the count is `k+1` iff `F + s_k <= n < F + s_k + G`.
    fn conditional(&self, n: i64, sums: &[i64]) -> f64 {
        let mut acc = self.sf(n);
        let mut w = 0.5;
        for &s in sums {
            if s > n {
                break;
            }
            acc += w * (self.sf2(n - s) - self.sf(n - s));
            w *= 0.5;
        }
        acc
    }
}

fn partial_sums(gaps: &[i64]) -> Vec<i64> {
    let mut s = Vec::with_capacity(gaps.len() + 1);
    s.push(0i64);
    for g in gaps {
        s.push(s.last().unwrap().saturating_add(*g));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductMomentRow {
    pub n: u64,
    pub estimate: Estimate,
    /// `P(tau_1 > n) / 2`.
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductMoment {
    pub gamma: f64,
    pub mode: MomentMode,
    pub rows: Vec<ProductMomentRow>,
    /// Fit over the rows with `n` inside the requested range.
    pub fit: Option<ScalingFit>,
}

/// Monte Carlo `E[Z_0 ... Z_n]` on `n_grid`, with `Z_k = 1/2` iff `k` is a
/// renewal point; every replica uses a fresh environment shared by all `n`.
pub fn renewal_product_moment(gamma: f64, n_grid: &[u64], fit_range: (u64, u64), replicas: u64, seed: u64, mode: MomentMode) -> Result<ProductMoment> {
    check_gamma(gamma)?;
    if replicas < 2 || n_grid.is_empty() {
        return Err(Error::InvalidArgument("need a nonempty grid and at least two replicas".into()));
    }
    let n_max = *n_grid.iter().max().unwrap();
    let first = (mode == MomentMode::Conditional).then(|| FirstPoint::new(gamma, n_max));
    let samples: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let s = env_seed(seed, k);
            match &first {
                Some(f) => {
                    let sums = partial_sums(&iid_gaps(gamma, s, CONDITIONAL_GAPS));
                    n_grid.iter().map(|&n| f.conditional(n as i64, &sums)).collect()
                }
                None => {
                    let pts = RenewalPoints::new(gamma, s).expect("gamma checked").points_in(0, n_max as i64);
                    n_grid
                        .iter()
                        .map(|&n| 0.5f64.powi(pts.partition_point(|p| *p <= n as i64) as i32))
                        .collect()
                }
            }
        })
        .collect();
    let rows: Vec<ProductMomentRow> = n_grid
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let xs: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            ProductMomentRow { n, estimate: Estimate::from_samples(&xs), lower_bound: tau1_survival(gamma, n as i64) / 2.0 }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.n >= fit_range.0 && r.n <= fit_range.1)
        .map(|r| (r.n as f64, r.estimate.mean))
        .unzip();
    let fit = fit_power_law(&xs, &ys).ok();
    Ok(ProductMoment { gamma, mode, rows, fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesClass {
    Converging,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub lambda: f64,
    /// `A e^{-2 lambda}`.
    pub growth: f64,
    pub class: SeriesClass,
    /// `(N, 1 + 2 sum_{i <= N} E[Z_0 ... Z_i] g^{i+1})`.
    pub partial_sums: Vec<(u64, Estimate)>,
    /// Ratio of the last two dyadic block increments.
    pub block_ratio: Option<Estimate>,
    /// Extrapolated `E[S-bar]` when converging.
    pub esbar: Option<Estimate>,
    /// `1 / E[S-bar]` when converging.
    pub velocity: Option<Estimate>,
}

/// Per-replica partial sums `sum_{i <= N} g^{i+1} f(i)` of the conditional
/// product-moment estimator `f`.
struct ProbeSums {
    // pre[m] = sum_{j <= m} g^{j+1} P(F > j), pre2 likewise for F + G
    pre: Vec<f64>,
    pre2: Vec<f64>,
    pow: Vec<f64>,
}

impl ProbeSums {
    fn new(first: &FirstPoint, g: f64, n_max: usize) -> Self {
        let mut pre = vec![0.0; n_max + 1];
        let mut pre2 = vec![0.0; n_max + 1];
        let mut pow = vec![1.0; n_max + 2];
        for i in 0..=n_max {
            pow[i + 1] = pow[i] * g;
            let (p, p2) = if i > 0 { (pre[i - 1], pre2[i - 1]) } else { (0.0, 0.0) };
            pre[i] = p + pow[i + 1] * first.sf(i as i64);
            pre2[i] = p2 + pow[i + 1] * first.sf2(i as i64);
        }
        Self { pre, pre2, pow }
    }

    /// `sum_{i=0}^{n} g^{i+1} (P(F + G > i - a) - P(F > i - a))` for `0 <= a <= n`.
    fn shifted(&self, n: usize, a: usize) -> f64 {
        self.pow[a] * (self.pre2[n - a] - self.pre[n - a])
    }

    fn partial(&self, n: usize, sums: &[i64]) -> f64 {
        let mut acc = self.pre[n];
        let mut w = 0.5;
        for &s in sums {
            if s > n as i64 {
                break;
            }
            acc += w * self.shifted(n, s as usize);
            w *= 0.5;
        }
        acc
    }
}

/// Classifies `E[S-bar(lambda)]` for the renewal environment at each
/// `lambda` from Monte Carlo product moments summed up to index `budget`.
pub fn velocity_jump_probe(a: f64, gamma: f64, lambdas: &[f64], budget: u64, replicas: u64, seed: u64) -> Result<Vec<ProbeRow>> {
    check_gamma(gamma)?;
    if !(a > 0.0) || replicas < 2 || budget < 8 {
        return Err(Error::InvalidArgument("need A > 0, budget >= 8 and at least two replicas".into()));
    }
    let first = FirstPoint::new(gamma, budget);
    let gaps: Vec<Vec<i64>> = (0..replicas)
        .into_par_iter()
        .map(|k| partial_sums(&iid_gaps(gamma, derive_seed(seed, LANE_AUX, k), CONDITIONAL_GAPS)))
        .collect();
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let g = a * (-2.0 * lambda).exp();
        // dyadic cutoffs 2^j - 1, stopping before g^N overflows
        let limit = if g > 1.0 { ((250.0 * std::f64::consts::LN_10 / g.ln()) as u64).min(budget) } else { budget };
        let mut cutoffs = Vec::new();
        let mut c = 1u64;
        while c - 1 <= limit {
            cutoffs.push(c - 1);
            c *= 2;
        }
        let n_max = *cutoffs.last().unwrap() as usize;
        let sums = ProbeSums::new(&first, g, n_max);
        let per: Vec<Vec<f64>> = gaps.iter().map(|s| cutoffs.iter().map(|&n| sums.partial(n as usize, s)).collect()).collect();
        let column = |j: usize| -> Vec<f64> { per.iter().map(|p| 1.0 + 2.0 * p[j]).collect() };
        let partial_sums: Vec<(u64, Estimate)> =
            cutoffs.iter().enumerate().map(|(j, &n)| (n, Estimate::from_samples(&column(j)))).collect();
        let j = cutoffs.len() - 1;
        let d1: Vec<f64> = per.iter().map(|p| p[j] - p[j - 1]).collect();
        let d0: Vec<f64> = per.iter().map(|p| p[j - 1] - p[j - 2]).collect();
        let ratio = ratio_estimate(&d1, &d0);
        let last = partial_sums[j].1;
        // Z <= 1 bounds the remainder by sum_{i > N} g^{i+1}
        let geometric_tail = if g < 1.0 { 2.0 * g.powi(cutoffs[j] as i32 + 2) / (1.0 - g) } else { f64::INFINITY };
        let (class, tail) = if g < 1.0 && geometric_tail <= last.std_error.max(1e-12 * last.mean) {
            (SeriesClass::Converging, Some((0.0, geometric_tail)))
        } else if partial_sums.iter().any(|(_, e)| !e.mean.is_finite()) {
            (SeriesClass::Diverging, None)
        } else {
            match ratio {
                Some(r) if r.mean + 3.0 * r.std_error < 1.0 => {
                    // geometric continuation of the dyadic blocks
                    let d = 2.0 * d1.iter().sum::<f64>() / d1.len() as f64;
                    let t = d * r.mean / (1.0 - r.mean);
                    (SeriesClass::Converging, Some((t, t)))
                }
                Some(r) if r.mean - 3.0 * r.std_error > 1.0 => (SeriesClass::Diverging, None),
                _ => (SeriesClass::Inconclusive, None),
            }
        };
        let (mut esbar, mut velocity) = (None, None);
        if let Some((t, err)) = tail {
            let s = Estimate::new(last.mean + t, last.std_error.hypot(err), last.count);
            velocity = Some(Estimate::new(1.0 / s.mean, s.std_error / (s.mean * s.mean), s.count));
            esbar = Some(s);
        }
        rows.push(ProbeRow { lambda, growth: g, class, partial_sums, block_ratio: ratio, esbar, velocity });
    }
    Ok(rows)
}

/// `mean(num) / mean(den)` with a delta-method standard error.
fn ratio_estimate(num: &[f64], den: &[f64]) -> Option<Estimate> {
    let scale = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (sx, sy) = (scale(num), scale(den));
    if !(sx > 0.0 && sy > 0.0 && sx.is_finite() && sy.is_finite()) {
        return None;
    }
    let num: Vec<f64> = num.iter().map(|x| x / sx).collect();
    let den: Vec<f64> = den.iter().map(|y| y / sy).collect();
    let n = num.len() as f64;
    let mx = num.iter().sum::<f64>() / n;
    let my = den.iter().sum::<f64>() / n;
    if !(my > 0.0) || !mx.is_finite() {
        return None;
    }
    let r = mx / my;
    let var = num.iter().zip(&den).map(|(x, y)| (x - r * y).powi(2)).sum::<f64>() / (n - 1.0);
    let k = sx / sy;
    Some(Estimate::new(r * k, (var / n).sqrt() / my * k, num.len() as u64))
}
