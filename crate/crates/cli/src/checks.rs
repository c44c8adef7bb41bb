//! Acceptance criteria as runnable checks with machine-readable reports.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use rwre_core::analytic::{
    a1_from_dist, a1_uniform, coinflip_taylor, esbar_rcm, eshat_coinflip, eshat_rcm, iid_omega_derivatives,
    jensen_product_moment, lambda_factor, sbar_quenched, sigma2_for_model, u_quenched, v_quenched, velocity_coinflip,
    velocity_iid_omega, velocity_rcm_continuous, velocity_rcm_discrete,
};
use rwre_core::envgen::Reflected;
use rwre_core::estimate::{
    annealed_diffusion, annealed_tau1, annealed_velocity, einstein_slope, renewal_product_moment, velocity_jump_probe,
    walk_seed, EnsembleConfig, Estimate, Horizon, MomentMode, SeriesClass,
};
use rwre_core::oracle::{exact_sbar_periodic, exact_tau1_periodic_continuous, exact_walk_distribution, PeriodicEnv};
use rwre_core::rng::{derive_seed, LANE_AUX};
use rwre_core::series::{SeriesOptions, SeriesValue};
use rwre_core::simulate::{run_discrete, WalkOptions};
use rwre_core::{DiscreteEnv, EnvModel, Quenched, RateEnv, ScalarDist, TimeFlavor};

use crate::CliError;

type CheckResult = Result<Vec<Measurement>, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub label: String,
    pub measured: f64,
    pub target: f64,
    /// Largest admissible `|measured - target|`, or the threshold for one-sided checks.
    pub tolerance: f64,
    pub std_error: Option<f64>,
    pub pass: bool,
}

impl Measurement {
    fn new(label: impl Into<String>, measured: f64, target: f64, tolerance: f64, std_error: Option<f64>, pass: bool) -> Self {
        Self { label: label.into(), measured, target, tolerance, std_error, pass }
    }

    /// `|mean - target| <= k s.e.`
    pub fn within_se(label: impl Into<String>, e: &Estimate, target: f64, k: f64) -> Self {
        let tol = k * e.std_error;
        Self::new(label, e.mean, target, tol, Some(e.std_error), (e.mean - target).abs() <= tol)
    }

    pub fn absolute(label: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        Self::new(label, measured, target, tol, None, (measured - target).abs() <= tol)
    }

    pub fn relative(label: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        let t = tol * target.abs();
        Self::new(label, measured, target, t, None, (measured - target).abs() <= t)
    }

    /// `measured <= bound`.
    pub fn at_most(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(label, measured, bound, 0.0, None, measured <= bound)
    }

    /// `measured > bound`.
    pub fn above(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(label, measured, bound, 0.0, None, measured > bound)
    }

    pub fn flag(label: impl Into<String>, ok: bool) -> Self {
        let x = if ok { 1.0 } else { 0.0 };
        Self::new(label, x, 1.0, 0.0, None, ok)
    }

    /// Zero aborted replicas.
    fn no_aborts(label: &str, count: u64) -> Self {
        Self::new(format!("{label} aborts"), count as f64, 0.0, 0.0, None, count == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub runtime_s: f64,
    pub measurements: Vec<Measurement>,
    pub error: Option<String>,
}

impl CheckReport {
    pub fn summary_line(&self) -> String {
        let failed = self.measurements.iter().filter(|m| !m.pass).count();
        format!(
            "{} criterion {:>2} {:<20} {:>3} measurements, {} failed, {:.1} s{}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measurements.len(),
            failed,
            self.runtime_s,
            self.error.as_ref().map(|e| format!(" ({e})")).unwrap_or_default()
        )
    }
}

pub struct Check {
    pub id: u32,
    pub name: &'static str,
    pub description: &'static str,
    run: fn() -> CheckResult,
}

impl Check {
    pub fn run(&self) -> CheckReport {
        let start = Instant::now();
        let result = (self.run)();
        let runtime_s = start.elapsed().as_secs_f64();
        match result {
            Ok(measurements) => CheckReport {
                id: self.id,
                name: self.name,
                pass: !measurements.is_empty() && measurements.iter().all(|m| m.pass),
                runtime_s,
                measurements,
                error: None,
            },
            Err(e) => CheckReport { id: self.id, name: self.name, pass: false, runtime_s, measurements: Vec::new(), error: Some(e.to_string()) },
        }
    }
}

/// The ten acceptance criteria, in order.
pub static CRITERIA: [Check; 10] = [
    Check { id: 1, name: "velocity-discrete", description: "discrete conductance velocities against Monte Carlo", run: velocity_discrete },
    Check { id: 2, name: "velocity-continuous", description: "continuous conductance velocities against Monte Carlo", run: velocity_continuous },
    Check { id: 3, name: "coinflip", description: "coin-flip velocity and its second right-derivative", run: coinflip },
    Check { id: 4, name: "einstein", description: "Einstein relation, analytic and Monte Carlo slopes", run: einstein },
    Check { id: 5, name: "diffusivity", description: "diffusivity and Gaussian fluctuations", run: diffusivity },
    Check { id: 6, name: "signatures", description: "one-sided derivatives at the threshold and a1", run: signatures },
    Check { id: 7, name: "renewal-scaling", description: "renewal product moments and the velocity jump", run: renewal_scaling },
    Check { id: 8, name: "oracles", description: "exact periodic and dynamic-programming oracles", run: oracles },
    Check { id: 9, name: "passage-time", description: "mean first-passage time to level one", run: passage_time },
    Check { id: 10, name: "invariants", description: "structural invariants", run: invariants },
];

/// Extra named checks that are parts of a criterion.
pub static NAMED: [Check; 1] =
    [Check { id: 10, name: "antisymmetry", description: "exact antisymmetry under mirrored coupling", run: antisymmetry }];

/// Looks up `name`, which may also be a criterion number.
pub fn find(name: &str) -> Option<&'static Check> {
    CRITERIA
        .iter()
        .find(|c| c.name == name || c.id.to_string() == name)
        .or_else(|| NAMED.iter().find(|c| c.name == name))
}

pub fn all_names() -> Vec<&'static str> {
    CRITERIA.iter().chain(NAMED.iter()).map(|c| c.name).collect()
}

/// Seeds are fixed per criterion and run before anything is measured.
fn seed(criterion: u64, run: u64) -> u64 {
    derive_seed(1000 + criterion, LANE_AUX, run)
}

fn model(s: &str) -> Result<EnvModel, CliError> {
    let m: EnvModel = s.parse()?;
    m.validate()?;
    Ok(m)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

const TWO_POINT: &str = "two-point:1,2:0.5";

fn velocity_discrete() -> CheckResult {
    let mut out = Vec::new();
    let two = model(&format!("discrete rcm c={TWO_POINT}"))?;
    let det = model("discrete rcm c=constant:1")?;
    let (a, b) = (1.5, 0.75);
    let mut run = 0;
    for (m, name) in [(&two, "two-point"), (&det, "deterministic")] {
        for lambda in [0.25, 0.5, 1.0] {
            let target = if m == &det { f64::tanh(lambda) } else { velocity_rcm_discrete(lambda, a, b)?.v };
            let e = annealed_velocity(m, lambda, Horizon::Steps(100_000), &EnsembleConfig::new(2000, seed(1, run)))?;
            run += 1;
            let label = format!("{name} lambda={lambda} v");
            out.push(Measurement::within_se(&label, &e.estimate, target, 3.0));
            out.push(Measurement::no_aborts(&label, e.aborts.count));
        }
    }
    Ok(out)
}

fn velocity_continuous() -> CheckResult {
    let mut out = Vec::new();
    for (i, (c, b)) in [("constant:1", 1.0), (TWO_POINT, 0.75)].into_iter().enumerate() {
        let m = model(&format!("continuous rcm c={c}"))?;
        let target = velocity_rcm_continuous(1.0, b)?.v;
        let e = annealed_velocity(&m, 1.0, Horizon::Time(10_000.0), &EnsembleConfig::new(1000, seed(2, i as u64)))?;
        let label = format!("c={c} lambda=1 v");
        out.push(Measurement::within_se(&label, &e.estimate, target, 3.0));
        out.push(Measurement::no_aborts(&label, e.aborts.count));
    }
    Ok(out)
}

fn coinflip() -> CheckResult {
    let mut out = Vec::new();
    let m = model(&format!("continuous coinflip plus={TWO_POINT} minus={TWO_POINT}"))?;
    let (a, b) = (1.5, 0.75);
    for (i, lambda) in [0.5, 1.0].into_iter().enumerate() {
        let target = velocity_coinflip(lambda, a, b)?.v;
        let e = annealed_velocity(&m, lambda, Horizon::Time(10_000.0), &EnsembleConfig::new(1000, seed(3, i as u64)))?;
        let label = format!("lambda={lambda} v");
        out.push(Measurement::within_se(&label, &e.estimate, target, 3.0));
        out.push(Measurement::no_aborts(&label, e.aborts.count));
    }
    let h = 1e-3;
    let v = |l: f64| velocity_coinflip(l, a, b).map(|r| r.v);
    let second = (v(2.0 * h)? - 2.0 * v(h)? + v(0.0)?) / (h * h);
    let ab = a * b;
    let target = 16.0 * (ab - 1.0) / (b * (1.0 + ab) * (1.0 + ab));
    out.push(Measurement::relative("second right-derivative at 0, h=1e-3", second, target, 0.01));
    out.push(Measurement::absolute("Taylor coefficient times two", 2.0 * coinflip_taylor(a, b).1, target, 1e-12 * target));
    Ok(out)
}

fn einstein() -> CheckResult {
    let mut out = Vec::new();
    let m = model(&format!("discrete rcm c={TWO_POINT}"))?;
    let analytic = einstein_slope(&m, &[1e-4], None)?;
    out.push(Measurement::absolute("analytic v(h)/h at h=1e-4", analytic.rows[0].analytic, analytic.limit, 1e-3));
    let cfg = EnsembleConfig::new(5000, seed(4, 0));
    let mc = einstein_slope(&m, &[0.05], Some((Horizon::Steps(1_000_000), &cfg)))?;
    let row = &mc.rows[0];
    let corrected = row.mc_corrected.as_ref().expect("Monte Carlo requested");
    out.push(Measurement::within_se("bias-corrected Monte Carlo v(h)/h at h=0.05", corrected, mc.limit, 3.0));
    let raw = row.mc.as_ref().expect("Monte Carlo requested");
    out.push(Measurement::within_se("Monte Carlo v(h)/h against the closed form at h=0.05", raw, row.analytic, 3.0));
    out.push(Measurement::no_aborts("Monte Carlo slope", row.aborts));
    Ok(out)
}

fn diffusivity() -> CheckResult {
    let mut out = Vec::new();
    let cases = [
        (format!("discrete rcm c={TWO_POINT}"), 0.10, "two-point"),
        ("discrete rcm c=constant:1".to_string(), 0.05, "deterministic"),
    ];
    for (i, (text, tol, name)) in cases.iter().enumerate() {
        let m = model(text)?;
        let v = velocity_rcm_discrete(1.0, if *name == "deterministic" { 1.0 } else { 1.5 }, if *name == "deterministic" { 1.0 } else { 0.75 })?.v;
        let target = if *name == "deterministic" {
            let c = 1f64.exp() + (-1f64).exp();
            4.0 / (c * c)
        } else {
            sigma2_for_model(&m, 1.0)?
        };
        let d = annealed_diffusion(&m, 1.0, Horizon::Steps(10_000), v, &EnsembleConfig::new(10_000, seed(5, i as u64)))?;
        out.push(Measurement::relative(format!("{name} variance"), d.variance.mean, target, *tol));
        out.push(Measurement::at_most(format!("{name} KS distance"), d.ks_distance, 0.03));
        out.push(Measurement::no_aborts(name, d.aborts.count));
    }
    Ok(out)
}

fn signatures() -> CheckResult {
    let mut out = Vec::new();
    let rho = ScalarDist::two_point(0.25, 4.0, 0.5)?;
    let (m1, mi) = (rho.mean(), rho.moment(-1.0));
    let lp = velocity_iid_omega(0.0, m1, mi)?.lambda_plus.expect("threshold");
    let (left, right) = iid_omega_derivatives(lp, m1, mi);
    out.push(Measurement::absolute("analytic right derivative at lambda+", right, 1.0, 1e-6));
    out.push(Measurement::absolute("analytic left derivative at lambda+", left, 0.0, 1e-6));
    let v = |l: f64| velocity_iid_omega(l, m1, mi).map(|r| r.v);
    let d = 1e-7;
    out.push(Measurement::absolute("numeric right derivative at lambda+", (v(lp + d)? - v(lp)?) / d, 1.0, 1e-6));
    out.push(Measurement::absolute("numeric left derivative at lambda+", (v(lp)? - v(lp - d)?) / d, 0.0, 1e-6));
    for mx in [2.0, 10.0] {
        let c = ScalarDist::two_point(1.0, mx, 0.5)?;
        out.push(Measurement::above(format!("a1 two-point 1,{mx}"), a1_from_dist(&c), 0.0));
    }
    for x in [2.0, 10.0] {
        let explicit = a1_uniform(x);
        out.push(Measurement::above(format!("a1 uniform 1,{x}"), explicit, 0.0));
        let from_moments = a1_from_dist(&ScalarDist::uniform(1.0, x)?);
        out.push(Measurement::relative(format!("a1 uniform 1,{x} from moments"), from_moments, explicit, 1e-9));
    }
    let a1 = a1_from_dist(&ScalarDist::constant(1.0)?);
    out.push(Measurement::new("a1 deterministic", a1, 0.0, 0.0, None, a1 == 0.0));
    Ok(out)
}

fn renewal_scaling() -> CheckResult {
    let mut out = Vec::new();
    let grid = [100u64, 200, 500, 1000, 2000, 5000, 10_000];
    let pm = renewal_product_moment(3.0, &grid, (100, 10_000), 100_000, seed(7, 0), MomentMode::Conditional)?;
    let fit = pm.fit.ok_or_else(|| CliError::Validation("power-law fit failed".into()))?;
    out.push(Measurement::new(
        "fitted slope over [1e2, 1e4]",
        fit.slope,
        -2.0,
        0.3,
        Some(fit.slope_std_error),
        (fit.slope + 2.0).abs() <= 0.3,
    ));
    for r in &pm.rows {
        let slack = 3.0 * r.estimate.std_error;
        out.push(Measurement::new(
            format!("n={} above P(tau1>n)/2", r.n),
            r.estimate.mean,
            r.lower_bound,
            slack,
            Some(r.estimate.std_error),
            r.estimate.mean >= r.lower_bound - slack,
        ));
    }
    let a = 2.0f64;
    let lp = 0.5 * a.ln();
    let rows = velocity_jump_probe(a, 3.0, &[lp - 0.1, lp], 1 << 14, 100_000, seed(7, 1))?;
    out.push(Measurement::flag("probe at lambda+ - 0.1 diverges", rows[0].class == SeriesClass::Diverging));
    out.push(Measurement::flag("probe at lambda+ converges", rows[1].class == SeriesClass::Converging));
    match rows[1].velocity {
        Some(v) => out.push(Measurement::new(
            "v(lambda+) above 3 s.e.",
            v.mean,
            0.0,
            3.0 * v.std_error,
            Some(v.std_error),
            v.mean > 3.0 * v.std_error,
        )),
        None => out.push(Measurement::flag("v(lambda+) estimated", false)),
    }
    Ok(out)
}

fn oracles() -> CheckResult {
    let mut out = Vec::new();
    let opts = SeriesOptions::with_tol(1e-12);
    for l in [1usize, 2, 3, 5] {
        let mut worst = 0.0f64;
        let mut ok = true;
        let mut converged = 0;
        for k in 0..100u64 {
            let mut env = PeriodicEnv::random(l, seed(8, 1000 * l as u64 + k), TimeFlavor::Discrete);
            let lambda = 0.2 + 0.02 * k as f64;
            let exact = exact_sbar_periodic(&env, lambda);
            let series = sbar_quenched(&mut env, lambda, &opts);
            if !exact.is_converged() {
                ok &= !series.is_converged();
                continue;
            }
            converged += 1;
            let gap = (exact.value - series.value).abs();
            ok &= series.is_converged() && gap <= series.error_bound + 1e-12 * exact.value;
            worst = worst.max(gap / exact.value);
        }
        out.push(Measurement::flag(format!("L={l}: S-bar series matches block sums on 100 environments"), ok));
        out.push(Measurement::above(format!("L={l}: converged cases"), converged as f64, 0.0));
        out.push(Measurement::at_most(format!("L={l}: worst relative gap"), worst, 1e-9));
    }
    let mut worst = 0.0f64;
    let mut solved = 0;
    for k in 0..100u64 {
        let env = PeriodicEnv::random(1 + k as usize % 5, seed(8, 10_000 + k), TimeFlavor::Continuous);
        if let Ok(t) = exact_tau1_periodic_continuous(&env, 0.5 + 0.05 * k as f64) {
            worst = worst.max(t.relative_gap());
            solved += 1;
        }
    }
    out.push(Measurement::above("passage-time systems solved", solved as f64, 0.0));
    out.push(Measurement::at_most("passage-time routes, worst relative gap", worst, 1e-12));

    let m = model("discrete rcm c=constant:1")?;
    let mut env = DiscreteEnv::new(&m, 0)?;
    let exact = exact_walk_distribution(&mut env, 1.0, 30)?;
    let root = seed(8, 20_000);
    let opts = WalkOptions::default();
    let samples: Vec<i64> = (0..1_000_000u64)
        .into_par_iter()
        .map_init(|| env.clone(), |e, k| run_discrete(e, 1.0, 30, walk_seed(root, k), &opts).map(|t| t.final_position).unwrap_or(i64::MIN))
        .collect();
    out.push(Measurement::at_most("DP versus Monte Carlo total variation, n=30", exact.total_variation(&samples), 0.01));
    Ok(out)
}

fn passage_time() -> CheckResult {
    let m = model("continuous rcm c=constant:1")?;
    let e = annealed_tau1(&m, 1.0, 10_000, seed(9, 0), 1_000_000_000)?;
    let target = 1.0 / (2.0 * 1f64.sinh());
    Ok(vec![Measurement::within_se("mean tau1, c=1, lambda=1", &e.estimate, target, 3.0), Measurement::no_aborts("tau1", e.aborts.count)])
}

fn antisymmetry() -> CheckResult {
    let mut out = Vec::new();
    let cases = [
        (format!("discrete rcm c={TWO_POINT}"), Horizon::Steps(10_000)),
        (format!("continuous coinflip plus={TWO_POINT} minus=uniform:1,3"), Horizon::Time(1000.0)),
        ("discrete iid-omega rho=uniform:0.5,3".to_string(), Horizon::Steps(10_000)),
    ];
    let mut run = 0;
    for (text, h) in cases {
        let m = model(&text)?;
        for lambda in [0.25, 1.0] {
            let cfg = EnsembleConfig::new(500, seed(10, run));
            run += 1;
            let plus = annealed_velocity(&m, lambda, h, &cfg)?.estimate;
            let minus = annealed_velocity(&m, -lambda, h, &cfg.clone().mirrored())?.estimate;
            out.push(Measurement::new(
                format!("{text} lambda={lambda}: v(l) + v(-l) mirrored"),
                plus.mean + minus.mean,
                0.0,
                0.0,
                None,
                plus.mean == -minus.mean && plus.std_error == minus.std_error,
            ));
        }
    }
    let rho = ScalarDist::uniform(0.5, 3.0)?;
    let grid = linspace(-2.0, 2.0, 50);
    let mut ok = true;
    for &l in &grid {
        ok &= velocity_rcm_discrete(-l, 1.5, 0.75)?.v == -velocity_rcm_discrete(l, 1.5, 0.75)?.v;
        ok &= velocity_rcm_continuous(-l, 0.75)?.v == -velocity_rcm_continuous(l, 0.75)?.v;
        ok &= velocity_coinflip(-l, 1.5, 0.75)?.v == -velocity_coinflip(l, 1.5, 0.75)?.v;
        // reflection swaps rho and 1/rho
        let here = velocity_iid_omega(l, rho.mean(), rho.moment(-1.0))?.v;
        let there = velocity_iid_omega(-l, rho.moment(-1.0), rho.mean())?.v;
        ok &= here == -there;
    }
    out.push(Measurement::flag("closed forms are odd under reflection on a 50-point grid", ok));
    Ok(out)
}

/// Strictly increasing outside `[lm, lp]`, zero inside, nondecreasing throughout.
fn monotone(grid: &[f64], v: impl Fn(f64) -> f64, lm: f64, lp: f64) -> bool {
    let vals: Vec<f64> = grid.iter().map(|&l| v(l)).collect();
    let mut ok = true;
    for (i, &l) in grid.iter().enumerate() {
        if l >= lm && l <= lp {
            ok &= vals[i] == 0.0;
        }
        if i + 1 < grid.len() {
            let strict = grid[i] >= lp || grid[i + 1] <= lm;
            ok &= if strict { vals[i + 1] > vals[i] } else { vals[i + 1] >= vals[i] };
        }
    }
    ok
}

/// `(converged evaluations, all identities held)` for one environment.
fn identities<E: Quenched>(e: &mut E, l: f64, opts: &SeriesOptions) -> (u32, bool) {
    let mut evaluated = 0;
    let mut ok = true;
    let s = sbar_quenched(e, l, opts);
    let u = u_quenched(e, l, opts);
    if s.is_converged() && u.is_converged() {
        evaluated += 1;
        ok &= s.agrees_with(&u.affine(1.0, 2.0), 1e-12 * s.value);
    }
    let lam = lambda_factor(e, l, opts);
    let v = v_quenched(e, l, opts);
    if lam.is_converged() && v.is_converged() {
        evaluated += 1;
        let fac: SeriesValue = v.affine(1.0, 1.0).affine(0.0, 1.0 + e.rho(0) * (-2.0 * l).exp());
        ok &= lam.agrees_with(&fac, 1e-12 * lam.value);
    }
    (evaluated, ok)
}

fn identity_sweep(out: &mut Vec<Measurement>) -> Result<(), CliError> {
    let opts = SeriesOptions::with_tol(1e-12);
    let mut evaluated = 0;
    let mut ok = true;
    let mut tally = |(n, good): (u32, bool)| {
        evaluated += n;
        ok &= good;
    };
    let texts = [
        format!("discrete rcm c={TWO_POINT}"),
        "discrete rcm c=uniform:1,10".to_string(),
        "discrete iid-omega rho=uniform:0.5,2".to_string(),
        "continuous coinflip plus=uniform:1,3 minus=two-point:1,2:0.5".to_string(),
        "discrete renewal a=1.5 gamma=3".to_string(),
    ];
    for (j, text) in texts.iter().enumerate() {
        let m = model(text)?;
        for k in 0..10u64 {
            for l in [0.3, 0.8, 1.5] {
                let s = seed(10, 100 + 10 * j as u64 + k);
                match m.time {
                    TimeFlavor::Discrete => tally(identities(&mut DiscreteEnv::new(&m, s)?, l, &opts)),
                    TimeFlavor::Continuous => tally(identities(&mut RateEnv::new(&m, s)?, l, &opts)),
                }
                tally(identities(&mut Reflected(DiscreteEnv::new(&m, s)?), l, &opts));
            }
        }
    }
    for k in 0..20u64 {
        let mut env = PeriodicEnv::random(1 + k as usize % 5, seed(10, 500 + k), TimeFlavor::Discrete);
        tally(identities(&mut env, 1.0 + 0.1 * k as f64, &opts));
    }
    out.push(Measurement::above("converged quenched identity evaluations", evaluated as f64, 0.0));
    out.push(Measurement::flag("S-bar = 1 + 2U and Lambda = (1 + rho_0(l)) (1 + V) on every converged evaluation", ok));
    Ok(())
}

fn invariants() -> CheckResult {
    let mut out = antisymmetry()?;
    let grid = linspace(-2.0, 2.0, 50);
    let rho = ScalarDist::two_point(0.25, 4.0, 0.5)?;
    let (m1, mi) = (rho.mean(), rho.moment(-1.0));
    let r = velocity_iid_omega(0.0, m1, mi)?;
    let (lm, lp) = (r.lambda_minus.unwrap(), r.lambda_plus.unwrap());
    out.push(Measurement::flag(
        "i.i.d. omega velocity monotone",
        monotone(&grid, |l| velocity_iid_omega(l, m1, mi).map_or(f64::NAN, |r| r.v), lm, lp),
    ));
    out.push(Measurement::flag(
        "discrete conductance velocity monotone",
        monotone(&grid, |l| velocity_rcm_discrete(l, 1.5, 0.75).map_or(f64::NAN, |r| r.v), 0.0, 0.0),
    ));
    out.push(Measurement::flag(
        "continuous conductance velocity monotone",
        monotone(&grid, |l| velocity_rcm_continuous(l, 0.75).map_or(f64::NAN, |r| r.v), 0.0, 0.0),
    ));
    out.push(Measurement::flag(
        "coin-flip velocity monotone",
        monotone(&grid, |l| velocity_coinflip(l, 1.5, 0.75).map_or(f64::NAN, |r| r.v), 0.0, 0.0),
    ));

    let mut even = true;
    for text in [format!("discrete rcm c={TWO_POINT}"), "discrete rcm c=uniform:1,10".to_string()] {
        let m = model(&text)?;
        for &l in &grid {
            even &= sigma2_for_model(&m, l)? == sigma2_for_model(&m, -l)?;
        }
    }
    out.push(Measurement::flag("sigma^2 is even on the grid", even));

    let mut worst = 0.0f64;
    let d = ScalarDist::two_point(1.0, 2.0, 0.5)?;
    for l in linspace(0.04, 2.0, 50) {
        worst = worst.max((esbar_rcm(l, 1.5, 0.75).value * velocity_rcm_discrete(l, 1.5, 0.75)?.v - 1.0).abs());
        worst = worst.max((eshat_rcm(l, 0.75).value * velocity_rcm_continuous(l, 0.75)?.v - 1.0).abs());
        worst = worst.max((eshat_coinflip(l, &d, &d).value * velocity_coinflip(l, 1.5, 0.75)?.v - 1.0).abs());
    }
    out.push(Measurement::at_most("worst |v E[S] - 1|", worst, 1e-12));

    identity_sweep(&mut out)?;

    let mut jensen = true;
    for text in [
        "discrete iid-omega rho=two-point:0.25,4:0.5",
        "discrete iid-omega rho=uniform:0.5,2",
        "discrete rcm c=two-point:1,2:0.5",
        "discrete rcm c=uniform:1,10",
    ] {
        let m = model(text)?;
        for i in 0..=20 {
            let (lhs, rhs) = jensen_product_moment(&m, i)?;
            jensen &= lhs >= rhs * (1.0 - 1e-12);
        }
    }
    out.push(Measurement::flag("product moments dominate exp((i+1) E[log rho]) for i <= 20", jensen));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        assert_eq!(find("einstein").unwrap().id, 4);
        assert_eq!(find("4").unwrap().name, "einstein");
        assert_eq!(find("antisymmetry").unwrap().id, 10);
        assert_eq!(find("10").unwrap().name, "invariants");
        assert!(find("nope").is_none());
        assert_eq!(all_names().len(), 11);
    }

    #[test]
    fn fast_checks_pass() {
        for name in ["signatures", "antisymmetry"] {
            let r = find(name).unwrap().run();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn monotone_helper() {
        let g = linspace(-1.0, 1.0, 21);
        assert!(monotone(&g, |l| l, 0.0, 0.0));
        assert!(!monotone(&g, |l| -l, 0.0, 0.0));
        assert!(monotone(&g, |l| if l.abs() <= 0.3 { 0.0 } else { l }, -0.3, 0.3));
        assert!(!monotone(&g, |l| if l.abs() <= 0.3 { 0.0 } else { l }, -0.5, 0.5));
    }
}
