//! Closed-form velocities, diffusivities and expansion coefficients, plus
//! quenched series evaluators.

mod diffusivity;
mod quenched;

pub use diffusivity::{
    sigma2_iid_omega, sigma2_rcm, sigma2_rcm_at_zero, CovarianceOptions, DiffusivityBreakdown,
};
pub use quenched::{
    fbar_quenched, fhat_quenched, lambda_factor, sbar_quenched, shat_quenched, u_quenched, v_quenched,
};

use serde::Serialize;

use crate::dist::ScalarDist;
use crate::envgen::{EnvKind, EnvModel, TimeFlavor};
use crate::error::{Error, Result};
use crate::series::SeriesValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Positive,
    Zero,
    Negative,
}

impl Regime {
    pub fn of(v: f64) -> Self {
        if v > 0.0 {
            Self::Positive
        } else if v < 0.0 {
            Self::Negative
        } else {
            Self::Zero
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Zero => "zero",
            Self::Negative => "negative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityResult {
    pub v: f64,
    pub regime: Regime,
    pub lambda_minus: Option<f64>,
    pub lambda_plus: Option<f64>,
}

impl VelocityResult {
    fn new(v: f64, lambda_minus: f64, lambda_plus: f64) -> Self {
        Self { v, regime: Regime::of(v), lambda_minus: Some(lambda_minus), lambda_plus: Some(lambda_plus) }
    }
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be positive, got {x}")))
    }
}

fn check_jensen(a: f64, b: f64) -> Result<()> {
    check_positive(a, "A")?;
    check_positive(b, "B")?;
    if a * b < 1.0 - 1e-12 {
        return Err(Error::InconsistentMoments(format!("AB = {} < 1", a * b)));
    }
    Ok(())
}

/// Odd extension: evaluates `f` at `|lambda|` and restores the sign.
fn odd(lambda: f64, f: impl Fn(f64) -> f64) -> f64 {
    if lambda < 0.0 {
        -f(-lambda)
    } else {
        f(lambda)
    }
}

/// I.i.d. jump probabilities with `E[rho] = m1`, `E[1/rho] = m_inv`.
pub fn velocity_iid_omega(lambda: f64, m1: f64, m_inv: f64) -> Result<VelocityResult> {
    check_positive(m1, "E[rho]")?;
    check_positive(m_inv, "E[1/rho]")?;
    if m1 * m_inv < 1.0 - 1e-12 {
        return Err(Error::InconsistentMoments(format!("E[rho] E[1/rho] = {} < 1", m1 * m_inv)));
    }
    let lp = 0.5 * m1.ln();
    let lm = -0.5 * m_inv.ln();
    let v = if lambda >= lp {
        let y = m1 * (-2.0 * lambda).exp();
        ((1.0 - y) / (1.0 + y)).max(0.0)
    } else if lambda <= lm {
        let y = m_inv * (2.0 * lambda).exp();
        (-(1.0 - y) / (1.0 + y)).min(0.0)
    } else {
        0.0
    };
    Ok(VelocityResult::new(v, lm, lp))
}

/// Analytic one-sided derivatives `(left, right)` of the i.i.d.-omega velocity.
pub fn iid_omega_derivatives(lambda: f64, m1: f64, m_inv: f64) -> (f64, f64) {
    let lp = 0.5 * m1.ln();
    let lm = -0.5 * m_inv.ln();
    let upper = |l: f64| {
        let y = m1 * (-2.0 * l).exp();
        4.0 * y / ((1.0 + y) * (1.0 + y))
    };
    let lower = |l: f64| {
        let y = m_inv * (2.0 * l).exp();
        4.0 * y / ((1.0 + y) * (1.0 + y))
    };
    let left = if lambda > lp { upper(lambda) } else if lambda > lm { 0.0 } else { lower(lambda) };
    let right = if lambda >= lp { upper(lambda) } else if lambda >= lm { 0.0 } else { lower(lambda) };
    (left, right)
}

/// Discrete-time random conductance model, `A = E[c]`, `B = E[1/c]`.
pub fn velocity_rcm_discrete(lambda: f64, a: f64, b: f64) -> Result<VelocityResult> {
    check_jensen(a, b)?;
    let ab = a * b;
    let v = odd(lambda, |l| {
        let one_minus = -(-2.0 * l).exp_m1();
        one_minus / (one_minus + 2.0 * ab * (-2.0 * l).exp())
    });
    Ok(VelocityResult::new(v, 0.0, 0.0))
}

/// `(1/AB, (AB-1)/(AB)^2)`: first two Taylor coefficients at zero bias.
pub fn rcm_discrete_taylor(a: f64, b: f64) -> (f64, f64) {
    let ab = a * b;
    (1.0 / ab, (ab - 1.0) / (ab * ab))
}

/// Continuous-time random conductance model; `b = f64::INFINITY` allowed.
pub fn velocity_rcm_continuous(lambda: f64, b: f64) -> Result<VelocityResult> {
    check_positive(b, "B")?;
    if b.is_infinite() {
        return Ok(VelocityResult::new(0.0, f64::NEG_INFINITY, f64::INFINITY));
    }
    let v = odd(lambda, |l| 2.0 * l.sinh() / b);
    Ok(VelocityResult::new(v, 0.0, 0.0))
}

/// Coin-flip pairing model with `A = E[a+]`, `B = E[1/a+]`, `a-` equal in law to `a+`.
pub fn velocity_coinflip(lambda: f64, a: f64, b: f64) -> Result<VelocityResult> {
    check_jensen(a, b)?;
    let ab = a * b;
    let v = odd(lambda, |l| {
        let e2 = (-2.0 * l).exp();
        let e4 = e2 * e2;
        -2.0 * (-4.0 * l).exp_m1() / (b * (-l).exp() * (2.0 + e2 * (ab + 1.0) + e4 * (ab - 1.0)))
    });
    Ok(VelocityResult::new(v, 0.0, 0.0))
}

/// `(first, second)` right-derivative Taylor coefficients of the coin-flip velocity.
pub fn coinflip_taylor(a: f64, b: f64) -> (f64, f64) {
    let ab = a * b;
    (4.0 / (b * (1.0 + ab)), 8.0 * (ab - 1.0) / (b * (1.0 + ab) * (1.0 + ab)))
}

/// Annealed mean holding-time series for the coin-flip model with
/// general laws of `a+` and `a-`.
pub fn eshat_coinflip(lambda: f64, plus: &ScalarDist, minus: &ScalarDist) -> SeriesValue {
    if lambda <= 0.0 {
        return SeriesValue::diverged(0);
    }
    let bm = minus.moment(-1.0);
    let bp = plus.moment(-1.0);
    let am = minus.mean();
    let e4 = (-4.0 * lambda).exp();
    let g4 = e4 / -(-4.0 * lambda).exp_m1();
    let g2 = (-2.0 * lambda).exp() / -(-4.0 * lambda).exp_m1();
    let mixed = am * bp;
    let heads = bm * (1.0 + g4 + mixed * g2);
    let tails = bp + bm * mixed * g4 + bm * g2;
    SeriesValue::exact(0.5 * (-lambda).exp() * (heads + tails))
}

/// Annealed mean of the quenched series `S-bar` for the discrete RCM.
pub fn esbar_rcm(lambda: f64, a: f64, b: f64) -> SeriesValue {
    if lambda <= 0.0 {
        return SeriesValue::diverged(0);
    }
    let q = (-2.0 * lambda).exp();
    let one_minus = -(-2.0 * lambda).exp_m1();
    SeriesValue::exact((one_minus + 2.0 * a * b * q) / one_minus)
}

/// Annealed mean of `S-hat` for the continuous RCM.
pub fn eshat_rcm(lambda: f64, b: f64) -> SeriesValue {
    if lambda <= 0.0 {
        return SeriesValue::diverged(0);
    }
    SeriesValue::exact(b / (2.0 * lambda.sinh()))
}

/// First-order coefficient of `sigma^2` at zero bias.
pub fn a1_coefficient(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let ab = a * b;
    2.0 * (a * a * d + b * b * c) / (ab * ab * ab) - 5.0 / ab + 1.0 / (ab * ab)
}

pub fn a1_from_dist(c: &ScalarDist) -> f64 {
    a1_coefficient(c.moment(1.0), c.moment(-1.0), c.moment(2.0), c.moment(-2.0))
}

/// `a1` for conductances uniform on `[1, x]`, `x > 1`, by its explicit formula.
pub fn a1_uniform(x: f64) -> f64 {
    let l = x.ln();
    let xm = x - 1.0;
    let xp = x + 1.0;
    4.0 / (x * xp) * xm.powi(3) / l.powi(3) + 16.0 / 3.0 * (x.powi(3) - 1.0) / (xp.powi(3) * l)
        - 10.0 * xm / (xp * l)
        + 4.0 * xm * xm / (xp * xp * l * l)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltCheck {
    pub pass: bool,
    pub failed: Option<String>,
    pub diagnostics: Vec<String>,
}

pub fn check_clt_condition(model: &EnvModel, lambda: f64, eps: f64) -> Result<CltCheck> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    let p = 2.0 + eps;
    match &model.kind {
        EnvKind::IidOmega { rho } => {
            let lhs = rho.moment(p);
            let rhs = (2.0 * lambda * p).exp();
            let pass = lhs < rhs;
            Ok(CltCheck {
                pass,
                failed: (!pass).then(|| format!("E[rho^{p}] = {lhs} >= exp(2 lambda (2+eps)) = {rhs}")),
                diagnostics: vec![format!("E[rho^{p}] = {lhs}"), format!("exp(2 lambda (2+eps)) = {rhs}")],
            })
        }
        EnvKind::IidConductance { conductance } => {
            let up = conductance.moment(p);
            let down = conductance.moment(-p);
            let mut failed = None;
            if !up.is_finite() {
                failed = Some(format!("E[c^{p}] is not finite"));
            } else if !down.is_finite() {
                failed = Some(format!("E[c^-{p}] is not finite"));
            } else if lambda == 0.0 {
                failed = Some("lambda = 0 is not ballistic".to_string());
            }
            Ok(CltCheck {
                pass: failed.is_none(),
                failed,
                diagnostics: vec![format!("E[c^{p}] = {up}"), format!("E[c^-{p}] = {down}")],
            })
        }
        _ => Err(Error::Unsupported(format!("CLT condition check for {}", model.tag()))),
    }
}

/// `(E[rho_0 ... rho_{-i}], exp((i+1) E[log rho_0]))` for the i.i.d. families.
pub fn jensen_product_moment(model: &EnvModel, i: u32) -> Result<(f64, f64)> {
    let k = (i + 1) as f64;
    match &model.kind {
        EnvKind::IidOmega { rho } => Ok((rho.mean().powf(k), (k * rho.log_moment()).exp())),
        // the product telescopes to c_{-i-1} / c_0
        EnvKind::IidConductance { conductance } => Ok((conductance.mean() * conductance.moment(-1.0), 1.0)),
        _ => Err(Error::Unsupported(format!("product moments for {}", model.tag()))),
    }
}

/// Closed-form annealed velocity for the families that have one.
pub fn velocity_for_model(model: &EnvModel, lambda: f64) -> Result<VelocityResult> {
    match (&model.kind, model.time) {
        (EnvKind::IidOmega { rho }, TimeFlavor::Discrete) => velocity_iid_omega(lambda, rho.mean(), rho.moment(-1.0)),
        (EnvKind::IidConductance { conductance: c }, TimeFlavor::Discrete) => {
            velocity_rcm_discrete(lambda, c.mean(), c.moment(-1.0))
        }
        (EnvKind::IidConductance { conductance: c }, TimeFlavor::Continuous) => {
            velocity_rcm_continuous(lambda, c.moment(-1.0))
        }
        (EnvKind::CoinFlip { plus, minus }, TimeFlavor::Continuous) => {
            if plus == minus {
                return velocity_coinflip(lambda, plus.mean(), plus.moment(-1.0));
            }
            let v = odd(lambda, |l| if l == 0.0 { 0.0 } else { 1.0 / eshat_coinflip(l, plus, minus).value });
            Ok(VelocityResult::new(v, 0.0, 0.0))
        }
        _ => Err(Error::Unsupported(format!("closed-form velocity for {}", model.tag()))),
    }
}

/// Closed-form diffusivity for the discrete i.i.d. families.
pub fn sigma2_for_model(model: &EnvModel, lambda: f64) -> Result<f64> {
    match (&model.kind, model.time) {
        (EnvKind::IidConductance { conductance: c }, TimeFlavor::Discrete) => {
            let (a, b) = (c.mean(), c.moment(-1.0));
            if lambda == 0.0 {
                sigma2_rcm_at_zero(a, b)
            } else {
                Ok(sigma2_rcm(lambda, a, b, c.moment(2.0), c.moment(-2.0))?.sigma2)
            }
        }
        (EnvKind::IidOmega { rho }, TimeFlavor::Discrete) => {
            Ok(sigma2_iid_omega(lambda, rho.mean(), rho.moment(2.0), &CovarianceOptions::default())?.sigma2)
        }
        _ => Err(Error::Unsupported(format!("closed-form diffusivity for {}", model.tag()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_dispatch() {
        let m: EnvModel = "discrete rcm c=two-point:1,2:0.5".parse().unwrap();
        assert!((velocity_for_model(&m, 0.5).unwrap().v - 0.43300398074959429).abs() < 1e-15);
        assert!((sigma2_for_model(&m, 1.0).unwrap() - 0.452038989878536).abs() < 1e-13);
        assert!((sigma2_for_model(&m, 0.0).unwrap() - 1.0 / 1.125).abs() < 1e-15);
        let m: EnvModel = "continuous rcm c=constant:1".parse().unwrap();
        assert!((velocity_for_model(&m, 1.0).unwrap().v - 2.3504023872876029).abs() < 1e-15);
        let m: EnvModel = "continuous coinflip plus=two-point:1,2:0.5 minus=two-point:1,2:0.5".parse().unwrap();
        assert!((velocity_for_model(&m, 1.0).unwrap().v - 3.1075844855583822).abs() < 1e-14);
        let m: EnvModel = "continuous coinflip plus=two-point:1,2:0.5 minus=constant:1".parse().unwrap();
        let (v, w) = (velocity_for_model(&m, 0.7).unwrap().v, velocity_for_model(&m, -0.7).unwrap().v);
        assert!(v > 0.0 && v == -w);
        let m: EnvModel = "discrete renewal a=2 gamma=3".parse().unwrap();
        assert!(velocity_for_model(&m, 1.0).is_err());
    }

    #[test]
    fn iid_omega_examples() {
        let r = velocity_iid_omega(0.0, 1.25, 1.25).unwrap();
        assert_eq!(r.v, 0.0);
        assert_eq!(r.regime, Regime::Zero);
        assert!((r.lambda_plus.unwrap() - 0.11157177565710488).abs() < 1e-16);
        assert!((r.lambda_minus.unwrap() + 0.11157177565710488).abs() < 1e-16);
        let v = velocity_iid_omega(1.0, 1.25, 1.25).unwrap().v;
        let y = 1.25 * (-2.0f64).exp();
        assert!((v - (1.0 - y) / (1.0 + y)).abs() < 1e-16);
        assert!((v - 0.71062).abs() < 1e-5);
        let c = 0.7f64;
        for l in [-2.0, -0.5, 0.3, 1.0] {
            let v = velocity_iid_omega(l, c, 1.0 / c).unwrap().v;
            let y = c * (-2.0 * l).exp();
            assert!((v - (1.0 - y) / (1.0 + y)).abs() < 1e-15, "l={l}");
        }
    }

    #[test]
    fn rcm_examples() {
        assert_eq!(velocity_rcm_discrete(0.0, 1.5, 0.75).unwrap().v, 0.0);
        assert!((velocity_rcm_discrete(1.0, 1.0, 1.0).unwrap().v - 1f64.tanh()).abs() < 1e-15);
        let v = velocity_rcm_discrete(0.5, 1.5, 0.75).unwrap().v;
        assert!((v - 0.43300398074959429).abs() < 1e-15);
        assert!(velocity_rcm_discrete(1.0, 1.0, 0.5).is_err());
        let v = velocity_rcm_continuous(1.0, 1.0).unwrap().v;
        assert!((v - 2.3504023872876029).abs() < 1e-15);
        assert_eq!(velocity_rcm_continuous(0.3, f64::INFINITY).unwrap().v, 0.0);
    }

    #[test]
    fn esbar_reciprocal() {
        for l in [0.1, 0.5, 1.0, 2.0] {
            let v = velocity_rcm_discrete(l, 1.5, 0.75).unwrap().v;
            let s = esbar_rcm(l, 1.5, 0.75).value;
            assert!((s * v - 1.0).abs() < 1e-12);
        }
        assert_eq!(esbar_rcm(0.0, 1.5, 0.75).status, crate::series::SeriesStatus::Diverged);
        assert!((esbar_rcm(50.0, 1.5, 0.75).value - 1.0).abs() < 1e-15);
        assert!((esbar_rcm(0.5, 1.5, 0.75).value - 2.309447590455984).abs() < 1e-14);
    }

    #[test]
    fn coinflip_reduces_when_degenerate() {
        for l in [0.1, 0.5, 1.0, 3.0] {
            let v = velocity_coinflip(l, 1.0, 1.0).unwrap().v;
            assert!((v - 2.0 * f64::sinh(l)).abs() < 1e-13 * v, "l={l}");
        }
        let v = velocity_coinflip(1.0, 1.5, 0.75).unwrap().v;
        assert!((v - 3.1075844855583822).abs() < 1e-14);
    }

    #[test]
    fn coinflip_general_mean_matches_closed_form() {
        let d: ScalarDist = "two-point:1,2:0.5".parse().unwrap();
        for l in [0.2, 0.5, 1.0] {
            let s = eshat_coinflip(l, &d, &d).value;
            let v = velocity_coinflip(l, 1.5, 0.75).unwrap().v;
            assert!((s * v - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn a1_values() {
        assert_eq!(a1_coefficient(1.0, 1.0, 1.0, 1.0), 0.0);
        for (x, want) in [(1.5, 0.04018986950630194), (2.0, 0.11276080299035255), (5.0, 0.49334683195520656), (10.0, 0.86164717150093441)] {
            assert!((a1_uniform(x) - want).abs() < 1e-13, "x={x}");
            let d = ScalarDist::uniform(1.0, x).unwrap();
            assert!((a1_from_dist(&d) - want).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn two_point_a1_polynomial() {
        // independent route: the quartic-in-p expression
        for (m, p) in [(2.0, 0.5), (10.0, 0.3), (3.0, 0.9)] {
            let d = ScalarDist::two_point(1.0, m, p).unwrap();
            let (a, b) = (d.moment(1.0), d.moment(-1.0));
            let m1 = m + 1.0 / m;
            let m2 = m * m + 1.0 / (m * m);
            let poly = p * (6.0 - 5.0 * m1 + 2.0 * m2)
                + p * p * (-36.0 + 25.0 * m1 - 7.0 * m2)
                + p.powi(3) * (60.0 - 40.0 * m1 + 10.0 * m2)
                + p.powi(4) * (-30.0 + 20.0 * m1 - 5.0 * m2);
            let lhs = a1_from_dist(&d) * (a * b).powi(3);
            assert!((lhs - poly).abs() < 1e-11 * poly.abs().max(1.0), "m={m} p={p}");
            assert!(poly > 0.0);
        }
    }

    #[test]
    fn clt_condition_examples() {
        let m: EnvModel = "discrete iid-omega rho=two-point:0.5,2:0.5".parse().unwrap();
        let thr = 4.0625f64.ln() / 6.0;
        assert!(!check_clt_condition(&m, thr - 1e-9, 1.0).unwrap().pass);
        assert!(check_clt_condition(&m, thr + 1e-9, 1.0).unwrap().pass);
        let m: EnvModel = "discrete iid-omega rho=constant:1".parse().unwrap();
        assert!(check_clt_condition(&m, 0.01, 0.5).unwrap().pass);
        let m: EnvModel = "discrete rcm c=two-point:1,2:0.5".parse().unwrap();
        assert!(!check_clt_condition(&m, 0.0, 1.0).unwrap().pass);
        assert!(check_clt_condition(&m, 0.5, 1.0).unwrap().pass);
        let m: EnvModel = "discrete renewal a=1 gamma=3".parse().unwrap();
        assert!(check_clt_condition(&m, 0.5, 1.0).is_err());
    }
}
