use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusivityBreakdown {
    pub sigma2: f64,
    pub sigma1_sq: f64,
    pub v_sigma2_sq: f64,
    pub v: f64,
    pub e_u: f64,
    pub e_u2: f64,
    pub e_vu: f64,
    pub e_vu2: f64,
    /// `sum_{n >= 1} Cov(U, theta^n U)`.
    pub cov_sum: f64,
    /// Certified truncation error of `cov_sum` (zero when summed in closed form).
    pub cov_error: f64,
}

fn assemble(e_u: f64, e_v: f64, e_u2: f64, e_vu: f64, e_vu2: f64, cov_sum: f64, cov_error: f64) -> DiffusivityBreakdown {
    let s = 1.0 + 2.0 * e_u;
    let s3 = s * s * s;
    let sigma1_sq = 4.0 * (e_u2 + e_v + 2.0 * e_vu2 + 2.0 * e_vu) / s3;
    let v_sigma2_sq = 4.0 * (e_u2 - e_u * e_u + 2.0 * cov_sum) / s3;
    DiffusivityBreakdown {
        sigma2: sigma1_sq + v_sigma2_sq,
        sigma1_sq,
        v_sigma2_sq,
        v: 1.0 / s,
        e_u,
        e_u2,
        e_vu,
        e_vu2,
        cov_sum,
        cov_error,
    }
}

fn check_moments(a: f64, b: f64, c: f64, d: f64) -> Result<()> {
    for (x, name) in [(a, "A"), (b, "B"), (c, "C"), (d, "D")] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {x}")));
        }
    }
    let slack = 1.0 - 1e-12;
    if a * b < slack {
        return Err(Error::InconsistentMoments(format!("AB = {} < 1", a * b)));
    }
    if c < a * a * slack {
        return Err(Error::InconsistentMoments(format!("C = {c} < A^2 = {}", a * a)));
    }
    if d < b * b * slack {
        return Err(Error::InconsistentMoments(format!("D = {d} < B^2 = {}", b * b)));
    }
    Ok(())
}

/// Diffusivity of the discrete random conductance model from the four
/// moments `A = E[c]`, `B = E[1/c]`, `C = E[c^2]`, `D = E[1/c^2]`.
pub fn sigma2_rcm(lambda: f64, a: f64, b: f64, c: f64, d: f64) -> Result<DiffusivityBreakdown> {
    check_moments(a, b, c, d)?;
    if lambda == 0.0 {
        return Err(Error::SingularAtZero);
    }
    let l = lambda.abs();
    let q = (-2.0 * l).exp();
    let om = -(-2.0 * l).exp_m1();
    let om2 = -(-4.0 * l).exp_m1();
    let g = q / om;
    let e_u = a * b * g;
    let pairs = c * q * q / om2 + 2.0 * a * a * q * q * q / (om * om2);
    let e_u2 = d * pairs;
    let e_vu = a * b * g * g;
    let e_vu2 = b * b * g * pairs;
    let cov_sum = (-a * a * b * b * g / om + a * b * g + b * b * pairs) * g;
    Ok(assemble(e_u, e_u, e_u2, e_vu, e_vu2, cov_sum, 0.0))
}

pub fn sigma2_rcm_at_zero(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || a * b < 1.0 - 1e-12 {
        return Err(Error::InconsistentMoments(format!("A = {a}, B = {b}")));
    }
    Ok(1.0 / (a * b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceOptions {
    pub tol: f64,
    pub max_diagonals: usize,
}

impl Default for CovarianceOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_diagonals: 200_000 }
    }
}

/// Diffusivity for i.i.d. `rho` with `m1 = E[rho]`, `m2 = E[rho^2]`.
pub fn sigma2_iid_omega(lambda: f64, m1: f64, m2: f64, opts: &CovarianceOptions) -> Result<DiffusivityBreakdown> {
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::InvalidArgument("moments must be positive".into()));
    }
    if m2 < m1 * m1 * (1.0 - 1e-12) {
        return Err(Error::InconsistentMoments(format!("E[rho^2] = {m2} < E[rho]^2")));
    }
    let q = (-2.0 * lambda).exp();
    let b = m1 * q;
    let a = m2 * q * q;
    if !(b < 1.0 && a < 1.0) {
        return Err(Error::Unsupported(format!(
            "outside the summable regime: E[rho] q = {b}, E[rho^2] q^2 = {a}"
        )));
    }
    let e_u = b / (1.0 - b);
    let e_u2 = a / (1.0 - a) * (1.0 + b) / (1.0 - b);
    let (cov_sum, cov_error) = covariance_diagonals(a, b, q * m2.sqrt(), opts)?;
    Ok(assemble(e_u, e_u, e_u2, e_u * e_u, e_u * e_u2, cov_sum, cov_error))
}

/// `sum_{n>=1} Cov(U, theta^n U)` organized by diagonals `k = i + j` of the
/// double series; `a = E[rho^2] q^2`, `b = E[rho] q`, `s = q sqrt(E[rho^2])`.
fn covariance_diagonals(a: f64, b: f64, s: f64, opts: &CovarianceOptions) -> Result<(f64, f64)> {
    let mut total = 0.0f64;
    let mut comp = 0.0f64;
    let mut prefix = Vec::new();
    for k in 1..=opts.max_diagonals {
        let omax = k.div_ceil(2);
        let base = b.powi(k as i32 + 2);
        prefix.clear();
        prefix.push(0.0);
        let mut acc = 0.0;
        for o in 1..=omax {
            acc += a.powi(o as i32) * b.powi((k + 2 - 2 * o) as i32);
            prefix.push(acc);
        }
        let h = |o: usize| a.powi(o as i32) * b.powi((k + 2 - 2 * o) as i32);
        let mut diag = 0.0;
        for j in 1..=k {
            let i = k - j;
            let t = i.min(j);
            diag += prefix[t] - t as f64 * base;
            if j > i {
                diag += (j - i) as f64 * (h(i + 1) - base);
            }
        }
        let y = diag - comp;
        let next = total + y;
        comp = (next - total) - y;
        total = next;
        // every term of diagonal k' is at most s^{k'+2}, with k'(k'+1)/2 terms
        let kf = k as f64;
        let ratio = (kf + 3.0) / (kf + 1.0) * s;
        if ratio < 1.0 {
            let beta = 0.5 * (kf + 1.0) * (kf + 2.0) * s.powi(k as i32 + 3);
            let tail = beta / (1.0 - ratio);
            if tail <= opts.tol {
                return Ok((total, tail));
            }
        }
    }
    Err(Error::Unsupported("covariance series did not reach tolerance within the diagonal budget".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_rcm() {
        for l in [0.1f64, 0.5, 1.0, 2.5] {
            let s = sigma2_rcm(l, 1.0, 1.0, 1.0, 1.0).unwrap();
            let want = 4.0 / (l.exp() + (-l).exp()).powi(2);
            assert!((s.sigma2 - want).abs() < 1e-14, "l={l}");
            assert!(s.v_sigma2_sq.abs() < 1e-15);
        }
    }

    #[test]
    fn two_point_rcm_frozen() {
        let s = sigma2_rcm(1.0, 1.5, 0.75, 2.5, 0.625).unwrap();
        assert!((s.sigma2 - 0.452038989878536).abs() < 1e-13);
        assert!((s.sigma1_sq - 0.451567316419624).abs() < 1e-13);
        assert!((s.v_sigma2_sq - 0.000471673458912).abs() < 1e-13);
        assert!((s.e_vu - s.e_u * s.e_u / 1.125).abs() < 1e-14);
    }

    #[test]
    fn rcm_is_even_and_guarded() {
        let p = sigma2_rcm(0.37, 1.5, 0.75, 2.5, 0.625).unwrap().sigma2;
        let m = sigma2_rcm(-0.37, 1.5, 0.75, 2.5, 0.625).unwrap().sigma2;
        assert_eq!(p, m);
        assert_eq!(sigma2_rcm(0.0, 1.5, 0.75, 2.5, 0.625), Err(Error::SingularAtZero));
        assert!(sigma2_rcm(1.0, 1.5, 0.75, 2.0, 0.625).is_err());
        assert!(sigma2_rcm(1.0, 1.5, 0.5, 2.5, 0.625).is_err());
        assert_eq!(sigma2_rcm_at_zero(1.5, 0.75).unwrap(), 1.0 / 1.125);
    }

    #[test]
    fn iid_omega_deterministic_matches_rcm() {
        let s = sigma2_iid_omega(1.0, 1.0, 1.0, &CovarianceOptions::default()).unwrap();
        assert!((s.sigma2 - 0.41997434161402607).abs() < 1e-14);
        assert!(s.cov_sum.abs() < 1e-15);
        let c = 0.6;
        let s = sigma2_iid_omega(0.4, c, c * c, &CovarianceOptions::default()).unwrap();
        assert!(s.v_sigma2_sq.abs() < 1e-15);
    }

    #[test]
    fn iid_omega_two_point_frozen() {
        let s = sigma2_iid_omega(1.0, 1.25, 2.125, &CovarianceOptions { tol: 1e-15, ..Default::default() }).unwrap();
        assert!((s.sigma2 - 0.55776070431803438).abs() < 1e-13);
        assert!((s.sigma1_sq - 0.52639242321881773).abs() < 1e-13);
        assert!((s.v_sigma2_sq - 0.03136828109921665).abs() < 1e-13);
    }

    #[test]
    fn iid_omega_regime() {
        assert!(sigma2_iid_omega(0.05, 1.25, 2.125, &CovarianceOptions::default()).is_err());
    }
}
