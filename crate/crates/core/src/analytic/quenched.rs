//! Quenched series evaluated on a single environment realization.

use crate::envgen::{bias_probabilities, bias_rates, EnvBounds, Quenched};
use crate::series::{sum_series, SeriesOptions, SeriesStatus, SeriesValue, TailHints};

const SLACK: f64 = 1e-12;

/// Hints for `t_i = w_i * prod_{k<i} g_k` with `w in [w0, w1]`,
/// `g in [g0, g1]` and, optionally, `prod_{k<i} g_k in [p0 s^i, p1 s^i]`.
fn product_hints(w: (f64, f64), g: (f64, f64), partial: Option<(f64, f64)>, s: f64) -> TailHints {
    let up = 1.0 + SLACK;
    let down = 1.0 - SLACK;
    let mut h = TailHints {
        ratio_cap: Some(g.1 * w.1 / w.0 * up),
        ratio_floor: Some(g.0 * w.0 / w.1 * down),
        ceiling: None,
        floor: None,
    };
    if let Some((p0, p1)) = partial {
        h.ceiling = Some((w.1 * p1.max(1.0) * up, s * up));
        h.floor = Some((w.0 * p0.min(1.0) * down, s * down));
    }
    h
}

fn finite_or(h: TailHints) -> TailHints {
    let ok = |x: f64| x.is_finite() && x > 0.0;
    TailHints {
        ratio_cap: h.ratio_cap.filter(|r| ok(*r)),
        ratio_floor: h.ratio_floor.filter(|r| ok(*r)),
        ceiling: h.ceiling.filter(|(c, r)| ok(*c) && ok(*r)),
        floor: h.floor.filter(|(c, r)| ok(*c) && ok(*r)),
    }
}

fn rho_range(b: &EnvBounds, q: f64) -> (f64, f64) {
    (b.rho.0 * q, b.rho.1 * q)
}

fn inv(p: (f64, f64)) -> (f64, f64) {
    (1.0 / p.1, 1.0 / p.0)
}

/// `S-bar = sum_{i>=0} (1/omega+_{-i}(l)) prod_{j<i} rho_{-j}(l)`.
pub fn sbar_quenched<E: Quenched>(env: &mut E, lambda: f64, opts: &SeriesOptions) -> SeriesValue {
    let b = env.bounds();
    let q = (-2.0 * lambda).exp();
    let g = rho_range(&b, q);
    let hints = finite_or(product_hints((1.0 + g.0, 1.0 + g.1), g, b.partial_products, q));
    let mut prod = 1.0;
    sum_series(
        |i| {
            let x = -(i as i64);
            let (l, r) = env.weights(x);
            let (wm, wp) = bias_probabilities(l, r, lambda);
            let t = prod / wp;
            prod *= wm / wp;
            t
        },
        &hints,
        opts,
    )
}

/// `F-bar = sum_{i>=0} (1/omega-_i(l)) prod_{j<i} 1/rho_j(l)`.
pub fn fbar_quenched<E: Quenched>(env: &mut E, lambda: f64, opts: &SeriesOptions) -> SeriesValue {
    let b = env.bounds();
    let q = (-2.0 * lambda).exp();
    let g = inv(rho_range(&b, q));
    let hints = finite_or(product_hints((1.0 + g.0, 1.0 + g.1), g, b.partial_products.map(inv), 1.0 / q));
    let mut prod = 1.0;
    sum_series(
        |i| {
            let (l, r) = env.weights(i as i64);
            let (wm, wp) = bias_probabilities(l, r, lambda);
            let t = prod / wm;
            prod *= wp / wm;
            t
        },
        &hints,
        opts,
    )
}

/// `S-hat = sum_{i>=0} (1/r+_{-i}(l)) prod_{j<i} rho_{-j}(l)`.
pub fn shat_quenched<E: Quenched>(env: &mut E, lambda: f64, opts: &SeriesOptions) -> SeriesValue {
    let b = env.bounds();
    let q = (-2.0 * lambda).exp();
    let el = (-lambda).exp();
    let w = (el / b.right.1, el / b.right.0);
    let hints = finite_or(product_hints(w, rho_range(&b, q), b.partial_products, q));
    let mut prod = 1.0;
    sum_series(
        |i| {
            let (l, r) = env.weights(-(i as i64));
            let (rm, rp) = bias_rates(l, r, lambda);
            let t = prod / rp;
            prod *= rm / rp;
            t
        },
        &hints,
        opts,
    )
}

/// `F-hat = sum_{i>=0} (1/r-_i(l)) prod_{j<i} 1/rho_j(l)`.
pub fn fhat_quenched<E: Quenched>(env: &mut E, lambda: f64, opts: &SeriesOptions) -> SeriesValue {
    let b = env.bounds();
    let q = (-2.0 * lambda).exp();
    let el = lambda.exp();
    let w = (el / b.left.1, el / b.left.0);
    let hints = finite_or(product_hints(w, inv(rho_range(&b, q)), b.partial_products.map(inv), 1.0 / q));
    let mut prod = 1.0;
    sum_series(
        |i| {
            let (l, r) = env.weights(i as i64);
            let (rm, rp) = bias_rates(l, r, lambda);
            let t = prod / rm;
            prod *= rp / rm;
            t
        },
        &hints,
        opts,
    )
}

/// `U = sum_{i>=0} rho_0 rho_{-1} ... rho_{-i} e^{-2 l (i+1)}`.
pub fn u_quenched<E: Quenched>(env: &mut E, lambda: f64, opts: &SeriesOptions) -> SeriesValue {
    let b = env.bounds();
    let q = (-2.0 * lambda).exp();
    let g = rho_range(&b, q);
    let hints = finite_or(product_hints(g, g, b.partial_products, q));
    let mut prod = 1.0;
    sum_series(
        |i| {
            prod *= env.rho(-(i as i64)) * q;
            prod
        },
        &hints,
        opts,
    )
}

/// `V = sum_{i>=1} rho_1 ... rho_i e^{-2 l i}`.
pub fn v_quenched<E: Quenched>(env: &mut E, lambda: f64, opts: &SeriesOptions) -> SeriesValue {
    let b = env.bounds();
    let q = (-2.0 * lambda).exp();
    let g = rho_range(&b, q);
    let hints = finite_or(product_hints(g, g, b.partial_products, q));
    let mut prod = 1.0;
    sum_series(
        |i| {
            prod *= env.rho(i as i64 + 1) * q;
            prod
        },
        &hints,
        opts,
    )
}

/// `Lambda = (1/omega+_0(l)) (1 + sum_{i>=1} prod_{j=1}^{i} rho_j(l))`.
pub fn lambda_factor<E: Quenched>(env: &mut E, lambda: f64, opts: &SeriesOptions) -> SeriesValue {
    let b = env.bounds();
    let q = (-2.0 * lambda).exp();
    let g = rho_range(&b, q);
    let hints = finite_or(product_hints((1.0, 1.0), g, b.partial_products, q));
    let (l0, r0) = env.weights(0);
    let (_, wp0) = bias_probabilities(l0, r0, lambda);
    let mut prod = 1.0;
    let inner = sum_series(
        |i| {
            if i > 0 {
                let (l, r) = env.weights(i as i64);
                let (wm, wp) = bias_probabilities(l, r, lambda);
                prod *= wm / wp;
            }
            prod
        },
        &hints,
        opts,
    );
    if inner.status == SeriesStatus::Diverged {
        return inner;
    }
    inner.affine(0.0, 1.0 / wp0)
}
