//! Riemann and Hurwitz zeta values for real arguments `s > 1`.

const EM_START: u64 = 20;

// B_{2j} / (2j)!
const BERNOULLI_OVER_FACT: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
];

/// `sum_{k >= m} k^{-s}` via Euler–Maclaurin; requires `s > 1`, `m >= 1`.
pub fn hurwitz_tail(s: f64, m: u64) -> f64 {
    assert!(s > 1.0 && m >= 1);
    let mut head = 0.0;
    let mut n = m;
    while n < EM_START {
        head += (n as f64).powf(-s);
        n += 1;
    }
    let nf = n as f64;
    let mut tail = nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // rising factorial s(s+1)...(s+2j-2) times N^{-s-2j+1}
    let mut rising = s;
    let mut pow = nf.powf(-s - 1.0);
    for (j, b) in BERNOULLI_OVER_FACT.iter().enumerate() {
        tail += b * rising * pow;
        let k = 2.0 * j as f64;
        rising *= (s + k + 1.0) * (s + k + 2.0);
        pow /= nf * nf;
    }
    head + tail
}

pub fn zeta(s: f64) -> f64 {
    hurwitz_tail(s, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_three_matches_direct_sum() {
        let n = 2_000_000u64;
        let mut direct = 0.0f64;
        for k in (1..=n).rev() {
            let k = k as f64;
            direct += 1.0 / (k * k * k);
        }
        // remaining tail of the direct sum is 1/(2 n^2) to leading order
        let nf = n as f64;
        direct += 1.0 / (2.0 * nf * nf) - 1.0 / (2.0 * nf * nf * nf);
        assert!((zeta(3.0) - direct).abs() < 1e-12);
        assert!((zeta(3.0) - 1.2020569031595942).abs() < 1e-15);
    }

    #[test]
    fn zeta_two_and_four() {
        let pi = std::f64::consts::PI;
        assert!((zeta(2.0) - pi * pi / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - pi.powi(4) / 90.0).abs() < 1e-14);
    }

    #[test]
    fn tail_recurrence() {
        for &s in &[2.5, 3.0, 4.7] {
            for m in [1u64, 5, 19, 20, 21, 1000] {
                let lhs = hurwitz_tail(s, m);
                let rhs = (m as f64).powf(-s) + hurwitz_tail(s, m + 1);
                assert!((lhs - rhs).abs() <= 1e-15 * lhs.max(1e-300) + 1e-300, "s={s} m={m}");
            }
        }
    }
}
