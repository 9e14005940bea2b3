//! Special functions used by the decoupling step and the predictive intervals.

use statrs::distribution::{ContinuousCDF, StudentsT};

const ASYMPTOTIC_FROM: f64 = 12.0;

/// Digamma function ψ(x) = d/dx log Γ(x).
///
/// Shifts the argument above 12 with ψ(x) = ψ(x + 1) − 1/x, then applies the
/// asymptotic expansion. Negative non-integer arguments go through the
/// reflection formula; poles return NaN.
pub fn digamma(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return f64::NAN;
    }
    if x <= 0.0 {
        if x == x.floor() {
            return f64::NAN;
        }
        // ψ(1 − x) − ψ(x) = π cot(πx)
        let pi = std::f64::consts::PI;
        return digamma(1.0 - x) - pi / (pi * x).tan();
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 * inv - tail
}

/// Trigamma function ψ'(x), for x > 0.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let tail = inv
        + 0.5 * inv2
        + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)));
    acc + tail
}

/// Two-sided Student-t multiplier: the `k` with P(|T_dof| ≤ k) = `mass`.
///
/// `mass` ≥ 1 yields an infinite multiplier; non-positive mass yields 0.
pub fn student_t_half_width(mass: f64, dof: f64) -> f64 {
    if mass >= 1.0 {
        return f64::INFINITY;
    }
    if mass <= 0.0 {
        return 0.0;
    }
    if dof > 1e5 {
        // statrs loses accuracy here; the normal limit is exact to ~1e−5
        return normal_half_width(mass);
    }
    let p = 0.5 + 0.5 * mass;
    match StudentsT::new(0.0, 1.0, dof) {
        Ok(t) => t.inverse_cdf(p),
        Err(_) => f64::NAN,
    }
}

/// Standard normal two-sided multiplier for probability mass `mass`.
pub fn normal_half_width(mass: f64) -> f64 {
    if mass >= 1.0 {
        return f64::INFINITY;
    }
    if mass <= 0.0 {
        return 0.0;
    }
    let n = statrs::distribution::Normal::standard();
    n.inverse_cdf(0.5 + 0.5 * mass)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ψ(x) = −γ + Σ_{k≥0} [1/(k+1) − 1/(k+x)], summed to N terms with an
    /// Euler–Maclaurin tail.
    fn digamma_series(x: f64) -> f64 {
        const EULER: f64 = 0.577_215_664_901_532_9;
        let n = 200_000usize;
        let mut s = 0.0;
        for k in (0..n).rev() {
            let k = k as f64;
            s += 1.0 / (k + 1.0) - 1.0 / (k + x);
        }
        // integral of the remaining terms plus the trapezoid half-term
        let nf = n as f64;
        let tail = ((nf + x) / (nf + 1.0)).ln() + 0.5 * (1.0 / (nf + 1.0) - 1.0 / (nf + x));
        -EULER + s + tail
    }

    #[test]
    fn digamma_matches_series() {
        for &x in &[0.05, 0.3, 0.5, 1.0, 1.7, 3.2, 5.9, 6.0, 12.5, 80.0] {
            let a = digamma(x);
            let b = digamma_series(x);
            assert!((a - b).abs() < 1e-8, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn digamma_known_values() {
        const EULER: f64 = 0.577_215_664_901_532_9;
        assert!((digamma(1.0) + EULER).abs() < 1e-13);
        assert!((digamma(0.5) + EULER + 2.0 * 2f64.ln()).abs() < 1e-13);
        assert!(digamma(0.0).is_nan());
        assert!(digamma(-2.0).is_nan());
        // reflection
        let x = -0.3;
        let pi = std::f64::consts::PI;
        assert!((digamma(1.0 - x) - digamma(x) - pi / (pi * x).tan()).abs() < 1e-10);
    }

    #[test]
    fn trigamma_is_digamma_derivative() {
        for &x in &[0.2f64, 1.0, 2.5, 7.0, 40.0] {
            let h = 1e-5 * x.max(1.0);
            let fd = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
            assert!((trigamma(x) - fd).abs() < 1e-6 * trigamma(x).max(1.0), "x={x}");
        }
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0) - pi2_6).abs() < 1e-13);
    }

    #[test]
    fn student_t_multiplier_limits() {
        assert!(student_t_half_width(1.0, 5.0).is_infinite());
        assert_eq!(student_t_half_width(0.0, 5.0), 0.0);
        assert!((student_t_half_width(0.9, 5.0) - 2.015_048_373_333).abs() < 1e-9);
        let big = student_t_half_width(0.9, 1e7);
        assert!((big - normal_half_width(0.9)).abs() < 1e-4, "{big}");
        assert!((normal_half_width(0.9) - 1.644_853_626_951_472_2).abs() < 1e-9);
    }
}
