//! Standard normal tail probability and log-CDF.
//!
//! Both are built on a complementary error function that keeps full
//! relative accuracy deep into the tail: a positive-term power series for
//! small arguments and a continued fraction (modified Lentz) elsewhere.
//! Far tails switch to the asymptotic expansion of Mills' ratio.

use crate::scalar::Real;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SERIES_CUTOFF: f64 = 2.0;
const Q_ASYMPTOTIC_FROM: f64 = 30.0;
const LOG_PHI_ASYMPTOTIC_BELOW: f64 = -10.0;

/// `e^{z^2} * erfc(z)` for `z >= SERIES_CUTOFF`, via the Laplace continued
/// fraction `1 / (z + (1/2) / (z + 1 / (z + (3/2) / (z + ...))))`.
fn scaled_erfc_cf(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for m in 1..500 {
        let a = 0.5 * m as f64;
        d = z + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = z + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    FRAC_1_SQRT_PI / f
}

/// `erf(z)` for `0 <= z < SERIES_CUTOFF`; every term of the series is
/// positive so there is no cancellation.
fn erf_series(z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= 2.0 * z2 / (2.0 * k + 1.0);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    2.0 * FRAC_1_SQRT_PI * (-z2).exp() * sum
}

/// Complementary error function for `z >= 0`.
fn erfc_nonneg(z: f64) -> f64 {
    if z < SERIES_CUTOFF {
        1.0 - erf_series(z)
    } else {
        (-z * z).exp() * scaled_erfc_cf(z)
    }
}

/// Asymptotic series `1 - 1/x^2 + 3/x^4 - 15/x^6 + ...`, truncated at the
/// smallest term. Only meaningful for `|x| >= 10`.
fn mills_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for m in 1..40 {
        let next = -term * (2 * m - 1) as f64 / x2;
        if next.abs() >= term.abs() {
            break;
        }
        sum += next;
        term = next;
        if term.abs() < 1e-17 {
            break;
        }
    }
    sum
}

pub(crate) fn q_f64(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 1.0 - q_f64(-x);
    }
    if x > Q_ASYMPTOTIC_FROM {
        return pdf_f64(x) / x * mills_series(x);
    }
    0.5 * erfc_nonneg(x * std::f64::consts::FRAC_1_SQRT_2)
}

pub(crate) fn log_phi_f64(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= 0.0 {
        (-q_f64(x)).ln_1p()
    } else if x > LOG_PHI_ASYMPTOTIC_BELOW {
        q_f64(-x).ln()
    } else {
        -0.5 * x * x - (-x).ln() - LN_SQRT_2PI + mills_series(x).ln()
    }
}

pub(crate) fn pdf_f64(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// `phi(x) / Phi(x)`, computed in log space so it stays finite for very
/// negative `x` where it behaves like `-x`.
pub(crate) fn pdf_over_cdf_f64(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI - log_phi_f64(x)).exp()
}

/// Gaussian tail probability `Q(x) = 1 - Phi(x)`.
///
/// Saturates to exactly `0` or `1` once the tail drops below the smallest
/// subnormal.
pub fn q_function<T: Real>(x: T) -> T {
    T::of(q_f64(x.as_f64()))
}

/// Natural logarithm of the standard normal CDF, finite for every finite `x`.
pub fn log_phi<T: Real>(x: T) -> T {
    T::of(log_phi_f64(x.as_f64()))
}

/// Standard normal density.
pub fn normal_pdf<T: Real>(x: T) -> T {
    T::of(pdf_f64(x.as_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Q(a) = phi(a) * int_0^inf exp(-a u - u^2 / 2) du, by composite Simpson.
    fn q_by_quadrature(a: f64) -> f64 {
        assert!(a >= 0.0);
        let upper = 12.0;
        let steps = 100_000;
        let h = upper / steps as f64;
        let f = |u: f64| (-a * u - 0.5 * u * u).exp();
        let mut acc = f(0.0) + f(upper);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        let integral = acc * h / 3.0;
        (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt() * integral
    }

    #[test]
    fn q_at_zero_is_half() {
        assert_eq!(q_function(0.0_f64), 0.5);
    }

    #[test]
    fn q_far_tail_vanishes() {
        assert!(q_function(40.0_f64) < 1e-300);
        assert_eq!(q_function(-40.0_f64), 1.0);
    }

    #[test]
    fn q_at_one_matches_quadrature() {
        let oracle = q_by_quadrature(1.0);
        assert!((oracle - 0.158_655_253_931_457).abs() < 1e-13);
        assert!((q_function(1.0_f64) - oracle).abs() < 1e-12);
    }

    #[test]
    fn q_matches_quadrature_on_grid() {
        for i in 0..=160 {
            let x = i as f64 * 0.05;
            let oracle = q_by_quadrature(x);
            let got = q_f64(x);
            assert!((got - oracle).abs() < 1e-12, "x={x}: {got} vs {oracle}");
            assert!(((got - oracle) / oracle).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn q_is_continuous_across_branch_points() {
        for &x in &[SERIES_CUTOFF * std::f64::consts::SQRT_2, Q_ASYMPTOTIC_FROM] {
            let lo = q_f64(x - 1e-9);
            let hi = q_f64(x + 1e-9);
            assert!(lo >= hi);
            assert!(((lo - hi) / lo).abs() < 1e-7);
        }
    }

    #[test]
    fn q_symmetry_on_grid() {
        for i in -800..=800 {
            let x = i as f64 / 100.0;
            assert!((q_f64(x) + q_f64(-x) - 1.0).abs() <= 1e-12, "x={x}");
        }
    }

    #[test]
    fn log_phi_at_zero() {
        assert!((log_phi(0.0_f64) - 0.5_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_phi_at_five() {
        let oracle = (-q_by_quadrature(5.0)).ln_1p();
        assert!((oracle - -2.866_516_129_637_636e-7).abs() < 1e-17);
        assert!(((log_phi(5.0_f64) - oracle) / oracle).abs() < 1e-9);
    }

    #[test]
    fn log_phi_deep_tail_matches_quadrature() {
        for &a in &[10.0, 12.5, 20.0, 30.0] {
            // log Q(a) = log phi(a) + log of the scaled integral, which never underflows.
            let upper = 2.0;
            let steps = 200_000;
            let h = upper / steps as f64;
            let f = |u: f64| (-a * u - 0.5 * u * u).exp();
            let mut acc = f(0.0) + f(upper);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(i as f64 * h);
            }
            let oracle = -0.5 * a * a - LN_SQRT_2PI + (acc * h / 3.0).ln();
            let got = log_phi_f64(-a);
            assert!(got.is_finite());
            assert!(((got - oracle) / oracle).abs() < 1e-9, "a={a}: {got} vs {oracle}");
        }
    }

    #[test]
    fn log_phi_is_monotone_in_the_tail() {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=2000 {
            let x = -60.0 + i as f64 * 0.03;
            let v = log_phi_f64(x);
            assert!(v.is_finite());
            assert!(v > prev, "not increasing at {x}");
            prev = v;
        }
    }

    #[test]
    fn exp_log_phi_agrees_with_q() {
        for i in -800..=800 {
            let x = i as f64 / 100.0;
            let a = log_phi_f64(x).exp();
            // 1 - Q(x) cancels for x << 0; Q(-x) is the same value without cancellation.
            let b = q_f64(-x);
            assert!(((a - b) / b).abs() <= 1e-9, "x={x}");
            assert!((a - (1.0 - q_f64(x))).abs() <= 1e-15, "x={x}");
        }
    }

    #[test]
    fn log_phi_relative_accuracy_down_to_minus_thirty() {
        for i in 0..=300 {
            let a = i as f64 * 0.1;
            let oracle = q_by_quadrature(a).ln();
            let got = log_phi_f64(-a);
            let scale = oracle.abs().max(1e-300);
            assert!(((got - oracle) / scale).abs() <= 1e-9, "x={}: {got} vs {oracle}", -a);
        }
    }

    #[test]
    fn pdf_over_cdf_limits() {
        assert!((pdf_over_cdf_f64(0.0) - 2.0 * pdf_f64(0.0)).abs() < 1e-15);
        let x = -50.0;
        let h = pdf_over_cdf_f64(x);
        assert!((h / -x - 1.0).abs() < 1e-3);
        assert!(pdf_over_cdf_f64(10.0) < 1e-20);
    }

    #[test]
    fn f32_path_rounds_the_f64_value() {
        let v: f32 = q_function(1.0_f32);
        assert_eq!(v, q_f64(1.0) as f32);
    }
}
