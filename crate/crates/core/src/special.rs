//! Special functions needed by the parametric-coupling model.

use crate::scalar::Real;

/// Bessel function of the first kind J_m(x) for integer order m ≥ 0, by the
/// ascending power series. Accurate to machine precision for the modulation
/// arguments used here (|x| ≲ 10).
pub fn bessel_j<T: Real>(m: u32, x: T) -> T {
    let half_x = x / T::of(2.0);
    // Leading term (x/2)^m / m!
    let mut term = T::one();
    for k in 1..=m {
        term = term * half_x / T::of(k as f64);
    }
    let mut sum = term;
    let minus_q = -(half_x * half_x);
    let mut k = T::one();
    let mut m_plus_k = T::of(m as f64) + T::one();
    for _ in 0..200 {
        term = term * minus_q / (k * m_plus_k);
        sum = sum + term;
        if term.abs() <= sum.abs() * T::epsilon() {
            break;
        }
        k = k + T::one();
        m_plus_k = m_plus_k + T::one();
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn matches_high_precision_reference() {
        // Reference values from a 40-digit arbitrary-precision evaluation of
        // the series.
        assert_abs_diff_eq!(bessel_j(0, 0.0_f64), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j(1, 0.5_f64), 0.24226845767487388638, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j(1, 0.1_f64), 0.049937526036241997556, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j(2, 0.1_f64), 0.0012489586587999188454, epsilon = 1e-16);
        assert_abs_diff_eq!(bessel_j(1, 1.0_f64), 0.44005058574493351596, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j(2, 1.0_f64), 0.11490348493190048047, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j(2, 0.5_f64), 0.030604023458682641307, epsilon = 1e-15);
    }

    #[test]
    fn vanishes_at_zero_for_positive_order() {
        for m in 1..6 {
            assert_eq!(bessel_j(m, 0.0_f64), 0.0);
        }
    }

    #[test]
    fn recurrence_holds() {
        // J_{m-1}(x) + J_{m+1}(x) = (2m/x) J_m(x)
        let x = 1.3_f64;
        for m in 1..5u32 {
            let lhs = bessel_j(m - 1, x) + bessel_j(m + 1, x);
            let rhs = 2.0 * m as f64 / x * bessel_j(m, x);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13);
        }
    }
}
