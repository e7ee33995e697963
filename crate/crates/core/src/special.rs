//! Exponential integral and related closed forms used for exact time
//! integrals of Gaussian kernel products.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
pub fn e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 is only defined here for positive arguments");
    if x > 740.0 {
        return 0.0;
    }
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // Modified Lentz evaluation of the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// `e^{-w} - w E1(w)`, continuous at `w = 0` where it equals 1.
pub fn e_minus_w_e1(w: f64) -> f64 {
    if w == 0.0 {
        1.0
    } else {
        (-w).exp() - w * e1(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Values from the defining integral, evaluated independently.
        let cases = [
            (0.1, 1.822_923_958_419_390_7),
            (0.5, 0.559_773_594_776_160_8),
            (1.0, 0.219_383_934_395_520_27),
            (2.0, 0.048_900_510_708_061_12),
            (10.0, 4.156_968_929_685_324e-6),
        ];
        for (x, want) in cases {
            let got = e1(x);
            assert!(((got - want) / want).abs() < 1e-13, "E1({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn matches_quadrature_on_branch_boundary() {
        use crate::quad::{integrate_upper, QuadOptions};
        for x in [0.999, 1.0, 1.001, 3.7] {
            let q = integrate_upper(|t| (-t).exp() / t, x, QuadOptions::with_tol(1e-14, 1e-12)).unwrap();
            assert!((e1(x) - q.value).abs() < 1e-11);
        }
    }
}
