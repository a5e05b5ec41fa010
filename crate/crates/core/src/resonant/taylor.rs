//! Leading Taylor terms of the extremal modes for the five-mode datum.
//!
//! For `j` in the extremal set of generation `n`, `a_j(t) = c(n) t^alpha(n) +
//! O(t^(alpha(n)+1))` with `alpha(n) = 2 alpha(n-1) + 1` and
//! `c(n) = -2 i lambda c(n-1)^2 / (2 alpha(n-1) + 1)`, `alpha(0) = 0`,
//! `c(0) = 1`. Coefficients are kept exact as `q (i lambda)^e` with `q`
//! rational; the denominators outgrow `f64` quickly.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::Sign;

/// `alpha(n) = 2^n - 1`, evaluated through the recursion.
pub fn taylor_exponent(n: u32) -> u64 {
    (0..n).fold(0u64, |alpha, _| 2 * alpha + 1)
}

/// Exact coefficient `ratio * (i lambda)^power`, with `power` in `{0, 1}`
/// after [`ExactCoefficient::normalized`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactCoefficient {
    pub ratio: BigRational,
    pub power: u64,
}

impl ExactCoefficient {
    /// Uses `(i lambda)^2 = -1` to bring `power` into `{0, 1}`.
    pub fn normalized(&self) -> ExactCoefficient {
        let sign = if (self.power / 2) % 2 == 1 { -1 } else { 1 };
        ExactCoefficient {
            ratio: &self.ratio * BigRational::from_integer(BigInt::from(sign)),
            power: self.power % 2,
        }
    }

    pub fn log10_abs(&self) -> f64 {
        if self.ratio.is_zero() {
            return f64::NEG_INFINITY;
        }
        big_log10(self.ratio.numer()) - big_log10(self.ratio.denom())
    }

    pub fn to_complex(&self, lambda: Sign) -> Complex64 {
        let norm = self.normalized();
        if norm.ratio.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        let magnitude = match norm.ratio.to_f64() {
            Some(v) if v.is_finite() && v != 0.0 => v.abs(),
            _ => 10f64.powf(norm.log10_abs()),
        };
        let signed = if norm.ratio.is_negative() {
            -magnitude
        } else {
            magnitude
        };
        if norm.power == 0 {
            Complex64::new(signed, 0.0)
        } else {
            Complex64::new(0.0, signed * lambda.value())
        }
    }
}

fn big_log10(x: &BigInt) -> f64 {
    let x = x.abs();
    let bits = x.bits();
    if bits <= 1000 {
        x.to_f64().expect("fits").log10()
    } else {
        let shift = bits - 64;
        let top: BigInt = &x >> shift;
        top.to_f64().expect("fits").log10() + shift as f64 * std::f64::consts::LOG10_2
    }
}

/// `c(n)` through the recursion, exact.
pub fn taylor_coefficient_exact(n: u32) -> ExactCoefficient {
    let mut c = ExactCoefficient {
        ratio: BigRational::one(),
        power: 0,
    };
    let mut alpha = 0u64;
    for _ in 0..n {
        let denom = BigInt::from(2 * alpha + 1);
        let ratio = -BigRational::from_integer(BigInt::from(2)) * &c.ratio * &c.ratio
            / BigRational::from_integer(denom);
        c = ExactCoefficient {
            ratio,
            power: 2 * c.power + 1,
        }
        .normalized();
        alpha = 2 * alpha + 1;
    }
    c
}

/// `c(n)` through the closed product
/// `i (2 lambda)^(2^n - 1) / prod_{k=1..n} (2^k - 1)^(2^(n-k))`, valid for
/// `n >= 2`; `c(0) = 1` and `c(1) = -2 i lambda` are returned directly.
pub fn taylor_coefficient_closed_form(n: u32) -> ExactCoefficient {
    match n {
        0 => ExactCoefficient {
            ratio: BigRational::one(),
            power: 0,
        },
        1 => ExactCoefficient {
            ratio: BigRational::from_integer(BigInt::from(-2)),
            power: 1,
        },
        _ => {
            let numer = BigInt::one() << ((1u64 << n) - 1);
            let mut denom = BigInt::one();
            for k in 1..=n {
                let base = (BigInt::one() << k) - 1;
                denom *= num_traits::pow(base, 1usize << (n - k));
            }
            ExactCoefficient {
                ratio: BigRational::new(numer, denom),
                power: 1,
            }
        }
    }
}

pub fn taylor_coefficient(n: u32, lambda: Sign) -> Complex64 {
    taylor_coefficient_exact(n).to_complex(lambda)
}

/// Leading-order law `a_j(t) ~ c(n) t^alpha(n)` for generation `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorLaw {
    pub n: u32,
    pub alpha_n: u64,
    pub c_n: Complex64,
    pub lambda: Sign,
}

impl TaylorLaw {
    pub fn new(n: u32, lambda: Sign) -> Self {
        TaylorLaw {
            n,
            alpha_n: taylor_exponent(n),
            c_n: taylor_coefficient(n, lambda),
            lambda,
        }
    }

    pub fn eval(&self, slow_t: f64) -> Complex64 {
        self.c_n * slow_t.powi(self.alpha_n as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn exponents() {
        assert_eq!(taylor_exponent(0), 0);
        assert_eq!(taylor_exponent(3), 7);
        assert_eq!(taylor_exponent(5), 31);
        for n in 0..20 {
            assert_eq!(taylor_exponent(n), (1u64 << n) - 1);
        }
    }

    #[test]
    fn first_coefficients() {
        // c(1) = -2 i lambda, c(2) = 8/3 i lambda, c(3) = 128/63 i lambda.
        assert_eq!(
            taylor_coefficient_exact(1),
            ExactCoefficient { ratio: rat(-2, 1), power: 1 }
        );
        assert_eq!(
            taylor_coefficient_exact(2),
            ExactCoefficient { ratio: rat(8, 3), power: 1 }
        );
        assert_eq!(
            taylor_coefficient_exact(3),
            ExactCoefficient { ratio: rat(128, 63), power: 1 }
        );
        for lambda in [Sign::Plus, Sign::Minus] {
            let l = lambda.value();
            let c1 = taylor_coefficient(1, lambda);
            assert_eq!(c1, Complex64::new(0.0, -2.0 * l));
            let c2 = taylor_coefficient(2, lambda);
            assert!((c2 - Complex64::new(0.0, 8.0 / 3.0 * l)).norm() < 1e-15);
            assert_eq!(taylor_coefficient(0, lambda), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn recursion_agrees_with_closed_form() {
        for n in 0..=8 {
            assert_eq!(
                taylor_coefficient_exact(n).normalized(),
                taylor_coefficient_closed_form(n).normalized(),
                "n = {n}"
            );
        }
    }

    #[test]
    fn log_magnitude_beyond_f64_range() {
        let c = taylor_coefficient_exact(12);
        let lg = c.log10_abs();
        // |c(n+1)| >= 2^(-2^(n+1)).
        assert!(lg >= -(4096.0 * std::f64::consts::LOG10_2));
        assert!(lg.is_finite());
        let small = taylor_coefficient_exact(4);
        assert!((small.log10_abs() - small.to_complex(Sign::Plus).norm().log10()).abs() < 1e-12);
    }
}
