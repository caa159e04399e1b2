use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Warping function `f` of a surface of revolution `dr² + f(r)² dθ²`.
///
/// Every profile in the library is positive and convex on all of ℝ, so the
/// surface has curvature `-f''/f ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Profile<T> {
    /// `f = cosh r`: the hyperbolic plane in Fermi coordinates along `r = 0`.
    Cosh,
    /// `f = eʳ`: the hyperbolic plane in horocyclic coordinates.
    Exp,
    /// `f = 1 + Σ c_k r^k`, coefficients listed from `c₂` upwards.
    PolynomialConvex(Vec<T>),
}

impl<T: Real> Profile<T> {
    /// Validates a polynomial profile. Convexity on all of ℝ is guaranteed by
    /// admitting only non-negative coefficients on even powers.
    pub fn polynomial_convex(coeffs: Vec<T>) -> Result<Self> {
        for (i, &c) in coeffs.iter().enumerate() {
            let power = i + 2;
            if !c.is_finite() || c < T::zero() {
                return Err(Error::usage(format!("polynomial-convex coefficient c{power} must be finite and >= 0")));
            }
            if power % 2 == 1 && c != T::zero() {
                return Err(Error::usage(format!(
                    "polynomial-convex coefficient c{power} multiplies an odd power and must be 0"
                )));
            }
        }
        Ok(Profile::PolynomialConvex(coeffs))
    }

    /// `(f, f', f'')` at `r`.
    #[inline]
    pub fn eval(&self, r: T) -> (T, T, T) {
        match self {
            Profile::Cosh => (r.cosh(), r.sinh(), r.cosh()),
            Profile::Exp => {
                let e = r.exp();
                (e, e, e)
            }
            Profile::PolynomialConvex(c) => {
                let (mut f, mut f1, mut f2) = (T::one(), T::zero(), T::zero());
                for (i, &ck) in c.iter().enumerate() {
                    if ck == T::zero() {
                        continue;
                    }
                    let k = i + 2;
                    let kf = T::from_usize_lossy(k);
                    f = f + ck * r.powi(k as i32);
                    f1 = f1 + ck * kf * r.powi(k as i32 - 1);
                    f2 = f2 + ck * kf * (kf - T::one()) * r.powi(k as i32 - 2);
                }
                (f, f1, f2)
            }
        }
    }
}

impl<T: Real> fmt::Display for Profile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Cosh => write!(f, "cosh"),
            Profile::Exp => write!(f, "exp"),
            Profile::PolynomialConvex(c) => {
                write!(f, "polynomial-convex(")?;
                for (i, x) in c.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}
