//! Plastic dissipation density `|Q|`, its smooth approximation
//! `h_gamma(Q) = sqrt(|Q|^2 + gamma^-2) - 1/gamma`, and the integrated
//! dissipation over a quadrature rule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::material::MaterialLaw;
use crate::scalar::{KahanSum, Scalar};
use crate::tensor::DevTensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DissipationError {
    #[error("regularization parameter must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("field length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch { what: &'static str, got: usize, expected: usize },
}

/// Regularization parameter `gamma` in `(0, inf]`.
///
/// `Exact` stands for `gamma = inf` and selects `|.|` and the closed-form
/// radial return. Serialized as a number, or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma<T> {
    Finite(T),
    Exact,
}

impl<T: Scalar> Serialize for Gamma<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Finite(g) => s.serialize_f64(g.to_f64_lossy()),
            Self::Exact => s.serialize_str("inf"),
        }
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Gamma<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        let g = match Repr::deserialize(d)? {
            Repr::Num(x) => x,
            Repr::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => f64::INFINITY,
            Repr::Str(s) => return Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        };
        Gamma::new(T::lit(g)).map_err(serde::de::Error::custom)
    }
}

impl<T: Scalar> Gamma<T> {
    pub fn new(gamma: T) -> Result<Self, DissipationError> {
        if gamma.is_infinite() && gamma > T::zero() {
            Ok(Self::Exact)
        } else if gamma > T::zero() {
            Ok(Self::Finite(gamma))
        } else {
            Err(DissipationError::NonPositiveGamma(gamma.to_f64_lossy()))
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Self::Exact)
    }

    /// `gamma` as a number, `+inf` for the exact case.
    pub fn value(&self) -> T {
        match *self {
            Self::Finite(g) => g,
            Self::Exact => T::infinity(),
        }
    }

    /// Density `h_gamma(Q)`, or `|Q|` when exact.
    pub fn density(&self, q: &DevTensor<T>) -> T {
        match *self {
            Self::Finite(g) => h_gamma(q, g),
            Self::Exact => abs_density(q),
        }
    }
}

impl<T: Scalar> std::fmt::Display for Gamma<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Finite(g) => write!(f, "{g}"),
            Self::Exact => f.write_str("inf"),
        }
    }
}

#[inline]
pub fn abs_density<T: Scalar>(q: &DevTensor<T>) -> T {
    q.norm()
}

/// `h_gamma(Q)`, evaluated as `|Q|^2 / (sqrt(|Q|^2 + c^2) + c)` with `c = 1/gamma`
/// to avoid cancellation for small `|Q|`.
#[inline]
pub fn h_gamma<T: Scalar>(q: &DevTensor<T>, gamma: T) -> T {
    let c = gamma.recip();
    let r2 = q.norm_sq();
    r2 / ((r2 + c * c).sqrt() + c)
}

#[inline]
pub fn grad_h_gamma<T: Scalar>(q: &DevTensor<T>, gamma: T) -> DevTensor<T> {
    let c = gamma.recip();
    q.scale((q.norm_sq() + c * c).sqrt().recip())
}

/// Hessian of `h_gamma` at `Q` applied to `V`.
#[inline]
pub fn hess_h_gamma_apply<T: Scalar>(q: &DevTensor<T>, gamma: T, v: &DevTensor<T>) -> DevTensor<T> {
    let c = gamma.recip();
    let s2 = q.norm_sq() + c * c;
    let s = s2.sqrt();
    v.axpy(-q.dot(v) / s2, q).scale(s.recip())
}

/// Whether `R` lies in `d * subdiff|.|(Q_dot)`, up to `tol`.
pub fn subdiff_contains<T: Scalar>(q_dot: &DevTensor<T>, r: &DevTensor<T>, d: T, tol: T) -> bool {
    let n = q_dot.norm();
    if n > tol {
        (*r - q_dot.scale(d / n)).norm() <= tol * (T::one() + d)
    } else {
        r.norm() <= d + tol
    }
}

/// Same as [`subdiff_contains`] with `d = d(z)` from the law.
pub fn subdiff_contains_at<T: Scalar>(
    q_dot: &DevTensor<T>,
    r: &DevTensor<T>,
    z: T,
    law: &MaterialLaw<T>,
    tol: T,
) -> bool {
    subdiff_contains(q_dot, r, law.d.eval(z), tol)
}

/// `sum_q w_q d(z_q) h(dp_q)` over quadrature points, with `h = |.|` when exact.
pub fn dissipation_functional<T: Scalar>(
    law: &MaterialLaw<T>,
    z_quad: &[T],
    increments: &[DevTensor<T>],
    weights: &[T],
    gamma: Gamma<T>,
) -> Result<T, DissipationError> {
    let expected = weights.len();
    for (what, got) in [("z", z_quad.len()), ("increment", increments.len())] {
        if got != expected {
            return Err(DissipationError::LengthMismatch { what, got, expected });
        }
    }
    let acc: KahanSum<T> = z_quad
        .iter()
        .zip(increments)
        .zip(weights)
        .map(|((&z, dp), &w)| w * law.d.eval(z) * gamma.density(dp))
        .collect();
    Ok(acc.value())
}
