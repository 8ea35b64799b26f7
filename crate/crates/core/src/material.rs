//! Phase-dependent material coefficients and the isotropic elasticity and
//! hardening maps built from them.
//!
//! Every coefficient interpolates between its value in the weak phase
//! (`z <= 0`) and the strong phase (`z >= 1`) with the cubic smoothstep
//! `3t^2 - 2t^3`. The ramp is C1 and flat outside `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::tensor::{DevTensor, SymTensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("unknown material coefficient `{0}` (expected mu, lambda, h, d or ell)")]
    UnknownCoefficient(String),
    #[error("invalid material law: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coefficient {
    Mu,
    Lambda,
    /// Kinematic hardening modulus.
    H,
    /// Yield stress.
    D,
    /// Mass density.
    Ell,
}

impl Coefficient {
    pub const ALL: [Coefficient; 5] = [Self::Mu, Self::Lambda, Self::H, Self::D, Self::Ell];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mu => "mu",
            Self::Lambda => "lambda",
            Self::H => "h",
            Self::D => "d",
            Self::Ell => "ell",
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Coefficient {
    type Err = MaterialError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| MaterialError::UnknownCoefficient(s.to_owned()))
    }
}

/// Values of one coefficient in the weak (`z = 0`) and strong (`z = 1`) phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoints<T> {
    pub weak: T,
    pub strong: T,
}

impl<T: Scalar> Endpoints<T> {
    pub fn new(weak: T, strong: T) -> Self {
        Self { weak, strong }
    }

    #[inline]
    pub fn eval(&self, z: T) -> T {
        self.weak + (self.strong - self.weak) * smoothstep(z)
    }

    #[inline]
    pub fn slope(&self, z: T) -> T {
        (self.strong - self.weak) * smoothstep_prime(z)
    }

    pub fn min(&self) -> T {
        self.weak.min(self.strong)
    }

    pub fn max(&self) -> T {
        self.weak.max(self.strong)
    }
}

#[inline]
pub fn smoothstep<T: Scalar>(z: T) -> T {
    let t = z.max(T::zero()).min(T::one());
    t * t * (T::lit(3.0) - T::lit(2.0) * t)
}

#[inline]
pub fn smoothstep_prime<T: Scalar>(z: T) -> T {
    if z <= T::zero() || z >= T::one() {
        T::zero()
    } else {
        T::lit(6.0) * z * (T::one() - z)
    }
}

/// The five phase-dependent coefficient functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialLaw<T> {
    pub mu: Endpoints<T>,
    pub lambda: Endpoints<T>,
    pub h: Endpoints<T>,
    pub d: Endpoints<T>,
    pub ell: Endpoints<T>,
}

/// Coefficients evaluated at one phase value (or their z-derivatives).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLaw<T> {
    pub mu: T,
    pub lambda: T,
    pub h: T,
    pub d: T,
    pub ell: T,
}

/// Uniform bounds of the coefficients and of the induced elasticity and hardening maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawBounds<T> {
    pub alpha: T,
    pub beta: T,
    pub alpha_c: T,
    pub beta_c: T,
    pub alpha_h: T,
    pub beta_h: T,
}

impl<T: Scalar> MaterialLaw<T> {
    pub fn new(
        mu: Endpoints<T>,
        lambda: Endpoints<T>,
        h: Endpoints<T>,
        d: Endpoints<T>,
        ell: Endpoints<T>,
    ) -> Result<Self, MaterialError> {
        let law = Self { mu, lambda, h, d, ell };
        law.validate()?;
        Ok(law)
    }

    /// Strong-phase values `[mu, lambda, h, d, ell]`, weak phase = `contrast` times those.
    pub fn ersatz(strong: [T; 5], contrast: T) -> Result<Self, MaterialError> {
        let e = |s: T| Endpoints::new(contrast * s, s);
        Self::new(e(strong[0]), e(strong[1]), e(strong[2]), e(strong[3]), e(strong[4]))
    }

    pub fn endpoints(&self, c: Coefficient) -> &Endpoints<T> {
        match c {
            Coefficient::Mu => &self.mu,
            Coefficient::Lambda => &self.lambda,
            Coefficient::H => &self.h,
            Coefficient::D => &self.d,
            Coefficient::Ell => &self.ell,
        }
    }

    /// Every violated invariant, not just the first one.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in Coefficient::ALL {
            let e = self.endpoints(c);
            for (phase, v) in [("0", e.weak), ("1", e.strong)] {
                if !v.is_finite() || v <= T::zero() {
                    out.push(format!(
                        "material coefficient {c}{phase} = {v} must be finite and strictly positive"
                    ));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(MaterialError::Invalid(v))
        }
    }

    pub fn coeff(&self, c: Coefficient, z: T) -> T {
        self.endpoints(c).eval(z)
    }

    pub fn coeff_prime(&self, c: Coefficient, z: T) -> T {
        self.endpoints(c).slope(z)
    }

    /// String-keyed lookup, e.g. `coeff_named("mu", z)`.
    pub fn coeff_named(&self, name: &str, z: T) -> Result<T, MaterialError> {
        Ok(self.coeff(name.parse()?, z))
    }

    pub fn coeff_prime_named(&self, name: &str, z: T) -> Result<T, MaterialError> {
        Ok(self.coeff_prime(name.parse()?, z))
    }

    pub fn at(&self, z: T) -> PointLaw<T> {
        PointLaw {
            mu: self.mu.eval(z),
            lambda: self.lambda.eval(z),
            h: self.h.eval(z),
            d: self.d.eval(z),
            ell: self.ell.eval(z),
        }
    }

    pub fn slope_at(&self, z: T) -> PointLaw<T> {
        PointLaw {
            mu: self.mu.slope(z),
            lambda: self.lambda.slope(z),
            h: self.h.slope(z),
            d: self.d.slope(z),
            ell: self.ell.slope(z),
        }
    }

    pub fn bounds(&self, n: usize) -> LawBounds<T> {
        let ends = [&self.mu, &self.lambda, &self.h, &self.d];
        let alpha = ends.iter().map(|e| e.min()).fold(T::infinity(), T::min);
        let beta = ends.iter().map(|e| e.max()).fold(T::neg_infinity(), T::max);
        let two = T::lit(2.0);
        LawBounds {
            alpha,
            beta,
            alpha_c: two * self.mu.min(),
            beta_c: two * self.mu.max() + T::from_usize_lossy(n) * self.lambda.max(),
            alpha_h: self.h.min(),
            beta_h: self.h.max(),
        }
    }

    pub fn elasticity_apply(&self, z: T, e: &SymTensor<T>) -> SymTensor<T> {
        self.at(z).elasticity(e)
    }

    pub fn hardening_apply(&self, z: T, q: &DevTensor<T>) -> DevTensor<T> {
        self.at(z).hardening(q)
    }
}

impl<T: Scalar> PointLaw<T> {
    /// `2 mu E + lambda tr(E) I`.
    #[inline]
    pub fn elasticity(&self, e: &SymTensor<T>) -> SymTensor<T> {
        let n = e.dim();
        SymTensor::identity(n).scale(self.lambda * e.trace()).axpy(T::lit(2.0) * self.mu, e)
    }

    #[inline]
    pub fn hardening(&self, q: &DevTensor<T>) -> DevTensor<T> {
        q.scale(self.h)
    }

    /// Combined deviatoric stiffness `2 mu + h` seen by the plastic strain.
    #[inline]
    pub fn plastic_stiffness(&self) -> T {
        T::lit(2.0) * self.mu + self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn law() -> MaterialLaw<f64> {
        MaterialLaw::new(
            Endpoints::new(0.5, 2.0),
            Endpoints::new(0.3, 1.5),
            Endpoints::new(1.0, 3.0),
            Endpoints::new(0.2, 0.9),
            Endpoints::new(0.01, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn constant_outside_unit_interval() {
        let l = law();
        assert_eq!(l.coeff(Coefficient::Mu, -5.0), 0.5);
        assert_eq!(l.coeff(Coefficient::Mu, 7.0), 2.0);
        assert_eq!(l.coeff_prime(Coefficient::D, 0.0), 0.0);
        assert_eq!(l.coeff_prime(Coefficient::D, 1.0), 0.0);
        assert_eq!(l.coeff_prime(Coefficient::Ell, -0.3), 0.0);
    }

    #[test]
    fn smoothstep_midpoint() {
        assert_eq!(law().coeff(Coefficient::H, 0.5), 2.0);
    }

    #[test]
    fn named_lookup() {
        let l = law();
        assert_eq!(l.coeff_named("lambda", 1.0).unwrap(), 1.5);
        assert!(matches!(l.coeff_named("nu", 0.5), Err(MaterialError::UnknownCoefficient(_))));
    }

    #[test]
    fn invalid_endpoints_are_all_reported() {
        let mut l = law();
        l.d.weak = -1.0;
        l.ell.strong = f64::NAN;
        let v = l.violations();
        assert_eq!(v.len(), 2);
        assert!(v[0].contains("d0"));
    }

    #[test]
    fn elasticity_examples() {
        let l = law();
        assert_eq!(l.elasticity_apply(0.3, &SymTensor::zeros(2)), SymTensor::zeros(2));
        let q = SymTensor::from_upper(2, |i, j| if i == j { if i == 0 { 0.4 } else { -0.4 } } else { 0.7 });
        let cq = l.elasticity_apply(0.3, &q);
        let mu = l.coeff(Coefficient::Mu, 0.3);
        assert!((cq - q.scale(2.0 * mu)).frobenius_norm() < 1e-15);
        assert!(cq.trace().abs() < 1e-15);

        let l1 = MaterialLaw::ersatz([1.0, 2.0, 1.0, 1.0, 1.0], 1e-3).unwrap();
        let c = l1.elasticity_apply(1.0, &SymTensor::identity(2));
        assert_eq!(c, SymTensor::identity(2).scale(6.0));
    }

    #[test]
    fn hardening_examples() {
        let l = law();
        let q = SymTensor::diag(&[0.5, -0.5]).dev_project();
        assert_eq!(l.hardening_apply(0.4, &DevTensor::zeros(2)), DevTensor::zeros(2));
        assert_eq!(l.hardening_apply(-1.0, &q), q.scale(1.0));
        let a = l.hardening_apply(0.4, &q.scale(2.0));
        let b = l.hardening_apply(0.4, &q).scale(2.0);
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn isotropic_maps_preserve_deviators() {
        let l = law();
        let q = SymTensor::from_upper(3, |i, j| (i as f64 - 0.4 * j as f64) * 0.3).dev_project();
        let cq = l.elasticity_apply(0.6, q.as_sym());
        assert!((cq.dev_project().into_sym() - cq).frobenius_norm() < 1e-14);
    }

    #[test]
    fn elasticity_bounds_hold_on_random_samples() {
        let l = law();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3] {
            let b = l.bounds(n);
            for _ in 0..10_000 {
                let z = rng.gen_range(-0.5..1.5);
                let e = SymTensor::from_upper(n, |_, _| rng.gen_range(-1.0..1.0));
                let q = l.elasticity_apply(z, &e).dot(&e);
                let nn = e.norm_sq();
                assert!(b.alpha_c * nn <= q + 1e-12 && q <= b.beta_c * nn + 1e-12);
            }
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let l = law();
        for c in Coefficient::ALL {
            let mut prev_err = f64::INFINITY;
            for &step in &[1e-2, 1e-3] {
                let mut err: f64 = 0.0;
                let mut z = -0.5;
                while z <= 1.5 {
                    let fd = (l.coeff(c, z + step) - l.coeff(c, z - step)) / (2.0 * step);
                    err = err.max((fd - l.coeff_prime(c, z)).abs());
                    z += 0.0137;
                }
                // kinks of the second derivative at 0 and 1 cap the order there
                assert!(err <= 10.0 * step, "{c}: {err}");
                assert!(err <= prev_err);
                prev_err = err;
            }
        }
    }
}
