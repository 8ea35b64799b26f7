//! Symmetric and deviatoric second-order tensors in dimension 2 or 3.
//!
//! Storage is the upper triangle of the `n x n` matrix, so asymmetric values
//! cannot be represented. Fourth-order isotropic maps are never stored; they
//! are applied through their scalar coefficients (see [`crate::material`]).

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unsupported spatial dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),
}

const SLOT2: [[usize; 2]; 2] = [[0, 1], [1, 2]];
const SLOT3: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

#[inline]
fn slot(n: usize, i: usize, j: usize) -> usize {
    if n == 2 {
        SLOT2[i][j]
    } else {
        SLOT3[i][j]
    }
}

/// Number of independent components of a symmetric `n x n` tensor.
#[inline]
pub const fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Number of independent components of a deviatoric `n x n` tensor.
#[inline]
pub const fn dev_len(n: usize) -> usize {
    sym_len(n) - 1
}

/// Symmetric second-order tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor<T> {
    n: usize,
    c: [T; 6],
}

impl<T: Scalar> SymTensor<T> {
    pub fn zeros(n: usize) -> Self {
        assert!(n == 2 || n == 3, "unsupported dimension {n}");
        Self { n, c: [T::zero(); 6] }
    }

    pub fn identity(n: usize) -> Self {
        let mut s = Self::zeros(n);
        for i in 0..n {
            s.set(i, i, T::one());
        }
        s
    }

    pub fn diag(values: &[T]) -> Self {
        let mut s = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            s.set(i, i, v);
        }
        s
    }

    /// Builds a tensor from a full matrix, reading only the upper triangle.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut s = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                s.set(i, j, f(i, j));
            }
        }
        s
    }

    /// Symmetric part `(G + G^T) / 2` of a full `n x n` gradient.
    pub fn symmetrize(n: usize, grad: &[[T; 3]; 3]) -> Self {
        let half = T::lit(0.5);
        Self::from_upper(n, |i, j| half * (grad[i][j] + grad[j][i]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.c[slot(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = slot(self.n, i, j);
        self.c[k] = v;
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Full contraction `A_ij B_ij`; panics on dimension mismatch.
    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.n, other.n, "tensor dimension mismatch");
        let mut s = T::zero();
        for i in 0..self.n {
            s += self.get(i, i) * other.get(i, i);
            for j in (i + 1)..self.n {
                s += T::lit(2.0) * self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    pub fn contract(&self, other: &Self) -> Result<T, TensorError> {
        if self.n != other.n {
            return Err(TensorError::DimensionMismatch { left: self.n, right: other.n });
        }
        Ok(self.dot(other))
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn frobenius_norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// `M - (tr M / n) I`.
    pub fn dev_project(&self) -> DevTensor<T> {
        DevTensor::project(*self)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }

    /// Mandel coordinates: diagonal entries, then `sqrt(2)` times off-diagonals.
    /// The Euclidean product of Mandel vectors equals [`SymTensor::dot`].
    pub fn to_mandel(&self) -> [T; 6] {
        let r2 = T::SQRT_2();
        let mut m = [T::zero(); 6];
        match self.n {
            2 => {
                m[0] = self.get(0, 0);
                m[1] = self.get(1, 1);
                m[2] = r2 * self.get(0, 1);
            }
            _ => {
                m[0] = self.get(0, 0);
                m[1] = self.get(1, 1);
                m[2] = self.get(2, 2);
                m[3] = r2 * self.get(1, 2);
                m[4] = r2 * self.get(0, 2);
                m[5] = r2 * self.get(0, 1);
            }
        }
        m
    }

    pub fn from_mandel(n: usize, m: &[T]) -> Self {
        let ir2 = T::FRAC_1_SQRT_2();
        let mut s = Self::zeros(n);
        match n {
            2 => {
                s.set(0, 0, m[0]);
                s.set(1, 1, m[1]);
                s.set(0, 1, ir2 * m[2]);
            }
            _ => {
                s.set(0, 0, m[0]);
                s.set(1, 1, m[1]);
                s.set(2, 2, m[2]);
                s.set(1, 2, ir2 * m[3]);
                s.set(0, 2, ir2 * m[4]);
                s.set(0, 1, ir2 * m[5]);
            }
        }
        s
    }

    /// Orthonormal basis of the symmetric tensors (Mandel unit vectors).
    pub fn basis(n: usize) -> Vec<Self> {
        (0..sym_len(n))
            .map(|k| {
                let mut m = [T::zero(); 6];
                m[k] = T::one();
                Self::from_mandel(n, &m)
            })
            .collect()
    }

    pub fn scale(&self, a: T) -> Self {
        let mut s = *self;
        for x in s.c.iter_mut() {
            *x *= a;
        }
        s
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: T, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "tensor dimension mismatch");
        let mut s = *self;
        for (x, y) in s.c.iter_mut().zip(other.c.iter()) {
            *x += a * *y;
        }
        s
    }
}

impl<T: Scalar> Add for SymTensor<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.axpy(T::one(), &rhs)
    }
}

impl<T: Scalar> Sub for SymTensor<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.axpy(-T::one(), &rhs)
    }
}

impl<T: Scalar> Neg for SymTensor<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Mul<T> for SymTensor<T> {
    type Output = Self;
    fn mul(self, a: T) -> Self {
        self.scale(a)
    }
}

impl<T: Scalar> AddAssign for SymTensor<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = self.axpy(T::one(), &rhs);
    }
}

impl<T: Scalar> SubAssign for SymTensor<T> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = self.axpy(-T::one(), &rhs);
    }
}

/// Symmetric trace-free tensor.
///
/// Invariant: `|tr| <= 1e-12 max(1, |Q|)` (relative to the scalar's precision).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DevTensor<T>(SymTensor<T>);

impl<T: Scalar> DevTensor<T> {
    pub fn zeros(n: usize) -> Self {
        Self(SymTensor::zeros(n))
    }

    /// Projects `m` onto the deviatoric subspace.
    pub fn project(m: SymTensor<T>) -> Self {
        let n = m.dim();
        let mean = m.trace() / T::from_usize_lossy(n);
        let mut s = m;
        for i in 0..n {
            s.set(i, i, m.get(i, i) - mean);
        }
        Self(s)
    }

    /// Wraps `m`, re-projecting when the trace exceeds the drift tolerance.
    pub fn new(m: SymTensor<T>) -> Self {
        let tol = T::tol_floor(1e-12) * T::one().max(m.frobenius_norm());
        if m.trace().abs() <= tol {
            Self(m)
        } else {
            Self::project(m)
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn as_sym(&self) -> &SymTensor<T> {
        &self.0
    }

    #[inline]
    pub fn into_sym(self) -> SymTensor<T> {
        self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.0.get(i, j)
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        self.0.dot(&other.0)
    }

    /// Contraction with a symmetric tensor (only its deviator contributes).
    #[inline]
    pub fn dot_sym(&self, other: &SymTensor<T>) -> T {
        self.0.dot(other)
    }

    pub fn norm(&self) -> T {
        self.0.frobenius_norm()
    }

    pub fn norm_sq(&self) -> T {
        self.0.norm_sq()
    }

    pub fn scale(&self, a: T) -> Self {
        Self(self.0.scale(a))
    }

    pub fn axpy(&self, a: T, other: &Self) -> Self {
        Self(self.0.axpy(a, &other.0))
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    /// Orthonormal basis of the deviatoric subspace (2 elements for n = 2, 5 for n = 3).
    pub fn basis(n: usize) -> Vec<Self> {
        let z = T::zero();
        let one = T::one();
        let ir2 = T::FRAC_1_SQRT_2();
        match n {
            2 => {
                let a = SymTensor::diag(&[ir2, -ir2]);
                let b = SymTensor::from_upper(2, |i, j| if i != j { ir2 } else { z });
                vec![Self(a), Self(b)]
            }
            3 => {
                let ir6 = one / T::lit(6.0).sqrt();
                let mut v = vec![
                    Self(SymTensor::diag(&[ir2, -ir2, z])),
                    Self(SymTensor::diag(&[ir6, ir6, -T::lit(2.0) * ir6])),
                ];
                for (i, j) in [(1, 2), (0, 2), (0, 1)] {
                    let mut s = SymTensor::zeros(3);
                    s.set(i, j, ir2);
                    v.push(Self(s));
                }
                v
            }
            _ => panic!("unsupported dimension {n}"),
        }
    }

    /// Coordinates in [`DevTensor::basis`].
    pub fn coords(&self) -> Vec<T> {
        Self::basis(self.dim()).iter().map(|e| e.dot(self)).collect()
    }

    pub fn from_coords(n: usize, x: &[T]) -> Self {
        let mut s = Self::zeros(n);
        for (e, &c) in Self::basis(n).iter().zip(x) {
            s = s.axpy(c, e);
        }
        s
    }
}

impl<T: Scalar> Add for DevTensor<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.axpy(T::one(), &rhs)
    }
}

impl<T: Scalar> Sub for DevTensor<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.axpy(-T::one(), &rhs)
    }
}

impl<T: Scalar> Neg for DevTensor<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Mul<T> for DevTensor<T> {
    type Output = Self;
    fn mul(self, a: T) -> Self {
        self.scale(a)
    }
}

impl<T: Scalar> From<DevTensor<T>> for SymTensor<T> {
    fn from(q: DevTensor<T>) -> Self {
        q.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym2(a: f64, b: f64, c: f64) -> SymTensor<f64> {
        SymTensor::from_upper(2, |i, j| match (i, j) {
            (0, 0) => a,
            (0, 1) => b,
            _ => c,
        })
    }

    #[test]
    fn slot_layout_is_packed_upper_triangle() {
        assert_eq!((0..2).flat_map(|i| (i..2).map(move |j| slot(2, i, j))).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(
            (0..3).flat_map(|i| (i..3).map(move |j| slot(3, i, j))).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4, 5]
        );
        assert_eq!(slot(3, 2, 1), slot(3, 1, 2));
    }

    #[test]
    fn dev_project_examples() {
        assert!(SymTensor::<f64>::identity(2).dev_project().norm() < 1e-15);
        let d = SymTensor::diag(&[3.0, 1.0]).dev_project();
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(d.get(1, 1), -1.0);
        assert_eq!(d.get(0, 1), 0.0);
        let q = sym2(0.3, -0.2, -0.3).dev_project();
        assert_eq!(q.dev_project_again(), q);
    }

    impl DevTensor<f64> {
        fn dev_project_again(&self) -> Self {
            self.0.dev_project()
        }
    }

    #[test]
    fn contract_examples() {
        let i = SymTensor::<f64>::identity(2);
        assert_eq!(i.contract(&i).unwrap(), 2.0);
        assert_eq!(sym2(1.0, 5.0, 2.0).contract(&SymTensor::zeros(2)).unwrap(), 0.0);
        assert_eq!(SymTensor::diag(&[1.0, -1.0]).contract(&SymTensor::diag(&[2.0, -2.0])).unwrap(), 4.0);
        assert_eq!(
            i.contract(&SymTensor::identity(3)),
            Err(TensorError::DimensionMismatch { left: 2, right: 3 })
        );
    }

    #[test]
    fn symmetrize_and_norm_examples() {
        let anti = [[0.0, 2.0, 0.0], [-2.0, 0.0, 0.0], [0.0; 3]];
        assert_eq!(SymTensor::symmetrize(2, &anti).frobenius_norm(), 0.0);
        let sym = [[1.0, 2.0, 0.0], [2.0, 3.0, 0.0], [0.0; 3]];
        assert_eq!(SymTensor::symmetrize(2, &sym), sym2(1.0, 2.0, 3.0));
        assert_eq!(SymTensor::diag(&[3.0, 4.0]).frobenius_norm(), 5.0);
    }

    #[test]
    fn deviatoric_bases_are_orthonormal() {
        for n in [2, 3] {
            let b = DevTensor::<f64>::basis(n);
            assert_eq!(b.len(), dev_len(n));
            for (i, x) in b.iter().enumerate() {
                assert!(x.as_sym().trace().abs() < 1e-15);
                for (j, y) in b.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((x.dot(y) - e).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn mandel_roundtrip_preserves_dot() {
        let a = SymTensor::from_upper(3, |i, j| (1 + i + 2 * j) as f64 * 0.3);
        let b = SymTensor::from_upper(3, |i, j| (i as f64 - j as f64 * 0.7) + 0.1);
        let (ma, mb) = (a.to_mandel(), b.to_mandel());
        let d: f64 = ma.iter().zip(mb.iter()).map(|(x, y)| x * y).sum();
        assert!((d - a.dot(&b)).abs() < 1e-13);
        assert!((SymTensor::from_mandel(3, &ma) - a).frobenius_norm() < 1e-15);
    }

    #[test]
    fn f32_tensors_work() {
        let d = SymTensor::<f32>::diag(&[3.0, 1.0]).dev_project();
        assert!((d.get(0, 0) - 1.0).abs() < 1e-6);
    }

    fn arb_sym(n: usize) -> impl Strategy<Value = SymTensor<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 6).prop_map(move |v| SymTensor::from_upper(n, |i, j| v[i * 3 + j - i * (i + 1) / 2]))
    }

    proptest! {
        #[test]
        fn dev_projection_is_idempotent_and_orthogonal(m in arb_sym(3), m2 in arb_sym(2)) {
            for m in [m, m2] {
                let d = m.dev_project();
                let dd = d.as_sym().dev_project();
                let scale = 1.0f64.max(m.frobenius_norm());
                prop_assert!((d.into_sym() - dd.into_sym()).frobenius_norm() <= 1e-14 * scale);
                prop_assert!(d.dot_sym(&SymTensor::identity(m.dim())).abs() <= 1e-14 * scale);
                let rest = m - d.into_sym();
                prop_assert!(rest.dot(d.as_sym()).abs() <= 1e-12 * scale * scale);
            }
        }

        #[test]
        fn contraction_is_symmetric_bilinear(a in arb_sym(3), b in arb_sym(3), s in -3.0f64..3.0) {
            prop_assert!((a.dot(&b) - b.dot(&a)).abs() < 1e-12);
            prop_assert!(((a * s).dot(&b) - s * a.dot(&b)).abs() < 1e-10);
            prop_assert!(a.dot(&a) >= 0.0);
        }
    }
}
