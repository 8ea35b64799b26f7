//! Sparse symmetric positive definite linear algebra: CSR storage, an
//! envelope (skyline) Cholesky factorization and Jacobi-preconditioned CG.

use rayon::prelude::*;
use thiserror::Error;

use crate::scalar::{KahanSum, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },
    #[error("dimension mismatch: matrix {rows}x{rows}, vector {len}")]
    Dimension { rows: usize, len: usize },
}

/// Square compressed-sparse-row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    /// Builds from `(row, col, value)` triplets, summing duplicates in input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (j, v) in r {
                if col.len() > *row_ptr.last().unwrap() && *col.last().unwrap() == j {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(j);
                    val.push(v);
                }
            }
            row_ptr.push(col.len());
        }
        Self { n, row_ptr, col, val }
    }

    /// Structure only, all values zero. `pattern[i]` lists the columns of row `i`.
    pub fn from_pattern(pattern: Vec<Vec<usize>>) -> Self {
        let n = pattern.len();
        let mut row_ptr = vec![0];
        let mut col = Vec::new();
        for mut r in pattern {
            r.sort_unstable();
            r.dedup();
            col.extend(r);
            row_ptr.push(col.len());
        }
        let val = vec![T::zero(); col.len()];
        Self { n, row_ptr, col, val }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    /// Index into `val` of entry `(i, j)`, if stored.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let r = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        r.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |k| self.val[k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col[k], self.val[k]))
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .into_par_iter()
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.val.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Lower-triangular envelope Cholesky factor `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Skyline<T> {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Skyline<T> {
    pub fn factor(a: &Csr<T>) -> Result<Self, LinalgError> {
        let n = a.n;
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for (j, _) in a.row(i) {
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![T::zero(); start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let base_i = start[i];
            for j in fi..i {
                let fj = first[j];
                let base_j = start[j];
                let k0 = fi.max(fj);
                let mut s = data[base_i + j - fi];
                for k in k0..j {
                    s -= data[base_i + k - fi] * data[base_j + k - fj];
                }
                data[base_i + j - fi] = s / data[base_j + j - fj];
            }
            let mut d = data[base_i + i - fi];
            for k in fi..i {
                let l = data[base_i + k - fi];
                d -= l * l;
            }
            if !(d > T::zero()) {
                return Err(LinalgError::NotPositiveDefinite { row: i, pivot: d.to_f64_lossy() });
            }
            data[base_i + i - fi] = d.sqrt();
        }
        Ok(Self { first, start, data })
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> T {
        self.data[self.start[i] + j - self.first[i]]
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.first.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in self.first[i]..i {
                s -= self.l(i, k) * y[k];
            }
            y[i] = s / self.l(i, i);
        }
        for i in (0..n).rev() {
            y[i] /= self.l(i, i);
            let yi = y[i];
            for k in self.first[i]..i {
                y[k] -= self.l(i, k) * yi;
            }
        }
        y
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let k: KahanSum<T> = a.iter().zip(b).map(|(x, y)| *x * *y).collect();
    k.value()
}

/// Jacobi-preconditioned conjugate gradients from `x0`.
pub fn pcg<T: Scalar>(a: &Csr<T>, b: &[T], x0: Option<&[T]>, rtol: T, max_iter: usize) -> Result<Vec<T>, LinalgError> {
    let n = a.n;
    let inv_diag: Vec<T> = a.diagonal().into_iter().map(|d| if d > T::zero() { d.recip() } else { T::one() }).collect();
    let mut x = x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    let ax = a.mul_vec(&x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(bi, ai)| *bi - *ai).collect();
    let bnorm = dot(b, b).sqrt();
    if bnorm == T::zero() {
        return Ok(vec![T::zero(); n]);
    }
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(ri, di)| *ri * *di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for _ in 0..max_iter {
        if res <= rtol {
            return Ok(x);
        }
        let ap = a.mul_vec(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= rtol {
        Ok(x)
    } else {
        Err(LinalgError::CgNotConverged { iterations: max_iter, residual: res.to_f64_lossy() })
    }
}

/// Unknown count above which the iterative solver replaces the direct one.
pub const DIRECT_LIMIT: usize = 200_000;

/// Factorize-once SPD solver: direct below [`DIRECT_LIMIT`] unknowns, PCG above.
#[derive(Debug, Clone)]
pub enum SpdSolver<T> {
    Direct(Skyline<T>),
    Iterative(Csr<T>),
}

impl<T: Scalar> SpdSolver<T> {
    pub fn new(a: Csr<T>) -> Result<Self, LinalgError> {
        if a.n < DIRECT_LIMIT {
            Ok(Self::Direct(Skyline::factor(&a)?))
        } else {
            Ok(Self::Iterative(a))
        }
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        match self {
            Self::Direct(l) => Ok(l.solve(b)),
            Self::Iterative(a) => {
                if b.len() != a.n {
                    return Err(LinalgError::Dimension { rows: a.n, len: b.len() });
                }
                pcg(a, b, None, T::tol_floor(1e-13), 10 * a.n + 100)
            }
        }
    }
}

pub fn solve_spd<T: Scalar>(a: Csr<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    if b.len() != a.n {
        return Err(LinalgError::Dimension { rows: a.n, len: b.len() });
    }
    SpdSolver::new(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplace_1d(n: usize) -> Csr<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        Csr::from_triplets(n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = Csr::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0), (0, 1, 4.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn direct_and_iterative_agree() {
        let a = laplace_1d(40);
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let x1 = Skyline::factor(&a).unwrap().solve(&b);
        let x2 = pcg(&a, &b, None, 1e-14, 1000).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-10);
        }
        let r = a.mul_vec(&x1);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_is_reported() {
        let a = Csr::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(Skyline::factor(&a), Err(LinalgError::NotPositiveDefinite { row: 1, .. })));
    }

    proptest! {
        #[test]
        fn skyline_solves_random_spd(seed in prop::collection::vec(-1.0..1.0f64, 36), rhs in prop::collection::vec(-1.0..1.0f64, 6)) {
            // A = M M^T + I with a banded M
            let n = 6;
            let m = |i: usize, j: usize| if i.abs_diff(j) <= 2 { seed[i * n + j] } else { 0.0 };
            let mut t = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let v: f64 = (0..n).map(|k| m(i, k) * m(j, k)).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
                    if v != 0.0 {
                        t.push((i, j, v));
                    }
                }
            }
            let a = Csr::from_triplets(n, &t);
            let x = solve_spd(a.clone(), &rhs).unwrap();
            let r = a.mul_vec(&x);
            for (ri, bi) in r.iter().zip(&rhs) {
                prop_assert!((ri - bi).abs() < 1e-10);
            }
        }
    }
}
