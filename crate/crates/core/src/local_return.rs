//! Pointwise plastic solvers at a single quadrature point.
//!
//! With `a = 2 mu + h` the regularized flow map is
//! `F(Q) = a Q + d grad h_gamma(Q - P)`. Writing `X = Q - P` and
//! `T = R - a P`, the equation `F(Q) = R` becomes `a X + d X / s(X) = T`
//! with `s(X) = sqrt(|X|^2 + gamma^-2)`, so `X` is parallel to `T` and only
//! its length is unknown. The same structure gives `DF^-1` in closed form:
//! it scales the component along `X` and the orthogonal complement by two
//! different factors.

use thiserror::Error;

use crate::dissipation::{grad_h_gamma, hess_h_gamma_apply, Gamma};
use crate::material::{MaterialLaw, PointLaw};
use crate::scalar::Scalar;
use crate::tensor::{sym_len, DevTensor, SymTensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocalError {
    #[error("local Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("operation needs a finite regularization parameter")]
    ExactGamma,
}

pub const LOCAL_TOL: f64 = 1e-12;
pub const LOCAL_MAX_ITER: usize = 50;

/// The triple `(z, gamma, P)` with the coefficients evaluated at `z`.
#[derive(Debug, Clone, Copy)]
pub struct LocalContext<T> {
    pub z: T,
    pub gamma: Gamma<T>,
    pub p_prev: DevTensor<T>,
    pub coeffs: PointLaw<T>,
}

/// `DF^-1` (or, for `gamma = inf`, the derivative of the return map with
/// respect to the trial stress): `alpha_par` along `axis`, `alpha_perp` across.
#[derive(Debug, Clone, Copy)]
pub struct AxialInverse<T> {
    pub axis: Option<DevTensor<T>>,
    pub alpha_par: T,
    pub alpha_perp: T,
}

impl<T: Scalar> AxialInverse<T> {
    pub fn zero() -> Self {
        Self { axis: None, alpha_par: T::zero(), alpha_perp: T::zero() }
    }

    #[inline]
    pub fn apply(&self, w: &DevTensor<T>) -> DevTensor<T> {
        match &self.axis {
            Some(n) => {
                let wn = n.dot(w);
                w.scale(self.alpha_perp).axpy((self.alpha_par - self.alpha_perp) * wn, n)
            }
            None => w.scale(self.alpha_perp),
        }
    }
}

/// Derivative of the condensed stress `E -> C(E - p(E))`.
#[derive(Debug, Clone, Copy)]
pub struct ConsistentTangent<T> {
    pub mu: T,
    pub lambda: T,
    pub flow: AxialInverse<T>,
}

impl<T: Scalar> ConsistentTangent<T> {
    pub fn elastic(mu: T, lambda: T) -> Self {
        Self { mu, lambda, flow: AxialInverse::zero() }
    }

    /// Plastic strain rate `dp` for a strain rate `V`.
    #[inline]
    pub fn plastic_rate(&self, v: &SymTensor<T>) -> DevTensor<T> {
        let two_mu = T::lit(2.0) * self.mu;
        self.flow.apply(&v.dev_project().scale(two_mu))
    }

    #[inline]
    pub fn apply(&self, v: &SymTensor<T>) -> SymTensor<T> {
        let two_mu = T::lit(2.0) * self.mu;
        let n = v.dim();
        let dp = self.plastic_rate(v);
        SymTensor::identity(n)
            .scale(self.lambda * v.trace())
            .axpy(two_mu, v)
            .axpy(-two_mu, dp.as_sym())
    }

    /// Row-major Mandel matrix of size `sym_len(n)`.
    pub fn to_mandel(&self, n: usize) -> Vec<T> {
        let m = sym_len(n);
        let mut out = vec![T::zero(); m * m];
        let mut unit = [T::zero(); 6];
        for col in 0..m {
            unit[col] = T::one();
            let image = self.apply(&SymTensor::from_mandel(n, &unit[..m])).to_mandel();
            for row in 0..m {
                out[row * m + col] = image[row];
            }
            unit[col] = T::zero();
        }
        out
    }
}

/// Result of the condensed stress evaluation at one point.
#[derive(Debug, Clone, Copy)]
pub struct LocalResponse<T> {
    pub p: DevTensor<T>,
    pub sigma: SymTensor<T>,
    pub tangent: ConsistentTangent<T>,
}

impl<T: Scalar> LocalContext<T> {
    pub fn new(law: &MaterialLaw<T>, z: T, gamma: Gamma<T>, p_prev: DevTensor<T>) -> Self {
        Self { z, gamma, p_prev, coeffs: law.at(z) }
    }

    #[inline]
    pub fn stiffness(&self) -> T {
        self.coeffs.plastic_stiffness()
    }

    fn finite_gamma(&self) -> Result<T, LocalError> {
        match self.gamma {
            Gamma::Finite(g) => Ok(g),
            Gamma::Exact => Err(LocalError::ExactGamma),
        }
    }

    /// `F(Q) = (2 mu + h) Q + d grad h_gamma(Q - P)`.
    pub fn f_apply(&self, q: &DevTensor<T>) -> Result<DevTensor<T>, LocalError> {
        let g = self.finite_gamma()?;
        Ok(q.scale(self.stiffness()).axpy(self.coeffs.d, &grad_h_gamma(&(*q - self.p_prev), g)))
    }

    /// `DF(Q) V`.
    pub fn df_apply(&self, q: &DevTensor<T>, v: &DevTensor<T>) -> Result<DevTensor<T>, LocalError> {
        let g = self.finite_gamma()?;
        let hv = hess_h_gamma_apply(&(*q - self.p_prev), g, v);
        Ok(v.scale(self.stiffness()).axpy(self.coeffs.d, &hv))
    }

    /// `DF(Q)^-1` in closed form.
    pub fn df_inverse(&self, q: &DevTensor<T>) -> Result<AxialInverse<T>, LocalError> {
        let g = self.finite_gamma()?;
        Ok(self.df_inverse_at(&(*q - self.p_prev), g))
    }

    fn df_inverse_at(&self, x: &DevTensor<T>, gamma: T) -> AxialInverse<T> {
        let a = self.stiffness();
        let d = self.coeffs.d;
        let c = gamma.recip();
        let r = x.norm();
        let s = (r * r + c * c).sqrt();
        let alpha_perp = (a + d / s).recip();
        if r > T::zero() {
            let alpha_par = (a + d * c * c / (s * s * s)).recip();
            AxialInverse { axis: Some(x.scale(r.recip())), alpha_par, alpha_perp }
        } else {
            AxialInverse { axis: None, alpha_par: alpha_perp, alpha_perp }
        }
    }

    /// Solves `F(Q) = R`.
    pub fn f_inverse(&self, r: &DevTensor<T>) -> Result<DevTensor<T>, LocalError> {
        let g = self.finite_gamma()?;
        let t = r.axpy(-self.stiffness(), &self.p_prev);
        let tn = t.norm();
        if tn == T::zero() {
            return Ok(self.p_prev);
        }
        let len = self.solve_radial(tn, g, T::tol_floor(LOCAL_TOL) * (T::one() + r.norm()))?;
        Ok(self.p_prev.axpy(len / tn, &t))
    }

    /// Root of `a x + d x / sqrt(x^2 + c^2) = target` on `x >= 0`.
    ///
    /// The left side is increasing and concave, so Newton from a point left
    /// of the root climbs monotonically; bisection on the bracket guards
    /// against round-off stalls.
    fn solve_radial(&self, target: T, gamma: T, tol: T) -> Result<T, LocalError> {
        let a = self.stiffness();
        let d = self.coeffs.d;
        let c = gamma.recip();
        let phi = |x: T| a * x + d * x / (x * x + c * c).sqrt();
        let (mut lo, mut hi) = (T::zero(), target / a);
        let mut x = ((target - d) / a).max(T::zero());
        let mut res = T::infinity();
        for _ in 0..LOCAL_MAX_ITER {
            let f = phi(x) - target;
            res = f.abs();
            if res <= tol {
                return Ok(x);
            }
            if f < T::zero() {
                lo = x;
            } else {
                hi = x;
            }
            let s = (x * x + c * c).sqrt();
            let slope = a + d * c * c / (s * s * s);
            let next = x - f / slope;
            x = if next > lo && next < hi { next } else { T::lit(0.5) * (lo + hi) };
        }
        Err(LocalError::NewtonDivergence { iterations: LOCAL_MAX_ITER, residual: res.to_f64_lossy() })
    }

    /// Condensed stress `sigma = C(E - p)` with the new plastic strain and the
    /// consistent tangent. Dispatches to [`radial_return`] when `gamma = inf`.
    pub fn condense(&self, e: &SymTensor<T>) -> Result<LocalResponse<T>, LocalError> {
        let PointLaw { mu, lambda, .. } = self.coeffs;
        let two_mu = T::lit(2.0) * mu;
        let trial = e.dev_project().scale(two_mu);
        let (p, flow) = match self.gamma {
            Gamma::Finite(g) => {
                let p = self.f_inverse(&trial)?;
                (p, self.df_inverse_at(&(p - self.p_prev), g))
            }
            Gamma::Exact => self.return_map(&trial),
        };
        let sigma = self.coeffs.elasticity(&(*e - p.into_sym()));
        Ok(LocalResponse { p, sigma, tangent: ConsistentTangent { mu, lambda, flow } })
    }

    /// Closed-form exact return for the trial deviatoric stress `2 mu dev E`.
    fn return_map(&self, dev_stress: &DevTensor<T>) -> (DevTensor<T>, AxialInverse<T>) {
        let a = self.stiffness();
        let d = self.coeffs.d;
        let t = dev_stress.axpy(-a, &self.p_prev);
        let tn = t.norm();
        if tn <= d {
            return (self.p_prev, AxialInverse::zero());
        }
        let n = t.scale(tn.recip());
        let p = self.p_prev.axpy((tn - d) / a, &n);
        let flow = AxialInverse { axis: Some(n), alpha_par: a.recip(), alpha_perp: (tn - d) / (tn * a) };
        (p, flow)
    }

    pub fn b_apply(&self, e: &SymTensor<T>) -> Result<SymTensor<T>, LocalError> {
        Ok(self.condense(e)?.sigma)
    }

    pub fn b_tangent_apply(&self, e: &SymTensor<T>, v: &SymTensor<T>) -> Result<SymTensor<T>, LocalError> {
        Ok(self.condense(e)?.tangent.apply(v))
    }

    /// Incremental energy density
    /// `1/2 C(E-p).(E-p) + 1/2 h |p|^2 + d h(p - P)` at a given `p`.
    pub fn energy_density_at(&self, e: &SymTensor<T>, p: &DevTensor<T>) -> T {
        let half = T::lit(0.5);
        let el = *e - p.into_sym();
        half * self.coeffs.elasticity(&el).dot(&el)
            + half * self.coeffs.h * p.norm_sq()
            + self.coeffs.d * self.gamma.density(&(*p - self.p_prev))
    }

    /// Condensed energy density, minimized over `p`; its derivative in `E` is `sigma`.
    pub fn energy_density(&self, e: &SymTensor<T>) -> Result<T, LocalError> {
        let r = self.condense(e)?;
        Ok(self.energy_density_at(e, &r.p))
    }

    /// Back stress `rho = dev sigma - h p`, equal to `d grad h(p - P)` at a solution.
    pub fn back_stress(&self, resp: &LocalResponse<T>) -> DevTensor<T> {
        resp.sigma.dev_project().axpy(-self.coeffs.h, &resp.p)
    }
}

/// Exact incremental return at `gamma = inf`, returning the new plastic strain and stress.
pub fn radial_return<T: Scalar>(
    z: T,
    law: &MaterialLaw<T>,
    p_prev: &DevTensor<T>,
    e: &SymTensor<T>,
) -> (DevTensor<T>, SymTensor<T>) {
    let ctx = LocalContext::new(law, z, Gamma::Exact, *p_prev);
    let r = ctx.condense(e).expect("closed-form return cannot fail");
    (r.p, r.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipation::subdiff_contains;
    use crate::material::Endpoints;
    use crate::tensor::dev_len;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_law() -> MaterialLaw<f64> {
        MaterialLaw::ersatz([1.0, 1.0, 1.0, 1.0, 1.0], 1e-3).unwrap()
    }

    fn unit_dir(n: usize) -> DevTensor<f64> {
        let q = SymTensor::<f64>::from_upper(n, |i, j| if i == j { [1.0, -0.5, -0.5][i] } else { 0.3 }).dev_project();
        q.scale(1.0 / q.norm())
    }

    fn rand_dev(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DevTensor<f64> {
        let c: Vec<f64> = (0..dev_len(n)).map(|_| rng.gen_range(-scale..scale)).collect();
        DevTensor::from_coords(n, &c)
    }

    fn rand_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymTensor<f64> {
        SymTensor::from_upper(n, |_, _| rng.gen_range(-scale..scale))
    }

    fn gen_law() -> MaterialLaw<f64> {
        MaterialLaw::new(
            Endpoints::new(0.3, 1.2),
            Endpoints::new(0.5, 2.0),
            Endpoints::new(0.05, 0.4),
            Endpoints::new(0.1, 0.6),
            Endpoints::new(0.01, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn f_examples() {
        let law = unit_law();
        let ctx = LocalContext::new(&law, 1.0, Gamma::Finite(1.0), DevTensor::zeros(2));
        assert_eq!(ctx.f_apply(&DevTensor::zeros(2)).unwrap(), DevTensor::zeros(2));
        let e = unit_dir(2);
        let fq = ctx.f_apply(&e.scale(0.75)).unwrap();
        assert!((fq - e.scale(2.85)).norm() < 1e-14);
        let p = e.scale(0.4);
        let ctx_p = LocalContext::new(&law, 1.0, Gamma::Finite(1.0), p);
        assert!((ctx_p.f_apply(&p).unwrap() - p.scale(3.0)).norm() < 1e-15);
    }

    #[test]
    fn f_inverse_examples() {
        let law = unit_law();
        let ctx = LocalContext::new(&law, 1.0, Gamma::Finite(1.0), DevTensor::zeros(2));
        assert_eq!(ctx.f_inverse(&DevTensor::zeros(2)).unwrap(), DevTensor::zeros(2));
        let e = unit_dir(2);
        let q = ctx.f_inverse(&e.scale(2.85)).unwrap();
        assert!((q - e.scale(0.75)).norm() < 1e-12);

        // independent scalar bisection on r -> 3r + r / sqrt(r^2 + 1)
        let (mut lo, mut hi) = (0.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 3.0 * mid + mid / (mid * mid + 1.0).sqrt() < 2.85 { lo = mid } else { hi = mid }
        }
        assert!((q.norm() - lo).abs() < 1e-12);
    }

    #[test]
    fn f_inverse_round_trip() {
        let law = gen_law();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let n = if rng.gen_bool(0.5) { 2 } else { 3 };
            let z = rng.gen_range(-0.2..1.2);
            let g = 10f64.powf(rng.gen_range(-1.0..8.0));
            let ctx = LocalContext::new(&law, z, Gamma::Finite(g), rand_dev(&mut rng, n, 1.0));
            let q = rand_dev(&mut rng, n, 2.0);
            let back = ctx.f_inverse(&ctx.f_apply(&q).unwrap()).unwrap();
            assert!((back - q).norm() < 1e-10, "gamma {g}: {}", (back - q).norm());
        }
    }

    #[test]
    fn exact_gamma_is_rejected_by_regularized_maps() {
        let law = unit_law();
        let ctx = LocalContext::new(&law, 1.0, Gamma::Exact, DevTensor::zeros(2));
        assert_eq!(ctx.f_apply(&DevTensor::zeros(2)), Err(LocalError::ExactGamma));
    }

    fn dense_df(ctx: &LocalContext<f64>, q: &DevTensor<f64>) -> Vec<Vec<f64>> {
        let n = q.dim();
        let basis = DevTensor::basis(n);
        basis
            .iter()
            .map(|bi| basis.iter().map(|bj| ctx.df_apply(q, bj).unwrap().dot(bi)).collect())
            .collect()
    }

    fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let m = b.len();
        for k in 0..m {
            let piv = (k..m).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..m {
                let f = a[i][k] / a[k][k];
                for j in k..m {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; m];
        for k in (0..m).rev() {
            let s: f64 = (k + 1..m).map(|j| a[k][j] * x[j]).sum();
            x[k] = (b[k] - s) / a[k][k];
        }
        x
    }

    #[test]
    fn closed_form_df_inverse_matches_dense_solve() {
        let law = gen_law();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let n = if rng.gen_bool(0.5) { 2 } else { 3 };
            let g = 10f64.powf(rng.gen_range(-1.0..4.0));
            let ctx = LocalContext::new(&law, rng.gen_range(0.0..1.0), Gamma::Finite(g), rand_dev(&mut rng, n, 0.5));
            let q = rand_dev(&mut rng, n, 1.0);
            let w = rand_dev(&mut rng, n, 1.0);
            let x = DevTensor::from_coords(n, &gauss_solve(dense_df(&ctx, &q), w.coords()));
            let y = ctx.df_inverse(&q).unwrap().apply(&w);
            assert!((x - y).norm() <= 1e-10 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn condensed_stress_examples() {
        let law = gen_law();
        for gamma in [Gamma::Finite(10.0), Gamma::Exact] {
            let ctx = LocalContext::new(&law, 0.7, gamma, DevTensor::zeros(2));
            assert_eq!(ctx.b_apply(&SymTensor::zeros(2)).unwrap(), SymTensor::zeros(2));
            let e = SymTensor::identity(2).scale(0.3);
            let s = ctx.b_apply(&e).unwrap();
            assert!((s - law.elasticity_apply(0.7, &e)).frobenius_norm() < 1e-15);
        }
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let law = gen_law();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for gamma in [Gamma::Finite(1.0), Gamma::Finite(50.0), Gamma::Exact] {
            for _ in 0..50 {
                let n = if rng.gen_bool(0.5) { 2 } else { 3 };
                let ctx = LocalContext::new(&law, rng.gen_range(0.0..1.0), gamma, rand_dev(&mut rng, n, 0.3));
                let e = rand_sym(&mut rng, n, 1.0);
                let v = rand_sym(&mut rng, n, 1.0);
                let exact = ctx.b_tangent_apply(&e, &v).unwrap();
                let fd = |h: f64| {
                    (ctx.b_apply(&e.axpy(h, &v)).unwrap() - ctx.b_apply(&e.axpy(-h, &v)).unwrap()).scale(0.5 / h)
                };
                let e1 = (fd(1e-3) - exact).frobenius_norm();
                let e2 = (fd(1e-4) - exact).frobenius_norm();
                assert!(e2 <= 1e-6 * (1.0 + exact.frobenius_norm()) || e2 < e1 / 20.0, "{e1} {e2}");
            }
        }
    }

    #[test]
    fn tangent_is_symmetric_positive_definite() {
        let law = gen_law();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for gamma in [Gamma::Finite(3.0), Gamma::Exact] {
            for _ in 0..200 {
                let ctx = LocalContext::new(&law, rng.gen_range(0.0..1.0), gamma, rand_dev(&mut rng, 2, 0.3));
                let t = ctx.condense(&rand_sym(&mut rng, 2, 1.0)).unwrap().tangent;
                let m = t.to_mandel(2);
                for i in 0..3 {
                    for j in 0..3 {
                        assert!((m[i * 3 + j] - m[j * 3 + i]).abs() < 1e-13);
                    }
                }
                let v = rand_sym(&mut rng, 2, 1.0);
                assert!(t.apply(&v).dot(&v) > 0.0);
            }
        }
    }

    #[test]
    fn radial_return_examples() {
        let law = unit_law();
        let e = unit_dir(2);
        // dev(C E) = 2 e with mu = 1
        let strain = e.into_sym();
        let (p, sigma) = radial_return(1.0, &law, &DevTensor::zeros(2), &strain);
        assert!((p - e.scale(1.0 / 3.0)).norm() < 1e-15);
        assert!((sigma - law.elasticity_apply(1.0, &(strain - p.into_sym()))).frobenius_norm() < 1e-15);

        // elastic step
        let small = e.scale(0.2).into_sym();
        let pp = e.scale(0.05);
        let (p, _) = radial_return(1.0, &law, &pp, &small);
        assert_eq!(p, pp);
    }

    #[test]
    fn radial_return_matches_brute_force_scalar_minimization() {
        // min over r >= 0 of 1/2 (2 mu)(e - r)^2 + 1/2 h r^2 + d r with e = 1, mu = h = d = 1
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=100_000 {
            let r = i as f64 * 1e-5;
            let f = (1.0 - r) * (1.0 - r) + 0.5 * r * r + r;
            if f < best.0 {
                best = (f, r);
            }
        }
        let law = unit_law();
        let (p, _) = radial_return(1.0, &law, &DevTensor::zeros(2), &unit_dir(2).into_sym());
        assert!((p.norm() - best.1).abs() <= 1e-5);
    }

    #[test]
    fn radial_return_satisfies_flow_rule() {
        let law = gen_law();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let n = if rng.gen_bool(0.5) { 2 } else { 3 };
            let z = rng.gen_range(-0.2..1.2);
            let pp = rand_dev(&mut rng, n, 0.5);
            let ctx = LocalContext::new(&law, z, Gamma::Exact, pp);
            let r = ctx.condense(&rand_sym(&mut rng, n, 2.0)).unwrap();
            let rho = ctx.back_stress(&r);
            assert!(subdiff_contains(&(r.p - pp), &rho, law.d.eval(z), 1e-10));
        }
    }

    #[test]
    fn regularized_inverse_approaches_radial_return() {
        let law = gen_law();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let z = rng.gen_range(0.0..1.0);
            let pp = rand_dev(&mut rng, 2, 0.5);
            let e = rand_sym(&mut rng, 2, 1.0);
            let exact = LocalContext::new(&law, z, Gamma::Exact, pp).condense(&e).unwrap().p;
            let reg = LocalContext::new(&law, z, Gamma::Finite(1e8), pp).condense(&e).unwrap().p;
            assert!((exact - reg).norm() <= 1e-6);
        }
    }

    #[test]
    fn energy_gradient_is_stress() {
        let law = gen_law();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for gamma in [Gamma::Finite(20.0), Gamma::Exact] {
            for _ in 0..50 {
                let ctx = LocalContext::new(&law, rng.gen_range(0.0..1.0), gamma, rand_dev(&mut rng, 2, 0.2));
                let e = rand_sym(&mut rng, 2, 1.0);
                let v = rand_sym(&mut rng, 2, 1.0);
                let h = 1e-5;
                let fd = (ctx.energy_density(&e.axpy(h, &v)).unwrap() - ctx.energy_density(&e.axpy(-h, &v)).unwrap())
                    / (2.0 * h);
                let s = ctx.b_apply(&e).unwrap().dot(&v);
                assert!((fd - s).abs() < 1e-7 * (1.0 + s.abs()), "{fd} {s}");
            }
        }
    }

    #[test]
    fn f32_local_solves() {
        let law = MaterialLaw::<f32>::ersatz([1.0, 1.0, 1.0, 1.0, 1.0], 1e-3).unwrap();
        let ctx = LocalContext::new(&law, 1.0f32, Gamma::Finite(100.0), DevTensor::zeros(2));
        let r = ctx.condense(&SymTensor::diag(&[1.0, -1.0])).unwrap();
        assert!(r.p.norm() > 0.0 && r.sigma.is_finite());
    }
}
