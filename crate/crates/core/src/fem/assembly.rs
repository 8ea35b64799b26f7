//! Residual, tangent and adjoint system assembly for the condensed
//! displacement equation. Cells are processed in parallel and scattered in
//! cell order, so results do not depend on scheduling.

use rayon::prelude::*;
use thiserror::Error;

use crate::dissipation::Gamma;
use crate::local_return::{ConsistentTangent, LocalContext, LocalError, LocalResponse};
use crate::material::MaterialLaw;
use crate::scalar::{KahanSum, Scalar};
use crate::tensor::{DevTensor, SymTensor};

use super::linalg::{Csr, LinalgError};
use super::quadrature::{QuadPoint, QUAD_PER_CELL};
use super::space::FemSpace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error("local solve failed at quadrature point {quad}: {source}")]
    Local { quad: usize, source: LocalError },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Per-point inputs shared by the state and adjoint assemblies.
#[derive(Debug, Clone, Copy)]
pub struct PointData<'a, T> {
    pub law: &'a MaterialLaw<T>,
    pub z_quad: &'a [T],
    pub p_prev: &'a [DevTensor<T>],
    pub gamma: Gamma<T>,
}

impl<T: Scalar> PointData<'_, T> {
    #[inline]
    pub fn context(&self, k: usize) -> LocalContext<T> {
        LocalContext::new(self.law, self.z_quad[k], self.gamma, self.p_prev[k])
    }
}

#[derive(Debug, Clone)]
pub struct StateAssembly<T> {
    /// Internal minus external force on free dofs.
    pub residual: Vec<T>,
    pub jacobian: Option<Csr<T>>,
    pub responses: Vec<LocalResponse<T>>,
    /// Incremental energy: stored energy plus dissipation minus external work.
    pub energy: T,
}

fn cell_stiffness<T: Scalar>(p: &QuadPoint<T>, tangent: &ConsistentTangent<T>, ke: &mut [[T; 8]; 8]) {
    let d = tangent.to_mandel(2);
    let b = p.b_matrix();
    let mut db = [[T::zero(); 8]; 3];
    for r in 0..3 {
        for k in 0..8 {
            db[r][k] = (0..3).map(|s| d[r * 3 + s] * b[s][k]).sum();
        }
    }
    for i in 0..8 {
        for j in 0..8 {
            let v: T = (0..3).map(|r| b[r][i] * db[r][j]).sum();
            ke[i][j] += p.wdet * v;
        }
    }
}

#[inline]
fn add_stress_force<T: Scalar>(p: &QuadPoint<T>, sigma: &SymTensor<T>, fe: &mut [T; 8]) {
    let s = sigma.to_mandel();
    let b = p.b_matrix();
    for k in 0..8 {
        fe[k] += p.wdet * (b[0][k] * s[0] + b[1][k] * s[1] + b[2][k] * s[2]);
    }
}

type CellState<T> = ([T; 8], Option<Box<[[T; 8]; 8]>>, [LocalResponse<T>; QUAD_PER_CELL], T);

/// Residual `int b(Eu) . E psi - F(psi)` over free dofs, optionally with its Jacobian.
///
/// `external` is the full-dof load vector; `u` the full-dof displacement
/// (already equal to the prescribed values on Dirichlet dofs).
pub fn assemble_state_residual<T: Scalar>(
    space: &FemSpace<T>,
    data: PointData<'_, T>,
    external: &[T],
    u: &[T],
    want_jacobian: bool,
) -> Result<StateAssembly<T>, AssemblyError> {
    let ncell = space.mesh.num_cells();
    let cells: Vec<CellState<T>> = (0..ncell)
        .into_par_iter()
        .map(|c| {
            let ue = space.gather(u, c);
            let mut fe = [T::zero(); 8];
            let mut ke = want_jacobian.then(|| Box::new([[T::zero(); 8]; 8]));
            let mut energy = T::zero();
            let mut resp = Vec::with_capacity(QUAD_PER_CELL);
            for (q, p) in space.quad.cell_points(c).iter().enumerate() {
                let k = c * QUAD_PER_CELL + q;
                let ctx = data.context(k);
                let e = p.strain(&ue);
                let r = ctx.condense(&e).map_err(|source| AssemblyError::Local { quad: k, source })?;
                add_stress_force(p, &r.sigma, &mut fe);
                if let Some(ke) = ke.as_mut() {
                    cell_stiffness(p, &r.tangent, ke);
                }
                energy += p.wdet * ctx.energy_density_at(&e, &r.p);
                resp.push(r);
            }
            let resp: [LocalResponse<T>; QUAD_PER_CELL] = resp.try_into().expect("four points per cell");
            Ok((fe, ke, resp, energy))
        })
        .collect::<Result<_, AssemblyError>>()?;

    let mut internal = vec![T::zero(); space.num_dofs()];
    let mut jac = want_jacobian.then(|| space.empty_matrix());
    let mut responses = Vec::with_capacity(space.num_quad());
    let mut energy = KahanSum::new();
    for (c, (fe, ke, resp, en)) in cells.into_iter().enumerate() {
        space.scatter_vector(&mut internal, c, &fe);
        if let (Some(m), Some(ke)) = (jac.as_mut(), ke) {
            space.scatter_matrix(m, c, &ke);
        }
        responses.extend(resp);
        energy.add(en);
    }
    for (x, f) in u.iter().zip(external) {
        energy.add(-*x * *f);
    }
    let residual = space.free_dofs().iter().map(|&d| internal[d] - external[d]).collect();
    Ok(StateAssembly { residual, jacobian: jac, responses, energy: energy.value() })
}

/// Free-free stiffness from per-point tangents.
pub fn assemble_tangent<T: Scalar>(space: &FemSpace<T>, tangents: &[ConsistentTangent<T>]) -> Csr<T> {
    let blocks: Vec<[[T; 8]; 8]> = (0..space.mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let mut ke = [[T::zero(); 8]; 8];
            for (q, p) in space.quad.cell_points(c).iter().enumerate() {
                cell_stiffness(p, &tangents[c * QUAD_PER_CELL + q], &mut ke);
            }
            ke
        })
        .collect();
    let mut m = space.empty_matrix();
    for (c, ke) in blocks.iter().enumerate() {
        space.scatter_matrix(&mut m, c, ke);
    }
    m
}

/// `int sigma_q . E psi` for every dof, from a per-point symmetric tensor field.
pub fn stress_divergence<T: Scalar>(space: &FemSpace<T>, sigma: &[SymTensor<T>]) -> Vec<T> {
    let mut out = vec![T::zero(); space.num_dofs()];
    for c in 0..space.mesh.num_cells() {
        let mut fe = [T::zero(); 8];
        for (q, p) in space.quad.cell_points(c).iter().enumerate() {
            add_stress_force(p, &sigma[c * QUAD_PER_CELL + q], &mut fe);
        }
        space.scatter_vector(&mut out, c, &fe);
    }
    out
}

/// Linearized step system shared by the adjoint and the forward sensitivity.
///
/// At every point `M = DF(p_i)` is the derivative of the local flow map at
/// the converged `p_i` (with `data.p_prev = p_{i-1}`), and the plastic
/// unknown solves `M q = 2 mu dev E v + source`. Eliminating `q` leaves
/// `K v = load + int 2 mu M^-1 source . E(.)` on the free dofs, with `K`
/// the consistent tangent.
pub fn assemble_linearized_system<T: Scalar>(
    space: &FemSpace<T>,
    data: PointData<'_, T>,
    p: &[DevTensor<T>],
    load: &[T],
    source: &[DevTensor<T>],
) -> Result<LinearizedSystem<T>, AssemblyError> {
    if data.gamma.is_exact() {
        return Err(AssemblyError::Local { quad: 0, source: LocalError::ExactGamma });
    }
    let nq = space.num_quad();
    let mut tangents = Vec::with_capacity(nq);
    let mut extra = Vec::with_capacity(nq);
    for k in 0..nq {
        let ctx = data.context(k);
        let flow = ctx.df_inverse(&p[k]).map_err(|source| AssemblyError::Local { quad: k, source })?;
        let two_mu = T::lit(2.0) * ctx.coeffs.mu;
        extra.push(flow.apply(&source[k]).scale(two_mu).into_sym());
        tangents.push(ConsistentTangent { mu: ctx.coeffs.mu, lambda: ctx.coeffs.lambda, flow });
    }
    let matrix = assemble_tangent(space, &tangents);
    let mut rhs_full = stress_divergence(space, &extra);
    for (r, f) in rhs_full.iter_mut().zip(load) {
        *r += *f;
    }
    Ok(LinearizedSystem { matrix, rhs: space.restrict(&rhs_full), tangents, source: source.to_vec() })
}

#[derive(Debug, Clone)]
pub struct LinearizedSystem<T> {
    pub matrix: Csr<T>,
    pub rhs: Vec<T>,
    pub tangents: Vec<ConsistentTangent<T>>,
    pub source: Vec<DevTensor<T>>,
}

impl<T: Scalar> LinearizedSystem<T> {
    /// `q = M^-1 (2 mu dev E v + source)` at every point.
    pub fn recover_plastic(&self, space: &FemSpace<T>, v: &[T]) -> Vec<DevTensor<T>> {
        space
            .strains(v)
            .iter()
            .zip(&self.tangents)
            .zip(&self.source)
            .map(|((e, t), s)| {
                let two_mu = T::lit(2.0) * t.mu;
                t.flow.apply(&e.dev_project().scale(two_mu).axpy(T::one(), s))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::loads::LoadProgram;
    use crate::fem::mesh::{FacetTag, Mesh, Side, TagRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (FemSpace<f64>, MaterialLaw<f64>) {
        let rules = [
            TagRule::whole(Side::Left, FacetTag::Dirichlet),
            TagRule { side: Side::Right, from: 0.25, to: 0.75, tag: FacetTag::Neumann },
        ];
        let space = FemSpace::new(Mesh::rect(4, 2, 2.0, 1.0, &rules).unwrap());
        let law = MaterialLaw::ersatz([1.0, 1.0, 0.1, 0.05, 1.0], 1e-3).unwrap();
        (space, law)
    }

    fn z_quad(space: &FemSpace<f64>) -> Vec<f64> {
        let z: Vec<f64> = space.mesh.nodes.iter().map(|x| 0.5 + 0.3 * (2.0 * x[0]).cos() * x[1]).collect();
        space.nodal_to_quad(&z)
    }

    #[test]
    fn zero_loads_zero_residual() {
        let (space, law) = setup();
        let zq = z_quad(&space);
        let pp = vec![DevTensor::zeros(2); space.num_quad()];
        let data = PointData { law: &law, z_quad: &zq, p_prev: &pp, gamma: Gamma::Finite(10.0) };
        let nd = space.num_dofs();
        let a = assemble_state_residual(&space, data, &vec![0.0; nd], &vec![0.0; nd], true).unwrap();
        assert!(a.residual.iter().all(|r| *r == 0.0));
        assert_eq!(a.energy, 0.0);
    }

    #[test]
    fn jacobian_is_symmetric_and_matches_residual_differences() {
        let (space, law) = setup();
        let zq = z_quad(&space);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pp: Vec<DevTensor<f64>> =
            (0..space.num_quad()).map(|_| DevTensor::from_coords(2, &[rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02)])).collect();
        let nd = space.num_dofs();
        let u: Vec<f64> = (0..nd).map(|d| if space.is_fixed(d) { 0.0 } else { rng.gen_range(-0.1..0.1) }).collect();
        let step = space.sample_loads(&LoadProgram::ramped_traction([0.0, -0.03], 1.0), 1.0);
        let ell: Vec<f64> = zq.iter().map(|&z| law.ell.eval(z)).collect();
        let ext = space.external_load(&ell, &step);
        for gamma in [Gamma::Finite(30.0), Gamma::Exact] {
            let data = PointData { law: &law, z_quad: &zq, p_prev: &pp, gamma };
            let a = assemble_state_residual(&space, data, &ext, &u, true).unwrap();
            let j = a.jacobian.unwrap();
            assert!(j.asymmetry() <= 1e-10 * j.max_abs());

            let dir: Vec<f64> = (0..space.num_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h = 1e-6;
            let shifted = |s: f64| {
                let mut v = u.clone();
                space.add_free(&mut v, &dir, s);
                assemble_state_residual(&space, data, &ext, &v, false).unwrap()
            };
            let (plus, minus) = (shifted(h), shifted(-h));
            let jd = j.mul_vec(&dir);
            let scale = jd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for k in 0..jd.len() {
                let fd = (plus.residual[k] - minus.residual[k]) / (2.0 * h);
                assert!((fd - jd[k]).abs() <= 1e-5 * scale, "{k}: {fd} vs {}", jd[k]);
            }
            // the residual is the gradient of the incremental energy
            let fd_energy = (plus.energy - minus.energy) / (2.0 * h);
            let proj: f64 = a.residual.iter().zip(&dir).map(|(r, d)| r * d).sum();
            assert!((fd_energy - proj).abs() <= 1e-6 * (1.0 + proj.abs()), "{fd_energy} {proj}");
        }
    }

    #[test]
    fn patch_test_reproduces_linear_elastic_stress() {
        let (space, law) = setup();
        let zq = vec![1.0; space.num_quad()];
        let pp = vec![DevTensor::zeros(2); space.num_quad()];
        // spherical strain keeps the plastic strain at zero
        let u: Vec<f64> = space.mesh.nodes.iter().flat_map(|x| [1e-3 * x[0], 1e-3 * x[1]]).collect();
        let data = PointData { law: &law, z_quad: &zq, p_prev: &pp, gamma: Gamma::Exact };
        let a = assemble_state_residual(&space, data, &vec![0.0; space.num_dofs()], &u, false).unwrap();
        let expect = law.elasticity_apply(1.0, &SymTensor::identity(2).scale(1e-3));
        for r in &a.responses {
            assert!((r.sigma - expect).frobenius_norm() < 1e-15);
            assert_eq!(r.p, DevTensor::zeros(2));
        }
    }

    #[test]
    fn assembly_is_bitwise_deterministic() {
        let (space, law) = setup();
        let zq = z_quad(&space);
        let pp = vec![DevTensor::zeros(2); space.num_quad()];
        let u: Vec<f64> = (0..space.num_dofs()).map(|d| if space.is_fixed(d) { 0.0 } else { (d as f64).sin() * 0.05 }).collect();
        let ext = vec![0.01; space.num_dofs()];
        let data = PointData { law: &law, z_quad: &zq, p_prev: &pp, gamma: Gamma::Finite(100.0) };
        let a = assemble_state_residual(&space, data, &ext, &u, true).unwrap();
        let b = assemble_state_residual(&space, data, &ext, &u, true).unwrap();
        assert_eq!(a.residual, b.residual);
        assert_eq!(a.jacobian.unwrap().val, b.jacobian.unwrap().val);
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
    }
}
