//! Q1 vector displacement space on a [`Mesh`]: dof numbering, Dirichlet
//! handling, interpolation to quadrature points and load vectors.

use crate::scalar::Scalar;
use crate::tensor::SymTensor;

use super::linalg::Csr;
use super::loads::{LoadProgram, LoadStep};
use super::mesh::{FacetTag, Mesh};
use super::quadrature::{QuadCache, QUAD_PER_CELL};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct FemSpace<T> {
    pub mesh: Mesh<T>,
    pub quad: QuadCache<T>,
    fixed: Vec<bool>,
    free: Vec<usize>,
    pattern: Csr<T>,
    cell_slots: Vec<[usize; 64]>,
}

impl<T: Scalar> FemSpace<T> {
    pub fn new(mesh: Mesh<T>) -> Self {
        let quad = QuadCache::new(&mesh);
        let ndof = mesh.num_dofs();
        let mut fixed = vec![false; ndof];
        for n in mesh.dirichlet_nodes() {
            fixed[2 * n] = true;
            fixed[2 * n + 1] = true;
        }
        let free: Vec<usize> = (0..ndof).filter(|&d| !fixed[d]).collect();
        let mut free_index = vec![NONE; ndof];
        for (k, &d) in free.iter().enumerate() {
            free_index[d] = k;
        }
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); free.len()];
        for c in 0..mesh.num_cells() {
            let dofs = cell_dofs(&mesh, c);
            for &r in &dofs {
                if free_index[r] == NONE {
                    continue;
                }
                for &s in &dofs {
                    if free_index[s] != NONE {
                        rows[free_index[r]].push(free_index[s]);
                    }
                }
            }
        }
        let pattern = Csr::from_pattern(rows);
        let cell_slots = (0..mesh.num_cells())
            .map(|c| {
                let dofs = cell_dofs(&mesh, c);
                let mut slots = [NONE; 64];
                for (a, &r) in dofs.iter().enumerate() {
                    for (b, &s) in dofs.iter().enumerate() {
                        if free_index[r] != NONE && free_index[s] != NONE {
                            slots[a * 8 + b] = pattern.slot(free_index[r], free_index[s]).expect("pattern entry");
                        }
                    }
                }
                slots
            })
            .collect();
        Self { mesh, quad, fixed, free, pattern, cell_slots }
    }

    pub fn num_dofs(&self) -> usize {
        self.fixed.len()
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn num_quad(&self) -> usize {
        self.quad.len()
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.fixed[dof]
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn cell_dofs(&self, c: usize) -> [usize; 8] {
        cell_dofs(&self.mesh, c)
    }

    pub fn gather(&self, u: &[T], c: usize) -> [T; 8] {
        self.cell_dofs(c).map(|d| u[d])
    }

    pub fn gather_nodal(&self, z: &[T], c: usize) -> [T; 4] {
        self.mesh.cells[c].map(|n| z[n])
    }

    /// Full-dof vector to free-dof vector.
    pub fn restrict(&self, full: &[T]) -> Vec<T> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Adds a free-dof vector onto a full-dof vector.
    pub fn add_free(&self, full: &mut [T], free: &[T], scale: T) {
        for (&d, &v) in self.free.iter().zip(free) {
            full[d] += scale * v;
        }
    }

    /// Full-dof vector equal to `free` on free dofs and to `fixed_values` on Dirichlet dofs.
    pub fn extend(&self, free: &[T], fixed_values: &[T]) -> Vec<T> {
        let mut out: Vec<T> = (0..self.num_dofs()).map(|d| if self.fixed[d] { fixed_values[d] } else { T::zero() }).collect();
        self.add_free(&mut out, free, T::one());
        out
    }

    /// Zero-valued matrix with the free-free sparsity of the stiffness.
    pub fn empty_matrix(&self) -> Csr<T> {
        self.pattern.clone()
    }

    pub fn scatter_matrix(&self, mat: &mut Csr<T>, c: usize, ke: &[[T; 8]; 8]) {
        let slots = &self.cell_slots[c];
        for a in 0..8 {
            for b in 0..8 {
                let s = slots[a * 8 + b];
                if s != NONE {
                    mat.val[s] += ke[a][b];
                }
            }
        }
    }

    pub fn scatter_vector(&self, full: &mut [T], c: usize, fe: &[T; 8]) {
        for (d, v) in self.cell_dofs(c).into_iter().zip(fe) {
            full[d] += *v;
        }
    }

    /// Nodal scalar field interpolated to all quadrature points.
    pub fn nodal_to_quad(&self, z: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_quad());
        for c in 0..self.mesh.num_cells() {
            let ze = self.gather_nodal(z, c);
            out.extend(self.quad.cell_points(c).iter().map(|p| p.interpolate(ze)));
        }
        out
    }

    /// Displacement (dof vector) at all quadrature points.
    pub fn vector_to_quad(&self, u: &[T]) -> Vec<[T; 2]> {
        let mut out = Vec::with_capacity(self.num_quad());
        for c in 0..self.mesh.num_cells() {
            let ue = self.gather(u, c);
            for p in self.quad.cell_points(c) {
                let mut v = [T::zero(); 2];
                for a in 0..4 {
                    v[0] += p.shape[a] * ue[2 * a];
                    v[1] += p.shape[a] * ue[2 * a + 1];
                }
                out.push(v);
            }
        }
        out
    }

    /// Symmetric gradient of `u` at all quadrature points.
    pub fn strains(&self, u: &[T]) -> Vec<SymTensor<T>> {
        let mut out = Vec::with_capacity(self.num_quad());
        for c in 0..self.mesh.num_cells() {
            let ue = self.gather(u, c);
            out.extend(self.quad.cell_points(c).iter().map(|p| p.strain(&ue)));
        }
        out
    }

    /// Node coordinates of Dirichlet dofs and of all quadrature points, for load validation.
    pub fn sample_points(&self) -> Vec<[T; 2]> {
        let mut pts = self.mesh.nodes.clone();
        pts.extend(self.quad.points().iter().map(|p| p.x));
        pts
    }

    pub fn sample_loads(&self, loads: &LoadProgram<T>, t: T) -> LoadStep<T> {
        let f_quad = self.quad.points().iter().map(|p| (loads.f)(p.x, t)).collect();
        let g_facet = self
            .mesh
            .facets
            .iter()
            .enumerate()
            .map(|(fi, f)| {
                if f.tag == FacetTag::Neumann {
                    self.quad.facet_points(fi).map(|p| (loads.g)(p.x, t))
                } else {
                    [[T::zero(); 2]; 2]
                }
            })
            .collect();
        let mut w = vec![T::zero(); self.num_dofs()];
        for (n, x) in self.mesh.nodes.iter().enumerate() {
            if self.fixed[2 * n] {
                let v = (loads.w)(*x, t);
                w[2 * n] = v[0];
                w[2 * n + 1] = v[1];
            }
        }
        LoadStep { t, f_quad, g_facet, w }
    }

    /// `int coef(x) f . psi dx` for every dof, with `coef` given per quadrature point.
    pub fn body_load(&self, coef: &[T], f_quad: &[[T; 2]]) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_dofs()];
        for c in 0..self.mesh.num_cells() {
            let mut fe = [T::zero(); 8];
            for (q, p) in self.quad.cell_points(c).iter().enumerate() {
                let k = c * QUAD_PER_CELL + q;
                let s = p.wdet * coef[k];
                for a in 0..4 {
                    fe[2 * a] += s * p.shape[a] * f_quad[k][0];
                    fe[2 * a + 1] += s * p.shape[a] * f_quad[k][1];
                }
            }
            self.scatter_vector(&mut out, c, &fe);
        }
        out
    }

    /// `int_{Gamma_N} g . psi` for every dof.
    pub fn traction_load(&self, g_facet: &[[[T; 2]; 2]]) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_dofs()];
        for (fi, f) in self.mesh.facets.iter().enumerate() {
            if f.tag != FacetTag::Neumann {
                continue;
            }
            for (p, g) in self.quad.facet_points(fi).iter().zip(&g_facet[fi]) {
                for (a, &node) in f.nodes.iter().enumerate() {
                    out[2 * node] += p.weight * p.shape[a] * g[0];
                    out[2 * node + 1] += p.weight * p.shape[a] * g[1];
                }
            }
        }
        out
    }

    /// `int ell(z) f . psi + int_{Gamma_N} g . psi` for every dof.
    pub fn external_load(&self, ell_quad: &[T], step: &LoadStep<T>) -> Vec<T> {
        let mut out = self.body_load(ell_quad, &step.f_quad);
        for (o, t) in out.iter_mut().zip(self.traction_load(&step.g_facet)) {
            *o += t;
        }
        out
    }

    /// `int phi(x) psi_a dx` style scatter: nodal functional from per-quad densities.
    pub fn scalar_functional(&self, density: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.mesh.num_nodes()];
        for c in 0..self.mesh.num_cells() {
            let nodes = self.mesh.cells[c];
            for (q, p) in self.quad.cell_points(c).iter().enumerate() {
                let s = p.wdet * density[c * QUAD_PER_CELL + q];
                for a in 0..4 {
                    out[nodes[a]] += s * p.shape[a];
                }
            }
        }
        out
    }

    /// `sum_q w_q v_q`.
    pub fn integrate(&self, values: &[T]) -> T {
        self.quad.points().iter().zip(values).map(|(p, v)| p.wdet * *v).sum()
    }
}

fn cell_dofs<T: Scalar>(mesh: &Mesh<T>, c: usize) -> [usize; 8] {
    let n = mesh.cells[c];
    [2 * n[0], 2 * n[0] + 1, 2 * n[1], 2 * n[1] + 1, 2 * n[2], 2 * n[2] + 1, 2 * n[3], 2 * n[3] + 1]
}
