//! 2x2 Gauss rule on Q1 cells and 2-point rule on boundary facets, with
//! shape functions and gradients precomputed per point.

use crate::scalar::Scalar;
use crate::tensor::SymTensor;

use super::mesh::Mesh;

pub const QUAD_PER_CELL: usize = 4;

/// One cell quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint<T> {
    pub shape: [T; 4],
    /// `d N_a / d x_k` as `grad[a][k]`.
    pub grad: [[T; 2]; 4],
    /// Weight times Jacobian determinant.
    pub wdet: T,
    pub x: [T; 2],
}

impl<T: Scalar> QuadPoint<T> {
    #[inline]
    pub fn interpolate(&self, nodal: [T; 4]) -> T {
        (0..4).map(|a| self.shape[a] * nodal[a]).sum()
    }

    #[inline]
    pub fn gradient(&self, nodal: [T; 4]) -> [T; 2] {
        let mut g = [T::zero(); 2];
        for a in 0..4 {
            g[0] += self.grad[a][0] * nodal[a];
            g[1] += self.grad[a][1] * nodal[a];
        }
        g
    }

    /// Symmetric gradient of a Q1 vector field from the cell's 8 dofs
    /// (interleaved per node).
    #[inline]
    pub fn strain(&self, ue: &[T; 8]) -> SymTensor<T> {
        let (mut e00, mut e11, mut e01) = (T::zero(), T::zero(), T::zero());
        for a in 0..4 {
            let [gx, gy] = self.grad[a];
            let (ux, uy) = (ue[2 * a], ue[2 * a + 1]);
            e00 += gx * ux;
            e11 += gy * uy;
            e01 += T::lit(0.5) * (gy * ux + gx * uy);
        }
        SymTensor::from_upper(2, |i, j| match (i, j) {
            (0, 0) => e00,
            (1, 1) => e11,
            _ => e01,
        })
    }

    /// Mandel B-matrix: row `r` of the Mandel strain against the 8 cell dofs.
    #[inline]
    pub fn b_matrix(&self) -> [[T; 8]; 3] {
        let r2 = T::SQRT_2().recip();
        let mut b = [[T::zero(); 8]; 3];
        for a in 0..4 {
            let [gx, gy] = self.grad[a];
            b[0][2 * a] = gx;
            b[1][2 * a + 1] = gy;
            b[2][2 * a] = gy * r2;
            b[2][2 * a + 1] = gx * r2;
        }
        b
    }
}

/// Facet quadrature point: shape values of the two facet end nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetPoint<T> {
    pub shape: [T; 2],
    pub weight: T,
    pub x: [T; 2],
}

#[derive(Debug, Clone)]
pub struct QuadCache<T> {
    points: Vec<QuadPoint<T>>,
    facet_points: Vec<[FacetPoint<T>; 2]>,
}

fn gauss_pair<T: Scalar>() -> [T; 2] {
    let g = T::lit(3.0).sqrt().recip();
    [-g, g]
}

impl<T: Scalar> QuadCache<T> {
    pub fn new(mesh: &Mesh<T>) -> Self {
        let gp = gauss_pair::<T>();
        let quarter = T::lit(0.25);
        let ref_nodes = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]].map(|p| p.map(T::lit));
        let order = [(0, 0), (1, 0), (1, 1), (0, 1)];
        let mut points = Vec::with_capacity(mesh.num_cells() * QUAD_PER_CELL);
        for c in 0..mesh.num_cells() {
            let xs = mesh.cell_coords(c);
            for &(qi, qj) in &order {
                let (xi, eta) = (gp[qi], gp[qj]);
                let mut shape = [T::zero(); 4];
                let mut dref = [[T::zero(); 2]; 4];
                for a in 0..4 {
                    let [sa, ta] = ref_nodes[a];
                    shape[a] = quarter * (T::one() + sa * xi) * (T::one() + ta * eta);
                    dref[a] = [quarter * sa * (T::one() + ta * eta), quarter * ta * (T::one() + sa * xi)];
                }
                let mut jac = [[T::zero(); 2]; 2];
                let mut x = [T::zero(); 2];
                for a in 0..4 {
                    for k in 0..2 {
                        x[k] += shape[a] * xs[a][k];
                        for l in 0..2 {
                            jac[k][l] += xs[a][k] * dref[a][l];
                        }
                    }
                }
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
                let grad = dref.map(|[dxi, deta]| {
                    [dxi * inv[0][0] + deta * inv[1][0], dxi * inv[0][1] + deta * inv[1][1]]
                });
                points.push(QuadPoint { shape, grad, wdet: det, x });
            }
        }
        let facet_points = mesh
            .facets
            .iter()
            .map(|f| {
                let (a, b) = (mesh.nodes[f.nodes[0]], mesh.nodes[f.nodes[1]]);
                gp.map(|s| {
                    let t = T::lit(0.5) * (T::one() + s);
                    FacetPoint {
                        shape: [T::one() - t, t],
                        weight: T::lit(0.5) * f.length,
                        x: [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
                    }
                })
            })
            .collect();
        Self { points, facet_points }
    }

    #[inline]
    pub fn point(&self, cell: usize, q: usize) -> &QuadPoint<T> {
        &self.points[cell * QUAD_PER_CELL + q]
    }

    #[inline]
    pub fn cell_points(&self, cell: usize) -> &[QuadPoint<T>] {
        &self.points[cell * QUAD_PER_CELL..(cell + 1) * QUAD_PER_CELL]
    }

    pub fn points(&self) -> &[QuadPoint<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn facet_points(&self, facet: usize) -> &[FacetPoint<T>; 2] {
        &self.facet_points[facet]
    }

    pub fn weights(&self) -> Vec<T> {
        self.points.iter().map(|p| p.wdet).collect()
    }
}
