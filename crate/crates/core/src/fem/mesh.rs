//! Structured rectangular Q1 meshes with tagged boundary facets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh needs at least one cell per direction, got {nx}x{ny}")]
    Empty { nx: usize, ny: usize },
    #[error("mesh extent must be positive, got {lx} x {ly}")]
    BadExtent { lx: f64, ly: f64 },
    #[error("tag rule #{0} matches no boundary facet")]
    UnusedRule(usize),
    #[error("facet {facet} is claimed by tag rules #{first} and #{second}")]
    Overlap { facet: usize, first: usize, second: usize },
    #[error("no Dirichlet facet: the clamped boundary must have positive length")]
    NoDirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetTag {
    Dirichlet,
    Neumann,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// Tags the facets of `side` whose midpoint coordinate along the side lies in `[from, to]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagRule {
    pub side: Side,
    pub from: f64,
    pub to: f64,
    pub tag: FacetTag,
}

impl TagRule {
    pub fn whole(side: Side, tag: FacetTag) -> Self {
        Self { side, from: f64::NEG_INFINITY, to: f64::INFINITY, tag }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet<T> {
    pub nodes: [usize; 2],
    pub side: Side,
    pub tag: FacetTag,
    pub length: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    pub nx: usize,
    pub ny: usize,
    pub lx: T,
    pub ly: T,
    pub nodes: Vec<[T; 2]>,
    /// Counter-clockwise node lists.
    pub cells: Vec<[usize; 4]>,
    pub facets: Vec<Facet<T>>,
}

impl<T: Scalar> Mesh<T> {
    pub fn rect(nx: usize, ny: usize, lx: T, ly: T, rules: &[TagRule]) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::Empty { nx, ny });
        }
        if !(lx > T::zero() && ly > T::zero() && lx.is_finite() && ly.is_finite()) {
            return Err(MeshError::BadExtent { lx: lx.to_f64_lossy(), ly: ly.to_f64_lossy() });
        }
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        let hx = lx / T::from_usize_lossy(nx);
        let hy = ly / T::from_usize_lossy(ny);
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([T::from_usize_lossy(i) * hx, T::from_usize_lossy(j) * hy]);
            }
        }
        let mut cells = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                cells.push([node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
            }
        }
        let mut facets = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            facets.push(Facet { nodes: [node(i, 0), node(i + 1, 0)], side: Side::Bottom, tag: FacetTag::Free, length: hx });
        }
        for j in 0..ny {
            facets.push(Facet { nodes: [node(nx, j), node(nx, j + 1)], side: Side::Right, tag: FacetTag::Free, length: hy });
        }
        for i in (0..nx).rev() {
            facets.push(Facet { nodes: [node(i + 1, ny), node(i, ny)], side: Side::Top, tag: FacetTag::Free, length: hx });
        }
        for j in (0..ny).rev() {
            facets.push(Facet { nodes: [node(0, j + 1), node(0, j)], side: Side::Left, tag: FacetTag::Free, length: hy });
        }
        let mut owner: Vec<Option<usize>> = vec![None; facets.len()];
        for (r, rule) in rules.iter().enumerate() {
            let mut hit = false;
            for (fi, f) in facets.iter_mut().enumerate() {
                if f.side != rule.side {
                    continue;
                }
                let [a, b] = f.nodes;
                let along = |p: [T; 2]| match f.side {
                    Side::Left | Side::Right => p[1],
                    Side::Bottom | Side::Top => p[0],
                };
                let mid = (T::lit(0.5) * (along(nodes[a]) + along(nodes[b]))).to_f64_lossy();
                if mid < rule.from || mid > rule.to {
                    continue;
                }
                if let Some(first) = owner[fi] {
                    return Err(MeshError::Overlap { facet: fi, first, second: r });
                }
                owner[fi] = Some(r);
                f.tag = rule.tag;
                hit = true;
            }
            if !hit {
                return Err(MeshError::UnusedRule(r));
            }
        }
        if !facets.iter().any(|f| f.tag == FacetTag::Dirichlet) {
            return Err(MeshError::NoDirichlet);
        }
        Ok(Self { nx, ny, lx, ly, nodes, cells, facets })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn area(&self) -> T {
        self.lx * self.ly
    }

    pub fn cell_coords(&self, c: usize) -> [[T; 2]; 4] {
        self.cells[c].map(|n| self.nodes[n])
    }

    pub fn facets_tagged(&self, tag: FacetTag) -> impl Iterator<Item = (usize, &Facet<T>)> {
        self.facets.iter().enumerate().filter(move |(_, f)| f.tag == tag)
    }

    /// Nodes touching a Dirichlet facet, sorted.
    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        let mut on = vec![false; self.num_nodes()];
        for (_, f) in self.facets_tagged(FacetTag::Dirichlet) {
            on[f.nodes[0]] = true;
            on[f.nodes[1]] = true;
        }
        (0..on.len()).filter(|&i| on[i]).collect()
    }

    pub fn boundary_length(&self) -> T {
        self.facets.iter().map(|f| f.length).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clamped_left() -> Vec<TagRule> {
        vec![TagRule::whole(Side::Left, FacetTag::Dirichlet)]
    }

    #[test]
    fn single_cell() {
        let m = Mesh::rect(1, 1, 1.0, 1.0, &clamped_left()).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.num_cells(), 1);
        assert_eq!(m.area(), 1.0);
        assert_eq!(m.cells[0], [0, 1, 3, 2]);
    }

    #[test]
    fn left_edge_counts() {
        let m = Mesh::rect(4, 4, 1.0, 1.0, &clamped_left()).unwrap();
        assert_eq!(m.facets_tagged(FacetTag::Dirichlet).count(), 4);
        assert_eq!(m.dirichlet_nodes(), vec![0, 5, 10, 15, 20]);
    }

    #[test]
    fn perimeter() {
        let m = Mesh::<f64>::rect(5, 3, 2.0, 0.75, &clamped_left()).unwrap();
        assert!((m.boundary_length() - 2.0 * 2.75).abs() < 1e-14);
    }

    #[test]
    fn cells_are_counter_clockwise() {
        let m = Mesh::rect(3, 2, 1.5, 1.0, &clamped_left()).unwrap();
        for c in 0..m.num_cells() {
            let x = m.cell_coords(c);
            let mut twice_area = 0.0;
            for k in 0..4 {
                let (a, b) = (x[k], x[(k + 1) % 4]);
                twice_area += a[0] * b[1] - b[0] * a[1];
            }
            assert!(twice_area > 0.0);
        }
    }

    #[test]
    fn partial_segment_rule() {
        let rules = [
            TagRule::whole(Side::Left, FacetTag::Dirichlet),
            TagRule { side: Side::Right, from: 0.25, to: 0.75, tag: FacetTag::Neumann },
        ];
        let m = Mesh::rect(8, 4, 2.0, 1.0, &rules).unwrap();
        let neu: Vec<_> = m.facets_tagged(FacetTag::Neumann).collect();
        assert_eq!(neu.len(), 2);
        let len: f64 = neu.iter().map(|(_, f)| f.length).sum();
        assert!((len - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rule_errors() {
        assert_eq!(Mesh::<f64>::rect(2, 2, 1.0, 1.0, &[]), Err(MeshError::NoDirichlet));
        let unused = [
            TagRule::whole(Side::Left, FacetTag::Dirichlet),
            TagRule { side: Side::Top, from: 5.0, to: 6.0, tag: FacetTag::Neumann },
        ];
        assert_eq!(Mesh::<f64>::rect(2, 2, 1.0, 1.0, &unused), Err(MeshError::UnusedRule(1)));
        let overlap = [
            TagRule::whole(Side::Left, FacetTag::Dirichlet),
            TagRule { side: Side::Left, from: 0.0, to: 0.5, tag: FacetTag::Neumann },
        ];
        assert!(matches!(Mesh::<f64>::rect(2, 2, 1.0, 1.0, &overlap), Err(MeshError::Overlap { .. })));
        assert!(matches!(Mesh::<f64>::rect(0, 2, 1.0, 1.0, &[]), Err(MeshError::Empty { .. })));
    }
}
