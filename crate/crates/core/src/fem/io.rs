//! Legacy ASCII VTK unstructured grids and CSV tables.
//!
//! Every float is written with 17 significant digits.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::scalar::Scalar;

use super::mesh::Mesh;
use super::quadrature::QUAD_PER_CELL;

/// `x` with 17 significant digits; integral values below `1e15` print exactly.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

enum Field {
    Scalar(String, Vec<f64>),
    Vector(String, Vec<[f64; 2]>),
}

fn write_field(out: &mut String, f: &Field) {
    match f {
        Field::Scalar(name, v) => {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for x in v {
                let _ = writeln!(out, "{}", fmt_f64(*x));
            }
        }
        Field::Vector(name, v) => {
            let _ = writeln!(out, "VECTORS {name} double");
            for x in v {
                let _ = writeln!(out, "{} {} 0", fmt_f64(x[0]), fmt_f64(x[1]));
            }
        }
    }
}

/// Quadrilateral mesh with point and cell fields.
pub struct VtkFile {
    title: String,
    points: Vec<[f64; 2]>,
    cells: Vec<[usize; 4]>,
    point_fields: Vec<Field>,
    cell_fields: Vec<Field>,
}

impl VtkFile {
    pub fn new<T: Scalar>(mesh: &Mesh<T>, title: &str) -> Self {
        Self {
            title: title.replace('\n', " "),
            points: mesh.nodes.iter().map(|p| [p[0].to_f64_lossy(), p[1].to_f64_lossy()]).collect(),
            cells: mesh.cells.clone(),
            point_fields: Vec::new(),
            cell_fields: Vec::new(),
        }
    }

    pub fn point_scalar<T: Scalar>(mut self, name: &str, v: &[T]) -> Self {
        assert_eq!(v.len(), self.points.len(), "point field {name}");
        self.point_fields.push(Field::Scalar(name.into(), v.iter().map(|x| x.to_f64_lossy()).collect()));
        self
    }

    /// Interleaved `[x0, y0, x1, y1, ...]` nodal vector.
    pub fn point_vector<T: Scalar>(mut self, name: &str, v: &[T]) -> Self {
        assert_eq!(v.len(), 2 * self.points.len(), "point field {name}");
        let vals = v.chunks(2).map(|c| [c[0].to_f64_lossy(), c[1].to_f64_lossy()]).collect();
        self.point_fields.push(Field::Vector(name.into(), vals));
        self
    }

    pub fn cell_scalar<T: Scalar>(mut self, name: &str, v: &[T]) -> Self {
        assert_eq!(v.len(), self.cells.len(), "cell field {name}");
        self.cell_fields.push(Field::Scalar(name.into(), v.iter().map(|x| x.to_f64_lossy()).collect()));
        self
    }

    /// Adds a quadrature field as cell averages and as point averages of adjacent cells.
    pub fn quad_scalar<T: Scalar>(self, name: &str, quad: &[T]) -> Self {
        let cell = quad_to_cell(quad);
        let point = cell_to_point(self.points.len(), &self.cells, &cell);
        self.cell_scalar(name, &cell).point_scalar(name, &point)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# vtk DataFile Version 3.0\n{}\nASCII\nDATASET UNSTRUCTURED_GRID", self.title);
        let _ = writeln!(out, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(out, "{} {} 0", fmt_f64(p[0]), fmt_f64(p[1]));
        }
        let _ = writeln!(out, "CELLS {} {}", self.cells.len(), 5 * self.cells.len());
        for c in &self.cells {
            let _ = writeln!(out, "4 {} {} {} {}", c[0], c[1], c[2], c[3]);
        }
        let _ = writeln!(out, "CELL_TYPES {}", self.cells.len());
        for _ in &self.cells {
            out.push_str("9\n");
        }
        if !self.point_fields.is_empty() {
            let _ = writeln!(out, "POINT_DATA {}", self.points.len());
            self.point_fields.iter().for_each(|f| write_field(&mut out, f));
        }
        if !self.cell_fields.is_empty() {
            let _ = writeln!(out, "CELL_DATA {}", self.cells.len());
            self.cell_fields.iter().for_each(|f| write_field(&mut out, f));
        }
        out
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}

/// Mean over the quadrature points of each cell.
pub fn quad_to_cell<T: Scalar>(quad: &[T]) -> Vec<T> {
    let w = T::lit(1.0 / QUAD_PER_CELL as f64);
    quad.chunks(QUAD_PER_CELL).map(|c| c.iter().copied().sum::<T>() * w).collect()
}

fn cell_to_point<T: Scalar>(num_points: usize, cells: &[[usize; 4]], cell: &[T]) -> Vec<T> {
    let mut sum = vec![T::zero(); num_points];
    let mut count = vec![0usize; num_points];
    for (c, nodes) in cells.iter().enumerate() {
        for &n in nodes {
            sum[n] += cell[c];
            count[n] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &n)| if n == 0 { T::zero() } else { *s / T::from_usize_lossy(n) }).collect()
}

/// Column-labelled numeric table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        Self { title: title.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width in table {}", self.title);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::{FacetTag, Side, TagRule};

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 42.0, -7.0, 1e15] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(fmt_f64(-7.0), "-7");
        assert_eq!(fmt_f64(1e15), "1.0000000000000000e15");
    }

    #[test]
    fn vtk_layout() {
        let m = Mesh::rect(2, 1, 2.0, 1.0, &[TagRule::whole(Side::Left, FacetTag::Dirichlet)]).unwrap();
        let z = vec![0.5; 6];
        let u = vec![0.0; 12];
        let q: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let s = VtkFile::new(&m, "t").point_vector("u", &u).point_scalar("z", &z).quad_scalar("p_norm", &q).render();
        assert!(s.starts_with("# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 6 double\n"));
        assert!(s.contains("CELLS 2 10\n4 0 1 4 3\n4 1 2 5 4\n"));
        assert!(s.contains("CELL_TYPES 2\n9\n9\n"));
        assert!(s.contains("POINT_DATA 6\nVECTORS u double\n"));
        assert!(s.contains("CELL_DATA 2\nSCALARS p_norm double 1\nLOOKUP_TABLE default\n1.5000000000000000e0\n5.5000000000000000e0\n"));
    }

    #[test]
    fn csv_table() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec![1.0, 0.0]);
        t.push(vec![0.25, -3.0]);
        assert_eq!(t.to_csv(), "a,b\n1,0\n2.5000000000000000e-1,-3\n");
        assert_eq!(t.column("b"), Some(vec![0.0, -3.0]));
        assert_eq!(t.column("c"), None);
    }
}
