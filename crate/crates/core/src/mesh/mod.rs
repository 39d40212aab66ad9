//! Quadrilateral meshes with boundary markers.
//!
//! Cells list their vertices counter-clockwise. Local edge `e` runs from
//! vertex `e` to vertex `(e + 1) % 4`.

mod channel;
mod io;

use std::collections::HashMap;

pub use channel::{circle_nodes, generate_channel_cylinder, ChannelGeometry};
pub use io::{parse_mesh, read_mesh, write_mesh, write_mesh_to};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Marker {
    Inflow,
    Wall,
    Outflow,
}

impl Marker {
    pub fn name(self) -> &'static str {
        match self {
            Marker::Inflow => "inflow",
            Marker::Wall => "wall",
            Marker::Outflow => "outflow",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inflow" => Some(Marker::Inflow),
            "wall" => Some(Marker::Wall),
            "outflow" => Some(Marker::Outflow),
            _ => None,
        }
    }

    /// Inflow and wall facets carry Dirichlet data.
    pub fn is_dirichlet(self) -> bool {
        !matches!(self, Marker::Outflow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Facet {
    pub cell: usize,
    pub edge: usize,
    pub marker: Marker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub cells: Vec<[usize; 4]>,
    pub facets: Vec<Facet>,
}

/// Bilinear shape functions of the reference square `[0,1]²`.
pub fn bilinear_shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ]
}

fn bilinear_shape_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta), -(1.0 - xi)],
        [1.0 - eta, -xi],
        [eta, xi],
        [-eta, 1.0 - xi],
    ]
}

/// Reference coordinates of the cell vertices.
pub const REF_VERTICES: [Point; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

impl Mesh {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self, cell: usize) -> [Point; 4] {
        self.cells[cell].map(|i| self.nodes[i])
    }

    /// Global node indices `(start, end)` of a local edge.
    pub fn edge_nodes(&self, cell: usize, edge: usize) -> (usize, usize) {
        let c = &self.cells[cell];
        (c[edge], c[(edge + 1) % 4])
    }

    /// Physical point of the bilinear cell map.
    pub fn map_point(&self, cell: usize, xi: f64, eta: f64) -> Point {
        let v = self.vertices(cell);
        let n = bilinear_shape(xi, eta);
        let mut p = [0.0; 2];
        for k in 0..4 {
            p[0] += n[k] * v[k][0];
            p[1] += n[k] * v[k][1];
        }
        p
    }

    /// Jacobian `[[dx/dxi, dx/deta], [dy/dxi, dy/deta]]` of the cell map.
    pub fn jacobian(&self, cell: usize, xi: f64, eta: f64) -> [[f64; 2]; 2] {
        let v = self.vertices(cell);
        let g = bilinear_shape_grad(xi, eta);
        let mut j = [[0.0; 2]; 2];
        for k in 0..4 {
            for a in 0..2 {
                for b in 0..2 {
                    j[a][b] += v[k][a] * g[k][b];
                }
            }
        }
        j
    }

    /// Largest vertex-to-vertex distance of a cell.
    pub fn cell_diameter(&self, cell: usize) -> f64 {
        let v = self.vertices(cell);
        let mut h: f64 = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                h = h.max(dist(v[a], v[b]));
            }
        }
        h
    }

    pub fn max_cell_diameter(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.cell_diameter(c))
            .fold(0.0, f64::max)
    }

    pub fn facet_length(&self, facet: &Facet) -> f64 {
        let (a, b) = self.edge_nodes(facet.cell, facet.edge);
        dist(self.nodes[a], self.nodes[b])
    }

    /// Outward unit normal of a straight boundary edge.
    pub fn facet_normal(&self, facet: &Facet) -> Point {
        let (a, b) = self.edge_nodes(facet.cell, facet.edge);
        edge_normal(self.nodes[a], self.nodes[b])
    }

    /// Maps every undirected edge `(min, max)` to the cells that use it.
    pub fn edge_cells(&self) -> HashMap<(usize, usize), Vec<(usize, usize)>> {
        let mut map: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (c, _) in self.cells.iter().enumerate() {
            for e in 0..4 {
                let (a, b) = self.edge_nodes(c, e);
                map.entry(key(a, b)).or_default().push((c, e));
            }
        }
        map
    }

    /// Checks vertex orientation, connectivity and boundary markers.
    pub fn validate(&self) -> Result<()> {
        for (c, cell) in self.cells.iter().enumerate() {
            if let Some(&i) = cell.iter().find(|&&i| i >= self.nodes.len()) {
                return Err(Error::Validation(format!(
                    "cell {c} references node {i} but only {} nodes exist",
                    self.nodes.len()
                )));
            }
            for (k, r) in REF_VERTICES.iter().enumerate() {
                let j = self.jacobian(c, r[0], r[1]);
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if !(det > 0.0) {
                    return Err(Error::Geometry(format!(
                        "cell {c} has non-positive Jacobian {det:e} at vertex {k}"
                    )));
                }
            }
        }
        let edges = self.edge_cells();
        let mut marked: HashMap<(usize, usize), usize> = HashMap::new();
        for (i, f) in self.facets.iter().enumerate() {
            if f.cell >= self.cells.len() || f.edge > 3 {
                return Err(Error::Validation(format!(
                    "facet {i} references cell {} edge {} which does not exist",
                    f.cell, f.edge
                )));
            }
            let (a, b) = self.edge_nodes(f.cell, f.edge);
            let k = key(a, b);
            if edges[&k].len() != 1 {
                return Err(Error::Validation(format!(
                    "facet {i} marks interior edge ({a}, {b})"
                )));
            }
            if marked.insert(k, i).is_some() {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) carries more than one marker"
                )));
            }
        }
        for (k, users) in &edges {
            if users.len() > 2 {
                return Err(Error::Validation(format!(
                    "edge ({}, {}) is shared by {} cells",
                    k.0,
                    k.1,
                    users.len()
                )));
            }
            if users.len() == 1 && !marked.contains_key(k) {
                return Err(Error::Validation(format!(
                    "boundary edge ({}, {}) has no marker",
                    k.0, k.1
                )));
            }
        }
        Ok(())
    }

    /// Splits every cell into four, placing new nodes at edge midpoints and
    /// at the bilinear image of the cell centre.
    pub fn refine_uniform(&self) -> Mesh {
        let mut nodes = self.nodes.clone();
        let mut edge_mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        let mut facets = Vec::with_capacity(2 * self.facets.len());
        let markers: HashMap<(usize, usize), Marker> = self
            .facets
            .iter()
            .map(|f| {
                let (a, b) = self.edge_nodes(f.cell, f.edge);
                (key(a, b), f.marker)
            })
            .collect();
        for (c, cell) in self.cells.iter().enumerate() {
            let mut mids = [0usize; 4];
            for e in 0..4 {
                let (a, b) = self.edge_nodes(c, e);
                mids[e] = *edge_mid.entry(key(a, b)).or_insert_with(|| {
                    let (pa, pb) = (self.nodes[a], self.nodes[b]);
                    nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    nodes.len() - 1
                });
            }
            nodes.push(self.map_point(c, 0.5, 0.5));
            let centre = nodes.len() - 1;
            let base = cells.len();
            // child k keeps parent vertex k at its local vertex k
            cells.push([cell[0], mids[0], centre, mids[3]]);
            cells.push([mids[0], cell[1], mids[1], centre]);
            cells.push([centre, mids[1], cell[2], mids[2]]);
            cells.push([mids[3], centre, mids[2], cell[3]]);
            for e in 0..4 {
                let (a, b) = self.edge_nodes(c, e);
                if let Some(&m) = markers.get(&key(a, b)) {
                    // edge e is split between children e and e + 1
                    facets.push(Facet { cell: base + e, edge: e, marker: m });
                    facets.push(Facet { cell: base + (e + 1) % 4, edge: e, marker: m });
                }
            }
        }
        Mesh { nodes, cells, facets }
    }

    /// Sum of `length · normal` over all boundary facets.
    pub fn boundary_normal_sum(&self) -> Point {
        let mut s = [0.0; 2];
        for f in &self.facets {
            let n = self.facet_normal(f);
            let l = self.facet_length(f);
            s[0] += l * n[0];
            s[1] += l * n[1];
        }
        s
    }

    /// True if the two meshes cover the same cells up to node numbering:
    /// same cell count and matching sorted cell centroids and facet midpoints.
    pub fn geometrically_equal(&self, other: &Mesh, tol: f64) -> bool {
        if self.cells.len() != other.cells.len() || self.facets.len() != other.facets.len() {
            return false;
        }
        let centroids = |m: &Mesh| {
            let mut v: Vec<Point> = (0..m.num_cells()).map(|c| m.map_point(c, 0.5, 0.5)).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        let facet_mids = |m: &Mesh| {
            let mut v: Vec<(Point, Marker)> = m
                .facets
                .iter()
                .map(|f| {
                    let (a, b) = m.edge_nodes(f.cell, f.edge);
                    let (pa, pb) = (m.nodes[a], m.nodes[b]);
                    ([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])], f.marker)
                })
                .collect();
            v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            v
        };
        let close = |a: &Point, b: &Point| (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol;
        let (ca, cb) = (centroids(self), centroids(other));
        let (fa, fb) = (facet_mids(self), facet_mids(other));
        ca.iter().zip(&cb).all(|(a, b)| close(a, b))
            && fa.iter().zip(&fb).all(|(a, b)| close(&a.0, &b.0) && a.1 == b.1)
    }
}

pub(crate) fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Outward normal of edge `a → b` of a counter-clockwise cell.
pub fn edge_normal(a: Point, b: Point) -> Point {
    let t = [b[0] - a[0], b[1] - a[1]];
    let l = (t[0] * t[0] + t[1] * t[1]).sqrt();
    [t[1] / l, -t[0] / l]
}

/// Builds the facet list of a cell complex, assigning markers by `classify`
/// applied to the two endpoints of every boundary edge.
pub(crate) fn mark_boundary<F>(nodes: &[Point], cells: &[[usize; 4]], classify: F) -> Vec<Facet>
where
    F: Fn(Point, Point) -> Marker,
{
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for cell in cells {
        for e in 0..4 {
            *count.entry(key(cell[e], cell[(e + 1) % 4])).or_default() += 1;
        }
    }
    let mut facets = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        for e in 0..4 {
            let (a, b) = (cell[e], cell[(e + 1) % 4]);
            if count[&key(a, b)] == 1 {
                facets.push(Facet { cell: c, edge: e, marker: classify(nodes[a], nodes[b]) });
            }
        }
    }
    facets
}

/// Structured `n × n` mesh of the unit square with every side marked wall.
pub fn generate_unit_square(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::Argument("unit square needs at least one cell per side".into()));
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let facets = mark_boundary(&nodes, &cells, |_, _| Marker::Wall);
    Ok(Mesh { nodes, cells, facets })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = generate_unit_square(2).unwrap();
        assert_eq!(m.cells.len(), 4);
        assert_eq!(m.nodes.len(), 9);
        assert_eq!(m.facets.len(), 8);
        assert!((m.max_cell_diameter() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        m.validate().unwrap();
        assert!(generate_unit_square(0).is_err());
    }

    #[test]
    fn refinement_matches_finer_generator() {
        let coarse = generate_unit_square(2).unwrap().refine_uniform();
        coarse.validate().unwrap();
        let fine = generate_unit_square(4).unwrap();
        assert!(coarse.geometrically_equal(&fine, 1e-15));
        assert_eq!(coarse.max_cell_diameter(), fine.max_cell_diameter());
    }

    #[test]
    fn normals_point_outward() {
        let m = generate_unit_square(3).unwrap();
        for f in &m.facets {
            let n = m.facet_normal(f);
            let (a, b) = m.edge_nodes(f.cell, f.edge);
            let mid = [
                0.5 * (m.nodes[a][0] + m.nodes[b][0]),
                0.5 * (m.nodes[a][1] + m.nodes[b][1]),
            ];
            let c = m.map_point(f.cell, 0.5, 0.5);
            assert!(n[0] * (mid[0] - c[0]) + n[1] * (mid[1] - c[1]) > 0.0);
        }
        let s = m.boundary_normal_sum();
        assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
    }

    #[test]
    fn validation_catches_bad_markers() {
        let mut m = generate_unit_square(2).unwrap();
        m.facets.pop();
        assert!(matches!(m.validate(), Err(Error::Validation(_))));
        let mut m = generate_unit_square(2).unwrap();
        // edge 1 of cell 0 is interior
        m.facets.push(Facet { cell: 0, edge: 1, marker: Marker::Wall });
        assert!(matches!(m.validate(), Err(Error::Validation(_))));
    }
}
