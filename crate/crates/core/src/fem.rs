//! Q_r Lagrange spaces on quadrilaterals, Taylor–Hood pairs and tabulated
//! quadrature caches.
//!
//! Local shape function `k = j (r + 1) + i` is the tensor product of the 1D
//! Lagrange polynomials `l_i(ξ) l_j(η)`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::{key, Facet, Marker, Mesh, Point};
use crate::quadrature::{gauss_legendre_unit, gauss_lobatto_nodes_unit};

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceElement {
    pub degree: usize,
    /// 1D interpolation nodes on `[0, 1]`, ascending.
    pub nodes: Vec<f64>,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1, "Lagrange element needs degree ≥ 1");
        let nodes = if degree <= 4 {
            (0..=degree).map(|i| i as f64 / degree as f64).collect()
        } else {
            gauss_lobatto_nodes_unit(degree + 1)
        };
        Self { degree, nodes }
    }

    pub fn num_local(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    /// Values and derivatives of the 1D Lagrange basis at `x`.
    pub fn basis_1d(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.nodes.len();
        let mut val = vec![0.0; n];
        let mut der = vec![0.0; n];
        for i in 0..n {
            let mut v = 1.0;
            let mut d = 0.0;
            for m in 0..n {
                if m == i {
                    continue;
                }
                let den = self.nodes[i] - self.nodes[m];
                let f = (x - self.nodes[m]) / den;
                d = d * f + v / den;
                v *= f;
            }
            val[i] = v;
            der[i] = d;
        }
        (val, der)
    }

    /// Shape values and reference gradients at `(ξ, η)`.
    pub fn shape(&self, xi: f64, eta: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
        let (vx, dx) = self.basis_1d(xi);
        let (vy, dy) = self.basis_1d(eta);
        let r1 = self.degree + 1;
        let mut val = Vec::with_capacity(r1 * r1);
        let mut grad = Vec::with_capacity(r1 * r1);
        for j in 0..r1 {
            for i in 0..r1 {
                val.push(vx[i] * vy[j]);
                grad.push([dx[i] * vy[j], vx[i] * dy[j]]);
            }
        }
        (val, grad)
    }

    /// Reference coordinates of local node `k`.
    pub fn node_point(&self, k: usize) -> Point {
        let r1 = self.degree + 1;
        [self.nodes[k % r1], self.nodes[k / r1]]
    }

    /// Local node indices along edge `e`, ordered from its start vertex.
    pub fn edge_local_nodes(&self, e: usize) -> Vec<usize> {
        let r = self.degree;
        let idx = |i: usize, j: usize| j * (r + 1) + i;
        (0..=r)
            .map(|k| match e {
                0 => idx(k, 0),
                1 => idx(r, k),
                2 => idx(r - k, r),
                _ => idx(0, r - k),
            })
            .collect()
    }
}

/// Reference point at arc parameter `s ∈ [0, 1]` along local edge `e`.
pub fn edge_reference_point(e: usize, s: f64) -> Point {
    match e {
        0 => [s, 0.0],
        1 => [1.0, s],
        2 => [1.0 - s, 1.0],
        _ => [0.0, 1.0 - s],
    }
}

#[derive(Debug, Clone)]
pub struct FiniteElementSpace {
    pub degree: usize,
    pub reference: ReferenceElement,
    /// Global scalar DoF indices of each cell in local order.
    pub dof_map: Vec<Vec<usize>>,
    pub dim: usize,
    /// Physical coordinates of every global DoF.
    pub dof_points: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivative {
    Value,
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluation {
    Value(f64),
    Gradient([f64; 2]),
}

/// Builds the conforming Q_r space: vertex DoFs first, then edge interiors
/// (oriented from the lower to the higher global vertex), then cell interiors.
pub fn build_space(mesh: &Mesh, r: usize) -> Result<FiniteElementSpace> {
    if r == 0 {
        return Err(Error::Argument("space degree must be at least 1".into()));
    }
    let reference = ReferenceElement::new(r);
    let nv = mesh.nodes.len();
    let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
    for c in 0..mesh.num_cells() {
        for e in 0..4 {
            let (a, b) = mesh.edge_nodes(c, e);
            let n = edge_id.len();
            edge_id.entry(key(a, b)).or_insert(n);
        }
    }
    let ne = edge_id.len();
    let per_edge = r - 1;
    let per_cell = per_edge * per_edge;
    let dim = nv + ne * per_edge + mesh.num_cells() * per_cell;
    let mut dof_map = Vec::with_capacity(mesh.num_cells());
    let mut dof_points = vec![[0.0; 2]; dim];
    let r1 = r + 1;
    for c in 0..mesh.num_cells() {
        let cell = mesh.cells[c];
        let mut map = vec![usize::MAX; r1 * r1];
        let corners = [(0, 0), (r, 0), (r, r), (0, r)];
        for (v, &(i, j)) in corners.iter().enumerate() {
            map[j * r1 + i] = cell[v];
        }
        for e in 0..4 {
            let (a, b) = mesh.edge_nodes(c, e);
            let id = edge_id[&key(a, b)];
            let nodes = reference.edge_local_nodes(e);
            for k in 1..r {
                let pos = if a < b { k - 1 } else { r - k - 1 };
                map[nodes[k]] = nv + id * per_edge + pos;
            }
        }
        for j in 1..r {
            for i in 1..r {
                map[j * r1 + i] = nv + ne * per_edge + c * per_cell + (j - 1) * per_edge + (i - 1);
            }
        }
        for (k, &g) in map.iter().enumerate() {
            let p = reference.node_point(k);
            dof_points[g] = mesh.map_point(c, p[0], p[1]);
        }
        dof_map.push(map);
    }
    Ok(FiniteElementSpace { degree: r, reference, dof_map, dim, dof_points })
}

/// Inverse-transpose Jacobian and determinant of the bilinear map.
fn inverse_jacobian(mesh: &Mesh, cell: usize, xi: f64, eta: f64) -> Result<([[f64; 2]; 2], f64)> {
    let j = mesh.jacobian(cell, xi, eta);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return Err(Error::Geometry(format!("singular Jacobian in cell {cell}")));
    }
    // grad_x φ = J^{-T} grad_ξ φ
    let inv_t = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
    Ok((inv_t, det))
}

fn map_gradient(inv_t: &[[f64; 2]; 2], g: [f64; 2]) -> [f64; 2] {
    [
        inv_t[0][0] * g[0] + inv_t[0][1] * g[1],
        inv_t[1][0] * g[0] + inv_t[1][1] * g[1],
    ]
}

impl FiniteElementSpace {
    pub fn num_local(&self) -> usize {
        self.reference.num_local()
    }

    /// Evaluates a finite element function at a reference point of `cell`.
    pub fn evaluate(
        &self,
        mesh: &Mesh,
        coefficients: &[f64],
        cell: usize,
        reference_point: Point,
        derivative: Derivative,
    ) -> Result<Evaluation> {
        if coefficients.len() != self.dim {
            return Err(Error::Argument(format!(
                "coefficient vector has length {} but the space has {} DoFs",
                coefficients.len(),
                self.dim
            )));
        }
        let (val, grad) = self.reference.shape(reference_point[0], reference_point[1]);
        let map = &self.dof_map[cell];
        match derivative {
            Derivative::Value => {
                Ok(Evaluation::Value(map.iter().zip(&val).map(|(&g, v)| coefficients[g] * v).sum()))
            }
            Derivative::Gradient => {
                let (inv_t, _) = inverse_jacobian(mesh, cell, reference_point[0], reference_point[1])?;
                let mut out = [0.0; 2];
                for (&g, gr) in map.iter().zip(&grad) {
                    let p = map_gradient(&inv_t, *gr);
                    out[0] += coefficients[g] * p[0];
                    out[1] += coefficients[g] * p[1];
                }
                Ok(Evaluation::Gradient(out))
            }
        }
    }

    /// Nodal interpolation of a scalar function.
    pub fn interpolate<F: Fn(Point) -> f64>(&self, f: F) -> Vec<f64> {
        self.dof_points.iter().map(|&p| f(p)).collect()
    }

    /// Global DoFs lying on facets whose marker satisfies `select`.
    pub fn boundary_dofs<F: Fn(Marker) -> bool>(&self, mesh: &Mesh, select: F) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for f in &mesh.facets {
            if select(f.marker) {
                for k in self.reference.edge_local_nodes(f.edge) {
                    out.push(self.dof_map[f.cell][k]);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetPoint {
    pub point: Point,
    pub normal: Point,
    /// Gauss weight times edge length.
    pub weight: f64,
    pub reference: Point,
}

/// Gauss points on a boundary facet with outward normals and length weights.
pub fn facet_quadrature(mesh: &Mesh, facet: usize, points: usize) -> Result<Vec<FacetPoint>> {
    let f: &Facet = mesh
        .facets
        .get(facet)
        .ok_or_else(|| Error::Argument(format!("facet {facet} is not a boundary facet")))?;
    let len = mesh.facet_length(f);
    let normal = mesh.facet_normal(f);
    Ok(gauss_legendre_unit(points)
        .into_iter()
        .map(|(s, w)| {
            let r = edge_reference_point(f.edge, s);
            FacetPoint { point: mesh.map_point(f.cell, r[0], r[1]), normal, weight: w * len, reference: r }
        })
        .collect())
}

/// Velocity `Q_r` (two components) and pressure `Q_{r-1}` on one mesh.
#[derive(Debug, Clone)]
pub struct TaylorHoodPair {
    pub mesh: Mesh,
    pub velocity: FiniteElementSpace,
    pub pressure: FiniteElementSpace,
}

impl TaylorHoodPair {
    pub fn new(mesh: Mesh, r: usize) -> Result<Self> {
        if r < 2 {
            return Err(Error::Argument(format!("Taylor–Hood needs r ≥ 2, got {r}")));
        }
        let velocity = build_space(&mesh, r)?;
        let pressure = build_space(&mesh, r - 1)?;
        Ok(Self { mesh, velocity, pressure })
    }

    /// Scalar velocity DoFs per component.
    pub fn nv(&self) -> usize {
        self.velocity.dim
    }

    /// Velocity DoF count `J` (both components).
    pub fn j(&self) -> usize {
        2 * self.velocity.dim
    }

    /// Pressure DoF count `M`.
    pub fn m(&self) -> usize {
        self.pressure.dim
    }

    /// Unknowns of one temporal coefficient `(v, p)`.
    pub fn slot_dim(&self) -> usize {
        self.j() + self.m()
    }
}

/// Basis data of both spaces tabulated at the quadrature points of one cell.
#[derive(Debug, Clone)]
pub struct CellTable {
    pub weights: Vec<f64>,
    pub points: Vec<Point>,
    /// `v_phi[q * nbv + a]`
    pub v_phi: Vec<f64>,
    pub v_grad: Vec<[f64; 2]>,
    pub p_phi: Vec<f64>,
}

/// Basis data tabulated on one Dirichlet or outflow facet.
#[derive(Debug, Clone)]
pub struct FacetTable {
    pub cell: usize,
    pub marker: Marker,
    /// Diameter of the owning cell.
    pub h: f64,
    pub normal: Point,
    pub weights: Vec<f64>,
    pub points: Vec<Point>,
    pub v_phi: Vec<f64>,
    pub v_grad: Vec<[f64; 2]>,
    pub p_phi: Vec<f64>,
}

/// Tabulations for every cell and boundary facet of a Taylor–Hood pair.
#[derive(Debug, Clone)]
pub struct QuadratureCache {
    pub nbv: usize,
    pub nbp: usize,
    pub cells: Vec<CellTable>,
    pub facets: Vec<FacetTable>,
}

/// Velocity values and gradients, pressure values and Jacobian determinants.
type Tabulation = (Vec<f64>, Vec<[f64; 2]>, Vec<f64>, Vec<f64>);

fn tabulate(
    pair: &TaylorHoodPair,
    cell: usize,
    refs: &[Point],
) -> Result<Tabulation> {
    let mut v_phi = Vec::new();
    let mut v_grad = Vec::new();
    let mut p_phi = Vec::new();
    let mut dets = Vec::new();
    for r in refs {
        let (inv_t, det) = inverse_jacobian(&pair.mesh, cell, r[0], r[1])?;
        let (vv, vg) = pair.velocity.reference.shape(r[0], r[1]);
        v_phi.extend(vv);
        v_grad.extend(vg.into_iter().map(|g| map_gradient(&inv_t, g)));
        p_phi.extend(pair.pressure.reference.shape(r[0], r[1]).0);
        dets.push(det);
    }
    Ok((v_phi, v_grad, p_phi, dets))
}

impl QuadratureCache {
    /// Tensor Gauss with `r + 2` points per direction on cells and `r + 2`
    /// points on facets.
    pub fn new(pair: &TaylorHoodPair) -> Result<Self> {
        Self::with_points(pair, pair.velocity.degree + 2)
    }

    pub fn with_points(pair: &TaylorHoodPair, npts: usize) -> Result<Self> {
        let g = gauss_legendre_unit(npts);
        let mesh = &pair.mesh;
        let mut refs = Vec::new();
        let mut ref_w = Vec::new();
        for &(y, wy) in &g {
            for &(x, wx) in &g {
                refs.push([x, y]);
                ref_w.push(wx * wy);
            }
        }
        let mut cells = Vec::with_capacity(mesh.num_cells());
        for c in 0..mesh.num_cells() {
            let (v_phi, v_grad, p_phi, dets) = tabulate(pair, c, &refs)?;
            cells.push(CellTable {
                weights: ref_w.iter().zip(&dets).map(|(w, d)| w * d).collect(),
                points: refs.iter().map(|r| mesh.map_point(c, r[0], r[1])).collect(),
                v_phi,
                v_grad,
                p_phi,
            });
        }
        let mut facets = Vec::with_capacity(mesh.facets.len());
        for (i, f) in mesh.facets.iter().enumerate() {
            let fq = facet_quadrature(mesh, i, npts)?;
            let refs: Vec<Point> = fq.iter().map(|p| p.reference).collect();
            let (v_phi, v_grad, p_phi, _) = tabulate(pair, f.cell, &refs)?;
            facets.push(FacetTable {
                cell: f.cell,
                marker: f.marker,
                h: mesh.cell_diameter(f.cell),
                normal: mesh.facet_normal(f),
                weights: fq.iter().map(|p| p.weight).collect(),
                points: fq.iter().map(|p| p.point).collect(),
                v_phi,
                v_grad,
                p_phi,
            });
        }
        Ok(Self { nbv: pair.velocity.num_local(), nbp: pair.pressure.num_local(), cells, facets })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_unit_square;

    #[test]
    fn dimensions_match_structured_formula() {
        let m = generate_unit_square(2).unwrap();
        assert_eq!(build_space(&m, 4).unwrap().dim, 81);
        assert_eq!(build_space(&m, 3).unwrap().dim, 49);
        let one = generate_unit_square(1).unwrap();
        assert_eq!(build_space(&one, 1).unwrap().dim, 4);
        let pair = TaylorHoodPair::new(m, 4).unwrap();
        assert_eq!(pair.slot_dim(), 211);
        assert_eq!(2 * pair.slot_dim(), 422);
    }

    #[test]
    fn shape_functions_are_cardinal_and_sum_to_one() {
        for r in 1..=6 {
            let e = ReferenceElement::new(r);
            for k in 0..e.num_local() {
                let p = e.node_point(k);
                let (v, _) = e.shape(p[0], p[1]);
                for (m, vm) in v.iter().enumerate() {
                    let want = if m == k { 1.0 } else { 0.0 };
                    assert!((vm - want).abs() < 1e-12, "r={r} k={k} m={m}");
                }
            }
            let (v, g) = e.shape(0.37, 0.81);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let gs = g.iter().fold([0.0, 0.0], |a, b| [a[0] + b[0], a[1] + b[1]]);
            assert!(gs[0].abs() < 1e-10 && gs[1].abs() < 1e-10);
        }
    }

    #[test]
    fn shared_dofs_have_matching_coordinates() {
        let m = generate_unit_square(3).unwrap();
        for r in 1..=5 {
            let s = build_space(&m, r).unwrap();
            for c in 0..m.num_cells() {
                for (k, &g) in s.dof_map[c].iter().enumerate() {
                    let p = s.reference.node_point(k);
                    let x = m.map_point(c, p[0], p[1]);
                    assert!((x[0] - s.dof_points[g][0]).abs() < 1e-14);
                    assert!((x[1] - s.dof_points[g][1]).abs() < 1e-14);
                    assert!(g < s.dim);
                }
            }
        }
    }

    #[test]
    fn linear_function_has_unit_gradient() {
        let m = generate_unit_square(2).unwrap();
        let s = build_space(&m, 3).unwrap();
        let coeff = s.interpolate(|p| p[0]);
        for c in 0..4 {
            match s.evaluate(&m, &coeff, c, [0.3, 0.6], Derivative::Gradient).unwrap() {
                Evaluation::Gradient(g) => {
                    assert!((g[0] - 1.0).abs() < 1e-13 && g[1].abs() < 1e-13)
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn facet_rule_examples() {
        let m = generate_unit_square(2).unwrap();
        for i in 0..m.facets.len() {
            let q = facet_quadrature(&m, i, 3).unwrap();
            let total: f64 = q.iter().map(|p| p.weight).sum();
            assert!((total - 0.5).abs() < 1e-15);
            for p in &q {
                if (p.point[0] - 1.0).abs() < 1e-15 {
                    assert_eq!(p.normal, [1.0, 0.0]);
                }
            }
        }
        let bottom: f64 = (0..m.facets.len())
            .flat_map(|i| facet_quadrature(&m, i, 3).unwrap())
            .filter(|p| p.point[1] == 0.0)
            .map(|p| p.weight * p.point[0])
            .sum();
        assert!((bottom - 0.5).abs() < 1e-15);
        assert!(facet_quadrature(&m, 99, 3).is_err());
    }
}
