//! Point evaluation, cross sections and obstacle forces.

use crate::assembly::NsProblem;
use crate::error::{Error, Result};
use crate::fem::{facet_quadrature, Derivative, Evaluation};
use crate::mesh::{ChannelGeometry, Marker, Mesh, Point};

/// Cell and reference coordinates of a physical point, by Newton inversion
/// of the bilinear maps.
pub fn locate(mesh: &Mesh, x: Point) -> Option<(usize, Point)> {
    const TOL: f64 = 1e-10;
    for c in 0..mesh.num_cells() {
        let v = mesh.vertices(c);
        let (lo, hi) = v.iter().fold(([f64::MAX; 2], [f64::MIN; 2]), |(lo, hi), p| {
            ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
        });
        if x[0] < lo[0] - TOL || x[0] > hi[0] + TOL || x[1] < lo[1] - TOL || x[1] > hi[1] + TOL {
            continue;
        }
        let mut r = [0.5, 0.5];
        for _ in 0..30 {
            let p = mesh.map_point(c, r[0], r[1]);
            let j = mesh.jacobian(c, r[0], r[1]);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let d = [x[0] - p[0], x[1] - p[1]];
            let step = [(j[1][1] * d[0] - j[0][1] * d[1]) / det, (-j[1][0] * d[0] + j[0][0] * d[1]) / det];
            r = [r[0] + step[0], r[1] + step[1]];
            if step[0].abs() + step[1].abs() < 1e-14 {
                break;
            }
        }
        if (-1e-9..=1.0 + 1e-9).contains(&r[0]) && (-1e-9..=1.0 + 1e-9).contains(&r[1]) {
            return Some((c, [r[0].clamp(0.0, 1.0), r[1].clamp(0.0, 1.0)]));
        }
    }
    None
}

fn value(e: Evaluation) -> f64 {
    match e {
        Evaluation::Value(v) => v,
        Evaluation::Gradient(_) => unreachable!("value requested"),
    }
}

fn gradient(e: Evaluation) -> [f64; 2] {
    match e {
        Evaluation::Gradient(g) => g,
        Evaluation::Value(_) => unreachable!("gradient requested"),
    }
}

/// Velocity and pressure of a slot vector at a located point.
pub fn point_values(problem: &NsProblem, slot: &[f64], cell: usize, r: Point) -> Result<([f64; 2], f64)> {
    let pair = &problem.pair;
    let nv = pair.nv();
    let j = problem.j();
    let u0 = value(pair.velocity.evaluate(&pair.mesh, &slot[..nv], cell, r, Derivative::Value)?);
    let u1 = value(pair.velocity.evaluate(&pair.mesh, &slot[nv..j], cell, r, Derivative::Value)?);
    let p = value(pair.pressure.evaluate(&pair.mesh, &slot[j..], cell, r, Derivative::Value)?);
    Ok(([u0, u1], p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionSample {
    pub y: f64,
    pub velocity: [f64; 2],
    pub pressure: f64,
}

impl CrossSectionSample {
    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }
}

/// Samples the vertical line `x = x0` at `count` equidistant heights,
/// skipping points inside the obstacle.
pub fn cross_section(
    problem: &NsProblem,
    slot: &[f64],
    geom: &ChannelGeometry,
    x0: f64,
    count: usize,
) -> Result<Vec<CrossSectionSample>> {
    if count < 2 {
        return Err(Error::Argument("a cross section needs at least two samples".into()));
    }
    let mut out = Vec::new();
    for k in 0..count {
        let y = geom.height * k as f64 / (count - 1) as f64;
        let x = [x0, y];
        if geom.is_inside_obstacle(x) {
            continue;
        }
        let (cell, r) = locate(&problem.pair.mesh, x)
            .ok_or_else(|| Error::Argument(format!("point ({x0}, {y}) lies outside the mesh")))?;
        let (velocity, pressure) = point_values(problem, slot, cell, r)?;
        out.push(CrossSectionSample { y, velocity, pressure });
    }
    Ok(out)
}

/// Relative discrete L² difference `‖a − b‖ / ‖b‖`.
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forces {
    pub drag: f64,
    pub lift: f64,
    pub c_drag: f64,
    pub c_lift: f64,
}

/// Mean inflow speed of the low-Reynolds channel and cylinder diameter.
pub const MEAN_SPEED: f64 = 0.2;
pub const REFERENCE_LENGTH: f64 = 0.1;
/// Mean inflow speed of the ramped peak-1.5 profile (`Re = 100` at `ν = 0.001`).
pub const DFG_MEAN_SPEED: f64 = 1.0;

/// Drag and lift on the wall facets of the obstacle. The normal points from
/// the obstacle into the fluid and `t = (n_y, −n_x)`. Coefficients use
/// `2 / (Ū² L)` with `L` the cylinder diameter.
pub fn drag_lift(problem: &NsProblem, slot: &[f64], geom: &ChannelGeometry, nu: f64, mean_speed: f64) -> Result<Forces> {
    let pair = &problem.pair;
    let mesh = &pair.mesh;
    let nv = pair.nv();
    let j = problem.j();
    let on_circle = |p: Point| ((p[0] - geom.center[0]).hypot(p[1] - geom.center[1]) - geom.radius).abs() < 1e-8;
    let (mut fd, mut fl) = (0.0, 0.0);
    let mut found = false;
    for (i, f) in mesh.facets.iter().enumerate() {
        let (a, b) = mesh.edge_nodes(f.cell, f.edge);
        if f.marker != Marker::Wall || !on_circle(mesh.nodes[a]) || !on_circle(mesh.nodes[b]) {
            continue;
        }
        found = true;
        for fp in facet_quadrature(mesh, i, pair.velocity.degree + 2)? {
            let n = [-fp.normal[0], -fp.normal[1]];
            let t = [n[1], -n[0]];
            let g0 = gradient(pair.velocity.evaluate(mesh, &slot[..nv], f.cell, fp.reference, Derivative::Gradient)?);
            let g1 = gradient(pair.velocity.evaluate(mesh, &slot[nv..j], f.cell, fp.reference, Derivative::Gradient)?);
            let p = value(pair.pressure.evaluate(mesh, &slot[j..], f.cell, fp.reference, Derivative::Value)?);
            let dvt_dn = t[0] * (g0[0] * n[0] + g0[1] * n[1]) + t[1] * (g1[0] * n[0] + g1[1] * n[1]);
            fd += fp.weight * (nu * dvt_dn * n[1] - p * n[0]);
            fl -= fp.weight * (nu * dvt_dn * n[0] + p * n[1]);
        }
    }
    if !found {
        return Err(Error::Argument("mesh has no wall facets on the obstacle".into()));
    }
    Ok(forces_with_coefficients(fd, fl, mean_speed, 2.0 * geom.radius))
}

pub fn forces_with_coefficients(drag: f64, lift: f64, mean_speed: f64, length: f64) -> Forces {
    let k = 2.0 / (mean_speed * mean_speed * length);
    Forces { drag, lift, c_drag: k * drag, c_lift: k * lift }
}
