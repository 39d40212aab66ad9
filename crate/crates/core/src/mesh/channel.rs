//! Channel with a circular obstacle: Cartesian blocks around an O-grid box.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{mark_boundary, Marker, Mesh, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGeometry {
    pub length: f64,
    pub height: f64,
    pub center: Point,
    pub radius: f64,
}

impl Default for ChannelGeometry {
    fn default() -> Self {
        Self::dfg()
    }
}

impl ChannelGeometry {
    /// The 2.2 × 0.41 channel with a cylinder of radius 0.05 at (0.2, 0.2).
    pub fn dfg() -> Self {
        Self { length: 2.2, height: 0.41, center: [0.2, 0.2], radius: 0.05 }
    }

    /// Half-width of the square box that hosts the O-grid.
    fn box_half(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn validate(&self) -> Result<()> {
        let [cx, cy] = self.center;
        let (r, a) = (self.radius, self.box_half());
        if !(r > 0.0 && self.length > 0.0 && self.height > 0.0) {
            return Err(Error::Geometry("channel and obstacle sizes must be positive".into()));
        }
        if cx - r <= 0.0 || cx + r >= self.length || cy - r <= 0.0 || cy + r >= self.height {
            return Err(Error::Geometry("obstacle touches or crosses the channel walls".into()));
        }
        if cx - a <= 0.0 || cx + a >= self.length || cy - a <= 0.0 || cy + a >= self.height {
            return Err(Error::Geometry(
                "obstacle too close to the walls for the O-grid box (needs 2 radii clearance)".into(),
            ));
        }
        Ok(())
    }

    pub fn is_inside_obstacle(&self, p: Point) -> bool {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1]) < self.radius
    }
}

fn lin(a: f64, b: f64, i: usize, n: usize) -> f64 {
    if i == 0 {
        a
    } else if i == n {
        b
    } else {
        a + (b - a) * i as f64 / n as f64
    }
}

struct NodeSet {
    nodes: Vec<Point>,
    index: HashMap<(i64, i64), usize>,
}

impl NodeSet {
    fn id(&mut self, p: Point) -> usize {
        let k = ((p[0] * 1e10).round() as i64, (p[1] * 1e10).round() as i64);
        *self.index.entry(k).or_insert_with(|| {
            self.nodes.push(p);
            self.nodes.len() - 1
        })
    }
}

/// Block-structured mesh of the channel. The box `[c − 2r, c + 2r]²` around
/// the obstacle is an O-grid of four sectors; the rest is split into eight
/// Cartesian blocks. All cell counts double with each `level`.
pub fn generate_channel_cylinder(geom: &ChannelGeometry, level: u32) -> Result<Mesh> {
    geom.validate()?;
    let scale = 1usize << level;
    let [cx, cy] = geom.center;
    let a = geom.box_half();
    let xs = [0.0, cx - a, cx + a, geom.length];
    let ys = [0.0, cy - a, cy + a, geom.height];
    let nbox = 4 * scale;
    let h0 = 2.0 * a / nbox as f64;
    let count = |len: f64, h: f64| ((len / h).round() as usize).max(scale);
    let nx = [count(xs[1] - xs[0], h0), nbox, count(xs[3] - xs[2], 2.0 * h0)];
    let ny = [count(ys[1] - ys[0], h0), nbox, count(ys[3] - ys[2], h0)];
    let nrad = 2 * scale;

    let mut set = NodeSet { nodes: Vec::new(), index: HashMap::new() };
    let mut cells: Vec<[usize; 4]> = Vec::new();

    for bj in 0..3 {
        for bi in 0..3 {
            if bi == 1 && bj == 1 {
                continue;
            }
            let (mx, my) = (nx[bi], ny[bj]);
            for j in 0..my {
                for i in 0..mx {
                    let p = |ii: usize, jj: usize| {
                        [lin(xs[bi], xs[bi + 1], ii, mx), lin(ys[bj], ys[bj + 1], jj, my)]
                    };
                    let c = [
                        set.id(p(i, j)),
                        set.id(p(i + 1, j)),
                        set.id(p(i + 1, j + 1)),
                        set.id(p(i, j + 1)),
                    ];
                    cells.push(c);
                }
            }
        }
    }

    // Sectors: box side from corner `from` to corner `to`, circle arc from
    // angle `th0` to `th1`. Radial index 0 lies on the circle.
    let (x0, x1, y0, y1) = (xs[1], xs[2], ys[1], ys[2]);
    let sectors: [(Point, Point, f64); 4] = [
        ([x0, y0], [x1, y0], 1.25 * PI),
        ([x1, y0], [x1, y1], 1.75 * PI),
        ([x1, y1], [x0, y1], 0.25 * PI),
        ([x0, y1], [x0, y0], 0.75 * PI),
    ];
    for (from, to, th0) in sectors {
        let node = |set: &mut NodeSet, i: usize, k: usize| {
            let bx = [lin(from[0], to[0], i, nbox), lin(from[1], to[1], i, nbox)];
            if k == nrad {
                return set.id(bx);
            }
            let th = th0 + 0.5 * PI * i as f64 / nbox as f64;
            let circ = [cx + geom.radius * th.cos(), cy + geom.radius * th.sin()];
            if k == 0 {
                return set.id(circ);
            }
            let s = k as f64 / nrad as f64;
            set.id([(1.0 - s) * circ[0] + s * bx[0], (1.0 - s) * circ[1] + s * bx[1]])
        };
        for k in 0..nrad {
            for i in 0..nbox {
                // moving along the box side keeps the fluid on the left when
                // stepping outward from the circle
                let c = [
                    node(&mut set, i, k),
                    node(&mut set, i + 1, k),
                    node(&mut set, i + 1, k + 1),
                    node(&mut set, i, k + 1),
                ];
                cells.push(c);
            }
        }
    }

    let nodes = set.nodes;
    for c in cells.iter_mut() {
        if signed_area(&nodes, c) < 0.0 {
            *c = [c[0], c[3], c[2], c[1]];
        }
    }
    let len = geom.length;
    let facets = mark_boundary(&nodes, &cells, |p, q| {
        if p[0] == 0.0 && q[0] == 0.0 {
            Marker::Inflow
        } else if p[0] == len && q[0] == len {
            Marker::Outflow
        } else {
            Marker::Wall
        }
    });
    let mesh = Mesh { nodes, cells, facets };
    mesh.validate()?;
    Ok(mesh)
}

fn signed_area(nodes: &[Point], c: &[usize; 4]) -> f64 {
    let mut s = 0.0;
    for k in 0..4 {
        let (p, q) = (nodes[c[k]], nodes[c[(k + 1) % 4]]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

/// Indices of nodes lying on the obstacle circle (within `1e-9 · radius`).
pub fn circle_nodes(mesh: &Mesh, geom: &ChannelGeometry) -> Vec<usize> {
    (0..mesh.nodes.len())
        .filter(|&i| {
            let p = mesh.nodes[i];
            ((p[0] - geom.center[0]).hypot(p[1] - geom.center[1]) - geom.radius).abs()
                <= 1e-9 * geom.radius
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dfg_mesh_is_valid_and_fitted() {
        let g = ChannelGeometry::dfg();
        let m = generate_channel_cylinder(&g, 0).unwrap();
        m.validate().unwrap();
        let circ = circle_nodes(&m, &g);
        assert_eq!(circ.len(), 16);
        for i in circ {
            let p = m.nodes[i];
            let r = (p[0] - 0.2).hypot(p[1] - 0.2);
            assert!((r - 0.05).abs() <= 1e-12 * 0.05);
        }
        let s = m.boundary_normal_sum();
        assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
        for f in &m.facets {
            let (a, b) = m.edge_nodes(f.cell, f.edge);
            let on_inflow = m.nodes[a][0] == 0.0 && m.nodes[b][0] == 0.0;
            assert_eq!(on_inflow, f.marker == Marker::Inflow);
        }
    }

    #[test]
    fn level_doubles_counts() {
        let g = ChannelGeometry::dfg();
        let m0 = generate_channel_cylinder(&g, 0).unwrap();
        let m1 = generate_channel_cylinder(&g, 1).unwrap();
        assert_eq!(m1.cells.len(), 4 * m0.cells.len());
    }

    #[test]
    fn obstacle_touching_wall_is_rejected() {
        let g = ChannelGeometry { center: [0.2, 0.04], ..ChannelGeometry::dfg() };
        assert!(matches!(generate_channel_cylinder(&g, 0), Err(Error::Geometry(_))));
    }
}
