//! Smooth solution on `(0,1)² × (0,1]` vanishing on the boundary.
//!
//! With `a = sin²(πx)`, `b = ½ sin(2πy)`, `c = ½ sin(2πx)`, `d = sin²(πy)`:
//! `v = sin t (a b, −c d)`, `p = sin t · c b`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::forms::{ProblemData, VectorField};
use crate::mesh::Point;
use crate::stepper::{ExactSolution, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSample {
    pub v: [f64; 2],
    pub p: f64,
    pub dv: [f64; 2],
    pub dp: f64,
    pub f: [f64; 2],
    pub df: [f64; 2],
}

/// `(g, g', g'')` for the four spatial factors.
struct Factors {
    a: [f64; 3],
    b: [f64; 3],
    c: [f64; 3],
    d: [f64; 3],
}

fn factors(x: Point) -> Factors {
    let (s2x, c2x) = (2.0 * PI * x[0]).sin_cos();
    let (s2y, c2y) = (2.0 * PI * x[1]).sin_cos();
    let sx = (PI * x[0]).sin();
    let sy = (PI * x[1]).sin();
    let p2 = PI * PI;
    Factors {
        a: [sx * sx, PI * s2x, 2.0 * p2 * c2x],
        b: [0.5 * s2y, PI * c2y, -2.0 * p2 * s2y],
        c: [0.5 * s2x, PI * c2x, -2.0 * p2 * s2x],
        d: [sy * sy, PI * s2y, 2.0 * p2 * c2y],
    }
}

pub fn manufactured_solution(x: Point, t: f64, nu: f64) -> ManufacturedSample {
    let Factors { a, b, c, d } = factors(x);
    let (s, co) = t.sin_cos();
    let u = [a[0] * b[0], -c[0] * d[0]];
    let lap = [a[2] * b[0] + a[0] * b[2], -(c[2] * d[0] + c[0] * d[2])];
    let conv = [
        a[0] * a[1] * b[0] * b[0] - c[0] * d[0] * a[0] * b[1],
        -a[0] * b[0] * c[1] * d[0] + c[0] * c[0] * d[0] * d[1],
    ];
    let grad_p = [c[1] * b[0], c[0] * b[1]];
    let f = [0, 1].map(|k| co * u[k] + s * s * conv[k] - nu * s * lap[k] + s * grad_p[k]);
    let df = [0, 1].map(|k| -s * u[k] + 2.0 * s * co * conv[k] - nu * co * lap[k] + co * grad_p[k]);
    ManufacturedSample {
        v: [s * u[0], s * u[1]],
        p: s * c[0] * b[0],
        dv: [co * u[0], co * u[1]],
        dp: co * c[0] * b[0],
        f,
        df,
    }
}

/// Divergence of the manufactured velocity.
pub fn manufactured_divergence(x: Point, t: f64) -> f64 {
    let Factors { a, b, c, d } = factors(x);
    t.sin() * (a[1] * b[0] - c[0] * d[1])
}

/// Problem data with the matching force and homogeneous boundary values.
pub fn manufactured_problem(nu: f64) -> crate::Result<ProblemData> {
    let force: VectorField = Arc::new(move |x, t| {
        let s = manufactured_solution(x, t, nu);
        (s.f, s.df)
    });
    let g: VectorField = Arc::new(move |x, t| {
        let s = manufactured_solution(x, t, nu);
        (s.v, s.dv)
    });
    ProblemData::new(nu, force, g)
}

pub fn manufactured_exact(nu: f64) -> ExactSolution {
    let velocity: VectorField = Arc::new(move |x, t| {
        let s = manufactured_solution(x, t, nu);
        (s.v, s.dv)
    });
    let pressure: ScalarField = Arc::new(move |x, t| {
        let s = manufactured_solution(x, t, nu);
        (s.p, s.dp)
    });
    ExactSolution { velocity, pressure }
}
