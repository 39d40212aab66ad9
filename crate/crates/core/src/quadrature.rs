//! One-dimensional Gauss–Legendre and Gauss–Lobatto point sets.

use std::f64::consts::PI;

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        let nf = n as f64;
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = -(PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Gauss–Lobatto nodes on `[0, 1]` (`n ≥ 2` points, endpoints included).
pub fn gauss_lobatto_nodes_unit(n: usize) -> Vec<f64> {
    assert!(n >= 2, "Lobatto rule needs at least two points");
    let m = n - 1;
    let mut nodes = vec![-1.0; n];
    nodes[m] = 1.0;
    // interior nodes are the roots of P'_m
    for i in 1..m {
        let mut x = -(PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            // P''_m from the Legendre ODE
            let d2p = (2.0 * x * dp - (m * (m + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
    }
    nodes.into_iter().map(|x| 0.5 * (x + 1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_to_degree_2n_minus_1() {
        for n in 1..=8 {
            let rule = gauss_legendre(n);
            for deg in 0..2 * n {
                let num: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn lobatto_known_nodes() {
        let n = gauss_lobatto_nodes_unit(3);
        assert!((n[1] - 0.5).abs() < 1e-15);
        let n = gauss_lobatto_nodes_unit(4);
        let x = 0.5 * (1.0 - (1.0f64 / 5.0).sqrt());
        assert!((n[1] - x).abs() < 1e-15);
        assert!((n[2] - (1.0 - x)).abs() < 1e-15);
    }
}
