//! Space-time error norms of a discrete trajectory.

use crate::assembly::NsProblem;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_unit;
use crate::stepper::{ExactSolution, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub v_l2l2: f64,
    pub p_l2l2: f64,
    pub v_linf: f64,
    pub p_linf: f64,
}

/// `(‖v_h − v‖_{L²}, ‖p_h − p‖_{L²})` of one slot vector at time `t`.
pub fn spatial_errors(problem: &NsProblem, slot: &[f64], exact: &ExactSolution, t: f64) -> (f64, f64) {
    let nv = problem.pair.nv();
    let j = problem.j();
    let (nbv, nbp) = (problem.cache.nbv, problem.cache.nbp);
    let mut ev = 0.0;
    let mut ep = 0.0;
    for (cell, tab) in problem.cache.cells.iter().enumerate() {
        let vmap = &problem.pair.velocity.dof_map[cell];
        let pmap = &problem.pair.pressure.dof_map[cell];
        for (q, (&w, &x)) in tab.weights.iter().zip(&tab.points).enumerate() {
            let mut u = [0.0; 2];
            for (a, &g) in vmap.iter().enumerate() {
                let phi = tab.v_phi[q * nbv + a];
                u[0] += phi * slot[g];
                u[1] += phi * slot[nv + g];
            }
            let p: f64 = pmap.iter().enumerate().map(|(a, &g)| tab.p_phi[q * nbp + a] * slot[j + g]).sum();
            let (ue, _) = (exact.velocity)(x, t);
            let (pe, _) = (exact.pressure)(x, t);
            ev += w * ((u[0] - ue[0]).powi(2) + (u[1] - ue[1]).powi(2));
            ep += w * (p - pe).powi(2);
        }
    }
    (ev.sqrt(), ep.sqrt())
}

/// L²(L²) norms with 5-point Gauss in time on every interval and L∞(L²)
/// norms sampled at `t_{n−1} + d·k·τ_n`, `d = 0, …, 1/k − 1`.
pub fn error_norms(
    problem: &NsProblem,
    trajectory: &Trajectory,
    exact: &ExactSolution,
    sampling: f64,
) -> Result<ErrorNorms> {
    if trajectory.intervals.is_empty() {
        return Err(Error::Argument("trajectory has no intervals".into()));
    }
    if trajectory.intervals.iter().any(|s| s.slots.iter().any(|v| v.len() != problem.slot_dim())) {
        return Err(Error::Argument("trajectory does not live on the problem's spaces".into()));
    }
    if !(sampling > 0.0 && sampling <= 1.0) {
        return Err(Error::Argument(format!("sampling fraction must lie in (0, 1], got {sampling}")));
    }
    let samples = (1.0 / sampling).round() as usize;
    let gauss = gauss_legendre_unit(5);
    let mut out = ErrorNorms::default();
    for (n, st) in trajectory.intervals.iter().enumerate() {
        for &(th, w) in &gauss {
            let slot = trajectory.eval_interval(n, th, 0);
            let (ev, ep) = spatial_errors(problem, &slot, exact, st.t0 + th * st.tau);
            out.v_l2l2 += w * st.tau * ev * ev;
            out.p_l2l2 += w * st.tau * ep * ep;
        }
        for d in 0..samples {
            let th = d as f64 * sampling;
            let slot = trajectory.eval_interval(n, th, 0);
            let (ev, ep) = spatial_errors(problem, &slot, exact, st.t0 + th * st.tau);
            out.v_linf = out.v_linf.max(ev);
            out.p_linf = out.p_linf.max(ep);
        }
    }
    out.v_l2l2 = out.v_l2l2.sqrt();
    out.p_l2l2 = out.p_l2l2.sqrt();
    Ok(out)
}

/// `log₂(previous / current)`.
pub fn eoc(previous: f64, current: f64) -> f64 {
    (previous / current).log2()
}
