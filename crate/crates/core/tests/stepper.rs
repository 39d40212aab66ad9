use std::sync::Arc;

use galcol::assembly::Scheme;
use galcol::linalg::CsrMatrix;
use galcol::stepper::{
    march, newton_solve, step_cgp1, step_gcc13, Damping, DiscreteSystem, InitialData, LinearOde, NewtonConfig,
    TimeMarchConfig,
};
use galcol::Error;

fn decay() -> LinearOde {
    LinearOde::new(vec![vec![-1.0]], vec![1.0])
}

fn end_error(ode: &LinearOde, scheme: Scheme, tau: f64, t_end: f64, exact: f64) -> f64 {
    let cfg = TimeMarchConfig { t_end, tau, scheme, initial: InitialData::ExactFromSolution, condition_cap: None };
    let traj = march(ode, &cfg, &NewtonConfig::default()).unwrap();
    (traj.eval(t_end)[0] - exact).abs()
}

fn nodal_eoc(scheme: Scheme) -> Vec<f64> {
    let taus = [0.1, 0.05, 0.025, 0.0125];
    let errs: Vec<f64> = taus.iter().map(|&t| end_error(&decay(), scheme, t, 1.0, (-1.0f64).exp())).collect();
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn gcc13_is_fourth_order_at_the_nodes() {
    for e in nodal_eoc(Scheme::Gcc13) {
        assert!((e - 4.0).abs() <= 0.2, "EOC {e}");
    }
}

#[test]
fn cgp1_is_second_order_at_the_nodes() {
    for e in nodal_eoc(Scheme::Cgp1) {
        assert!((e - 2.0).abs() <= 0.2, "EOC {e}");
    }
}

#[test]
fn cgp1_amplification_is_the_trapezoidal_factor() {
    for &(lambda, tau) in &[(-1.0, 0.1), (-50.0, 0.01), (2.0, 0.3), (-3.0, 1.0)] {
        let ode = LinearOde::new(vec![vec![lambda]], vec![1.0]);
        let (state, _) = step_cgp1(&ode, 0.0, tau, &[1.0], &NewtonConfig::default()).unwrap();
        let r = (1.0 + lambda * tau / 2.0) / (1.0 - lambda * tau / 2.0);
        assert!((state.slots[1][0] - r).abs() <= 1e-12);
    }
}

#[test]
fn gcc13_is_exact_for_cubic_solutions() {
    // y' = b(t) with y = t³ − t: the Hermite space contains the solution
    let forcing = Arc::new(|t: f64| (vec![3.0 * t * t - 1.0], vec![6.0 * t]));
    let ode = LinearOde { a: vec![vec![0.0]], forcing: Some(forcing), y0: vec![0.0] };
    let (state, _) = step_gcc13(&ode, 0.0, 0.7, &[0.0], &[-0.7], &NewtonConfig::default()).unwrap();
    let t: f64 = 0.7;
    assert!((state.slots[2][0] - (t.powi(3) - t)).abs() < 1e-13);
    assert!((state.slots[3][0] - 0.7 * (3.0 * t * t - 1.0)).abs() < 1e-13);
}

#[test]
fn gcc13_trajectories_are_c1_at_interior_nodes() {
    let ode = LinearOde::new(vec![vec![0.0, 1.0], vec![-4.0, -0.3]], vec![1.0, 0.0]);
    let cfg = TimeMarchConfig { t_end: 1.0, tau: 0.125, scheme: Scheme::Gcc13, initial: InitialData::ExactFromSolution, condition_cap: None };
    let traj = march(&ode, &cfg, &NewtonConfig::default()).unwrap();
    for n in 0..traj.intervals.len() - 1 {
        assert_eq!(traj.eval_interval(n, 1.0, 0), traj.eval_interval(n + 1, 0.0, 0));
        assert_eq!(traj.eval_interval(n, 1.0, 1), traj.eval_interval(n + 1, 0.0, 1));
    }
}

#[test]
fn cgp1_trajectories_are_only_c0() {
    let cfg = TimeMarchConfig { t_end: 1.0, tau: 0.25, scheme: Scheme::Cgp1, initial: InitialData::ExactFromSolution, condition_cap: None };
    let traj = march(&decay(), &cfg, &NewtonConfig::default()).unwrap();
    let mut max_jump: f64 = 0.0;
    for n in 0..traj.intervals.len() - 1 {
        assert_eq!(traj.eval_interval(n, 1.0, 0), traj.eval_interval(n + 1, 0.0, 0));
        let jump = traj.eval_interval(n, 1.0, 1)[0] - traj.eval_interval(n + 1, 0.0, 1)[0];
        max_jump = max_jump.max(jump.abs());
    }
    assert!(max_jump > 1e-3);
}

/// `x³ = 2` componentwise with a diagonal Jacobian.
struct Cube;

impl DiscreteSystem for Cube {
    fn dim(&self) -> usize {
        2
    }
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v * v * v - 2.0).collect()
    }
    fn jacobian(&self, x: &[f64]) -> CsrMatrix {
        CsrMatrix::from_diagonal(&x.iter().map(|v| 3.0 * v * v).collect::<Vec<_>>())
    }
}

/// `atan(x) = 0`, where undamped Newton diverges from |x₀| > 1.39.
struct Arctan;

impl DiscreteSystem for Arctan {
    fn dim(&self) -> usize {
        1
    }
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0].atan()]
    }
    fn jacobian(&self, x: &[f64]) -> CsrMatrix {
        CsrMatrix::from_diagonal(&[1.0 / (1.0 + x[0] * x[0])])
    }
}

#[test]
fn newton_converges_quadratically() {
    let cfg = NewtonConfig { damping: Damping::None, atol: 1e-14, rtol: 1e-14, ..Default::default() };
    let out = newton_solve(&Cube, &[1.0, 3.0], &cfg).unwrap();
    let root = 2f64.cbrt();
    assert!(out.x.iter().all(|v| (v - root).abs() < 1e-12));
    let h = &out.residual_norms;
    let n = h.len();
    assert!(h[n - 2] < 1e-2 * h[n - 3].sqrt());
}

#[test]
fn damping_rescues_divergent_newton() {
    let plain = NewtonConfig { damping: Damping::None, max_iterations: 5, ..Default::default() };
    assert!(matches!(newton_solve(&Arctan, &[1.5], &plain), Err(Error::NonConvergence { .. })));
    for damping in [Damping::line_search(), Damping::dogleg()] {
        let cfg = NewtonConfig { damping, max_iterations: 50, ..Default::default() };
        let out = newton_solve(&Arctan, &[3.0], &cfg).unwrap();
        assert!(out.x[0].abs() < 1e-7, "{damping:?}: {}", out.x[0]);
    }
}

#[test]
fn newton_reports_history_on_failure() {
    let cfg = NewtonConfig { damping: Damping::None, max_iterations: 3, ..Default::default() };
    match newton_solve(&Arctan, &[1.5], &cfg) {
        Err(Error::NonConvergence { iterations, history, .. }) => {
            assert!(iterations <= 3);
            assert!(!history.is_empty());
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let cfg = NewtonConfig { atol: 0.0, ..Default::default() };
    assert!(matches!(newton_solve(&Cube, &[1.0, 1.0], &cfg), Err(Error::Argument(_))));
    assert!(matches!(newton_solve(&Cube, &[1.0], &NewtonConfig::default()), Err(Error::Argument(_))));
    let bad = TimeMarchConfig { t_end: 1.0, tau: -0.1, scheme: Scheme::Cgp1, initial: InitialData::Zero, condition_cap: None };
    assert!(march(&decay(), &bad, &NewtonConfig::default()).is_err());
}

#[test]
fn failed_march_keeps_the_partial_trajectory() {
    // y' = y² blows up at t = 1 from y(0) = 1; Newton loses the root first
    struct Blowup;
    struct Slab {
        y0: f64,
        tau: f64,
    }
    impl DiscreteSystem for Slab {
        fn dim(&self) -> usize {
            1
        }
        fn residual(&self, x: &[f64]) -> Vec<f64> {
            let m = 0.5 * (self.y0 + x[0]);
            vec![x[0] - self.y0 - self.tau * m * m]
        }
        fn jacobian(&self, x: &[f64]) -> CsrMatrix {
            let m = 0.5 * (self.y0 + x[0]);
            CsrMatrix::from_diagonal(&[1.0 - self.tau * m])
        }
    }
    impl galcol::stepper::SlabModel for Blowup {
        fn slot_dim(&self) -> usize {
            1
        }
        fn slab_system<'a>(
            &'a self,
            _scheme: Scheme,
            _t0: f64,
            tau: f64,
            known: &[Vec<f64>],
        ) -> galcol::Result<Box<dyn DiscreteSystem + 'a>> {
            Ok(Box::new(Slab { y0: known[0][0], tau }))
        }
        fn initial_data(&self, _: InitialData) -> galcol::Result<(Vec<f64>, Vec<f64>)> {
            Ok((vec![1.0], vec![1.0]))
        }
    }
    let cfg = TimeMarchConfig { t_end: 3.0, tau: 0.25, scheme: Scheme::Cgp1, initial: InitialData::ExactFromSolution, condition_cap: None };
    let newton = NewtonConfig { max_iterations: 8, ..Default::default() };
    let failure = march(&Blowup, &cfg, &newton).unwrap_err();
    assert!(!failure.partial.intervals.is_empty());
    match failure.error {
        Error::Step { step, .. } => assert_eq!(step, failure.partial.intervals.len() + 1),
        e => panic!("unexpected {e:?}"),
    }
}
