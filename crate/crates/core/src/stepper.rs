//! Newton solver and time-marching drivers for GCC¹(3) and cGP(1).
//!
//! A [`SlabModel`] produces one [`DiscreteSystem`] per time interval; the
//! Navier–Stokes assembly and the linear ODE adapter both implement it.

use std::sync::Arc;

use thiserror::Error;

use crate::assembly::{condense_dirichlet, BlockSystem, IntervalState, NsProblem, Scheme};
use crate::forms::VectorField;
use crate::mesh::Point;
use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, gmres, BlockSchurPreconditioner, CsrMatrix, PreconditionerKind, Preconditioner,
    SaddleLayout, SolverConfig, SparseLu,
};
use crate::time_kernel::{coupling_table, HermiteBasis};

/// Nonlinear algebraic system `q(x) = 0` with an exact Jacobian.
pub trait DiscreteSystem {
    fn dim(&self) -> usize;
    fn residual(&self, x: &[f64]) -> Vec<f64>;
    fn jacobian(&self, x: &[f64]) -> CsrMatrix;
    /// Rows whose residual is `x_i − target_i`; excluded from convergence norms.
    fn constraints(&self) -> &[usize] {
        &[]
    }
    /// Injects prescribed values into an initial guess.
    fn prepare(&self, _x: &mut [f64]) {}
    fn saddle_layout(&self) -> Option<&SaddleLayout> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    None,
    /// Step halving by `contraction` until `‖q(x+αδ)‖ ≤ (1 − c α) ‖q(x)‖`.
    LineSearch { contraction: f64, c: f64 },
    /// Trust-region dogleg on the Gauss–Newton model. `None` starts from the
    /// length of the first Newton step.
    Dogleg { initial_radius: Option<f64>, max_radius: f64 },
}

impl Damping {
    pub fn line_search() -> Self {
        Damping::LineSearch { contraction: 0.5, c: 1e-4 }
    }

    pub fn dogleg() -> Self {
        Damping::Dogleg { initial_radius: None, max_radius: 1e6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinearSolverKind {
    Direct,
    Gmres(SolverConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub atol: f64,
    pub rtol: f64,
    pub max_iterations: usize,
    pub damping: Damping,
    pub linear: LinearSolverKind,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
            max_iterations: 25,
            damping: Damping::line_search(),
            linear: LinearSolverKind::Direct,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0 && self.rtol > 0.0) || self.max_iterations == 0 {
            return Err(Error::Argument("Newton tolerances and iteration cap must be positive".into()));
        }
        match self.damping {
            Damping::LineSearch { contraction, c } if !(contraction > 0.0 && contraction < 1.0 && c > 0.0 && c < 1.0) => {
                Err(Error::Argument("line-search factors must lie in (0, 1)".into()))
            }
            Damping::Dogleg { initial_radius, max_radius }
                if !(max_radius > 0.0 && initial_radius.is_none_or(|r| r > 0.0)) =>
            {
                Err(Error::Argument("trust-region radii must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norms: Vec<f64>,
    pub linear_iterations: usize,
}

fn masked_norm(q: &[f64], mask: &[bool]) -> f64 {
    q.iter()
        .zip(mask)
        .filter(|(_, &m)| !m)
        .map(|(v, _)| v * v)
        .sum::<f64>()
        .sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves the condensed Newton system `S δ = −q`.
fn linear_solve(
    matrix: &CsrMatrix,
    rhs: &[f64],
    layout: Option<&SaddleLayout>,
    kind: &LinearSolverKind,
) -> Result<(Vec<f64>, usize)> {
    match kind {
        LinearSolverKind::Direct => Ok((SparseLu::new(matrix)?.solve(rhs)?, 1)),
        LinearSolverKind::Gmres(cfg) => {
            let pre: Option<Box<dyn Preconditioner>> = match (cfg.preconditioner, layout) {
                (PreconditionerKind::BlockSchur, Some(l)) => Some(Box::new(BlockSchurPreconditioner::new(matrix, l)?)),
                _ => None,
            };
            let out = gmres(matrix, rhs, pre.as_deref(), cfg)?;
            Ok((out.x, out.iterations))
        }
    }
}

/// Newton iteration with optional line search or dogleg damping.
pub fn newton_solve(system: &dyn DiscreteSystem, initial: &[f64], config: &NewtonConfig) -> Result<NewtonReport> {
    config.validate()?;
    let n = system.dim();
    if initial.len() != n {
        return Err(Error::Argument(format!("initial guess has length {} but the system has {n}", initial.len())));
    }
    let mut mask = vec![false; n];
    for &i in system.constraints() {
        mask[i] = true;
    }
    let mut x = initial.to_vec();
    system.prepare(&mut x);
    let mut q = system.residual(&x);
    let mut qn = masked_norm(&q, &mask);
    let target = config.atol.max(config.rtol * qn);
    let mut history = vec![qn];
    let mut linear_iterations = 0;
    let mut radius = match config.damping {
        Damping::Dogleg { initial_radius, .. } => initial_radius,
        _ => None,
    };
    let mut iterations = 0;
    while qn > target || !qn.is_finite() {
        if iterations == config.max_iterations || !qn.is_finite() {
            return Err(Error::NonConvergence { iterations, residual: qn, history });
        }
        iterations += 1;
        let block = BlockSystem {
            matrix: system.jacobian(&x),
            residual: q.clone(),
            rhs: q.iter().map(|v| -v).collect(),
            offsets: vec![0, n],
        };
        let cond = condense_dirichlet(&block, system.constraints())?;
        let (delta, lin) = linear_solve(&cond.matrix, &cond.rhs, system.saddle_layout(), &config.linear)?;
        linear_iterations += lin;
        let trial = |step: &[f64], alpha: f64| -> (Vec<f64>, Vec<f64>, f64) {
            let xt: Vec<f64> = x.iter().zip(step).map(|(a, b)| a + alpha * b).collect();
            let qt = system.residual(&xt);
            let nt = masked_norm(&qt, &mask);
            (xt, qt, nt)
        };
        match config.damping {
            Damping::None => {
                let (xt, qt, nt) = trial(&delta, 1.0);
                x = xt;
                q = qt;
                qn = nt;
            }
            Damping::LineSearch { contraction, c } => {
                let mut alpha = 1.0;
                loop {
                    let (xt, qt, nt) = trial(&delta, alpha);
                    if nt <= (1.0 - c * alpha) * qn || alpha < 1e-10 {
                        x = xt;
                        q = qt;
                        qn = nt;
                        break;
                    }
                    alpha *= contraction;
                }
            }
            Damping::Dogleg { max_radius, .. } => {
                let s = &cond.matrix;
                let qm: Vec<f64> = cond.rhs.iter().map(|v| -v).collect();
                let g = s.transpose().matvec(&qm);
                let jg = s.matvec(&g);
                let gnorm = norm(&g);
                let jgn2 = jg.iter().map(|v| v * v).sum::<f64>();
                let gn_len = norm(&delta);
                let mut r = radius.unwrap_or(gn_len);
                let mut accepted = false;
                for _ in 0..60 {
                    let step: Vec<f64> = if gn_len <= r {
                        delta.clone()
                    } else {
                        let tc = if jgn2 > 0.0 { gnorm * gnorm / jgn2 } else { 0.0 };
                        let cauchy: Vec<f64> = g.iter().map(|v| -tc * v).collect();
                        let clen = norm(&cauchy);
                        if clen >= r || gnorm == 0.0 {
                            g.iter().map(|v| -r / gnorm.max(f64::MIN_POSITIVE) * v).collect()
                        } else {
                            let d: Vec<f64> = delta.iter().zip(&cauchy).map(|(a, b)| a - b).collect();
                            let (aa, bb) = (d.iter().map(|v| v * v).sum::<f64>(), 2.0 * cauchy.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>());
                            let cc = clen * clen - r * r;
                            let beta = (-bb + (bb * bb - 4.0 * aa * cc).max(0.0).sqrt()) / (2.0 * aa);
                            cauchy.iter().zip(&d).map(|(a, b)| a + beta * b).collect()
                        }
                    };
                    let js = s.matvec(&step);
                    let model: f64 = qm.iter().zip(&js).map(|(a, b)| (a + b) * (a + b)).sum();
                    let (xt, qt, nt) = trial(&step, 1.0);
                    let pred = qn * qn - model;
                    let ared = qn * qn - nt * nt;
                    let rho = if pred > 0.0 { ared / pred } else { -1.0 };
                    let slen = norm(&step);
                    if rho < 0.25 {
                        r = 0.25 * slen;
                    } else if rho > 0.75 && slen >= 0.99 * r {
                        r = (2.0 * r).min(max_radius);
                    }
                    if rho > 1e-4 || (nt <= target && nt.is_finite()) {
                        x = xt;
                        q = qt;
                        qn = nt;
                        accepted = true;
                        break;
                    }
                    if r < 1e-14 * (1.0 + norm(&x)) {
                        break;
                    }
                }
                radius = Some(r);
                if !accepted {
                    history.push(qn);
                    return Err(Error::NonConvergence { iterations, residual: qn, history });
                }
            }
        }
        history.push(qn);
    }
    Ok(NewtonReport { x, iterations, residual_norms: history, linear_iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    ExactFromSolution,
    Zero,
}

/// Source of per-interval algebraic systems.
pub trait SlabModel {
    /// Length of one temporal coefficient vector.
    fn slot_dim(&self) -> usize;
    /// System for the unknown slots of `[t0, t0 + tau]` given the known slots.
    fn slab_system<'a>(
        &'a self,
        scheme: Scheme,
        t0: f64,
        tau: f64,
        known: &[Vec<f64>],
    ) -> Result<Box<dyn DiscreteSystem + 'a>>;
    /// Post-processing of freshly solved slots (e.g. pressure normalization).
    fn finalize(&self, _scheme: Scheme, _slots: &mut [Vec<f64>]) {}
    /// Value and time derivative at `t = 0`.
    fn initial_data(&self, which: InitialData) -> Result<(Vec<f64>, Vec<f64>)> {
        match which {
            InitialData::Zero => Ok((vec![0.0; self.slot_dim()], vec![0.0; self.slot_dim()])),
            InitialData::ExactFromSolution => {
                Err(Error::Argument("this model has no exact solution for initial data".into()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub newton_iterations: usize,
    pub residual_norm: f64,
    pub linear_iterations: usize,
    pub condition_number: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub intervals: Vec<IntervalState>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        self.intervals.last().map_or(0.0, |s| s.t0 + s.tau)
    }

    /// Value (`derivative = 0`) or physical time derivative (`1`) of the
    /// discrete solution on interval `n` at reference time `t_hat ∈ [0, 1]`.
    pub fn eval_interval(&self, n: usize, t_hat: f64, derivative: u8) -> Vec<f64> {
        let st = &self.intervals[n];
        let len = st.slots[0].len();
        let mut out = vec![0.0; len];
        match self.scheme {
            Scheme::Gcc13 => {
                let b = HermiteBasis::new();
                for (l, slot) in st.slots.iter().enumerate() {
                    let w = b.eval(l, t_hat, derivative);
                    let w = if derivative == 1 { w / st.tau } else { w };
                    for (o, v) in out.iter_mut().zip(slot) {
                        *o += w * v;
                    }
                }
            }
            Scheme::Cgp1 => {
                let w = if derivative == 1 {
                    [-1.0 / st.tau, 1.0 / st.tau]
                } else {
                    [1.0 - t_hat, t_hat]
                };
                for (l, slot) in st.slots.iter().enumerate() {
                    for (o, v) in out.iter_mut().zip(slot) {
                        *o += w[l] * v;
                    }
                }
            }
        }
        out
    }

    /// Value at time `t`, taken from the interval containing it.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let n = self
            .intervals
            .iter()
            .position(|s| t <= s.t0 + s.tau)
            .unwrap_or(self.intervals.len() - 1);
        let st = &self.intervals[n];
        self.eval_interval(n, ((t - st.t0) / st.tau).clamp(0.0, 1.0), 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeMarchConfig {
    pub t_end: f64,
    pub tau: f64,
    pub scheme: Scheme,
    pub initial: InitialData,
    /// Dense-SVD cap for per-step condition numbers; `None` skips them.
    pub condition_cap: Option<usize>,
}

impl TimeMarchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.t_end > 0.0) {
            return Err(Error::Argument("T and τ must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_end / self.tau) - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Error)]
#[error("time marching stopped: {error}")]
pub struct MarchFailure {
    pub partial: Trajectory,
    #[source]
    pub error: Error,
}

fn condition_of(system: &dyn DiscreteSystem, x: &[f64], cap: usize) -> Option<f64> {
    let s = system.jacobian(x).with_identity_rows_cols(system.constraints());
    condition_number(&s, cap).ok()
}

fn solve_slab(
    model: &dyn SlabModel,
    scheme: Scheme,
    t0: f64,
    tau: f64,
    known: Vec<Vec<f64>>,
    newton: &NewtonConfig,
    cap: Option<usize>,
) -> Result<(IntervalState, NewtonReport, Option<f64>)> {
    let system = model.slab_system(scheme, t0, tau, &known)?;
    let guess: Vec<f64> = known.concat();
    let report = newton_solve(system.as_ref(), &guess, newton)?;
    let kappa = cap.and_then(|c| condition_of(system.as_ref(), &report.x, c));
    let d = model.slot_dim();
    let mut solved: Vec<Vec<f64>> = report.x.chunks(d).map(|c| c.to_vec()).collect();
    model.finalize(scheme, &mut solved);
    let mut slots = known;
    slots.extend(solved);
    Ok((IntervalState { t0, tau, slots }, report, kappa))
}

/// One GCC¹(3) interval from the previous end value and τ-scaled derivative.
pub fn step_gcc13(
    model: &dyn SlabModel,
    t0: f64,
    tau: f64,
    value: &[f64],
    scaled_rate: &[f64],
    newton: &NewtonConfig,
) -> Result<(IntervalState, NewtonReport)> {
    let (s, r, _) = solve_slab(model, Scheme::Gcc13, t0, tau, vec![value.to_vec(), scaled_rate.to_vec()], newton, None)?;
    Ok((s, r))
}

/// One cGP(1) interval from the previous end value.
pub fn step_cgp1(
    model: &dyn SlabModel,
    t0: f64,
    tau: f64,
    value: &[f64],
    newton: &NewtonConfig,
) -> Result<(IntervalState, NewtonReport)> {
    let (s, r, _) = solve_slab(model, Scheme::Cgp1, t0, tau, vec![value.to_vec()], newton, None)?;
    Ok((s, r))
}

/// Marches `N = T / τ` uniform intervals.
pub fn march(
    model: &dyn SlabModel,
    config: &TimeMarchConfig,
    newton: &NewtonConfig,
) -> std::result::Result<Trajectory, MarchFailure> {
    let mut traj = Trajectory { scheme: config.scheme, intervals: Vec::new(), diagnostics: Vec::new() };
    if let Err(error) = config.validate() {
        return Err(MarchFailure { partial: traj, error });
    }
    let (v0, r0) = match model.initial_data(config.initial) {
        Ok(d) => d,
        Err(error) => return Err(MarchFailure { partial: traj, error }),
    };
    let steps = config.steps();
    let tau = config.tau;
    let mut known = match config.scheme {
        Scheme::Gcc13 => vec![v0, r0.iter().map(|v| tau * v).collect()],
        Scheme::Cgp1 => vec![v0],
    };
    for n in 0..steps {
        let t0 = n as f64 * tau;
        match solve_slab(model, config.scheme, t0, tau, known.clone(), newton, config.condition_cap) {
            Ok((state, report, kappa)) => {
                let k = config.scheme.known_slots();
                known = state.slots[k..].to_vec();
                traj.diagnostics.push(StepDiagnostics {
                    step: n + 1,
                    time: t0 + tau,
                    newton_iterations: report.iterations,
                    residual_norm: *report.residual_norms.last().unwrap(),
                    linear_iterations: report.linear_iterations,
                    condition_number: kappa,
                });
                traj.intervals.push(state);
            }
            Err(e) => {
                let error = Error::Step { step: n + 1, time: t0 + tau, source: Box::new(e) };
                return Err(MarchFailure { partial: traj, error });
            }
        }
    }
    Ok(traj)
}

/// Forcing `b(t)` of a linear ODE, returning `(b, b')`.
pub type OdeForcing = Arc<dyn Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync>;

/// Linear system `y' = A y + b(t)`, `y(0) = y0`.
#[derive(Clone)]
pub struct LinearOde {
    pub a: Vec<Vec<f64>>,
    pub forcing: Option<OdeForcing>,
    pub y0: Vec<f64>,
}

impl LinearOde {
    pub fn new(a: Vec<Vec<f64>>, y0: Vec<f64>) -> Self {
        Self { a, forcing: None, y0 }
    }

    fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.a.iter().map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum()).collect()
    }

    fn forcing_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        match &self.forcing {
            Some(f) => f(t),
            None => (vec![0.0; self.y0.len()], vec![0.0; self.y0.len()]),
        }
    }
}

struct OdeSlab<'a> {
    ode: &'a LinearOde,
    scheme: Scheme,
    tau: f64,
    known: Vec<Vec<f64>>,
    /// Data part of the residual.
    load: Vec<f64>,
}

impl DiscreteSystem for OdeSlab<'_> {
    fn dim(&self) -> usize {
        self.scheme.known_slots() * self.ode.y0.len()
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let n = self.ode.y0.len();
        let tau = self.tau;
        let mut q = match self.scheme {
            Scheme::Gcc13 => {
                let s = coupling_table().s;
                let slots = [&self.known[0][..], &self.known[1][..], &x[..n], &x[n..]];
                let mut q = vec![0.0; 2 * n];
                for i in 0..n {
                    q[i] = slots[2][i] - slots[0][i];
                }
                for l in 0..4 {
                    let ay = self.ode.apply(slots[l]);
                    for i in 0..n {
                        q[i] -= tau * s[l] * ay[i];
                    }
                }
                let ay2 = self.ode.apply(slots[2]);
                for i in 0..n {
                    q[n + i] = slots[3][i] / tau - ay2[i];
                }
                q
            }
            Scheme::Cgp1 => {
                let y0 = &self.known[0];
                let sum: Vec<f64> = y0.iter().zip(x).map(|(a, b)| a + b).collect();
                let a = self.ode.apply(&sum);
                (0..n).map(|i| x[i] - y0[i] - 0.5 * tau * a[i]).collect()
            }
        };
        for (qi, l) in q.iter_mut().zip(&self.load) {
            *qi -= l;
        }
        q
    }

    fn jacobian(&self, _x: &[f64]) -> CsrMatrix {
        let n = self.ode.y0.len();
        let tau = self.tau;
        let a = &self.ode.a;
        let mut t = Vec::new();
        match self.scheme {
            Scheme::Gcc13 => {
                let s = coupling_table().s;
                for i in 0..n {
                    t.push((i, i, 1.0));
                    t.push((n + i, n + i, 1.0 / tau));
                    for k in 0..n {
                        t.push((i, k, -tau * s[2] * a[i][k]));
                        t.push((i, n + k, -tau * s[3] * a[i][k]));
                        t.push((n + i, k, -a[i][k]));
                    }
                }
                CsrMatrix::from_triplets(2 * n, 2 * n, &t)
            }
            Scheme::Cgp1 => {
                for i in 0..n {
                    t.push((i, i, 1.0));
                    for k in 0..n {
                        t.push((i, k, -0.5 * tau * a[i][k]));
                    }
                }
                CsrMatrix::from_triplets(n, n, &t)
            }
        }
    }
}

impl SlabModel for LinearOde {
    fn slot_dim(&self) -> usize {
        self.y0.len()
    }

    fn slab_system<'a>(
        &'a self,
        scheme: Scheme,
        t0: f64,
        tau: f64,
        known: &[Vec<f64>],
    ) -> Result<Box<dyn DiscreteSystem + 'a>> {
        let n = self.y0.len();
        let t1 = t0 + tau;
        let load = match scheme {
            Scheme::Gcc13 => {
                let s = coupling_table().s;
                let (b0, db0) = self.forcing_at(t0);
                let (b1, db1) = self.forcing_at(t1);
                let mut l = vec![0.0; 2 * n];
                for i in 0..n {
                    l[i] = tau * (s[0] * b0[i] + s[1] * tau * db0[i] + s[2] * b1[i] + s[3] * tau * db1[i]);
                    l[n + i] = b1[i];
                }
                l
            }
            Scheme::Cgp1 => {
                let a = 0.5 / 3f64.sqrt();
                let mut l = vec![0.0; n];
                for th in [0.5 - a, 0.5 + a] {
                    let (b, _) = self.forcing_at(t0 + th * tau);
                    for i in 0..n {
                        l[i] += 0.5 * tau * b[i];
                    }
                }
                l
            }
        };
        Ok(Box::new(OdeSlab { ode: self, scheme, tau, known: known.to_vec(), load }))
    }

    fn initial_data(&self, which: InitialData) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.y0.len();
        match which {
            InitialData::Zero => Ok((vec![0.0; n], vec![0.0; n])),
            InitialData::ExactFromSolution => {
                let (b, _) = self.forcing_at(0.0);
                let rate = self.apply(&self.y0).iter().zip(&b).map(|(a, b)| a + b).collect();
                Ok((self.y0.clone(), rate))
            }
        }
    }
}

/// Scalar field `(x, t) ↦ (value, ∂t value)`.
pub type ScalarField = Arc<dyn Fn(Point, f64) -> (f64, f64) + Send + Sync>;

/// Exact velocity and pressure used for initial data.
#[derive(Clone)]
pub struct ExactSolution {
    pub velocity: VectorField,
    pub pressure: ScalarField,
}

/// Navier–Stokes slab model built on [`NsProblem`].
pub struct NsModel {
    pub problem: NsProblem,
    pub exact: Option<ExactSolution>,
}

struct NsSlab<'a> {
    problem: &'a NsProblem,
    scheme: Scheme,
    tau: f64,
    known: Vec<Vec<f64>>,
    load: Vec<f64>,
    constrained: Vec<usize>,
    targets: Vec<f64>,
    layout: SaddleLayout,
}

impl DiscreteSystem for NsSlab<'_> {
    fn dim(&self) -> usize {
        self.problem.dofs_per_interval(self.scheme)
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut q = self.problem.residual(self.scheme, self.tau, &self.known, x, &self.load);
        for (&i, &t) in self.constrained.iter().zip(&self.targets) {
            q[i] = x[i] - t;
        }
        q
    }

    fn jacobian(&self, x: &[f64]) -> CsrMatrix {
        self.problem
            .jacobian(self.scheme, self.tau, &self.known, x)
            .with_identity_rows(&self.constrained)
    }

    fn constraints(&self) -> &[usize] {
        &self.constrained
    }

    fn prepare(&self, x: &mut [f64]) {
        for (&i, &t) in self.constrained.iter().zip(&self.targets) {
            x[i] = t;
        }
    }

    fn saddle_layout(&self) -> Option<&SaddleLayout> {
        Some(&self.layout)
    }
}

impl NsModel {
    pub fn new(problem: NsProblem) -> Self {
        Self { problem, exact: None }
    }

    pub fn with_exact(problem: NsProblem, exact: ExactSolution) -> Self {
        Self { problem, exact: Some(exact) }
    }

    /// Slab system with constrained rows replaced by `x_i − target_i`.
    pub fn system<'a>(
        &'a self,
        scheme: Scheme,
        t0: f64,
        tau: f64,
        known: &[Vec<f64>],
    ) -> Result<Box<dyn DiscreteSystem + 'a>> {
        let p = &self.problem;
        if known.len() != scheme.known_slots() || known.iter().any(|k| k.len() != p.slot_dim()) {
            return Err(Error::Argument("known slots do not match the scheme or the space".into()));
        }
        let (constrained, targets) = p.constraints(scheme, t0, tau);
        Ok(Box::new(NsSlab {
            problem: p,
            scheme,
            tau,
            known: known.to_vec(),
            load: p.slab_load(scheme, t0, tau),
            constrained,
            targets,
            layout: p.saddle_layout(scheme, tau),
        }))
    }

    /// Nodal interpolant of the exact solution (`rate = false`) or of its
    /// time derivative at time `t`.
    pub fn interpolate_exact(&self, t: f64, rate: bool) -> Result<Vec<f64>> {
        let ex = self
            .exact
            .as_ref()
            .ok_or_else(|| Error::Argument("no exact solution attached to the model".into()))?;
        let p = &self.problem;
        let mut out = Vec::with_capacity(p.slot_dim());
        for c in 0..2 {
            out.extend(p.pair.velocity.interpolate(|x| {
                let (v, dv) = (ex.velocity)(x, t);
                if rate { dv[c] } else { v[c] }
            }));
        }
        out.extend(p.pair.pressure.interpolate(|x| {
            let (v, dv) = (ex.pressure)(x, t);
            if rate { dv } else { v }
        }));
        p.normalize_pressure(&mut out);
        Ok(out)
    }
}

impl SlabModel for NsModel {
    fn slot_dim(&self) -> usize {
        self.problem.slot_dim()
    }

    fn slab_system<'a>(
        &'a self,
        scheme: Scheme,
        t0: f64,
        tau: f64,
        known: &[Vec<f64>],
    ) -> Result<Box<dyn DiscreteSystem + 'a>> {
        self.system(scheme, t0, tau, known)
    }

    fn finalize(&self, _scheme: Scheme, slots: &mut [Vec<f64>]) {
        for s in slots {
            self.problem.normalize_pressure(s);
        }
    }

    fn initial_data(&self, which: InitialData) -> Result<(Vec<f64>, Vec<f64>)> {
        match which {
            InitialData::Zero => Ok((vec![0.0; self.slot_dim()], vec![0.0; self.slot_dim()])),
            InitialData::ExactFromSolution => Ok((self.interpolate_exact(0.0, false)?, self.interpolate_exact(0.0, true)?)),
        }
    }
}
