//! Channel-with-cylinder scenarios: strong versus Nitsche comparison and
//! drag/lift time series.

use std::sync::Arc;

use crate::assembly::NsProblem;
use crate::error::Result;
use crate::fem::TaylorHoodPair;
use crate::forms::{zero_field, BcMode, NitscheParams, ProblemData, VectorField};
use crate::mesh::{generate_channel_cylinder, ChannelGeometry, Point};
use crate::stepper::{march, InitialData, NsModel, StepDiagnostics, TimeMarchConfig, Trajectory};

use super::config::RunConfig;
use super::output::{fmt_f64, write_csv};
use super::probe::{cross_section, drag_lift, relative_difference, CrossSectionSample, Forces, DFG_MEAN_SPEED, MEAN_SPEED, REFERENCE_LENGTH};

/// Inflow coefficient of the low-Reynolds channel profile.
pub const CHANNEL_PROFILE: f64 = -7.13861;

/// `Re = Ū L / ν`.
pub fn reynolds_number(nu: f64) -> f64 {
    MEAN_SPEED * REFERENCE_LENGTH / nu
}

/// Parabolic inflow `(−7.13861 (y − 0.41) y t², 0)` on `x = 0`, zero elsewhere.
pub fn channel_inflow() -> VectorField {
    Arc::new(|x: Point, t: f64| {
        if x[0] > 1e-12 {
            return ([0.0; 2], [0.0; 2]);
        }
        let s = CHANNEL_PROFILE * (x[1] - 0.41) * x[1];
        ([s * t * t, 0.0], [2.0 * s * t, 0.0])
    })
}

/// `3t² − 2t³` for `t < 1`, `1` afterwards, with its derivative.
pub fn dfg_ramp(t: f64) -> (f64, f64) {
    if t < 1.0 {
        (3.0 * t * t - 2.0 * t * t * t, 6.0 * t - 6.0 * t * t)
    } else {
        (1.0, 0.0)
    }
}

/// Peak-1.5 parabolic inflow on `x = 0` ramped by [`dfg_ramp`], zero elsewhere.
pub fn dfg_inflow(height: f64) -> VectorField {
    Arc::new(move |x: Point, t: f64| {
        if x[0] > 1e-12 {
            return ([0.0; 2], [0.0; 2]);
        }
        let s = 4.0 * 1.5 * x[1] * (height - x[1]) / height / height;
        let (r, dr) = dfg_ramp(t);
        ([s * r, 0.0], [s * dr, 0.0])
    })
}

fn channel_model(config: &RunConfig, inflow: VectorField, bc: BcMode) -> Result<NsModel> {
    let geom = ChannelGeometry::dfg();
    let mesh = generate_channel_cylinder(&geom, config.levels)?;
    let pair = TaylorHoodPair::new(mesh, config.degree)?;
    let data = ProblemData::new(config.nu, zero_field(), inflow)?;
    let params = NitscheParams { mode: bc, ..config.nitsche() };
    let mut problem = NsProblem::new(pair, data, params)?;
    problem.parallel = !config.deterministic;
    Ok(NsModel::new(problem))
}

fn run(config: &RunConfig, model: &NsModel) -> Result<Trajectory> {
    let cfg = TimeMarchConfig {
        t_end: config.t_end,
        tau: config.tau,
        scheme: config.scheme,
        initial: InitialData::Zero,
        condition_cap: None,
    };
    march(model, &cfg, &config.newton()).map_err(|f| f.error)
}

/// Final-time slot vector of a trajectory.
pub fn final_slot(traj: &Trajectory) -> Vec<f64> {
    traj.eval_interval(traj.intervals.len() - 1, 1.0, 0)
}

/// `½ vᵀ M v` of a slot vector.
pub fn kinetic_energy(problem: &NsProblem, slot: &[f64]) -> f64 {
    let v = &slot[..problem.j()];
    0.5 * problem.ops.mass.matvec(v).iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelComparison {
    pub reynolds: f64,
    pub strong: Vec<CrossSectionSample>,
    pub nitsche: Vec<CrossSectionSample>,
    pub speed_difference: f64,
    pub pressure_difference: f64,
    pub energy: [f64; 2],
    pub diagnostics: [Vec<StepDiagnostics>; 2],
}

/// Runs the channel with strong and with Nitsche boundary conditions and
/// compares the profiles on `x = 0.2` at the final time.
pub fn run_channel_compare(config: &RunConfig) -> Result<ChannelComparison> {
    config.validate()?;
    let geom = ChannelGeometry::dfg();
    let mut profiles = Vec::new();
    let mut energy = [0.0; 2];
    let mut diagnostics = [Vec::new(), Vec::new()];
    for (k, bc) in [BcMode::Strong, BcMode::Nitsche].into_iter().enumerate() {
        let model = channel_model(config, channel_inflow(), bc)?;
        let traj = run(config, &model)?;
        let slot = final_slot(&traj);
        energy[k] = kinetic_energy(&model.problem, &slot);
        profiles.push(cross_section(&model.problem, &slot, &geom, 0.2, config.samples)?);
        diagnostics[k] = traj.diagnostics;
    }
    let nitsche = profiles.pop().unwrap();
    let strong = profiles.pop().unwrap();
    let speeds = |s: &[CrossSectionSample]| s.iter().map(|c| c.speed()).collect::<Vec<_>>();
    let pressures = |s: &[CrossSectionSample]| s.iter().map(|c| c.pressure).collect::<Vec<_>>();
    Ok(ChannelComparison {
        reynolds: reynolds_number(config.nu),
        speed_difference: relative_difference(&speeds(&nitsche), &speeds(&strong)),
        pressure_difference: relative_difference(&pressures(&nitsche), &pressures(&strong)),
        strong,
        nitsche,
        energy,
        diagnostics,
    })
}

pub fn write_channel_compare(config: &RunConfig, cmp: &ChannelComparison) -> Result<()> {
    let rows: Vec<Vec<String>> = cmp
        .strong
        .iter()
        .zip(&cmp.nitsche)
        .map(|(s, n)| {
            [s.y, s.velocity[0], s.velocity[1], s.speed(), s.pressure, n.velocity[0], n.velocity[1], n.speed(), n.pressure]
                .map(fmt_f64)
                .to_vec()
        })
        .collect();
    write_csv(
        &config.out,
        "crosssection.csv",
        &["y", "u_strong", "v_strong", "speed_strong", "p_strong", "u_nitsche", "v_nitsche", "speed_nitsche", "p_nitsche"],
        &rows,
    )?;
    let diag: Vec<Vec<String>> = ["strong", "nitsche"]
        .iter()
        .zip(&cmp.diagnostics)
        .flat_map(|(name, ds)| {
            ds.iter().map(move |d| {
                vec![
                    name.to_string(),
                    d.step.to_string(),
                    fmt_f64(d.time),
                    d.newton_iterations.to_string(),
                    fmt_f64(d.residual_norm),
                    d.linear_iterations.to_string(),
                ]
            })
        })
        .collect();
    write_csv(&config.out, "diagnostics.csv", &["bc", "step", "time", "newton_iterations", "residual", "linear_iterations"], &diag)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DragLiftSeries {
    pub times: Vec<f64>,
    pub forces: Vec<Forces>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Message of the error that stopped the run early, if any.
    pub failure: Option<String>,
}

/// Flow around the cylinder from rest with the ramped inflow; drag and lift
/// are evaluated at every time node.
pub fn run_dfg(config: &RunConfig) -> Result<DragLiftSeries> {
    config.validate()?;
    let geom = ChannelGeometry::dfg();
    let model = channel_model(config, dfg_inflow(geom.height), config.bc)?;
    let cfg = TimeMarchConfig {
        t_end: config.t_end,
        tau: config.tau,
        scheme: config.scheme,
        initial: InitialData::Zero,
        condition_cap: None,
    };
    let (traj, failure) = match march(&model, &cfg, &config.newton()) {
        Ok(t) => (t, None),
        Err(f) => (f.partial, Some(f.error.to_string())),
    };
    let mut times = Vec::new();
    let mut forces = Vec::new();
    for n in 0..traj.intervals.len() {
        let st = &traj.intervals[n];
        times.push(st.t0 + st.tau);
        forces.push(drag_lift(&model.problem, &traj.eval_interval(n, 1.0, 0), &geom, config.nu, DFG_MEAN_SPEED)?);
    }
    Ok(DragLiftSeries { times, forces, diagnostics: traj.diagnostics, failure })
}

pub fn write_dfg(config: &RunConfig, series: &DragLiftSeries) -> Result<()> {
    let rows: Vec<Vec<String>> = series
        .times
        .iter()
        .zip(&series.forces)
        .map(|(t, f)| [*t, f.drag, f.lift, f.c_drag, f.c_lift].map(fmt_f64).to_vec())
        .collect();
    write_csv(&config.out, "draglift.csv", &["time", "drag", "lift", "c_drag", "c_lift"], &rows)?;
    let diag: Vec<Vec<String>> = series
        .diagnostics
        .iter()
        .map(|d| {
            vec![
                d.step.to_string(),
                fmt_f64(d.time),
                d.newton_iterations.to_string(),
                fmt_f64(d.residual_norm),
                d.linear_iterations.to_string(),
            ]
        })
        .collect();
    write_csv(&config.out, "diagnostics.csv", &["step", "time", "newton_iterations", "residual", "linear_iterations"], &diag)
}
