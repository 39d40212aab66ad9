//! WebAssembly bindings for the demo page. Every exported function returns
//! flat `f64` arrays so the page can draw them without extra glue.

use galcol::assembly::Scheme;
use galcol::mesh::{generate_channel_cylinder, ChannelGeometry, Marker};
use galcol::stepper::{march, InitialData, LinearOde, NewtonConfig, TimeMarchConfig};
use galcol::time_kernel::HermiteBasis;
use wasm_bindgen::prelude::*;

/// Values per sample in [`hermite_table`]: `t`, four values, four derivatives.
pub const BASIS_STRIDE: usize = 9;
/// Values per row in [`ode_study`]: `τ`, then error and EOC for GCC¹(3) and cGP(1).
pub const STUDY_STRIDE: usize = 5;
/// Values per sample in [`ode_trajectory`]: `t`, `y_h`, `y_h'`, `y`, `y'`.
pub const TRAJECTORY_STRIDE: usize = 5;
/// Values per facet in [`channel_facets`]: two end points and a marker code.
pub const FACET_STRIDE: usize = 5;

fn parse_scheme(name: &str) -> Result<Scheme, String> {
    Scheme::parse(name).ok_or_else(|| format!("unknown scheme '{name}' (use gcc13 or cgp1)"))
}

/// Hermite basis on `[0, 1]` sampled at `samples ≥ 2` equidistant points.
pub fn hermite_table(samples: usize) -> Result<Vec<f64>, String> {
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let b = HermiteBasis::new();
    let mut out = Vec::with_capacity(samples * BASIS_STRIDE);
    for k in 0..samples {
        let t = k as f64 / (samples - 1) as f64;
        out.push(t);
        out.extend(b.values(t));
        out.extend(b.derivatives(t));
    }
    Ok(out)
}

fn decay_error(lambda: f64, scheme: Scheme, tau: f64, t_end: f64) -> Result<f64, String> {
    let ode = LinearOde::new(vec![vec![lambda]], vec![1.0]);
    let cfg = TimeMarchConfig { t_end, tau, scheme, initial: InitialData::ExactFromSolution, condition_cap: None };
    let traj = march(&ode, &cfg, &NewtonConfig::default()).map_err(|f| f.error.to_string())?;
    Ok((traj.eval(t_end)[0] - (lambda * t_end).exp()).abs())
}

/// End-time errors of `y' = λy`, `y(0) = 1` on `[0, 1]` for `levels` halvings
/// of `tau0`, with the observed orders between consecutive rows.
pub fn ode_study(lambda: f64, tau0: f64, levels: usize) -> Result<Vec<f64>, String> {
    if !(tau0 > 0.0 && tau0 <= 1.0) || levels == 0 || levels > 12 || !lambda.is_finite() {
        return Err("need 0 < τ₀ ≤ 1, 1 ≤ levels ≤ 12 and a finite λ".into());
    }
    let mut out = Vec::with_capacity(levels * STUDY_STRIDE);
    let mut prev: Option<[f64; 2]> = None;
    for l in 0..levels {
        let tau = tau0 / f64::from(1u32 << l);
        let e = [decay_error(lambda, Scheme::Gcc13, tau, 1.0)?, decay_error(lambda, Scheme::Cgp1, tau, 1.0)?];
        let eoc = |k: usize| prev.map_or(f64::NAN, |p| (p[k] / e[k]).log2());
        out.extend([tau, e[0], eoc(0), e[1], eoc(1)]);
        prev = Some(e);
    }
    Ok(out)
}

/// Discrete and exact solution of `y' = λy` sampled `per_step` times per interval.
pub fn ode_trajectory(lambda: f64, tau: f64, scheme: &str, per_step: usize) -> Result<Vec<f64>, String> {
    let scheme = parse_scheme(scheme)?;
    if !(tau > 0.0 && tau <= 1.0) || per_step == 0 || per_step > 200 || !lambda.is_finite() {
        return Err("need 0 < τ ≤ 1, 1 ≤ samples per step ≤ 200 and a finite λ".into());
    }
    let ode = LinearOde::new(vec![vec![lambda]], vec![1.0]);
    let cfg = TimeMarchConfig { t_end: 1.0, tau, scheme, initial: InitialData::ExactFromSolution, condition_cap: None };
    let traj = march(&ode, &cfg, &NewtonConfig::default()).map_err(|f| f.error.to_string())?;
    let mut out = Vec::new();
    for (n, st) in traj.intervals.iter().enumerate() {
        for k in 0..=per_step {
            let th = k as f64 / per_step as f64;
            let t = st.t0 + th * st.tau;
            let y = (lambda * t).exp();
            out.extend([t, traj.eval_interval(n, th, 0)[0], traj.eval_interval(n, th, 1)[0], y, lambda * y]);
        }
    }
    Ok(out)
}

/// Cell outlines of the channel mesh: eight coordinates per cell.
pub fn channel_cells(level: u32) -> Result<Vec<f64>, String> {
    if level > 4 {
        return Err("level must be at most 4".into());
    }
    let mesh = generate_channel_cylinder(&ChannelGeometry::dfg(), level).map_err(|e| e.to_string())?;
    Ok((0..mesh.num_cells()).flat_map(|c| mesh.vertices(c).into_iter().flatten()).collect())
}

/// Boundary facets of the channel mesh with marker codes
/// (0 inflow, 1 outflow, 2 wall).
pub fn channel_facets(level: u32) -> Result<Vec<f64>, String> {
    if level > 4 {
        return Err("level must be at most 4".into());
    }
    let mesh = generate_channel_cylinder(&ChannelGeometry::dfg(), level).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(mesh.facets.len() * FACET_STRIDE);
    for f in &mesh.facets {
        let (a, b) = mesh.edge_nodes(f.cell, f.edge);
        let code = match f.marker {
            Marker::Inflow => 0.0,
            Marker::Outflow => 1.0,
            Marker::Wall => 2.0,
        };
        out.extend([mesh.nodes[a][0], mesh.nodes[a][1], mesh.nodes[b][0], mesh.nodes[b][1], code]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = hermiteTable)]
pub fn js_hermite_table(samples: usize) -> Result<Vec<f64>, JsValue> {
    hermite_table(samples).map_err(JsValue::from)
}

#[wasm_bindgen(js_name = odeStudy)]
pub fn js_ode_study(lambda: f64, tau0: f64, levels: usize) -> Result<Vec<f64>, JsValue> {
    ode_study(lambda, tau0, levels).map_err(JsValue::from)
}

#[wasm_bindgen(js_name = odeTrajectory)]
pub fn js_ode_trajectory(lambda: f64, tau: f64, scheme: &str, per_step: usize) -> Result<Vec<f64>, JsValue> {
    ode_trajectory(lambda, tau, scheme, per_step).map_err(JsValue::from)
}

#[wasm_bindgen(js_name = channelCells)]
pub fn js_channel_cells(level: u32) -> Result<Vec<f64>, JsValue> {
    channel_cells(level).map_err(JsValue::from)
}

#[wasm_bindgen(js_name = channelFacets)]
pub fn js_channel_facets(level: u32) -> Result<Vec<f64>, JsValue> {
    channel_facets(level).map_err(JsValue::from)
}
