//! Convergence study on the manufactured solution under joint (τ, h) halving.

use crate::assembly::NsProblem;
use crate::error::Result;
use crate::fem::TaylorHoodPair;
use crate::mesh::generate_unit_square;
use crate::stepper::{march, InitialData, NsModel, StepDiagnostics, TimeMarchConfig};

use super::config::RunConfig;
use super::manufactured::{manufactured_exact, manufactured_problem};
use super::norms::{eoc, error_norms, ErrorNorms};
use super::output::{fmt_f64, fmt_opt, write_csv};

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub level: u32,
    pub tau: f64,
    pub h: f64,
    pub dofs: usize,
    pub condition_number: Option<f64>,
    /// `None` when the level failed; the message is kept in `failure`.
    pub errors: Option<ErrorNorms>,
    pub failure: Option<String>,
    pub diagnostics: Vec<StepDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<LevelRow>,
}

fn columns(e: &ErrorNorms) -> [f64; 4] {
    [e.v_l2l2, e.p_l2l2, e.v_linf, e.p_linf]
}

impl ErrorReport {
    /// EOC of the four error columns between row `i − 1` and row `i`.
    pub fn eoc(&self, i: usize) -> Option<[f64; 4]> {
        let prev = self.rows.get(i.checked_sub(1)?)?.errors?;
        let cur = self.rows.get(i)?.errors?;
        let (a, b) = (columns(&prev), columns(&cur));
        Some([0, 1, 2, 3].map(|k| eoc(a[k], b[k])))
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = vec![
                    r.level.to_string(),
                    fmt_f64(r.tau),
                    fmt_f64(r.h),
                    r.dofs.to_string(),
                    fmt_opt(r.condition_number),
                ];
                match r.errors {
                    Some(e) => row.extend(columns(&e).map(fmt_f64)),
                    None => row.extend(std::iter::repeat_n(String::new(), 4)),
                }
                match self.eoc(i) {
                    Some(o) => row.extend(o.map(fmt_f64)),
                    None => row.extend(std::iter::repeat_n(String::new(), 4)),
                }
                row.push(r.failure.clone().unwrap_or_default());
                row
            })
            .collect()
    }
}

pub const ERROR_HEADER: [&str; 14] = [
    "level", "tau", "h", "dofs", "kappa2", "v_l2l2", "p_l2l2", "v_linf", "p_linf", "eoc_v_l2l2", "eoc_p_l2l2",
    "eoc_v_linf", "eoc_p_linf", "failure",
];

pub const DIAGNOSTICS_HEADER: [&str; 7] =
    ["level", "step", "time", "newton_iterations", "residual", "linear_iterations", "kappa2"];

fn run_level(config: &RunConfig, level: u32) -> Result<LevelRow> {
    let cells = 2usize << level;
    let mesh = generate_unit_square(cells)?;
    let h = mesh.max_cell_diameter();
    let tau = config.tau / f64::from(1u32 << level);
    let pair = TaylorHoodPair::new(mesh, config.degree)?;
    let mut problem = NsProblem::new(pair, manufactured_problem(config.nu)?, config.nitsche())?;
    problem.parallel = !config.deterministic;
    let dofs = problem.dofs_per_interval(config.scheme);
    let model = NsModel::with_exact(problem, manufactured_exact(config.nu));
    let cap = (config.condition_cap >= dofs).then_some(config.condition_cap);
    let march_cfg = TimeMarchConfig {
        t_end: config.t_end,
        tau,
        scheme: config.scheme,
        initial: InitialData::ExactFromSolution,
        condition_cap: cap,
    };
    let mut row = LevelRow { level, tau, h, dofs, condition_number: None, errors: None, failure: None, diagnostics: Vec::new() };
    match march(&model, &march_cfg, &config.newton()) {
        Ok(traj) => {
            row.condition_number = traj.diagnostics.first().and_then(|d| d.condition_number);
            row.errors = Some(error_norms(&model.problem, &traj, model.exact.as_ref().unwrap(), config.sampling)?);
            row.diagnostics = traj.diagnostics;
        }
        Err(f) => {
            row.failure = Some(f.error.to_string());
            row.diagnostics = f.partial.diagnostics;
        }
    }
    Ok(row)
}

/// Runs levels `0..=config.levels`; a failing level is recorded and the
/// study continues.
pub fn run_convergence_study(config: &RunConfig) -> Result<ErrorReport> {
    config.validate()?;
    let mut rows = Vec::new();
    for level in 0..=config.levels {
        rows.push(run_level(config, level)?);
    }
    Ok(ErrorReport { rows })
}

/// Writes `errors.csv` and `diagnostics.csv` into the output directory.
pub fn write_convergence_report(config: &RunConfig, report: &ErrorReport) -> Result<()> {
    write_csv(&config.out, "errors.csv", &ERROR_HEADER, &report.csv_rows())?;
    let diag: Vec<Vec<String>> = report
        .rows
        .iter()
        .flat_map(|r| {
            r.diagnostics.iter().map(move |d| {
                vec![
                    r.level.to_string(),
                    d.step.to_string(),
                    fmt_f64(d.time),
                    d.newton_iterations.to_string(),
                    fmt_f64(d.residual_norm),
                    d.linear_iterations.to_string(),
                    fmt_opt(d.condition_number),
                ]
            })
        })
        .collect();
    write_csv(&config.out, "diagnostics.csv", &DIAGNOSTICS_HEADER, &diag)
}

/// Writes the Newton matrix of the first interval of `level`, evaluated at
/// the initial data, in Matrix Market format.
pub fn dump_newton_matrix(config: &RunConfig, level: u32, path: &std::path::Path) -> Result<()> {
    use crate::stepper::SlabModel;
    let mesh = generate_unit_square(2usize << level)?;
    let pair = TaylorHoodPair::new(mesh, config.degree)?;
    let problem = NsProblem::new(pair, manufactured_problem(config.nu)?, config.nitsche())?;
    let model = NsModel::with_exact(problem, manufactured_exact(config.nu));
    let tau = config.tau / f64::from(1u32 << level);
    let (v, r) = model.initial_data(InitialData::ExactFromSolution)?;
    let known = match config.scheme {
        crate::assembly::Scheme::Gcc13 => vec![v, r.iter().map(|x| tau * x).collect()],
        crate::assembly::Scheme::Cgp1 => vec![v],
    };
    let system = model.system(config.scheme, 0.0, tau, &known)?;
    let mut x = known.concat();
    system.prepare(&mut x);
    let s = system.jacobian(&x).with_identity_rows_cols(system.constraints());
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, s.to_matrix_market())?;
    Ok(())
}
