//! Benchmark scenarios: manufactured-solution convergence study, strong
//! versus Nitsche channel comparison and the flow around a cylinder.

pub mod channel;
pub mod config;
pub mod convergence;
pub mod manufactured;
pub mod norms;
pub mod output;
pub mod probe;

pub use config::{LinearChoice, RunConfig, Scenario};
pub use convergence::{dump_newton_matrix, run_convergence_study, write_convergence_report, ErrorReport, LevelRow};
pub use manufactured::{manufactured_divergence, manufactured_exact, manufactured_problem, manufactured_solution};
pub use norms::{eoc, error_norms, spatial_errors, ErrorNorms};
pub use probe::{cross_section, drag_lift, forces_with_coefficients, locate, relative_difference, CrossSectionSample, Forces, DFG_MEAN_SPEED, MEAN_SPEED, REFERENCE_LENGTH};
pub use channel::{
    channel_inflow, dfg_inflow, final_slot, dfg_ramp, kinetic_energy, reynolds_number, run_channel_compare, run_dfg, write_channel_compare,
    write_dfg, ChannelComparison, DragLiftSeries, CHANNEL_PROFILE,
};
