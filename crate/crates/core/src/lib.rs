//! Space-time finite element solvers for the 2D incompressible Navier–Stokes
//! equations.
//!
//! Time is discretized by the C¹-conforming Galerkin–collocation scheme
//! GCC¹(3) or by the continuous Galerkin–Petrov scheme cGP(1); space by
//! Taylor–Hood `Q_r`–`Q_{r−1}` elements on quadrilaterals. Dirichlet data is
//! imposed either strongly or weakly through Nitsche's method. Every time
//! slab is solved by Newton's method on the fully coupled block system.
//!
//! ```
//! use galcol::assembly::{NsProblem, Scheme};
//! use galcol::bench::{error_norms, manufactured_exact, manufactured_problem};
//! use galcol::fem::TaylorHoodPair;
//! use galcol::forms::NitscheParams;
//! use galcol::mesh::generate_unit_square;
//! use galcol::stepper::{march, InitialData, NewtonConfig, NsModel, TimeMarchConfig};
//!
//! # fn main() -> galcol::Result<()> {
//! let pair = TaylorHoodPair::new(generate_unit_square(4)?, 3)?;
//! let problem = NsProblem::new(pair, manufactured_problem(1.0)?, NitscheParams::default())?;
//! let model = NsModel::with_exact(problem, manufactured_exact(1.0));
//! let cfg = TimeMarchConfig {
//!     t_end: 1.0,
//!     tau: 0.25,
//!     scheme: Scheme::Gcc13,
//!     initial: InitialData::ExactFromSolution,
//!     condition_cap: None,
//! };
//! let trajectory = march(&model, &cfg, &NewtonConfig::default()).map_err(|f| f.error)?;
//! let errors = error_norms(&model.problem, &trajectory, model.exact.as_ref().unwrap(), 0.25)?;
//! assert!(errors.v_l2l2 < 1e-3);
//! # Ok(())
//! # }
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod quadrature;
pub mod time_kernel;
pub mod mesh;
pub mod fem;
pub mod linalg;
pub mod forms;
pub mod assembly;
pub mod stepper;
pub mod bench;

pub use error::{Error, Result};
