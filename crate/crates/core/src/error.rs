use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("linear solver failed after {iterations} iterations (residual {residual:.3e})")]
    LinearSolver {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("Newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("step {step} at t = {time}: {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("capability exceeded: {0}")]
    Capability(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
