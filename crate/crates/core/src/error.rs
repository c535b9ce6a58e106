use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("finite-difference evaluation produced a non-finite value along coordinate {coordinate}")]
    Differentiation { coordinate: usize },

    #[error("singular jacobian at newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("integration failed at t = {t}: non-finite right-hand side")]
    Integration { t: f64, last_state: Vec<f64> },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("proxy solve failed: all {restarts} restarts diverged")]
    ProxyFailure { restarts: usize },

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("near-singular metric: condition number of the state hessian is {condition:e}")]
    NearSingularMetric { condition: f64 },

    #[error("start configuration is not a valid stable equilibrium: {0}")]
    StartInvalid(String),

    #[error("planner exhausted: every node in the tree is a dead end")]
    PlannerExhausted,

    #[error("tree integrity: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}
