use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid size must be at least 2 nodes per axis, got {0}")]
    GridTooSmall(usize),

    #[error("point set is empty")]
    EmptyPointSet,

    #[error("boundary points {0} and {1} coincide")]
    CoincidentPoints(usize, usize),

    #[error("model does not carry a pressure output")]
    MissingPressure,

    #[error("model does not carry a velocity output")]
    MissingVelocity,

    #[error("{0} requires a divergence-free (stream function) model")]
    RequiresDivergenceFree(&'static str),

    #[error("closure `{name}` returned derivatives to order {got}, needed {needed}")]
    NotDifferentiable {
        name: &'static str,
        got: usize,
        needed: usize,
    },

    #[error("case `{0}` has no exact solution attached")]
    MissingExactSolution(String),

    #[error("case `{0}` has no analytic Helmholtz-Hodge split")]
    NoHelmholtzSplit(String),

    #[error("activation `{0}` is not smooth enough for third and fourth order residuals")]
    NonSmoothActivation(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("plot: {0}")]
    Plot(String),
}
