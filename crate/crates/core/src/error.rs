use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate parameters: steady-state system is singular")]
    DegenerateParameters,

    #[error("probe drive is zero")]
    ZeroDrive,

    #[error("not critically coupled: kappa_ex = {kappa_ex} MHz, critical value is {critical} MHz")]
    NotCriticallyCoupled { kappa_ex: f64, critical: f64 },

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("Fock cutoff {n_max} too small: population {top_population:.3e} at the cutoff")]
    CutoffTooSmall { n_max: usize, top_population: f64 },

    #[error("master equation did not reach steady state (residual {residual:.3e})")]
    NotStationary { residual: f64 },

    #[error("unknown method: {0}")]
    UnknownMethod(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("empty analysis window")]
    EmptyWindow,

    #[error("detector stream has zero mean")]
    ZeroMeanStream,

    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("rank-deficient Jacobian: {0}")]
    RankDeficient(String),

    #[error("width unresolvable: {0}")]
    WidthUnresolvable(String),

    #[error("invalid data: {0}")]
    InvalidData(String),
}
