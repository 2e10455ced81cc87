use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in `{param}`: {msg}")]
    Domain { param: String, msg: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("fit error: {msg} (rms residual {residual:.3e})")]
    Fit { msg: String, residual: f64 },

    #[error("index {index} outside lattice [-{half_width}, {half_width}]")]
    Range { index: i64, half_width: usize },

    #[error("state has zero norm")]
    DegenerateState,

    #[error("profile is not exponential: R^2 = {r2:.3} over {points} bins")]
    Profile { r2: f64, points: usize },

    #[error("site {n} lies within {distance:.2e} of a pole of tan")]
    Pole { n: i64, distance: f64 },

    #[error("|V| reaches {max_abs:.6} >= pi; tan(V/2) is singular")]
    SingularPotential { max_abs: f64 },

    #[error("eigenstate is extended (R^2 = {r2:.3})")]
    ExtendedState { r2: f64 },

    #[error("branch capacity {capacity} exceeded with retained weight {retained_weight:.6}")]
    Capacity { capacity: usize, retained_weight: f64 },

    #[error("truncation check failed: {0}")]
    Truncation(String),

    #[error("Chern number undefined: gap {gap:.3e} closes at node ({i}, {j})")]
    ChernUndefined { i: usize, j: usize, gap: f64 },

    #[error("invalid density matrix: {0}")]
    State(String),

    #[error("no ratchet: R^2 = {r2:.4} below 0.95")]
    NoRatchet { r2: f64, slope: f64 },
}

impl Error {
    pub fn domain(param: &str, msg: impl Into<String>) -> Self {
        Error::Domain {
            param: param.to_string(),
            msg: msg.into(),
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
