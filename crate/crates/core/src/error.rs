use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{routers} routers exceed the enumeration cap of {cap} (catalan({routers}) = {count})")]
    SizeLimit { routers: u32, cap: u32, count: String },

    #[error("integer overflow computing catalan({0})")]
    Overflow(u32),

    #[error("malformed router sequence: {0}")]
    MalformedSequence(String),

    #[error("{name} = {value} is not a probability in (0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("input mean photon number {0} outside (0, 2]")]
    InvalidLambda(f64),

    #[error("binomial loss needs i <= l, got i = {i}, l = {l}")]
    BinomialDomain { i: usize, l: usize },

    #[error("arm transmissions must be sorted descending (arm {index} exceeds its predecessor)")]
    NotDescending { index: usize },

    #[error("arm vector is empty")]
    EmptyArms,

    #[error("photon-number series did not reach tolerance {tol:e} within {l_cap} terms")]
    Convergence { tol: f64, l_cap: usize },

    #[error("g2 undefined: mean output photon number is zero")]
    ZeroMeanPhotonNumber,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("chi-squared comparison inconclusive: {0}")]
    Inconclusive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
