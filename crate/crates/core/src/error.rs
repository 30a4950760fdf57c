use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{spec} has zero price")]
    ZeroPrice { spec: String },

    #[error("{spec}: price {price:.3e} is within two standard errors ({std_err:.3e}) of zero")]
    NearZeroPrice {
        spec: String,
        price: f64,
        std_err: f64,
    },

    #[error("{spec}: relative sensitivity {f:.3e} is below the singularity threshold")]
    ZeroSensitivity { spec: String, f: f64 },

    #[error("singular composition: entry {entry} = {value:.3e} is below the singularity threshold")]
    SingularComposition { entry: String, value: f64 },

    #[error("sensitivity matrix is ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("sensitivity matrix has rank below 2; the market cannot be completed")]
    InfeasibleMarket,

    #[error("composition infeasible at t = {time}: {spec} priced at {price:.3e}")]
    CompositionInfeasible {
        time: f64,
        spec: String,
        price: f64,
    },

    #[error("no admissible candidate: {0}")]
    NoAdmissibleCandidate(String),

    #[error("root of {what} not bracketed in [{lo}, {hi}]")]
    RootNotBracketed { what: String, lo: f64, hi: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("malformed record: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}
