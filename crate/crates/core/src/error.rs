use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor norm {norm:e} is below the zero tolerance")]
    ZeroTensor { norm: f64 },

    #[error("director frame is not orthonormal (|n|={n_norm}, |m|={m_norm}, n.m={dot})")]
    InvalidFrame { n_norm: f64, m_norm: f64, dot: f64 },

    #[error("material coefficient `{name}` must be positive, got {value}")]
    NonPositiveCoefficient { name: &'static str, value: f64 },

    #[error("hypothesis {hypothesis} violated: {detail}")]
    HypothesisViolated { hypothesis: &'static str, detail: String },

    #[error("vector is not unit length (|n| = {norm})")]
    NonUnitVector { norm: f64 },

    #[error("nearest-point projection undefined: leading eigenvalue gap {gap:e} is degenerate")]
    ProjectionUndefined { gap: f64 },

    #[error("loop sample {index} lies at distance {dist} from the vacuum manifold (limit {limit})")]
    TooFarFromManifold { index: usize, dist: f64, limit: f64 },

    #[error("loop sampling too coarse at sample {index}: director overlap {overlap} below {threshold}")]
    SamplingTooCoarse { index: usize, overlap: f64, threshold: f64 },

    #[error("domain too thin: interior cell ({i}, {j}) has no complete stencil")]
    DomainTooThin { i: usize, j: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid boundary specification: {0}")]
    InvalidSpec(String),

    #[error("point ({x}, {y}) lies outside the interpolation hull")]
    OutOfDomain { x: f64, y: f64 },

    #[error("non-finite value encountered at iteration {iter}")]
    NonFiniteEncountered { iter: usize },

    #[error("epsilon {eps} too large: the biaxial core needs eps < R*sqrt(sigma) = {bound}")]
    EpsilonTooLarge { eps: f64, bound: f64 },

    #[error("circle of radius {rho} leaves the domain")]
    CircleOutsideDomain { rho: f64 },

    #[error("circle of radius {rho} meets a defect (dist to N = {dist})")]
    CircleMeetsDefect { rho: f64, dist: f64 },

    #[error("ball of radius {radius} leaves the domain")]
    BallOutsideDomain { radius: f64 },

    #[error("corrupt field dump: {0}")]
    DumpCorrupt(String),

    #[error("field dump version {found} does not match supported version {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("invalid configuration at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigInvalid { .. }
            | Error::InvalidSpec(_)
            | Error::InvalidDomain(_)
            | Error::NonPositiveCoefficient { .. }
            | Error::EpsilonTooLarge { .. }
            | Error::DomainTooThin { .. } => 2,
            Error::Io { .. } | Error::DumpCorrupt(_) | Error::VersionMismatch { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
