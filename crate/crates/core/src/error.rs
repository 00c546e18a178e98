use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate configuration: points {0} and {1} coincide within tolerance")]
    DegenerateConfiguration(usize, usize),
    #[error("antipodal pair: geodesic is not unique")]
    AntipodalPair,
    #[error("integration blow-up at parameter {0}")]
    IntegrationBlowup(f64),
    #[error("value {0} outside the domain [-1, 1]")]
    DomainError(f64),
    #[error("sampler stuck after {0} rejections")]
    SamplerStuck(u64),
    #[error("input lies in the negligible set: {0}")]
    NegligibleSetHit(String),
    #[error("evolved configuration came within {0:e} of the diagonal")]
    DiagonalCrossing(f64),
    #[error("planar strands {0} and {1} within the numerical diagonal tolerance")]
    NumericalDiagonal(usize, usize),
    #[error("projection direction {0} is not generic for this loop")]
    NonGenericDirection(f64),
    #[error("no admissible direction found after {0} draws")]
    DirectionSearchExhausted(u32),
    #[error("braid is not pure")]
    NotPure,
    #[error("homogenization did not stabilize: slope {slope}, residual {residual:e}")]
    NonStabilized { slope: f64, residual: f64 },
    #[error("singular point: denominator {0:e} below tolerance")]
    SingularPoint(f64),
    #[error("estimate unstable: mean {mean}, stderr {stderr}")]
    EstimateUnstable { mean: f64, stderr: f64 },
    #[error("embedding matrix singular after {0} attempts")]
    SingularMatrix(u32),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl Error {
    /// True for failures that mean "draw another sample", not "stop".
    pub fn is_resample(&self) -> bool {
        matches!(
            self,
            Error::NegligibleSetHit(_)
                | Error::DegenerateConfiguration(..)
                | Error::AntipodalPair
                | Error::DiagonalCrossing(_)
                | Error::NumericalDiagonal(..)
        )
    }
}

impl Error {
    /// Process exit code: 1 for bad input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateConfiguration(..)
            | Error::AntipodalPair
            | Error::DomainError(_)
            | Error::NotPure
            | Error::Invalid(_)
            | Error::Parse(_)
            | Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
