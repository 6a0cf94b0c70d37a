use thiserror::Error;

/// Physical context of a total-reflection pole (η = −1).
///
/// A resonant atom in a lossless guide reflects all incident light, so the
/// single-atom transfer matrix has no finite entries. This is a physical
/// result (T = 0), reported so callers can decide how to tabulate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalReflection {
    pub delta: f64,
    pub spacing: Option<f64>,
    pub n_atoms: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("steady-state system is numerically singular (pivot ratio {pivot_ratio:e})")]
    SingularSystem { pivot_ratio: f64 },

    #[error("at detuning {delta}")]
    AtDetuning { delta: f64, source: Box<Error> },

    #[error("drive amplitude is zero")]
    ZeroDrive,

    #[error("eigen-solver failed: {0}")]
    EigenSolver(String),

    #[error("state has no weight on any normalizable mode")]
    ZeroState,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("total reflection at detuning {}", .0.delta)]
    TotalReflection(TotalReflection),

    #[error("transfer matrix has a pole (M22 = 0)")]
    Pole,

    #[error("atom {index} is not an integer number of half wavelengths from the first atom (offset {offset:e} λ/2)")]
    NotHalfWaveMultiple { index: usize, offset: f64 },

    #[error("detuning of atom {index} is zero")]
    ZeroDetuning { index: usize },

    #[error("expression is singular: {0}")]
    Singular(&'static str),

    #[error("failed to write table: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Output(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Output(e.to_string())
    }
}

impl Error {
    pub(crate) fn at_detuning(self, delta: f64) -> Error {
        Error::AtDetuning {
            delta,
            source: Box::new(self),
        }
    }
}
