use thiserror::Error;

/// Errors produced by the simulator and calculator.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("{n_atoms} atoms exceeds the state-vector capacity of {max}")]
    CapacityExceeded { n_atoms: usize, max: usize },

    #[error("state is not normalized (|norm - 1| = {deviation:.3e})")]
    NotNormalized { deviation: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("squeezing parameter is undefined for <Jx> = 0")]
    UndefinedSqueezing,

    #[error("{n_atoms} atoms exceeds the angular-momentum decomposition cap of {max}")]
    DickeCapExceeded { n_atoms: usize, max: usize },

    #[error("scattering probability {sigma_scatt:.4} >= 1 violates the weak-scattering regime")]
    BornValidity { sigma_scatt: f64 },

    #[error("sphere grid needs {required} cells, above the configured cap of {cap}")]
    GridResolution { required: usize, cap: usize },

    #[error("scatter table needs {bytes} bytes, above the configured cap of {cap}")]
    TableMemory { bytes: usize, cap: usize },

    #[error("detection event has zero probability and cannot be applied")]
    ZeroProbabilityEvent,

    #[error(
        "event probabilities sum to 1{defect:+.3e}, outside tolerance {tolerance:.1e} \
         (scattering too strong or grid too coarse)"
    )]
    ProbabilityDefect { defect: f64, tolerance: f64 },

    #[error("population estimate is ambiguous: no peak within {window:.2} of the initial mean")]
    EstimatorAmbiguous { window: f64 },

    #[error("dense-cloud box must hold at least one cell per axis")]
    DegenerateBox,

    #[error("posterior support truncated: {leaked:.3e} of the mass lies outside the radial grid")]
    SupportTruncated { leaked: f64 },

    #[error("configuration is invalid:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    #[error("failed to parse configuration: {0}")]
    ConfigParse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
