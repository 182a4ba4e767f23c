use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid split parameters: {0}")]
    InvalidParams(String),

    #[error("invalid split-vector source: {0}")]
    InvalidSource(String),

    #[error("custom sampler returned an invalid split vector: {0}")]
    InvalidSample(String),

    #[error("unknown family `{name}` (available: {available})")]
    UnknownFamily { name: String, available: String },

    #[error("invalid family parameter: {0}")]
    InvalidFamilyParam(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("source is lattice_suspect; renewal limits do not apply")]
    LatticeSuspect,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("argument {value} lies outside the solved grid [0, {t_max}]")]
    OutOfGrid { value: f64, t_max: f64 },

    #[error("no vertices at depth {0}")]
    EmptyDepth(u32),

    #[error("mixed configurations cannot be aggregated: {0}")]
    MixedConfigurations(String),

    #[error("unreachable tree state: {0}")]
    Unreachable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
