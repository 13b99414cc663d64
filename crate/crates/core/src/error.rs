use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spin quantum number {0}: 2*spin must be a non-negative integer")]
    InvalidSpin(f64),

    #[error("subspace index {index} out of range (system has {count} subspaces)")]
    SubspaceIndex { index: usize, count: usize },

    #[error("nucleus index {index} out of range (system has {count} nuclei)")]
    NucleusIndex { index: usize, count: usize },

    #[error("electron index {0} out of range (expected 1 or 2)")]
    ElectronIndex(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown state name `{0}`")]
    UnknownState(String),

    #[error("amplitudes not normalized: norm^2 = {0}")]
    NotNormalized(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("density-matrix invariant violated: {quantity} = {value:e}")]
    InvalidDensity { quantity: &'static str, value: f64 },

    #[error("zero-trace state has no coherence measure")]
    ZeroTrace,

    #[error("reaction terminated: trace {trace:e} at or below floor {floor:e}")]
    Terminated { trace: f64, floor: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step-size bound violated: {quantity} = {value} exceeds {bound}")]
    StepSize {
        quantity: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("invariant violated at step {step} (t = {t}): {quantity} = {value:e}")]
    Invariant {
        step: usize,
        t: f64,
        quantity: &'static str,
        value: f64,
    },
}
