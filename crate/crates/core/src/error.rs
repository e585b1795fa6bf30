use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coefficient {name} = {value} is negative beyond the clamping tolerance")]
    NegativeCoefficient { name: &'static str, value: f64 },

    #[error("coefficient {name} is not a finite number")]
    NonFinite { name: &'static str },

    #[error("coefficients sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("{name} = {value} lies outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("pair count must be even and at least 2, got {0}")]
    InvalidEvenCount(usize),

    #[error("pair count must be at least 1")]
    NoPairs,

    #[error("not distillable: one step does not raise the fidelity {fidelity}")]
    NotDistillable { fidelity: f64 },

    #[error("unsuccessful-case fidelity {fallback} is not below the target fidelity {target}")]
    FallbackNotBelowTarget { fallback: f64, target: f64 },

    #[error("trial count must be at least 1")]
    NoTrials,

    #[error("exact evaluation is capped at {cap} pairs (got {n}); use the Monte Carlo method")]
    ExactCapExceeded { n: usize, cap: usize },

    #[error("invalid grid: start {start}, stop {stop}, step {step}")]
    InvalidGrid { start: f64, stop: f64, step: f64 },

    #[error("matrix is not Bell-diagonal: element ({row}, {col}) has magnitude {magnitude:e}")]
    NotBellDiagonal {
        row: usize,
        col: usize,
        magnitude: f64,
    },

    #[error("Bell coefficient {index} has imaginary residue {residue:e}")]
    ImaginaryResidue { index: usize, residue: f64 },

    #[error("matrix dimension {0} is not supported")]
    BadDimension(usize),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
}

pub type Result<T> = std::result::Result<T, Error>;
