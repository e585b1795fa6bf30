//! Iterative CNOT entanglement distillation over finite samples of
//! Bell-diagonal qubit pairs.
//!
//! - [`bell`]: state type and closed-form single-step maps.
//! - [`ensemble`]: one round over `N` pairs and the minimal sample size.
//! - [`iterative`]: the multi-round scheme with backup pairs, exact and sampled.
//! - [`oracle`]: gate-level density-matrix simulation used to check [`bell`].
//! - [`cli`]: the `distill` command-line front end.

pub mod bell;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod iterative;
pub mod oracle;

pub use bell::{BellDiagonalState, StepOutcome};
pub use ensemble::{RoundStats, UnsuccessfulConvention};
pub use error::{Error, Result};
pub use iterative::{EnsembleNode, IterationPolicy, TrialStats};
