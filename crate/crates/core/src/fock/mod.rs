//! Exact few-photon linear optics on a truncated bosonic Fock space.
//!
//! Pure states are sparse maps from occupation vectors to amplitudes, mixed
//! states are dense matrices over a lexicographically enumerated basis. All
//! values are immutable; every operation returns a new value.

mod basis;
mod density;
mod optics;
mod povm;
mod state;

pub use basis::{Basis, FockBasisVector, FockSpace};
pub use density::{loss_channel, measure_and_condition, outcome_probability, DensityOperator};
pub use optics::{
    apply_interferometer, beam_splitter_apply, default_network, hadamard4, BeamSplitter, ModeUnitary,
    PhaseConvention,
};
pub use povm::Povm;
pub use state::{fidelity, FockState};

use thiserror::Error;

/// Default photon cutoff: the largest number of photons that meet at the
/// central station for four stations.
pub const DEFAULT_CUTOFF: u32 = 4;

/// Amplitudes below this magnitude are dropped from sparse states.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("occupation pattern with {total} photons exceeds cutoff {cutoff}")]
    CutoffExceeded { total: u32, cutoff: u32 },
    #[error("mode {mode} out of range for a {modes}-mode space")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("beam splitter needs two distinct modes, got {0} twice")]
    SameMode(usize),
    #[error("occupation vector has {got} entries, space has {expected} modes")]
    ModeCountMismatch { expected: usize, got: usize },
    #[error("operands live in different spaces: {left} vs {right}")]
    SpaceMismatch { left: FockSpace, right: FockSpace },
    #[error("transmittance {0} outside [0, 1]")]
    InvalidTransmittance(f64),
    #[error("outcome has zero probability")]
    ZeroProbabilityBranch,
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("mode permutation is invalid")]
    InvalidPermutation,
}

pub type Result<T> = std::result::Result<T, FockError>;

pub(crate) fn check_mode(mode: usize, modes: usize) -> Result<()> {
    if mode >= modes {
        return Err(FockError::ModeOutOfRange { mode, modes });
    }
    Ok(())
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}
