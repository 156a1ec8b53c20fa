//! Truncated Fock-space ground truth. States and lossy linear-optical
//! channels are built as explicit matrices so that every closed form can be
//! checked against a brute-force evaluation.

mod channel;
mod density;

pub use channel::{
    apply_contraction, apply_contraction_by_generator, apply_linear_channel, fock_unitary_by_generator, permute_modes,
    unitary_log, OVERFLOW_TOL,
};
pub use density::{
    build_state, char_function_fock, cutoff_for_tail, single_mode_density, tail_sensitivity, FockDensity, MAX_DIM,
};

use thiserror::Error;

use crate::diffraction::DiffractionError;
use crate::states::StateError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("cutoff must be at least 1")]
    InvalidCutoff,
    #[error("cutoff {cutoff} too small: state needs {needed} levels per mode")]
    CutoffTooSmall { needed: usize, cutoff: usize },
    #[error("cutoff overflow: weight {weight:.3e} pushed beyond {cutoff} levels per mode")]
    CutoffOverflow { weight: f64, cutoff: usize },
    #[error("Fock space of {modes} modes at cutoff {cutoff} exceeds the oracle size limit")]
    TooLarge { modes: usize, cutoff: usize },
    #[error("density matrix has dimension {got}, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("densities have different cutoffs")]
    CutoffMismatch,
    #[error("mode {0} out of range")]
    ModeOutOfRange(usize),
    #[error("expected {expected} arguments, got {got}")]
    ArgumentMismatch { expected: usize, got: usize },
    #[error("characteristic function unreliable at this cutoff: tail estimate {estimate:.3e} exceeds {tolerance:.3e}")]
    CharInaccurate { estimate: f64, tolerance: f64 },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Diffraction(#[from] DiffractionError),
}
