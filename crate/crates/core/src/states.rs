//! Incident-field states and their normal characteristic functions
//! `χ(ξ) = ⟨exp(iξ* a†) exp(iξ a)⟩`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aperture::ModeIndex;
use crate::special::laguerre;

/// Tolerance on `r² + t² = 1` for beam-splitter parameters.
pub const UNITARITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("thermal mean photon number must be finite and non-negative, got {0}")]
    NegativeMean(f64),
    #[error("coherent amplitude must be finite")]
    NonFiniteAmplitude,
    #[error("beam splitter parameters violate r² + t² = 1 (r = {r}, t = {t})")]
    NonUnitary { r: f64, t: f64 },
    #[error("Fano factor is undefined for a state with zero mean photon number")]
    UndefinedFano,
    #[error("expected {expected} characteristic-function arguments, got {got}")]
    ArgumentMismatch { expected: usize, got: usize },
    #[error("mode {0} appears more than once in the input state")]
    DuplicateMode(ModeIndex),
    #[error("input state has no modes")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SingleModeState {
    Coherent { alpha: [f64; 2] },
    Thermal { mean: f64 },
    Fock { n: u32 },
}

impl SingleModeState {
    pub fn coherent(alpha: C64) -> Self {
        SingleModeState::Coherent { alpha: [alpha.re, alpha.im] }
    }

    pub fn thermal(mean: f64) -> Self {
        SingleModeState::Thermal { mean }
    }

    pub fn fock(n: u32) -> Self {
        SingleModeState::Fock { n }
    }

    pub fn validate(&self) -> Result<(), StateError> {
        match *self {
            SingleModeState::Coherent { alpha } if !(alpha[0].is_finite() && alpha[1].is_finite()) => {
                Err(StateError::NonFiniteAmplitude)
            }
            SingleModeState::Thermal { mean } if !(mean.is_finite() && mean >= 0.0) => {
                Err(StateError::NegativeMean(mean))
            }
            _ => Ok(()),
        }
    }

    /// Mean field `⟨a⟩`.
    pub fn first_moment(&self) -> C64 {
        match *self {
            SingleModeState::Coherent { alpha } => C64::new(alpha[0], alpha[1]),
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn normal_char(&self, xi: C64) -> C64 {
        normal_char_single(self, xi)
    }
}

pub fn normal_char_single(state: &SingleModeState, xi: C64) -> C64 {
    match *state {
        SingleModeState::Coherent { alpha } => {
            let alpha = C64::new(alpha[0], alpha[1]);
            let exponent = xi.conj() * alpha.conj() + xi * alpha;
            (C64::i() * exponent).exp()
        }
        SingleModeState::Thermal { mean } => C64::new((-mean * xi.norm_sqr()).exp(), 0.0),
        SingleModeState::Fock { n } => C64::new(laguerre(n, xi.norm_sqr()), 0.0),
    }
}

/// Photon-number mean and variance of a single mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhotonMoments {
    pub mean: f64,
    pub variance: f64,
}

impl PhotonMoments {
    /// Fano factor `⟨ΔN²⟩/⟨N⟩`.
    pub fn fano(&self) -> Result<f64, StateError> {
        if self.mean > 0.0 {
            Ok(self.variance / self.mean)
        } else {
            Err(StateError::UndefinedFano)
        }
    }
}

pub fn photon_moments(state: &SingleModeState) -> PhotonMoments {
    match *state {
        SingleModeState::Coherent { alpha } => {
            let n = alpha[0] * alpha[0] + alpha[1] * alpha[1];
            PhotonMoments { mean: n, variance: n }
        }
        SingleModeState::Thermal { mean } => PhotonMoments { mean, variance: mean * mean + mean },
        SingleModeState::Fock { n } => PhotonMoments { mean: n as f64, variance: 0.0 },
    }
}

/// A state of the incident modes. Modes not listed are in vacuum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputState {
    /// Independent single-mode states.
    Product { modes: Vec<(ModeIndex, SingleModeState)> },
    /// `n` photons sent through a real beam splitter `(r, t)` whose two outputs
    /// are the incident modes `modes[0]` and `modes[1]`:
    /// `χ(ξ₁, ξ₂) = L_n(|rξ₁ − tξ₂|²)`.
    BeamSplitterFock { photons: u32, r: f64, t: f64, modes: [ModeIndex; 2] },
    /// Normalized pair state `(|0⟩ + F Σ_j a_j† c_j† |0⟩)/√(1 + M|F|²)`.
    /// The signal modes `a_j` sit on the listed grid modes and are diffracted;
    /// idler `c_j` is paired with signal `j` and bypasses the aperture.
    SpdcPair { amplitude: [f64; 2], modes: Vec<ModeIndex> },
}

impl InputState {
    pub fn single(mode: ModeIndex, state: SingleModeState) -> Self {
        InputState::Product { modes: vec![(mode, state)] }
    }

    pub fn beam_splitter_fock(photons: u32, r: f64, t: f64, modes: [ModeIndex; 2]) -> Result<Self, StateError> {
        let s = InputState::BeamSplitterFock { photons, r, t, modes };
        s.validate()?;
        Ok(s)
    }

    pub fn spdc(amplitude: C64, modes: Vec<ModeIndex>) -> Result<Self, StateError> {
        let s = InputState::SpdcPair { amplitude: [amplitude.re, amplitude.im], modes };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), StateError> {
        let modes = self.incident_modes();
        if modes.is_empty() {
            return Err(StateError::Empty);
        }
        let mut sorted = modes.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(StateError::DuplicateMode(w[0]));
        }
        match self {
            InputState::Product { modes } => modes.iter().try_for_each(|(_, s)| s.validate()),
            InputState::BeamSplitterFock { r, t, .. } => check_unit(*r, *t),
            InputState::SpdcPair { amplitude, .. } => {
                if amplitude[0].is_finite() && amplitude[1].is_finite() {
                    Ok(())
                } else {
                    Err(StateError::NonFiniteAmplitude)
                }
            }
        }
    }

    /// Grid modes that meet the aperture, in argument order.
    pub fn incident_modes(&self) -> Vec<ModeIndex> {
        match self {
            InputState::Product { modes } => modes.iter().map(|(m, _)| *m).collect(),
            InputState::BeamSplitterFock { modes, .. } => modes.to_vec(),
            InputState::SpdcPair { modes, .. } => modes.clone(),
        }
    }

    /// Number of undiffracted idler modes (SPDC only).
    pub fn idler_count(&self) -> usize {
        match self {
            InputState::SpdcPair { modes, .. } => modes.len(),
            _ => 0,
        }
    }

    /// Total argument count of [`normal_char_multi`]: incident then idler modes.
    pub fn mode_count(&self) -> usize {
        self.incident_modes().len() + self.idler_count()
    }

    pub fn spdc_amplitude(&self) -> Option<C64> {
        match self {
            InputState::SpdcPair { amplitude, .. } => Some(C64::new(amplitude[0], amplitude[1])),
            _ => None,
        }
    }

    /// `⟨a_i⟩` over the incident modes.
    pub fn first_moments(&self) -> Vec<C64> {
        match self {
            InputState::Product { modes } => modes.iter().map(|(_, s)| s.first_moment()).collect(),
            _ => vec![C64::new(0.0, 0.0); self.incident_modes().len()],
        }
    }

    /// Coherence matrix `⟨a_i† a_j⟩` over the incident modes.
    pub fn coherence_matrix(&self) -> DMatrix<C64> {
        match self {
            InputState::Product { modes } => {
                let mean: Vec<C64> = self.first_moments();
                DMatrix::from_fn(modes.len(), modes.len(), |i, j| {
                    if i == j {
                        C64::new(photon_moments(&modes[i].1).mean, 0.0)
                    } else {
                        mean[i].conj() * mean[j]
                    }
                })
            }
            InputState::BeamSplitterFock { photons, r, t, .. } => {
                let n = *photons as f64;
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        C64::new(r * r * n, 0.0),
                        C64::new(-r * t * n, 0.0),
                        C64::new(-r * t * n, 0.0),
                        C64::new(t * t * n, 0.0),
                    ],
                )
            }
            InputState::SpdcPair { amplitude, modes } => {
                let f2 = amplitude[0] * amplitude[0] + amplitude[1] * amplitude[1];
                let occupation = f2 / (1.0 + modes.len() as f64 * f2);
                DMatrix::from_diagonal_element(modes.len(), modes.len(), C64::new(occupation, 0.0))
            }
        }
    }

    /// Coherence matrix of the product of single-mode marginals: same
    /// diagonal, off-diagonal entries `⟨a_i†⟩⟨a_j⟩`.
    pub fn marginal_coherence_matrix(&self) -> DMatrix<C64> {
        let joint = self.coherence_matrix();
        let mean = self.first_moments();
        DMatrix::from_fn(
            joint.nrows(),
            joint.ncols(),
            |i, j| {
                if i == j {
                    joint[(i, i)]
                } else {
                    mean[i].conj() * mean[j]
                }
            },
        )
    }
}

fn check_unit(r: f64, t: f64) -> Result<(), StateError> {
    if r.is_finite() && t.is_finite() && (r * r + t * t - 1.0).abs() <= UNITARITY_TOL {
        Ok(())
    } else {
        Err(StateError::NonUnitary { r, t })
    }
}

/// Joint normal characteristic function. `xi` lists the incident modes in
/// [`InputState::incident_modes`] order, followed by the idlers for SPDC.
pub fn normal_char_multi(state: &InputState, xi: &[C64]) -> Result<C64, StateError> {
    let expected = state.mode_count();
    if xi.len() != expected {
        return Err(StateError::ArgumentMismatch { expected, got: xi.len() });
    }
    let value = match state {
        InputState::Product { modes } => modes.iter().zip(xi).map(|((_, s), &x)| normal_char_single(s, x)).product(),
        InputState::BeamSplitterFock { photons, r, t, .. } => {
            let mixed = xi[0] * *r - xi[1] * *t;
            C64::new(laguerre(*photons, mixed.norm_sqr()), 0.0)
        }
        InputState::SpdcPair { amplitude, modes } => {
            let f = C64::new(amplitude[0], amplitude[1]);
            let m = modes.len();
            let (signal, idler) = xi.split_at(m);
            spdc_char(f, signal, idler)
        }
    };
    Ok(value)
}

// Exact χ of the normalized pair state:
// [ |1 − F Σ ξ_j ζ_j|² − |F|² Σ (|ξ_j|² + |ζ_j|²) + M|F|² ] / (1 + M|F|²)
fn spdc_char(f: C64, signal: &[C64], idler: &[C64]) -> C64 {
    let m = signal.len() as f64;
    let f2 = f.norm_sqr();
    let pair_sum: C64 = signal.iter().zip(idler).map(|(a, c)| a * c).sum();
    let weight: f64 = signal.iter().chain(idler).map(|z| z.norm_sqr()).sum();
    let vacuum = (C64::new(1.0, 0.0) - f * pair_sum).norm_sqr();
    C64::new((vacuum - f2 * weight + m * f2) / (1.0 + m * f2), 0.0)
}

/// Output characteristic function of a real beam splitter,
/// `ξ ↦ χ_in(rξ₁ − tξ₂, tξ₁ + rξ₂)`.
pub fn beam_splitter_transform<F>(chi_in: F, r: f64, t: f64) -> Result<impl Fn([C64; 2]) -> C64, StateError>
where
    F: Fn([C64; 2]) -> C64,
{
    check_unit(r, t)?;
    Ok(move |xi: [C64; 2]| chi_in([xi[0] * r - xi[1] * t, xi[0] * t + xi[1] * r]))
}
