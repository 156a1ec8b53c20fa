use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::OracleError;
use crate::states::{InputState, SingleModeState};

/// Largest Hilbert-space dimension the oracle will build densely.
pub const MAX_DIM: usize = 4096;

/// Density operator on `modes` bosonic modes, each truncated to occupations
/// `0..cutoff`. Basis states are ordered with mode 0 most significant.
///
/// Truncated states are not renormalized: `tail_defect` records the weight
/// lost to truncation, so `trace ≈ 1 − tail_defect`.
#[derive(Clone, Debug)]
pub struct FockDensity {
    modes: usize,
    cutoff: usize,
    matrix: DMatrix<C64>,
    tail_defect: f64,
}

impl FockDensity {
    pub fn new(modes: usize, cutoff: usize, matrix: DMatrix<C64>, tail_defect: f64) -> Result<Self, OracleError> {
        let dim = checked_dim(modes, cutoff)?;
        if matrix.shape() != (dim, dim) {
            return Err(OracleError::Shape { expected: dim, got: matrix.nrows() });
        }
        Ok(Self { modes, cutoff, matrix, tail_defect })
    }

    pub fn from_pure(modes: usize, cutoff: usize, psi: &DVector<C64>, tail_defect: f64) -> Result<Self, OracleError> {
        Self::new(modes, cutoff, psi * psi.adjoint(), tail_defect)
    }

    pub fn vacuum(modes: usize, cutoff: usize) -> Result<Self, OracleError> {
        let dim = checked_dim(modes, cutoff)?;
        let mut m = DMatrix::zeros(dim, dim);
        m[(0, 0)] = C64::new(1.0, 0.0);
        Self::new(modes, cutoff, m, 0.0)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn tail_defect(&self) -> f64 {
        self.tail_defect
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|v| v.re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.hermitian_part()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Upper bound on `max(0, −λ_min)`: the smallest shift `s` on a decade
    /// ladder starting at `floor` for which `ρ + s·I` has a Cholesky factor.
    /// Much cheaper than a full eigendecomposition and insensitive to the
    /// strongly graded spectra of truncated thermal states.
    pub fn negativity_bound(&self, floor: f64) -> f64 {
        let h = self.hermitian_part();
        let n = h.nrows();
        let mut shift = floor;
        while shift <= 1.0 {
            let shifted = &h + DMatrix::<C64>::identity(n, n) * C64::new(shift, 0.0);
            if shifted.cholesky().is_some() {
                return shift;
            }
            shift *= 10.0;
        }
        f64::INFINITY
    }

    fn hermitian_part(&self) -> DMatrix<C64> {
        (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0)
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn index(&self, occupation: &[usize]) -> usize {
        encode(occupation, self.cutoff)
    }

    pub fn occupation(&self, index: usize) -> Vec<usize> {
        decode(index, self.modes, self.cutoff)
    }

    /// `ρ ⊗ σ`, with the modes of `self` first.
    pub fn kron(&self, other: &FockDensity) -> Result<FockDensity, OracleError> {
        if self.cutoff != other.cutoff {
            return Err(OracleError::CutoffMismatch);
        }
        checked_dim(self.modes + other.modes, self.cutoff)?;
        let kept = (1.0 - self.tail_defect) * (1.0 - other.tail_defect);
        FockDensity::new(self.modes + other.modes, self.cutoff, self.matrix.kronecker(&other.matrix), 1.0 - kept)
    }

    /// Reduced state on `keep`, in the listed order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<FockDensity, OracleError> {
        let mut seen = vec![false; self.modes];
        for &k in keep {
            if k >= self.modes || seen[k] {
                return Err(OracleError::ModeOutOfRange(k));
            }
            seen[k] = true;
        }
        let traced: Vec<usize> = (0..self.modes).filter(|k| !seen[*k]).collect();
        let d = self.cutoff;
        let keep_dim = d.pow(keep.len() as u32);
        let trace_dim = d.pow(traced.len() as u32);
        let full_index = |kept: usize, tr: usize| {
            let mut occ = vec![0; self.modes];
            for (slot, v) in keep.iter().zip(decode(kept, keep.len(), d)) {
                occ[*slot] = v;
            }
            for (slot, v) in traced.iter().zip(decode(tr, traced.len(), d)) {
                occ[*slot] = v;
            }
            encode(&occ, d)
        };
        let table: Vec<Vec<usize>> =
            (0..keep_dim).map(|a| (0..trace_dim).map(|t| full_index(a, t)).collect()).collect();
        let out = DMatrix::from_fn(keep_dim, keep_dim, |a, b| {
            table[a].iter().zip(&table[b]).map(|(&i, &j)| self.matrix[(i, j)]).sum()
        });
        FockDensity::new(keep.len(), d, out, self.tail_defect)
    }

    /// `tr(ρ O)` for an operator given by its action on basis states:
    /// `op(s)` returns the image `(s′, amplitude)` of `|s⟩`, if nonzero.
    fn expect_mapped<F>(&self, op: F) -> C64
    where
        F: Fn(&mut Vec<usize>) -> Option<f64>,
    {
        let mut total = C64::new(0.0, 0.0);
        for s in 0..self.dim() {
            let mut occ = self.occupation(s);
            if let Some(amp) = op(&mut occ) {
                if occ.iter().all(|&n| n < self.cutoff) {
                    let t = self.index(&occ);
                    total += self.matrix[(s, t)] * amp;
                }
            }
        }
        total
    }

    /// `⟨a_i† a_j⟩`.
    pub fn coherence(&self, i: usize, j: usize) -> C64 {
        self.expect_mapped(|occ| {
            if occ[j] == 0 {
                return None;
            }
            let mut amp = (occ[j] as f64).sqrt();
            occ[j] -= 1;
            occ[i] += 1;
            amp *= (occ[i] as f64).sqrt();
            Some(amp)
        })
    }

    /// `⟨a_i⟩`.
    pub fn mean_field(&self, i: usize) -> C64 {
        self.expect_mapped(|occ| {
            if occ[i] == 0 {
                return None;
            }
            let amp = (occ[i] as f64).sqrt();
            occ[i] -= 1;
            Some(amp)
        })
    }

    /// `⟨n_i⟩`.
    pub fn mean_number(&self, i: usize) -> f64 {
        self.diagonal_expectation(|occ| occ[i] as f64)
    }

    /// `⟨n_i n_j⟩`.
    pub fn number_product(&self, i: usize, j: usize) -> f64 {
        self.diagonal_expectation(|occ| (occ[i] * occ[j]) as f64)
    }

    /// `⟨(Δn_i)²⟩`, using the state's own trace as the normalization.
    pub fn number_variance(&self, i: usize) -> f64 {
        let norm = self.trace();
        let mean = self.mean_number(i) / norm;
        self.number_product(i, i) / norm - mean * mean
    }

    pub fn diagonal_expectation<F: Fn(&[usize]) -> f64>(&self, f: F) -> f64 {
        (0..self.dim()).map(|s| self.matrix[(s, s)].re * f(&self.occupation(s))).sum()
    }
}

pub(crate) fn checked_dim(modes: usize, cutoff: usize) -> Result<usize, OracleError> {
    if cutoff == 0 {
        return Err(OracleError::InvalidCutoff);
    }
    let dim = u32::try_from(modes)
        .ok()
        .and_then(|m| cutoff.checked_pow(m))
        .filter(|d| *d <= MAX_DIM)
        .ok_or(OracleError::TooLarge { modes, cutoff })?;
    Ok(dim)
}

pub(crate) fn encode(occupation: &[usize], cutoff: usize) -> usize {
    occupation.iter().fold(0, |acc, &n| acc * cutoff + n)
}

pub(crate) fn decode(mut index: usize, modes: usize, cutoff: usize) -> Vec<usize> {
    let mut occ = vec![0; modes];
    for slot in occ.iter_mut().rev() {
        *slot = index % cutoff;
        index /= cutoff;
    }
    occ
}

fn factorial_sqrt(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).sqrt()).product()
}

fn poisson_tail(mean: f64, cutoff: usize) -> f64 {
    // Σ_{n ≥ d} e^{-μ} μ^n / n!, summed directly to avoid cancellation
    let mut term = (-mean).exp();
    for n in 1..=cutoff {
        term *= mean / n as f64;
    }
    let mut tail = 0.0;
    let mut n = cutoff;
    while term > 1e-300 && (n < cutoff + 10 || term > 1e-20 * tail) {
        tail += term;
        n += 1;
        term *= mean / n as f64;
    }
    tail
}

/// Single-mode state truncated to `cutoff` levels.
pub fn single_mode_density(state: &SingleModeState, cutoff: usize) -> Result<FockDensity, OracleError> {
    state.validate()?;
    let d = cutoff;
    checked_dim(1, d)?;
    match *state {
        SingleModeState::Fock { n } => {
            let n = n as usize;
            if n >= d {
                return Err(OracleError::CutoffTooSmall { needed: n + 1, cutoff: d });
            }
            let mut psi = DVector::zeros(d);
            psi[n] = C64::new(1.0, 0.0);
            FockDensity::from_pure(1, d, &psi, 0.0)
        }
        SingleModeState::Thermal { mean } => {
            let q = mean / (mean + 1.0);
            let diag = DVector::from_fn(d, |n, _| C64::new((1.0 - q) * q.powi(n as i32), 0.0));
            FockDensity::new(1, d, DMatrix::from_diagonal(&diag), q.powi(d as i32))
        }
        SingleModeState::Coherent { .. } => {
            let alpha = state.first_moment();
            let scale = (-0.5 * alpha.norm_sqr()).exp();
            let psi = DVector::from_fn(d, |n, _| scale * alpha.powu(n as u32) / factorial_sqrt(n));
            FockDensity::from_pure(1, d, &psi, poisson_tail(alpha.norm_sqr(), d))
        }
    }
}

/// Smallest per-mode cutoff whose truncation weight is at most `tail_tol`.
/// Fock, beam-splitter and SPDC states have finite support and need no
/// tolerance.
pub fn cutoff_for_tail(input: &InputState, tail_tol: f64) -> usize {
    fn single(s: &SingleModeState, tol: f64) -> usize {
        match *s {
            SingleModeState::Fock { n } => n as usize + 1,
            SingleModeState::Thermal { mean } => {
                if mean == 0.0 {
                    return 1;
                }
                let q = mean / (mean + 1.0);
                (tol.ln() / q.ln()).ceil().max(1.0) as usize
            }
            SingleModeState::Coherent { alpha } => {
                let mu = alpha[0] * alpha[0] + alpha[1] * alpha[1];
                (1..).find(|&d| poisson_tail(mu, d) <= tol).unwrap_or(1)
            }
        }
    }
    match input {
        InputState::Product { modes } => {
            let per_mode = tail_tol / modes.len().max(1) as f64;
            modes.iter().map(|(_, s)| single(s, per_mode)).max().unwrap_or(1)
        }
        InputState::BeamSplitterFock { photons, .. } => *photons as usize + 1,
        InputState::SpdcPair { .. } => 2,
    }
}

/// Explicit density matrix of an input state. Modes are ordered as the
/// incident modes followed by the SPDC idlers.
pub fn build_state(input: &InputState, cutoff: usize) -> Result<FockDensity, OracleError> {
    input.validate()?;
    let d = cutoff;
    match input {
        InputState::Product { modes } => {
            let mut parts = modes.iter().map(|(_, s)| single_mode_density(s, d));
            let first = parts.next().ok_or(OracleError::InvalidCutoff)??;
            parts.try_fold(first, |acc, next| acc.kron(&next?))
        }
        InputState::BeamSplitterFock { photons, r, t, .. } => {
            let n = *photons as usize;
            if n >= d {
                return Err(OracleError::CutoffTooSmall { needed: n + 1, cutoff: d });
            }
            // (r b₁† − t b₂†)^n / √n! |0⟩ = Σ_k √C(n,k) r^k (−t)^{n−k} |k, n−k⟩
            let dim = checked_dim(2, d)?;
            let mut psi = DVector::zeros(dim);
            for k in 0..=n {
                let binom = factorial_sqrt(n) / (factorial_sqrt(k) * factorial_sqrt(n - k));
                let amp = binom * r.powi(k as i32) * (-t).powi((n - k) as i32);
                psi[encode(&[k, n - k], d)] = C64::new(amp, 0.0);
            }
            FockDensity::from_pure(2, d, &psi, 0.0)
        }
        InputState::SpdcPair { modes, .. } => {
            if d < 2 {
                return Err(OracleError::CutoffTooSmall { needed: 2, cutoff: d });
            }
            let f = input.spdc_amplitude().unwrap_or_default();
            let pairs = modes.len();
            let total = 2 * pairs;
            let dim = checked_dim(total, d)?;
            let norm = (1.0 + pairs as f64 * f.norm_sqr()).sqrt();
            let mut psi = DVector::zeros(dim);
            psi[0] = C64::new(1.0 / norm, 0.0);
            for j in 0..pairs {
                let mut occ = vec![0; total];
                occ[j] = 1;
                occ[pairs + j] = 1;
                psi[encode(&occ, d)] = f / norm;
            }
            FockDensity::from_pure(total, d, &psi, 0.0)
        }
    }
}

// ⟨m| e^{iξ* a†} e^{iξ a} |n⟩ on the truncated space. Both factors are
// nilpotent there, and their product is exact for m, n < d.
fn displacement_factor(xi: C64, cutoff: usize) -> DMatrix<C64> {
    let d = cutoff;
    let lower = C64::i() * xi;
    let raise = C64::i() * xi.conj();
    let mut inv_fact = vec![1.0; d];
    for k in 1..d {
        inv_fact[k] = inv_fact[k - 1] / k as f64;
    }
    let annihilate = DMatrix::from_fn(d, d, |m, n| {
        if n < m {
            C64::new(0.0, 0.0)
        } else {
            lower.powu((n - m) as u32) * inv_fact[n - m] * factorial_sqrt(n) / factorial_sqrt(m)
        }
    });
    let create = DMatrix::from_fn(d, d, |m, n| {
        if m < n {
            C64::new(0.0, 0.0)
        } else {
            raise.powu((m - n) as u32) * inv_fact[m - n] * factorial_sqrt(m) / factorial_sqrt(n)
        }
    });
    create * annihilate
}

/// Bound on the χ error caused by the truncated tail of weight `w`.
/// Truncation moves the state by at most `2√w + w` in trace norm, and
/// `e^{iξ*a†} e^{iξa}` is `e^{|ξ|²/2}` times a unitary displacement.
pub fn tail_sensitivity(rho: &FockDensity, xi: &[C64]) -> f64 {
    let w = rho.tail_defect.max(0.0);
    let norm = (0.5 * xi.iter().map(|x| x.norm_sqr()).sum::<f64>()).exp();
    (2.0 * w.sqrt() + w) * norm
}

/// `tr(ρ Π_j e^{iξ_j* a_j†} e^{iξ_j a_j})` by explicit matrices.
pub fn char_function_fock(rho: &FockDensity, xi: &[C64], tol: f64) -> Result<C64, OracleError> {
    if xi.len() != rho.modes {
        return Err(OracleError::ArgumentMismatch { expected: rho.modes, got: xi.len() });
    }
    let estimate = tail_sensitivity(rho, xi);
    if estimate > tol {
        return Err(OracleError::CharInaccurate { estimate, tolerance: tol });
    }
    let factors: Vec<DMatrix<C64>> = xi.iter().map(|&x| displacement_factor(x, rho.cutoff)).collect();
    let occupations: Vec<Vec<usize>> = (0..rho.dim()).map(|s| rho.occupation(s)).collect();
    let mut total = C64::new(0.0, 0.0);
    for (s, occ_s) in occupations.iter().enumerate() {
        for (t, occ_t) in occupations.iter().enumerate() {
            let r = rho.matrix[(s, t)];
            if r == C64::new(0.0, 0.0) {
                continue;
            }
            let op: C64 = factors.iter().zip(occ_t.iter().zip(occ_s)).map(|(f, (&a, &b))| f[(a, b)]).product();
            total += r * op;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aperture::ModeIndex;
    use crate::special::laguerre;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn encode_roundtrip() {
        for i in 0..64 {
            assert_eq!(encode(&decode(i, 3, 4), 4), i);
        }
        assert_eq!(decode(5, 2, 3), vec![1, 2]);
    }

    #[test]
    fn fock_projector() {
        let rho = single_mode_density(&SingleModeState::fock(2), 5).unwrap();
        assert_eq!(rho.matrix()[(2, 2)], c(1.0, 0.0));
        assert_eq!(rho.trace(), 1.0);
        assert_eq!(rho.purity(), 1.0);
        assert!(matches!(
            single_mode_density(&SingleModeState::fock(5), 5),
            Err(OracleError::CutoffTooSmall { needed: 6, cutoff: 5 })
        ));
    }

    #[test]
    fn thermal_geometric_weights() {
        let input = InputState::single(ModeIndex::ZERO, SingleModeState::thermal(1.0));
        let d = cutoff_for_tail(&input, 1e-10);
        assert_eq!(d, 34);
        let rho = build_state(&input, d).unwrap();
        assert!(rho.tail_defect() <= 1e-10);
        assert!((rho.trace() + rho.tail_defect() - 1.0).abs() < 1e-15);
        for n in 0..d {
            assert!((rho.matrix()[(n, n)].re - 0.5f64.powi(n as i32 + 1)).abs() < 1e-17);
        }
    }

    #[test]
    fn spdc_state_is_normalized() {
        let input = InputState::spdc(c(0.3, 0.2), vec![ModeIndex::new(0, 0), ModeIndex::new(1, 0)]).unwrap();
        let rho = build_state(&input, 3).unwrap();
        assert_eq!(rho.modes(), 4);
        assert!((rho.trace() - 1.0).abs() < 1e-15);
        assert!((rho.purity() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn beam_splitter_state_moments() {
        let modes = [ModeIndex::new(1, 0), ModeIndex::new(-1, 0)];
        let input = InputState::beam_splitter_fock(3, 0.6, 0.8, modes).unwrap();
        let rho = build_state(&input, 4).unwrap();
        let g = input.coherence_matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert!((rho.coherence(i, j) - g[(i, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn fock_char_matches_laguerre() {
        for n in 0..5u32 {
            let rho = single_mode_density(&SingleModeState::fock(n), 6).unwrap();
            for xi in [C64::from_polar(1.0, 0.3), c(0.4, -0.7), c(1.3, 0.2)] {
                let got = char_function_fock(&rho, &[xi], 1e-8).unwrap();
                assert!((got - laguerre(n, xi.norm_sqr())).norm() < 1e-12);
            }
        }
        let one = single_mode_density(&SingleModeState::fock(1), 2).unwrap();
        let v = char_function_fock(&one, &[C64::from_polar(1.0, 2.0)], 1e-8).unwrap();
        assert!(v.norm() < 1e-8);
    }

    #[test]
    fn coherent_char_within_cutoff() {
        let alpha = c(0.6, -0.3);
        let input = InputState::single(ModeIndex::ZERO, SingleModeState::coherent(alpha));
        let d = cutoff_for_tail(&input, 1e-16);
        let rho = build_state(&input, d).unwrap();
        for xi in [c(0.2, 0.1), c(-0.4, 0.3)] {
            let got = char_function_fock(&rho, &[xi], 1e-8).unwrap();
            let want = SingleModeState::coherent(alpha).normal_char(xi);
            assert!((got - want).norm() < 1e-8);
        }
    }

    #[test]
    fn inaccurate_char_flagged() {
        let rho = single_mode_density(&SingleModeState::thermal(2.0), 8).unwrap();
        assert!(matches!(char_function_fock(&rho, &[c(3.0, 0.0)], 1e-8), Err(OracleError::CharInaccurate { .. })));
    }

    #[test]
    fn partial_trace_of_product() {
        let a = single_mode_density(&SingleModeState::thermal(0.5), 4).unwrap();
        let b = single_mode_density(&SingleModeState::fock(2), 4).unwrap();
        let ab = a.kron(&b).unwrap();
        let back = ab.partial_trace(&[0]).unwrap();
        assert!((back.matrix() - a.matrix()).norm() < 1e-16);
        let back = ab.partial_trace(&[1]).unwrap();
        assert!((back.matrix() * C64::new(a.trace(), 0.0).inv() - b.matrix()).norm() < 1e-15);
        let swapped = ab.partial_trace(&[1, 0]).unwrap();
        assert!((swapped.matrix() - b.kron(&a).unwrap().matrix()).norm() < 1e-16);
        assert!(matches!(ab.partial_trace(&[0, 0]), Err(OracleError::ModeOutOfRange(0))));
    }

    #[test]
    fn thermal_fano_factor() {
        let rho = single_mode_density(&SingleModeState::thermal(0.8), 60).unwrap();
        let mean = rho.mean_number(0) / rho.trace();
        let fano = rho.number_variance(0) / mean;
        assert!((fano - 1.8).abs() < 1e-10);
    }

    #[test]
    fn dimension_limit() {
        assert!(matches!(FockDensity::vacuum(10, 4), Err(OracleError::TooLarge { .. })));
    }
}
