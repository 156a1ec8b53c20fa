//! Photon-number observables of the diffraction field.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::aperture::{Aperture, ApertureError, ModeGrid, ModeIndex};
use crate::diffraction::{build_restricted_map, DiffractionError, ModeMap};
use crate::states::{InputState, StateError};

/// Pattern entries below this fraction of the largest incoherent intensity
/// are left out of the visibility.
const VISIBILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("diffraction factor vanishes between {k} and {incident}: h is singular")]
    SingularH { k: ModeIndex, incident: ModeIndex },
    #[error("correlation denominator is not positive (F_n = {fano}, h1 = {h1}, h2 = {h2})")]
    NonPositiveDenominator { fano: f64, h1: f64, h2: f64 },
    #[error("mean photon number must be positive, got {0}")]
    NonPositiveMean(f64),
    #[error("ghost correlation needs an SPDC pair input")]
    NotSpdc,
    #[error("idler mode {0} is not part of the SPDC pairing")]
    UnknownIdler(ModeIndex),
    #[error(transparent)]
    Aperture(#[from] ApertureError),
    #[error(transparent)]
    Diffraction(#[from] DiffractionError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// `h = 1/(λ|f(k−k₀′)|²)`.
pub fn h_factor(aperture: &Aperture, k: ModeIndex, incident: ModeIndex) -> Result<f64, ObservableError> {
    let f = aperture.factor_at_offset(k.offset_from(incident));
    let coupling = aperture.transmissivity() * f.norm_sqr();
    // |f|² at a rounding-level fraction of its peak value λ is a null
    if coupling <= 1e-28 * aperture.transmissivity().powi(2) {
        return Err(ObservableError::SingularH { k, incident });
    }
    Ok(1.0 / coupling)
}

/// Photon-number correlation coefficient between two diffraction modes fed
/// by one incident mode of Fano factor `F_n`.
pub fn number_correlation(fano: f64, h1: f64, h2: f64) -> Result<f64, ObservableError> {
    let denom = (fano + h1 - 1.0) * (fano + h2 - 1.0);
    if !(denom > 0.0) || fano + h1 - 1.0 <= 0.0 {
        return Err(ObservableError::NonPositiveDenominator { fano, h1, h2 });
    }
    Ok((fano - 1.0) / denom.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub eta: f64,
    pub fano: f64,
    pub h1: f64,
    pub h2: f64,
    pub mean1: f64,
    pub mean2: f64,
    pub variance1: f64,
    pub variance2: f64,
    pub covariance: f64,
    /// `min over β₁, β₂ of ⟨(n₁ − β₁n₂ − β₂)²⟩`.
    pub residual_variance: f64,
    pub beta1: f64,
    pub beta2: f64,
}

/// Second moments of two diffraction modes fed by a single incident mode of
/// mean `N̄` and Fano factor `F_n`, with the least-squares regression of
/// `n₁` on `n₂`.
pub fn residual_variance(mean: f64, fano: f64, h1: f64, h2: f64) -> Result<CorrelationReport, ObservableError> {
    if !(mean > 0.0) {
        return Err(ObservableError::NonPositiveMean(mean));
    }
    let eta = number_correlation(fano, h1, h2)?;
    let variance1 = mean / (h1 * h1) * (fano + h1 - 1.0);
    let variance2 = mean / (h2 * h2) * (fano + h2 - 1.0);
    let covariance = mean * (fano - 1.0) / (h1 * h2);
    let (mean1, mean2) = (mean / h1, mean / h2);
    let beta1 = covariance / variance2;
    Ok(CorrelationReport {
        eta,
        fano,
        h1,
        h2,
        mean1,
        mean2,
        variance1,
        variance2,
        covariance,
        residual_variance: (variance1 * (1.0 - eta * eta)).max(0.0),
        beta1,
        beta2: mean1 - beta1 * mean2,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PatternResult {
    pub modes: Vec<ModeIndex>,
    pub mean: Vec<f64>,
    /// Diagonal-only part `Σ_i |M[k,i]|² ⟨a_i† a_i⟩`.
    pub incoherent: Vec<f64>,
    pub transmissivity: f64,
    /// Largest `1 − Σ_k |f(k−k′)|²` over incident modes, summed on the grid.
    pub defect: f64,
    pub decorrelated: bool,
}

impl PatternResult {
    pub fn total(&self) -> f64 {
        self.mean.iter().sum()
    }

    /// Relative size of the interference term, `max_k |⟨n_k⟩ − D_k| / D_k`
    /// over modes where the incoherent part `D_k` is not negligible. Equals 1
    /// when some mode shows complete destructive or constructive
    /// interference of two equal contributions, and 0 without interference.
    pub fn visibility(&self) -> f64 {
        let peak = self.incoherent.iter().copied().fold(0.0, f64::max);
        self.mean
            .iter()
            .zip(&self.incoherent)
            .filter(|(_, &d)| d > VISIBILITY_FLOOR * peak)
            .map(|(&n, &d)| (n - d).abs() / d)
            .fold(0.0, f64::max)
    }
}

/// `⟨n_k⟩ = Σ_{i,j} M*[k,i] M[k,j] G_ij` for each row of `map`.
pub fn pattern_from_coherence(map: &ModeMap, coherence: &DMatrix<C64>) -> Vec<f64> {
    let m = map.entries();
    (0..m.nrows())
        .map(|k| {
            let row = m.row(k);
            let mut total = C64::new(0.0, 0.0);
            for i in 0..m.ncols() {
                for j in 0..m.ncols() {
                    total += row[i].conj() * row[j] * coherence[(i, j)];
                }
            }
            total.re.max(0.0)
        })
        .collect()
}

/// Per-incident-mode normalization defect on the grid.
pub fn incident_defect(aperture: &Aperture, grid: &ModeGrid, incident: ModeIndex) -> f64 {
    let sum: f64 = grid.indices().map(|k| aperture.factor_at_offset(k.offset_from(incident)).norm_sqr()).sum();
    (1.0 - sum).abs()
}

/// Mean photon number at each listed diffraction mode. With `decorrelate`
/// the input is replaced by the product of its single-mode marginals.
pub fn mean_photon_pattern(
    input: &InputState,
    aperture: &Aperture,
    grid: &ModeGrid,
    modes: &[ModeIndex],
    decorrelate: bool,
) -> Result<PatternResult, ObservableError> {
    input.validate()?;
    let incident = input.incident_modes();
    let map = build_restricted_map(aperture, grid, &incident, modes)?;
    let coherence = if decorrelate { input.marginal_coherence_matrix() } else { input.coherence_matrix() };
    let diagonal = DMatrix::from_diagonal(&coherence.diagonal());
    let defect = incident.iter().map(|k| incident_defect(aperture, grid, *k)).fold(0.0, f64::max);
    Ok(PatternResult {
        modes: modes.to_vec(),
        mean: pattern_from_coherence(&map, &coherence),
        incoherent: pattern_from_coherence(&map, &diagonal),
        transmissivity: aperture.transmissivity(),
        defect,
        decorrelated: decorrelate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GhostPoint {
    pub idler: ModeIndex,
    /// `λ|F|²|f(k−k′)|²`.
    pub leading: f64,
    /// Same, for the normalized pair state: divided by `1 + M|F|²`.
    pub exact: f64,
}

/// Coincidence correlation `⟨b_k† b_k c_{k′}† c_{k′}⟩` between a fixed
/// diffraction mode `k` and each scanned idler. The idler labelled `k′` is
/// the partner of the signal launched into incident mode `k′`.
pub fn ghost_g2(
    input: &InputState,
    aperture: &Aperture,
    grid: &ModeGrid,
    k: ModeIndex,
    idlers: &[ModeIndex],
) -> Result<Vec<GhostPoint>, ObservableError> {
    input.validate()?;
    let (f2, pairs) = match input {
        InputState::SpdcPair { modes, .. } => (input.spdc_amplitude().unwrap_or_default().norm_sqr(), modes),
        _ => return Err(ObservableError::NotSpdc),
    };
    let map = build_restricted_map(aperture, grid, pairs, &[k])?;
    let norm = 1.0 + pairs.len() as f64 * f2;
    idlers
        .iter()
        .map(|idler| {
            let j = pairs.iter().position(|p| p == idler).ok_or(ObservableError::UnknownIdler(*idler))?;
            let leading = f2 * map.entries()[(0, j)].norm_sqr();
            Ok(GhostPoint { idler: *idler, leading, exact: leading / norm })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::SingleModeState;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn slits() -> (Aperture, ModeGrid) {
        (Aperture::double_slit(0.125, 0.5, 1.0).unwrap(), ModeGrid::new(1.0, 40).unwrap())
    }

    #[test]
    fn h_on_axis() {
        let ap = Aperture::rectangle(0.5, 0.5, [0.0, 0.0], 1.0).unwrap();
        let k = ModeIndex::new(2, 1);
        let h = h_factor(&ap, k, k).unwrap();
        assert!((h - 16.0).abs() < 1e-12);
        let full = Aperture::full_plane(1.0).unwrap();
        assert_eq!(h_factor(&full, k, k).unwrap(), 1.0);
    }

    #[test]
    fn h_singular_at_null() {
        let (ap, _) = slits();
        // cos(π·n·0.5) vanishes at n = 1
        let k = ModeIndex::new(1, 0);
        assert!(matches!(h_factor(&ap, k, ModeIndex::ZERO), Err(ObservableError::SingularH { .. })));
    }

    #[test]
    fn eta_examples() {
        assert_eq!(number_correlation(1.0, 3.0, 5.0).unwrap(), 0.0);
        assert_eq!(number_correlation(0.0, 3.0, 3.0).unwrap(), -0.5);
        assert_eq!(number_correlation(10.0, 3.0, 3.0).unwrap(), 0.75);
        assert!(number_correlation(1e9, 3.0, 3.0).unwrap() > 1.0 - 1e-8);
        assert!(number_correlation(0.0, 0.5, 3.0).is_err());
    }

    #[test]
    fn eta_symmetric_and_monotone() {
        let mut last = -1.0;
        for i in 0..200 {
            let f = i as f64 * 0.1;
            let a = number_correlation(f, 2.0, 7.0).unwrap();
            let b = number_correlation(f, 7.0, 2.0).unwrap();
            assert_eq!(a, b);
            assert!(a > last);
            assert!((-1.0..=1.0).contains(&a));
            last = a;
        }
    }

    #[test]
    fn residual_limits() {
        let r = residual_variance(5.0, 1.0, 4.0, 4.0).unwrap();
        assert!((r.residual_variance - 1.25).abs() < 1e-15);
        let n = 1e6;
        let r = residual_variance(n, n + 1.0, 4.0, 4.0).unwrap();
        assert!((r.residual_variance / (2.0 * n / 4.0) - 1.0).abs() < 1e-5);
        assert!(matches!(residual_variance(0.0, 1.0, 2.0, 2.0), Err(ObservableError::NonPositiveMean(_))));
    }

    #[test]
    fn thermal_pattern_is_classical() {
        let (ap, grid) = slits();
        let k0 = ModeIndex::new(3, 0);
        let input = InputState::single(k0, SingleModeState::thermal(2.0));
        let modes: Vec<ModeIndex> = (-5..=5).map(|n| ModeIndex::new(n, 0)).collect();
        let p = mean_photon_pattern(&input, &ap, &grid, &modes, false).unwrap();
        for (k, n) in modes.iter().zip(&p.mean) {
            let f = ap.factor_at_offset(k.offset_from(k0));
            assert!((n - 2.0 * ap.transmissivity() * f.norm_sqr()).abs() < 1e-15);
        }
    }

    #[test]
    fn correlated_and_decorrelated_fringes() {
        let (ap, grid) = slits();
        let pair = [ModeIndex::new(2, 0), ModeIndex::new(-2, 0)];
        let input = InputState::beam_splitter_fock(2, FRAC_1_SQRT_2, FRAC_1_SQRT_2, pair).unwrap();
        let modes: Vec<ModeIndex> = (-8..=8).map(|n| ModeIndex::new(n, 0)).collect();
        let joint = mean_photon_pattern(&input, &ap, &grid, &modes, false).unwrap();
        let product = mean_photon_pattern(&input, &ap, &grid, &modes, true).unwrap();
        assert!((joint.visibility() - 1.0).abs() < 1e-10);
        assert_eq!(product.visibility(), 0.0);
        let lambda = ap.transmissivity();
        let (r, t) = (FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        for (i, k) in modes.iter().enumerate() {
            let f1 = ap.factor_at_offset(k.offset_from(pair[0]));
            let f2 = ap.factor_at_offset(k.offset_from(pair[1]));
            let eq34 = lambda * 2.0 * (f1 * r - f2 * t).norm_sqr();
            let eq35 = lambda * 2.0 * ((f1 * r).norm_sqr() + (f2 * t).norm_sqr());
            assert!((joint.mean[i] - eq34).abs() < 1e-15);
            assert!((product.mean[i] - eq35).abs() < 1e-15);
            let cross = 2.0 * lambda * 2.0 * r * t * (f1.conj() * f2).re;
            assert!((eq34 - (eq35 - cross)).abs() < 1e-15);
        }
    }

    #[test]
    fn pattern_is_additive_over_product_inputs() {
        let (ap, grid) = slits();
        let a = (ModeIndex::new(1, 0), SingleModeState::thermal(0.7));
        let b = (ModeIndex::new(-4, 0), SingleModeState::fock(3));
        let modes: Vec<ModeIndex> = (-6..=6).map(|n| ModeIndex::new(n, 0)).collect();
        let joint = InputState::Product { modes: vec![a, b] };
        let pj = mean_photon_pattern(&joint, &ap, &grid, &modes, false).unwrap();
        let pa = mean_photon_pattern(&InputState::single(a.0, a.1), &ap, &grid, &modes, false).unwrap();
        let pb = mean_photon_pattern(&InputState::single(b.0, b.1), &ap, &grid, &modes, false).unwrap();
        for i in 0..modes.len() {
            assert!((pj.mean[i] - pa.mean[i] - pb.mean[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn ghost_aligned_value() {
        let (ap, grid) = slits();
        let f = C64::new(0.05, 0.02);
        let pairs = vec![ModeIndex::new(0, 0), ModeIndex::new(1, 0), ModeIndex::new(3, 0)];
        let input = InputState::spdc(f, pairs.clone()).unwrap();
        let k = ModeIndex::ZERO;
        let g = ghost_g2(&input, &ap, &grid, k, &pairs).unwrap();
        let lambda = ap.transmissivity();
        assert!((g[0].leading - lambda * lambda * f.norm_sqr()).abs() < 1e-17);
        assert!((g[0].exact - g[0].leading / (1.0 + 3.0 * f.norm_sqr())).abs() < 1e-17);
        assert_eq!(g[1].leading, 0.0);
        assert!(matches!(
            ghost_g2(&input, &ap, &grid, k, &[ModeIndex::new(7, 0)]),
            Err(ObservableError::UnknownIdler(_))
        ));
    }
}
