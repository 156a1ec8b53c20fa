//! State overlaps `tr(ρ₁ρ₂)` from characteristic functions and the
//! Schlienz–Mahler total-correlation measure.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::oracle::{FockDensity, OracleError};
use crate::quadrature::{gauss_hermite_adaptive, QuadratureError};

/// Hermiticity and positivity slack for [`GaussianNormalForm`].
pub const FORM_TOL: f64 = 1e-12;
/// `γ²` below `-NEGATIVE_GAMMA_WARN` is reported before being clamped.
pub const NEGATIVE_GAMMA_WARN: f64 = 1e-10;
/// Largest mode count accepted by [`overlap_quadrature`].
pub const MAX_QUADRATURE_MODES: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntanglementError {
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("overlap quadrature supports at most {MAX_QUADRATURE_MODES} modes, got {0}")]
    TooManyModes(usize),
    #[error("state dimension 1 makes the N/(N-1) factor undefined")]
    DegenerateDimension,
    #[error("bipartition at {split} is invalid for {modes} modes")]
    InvalidSplit { split: usize, modes: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Gaussian normal characteristic function `χ(ξ) = exp(−ξ† A ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianNormalForm {
    a: DMatrix<C64>,
}

impl GaussianNormalForm {
    pub fn new(a: DMatrix<C64>) -> Result<Self, EntanglementError> {
        if !a.is_square() {
            return Err(EntanglementError::DimensionMismatch(a.nrows(), a.ncols()));
        }
        let skew = (&a - a.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if skew > FORM_TOL {
            return Err(EntanglementError::NotHermitian(skew));
        }
        let min = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -FORM_TOL {
            return Err(EntanglementError::NotPositive(min));
        }
        Ok(Self { a })
    }

    pub fn vacuum(modes: usize) -> Self {
        Self { a: DMatrix::zeros(modes, modes) }
    }

    /// Single-mode thermal state, `A = N̄`.
    pub fn thermal(mean: f64) -> Result<Self, EntanglementError> {
        Self::new(DMatrix::from_element(1, 1, C64::new(mean, 0.0)))
    }

    pub fn modes(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.a
    }

    pub fn char(&self, xi: &[C64]) -> C64 {
        let mut q = C64::new(0.0, 0.0);
        for i in 0..self.modes() {
            for j in 0..self.modes() {
                q += xi[i].conj() * self.a[(i, j)] * xi[j];
            }
        }
        (-q).exp()
    }

    /// Reduced form on `keep`: the other modes' rows and columns are deleted
    /// (setting their `ξ` to zero).
    pub fn marginal(&self, keep: &[usize]) -> GaussianNormalForm {
        GaussianNormalForm { a: DMatrix::from_fn(keep.len(), keep.len(), |i, j| self.a[(keep[i], keep[j])]) }
    }

    /// Form of the product state `ρ ⊗ σ`.
    pub fn product(&self, other: &GaussianNormalForm) -> GaussianNormalForm {
        let n = self.modes() + other.modes();
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (self.modes(), self.modes())).copy_from(&self.a);
        a.view_mut((self.modes(), self.modes()), (other.modes(), other.modes())).copy_from(&other.a);
        GaussianNormalForm { a }
    }
}

/// Two-mode normal form of the diffraction field from a thermal incident
/// mode, with the scalars used by the closed-form measure.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalDiffractionForm {
    pub form: GaussianNormalForm,
    /// `x_i = 2N̄λ|f_i|² + 1`.
    pub x1: f64,
    pub x2: f64,
    /// `y = N̄λ|f₁f₂|`.
    pub y: f64,
}

/// `χ(ξ₁, ξ₂) = exp(−N̄λ|ξ₁f₁ + ξ₂f₂|²)`, i.e. `A_ij = N̄λ·conj(f_i)·f_j`.
pub fn thermal_diffraction_form(mean: f64, lambda: f64, f1: C64, f2: C64) -> ThermalDiffractionForm {
    let s = mean * lambda;
    let v = [f1, f2];
    let a = DMatrix::from_fn(2, 2, |i, j| v[i].conj() * v[j] * s);
    ThermalDiffractionForm {
        form: GaussianNormalForm { a },
        x1: 2.0 * s * f1.norm_sqr() + 1.0,
        x2: 2.0 * s * f2.norm_sqr() + 1.0,
        y: s * (f1 * f2).norm(),
    }
}

/// `tr(ρ₁ρ₂) = 1/det(A₁ + A₂ + I)`.
pub fn overlap_gaussian(a1: &GaussianNormalForm, a2: &GaussianNormalForm) -> Result<f64, EntanglementError> {
    if a1.modes() != a2.modes() {
        return Err(EntanglementError::DimensionMismatch(a1.modes(), a2.modes()));
    }
    let n = a1.modes();
    let sum = &a1.a + &a2.a + DMatrix::<C64>::identity(n, n);
    Ok(1.0 / sum.determinant().re)
}

/// `tr(ρ₁ρ₂) = ∫ (d²ξ/π)^m χ₁(ξ) χ₂(−ξ) e^{−|ξ|²}` by Gauss–Hermite product
/// quadrature with order doubling, to absolute tolerance `tol`.
pub fn overlap_quadrature<F1, F2>(chi1: F1, chi2: F2, modes: usize, tol: f64) -> Result<f64, EntanglementError>
where
    F1: Fn(&[C64]) -> C64,
    F2: Fn(&[C64]) -> C64,
{
    if modes == 0 || modes > MAX_QUADRATURE_MODES {
        return Err(EntanglementError::TooManyModes(modes));
    }
    let norm = std::f64::consts::PI.powi(modes as i32);
    let integrand = |u: &[f64]| {
        let mut xi = [C64::new(0.0, 0.0); MAX_QUADRATURE_MODES];
        let mut neg = xi;
        for (i, p) in u.chunks(2).enumerate() {
            xi[i] = C64::new(p[0], p[1]);
            neg[i] = -xi[i];
        }
        chi1(&xi[..modes]) * chi2(&neg[..modes])
    };
    let max_order = if modes == 1 { 512 } else { 96 };
    // successive estimates converge geometrically; a quarter of the
    // tolerance on their difference bounds the error of the finer one
    let value = gauss_hermite_adaptive(&integrand, 2 * modes, 12, max_order, 0.25 * tol * norm)?;
    Ok(value.re / norm)
}

/// The three overlaps entering `γ²`: `tr ρ²`, `tr(ρ ρ_a⊗ρ_b)` and
/// `tr(ρ_a⊗ρ_b)²`, from the closed form in `x₁, x₂, y`.
pub fn thermal_gamma_terms(x1: f64, x2: f64, y: f64) -> [f64; 3] {
    let p = x1 * x2;
    [1.0 / (p - 4.0 * y * y), 1.0 / (p - y * y), 1.0 / p]
}

fn gamma_from_square(g2: f64) -> f64 {
    if g2 < -NEGATIVE_GAMMA_WARN {
        log::warn!("negative gamma squared {g2:.3e} clamped to zero");
    }
    g2.max(0.0).sqrt()
}

/// Schlienz–Mahler measure of the two diffraction modes fed by a thermal
/// incident mode, in the continuous-variable limit `N/(N−1) → 1`.
pub fn schlienz_mahler_thermal(mean: f64, lambda: f64, f1: C64, f2: C64) -> f64 {
    let t = thermal_diffraction_form(mean, lambda, f1, f2);
    let [a, b, c] = thermal_gamma_terms(t.x1, t.x2, t.y);
    gamma_from_square(a - 2.0 * b + c)
}

/// Symmetric case `|f₁| = |f₂|`, where `x₁ = x₂ = 2y + 1`.
pub fn schlienz_mahler_symmetric(y: f64) -> f64 {
    let g2 = 1.0 / (4.0 * y + 1.0) - 2.0 / ((3.0 * y + 1.0) * (y + 1.0)) + 1.0 / (2.0 * y + 1.0).powi(2);
    gamma_from_square(g2)
}

/// `‖ρ − ρ_a⊗ρ_b‖_F` for the bipartition into modes `0..split` and the rest.
/// For a truncated state the product is divided by `tr ρ` so both terms
/// carry the same weight.
pub fn correlation_distance(rho: &FockDensity, split: usize) -> Result<f64, EntanglementError> {
    let m = rho.modes();
    if split == 0 || split >= m {
        return Err(EntanglementError::InvalidSplit { split, modes: m });
    }
    let a: Vec<usize> = (0..split).collect();
    let b: Vec<usize> = (split..m).collect();
    let product = rho.partial_trace(&a)?.kron(&rho.partial_trace(&b)?)?;
    let scale = C64::new(1.0 / rho.trace(), 0.0);
    Ok((rho.matrix() - product.matrix() * scale).norm())
}

/// `γ = √(N/(N−1)·tr(ρ − ρ_a⊗ρ_b)²)` with `N` the Hilbert-space dimension.
pub fn schlienz_mahler_fock(rho: &FockDensity, split: usize) -> Result<f64, EntanglementError> {
    let n = rho.dim() as f64;
    if rho.dim() < 2 {
        return Err(EntanglementError::DegenerateDimension);
    }
    let d = correlation_distance(rho, split)?;
    Ok((n / (n - 1.0)).sqrt() * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::single_mode_density;
    use crate::states::SingleModeState;
    use nalgebra::DVector;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_and_thermal_overlaps() {
        let v = GaussianNormalForm::vacuum(1);
        assert_eq!(overlap_gaussian(&v, &v).unwrap(), 1.0);
        let t = GaussianNormalForm::thermal(1.5).unwrap();
        assert!((overlap_gaussian(&t, &t).unwrap() - 0.25).abs() < 1e-15);
        // Σ p_n² for geometric p_n
        let q: f64 = 1.5 / 2.5;
        let fock_sum: f64 = (0..400).map(|n| ((1.0 - q) * q.powi(n)).powi(2)).sum();
        assert!((overlap_gaussian(&t, &t).unwrap() - fock_sum).abs() < 1e-14);
        assert!(overlap_gaussian(&v, &GaussianNormalForm::vacuum(2)).is_err());
    }

    #[test]
    fn form_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(matches!(GaussianNormalForm::new(bad), Err(EntanglementError::NotHermitian(_))));
        assert!(matches!(GaussianNormalForm::thermal(-0.5), Err(EntanglementError::NotPositive(_))));
    }

    #[test]
    fn thermal_form_scalars() {
        let t = thermal_diffraction_form(0.0, 0.3, c(0.2, 0.1), c(0.4, 0.0));
        assert_eq!(t.form.matrix(), &DMatrix::zeros(2, 2));
        let f = C64::from_polar(0.3, 0.7);
        let t = thermal_diffraction_form(2.0, 0.4, f, f.conj());
        assert!((t.x1 - (2.0 * t.y + 1.0)).abs() < 1e-15);
        let t = thermal_diffraction_form(1.3, 0.25, c(0.2, 0.1), c(-0.4, 0.3));
        assert!((t.y * t.y - (t.x1 - 1.0) * (t.x2 - 1.0) / 4.0).abs() < 1e-16);
        // χ from the form matches exp(−N̄λ|ξ₁f₁+ξ₂f₂|²)
        let xi = [c(0.3, -0.2), c(0.1, 0.5)];
        let direct = (-1.3 * 0.25 * (xi[0] * c(0.2, 0.1) + xi[1] * c(-0.4, 0.3)).norm_sqr()).exp();
        assert!((t.form.char(&xi).re - direct).abs() < 1e-15);
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let a = c(0.3, -0.2);
        let b = c(-0.1, 0.4);
        let ca = SingleModeState::coherent(a);
        let cb = SingleModeState::coherent(b);
        let v =
            overlap_quadrature(|x: &[C64]| ca.normal_char(x[0]), |x: &[C64]| cb.normal_char(x[0]), 1, 1e-6).unwrap();
        assert!((v - (-(a - b).norm_sqr()).exp()).abs() < 1e-6);
        let fock = SingleModeState::fock(1);
        let v = overlap_quadrature(|x: &[C64]| fock.normal_char(x[0]), |x: &[C64]| fock.normal_char(x[0]), 1, 1e-6)
            .unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        let t = thermal_diffraction_form(0.8, 0.5, c(0.6, 0.1), c(0.3, -0.4)).form;
        let q = overlap_quadrature(|x: &[C64]| t.char(x), |x: &[C64]| t.char(x), 2, 1e-6).unwrap();
        assert!((q - overlap_gaussian(&t, &t).unwrap()).abs() < 1e-6);
        assert!(overlap_quadrature(|_: &[C64]| c(1.0, 0.0), |_: &[C64]| c(1.0, 0.0), 3, 1e-6).is_err());
    }

    #[test]
    fn symmetric_gamma_matches_general() {
        let f = c(0.4, 0.0);
        for &mean in &[0.1, 1.0, 5.0, 40.0] {
            let lambda = 0.5;
            let y = mean * lambda * f.norm_sqr();
            let g = schlienz_mahler_thermal(mean, lambda, f, f);
            assert!((g - schlienz_mahler_symmetric(y)).abs() < 1e-12);
        }
        assert_eq!(schlienz_mahler_thermal(0.0, 0.5, f, f), 0.0);
        assert!(schlienz_mahler_symmetric(1.1) > 0.247 && schlienz_mahler_symmetric(1.1) < 0.248);
    }

    #[test]
    fn marginals_delete_rows() {
        let t = thermal_diffraction_form(1.0, 0.5, c(0.6, 0.1), c(0.3, -0.4));
        let m1 = t.form.marginal(&[0]);
        assert!((m1.matrix()[(0, 0)].re - (t.x1 - 1.0) / 2.0).abs() < 1e-15);
        let prod = m1.product(&t.form.marginal(&[1]));
        let terms = thermal_gamma_terms(t.x1, t.x2, t.y);
        assert!((overlap_gaussian(&t.form, &t.form).unwrap() - terms[0]).abs() < 1e-13);
        assert!((overlap_gaussian(&t.form, &prod).unwrap() - terms[1]).abs() < 1e-13);
        assert!((overlap_gaussian(&prod, &prod).unwrap() - terms[2]).abs() < 1e-13);
    }

    #[test]
    fn fock_measure_examples() {
        let a = single_mode_density(&SingleModeState::thermal(0.4), 3).unwrap();
        let b = single_mode_density(&SingleModeState::fock(1), 3).unwrap();
        let prod = a.kron(&b).unwrap();
        assert!(schlienz_mahler_fock(&prod, 1).unwrap() < 1e-15);

        // (|01⟩⟨01| + |10⟩⟨10|)/2 at cutoff 2: separable yet correlated
        let mut m = DMatrix::zeros(4, 4);
        m[(1, 1)] = c(0.5, 0.0);
        m[(2, 2)] = c(0.5, 0.0);
        let rho = FockDensity::new(2, 2, m, 0.0).unwrap();
        let g = schlienz_mahler_fock(&rho, 1).unwrap();
        assert!((g - 1.0 / 3f64.sqrt()).abs() < 1e-15);

        // Bell state (|01⟩ + |10⟩)/√2: γ = 1
        let mut psi = DVector::zeros(4);
        psi[1] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        psi[2] = psi[1];
        let bell = FockDensity::from_pure(2, 2, &psi, 0.0).unwrap();
        assert!((schlienz_mahler_fock(&bell, 1).unwrap() - 1.0).abs() < 1e-15);

        let one = FockDensity::vacuum(1, 1).unwrap();
        assert_eq!(schlienz_mahler_fock(&one, 1), Err(EntanglementError::DegenerateDimension));
        assert!(matches!(schlienz_mahler_fock(&rho, 2), Err(EntanglementError::InvalidSplit { .. })));
    }
}
