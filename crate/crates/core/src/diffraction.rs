//! The incident → diffraction mode map `M[k,k′] = √λ·f(k−k′)` and the
//! characteristic-function substitution it induces.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::aperture::{Aperture, ApertureError, ModeGrid, ModeIndex};
use crate::states::{normal_char_multi, InputState, StateError};

/// Largest admissible singular value of a mode map.
pub const CONTRACTION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffractionError {
    #[error(transparent)]
    Aperture(#[from] ApertureError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("mode {0} is not on the grid")]
    OffGrid(ModeIndex),
    #[error("diffraction mode {0} is not a row of the mode map")]
    NotRetained(ModeIndex),
    #[error("input state modes do not match the mode map's incident modes")]
    IncidentMismatch,
    #[error("mode map is not a contraction: largest singular value {0}")]
    NonContractive(f64),
}

/// Mode map restricted to a list of diffraction rows and incident columns.
#[derive(Clone, Debug)]
pub struct ModeMap {
    grid: ModeGrid,
    transmissivity: f64,
    rows: Vec<ModeIndex>,
    cols: Vec<ModeIndex>,
    row_lookup: HashMap<ModeIndex, usize>,
    entries: DMatrix<C64>,
    full_grid: bool,
}

impl ModeMap {
    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn transmissivity(&self) -> f64 {
        self.transmissivity
    }

    pub fn rows(&self) -> &[ModeIndex] {
        &self.rows
    }

    pub fn incident_modes(&self) -> &[ModeIndex] {
        &self.cols
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Whether the rows cover the entire grid.
    pub fn is_full_grid(&self) -> bool {
        self.full_grid
    }

    pub fn row_of(&self, k: ModeIndex) -> Option<usize> {
        self.row_lookup.get(&k).copied()
    }

    pub fn get(&self, k: ModeIndex, incident: usize) -> Option<C64> {
        self.row_of(k).map(|r| self.entries[(r, incident)])
    }

    /// `Σ_k |M[k,j]|²` over the stored rows.
    pub fn column_norm_sqr(&self, j: usize) -> f64 {
        self.entries.column(j).iter().map(|v| v.norm_sqr()).sum()
    }

    /// Squared singular values of `M`, ascending.
    pub fn singular_values_sqr(&self) -> Vec<f64> {
        let gram = self.entries.adjoint() * &self.entries;
        let mut ev: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn max_singular_value(&self) -> f64 {
        self.singular_values_sqr().last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }

    /// Same map restricted to a subset of its rows.
    pub fn restrict(&self, rows: &[ModeIndex]) -> Result<ModeMap, DiffractionError> {
        let mut entries = DMatrix::zeros(rows.len(), self.cols.len());
        for (r, k) in rows.iter().enumerate() {
            let src = self.row_of(*k).ok_or(DiffractionError::NotRetained(*k))?;
            entries.row_mut(r).copy_from(&self.entries.row(src));
        }
        Ok(self.with_rows(rows.to_vec(), entries))
    }

    fn with_rows(&self, rows: Vec<ModeIndex>, entries: DMatrix<C64>) -> ModeMap {
        let row_lookup = rows.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        ModeMap {
            grid: self.grid,
            transmissivity: self.transmissivity,
            full_grid: false,
            rows,
            cols: self.cols.clone(),
            row_lookup,
            entries,
        }
    }
}

/// Mode map with a row for every grid mode, in grid order.
pub fn build_mode_map(
    aperture: &Aperture,
    grid: &ModeGrid,
    incident: &[ModeIndex],
) -> Result<ModeMap, DiffractionError> {
    let rows: Vec<ModeIndex> = grid.indices().collect();
    let mut map = build_rows(aperture, grid, incident, &rows)?;
    map.full_grid = true;
    Ok(map)
}

/// Mode map whose rows are only the listed diffraction modes.
pub fn build_restricted_map(
    aperture: &Aperture,
    grid: &ModeGrid,
    incident: &[ModeIndex],
    rows: &[ModeIndex],
) -> Result<ModeMap, DiffractionError> {
    build_rows(aperture, grid, incident, rows)
}

fn build_rows(
    aperture: &Aperture,
    grid: &ModeGrid,
    incident: &[ModeIndex],
    rows: &[ModeIndex],
) -> Result<ModeMap, DiffractionError> {
    aperture.check_grid(grid)?;
    if let Some(k) = incident.iter().chain(rows).find(|k| !grid.contains(**k)) {
        return Err(DiffractionError::OffGrid(*k));
    }
    let root_lambda = aperture.transmissivity().sqrt();
    let entries = DMatrix::from_fn(rows.len(), incident.len(), |r, c| {
        aperture.factor_at_offset(rows[r].offset_from(incident[c])) * root_lambda
    });
    let row_lookup = rows.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    Ok(ModeMap {
        grid: *grid,
        transmissivity: aperture.transmissivity(),
        rows: rows.to_vec(),
        cols: incident.to_vec(),
        row_lookup,
        entries,
        full_grid: false,
    })
}

/// Substituted arguments `ξ′_j = Σ_k ξ_k M[k,j]` for a sparse `ξ` over
/// diffraction modes.
pub fn substituted_arguments(map: &ModeMap, xi: &[(ModeIndex, C64)]) -> Result<Vec<C64>, DiffractionError> {
    let mut out = vec![C64::new(0.0, 0.0); map.cols.len()];
    for &(k, x) in xi {
        let r = map.row_of(k).ok_or(DiffractionError::NotRetained(k))?;
        for (j, o) in out.iter_mut().enumerate() {
            *o += x * map.entries[(r, j)];
        }
    }
    Ok(out)
}

/// Normal characteristic function of the diffraction field at a sparse `ξ`
/// (unlisted diffraction modes have `ξ_k = 0`). Idler modes of an SPDC input
/// are held at zero; see [`diffracted_char_with_idlers`].
pub fn diffracted_char(input: &InputState, map: &ModeMap, xi: &[(ModeIndex, C64)]) -> Result<C64, DiffractionError> {
    let idlers = vec![C64::new(0.0, 0.0); input.idler_count()];
    diffracted_char_with_idlers(input, map, xi, &idlers)
}

/// As [`diffracted_char`], with explicit arguments for the undiffracted
/// idler modes.
pub fn diffracted_char_with_idlers(
    input: &InputState,
    map: &ModeMap,
    xi: &[(ModeIndex, C64)],
    idler_xi: &[C64],
) -> Result<C64, DiffractionError> {
    if input.incident_modes() != map.cols {
        return Err(DiffractionError::IncidentMismatch);
    }
    let mut args = substituted_arguments(map, xi)?;
    args.extend_from_slice(idler_xi);
    Ok(normal_char_multi(input, &args)?)
}

/// Unitary completion of a contraction `M` (`R × m`).
///
/// The first `m` columns are the isometry `[M; (I − M†M)^{1/2}]`; the rest are
/// filled by pivoted Gram–Schmidt over standard basis vectors. Columns are
/// `[incident, ancilla-in]` and rows `[retained, ancilla-out]`, so the upper
/// left `R × m` block equals `M`.
pub fn isometric_dilation(map: &ModeMap) -> Result<DMatrix<C64>, DiffractionError> {
    dilate(&map.entries)
}

pub fn dilate(m: &DMatrix<C64>) -> Result<DMatrix<C64>, DiffractionError> {
    let (r, c) = m.shape();
    let n = r + c;
    let gram = m.adjoint() * m;
    let eig = SymmetricEigen::new(gram);
    let max_sv = eig.eigenvalues.iter().copied().fold(0.0, f64::max).sqrt();
    if max_sv > 1.0 + CONTRACTION_TOL {
        return Err(DiffractionError::NonContractive(max_sv));
    }
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::new((1.0 - e).clamp(0.0, 1.0).sqrt(), 0.0)));
    let defect = &eig.eigenvectors * root * eig.eigenvectors.adjoint();

    let mut u = DMatrix::zeros(n, n);
    u.view_mut((0, 0), (r, c)).copy_from(m);
    u.view_mut((r, 0), (c, c)).copy_from(&defect);

    let mut basis: Vec<DVector<C64>> = (0..c).map(|j| u.column(j).into_owned()).collect();
    let mut used = vec![false; n];
    while basis.len() < n {
        let mut best: Option<(usize, DVector<C64>, f64)> = None;
        for (i, taken) in used.iter().enumerate() {
            if *taken {
                continue;
            }
            let mut v = DVector::zeros(n);
            v[i] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for b in &basis {
                    let p = b.dotc(&v);
                    v -= b * p;
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(_, _, bn)| norm > *bn + 1e-12) {
                best = Some((i, v, norm));
            }
        }
        let (i, v, norm) = best.expect("standard basis spans the space");
        used[i] = true;
        basis.push(v.unscale(norm));
    }
    for (j, b) in basis.iter().enumerate().skip(c) {
        u.set_column(j, b);
    }
    Ok(u)
}

/// `‖U†U − I‖_max`.
pub fn unitarity_error(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    let g = u.adjoint() * u - DMatrix::<C64>::identity(n, n);
    g.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
