//! Diffraction geometry, the transverse mode grid and the Fraunhofer
//! diffraction factor.
//!
//! The diffraction plane is the `L × L` cross-section of the quantization box,
//! centered on the origin. Transverse wavevectors on the grid are
//! `k = (2π/L)·(n_x, n_y)`. The diffraction factor of an open region `Σ` is
//!
//! ```text
//! f(k) = (√λ / Σ) ∫_Σ exp(-i(k_x x + k_y y)) dx dy,     λ = Σ / S
//! ```
//!
//! and satisfies `Σ_k |f(k)|² = 1` over the infinite grid. Closed forms are
//! written in terms of the spatial frequency `ν = k/2π` so that grid points
//! evaluate sinc nulls exactly.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{self, QuadratureError};
use crate::special::{cos_pi, jinc, sin_pi, sinc_pi};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApertureError {
    #[error("aperture dimension `{name}` must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("aperture extends outside the {side}×{side} diffraction plane")]
    OutsidePlane { side: f64 },
    #[error("rectangles {0} and {1} of the union overlap")]
    Overlap(usize, usize),
    #[error("double slit separation {separation} is smaller than the slit width {width}")]
    SlitsOverlap { width: f64, separation: f64 },
    #[error("union of rectangles is empty")]
    EmptyUnion,
    #[error("grid plane side {grid} does not match aperture plane side {aperture}")]
    PlaneMismatch { grid: f64, aperture: f64 },
}

/// Integer label `(n_x, n_y)` of a transverse plane-wave mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub nx: i32,
    pub ny: i32,
}

impl ModeIndex {
    pub const ZERO: ModeIndex = ModeIndex { nx: 0, ny: 0 };

    pub const fn new(nx: i32, ny: i32) -> Self {
        Self { nx, ny }
    }

    pub fn offset_from(self, other: ModeIndex) -> ModeIndex {
        ModeIndex::new(self.nx - other.nx, self.ny - other.ny)
    }

    pub fn mirrored(self) -> ModeIndex {
        ModeIndex::new(-self.nx, -self.ny)
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.nx, self.ny)
    }
}

/// Square grid of transverse modes `n_x, n_y ∈ [-n_max, n_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    plane_side: f64,
    n_max: u32,
}

impl ModeGrid {
    pub fn new(plane_side: f64, n_max: u32) -> Result<Self, ApertureError> {
        positive("plane_side", plane_side)?;
        Ok(Self { plane_side, n_max })
    }

    pub fn plane_side(&self) -> f64 {
        self.plane_side
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Wavevector spacing `Δk = 2π/L`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.plane_side
    }

    fn width(&self) -> usize {
        2 * self.n_max as usize + 1
    }

    pub fn len(&self) -> usize {
        self.width() * self.width()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, idx: ModeIndex) -> bool {
        let n = self.n_max as i64;
        (idx.nx as i64).abs() <= n && (idx.ny as i64).abs() <= n
    }

    /// Position of `idx` in the `(n_x, n_y)` lexicographic ordering.
    pub fn position(&self, idx: ModeIndex) -> Option<usize> {
        if !self.contains(idx) {
            return None;
        }
        let n = self.n_max as i64;
        let col = (idx.nx as i64 + n) as usize;
        let row = (idx.ny as i64 + n) as usize;
        Some(col * self.width() + row)
    }

    pub fn indices(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        let n = self.n_max as i32;
        (-n..=n).flat_map(move |nx| (-n..=n).map(move |ny| ModeIndex::new(nx, ny)))
    }

    pub fn wavevector(&self, idx: ModeIndex) -> [f64; 2] {
        let dk = self.spacing();
        [dk * idx.nx as f64, dk * idx.ny as f64]
    }
}

/// Axis-aligned open rectangle of size `width × height` centered at `center`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub center: [f64; 2],
}

impl Rect {
    pub fn centered(width: f64, height: f64) -> Self {
        Self { width, height, center: [0.0, 0.0] }
    }

    fn area(&self) -> f64 {
        self.width * self.height
    }

    fn x_range(&self) -> (f64, f64) {
        (self.center[0] - 0.5 * self.width, self.center[0] + 0.5 * self.width)
    }

    fn y_range(&self) -> (f64, f64) {
        (self.center[1] - 0.5 * self.height, self.center[1] + 0.5 * self.height)
    }

    fn overlap_area(&self, other: &Rect) -> f64 {
        let (ax0, ax1) = self.x_range();
        let (bx0, bx1) = other.x_range();
        let (ay0, ay1) = self.y_range();
        let (by0, by1) = other.y_range();
        let dx = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
        let dy = (ay1.min(by1) - ay0.max(by0)).max(0.0);
        dx * dy
    }

    /// `∫_rect exp(-2πi(ν_x x + ν_y y)) dx dy`.
    fn transform(&self, nu: [f64; 2]) -> C64 {
        let envelope = self.area() * sinc_pi(nu[0] * self.width) * sinc_pi(nu[1] * self.height);
        envelope * phase(nu[0] * self.center[0] + nu[1] * self.center[1])
    }
}

// exp(-2πi s)
fn phase(s: f64) -> C64 {
    if s == 0.0 {
        return C64::new(1.0, 0.0);
    }
    C64::new(cos_pi(2.0 * s), -sin_pi(2.0 * s))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Rectangle(Rect),
    /// Strip of the given width spanning the full plane height.
    SingleSlit {
        width: f64,
    },
    /// Two full-height strips of width `width` centered at `x = ±separation/2`.
    DoubleSlit {
        width: f64,
        separation: f64,
    },
    Disk {
        radius: f64,
    },
    UnionOfRectangles {
        rects: Vec<Rect>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aperture {
    shape: Shape,
    plane_side: f64,
    open_area: f64,
}

fn positive(name: &'static str, value: f64) -> Result<f64, ApertureError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ApertureError::NonPositive { name, value })
    }
}

impl Aperture {
    pub fn new(shape: Shape, plane_side: f64) -> Result<Self, ApertureError> {
        let side = positive("plane_side", plane_side)?;
        let half = 0.5 * side;
        let slack = 1e-12 * side;
        let inside = |r: &Rect| {
            let (x0, x1) = r.x_range();
            let (y0, y1) = r.y_range();
            x0 >= -half - slack && x1 <= half + slack && y0 >= -half - slack && y1 <= half + slack
        };
        let open_area = match &shape {
            Shape::Rectangle(r) => {
                positive("width", r.width)?;
                positive("height", r.height)?;
                if !inside(r) {
                    return Err(ApertureError::OutsidePlane { side });
                }
                r.area()
            }
            Shape::SingleSlit { width } => {
                positive("width", *width)?;
                if *width > side + slack {
                    return Err(ApertureError::OutsidePlane { side });
                }
                width * side
            }
            Shape::DoubleSlit { width, separation } => {
                positive("width", *width)?;
                positive("separation", *separation)?;
                if separation < width {
                    return Err(ApertureError::SlitsOverlap { width: *width, separation: *separation });
                }
                if 0.5 * (separation + width) > half + slack {
                    return Err(ApertureError::OutsidePlane { side });
                }
                2.0 * width * side
            }
            Shape::Disk { radius } => {
                positive("radius", *radius)?;
                if *radius > half + slack {
                    return Err(ApertureError::OutsidePlane { side });
                }
                PI * radius * radius
            }
            Shape::UnionOfRectangles { rects } => {
                if rects.is_empty() {
                    return Err(ApertureError::EmptyUnion);
                }
                for r in rects {
                    positive("width", r.width)?;
                    positive("height", r.height)?;
                    if !inside(r) {
                        return Err(ApertureError::OutsidePlane { side });
                    }
                }
                for i in 0..rects.len() {
                    for j in i + 1..rects.len() {
                        if rects[i].overlap_area(&rects[j]) > 0.0 {
                            return Err(ApertureError::Overlap(i, j));
                        }
                    }
                }
                rects.iter().map(Rect::area).sum()
            }
        };
        Ok(Self { shape, plane_side: side, open_area })
    }

    pub fn rectangle(width: f64, height: f64, center: [f64; 2], plane_side: f64) -> Result<Self, ApertureError> {
        Self::new(Shape::Rectangle(Rect { width, height, center }), plane_side)
    }

    pub fn single_slit(width: f64, plane_side: f64) -> Result<Self, ApertureError> {
        Self::new(Shape::SingleSlit { width }, plane_side)
    }

    pub fn double_slit(width: f64, separation: f64, plane_side: f64) -> Result<Self, ApertureError> {
        Self::new(Shape::DoubleSlit { width, separation }, plane_side)
    }

    pub fn disk(radius: f64, plane_side: f64) -> Result<Self, ApertureError> {
        Self::new(Shape::Disk { radius }, plane_side)
    }

    pub fn union(rects: Vec<Rect>, plane_side: f64) -> Result<Self, ApertureError> {
        Self::new(Shape::UnionOfRectangles { rects }, plane_side)
    }

    /// The whole plane open: `λ = 1`, `f(k) = δ_{k,0}` on the grid.
    pub fn full_plane(plane_side: f64) -> Result<Self, ApertureError> {
        Self::rectangle(plane_side, plane_side, [0.0, 0.0], plane_side)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn plane_side(&self) -> f64 {
        self.plane_side
    }

    /// Open area `Σ`.
    pub fn open_area(&self) -> f64 {
        self.open_area
    }

    /// Plane area `S = L²`.
    pub fn plane_area(&self) -> f64 {
        self.plane_side * self.plane_side
    }

    /// Energy transmissivity `λ = Σ/S`.
    pub fn transmissivity(&self) -> f64 {
        (self.open_area / self.plane_area()).min(1.0)
    }

    pub fn check_grid(&self, grid: &ModeGrid) -> Result<(), ApertureError> {
        if (grid.plane_side() - self.plane_side).abs() > 1e-12 * self.plane_side {
            return Err(ApertureError::PlaneMismatch { grid: grid.plane_side(), aperture: self.plane_side });
        }
        Ok(())
    }

    /// Diffraction factor at an arbitrary transverse wavevector.
    pub fn diffraction_factor(&self, k: [f64; 2]) -> C64 {
        self.factor_at_frequency([k[0] / (2.0 * PI), k[1] / (2.0 * PI)])
    }

    /// Diffraction factor at the grid offset `Δn`, i.e. `k = (2π/L)·Δn`.
    /// Integer offsets are passed through exactly, so sinc nulls are zero.
    pub fn factor_at_offset(&self, offset: ModeIndex) -> C64 {
        self.factor_at_frequency([offset.nx as f64 / self.plane_side, offset.ny as f64 / self.plane_side])
    }

    /// Diffraction factor in terms of the spatial frequency `ν = k/2π`.
    pub fn factor_at_frequency(&self, nu: [f64; 2]) -> C64 {
        let root_lambda = self.transmissivity().sqrt();
        let side = self.plane_side;
        let value = match &self.shape {
            Shape::Rectangle(r) => r.transform(nu) / r.area(),
            Shape::SingleSlit { width } => C64::new(sinc_pi(nu[0] * width) * sinc_pi(nu[1] * side), 0.0),
            Shape::DoubleSlit { width, separation } => {
                C64::new(sinc_pi(nu[0] * width) * cos_pi(nu[0] * separation) * sinc_pi(nu[1] * side), 0.0)
            }
            Shape::Disk { radius } => {
                let rho = (nu[0] * nu[0] + nu[1] * nu[1]).sqrt();
                C64::new(jinc(2.0 * PI * rho * radius), 0.0)
            }
            Shape::UnionOfRectangles { rects } => rects.iter().map(|r| r.transform(nu)).sum::<C64>() / self.open_area,
        };
        value * root_lambda
    }

    /// Diffraction factor by adaptive quadrature of the defining integral,
    /// with absolute tolerance `tol` on `f`. Cross-check oracle only.
    pub fn factor_by_quadrature(&self, k: [f64; 2], tol: f64) -> Result<C64, QuadratureError> {
        let prefactor = self.transmissivity().sqrt() / self.open_area;
        let integral_tol = tol / prefactor;
        let plane_wave = |x: f64, y: f64| C64::from_polar(1.0, -(k[0] * x + k[1] * y));
        let half = 0.5 * self.plane_side;
        let rect_integral = |r: &Rect, tol: f64| quadrature::integrate_2d(plane_wave, r.x_range(), r.y_range(), tol);
        let integral = match &self.shape {
            Shape::Rectangle(r) => rect_integral(r, integral_tol)?,
            Shape::SingleSlit { width } => rect_integral(&Rect::centered(*width, self.plane_side), integral_tol)?,
            Shape::DoubleSlit { width, separation } => {
                let left = Rect { width: *width, height: 2.0 * half, center: [-0.5 * separation, 0.0] };
                let right = Rect { center: [0.5 * separation, 0.0], ..left };
                rect_integral(&left, 0.5 * integral_tol)? + rect_integral(&right, 0.5 * integral_tol)?
            }
            Shape::Disk { radius } => {
                // polar coordinates: ∫_0^R r dr ∫_0^{2π} e^{-i r (k_x cos θ + k_y sin θ)} dθ
                quadrature::integrate_2d(
                    |r, theta| C64::from_polar(r, -r * (k[0] * theta.cos() + k[1] * theta.sin())),
                    (0.0, *radius),
                    (0.0, 2.0 * PI),
                    integral_tol,
                )?
            }
            Shape::UnionOfRectangles { rects } => {
                let share = integral_tol / rects.len() as f64;
                let mut total = C64::new(0.0, 0.0);
                for r in rects {
                    total += rect_integral(r, share)?;
                }
                total
            }
        };
        Ok(integral * prefactor)
    }
}

/// Diffraction factor sampled at every grid mode, ordered by `(n_x, n_y)`.
#[derive(Clone, Debug)]
pub struct DiffractionTable {
    grid: ModeGrid,
    transmissivity: f64,
    values: Vec<C64>,
}

impl DiffractionTable {
    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn transmissivity(&self) -> f64 {
        self.transmissivity
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn get(&self, idx: ModeIndex) -> Option<C64> {
        self.grid.position(idx).map(|p| self.values[p])
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, C64)> + '_ {
        self.grid.indices().zip(self.values.iter().copied())
    }
}

pub fn diffraction_factor_table(aperture: &Aperture, grid: &ModeGrid) -> Result<DiffractionTable, ApertureError> {
    aperture.check_grid(grid)?;
    let values = grid.indices().map(|idx| aperture.factor_at_offset(idx)).collect();
    Ok(DiffractionTable { grid: *grid, transmissivity: aperture.transmissivity(), values })
}

/// `|Σ_k |f(k)|² − 1|` over the table's grid: the weight of the diffraction
/// factor lying outside the truncated grid.
pub fn normalization_defect(table: &DiffractionTable) -> f64 {
    let total: f64 = table.values.iter().map(|v| v.norm_sqr()).sum();
    (total - 1.0).abs()
}
