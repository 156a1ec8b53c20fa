//! Numerical integration used as independent cross-check oracles.
//!
//! Two families live here: globally adaptive Gauss–Kronrod (7/15) for finite
//! intervals, nested into an iterated 2-D rule, and Gauss–Hermite product
//! rules with order doubling for integrals against `exp(-|u|²)`.

use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    NotConverged { estimate: f64, tolerance: f64 },
    #[error("integrand returned a non-finite value at {0}")]
    NonFinite(f64),
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Panel {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

fn gk15<F: FnMut(f64) -> C64>(f: &mut F, a: f64, b: f64) -> Result<Panel, QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = C64::new(0.0, 0.0);
    let mut gauss = C64::new(0.0, 0.0);
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let points: &[f64] = if x == 0.0 { &[0.0] } else { &[x, -x] };
        for &s in points {
            let t = center + half * s;
            let v = f(t);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(QuadratureError::NonFinite(t));
            }
            kronrod += v * w;
            if i % 2 == 1 {
                gauss += v * WG[i / 2];
            }
        }
    }
    Ok(Panel { a, b, value: kronrod * half, error: ((kronrod - gauss) * half).norm() })
}

/// Globally adaptive Gauss–Kronrod integration of a complex integrand on
/// `[a, b]`. The panel with the largest error estimate is bisected until the
/// summed estimate drops below `abs_tol`.
pub fn integrate_adaptive<F>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<C64, QuadratureError>
where
    F: FnMut(f64) -> C64,
{
    const MAX_PANELS: usize = 4096;
    let mut panels = vec![gk15(&mut f, a, b)?];
    loop {
        let total_error: f64 = panels.iter().map(|p| p.error).sum();
        if total_error <= abs_tol {
            break;
        }
        if panels.len() >= MAX_PANELS {
            return Err(QuadratureError::NotConverged { estimate: total_error, tolerance: abs_tol });
        }
        let worst =
            panels.iter().enumerate().max_by(|x, y| x.1.error.total_cmp(&y.1.error)).map(|(i, _)| i).unwrap_or(0);
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(gk15(&mut f, p.a, mid)?);
        panels.push(gk15(&mut f, mid, p.b)?);
    }
    // sum in a fixed order so results do not depend on the refinement history
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(panels.iter().map(|p| p.value).sum())
}

/// Iterated 2-D integral over the rectangle `[x0, x1] × [y0, y1]`.
///
/// Each inner integral is resolved to a tolerance scaled by the outer
/// interval length, so the inner errors accumulate to at most `abs_tol / 4`.
pub fn integrate_2d<F>(f: F, x: (f64, f64), y: (f64, f64), abs_tol: f64) -> Result<C64, QuadratureError>
where
    F: Fn(f64, f64) -> C64,
{
    let inner_tol = 0.25 * abs_tol / (x.1 - x.0).abs().max(f64::MIN_POSITIVE);
    let mut failure = None;
    let outer = integrate_adaptive(
        |xv| match integrate_adaptive(|yv| f(xv, yv), y.0, y.1, inner_tol) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                C64::new(0.0, 0.0)
            }
        },
        x.0,
        x.1,
        0.75 * abs_tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(outer),
    }
}

/// Nodes and weights of the `n`-point Gauss–Hermite rule for the weight
/// `exp(-x²)`, by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Hermite rule needs at least one node");
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Tensor-product Gauss–Hermite estimate of `∫_{R^dim} f(u) exp(-|u|²) du`.
/// Relative weight below which product-rule points are skipped.
const PRUNE_RATIO: f64 = 1e-30;

pub fn gauss_hermite_product<F>(f: &F, dim: usize, order: usize) -> C64
where
    F: Fn(&[f64]) -> C64 + ?Sized,
{
    let (nodes, weights) = gauss_hermite(order);
    // points this far below the central weight cannot affect the sum at
    // double precision for integrands of polynomial growth
    let floor = weights.iter().copied().fold(0.0, f64::max).powi(dim as i32) * PRUNE_RATIO;
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    let mut total = C64::new(0.0, 0.0);
    loop {
        let mut weight = 1.0;
        for (d, &i) in idx.iter().enumerate() {
            point[d] = nodes[i];
            weight *= weights[i];
        }
        if weight >= floor {
            total += f(&point) * weight;
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == dim {
                return total;
            }
            idx[d] += 1;
            if idx[d] < order {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Gauss–Hermite product integration with order doubling: starting at
/// `start_order`, the order doubles until two successive estimates agree to
/// `abs_tol` or `max_order` is exceeded.
pub fn gauss_hermite_adaptive<F>(
    f: &F,
    dim: usize,
    start_order: usize,
    max_order: usize,
    abs_tol: f64,
) -> Result<C64, QuadratureError>
where
    F: Fn(&[f64]) -> C64 + ?Sized,
{
    let mut order = start_order.max(2);
    let mut previous = gauss_hermite_product(f, dim, order);
    loop {
        let next_order = order * 2;
        if next_order > max_order {
            return Err(QuadratureError::NotConverged { estimate: f64::NAN, tolerance: abs_tol });
        }
        let current = gauss_hermite_product(f, dim, next_order);
        let change = (current - previous).norm();
        if !change.is_finite() {
            return Err(QuadratureError::NonFinite(next_order as f64));
        }
        if change <= abs_tol {
            return Ok(current);
        }
        previous = current;
        order = next_order;
    }
}
