//! Oracle-versus-closed-form checks on the configured scenario.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::aperture::ModeIndex;
use crate::diffraction::{build_restricted_map, diffracted_char, ModeMap};
use crate::observables::{h_factor, number_correlation, pattern_from_coherence};
use crate::oracle::{
    apply_contraction, apply_linear_channel, build_state, char_function_fock, cutoff_for_tail, FockDensity, MAX_DIM,
};
use crate::states::{normal_char_multi, InputState};

use super::config::{mode, Scenario};
use super::output::{Document, Value};

/// Tail weight for a default cutoff: the χ error from a tail `w` grows
/// like `2√w`, so `w = (tol/4)²` keeps it inside the tolerance.
pub fn default_tail(tol: f64) -> f64 {
    (0.25 * tol).powi(2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub cutoff: usize,
    pub retained: Vec<ModeIndex>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn measure(&mut self, name: &str, error: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            error,
            tolerance,
            passed: error <= tolerance,
            detail: String::new(),
        });
    }

    fn fail(&mut self, name: &str, tolerance: f64, detail: impl ToString) {
        self.checks.push(Check {
            name: name.to_string(),
            error: f64::NAN,
            tolerance,
            passed: false,
            detail: detail.to_string(),
        });
    }
}

/// Fixed, deterministic sample points of modest magnitude.
fn sample_points(len: usize) -> Vec<Vec<C64>> {
    (0..3)
        .map(|s| {
            (0..len).map(|j| C64::from_polar(0.15 + 0.05 * s as f64, 0.7 * j as f64 + 1.3 * s as f64 + 0.2)).collect()
        })
        .collect()
}

fn auto_retained(scenario: &Scenario, cutoff: usize, passive: usize) -> Vec<ModeIndex> {
    let mut candidates = scenario.state.incident_modes();
    for n in 0..=scenario.grid.n_max() as i32 {
        candidates.push(ModeIndex::new(n, 0));
        candidates.push(ModeIndex::new(-n, 0));
    }
    let mut seen = std::collections::BTreeSet::new();
    let incident = scenario.state.incident_modes();
    // modes on a null of every incident mode carry no light
    let lit = |k: &ModeIndex| {
        incident.iter().any(|k0| scenario.aperture.factor_at_offset(k.offset_from(*k0)).norm_sqr() > 1e-28)
    };
    candidates.retain(|k| scenario.grid.contains(*k) && lit(k) && seen.insert(*k));
    let fits =
        |r: usize| u32::try_from(r + passive).ok().and_then(|e| cutoff.checked_pow(e)).is_some_and(|d| d <= MAX_DIM);
    let count = (1..=4).rev().find(|&r| fits(r)).unwrap_or(1);
    candidates.truncate(count);
    candidates
}

pub fn run_suite(scenario: &Scenario) -> VerifyReport {
    let tol = scenario.config.verify.tolerance;
    let state = &scenario.state;
    let cutoff = scenario.config.verify.cutoff.unwrap_or_else(|| cutoff_for_tail(state, default_tail(tol)));
    let passive = state.idler_count();
    let retained = match &scenario.config.verify.retained {
        Some(list) => list.iter().copied().map(mode).collect(),
        None => auto_retained(scenario, cutoff, passive),
    };
    let mut report = VerifyReport { cutoff, retained: retained.clone(), checks: Vec::new() };

    let rho_in = match build_state(state, cutoff) {
        Ok(r) => r,
        Err(e) => {
            report.fail("build-state", tol, e);
            return report;
        }
    };

    let mut worst = 0.0f64;
    for xi in sample_points(state.mode_count()) {
        let exact = normal_char_multi(state, &xi).unwrap_or(C64::new(f64::NAN, 0.0));
        match char_function_fock(&rho_in, &xi, tol) {
            Ok(v) => worst = worst.max((v - exact).norm()),
            Err(e) => {
                report.fail("input-char", tol, e);
                worst = f64::NAN;
                break;
            }
        }
    }
    if !worst.is_nan() {
        report.measure("input-char", worst, tol);
    }

    let incident = state.incident_modes();
    let m = incident.len();
    let identity = DMatrix::<C64>::identity(m, m);
    match apply_contraction(&rho_in, &identity) {
        Ok(out) => report.measure("identity-channel", max_abs(&(out.matrix() - rho_in.matrix())), tol),
        Err(e) => report.fail("identity-channel", tol, e),
    }
    if scenario.aperture.transmissivity() == 1.0 {
        match build_restricted_map(&scenario.aperture, &scenario.grid, &incident, &incident) {
            Ok(map) => report.measure("full-plane-map", max_abs(&(map.entries() - &identity)), tol),
            Err(e) => report.fail("full-plane-map", tol, e),
        }
    }

    let map = match build_restricted_map(&scenario.aperture, &scenario.grid, &incident, &retained) {
        Ok(map) => map,
        Err(e) => {
            report.fail("mode-map", tol, e);
            return report;
        }
    };
    let rho_out = match apply_linear_channel(&rho_in, &map) {
        Ok(r) => r,
        Err(e) => {
            report.fail("channel", tol, e);
            return report;
        }
    };
    report.measure("channel-trace", (rho_out.trace() - rho_in.trace()).abs(), tol);
    report.measure("channel-positivity", rho_out.negativity_bound(1e-14), tol);

    let closed = pattern_from_coherence(&map, &state.coherence_matrix());
    let oracle: Vec<f64> = (0..retained.len()).map(|i| rho_out.mean_number(i)).collect();
    let err = closed.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    report.measure("pattern", err, tol);

    diffracted_char_check(&mut report, state, &map, &rho_out, tol);
    eta_check(&mut report, scenario, &rho_in, &rho_out, tol);
    ghost_check(&mut report, state, &map, &rho_out, tol);
    report
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn diffracted_char_check(
    report: &mut VerifyReport,
    state: &InputState,
    map: &ModeMap,
    rho_out: &FockDensity,
    tol: f64,
) {
    let rows = map.rows();
    let mut worst = 0.0f64;
    for xi in sample_points(rows.len()) {
        let sparse: Vec<(ModeIndex, C64)> = rows.iter().copied().zip(xi.iter().copied()).collect();
        let exact = match diffracted_char(state, map, &sparse) {
            Ok(v) => v,
            Err(e) => return report.fail("diffracted-char", tol, e),
        };
        let mut full = xi.clone();
        full.resize(rho_out.modes(), C64::new(0.0, 0.0));
        match char_function_fock(rho_out, &full, tol) {
            Ok(v) => worst = worst.max((v - exact).norm()),
            Err(e) => return report.fail("diffracted-char", tol, e),
        }
    }
    report.measure("diffracted-char", worst, tol);
}

// Single incident mode: η between the first two retained modes with
// nonzero coupling, using the Fano factor of the truncated input.
fn eta_check(report: &mut VerifyReport, scenario: &Scenario, rho_in: &FockDensity, rho_out: &FockDensity, tol: f64) {
    let InputState::Product { modes } = &scenario.state else { return };
    if modes.len() != 1 {
        return;
    }
    let k0 = modes[0].0;
    let usable: Vec<(usize, f64)> = report
        .retained
        .iter()
        .enumerate()
        .filter_map(|(i, k)| h_factor(&scenario.aperture, *k, k0).ok().map(|h| (i, h)))
        .take(2)
        .collect();
    if usable.len() < 2 {
        return;
    }
    let norm_in = rho_in.trace();
    let mean = rho_in.mean_number(0) / norm_in;
    if mean <= 0.0 {
        return;
    }
    let fano = rho_in.number_variance(0) / mean;
    let closed = match number_correlation(fano, usable[0].1, usable[1].1) {
        Ok(v) => v,
        Err(e) => return report.fail("eta", tol, e),
    };
    let (i, j) = (usable[0].0, usable[1].0);
    let norm = rho_out.trace();
    let (ni, nj) = (rho_out.mean_number(i) / norm, rho_out.mean_number(j) / norm);
    let cov = rho_out.number_product(i, j) / norm - ni * nj;
    let oracle = cov / (rho_out.number_variance(i) * rho_out.number_variance(j)).sqrt();
    report.measure("eta", (oracle - closed).abs(), tol);
}

fn ghost_check(report: &mut VerifyReport, state: &InputState, map: &ModeMap, rho_out: &FockDensity, tol: f64) {
    let Some(f) = state.spdc_amplitude() else { return };
    let pairs = state.incident_modes().len();
    let retained = map.rows().len();
    let norm = 1.0 + pairs as f64 * f.norm_sqr();
    let mut worst = 0.0f64;
    for j in 0..pairs {
        let exact = f.norm_sqr() * map.entries()[(0, j)].norm_sqr() / norm;
        let oracle = rho_out.number_product(0, retained + j);
        worst = worst.max((oracle - exact).abs());
    }
    report.measure("ghost-g2", worst, tol);
}

pub fn report_document(scenario: &Scenario, report: &VerifyReport) -> Document {
    let mut doc = Document::new("verify", &scenario.config, vec!["check", "error", "tolerance", "passed", "detail"]);
    doc.metadata.push("cutoff", report.cutoff);
    let retained: Vec<String> = report.retained.iter().map(|k| k.to_string()).collect();
    doc.metadata.push("retained", retained.join(" "));
    doc.metadata.push("passed", report.passed());
    for c in &report.checks {
        doc.rows.push(vec![
            c.name.clone().into(),
            Value::Float(c.error),
            Value::Float(c.tolerance),
            c.passed.into(),
            c.detail.clone().into(),
        ]);
    }
    doc
}
