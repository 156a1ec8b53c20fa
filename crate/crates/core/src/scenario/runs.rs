use crate::aperture::ModeIndex;
use crate::entanglement::{schlienz_mahler_symmetric, schlienz_mahler_thermal};
use crate::observables::{ghost_g2, h_factor, mean_photon_pattern, number_correlation};

use super::config::{mode, ConfigError, ConfigSource, Region, Scenario};
use super::output::{Document, Value};

fn located<'a>(source: &'a ConfigSource, section: &str, key: Option<&str>) -> impl Fn(String) -> ConfigError + 'a {
    let section = section.to_string();
    let key = key.map(str::to_string);
    move |msg| source.error(&section, key.as_deref(), msg)
}

pub fn pattern_modes(scenario: &Scenario) -> Vec<ModeIndex> {
    let cfg = &scenario.config.pattern;
    if let Some(list) = &cfg.modes {
        return list.iter().copied().map(mode).collect();
    }
    let n = scenario.grid.n_max() as i32;
    match cfg.region {
        Region::XAxis => (-n..=n).map(|i| ModeIndex::new(i, 0)).collect(),
        Region::Full => scenario.grid.indices().collect(),
    }
}

pub fn run_pattern(scenario: &Scenario, source: &ConfigSource) -> Result<Document, ConfigError> {
    let modes = pattern_modes(scenario);
    let decorrelate = scenario.config.pattern.decorrelate;
    let result = mean_photon_pattern(&scenario.state, &scenario.aperture, &scenario.grid, &modes, decorrelate)
        .map_err(|e| located(source, "state", None)(e.to_string()))?;
    let mut doc = Document::new("pattern", &scenario.config, vec!["n_x", "n_y", "k_x", "k_y", "mean_n"]);
    doc.metadata.push("lambda", result.transmissivity);
    doc.metadata.push("defect", result.defect);
    doc.metadata.push("decorrelated", decorrelate);
    doc.metadata.push("visibility", result.visibility());
    doc.metadata.push("total_mean_n", result.total());
    doc.metadata.push("state", serde_json::to_string(&scenario.config.state).unwrap_or_default());
    for (k, n) in modes.iter().zip(&result.mean) {
        let kv = scenario.grid.wavevector(*k);
        doc.rows.push(vec![k.nx.into(), k.ny.into(), kv[0].into(), kv[1].into(), (*n).into()]);
    }
    Ok(doc)
}

/// Evenly spaced samples including both ends.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { hi } else { lo + step * i as f64 }).collect()
}

pub fn eta_scan_h(scenario: &Scenario, source: &ConfigSource) -> Result<(f64, f64), ConfigError> {
    let cfg = &scenario.config.eta_scan;
    match (cfg.h1, cfg.h2, cfg.modes) {
        (Some(h1), Some(h2), _) => Ok((h1, h2)),
        (_, _, Some(modes)) => {
            let incident = mode(cfg.incident);
            let h = |m| h_factor(&scenario.aperture, mode(m), incident);
            let err = located(source, "eta_scan", Some("modes"));
            Ok((h(modes[0]).map_err(|e| err(e.to_string()))?, h(modes[1]).map_err(|e| err(e.to_string()))?))
        }
        _ => Ok((3.0, 3.0)),
    }
}

pub fn run_eta_scan(scenario: &Scenario, source: &ConfigSource) -> Result<Document, ConfigError> {
    let cfg = &scenario.config.eta_scan;
    let (h1, h2) = eta_scan_h(scenario, source)?;
    let mut doc = Document::new("eta-scan", &scenario.config, vec!["fano", "eta"]);
    doc.metadata.push("h1", h1);
    doc.metadata.push("h2", h2);
    for fano in linspace(cfg.fano_min, cfg.fano_max, cfg.points) {
        let eta = number_correlation(fano, h1, h2).map_err(|e| located(source, "eta_scan", None)(e.to_string()))?;
        doc.rows.push(vec![fano.into(), eta.into()]);
    }
    Ok(doc)
}

/// Maximizer of a unimodal `f` on `[a, b]` by golden-section search.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[derive(Clone, Debug)]
pub struct GammaSeries {
    pub y: Vec<f64>,
    pub mean: Vec<f64>,
    pub gamma: Vec<f64>,
    pub argmax_y: f64,
    pub max_gamma: f64,
    pub couplings: (f64, f64),
}

pub fn gamma_series(scenario: &Scenario, source: &ConfigSource) -> Result<GammaSeries, ConfigError> {
    let cfg = &scenario.config.gamma_scan;
    let ap = &scenario.aperture;
    let lambda = ap.transmissivity();
    let incident = mode(cfg.incident);
    let f1 = ap.factor_at_offset(mode(cfg.modes[0]).offset_from(incident));
    let f2 = ap.factor_at_offset(mode(cfg.modes[1]).offset_from(incident));
    let (c1, c2) = (lambda * f1.norm_sqr(), lambda * f2.norm_sqr());
    let err = located(source, "gamma_scan", Some("modes"));
    if c1 * c2 <= 0.0 {
        return Err(err("a scanned mode sits on a null of the diffraction factor".into()));
    }
    if !cfg.general && (c1 - c2).abs() > 1e-12 * c1.max(c2) {
        return Err(err(format!("couplings differ ({c1:e} vs {c2:e}); set general = true for the asymmetric form")));
    }
    // y = N̄λ|f₁f₂| = N̄·√(c₁c₂)
    let per_photon = (c1 * c2).sqrt();
    let general = cfg.general;
    let gamma = |y: f64| {
        if general {
            schlienz_mahler_thermal(y / per_photon, lambda, f1, f2)
        } else {
            schlienz_mahler_symmetric(y)
        }
    };
    let y = linspace(cfg.y_min, cfg.y_max, cfg.points);
    let g: Vec<f64> = y.iter().map(|&v| gamma(v)).collect();
    let best = g.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let lo = y[best.saturating_sub(1)];
    let hi = y[(best + 1).min(y.len() - 1)];
    let (argmax_y, max_gamma) = golden_max(gamma, lo, hi, 1e-12);
    Ok(GammaSeries {
        mean: y.iter().map(|v| v / per_photon).collect(),
        y,
        gamma: g,
        argmax_y,
        max_gamma,
        couplings: (c1, c2),
    })
}

pub fn run_gamma_scan(scenario: &Scenario, source: &ConfigSource) -> Result<Document, ConfigError> {
    let s = gamma_series(scenario, source)?;
    let mut doc = Document::new("gamma-scan", &scenario.config, vec!["y", "mean_n", "gamma"]);
    let per_photon = (s.couplings.0 * s.couplings.1).sqrt();
    doc.metadata.push("lambda", scenario.aperture.transmissivity());
    doc.metadata.push("coupling1", s.couplings.0);
    doc.metadata.push("coupling2", s.couplings.1);
    doc.metadata.push("form", if scenario.config.gamma_scan.general { "general" } else { "symmetric" });
    doc.metadata.push("argmax_y", s.argmax_y);
    doc.metadata.push("argmax_mean_n", s.argmax_y / per_photon);
    doc.metadata.push("max_gamma", s.max_gamma);
    for i in 0..s.y.len() {
        doc.rows.push(vec![s.y[i].into(), s.mean[i].into(), s.gamma[i].into()]);
    }
    Ok(doc)
}

pub fn run_ghost(scenario: &Scenario, source: &ConfigSource) -> Result<Document, ConfigError> {
    let cfg = &scenario.config.ghost;
    let pairs = match &scenario.config.state {
        super::config::StateConfig::SpdcPair { modes, .. } => modes.clone(),
        _ => return Err(source.error("state", Some("kind"), "ghost needs an spdc-pair state")),
    };
    let idlers: Vec<ModeIndex> = cfg.idlers.clone().unwrap_or(pairs).into_iter().map(mode).collect();
    let signal = mode(cfg.signal_mode);
    let points = ghost_g2(&scenario.state, &scenario.aperture, &scenario.grid, signal, &idlers)
        .map_err(|e| located(source, "ghost", Some("idlers"))(e.to_string()))?;
    let amp = scenario.spdc_amplitude().unwrap_or_default();
    let mut doc = Document::new("ghost", &scenario.config, vec!["idler_nx", "idler_ny", "g2_leading", "g2_exact"]);
    doc.metadata.push("lambda", scenario.aperture.transmissivity());
    doc.metadata.push("amplitude_sq", amp.norm_sqr());
    doc.metadata.push("signal_nx", signal.nx);
    doc.metadata.push("signal_ny", signal.ny);
    for p in points {
        doc.rows.push(vec![p.idler.nx.into(), p.idler.ny.into(), Value::Float(p.leading), Value::Float(p.exact)]);
    }
    Ok(doc)
}
