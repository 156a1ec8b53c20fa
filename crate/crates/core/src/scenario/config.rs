//! TOML scenario files, command-line overrides and validation into
//! library objects.

use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::aperture::{Aperture, ModeGrid, ModeIndex, Shape};
use crate::states::{InputState, SingleModeState};

pub type ModePair = [i32; 2];

pub fn mode(pair: ModePair) -> ModeIndex {
    ModeIndex::new(pair[0], pair[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub aperture: Shape,
    pub state: StateConfig,
    pub pattern: PatternConfig,
    pub eta_scan: EtaScanConfig,
    pub gamma_scan: GammaScanConfig,
    pub ghost: GhostConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            grid: GridConfig::default(),
            aperture: Shape::DoubleSlit { width: 0.125, separation: 0.5 },
            state: StateConfig::BeamSplitterFock { photons: 2, r: h, t: h, modes: [[2, 0], [-2, 0]] },
            pattern: PatternConfig::default(),
            eta_scan: EtaScanConfig::default(),
            gamma_scan: GammaScanConfig::default(),
            ghost: GhostConfig::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub plane_side: f64,
    pub n_max: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { plane_side: 1.0, n_max: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductEntry {
    pub mode: ModePair,
    pub state: SingleModeState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    Product { modes: Vec<ProductEntry> },
    BeamSplitterFock { photons: u32, r: f64, t: f64, modes: [ModePair; 2] },
    SpdcPair { amplitude: [f64; 2], modes: Vec<ModePair> },
}

impl StateConfig {
    pub fn to_state(&self) -> InputState {
        match self {
            StateConfig::Product { modes } => {
                InputState::Product { modes: modes.iter().map(|e| (mode(e.mode), e.state)).collect() }
            }
            StateConfig::BeamSplitterFock { photons, r, t, modes } => InputState::BeamSplitterFock {
                photons: *photons,
                r: *r,
                t: *t,
                modes: [mode(modes[0]), mode(modes[1])],
            },
            StateConfig::SpdcPair { amplitude, modes } => {
                InputState::SpdcPair { amplitude: *amplitude, modes: modes.iter().copied().map(mode).collect() }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// Modes `(n, 0)` for `|n| ≤ n_max`.
    XAxis,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternConfig {
    pub region: Region,
    /// Explicit mode list; overrides `region` when present.
    pub modes: Option<Vec<ModePair>>,
    pub decorrelate: bool,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self { region: Region::XAxis, modes: None, decorrelate: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EtaScanConfig {
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    /// Diffraction modes from which `h₁, h₂` are derived when not given.
    pub modes: Option<[ModePair; 2]>,
    pub incident: ModePair,
    pub fano_min: f64,
    pub fano_max: f64,
    pub points: usize,
}

impl Default for EtaScanConfig {
    fn default() -> Self {
        Self { h1: None, h2: None, modes: None, incident: [0, 0], fano_min: 0.0, fano_max: 10.0, points: 101 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaScanConfig {
    pub y_min: f64,
    pub y_max: f64,
    pub points: usize,
    /// Diffraction modes `k₁, k₂` fed by `incident`.
    pub modes: [ModePair; 2],
    pub incident: ModePair,
    /// Use the general two-coupling form instead of requiring `|f₁| = |f₂|`.
    pub general: bool,
}

impl Default for GammaScanConfig {
    fn default() -> Self {
        Self { y_min: 0.0, y_max: 20.0, points: 2001, modes: [[2, 0], [-2, 0]], incident: [0, 0], general: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GhostConfig {
    pub signal_mode: ModePair,
    /// Idlers to scan; all paired modes when absent.
    pub idlers: Option<Vec<ModePair>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Per-mode Fock cutoff; derived from the state's tail when absent.
    pub cutoff: Option<usize>,
    pub tolerance: f64,
    /// Retained diffraction modes; chosen automatically when absent.
    pub retained: Option<Vec<ModePair>>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { cutoff: None, tolerance: 1e-8, retained: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Format,
    pub path: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { format: Format::Csv, path: None }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub decorrelate: bool,
    pub grid_nmax: Option<u32>,
    pub cutoff: Option<usize>,
    pub tolerance: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(p) = &self.out {
            config.output.path = Some(p.clone());
        }
        if let Some(f) = self.format {
            config.output.format = f;
        }
        if self.decorrelate {
            config.pattern.decorrelate = true;
        }
        if let Some(n) = self.grid_nmax {
            config.grid.n_max = n;
        }
        if let Some(c) = self.cutoff {
            config.verify.cutoff = Some(c);
        }
        if let Some(t) = self.tolerance {
            config.verify.tolerance = t;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config error at line {line}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Source text kept for locating semantic errors.
#[derive(Clone, Debug, Default)]
pub struct ConfigSource {
    text: String,
}

impl ConfigSource {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    pub fn parse(&self) -> Result<ScenarioConfig, ConfigError> {
        toml::from_str(&self.text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(&self.text, s.start)),
            message: e.message().trim().to_string(),
        })
    }

    /// 1-based line of `key` within `[section]` (or the section header when
    /// `key` is `None`). Sub-tables such as `[section.child]` count as part
    /// of `section`.
    pub fn locate(&self, section: &str, key: Option<&str>) -> Option<usize> {
        let mut current = String::new();
        let mut header_line = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.starts_with('[') {
                current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
                if current == section && header_line.is_none() {
                    header_line = Some(i + 1);
                }
                continue;
            }
            let in_section = current == section || current.starts_with(&format!("{section}."));
            if let (true, Some(k)) = (in_section, key) {
                let name = line.split('=').next().unwrap_or("").trim();
                if line.contains('=') && name == k {
                    return Some(i + 1);
                }
            }
        }
        header_line
    }

    pub fn error(&self, section: &str, key: Option<&str>, message: impl fmt::Display) -> ConfigError {
        ConfigError { line: self.locate(section, key), message: message.to_string() }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// A configuration whose references have all been checked.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: ModeGrid,
    pub aperture: Aperture,
    pub state: InputState,
}

impl Scenario {
    pub fn resolve(config: ScenarioConfig, source: &ConfigSource) -> Result<Scenario, ConfigError> {
        let grid = ModeGrid::new(config.grid.plane_side, config.grid.n_max)
            .map_err(|e| source.error("grid", Some("plane_side"), e))?;
        let aperture = Aperture::new(config.aperture.clone(), config.grid.plane_side)
            .map_err(|e| source.error("aperture", None, e))?;
        let state = config.state.to_state();
        state.validate().map_err(|e| source.error("state", None, e))?;
        if let Some(k) = state.incident_modes().into_iter().find(|k| !grid.contains(*k)) {
            return Err(source.error("state", Some("modes"), format!("incident mode {k} is not on the grid")));
        }
        check_modes(&grid, source, "pattern", "modes", config.pattern.modes.iter().flatten())?;
        check_modes(&grid, source, "gamma_scan", "modes", config.gamma_scan.modes.iter())?;
        check_modes(&grid, source, "gamma_scan", "incident", [config.gamma_scan.incident].iter())?;
        check_modes(&grid, source, "eta_scan", "modes", config.eta_scan.modes.iter().flatten())?;
        check_modes(&grid, source, "eta_scan", "incident", [config.eta_scan.incident].iter())?;
        check_modes(&grid, source, "ghost", "signal_mode", [config.ghost.signal_mode].iter())?;
        check_modes(&grid, source, "verify", "retained", config.verify.retained.iter().flatten())?;

        let eta = &config.eta_scan;
        check_range(source, "eta_scan", "fano_max", eta.fano_min, eta.fano_max, eta.points)?;
        if eta.fano_min < 0.0 {
            return Err(source.error("eta_scan", Some("fano_min"), "Fano factor range must be non-negative"));
        }
        for (key, h) in [("h1", eta.h1), ("h2", eta.h2)] {
            if let Some(h) = h {
                if !(h > 1.0) {
                    return Err(source.error("eta_scan", Some(key), format!("{key} must exceed 1, got {h}")));
                }
            }
        }
        if eta.h1.is_some() != eta.h2.is_some() {
            return Err(source.error("eta_scan", None, "h1 and h2 must be given together"));
        }
        let gamma = &config.gamma_scan;
        check_range(source, "gamma_scan", "y_max", gamma.y_min, gamma.y_max, gamma.points)?;
        if gamma.y_min < 0.0 {
            return Err(source.error("gamma_scan", Some("y_min"), "y must be non-negative"));
        }
        if !(config.verify.tolerance > 0.0) {
            return Err(source.error("verify", Some("tolerance"), "tolerance must be positive"));
        }
        if config.verify.cutoff == Some(0) {
            return Err(source.error("verify", Some("cutoff"), "cutoff must be at least 1"));
        }
        Ok(Scenario { config, grid, aperture, state })
    }

    pub fn spdc_amplitude(&self) -> Option<C64> {
        self.state.spdc_amplitude()
    }
}

fn check_modes<'a>(
    grid: &ModeGrid,
    source: &ConfigSource,
    section: &str,
    key: &str,
    modes: impl Iterator<Item = &'a ModePair>,
) -> Result<(), ConfigError> {
    for m in modes {
        if !grid.contains(mode(*m)) {
            return Err(source.error(section, Some(key), format!("mode {} is not on the grid", mode(*m))));
        }
    }
    Ok(())
}

fn check_range(
    source: &ConfigSource,
    section: &str,
    key: &str,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<(), ConfigError> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(source.error(section, Some(key), format!("empty range [{lo}, {hi}]")));
    }
    if points < 2 {
        return Err(source.error(section, Some("points"), "a scan needs at least 2 points"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let src = ConfigSource::new("");
        assert_eq!(src.parse().unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn syntax_error_has_line() {
        let src = ConfigSource::new("[grid]\nn_max = 4\nplane_side = = 1\n");
        let e = src.parse().unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let src = ConfigSource::new("[grid]\nn_max = 4\n\n[pattern]\ncolour = 3\n");
        let e = src.parse().unwrap_err();
        assert_eq!(e.line, Some(5));
    }

    #[test]
    fn semantic_error_located() {
        let text = "[grid]\nn_max = 4\n\n[state]\nkind = \"product\"\nmodes = [{ mode = [9, 0], state = { kind = \"fock\", n = 1 } }]\n";
        let src = ConfigSource::new(text);
        let cfg = src.parse().unwrap();
        let e = Scenario::resolve(cfg, &src).unwrap_err();
        assert_eq!(e.line, Some(6));
        assert!(e.message.contains("(9, 0)"));
    }

    #[test]
    fn overlapping_aperture_points_at_section() {
        let text = "[aperture]\nkind = \"double-slit\"\nwidth = 0.4\nseparation = 0.2\n";
        let src = ConfigSource::new(text);
        let e = Scenario::resolve(src.parse().unwrap(), &src).unwrap_err();
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = ScenarioConfig::default();
        Overrides { grid_nmax: Some(7), cutoff: Some(3), decorrelate: true, ..Default::default() }.apply(&mut cfg);
        assert_eq!(cfg.grid.n_max, 7);
        assert_eq!(cfg.verify.cutoff, Some(3));
        assert!(cfg.pattern.decorrelate);
    }

    #[test]
    fn default_config_resolves() {
        let src = ConfigSource::default();
        assert!(Scenario::resolve(ScenarioConfig::default(), &src).is_ok());
    }
}
