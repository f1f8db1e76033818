//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use fwpath::instanton::{Bounds, HalfPlane};
use fwpath::{CrossingOptions, DoubleWell, DriftModel, GridSpec, Macrospin, MaierStein, PlanarSpace, ShootingConfig, SimConfig, Vec2};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::check_version;

pub const FORMAT_VERSION: &str = "1.0";

const DEFAULT_MACROSPIN_DAMPING: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Instanton,
    NormMap,
    Bifurcation,
    Langevin,
    OracleCheck,
    Report,
}

impl Command {
    pub fn label(&self) -> &'static str {
        match self {
            Command::Instanton => "instanton",
            Command::NormMap => "norm-map",
            Command::Bifurcation => "bifurcation",
            Command::Langevin => "langevin",
            Command::OracleCheck => "oracle-check",
            Command::Report => "report",
        }
    }
}

/// Model block. `current_ratio` is `|I| / I_C` and always drives toward escape;
/// `omega_ratio` is the polariser tilt in units of the separatrix angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    MaierStein {
        alpha: f64,
    },
    DoubleWell {},
    Macrospin {
        #[serde(default = "default_damping")]
        alpha: f64,
        #[serde(rename = "D")]
        anisotropy: f64,
        current_ratio: f64,
        #[serde(default)]
        omega_ratio: f64,
    },
}

fn default_damping() -> f64 {
    DEFAULT_MACROSPIN_DAMPING
}

/// A validated model ready for the solvers.
pub enum Model {
    MaierStein(MaierStein),
    DoubleWell,
    Macrospin(Macrospin),
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model, CliError> {
        let invalid = |e: fwpath::Error| CliError::Validation(format!("model block: {e}"));
        match *self {
            ModelConfig::MaierStein { alpha } => MaierStein::new(alpha).map(Model::MaierStein).map_err(invalid),
            ModelConfig::DoubleWell {} => Ok(Model::DoubleWell),
            ModelConfig::Macrospin { alpha, anisotropy, current_ratio, omega_ratio } => {
                if !(current_ratio >= 0.0) {
                    return Err(CliError::Validation(format!(
                        "model block: current_ratio is a magnitude, got {current_ratio}"
                    )));
                }
                Macrospin::from_ratios(alpha, anisotropy, -current_ratio, omega_ratio)
                    .map(Model::Macrospin)
                    .map_err(invalid)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::MaierStein { .. } => "maier_stein",
            ModelConfig::DoubleWell {} => "double_well",
            ModelConfig::Macrospin { .. } => "macrospin",
        }
    }

    /// Landscape grid used when the config has none: `(x, y)` for planar models (both wells for the double well),
    /// `(theta, phi)` about `+z` for the macrospin.
    pub fn default_grid(&self) -> GridSpec {
        match self {
            ModelConfig::Macrospin { .. } => GridSpec {
                x_min: 0.05,
                x_max: std::f64::consts::PI - 0.05,
                y_min: -std::f64::consts::PI,
                y_max: std::f64::consts::PI,
                nx: 121,
                ny: 121,
            },
            ModelConfig::DoubleWell {} => GridSpec { x_min: -1.5, x_max: 1.5, y_min: -0.6, y_max: 0.6, nx: 151, ny: 61 },
            ModelConfig::MaierStein { .. } => {
                GridSpec { x_min: -0.2, x_max: 1.3, y_min: -0.6, y_max: 0.6, nx: 151, ny: 121 }
            }
        }
    }
}

/// Planar escape domain: basin `x > 0` of the well at `(1, 0)`, integration box
/// `[-0.5, 2] x [-2, 2]`.
pub fn planar_space<M: DriftModel>(model: M) -> PlanarSpace<M> {
    PlanarSpace::new(model, HalfPlane { normal: Vec2::x(), offset: 0.0 })
        .with_bounds(Bounds::new(-0.5, 2.0, -2.0, 2.0))
        .with_mirror_symmetry()
}

pub fn planar_stable(model: &Model) -> Vec2 {
    match model {
        Model::DoubleWell => DoubleWell::STABLE,
        _ => MaierStein::STABLE,
    }
}

/// Scan of the Maier-Stein drift-norm structure in `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifurcationConfig {
    pub range: [f64; 2],
    pub steps: usize,
    /// Starting guess for the tracked on-axis stationary point.
    #[serde(default = "default_track_start")]
    pub start: [f64; 2],
    /// Emit the full extrema table at every step.
    #[serde(default = "yes")]
    pub tables: bool,
}

fn default_track_start() -> [f64; 2] {
    [0.5, 0.0]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Compare against the closed form with the drive projected on the easy axis;
    /// defaults to on whenever the polariser is tilted.
    pub effective: Option<bool>,
    /// `[theta_lo, theta_hi]`; defaults to `[0.1, theta* - 0.05]`.
    pub window: Option<[f64; 2]>,
    /// Defaults: 1e-2 rad, or 5e-2 rad for the projected comparison.
    pub rms_tol: Option<f64>,
    #[serde(default = "default_action_rtol")]
    pub action_rtol: f64,
}

fn default_action_rtol() -> f64 {
    1e-4
}

/// Stationary sampling of an unpolarised macrospin, checked against its energy law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryConfig {
    pub burn_in: f64,
    pub every: f64,
    pub per_realization: usize,
    #[serde(default = "default_law_resolution")]
    pub resolution: usize,
}

fn default_law_resolution() -> usize {
    800
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityConfig {
    pub bootstrap: usize,
    pub confidence: f64,
}

impl Default for ModalityConfig {
    fn default() -> Self {
        Self { bootstrap: 500, confidence: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: String,
    pub command: Option<Command>,
    pub output: Option<PathBuf>,
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub solver: ShootingConfig,
    #[serde(default)]
    pub crossing: CrossingOptions,
    pub grid: Option<GridSpec>,
    pub langevin: Option<SimConfig>,
    pub bifurcation: Option<BifurcationConfig>,
    pub oracle: Option<OracleConfig>,
    pub stationary: Option<StationaryConfig>,
    pub modality: Option<ModalityConfig>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            command: Some(command),
            output: None,
            model: None,
            solver: ShootingConfig::default(),
            crossing: CrossingOptions::default(),
            grid: None,
            langevin: None,
            bifurcation: None,
            oracle: None,
            stationary: None,
            modality: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {}", e.message())))?;
        check_version(&cfg.format_version)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Settles the command against the CLI and checks every block the command uses.
    pub fn resolve(mut self, command: Command) -> Result<Self, CliError> {
        match self.command {
            Some(c) if c != command => {
                return Err(CliError::Validation(format!(
                    "config is for `{}` but `{}` was requested",
                    c.label(),
                    command.label()
                )))
            }
            _ => self.command = Some(command),
        }
        let numeric = |e: fwpath::Error| CliError::Validation(e.to_string());
        self.solver.validate().map_err(numeric)?;
        if let Some(g) = &self.grid {
            g.validate().map_err(numeric)?;
        }
        if let Some(l) = &self.langevin {
            l.validate().map_err(numeric)?;
        }
        if let Some(m) = &self.modality {
            if m.bootstrap == 0 || !(m.confidence > 0.0 && m.confidence < 1.0) {
                return Err(CliError::Validation("modality block needs bootstrap >= 1 and 0 < confidence < 1".into()));
            }
        }
        let needs_model = !matches!(command, Command::Report | Command::Bifurcation);
        if needs_model && self.model.is_none() {
            return Err(CliError::Validation(format!("`{}` needs a [model] block", command.label())));
        }
        if let Some(m) = &self.model {
            m.build()?;
        }
        match command {
            Command::Bifurcation => {
                if !matches!(self.model, None | Some(ModelConfig::MaierStein { .. })) {
                    return Err(CliError::Validation("bifurcation scans the maier_stein family only".into()));
                }
                if self.bifurcation.is_none() {
                    return Err(CliError::Validation("`bifurcation` needs a [bifurcation] block".into()));
                }
            }
            Command::Langevin => {
                if self.langevin.is_none() {
                    return Err(CliError::Validation("`langevin` needs a [langevin] block".into()));
                }
                if matches!(self.model, Some(ModelConfig::DoubleWell {})) {
                    return Err(CliError::Validation("langevin supports maier_stein and macrospin".into()));
                }
                if self.stationary.is_some()
                    && !matches!(self.model, Some(ModelConfig::Macrospin { current_ratio, .. }) if current_ratio == 0.0)
                {
                    return Err(CliError::Validation("stationary sampling needs a macrospin with current_ratio = 0".into()));
                }
            }
            Command::OracleCheck => {
                if !matches!(self.model, Some(ModelConfig::Macrospin { anisotropy, .. }) if anisotropy == 0.0) {
                    return Err(CliError::Validation("oracle-check needs a macrospin with D = 0".into()));
                }
            }
            _ => {}
        }
        Ok(self)
    }

    /// Config as embedded in summaries: fully resolved, without the output location.
    pub fn embedded(&self) -> Self {
        Self { output: None, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_macrospin_config() {
        let cfg = RunConfig::parse(
            r#"
            format_version = "1.0"
            [model]
            model = "macrospin"
            D = 20
            current_ratio = 0.8
            omega_ratio = 0.25
            [solver]
            fan_size = 8
            "#,
        )
        .unwrap();
        let cfg = cfg.resolve(Command::Instanton).unwrap();
        assert_eq!(cfg.solver.fan_size, 8);
        match cfg.model.unwrap() {
            ModelConfig::Macrospin { alpha, anisotropy, .. } => {
                assert_eq!(alpha, 0.01);
                assert_eq!(anisotropy, 20.0);
            }
            _ => panic!(),
        }
        let Model::Macrospin(m) = cfg.model.unwrap().build().unwrap() else { panic!() };
        assert!(m.current < 0.0);
    }

    #[test]
    fn unknown_keys_are_rejected_in_every_block() {
        let base = "format_version = \"1.0\"\n[model]\nmodel = \"maier_stein\"\nalpha = 3\n";
        assert!(RunConfig::parse(base).is_ok());
        for extra in [
            "typo = 1\n",
            "[solver]\nfan = 16\n",
            "[grid]\nx_min = 0\nx_max = 1\ny_min = 0\ny_max = 1\nnx = 5\nny = 5\nnz = 2\n",
            "[crossing]\ntolerance = 1\n",
        ] {
            let text = if extra.starts_with('[') { format!("{base}{extra}") } else { format!("{extra}{base}") };
            assert!(matches!(RunConfig::parse(&text), Err(CliError::Validation(_))), "{extra}");
        }
        let text = base.replace("alpha = 3", "alpha = 3\nD = 2");
        assert!(RunConfig::parse(&text).is_err());
        assert!(RunConfig::parse("format_version = \"1.0\"\n[model]\nmodel = \"double_well\"\nalpha = 1\n").is_err());
    }

    #[test]
    fn version_major_must_match() {
        assert!(RunConfig::parse("format_version = \"1.3\"").is_ok());
        assert!(RunConfig::parse("format_version = \"2.0\"").is_err());
        assert!(RunConfig::parse("").is_err());
    }

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let mut cfg = RunConfig::new(Command::Instanton);
        cfg.model = Some(ModelConfig::Macrospin { alpha: 0.01, anisotropy: 0.0, current_ratio: 0.3, omega_ratio: 0.0 });
        cfg.grid = Some(GridSpec::new((0.1, 1.0), (-1.0, 1.0), 5, 7).unwrap());
        let text = cfg.to_toml();
        assert!(text.contains("max_step = inf"));
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn command_mismatch_and_missing_blocks() {
        let mut cfg = RunConfig::new(Command::Instanton);
        cfg.model = Some(ModelConfig::MaierStein { alpha: 3.0 });
        assert!(cfg.clone().resolve(Command::NormMap).is_err());
        cfg.command = None;
        assert!(cfg.clone().resolve(Command::Langevin).is_err());
        assert!(cfg.clone().resolve(Command::OracleCheck).is_err());
        cfg.model = Some(ModelConfig::MaierStein { alpha: -1.0 });
        assert!(matches!(cfg.resolve(Command::Instanton), Err(CliError::Validation(_))));
    }
}
