//! TOML run configuration. Every key is optional; missing keys take the
//! reference simulation defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emulator::{EmulatorError, FitOptions, LinkageGeometry};
use crate::integrator::IntegratorConfig;
use crate::model::{EnergyBudget, GroundProfile, HopperParams, ModelError, GRAVITY};
use crate::sim::{EpisodeConfig, GuardMode, SimError};
use crate::sweep::{GridRange, SweepError, SweepSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid model parameters: {0}")]
    Model(#[from] ModelError),
    #[error("invalid episode settings: {0}")]
    Episode(#[from] SimError),
    #[error("invalid sweep settings: {0}")]
    Sweep(#[from] SweepError),
    #[error("invalid emulator settings: {0}")]
    Emulator(#[from] EmulatorError),
    #[error("invalid integrator settings: {0}")]
    Integrator(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopperSection {
    pub body_mass: f64,
    pub toe_mass: f64,
    pub rest_length: f64,
    pub leg_stiffness: f64,
    pub leg_damping: f64,
    pub gravity: f64,
}

impl Default for HopperSection {
    fn default() -> Self {
        Self {
            body_mass: 2.5,
            toe_mass: 0.3,
            rest_length: 0.0975,
            leg_stiffness: 4000.0,
            leg_damping: 35.0,
            gravity: GRAVITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundSection {
    pub stiffness: f64,
    pub damping: f64,
}

impl Default for GroundSection {
    fn default() -> Self {
        Self {
            stiffness: 3800.0,
            damping: 45.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSection {
    pub max_hops: usize,
    pub steady_window: usize,
    pub steady_std_tol: f64,
    pub drop_height: f64,
    pub guard_mode: GuardMode,
    pub stance_fixed_duration: f64,
    pub max_stance_duration: f64,
    pub skip_initial_hops: usize,
    pub non_sticking_ground: bool,
    pub min_touchdown_interval: f64,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        let e = EpisodeConfig::<f64>::default();
        Self {
            max_hops: e.max_hops,
            steady_window: e.steady_window,
            steady_std_tol: e.steady_std_tol,
            drop_height: e.drop_height,
            guard_mode: e.guard_mode,
            stance_fixed_duration: e.stance_fixed_duration,
            max_stance_duration: e.max_stance_duration,
            skip_initial_hops: e.skip_initial_hops,
            non_sticking_ground: e.non_sticking_ground,
            min_touchdown_interval: e.min_touchdown_interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_time_tol: f64,
    pub max_phase_duration: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let c = IntegratorConfig::<f64>::default();
        Self {
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
            max_step: c.max_step,
            event_time_tol: c.event_time_tol,
            max_phase_duration: c.max_phase_duration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSection {
    pub start: f64,
    pub step: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub leg_stiffness: Vec<f64>,
    pub leg_damping: Vec<f64>,
    pub ground_stiffness: RangeSection,
    pub ground_damping: RangeSection,
    pub energy: Vec<f64>,
    pub tie_threshold: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        let s = SweepSpec::default();
        let range = |r: GridRange| RangeSection {
            start: r.start,
            step: r.step,
            end: r.end,
        };
        Self {
            leg_stiffness: s.leg_stiffness,
            leg_damping: s.leg_damping,
            ground_stiffness: range(s.ground_stiffness),
            ground_damping: range(s.ground_damping),
            energy: s.energy,
            tie_threshold: s.tie_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortraitSection {
    pub drop_heights: Vec<f64>,
}

impl Default for PortraitSection {
    fn default() -> Self {
        Self {
            drop_heights: vec![0.024, 0.033, 0.042, 0.051, 0.060, 0.069],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmulatorSection {
    pub short_link: f64,
    pub long_link: f64,
    pub free_offset: bool,
    pub min_r_squared: f64,
    pub max_iterations: usize,
}

impl Default for EmulatorSection {
    fn default() -> Self {
        let f = FitOptions::default();
        Self {
            short_link: 0.1,
            long_link: 0.2,
            free_offset: f.free_offset,
            min_r_squared: f.min_r_squared,
            max_iterations: f.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Seed for synthetic noisy data.
    pub seed: u64,
    pub threads: usize,
    pub energy: f64,
    pub hopper: HopperSection,
    pub ground: GroundSection,
    pub episode: EpisodeSection,
    pub integrator: IntegratorSection,
    pub sweep: SweepSection,
    pub portrait: PortraitSection,
    pub emulator: EmulatorSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            seed: 0,
            threads: SweepSpec::default().threads,
            energy: 1.0,
            hopper: HopperSection::default(),
            ground: GroundSection::default(),
            episode: EpisodeSection::default(),
            integrator: IntegratorSection::default(),
            sweep: SweepSection::default(),
            portrait: PortraitSection::default(),
            emulator: EmulatorSection::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let hopper = self.hopper()?;
        self.ground()?;
        let energy = self.energy_budget()?;
        crate::model::precompression_from_energy(&energy, &hopper)?;
        self.episode_config().validate()?;
        self.integrator_config()
            .validate()
            .map_err(|e| ConfigError::Integrator(e.to_string()))?;
        if self.threads == 0 {
            return Err(ConfigError::Invalid("threads must be at least 1".into()));
        }
        self.sweep_spec()?.validate()?;
        self.linkage()?;
        Ok(())
    }

    pub fn hopper(&self) -> Result<HopperParams<f64>, ConfigError> {
        let h = &self.hopper;
        Ok(HopperParams::new(
            h.body_mass,
            h.toe_mass,
            h.rest_length,
            h.leg_stiffness,
            h.leg_damping,
        )?
        .with_gravity(h.gravity)?)
    }

    pub fn ground(&self) -> Result<GroundProfile<f64>, ConfigError> {
        Ok(GroundProfile::new(self.ground.stiffness, self.ground.damping)?)
    }

    pub fn energy_budget(&self) -> Result<EnergyBudget<f64>, ConfigError> {
        Ok(EnergyBudget::new(self.energy)?)
    }

    pub fn episode_config(&self) -> EpisodeConfig<f64> {
        let e = &self.episode;
        EpisodeConfig {
            max_hops: e.max_hops,
            steady_window: e.steady_window,
            steady_std_tol: e.steady_std_tol,
            drop_height: e.drop_height,
            guard_mode: e.guard_mode,
            stance_fixed_duration: e.stance_fixed_duration,
            max_stance_duration: e.max_stance_duration,
            skip_initial_hops: e.skip_initial_hops,
            non_sticking_ground: e.non_sticking_ground,
            min_touchdown_interval: e.min_touchdown_interval,
            record_trajectory: false,
        }
    }

    pub fn integrator_config(&self) -> IntegratorConfig<f64> {
        let i = &self.integrator;
        IntegratorConfig {
            rel_tol: i.rel_tol,
            abs_tol: i.abs_tol,
            max_step: i.max_step,
            event_time_tol: i.event_time_tol,
            max_phase_duration: i.max_phase_duration,
        }
    }

    /// Sweep over the configured grids. The hopper section supplies masses,
    /// rest length and gravity; the leg values are overridden per run.
    pub fn sweep_spec(&self) -> Result<SweepSpec, ConfigError> {
        let s = &self.sweep;
        let range = |r: &RangeSection| GridRange {
            start: r.start,
            step: r.step,
            end: r.end,
        };
        Ok(SweepSpec {
            hopper: self.hopper()?,
            leg_stiffness: s.leg_stiffness.clone(),
            leg_damping: s.leg_damping.clone(),
            ground_stiffness: range(&s.ground_stiffness),
            ground_damping: range(&s.ground_damping),
            energy: s.energy.clone(),
            episode: self.episode_config(),
            integrator: self.integrator_config(),
            tie_threshold: s.tie_threshold,
            threads: self.threads,
        })
    }

    pub fn linkage(&self) -> Result<LinkageGeometry<f64>, ConfigError> {
        Ok(LinkageGeometry::new(
            self.emulator.short_link,
            self.emulator.long_link,
        )?)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            gravity: self.hopper.gravity,
            free_offset: self.emulator.free_offset,
            max_iterations: self.emulator.max_iterations,
            min_r_squared: self.emulator.min_r_squared,
        }
    }

    /// Portrait drop heights; at least two are required.
    pub fn portrait_drop_heights(&self) -> Result<&[f64], ConfigError> {
        let h = &self.portrait.drop_heights;
        if h.len() < 2 {
            return Err(ConfigError::Invalid(format!(
                "portrait needs at least two drop heights, got {}",
                h.len()
            )));
        }
        if let Some(bad) = h.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(ConfigError::Invalid(format!(
                "drop height {bad} must be positive"
            )));
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.sweep_spec().unwrap().ground_cells(), 208);
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::from_toml_str("[hopper]\nbody_mas = 2.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("body_mas"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn malformed_reports_line() {
        let err = RunConfig::from_toml_str("energy = 1.0\n[ground\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_toml_str(
            "energy = 1.5\n[hopper]\nleg_stiffness = 4300\ngravity = 9.8\n[episode]\nguard_mode = \"experiment\"\n",
        )
        .unwrap();
        assert_eq!(cfg.hopper().unwrap().leg_stiffness(), 4300.0);
        assert_eq!(cfg.hopper().unwrap().gravity(), 9.8);
        assert_eq!(cfg.episode_config().guard_mode, GuardMode::Experiment);
    }

    #[test]
    fn empty_stiffness_list_rejected() {
        let err = RunConfig::from_toml_str("[sweep]\nleg_stiffness = []\n").unwrap_err();
        assert!(matches!(err, ConfigError::Sweep(_)));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml_str("energy = -1.0\n").is_err());
        assert!(RunConfig::from_toml_str("threads = 0\n").is_err());
        assert!(RunConfig::from_toml_str("[emulator]\nshort_link = 0.3\n").is_err());
        assert!(RunConfig::from_toml_str("[episode]\nmax_hops = 5\n").is_err());
    }

    #[test]
    fn portrait_needs_two_heights() {
        let cfg = RunConfig::from_toml_str("[portrait]\ndrop_heights = [0.05]\n").unwrap();
        assert!(cfg.portrait_drop_heights().is_err());
        assert_eq!(RunConfig::default().portrait_drop_heights().unwrap().len(), 6);
    }
}
