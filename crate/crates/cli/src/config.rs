//! Configuration files: TOML with one optional section per subcommand.

use serde::{Deserialize, Serialize};

use qjump_core::experiment::{build_experiment, ExperimentSpec, RawExperiment};
use qjump_core::field::DEFAULT_MARGIN;
use qjump_core::oracle::{OracleGrid, PerturbativeSettings};
use qjump_core::{build_model, ModelConfig, RawModel};

/// Sampling grid for a single array, in oscillator lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub spacing: f64,
    pub margin: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { spacing: 0.25, margin: DEFAULT_MARGIN }
    }
}

/// Far-field screen for `diffract`, in input length units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSection {
    pub distance: f64,
    pub pixel_count: usize,
    pub pixel_spacing: f64,
}

fn default_workers() -> usize {
    1
}

/// Shot sampling for `detect`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub shots: u64,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Also write one line per shot.
    #[serde(default)]
    pub events: bool,
}

fn default_true() -> bool {
    true
}

/// Full evolution settings for `oracle`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Evolution time in input time units.
    pub time: f64,
    /// Time step in input time units; defaults to the stability bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_step: Option<f64>,
    /// Repeat the run at half the step and report the change.
    #[serde(default = "default_true")]
    pub step_halving: bool,
    #[serde(default)]
    pub grid: OracleGrid,
    #[serde(default)]
    pub first_order: PerturbativeSettings,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<RawModel>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<PlaneSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<RawExperiment>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{section}: {source}")]
    Invalid { section: &'static str, source: qjump_core::Error },
    #[error("missing section [{0}]")]
    Missing(&'static str),
}

impl ConfigError {
    /// Line of a syntax error, 1-based.
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Syntax { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Parses and validates a configuration file. Every section present is
/// checked, whichever subcommand will use it.
pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    let config: ConfigFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ConfigError::Syntax { line, message: e.message().to_string() }
    })?;
    if config.model.is_some() {
        config.model()?;
    }
    if config.experiment.is_some() {
        config.experiment()?;
    }
    for (name, v) in [("grid.spacing", config.grid.spacing), ("grid.margin", config.grid.margin)] {
        if v.is_nan() || v <= 0.0 {
            return Err(ConfigError::Invalid { section: "grid", source: qjump_core::Error::NonPositive(name) });
        }
    }
    Ok(config)
}

impl ConfigFile {
    pub fn model(&self) -> Result<ModelConfig, ConfigError> {
        let raw = self.model.as_ref().ok_or(ConfigError::Missing("model"))?;
        build_model(raw).map_err(|source| ConfigError::Invalid { section: "model", source })
    }

    pub fn experiment(&self) -> Result<ExperimentSpec, ConfigError> {
        let raw = self.experiment.as_ref().ok_or(ConfigError::Missing("experiment"))?;
        build_experiment(raw).map_err(|source| ConfigError::Invalid { section: "experiment", source })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration values are representable in TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use qjump_core::model::{IncidentKind, RawIncident, UnitSystem};

    const MINIMAL: &str = r#"
[model]
dimension = 1
particle_mass = 1.0
oscillator_mass = 1.0
oscillator_quantum = 1.0
sites = [[0.0]]
potential_strength = 1.0
potential_range = 0.05

[model.incident]
kind = "plane_wave"
wavevector = [3.0]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        let raw = c.model.as_ref().unwrap();
        assert_eq!(raw.n_max, 8);
        assert_eq!(raw.inelastic_branching, 1.0);
        assert!(raw.incident.normalize);
        assert_eq!(c.grid, GridSection::default());
        assert_eq!(c.model().unwrap().dim, 1);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("potential_range", "potential_rnage");
        let e = parse_config(&text).unwrap_err();
        assert!(e.to_string().contains("potential_rnage"), "{e}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = MINIMAL.replace("oscillator_quantum = 1.0", "oscillator_quantum = = 1.0");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.line(), Some(6), "{e}");
    }

    #[test]
    fn invalid_values_name_the_section() {
        let text = MINIMAL.replace("particle_mass = 1.0", "particle_mass = -1.0");
        let e = parse_config(&text).unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { section: "model", .. }));
        assert!(e.to_string().starts_with("model:"), "{e}");
    }

    #[test]
    fn round_trip() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    fn raw_model() -> impl Strategy<Value = RawModel> {
        (1usize..=3, 0.01f64..100.0, 0.01f64..10.0, 0.1f64..5.0, 1u32..10, any::<bool>(), -1e3f64..1e3).prop_flat_map(
            |(dim, mass, quantum, k, n_max, gaussian, x)| {
                prop::collection::vec(prop::collection::vec(-50.0f64..50.0, dim), 1..4).prop_map(move |sites| {
                    let mut wavevector = vec![0.0; dim];
                    wavevector[0] = k;
                    RawModel {
                        units: if gaussian { UnitSystem::EvNmFs } else { UnitSystem::Natural },
                        dimension: dim,
                        particle_mass: mass,
                        oscillator_mass: 1.0 / mass,
                        oscillator_quantum: quantum,
                        sites,
                        potential_strength: x,
                        potential_range: 0.05,
                        incident: RawIncident {
                            kind: if gaussian { IncidentKind::Gaussian } else { IncidentKind::PlaneWave },
                            wavevector,
                            center: gaussian.then(|| vec![x; dim]),
                            width: gaussian.then_some(quantum),
                            normalize: !gaussian,
                        },
                        n_max,
                        time_window: gaussian.then_some(mass),
                        inelastic_branching: quantum,
                    }
                })
            },
        )
    }

    proptest! {
        #[test]
        fn serialized_models_parse_back(model in raw_model()) {
            let c = ConfigFile { model: Some(model), ..ConfigFile::default() };
            let back: ConfigFile = toml::from_str(&c.to_toml()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
