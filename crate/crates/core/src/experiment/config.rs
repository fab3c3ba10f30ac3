use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::attack::AttackScenario;
use crate::bus::{BackgroundConfig, ControllerConfig, SensorConfig, TemperatureSource};
use crate::codec::{GroupAddress, IndividualAddress};
use crate::detector::{Algorithm, FeatureKind, Hyperparams};
use crate::hvac::{HvacParams, ImpactSetup, WeatherTrace};
use crate::scenario::BusScenario;

/// Everything an experiment needs. Every section has defaults, so `{}` is a
/// valid config; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub bus: BusSection,
    pub attack: AttackScenario,
    pub hvac: HvacSection,
    pub detector: DetectorSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            seed: 1,
            out_dir: "out".into(),
            bus: BusSection::default(),
            attack: AttackScenario::default(),
            hvac: HvacSection::default(),
            detector: DetectorSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BusSection {
    pub duration_s: f64,
    pub frame_latency_s: f64,
    pub sensor: SensorSection,
    pub controller: ControllerSection,
    pub background: BackgroundSection,
}

impl Default for BusSection {
    fn default() -> Self {
        Self {
            duration_s: 86_400.0,
            frame_latency_s: crate::bus::DEFAULT_FRAME_LATENCY,
            sensor: SensorSection::default(),
            controller: ControllerSection::default(),
            background: BackgroundSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub address: IndividualAddress,
    pub group: GroupAddress,
    pub period_s: f64,
    pub jitter_sd_s: f64,
    pub phase_s: f64,
    pub temperature_c: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        let d = SensorConfig::default();
        Self { address: d.address, group: d.group, period_s: d.period, jitter_sd_s: d.period_jitter_sd, phase_s: d.phase, temperature_c: 21.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub address: IndividualAddress,
    /// `null` disables polling.
    pub poll_period_s: Option<f64>,
    pub poll_phase_s: f64,
    pub auth_allowlist: Option<Vec<IndividualAddress>>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let d = ControllerConfig::default();
        Self { address: d.address, poll_period_s: d.poll_period, poll_phase_s: d.poll_phase, auth_allowlist: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSection {
    /// Poisson rate in telegrams per second; 0 disables it.
    pub rate: f64,
    pub read_fraction: f64,
}

impl Default for BackgroundSection {
    fn default() -> Self {
        let d = BackgroundConfig::default();
        Self { rate: d.rate, read_fraction: d.read_fraction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HvacSection {
    pub params: HvacParams,
    pub weather: WeatherTrace,
    pub setup: ImpactSetup,
    pub attack_i_bias: f64,
    pub attack_ii_override: f64,
    pub bias_sweep: Vec<f64>,
}

impl Default for HvacSection {
    fn default() -> Self {
        Self {
            params: HvacParams::default(),
            weather: WeatherTrace::default(),
            setup: ImpactSetup::default(),
            attack_i_bias: 1.0,
            attack_ii_override: 22.005,
            bias_sweep: vec![0.0, 0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub windows_min: Vec<u32>,
    pub features: Vec<FeatureKind>,
    pub algorithms: Vec<Algorithm>,
    pub train_fraction: f64,
    pub bins: usize,
    pub quantile: f64,
    pub hyperparams: Hyperparams,
    /// Also run the zero-delay relay against the baseline.
    pub null_experiment: bool,
    pub reference: ReferenceSource,
}

/// Which capture supplies the histogram range and the baseline
/// distributions that JSD features compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceSource {
    /// A separate no-attack capture with its own seeds. Labeled baseline
    /// windows are then never compared with themselves.
    Independent,
    /// The labeled baseline capture itself, so every baseline vector holds
    /// one exact zero (its self-comparison).
    Baseline,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            windows_min: vec![5, 10, 20, 30, 40, 50, 60],
            features: FeatureKind::ALL.to_vec(),
            algorithms: vec![Algorithm::Tree, Algorithm::Svm],
            train_fraction: 0.7,
            bins: 50,
            quantile: 0.99,
            hyperparams: Hyperparams::default(),
            null_experiment: true,
            reference: ReferenceSource::Independent,
        }
    }
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let b = &self.bus;
        if !(b.duration_s > 0.0 && b.duration_s.is_finite()) {
            return Err(invalid("bus.duration_s must be > 0"));
        }
        if !(b.frame_latency_s >= 0.0 && b.frame_latency_s.is_finite()) {
            return Err(invalid("bus.frame_latency_s must be >= 0"));
        }
        if !(b.background.rate >= 0.0) || !(0.0..=1.0).contains(&b.background.read_fraction) {
            return Err(invalid("bus.background needs rate >= 0 and read_fraction in [0, 1]"));
        }
        self.sensor_config(0).validate().map_err(|e| invalid(e.to_string()))?;
        if let Some(p) = b.controller.poll_period_s {
            if !(p > 0.0) {
                return Err(invalid("bus.controller.poll_period_s must be > 0"));
            }
        }
        self.attack.validate().map_err(|e| invalid(e.to_string()))?;
        self.hvac.params.validate().map_err(|e| invalid(e.to_string()))?;
        if !(self.hvac.setup.duration_h > 0.0) {
            return Err(invalid("hvac.setup.duration_h must be > 0"));
        }
        let d = &self.detector;
        if d.windows_min.is_empty() || d.windows_min.contains(&0) {
            return Err(invalid("detector.windows_min must be non-empty and positive"));
        }
        if d.features.is_empty() || d.algorithms.is_empty() {
            return Err(invalid("detector.features and detector.algorithms must be non-empty"));
        }
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return Err(invalid("detector.train_fraction must be in (0, 1)"));
        }
        if d.bins == 0 || !(d.quantile > 0.0 && d.quantile <= 1.0) {
            return Err(invalid("detector.bins must be > 0 and quantile in (0, 1]"));
        }
        Ok(())
    }

    pub fn sensor_config(&self, seed: u64) -> SensorConfig {
        let s = &self.bus.sensor;
        SensorConfig {
            address: s.address,
            group: s.group,
            period: s.period_s,
            period_jitter_sd: s.jitter_sd_s,
            phase: s.phase_s,
            temperature_source: TemperatureSource::Constant(s.temperature_c),
            seed,
        }
    }

    /// Bus topology with per-run seeds derived from `run` (e.g. `"baseline"`).
    pub fn bus_scenario(&self, run: &str) -> BusScenario {
        let c = &self.bus.controller;
        let controller = ControllerConfig {
            address: c.address,
            subscribed_groups: BTreeSet::from([self.bus.sensor.group]),
            auth_allowlist: c.auth_allowlist.as_ref().map(|v| v.iter().copied().collect()),
            poll_period: c.poll_period_s,
            poll_phase: c.poll_phase_s,
        };
        let bg = &self.bus.background;
        let background = (bg.rate > 0.0).then(|| BackgroundConfig {
            rate: bg.rate,
            read_fraction: bg.read_fraction,
            seed: self.derive_seed(&format!("{run}.background")),
            ..BackgroundConfig::default()
        });
        BusScenario {
            duration: self.bus.duration_s,
            frame_latency: self.bus.frame_latency_s,
            sensor: self.sensor_config(self.derive_seed(&format!("{run}.sensor"))),
            controller,
            background,
        }
    }

    pub fn derive_seed(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent per-component seed: splitmix64 of the root seed mixed with
/// an FNV-1a hash of the component label.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let h = label.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3));
    splitmix64(splitmix64(root) ^ h)
}
