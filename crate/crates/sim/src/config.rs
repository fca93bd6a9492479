//! Scenario configuration: a JSON document with the fields below. Every
//! field has a default, so a file only needs the parts it changes; unknown
//! keys are rejected.
//!
//! ```json
//! {
//!   "name": "two-target",
//!   "region": { "x": [-1000, 1000], "y": [-1000, 1000] },
//!   "steps": 100,
//!   "cycle_time": 1.0,
//!   "motion": { "acceleration_variance": 5.0, "survival": 0.99 },
//!   "sensor": { "noise_std": 10.0, "detection": 0.98, "clutter_rate": 50.0 },
//!   "birth": [ { "existence": 0.05, "mean": [-1000, 0, 0, 0], "std": [10, 10, 10, 10] } ],
//!   "truth": [ { "birth_step": 1, "death_step": 90, "initial_state": [-1000, 18, 0, 0],
//!                "maneuvers": [ { "step": 45, "velocity": [4, 15], "duration": 10 } ] } ],
//!   "filter": { "gate_confidence": 0.99, "cap": 50, "kl_threshold": 1e-4 },
//!   "ospa": { "order": 1, "cutoff": 300, "label_penalty": 100 },
//!   "seed": 0
//! }
//! ```
//!
//! States are `[px, vx, py, vy]`; measurements are positions `[x, y]`.

use std::path::Path;

use almb_core::criteria::CriteriaThresholds;
use almb_core::ospa::OspaParams;
use almb_core::{BirthModel, GaussianMixture, Models, MotionModel, PipelineConfig, ReductionParams, SensorModel};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Result, SimError};

const TWO_TARGET: &str = include_str!("../scenarios/two_target.json");
const SIXTEEN_TARGET: &str = include_str!("../scenarios/sixteen_target.json");

/// Names accepted after `builtin:`.
pub const BUILTIN_SCENARIOS: [&str; 2] = ["two-target", "sixteen-target"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub region: Region,
    pub steps: u32,
    pub cycle_time: f64,
    pub motion: MotionConfig,
    pub sensor: SensorConfig,
    pub birth: Vec<BirthEntry>,
    pub truth: Vec<TruthTrack>,
    pub filter: FilterConfig,
    pub ospa: OspaConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionConfig {
    /// Variance of the white acceleration noise; with a cycle time of one
    /// second it equals the per-step velocity noise variance.
    pub acceleration_variance: f64,
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub noise_std: f64,
    pub detection: f64,
    /// Mean number of clutter points per scan.
    pub clutter_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthEntry {
    pub existence: f64,
    pub mean: Vec<f64>,
    /// Per-coordinate standard deviations of the diagonal birth covariance.
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthTrack {
    pub birth_step: u32,
    pub death_step: u32,
    /// State at `birth_step`.
    pub initial_state: [f64; 4],
    /// Velocity changes, applied in order of `step`.
    #[serde(default)]
    pub maneuvers: Vec<Maneuver>,
}

/// Moves the velocity linearly to `velocity` over `duration` steps, the
/// first of which is `step`. A duration of 1 is an instant change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Maneuver {
    pub step: u32,
    pub velocity: [f64; 2],
    #[serde(default = "one")]
    pub duration: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    /// Confidence level of the chi-square gate; ignored when `gate` is set.
    pub gate_confidence: f64,
    /// Explicit squared Mahalanobis gate.
    pub gate: Option<f64>,
    pub existence_prune: f64,
    pub weight_prune: f64,
    pub cap: usize,
    /// Hypothesis cap for LMB densities converted during merging; defaults to `cap`.
    pub merge_cap: Option<usize>,
    pub extraction_threshold: f64,
    pub kl_threshold: f64,
    pub entropy_threshold: f64,
    pub mixture: MixtureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixtureConfig {
    pub prune: f64,
    pub merge: f64,
    pub max_components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OspaConfig {
    pub order: f64,
    pub cutoff: f64,
    pub label_penalty: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            region: Region {
                x: [-1000.0, 1000.0],
                y: [-1000.0, 1000.0],
            },
            steps: 100,
            cycle_time: 1.0,
            motion: MotionConfig::default(),
            sensor: SensorConfig::default(),
            birth: Vec::new(),
            truth: Vec::new(),
            filter: FilterConfig::default(),
            ospa: OspaConfig::default(),
            seed: 0,
        }
    }
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            acceleration_variance: 5.0,
            survival: 0.99,
        }
    }
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            noise_std: 10.0,
            detection: 0.98,
            clutter_rate: 50.0,
        }
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        let r = ReductionParams::default();
        Self {
            gate_confidence: 0.99,
            gate: None,
            existence_prune: p.existence_prune,
            weight_prune: p.weight_prune,
            cap: p.cap,
            merge_cap: None,
            extraction_threshold: p.extraction_threshold,
            kl_threshold: p.thresholds.kl_threshold,
            entropy_threshold: p.thresholds.entropy_threshold,
            mixture: MixtureConfig {
                prune: r.prune_threshold,
                merge: r.merge_threshold,
                max_components: r.max_components,
            },
        }
    }
}

impl Default for MixtureConfig {
    fn default() -> Self {
        FilterConfig::default().mixture
    }
}

impl Default for OspaConfig {
    fn default() -> Self {
        let p = OspaParams::default();
        Self {
            order: p.order,
            cutoff: p.cutoff,
            label_penalty: p.label_penalty,
        }
    }
}

fn probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(SimError::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SimError::Config(format!("{name} must be positive, got {v}")))
    }
}

/// Squared-distance gate at the given chi-square confidence level.
pub fn chi_square_gate(confidence: f64, dof: usize) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(SimError::Config(format!(
            "gate confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let chi = ChiSquared::new(dof as f64).map_err(|e| SimError::Config(e.to_string()))?;
    Ok(chi.inverse_cdf(confidence))
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            SimError::Config(msg) => SimError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "two-target" => Self::from_json(TWO_TARGET),
            "sixteen-target" => Self::from_json(SIXTEEN_TARGET),
            _ => Err(SimError::Config(format!(
                "unknown builtin scenario '{name}' (expected one of {})",
                BUILTIN_SCENARIOS.join(", ")
            ))),
        }
    }

    /// Resolves `builtin:<name>` or a file path.
    pub fn load(spec: &str) -> Result<Self> {
        match spec.strip_prefix("builtin:") {
            Some(name) => Self::builtin(name),
            None => Self::from_file(Path::new(spec)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(SimError::Config("steps must be at least 1".into()));
        }
        positive("cycle_time", self.cycle_time)?;
        for (name, [lo, hi]) in [("region.x", self.region.x), ("region.y", self.region.y)] {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(SimError::Config(format!("{name} must be an increasing finite interval")));
            }
        }
        if !(self.motion.acceleration_variance >= 0.0) {
            return Err(SimError::Config("acceleration_variance must be nonnegative".into()));
        }
        probability("motion.survival", self.motion.survival)?;
        positive("sensor.noise_std", self.sensor.noise_std)?;
        probability("sensor.detection", self.sensor.detection)?;
        if !(self.sensor.clutter_rate >= 0.0 && self.sensor.clutter_rate.is_finite()) {
            return Err(SimError::Config("clutter_rate must be nonnegative".into()));
        }
        for (i, b) in self.birth.iter().enumerate() {
            if !(b.existence > 0.0 && b.existence < 1.0) {
                return Err(SimError::Config(format!("birth[{i}].existence must lie in (0, 1)")));
            }
            if b.mean.len() != 4 || b.std.len() != 4 {
                return Err(SimError::Config(format!("birth[{i}] needs 4-dimensional mean and std")));
            }
            if b.std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(SimError::Config(format!("birth[{i}].std must be positive")));
            }
        }
        for (i, t) in self.truth.iter().enumerate() {
            if t.birth_step == 0 || t.birth_step > t.death_step {
                return Err(SimError::Config(format!(
                    "truth[{i}] needs 1 <= birth_step <= death_step"
                )));
            }
            if t.initial_state.iter().any(|v| !v.is_finite()) {
                return Err(SimError::Config(format!("truth[{i}].initial_state must be finite")));
            }
            let mut end = t.birth_step;
            for m in &t.maneuvers {
                if m.duration == 0 || m.step <= end || m.velocity.iter().any(|v| !v.is_finite()) {
                    return Err(SimError::Config(format!(
                        "truth[{i}] maneuvers need finite velocities, positive durations and must not overlap"
                    )));
                }
                end = m.step + m.duration - 1;
            }
        }
        let f = &self.filter;
        match f.gate {
            Some(g) => positive("filter.gate", g)?,
            None => {
                chi_square_gate(f.gate_confidence, 2)?;
            }
        }
        probability("filter.existence_prune", f.existence_prune)?;
        probability("filter.weight_prune", f.weight_prune)?;
        probability("filter.extraction_threshold", f.extraction_threshold)?;
        if f.cap == 0 || f.merge_cap == Some(0) {
            return Err(SimError::Config("hypothesis caps must be positive".into()));
        }
        if !(f.kl_threshold >= 0.0 && f.entropy_threshold >= 0.0) {
            return Err(SimError::Config("criteria thresholds must be nonnegative".into()));
        }
        if f.mixture.max_components == 0 {
            return Err(SimError::Config("mixture.max_components must be positive".into()));
        }
        self.ospa_params().validate()?;
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.region.x[1] - self.region.x[0]) * (self.region.y[1] - self.region.y[0])
    }

    pub fn models(&self) -> Result<Models> {
        let motion = MotionModel::constant_velocity(
            2,
            self.cycle_time,
            self.motion.acceleration_variance,
            self.motion.survival,
        )?;
        let sensor = SensorModel::position_only(
            2,
            self.sensor.noise_std,
            self.sensor.detection,
            self.sensor.clutter_rate,
            self.area(),
        )?;
        let entries = self
            .birth
            .iter()
            .map(|b| {
                let cov = DMatrix::from_diagonal(&DVector::from_iterator(4, b.std.iter().map(|s| s * s)));
                (b.existence, GaussianMixture::single(DVector::from_column_slice(&b.mean), cov))
            })
            .collect();
        Ok(Models {
            motion,
            sensor,
            birth: BirthModel::new(entries)?,
        })
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let f = &self.filter;
        let gate = match f.gate {
            Some(g) => g,
            None => chi_square_gate(f.gate_confidence, 2)?,
        };
        Ok(PipelineConfig {
            gate,
            existence_prune: f.existence_prune,
            weight_prune: f.weight_prune,
            cap: f.cap,
            merge_cap: f.merge_cap.unwrap_or(f.cap),
            extraction_threshold: f.extraction_threshold,
            thresholds: CriteriaThresholds {
                kl_threshold: f.kl_threshold,
                entropy_threshold: f.entropy_threshold,
            },
            reduction: ReductionParams {
                prune_threshold: f.mixture.prune,
                merge_threshold: f.mixture.merge,
                max_components: f.mixture.max_components,
            },
            ..PipelineConfig::default()
        })
    }

    pub fn ospa_params(&self) -> OspaParams {
        OspaParams {
            order: self.ospa.order,
            cutoff: self.ospa.cutoff,
            label_penalty: self.ospa.label_penalty,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        for name in BUILTIN_SCENARIOS {
            let c = ScenarioConfig::builtin(name).unwrap();
            assert_eq!(c.name, name);
            c.models().unwrap();
            c.pipeline().unwrap();
        }
    }

    #[test]
    fn gate_quantile() {
        // 2 dof: the quantile is -2 ln(1 - confidence)
        let g = chi_square_gate(0.99, 2).unwrap();
        assert!((g - (-2.0 * 0.01f64.ln())).abs() < 1e-9);
        assert!((g - 9.2103).abs() < 1e-4);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ScenarioConfig::from_json(r#"{ "stepz": 10 }"#).unwrap_err();
        assert!(matches!(err, SimError::Config(_)));
        let err = ScenarioConfig::from_json(r#"{ "sensor": { "pd": 0.9 } }"#).unwrap_err();
        assert!(matches!(err, SimError::Config(_)));
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let c = ScenarioConfig::from_json(r#"{ "steps": 5 }"#).unwrap();
        assert_eq!(c.steps, 5);
        assert_eq!(c.sensor.detection, 0.98);
        assert_eq!(c.filter.cap, 50);
        assert_eq!(c.pipeline().unwrap().merge_cap, 50);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ScenarioConfig::from_json(r#"{ "steps": 0 }"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{ "sensor": { "detection": 1.5 } }"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{ "ospa": { "label_penalty": 400 } }"#).is_err());
        assert!(ScenarioConfig::builtin("nope").is_err());
    }
}
