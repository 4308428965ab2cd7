//! Run configuration. One TOML file covers every stage; all fields have
//! defaults so an empty file is a valid configuration.
//!
//! ```toml
//! seed = 7
//!
//! [retarget]
//! lambda = 50.0
//! geodesic_pose = "rest"
//!
//! [hand]
//! n_fingers = 4
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::Pose;
use crate::sim::{PressureLimits, SpineConfig};
use crate::{Error, Result};

/// Which vertex positions weight geodesic edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeodesicPose {
    /// Rest-pose mesh; contacts are still projected on each frame's surface.
    #[default]
    Rest,
    /// Each frame's deformed surface.
    PerFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetConfig {
    pub pos: [f64; 3],
    /// `[w, x, y, z]`.
    pub quat: [f64; 4],
}

impl Default for OffsetConfig {
    fn default() -> Self {
        Self {
            pos: [0.0; 3],
            quat: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

impl OffsetConfig {
    pub fn pose(&self) -> Result<Pose> {
        Pose::from_wxyz(self.pos, self.quat).map_err(|m| Error::invalid(format!("retarget.ee_offset: {m}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetargetConfig {
    /// Geodesic decay (1/m).
    pub lambda: f64,
    /// Penalty for disjoint workspaces (m).
    pub beta: f64,
    /// Denominator guard of the adjustment average.
    pub epsilon: f64,
    /// Adjustment clamp radius (m).
    pub delta_max: f64,
    /// kPa.
    pub p_min: f64,
    /// kPa.
    pub p_max: f64,
    pub geodesic_pose: GeodesicPose,
    /// Fixed hand-to-robot frame offset applied to the demonstrated EE pose.
    pub ee_offset: OffsetConfig,
}

impl Default for RetargetConfig {
    fn default() -> Self {
        Self {
            lambda: 50.0,
            beta: 1.0,
            epsilon: 1e-9,
            delta_max: 0.01,
            p_min: 0.0,
            p_max: 50.0,
            geodesic_pose: GeodesicPose::Rest,
            ee_offset: OffsetConfig::default(),
        }
    }
}

impl RetargetConfig {
    /// Checks the documented invariants. `lambda = 0` (a flat kernel) and
    /// `epsilon = 0` are accepted by the kernels themselves for analysis but
    /// rejected here.
    pub fn validate(&self) -> Result<()> {
        let positive = [("lambda", self.lambda), ("epsilon", self.epsilon), ("delta_max", self.delta_max)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("retarget.{name} must be finite and positive, got {v}")));
            }
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid(format!("retarget.beta must be finite and non-negative, got {}", self.beta)));
        }
        self.limits()?;
        self.ee_offset.pose()?;
        Ok(())
    }

    pub fn limits(&self) -> Result<PressureLimits> {
        PressureLimits::new(self.p_min, self.p_max)
    }
}

/// Robot hand layout and workspace sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandConfig {
    pub n_fingers: usize,
    /// Radius of the finger-base ring (m).
    pub ring_radius: f64,
    /// Height of the finger bases above the EE origin (m).
    pub base_height: f64,
    /// Random pressure samples per robot workspace envelope.
    pub envelope_samples: usize,
}

impl Default for HandConfig {
    fn default() -> Self {
        Self {
            n_fingers: 4,
            ring_radius: 0.03,
            base_height: 0.07,
            envelope_samples: 500,
        }
    }
}

impl HandConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fingers == 0 {
            return Err(Error::invalid("hand.n_fingers must be at least 1"));
        }
        if self.envelope_samples == 0 {
            return Err(Error::invalid("hand.envelope_samples must be at least 1"));
        }
        if !(self.ring_radius.is_finite() && self.ring_radius >= 0.0 && self.base_height.is_finite()) {
            return Err(Error::invalid("hand.ring_radius and hand.base_height must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial Adam step size; decays to zero on a cosine schedule.
    pub learning_rate: f64,
    pub hidden: usize,
    /// Fraction of samples held out for validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 600,
            batch_size: 64,
            learning_rate: 3e-3,
            hidden: 64,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::invalid("train.epochs, train.batch_size and train.hidden must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("train.learning_rate must be finite and positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::invalid("train.validation_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertConfig {
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for InvertConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            learning_rate: 0.05,
        }
    }
}

impl InvertConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("invert.iterations must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("invert.learning_rate must be finite and positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Shared dataset size for the forward model and every baseline.
    pub samples: usize,
    /// Displacement measurement noise (m).
    pub noise_std: f64,
    pub knn_k: usize,
    pub waypoints: usize,
    pub loops: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            noise_std: 3e-4,
            knn_k: 5,
            waypoints: 40,
            loops: 3,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 50 {
            return Err(Error::invalid("benchmark.samples must be at least 50"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid("benchmark.noise_std must be finite and non-negative"));
        }
        if self.knn_k == 0 || self.waypoints < 3 || self.loops == 0 {
            return Err(Error::invalid(
                "benchmark.knn_k and benchmark.loops must be positive, benchmark.waypoints at least 3",
            ));
        }
        Ok(())
    }
}

/// Synthetic demonstration settings used by the `pipeline` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub template: String,
    pub mesh_resolution: usize,
    pub frames: usize,
    pub rate_hz: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            template: "twist".into(),
            mesh_resolution: 6,
            frames: 60,
            rate_hz: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every random stream derives from it.
    pub seed: u64,
    pub retarget: RetargetConfig,
    pub spine: SpineConfig,
    pub hand: HandConfig,
    pub train: TrainConfig,
    pub invert: InvertConfig,
    pub benchmark: BenchmarkConfig,
    pub demo: DemoConfig,
}

/// Independent random streams derived from the root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Demo,
    Envelope,
    Dataset,
    Training,
    Baseline,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("config TOML", e.to_string().trim_end()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.retarget.validate()?;
        self.spine.validate()?;
        self.hand.validate()?;
        self.train.validate()?;
        self.invert.validate()?;
        self.benchmark.validate()
    }

    /// Hex SHA-256 of the canonical (field-ordered, compact) JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn seed_for(&self, stream: Stream) -> u64 {
        let tag = match stream {
            Stream::Demo => 0,
            Stream::Envelope => 1,
            Stream::Dataset => 2,
            Stream::Training => 3,
            Stream::Baseline => 4,
        };
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag)
    }

    pub fn limits(&self) -> Result<PressureLimits> {
        self.retarget.limits()
    }
}
