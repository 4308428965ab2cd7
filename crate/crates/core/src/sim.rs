//! Quasi-static articulated-spine soft finger.
//!
//! Three chambers at 120° around the spine produce a bending torque in the
//! finger's xy-plane. Every actuated joint settles at `θ = τ / k` (magnitude
//! clamped per joint), so the spine forms a constant-curvature arc. The base
//! capsule is fixed; the remaining `n_segments - 1` joints bend.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{Point3, Pose};
use crate::{Error, Result};

const KPA: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpineConfig {
    pub n_segments: usize,
    /// Capsule length (m).
    pub segment_length: f64,
    /// N·m/rad.
    pub joint_stiffness: f64,
    /// N·m·s/rad. Accepted for completeness; quasi-statics ignore it.
    pub joint_damping: f64,
    /// Moment arm of each chamber (m).
    pub chamber_radius: f64,
    /// Per-joint bend magnitude limit (rad).
    pub max_bend_per_joint: f64,
    /// Effective chamber piston area (m²).
    pub piston_area: f64,
}

impl Default for SpineConfig {
    fn default() -> Self {
        Self {
            n_segments: 8,
            segment_length: 0.010,
            joint_stiffness: 0.2,
            joint_damping: 0.02,
            chamber_radius: 0.006,
            max_bend_per_joint: 0.35,
            piston_area: 1e-4,
        }
    }
}

impl SpineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_segments < 1 {
            return Err(Error::invalid("spine.n_segments must be at least 1"));
        }
        for (name, v) in [
            ("segment_length", self.segment_length),
            ("joint_stiffness", self.joint_stiffness),
            ("chamber_radius", self.chamber_radius),
            ("max_bend_per_joint", self.max_bend_per_joint),
            ("piston_area", self.piston_area),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("spine.{name} must be finite and positive, got {v}")));
            }
        }
        if !(self.joint_damping.is_finite() && self.joint_damping >= 0.0) {
            return Err(Error::invalid("spine.joint_damping must be finite and non-negative"));
        }
        Ok(())
    }

    /// Straight-finger length `n_segments * segment_length`.
    pub fn length(&self) -> f64 {
        self.n_segments as f64 * self.segment_length
    }

    pub fn joint_count(&self) -> usize {
        self.n_segments - 1
    }
}

/// Chamber pressure bounds in kPa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureLimits {
    pub min: f64,
    pub max: f64,
}

impl Default for PressureLimits {
    fn default() -> Self {
        Self { min: 0.0, max: 50.0 }
    }
}

impl PressureLimits {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        let l = Self { min, max };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::invalid(format!(
                "pressure limits need finite p_min < p_max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn midpoint(&self) -> [f64; 3] {
        [(self.min + self.max) / 2.0; 3]
    }

    pub fn clamp(&self, p: [f64; 3]) -> [f64; 3] {
        p.map(|v| v.clamp(self.min, self.max))
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        p.iter().all(|v| (self.min..=self.max).contains(v))
    }
}

/// Three chamber pressures (kPa).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureCommand(pub [f64; 3]);

impl PressureCommand {
    pub fn new(p: [f64; 3], limits: &PressureLimits) -> Result<Self> {
        if !limits.contains(&p) {
            return Err(Error::invalid(format!(
                "pressure {p:?} outside [{}, {}] kPa",
                limits.min, limits.max
            )));
        }
        Ok(Self(p))
    }

    /// Cyclic chamber permutation `(p1, p2, p3) -> (p3, p1, p2)`; rotates the
    /// bending direction by +120°.
    pub fn rotated(&self) -> Self {
        let [a, b, c] = self.0;
        Self([c, a, b])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerPose {
    /// Bend angle vector `(θx, θy)` of each actuated joint, base to tip.
    pub joint_angles: Vec<[f64; 2]>,
    /// Tip position in the finger base frame (m).
    pub tip: Point3,
    /// Tip displacement from the straight pose (m).
    pub displacement: Vector3<f64>,
}

/// Bending torque `(τx, τy)` in N·m: `r A Σ_k (p_k - p̄) u_k` with chamber
/// directions `u_k` at 0°, 120° and 240°.
///
/// Written in difference form so that equal pressures cancel exactly.
pub fn pressures_to_torques(p: &PressureCommand, cfg: &SpineConfig) -> [f64; 2] {
    let [p1, p2, p3] = p.0;
    let gain = cfg.chamber_radius * cfg.piston_area * KPA;
    let tx = gain * ((p1 - p2) + (p1 - p3)) / 2.0;
    let ty = gain * (3f64.sqrt() / 2.0) * (p2 - p3);
    [tx, ty]
}

/// Per-joint bend vector `τ / k`, magnitude-clamped.
pub fn joint_bend(p: &PressureCommand, cfg: &SpineConfig) -> [f64; 2] {
    let [tx, ty] = pressures_to_torques(p, cfg);
    let (bx, by) = (tx / cfg.joint_stiffness, ty / cfg.joint_stiffness);
    let mag = bx.hypot(by);
    if mag > cfg.max_bend_per_joint {
        let s = cfg.max_bend_per_joint / mag;
        [bx * s, by * s]
    } else {
        [bx, by]
    }
}

/// Rotation by `|θ|` about the in-plane axis `(θx, θy, 0) / |θ|`.
pub fn joint_rotation(theta: [f64; 2]) -> Matrix3<f64> {
    let angle = theta[0].hypot(theta[1]);
    if angle == 0.0 {
        return Matrix3::identity();
    }
    let (kx, ky) = (theta[0] / angle, theta[1] / angle);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    Matrix3::new(
        c + t * kx * kx,
        t * kx * ky,
        s * ky,
        t * kx * ky,
        c + t * ky * ky,
        -s * kx,
        -s * ky,
        s * kx,
        c,
    )
}

/// Tip of the capsule chain: the fixed base capsule along +z followed by one
/// capsule per joint.
pub fn chain_tip(joint_angles: &[[f64; 2]], segment_length: f64) -> Point3 {
    let step = Vector3::new(0.0, 0.0, segment_length);
    let mut orientation = Matrix3::identity();
    let mut tip = step;
    for theta in joint_angles {
        orientation *= joint_rotation(*theta);
        tip += orientation * step;
    }
    tip
}

pub fn straight_tip(cfg: &SpineConfig) -> Point3 {
    chain_tip(&vec![[0.0, 0.0]; cfg.joint_count()], cfg.segment_length)
}

pub fn forward(p: &PressureCommand, cfg: &SpineConfig) -> FingerPose {
    let bend = joint_bend(p, cfg);
    let joint_angles = vec![bend; cfg.joint_count()];
    let tip = chain_tip(&joint_angles, cfg.segment_length);
    FingerPose {
        displacement: tip - straight_tip(cfg),
        joint_angles,
        tip,
    }
}

/// Anything mapping chamber pressures to a fingertip displacement.
pub trait Plant {
    fn displacement(&self, p: &[f64; 3]) -> Vector3<f64>;
    fn limits(&self) -> PressureLimits;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpineFinger {
    pub config: SpineConfig,
    pub limits: PressureLimits,
}

impl SpineFinger {
    pub fn new(config: SpineConfig, limits: PressureLimits) -> Result<Self> {
        config.validate()?;
        limits.validate()?;
        Ok(Self { config, limits })
    }

    pub fn forward(&self, p: &[f64; 3]) -> FingerPose {
        forward(&PressureCommand(*p), &self.config)
    }
}

impl Default for SpineFinger {
    fn default() -> Self {
        Self {
            config: SpineConfig::default(),
            limits: PressureLimits::default(),
        }
    }
}

impl Plant for SpineFinger {
    fn displacement(&self, p: &[f64; 3]) -> Vector3<f64> {
        self.forward(p).displacement
    }

    fn limits(&self) -> PressureLimits {
        self.limits
    }
}

/// Uniformly random pressure triple within `limits`.
pub fn random_pressure<R: Rng>(rng: &mut R, limits: &PressureLimits) -> [f64; 3] {
    std::array::from_fn(|_| limits.min + limits.span() * rng.random::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub pressure: [f64; 3],
    pub displacement: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct SampleRow {
    p1_kpa: f64,
    p2_kpa: f64,
    p3_kpa: f64,
    dx_m: f64,
    dy_m: f64,
    dz_m: f64,
}

/// Pressure/displacement pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.samples {
            out.serialize(SampleRow {
                p1_kpa: s.pressure[0],
                p2_kpa: s.pressure[1],
                p3_kpa: s.pressure[2],
                dx_m: s.displacement.x,
                dy_m: s.displacement.y,
                dz_m: s.displacement.z,
            })
            .map_err(|e| Error::parse("dataset CSV", e))?;
        }
        out.flush().map_err(|e| Error::parse("dataset CSV", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut samples = Vec::new();
        for (i, row) in rd.deserialize::<SampleRow>().enumerate() {
            let row = row.map_err(|e| Error::parse("dataset CSV", format!("row {}: {e}", i + 1)))?;
            let values = [row.p1_kpa, row.p2_kpa, row.p3_kpa, row.dx_m, row.dy_m, row.dz_m];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse("dataset CSV", format!("row {}: non-finite value", i + 1)));
            }
            samples.push(Sample {
                pressure: [row.p1_kpa, row.p2_kpa, row.p3_kpa],
                displacement: Vector3::new(row.dx_m, row.dy_m, row.dz_m),
            });
        }
        Ok(Self { samples })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Hex SHA-256 of the CSV encoding.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_string().as_bytes()))
    }
}

/// `n` uniformly random pressures through `finger`, with zero-mean Gaussian
/// noise of `noise_std` metres added to each displacement component.
pub fn sample_dataset(finger: &SpineFinger, n: usize, seed: u64, noise_std: f64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("dataset size must be at least 1"));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::invalid(format!("noise_std must be finite and non-negative, got {noise_std}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let samples = (0..n)
        .map(|_| {
            let pressure = random_pressure(&mut rng, &finger.limits);
            let mut displacement = finger.displacement(&pressure);
            if noise_std > 0.0 {
                displacement += Vector3::from_fn(|_, _| noise.sample(&mut rng));
            }
            Sample { pressure, displacement }
        })
        .collect();
    Ok(Dataset { samples })
}

/// Robot hand: identical spine fingers mounted on the end-effector.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotHand {
    pub finger: SpineFinger,
    /// Base pose of each finger in the EE-local frame.
    pub bases: Vec<Pose>,
}

impl RobotHand {
    /// `n` fingers on a ring of `radius` at height `base_height`, finger `i`
    /// yawed by `2πi/n`.
    pub fn ring(n: usize, radius: f64, base_height: f64, finger: SpineFinger) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("robot hand needs at least one finger"));
        }
        let bases = (0..n)
            .map(|i| {
                let yaw = std::f64::consts::TAU * i as f64 / n as f64;
                Pose::new(
                    Point3::new(radius * yaw.cos(), radius * yaw.sin(), base_height),
                    nalgebra::UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
                )
            })
            .collect();
        Ok(Self { finger, bases })
    }

    pub fn finger_count(&self) -> usize {
        self.bases.len()
    }

    /// Fingertip of finger `i` in the EE-local frame.
    pub fn fingertip(&self, i: usize, p: &[f64; 3]) -> Point3 {
        self.bases[i].transform_point(&self.finger.forward(p).tip)
    }
}
