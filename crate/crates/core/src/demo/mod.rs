//! Demonstration dataset: per-frame hand geometry, skeleton fingertips and
//! contact events recorded alongside the wrist (end-effector) and object poses.
//!
//! Frame conventions: `HandMesh` rest vertices are in the hand/EE-local frame.
//! Everything stored per frame (bones, deformed vertices, contacts, EE and
//! object poses) is in the world frame.

mod io;
mod synth;

use std::collections::BTreeMap;

use nalgebra::Vector3;
use thiserror::Error;

use crate::geodesic::nearest_vertex;
use crate::geometry::{Point3, Pose};
use crate::mesh::{Finger, HandMesh, MeshError};

pub use io::{parse_demonstration, DemoJson};
pub use synth::{hand_mesh, synth_demo, synth_demo_with, SynthOptions, Template};

/// Relative deviation of a frame interval from `1 / rate_hz` above which the
/// timestamps are reported as irregular.
const IRREGULAR_DT_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemoError {
    #[error("demonstration JSON: {0}")]
    Syntax(String),
    #[error("frame {frame}: {field}: {msg}")]
    Frame {
        frame: usize,
        field: String,
        msg: String,
    },
    #[error("{field}: {msg}")]
    Field { field: String, msg: String },
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("unknown template {0:?} (expected pinch_lift, twist or pour)")]
    UnknownTemplate(String),
}

impl DemoError {
    pub(crate) fn frame(frame: usize, field: impl Into<String>, msg: impl Into<String>) -> Self {
        DemoError::Frame {
            frame,
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn field(field: impl Into<String>, msg: impl Into<String>) -> Self {
        DemoError::Field {
            field: field.into(),
            msg: msg.into(),
        }
    }
}

/// A contact on the hand surface. `vertex` is derived: the nearest vertex of
/// the frame's deformed surface to `position`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEvent {
    pub position: Point3,
    pub force: Vector3<f64>,
    pub vertex: usize,
}

impl ContactEvent {
    /// Contact with its vertex still unresolved; [`Demonstration::new`]
    /// projects it.
    pub fn new(position: Point3, force: Vector3<f64>) -> Self {
        Self {
            position,
            force,
            vertex: usize::MAX,
        }
    }

    pub fn force_norm(&self) -> f64 {
        self.force.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoFrame {
    pub time: f64,
    pub bones: BTreeMap<Finger, Pose>,
    pub vertices: Vec<Point3>,
    pub contacts: Vec<ContactEvent>,
    pub ee_pose: Pose,
    pub object_pose: Pose,
}

impl DemoFrame {
    /// Fingertip position of `finger` in the EE-local frame.
    pub fn fingertip_local(&self, finger: Finger) -> Option<Point3> {
        self.bones
            .get(&finger)
            .map(|b| self.ee_pose.inverse_transform_point(&b.position))
    }

    pub fn vertices_local(&self) -> Vec<Point3> {
        self.vertices
            .iter()
            .map(|v| self.ee_pose.inverse_transform_point(v))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub task: String,
    pub rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    mesh: HandMesh,
    frames: Vec<DemoFrame>,
    metadata: Metadata,
}

impl Demonstration {
    /// Validates every invariant and resolves contact vertices.
    pub fn new(mesh: HandMesh, mut frames: Vec<DemoFrame>, metadata: Metadata) -> Result<Self, DemoError> {
        if frames.len() < 2 {
            return Err(DemoError::field(
                "frames",
                format!("need at least 2 frames, got {}", frames.len()),
            ));
        }
        if !(metadata.rate_hz.is_finite() && metadata.rate_hz > 0.0) {
            return Err(DemoError::field("metadata.rate_hz", "must be finite and positive"));
        }
        let bone_set: Vec<Finger> = frames[0].bones.keys().copied().collect();
        let mut irregular = false;
        for (i, frame) in frames.iter_mut().enumerate() {
            if !frame.time.is_finite() {
                return Err(DemoError::frame(i, "t", "non-finite timestamp"));
            }
            if frame.vertices.len() != mesh.vertex_count() {
                return Err(DemoError::frame(
                    i,
                    "vertices",
                    format!(
                        "{} vertices, mesh has {}",
                        frame.vertices.len(),
                        mesh.vertex_count()
                    ),
                ));
            }
            if let Some(v) = frame.vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
                return Err(DemoError::frame(i, format!("vertices[{v}]"), "non-finite coordinate"));
            }
            if frame.bones.keys().copied().ne(bone_set.iter().copied()) {
                return Err(DemoError::frame(
                    i,
                    "bones",
                    "finger set differs from the first frame",
                ));
            }
            for (j, c) in frame.contacts.iter_mut().enumerate() {
                if !c.position.iter().all(|v| v.is_finite()) {
                    return Err(DemoError::frame(i, format!("contacts[{j}].pos"), "non-finite value"));
                }
                if !c.force.iter().all(|v| v.is_finite()) {
                    return Err(DemoError::frame(i, format!("contacts[{j}].force"), "non-finite value"));
                }
                c.vertex = nearest_vertex(&c.position, &frame.vertices)
                    .map_err(|e| DemoError::frame(i, format!("contacts[{j}]"), e.to_string()))?;
            }
        }
        let nominal_dt = 1.0 / metadata.rate_hz;
        for i in 1..frames.len() {
            let dt = frames[i].time - frames[i - 1].time;
            if dt <= 0.0 {
                return Err(DemoError::frame(
                    i,
                    "t",
                    format!(
                        "timestamp {} does not increase (previous {})",
                        frames[i].time,
                        frames[i - 1].time
                    ),
                ));
            }
            irregular |= ((dt - nominal_dt) / nominal_dt).abs() > IRREGULAR_DT_TOL;
        }
        if irregular {
            log::warn!(
                "demonstration {:?}: frame intervals deviate from the {} Hz metadata rate",
                metadata.task,
                metadata.rate_hz
            );
        }
        Ok(Self {
            mesh,
            frames,
            metadata,
        })
    }

    pub fn mesh(&self) -> &HandMesh {
        &self.mesh
    }

    pub fn frames(&self) -> &[DemoFrame] {
        &self.frames
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    /// Fingers with a skeleton bone track.
    pub fn fingers(&self) -> Vec<Finger> {
        self.frames[0].bones.keys().copied().collect()
    }

    /// The first `n` frames (at least 2) as a standalone demonstration.
    pub fn truncated(&self, n: usize) -> Result<Self, DemoError> {
        let frames = self.frames[..n.min(self.frames.len())].to_vec();
        Self::new(self.mesh.clone(), frames, self.metadata.clone())
    }

    /// Contact-free copy (same geometry and poses).
    pub fn without_contacts(&self) -> Self {
        let mut d = self.clone();
        for f in &mut d.frames {
            f.contacts.clear();
        }
        d
    }

    /// Copy with every contact force multiplied by `k`.
    pub fn with_scaled_forces(&self, k: f64) -> Self {
        let mut d = self.clone();
        for f in &mut d.frames {
            for c in &mut f.contacts {
                c.force *= k;
            }
        }
        d
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> crate::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(parse_demonstration(&text)?)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string(&DemoJson::from(self)).expect("demonstration serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> crate::Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| crate::Error::io(path, e))
    }
}
