//! Small geometric value types shared across modules.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Point3 = Vector3<f64>;

/// Tolerance on `|q| - 1` accepted when reading quaternions from files.
pub const UNIT_QUAT_TOL: f64 = 1e-6;

/// Rigid transform: rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Point3,
    pub rotation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Point3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Point3, rotation: UnitQuaternion<f64>) -> Self {
        Self { position, rotation }
    }

    /// Builds a pose from `[w, x, y, z]` quaternion components, rejecting
    /// quaternions that are not unit-norm within [`UNIT_QUAT_TOL`].
    ///
    /// The components are stored as given (no renormalisation) so that a
    /// save/load cycle is bit-exact.
    pub fn from_wxyz(position: [f64; 3], wxyz: [f64; 4]) -> Result<Self, String> {
        if position.iter().chain(wxyz.iter()).any(|v| !v.is_finite()) {
            return Err("non-finite component".into());
        }
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if (norm - 1.0).abs() > UNIT_QUAT_TOL {
            return Err(format!("quaternion norm {norm} is not 1"));
        }
        Ok(Self {
            position: Point3::from(position),
            rotation: UnitQuaternion::new_unchecked(q),
        })
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn position_array(&self) -> [f64; 3] {
        [self.position.x, self.position.y, self.position.z]
    }

    /// Maps a point expressed in this pose's local frame to the parent frame.
    pub fn transform_point(&self, local: &Point3) -> Point3 {
        self.rotation * local + self.position
    }

    /// Maps a parent-frame point into this pose's local frame.
    pub fn inverse_transform_point(&self, world: &Point3) -> Point3 {
        self.rotation.inverse() * (world - self.position)
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.transform_point(&other.position),
            rotation: self.rotation * other.rotation,
        }
    }
}

/// JSON form `{"pos": [x, y, z], "quat": [w, x, y, z]}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoseJson {
    pub pos: [f64; 3],
    pub quat: [f64; 4],
}

impl From<&Pose> for PoseJson {
    fn from(p: &Pose) -> Self {
        PoseJson {
            pos: p.position_array(),
            quat: p.wxyz(),
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    /// Tightest box around `points`; `None` for an empty slice.
    pub fn from_points(points: &[Point3]) -> Option<Self> {
        let first = points.first()?;
        let mut min = [first.x, first.y, first.z];
        let mut max = min;
        for p in &points[1..] {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Some(Self { min, max })
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }

    /// Closed-interval overlap on every axis (touching boxes intersect).
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_roundtrip_keeps_bits() {
        let q = UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1);
        let pose = Pose::new(Point3::new(0.1, 0.2, 0.3), q);
        let back = Pose::from_wxyz(pose.position_array(), pose.wxyz()).unwrap();
        assert_eq!(pose, back);
    }

    #[test]
    fn rejects_non_unit_quaternion() {
        assert!(Pose::from_wxyz([0.0; 3], [1.0, 0.1, 0.0, 0.0]).is_err());
        assert!(Pose::from_wxyz([0.0; 3], [1.0 + 5e-7, 0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn transform_inverse() {
        let pose = Pose::new(
            Point3::new(1.0, -2.0, 0.5),
            UnitQuaternion::from_euler_angles(0.4, 0.1, -0.7),
        );
        let p = Point3::new(0.3, 0.2, -0.1);
        let back = pose.inverse_transform_point(&pose.transform_point(&p));
        assert!((back - p).norm() < 1e-14);
    }

    #[test]
    fn aabb_overlap_is_closed() {
        let a = Aabb {
            min: [0.0; 3],
            max: [1.0; 3],
        };
        let b = Aabb {
            min: [1.0, 0.0, 0.0],
            max: [2.0, 1.0, 1.0],
        };
        let c = Aabb {
            min: [1.5, 0.0, 0.0],
            max: [2.0, 1.0, 1.0],
        };
        assert!(a.intersects(&b));
        assert!(!a.intersects(&c));
    }
}
