//! Fingertip workspace envelopes in the end-effector frame.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::demo::Demonstration;
use crate::geometry::{Aabb, Point3};
use crate::mesh::Finger;
use crate::procrustes::align_to_xy;
use crate::sim::{random_pressure, RobotHand};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceEnvelope {
    pub centroid: Point3,
    pub points: Vec<Point3>,
    pub bounds: Aabb,
    /// Every point coincides; the box has zero extent.
    pub degenerate: bool,
}

impl WorkspaceEnvelope {
    pub fn from_points(points: Vec<Point3>) -> Result<Self> {
        let bounds = Aabb::from_points(&points).ok_or_else(|| Error::invalid("workspace envelope needs at least one point"))?;
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid("workspace envelope has a non-finite point"));
        }
        let centroid = points.iter().sum::<Point3>() / points.len() as f64;
        let degenerate = points.iter().all(|p| *p == points[0]);
        Ok(Self {
            centroid,
            points,
            bounds,
            degenerate,
        })
    }

    pub fn overlaps(&self, other: &WorkspaceEnvelope) -> bool {
        self.bounds.intersects(&other.bounds)
    }
}

/// Fingertip trajectory of `finger` in the EE frame, plane-fitted and rotated
/// so that its plane is parallel to the EE xy-plane (centroid preserved).
pub fn workspace_envelope_human(demo: &Demonstration, finger: Finger) -> Result<WorkspaceEnvelope> {
    let local: Vec<Point3> = demo
        .frames()
        .iter()
        .map(|f| f.fingertip_local(finger))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::invalid(format!("demonstration has no {finger} bone track")))?;
    let aligned = align_to_xy(&local);
    let mut env = WorkspaceEnvelope::from_points(aligned.points)?;
    env.degenerate |= aligned.degenerate;
    Ok(env)
}

/// Tips of robot finger `finger` (EE frame) under the given pressures.
pub fn envelope_from_pressures(hand: &RobotHand, finger: usize, pressures: &[[f64; 3]]) -> Result<WorkspaceEnvelope> {
    if finger >= hand.finger_count() {
        return Err(Error::invalid(format!(
            "robot finger {finger} out of range (hand has {})",
            hand.finger_count()
        )));
    }
    WorkspaceEnvelope::from_points(pressures.iter().map(|p| hand.fingertip(finger, p)).collect())
}

/// Envelope of robot finger `finger` from `n_samples` uniform random
/// pressures. Each finger draws from its own stream of the seeded generator.
pub fn workspace_envelope_robot(hand: &RobotHand, finger: usize, n_samples: usize, seed: u64) -> Result<WorkspaceEnvelope> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(finger as u64);
    let limits = hand.finger.limits;
    let pressures: Vec<[f64; 3]> = (0..n_samples).map(|_| random_pressure(&mut rng, &limits)).collect();
    envelope_from_pressures(hand, finger, &pressures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::synth_demo;
    use crate::sim::{sample_dataset, SpineFinger};

    fn hand() -> RobotHand {
        RobotHand::ring(3, 0.03, 0.07, SpineFinger::default()).unwrap()
    }

    #[test]
    fn midpoint_pressure_gives_one_point() {
        let h = hand();
        let env = envelope_from_pressures(&h, 0, &[h.finger.limits.midpoint()]).unwrap();
        assert_eq!(env.points.len(), 1);
        assert!(env.degenerate);
        assert_eq!(env.bounds.extent(), [0.0; 3]);
        assert!((env.centroid - Point3::new(0.03, 0.0, 0.15)).norm() < 1e-12);
    }

    #[test]
    fn large_sample_contains_straight_tip() {
        // The straight tip is the unique highest point of the workspace, so a
        // random cloud can only approach it from below: containment holds in
        // x and y, and in z up to the height lost by the least-bent sample.
        let h = hand();
        for i in 0..3 {
            let env = workspace_envelope_robot(&h, i, 2000, 11).unwrap();
            let straight = h.fingertip(i, &h.finger.limits.midpoint());
            let b = env.bounds;
            for k in 0..2 {
                assert!(b.min[k] <= straight[k] && straight[k] <= b.max[k]);
            }
            assert!(b.min[2] <= straight.z);
            assert!(straight.z - b.max[2] < 1e-5, "gap {}", straight.z - b.max[2]);
        }
    }

    #[test]
    fn seeds_differ_but_boxes_overlap() {
        let h = hand();
        let a = workspace_envelope_robot(&h, 1, 200, 1).unwrap();
        let b = workspace_envelope_robot(&h, 1, 200, 2).unwrap();
        assert_ne!(a.points, b.points);
        assert!(a.overlaps(&b));
        assert_eq!(a, workspace_envelope_robot(&h, 1, 200, 1).unwrap());
    }

    #[test]
    fn dataset_box_contains_envelope_box() {
        // Same finger in its own base frame: the dataset's displacement box
        // shifted by the straight tip must contain the sampled tip box.
        let f = SpineFinger::default();
        let single = RobotHand {
            finger: f,
            bases: vec![crate::geometry::Pose::identity()],
        };
        let env = workspace_envelope_robot(&single, 0, 500, 3).unwrap();
        let data = sample_dataset(&f, 10_000, 4, 0.0).unwrap();
        let straight = crate::sim::straight_tip(&f.config);
        let tips: Vec<Point3> = data.samples.iter().map(|s| straight + s.displacement).collect();
        let data_box = Aabb::from_points(&tips).unwrap();
        let grown = Aabb {
            min: data_box.min.map(|v| v - 1e-4),
            max: data_box.max.map(|v| v + 1e-4),
        };
        assert!(grown.contains_box(&env.bounds));
    }

    #[test]
    fn human_envelope_is_flat_and_centred() {
        let d = synth_demo("pinch_lift", 0, 5).unwrap();
        let env = workspace_envelope_human(&d, Finger::Index).unwrap();
        assert_eq!(env.points.len(), d.frames().len());
        let mean = env.points.iter().sum::<Point3>() / env.points.len() as f64;
        assert_eq!(env.centroid, mean);
        let raw: Vec<Point3> = d.frames().iter().map(|f| f.fingertip_local(Finger::Index).unwrap()).collect();
        let raw_mean = raw.iter().sum::<Point3>() / raw.len() as f64;
        assert!((raw_mean - mean).norm() < 1e-12);
        assert!(env.bounds.extent()[2] < 1e-12);
        for p in &env.points {
            assert!(env.bounds.contains(p));
        }
    }

    #[test]
    fn stationary_tip_has_negligible_extent() {
        let d = synth_demo("pinch_lift", 0, 5).unwrap().truncated(2).unwrap();
        // The first frames are before the grasp: the curl is constant.
        let env = workspace_envelope_human(&d, Finger::Pinky).unwrap();
        assert!(env.bounds.extent().iter().all(|e| *e < 1e-12));
    }
}
