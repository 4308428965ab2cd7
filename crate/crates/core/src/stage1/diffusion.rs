//! Contact-force diffusion over the hand surface and per-finger loads.

use std::collections::BTreeMap;

use crate::config::{GeodesicPose, RetargetConfig};
use crate::demo::{DemoFrame, Demonstration};
use crate::geodesic::{GeodesicError, Geodesics};
use crate::mesh::{Finger, HandMesh, Region};
use crate::{Error, Result};

/// Accumulated heat per vertex, optionally with the per-frame terms.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatField {
    pub values: Vec<f64>,
    pub per_frame: Option<Vec<Vec<f64>>>,
}

impl HeatField {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    Ok(())
}

/// Adds `Σ_c ‖f_c‖ exp(-λ d(v, c))` for the contacts of one frame to `out`.
fn accumulate_frame(frame: &DemoFrame, geodesics: &Geodesics, lambda: f64, out: &mut [f64]) -> Result<()> {
    for c in &frame.contacts {
        let magnitude = c.force_norm();
        let field = geodesics.field(c.vertex)?;
        for (v, (h, &d)) in out.iter_mut().zip(&field.distances).enumerate() {
            if !d.is_finite() {
                return Err(GeodesicError::Unreachable { from: c.vertex, to: v }.into());
            }
            *h += magnitude * (-lambda * d).exp();
        }
    }
    Ok(())
}

fn frame_geodesics<'a>(
    mesh: &'a HandMesh,
    frame: &DemoFrame,
    pose: GeodesicPose,
    scratch: &'a mut Option<Geodesics>,
) -> Result<&'a Geodesics> {
    Ok(match pose {
        GeodesicPose::Rest => mesh.geodesics(),
        GeodesicPose::PerFrame => scratch.insert(mesh.geodesics_for(&frame.vertices)?),
    })
}

/// Heat accumulated over every frame: `h_v = Σ_t Σ_c ‖f_c‖ exp(-λ d_geo(v, c))`.
pub fn diffuse_forces(demo: &Demonstration, config: &RetargetConfig) -> Result<HeatField> {
    diffuse(demo, config, false)
}

/// As [`diffuse_forces`], also keeping each frame's contribution.
pub fn diffuse_forces_per_frame(demo: &Demonstration, config: &RetargetConfig) -> Result<HeatField> {
    diffuse(demo, config, true)
}

fn diffuse(demo: &Demonstration, config: &RetargetConfig, keep_frames: bool) -> Result<HeatField> {
    check_lambda(config.lambda)?;
    let mesh = demo.mesh();
    let n = mesh.vertex_count();
    let mut values = vec![0.0; n];
    let mut per_frame = keep_frames.then(Vec::new);
    for frame in demo.frames() {
        if frame.contacts.is_empty() {
            if let Some(pf) = per_frame.as_mut() {
                pf.push(vec![0.0; n]);
            }
            continue;
        }
        let mut scratch = None;
        let geodesics = frame_geodesics(mesh, frame, config.geodesic_pose, &mut scratch)?;
        match per_frame.as_mut() {
            Some(pf) => {
                let mut h = vec![0.0; n];
                accumulate_frame(frame, geodesics, config.lambda, &mut h)?;
                for (acc, v) in values.iter_mut().zip(&h) {
                    *acc += v;
                }
                pf.push(h);
            }
            None => accumulate_frame(frame, geodesics, config.lambda, &mut values)?,
        }
    }
    Ok(HeatField { values, per_frame })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerLoads {
    /// Every finger, zero when no heat reached it.
    pub fingers: BTreeMap<Finger, f64>,
    /// Heat on palm vertices; reported but never allocated.
    pub palm: f64,
}

impl FingerLoads {
    pub fn total(&self) -> f64 {
        self.fingers.values().sum::<f64>() + self.palm
    }
}

/// `F_r = Σ_{v ∈ R_r} h_v` per finger region.
pub fn finger_loads(heat: &HeatField, mesh: &HandMesh) -> Result<FingerLoads> {
    if heat.values.len() != mesh.vertex_count() {
        return Err(Error::invalid(format!(
            "heat field has {} values for {} vertices",
            heat.values.len(),
            mesh.vertex_count()
        )));
    }
    let mut fingers: BTreeMap<Finger, f64> = Finger::ALL.into_iter().map(|f| (f, 0.0)).collect();
    let mut palm = 0.0;
    for (h, region) in heat.values.iter().zip(mesh.labels()) {
        match region {
            Region::Palm => palm += h,
            Region::Finger(f) => *fingers.get_mut(f).expect("all fingers present") += h,
        }
    }
    Ok(FingerLoads { fingers, palm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{synth_demo, ContactEvent, Metadata};
    use crate::geometry::{Point3, Pose};
    use nalgebra::Vector3;

    /// Path 0-1-2-3 of unit-ish spacing built from a triangle strip.
    fn strip_mesh() -> HandMesh {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.5, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.5, 1.0, 0.0),
        ];
        let labels = vec![
            Region::Finger(Finger::Thumb),
            Region::Finger(Finger::Index),
            Region::Palm,
            Region::Finger(Finger::Index),
        ];
        HandMesh::new(v, vec![[0, 1, 2], [1, 3, 2]], labels, BTreeMap::new()).unwrap()
    }

    fn demo_with(mesh: HandMesh, contacts: Vec<Vec<(usize, f64)>>) -> Demonstration {
        let frames = contacts
            .into_iter()
            .enumerate()
            .map(|(i, cs)| DemoFrame {
                time: i as f64,
                bones: BTreeMap::new(),
                vertices: mesh.vertices().to_vec(),
                contacts: cs
                    .into_iter()
                    .map(|(v, f)| ContactEvent::new(mesh.vertices()[v], Vector3::new(0.0, f, 0.0)))
                    .collect(),
                ee_pose: Pose::identity(),
                object_pose: Pose::identity(),
            })
            .collect();
        Demonstration::new(
            mesh,
            frames,
            Metadata {
                task: "unit".into(),
                rate_hz: 1.0,
            },
        )
        .unwrap()
    }

    fn cfg(lambda: f64) -> RetargetConfig {
        RetargetConfig {
            lambda,
            ..RetargetConfig::default()
        }
    }

    #[test]
    fn empty_contacts_give_zero_field() {
        let d = demo_with(strip_mesh(), vec![vec![], vec![]]);
        let h = diffuse_forces(&d, &cfg(50.0)).unwrap();
        assert!(h.values.iter().all(|v| *v == 0.0));
        let loads = finger_loads(&h, d.mesh()).unwrap();
        assert!(loads.fingers.values().all(|v| *v == 0.0));
        assert_eq!(loads.palm, 0.0);
    }

    #[test]
    fn flat_kernel_spreads_force_uniformly() {
        let d = demo_with(strip_mesh(), vec![vec![(3, 2.0)], vec![]]);
        let h = diffuse_forces(&d, &cfg(0.0)).unwrap();
        assert_eq!(h.values, vec![2.0; 4]);
    }

    #[test]
    fn neighbour_value_and_dense_oracle() {
        let d = demo_with(strip_mesh(), vec![vec![(0, 2.0)], vec![(3, 1.5), (0, 0.5)]]);
        let h = diffuse_forces(&d, &cfg(1.0)).unwrap();
        // Vertex 1 is 0.5 m from vertex 0.
        assert!((h.values[1] - (2.0 * (-0.5f64).exp() + 0.5 * (-0.5f64).exp() + 1.5 * (-1.0f64).exp())).abs() < 1e-15);

        // Dense evaluation: distance matrix by Floyd–Warshall, then every
        // vertex-contact pair.
        let mesh = d.mesh();
        let n = mesh.vertex_count();
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for (a, b, w) in mesh.graph().edges() {
            dist[a][b] = w;
            dist[b][a] = w;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if dist[i][k] + dist[k][j] < dist[i][j] {
                        dist[i][j] = dist[i][k] + dist[k][j];
                    }
                }
            }
        }
        for v in 0..n {
            let mut expected = 0.0;
            for f in d.frames() {
                for c in &f.contacts {
                    expected += c.force_norm() * (-dist[v][c.vertex]).exp();
                }
            }
            assert!((h.values[v] - expected).abs() < 1e-12, "vertex {v}");
        }
    }

    #[test]
    fn loads_partition_the_field() {
        let d = demo_with(strip_mesh(), vec![vec![(0, 2.0)], vec![(2, 1.0)]]);
        let h = diffuse_forces(&d, &cfg(3.0)).unwrap();
        let loads = finger_loads(&h, d.mesh()).unwrap();
        assert!((loads.total() - h.total()).abs() < 1e-12);
        assert_eq!(loads.fingers[&Finger::Thumb], h.values[0]);
        assert_eq!(loads.fingers[&Finger::Index], h.values[1] + h.values[3]);
        assert_eq!(loads.palm, h.values[2]);
        assert_eq!(loads.fingers[&Finger::Pinky], 0.0);
    }

    #[test]
    fn single_vertex_heat_is_that_fingers_load() {
        let mesh = strip_mesh();
        let heat = HeatField {
            values: vec![0.0, 0.0, 0.0, 4.5],
            per_frame: None,
        };
        let loads = finger_loads(&heat, &mesh).unwrap();
        assert_eq!(loads.fingers[&Finger::Index], 4.5);
        assert!(loads.fingers.iter().filter(|(f, _)| **f != Finger::Index).all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn per_frame_terms_sum_to_total() {
        let d = synth_demo("pinch_lift", 5, 5).unwrap();
        let c = cfg(50.0);
        let total = diffuse_forces(&d, &c).unwrap();
        let split = diffuse_forces_per_frame(&d, &c).unwrap();
        let frames = split.per_frame.as_ref().unwrap();
        assert_eq!(frames.len(), d.frames().len());
        for v in 0..total.values.len() {
            let s: f64 = frames.iter().map(|f| f[v]).sum();
            assert!((s - total.values[v]).abs() <= 1e-12 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn per_frame_geodesics_are_supported() {
        let d = synth_demo("pour", 5, 5).unwrap();
        let rest = diffuse_forces(&d, &cfg(50.0)).unwrap();
        let deformed = diffuse_forces(
            &d,
            &RetargetConfig {
                geodesic_pose: GeodesicPose::PerFrame,
                ..cfg(50.0)
            },
        )
        .unwrap();
        assert!(deformed.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        // Rigid finger curl keeps in-strip edge lengths, so the two agree on
        // most of the surface but not everywhere (palm-to-finger edges stretch).
        assert!(rest.values.iter().zip(&deformed.values).any(|(a, b)| a != b));
    }

    #[test]
    fn negative_lambda_is_rejected() {
        let d = demo_with(strip_mesh(), vec![vec![], vec![]]);
        assert!(diffuse_forces(&d, &cfg(-1.0)).is_err());
    }
}
