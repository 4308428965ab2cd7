//! JSON form of a demonstration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ContactEvent, DemoError, DemoFrame, Demonstration, Metadata};
use crate::geometry::{Point3, Pose};
use crate::json::{self, reals, to_reals, Real};
use crate::mesh::{labels_to_regions, Finger, MeshJson, Region};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoJson {
    pub mesh: MeshJson,
    pub metadata: MetadataJson,
    pub frames: Vec<FrameJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetadataJson {
    pub task: String,
    pub rate_hz: Real,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameJson {
    pub t: Real,
    pub bones: Vec<BoneJson>,
    pub vertices: Vec<[Real; 3]>,
    #[serde(default)]
    pub contacts: Vec<ContactJson>,
    pub ee_pose: PoseJson,
    pub object_pose: PoseJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoneJson {
    pub finger: Finger,
    pub pos: [Real; 3],
    pub quat: [Real; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContactJson {
    pub pos: [Real; 3],
    pub force: [Real; 3],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoseJson {
    pub pos: [Real; 3],
    pub quat: [Real; 4],
}

impl From<&Pose> for PoseJson {
    fn from(p: &Pose) -> Self {
        PoseJson {
            pos: to_reals(p.position_array()),
            quat: to_reals(p.wxyz()),
        }
    }
}

fn pose(frame: usize, field: &str, p: &PoseJson) -> Result<Pose, DemoError> {
    Pose::from_wxyz(reals(p.pos), reals(p.quat)).map_err(|m| DemoError::frame(frame, field, m))
}

fn point(v: [Real; 3]) -> Point3 {
    Point3::from(reals(v))
}

fn vec3(v: &Point3) -> [Real; 3] {
    to_reals([v.x, v.y, v.z])
}

impl From<&Demonstration> for DemoJson {
    fn from(d: &Demonstration) -> Self {
        DemoJson {
            mesh: d.mesh.to_json(),
            metadata: MetadataJson {
                task: d.metadata.task.clone(),
                rate_hz: Real(d.metadata.rate_hz),
            },
            frames: d
                .frames
                .iter()
                .map(|f| FrameJson {
                    t: Real(f.time),
                    bones: f
                        .bones
                        .iter()
                        .map(|(finger, b)| BoneJson {
                            finger: *finger,
                            pos: to_reals(b.position_array()),
                            quat: to_reals(b.wxyz()),
                        })
                        .collect(),
                    vertices: f.vertices.iter().map(vec3).collect(),
                    contacts: f
                        .contacts
                        .iter()
                        .map(|c| ContactJson {
                            pos: vec3(&c.position),
                            force: vec3(&c.force),
                        })
                        .collect(),
                    ee_pose: PoseJson::from(&f.ee_pose),
                    object_pose: PoseJson::from(&f.object_pose),
                })
                .collect(),
        }
    }
}

/// Parses and validates a demonstration document.
///
/// Bare `NaN`/`Infinity` tokens are accepted syntactically so that the error
/// can name the frame and field carrying them.
pub fn parse_demonstration(text: &str) -> Result<Demonstration, DemoError> {
    let text = json::sanitize_non_finite(text);
    let raw: DemoJson = json::from_str_with_path(&text).map_err(DemoError::Syntax)?;
    raw.into_demonstration()
}

impl DemoJson {
    pub fn into_demonstration(self) -> Result<Demonstration, DemoError> {
        let mut frames = Vec::with_capacity(self.frames.len());
        for (i, f) in self.frames.iter().enumerate() {
            let mut bones = BTreeMap::new();
            for (k, b) in f.bones.iter().enumerate() {
                let p = Pose::from_wxyz(reals(b.pos), reals(b.quat))
                    .map_err(|m| DemoError::frame(i, format!("bones[{k}]"), m))?;
                if bones.insert(b.finger, p).is_some() {
                    return Err(DemoError::frame(
                        i,
                        format!("bones[{k}].finger"),
                        format!("duplicate finger {}", b.finger),
                    ));
                }
            }
            frames.push(DemoFrame {
                time: f.t.0,
                bones,
                vertices: f.vertices.iter().map(|v| point(*v)).collect(),
                contacts: f
                    .contacts
                    .iter()
                    .map(|c| ContactEvent::new(point(c.pos), point(c.force)))
                    .collect(),
                ee_pose: pose(i, "ee_pose", &f.ee_pose)?,
                object_pose: pose(i, "object_pose", &f.object_pose)?,
            });
        }
        let labels = match &self.mesh.finger_labels {
            Some(l) => labels_to_regions(l)?,
            None => nearest_bone_labels(&frames)?,
        };
        let mut mesh_json = self.mesh;
        if mesh_json.skeleton_fingertips.is_none() {
            if let Some(f0) = frames.first() {
                mesh_json.skeleton_fingertips = Some(
                    f0.bones
                        .keys()
                        .filter_map(|&finger| f0.fingertip_local(finger).map(|p| (finger, vec3(&p))))
                        .collect(),
                );
            }
        }
        let mesh = mesh_json.build(labels)?;
        Demonstration::new(
            mesh,
            frames,
            Metadata {
                task: self.metadata.task,
                rate_hz: self.metadata.rate_hz.0,
            },
        )
    }
}

/// Labels each vertex with the finger whose first-frame fingertip bone is
/// nearest (lowest finger on ties). Used when the file carries no labels.
fn nearest_bone_labels(frames: &[DemoFrame]) -> Result<Vec<Region>, DemoError> {
    let f0 = frames
        .first()
        .ok_or_else(|| DemoError::field("frames", "need at least 2 frames, got 0"))?;
    if f0.bones.is_empty() {
        return Err(DemoError::field(
            "mesh.finger_labels",
            "absent, and frame 0 has no bones to derive them from",
        ));
    }
    Ok(f0
        .vertices
        .iter()
        .map(|v| {
            let mut best = (f64::INFINITY, Finger::Thumb);
            for (finger, bone) in &f0.bones {
                let d = (bone.position - v).norm_squared();
                if d < best.0 {
                    best = (d, *finger);
                }
            }
            Region::Finger(best.1)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
          "mesh": {"vertices": [[0,0,0],[1,0,0],[0,1,0]], "triangles": [[0,1,2]],
                   "finger_labels": [0, 1, 2]},
          "metadata": {"task": "unit", "rate_hz": 10},
          "frames": [
            {"t": 0.0, "bones": [{"finger": "thumb", "pos": [0,1,0], "quat": [1,0,0,0]}],
             "vertices": [[0,0,0],[1,0,0],[0,1,0]], "contacts": [],
             "ee_pose": {"pos": [0,0,0], "quat": [1,0,0,0]},
             "object_pose": {"pos": [0,0,0], "quat": [1,0,0,0]}},
            {"t": 0.1, "bones": [{"finger": "thumb", "pos": [0,1,0], "quat": [1,0,0,0]}],
             "vertices": [[0,0,0],[1,0,0],[0,1,0]], "contacts": [],
             "ee_pose": {"pos": [0,0,0], "quat": [1,0,0,0]},
             "object_pose": {"pos": [0,0,0], "quat": [1,0,0,0]}}
          ]}"#
        .to_string()
    }

    #[test]
    fn minimal_file_has_empty_contact_sets() {
        let d = parse_demonstration(&minimal()).unwrap();
        assert_eq!(d.frames().len(), 2);
        assert!(d.frames().iter().all(|f| f.contacts.is_empty()));
        assert_eq!(d.mesh().region(1), Region::Finger(Finger::Thumb));
    }

    #[test]
    fn nan_force_names_the_frame() {
        let mut text = minimal();
        let pos = text.rfind(r#""contacts": []"#).unwrap();
        text.replace_range(
            pos..pos + r#""contacts": []"#.len(),
            r#""contacts": [{"pos": [1,0,0], "force": [0, NaN, 0]}]"#,
        );
        let err = parse_demonstration(&text).unwrap_err();
        assert_eq!(err, DemoError::frame(1, "contacts[0].force", "non-finite value"));
        assert!(err.to_string().starts_with("frame 1: contacts[0].force"));
    }

    #[test]
    fn non_monotone_time_is_rejected() {
        let text = minimal().replace(r#""t": 0.1"#, r#""t": 0.0"#);
        let err = parse_demonstration(&text).unwrap_err();
        assert!(matches!(err, DemoError::Frame { frame: 1, ref field, .. } if field == "t"), "{err}");
    }

    #[test]
    fn non_unit_quaternion_is_rejected() {
        let text = minimal().replacen(r#""quat": [1,0,0,0]}],"#, r#""quat": [1,0.1,0,0]}],"#, 1);
        let err = parse_demonstration(&text).unwrap_err();
        assert!(matches!(err, DemoError::Frame { frame: 0, ref field, .. } if field == "bones[0]"), "{err}");
    }

    #[test]
    fn wrong_vertex_count_is_rejected() {
        let text = minimal().replacen(
            r#""vertices": [[0,0,0],[1,0,0],[0,1,0]], "contacts""#,
            r#""vertices": [[0,0,0],[1,0,0]], "contacts""#,
            1,
        );
        let err = parse_demonstration(&text).unwrap_err();
        assert!(matches!(err, DemoError::Frame { frame: 0, ref field, .. } if field == "vertices"), "{err}");
    }

    #[test]
    fn out_of_range_triangle_is_rejected() {
        let text = minimal().replace("[[0,1,2]]", "[[0,1,7]]");
        assert!(matches!(parse_demonstration(&text), Err(DemoError::Mesh(_))));
    }

    #[test]
    fn schema_violation_reports_path() {
        let text = minimal().replacen(r#""finger": "thumb""#, r#""finger": "sixth""#, 1);
        match parse_demonstration(&text).unwrap_err() {
            DemoError::Syntax(m) => assert!(m.starts_with("frames[0].bones[0].finger"), "{m}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_labels_fall_back_to_nearest_bone() {
        let text = minimal().replace(r#""finger_labels": [0, 1, 2]"#, r#""finger_labels": null"#);
        let d = parse_demonstration(&text).unwrap();
        assert!(d.mesh().labels().iter().all(|r| *r == Region::Finger(Finger::Thumb)));
        assert_eq!(
            d.mesh().skeleton_fingertips()[&Finger::Thumb],
            Point3::new(0.0, 1.0, 0.0)
        );
    }

    #[test]
    fn contacts_are_projected() {
        let text = minimal().replacen(
            r#""contacts": []"#,
            r#""contacts": [{"pos": [0.9, 0.05, 0], "force": [0, 1, 0]}]"#,
            1,
        );
        let d = parse_demonstration(&text).unwrap();
        assert_eq!(d.frames()[0].contacts[0].vertex, 1);
        assert_eq!(d.frames()[0].contacts[0].force_norm(), 1.0);
    }
}
