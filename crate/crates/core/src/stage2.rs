//! Online fingertip refinement.
//!
//! Each robot finger follows the EE-local fingertip of its assigned human
//! finger, nudged toward nearby contacts by a geodesic- and force-weighted
//! average offset whose norm is clamped. Frame `t` depends only on frames
//! `0..=t`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{GeodesicPose, RetargetConfig};
use crate::demo::{ContactEvent, Demonstration};
use crate::geodesic::{nearest_vertex, Geodesics};
use crate::geometry::{Point3, Pose, PoseJson};
use crate::mesh::Finger;
use crate::stage1::FingerAssignment;
use crate::svg::{LinePlot, Series};
use crate::{Error, Result};

/// Surface the weights are evaluated on: vertex positions (same frame as the
/// fingertip and contacts) plus the geodesic oracle for that topology.
#[derive(Debug, Clone, Copy)]
pub struct Surface<'a> {
    pub vertices: &'a [Point3],
    pub geodesics: &'a Geodesics,
}

/// `‖f‖ exp(-λ d)`.
pub fn kernel(force_norm: f64, distance: f64, lambda: f64) -> f64 {
    force_norm * (-lambda * distance).exp()
}

/// `w = ‖f_j‖ exp(-λ d_geo(s, c_j))`, with `s` snapped to its nearest vertex
/// and the contact at its stored vertex.
pub fn contact_weight(s: &Point3, contact: &ContactEvent, surface: &Surface, lambda: f64) -> Result<f64> {
    let v = nearest_vertex(s, surface.vertices)?;
    let d = surface.geodesics.vertex_distance(v, contact.vertex)?;
    Ok(kernel(contact.force_norm(), d, lambda))
}

/// Scales `v` down to norm `max` if it is longer; direction is kept and the
/// computed norm never exceeds `max`.
pub fn clamp_norm(v: Point3, max: f64) -> Point3 {
    let n = v.norm();
    if n <= max {
        return v;
    }
    let mut scale = max / n;
    let mut out = v * scale;
    // Rounding can leave the rescaled norm an ulp or two above `max`.
    while out.norm() > max {
        scale *= 1.0 - f64::EPSILON;
        out = v * scale;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adjustment {
    /// Clamped offset.
    pub delta: Point3,
    /// Offset before clamping.
    pub raw: Point3,
    /// `Σ_j w_j`.
    pub sum_w: f64,
}

impl Adjustment {
    pub const ZERO: Adjustment = Adjustment {
        delta: Point3::new(0.0, 0.0, 0.0),
        raw: Point3::new(0.0, 0.0, 0.0),
        sum_w: 0.0,
    };
}

/// `Σ w_j (c_j − s) / (Σ w_j + ε)`, clamped to `delta_max`. Exactly zero for
/// an empty contact list.
pub fn weighted_adjustment(s: &Point3, contacts: &[(Point3, f64)], epsilon: f64, delta_max: f64) -> Adjustment {
    if contacts.is_empty() {
        return Adjustment::ZERO;
    }
    let mut num = Point3::zeros();
    let mut sum_w = 0.0;
    for (c, w) in contacts {
        num += (c - s) * *w;
        sum_w += w;
    }
    let raw = num / (sum_w + epsilon);
    Adjustment {
        delta: clamp_norm(raw, delta_max),
        raw,
        sum_w,
    }
}

/// Adjustment of fingertip `s` for the contacts of one frame. Contacts and
/// `s` must be expressed in the frame of `surface.vertices`.
pub fn fingertip_adjustment(
    s: &Point3,
    contacts: &[ContactEvent],
    surface: &Surface,
    config: &RetargetConfig,
) -> Result<Adjustment> {
    if contacts.is_empty() {
        return Ok(Adjustment::ZERO);
    }
    let weighted = contacts
        .iter()
        .map(|c| contact_weight(s, c, surface, config.lambda).map(|w| (c.position, w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(weighted_adjustment(s, &weighted, config.epsilon, config.delta_max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerTarget {
    /// EE-local fingertip of the assigned human finger.
    pub base: Point3,
    pub delta: Point3,
    /// `base + delta`.
    pub target: Point3,
    pub sum_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFrame {
    pub time: f64,
    /// Demonstrated EE pose composed with the configured offset.
    pub ee_target: Pose,
    /// One entry per robot finger.
    pub fingers: Vec<FingerTarget>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetargetedTrajectory {
    /// Human finger of each robot finger.
    pub mapping: Vec<Finger>,
    pub frames: Vec<TrajectoryFrame>,
    pub config_hash: Option<String>,
}

/// Streams the refinement over `demo`. The fingertip used for weighting is the
/// previous frame's adjusted target, starting from the base target.
pub fn run_stage2(demo: &Demonstration, assignment: &FingerAssignment, config: &RetargetConfig) -> Result<RetargetedTrajectory> {
    config.validate()?;
    assignment.validate()?;
    let mapping: Vec<Finger> = assignment.mapping.iter().map(|e| e.human).collect();
    let tracks = demo.fingers();
    if let Some(f) = mapping.iter().find(|f| !tracks.contains(f)) {
        return Err(Error::invalid(format!("assignment maps a robot finger to {f}, which has no bone track")));
    }
    let offset = config.ee_offset.pose()?;
    let mesh = demo.mesh();

    let mut frames = Vec::with_capacity(demo.frames().len());
    let mut current: Option<Vec<Point3>> = None;
    for frame in demo.frames() {
        let bases: Vec<Point3> = mapping
            .iter()
            .map(|f| frame.fingertip_local(*f).expect("bone tracks checked"))
            .collect();
        let s = current.take().unwrap_or_else(|| bases.clone());
        let adjustments = if frame.contacts.is_empty() {
            vec![Adjustment::ZERO; mapping.len()]
        } else {
            let vertices = frame.vertices_local();
            let per_frame;
            let geodesics = match config.geodesic_pose {
                GeodesicPose::Rest => mesh.geodesics(),
                GeodesicPose::PerFrame => {
                    per_frame = mesh.geodesics_for(&frame.vertices)?;
                    &per_frame
                }
            };
            let surface = Surface {
                vertices: &vertices,
                geodesics,
            };
            let inv = frame.ee_pose.rotation.inverse();
            let contacts: Vec<ContactEvent> = frame
                .contacts
                .iter()
                .map(|c| ContactEvent {
                    position: frame.ee_pose.inverse_transform_point(&c.position),
                    force: inv * c.force,
                    vertex: c.vertex,
                })
                .collect();
            s.iter()
                .map(|si| fingertip_adjustment(si, &contacts, &surface, config))
                .collect::<Result<Vec<_>>>()?
        };
        let fingers: Vec<FingerTarget> = bases
            .iter()
            .zip(&adjustments)
            .map(|(b, a)| FingerTarget {
                base: *b,
                delta: a.delta,
                target: b + a.delta,
                sum_w: a.sum_w,
            })
            .collect();
        current = Some(fingers.iter().map(|f| f.target).collect());
        frames.push(TrajectoryFrame {
            time: frame.time,
            ee_target: frame.ee_pose.compose(&offset),
            fingers,
        });
    }
    Ok(RetargetedTrajectory {
        mapping,
        frames,
        config_hash: None,
    })
}

fn arr(p: &Point3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FingerTargetJson {
    base: [f64; 3],
    delta: [f64; 3],
    target: [f64; 3],
    sum_w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameJson {
    t: f64,
    ee_target: PoseJson,
    fingers: Vec<FingerTargetJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryJson {
    mapping: Vec<Finger>,
    frames: Vec<FrameJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

impl RetargetedTrajectory {
    pub fn to_json_string(&self) -> String {
        let json = TrajectoryJson {
            mapping: self.mapping.clone(),
            frames: self
                .frames
                .iter()
                .map(|f| FrameJson {
                    t: f.time,
                    ee_target: PoseJson::from(&f.ee_target),
                    fingers: f
                        .fingers
                        .iter()
                        .map(|g| FingerTargetJson {
                            base: arr(&g.base),
                            delta: arr(&g.delta),
                            target: arr(&g.target),
                            sum_w: g.sum_w,
                        })
                        .collect(),
                })
                .collect(),
            config_hash: self.config_hash.clone(),
        };
        let mut s = serde_json::to_string(&json).expect("trajectory serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let json: TrajectoryJson = serde_path_to_error::deserialize(de).map_err(|e| Error::parse("trajectory JSON", e))?;
        let n = json.mapping.len();
        let frames = json
            .frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                if f.fingers.len() != n {
                    return Err(Error::invalid(format!(
                        "frames[{i}] has {} finger targets for {n} robot fingers",
                        f.fingers.len()
                    )));
                }
                let ee_target = Pose::from_wxyz(f.ee_target.pos, f.ee_target.quat)
                    .map_err(|m| Error::invalid(format!("frames[{i}].ee_target: {m}")))?;
                Ok(TrajectoryFrame {
                    time: f.t,
                    ee_target,
                    fingers: f
                        .fingers
                        .into_iter()
                        .map(|g| FingerTarget {
                            base: g.base.into(),
                            delta: g.delta.into(),
                            target: g.target.into(),
                            sum_w: g.sum_w,
                        })
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mapping: json.mapping,
            frames,
            config_hash: json.config_hash,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// One row per frame and robot finger:
    /// `t, finger, human, base_x..z, delta_x..z, target_x..z, sum_w`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let header = [
            "t", "finger", "human", "base_x", "base_y", "base_z", "delta_x", "delta_y", "delta_z", "target_x", "target_y",
            "target_z", "sum_w",
        ];
        let wrap = |e: csv::Error| Error::Numerical(format!("writing trajectory CSV: {e}"));
        out.write_record(header).map_err(wrap)?;
        for f in &self.frames {
            for (i, g) in f.fingers.iter().enumerate() {
                let mut row = vec![f.time.to_string(), i.to_string(), self.mapping[i].name().to_string()];
                for p in [&g.base, &g.delta, &g.target] {
                    row.extend(p.iter().map(|v| v.to_string()));
                }
                row.push(g.sum_w.to_string());
                out.write_record(&row).map_err(wrap)?;
            }
        }
        out.flush().map_err(|e| Error::Numerical(format!("writing trajectory CSV: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory CSV");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Per-finger `‖δ‖` (mm) over time.
    pub fn delta_plot(&self) -> LinePlot {
        LinePlot {
            title: "Fingertip adjustment".into(),
            x_label: "time (s)".into(),
            y_label: "|delta| (mm)".into(),
            series: (0..self.mapping.len())
                .map(|i| {
                    Series::new(
                        format!("finger {i} ({})", self.mapping[i]),
                        self.frames.iter().map(|f| (f.time, f.fingers[i].delta.norm() * 1e3)).collect(),
                    )
                })
                .collect(),
            equal_aspect: false,
        }
    }

    pub fn max_delta(&self) -> f64 {
        self.frames
            .iter()
            .flat_map(|f| f.fingers.iter().map(|g| g.delta.norm()))
            .fold(0.0, f64::max)
    }
}
