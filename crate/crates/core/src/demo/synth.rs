//! Deterministic synthetic demonstrations.
//!
//! The hand is a flat 5x3 palm grid (in the local y = 0 plane, fingers along
//! +z, palm facing +y) with one zigzag triangle strip per finger. Fingers curl
//! rigidly about their base toward the palm side while the wrist follows a
//! template-specific motion.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ContactEvent, DemoError, DemoFrame, Demonstration, Metadata};
use crate::geometry::{Point3, Pose};
use crate::mesh::{Finger, HandMesh, Region};

const PALM_COLS: usize = 5;
const PALM_ROWS: usize = 3;
const PALM_DX: f64 = 0.02;
const PALM_DZ: f64 = 0.045;
const STRIP_HALF_WIDTH: f64 = 0.007;
/// Bound on the per-contact position jitter (metres).
const CONTACT_JITTER: f64 = 0.0005;
const REST_CURL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    PinchLift,
    Twist,
    Pour,
}

impl Template {
    pub const ALL: [Template; 3] = [Template::PinchLift, Template::Twist, Template::Pour];

    pub fn name(self) -> &'static str {
        match self {
            Template::PinchLift => "pinch_lift",
            Template::Twist => "twist",
            Template::Pour => "pour",
        }
    }
}

impl FromStr for Template {
    type Err = DemoError;

    fn from_str(s: &str) -> Result<Self, DemoError> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| DemoError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub frames: usize,
    pub rate_hz: f64,
    /// Vertices per finger strip (at least 2).
    pub mesh_resolution: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            frames: 60,
            rate_hz: 30.0,
            mesh_resolution: 6,
        }
    }
}

struct FingerGeom {
    finger: Finger,
    origin: Point3,
    dir: Vector3<f64>,
    curl_axis: Vector3<f64>,
    length: f64,
    first_vertex: usize,
}

impl FingerGeom {
    fn tip_local(&self) -> Point3 {
        self.origin + self.dir * self.length
    }
}

fn palm_index(row: usize, col: usize) -> usize {
    row * PALM_COLS + col
}

fn palm_point(row: usize, col: usize) -> Point3 {
    Point3::new(-0.04 + PALM_DX * col as f64, 0.0, PALM_DZ * row as f64)
}

struct HandModel {
    mesh: HandMesh,
    fingers: Vec<FingerGeom>,
}

fn build_hand(resolution: usize) -> Result<HandModel, DemoError> {
    if resolution < 2 {
        return Err(DemoError::field(
            "mesh_resolution",
            format!("need at least 2 vertices per finger, got {resolution}"),
        ));
    }
    let mut vertices = Vec::new();
    let mut labels = Vec::new();
    let mut triangles = Vec::new();
    for r in 0..PALM_ROWS {
        for c in 0..PALM_COLS {
            vertices.push(palm_point(r, c));
            labels.push(Region::Palm);
        }
    }
    for r in 0..PALM_ROWS - 1 {
        for c in 0..PALM_COLS - 1 {
            let (a, b) = (palm_index(r, c), palm_index(r, c + 1));
            let (d, e) = (palm_index(r + 1, c), palm_index(r + 1, c + 1));
            triangles.push([a, b, e]);
            triangles.push([a, e, d]);
        }
    }

    let palm_normal = Vector3::y();
    let top = PALM_ROWS - 1;
    let mut bases: Vec<(Finger, usize, usize, Vector3<f64>, f64, Vector3<f64>)> = vec![(
        Finger::Thumb,
        palm_index(0, 0),
        palm_index(1, 0),
        Vector3::new(-0.55, 0.35, 0.75).normalize(),
        0.06,
        Vector3::new(0.7, 0.7, 0.0).normalize(),
    )];
    for (k, (finger, length)) in [
        (Finger::Index, 0.07),
        (Finger::Middle, 0.08),
        (Finger::Ring, 0.075),
        (Finger::Pinky, 0.06),
    ]
    .into_iter()
    .enumerate()
    {
        bases.push((
            finger,
            palm_index(top, k),
            palm_index(top, k + 1),
            Vector3::z(),
            length,
            palm_normal,
        ));
    }

    let mut fingers = Vec::new();
    for (finger, a, b, dir, length, curl_toward) in bases {
        let (pa, pb) = (vertices[a], vertices[b]);
        let origin = (pa + pb) / 2.0;
        let edge = pb - pa;
        let lateral = (edge - dir * dir.dot(&edge)).normalize();
        let curl_axis = dir.cross(&curl_toward).normalize();
        let first_vertex = vertices.len();
        for j in 0..resolution {
            let along = length * (j + 1) as f64 / resolution as f64;
            let side = if j % 2 == 0 { -1.0 } else { 1.0 };
            vertices.push(origin + dir * along + lateral * (side * STRIP_HALF_WIDTH));
            labels.push(Region::Finger(finger));
        }
        triangles.push([a, b, first_vertex]);
        triangles.push([b, first_vertex, first_vertex + 1]);
        for j in 0..resolution - 2 {
            let v = first_vertex + j;
            triangles.push([v, v + 1, v + 2]);
        }
        fingers.push(FingerGeom {
            finger,
            origin,
            dir,
            curl_axis,
            length,
            first_vertex,
        });
    }
    let tips: BTreeMap<Finger, Point3> = fingers.iter().map(|g| (g.finger, g.tip_local())).collect();
    let mesh = HandMesh::new(vertices, triangles, labels, tips)?;
    Ok(HandModel { mesh, fingers })
}

/// The rest-pose synthetic hand with `resolution` vertices per finger strip.
pub fn hand_mesh(resolution: usize) -> Result<HandMesh, DemoError> {
    Ok(build_hand(resolution)?.mesh)
}

fn smoothstep(x: f64, lo: f64, hi: f64) -> f64 {
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Grasp level in [0, 1] at normalised time `s`, shifted by `offset`.
fn grasp(s: f64, offset: f64) -> f64 {
    smoothstep(s, 0.2 + offset, 0.35 + offset) * (1.0 - smoothstep(s, 0.85 + offset, 0.97 + offset))
}

#[derive(Clone, Copy)]
enum Site {
    Tip(Finger),
    Second(Finger),
    Mid(Finger),
    PalmCenter,
}

struct ContactSpec {
    site: Site,
    force: f64,
    tangential: f64,
}

struct Profile {
    curl: [f64; 5],
    contacts: Vec<ContactSpec>,
}

fn spec(site: Site, force: f64) -> ContactSpec {
    ContactSpec {
        site,
        force,
        tangential: 0.0,
    }
}

fn profile(template: Template) -> Profile {
    use Finger::*;
    match template {
        Template::PinchLift => Profile {
            curl: [0.5, 0.6, 0.35, 0.25, 0.2],
            contacts: vec![
                spec(Site::Tip(Thumb), 2.0),
                spec(Site::Tip(Index), 2.0),
                spec(Site::Tip(Middle), 0.4),
            ],
        },
        Template::Twist => {
            let twist = |site, force| ContactSpec {
                site,
                force,
                tangential: 0.4,
            };
            Profile {
                curl: [0.6, 0.65, 0.3, 0.2, 0.2],
                contacts: vec![
                    twist(Site::Tip(Thumb), 2.5),
                    twist(Site::Tip(Index), 2.5),
                    twist(Site::Second(Thumb), 0.8),
                    twist(Site::Second(Index), 0.8),
                    spec(Site::Tip(Middle), 0.3),
                ],
            }
        }
        Template::Pour => Profile {
            curl: [0.7, 1.0, 1.0, 1.0, 1.0],
            contacts: vec![
                spec(Site::Tip(Thumb), 1.5),
                spec(Site::Mid(Index), 1.2),
                spec(Site::Tip(Index), 0.8),
                spec(Site::Mid(Middle), 1.2),
                spec(Site::Tip(Middle), 0.8),
                spec(Site::Mid(Ring), 1.2),
                spec(Site::Tip(Ring), 0.8),
                spec(Site::Mid(Pinky), 1.2),
                spec(Site::Tip(Pinky), 0.8),
                spec(Site::PalmCenter, 1.0),
            ],
        },
    }
}

fn ee_pose(template: Template, s: f64, start: Point3) -> Pose {
    // Fingers pointing down at the object.
    let down = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI);
    match template {
        Template::PinchLift => Pose::new(start + Vector3::z() * (0.12 * smoothstep(s, 0.4, 0.8)), down),
        Template::Twist => {
            let turn = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 1.2 * smoothstep(s, 0.35, 0.85));
            Pose::new(start, down * turn)
        }
        Template::Pour => {
            let k = smoothstep(s, 0.4, 0.8);
            let tilt = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), 1.6 * k);
            Pose::new(start + Vector3::new(0.05, 0.0, 0.05) * k, tilt * down)
        }
    }
}

/// Synthetic demonstration for the named template with default options apart
/// from the finger-strip resolution.
pub fn synth_demo(task: &str, seed: u64, mesh_resolution: usize) -> Result<Demonstration, DemoError> {
    let template = Template::from_str(task)?;
    synth_demo_with(
        template,
        seed,
        &SynthOptions {
            mesh_resolution,
            ..SynthOptions::default()
        },
    )
}

pub fn synth_demo_with(template: Template, seed: u64, opts: &SynthOptions) -> Result<Demonstration, DemoError> {
    if opts.frames < 2 {
        return Err(DemoError::field("frames", format!("need at least 2 frames, got {}", opts.frames)));
    }
    let hand = build_hand(opts.mesh_resolution)?;
    let m = opts.mesh_resolution;
    let geom = |f: Finger| &hand.fingers[f.index()];
    let site_vertex = |site: Site| match site {
        Site::Tip(f) => geom(f).first_vertex + m - 1,
        Site::Second(f) => geom(f).first_vertex + m - 2,
        Site::Mid(f) => geom(f).first_vertex + m / 2,
        Site::PalmCenter => palm_index(1, 2),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Point3::new(
        0.3 + rng.random_range(-0.02..0.02),
        rng.random_range(-0.02..0.02),
        0.25 + rng.random_range(-0.02..0.02),
    );
    let prof = profile(template);
    let jitter: Vec<(f64, f64)> = prof
        .contacts
        .iter()
        .map(|_| (rng.random_range(0.85..1.15), rng.random_range(-0.02..0.02)))
        .collect();

    let object_local = Pose::new(Point3::new(-0.015, 0.035, 0.08), UnitQuaternion::identity());
    let grasp_start = 0.3;
    let last = (opts.frames - 1) as f64;
    let rest = hand.mesh.vertices();

    let mut frames = Vec::with_capacity(opts.frames);
    for i in 0..opts.frames {
        let s = i as f64 / last;
        let g = grasp(s, 0.0);
        let ee = ee_pose(template, s, start);

        let mut local = rest.to_vec();
        let mut bones = BTreeMap::new();
        for fg in &hand.fingers {
            let angle = REST_CURL + prof.curl[fg.finger.index()] * g;
            let curl = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(fg.curl_axis), angle);
            for v in &mut local[fg.first_vertex..fg.first_vertex + m] {
                *v = fg.origin + curl * (*v - fg.origin);
            }
            let align = UnitQuaternion::rotation_between(&Vector3::z(), &fg.dir).unwrap_or_else(UnitQuaternion::identity);
            let tip = Pose::new(fg.origin + curl * (fg.dir * fg.length), curl * align);
            bones.insert(fg.finger, ee.compose(&tip));
        }
        let vertices: Vec<Point3> = local.iter().map(|v| ee.transform_point(v)).collect();

        let mut contacts = Vec::new();
        for (spec, &(scale, offset)) in prof.contacts.iter().zip(&jitter) {
            let level = grasp(s, offset);
            // Positions are jittered for every frame so the RNG stream does not
            // depend on which contacts happen to be active.
            let dp = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ) * (CONTACT_JITTER / 3f64.sqrt());
            if level <= 0.5 {
                continue;
            }
            let magnitude = spec.force * scale * (level - 0.5) / 0.5;
            let dir_local = Vector3::new(spec.tangential, -1.0, 0.0).normalize();
            let force = ee.rotation * dir_local * magnitude;
            contacts.push(ContactEvent::new(vertices[site_vertex(spec.site)] + dp, force));
        }

        let held = if s < grasp_start {
            ee_pose(template, grasp_start, start)
        } else {
            ee
        };
        frames.push(DemoFrame {
            time: i as f64 / opts.rate_hz,
            bones,
            vertices,
            contacts,
            ee_pose: ee,
            object_pose: held.compose(&object_local),
        });
    }
    Demonstration::new(
        hand.mesh,
        frames,
        Metadata {
            task: template.name().to_string(),
            rate_hz: opts.rate_hz,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::parse_demonstration;
    use proptest::prelude::*;

    fn force_by_region(d: &Demonstration) -> BTreeMap<Region, f64> {
        let mut out = BTreeMap::new();
        for f in d.frames() {
            for c in &f.contacts {
                *out.entry(d.mesh().region(c.vertex)).or_insert(0.0) += c.force.norm();
            }
        }
        out
    }

    #[test]
    fn same_seed_is_byte_identical() {
        for t in Template::ALL {
            let a = synth_demo(t.name(), 7, 4).unwrap().to_json_string();
            let b = synth_demo(t.name(), 7, 4).unwrap().to_json_string();
            assert_eq!(a, b);
            let c = synth_demo(t.name(), 8, 4).unwrap().to_json_string();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn twist_force_is_thumb_and_index_dominant() {
        for seed in 0..20 {
            let d = synth_demo("twist", seed, 5).unwrap();
            let by = force_by_region(&d);
            let total: f64 = by.values().sum();
            let ti = by.get(&Region::Finger(Finger::Thumb)).unwrap_or(&0.0)
                + by.get(&Region::Finger(Finger::Index)).unwrap_or(&0.0);
            assert!(total > 0.0);
            assert!(ti / total >= 0.8, "seed {seed}: {}", ti / total);
        }
    }

    #[test]
    fn resolution_four_vertex_count() {
        let mesh = hand_mesh(4).unwrap();
        assert_eq!(mesh.vertex_count(), 5 * 4 + PALM_ROWS * PALM_COLS);
        assert_eq!(mesh.graph().component_count(), 1);
        for f in Finger::ALL {
            let n = mesh.labels().iter().filter(|r| **r == Region::Finger(f)).count();
            assert_eq!(n, 4);
        }
    }

    #[test]
    fn unknown_template_and_bad_resolution() {
        assert_eq!(
            synth_demo("juggle", 0, 4).unwrap_err(),
            DemoError::UnknownTemplate("juggle".into())
        );
        assert!(synth_demo("pour", 0, 1).is_err());
    }

    #[test]
    fn contact_free_frames_bracket_the_grasp() {
        for t in Template::ALL {
            let d = synth_demo(t.name(), 3, 6).unwrap();
            assert!(d.frames().first().unwrap().contacts.is_empty());
            assert!(d.frames().last().unwrap().contacts.is_empty());
            assert!(d.frames().iter().any(|f| !f.contacts.is_empty()));
        }
    }

    #[test]
    fn pour_loads_every_finger_and_the_palm() {
        let by = force_by_region(&synth_demo("pour", 1, 6).unwrap());
        assert!(by.contains_key(&Region::Palm));
        for f in Finger::ALL {
            assert!(by[&Region::Finger(f)] > 0.0, "{f}");
        }
    }

    #[test]
    fn deformed_frames_keep_a_valid_surface() {
        let d = synth_demo("pour", 2, 6).unwrap();
        for f in d.frames() {
            d.mesh().geodesics_for(&f.vertices).unwrap();
        }
    }

    #[test]
    fn bones_match_curled_tip_vertices() {
        // The tip bone lies on the finger axis, within half a strip width of
        // the last strip vertex.
        let d = synth_demo("pinch_lift", 4, 6).unwrap();
        for f in d.frames() {
            for finger in Finger::ALL {
                let tip = f.bones[&finger].position;
                let last = d
                    .mesh()
                    .labels()
                    .iter()
                    .rposition(|r| *r == Region::Finger(finger))
                    .unwrap();
                assert!((f.vertices[last] - tip).norm() <= STRIP_HALF_WIDTH + 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn synthetic_demos_round_trip(t in 0usize..3, seed in any::<u64>(), res in 2usize..9) {
            let d = synth_demo(Template::ALL[t].name(), seed, res).unwrap();
            let back = parse_demonstration(&d.to_json_string()).unwrap();
            prop_assert_eq!(&back, &d);
            for f in back.frames() {
                for c in &f.contacts {
                    prop_assert_eq!(c.vertex, crate::geodesic::nearest_vertex(&c.position, &f.vertices).unwrap());
                    prop_assert!(c.force_norm().is_finite());
                }
                prop_assert_eq!(f.vertices.len(), back.mesh().vertex_count());
            }
        }
    }
}
