//! Hand surface mesh with per-vertex finger regions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesic::{nearest_vertex, GeodesicError, GeodesicField, Geodesics, MeshGraph};
use crate::geometry::Point3;
use crate::json::{self, Real};

/// A human (skeleton) finger. Ordering is anatomical, thumb first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Pinky,
}

impl Finger {
    pub const ALL: [Finger; 5] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Pinky,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Pinky => "pinky",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Finger {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Finger::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown finger {s:?}"))
    }
}

/// Region label of a mesh vertex. File encoding: 0 = palm, 1..=5 = thumb..pinky.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    Palm,
    Finger(Finger),
}

impl Region {
    pub fn from_label(label: u8) -> Option<Region> {
        match label {
            0 => Some(Region::Palm),
            1..=5 => Some(Region::Finger(Finger::ALL[label as usize - 1])),
            _ => None,
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Region::Palm => 0,
            Region::Finger(f) => f as u8 + 1,
        }
    }

    pub fn finger(self) -> Option<Finger> {
        match self {
            Region::Palm => None,
            Region::Finger(f) => Some(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh has no vertices")]
    Empty,
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
    #[error("triangle {tri} references vertex {index}, mesh has {count}")]
    IndexOutOfRange { tri: usize, index: usize, count: usize },
    #[error("triangle {0} repeats a vertex index")]
    RepeatedIndex(usize),
    #[error("triangle {0} has zero area")]
    ZeroArea(usize),
    #[error("{labels} finger labels for {vertices} vertices")]
    LabelCount { labels: usize, vertices: usize },
    #[error("vertex {vertex} has unknown finger label {label}")]
    UnknownLabel { vertex: usize, label: u8 },
    #[error("edge graph has {0} connected components, expected 1")]
    Disconnected(usize),
    #[error("finger_labels are required")]
    MissingLabels,
    #[error("expected {expected} vertex positions, got {got}")]
    VertexCount { expected: usize, got: usize },
}

/// Triangulated hand surface with per-vertex region labels.
///
/// Rest-pose vertex positions live in the hand (end-effector) frame. The
/// geodesic cache over the rest pose is built at construction.
#[derive(Debug, Clone)]
pub struct HandMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
    labels: Vec<Region>,
    skeleton_fingertips: BTreeMap<Finger, Point3>,
    geodesics: Geodesics,
}

impl PartialEq for HandMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.triangles == other.triangles
            && self.labels == other.labels
            && self.skeleton_fingertips == other.skeleton_fingertips
    }
}

/// Rejects out-of-range indices, repeated indices and zero-area triangles.
pub fn validate_triangles(vertices: &[Point3], triangles: &[[usize; 3]]) -> Result<(), MeshError> {
    let count = vertices.len();
    for (tri, t) in triangles.iter().enumerate() {
        if let Some(&index) = t.iter().find(|&&i| i >= count) {
            return Err(MeshError::IndexOutOfRange { tri, index, count });
        }
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            return Err(MeshError::RepeatedIndex(tri));
        }
        let e1 = vertices[t[1]] - vertices[t[0]];
        let e2 = vertices[t[2]] - vertices[t[0]];
        let cross = e1.cross(&e2).norm();
        if cross <= 1e-12 * e1.norm() * e2.norm() {
            return Err(MeshError::ZeroArea(tri));
        }
    }
    Ok(())
}

impl HandMesh {
    pub fn new(
        vertices: Vec<Point3>,
        triangles: Vec<[usize; 3]>,
        labels: Vec<Region>,
        skeleton_fingertips: BTreeMap<Finger, Point3>,
    ) -> Result<Self, MeshError> {
        if vertices.is_empty() {
            return Err(MeshError::Empty);
        }
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(MeshError::NonFiniteVertex(i));
        }
        if labels.len() != vertices.len() {
            return Err(MeshError::LabelCount {
                labels: labels.len(),
                vertices: vertices.len(),
            });
        }
        validate_triangles(&vertices, &triangles)?;
        let graph = MeshGraph::from_triangles(&vertices, &triangles);
        let components = graph.component_count();
        if components != 1 {
            return Err(MeshError::Disconnected(components));
        }
        let geodesics = Geodesics::new(graph, vertices.clone());
        Ok(Self {
            vertices,
            triangles,
            labels,
            skeleton_fingertips,
            geodesics,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn labels(&self) -> &[Region] {
        &self.labels
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn region(&self, v: usize) -> Region {
        self.labels[v]
    }

    pub fn skeleton_fingertips(&self) -> &BTreeMap<Finger, Point3> {
        &self.skeleton_fingertips
    }

    pub fn graph(&self) -> &MeshGraph {
        self.geodesics.graph()
    }

    /// Geodesic oracle over the rest pose.
    pub fn geodesics(&self) -> &Geodesics {
        &self.geodesics
    }

    /// Geodesic oracle over deformed vertex positions sharing this topology.
    /// Fields are computed lazily since a per-frame oracle is short-lived.
    pub fn geodesics_for(&self, positions: &[Point3]) -> Result<Geodesics, MeshError> {
        if positions.len() != self.vertices.len() {
            return Err(MeshError::VertexCount {
                expected: self.vertices.len(),
                got: positions.len(),
            });
        }
        validate_triangles(positions, &self.triangles)?;
        let graph = self.graph().reweighted(positions);
        Ok(Geodesics::lazy(graph, positions.to_vec()))
    }

    pub fn to_json(&self) -> MeshJson {
        MeshJson {
            vertices: self.vertices.iter().map(|v| json::to_reals([v.x, v.y, v.z])).collect(),
            triangles: self.triangles.clone(),
            finger_labels: Some(self.labels.iter().map(|r| r.label()).collect()),
            skeleton_fingertips: Some(
                self.skeleton_fingertips
                    .iter()
                    .map(|(f, p)| (*f, json::to_reals([p.x, p.y, p.z])))
                    .collect(),
            ),
        }
    }

    /// Parses a standalone mesh document. `finger_labels` is mandatory here.
    pub fn from_json_str(text: &str) -> crate::Result<Self> {
        let text = json::sanitize_non_finite(text);
        let raw: MeshJson =
            json::from_str_with_path(&text).map_err(|m| crate::Error::parse("mesh JSON", m))?;
        let labels = raw.finger_labels.clone().ok_or(MeshError::MissingLabels)?;
        Ok(raw.build(labels_to_regions(&labels)?)?)
    }
}

pub(crate) fn labels_to_regions(labels: &[u8]) -> Result<Vec<Region>, MeshError> {
    labels
        .iter()
        .enumerate()
        .map(|(vertex, &label)| Region::from_label(label).ok_or(MeshError::UnknownLabel { vertex, label }))
        .collect()
}

/// On-disk mesh: `{"vertices": [[x,y,z],…], "triangles": [[i,j,k],…],
/// "finger_labels": [int,…]}` plus optional named skeleton fingertips.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshJson {
    pub vertices: Vec<[Real; 3]>,
    pub triangles: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finger_labels: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeleton_fingertips: Option<BTreeMap<Finger, [Real; 3]>>,
}

impl MeshJson {
    pub fn points(&self) -> Vec<Point3> {
        self.vertices.iter().map(|v| Point3::from(json::reals(*v))).collect()
    }

    pub fn build(&self, labels: Vec<Region>) -> Result<HandMesh, MeshError> {
        let tips = self
            .skeleton_fingertips
            .as_ref()
            .map(|m| m.iter().map(|(f, p)| (*f, Point3::from(json::reals(*p)))).collect())
            .unwrap_or_default();
        HandMesh::new(self.points(), self.triangles.clone(), labels, tips)
    }
}

/// Nearest vertex of `mesh` (rest pose) to `point`, lowest index on ties.
pub fn project_to_vertex(point: &Point3, mesh: &HandMesh) -> Result<usize, GeodesicError> {
    nearest_vertex(point, mesh.vertices())
}

/// Rest-pose geodesic distance between two surface points.
pub fn geodesic_distance(x: &Point3, y: &Point3, mesh: &HandMesh) -> Result<f64, GeodesicError> {
    mesh.geodesics().distance(x, y)
}

pub fn geodesic_field(source: usize, mesh: &HandMesh) -> Result<&GeodesicField, GeodesicError> {
    mesh.geodesics().field(source)
}
