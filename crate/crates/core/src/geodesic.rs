//! Intrinsic distances on the hand surface.
//!
//! The surface is treated as an undirected graph whose edges are triangle
//! sides weighted by their Euclidean length. Points are snapped to their
//! nearest vertex and distances are shortest-path lengths (Dijkstra).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use thiserror::Error;

use crate::geometry::Point3;

/// Meshes up to this many vertices get every single-source field computed up
/// front; larger meshes compute fields on first use.
pub const ALL_PAIRS_LIMIT: usize = 5000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesicError {
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("vertex {vertex} out of range (mesh has {count} vertices)")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("vertex {to} is unreachable from vertex {from}")]
    Unreachable { from: usize, to: usize },
}

/// Index of the vertex nearest to `point`; ties go to the lowest index.
pub fn nearest_vertex(point: &Point3, vertices: &[Point3]) -> Result<usize, GeodesicError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in vertices.iter().enumerate() {
        let d = (v - point).norm_squared();
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i).ok_or(GeodesicError::EmptyMesh)
}

/// Adjacency of a triangle mesh in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl MeshGraph {
    /// Builds the edge graph of `triangles` (indices must be in range) with
    /// Euclidean edge weights taken from `positions`.
    pub fn from_triangles(positions: &[Point3], triangles: &[[usize; 3]]) -> Self {
        let n = positions.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for t in triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if a != b {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        let mut graph = MeshGraph {
            offsets,
            weights: vec![0.0; targets.len()],
            targets,
        };
        graph.set_weights(positions);
        graph
    }

    /// Same topology, edge weights recomputed from new vertex positions.
    pub fn reweighted(&self, positions: &[Point3]) -> Self {
        let mut g = self.clone();
        g.set_weights(positions);
        g
    }

    fn set_weights(&mut self, positions: &[Point3]) {
        for v in 0..self.vertex_count() {
            for k in self.offsets[v]..self.offsets[v + 1] {
                self.weights[k] = (positions[v] - positions[self.targets[k]]).norm();
            }
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[v]..self.offsets[v + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    /// Each undirected edge once, as `(i, j, weight)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.vertex_count()).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| i < j)
                .map(move |(j, w)| (i, j, w))
        })
    }

    pub fn min_edge_weight(&self) -> Option<f64> {
        self.weights.iter().copied().reduce(f64::min)
    }

    pub fn component_count(&self) -> usize {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for (u, _) in self.neighbors(v) {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        count
    }

    /// Single-source shortest path lengths; unreachable vertices get `+inf`.
    pub fn shortest_paths(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.vertex_count()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Candidate {
            dist: 0.0,
            vertex: source,
        });
        while let Some(Candidate { dist: d, vertex: v }) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for (u, w) in self.neighbors(v) {
                let nd = d + w;
                if nd < dist[u] {
                    dist[u] = nd;
                    heap.push(Candidate {
                        dist: nd,
                        vertex: u,
                    });
                }
            }
        }
        dist
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist: f64,
    vertex: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Min-heap on distance, then vertex index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

/// Shortest-path distances from one source vertex to every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    pub source: usize,
    pub distances: Vec<f64>,
}

impl GeodesicField {
    pub fn distance_to(&self, target: usize) -> Result<f64, GeodesicError> {
        let count = self.distances.len();
        let d = *self
            .distances
            .get(target)
            .ok_or(GeodesicError::VertexOutOfRange {
                vertex: target,
                count,
            })?;
        if d.is_finite() {
            Ok(d)
        } else {
            Err(GeodesicError::Unreachable {
                from: self.source,
                to: target,
            })
        }
    }
}

/// Distance oracle over a fixed set of vertex positions, caching one
/// [`GeodesicField`] per source vertex.
///
/// Fields are immutable once computed, so a `Geodesics` can be shared across
/// threads.
#[derive(Debug, Clone)]
pub struct Geodesics {
    graph: MeshGraph,
    positions: Vec<Point3>,
    fields: Vec<OnceLock<GeodesicField>>,
}

impl Geodesics {
    /// Precomputes all fields when the mesh has at most [`ALL_PAIRS_LIMIT`]
    /// vertices; otherwise fields are filled on demand.
    pub fn new(graph: MeshGraph, positions: Vec<Point3>) -> Self {
        let eager = positions.len() <= ALL_PAIRS_LIMIT;
        let g = Self::lazy(graph, positions);
        if eager {
            for s in 0..g.vertex_count() {
                let _ = g.field(s);
            }
        }
        g
    }

    /// Never precomputes; every field is computed on first request.
    pub fn lazy(graph: MeshGraph, positions: Vec<Point3>) -> Self {
        assert_eq!(graph.vertex_count(), positions.len());
        let fields = (0..positions.len()).map(|_| OnceLock::new()).collect();
        Self {
            graph,
            positions,
            fields,
        }
    }

    pub fn graph(&self) -> &MeshGraph {
        &self.graph
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn field(&self, source: usize) -> Result<&GeodesicField, GeodesicError> {
        let slot = self
            .fields
            .get(source)
            .ok_or(GeodesicError::VertexOutOfRange {
                vertex: source,
                count: self.positions.len(),
            })?;
        Ok(slot.get_or_init(|| GeodesicField {
            source,
            distances: self.graph.shortest_paths(source),
        }))
    }

    /// Number of fields already computed.
    pub fn cached_fields(&self) -> usize {
        self.fields.iter().filter(|f| f.get().is_some()).count()
    }

    pub fn vertex_distance(&self, a: usize, b: usize) -> Result<f64, GeodesicError> {
        self.field(a)?.distance_to(b)
    }

    pub fn project(&self, point: &Point3) -> Result<usize, GeodesicError> {
        nearest_vertex(point, &self.positions)
    }

    /// Geodesic distance between two surface points after snapping each to its
    /// nearest vertex.
    pub fn distance(&self, x: &Point3, y: &Point3) -> Result<f64, GeodesicError> {
        let a = self.project(x)?;
        let b = self.project(y)?;
        self.vertex_distance(a, b)
    }
}
