//! Least-squares plane fitting and rigid alignment of a planar point cloud to
//! the xy-plane.

use nalgebra::{Matrix3, SymmetricEigen, Vector2, Vector3};

use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub centroid: Point3,
    /// Unit normal, oriented so that `normal.z >= 0`.
    pub normal: Vector3<f64>,
    /// In-plane axis of largest spread.
    pub e1: Vector3<f64>,
    /// `normal × e1`.
    pub e2: Vector3<f64>,
}

/// Flips `v` so that its first non-negligible component in `order` is positive.
fn orient(v: Vector3<f64>, order: [usize; 3]) -> Vector3<f64> {
    for k in order {
        if v[k].abs() > 1e-12 {
            return if v[k] < 0.0 { -v } else { v };
        }
    }
    v
}

/// Total-least-squares plane through `points`. `None` for an empty input.
pub fn fit_plane(points: &[Point3]) -> Option<PlaneFit> {
    if points.is_empty() {
        return None;
    }
    let centroid = points.iter().sum::<Point3>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let normal = orient(eig.eigenvectors.column(order[0]).normalize(), [2, 0, 1]);
    let e1 = orient(eig.eigenvectors.column(order[2]).normalize(), [0, 1, 2]);
    let e1 = (e1 - normal * normal.dot(&e1)).normalize();
    let e2 = normal.cross(&e1);
    Some(PlaneFit {
        centroid,
        normal,
        e1,
        e2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarAlignment {
    pub points: Vec<Point3>,
    pub plane: Option<PlaneFit>,
    /// In-plane rotation (rad) applied after projecting onto the plane basis.
    pub angle: f64,
    /// All input points coincide (or the input is empty).
    pub degenerate: bool,
}

/// Rigidly maps the best-fit plane of `points` onto the horizontal plane
/// through their centroid.
///
/// Points are expressed in the plane basis `(e1, e2)`; a 2D Procrustes
/// rotation then aligns those coordinates with the xy-projection of the
/// centred input, so that a cloud already lying in the xy-plane is returned
/// unchanged up to rounding. The centroid is preserved.
pub fn align_to_xy(points: &[Point3]) -> PlanarAlignment {
    let degenerate = points.is_empty() || points.iter().all(|p| *p == points[0]);
    let plane = match fit_plane(points) {
        Some(plane) if !degenerate => plane,
        plane => {
            return PlanarAlignment {
                points: points.to_vec(),
                plane,
                angle: 0.0,
                degenerate: true,
            }
        }
    };
    let mu = plane.centroid;
    let coords: Vec<Vector2<f64>> = points
        .iter()
        .map(|p| {
            let d = p - mu;
            Vector2::new(d.dot(&plane.e1), d.dot(&plane.e2))
        })
        .collect();
    let (mut dot, mut cross) = (0.0, 0.0);
    for (q, p) in coords.iter().zip(points) {
        let t = Vector2::new(p.x - mu.x, p.y - mu.y);
        dot += q.dot(&t);
        cross += q.x * t.y - q.y * t.x;
    }
    let angle = cross.atan2(dot);
    let (s, c) = angle.sin_cos();
    let aligned = coords
        .iter()
        .map(|q| Point3::new(mu.x + c * q.x - s * q.y, mu.y + s * q.x + c * q.y, mu.z))
        .collect();
    PlanarAlignment {
        points: aligned,
        plane: Some(plane),
        angle,
        degenerate: false,
    }
}
