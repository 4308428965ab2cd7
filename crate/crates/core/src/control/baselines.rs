//! Baseline pressure controllers: a least-squares linear map, k-nearest
//! neighbours over sampled pairs, and a direct inverse network.

use nalgebra::DMatrix;

use crate::config::TrainConfig;
use crate::mlp::{train_regressor, Regressor};
use crate::sim::{Dataset, PressureLimits};
use crate::{Error, Result};

/// `p = W [x, y, 1]` fitted by least squares on the planar displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBaseline {
    /// Rows are pressures, columns `x, y, 1`.
    pub coefficients: [[f64; 3]; 3],
    pub limits: PressureLimits,
}

impl LinearBaseline {
    pub fn fit(dataset: &Dataset, limits: PressureLimits) -> Result<Self> {
        limits.validate()?;
        if dataset.len() < 3 {
            return Err(Error::invalid("linear fit needs at least 3 samples"));
        }
        let n = dataset.len();
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => dataset.samples[i].displacement.x,
            1 => dataset.samples[i].displacement.y,
            _ => 1.0,
        });
        let y = DMatrix::from_fn(n, 3, |i, j| dataset.samples[i].pressure[j]);
        let w = x
            .svd(true, true)
            .solve(&y, 1e-12)
            .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("least squares produced non-finite coefficients".into()));
        }
        let coefficients = std::array::from_fn(|r| std::array::from_fn(|c| w[(c, r)]));
        Ok(Self { coefficients, limits })
    }

    /// Unclamped linear prediction.
    pub fn raw(&self, target: [f64; 2]) -> [f64; 3] {
        self.coefficients.map(|row| row[0] * target[0] + row[1] * target[1] + row[2])
    }

    pub fn predict(&self, target: [f64; 2]) -> [f64; 3] {
        self.limits.clamp(self.raw(target))
    }
}

#[derive(Debug, Clone)]
struct KdNode {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// 2-d tree over planar points, answering k-nearest queries with ties broken
/// by point index.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 2]>,
    nodes: Vec<KdNode>,
    root: Option<usize>,
}

impl KdTree {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build(&points, &mut idx, 0, &mut nodes);
        Self { points, nodes, root }
    }

    fn build(points: &[[f64; 2]], idx: &mut [usize], depth: usize, nodes: &mut Vec<KdNode>) -> Option<usize> {
        if idx.is_empty() {
            return None;
        }
        let axis = depth % 2;
        idx.sort_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
        let mid = idx.len() / 2;
        let id = nodes.len();
        nodes.push(KdNode {
            point: idx[mid],
            axis,
            left: None,
            right: None,
        });
        let (lo, hi) = idx.split_at_mut(mid);
        let left = Self::build(points, lo, depth + 1, nodes);
        let right = Self::build(points, &mut hi[1..], depth + 1, nodes);
        nodes[id].left = left;
        nodes[id].right = right;
        Some(id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of the `k` nearest points, ordered by `(distance, index)`.
    pub fn nearest(&self, q: [f64; 2], k: usize) -> Vec<usize> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(self.root, q, k, &mut best);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    fn search(&self, node: Option<usize>, q: [f64; 2], k: usize, best: &mut Vec<(f64, usize)>) {
        let Some(id) = node else { return };
        let n = &self.nodes[id];
        let p = self.points[n.point];
        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        let key = (d2, n.point);
        let worse = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if best.len() < k || worse(&key, best.last().expect("full")).is_lt() {
            let pos = best.partition_point(|e| worse(e, &key).is_lt());
            best.insert(pos, key);
            best.truncate(k);
        }
        let diff = q[n.axis] - p[n.axis];
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.search(near, q, k, best);
        // Equal distances must still be visited: a lower index may tie.
        if best.len() < k || diff * diff <= best.last().expect("full").0 {
            self.search(far, q, k, best);
        }
    }
}

/// Mean pressure of the `k` samples whose planar displacement is nearest.
#[derive(Debug, Clone)]
pub struct KnnBaseline {
    tree: KdTree,
    pressures: Vec<[f64; 3]>,
    pub k: usize,
    pub limits: PressureLimits,
}

impl KnnBaseline {
    pub fn fit(dataset: &Dataset, k: usize, limits: PressureLimits) -> Result<Self> {
        limits.validate()?;
        if k == 0 || k > dataset.len() {
            return Err(Error::invalid(format!("k = {k} must lie in 1..={}", dataset.len())));
        }
        let points = dataset.samples.iter().map(|s| [s.displacement.x, s.displacement.y]).collect();
        Ok(Self {
            tree: KdTree::new(points),
            pressures: dataset.samples.iter().map(|s| s.pressure).collect(),
            k,
            limits,
        })
    }

    pub fn neighbours(&self, target: [f64; 2]) -> Vec<usize> {
        self.tree.nearest(target, self.k)
    }

    pub fn predict(&self, target: [f64; 2]) -> [f64; 3] {
        let nb = self.neighbours(target);
        let mut p = [0.0; 3];
        for &i in &nb {
            for c in 0..3 {
                p[c] += self.pressures[i][c];
            }
        }
        self.limits.clamp(p.map(|v| v / nb.len() as f64))
    }
}

/// Network trained from planar displacement straight to pressures.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectMlpBaseline {
    pub model: Regressor,
    pub limits: PressureLimits,
}

impl DirectMlpBaseline {
    pub fn fit(dataset: &Dataset, limits: PressureLimits, cfg: &TrainConfig, seed: u64) -> Result<Self> {
        limits.validate()?;
        let xs: Vec<Vec<f64>> = dataset.samples.iter().map(|s| vec![s.displacement.x, s.displacement.y]).collect();
        let ys: Vec<Vec<f64>> = dataset.samples.iter().map(|s| s.pressure.to_vec()).collect();
        let (model, report) = train_regressor(&xs, &ys, cfg, seed)?;
        log::info!("direct inverse network: validation RMSE {:?} kPa", report.validation_rmse);
        Ok(Self { model, limits })
    }

    pub fn predict(&self, target: [f64; 2]) -> [f64; 3] {
        let p = self.model.predict(&target);
        self.limits.clamp([p[0], p[1], p[2]])
    }
}
