//! Controller comparison on the simulated finger: every controller fitted on
//! one shared dataset, then tracked over every reference shape.

use serde::{Deserialize, Serialize};

use super::baselines::{DirectMlpBaseline, KnnBaseline, LinearBaseline};
use super::forward::{train_forward, ForwardModel};
use super::track::{error_stats, track, Controller, InverseController, Shape, TrackingReport};
use crate::config::{RunConfig, Stream};
use crate::sim::{sample_dataset, Dataset, SpineFinger};
use crate::Result;

#[derive(Debug, Clone)]
pub struct FittedControllers {
    pub forward: ForwardModel,
    pub linear: LinearBaseline,
    pub knn: KnnBaseline,
    pub direct: DirectMlpBaseline,
}

/// Fits the forward model and the three baselines on `dataset`.
pub fn fit_controllers(dataset: &Dataset, cfg: &RunConfig) -> Result<FittedControllers> {
    let limits = cfg.limits()?;
    Ok(FittedControllers {
        forward: train_forward(dataset, limits, &cfg.train, cfg.seed_for(Stream::Training))?,
        linear: LinearBaseline::fit(dataset, limits)?,
        knn: KnnBaseline::fit(dataset, cfg.benchmark.knn_k, limits)?,
        direct: DirectMlpBaseline::fit(dataset, limits, &cfg.train, cfg.seed_for(Stream::Baseline))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSummary {
    pub controller: String,
    /// Pooled over every shape, loop and waypoint.
    pub rmse_mm: f64,
    pub mean_mm: f64,
    pub std_mm: f64,
    pub max_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub dataset_hash: String,
    pub dataset_samples: usize,
    /// One report per controller and shape, controller-major.
    pub reports: Vec<TrackingReport>,
    pub summary: Vec<ControllerSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl BenchmarkResult {
    pub fn summary_for(&self, controller: &str) -> Option<&ControllerSummary> {
        self.summary.iter().find(|s| s.controller == controller)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string(self).expect("benchmark serializes");
        s.push('\n');
        s
    }

    /// `controller, rmse_mm, mean_mm, std_mm, max_mm` per controller.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("controller,rmse_mm,mean_mm,std_mm,max_mm\n");
        for s in &self.summary {
            out.push_str(&format!("{},{},{},{},{}\n", s.controller, s.rmse_mm, s.mean_mm, s.std_mm, s.max_mm));
        }
        out
    }
}

/// Tracks every shape with every controller on `plant`.
pub fn evaluate(fitted: &FittedControllers, plant: &SpineFinger, dataset: &Dataset, cfg: &RunConfig) -> Result<BenchmarkResult> {
    let b = &cfg.benchmark;
    let mut inverse = InverseController::new(&fitted.forward, cfg.invert);
    let (mut linear, mut knn, mut direct) = (fitted.linear.clone(), fitted.knn.clone(), fitted.direct.clone());
    let controllers: [&mut dyn Controller; 4] = [&mut inverse, &mut linear, &mut knn, &mut direct];
    let mut reports = Vec::new();
    let mut summary = Vec::new();
    for c in controllers {
        let mut pooled = Vec::new();
        for shape in Shape::ALL {
            let r = track(c, &shape.waypoints(b.waypoints), plant, b.loops, Some(shape))?;
            log::info!("{} {}: RMSE {:.3} mm", r.controller, shape, r.rmse_mm);
            pooled.extend_from_slice(&r.errors_mm);
            reports.push(r);
        }
        let (rmse_mm, mean_mm, std_mm, max_mm) = error_stats(&pooled);
        summary.push(ControllerSummary {
            controller: c.name().to_string(),
            rmse_mm,
            mean_mm,
            std_mm,
            max_mm,
        });
    }
    Ok(BenchmarkResult {
        dataset_hash: dataset.hash(),
        dataset_samples: dataset.len(),
        reports,
        summary,
        config_hash: None,
    })
}

/// Samples the shared dataset, fits all controllers and evaluates them.
pub fn run_benchmark(cfg: &RunConfig) -> Result<(FittedControllers, Dataset, BenchmarkResult)> {
    cfg.validate()?;
    let plant = SpineFinger::new(cfg.spine, cfg.limits()?)?;
    let dataset = sample_dataset(&plant, cfg.benchmark.samples, cfg.seed_for(Stream::Dataset), cfg.benchmark.noise_std)?;
    let fitted = fit_controllers(&dataset, cfg)?;
    let result = evaluate(&fitted, &plant, &dataset, cfg)?;
    Ok((fitted, dataset, result))
}
