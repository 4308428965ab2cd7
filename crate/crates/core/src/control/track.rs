//! Closed-shape reference trajectories and the tracking harness.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::baselines::{DirectMlpBaseline, KnnBaseline, LinearBaseline};
use super::forward::ForwardModel;
use super::invert::invert;
use crate::config::InvertConfig;
use crate::sim::Plant;
use crate::svg::{LinePlot, Series};
use crate::{Error, Result};

/// Maps a planar fingertip target (m, relative to the straight tip) to a
/// pressure command.
pub trait Controller {
    fn name(&self) -> &'static str;
    /// Forgets state carried between waypoints.
    fn reset(&mut self) {}
    fn command(&mut self, target: [f64; 2]) -> Result<[f64; 3]>;
}

/// Inverse optimisation through the learned forward model, warm-started from
/// the previous waypoint's solution.
#[derive(Debug, Clone)]
pub struct InverseController<'a> {
    pub model: &'a ForwardModel,
    pub config: InvertConfig,
    pub warm_start: bool,
    last_u: Option<[f64; 3]>,
}

impl<'a> InverseController<'a> {
    pub fn new(model: &'a ForwardModel, config: InvertConfig) -> Self {
        Self {
            model,
            config,
            warm_start: true,
            last_u: None,
        }
    }

    pub fn cold(mut self) -> Self {
        self.warm_start = false;
        self
    }
}

impl Controller for InverseController<'_> {
    fn name(&self) -> &'static str {
        "inverse_mlp"
    }

    fn reset(&mut self) {
        self.last_u = None;
    }

    fn command(&mut self, target: [f64; 2]) -> Result<[f64; 3]> {
        let start = if self.warm_start { self.last_u } else { None };
        let s = invert(self.model, &[target[0], target[1], 0.0], start, &self.config)?;
        self.last_u = Some(s.u);
        Ok(s.pressure)
    }
}

impl Controller for LinearBaseline {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn command(&mut self, target: [f64; 2]) -> Result<[f64; 3]> {
        Ok(self.predict(target))
    }
}

impl Controller for KnnBaseline {
    fn name(&self) -> &'static str {
        "knn"
    }

    fn command(&mut self, target: [f64; 2]) -> Result<[f64; 3]> {
        Ok(self.predict(target))
    }
}

impl Controller for DirectMlpBaseline {
    fn name(&self) -> &'static str {
        "direct_mlp"
    }

    fn command(&mut self, target: [f64; 2]) -> Result<[f64; 3]> {
        Ok(self.predict(target))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Square,
    Circle,
    Triangle,
    Rectangle,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Square, Shape::Circle, Shape::Triangle, Shape::Rectangle];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Circle => "circle",
            Shape::Triangle => "triangle",
            Shape::Rectangle => "rectangle",
        }
    }

    /// Corner points (counter-clockwise) of the polygonal shapes, centred on
    /// the origin: 32 mm square, equilateral triangle of circumradius 20 mm,
    /// 40 × 20 mm rectangle.
    fn corners(self) -> Option<Vec<[f64; 2]>> {
        match self {
            Shape::Circle => None,
            Shape::Square => Some(vec![[0.016, -0.016], [0.016, 0.016], [-0.016, 0.016], [-0.016, -0.016]]),
            Shape::Rectangle => Some(vec![[0.02, -0.01], [0.02, 0.01], [-0.02, 0.01], [-0.02, -0.01]]),
            Shape::Triangle => Some(
                (0..3)
                    .map(|k| {
                        let a = std::f64::consts::FRAC_PI_2 + std::f64::consts::TAU * k as f64 / 3.0;
                        [0.02 * a.cos(), 0.02 * a.sin()]
                    })
                    .collect(),
            ),
        }
    }

    /// `n` waypoints evenly spaced by arc length around one loop; the circle
    /// has radius 20 mm and starts on the +x axis.
    pub fn waypoints(self, n: usize) -> Vec<[f64; 2]> {
        let Some(corners) = self.corners() else {
            return (0..n)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / n as f64;
                    [0.02 * a.cos(), 0.02 * a.sin()]
                })
                .collect();
        };
        let edges: Vec<([f64; 2], [f64; 2], f64)> = (0..corners.len())
            .map(|i| {
                let (a, b) = (corners[i], corners[(i + 1) % corners.len()]);
                (a, b, (b[0] - a[0]).hypot(b[1] - a[1]))
            })
            .collect();
        let perimeter: f64 = edges.iter().map(|e| e.2).sum();
        (0..n)
            .map(|k| {
                let mut s = perimeter * k as f64 / n as f64;
                for (a, b, len) in &edges {
                    if s <= *len {
                        let t = s / len;
                        return [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    }
                    s -= len;
                }
                corners[0]
            })
            .collect()
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown shape {s:?} (expected square, circle, triangle or rectangle)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub controller: String,
    pub shape: Option<Shape>,
    /// Planar error at each executed waypoint, loops concatenated (mm).
    pub errors_mm: Vec<f64>,
    pub rmse_mm: f64,
    pub mean_mm: f64,
    pub std_mm: f64,
    pub max_mm: f64,
    /// Commanded waypoints (m).
    pub reference: Vec<[f64; 2]>,
    /// Executed planar tip positions (m).
    pub executed: Vec<[f64; 2]>,
    pub commands: Vec<[f64; 3]>,
}

/// RMSE, mean, population standard deviation and maximum of `errors`.
pub fn error_stats(errors: &[f64]) -> (f64, f64, f64, f64) {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let msq = errors.iter().map(|e| e * e).sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    (msq.sqrt(), mean, var.sqrt(), errors.iter().copied().fold(0.0, f64::max))
}

impl TrackingReport {
    fn new(controller: &str, shape: Option<Shape>, reference: Vec<[f64; 2]>, executed: Vec<[f64; 2]>, commands: Vec<[f64; 3]>) -> Self {
        let errors_mm: Vec<f64> = reference
            .iter()
            .zip(&executed)
            .map(|(r, e)| (r[0] - e[0]).hypot(r[1] - e[1]) * 1e3)
            .collect();
        let (rmse_mm, mean_mm, std_mm, max_mm) = error_stats(&errors_mm);
        Self {
            controller: controller.to_string(),
            shape,
            errors_mm,
            rmse_mm,
            mean_mm,
            std_mm,
            max_mm,
            reference,
            executed,
            commands,
        }
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `step, ref_x_m, ref_y_m, exec_x_m, exec_y_m, p1_kpa, p2_kpa, p3_kpa, error_mm`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let wrap = |e: csv::Error| Error::Numerical(format!("writing tracking CSV: {e}"));
        out.write_record(["step", "ref_x_m", "ref_y_m", "exec_x_m", "exec_y_m", "p1_kpa", "p2_kpa", "p3_kpa", "error_mm"])
            .map_err(wrap)?;
        for (i, ((r, e), (p, err))) in self
            .reference
            .iter()
            .zip(&self.executed)
            .zip(self.commands.iter().zip(&self.errors_mm))
            .enumerate()
        {
            let row = [
                i.to_string(),
                r[0].to_string(),
                r[1].to_string(),
                e[0].to_string(),
                e[1].to_string(),
                p[0].to_string(),
                p[1].to_string(),
                p[2].to_string(),
                err.to_string(),
            ];
            out.write_record(&row).map_err(wrap)?;
        }
        out.flush().map_err(|e| Error::Numerical(format!("writing tracking CSV: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory CSV");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Reference (dashed) and executed paths in millimetres.
    pub fn overlay_plot(&self) -> LinePlot {
        let mm = |v: &[[f64; 2]]| v.iter().map(|p| (p[0] * 1e3, p[1] * 1e3)).collect::<Vec<_>>();
        let mut reference = mm(&self.reference);
        if let Some(first) = reference.first().copied() {
            reference.push(first);
        }
        LinePlot {
            title: format!(
                "{} {}: RMSE {:.2} mm",
                self.controller,
                self.shape.map(Shape::name).unwrap_or("path"),
                self.rmse_mm
            ),
            x_label: "x (mm)".into(),
            y_label: "y (mm)".into(),
            series: vec![Series::new("reference", reference).dashed(), Series::new("executed", mm(&self.executed))],
            equal_aspect: true,
        }
    }
}

/// Drives `plant` through `loops` passes over `reference`, measuring the
/// planar distance between executed tip and each commanded waypoint.
pub fn track<C: Controller + ?Sized, P: Plant + ?Sized>(
    controller: &mut C,
    reference: &[[f64; 2]],
    plant: &P,
    loops: usize,
    shape: Option<Shape>,
) -> Result<TrackingReport> {
    if reference.is_empty() || loops == 0 {
        return Err(Error::invalid("tracking needs at least one waypoint and one loop"));
    }
    if reference.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("reference contains non-finite waypoints"));
    }
    controller.reset();
    let limits = plant.limits();
    let mut refs = Vec::with_capacity(reference.len() * loops);
    let mut executed = Vec::with_capacity(refs.capacity());
    let mut commands = Vec::with_capacity(refs.capacity());
    for _ in 0..loops {
        for r in reference {
            let p = controller.command(*r)?;
            if !limits.contains(&p) {
                return Err(Error::Numerical(format!("{} commanded {p:?} outside the pressure limits", controller.name())));
            }
            let d = plant.displacement(&p);
            refs.push(*r);
            executed.push([d.x, d.y]);
            commands.push(p);
        }
    }
    Ok(TrackingReport::new(controller.name(), shape, refs, executed, commands))
}
