//! Low-level fingertip controllers for a single spine finger.
//!
//! The main controller learns a forward model (pressures to displacement) and
//! inverts it by gradient descent in a sigmoid-reparameterised pressure space.
//! Three baselines (linear least squares, k-nearest neighbours, a direct
//! inverse network) share its training data, and [`track`] measures planar
//! tracking error on the simulated plant.

mod baselines;
mod benchmark;
mod forward;
mod invert;
mod track;

pub use baselines::{DirectMlpBaseline, KdTree, KnnBaseline, LinearBaseline};
pub use benchmark::{evaluate, fit_controllers, run_benchmark, BenchmarkResult, ControllerSummary, FittedControllers};
pub use forward::{train_forward, ForwardModel, ModelMetadata};
pub use invert::{invert, objective, pressures_from_u, sigmoid, u_from_pressures, InverseSolution, U_BOUND};
pub use track::{error_stats, track, Controller, InverseController, Shape, TrackingReport};
