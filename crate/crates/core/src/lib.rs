//! Force-aware retargeting of contact-annotated human hand demonstrations onto
//! a non-anthropomorphic multi-finger soft hand, plus the low-level pressure
//! controllers that execute the retargeted fingertip trajectories.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`] and [`geodesic`]: the hand surface as a graph with intrinsic
//!   (shortest-path) distances.
//! - [`demo`]: the demonstration dataset, its JSON format and a synthetic
//!   generator.
//! - [`stage1`]: offline force-balanced finger assignment (force diffusion,
//!   per-finger loads, min-max allocation, workspace-aware matching).
//! - [`stage2`]: online geodesic-weighted fingertip refinement.
//! - [`sim`]: a quasi-static articulated-spine soft finger.
//! - [`mlp`] and [`control`]: the learned forward model, its optimisation-based
//!   inversion, the three baseline controllers and the tracking harness.
//! - [`pipeline`]: end-to-end orchestration writing reproducible artifacts.

pub mod config;
pub mod control;
pub mod demo;
pub mod error;
pub mod geodesic;
pub mod geometry;
pub mod hungarian;
pub mod json;
pub mod mesh;
pub mod mlp;
pub mod pipeline;
pub mod procrustes;
pub mod sim;
pub mod stage1;
pub mod stage2;
pub mod svg;

pub use error::{Error, Result};
