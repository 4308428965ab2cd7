//! Optimisation-based inversion of the forward model in the plane.
//!
//! Pressures are reparameterised as `p(u) = p_min + (p_max − p_min) σ(u)` so
//! unconstrained Adam steps on `u` always map inside the limits.

use super::forward::ForwardModel;
use crate::config::InvertConfig;
use crate::mlp::Adam;
use crate::sim::PressureLimits;
use crate::{Error, Result};

/// Bound on `|u|`. Beyond it σ rounds to 0 or 1 and the pressure would touch
/// a limit.
pub const U_BOUND: f64 = 30.0;

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

pub fn pressures_from_u(u: &[f64; 3], limits: &PressureLimits) -> [f64; 3] {
    u.map(|v| limits.min + limits.span() * sigmoid(v))
}

/// Inverse of [`pressures_from_u`], clipped to `±U_BOUND`.
pub fn u_from_pressures(p: &[f64; 3], limits: &PressureLimits) -> [f64; 3] {
    p.map(|v| {
        let s = ((v - limits.min) / limits.span()).clamp(0.0, 1.0);
        (s / (1.0 - s)).ln().clamp(-U_BOUND, U_BOUND)
    })
}

/// `‖Π_xy(f(p(u))) − Π_xy(d_ref)‖²` and its gradient with respect to `u`.
pub fn objective(model: &ForwardModel, u: &[f64; 3], d_ref: &[f64; 3]) -> (f64, [f64; 3]) {
    let p = pressures_from_u(u, &model.limits);
    let d = model.predict(&p);
    let r = [d[0] - d_ref[0], d[1] - d_ref[1]];
    let gp = model.vjp(&p, &[2.0 * r[0], 2.0 * r[1], 0.0]);
    let span = model.limits.span();
    let mut gu = [0.0; 3];
    for k in 0..3 {
        let s = sigmoid(u[k]);
        gu[k] = gp[k] * span * s * (1.0 - s);
    }
    (r[0] * r[0] + r[1] * r[1], gu)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseSolution {
    pub pressure: [f64; 3],
    pub u: [f64; 3],
    /// Squared planar residual of the model at `pressure` (m²).
    pub objective: f64,
}

impl InverseSolution {
    /// Planar model residual (m).
    pub fn residual(&self) -> f64 {
        self.objective.sqrt()
    }
}

/// Runs `cfg.iterations` Adam steps from `warm_start` (default `u = 0`, the
/// midpoint pressure) and returns the best iterate seen.
pub fn invert(model: &ForwardModel, d_ref: &[f64; 3], warm_start: Option<[f64; 3]>, cfg: &InvertConfig) -> Result<InverseSolution> {
    if d_ref.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("reference displacement {d_ref:?} is not finite")));
    }
    let mut u = warm_start.unwrap_or([0.0; 3]);
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("warm start is not finite"));
    }
    u = u.map(|v| v.clamp(-U_BOUND, U_BOUND));
    let mut adam = Adam::new(3);
    let mut best = (f64::INFINITY, u);
    for _ in 0..cfg.iterations {
        let (f, g) = objective(model, &u, d_ref);
        if !f.is_finite() {
            return Err(Error::Numerical("inverse objective became non-finite".into()));
        }
        if f < best.0 {
            best = (f, u);
        }
        let step = adam.direction(&g, cfg.learning_rate);
        for k in 0..3 {
            u[k] = (u[k] - step[k]).clamp(-U_BOUND, U_BOUND);
        }
    }
    let (f, _) = objective(model, &u, d_ref);
    if f < best.0 {
        best = (f, u);
    }
    Ok(InverseSolution {
        pressure: pressures_from_u(&best.1, &model.limits),
        u: best.1,
        objective: best.0,
    })
}
