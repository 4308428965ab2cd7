//! Workspace-aware matching of robot fingers to human fingertip slots.

use std::collections::BTreeMap;

use super::workspace::WorkspaceEnvelope;
use crate::hungarian;
use crate::mesh::Finger;
use crate::{Error, Result};

/// `‖μ_i − μ_r‖ + β·[boxes disjoint]`.
pub fn match_cost(robot: &WorkspaceEnvelope, human: &WorkspaceEnvelope, beta: f64) -> f64 {
    let penalty = if robot.overlaps(human) { 0.0 } else { beta };
    (robot.centroid - human.centroid).norm() + penalty
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Human finger assigned to each robot finger.
    pub mapping: Vec<Finger>,
    /// Human finger of each column: finger `r` repeated `n_r` times, in
    /// anatomical order.
    pub slots: Vec<Finger>,
    /// Rows are robot fingers, columns are slots.
    pub cost: Vec<Vec<f64>>,
    pub total_cost: f64,
}

/// Minimum-cost perfect matching between robot fingers and the
/// allocation-expanded human slots. Ties resolve to the lexicographically
/// smallest slot sequence (lowest robot index takes the lowest slot).
pub fn match_fingers(
    robot: &[WorkspaceEnvelope],
    human: &BTreeMap<Finger, WorkspaceEnvelope>,
    allocation: &BTreeMap<Finger, usize>,
    beta: f64,
) -> Result<Matching> {
    let slots: Vec<Finger> = allocation
        .iter()
        .flat_map(|(f, &n)| std::iter::repeat_n(*f, n))
        .collect();
    if slots.len() != robot.len() {
        return Err(Error::invalid(format!(
            "allocation has {} slots for {} robot fingers",
            slots.len(),
            robot.len()
        )));
    }
    let cost = robot
        .iter()
        .map(|r| {
            slots
                .iter()
                .map(|f| {
                    human
                        .get(f)
                        .map(|h| match_cost(r, h, beta))
                        .ok_or_else(|| Error::invalid(format!("no workspace envelope for human finger {f}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let a = hungarian::solve_lexicographic(&cost)?;
    Ok(Matching {
        mapping: a.cols.iter().map(|&j| slots[j]).collect(),
        slots,
        cost,
        total_cost: a.cost,
    })
}
