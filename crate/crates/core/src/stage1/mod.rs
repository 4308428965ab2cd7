//! Offline force-balanced finger assignment.
//!
//! Contact forces are diffused over the hand surface, summed into per-finger
//! loads, robot fingers are allocated to loaded human fingers min-max, and the
//! individual robot fingers are matched to human fingertip slots by workspace
//! proximity. The resulting mapping stays fixed for the whole execution.

mod allocation;
mod diffusion;
mod matching;
mod workspace;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use allocation::{allocate, allocate_fingers, Allocation, FingerAllocation};
pub use diffusion::{diffuse_forces, diffuse_forces_per_frame, finger_loads, FingerLoads, HeatField};
pub use matching::{match_cost, match_fingers, Matching};
pub use workspace::{envelope_from_pressures, workspace_envelope_human, workspace_envelope_robot, WorkspaceEnvelope};

use crate::config::RetargetConfig;
use crate::demo::Demonstration;
use crate::mesh::Finger;
use crate::sim::RobotHand;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingEntry {
    pub robot: usize,
    pub human: Finger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerAssignment {
    /// `F_r` for every human finger.
    pub loads: BTreeMap<Finger, f64>,
    /// Heat on palm vertices; never allocated.
    pub palm_load: f64,
    /// `n_r` for every human finger.
    pub allocation: BTreeMap<Finger, usize>,
    /// One entry per robot finger, in robot order.
    pub mapping: Vec<MappingEntry>,
    /// `max_r F_r / n_r` over allocated fingers.
    pub objective: f64,
    /// Total workspace matching cost.
    pub matching_cost: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub config: RetargetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl FingerAssignment {
    pub fn robot_count(&self) -> usize {
        self.mapping.len()
    }

    /// Human finger driving robot finger `robot`.
    pub fn human_for(&self, robot: usize) -> Option<Finger> {
        self.mapping.get(robot).map(|e| e.human)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mapping.is_empty() {
            return Err(Error::invalid("assignment maps no robot fingers"));
        }
        for (i, e) in self.mapping.iter().enumerate() {
            if e.robot != i {
                return Err(Error::invalid(format!(
                    "mapping[{i}] is robot finger {}; entries must list robot fingers 0..{} in order",
                    e.robot,
                    self.mapping.len()
                )));
            }
        }
        let total: usize = self.allocation.values().sum();
        if total != self.mapping.len() {
            return Err(Error::invalid(format!(
                "allocation sums to {total} but {} robot fingers are mapped",
                self.mapping.len()
            )));
        }
        for (f, &n) in &self.allocation {
            let mapped = self.mapping.iter().filter(|e| e.human == *f).count();
            if mapped != n {
                return Err(Error::invalid(format!("{f} is allocated {n} robot fingers but mapped to {mapped}")));
            }
        }
        if let Some(e) = self.mapping.iter().find(|e| !self.allocation.contains_key(&e.human)) {
            return Err(Error::invalid(format!("robot finger {} is mapped to unallocated {}", e.robot, e.human)));
        }
        if let Some((f, v)) = self.loads.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("load of {f} is {v}")));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let a: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::parse("assignment JSON", e))?;
        a.validate()?;
        Ok(a)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("assignment serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

/// Runs the whole offline stage for a hand with `hand.finger_count()` fingers.
/// Robot envelopes use `envelope_samples` random pressures per finger.
pub fn run_stage1(
    demo: &Demonstration,
    hand: &RobotHand,
    config: &RetargetConfig,
    envelope_samples: usize,
    seed: u64,
) -> Result<FingerAssignment> {
    config.validate()?;
    let n_robot = hand.finger_count();
    let heat = diffuse_forces(demo, config)?;
    let loads = finger_loads(&heat, demo.mesh())?;
    let alloc = allocate_fingers(&loads.fingers, n_robot)?;

    let allocated: BTreeMap<Finger, usize> = alloc.counts.iter().filter(|(_, n)| **n > 0).map(|(f, n)| (*f, *n)).collect();
    let human = allocated
        .keys()
        .map(|&f| workspace_envelope_human(demo, f).map(|e| (f, e)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let robot = (0..n_robot)
        .map(|i| workspace_envelope_robot(hand, i, envelope_samples, seed))
        .collect::<Result<Vec<_>>>()?;
    let m = match_fingers(&robot, &human, &allocated, config.beta)?;

    let assignment = FingerAssignment {
        loads: loads.fingers,
        palm_load: loads.palm,
        allocation: alloc.counts,
        mapping: m
            .mapping
            .iter()
            .enumerate()
            .map(|(robot, &human)| MappingEntry { robot, human })
            .collect(),
        objective: alloc.objective,
        matching_cost: m.total_cost,
        warnings: alloc.warnings,
        config: *config,
        config_hash: None,
    };
    assignment.validate()?;
    Ok(assignment)
}
