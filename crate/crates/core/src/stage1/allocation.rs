//! Min-max allocation of robot fingers to loaded human fingers.

use std::collections::BTreeMap;

use crate::mesh::Finger;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Robot fingers per load entry; zero for inactive or dropped entries.
    pub counts: Vec<usize>,
    /// `max_r F_r / n_r` over entries with `n_r > 0`.
    pub objective: f64,
    /// Active entries left without a robot finger because `N_f` was too small.
    pub dropped: Vec<usize>,
}

/// Smallest `n >= 1` with `load / n <= threshold`.
fn fingers_needed(load: f64, threshold: f64) -> usize {
    let mut n = ((load / threshold).ceil() as usize).max(1);
    while load / n as f64 > threshold {
        n += 1;
    }
    while n > 1 && load / (n - 1) as f64 <= threshold {
        n -= 1;
    }
    n
}

fn objective(loads: &[f64], counts: &[usize]) -> f64 {
    loads
        .iter()
        .zip(counts)
        .filter(|(_, &n)| n > 0)
        .map(|(&f, &n)| f / n as f64)
        .fold(0.0, f64::max)
}

/// Distributes `n_robot` fingers over the entries of `loads` with `F_r > 0`,
/// minimising `max_r F_r / n_r` subject to `Σ n_r = n_robot` and `n_r >= 1`
/// for every active entry.
///
/// Among optimal allocations the lexicographically greatest count vector is
/// returned, i.e. spare fingers go to the lowest-index entry. When there are
/// fewer robot fingers than active entries, the `n_robot` highest loads (lower
/// index on ties) get one finger each and the rest are reported in `dropped`.
pub fn allocate(loads: &[f64], n_robot: usize) -> Result<Allocation> {
    if n_robot == 0 {
        return Err(Error::invalid("need at least one robot finger"));
    }
    if let Some(i) = loads.iter().position(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::invalid(format!("load {i} is {}, expected finite and non-negative", loads[i])));
    }
    let active: Vec<usize> = (0..loads.len()).filter(|&i| loads[i] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::invalid("all finger loads are zero; nothing to allocate"));
    }
    let mut counts = vec![0; loads.len()];

    if n_robot < active.len() {
        let mut ranked = active.clone();
        ranked.sort_by(|&a, &b| loads[b].total_cmp(&loads[a]).then(a.cmp(&b)));
        for &i in &ranked[..n_robot] {
            counts[i] = 1;
        }
        let mut dropped = ranked[n_robot..].to_vec();
        dropped.sort_unstable();
        return Ok(Allocation {
            objective: objective(loads, &counts),
            counts,
            dropped,
        });
    }

    // The optimum is F_s / k for some active s and k <= n_robot, and
    // feasibility of a threshold is monotone, so search the sorted candidates.
    let mut candidates: Vec<f64> = active
        .iter()
        .flat_map(|&i| (1..=n_robot).map(move |k| loads[i] / k as f64))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let feasible = |t: f64| active.iter().map(|&i| fingers_needed(loads[i], t)).sum::<usize>() <= n_robot;
    let best = candidates[candidates.partition_point(|&t| !feasible(t))];

    let (first, rest) = active.split_first().expect("non-empty");
    let mut used = 0;
    for &i in rest {
        counts[i] = fingers_needed(loads[i], best);
        used += counts[i];
    }
    counts[*first] = n_robot - used;
    Ok(Allocation {
        objective: objective(loads, &counts),
        counts,
        dropped: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerAllocation {
    pub counts: BTreeMap<Finger, usize>,
    pub objective: f64,
    pub warnings: Vec<String>,
}

/// [`allocate`] over named fingers in anatomical order.
pub fn allocate_fingers(loads: &BTreeMap<Finger, f64>, n_robot: usize) -> Result<FingerAllocation> {
    let fingers: Vec<Finger> = loads.keys().copied().collect();
    let values: Vec<f64> = loads.values().copied().collect();
    let a = allocate(&values, n_robot)?;
    let warnings = if a.dropped.is_empty() {
        Vec::new()
    } else {
        let names: Vec<&str> = a.dropped.iter().map(|&i| fingers[i].name()).collect();
        vec![format!(
            "{n_robot} robot fingers for {} loaded human fingers; left unassigned: {}",
            a.dropped.len() + n_robot,
            names.join(", ")
        )]
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(FingerAllocation {
        counts: fingers.into_iter().zip(a.counts).collect(),
        objective: a.objective,
        warnings,
    })
}
