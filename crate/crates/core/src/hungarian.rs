//! Minimum-cost perfect matching on square cost matrices.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub cols: Vec<usize>,
    /// Sum of the chosen entries, accumulated in row order.
    pub cost: f64,
}

fn check(cost: &[Vec<f64>]) -> Result<()> {
    let n = cost.len();
    for (i, row) in cost.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid(format!(
                "cost matrix must be square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("cost matrix entry ({i}, {j}) is not finite")));
        }
    }
    Ok(())
}

fn total(cost: &[Vec<f64>], cols: &[usize]) -> f64 {
    cols.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

/// Shortest augmenting path with row/column potentials, O(n³). Any optimal
/// assignment may be returned when several exist.
fn potentials(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based rows and columns; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut cols = vec![0; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            cols[row_of[j] - 1] = j - 1;
        }
    }
    cols
}

/// A minimum-cost assignment.
pub fn solve(cost: &[Vec<f64>]) -> Result<Assignment> {
    check(cost)?;
    let cols = potentials(cost);
    Ok(Assignment {
        cost: total(cost, &cols),
        cols,
    })
}

fn restricted_optimum(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let sub: Vec<Vec<f64>> = rows.iter().map(|&i| cols.iter().map(|&j| cost[i][j]).collect()).collect();
    total(&sub, &potentials(&sub))
}

/// Slack for comparing assignment totals: bounds the rounding error of a sum
/// of `n` entries, each no larger in magnitude than the largest in `cost`.
/// A relative tolerance on the total would not do: one large penalty entry
/// would widen it past genuine cost differences.
pub fn tie_tolerance(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len() as f64;
    let max = cost.iter().flatten().fold(0.0, |m: f64, c| m.max(c.abs()));
    4.0 * n * n * f64::EPSILON * max
}

/// A minimum-cost assignment whose column vector is lexicographically
/// smallest among all optima (totals within [`tie_tolerance`] count as tied).
///
/// Row by row, the smallest column that still admits an optimal completion is
/// fixed. This costs O(n²) extra solves, which is fine for hand-sized inputs.
pub fn solve_lexicographic(cost: &[Vec<f64>]) -> Result<Assignment> {
    check(cost)?;
    let n = cost.len();
    let opt = total(cost, &potentials(cost));
    let tol = tie_tolerance(cost);
    let mut fixed_cost = 0.0;
    let mut cols = Vec::with_capacity(n);
    let mut free: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let rest_rows: Vec<usize> = (i + 1..n).collect();
        let mut chosen = None;
        for (k, &j) in free.iter().enumerate() {
            let rest_cols: Vec<usize> = free.iter().copied().filter(|&c| c != j).collect();
            let candidate = fixed_cost + cost[i][j] + restricted_optimum(cost, &rest_rows, &rest_cols);
            if candidate <= opt + tol {
                chosen = Some(k);
                break;
            }
        }
        // The optimum itself always admits a completion; fall back to the
        // cheapest column only if rounding hid it.
        let k = chosen.unwrap_or_else(|| {
            (0..free.len())
                .min_by(|&a, &b| cost[i][free[a]].total_cmp(&cost[i][free[b]]))
                .expect("free columns remain")
        });
        let j = free.remove(k);
        fixed_cost += cost[i][j];
        cols.push(j);
    }
    Ok(Assignment {
        cost: total(cost, &cols),
        cols,
    })
}
