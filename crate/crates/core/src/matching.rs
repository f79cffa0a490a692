//! Minimum-cost perfect matching on square integer cost matrices
//! (Hungarian algorithm with row/column potentials, O(n^3)).

use crate::error::{dimension, Result};

/// Optimal assignment: `assignment[row] = column`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub cost: i64,
    pub assignment: Vec<usize>,
}

/// Solves `min over permutations pi of sum_i cost[i][pi(i)]`.
pub fn min_cost_assignment(cost: &[Vec<i64>]) -> Result<Assignment> {
    let n = cost.len();
    if let Some(row) = cost.iter().find(|row| row.len() != n) {
        return dimension(format!("cost matrix is not square: {n} rows, a row of length {}", row.len()));
    }
    if n == 0 {
        return Ok(Assignment { cost: 0, assignment: Vec::new() });
    }

    // 1-based arrays; column 0 is a virtual source.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
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

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(Assignment { cost: total, assignment })
}
