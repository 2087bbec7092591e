//! Dense minimum-cost perfect assignment by shortest augmenting paths with
//! dual potentials (the O(n³) Hungarian method).

/// Optimal assignment for a square cost matrix given row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `columns[i]` is the column matched to row `i`.
    pub columns: Vec<usize>,
    pub total_cost: f64,
    /// Largest violation of dual feasibility or complementary slackness,
    /// relative to the largest cost entry (or absolute when costs are below 1).
    pub dual_residual: f64,
}

pub fn solve(n: usize, cost: &[f64]) -> Assignment {
    assert_eq!(cost.len(), n * n, "cost matrix must be n × n");
    if n == 0 {
        return Assignment { columns: Vec::new(), total_cost: 0.0, dual_residual: 0.0 };
    }
    let c = |i: usize, j: usize| cost[(i - 1) * n + (j - 1)];
    // 1-based arrays, index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = c(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
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
    let mut columns = vec![0; n];
    for j in 1..=n {
        columns[row_of[j] - 1] = j - 1;
    }
    let total_cost = columns.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    let scale = cost.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
    let mut residual: f64 = 0.0;
    for i in 1..=n {
        for j in 1..=n {
            let reduced = c(i, j) - u[i] - v[j];
            residual = residual.max(-reduced);
            if columns[i - 1] == j - 1 {
                residual = residual.max(reduced.abs());
            }
        }
    }
    Assignment { columns, total_cost, dual_residual: residual / scale }
}
