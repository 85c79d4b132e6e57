//! Exact solver for the balanced transportation problem
//!
//! ```text
//!     min Σ_ij c_ij x_ij   s.t.  Σ_j x_ij = s_i,  Σ_i x_ij = d_j,  x ≥ 0,
//! ```
//!
//! by the classical transportation simplex (MODI): northwest-corner start,
//! spanning-tree basis, dual prices from the tree, most-negative reduced cost
//! pivoting with deterministic tie-breaks. Termination is checked against a
//! reduced-cost tolerance scaled by the cost magnitude, so optima are exact up
//! to floating-point rounding.

use crate::error::{QotError, Result};

pub struct TransportPlan {
    pub cost: f64,
    /// Basic cells (i, j, flow); flows may be zero on degenerate arcs.
    pub flows: Vec<(usize, usize, f64)>,
}

/// Solves the transportation problem. `supply` and `demand` must be positive
/// and have equal sums (demand is rescaled to the supply total internally).
pub fn solve_transport<C>(supply: &[f64], demand: &[f64], cost: C) -> Result<TransportPlan>
where
    C: Fn(usize, usize) -> f64,
{
    let n = supply.len();
    let m = demand.len();
    if n == 0 || m == 0 {
        return Err(QotError::InvalidParameter("transport: empty marginal".into()));
    }
    let s_tot: f64 = supply.iter().sum();
    let d_tot: f64 = demand.iter().sum();
    if s_tot <= 0.0 || d_tot <= 0.0 {
        return Err(QotError::InvalidParameter("transport: nonpositive total mass".into()));
    }
    if ((s_tot - d_tot) / s_tot).abs() > 1e-9 {
        return Err(QotError::InvalidParameter(format!(
            "transport: unbalanced totals {s_tot} vs {d_tot}"
        )));
    }
    let scale = s_tot / d_tot;
    let s: Vec<f64> = supply.to_vec();
    let d: Vec<f64> = demand.iter().map(|&x| x * scale).collect();

    let c: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|j| cost(i, j)).collect()).collect();
    let cmax = c
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let rc_tol = -1e-12 * (1.0 + cmax);

    // Northwest-corner initial basis: n + m - 1 arcs forming a staircase tree.
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(n + m - 1);
    {
        let mut rs = s.clone();
        let mut rd = d.clone();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let theta = rs[i].min(rd[j]).max(0.0);
            basis.push((i, j, theta));
            rs[i] -= theta;
            rd[j] -= theta;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if rs[i] <= rd[j] && i < n - 1 {
                i += 1;
            } else if j < m - 1 {
                j += 1;
            } else {
                i += 1;
            }
        }
    }
    debug_assert_eq!(basis.len(), n + m - 1);

    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; m];
    let max_pivots = 2000 + 200 * (n + m) * n.max(m);

    for _pivot in 0..max_pivots {
        compute_duals(n, m, &basis, &c, &mut u, &mut v)?;

        // Entering arc: most negative reduced cost, lexicographic tie-break.
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            for j in 0..m {
                let rc = c[i][j] - u[i] - v[j];
                if rc < rc_tol && best.is_none_or(|(_, _, b)| rc < b) {
                    best = Some((i, j, rc));
                }
            }
        }
        let (ei, ej) = match best {
            None => {
                let total: f64 = basis.iter().map(|&(i, j, f)| f * c[i][j]).sum();
                return Ok(TransportPlan { cost: total, flows: basis });
            }
            Some((i, j, _)) => (i, j),
        };

        // Unique tree path from row node ei to column node n + ej. Edges at
        // even positions along the path get -θ, odd positions +θ; the path has
        // odd length in the bipartite tree, so both endpoints stay balanced
        // against the entering arc's +θ.
        let path = tree_path(n, m, &basis, ei, n + ej)?;
        let mut theta = f64::INFINITY;
        let mut leave: Option<usize> = None;
        for (pos, &arc_idx) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let (bi, bj, f) = basis[arc_idx];
                let better = match leave {
                    None => true,
                    Some(l) => f < theta || (f == theta && (bi, bj) < (basis[l].0, basis[l].1)),
                };
                if better {
                    theta = f;
                    leave = Some(arc_idx);
                }
            }
        }
        let leave = leave.ok_or_else(|| QotError::Internal("transport: no leaving arc".into()))?;
        for (pos, &arc_idx) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis[arc_idx].2 = (basis[arc_idx].2 - theta).max(0.0);
            } else {
                basis[arc_idx].2 += theta;
            }
        }
        basis[leave] = (ei, ej, theta);
    }
    Err(QotError::Internal("transport: pivot limit exceeded".into()))
}

fn compute_duals(
    n: usize,
    m: usize,
    basis: &[(usize, usize, f64)],
    c: &[Vec<f64>],
    u: &mut [f64],
    v: &mut [f64],
) -> Result<()> {
    // Node indexing: rows 0..n, columns n..n+m. Solve u_i + v_j = c_ij on the
    // basis tree, rooted at row 0 with u_0 = 0.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + m];
    for (idx, &(i, j, _)) in basis.iter().enumerate() {
        adj[i].push((n + j, idx));
        adj[n + j].push((i, idx));
    }
    let mut seen = vec![false; n + m];
    let mut stack = vec![0usize];
    seen[0] = true;
    u[0] = 0.0;
    while let Some(node) = stack.pop() {
        for &(next, arc) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                let (i, j, _) = basis[arc];
                if next >= n {
                    v[j] = c[i][j] - u[i];
                } else {
                    u[i] = c[i][j] - v[j];
                }
                stack.push(next);
            }
        }
    }
    if seen.iter().all(|&b| b) {
        Ok(())
    } else {
        Err(QotError::Internal("transport: basis is not spanning".into()))
    }
}

fn tree_path(
    n: usize,
    m: usize,
    basis: &[(usize, usize, f64)],
    from: usize,
    to: usize,
) -> Result<Vec<usize>> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + m];
    for (idx, &(i, j, _)) in basis.iter().enumerate() {
        adj[i].push((n + j, idx));
        adj[n + j].push((i, idx));
    }
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n + m];
    let mut seen = vec![false; n + m];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(from);
    seen[from] = true;
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &(next, arc) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                prev[next] = Some((node, arc));
                queue.push_back(next);
            }
        }
    }
    if !seen[to] {
        return Err(QotError::Internal("transport: basis path not found".into()));
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let (parent, arc) = prev[node].unwrap();
        path.push(arc);
        node = parent;
    }
    path.reverse();
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_swap() {
        // Move 0.5 mass across unit distance twice: cost 1.
        let s = [0.5, 0.5];
        let d = [0.5, 0.5];
        let c = [[0.0, 1.0], [1.0, 0.0]];
        let plan = solve_transport(&s, &d, |i, j| c[i][j]).unwrap();
        assert!((plan.cost - 0.0).abs() < 1e-12);

        let c2 = [[1.0, 0.0], [0.0, 1.0]];
        let plan2 = solve_transport(&s, &d, |i, j| c2[i][j]).unwrap();
        assert!((plan2.cost - 0.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_diracs() {
        let plan = solve_transport(&[1.0], &[1.0], |_, _| 2.5).unwrap();
        assert!((plan.cost - 2.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_supplies() {
        // Equal supplies/demands force degenerate pivots; result must still be
        // the assignment optimum.
        let s = [0.25; 4];
        let d = [0.25; 4];
        let c = [
            [0.0, 5.0, 5.0, 5.0],
            [5.0, 0.0, 5.0, 5.0],
            [5.0, 5.0, 0.0, 5.0],
            [5.0, 5.0, 5.0, 0.0],
        ];
        let plan = solve_transport(&s, &d, |i, j| c[i][j]).unwrap();
        assert!(plan.cost.abs() < 1e-12);
    }
}
