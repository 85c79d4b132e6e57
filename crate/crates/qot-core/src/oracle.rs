//! Independent brute-force primal solver for small instances.
//!
//! Minimizes Σ π c + (ε/2) Σ π²/(p ⊗ q) over the transportation polytope by
//! projected gradient descent with a constant step, using Dykstra's
//! alternating row/column simplex projections for the exact Euclidean
//! projection. Deliberately shares no code path with the dual solver beyond
//! the scalar piecewise-linear root used inside the simplex projection.

use crate::coupling::{extract_coupling, Coupling};
use crate::cost::CostSpec;
use crate::error::{QotError, Result};
use crate::instance::Instance;
use crate::measures::DiscreteMeasure;
use crate::solver::{scalar_foc_solve, solve_dual, SolveOptions};

/// Dense-regime limit on n·m.
pub const ORACLE_CELL_LIMIT: usize = 400;

const DYKSTRA_TOL: f64 = 1e-12;
const DYKSTRA_MAX_CYCLES: usize = 1_000_000;

/// Euclidean projection of `x` onto Π(P, Q) = {π ≥ 0, rows sum to p, columns
/// sum to q} via Dykstra over the two row/column simplex products.
fn project_polytope(x: &mut [Vec<f64>], p: &[f64], q: &[f64]) -> Result<()> {
    let n = p.len();
    let m = q.len();
    let mut corr_r = vec![vec![0.0f64; m]; n];
    let mut corr_c = vec![vec![0.0f64; m]; n];
    let mut prev = x.to_vec();
    for _cycle in 0..DYKSTRA_MAX_CYCLES {
        // Rows: project x + corr_r onto {rows ≥ 0, row i sums to p_i}.
        for i in 0..n {
            let shifted: Vec<f64> = (0..m).map(|j| x[i][j] + corr_r[i][j]).collect();
            let row = project_scaled_simplex(&shifted, p[i]);
            for j in 0..m {
                corr_r[i][j] = shifted[j] - row[j];
                x[i][j] = row[j];
            }
        }
        // Columns: project x + corr_c onto {cols ≥ 0, col j sums to q_j}.
        for j in 0..m {
            let shifted: Vec<f64> = (0..n).map(|i| x[i][j] + corr_c[i][j]).collect();
            let col = project_scaled_simplex(&shifted, q[j]);
            for i in 0..n {
                corr_c[i][j] = shifted[i] - col[i];
                x[i][j] = col[i];
            }
        }
        let mut change = 0.0f64;
        let mut row_violation = 0.0f64;
        for i in 0..n {
            let mut rs = 0.0;
            for j in 0..m {
                change = change.max((x[i][j] - prev[i][j]).abs());
                rs += x[i][j];
            }
            row_violation = row_violation.max((rs - p[i]).abs());
        }
        if change <= DYKSTRA_TOL * 0.1 && row_violation <= DYKSTRA_TOL {
            return Ok(());
        }
        for (dst, src) in prev.iter_mut().zip(x.iter()) {
            dst.clone_from(src);
        }
    }
    Err(QotError::Internal("dykstra projection did not converge".into()))
}

/// Projection onto {v ≥ 0, Σ v = s}: v_k = (x_k − τ)₊ with τ the root of
/// Σ (x_k − τ)₊ = s, found by the exact piecewise-linear solver.
fn project_scaled_simplex(x: &[f64], s: f64) -> Vec<f64> {
    let weights = vec![1.0; x.len()];
    // Σ (t + x_k)₊ = s in t, so τ = −t and v_k = (x_k − τ)₊ = (x_k + t)₊.
    let t = scalar_foc_solve(x, &weights, s);
    x.iter().map(|&xk| (xk + t).max(0.0)).collect()
}

/// Direct minimization of the regularized primal over Π(P, Q).
pub fn qp_primal_solve(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    cost: &CostSpec,
    eps: f64,
    tol: f64,
) -> Result<Coupling> {
    p.validate()?;
    q.validate()?;
    let n = p.len();
    let m = q.len();
    if n * m > ORACLE_CELL_LIMIT {
        return Err(QotError::OracleSizeLimit { cells: n * m, limit: ORACLE_CELL_LIMIT });
    }
    if !(eps > 0.0) {
        return Err(QotError::InvalidParameter("eps must be positive".into()));
    }
    let c = &cost.matrix;
    let pw = &p.weights;
    let qw = &q.weights;

    // Hessian of the quadratic term in mass coordinates is diag(ε / (p_i q_j)).
    let min_pq = pw
        .iter()
        .flat_map(|&pi| qw.iter().map(move |&qj| pi * qj))
        .fold(f64::INFINITY, f64::min);
    let step = min_pq / eps;

    // Start from the independence coupling, which is feasible.
    let mut pi: Vec<Vec<f64>> =
        (0..n).map(|i| (0..m).map(|j| pw[i] * qw[j]).collect()).collect();
    let mut trial = vec![vec![0.0f64; m]; n];
    let max_iters = 200_000usize;
    for _it in 0..max_iters {
        for i in 0..n {
            for j in 0..m {
                let grad = c[i][j] + eps * pi[i][j] / (pw[i] * qw[j]);
                trial[i][j] = pi[i][j] - step * grad;
            }
        }
        project_polytope(&mut trial, pw, qw)?;
        let mut stationarity = 0.0f64;
        for i in 0..n {
            for j in 0..m {
                stationarity = stationarity.max((trial[i][j] - pi[i][j]).abs());
            }
        }
        std::mem::swap(&mut pi, &mut trial);
        if stationarity / step <= tol {
            let zeta: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..m).map(|j| pi[i][j] / (pw[i] * qw[j])).collect())
                .collect();
            let zmax = zeta.iter().flat_map(|r| r.iter()).fold(0.0f64, |a, &b| a.max(b));
            return Coupling::from_zeta(zeta, p, q, 1e-10 * zmax);
        }
    }
    Err(QotError::NotConverged { sweeps: max_iters, residual: f64::NAN })
}

/// Objective the oracle minimizes, for feasibility comparisons.
pub fn primal_objective(
    coup: &Coupling,
    cost: &CostSpec,
    eps: f64,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
) -> f64 {
    crate::coupling::primal_value(coup, cost, eps, p, q)
}

/// L∞ difference of the densities produced by the dual solver and the QP
/// oracle on the same instance.
pub fn oracle_agreement(inst: &Instance, tol: f64) -> Result<f64> {
    let solve = solve_dual(&inst.p, &inst.q, &inst.cost, inst.eps, &SolveOptions::default())?;
    if !solve.potentials.converged {
        return Err(QotError::NotConverged {
            sweeps: solve.sweeps,
            residual: solve.potentials.foc_residual_inf,
        });
    }
    let dual_coup = extract_coupling(&solve.potentials, &inst.p, &inst.q, &inst.cost)?;
    let qp_coup = qp_primal_solve(&inst.p, &inst.q, &inst.cost, inst.eps, tol)?;
    let mut diff = 0.0f64;
    for i in 0..inst.n() {
        for j in 0..inst.m() {
            diff = diff.max((dual_coup.zeta[i][j] - qp_coup.zeta[i][j]).abs());
        }
    }
    Ok(diff)
}
