//! Primal objects recovered from converged potentials: the density
//! ζ = (h − c)₊/ε with respect to P⊗Q, the coupling masses π_ij = ζ_ij p_i q_j,
//! and the support Σ = {ζ > 0}.

use serde::{Deserialize, Serialize};

use crate::cost::CostSpec;
use crate::error::{QotError, Result};
use crate::measures::DiscreteMeasure;
use crate::solver::Potentials;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coupling {
    /// Density dπ/d(P⊗Q) on the product grid.
    pub zeta: Vec<Vec<f64>>,
    /// Probability masses π_ij = ζ_ij p_i q_j.
    pub mass: Vec<Vec<f64>>,
    /// Entries with ζ above this belong to the support. Zero on exact
    /// arithmetic paths; a small floor relative to max ζ for solver output.
    pub support_tol: f64,
}

impl Coupling {
    /// Builds the coupling from density values; support_tol 0 marks an exact
    /// construction.
    pub fn from_zeta(
        zeta: Vec<Vec<f64>>,
        p: &DiscreteMeasure,
        q: &DiscreteMeasure,
        support_tol: f64,
    ) -> Result<Self> {
        if zeta.len() != p.len() || zeta.iter().any(|r| r.len() != q.len()) {
            return Err(QotError::InvalidParameter("zeta must be n x m".into()));
        }
        let mass = zeta
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, &z)| z * p.weights[i] * q.weights[j])
                    .collect()
            })
            .collect();
        Ok(Coupling { zeta, mass, support_tol })
    }

    pub fn n(&self) -> usize {
        self.zeta.len()
    }

    pub fn m(&self) -> usize {
        self.zeta.first().map_or(0, |r| r.len())
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().flat_map(|r| r.iter()).sum()
    }

    /// (max row-sum deviation from p, max column-sum deviation from q).
    pub fn marginal_errors(&self, p: &DiscreteMeasure, q: &DiscreteMeasure) -> (f64, f64) {
        let row = (0..self.n())
            .map(|i| (self.mass[i].iter().sum::<f64>() - p.weights[i]).abs())
            .fold(0.0f64, f64::max);
        let col = (0..self.m())
            .map(|j| {
                ((0..self.n()).map(|i| self.mass[i][j]).sum::<f64>() - q.weights[j]).abs()
            })
            .fold(0.0f64, f64::max);
        (row, col)
    }
}

/// ζ_ij = (1/ε)(f_i + g_j − c_ij)₊ from converged potentials. Non-converged
/// iterates are rejected.
pub fn extract_coupling(
    pot: &Potentials,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    cost: &CostSpec,
) -> Result<Coupling> {
    if !pot.converged {
        return Err(QotError::NotConverged { sweeps: 0, residual: pot.foc_residual_inf });
    }
    let zeta: Vec<Vec<f64>> = (0..p.len())
        .map(|i| {
            (0..q.len())
                .map(|j| (pot.f[i] + pot.g[j] - cost.matrix[i][j]).max(0.0) / pot.eps)
                .collect()
        })
        .collect();
    let zmax = zeta.iter().flat_map(|r| r.iter()).fold(0.0f64, |a, &b| a.max(b));
    Coupling::from_zeta(zeta, p, q, 1e-10 * zmax)
}

/// Index pairs (i, j) with ζ_ij > support_tol.
pub fn extract_support(coup: &Coupling) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, row) in coup.zeta.iter().enumerate() {
        for (j, &z) in row.iter().enumerate() {
            if z > coup.support_tol {
                out.push((i, j));
            }
        }
    }
    out
}

/// Support as concatenated point pairs (x_i, y_j) in ℝ^{2d}, for Hausdorff
/// comparisons.
pub fn support_points(
    coup: &Coupling,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
) -> Vec<Vec<f64>> {
    extract_support(coup)
        .into_iter()
        .map(|(i, j)| {
            let mut z = p.points[i].clone();
            z.extend_from_slice(&q.points[j]);
            z
        })
        .collect()
}

/// Σ π_ij c_ij + (ε/2) Σ p_i q_j ζ_ij².
pub fn primal_value(
    coup: &Coupling,
    cost: &CostSpec,
    eps: f64,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
) -> f64 {
    let mut v = 0.0;
    for i in 0..coup.n() {
        for j in 0..coup.m() {
            v += coup.mass[i][j] * cost.matrix[i][j];
            v += 0.5 * eps * p.weights[i] * q.weights[j] * coup.zeta[i][j] * coup.zeta[i][j];
        }
    }
    v
}

/// primal − dual; nonnegative up to rounding and ≤ tol at the optimum.
pub fn duality_gap(
    coup: &Coupling,
    pot: &Potentials,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    cost: &CostSpec,
) -> f64 {
    primal_value(coup, cost, pot.eps, p, q) - crate::solver::dual_objective(pot, p, q, cost)
}
