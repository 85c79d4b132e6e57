//! Transport costs with a declared Lipschitz constant.
//!
//! A [`CostSpec`] always carries the full cost matrix on the instance grid.
//! Analytic kinds (squared Euclidean, the two-fiber piecewise-linear cost of
//! the support-instability counterexample) can additionally be evaluated at
//! arbitrary points, which the harness needs when comparing instances whose
//! atoms differ.

use serde::{Deserialize, Serialize};

use crate::error::{QotError, Result};
use crate::measures::{euclidean, DiscreteMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    SqEuclidean,
    ExplicitMatrix,
    Example62Analytic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostSpec {
    pub kind: CostKind,
    /// Cost at support-point pairs, n×m, populated for all kinds.
    pub matrix: Vec<Vec<f64>>,
    /// Declared Lipschitz constant with respect to the concatenated Euclidean
    /// norm on pairs.
    pub lipschitz: f64,
    /// Optional sup of |c| over the working region; defaults to the grid max.
    pub bound: Option<f64>,
}

/// The piecewise-linear ramp of the counterexample cost: 0 on (-∞, 1/4],
/// slope 32/5 on (1/4, 1/2), constant 8/5 on [1/2, ∞). Clamping extends it to
/// a Lipschitz function on all of ℝ.
pub fn example62_u(x: f64) -> f64 {
    if x <= 0.25 {
        0.0
    } else if x < 0.5 {
        (32.0 / 5.0) * (x - 0.25)
    } else {
        8.0 / 5.0
    }
}

/// Cost of the counterexample family: c(x, 0) = u(x), c(x, 1) = 2 - u(x).
pub fn example62_cost(x: f64, fiber: f64) -> Result<f64> {
    if fiber == 0.0 {
        Ok(example62_u(x))
    } else if fiber == 1.0 {
        Ok(2.0 - example62_u(x))
    } else {
        Err(QotError::CostNotEvaluable(format!(
            "example62 cost is defined on fibers {{0, 1}}, got y = {fiber}"
        )))
    }
}

impl CostSpec {
    /// Quadratic cost ½‖x - y‖² on the atom grid. The default Lipschitz
    /// constant is √2 · max_ij ‖x_i - y_j‖, the gradient bound over the hull.
    pub fn sq_euclidean(
        p: &DiscreteMeasure,
        q: &DiscreteMeasure,
        lipschitz: Option<f64>,
    ) -> Result<Self> {
        if p.dim != q.dim {
            return Err(QotError::DimensionMismatch { left: p.dim, right: q.dim });
        }
        let mut max_dist = 0.0f64;
        let matrix: Vec<Vec<f64>> = p
            .points
            .iter()
            .map(|x| {
                q.points
                    .iter()
                    .map(|y| {
                        let d = euclidean(x, y);
                        max_dist = max_dist.max(d);
                        0.5 * d * d
                    })
                    .collect()
            })
            .collect();
        let lip = lipschitz.unwrap_or(std::f64::consts::SQRT_2 * max_dist);
        let spec = CostSpec {
            kind: CostKind::SqEuclidean,
            matrix,
            lipschitz: lip,
            bound: Some(0.5 * max_dist * max_dist),
        };
        spec.check_lipschitz_on_grid(&p.points, &q.points, lip)?;
        Ok(spec)
    }

    /// Cost given directly as a matrix on the atom grid.
    pub fn explicit(
        matrix: Vec<Vec<f64>>,
        p: &DiscreteMeasure,
        q: &DiscreteMeasure,
        lipschitz: f64,
    ) -> Result<Self> {
        if matrix.len() != p.len() || matrix.iter().any(|r| r.len() != q.len()) {
            return Err(QotError::InvalidParameter(format!(
                "cost matrix must be {}x{}",
                p.len(),
                q.len()
            )));
        }
        let spec = CostSpec { kind: CostKind::ExplicitMatrix, matrix, lipschitz, bound: None };
        spec.check_lipschitz_on_grid(&p.points, &q.points, lipschitz)?;
        Ok(spec)
    }

    /// The counterexample cost on a grid with Q supported on {0, 1} ⊂ ℝ.
    /// Uses L = 32/5, the slope of u.
    pub fn example62(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<Self> {
        if p.dim != 1 || q.dim != 1 {
            return Err(QotError::InvalidParameter("example62 cost lives on ℝ × {0,1}".into()));
        }
        let matrix: Result<Vec<Vec<f64>>> = p
            .points
            .iter()
            .map(|x| q.points.iter().map(|y| example62_cost(x[0], y[0])).collect())
            .collect();
        Ok(CostSpec {
            kind: CostKind::Example62Analytic,
            matrix: matrix?,
            lipschitz: 32.0 / 5.0,
            bound: Some(2.0),
        })
    }

    /// All-zero cost on the atom grid.
    pub fn zero(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Self {
        CostSpec {
            kind: CostKind::ExplicitMatrix,
            matrix: vec![vec![0.0; q.len()]; p.len()],
            lipschitz: 1.0,
            bound: Some(0.0),
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn cols(&self) -> usize {
        self.matrix.first().map_or(0, |r| r.len())
    }

    /// sup |c| over the working region: the declared bound if present, else
    /// the grid maximum.
    pub fn sup_abs(&self) -> f64 {
        let grid = self
            .matrix
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |acc, &x| acc.max(x.abs()));
        match self.bound {
            Some(b) => b.max(grid),
            None => grid,
        }
    }

    /// (1 + t) · c. The result is an explicit matrix unless t = 0, since the
    /// scaled cost no longer matches an analytic kind entry for entry.
    pub fn scaled(&self, factor: f64) -> CostSpec {
        if factor == 1.0 {
            return self.clone();
        }
        CostSpec {
            kind: CostKind::ExplicitMatrix,
            matrix: self
                .matrix
                .iter()
                .map(|r| r.iter().map(|&x| x * factor).collect())
                .collect(),
            lipschitz: self.lipschitz * factor.abs(),
            bound: self.bound.map(|b| b * factor.abs()),
        }
    }

    /// Verifies |c(z) - c(z')| ≤ L ‖z - z'‖ over grid pair-pairs; exhaustive
    /// for small grids, strided sampling above 4e6 comparisons.
    pub fn check_lipschitz_on_grid(
        &self,
        p_points: &[Vec<f64>],
        q_points: &[Vec<f64>],
        lipschitz: f64,
    ) -> Result<()> {
        let n = p_points.len();
        let m = q_points.len();
        let cells = n * m;
        let stride = if cells * cells > 4_000_000 {
            (cells * cells / 4_000_000).max(1)
        } else {
            1
        };
        let mut counter = 0usize;
        for i in 0..n {
            for j in 0..m {
                for k in 0..n {
                    for l in 0..m {
                        counter += 1;
                        if !counter.is_multiple_of(stride) {
                            continue;
                        }
                        let dz = pair_distance(&p_points[i], &q_points[j], &p_points[k], &q_points[l]);
                        let dc = (self.matrix[i][j] - self.matrix[k][l]).abs();
                        if dc > lipschitz * dz * (1.0 + 1e-9) + 1e-12 {
                            return Err(QotError::InvalidParameter(format!(
                                "cost violates the declared Lipschitz constant {lipschitz}: \
                                 |Δc| = {dc} over ‖Δz‖ = {dz}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn pair_distance(x: &[f64], y: &[f64], x2: &[f64], y2: &[f64]) -> f64 {
    let dx: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    let dy: f64 = y.iter().zip(y2).map(|(a, b)| (a - b) * (a - b)).sum();
    (dx + dy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u_matches_its_closed_form() {
        assert_eq!(example62_u(0.0), 0.0);
        assert_eq!(example62_u(0.25), 0.0);
        assert!((example62_u(0.375) - 0.8).abs() < 1e-15);
        assert!((example62_u(0.5) - 1.6).abs() < 1e-15);
        assert!((example62_u(1.0) - 1.6).abs() < 1e-15);
        // ∫ u = 1/4 · (0 + 1.6)/2 + 1/2 · 1.6 = 1 exactly.
        let trap = 0.25f64 * 0.8 + 0.5 * 1.6;
        assert!((trap - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sq_euclidean_entries_are_half_squared_distance() {
        let p = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let q = DiscreteMeasure::uniform(vec![vec![1.0, 0.0]]).unwrap();
        let c = CostSpec::sq_euclidean(&p, &q, None).unwrap();
        assert!((c.matrix[0][0] - 0.5).abs() < 1e-15);
        assert!((c.matrix[1][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_check_rejects_steep_matrix() {
        let p = DiscreteMeasure::uniform(vec![vec![0.0], vec![1e-3]]).unwrap();
        let q = DiscreteMeasure::uniform(vec![vec![0.5]]).unwrap();
        let err = CostSpec::explicit(vec![vec![0.0], vec![1.0]], &p, &q, 1.0).unwrap_err();
        assert!(err.to_string().contains("Lipschitz"));
    }
}
