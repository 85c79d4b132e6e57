//! A problem instance: marginals, cost, and regularization parameter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cost::{example62_cost, CostKind, CostSpec};
use crate::error::{QotError, Result};
use crate::measures::{point_key, DiscreteMeasure};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub p: DiscreteMeasure,
    pub q: DiscreteMeasure,
    pub cost: CostSpec,
    pub eps: f64,
}

impl Instance {
    pub fn new(p: DiscreteMeasure, q: DiscreteMeasure, cost: CostSpec, eps: f64) -> Result<Self> {
        p.validate()?;
        q.validate()?;
        if cost.rows() != p.len() || cost.cols() != q.len() {
            return Err(QotError::InvalidParameter(format!(
                "cost matrix is {}x{} but the marginals have {} and {} atoms",
                cost.rows(),
                cost.cols(),
                p.len(),
                q.len()
            )));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(QotError::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        Ok(Instance { p, q, cost, eps })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn m(&self) -> usize {
        self.q.len()
    }

    /// An evaluator able to answer `cost(x, y)` at arbitrary points for
    /// analytic kinds and at own-grid atoms for explicit matrices.
    pub fn evaluator(&self) -> CostEvaluator<'_> {
        let (p_idx, q_idx) = match self.cost.kind {
            CostKind::ExplicitMatrix => (self.p.atom_index(), self.q.atom_index()),
            _ => (BTreeMap::new(), BTreeMap::new()),
        };
        CostEvaluator { inst: self, p_idx, q_idx }
    }

    /// One-off cost evaluation; build an [`Instance::evaluator`] for loops.
    pub fn cost_at(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.evaluator().cost_at(x, y)
    }
}

pub struct CostEvaluator<'a> {
    inst: &'a Instance,
    p_idx: BTreeMap<Vec<u64>, usize>,
    q_idx: BTreeMap<Vec<u64>, usize>,
}

impl CostEvaluator<'_> {
    pub fn cost_at(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self.inst.cost.kind {
            CostKind::SqEuclidean => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok(0.5 * d2)
            }
            CostKind::Example62Analytic => {
                if x.len() != 1 || y.len() != 1 {
                    return Err(QotError::CostNotEvaluable(
                        "example62 cost expects one-dimensional points".into(),
                    ));
                }
                example62_cost(x[0], y[0])
            }
            CostKind::ExplicitMatrix => {
                let i = self.p_idx.get(&point_key(x)).copied();
                let j = self.q_idx.get(&point_key(y)).copied();
                match (i, j) {
                    (Some(i), Some(j)) => Ok(self.inst.cost.matrix[i][j]),
                    _ => Err(QotError::CostNotEvaluable(
                        "explicit cost matrix is only defined on its own atom grid".into(),
                    )),
                }
            }
        }
    }
}
