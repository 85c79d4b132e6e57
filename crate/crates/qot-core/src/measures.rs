//! Discrete probability measures and the metrics comparing them.
//!
//! A [`DiscreteMeasure`] is a weighted point cloud in ℝ^d with strictly
//! positive weights summing to one. All metrics are exact: 1-Wasserstein via
//! the CDF formula in dimension one and a transportation simplex above,
//! total variation as half the L¹ distance of weights on exactly matched
//! atoms, Hausdorff distance by pairwise scan, and open-ball mass minima.
//! [`audit_class_membership`] checks the structural conditions under which
//! the stability constants are uniform over a class of data.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::cost::CostSpec;
use crate::error::{QotError, Result};
use crate::transport::solve_transport;

/// Allowed drift of the weight sum from 1.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.len());
        let m = Self { dim, points, weights };
        m.validate()?;
        Ok(m)
    }

    /// Dirac mass at a single point.
    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    /// Uniform weights on the given points.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(QotError::InvalidMeasure("points: empty".into()));
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(QotError::InvalidMeasure("points: empty".into()));
        }
        if self.points.len() != self.weights.len() {
            return Err(QotError::InvalidMeasure(format!(
                "weights: {} entries for {} points",
                self.weights.len(),
                self.points.len()
            )));
        }
        for (k, p) in self.points.iter().enumerate() {
            if p.len() != self.dim {
                return Err(QotError::InvalidMeasure(format!(
                    "points: entry {k} has dimension {}, expected {}",
                    p.len(),
                    self.dim
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(QotError::InvalidMeasure(format!("points: entry {k} is not finite")));
            }
        }
        for (k, &w) in self.weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(QotError::InvalidMeasure(format!(
                    "weights: entry {k} is not strictly positive ({w})"
                )));
            }
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(QotError::InvalidMeasure(format!(
                "weights: sum {sum} deviates from 1 by more than {WEIGHT_SUM_TOL:e}"
            )));
        }
        let mut seen: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        for (k, p) in self.points.iter().enumerate() {
            if let Some(&first) = seen.get(&point_key(p)) {
                return Err(QotError::InvalidMeasure(format!(
                    "points: duplicate point at indices {first} and {k}"
                )));
            }
            seen.insert(point_key(p), k);
        }
        Ok(())
    }

    /// Checks that every atom lies inside the box [lo, hi] (componentwise).
    pub fn check_in_box(&self, lo: &[f64], hi: &[f64]) -> Result<()> {
        if lo.len() != self.dim || hi.len() != self.dim {
            return Err(QotError::DimensionMismatch { left: lo.len(), right: self.dim });
        }
        for (k, p) in self.points.iter().enumerate() {
            for (c, (&l, &h)) in p.iter().zip(lo.iter().zip(hi)) {
                if *c < l || *c > h {
                    return Err(QotError::InvalidMeasure(format!(
                        "points: entry {k} lies outside the ambient box"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.points)
    }

    /// Index of atoms by exact coordinates.
    pub fn atom_index(&self) -> BTreeMap<Vec<u64>, usize> {
        self.points
            .iter()
            .enumerate()
            .map(|(k, p)| (point_key(p), k))
            .collect()
    }
}

/// Exact-coordinate key; normalizes -0.0 to 0.0 so equal floats map together.
pub fn point_key(p: &[f64]) -> Vec<u64> {
    p.iter()
        .map(|&x| if x == 0.0 { 0.0f64.to_bits() } else { x.to_bits() })
        .collect()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn diameter(points: &[Vec<f64>]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d = d.max(euclidean(a, b));
        }
    }
    d
}

/// Returns normally iff all [`DiscreteMeasure`] invariants hold.
pub fn validate_measure(m: &DiscreteMeasure) -> Result<()> {
    m.validate()
}

/// Exact 1-Wasserstein distance under the Euclidean ground metric.
pub fn wasserstein1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.is_empty() || nu.is_empty() {
        return Err(QotError::InvalidMeasure("points: empty".into()));
    }
    if mu.dim != nu.dim {
        return Err(QotError::DimensionMismatch { left: mu.dim, right: nu.dim });
    }
    if mu.dim == 1 {
        return Ok(w1_line(mu, nu));
    }
    let plan = solve_transport(&mu.weights, &nu.weights, |i, j| {
        euclidean(&mu.points[i], &nu.points[j])
    })?;
    Ok(plan.cost)
}

/// d = 1 closed form: ∫ |F_mu - F_nu| dt over the merged atom positions.
fn w1_line(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(mu.len() + nu.len());
    for (p, &w) in mu.points.iter().zip(&mu.weights) {
        events.push((p[0], w));
    }
    for (p, &w) in nu.points.iter().zip(&nu.weights) {
        events.push((p[0], -w));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0f64;
    let mut cdf_diff = 0.0f64;
    let mut prev = events[0].0;
    for &(x, dw) in &events {
        total += cdf_diff.abs() * (x - prev);
        cdf_diff += dw;
        prev = x;
    }
    total
}

/// sup_A |mu(A) - nu(A)| as half the L¹ weight distance on the merged atom
/// set; atoms are identified by exact coordinates.
pub fn total_variation(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.dim != nu.dim {
        return Err(QotError::DimensionMismatch { left: mu.dim, right: nu.dim });
    }
    let mut merged: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    for (p, &w) in mu.points.iter().zip(&mu.weights) {
        *merged.entry(point_key(p)).or_insert(0.0) += w;
    }
    for (p, &w) in nu.points.iter().zip(&nu.weights) {
        *merged.entry(point_key(p)).or_insert(0.0) -= w;
    }
    Ok(0.5 * merged.values().map(|d| d.abs()).sum::<f64>())
}

/// min over support points y of Q(B_r(y)) with B_r open Euclidean.
pub fn min_ball_mass(q: &DiscreteMeasure, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(QotError::InvalidParameter(format!("ball radius must be positive, got {r}")));
    }
    let mut min_mass = f64::INFINITY;
    for center in &q.points {
        let mass: f64 = q
            .points
            .iter()
            .zip(&q.weights)
            .filter(|(p, _)| euclidean(center, p) < r)
            .map(|(_, &w)| w)
            .sum();
        min_mass = min_mass.min(mass);
    }
    Ok(min_mass)
}

/// Hausdorff distance between finite point sets (Euclidean, concatenated
/// coordinates for product points).
pub fn hausdorff_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(QotError::InvalidParameter("hausdorff: empty point set".into()));
    }
    let d = a[0].len();
    if a.iter().chain(b.iter()).any(|p| p.len() != d) {
        return Err(QotError::DimensionMismatch { left: d, right: b[0].len() });
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

fn directed_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut sup = 0.0f64;
    for x in a {
        let mut best = f64::INFINITY;
        for y in b {
            best = best.min(euclidean(x, y));
        }
        sup = sup.max(best);
    }
    sup
}

/// Class-level structural constants: the fixed parameters under which the
/// stability constants are uniform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassParams {
    /// ε̲: lower bound on the regularization parameter.
    pub eps_lower: f64,
    /// D: diameter bound for the first marginal support.
    pub diam_bound: f64,
    /// L: Lipschitz constant of the cost.
    pub lipschitz: f64,
    /// λ̲: density lower bound for P.
    pub density_lower: f64,
    /// Λ̄: density upper bound for P.
    pub density_upper: f64,
    /// δ̲: cone constant in P(B_r(x)) ≥ δ̲ min(r^d, 1).
    pub cone_const: f64,
    /// q̲: lower bound on inf_y Q(B_{ε̲/(8L)}(y)).
    pub ball_mass_lower: f64,
    pub dim: usize,
}

impl ClassParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(QotError::InvalidParameter(msg.into()));
        if !(self.eps_lower > 0.0) {
            return bad("eps_lower must be positive");
        }
        if !(self.diam_bound > 0.0) {
            return bad("diam_bound must be positive");
        }
        if !(self.lipschitz > 0.0) {
            return bad("lipschitz must be positive");
        }
        if !(self.density_lower > 0.0 && self.density_lower <= self.density_upper) {
            return bad("need 0 < density_lower <= density_upper");
        }
        if !self.density_upper.is_finite() {
            return bad("density_upper must be finite");
        }
        if !(self.cone_const > 0.0 && self.cone_const <= 1.0) {
            return bad("cone_const must lie in (0, 1]");
        }
        if !(self.ball_mass_lower > 0.0 && self.ball_mass_lower <= 1.0) {
            return bad("ball_mass_lower must lie in (0, 1]");
        }
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Pass,
    Fail,
    /// Holds for the continuum measure being discretized by declaration;
    /// not testable on atoms.
    Declared,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditItem {
    pub id: String,
    pub status: AuditStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassAudit {
    pub items: Vec<AuditItem>,
}

impl ClassAudit {
    /// True iff no testable item failed (declared items do not count).
    pub fn passed(&self) -> bool {
        self.items.iter().all(|it| it.status != AuditStatus::Fail)
    }

    pub fn item(&self, id: &str) -> Option<&AuditItem> {
        self.items.iter().find(|it| it.id == id)
    }
}

/// Audits membership of (P, Q, c, ε) in the class with the given parameters.
/// Testable conditions are checked at discrete scale; the convexity and
/// density conditions are recorded as declared-by-configuration.
pub fn audit_class_membership(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    cost: &CostSpec,
    eps: f64,
    params: &ClassParams,
) -> Result<ClassAudit> {
    p.validate()?;
    q.validate()?;
    params.validate()?;
    let mut items = Vec::new();
    let mut push = |id: &str, status: AuditStatus, detail: String| {
        items.push(AuditItem { id: id.into(), status, detail });
    };

    // (a) ε ≥ ε̲
    push(
        "a-eps",
        if eps >= params.eps_lower { AuditStatus::Pass } else { AuditStatus::Fail },
        format!("eps = {eps}, eps_lower = {}", params.eps_lower),
    );

    // (b) cost L-Lipschitz with the class constant, spot-checked on pairs.
    let lip_ok = cost.lipschitz <= params.lipschitz * (1.0 + 1e-12)
        && cost.check_lipschitz_on_grid(&p.points, &q.points, params.lipschitz).is_ok();
    push(
        "b-lipschitz",
        if lip_ok { AuditStatus::Pass } else { AuditStatus::Fail },
        format!("declared L = {}, class L = {}", cost.lipschitz, params.lipschitz),
    );

    // (c) diam(Ω_P) ≤ D is testable; convexity of Ω_P is declared.
    let diam_p = p.diameter();
    push(
        "c-diam",
        if diam_p <= params.diam_bound * (1.0 + 1e-12) { AuditStatus::Pass } else { AuditStatus::Fail },
        format!("diam = {diam_p}, bound = {}", params.diam_bound),
    );
    push(
        "c-convexity",
        AuditStatus::Declared,
        "convex support of the continuum P is declared by configuration".into(),
    );

    // (d) density bounds are not testable for atoms.
    push(
        "d-density",
        AuditStatus::Declared,
        format!(
            "density in [{}, {}] declared for the continuum P",
            params.density_lower, params.density_upper
        ),
    );

    // (e) P(B_r(x)) ≥ δ̲ min(r^d, 1) on a logarithmic radius grid.
    let mut cone_ok = true;
    let mut cone_detail = String::from("holds on the sampled grid");
    if diam_p > 0.0 {
        'outer: for k in 0..=20 {
            let r = diam_p * 0.5f64.powi(k);
            for x in &p.points {
                let mass: f64 = p
                    .points
                    .iter()
                    .zip(&p.weights)
                    .filter(|(pt, _)| euclidean(x, pt) < r)
                    .map(|(_, &w)| w)
                    .sum();
                let need = params.cone_const * r.powi(params.dim as i32).min(1.0);
                if mass < need * (1.0 - 1e-12) {
                    cone_ok = false;
                    cone_detail =
                        format!("fails at r = {r}: mass {mass} < {need}");
                    break 'outer;
                }
            }
        }
    }
    push("e-cone", if cone_ok { AuditStatus::Pass } else { AuditStatus::Fail }, cone_detail);

    // (f) inf_y Q(B_{ε̲/(8L)}(y)) ≥ q̲
    let radius = params.eps_lower / (8.0 * params.lipschitz);
    let mass = min_ball_mass(q, radius)?;
    push(
        "f-ball-mass",
        if mass >= params.ball_mass_lower * (1.0 - 1e-12) {
            AuditStatus::Pass
        } else {
            AuditStatus::Fail
        },
        format!("min ball mass at r = {radius} is {mass}, lower bound {}", params.ball_mass_lower),
    );

    Ok(ClassAudit { items })
}
