//! Perturbation families, instance-pair verification, and the stability
//! report.
//!
//! For an admissible pair the harness evaluates every inequality of the
//! stability theory whose smallness hypothesis holds: the three uniform L²
//! bounds, the uniform L∞ bound, the density/TV/W₁ bounds for the primal
//! optimizers, the L∞ density bound, and the Hausdorff support bound with its
//! nondegeneracy constant. Checks whose hypothesis fails are still reported
//! with lhs, rhs, and ratio, flagged not applicable; they never fail a run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constants::{
    delta_quantities, stability_constants, uniform_constants, DeltaQuantities,
    PerInstanceParams, StabilityConstants,
};
use crate::cost::CostKind;
use crate::coupling::{extract_coupling, support_points, Coupling};
use crate::error::{QotError, Result};
use crate::instance::Instance;
use crate::measures::{
    audit_class_membership, hausdorff_distance, point_key, wasserstein1, ClassAudit, ClassParams,
    DiscreteMeasure,
};
use crate::solver::{extend_f, extend_g, solve_dual, DualSolve, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbTarget {
    P,
    Q,
    Cost,
    Eps,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PerturbKind {
    /// ((1−t)·weights + t·weights') on the union atom set; coordinates are
    /// shared objects so total-variation matching stays exact.
    MarginalMixture { other: DiscreteMeasure },
    /// Shift every atom of the target marginal by t·shift; moves supports.
    AtomTranslation { shift: Vec<f64> },
    /// Reweight by (1 + t·φ(x)) and renormalize.
    WeightTilt { tilt: TiltFn },
    /// (1 + t)·c.
    CostScale,
    /// ε·(1 + t).
    EpsRamp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "fn")]
pub enum TiltFn {
    /// The counterexample density tilt: +1 on [0, ¼], −1/3 on (¼, 1], so that
    /// tilting the uniform base by t = η reproduces P^η exactly.
    Example62,
    /// φ(x) = scale · (x_coord − ½).
    LinearCoord { coord: usize, scale: f64 },
}

impl TiltFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TiltFn::Example62 => {
                if x[0] <= 0.25 {
                    1.0
                } else {
                    -1.0 / 3.0
                }
            }
            TiltFn::LinearCoord { coord, scale } => scale * (x[*coord] - 0.5),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationSpec {
    #[serde(flatten)]
    pub kind: PerturbKind,
    /// Parameter values in [0, 1]; t = 0 must reproduce the base instance.
    pub grid: Vec<f64>,
    pub target: PerturbTarget,
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(QotError::InvalidParameter("perturbation grid is empty".into()));
        }
        if self.grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(QotError::InvalidParameter("perturbation grid must lie in [0, 1]".into()));
        }
        let target_ok = matches!(
            (&self.kind, self.target),
            (PerturbKind::MarginalMixture { .. }, PerturbTarget::P | PerturbTarget::Q)
                | (PerturbKind::AtomTranslation { .. }, PerturbTarget::P | PerturbTarget::Q)
                | (PerturbKind::WeightTilt { .. }, PerturbTarget::P | PerturbTarget::Q)
                | (PerturbKind::CostScale, PerturbTarget::Cost)
                | (PerturbKind::EpsRamp, PerturbTarget::Eps)
        );
        if !target_ok {
            return Err(QotError::InvalidParameter(
                "perturbation kind does not match its target".into(),
            ));
        }
        Ok(())
    }
}

/// Applies the spec at every grid value; index k corresponds to grid[k].
pub fn perturb(base: &Instance, spec: &PerturbationSpec) -> Result<Vec<Instance>> {
    spec.validate()?;
    spec.grid.iter().map(|&t| perturb_one(base, spec, t)).collect()
}

pub fn perturb_one(base: &Instance, spec: &PerturbationSpec, t: f64) -> Result<Instance> {
    match (&spec.kind, spec.target) {
        (PerturbKind::MarginalMixture { other }, target) => {
            let against = if target == PerturbTarget::P { &base.p } else { &base.q };
            let mixed = mix_measures(against, other, t)?;
            rebuild_with_marginal(base, target, mixed)
        }
        (PerturbKind::AtomTranslation { shift }, target) => {
            let against = if target == PerturbTarget::P { &base.p } else { &base.q };
            if shift.len() != against.dim {
                return Err(QotError::DimensionMismatch {
                    left: shift.len(),
                    right: against.dim,
                });
            }
            let points: Vec<Vec<f64>> = against
                .points
                .iter()
                .map(|p| p.iter().zip(shift).map(|(x, s)| x + t * s).collect())
                .collect();
            let moved = DiscreteMeasure::new(points, against.weights.clone())?;
            rebuild_with_marginal(base, target, moved)
        }
        (PerturbKind::WeightTilt { tilt }, target) => {
            let against = if target == PerturbTarget::P { &base.p } else { &base.q };
            let mut weights: Vec<f64> = against
                .points
                .iter()
                .zip(&against.weights)
                .map(|(x, &w)| w * (1.0 + t * tilt.eval(x)))
                .collect();
            if weights.iter().any(|&w| w <= 0.0) {
                return Err(QotError::InvalidParameter(format!(
                    "weight tilt at t = {t} produces nonpositive weights"
                )));
            }
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let tilted = DiscreteMeasure::new(against.points.clone(), weights)?;
            // Atoms unchanged, so the cost matrix carries over.
            let mut inst = base.clone();
            if target == PerturbTarget::P {
                inst.p = tilted;
            } else {
                inst.q = tilted;
            }
            inst.p.validate()?;
            inst.q.validate()?;
            Ok(inst)
        }
        (PerturbKind::CostScale, _) => {
            Instance::new(base.p.clone(), base.q.clone(), base.cost.scaled(1.0 + t), base.eps)
        }
        (PerturbKind::EpsRamp, _) => {
            Instance::new(base.p.clone(), base.q.clone(), base.cost.clone(), base.eps * (1.0 + t))
        }
    }
}

fn mix_measures(a: &DiscreteMeasure, b: &DiscreteMeasure, t: f64) -> Result<DiscreteMeasure> {
    if a.dim != b.dim {
        return Err(QotError::DimensionMismatch { left: a.dim, right: b.dim });
    }
    // Union atoms in deterministic order: a's first, then b's new ones.
    let mut order: Vec<Vec<f64>> = Vec::new();
    let mut weight: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    for (p, &w) in a.points.iter().zip(&a.weights) {
        order.push(p.clone());
        weight.insert(point_key(p), (1.0 - t) * w);
    }
    for (p, &w) in b.points.iter().zip(&b.weights) {
        match weight.entry(point_key(p)) {
            std::collections::btree_map::Entry::Occupied(mut e) => *e.get_mut() += t * w,
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(t * w);
                order.push(p.clone());
            }
        }
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for p in order {
        let w = weight[&point_key(&p)];
        if w > 0.0 {
            points.push(p);
            weights.push(w);
        }
    }
    DiscreteMeasure::new(points, weights)
}

/// Swaps in a marginal whose atoms may differ, rebuilding the cost matrix
/// through the base evaluator (analytic kinds evaluate anywhere; explicit
/// matrices require the new atoms to be a subset of the old grid). The
/// declared Lipschitz constant is re-checked on the new grid, since moved
/// atoms can stretch the cost beyond it.
fn rebuild_with_marginal(
    base: &Instance,
    target: PerturbTarget,
    m: DiscreteMeasure,
) -> Result<Instance> {
    let ev = base.evaluator();
    let (p, q) = match target {
        PerturbTarget::P => (m, base.q.clone()),
        PerturbTarget::Q => (base.p.clone(), m),
        _ => unreachable!(),
    };
    let matrix: Result<Vec<Vec<f64>>> = p
        .points
        .iter()
        .map(|x| q.points.iter().map(|y| ev.cost_at(x, y)).collect())
        .collect();
    let mut cost = base.cost.clone();
    cost.matrix = matrix?;
    cost.check_lipschitz_on_grid(&p.points, &q.points, cost.lipschitz)?;
    Instance::new(p, q, cost, base.eps)
}

/// A solved instance with its primal objects.
#[derive(Debug, Clone)]
pub struct SolvedInstance {
    pub instance: Instance,
    pub solve: DualSolve,
    pub coupling: Coupling,
    /// Slack σ = h − c on the instance grid.
    pub sigma: Vec<Vec<f64>>,
}

pub fn solve_instance(inst: &Instance, opts: &SolveOptions) -> Result<SolvedInstance> {
    let solve = solve_dual(&inst.p, &inst.q, &inst.cost, inst.eps, opts)?;
    if !solve.potentials.converged {
        return Err(QotError::NotConverged {
            sweeps: solve.sweeps,
            residual: solve.potentials.foc_residual_inf,
        });
    }
    let coupling = extract_coupling(&solve.potentials, &inst.p, &inst.q, &inst.cost)?;
    let pot = &solve.potentials;
    let sigma = (0..inst.n())
        .map(|i| {
            (0..inst.m())
                .map(|j| pot.f[i] + pot.g[j] - inst.cost.matrix[i][j])
                .collect()
        })
        .collect();
    Ok(SolvedInstance { instance: inst.clone(), solve, coupling, sigma })
}

/// â = inf over exterior product atoms of −σ(z)/dist(z, Σ). `None` when the
/// exterior is empty (every a > 0 works; the support covers the grid).
pub fn estimate_nondegeneracy(
    coup: &Coupling,
    sigma: &[Vec<f64>],
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
) -> Option<f64> {
    let supp = support_points(coup, p, q);
    if supp.is_empty() {
        return None;
    }
    let mut a_hat: Option<f64> = None;
    for i in 0..coup.n() {
        for j in 0..coup.m() {
            if coup.zeta[i][j] > coup.support_tol {
                continue;
            }
            let mut z = p.points[i].clone();
            z.extend_from_slice(&q.points[j]);
            let dist = supp
                .iter()
                .map(|s| crate::measures::euclidean(&z, s))
                .fold(f64::INFINITY, f64::min);
            if dist > 0.0 {
                let ratio = -sigma[i][j] / dist;
                a_hat = Some(a_hat.map_or(ratio, |a| a.min(ratio)));
            }
        }
    }
    a_hat
}

/// Cross norms between two solved instances. All h, ζ evaluations off an
/// instance's own grid go through the exact potential extension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairNorms {
    pub h_l2_mu: f64,
    pub h_l2_mu_prime: f64,
    pub h_l2_mixture: f64,
    pub h_linf: f64,
    /// ‖f − f' − a‖_∞ after the gauge alignment below.
    pub f_linf_gauged: f64,
    /// ‖g − g' + a‖_∞ after the gauge alignment below.
    pub g_linf_gauged: f64,
    pub zeta_l2_mixture: f64,
    pub zeta_linf: f64,
    pub coupling_tv: f64,
    pub coupling_w1: f64,
    pub support_hausdorff: f64,
    /// a = ∫(g' − g) dQ, the translation aligning the primed potentials.
    pub gauge_shift: f64,
}

pub fn pair_norms(a: &SolvedInstance, b: &SolvedInstance) -> Result<PairNorms> {
    let (ia, ib) = (&a.instance, &b.instance);
    let (pa, pb) = (&a.solve.potentials, &b.solve.potentials);

    // Extended potential tables over the union grids.
    let xs = union_of(&ia.p.points, &ib.p.points);
    let ys = union_of(&ia.q.points, &ib.q.points);
    let mut fa: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    let mut fb: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    let mut ga: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    let mut gb: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    let idx_ap = ia.p.atom_index();
    let idx_bp = ib.p.atom_index();
    let idx_aq = ia.q.atom_index();
    let idx_bq = ib.q.atom_index();
    for x in &xs {
        let key = point_key(x);
        let va = match idx_ap.get(&key) {
            Some(&i) => pa.f[i],
            None => extend_f(ia, pa, x)?,
        };
        let vb = match idx_bp.get(&key) {
            Some(&i) => pb.f[i],
            None => extend_f(ib, pb, x)?,
        };
        fa.insert(key.clone(), va);
        fb.insert(key, vb);
    }
    for y in &ys {
        let key = point_key(y);
        let va = match idx_aq.get(&key) {
            Some(&j) => pa.g[j],
            None => extend_g(ia, pa, y)?,
        };
        let vb = match idx_bq.get(&key) {
            Some(&j) => pb.g[j],
            None => extend_g(ib, pb, y)?,
        };
        ga.insert(key.clone(), va);
        gb.insert(key, vb);
    }

    let gauge_shift: f64 = ia
        .q
        .points
        .iter()
        .zip(&ia.q.weights)
        .map(|(y, &w)| {
            let key = point_key(y);
            w * (gb[&key] - ga[&key])
        })
        .sum();

    let mut f_linf_gauged = 0.0f64;
    for x in &xs {
        let key = point_key(x);
        f_linf_gauged = f_linf_gauged.max((fa[&key] - fb[&key] - gauge_shift).abs());
    }
    let mut g_linf_gauged = 0.0f64;
    for y in &ys {
        let key = point_key(y);
        g_linf_gauged = g_linf_gauged.max((ga[&key] - gb[&key] + gauge_shift).abs());
    }

    let ev_a = ia.evaluator();
    let ev_b = ib.evaluator();
    let h_diff = |x: &[f64], y: &[f64]| -> f64 {
        (fa[&point_key(x)] + ga[&point_key(y)]) - (fb[&point_key(x)] + gb[&point_key(y)])
    };

    // L² under each product measure and the mixture.
    let mut l2_mu = 0.0;
    let mut zeta_l2_mu = 0.0;
    for (i, x) in ia.p.points.iter().enumerate() {
        for (j, y) in ia.q.points.iter().enumerate() {
            let w = ia.p.weights[i] * ia.q.weights[j];
            let d = h_diff(x, y);
            l2_mu += w * d * d;
            let dz = zeta_at(&fa, &ga, &ev_a, ia.eps, x, y)? - zeta_at(&fb, &gb, &ev_b, ib.eps, x, y)?;
            zeta_l2_mu += w * dz * dz;
        }
    }
    let mut l2_mu_prime = 0.0;
    let mut zeta_l2_mu_prime = 0.0;
    for (i, x) in ib.p.points.iter().enumerate() {
        for (j, y) in ib.q.points.iter().enumerate() {
            let w = ib.p.weights[i] * ib.q.weights[j];
            let d = h_diff(x, y);
            l2_mu_prime += w * d * d;
            let dz = zeta_at(&fa, &ga, &ev_a, ia.eps, x, y)? - zeta_at(&fb, &gb, &ev_b, ib.eps, x, y)?;
            zeta_l2_mu_prime += w * dz * dz;
        }
    }

    // Sup norms over the union product grid.
    let mut h_linf = 0.0f64;
    let mut zeta_linf = 0.0f64;
    for x in &xs {
        for y in &ys {
            h_linf = h_linf.max(h_diff(x, y).abs());
            let dz =
                zeta_at(&fa, &ga, &ev_a, ia.eps, x, y)? - zeta_at(&fb, &gb, &ev_b, ib.eps, x, y)?;
            zeta_linf = zeta_linf.max(dz.abs());
        }
    }

    let coupling_tv = coupling_total_variation(a, b);
    let coupling_w1 = wasserstein1(&coupling_as_measure(a)?, &coupling_as_measure(b)?)?;
    let sa = support_points(&a.coupling, &ia.p, &ia.q);
    let sb = support_points(&b.coupling, &ib.p, &ib.q);
    let support_hausdorff = hausdorff_distance(&sa, &sb)?;

    Ok(PairNorms {
        h_l2_mu: l2_mu.sqrt(),
        h_l2_mu_prime: l2_mu_prime.sqrt(),
        h_l2_mixture: (0.5 * (l2_mu + l2_mu_prime)).sqrt(),
        h_linf,
        f_linf_gauged,
        g_linf_gauged,
        zeta_l2_mixture: (0.5 * (zeta_l2_mu + zeta_l2_mu_prime)).sqrt(),
        zeta_linf,
        coupling_tv,
        coupling_w1,
        support_hausdorff,
        gauge_shift,
    })
}

fn zeta_at(
    f: &BTreeMap<Vec<u64>, f64>,
    g: &BTreeMap<Vec<u64>, f64>,
    ev: &crate::instance::CostEvaluator<'_>,
    eps: f64,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let h = f[&point_key(x)] + g[&point_key(y)];
    Ok((h - ev.cost_at(x, y)?).max(0.0) / eps)
}

fn union_of(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for p in a.iter().chain(b) {
        if seen.insert(point_key(p)) {
            out.push(p.clone());
        }
    }
    out
}

fn coupling_total_variation(a: &SolvedInstance, b: &SolvedInstance) -> f64 {
    let mut merged: BTreeMap<(Vec<u64>, Vec<u64>), f64> = BTreeMap::new();
    for (i, x) in a.instance.p.points.iter().enumerate() {
        for (j, y) in a.instance.q.points.iter().enumerate() {
            *merged.entry((point_key(x), point_key(y))).or_insert(0.0) += a.coupling.mass[i][j];
        }
    }
    for (i, x) in b.instance.p.points.iter().enumerate() {
        for (j, y) in b.instance.q.points.iter().enumerate() {
            *merged.entry((point_key(x), point_key(y))).or_insert(0.0) -= b.coupling.mass[i][j];
        }
    }
    0.5 * merged.values().map(|d| d.abs()).sum::<f64>()
}

fn coupling_as_measure(s: &SolvedInstance) -> Result<DiscreteMeasure> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (i, x) in s.instance.p.points.iter().enumerate() {
        for (j, y) in s.instance.q.points.iter().enumerate() {
            let w = s.coupling.mass[i][j];
            if w > 0.0 {
                let mut z = x.clone();
                z.extend_from_slice(y);
                points.push(z);
                weights.push(w);
            }
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    DiscreteMeasure::new(points, weights)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub id: String,
    /// Whether the bound's smallness hypothesis holds for this pair.
    pub hypothesis: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// lhs / rhs; absent when rhs = 0 with nonzero lhs.
    pub ratio: Option<f64>,
    /// lhs ≤ rhs (informational when the hypothesis fails).
    pub pass: bool,
}

fn make_check(id: &str, hypothesis: bool, lhs: f64, rhs: f64) -> BoundCheck {
    let pass = lhs <= rhs + 1e-12 * (1.0 + rhs.abs());
    let ratio = if rhs > 0.0 {
        Some(lhs / rhs)
    } else if lhs.abs() <= 1e-14 {
        Some(0.0)
    } else {
        None
    };
    BoundCheck { id: id.into(), hypothesis, lhs, rhs, ratio, pass }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Nondegeneracy {
    /// Empirical â for each instance; `None` means the exterior is empty and
    /// every a > 0 is admissible.
    pub a_hat: Option<f64>,
    pub a_hat_prime: Option<f64>,
    /// ε/D_P (minimized over the pair) when both costs are quadratic.
    pub a_theory: Option<f64>,
    /// Constant used in the support bound: the theoretical slope for
    /// quadratic costs, otherwise min(â, â'); `None` means unbounded.
    pub a_used: Option<f64>,
    /// Whether the support bound applies (hypothesis and a > 0).
    pub applicable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub n: usize,
    pub m: usize,
    pub dim: usize,
    pub eps: f64,
    pub cost_kind: CostKind,
    pub sweeps: usize,
    pub foc_residual_inf: f64,
}

fn summarize(s: &SolvedInstance) -> InstanceSummary {
    InstanceSummary {
        n: s.instance.n(),
        m: s.instance.m(),
        dim: s.instance.p.dim,
        eps: s.instance.eps,
        cost_kind: s.instance.cost.kind,
        sweeps: s.solve.sweeps,
        foc_residual_inf: s.solve.potentials.foc_residual_inf,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub instance_a: InstanceSummary,
    pub instance_b: InstanceSummary,
    pub deltas: DeltaQuantities,
    pub constants: StabilityConstants,
    pub norms: PairNorms,
    pub checks: Vec<BoundCheck>,
    pub nondegeneracy: Nondegeneracy,
    pub audit_a: ClassAudit,
    pub audit_b: ClassAudit,
}

impl StabilityReport {
    /// Checks whose hypothesis held but whose inequality failed. Any entry
    /// here is a hard failure of the run.
    pub fn hard_failures(&self) -> Vec<&BoundCheck> {
        self.checks.iter().filter(|c| c.hypothesis && !c.pass).collect()
    }
}

/// Solves both instances, computes all Δ-quantities and constants under the
/// shared class parameters, and evaluates every stability inequality.
pub fn run_pair(
    a: &Instance,
    b: &Instance,
    class: &ClassParams,
    opts: &SolveOptions,
) -> Result<StabilityReport> {
    let sa = solve_instance(a, opts)?;
    let sb = solve_instance(b, opts)?;
    run_pair_solved(&sa, &sb, class)
}

pub fn run_pair_solved(
    sa: &SolvedInstance,
    sb: &SolvedInstance,
    class: &ClassParams,
) -> Result<StabilityReport> {
    let a = &sa.instance;
    let b = &sb.instance;
    let deltas = delta_quantities(a, b, class)?;
    let per = PerInstanceParams::from_class(class);
    let constants = stability_constants(a, &per, class)?;
    let un = uniform_constants(class)?;
    let norms = pair_norms(sa, sb)?;
    let audit_a = audit_class_membership(&a.p, &a.q, &a.cost, a.eps, class)?;
    let audit_b = audit_class_membership(&b.p, &b.q, &b.cost, b.eps, class)?;

    let hyp_l2 = deltas.delta.max(deltas.delta_prime) < un.eta_bar;
    let hyp_inf = deltas.delta_star < un.eta_bar_star;

    // Nondegeneracy constant shared by the pair.
    let a_hat = estimate_nondegeneracy(&sa.coupling, &sa.sigma, &a.p, &a.q);
    let a_hat_prime = estimate_nondegeneracy(&sb.coupling, &sb.sigma, &b.p, &b.q);
    let quadratic =
        a.cost.kind == CostKind::SqEuclidean && b.cost.kind == CostKind::SqEuclidean;
    let a_theory = if quadratic {
        let (da, db) = (a.p.diameter(), b.p.diameter());
        match (da > 0.0, db > 0.0) {
            (true, true) => Some((a.eps / da).min(b.eps / db)),
            (true, false) => Some(a.eps / da),
            (false, true) => Some(b.eps / db),
            (false, false) => None,
        }
    } else {
        None
    };
    let a_used = if quadratic {
        a_theory
    } else {
        match (a_hat, a_hat_prime) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (Some(x), None) | (None, Some(x)) => Some(x),
            (None, None) => None,
        }
    };
    let a_positive = a_used.is_none_or(|v| v > 0.0);
    let nondegeneracy = Nondegeneracy {
        a_hat,
        a_hat_prime,
        a_theory,
        a_used,
        applicable: hyp_inf && a_positive,
    };

    let l = class.lipschitz;
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut checks = vec![
        make_check("potential-l2-base", hyp_l2, norms.h_l2_mu, un.gamma_bar * deltas.delta),
        make_check(
            "potential-l2-primed",
            hyp_l2,
            norms.h_l2_mu_prime,
            un.gamma_bar * deltas.delta_prime,
        ),
        make_check(
            "potential-l2-mixture",
            hyp_l2,
            norms.h_l2_mixture,
            un.gamma_bar * deltas.delta_bar,
        ),
        make_check("potential-linfty", hyp_inf, norms.h_linf, un.c_bar * deltas.delta_star),
        make_check(
            "potential-f-linfty",
            hyp_inf,
            norms.f_linf_gauged,
            (1.0 + un.gamma_bar) / class.ball_mass_lower * deltas.delta_star,
        ),
        make_check(
            "potential-g-linfty",
            hyp_inf,
            norms.g_linf_gauged,
            (1.0 + un.gamma_bar) / un.kappahat_lower * deltas.delta_star,
        ),
        make_check("density-l2", hyp_l2, norms.zeta_l2_mixture, deltas.delta_hat),
        make_check(
            "coupling-tv",
            hyp_l2,
            norms.coupling_tv,
            0.5 * deltas.delta_hat + 0.5 * (deltas.a_const + deltas.a_prime) * deltas.delta_tv,
        ),
        make_check(
            "coupling-w1",
            hyp_l2,
            norms.coupling_w1,
            0.5 * deltas.d_star * deltas.delta_hat
                + sqrt2
                    * (0.5 * (deltas.a_const + deltas.a_prime)
                        + (sqrt2 + 1.0) * l * deltas.d_star / 4.0 * (1.0 / a.eps + 1.0 / b.eps))
                    * deltas.delta_w,
        ),
        make_check("density-linfty", hyp_inf, norms.zeta_linf, deltas.delta_hat_inf),
    ];
    let support_rhs = match a_used {
        Some(av) if av > 0.0 => {
            (1.0 + (sqrt2 + 1.0) * l / av) * deltas.delta_omega + deltas.small_delta_star / av
        }
        Some(_) => f64::NAN,
        // Empty exterior on both sides: the bound holds for every a > 0.
        None => deltas.delta_omega,
    };
    checks.push(make_check(
        "support-hausdorff",
        nondegeneracy.applicable,
        norms.support_hausdorff,
        support_rhs,
    ));

    Ok(StabilityReport {
        instance_a: summarize(sa),
        instance_b: summarize(sb),
        deltas,
        constants,
        norms,
        checks,
        nondegeneracy,
        audit_a,
        audit_b,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRow {
    pub t: f64,
    pub delta_star: f64,
    pub linf_diff: f64,
    /// linf_diff / delta_star; zero at t = 0.
    pub ratio: f64,
    /// Δ*(t) < η̄*.
    pub hypothesis: bool,
}

/// Empirical Lipschitz-ratio curve of the solution map along a perturbation
/// family: for each t, Δ*(t) against ‖h_t − h_0‖_∞.
pub fn lipschitz_ratio_curve(
    base: &Instance,
    spec: &PerturbationSpec,
    class: &ClassParams,
    opts: &SolveOptions,
) -> Result<Vec<CurveRow>> {
    let un = uniform_constants(class)?;
    let solved_base = solve_instance(base, opts)?;
    let mut rows = Vec::with_capacity(spec.grid.len());
    for &t in &spec.grid {
        let inst = perturb_one(base, spec, t)?;
        let solved = solve_instance(&inst, opts)?;
        let deltas = delta_quantities(base, &inst, class)?;
        let norms = pair_norms(&solved_base, &solved)?;
        let ratio = if deltas.delta_star > 0.0 { norms.h_linf / deltas.delta_star } else { 0.0 };
        rows.push(CurveRow {
            t,
            delta_star: deltas.delta_star,
            linf_diff: norms.h_linf,
            ratio,
            hypothesis: deltas.delta_star < un.eta_bar_star,
        });
    }
    Ok(rows)
}
