//! Explicit constants of the stability theory and the composite perturbation
//! sizes (Δ-quantities) comparing two data quadruples.
//!
//! Every formula is evaluated verbatim; nothing is tightened. Instance-level
//! structural parameters (δ_P, λ_P, Λ_P) default to their class-level
//! counterparts, matching how the uniform corollaries substitute them.

use serde::{Deserialize, Serialize};

use crate::error::{QotError, Result};
use crate::instance::Instance;
use crate::measures::{
    euclidean, hausdorff_distance, min_ball_mass, total_variation, wasserstein1, ClassParams,
    DiscreteMeasure,
};

/// Per-instance structural parameters of the reference marginal P.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerInstanceParams {
    /// δ_P in P(B_r(x)) ≥ δ_P min(r^d, 1).
    pub delta_p: f64,
    /// λ_P: density lower bound.
    pub lambda_p: f64,
    /// Λ_P: density upper bound.
    pub cap_lambda_p: f64,
}

impl PerInstanceParams {
    pub fn from_class(class: &ClassParams) -> Self {
        PerInstanceParams {
            delta_p: class.cone_const,
            lambda_p: class.density_lower,
            cap_lambda_p: class.density_upper,
        }
    }
}

/// γ_ε of the dual error bound:
/// 16 (δ_P⁻¹ max(8L/ε, 1)^d) (Λ_P²/λ_P²) ⌈8L·diam(Ω_P)/ε⌉^{d+2} / inf_y Q(B_{ε/(8L)}(y)).
#[allow(clippy::too_many_arguments)]
pub fn gamma_eps(
    dim: usize,
    per: &PerInstanceParams,
    lipschitz: f64,
    eps: f64,
    diam_p: f64,
    ball_mass: f64,
) -> Result<f64> {
    if !(ball_mass > 0.0) {
        return Err(QotError::InvalidParameter("gamma_eps: ball mass must be positive".into()));
    }
    let d = dim as i32;
    let ratio = 8.0 * lipschitz / eps;
    let ceil_term = (8.0 * lipschitz * diam_p / eps).ceil();
    Ok(16.0 * (ratio.max(1.0).powi(d) / per.delta_p)
        * (per.cap_lambda_p * per.cap_lambda_p) / (per.lambda_p * per.lambda_p)
        * ceil_term.powi(d + 2)
        / ball_mass)
}

/// ϑ_δ = δ_P min{(δ/(8L))^d, 1} inf_y Q(B_{δ/(8L)}(y)).
pub fn vartheta(
    delta: f64,
    dim: usize,
    delta_p: f64,
    lipschitz: f64,
    q: &DiscreteMeasure,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(QotError::InvalidParameter("vartheta: delta must be positive".into()));
    }
    let r = delta / (8.0 * lipschitz);
    let mass = min_ball_mass(q, r)?;
    Ok(delta_p * r.powi(dim as i32).min(1.0) * mass)
}

/// Instance-level constants of the L∞ stability estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointwiseConstants {
    pub gamma_eps: f64,
    /// ϑ evaluated at δ = ε.
    pub vartheta_eps: f64,
    /// q̂_ε = inf_y Q(B_{ε/(4L)}(y)).
    pub qhat_eps: f64,
    /// κ̂_ε = δ_P min{(ε/(4L))^d, 1}.
    pub kappahat_eps: f64,
    /// η̂_ε = min{ε√ϑ_ε/(2γ_ε), ε q̂_ε/(2(1+γ_ε)), ε κ̂_ε/(2(1+γ_ε))}.
    pub etahat_eps: f64,
}

pub fn pointwise_constants(
    inst: &Instance,
    per: &PerInstanceParams,
    lipschitz: f64,
) -> Result<PointwiseConstants> {
    let dim = inst.p.dim;
    let eps = inst.eps;
    let diam_p = inst.p.diameter();
    let ball = min_ball_mass(&inst.q, eps / (8.0 * lipschitz))?;
    let gamma = gamma_eps(dim, per, lipschitz, eps, diam_p, ball)?;
    let vt = vartheta(eps, dim, per.delta_p, lipschitz, &inst.q)?;
    let qhat = min_ball_mass(&inst.q, eps / (4.0 * lipschitz))?;
    let kappahat = per.delta_p * (eps / (4.0 * lipschitz)).powi(dim as i32).min(1.0);
    let etahat = (eps * vt.sqrt() / (2.0 * gamma))
        .min(eps * qhat / (2.0 * (1.0 + gamma)))
        .min(eps * kappahat / (2.0 * (1.0 + gamma)));
    Ok(PointwiseConstants {
        gamma_eps: gamma,
        vartheta_eps: vt,
        qhat_eps: qhat,
        kappahat_eps: kappahat,
        etahat_eps: etahat,
    })
}

/// Class-level uniform constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UniformConstants {
    /// γ̄ = 16 (δ̲⁻¹ max(8L/ε̲, 1)^d) (Λ̄²/λ̲²) ⌈8LD/ε̲⌉^{d+2} / q̲.
    pub gamma_bar: f64,
    /// ϑ̲ = δ̲ min{(ε̲/(8L))^d, 1} q̲.
    pub vartheta_lower: f64,
    /// η̄ = ε̲ √ϑ̲ / (2γ̄).
    pub eta_bar: f64,
    /// κ̲̂ = δ̲ min{(ε̲/(4L))^d, 1}.
    pub kappahat_lower: f64,
    /// η̄* = min{ε̲√ϑ̲/(2γ̄), ε̲q̲/(2(1+γ̄)), ε̲κ̲̂/(2(1+γ̄))}.
    pub eta_bar_star: f64,
    /// C̄ = (1 + γ̄)(q̲⁻¹ + κ̲̂⁻¹).
    pub c_bar: f64,
}

pub fn uniform_constants(class: &ClassParams) -> Result<UniformConstants> {
    class.validate()?;
    let d = class.dim as i32;
    let l = class.lipschitz;
    let eps = class.eps_lower;
    let gamma_bar = 16.0 * ((8.0 * l / eps).max(1.0).powi(d) / class.cone_const)
        * (class.density_upper * class.density_upper)
        / (class.density_lower * class.density_lower)
        * (8.0 * l * class.diam_bound / eps).ceil().powi(d + 2)
        / class.ball_mass_lower;
    let vartheta_lower =
        class.cone_const * (eps / (8.0 * l)).powi(d).min(1.0) * class.ball_mass_lower;
    let eta_bar = eps * vartheta_lower.sqrt() / (2.0 * gamma_bar);
    let kappahat_lower = class.cone_const * (eps / (4.0 * l)).powi(d).min(1.0);
    let eta_bar_star = eta_bar
        .min(eps * class.ball_mass_lower / (2.0 * (1.0 + gamma_bar)))
        .min(eps * kappahat_lower / (2.0 * (1.0 + gamma_bar)));
    let c_bar = (1.0 + gamma_bar) * (1.0 / class.ball_mass_lower + 1.0 / kappahat_lower);
    Ok(UniformConstants {
        gamma_bar,
        vartheta_lower,
        eta_bar,
        kappahat_lower,
        eta_bar_star,
        c_bar,
    })
}

/// All constants appearing in a stability report: the instance-level ones for
/// the reference instance plus the class-level uniform ones.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StabilityConstants {
    pub gamma_eps: f64,
    /// ϑ_δ evaluated at δ = ε of the reference instance.
    pub vartheta_delta: f64,
    pub qhat_eps: f64,
    pub kappahat_eps: f64,
    pub etahat_eps: f64,
    pub gamma_bar: f64,
    pub vartheta_lower: f64,
    pub eta_bar: f64,
    pub kappahat_lower: f64,
    pub eta_bar_star: f64,
    pub c_bar: f64,
}

pub fn stability_constants(
    inst: &Instance,
    per: &PerInstanceParams,
    class: &ClassParams,
) -> Result<StabilityConstants> {
    let pw = pointwise_constants(inst, per, class.lipschitz)?;
    let un = uniform_constants(class)?;
    Ok(StabilityConstants {
        gamma_eps: pw.gamma_eps,
        vartheta_delta: pw.vartheta_eps,
        qhat_eps: pw.qhat_eps,
        kappahat_eps: pw.kappahat_eps,
        etahat_eps: pw.etahat_eps,
        gamma_bar: un.gamma_bar,
        vartheta_lower: un.vartheta_lower,
        eta_bar: un.eta_bar,
        kappahat_lower: un.kappahat_lower,
        eta_bar_star: un.eta_bar_star,
        c_bar: un.c_bar,
    })
}

/// Composite perturbation sizes between two instances. All cost sup-norms are
/// evaluated over the union of atom grids (discrete instances carry the cost
/// only on atoms).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeltaQuantities {
    /// Δ_W = (W₁(P,P')² + W₁(Q,Q')²)^{1/2}.
    pub delta_w: f64,
    /// Δ = 2LΔ_W + ‖c−c'‖_{L²(P⊗Q)} + |ε−ε'|.
    pub delta: f64,
    /// Δ' with the L² norm under P'⊗Q'.
    pub delta_prime: f64,
    /// Δ̄ with the L² norm under the mixture μ̄.
    pub delta_bar: f64,
    /// Δ* = 2LΔ_W + ‖c−c'‖_{L∞} + |ε−ε'|.
    pub delta_star: f64,
    /// Δ_TV = ‖P−P'‖_TV + ‖Q−Q'‖_TV.
    pub delta_tv: f64,
    /// Δ_Ω = (d_H(Ω_P,Ω_{P'})² + d_H(Ω_Q,Ω_{Q'})²)^{1/2}.
    pub delta_omega: f64,
    /// δ* = C̄ Δ* + ‖c−c'‖_{L∞}.
    pub small_delta_star: f64,
    /// A = 1 + 6‖c‖_{L∞(Γ)}/ε.
    pub a_const: f64,
    /// A' = 1 + 6‖c'‖_{L∞(Γ)}/ε'.
    pub a_prime: f64,
    /// D* = sup of pairwise distances within Θ = (Ω_P×Ω_Q) ∪ (Ω_{P'}×Ω_{Q'}).
    pub d_star: f64,
    /// Δ̂ = min of the two candidates below.
    pub delta_hat: f64,
    pub delta_hat_over_eps: f64,
    pub delta_hat_over_eps_prime: f64,
    /// Δ̂_∞ = min of the two candidates below.
    pub delta_hat_inf: f64,
    pub delta_hat_inf_over_eps: f64,
    pub delta_hat_inf_over_eps_prime: f64,
    pub cost_l2_mu: f64,
    pub cost_l2_mu_prime: f64,
    pub cost_l2_mixture: f64,
    pub cost_sup: f64,
}

pub fn delta_quantities(
    a: &Instance,
    b: &Instance,
    class: &ClassParams,
) -> Result<DeltaQuantities> {
    let un = uniform_constants(class)?;
    let l = class.lipschitz;

    let w1_p = wasserstein1(&a.p, &b.p)?;
    let w1_q = wasserstein1(&a.q, &b.q)?;
    let delta_w = (w1_p * w1_p + w1_q * w1_q).sqrt();

    let eps_gap = (a.eps - b.eps).abs();

    let ev_a = a.evaluator();
    let ev_b = b.evaluator();

    // ‖c − c'‖_{L²} under each product measure.
    let mut l2_mu = 0.0;
    for (i, x) in a.p.points.iter().enumerate() {
        for (j, y) in a.q.points.iter().enumerate() {
            let d = ev_a.cost_at(x, y)? - ev_b.cost_at(x, y)?;
            l2_mu += a.p.weights[i] * a.q.weights[j] * d * d;
        }
    }
    let mut l2_mu_prime = 0.0;
    for (i, x) in b.p.points.iter().enumerate() {
        for (j, y) in b.q.points.iter().enumerate() {
            let d = ev_a.cost_at(x, y)? - ev_b.cost_at(x, y)?;
            l2_mu_prime += b.p.weights[i] * b.q.weights[j] * d * d;
        }
    }
    let cost_l2_mu = l2_mu.sqrt();
    let cost_l2_mu_prime = l2_mu_prime.sqrt();
    let cost_l2_mixture = (0.5 * (l2_mu + l2_mu_prime)).sqrt();

    // Union grids for the sup norms and Γ.
    let xs = union_points(&a.p.points, &b.p.points);
    let ys = union_points(&a.q.points, &b.q.points);
    let mut cost_sup = 0.0f64;
    let mut sup_a = 0.0f64;
    let mut sup_b = 0.0f64;
    for x in &xs {
        for y in &ys {
            let ca = ev_a.cost_at(x, y)?;
            let cb = ev_b.cost_at(x, y)?;
            cost_sup = cost_sup.max((ca - cb).abs());
            sup_a = sup_a.max(ca.abs());
            sup_b = sup_b.max(cb.abs());
        }
    }

    let delta = 2.0 * l * delta_w + cost_l2_mu + eps_gap;
    let delta_prime = 2.0 * l * delta_w + cost_l2_mu_prime + eps_gap;
    let delta_bar = 2.0 * l * delta_w + cost_l2_mixture + eps_gap;
    let delta_star = 2.0 * l * delta_w + cost_sup + eps_gap;

    let delta_tv = total_variation(&a.p, &b.p)? + total_variation(&a.q, &b.q)?;
    let dh_p = hausdorff_distance(&a.p.points, &b.p.points)?;
    let dh_q = hausdorff_distance(&a.q.points, &b.q.points)?;
    let delta_omega = (dh_p * dh_p + dh_q * dh_q).sqrt();

    let a_const = 1.0 + 6.0 * sup_a / a.eps;
    let a_prime = 1.0 + 6.0 * sup_b / b.eps;

    let d_star = theta_diameter(a, b);

    let delta_hat_over_eps = (un.gamma_bar * delta_bar + cost_l2_mixture + a_prime * eps_gap) / a.eps;
    let delta_hat_over_eps_prime =
        (un.gamma_bar * delta_bar + cost_l2_mixture + a_const * eps_gap) / b.eps;
    let delta_hat = delta_hat_over_eps.min(delta_hat_over_eps_prime);

    let delta_hat_inf_over_eps = (un.c_bar * delta_star + cost_sup + a_prime * eps_gap) / a.eps;
    let delta_hat_inf_over_eps_prime =
        (un.c_bar * delta_star + cost_sup + a_const * eps_gap) / b.eps;
    let delta_hat_inf = delta_hat_inf_over_eps.min(delta_hat_inf_over_eps_prime);

    let small_delta_star = un.c_bar * delta_star + cost_sup;

    Ok(DeltaQuantities {
        delta_w,
        delta,
        delta_prime,
        delta_bar,
        delta_star,
        delta_tv,
        delta_omega,
        small_delta_star,
        a_const,
        a_prime,
        d_star,
        delta_hat,
        delta_hat_over_eps,
        delta_hat_over_eps_prime,
        delta_hat_inf,
        delta_hat_inf_over_eps,
        delta_hat_inf_over_eps_prime,
        cost_l2_mu,
        cost_l2_mu_prime,
        cost_l2_mixture,
        cost_sup,
    })
}

fn union_points(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for p in a.iter().chain(b) {
        if seen.insert(crate::measures::point_key(p)) {
            out.push(p.clone());
        }
    }
    out
}

/// Max pairwise distance within Θ = (Ω_P×Ω_Q) ∪ (Ω_{P'}×Ω_{Q'}), points taken
/// as concatenated pairs.
fn theta_diameter(a: &Instance, b: &Instance) -> f64 {
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(a.n() * a.m() + b.n() * b.m());
    for inst in [a, b] {
        for x in &inst.p.points {
            for y in &inst.q.points {
                let mut z = x.clone();
                z.extend_from_slice(y);
                pts.push(z);
            }
        }
    }
    let mut d = 0.0f64;
    for (i, z) in pts.iter().enumerate() {
        for z2 in &pts[i + 1..] {
            d = d.max(euclidean(z, z2));
        }
    }
    d
}
