//! Exact alternating dual solver.
//!
//! The dual objective
//!
//! ```text
//!     Φ(f ⊕ g) = Σ_ij p_i q_j [ f_i + g_j − (1/2ε)(f_i + g_j − c_ij)₊² ]
//! ```
//!
//! is concave and separable per coordinate within each block: given g, the
//! optimal f_i is the unique root of Σ_j q_j (f_i + g_j − c_ij)₊ = ε, a
//! piecewise-linear equation solved exactly by sorting breakpoints. A sweep
//! updates all f then all g; Φ never decreases and the first-order residual
//! drives the stopping rule.

use serde::{Deserialize, Serialize};

use crate::cost::CostSpec;
use crate::error::{QotError, Result};
use crate::instance::Instance;
use crate::measures::{euclidean, DiscreteMeasure};

/// Dual pair on the marginal supports, including the normalization record and
/// the achieved first-order violation max_i,j |∫(h − c)₊ dQ-or-P − ε|.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Potentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub eps: f64,
    /// Additive shift applied to f (and subtracted from g) after the solve,
    /// e.g. to enforce Σ_j q_j g_j = 0 or to align with another solution.
    pub normalization: f64,
    pub foc_residual_inf: f64,
    pub converged: bool,
}

impl Potentials {
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.f[i] + self.g[j]
    }

    /// Translate (f, g) to (f + a, g − a); h is unchanged.
    pub fn translated(&self, a: f64) -> Potentials {
        Potentials {
            f: self.f.iter().map(|x| x + a).collect(),
            g: self.g.iter().map(|x| x - a).collect(),
            eps: self.eps,
            normalization: self.normalization + a,
            foc_residual_inf: self.foc_residual_inf,
            converged: self.converged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Σ_j q_j g_j = 0 (default gauge).
    GMeanZero,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop when the max first-order violation is at most this.
    pub tol: f64,
    pub max_sweeps: usize,
    pub normalization: Normalization,
    /// Starting iterate for g (zeros by default). The optimum is independent
    /// of it up to translation; the harness uses this to confirm that.
    #[serde(default)]
    pub initial_g: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_sweeps: 100_000,
            normalization: Normalization::GMeanZero,
            initial_g: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualSolve {
    pub potentials: Potentials,
    pub sweeps: usize,
    pub phi_trace: Vec<f64>,
    /// Whether Φ was nondecreasing across sweeps (up to rounding slack).
    pub phi_monotone: bool,
}

/// Solves Σ_j weights_j (t + offsets_j)₊ = eps for the unique t.
///
/// F(t) = Σ w_j (t + b_j)₊ is piecewise linear and nondecreasing with
/// breakpoints −b_j; the root lies on the first piece whose right endpoint
/// reaches eps, where F is affine and inverted exactly. Tied breakpoints are
/// consecutive zero-width pieces and need no special handling.
pub fn scalar_foc_solve(offsets: &[f64], weights: &[f64], eps: f64) -> f64 {
    assert!(!offsets.is_empty(), "scalar_foc_solve needs at least one term");
    debug_assert!(eps > 0.0);
    debug_assert_eq!(offsets.len(), weights.len());
    let mut bp: Vec<(f64, f64)> =
        offsets.iter().zip(weights).map(|(&b, &w)| (-b, w)).collect();
    bp.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut wsum = 0.0;
    let mut wssum = 0.0;
    for k in 0..bp.len() {
        wsum += bp[k].1;
        wssum += bp[k].0 * bp[k].1;
        let upper = if k + 1 < bp.len() { bp[k + 1].0 } else { f64::INFINITY };
        // On (s_k, upper]: F(t) = wsum·t − wssum.
        if wsum * upper - wssum >= eps {
            return (eps + wssum) / wsum;
        }
    }
    // Unreachable for positive weights; the last piece grows without bound.
    (eps + wssum) / wsum
}

/// Alternating exact coordinate maximization of the dual.
pub fn solve_dual(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    cost: &CostSpec,
    eps: f64,
    opts: &SolveOptions,
) -> Result<DualSolve> {
    p.validate()?;
    q.validate()?;
    if !(eps > 0.0) {
        return Err(QotError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if !(opts.tol > 0.0) {
        return Err(QotError::InvalidParameter("tol must be positive".into()));
    }
    if cost.rows() != p.len() || cost.cols() != q.len() {
        return Err(QotError::InvalidParameter("cost matrix does not match marginals".into()));
    }
    let n = p.len();
    let m = q.len();
    let c = &cost.matrix;
    let mut f = vec![0.0f64; n];
    let mut g = match &opts.initial_g {
        Some(g0) if g0.len() == m => g0.clone(),
        Some(_) => {
            return Err(QotError::InvalidParameter("initial_g has the wrong length".into()))
        }
        None => vec![0.0f64; m],
    };
    let mut offs_m = vec![0.0f64; m];
    let mut offs_n = vec![0.0f64; n];

    let mut phi_trace: Vec<f64> = Vec::new();
    let mut phi_monotone = true;
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        for i in 0..n {
            for j in 0..m {
                offs_m[j] = g[j] - c[i][j];
            }
            f[i] = scalar_foc_solve(&offs_m, &q.weights, eps);
        }
        for j in 0..m {
            for i in 0..n {
                offs_n[i] = f[i] - c[i][j];
            }
            g[j] = scalar_foc_solve(&offs_n, &p.weights, eps);
        }

        let phi = dual_objective_parts(&f, &g, p, q, c, eps);
        if let Some(&prev) = phi_trace.last() {
            if phi < prev - 1e-12 * (1.0 + prev.abs()) {
                phi_monotone = false;
            }
        }
        phi_trace.push(phi);

        residual = foc_residual_inf(&f, &g, p, q, c, eps);
        if residual <= opts.tol {
            converged = true;
            break;
        }
    }

    let mut pot = Potentials {
        f,
        g,
        eps,
        normalization: 0.0,
        foc_residual_inf: residual,
        converged,
    };
    if let Normalization::GMeanZero = opts.normalization {
        let a: f64 = q.weights.iter().zip(&pot.g).map(|(&w, &gj)| w * gj).sum();
        pot = pot.translated(a);
        pot.normalization = a;
    }
    Ok(DualSolve { potentials: pot, sweeps, phi_trace, phi_monotone })
}

/// Φ(f ⊕ g) for the given data.
pub fn dual_objective(
    pot: &Potentials,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    cost: &CostSpec,
) -> f64 {
    dual_objective_parts(&pot.f, &pot.g, p, q, &cost.matrix, pot.eps)
}

fn dual_objective_parts(
    f: &[f64],
    g: &[f64],
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    c: &[Vec<f64>],
    eps: f64,
) -> f64 {
    let mut phi = 0.0;
    for (i, &pi) in p.weights.iter().enumerate() {
        for (j, &qj) in q.weights.iter().enumerate() {
            let h = f[i] + g[j];
            let s = (h - c[i][j]).max(0.0);
            phi += pi * qj * (h - s * s / (2.0 * eps));
        }
    }
    phi
}

/// Normalized first-order residuals: rP_i = 1 − (1/ε) Σ_j q_j (h − c)₊ and
/// the Q-side analogue. Both vanish at the exact optimum.
pub fn foc_residuals(
    pot: &Potentials,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    cost: &CostSpec,
) -> (Vec<f64>, Vec<f64>) {
    let c = &cost.matrix;
    let eps = pot.eps;
    let r_p: Vec<f64> = (0..p.len())
        .map(|i| {
            let s: f64 = q
                .weights
                .iter()
                .enumerate()
                .map(|(j, &qj)| qj * (pot.f[i] + pot.g[j] - c[i][j]).max(0.0))
                .sum();
            1.0 - s / eps
        })
        .collect();
    let r_q: Vec<f64> = (0..q.len())
        .map(|j| {
            let s: f64 = p
                .weights
                .iter()
                .enumerate()
                .map(|(i, &pi)| pi * (pot.f[i] + pot.g[j] - c[i][j]).max(0.0))
                .sum();
            1.0 - s / eps
        })
        .collect();
    (r_p, r_q)
}

/// max_i,j |∫(h − c)₊ d(Q or P) − ε|, the unnormalized violation driving the
/// stopping rule.
pub fn foc_residual_inf(
    f: &[f64],
    g: &[f64],
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    c: &[Vec<f64>],
    eps: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let s: f64 = q
            .weights
            .iter()
            .enumerate()
            .map(|(j, &qj)| qj * (f[i] + g[j] - c[i][j]).max(0.0))
            .sum();
        worst = worst.max((s - eps).abs());
    }
    for j in 0..q.len() {
        let s: f64 = p
            .weights
            .iter()
            .enumerate()
            .map(|(i, &pi)| pi * (f[i] + g[j] - c[i][j]).max(0.0))
            .sum();
        worst = worst.max((s - eps).abs());
    }
    worst
}

/// L²(P⊗Q) norm of the projection of R_h = 1 − (h − c)₊/ε onto the closed sum
/// space ℋ = {u ⊕ v}.
///
/// The normal equations of the weighted least-squares projection decouple on
/// a product measure: u_i + ∫v dQ = ∫R_h(x_i, ·) dQ and symmetrically, with a
/// one-dimensional kernel (u + κ) ⊕ (v − κ) fixed by the mean-zero gauge on
/// v. The projected function is u_i + v_j = r̄_i + c̄_j − R̄ in terms of the
/// row, column, and grand means of R_h, independently of the gauge.
pub fn gradient_norm_sumspace(
    pot: &Potentials,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    cost: &CostSpec,
) -> f64 {
    let c = &cost.matrix;
    let eps = pot.eps;
    let n = p.len();
    let m = q.len();
    let r = |i: usize, j: usize| 1.0 - (pot.f[i] + pot.g[j] - c[i][j]).max(0.0) / eps;

    let row_mean: Vec<f64> = (0..n)
        .map(|i| q.weights.iter().enumerate().map(|(j, &qj)| qj * r(i, j)).sum())
        .collect();
    let col_mean: Vec<f64> = (0..m)
        .map(|j| p.weights.iter().enumerate().map(|(i, &pi)| pi * r(i, j)).sum())
        .collect();
    let grand: f64 = p.weights.iter().zip(&row_mean).map(|(&pi, &ri)| pi * ri).sum();

    let mut norm2 = 0.0;
    for (i, &pi) in p.weights.iter().enumerate() {
        for (j, &qj) in q.weights.iter().enumerate() {
            let proj = row_mean[i] + col_mean[j] - grand;
            norm2 += pi * qj * proj * proj;
        }
    }
    norm2.max(0.0).sqrt()
}

/// Extends f to a point x off the support by solving the first FOC line at x:
/// Σ_j q_j (t + g_j − c(x, y_j))₊ = ε. Agrees with the stored value at atoms.
pub fn extend_f(inst: &Instance, pot: &Potentials, x: &[f64]) -> Result<f64> {
    let ev = inst.evaluator();
    let offsets: Result<Vec<f64>> = inst
        .q
        .points
        .iter()
        .enumerate()
        .map(|(j, y)| Ok(pot.g[j] - ev.cost_at(x, y)?))
        .collect();
    Ok(scalar_foc_solve(&offsets?, &inst.q.weights, pot.eps))
}

/// Q-side analogue of [`extend_f`].
pub fn extend_g(inst: &Instance, pot: &Potentials, y: &[f64]) -> Result<f64> {
    let ev = inst.evaluator();
    let offsets: Result<Vec<f64>> = inst
        .p
        .points
        .iter()
        .enumerate()
        .map(|(i, x)| Ok(pot.f[i] - ev.cost_at(x, y)?))
        .collect();
    Ok(scalar_foc_solve(&offsets?, &inst.p.weights, pot.eps))
}

/// Balanced decomposition of w: u_i = ∫w(x_i,·)dQ − w̄/2, v_j = ∫w(·,y_j)dP − w̄/2.
/// Satisfies ∫u dP = ∫v dQ = w̄/2, and ‖u‖² + ‖v‖² ≤ ‖w‖² when w ∈ ℋ.
pub fn balanced_decomposition(
    w: &[Vec<f64>],
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
) -> (Vec<f64>, Vec<f64>) {
    let wbar: f64 = p
        .weights
        .iter()
        .enumerate()
        .map(|(i, &pi)| {
            pi * q
                .weights
                .iter()
                .enumerate()
                .map(|(j, &qj)| qj * w[i][j])
                .sum::<f64>()
        })
        .sum();
    let u: Vec<f64> = (0..p.len())
        .map(|i| {
            q.weights
                .iter()
                .enumerate()
                .map(|(j, &qj)| qj * w[i][j])
                .sum::<f64>()
                - wbar / 2.0
        })
        .collect();
    let v: Vec<f64> = (0..q.len())
        .map(|j| {
            p.weights
                .iter()
                .enumerate()
                .map(|(i, &pi)| pi * w[i][j])
                .sum::<f64>()
                - wbar / 2.0
        })
        .collect();
    (u, v)
}

/// Structural checks every converged solve must satisfy: lipschitz continuity
/// of the discrete potentials, oscillation and sum bounds for bounded costs,
/// and the stopping-rule residual. Returns the list of violations (empty on
/// success).
pub fn solution_property_violations(
    inst: &Instance,
    solve: &DualSolve,
    tol: f64,
) -> Vec<String> {
    let mut bad = Vec::new();
    let pot = &solve.potentials;
    if pot.converged && pot.foc_residual_inf > tol * (1.0 + 1e-9) {
        bad.push(format!("residual {} exceeds tol {}", pot.foc_residual_inf, tol));
    }
    if !solve.phi_monotone {
        bad.push("dual objective decreased across a sweep".into());
    }
    let lip = inst.cost.lipschitz;
    for (pts, vals, name) in [
        (&inst.p.points, &pot.f, "f"),
        (&inst.q.points, &pot.g, "g"),
    ] {
        for i in 0..pts.len() {
            for k in (i + 1)..pts.len() {
                let d = euclidean(&pts[i], &pts[k]);
                let dv = (vals[i] - vals[k]).abs();
                if dv > lip * d * (1.0 + 1e-9) + 1e-12 {
                    bad.push(format!(
                        "{name} violates the discrete Lipschitz bound: |Δ{name}| = {dv} over {d}"
                    ));
                }
            }
        }
    }
    let cbound = inst.cost.sup_abs();
    let osc = |v: &[f64]| {
        let lo = v.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        hi - lo
    };
    let slack = 1e-9 * (1.0 + cbound) + 1e-12;
    if osc(&pot.f) > 2.0 * cbound + slack {
        bad.push(format!("osc(f) = {} exceeds 2‖c‖∞ = {}", osc(&pot.f), 2.0 * cbound));
    }
    if osc(&pot.g) > 2.0 * cbound + slack {
        bad.push(format!("osc(g) = {} exceeds 2‖c‖∞ = {}", osc(&pot.g), 2.0 * cbound));
    }
    let fmin = pot.f.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let fmax = pot.f.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let gmin = pot.g.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let gmax = pot.g.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if fmax + gmax > 5.0 * cbound + pot.eps + slack || fmin + gmin < -5.0 * cbound + pot.eps - slack
    {
        bad.push(format!(
            "h range [{}, {}] escapes [-5‖c‖∞+ε, 5‖c‖∞+ε] = [{}, {}]",
            fmin + gmin,
            fmax + gmax,
            -5.0 * cbound + pot.eps,
            5.0 * cbound + pot.eps
        ));
    }
    bad
}
