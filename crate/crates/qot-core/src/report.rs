//! Canonical report serialization: JSON with sorted keys (byte-identical for
//! identical inputs) and flat CSV emitters for constants and curves.

use serde::Serialize;
use serde_json::Value;

use crate::constants::StabilityConstants;
use crate::coupling::{extract_support, Coupling};
use crate::error::{QotError, Result};
use crate::harness::{CurveRow, StabilityReport};
use crate::instance::Instance;
use crate::solver::DualSolve;

/// Dense density matrices are embedded up to this many cells; larger ones are
/// written in coordinate-list form.
pub const DENSE_DENSITY_LIMIT: usize = 1_000_000;

/// Serializes any value to canonical JSON: object keys sorted (serde_json's
/// default map is ordered), LF line ending.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v: Value = serde_json::to_value(value)
        .map_err(|e| QotError::Internal(format!("serialize: {e}")))?;
    let mut s = serde_json::to_string_pretty(&v)
        .map_err(|e| QotError::Internal(format!("serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Solution document: potentials, density (dense or sparse), support,
/// objective values, convergence metadata.
pub fn solution_json(inst: &Instance, solve: &DualSolve, coupling: &Coupling) -> Result<Value> {
    let pot = &solve.potentials;
    let density: Value = if inst.n() * inst.m() <= DENSE_DENSITY_LIMIT {
        serde_json::json!({ "format": "dense", "zeta": coupling.zeta })
    } else {
        let entries: Vec<Value> = coupling
            .zeta
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|&(_, &z)| z > coupling.support_tol)
                    .map(move |(j, &z)| serde_json::json!({ "i": i, "j": j, "zeta": z }))
            })
            .collect();
        serde_json::json!({ "format": "coo", "entries": entries })
    };
    let support: Vec<Value> = extract_support(coupling)
        .into_iter()
        .map(|(i, j)| serde_json::json!([i, j]))
        .collect();
    let phi = crate::solver::dual_objective(pot, &inst.p, &inst.q, &inst.cost);
    let gap = crate::coupling::duality_gap(coupling, pot, &inst.p, &inst.q, &inst.cost);
    Ok(serde_json::json!({
        "potentials": {
            "f": pot.f,
            "g": pot.g,
            "eps": pot.eps,
            "normalization": pot.normalization,
            "foc_residual_inf": pot.foc_residual_inf,
            "converged": pot.converged,
        },
        "density": density,
        "support": support,
        "support_tol": coupling.support_tol,
        "phi": phi,
        "duality_gap": gap,
        "convergence": {
            "sweeps": solve.sweeps,
            "residual": pot.foc_residual_inf,
            "phi_trace": solve.phi_trace,
            "phi_monotone": solve.phi_monotone,
        },
    }))
}

/// One row per constant: name, value, formula id.
pub fn constants_csv(c: &StabilityConstants) -> String {
    let rows: [(&str, f64, &str); 11] = [
        ("gamma_eps", c.gamma_eps, "error-bound-gamma"),
        ("vartheta_delta", c.vartheta_delta, "vartheta-delta"),
        ("qhat_eps", c.qhat_eps, "linfty-qhat"),
        ("kappahat_eps", c.kappahat_eps, "linfty-kappahat"),
        ("etahat_eps", c.etahat_eps, "linfty-threshold"),
        ("gamma_bar", c.gamma_bar, "uniform-gamma"),
        ("vartheta_lower", c.vartheta_lower, "uniform-vartheta"),
        ("eta_bar", c.eta_bar, "uniform-l2-threshold"),
        ("kappahat_lower", c.kappahat_lower, "uniform-kappahat"),
        ("eta_bar_star", c.eta_bar_star, "uniform-linfty-threshold"),
        ("c_bar", c.c_bar, "uniform-linfty-lipschitz"),
    ];
    let mut out = String::from("name,value,formula\n");
    for (name, value, formula) in rows {
        out.push_str(&format!("{name},{value},{formula}\n"));
    }
    out
}

/// CSV with header t,delta_star,linf_diff,ratio,hypothesis.
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("t,delta_star,linf_diff,ratio,hypothesis\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.t, r.delta_star, r.linf_diff, r.ratio, r.hypothesis
        ));
    }
    out
}

/// Summary CSV of bound checks, one row per check.
pub fn checks_csv(pair_id: &str, report: &StabilityReport) -> String {
    let mut out = String::new();
    for c in &report.checks {
        let ratio = c.ratio.map_or(String::from(""), |r| r.to_string());
        out.push_str(&format!(
            "{pair_id},{},{},{},{},{ratio},{}\n",
            c.id, c.hypothesis, c.lhs, c.rhs, c.pass
        ));
    }
    out
}

pub const CHECKS_CSV_HEADER: &str = "pair,check,hypothesis,lhs,rhs,ratio,pass\n";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_sorts_keys_and_is_stable() {
        #[derive(Serialize)]
        struct T {
            zeta: f64,
            alpha: f64,
        }
        let s = to_canonical_json(&T { zeta: 1.0, alpha: 0.1 }).unwrap();
        let a = s.find("alpha").unwrap();
        let z = s.find("zeta").unwrap();
        assert!(a < z);
        assert_eq!(s, to_canonical_json(&T { zeta: 1.0, alpha: 0.1 }).unwrap());
    }
}
