//! Command implementations. Exit codes: 0 success, 1 input error, 2 solver
//! non-convergence, 3 bound violation.

use std::path::Path;

use qot_core::constants::uniform_constants;
use qot_core::coupling::extract_coupling;
use qot_core::fixtures::{analytic_foc_residual, example62};
use qot_core::harness::{
    lipschitz_ratio_curve, perturb_one, run_pair_solved, solve_instance, StabilityReport,
};
use qot_core::measures::hausdorff_distance;
use qot_core::constants::{stability_constants, PerInstanceParams};
use qot_core::report::{
    checks_csv, constants_csv, curve_csv, solution_json, to_canonical_json, CHECKS_CSV_HEADER,
};
use qot_core::solver::solve_dual;
use qot_core::{Instance, QotError, SolveOptions};

use crate::config::{
    build_instance, build_perturbation, load_class_params, InputError, PairSource, RunConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_BOUND: i32 = 3;

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub base_dir: &'a Path,
}

impl Ctx<'_> {
    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.cfg.solver.tol,
            max_sweeps: self.cfg.solver.max_sweeps,
            ..SolveOptions::default()
        }
    }

    fn wants(&self, format: &str) -> bool {
        self.cfg.formats.iter().any(|f| f == format)
    }

    fn write_out(&self, name: &str, contents: &str) -> Result<(), InputError> {
        std::fs::create_dir_all(&self.cfg.out)
            .map_err(|e| InputError(format!("cannot create {}: {e}", self.cfg.out.display())))?;
        let path = self.cfg.out.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))
    }
}

fn exit_for(err: &QotError) -> i32 {
    match err {
        QotError::NotConverged { .. } | QotError::Internal(_) => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

pub fn cmd_solve(ctx: &Ctx) -> i32 {
    let src = match &ctx.cfg.instance {
        Some(s) => s,
        None => {
            eprintln!("solve: config is missing \"instance\"");
            return EXIT_INPUT;
        }
    };
    let inst = match build_instance(src, ctx.base_dir) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("solve: {e}");
            return EXIT_INPUT;
        }
    };
    let opts = ctx.solve_options();
    let solve = match solve_dual(&inst.p, &inst.q, &inst.cost, inst.eps, &opts) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("solve: {e}");
            return exit_for(&e);
        }
    };
    if !solve.potentials.converged {
        eprintln!(
            "solve: not converged after {} sweeps (residual {:.3e})",
            solve.sweeps, solve.potentials.foc_residual_inf
        );
        let doc = serde_json::json!({
            "potentials": solve.potentials,
            "convergence": {
                "sweeps": solve.sweeps,
                "residual": solve.potentials.foc_residual_inf,
                "phi_trace": solve.phi_trace,
                "converged": false,
            },
        });
        if let Ok(s) = to_canonical_json(&doc) {
            let _ = ctx.write_out("solution.json", &s);
        }
        return EXIT_SOLVER;
    }
    let coupling = match extract_coupling(&solve.potentials, &inst.p, &inst.q, &inst.cost) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("solve: {e}");
            return exit_for(&e);
        }
    };
    let doc = match solution_json(&inst, &solve, &coupling) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("solve: {e}");
            return EXIT_INPUT;
        }
    };
    if ctx.wants("json") {
        match to_canonical_json(&doc) {
            Ok(s) => {
                if let Err(e) = ctx.write_out("solution.json", &s) {
                    eprintln!("solve: {e}");
                    return EXIT_INPUT;
                }
            }
            Err(e) => {
                eprintln!("solve: {e}");
                return EXIT_INPUT;
            }
        }
    }
    if ctx.wants("csv") {
        let mut csv = String::from("sweep,phi\n");
        for (k, phi) in solve.phi_trace.iter().enumerate() {
            csv.push_str(&format!("{},{}\n", k + 1, phi));
        }
        if let Err(e) = ctx.write_out("phi_trace.csv", &csv) {
            eprintln!("solve: {e}");
            return EXIT_INPUT;
        }
    }
    if ctx.cfg.export_instance {
        if let Err(e) = export_instance(ctx, &inst) {
            eprintln!("solve: {e}");
            return EXIT_INPUT;
        }
    }
    println!(
        "solved {}x{} instance in {} sweeps, residual {:.3e}",
        inst.n(),
        inst.m(),
        solve.sweeps,
        solve.potentials.foc_residual_inf
    );
    EXIT_OK
}

/// Writes the instance in the standard measure/cost JSON formats so generated
/// fixtures can be reproduced by external tools.
fn export_instance(ctx: &Ctx, inst: &Instance) -> Result<(), InputError> {
    let p = to_canonical_json(&inst.p).map_err(|e| InputError(e.to_string()))?;
    let q = to_canonical_json(&inst.q).map_err(|e| InputError(e.to_string()))?;
    let cost = to_canonical_json(&inst.cost).map_err(|e| InputError(e.to_string()))?;
    ctx.write_out("instance_p.json", &p)?;
    ctx.write_out("instance_q.json", &q)?;
    ctx.write_out("instance_cost.json", &cost)?;
    ctx.write_out("instance_eps.json", &format!("{}\n", inst.eps))
}

pub fn cmd_constants(ctx: &Ctx) -> i32 {
    let class = match load_class_params(ctx.cfg, ctx.base_dir) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("constants: {e}");
            return EXIT_INPUT;
        }
    };
    // With an instance in the config the table carries the instance-level
    // constants as well; otherwise only the class-uniform ones.
    let (doc, csv) = if let Some(src) = &ctx.cfg.instance {
        let inst = match build_instance(src, ctx.base_dir) {
            Ok(i) => i,
            Err(e) => {
                eprintln!("constants: {e}");
                return EXIT_INPUT;
            }
        };
        let per = PerInstanceParams::from_class(&class);
        let all = match stability_constants(&inst, &per, &class) {
            Ok(a) => a,
            Err(e) => {
                eprintln!("constants: {e}");
                return EXIT_INPUT;
            }
        };
        println!("gamma_eps = {}", all.gamma_eps);
        println!("etahat_eps = {}", all.etahat_eps);
        println!("gamma_bar = {}", all.gamma_bar);
        println!("eta_bar = {}", all.eta_bar);
        println!("eta_bar_star = {}", all.eta_bar_star);
        println!("c_bar = {}", all.c_bar);
        (
            serde_json::json!({ "class_params": class, "constants": all }),
            constants_csv(&all),
        )
    } else {
        let un = match uniform_constants(&class) {
            Ok(u) => u,
            Err(e) => {
                eprintln!("constants: {e}");
                return EXIT_INPUT;
            }
        };
        let rows: [(&str, f64, &str); 6] = [
            ("gamma_bar", un.gamma_bar, "uniform-gamma"),
            ("vartheta_lower", un.vartheta_lower, "uniform-vartheta"),
            ("eta_bar", un.eta_bar, "uniform-l2-threshold"),
            ("kappahat_lower", un.kappahat_lower, "uniform-kappahat"),
            ("eta_bar_star", un.eta_bar_star, "uniform-linfty-threshold"),
            ("c_bar", un.c_bar, "uniform-linfty-lipschitz"),
        ];
        for (name, value, _) in rows {
            println!("{name} = {value}");
        }
        let mut csv = String::from("name,value,formula\n");
        for (name, value, formula) in rows {
            csv.push_str(&format!("{name},{value},{formula}\n"));
        }
        (serde_json::json!({ "class_params": class, "constants": un }), csv)
    };
    if ctx.wants("json") {
        match to_canonical_json(&doc) {
            Ok(s) => {
                if let Err(e) = ctx.write_out("constants.json", &s) {
                    eprintln!("constants: {e}");
                    return EXIT_INPUT;
                }
            }
            Err(e) => {
                eprintln!("constants: {e}");
                return EXIT_INPUT;
            }
        }
    }
    if ctx.wants("csv") {
        if let Err(e) = ctx.write_out("constants.csv", &csv) {
            eprintln!("constants: {e}");
            return EXIT_INPUT;
        }
    }
    EXIT_OK
}

pub fn cmd_example62(ctx: &Ctx) -> i32 {
    let cfg = match &ctx.cfg.example62 {
        Some(c) => c,
        None => {
            eprintln!("example62: config is missing \"example62\"");
            return EXIT_INPUT;
        }
    };
    let base = match example62(0.0, cfg.grid_n) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("example62: {e}");
            return EXIT_INPUT;
        }
    };
    let opts = ctx.solve_options();
    let mut rows = Vec::new();
    let mut all_ok = true;
    for &eta in &cfg.etas {
        let fx = match example62(eta, cfg.grid_n) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("example62: {e}");
                return EXIT_INPUT;
            }
        };
        let analytic_residual = analytic_foc_residual(&fx);
        let dh_to_base = fx.analytic_support_hausdorff_to(&base);
        let solved = match solve_instance(&fx.instance, &opts) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("example62: {e}");
                return exit_for(&e);
            }
        };
        let pot = &solved.solve.potentials;
        let mut h_err = 0.0f64;
        for i in 0..fx.instance.n() {
            for j in 0..2 {
                h_err = h_err.max((pot.f[i] + pot.g[j] - fx.h_fiber(j)).abs());
            }
        }
        let exact = match fx.closed_form_coupling() {
            Ok(c) => c,
            Err(e) => {
                eprintln!("example62: {e}");
                return EXIT_INPUT;
            }
        };
        let numeric_support = qot_core::coupling::support_points(
            &solved.coupling,
            &fx.instance.p,
            &fx.instance.q,
        );
        let exact_support =
            qot_core::coupling::support_points(&exact, &fx.instance.p, &fx.instance.q);
        let support_gap = match hausdorff_distance(&numeric_support, &exact_support) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("example62: {e}");
                return EXIT_INPUT;
            }
        };
        let cell = fx.edges.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
        let ok = analytic_residual <= 1e-12 && h_err <= cfg.h_tol && support_gap <= cell;
        all_ok &= ok;
        println!(
            "eta {eta}: analytic residual {analytic_residual:.2e}, h error {h_err:.2e}, \
             support gap {support_gap:.2e}, d_H to eta=0 {dh_to_base}, {}",
            if ok { "ok" } else { "VIOLATION" }
        );
        rows.push(serde_json::json!({
            "eta": eta,
            "analytic_foc_residual": analytic_residual,
            "support_hausdorff_to_eta0": dh_to_base,
            "numeric_h_linf_error": h_err,
            "numeric_support_gap": support_gap,
            "cell_width": cell,
            "sweeps": solved.solve.sweeps,
            "ok": ok,
        }));
    }
    if ctx.wants("json") {
        let doc = serde_json::json!({ "grid_n": cfg.grid_n, "runs": rows });
        match to_canonical_json(&doc) {
            Ok(s) => {
                if let Err(e) = ctx.write_out("example62.json", &s) {
                    eprintln!("example62: {e}");
                    return EXIT_INPUT;
                }
            }
            Err(e) => {
                eprintln!("example62: {e}");
                return EXIT_INPUT;
            }
        }
    }
    if ctx.wants("csv") {
        let mut csv =
            String::from("eta,analytic_foc_residual,support_hausdorff_to_eta0,numeric_h_linf_error,numeric_support_gap,ok\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r["eta"],
                r["analytic_foc_residual"],
                r["support_hausdorff_to_eta0"],
                r["numeric_h_linf_error"],
                r["numeric_support_gap"],
                r["ok"]
            ));
        }
        if let Err(e) = ctx.write_out("example62.csv", &csv) {
            eprintln!("example62: {e}");
            return EXIT_INPUT;
        }
    }
    if all_ok {
        EXIT_OK
    } else {
        EXIT_BOUND
    }
}

pub fn cmd_perturb(ctx: &Ctx) -> i32 {
    let (src, pcfg) = match (&ctx.cfg.instance, &ctx.cfg.perturbation) {
        (Some(s), Some(p)) => (s, p),
        _ => {
            eprintln!("perturb: config needs \"instance\" and \"perturbation\"");
            return EXIT_INPUT;
        }
    };
    let class = match load_class_params(ctx.cfg, ctx.base_dir) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("perturb: {e}");
            return EXIT_INPUT;
        }
    };
    let base = match build_instance(src, ctx.base_dir) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("perturb: {e}");
            return EXIT_INPUT;
        }
    };
    let spec = match build_perturbation(pcfg, ctx.base_dir) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("perturb: {e}");
            return EXIT_INPUT;
        }
    };
    let opts = ctx.solve_options();
    let rows = match lipschitz_ratio_curve(&base, &spec, &class, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("perturb: {e}");
            return exit_for(&e);
        }
    };
    let c_bar = match uniform_constants(&class) {
        Ok(u) => u.c_bar,
        Err(e) => {
            eprintln!("perturb: {e}");
            return EXIT_INPUT;
        }
    };
    if ctx.wants("csv") {
        if let Err(e) = ctx.write_out("curve.csv", &curve_csv(&rows)) {
            eprintln!("perturb: {e}");
            return EXIT_INPUT;
        }
    }
    if ctx.wants("json") {
        let doc = serde_json::json!({ "c_bar": c_bar, "rows": rows });
        match to_canonical_json(&doc) {
            Ok(s) => {
                if let Err(e) = ctx.write_out("curve.json", &s) {
                    eprintln!("perturb: {e}");
                    return EXIT_INPUT;
                }
            }
            Err(e) => {
                eprintln!("perturb: {e}");
                return EXIT_INPUT;
            }
        }
    }
    let mut ok = true;
    for row in &rows {
        if row.hypothesis && row.ratio > c_bar * (1.0 + 1e-12) {
            eprintln!(
                "perturb: ratio {} at t = {} exceeds the uniform constant {c_bar}",
                row.ratio, row.t
            );
            ok = false;
        }
    }
    println!("perturb: {} grid points, C_bar = {c_bar}", rows.len());
    if ok {
        EXIT_OK
    } else {
        EXIT_BOUND
    }
}

pub fn cmd_verify(ctx: &Ctx) -> i32 {
    let sources = match &ctx.cfg.pairs {
        Some(p) if !p.is_empty() => p,
        _ => {
            eprintln!("verify: config needs a nonempty \"pairs\" list");
            return EXIT_INPUT;
        }
    };
    let class = match load_class_params(ctx.cfg, ctx.base_dir) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("verify: {e}");
            return EXIT_INPUT;
        }
    };
    let mut resolved: Vec<(Instance, Instance)> = Vec::with_capacity(sources.len());
    for (k, src) in sources.iter().enumerate() {
        match resolve_pair(src, ctx) {
            Ok(pair) => resolved.push(pair),
            Err(e) => {
                eprintln!("verify: pair {k}: {e}");
                return EXIT_INPUT;
            }
        }
    }

    let opts = ctx.solve_options();
    let reports = match run_pairs_parallel(&resolved, &class, &opts, ctx.cfg.jobs) {
        Ok(r) => r,
        Err((k, e)) => {
            eprintln!("verify: pair {k}: {e}");
            return exit_for(&e);
        }
    };

    let rhs_scale = ctx.cfg.rhs_scale;
    let mut all_pass = true;
    let mut checks_table = String::from(CHECKS_CSV_HEADER);
    for (k, mut report) in reports.into_iter().enumerate() {
        if rhs_scale != 1.0 {
            for c in &mut report.checks {
                c.rhs *= rhs_scale;
                c.pass = c.lhs <= c.rhs + 1e-12 * (1.0 + c.rhs.abs());
                c.ratio = if c.rhs > 0.0 {
                    Some(c.lhs / c.rhs)
                } else if c.lhs.abs() <= 1e-14 {
                    Some(0.0)
                } else {
                    None
                };
            }
        }
        let failures: Vec<String> = report
            .hard_failures()
            .iter()
            .map(|c| c.id.clone())
            .collect();
        let applicable = report.checks.iter().filter(|c| c.hypothesis).count();
        let not_applicable: Vec<String> = report
            .checks
            .iter()
            .filter(|c| !c.hypothesis)
            .map(|c| c.id.clone())
            .collect();
        if failures.is_empty() {
            println!(
                "pair {k}: pass ({applicable} applicable checks{})",
                if not_applicable.is_empty() {
                    String::new()
                } else {
                    format!(", not applicable: {}", not_applicable.join(" "))
                }
            );
        } else {
            all_pass = false;
            println!("pair {k}: FAIL ({})", failures.join(" "));
        }
        checks_table.push_str(&checks_csv(&format!("pair-{k}"), &report));
        if ctx.wants("json") {
            match to_canonical_json(&report) {
                Ok(s) => {
                    if let Err(e) = ctx.write_out(&format!("pair-{k}.json"), &s) {
                        eprintln!("verify: {e}");
                        return EXIT_INPUT;
                    }
                }
                Err(e) => {
                    eprintln!("verify: {e}");
                    return EXIT_INPUT;
                }
            }
        }
    }
    if ctx.wants("csv") {
        if let Err(e) = ctx.write_out("checks.csv", &checks_table) {
            eprintln!("verify: {e}");
            return EXIT_INPUT;
        }
    }
    if all_pass {
        EXIT_OK
    } else {
        eprintln!("verify: at least one applicable bound failed");
        EXIT_BOUND
    }
}

fn resolve_pair(src: &PairSource, ctx: &Ctx) -> Result<(Instance, Instance), InputError> {
    match src {
        PairSource::Example62Pair { eta_a, eta_b, grid_n } => {
            let a = example62(*eta_a, *grid_n).map_err(|e| InputError(e.to_string()))?;
            let b = example62(*eta_b, *grid_n).map_err(|e| InputError(e.to_string()))?;
            Ok((a.instance, b.instance))
        }
        PairSource::Instances { a, b } => {
            Ok((build_instance(a, ctx.base_dir)?, build_instance(b, ctx.base_dir)?))
        }
        PairSource::Perturbed { base, perturbation, t } => {
            let base = build_instance(base, ctx.base_dir)?;
            let spec = build_perturbation(perturbation, ctx.base_dir)?;
            let other = perturb_one(&base, &spec, *t).map_err(|e| InputError(e.to_string()))?;
            Ok((base, other))
        }
    }
}

fn run_pairs_parallel(
    pairs: &[(Instance, Instance)],
    class: &qot_core::ClassParams,
    opts: &SolveOptions,
    jobs: usize,
) -> Result<Vec<StabilityReport>, (usize, QotError)> {
    let jobs = jobs.min(pairs.len()).max(1);
    if jobs == 1 {
        let mut out = Vec::with_capacity(pairs.len());
        for (k, (a, b)) in pairs.iter().enumerate() {
            let sa = solve_instance(a, opts).map_err(|e| (k, e))?;
            let sb = solve_instance(b, opts).map_err(|e| (k, e))?;
            out.push(run_pair_solved(&sa, &sb, class).map_err(|e| (k, e))?);
        }
        return Ok(out);
    }
    let mut slots: Vec<Option<Result<StabilityReport, QotError>>> = Vec::new();
    slots.resize_with(pairs.len(), || None);
    let slots = std::sync::Mutex::new(slots);
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= pairs.len() {
                    break;
                }
                let (a, b) = &pairs[k];
                let result = solve_instance(a, opts).and_then(|sa| {
                    let sb = solve_instance(b, opts)?;
                    run_pair_solved(&sa, &sb, class)
                });
                slots.lock().unwrap()[k] = Some(result);
            });
        }
    });
    let mut out = Vec::with_capacity(pairs.len());
    for (k, slot) in slots.into_inner().unwrap().into_iter().enumerate() {
        match slot {
            Some(Ok(r)) => out.push(r),
            Some(Err(e)) => return Err((k, e)),
            None => return Err((k, QotError::Internal("pair was not processed".into()))),
        }
    }
    Ok(out)
}
