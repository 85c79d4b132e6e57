//! Run configuration: a single JSON document selecting the command and its
//! inputs. Paths are resolved relative to the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use qot_core::cost::CostKind;
use qot_core::fixtures::{example62, quadratic_convex_instance};
use qot_core::harness::{PerturbKind, PerturbTarget, TiltFn};
use qot_core::measures::ClassParams;
use qot_core::{CostSpec, DiscreteMeasure, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Perturb,
    Constants,
    Example62,
    Verify,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Output directory; created if missing.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Subset of {json, csv}; default both.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub solver: SolverConfig,

    // solve / perturb
    #[serde(default)]
    pub instance: Option<InstanceSource>,
    #[serde(default)]
    pub perturbation: Option<PerturbationConfig>,

    // constants / perturb / verify
    #[serde(default)]
    pub class_params: Option<ClassParams>,
    #[serde(default)]
    pub class_params_path: Option<PathBuf>,

    // example62
    #[serde(default)]
    pub example62: Option<Example62Config>,

    // verify
    #[serde(default)]
    pub pairs: Option<Vec<PairSource>>,
    /// Fault-injection knob for testing the failure path: every bound's
    /// right-hand side is multiplied by this before the pass check.
    #[serde(default = "default_rhs_scale")]
    pub rhs_scale: f64,

    /// Also write the instance itself (measures and cost) in the standard
    /// JSON formats, so generated fixtures are reproducible externally.
    #[serde(default)]
    pub export_instance: bool,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<String> {
    vec!["json".into(), "csv".into()]
}

fn default_jobs() -> usize {
    1
}

fn default_rhs_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_sweeps() -> usize {
    100_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: default_tol(), max_sweeps: default_max_sweeps() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Example62 {
        example62: Example62Instance,
    },
    QuadraticGrid {
        quadratic_grid: QuadraticGridConfig,
    },
    Files {
        p: PathBuf,
        q: PathBuf,
        cost: CostSource,
        eps: f64,
        #[serde(default)]
        box_p: Option<AmbientBox>,
        #[serde(default)]
        box_q: Option<AmbientBox>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example62Instance {
    pub eta: f64,
    pub grid_n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticGridConfig {
    pub p_side: usize,
    pub q_side: usize,
    pub dim: usize,
    pub eps: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CostSource {
    SqEuclidean {
        #[serde(default)]
        lipschitz: Option<f64>,
    },
    Example62,
    Zero,
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example62Config {
    pub etas: Vec<f64>,
    pub grid_n: usize,
    /// L∞ tolerance for the numeric h against the closed form.
    #[serde(default = "default_h_tol")]
    pub h_tol: f64,
}

fn default_h_tol() -> f64 {
    5e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub kind: PerturbKindConfig,
    pub grid: Vec<f64>,
    pub target: PerturbTarget,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum PerturbKindConfig {
    MarginalMixture { other: PathBuf },
    AtomTranslation { shift: Vec<f64> },
    WeightTiltExample62,
    WeightTiltLinear { coord: usize, scale: f64 },
    CostScale,
    EpsRamp,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PairSource {
    Example62Pair { eta_a: f64, eta_b: f64, grid_n: usize },
    Instances { a: InstanceSource, b: InstanceSource },
    Perturbed { base: InstanceSource, perturbation: PerturbationConfig, t: f64 },
}

/// Input-shaped errors: everything here maps to exit code 1.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for InputError {}

pub fn load_config(path: &Path) -> Result<RunConfig, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| InputError(format!("cannot parse config {}: {e}", path.display())))?;
    if !(cfg.solver.tol > 0.0) {
        return Err(InputError("solver.tol must be positive".into()));
    }
    if cfg.jobs == 0 {
        return Err(InputError("jobs must be at least 1".into()));
    }
    for f in &cfg.formats {
        if f != "json" && f != "csv" {
            return Err(InputError(format!("unknown format {f:?}; expected json or csv")));
        }
    }
    Ok(cfg)
}

pub fn load_measure(path: &Path) -> Result<DiscreteMeasure, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError(format!("cannot read measure {}: {e}", path.display())))?;
    let m: DiscreteMeasure = serde_json::from_str(&text)
        .map_err(|e| InputError(format!("cannot parse measure {}: {e}", path.display())))?;
    m.validate()
        .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    Ok(m)
}

pub fn load_class_params(cfg: &RunConfig, base_dir: &Path) -> Result<ClassParams, InputError> {
    let params = match (&cfg.class_params, &cfg.class_params_path) {
        (Some(p), _) => p.clone(),
        (None, Some(path)) => {
            let resolved = resolve(base_dir, path);
            let text = std::fs::read_to_string(&resolved).map_err(|e| {
                InputError(format!("cannot read class params {}: {e}", resolved.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                InputError(format!("cannot parse class params {}: {e}", resolved.display()))
            })?
        }
        (None, None) => {
            return Err(InputError("class_params (or class_params_path) is required".into()))
        }
    };
    params.validate().map_err(|e| InputError(e.to_string()))?;
    Ok(params)
}

pub fn resolve(base_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

pub fn build_instance(src: &InstanceSource, base_dir: &Path) -> Result<Instance, InputError> {
    match src {
        InstanceSource::Example62 { example62: cfg } => {
            let fx = example62(cfg.eta, cfg.grid_n).map_err(|e| InputError(e.to_string()))?;
            Ok(fx.instance)
        }
        InstanceSource::QuadraticGrid { quadratic_grid: cfg } => {
            let fx = quadratic_convex_instance(cfg.p_side, cfg.q_side, cfg.dim, cfg.eps, cfg.seed)
                .map_err(|e| InputError(e.to_string()))?;
            Ok(fx.instance)
        }
        InstanceSource::Files { p, q, cost, eps, box_p, box_q } => {
            let pm = load_measure(&resolve(base_dir, p))?;
            let qm = load_measure(&resolve(base_dir, q))?;
            if let Some(b) = box_p {
                pm.check_in_box(&b.lo, &b.hi).map_err(|e| InputError(e.to_string()))?;
            }
            if let Some(b) = box_q {
                qm.check_in_box(&b.lo, &b.hi).map_err(|e| InputError(e.to_string()))?;
            }
            let cost = build_cost(cost, &pm, &qm, base_dir)?;
            Instance::new(pm, qm, cost, *eps).map_err(|e| InputError(e.to_string()))
        }
    }
}

fn build_cost(
    src: &CostSource,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    base_dir: &Path,
) -> Result<CostSpec, InputError> {
    match src {
        CostSource::SqEuclidean { lipschitz } => {
            CostSpec::sq_euclidean(p, q, *lipschitz).map_err(|e| InputError(e.to_string()))
        }
        CostSource::Example62 => CostSpec::example62(p, q).map_err(|e| InputError(e.to_string())),
        CostSource::Zero => Ok(CostSpec::zero(p, q)),
        CostSource::File { path } => {
            let resolved = resolve(base_dir, path);
            let text = std::fs::read_to_string(&resolved)
                .map_err(|e| InputError(format!("cannot read cost {}: {e}", resolved.display())))?;
            let spec: CostSpec = serde_json::from_str(&text)
                .map_err(|e| InputError(format!("cannot parse cost {}: {e}", resolved.display())))?;
            if spec.rows() != p.len() || spec.cols() != q.len() {
                return Err(InputError(format!(
                    "cost matrix in {} is {}x{}, expected {}x{}",
                    resolved.display(),
                    spec.rows(),
                    spec.cols(),
                    p.len(),
                    q.len()
                )));
            }
            // Re-validate the declared invariants on load.
            spec.check_lipschitz_on_grid(&p.points, &q.points, spec.lipschitz)
                .map_err(|e| InputError(format!("{}: {e}", resolved.display())))?;
            match spec.kind {
                CostKind::SqEuclidean => {
                    for (i, x) in p.points.iter().enumerate() {
                        for (j, y) in q.points.iter().enumerate() {
                            let d2: f64 =
                                x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                            if (spec.matrix[i][j] - 0.5 * d2).abs() > 1e-12 {
                                return Err(InputError(format!(
                                    "{}: sq_euclidean entry ({i},{j}) does not equal half the squared distance",
                                    resolved.display()
                                )));
                            }
                        }
                    }
                }
                CostKind::Example62Analytic => {
                    for (i, x) in p.points.iter().enumerate() {
                        for (j, y) in q.points.iter().enumerate() {
                            let expected = qot_core::cost::example62_cost(x[0], y[0])
                                .map_err(|e| InputError(format!("{}: {e}", resolved.display())))?;
                            if (spec.matrix[i][j] - expected).abs() > 1e-12 {
                                return Err(InputError(format!(
                                    "{}: example62 entry ({i},{j}) does not match its formula",
                                    resolved.display()
                                )));
                            }
                        }
                    }
                }
                CostKind::ExplicitMatrix => {}
            }
            Ok(spec)
        }
    }
}

pub fn build_perturbation(
    cfg: &PerturbationConfig,
    base_dir: &Path,
) -> Result<qot_core::harness::PerturbationSpec, InputError> {
    let kind = match &cfg.kind {
        PerturbKindConfig::MarginalMixture { other } => {
            let m = load_measure(&resolve(base_dir, other))?;
            PerturbKind::MarginalMixture { other: m }
        }
        PerturbKindConfig::AtomTranslation { shift } => {
            PerturbKind::AtomTranslation { shift: shift.clone() }
        }
        PerturbKindConfig::WeightTiltExample62 => {
            PerturbKind::WeightTilt { tilt: TiltFn::Example62 }
        }
        PerturbKindConfig::WeightTiltLinear { coord, scale } => {
            PerturbKind::WeightTilt { tilt: TiltFn::LinearCoord { coord: *coord, scale: *scale } }
        }
        PerturbKindConfig::CostScale => PerturbKind::CostScale,
        PerturbKindConfig::EpsRamp => PerturbKind::EpsRamp,
    };
    let spec = qot_core::harness::PerturbationSpec {
        kind,
        grid: cfg.grid.clone(),
        target: cfg.target,
    };
    spec.validate().map_err(|e| InputError(e.to_string()))?;
    Ok(spec)
}
