//! Closed-form instances: the two-fiber support-instability family with exact
//! piecewise-linear integration, the zero-cost case, and quadratic-cost
//! convex-grid generators.

use serde::{Deserialize, Serialize};

use crate::cost::{example62_u, CostSpec};
use crate::coupling::Coupling;
use crate::error::{QotError, Result};
use crate::instance::Instance;
use crate::measures::{min_ball_mass, ClassParams, DiscreteMeasure};
use crate::rng::SplitMix64;
use crate::solver::{foc_residual_inf, Potentials};

/// Piecewise-linear function on an interval, linear between breakpoints.
/// All fixture integrals reduce to exact trapezoids on these.
#[derive(Debug, Clone)]
pub struct PwLinear {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl PwLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(QotError::InvalidParameter("piecewise-linear: need matching breakpoints".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QotError::InvalidParameter("piecewise-linear: breakpoints must increase".into()));
        }
        Ok(PwLinear { xs, ys })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= *self.xs.last().unwrap() {
            return *self.ys.last().unwrap();
        }
        let k = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(k) => return self.ys[k],
            Err(k) => k - 1,
        };
        let t = (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]);
        self.ys[k] + t * (self.ys[k + 1] - self.ys[k])
    }

    pub fn shifted(&self, a: f64) -> PwLinear {
        PwLinear { xs: self.xs.clone(), ys: self.ys.iter().map(|y| y + a).collect() }
    }

    /// max(·, 0); inserts exact roots where segments cross zero.
    pub fn positive_part(&self) -> PwLinear {
        let mut xs = vec![self.xs[0]];
        let mut ys = vec![self.ys[0].max(0.0)];
        for k in 0..self.xs.len() - 1 {
            let (x0, y0) = (self.xs[k], self.ys[k]);
            let (x1, y1) = (self.xs[k + 1], self.ys[k + 1]);
            if (y0 < 0.0 && y1 > 0.0) || (y0 > 0.0 && y1 < 0.0) {
                let root = x0 + (x1 - x0) * (y0 / (y0 - y1));
                if root > x0 && root < x1 {
                    xs.push(root);
                    ys.push(0.0);
                }
            }
            xs.push(x1);
            ys.push(y1.max(0.0));
        }
        PwLinear { xs, ys }
    }

    /// Pointwise a·self + b·other on the merged breakpoint grid.
    pub fn combine(&self, a: f64, other: &PwLinear, b: f64) -> PwLinear {
        let mut xs: Vec<f64> = self.xs.iter().chain(&other.xs).copied().collect();
        xs.sort_by(|u, v| u.total_cmp(v));
        xs.dedup();
        let ys = xs.iter().map(|&x| a * self.eval(x) + b * other.eval(x)).collect();
        PwLinear { xs, ys }
    }

    /// Maximum of |f| over the domain; attained at a breakpoint.
    pub fn max_abs(&self) -> f64 {
        self.ys.iter().fold(0.0f64, |acc, &y| acc.max(y.abs()))
    }

    /// ∫ f·ρ over the domain for a piecewise-constant density ρ; exact since
    /// f is linear on each merged cell.
    pub fn integral_against(&self, density: &PwConst) -> f64 {
        let mut xs: Vec<f64> = self.xs.iter().chain(&density.edges).copied().collect();
        xs.sort_by(|u, v| u.total_cmp(v));
        xs.dedup();
        let mut total = 0.0;
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            total += density.eval(mid) * 0.5 * (self.eval(a) + self.eval(b)) * (b - a);
        }
        total
    }

    /// ∫ f²·ρ for piecewise-constant ρ. The integrand is piecewise quadratic,
    /// so Simpson's rule on each merged cell is exact.
    pub fn integral_squared_against(&self, density: &PwConst) -> f64 {
        let mut xs: Vec<f64> = self.xs.iter().chain(&density.edges).copied().collect();
        xs.sort_by(|u, v| u.total_cmp(v));
        xs.dedup();
        let mut total = 0.0;
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let fa = self.eval(a);
            let fm = self.eval(mid);
            let fb = self.eval(b);
            total += density.eval(mid) * (b - a) / 6.0 * (fa * fa + 4.0 * fm * fm + fb * fb);
        }
        total
    }
}

/// Piecewise-constant density: `vals[k]` on (edges[k], edges[k+1]].
#[derive(Debug, Clone)]
pub struct PwConst {
    pub edges: Vec<f64>,
    pub vals: Vec<f64>,
}

impl PwConst {
    pub fn eval(&self, x: f64) -> f64 {
        for k in 0..self.vals.len() {
            if x <= self.edges[k + 1] {
                return self.vals[k];
            }
        }
        *self.vals.last().unwrap()
    }
}

/// The counterexample family: cost c(x,0) = u(x), c(x,1) = 2 − u(x) on
/// [0,1] × {0,1} with ε = 1; Q = ½δ₀ + ½δ₁ fixed and P^η given by the density
/// 1+η on [0,¼], 1−η/3 on (¼,1]. The closed-form optimum is h^η(·,0) = 2−δ_η,
/// h^η(·,1) = 2+δ_η with δ_η = η/3.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Example62Instance {
    pub eta: f64,
    pub grid_n: usize,
    pub delta_eta: f64,
    /// Cell edges covering [0,1]; ¼ and ½ are always edges, so every cell
    /// lies inside one linear piece of u and one constant piece of p_η.
    pub edges: Vec<f64>,
    pub instance: Instance,
}

/// Builds the discretized instance: atoms at cell midpoints, each carrying the
/// exact mass of its cell under p_η.
pub fn example62(eta: f64, grid_n: usize) -> Result<Example62Instance> {
    if !(0.0..1.0).contains(&eta) {
        return Err(QotError::InvalidParameter(format!("eta must lie in [0, 1), got {eta}")));
    }
    if grid_n < 9 {
        return Err(QotError::InvalidParameter("grid_n must be at least 9".into()));
    }
    let n1 = (grid_n as f64 / 4.0).round() as usize;
    let n2 = n1;
    let n3 = grid_n - n1 - n2;
    let mut edges = Vec::with_capacity(grid_n + 1);
    for k in 0..n1 {
        edges.push(0.25 * (k as f64 / n1 as f64));
    }
    for k in 0..n2 {
        edges.push(0.25 + 0.25 * (k as f64 / n2 as f64));
    }
    for k in 0..n3 {
        edges.push(0.5 + 0.5 * (k as f64 / n3 as f64));
    }
    edges.push(1.0);

    let delta_eta = eta / 3.0;
    let mut points = Vec::with_capacity(grid_n);
    let mut weights = Vec::with_capacity(grid_n);
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        points.push(vec![0.5 * (a + b)]);
        let dens = if b <= 0.25 { 1.0 + eta } else { 1.0 - eta / 3.0 };
        weights.push((b - a) * dens);
    }
    let p = DiscreteMeasure::new(points, weights)?;
    let q = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5])?;
    let cost = CostSpec::example62(&p, &q)?;
    let instance = Instance::new(p, q, cost, 1.0)?;
    Ok(Example62Instance { eta, grid_n, delta_eta, edges, instance })
}

impl Example62Instance {
    /// h^η on fiber y ∈ {0, 1}: constant in x.
    pub fn h_fiber(&self, fiber: usize) -> f64 {
        match fiber {
            0 => 2.0 - self.delta_eta,
            _ => 2.0 + self.delta_eta,
        }
    }

    /// σ^η(·, y) as an exact piecewise-linear function on [0,1].
    pub fn sigma_fiber(&self, fiber: usize) -> PwLinear {
        let bps = [0.0, 0.25, 0.5, 1.0];
        let ys = bps
            .iter()
            .map(|&x| match fiber {
                0 => 2.0 - self.delta_eta - example62_u(x),
                _ => example62_u(x) + self.delta_eta,
            })
            .collect();
        PwLinear { xs: bps.to_vec(), ys }
    }

    /// The continuum density p_η.
    pub fn density(&self) -> PwConst {
        PwConst {
            edges: vec![0.0, 0.25, 1.0],
            vals: vec![1.0 + self.eta, 1.0 - self.eta / 3.0],
        }
    }

    /// Exact dual solution on the discrete grid: f ≡ 2, g = (−δ_η, +δ_η)
    /// under the gauge Σ_j q_j g_j = 0. The stored residual is the realized
    /// discrete violation (zero up to rounding, because midpoint masses
    /// integrate the linear pieces of u exactly).
    pub fn closed_form_potentials(&self) -> Potentials {
        let n = self.instance.n();
        let f = vec![2.0; n];
        let g = vec![-self.delta_eta, self.delta_eta];
        let residual = foc_residual_inf(
            &f,
            &g,
            &self.instance.p,
            &self.instance.q,
            &self.instance.cost.matrix,
            1.0,
        );
        Potentials {
            f,
            g,
            eps: 1.0,
            normalization: 0.0,
            foc_residual_inf: residual,
            converged: true,
        }
    }

    /// Exact coupling from the closed form, with zero support tolerance.
    pub fn closed_form_coupling(&self) -> Result<Coupling> {
        let pot = self.closed_form_potentials();
        let zeta: Vec<Vec<f64>> = (0..self.instance.n())
            .map(|i| {
                (0..2)
                    .map(|j| {
                        (pot.f[i] + pot.g[j] - self.instance.cost.matrix[i][j]).max(0.0)
                    })
                    .collect()
            })
            .collect();
        Coupling::from_zeta(zeta, &self.instance.p, &self.instance.q, 0.0)
    }

    /// Dual objective of the closed form by exact piecewise integration:
    /// Φ = ½Σ_y [ h(y) − ½∫σ₊(·,y)² dP^η ] with ε = 1.
    pub fn analytic_dual_objective(&self) -> f64 {
        let dens = self.density();
        let s0 = self.sigma_fiber(0).positive_part();
        let s1 = self.sigma_fiber(1).positive_part();
        0.5 * (self.h_fiber(0) + self.h_fiber(1))
            - 0.25 * (s0.integral_squared_against(&dens) + s1.integral_squared_against(&dens))
    }

    /// Analytic supports: Σ⁰ = ([0,1]×{0}) ∪ ([¼,1]×{1}) and
    /// Σ^η = [0,1]×{0,1} for η > 0.
    pub fn analytic_support(&self) -> Vec<(f64, f64, f64)> {
        // (interval start, interval end, fiber)
        if self.eta > 0.0 {
            vec![(0.0, 1.0, 0.0), (0.0, 1.0, 1.0)]
        } else {
            vec![(0.0, 1.0, 0.0), (0.25, 1.0, 1.0)]
        }
    }

    /// Hausdorff distance between the analytic supports of this instance and
    /// another η of the same family, from the interval description.
    pub fn analytic_support_hausdorff_to(&self, other: &Example62Instance) -> f64 {
        let a = self.analytic_support();
        let b = other.analytic_support();
        directed_fiber_hausdorff(&a, &b).max(directed_fiber_hausdorff(&b, &a))
    }
}

/// Directed Hausdorff distance between unions of horizontal segments
/// (start, end, fiber). The distance-to-set function along a segment is a
/// minimum of convex piecewise-linear-in-x functions, so its maximum is
/// attained at segment endpoints, at endpoints of the target segments, or at
/// midpoints of same-fiber coverage gaps; all are scanned.
fn directed_fiber_hausdorff(a: &[(f64, f64, f64)], b: &[(f64, f64, f64)]) -> f64 {
    let dist_to_b = |x: f64, fiber: f64| -> f64 {
        b.iter()
            .map(|&(s, e, fb)| {
                let dx = (s - x).max(0.0).max(x - e);
                let dy = fiber - fb;
                (dx * dx + dy * dy).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut sup = 0.0f64;
    for &(s, e, fiber) in a {
        let mut candidates = vec![s, e];
        for &(bs, be, _) in b {
            candidates.push(bs.clamp(s, e));
            candidates.push(be.clamp(s, e));
        }
        let mut same_fiber_ends: Vec<f64> = b
            .iter()
            .filter(|&&(_, _, fb)| fb == fiber)
            .flat_map(|&(bs, be, _)| [bs, be])
            .collect();
        same_fiber_ends.sort_by(|u, v| u.total_cmp(v));
        for w in same_fiber_ends.windows(2) {
            candidates.push((0.5 * (w[0] + w[1])).clamp(s, e));
        }
        for x in candidates {
            sup = sup.max(dist_to_b(x, fiber));
        }
    }
    sup
}

/// Max violation of the two first-order-condition families for the closed
/// form, by exact piecewise-linear integration against p_η. Analytically zero.
pub fn analytic_foc_residual(inst: &Example62Instance) -> f64 {
    analytic_foc_residual_shifted(inst, 0.0, 0.0)
}

/// Same, with the fiber potentials shifted by (dh0, dh1); used to confirm the
/// residual responds linearly on the active region.
pub fn analytic_foc_residual_shifted(inst: &Example62Instance, dh0: f64, dh1: f64) -> f64 {
    let s0 = inst.sigma_fiber(0).shifted(dh0).positive_part();
    let s1 = inst.sigma_fiber(1).shifted(dh1).positive_part();
    // First family: ∫ (h − c)₊ dQ = ½σ⁺(x,0) + ½σ⁺(x,1) = ε for all x.
    let line1 = s0.combine(0.5, &s1, 0.5);
    let line1_res = PwLinear {
        xs: line1.xs.clone(),
        ys: line1.ys.iter().map(|y| y - 1.0).collect(),
    }
    .max_abs();
    // Second family: ∫ σ⁺(·, y) dP^η = ε for y ∈ {0, 1}.
    let dens = inst.density();
    let r0 = (s0.integral_against(&dens) - 1.0).abs();
    let r1 = (s1.integral_against(&dens) - 1.0).abs();
    line1_res.max(r0).max(r1)
}

/// Instance with c ≡ 0 whose reference solution is h ≡ ε, ζ ≡ 1.
#[derive(Debug, Clone)]
pub struct ZeroCostFixture {
    pub instance: Instance,
    pub expected_potentials: Potentials,
}

pub fn zero_cost_instance(p: DiscreteMeasure, q: DiscreteMeasure, eps: f64) -> Result<ZeroCostFixture> {
    let cost = CostSpec::zero(&p, &q);
    let expected_potentials = Potentials {
        f: vec![eps; p.len()],
        g: vec![0.0; q.len()],
        eps,
        normalization: 0.0,
        foc_residual_inf: 0.0,
        converged: true,
    };
    let instance = Instance::new(p, q, cost, eps)?;
    Ok(ZeroCostFixture { instance, expected_potentials })
}

/// Quadratic-cost instance on a uniform midpoint grid over [0,1]^d with
/// deterministic pseudo-random weights, together with class parameters it
/// provably satisfies. The density tilt keeps cell densities in [0.6, 1.4]
/// against declared class bounds [0.5, 1.5].
#[derive(Debug, Clone)]
pub struct QuadraticFixture {
    pub instance: Instance,
    pub class: ClassParams,
    /// diam(Ω_P) of the discrete atom set, the D_P of the nondegeneracy slope.
    pub d_p: f64,
}

pub fn quadratic_convex_instance(
    p_side: usize,
    q_side: usize,
    dim: usize,
    eps: f64,
    seed: u64,
) -> Result<QuadraticFixture> {
    if p_side < 2 || q_side < 1 || dim == 0 || dim > 3 {
        return Err(QotError::InvalidParameter(
            "need p_side >= 2, q_side >= 1, 1 <= dim <= 3".into(),
        ));
    }
    let mut rng = SplitMix64::new(seed);
    let p = tilted_grid_measure(p_side, dim, &mut rng)?;
    let q = tilted_grid_measure(q_side, dim, &mut rng)?;
    let lipschitz = std::f64::consts::SQRT_2 * (dim as f64).sqrt();
    let cost = CostSpec::sq_euclidean(&p, &q, Some(lipschitz))?;
    let ball = min_ball_mass(&q, eps / (8.0 * lipschitz))?;
    let class = ClassParams {
        eps_lower: eps,
        diam_bound: (dim as f64).sqrt(),
        lipschitz,
        density_lower: 0.5,
        density_upper: 1.5,
        cone_const: 0.25,
        ball_mass_lower: (0.95 * ball).min(1.0),
        dim,
    };
    let d_p = p.diameter();
    let instance = Instance::new(p, q, cost, eps)?;
    Ok(QuadraticFixture { instance, class, d_p })
}

fn tilted_grid_measure(side: usize, dim: usize, rng: &mut SplitMix64) -> Result<DiscreteMeasure> {
    let n = side.pow(dim as u32);
    let cell = 1.0 / n as f64;
    let mut points = Vec::with_capacity(n);
    for flat in 0..n {
        let mut coords = Vec::with_capacity(dim);
        let mut rest = flat;
        for _ in 0..dim {
            let k = rest % side;
            rest /= side;
            coords.push((k as f64 + 0.5) / side as f64);
        }
        points.push(coords);
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let beta = 0.4;
    let weights: Vec<f64> = raw.iter().map(|&u| (1.0 + beta * (u - mean)) * cell).collect();
    DiscreteMeasure::new(points, weights)
}
