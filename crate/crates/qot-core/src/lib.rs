//! Quadratically regularized optimal transport (QOT) on discrete marginals.
//!
//! QOT penalizes the coupling density by its squared L²(P⊗Q) norm, which
//! makes the optimal plan sparse. The dual solution h = f ⊕ g determines all
//! primal objects: density ζ = (h − c)₊/ε, coupling π = ζ·(P⊗Q), and support
//! Σ = {ζ > 0}. This crate
//!
//! - solves the dual exactly by alternating coordinate maximization (each
//!   coordinate condition is a piecewise-linear root problem, solved by
//!   sorting breakpoints rather than by line search),
//! - extracts densities, couplings, and supports, with an independent
//!   projected-gradient oracle for cross-checks on small instances,
//! - evaluates the explicit constants of the stability theory (γ_ε, ϑ_δ,
//!   q̂_ε, κ̂_ε, η̂_ε and their class-uniform versions), and
//! - verifies the stability inequalities — L², L∞, primal density/TV/W₁, and
//!   Hausdorff support bounds — on perturbed instance pairs, including the
//!   closed-form family where support stability fails.

// Guards of the form `!(x > 0.0)` are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Matrix kernels index rows and columns symmetrically.
#![allow(clippy::needless_range_loop)]

pub mod constants;
pub mod cost;
pub mod coupling;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod instance;
pub mod measures;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod solver;
pub mod transport;

pub use error::{QotError, Result};

pub use cost::{CostKind, CostSpec};
pub use coupling::Coupling;
pub use instance::Instance;
pub use measures::{ClassParams, DiscreteMeasure};
pub use solver::{DualSolve, Potentials, SolveOptions};
