//! Distributed approximate Newton algorithms.
//!
//! The reduced Hessian of the resource-constrained problem is
//! `M(x) = J Tᵀ L H(x) L T Jᵀ`; its inverse is approximated by the truncated
//! Neumann series `A_q = Σ_{p=0}^q (I − LHL)^p`, which a network can apply
//! with `q` rounds of two-hop exchanges. Three dynamics use it:
//!
//! - [`dana_d_step`]/[`dana_d_run`]: discrete descent `z⁺ = z − α A_q ∇g(z)`
//!   for the equality-constrained relaxation,
//! - [`dana_c_step`]/[`dana_c_run`]: Euler-discretized primal-dual flow for
//!   the box-constrained problem (quadratic costs),
//! - [`robust_dana_step`]/[`robust_dana_run`]: a saddle-point variant on the
//!   distributed constraint `x + Lz = d̄` that tolerates infeasible starts
//!   and state perturbations.

mod continuous;
mod discrete;
mod qapprox;
mod robust;

pub use continuous::{dana_c_run, dana_c_step, vq_reference, ContinuousRecord, ContinuousRun, VqReference};
pub use discrete::{dana_d_run, dana_d_step, DiscreteRecord, DiscreteRun};
pub use qapprox::{q_approx_apply, q_approx_matrix};
pub use robust::{robust_dana_run, robust_dana_step, RobustRun, RobustState};

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::string::String;
use nalgebra::DVector;

use crate::graph::{LaplacianMatrix, ProjectionMatrix};
use crate::problems::AllocationProblem;
use crate::weight_design::{epsilon_metric, post_scale_beta};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DanaError {
    #[error("problem too small: DANA needs n >= 2 (got n = {0})")]
    ProblemTooSmall(usize),
    #[error("graph must be connected")]
    Disconnected,
    #[error("{0}")]
    Problem(String),
    #[error("box bounds are required for the continuous dynamics")]
    MissingBounds,
}

/// Step-size policy for the discrete dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    /// The convergence-theorem value `(1−ε)/((n−1)(1+ε)(1−ε^{q+1}))`
    /// (half the strict stability bound). Provably convergent, very
    /// conservative.
    TheoremBound,
    /// `1/(1+ε^{q+1})`: the step that centers the iteration spectrum for
    /// quadratic-like costs. Fast in practice, not covered by the theorem.
    Practical,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DanaConfig {
    /// Series order of the Hessian-inverse approximation.
    pub q: usize,
    pub alpha: AlphaRule,
    /// Euler step for the continuous dynamics.
    pub h: f64,
    pub max_iters: usize,
    /// Stop when `‖z⁺ − z‖_∞` (and for the flows, the dual update) drops
    /// below this.
    pub tol: f64,
}

impl Default for DanaConfig {
    fn default() -> Self {
        Self { q: 2, alpha: AlphaRule::Practical, h: 1e-3, max_iters: 200_000, tol: 1e-10 }
    }
}

impl DanaConfig {
    /// Communication rounds one step costs: the gradient/Hessian exchange,
    /// two one-hop rounds per series term, and the final step exchange.
    pub fn rounds_per_step(&self) -> usize {
        2 * self.q + 2
    }

    pub fn resolve_alpha(&self, n: usize, eps: f64) -> f64 {
        match self.alpha {
            AlphaRule::TheoremBound => theorem_alpha(n, eps, self.q),
            AlphaRule::Practical => 1.0 / (1.0 + eps.powi(self.q as i32 + 1)),
            AlphaRule::Fixed(a) => a,
        }
    }
}

/// Strict upper bound on convergent step sizes,
/// `α_max = 2(1−ε)/((n−1)(1+ε)(1−ε^{q+1}))`.
pub fn step_size_bound(n: usize, eps: f64, q: usize) -> f64 {
    assert!((0.0..1.0).contains(&eps), "requires ε ∈ [0, 1)");
    assert!(n >= 2);
    2.0 * (1.0 - eps) / ((n as f64 - 1.0) * (1.0 + eps) * (1.0 - eps.powi(q as i32 + 1)))
}

/// The linear-convergence theorem's step size (half of [`step_size_bound`]).
pub fn theorem_alpha(n: usize, eps: f64, q: usize) -> f64 {
    0.5 * step_size_bound(n, eps, q)
}

/// Guaranteed per-step decrease at `α = theorem_alpha`:
/// `g(z⁺) − g(z) ≤ −(1−ε)⁴(1+ε(−ε)^q)² ‖z−z*‖² / (2(n−1)²(1+ε)³(1−ε^{2(q+1)}))`.
pub fn linear_rate_decrease_bound(n: usize, eps: f64, q: usize, dist_sq: f64) -> f64 {
    let num = (1.0 - eps).powi(4) * (1.0 + eps * (-eps).powi(q as i32)).powi(2) * dist_sq;
    let den = 2.0 * (n as f64 - 1.0).powi(2) * (1.0 + eps).powi(3)
        * (1.0 - eps.powi(2 * (q as i32 + 1)));
    -num / den
}

/// Checks the linear-convergence theorem's per-step inequality on an
/// observed transition. `g_now`/`g_next` are objective values before and
/// after one step at the theorem's α.
pub fn linear_rate_certificate(
    g_now: f64,
    g_next: f64,
    n: usize,
    eps: f64,
    q: usize,
    z: &DVector<f64>,
    z_star: &DVector<f64>,
) -> bool {
    let dist_sq = (z - z_star).norm_squared();
    let bound = linear_rate_decrease_bound(n, eps, q, dist_sq);
    g_next - g_now <= bound + 1e-12 * g_now.abs().max(1.0)
}

/// Post-scaled Laplacian plus its ε for a problem with analytic Hessian
/// bounds; the standard preparation before running any DANA variant.
pub fn prepare_scaled(problem: &AllocationProblem) -> Result<(LaplacianMatrix, f64), DanaError> {
    let n = problem.n();
    if n < 2 {
        return Err(DanaError::ProblemTooSmall(n));
    }
    if !problem.graph.is_connected() {
        return Err(DanaError::Disconnected);
    }
    let bounds = problem
        .hessian_bounds()
        .map_err(|e| DanaError::Problem(alloc::format!("{e}")))?;
    let t = ProjectionMatrix::new(n);
    let (_, l_star) = post_scale_beta(&problem.graph.laplacian(), &bounds, &t)
        .map_err(|e| DanaError::Problem(alloc::format!("{e}")))?;
    let report = epsilon_metric(&l_star, &bounds, &t);
    Ok((l_star, report.epsilon.max(0.0)))
}

/// Primal-dual state of the box-constrained flow: `z ∈ ℝⁿ`, multipliers
/// `λ = (λ_lower, λ_upper) ⪰ 0`, and `x = x⁰ + Lz` derived.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualState {
    pub z: DVector<f64>,
    pub lambda_lower: DVector<f64>,
    pub lambda_upper: DVector<f64>,
}

impl PrimalDualState {
    pub fn new(z: DVector<f64>, lambda_lower: DVector<f64>, lambda_upper: DVector<f64>) -> Self {
        assert!(lambda_lower.iter().all(|&v| v >= 0.0), "λ(0) must be ⪰ 0");
        assert!(lambda_upper.iter().all(|&v| v >= 0.0), "λ(0) must be ⪰ 0");
        Self { z, lambda_lower, lambda_upper }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(DVector::zeros(n), DVector::zeros(n), DVector::zeros(n))
    }

    pub fn x(&self, x0: &DVector<f64>, l: &LaplacianMatrix) -> DVector<f64> {
        x0 + l.apply(&self.z)
    }
}
