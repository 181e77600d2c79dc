//! Euler-discretized primal-dual flow for the box-constrained problem:
//! `ż = −A_q ∇_z ℒ(z, λ)`, `λ̇ = [∇_λ ℒ]⁺_λ` with
//! `ℒ(z, λ) = g(z) + λᵀ P(z)` and `P(z) = [x̲ − x⁰ − Lz; x⁰ + Lz − x̄]`.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::{qapprox, DanaConfig, DanaError, PrimalDualState};
use crate::boxqp;
use crate::graph::LaplacianMatrix;
use crate::math;
use crate::problems::AllocationProblem;

/// One Euler step. The dual update is applied first on the unprojected
/// field and then clamped at zero, which coincides with the `[·]⁺_λ`
/// projection in the vanishing-step limit.
pub fn dana_c_step(
    state: &PrimalDualState,
    problem: &AllocationProblem,
    x0: &DVector<f64>,
    l_star: &LaplacianMatrix,
    config: &DanaConfig,
) -> Result<PrimalDualState, DanaError> {
    let (lower, upper) = bounds_of(problem)?;
    let x = state.x(x0, l_star);
    let grad = problem.gradient(&x);
    // ∇_z ℒ = L∇f(x) + L(λ_upper − λ_lower)
    let lam_diff = &state.lambda_upper - &state.lambda_lower;
    let grad_z = l_star.apply(&(grad + lam_diff));
    let h = problem.hessian_diag(&x);
    let z_dot = -qapprox::q_approx_apply(l_star, &h, &grad_z, config.q);

    let p_lower = DVector::from_iterator(x.len(), lower.iter().zip(x.iter()).map(|(&lo, &xi)| lo - xi));
    let p_upper = DVector::from_iterator(x.len(), upper.iter().zip(x.iter()).map(|(&hi, &xi)| xi - hi));

    let z = &state.z + z_dot * config.h;
    let lambda_lower = (&state.lambda_lower + p_lower * config.h).map(|v| v.max(0.0));
    let lambda_upper = (&state.lambda_upper + p_upper * config.h).map(|v| v.max(0.0));
    Ok(PrimalDualState { z, lambda_lower, lambda_upper })
}

fn bounds_of(problem: &AllocationProblem) -> Result<(&[f64], &[f64]), DanaError> {
    match (&problem.lower, &problem.upper) {
        (Some(lo), Some(hi)) => Ok((lo, hi)),
        _ => Err(DanaError::MissingBounds),
    }
}

/// Reference optimum and Lyapunov weighting for trajectory diagnostics.
pub struct VqReference {
    pub z_star: DVector<f64>,
    pub lambda_lower_star: DVector<f64>,
    pub lambda_upper_star: DVector<f64>,
    pub x_star: DVector<f64>,
    aq_inv: DMatrix<f64>,
}

impl VqReference {
    /// `V_Q = ½‖A_q^{−1/2}(z − z*)‖² + ½‖λ − λ*‖²`.
    pub fn value(&self, state: &PrimalDualState) -> f64 {
        let dz = &state.z - &self.z_star;
        let quad = (&self.aq_inv * &dz).dot(&dz);
        let dl = (&state.lambda_lower - &self.lambda_lower_star).norm_squared()
            + (&state.lambda_upper - &self.lambda_upper_star).norm_squared();
        0.5 * (quad + dl)
    }
}

/// Builds the Lyapunov reference from the exact box-QP optimum (quadratic
/// costs). `omega` is `𝟙ᵀz(0)`, which pins the unique `z*` on the
/// trajectory's hyperplane.
pub fn vq_reference(
    problem: &AllocationProblem,
    x0: &DVector<f64>,
    l_star: &LaplacianMatrix,
    q: usize,
    omega: f64,
) -> Result<VqReference, DanaError> {
    let (lower, upper) = bounds_of(problem)?;
    let n = problem.n();
    let (a, b): (Vec<f64>, Vec<f64>) = problem
        .costs
        .iter()
        .map(|c| match c {
            crate::problems::CostFunction::Quadratic { a, b } => (*a, *b),
            other => (other.hess(0.0), other.grad(0.0)),
        })
        .unzip();
    let sol = boxqp::solve_box_qp(&a, &b, problem.demand, lower, upper)
        .map_err(|e| DanaError::Problem(alloc::format!("{e}")))?;
    let diff = &sol.x - x0;
    let z_star = l_star.pinv_apply(&diff, 1e-9) + DVector::from_element(n, omega / n as f64);
    let h = problem.hessian_diag(&sol.x);
    let aq = qapprox::q_approx_matrix(l_star, &h, q);
    let aq_inv = aq.clone().try_inverse().ok_or(DanaError::Problem("A_q singular".into()))?;
    Ok(VqReference {
        z_star,
        lambda_lower_star: sol.mult_lower,
        lambda_upper_star: sol.mult_upper,
        x_star: sol.x,
        aq_inv,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRecord {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub feas_residual: f64,
    /// `‖max(P(z), 0)‖_∞`: how far outside the boxes the iterate sits.
    pub box_violation: f64,
    pub vq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRun {
    pub state: PrimalDualState,
    pub x: DVector<f64>,
    pub iters: usize,
    pub converged: bool,
    pub trajectory: Vec<ContinuousRecord>,
}

/// Integrates the flow from `state0`, recording every `record_every`-th
/// sample. Lyapunov values are attached when `vq` is provided.
pub fn dana_c_run(
    problem: &AllocationProblem,
    x0: &DVector<f64>,
    l_star: &LaplacianMatrix,
    state0: PrimalDualState,
    config: &DanaConfig,
    vq: Option<&VqReference>,
    record_every: usize,
) -> Result<ContinuousRun, DanaError> {
    let (lower, upper) = bounds_of(problem)?;
    let (lower, upper) = (lower.to_vec(), upper.to_vec());
    let mut state = state0;
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    let every = record_every.max(1);
    for iter in 0..config.max_iters {
        let next = dana_c_step(&state, problem, x0, l_star, config)?;
        let update = math::norm_inf(&(&next.z - &state.z))
            .max(math::norm_inf(&(&next.lambda_lower - &state.lambda_lower)))
            .max(math::norm_inf(&(&next.lambda_upper - &state.lambda_upper)));
        state = next;
        iters = iter + 1;
        if iter % every == 0 || update < config.tol {
            let x = state.x(x0, l_star);
            let grad = problem.gradient(&x);
            let lam_diff = &state.lambda_upper - &state.lambda_lower;
            let box_violation = x
                .iter()
                .enumerate()
                .map(|(i, &xi)| (lower[i] - xi).max(xi - upper[i]).max(0.0))
                .fold(0.0f64, f64::max);
            trajectory.push(ContinuousRecord {
                iter,
                f: problem.total_cost(&x),
                grad_norm: l_star.apply(&(grad + lam_diff)).norm(),
                feas_residual: (x.sum() - problem.demand).abs(),
                box_violation,
                vq: vq.map(|r| r.value(&state)),
            });
        }
        if update < config.tol {
            converged = true;
            break;
        }
    }
    let x = state.x(x0, l_star);
    Ok(ContinuousRun { state, x, iters, converged, trajectory })
}
