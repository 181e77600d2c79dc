//! Saddle-point variant on the distributed constraint `x + Lz = d̄` with
//! `𝟙ᵀd̄ = d`. Both `x` and `z` are decision variables, so a feasible
//! anchor is unnecessary and perturbations self-correct: the constraint
//! violation is damped by the augmented term.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::vec::Vec;
use nalgebra::DVector;

use super::{qapprox, DanaError};
use crate::graph::LaplacianMatrix;
use crate::math;
use crate::problems::AllocationProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct RobustState {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    /// Multiplier of the `x + Lz = d̄` constraint.
    pub nu: DVector<f64>,
}

impl RobustState {
    pub fn zeros(n: usize) -> Self {
        Self { x: DVector::zeros(n), z: DVector::zeros(n), nu: DVector::zeros(n) }
    }

    pub fn violation(&self, l: &LaplacianMatrix, d_bar: &DVector<f64>) -> f64 {
        (&self.x + l.apply(&self.z) - d_bar).norm()
    }
}

/// One Euler step of the augmented saddle-point dynamics
/// `ẋ = −(∇f(x) + ν + ρ_aug c)`, `ż = −A_q L (ν + ρ_aug c)`,
/// `ν̇ = c` with `c = x + Lz − d̄`.
pub fn robust_dana_step(
    state: &RobustState,
    problem: &AllocationProblem,
    l_star: &LaplacianMatrix,
    d_bar: &DVector<f64>,
    q: usize,
    h: f64,
    rho_aug: f64,
) -> RobustState {
    let c = &state.x + l_star.apply(&state.z) - d_bar;
    let forced = &state.nu + &c * rho_aug;
    let grad = problem.gradient(&state.x);
    let hess = problem.hessian_diag(&state.x);
    let x = &state.x - (grad + &forced) * h;
    let z = &state.z - qapprox::q_approx_apply(l_star, &hess, &l_star.apply(&forced), q) * h;
    let nu = &state.nu + c * h;
    RobustState { x, z, nu }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustRun {
    pub state: RobustState,
    pub iters: usize,
    pub converged: bool,
    /// (iteration, ‖x + Lz − d̄‖) samples.
    pub violation_trace: Vec<(usize, f64)>,
    pub f_trace: Vec<f64>,
}

/// Runs the robust dynamics with optional state perturbations: at every
/// iteration listed in `perturb_at`, Gaussian noise of the given magnitude
/// is injected into `x`.
#[allow(clippy::too_many_arguments)]
pub fn robust_dana_run(
    problem: &AllocationProblem,
    l_star: &LaplacianMatrix,
    d_bar: &DVector<f64>,
    state0: RobustState,
    q: usize,
    h: f64,
    rho_aug: f64,
    max_iters: usize,
    tol: f64,
    perturb_at: &[(usize, f64)],
    rng: &mut crate::Rng,
) -> Result<RobustRun, DanaError> {
    let n = problem.n();
    if n < 2 {
        return Err(DanaError::ProblemTooSmall(n));
    }
    let mut state = state0;
    let mut violation_trace = Vec::new();
    let mut f_trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for iter in 0..max_iters {
        if let Some(&(_, magnitude)) = perturb_at.iter().find(|&&(when, _)| when == iter) {
            for v in state.x.iter_mut() {
                *v += magnitude * math::sample_normal(rng);
            }
        }
        let next = robust_dana_step(&state, problem, l_star, d_bar, q, h, rho_aug);
        let update = math::norm_inf(&(&next.x - &state.x))
            .max(math::norm_inf(&(&next.z - &state.z)))
            .max(math::norm_inf(&(&next.nu - &state.nu)));
        state = next;
        iters = iter + 1;
        violation_trace.push((iter, state.violation(l_star, d_bar)));
        f_trace.push(problem.total_cost(&state.x));
        if update < tol {
            converged = true;
            break;
        }
    }
    Ok(RobustRun { state, iters, converged, violation_trace, f_trace })
}
