//! Per-tick distributed solvers: ratio consensus (constant costs) and the
//! augmented primal-dual flow (quadratic costs).

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::vec::Vec;
use nalgebra::DVector;

use super::DispatchError;
use crate::graph::{Graph, LaplacianMatrix};

/// Closed-form proportional-share allocation
/// `pᵢ* = p̲ᵢ + (P_ref − Σp̲)/(Σ(p̄−p̲)) · (p̄ᵢ − p̲ᵢ)`.
pub fn rc_closed_form(lower: &[f64], upper: &[f64], p_ref: f64) -> DVector<f64> {
    let sum_lower: f64 = lower.iter().sum();
    let span: f64 = lower.iter().zip(upper).map(|(&lo, &hi)| hi - lo).sum();
    let ratio = (p_ref - sum_lower) / span;
    DVector::from_iterator(
        lower.len(),
        lower.iter().zip(upper).map(|(&lo, &hi)| lo + ratio * (hi - lo)),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcResult {
    pub p: DVector<f64>,
    pub rounds: usize,
}

/// Ratio consensus: two averaging iterations whose per-node ratio
/// converges to the capacity-proportional share.
///
/// Mass conservation needs column-stochastic mixing, so the weights are
/// push-sum style, `1/(deg + 1)` including a self-loop: node `i` receives
/// `yⱼ/(degⱼ+1)` from each neighbor and keeps the same share of its own
/// value. The informed set splits `P_ref` evenly in `y`'s initialization.
pub fn ratio_consensus(
    graph: &Graph,
    lower: &[f64],
    upper: &[f64],
    p_ref: f64,
    informed: &[usize],
    tol: f64,
    max_rounds: usize,
) -> Result<RcResult, DispatchError> {
    let n = graph.n();
    assert!(!informed.is_empty(), "at least one informed node");
    let adjacency = graph.adjacency();
    let degree_plus: Vec<f64> = adjacency.iter().map(|a| a.len() as f64 + 1.0).collect();
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let share = if informed.contains(&i) { p_ref / informed.len() as f64 } else { 0.0 };
            share - lower[i]
        })
        .collect();
    let mut z: Vec<f64> = (0..n).map(|i| upper[i] - lower[i]).collect();
    let mut rounds = 0;
    loop {
        let mut y_next = alloc::vec![0.0; n];
        let mut z_next = alloc::vec![0.0; n];
        for i in 0..n {
            let mut acc_y = y[i] / degree_plus[i];
            let mut acc_z = z[i] / degree_plus[i];
            for &j in &adjacency[i] {
                acc_y += y[j] / degree_plus[j];
                acc_z += z[j] / degree_plus[j];
            }
            y_next[i] = acc_y;
            z_next[i] = acc_z;
        }
        y = y_next;
        z = z_next;
        rounds += 1;
        let ratios: Vec<f64> = (0..n).map(|i| y[i] / z[i]).collect();
        let spread = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread.abs() <= tol {
            let p = DVector::from_iterator(
                n,
                (0..n).map(|i| lower[i] + ratios[i] * (upper[i] - lower[i])),
            );
            return Ok(RcResult { p, rounds });
        }
        if rounds >= max_rounds {
            return Err(DispatchError::RcNonConvergence);
        }
    }
}

/// State of the augmented primal-dual flow.
#[derive(Debug, Clone, PartialEq)]
pub struct PdState {
    pub p: DVector<f64>,
    pub y: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl PdState {
    pub fn zeros(n: usize) -> Self {
        Self { p: DVector::zeros(n), y: DVector::zeros(n), lambda: DVector::zeros(n) }
    }
}

/// One Euler step of the augmented primal-dual dynamics for
/// `min Σ ½aᵢ(pᵢ−bᵢ)²` s.t. `Σp = P_ref` rewritten through
/// `h = p + Ly − (P_ref/n)𝟙`:
/// `ṗ = −(∇f(p) + λ + h)`, `ẏ = −L(λ + h)`, `λ̇ = h`,
/// followed by the box projection of `p`.
#[allow(clippy::too_many_arguments)]
pub fn primal_dual_step(
    state: &PdState,
    weights: &[f64],
    centers: &[f64],
    lower: &[f64],
    upper: &[f64],
    p_ref: f64,
    l: &LaplacianMatrix,
    h_step: f64,
) -> PdState {
    let n = state.p.len();
    let nf = n as f64;
    let constraint =
        &state.p + l.apply(&state.y) - DVector::from_element(n, p_ref / nf);
    let forced = &state.lambda + &constraint;
    let grad = DVector::from_iterator(n, (0..n).map(|i| weights[i] * (state.p[i] - centers[i])));
    let mut p = &state.p - (grad + &forced) * h_step;
    for i in 0..n {
        p[i] = p[i].clamp(lower[i], upper[i]);
    }
    let y = &state.y - l.apply(&forced) * h_step;
    let lambda = &state.lambda + constraint * h_step;
    PdState { p, y, lambda }
}

/// Euler step that keeps the flow stable: the stiffest mode comes from the
/// `L²` coupling of the auxiliary variable, plus the cost curvature and the
/// unit augmentation terms.
pub fn pd_stable_step(l: &LaplacianMatrix, weights: &[f64]) -> f64 {
    let lam = l.lambda_max();
    let w_max = weights.iter().copied().fold(0.0f64, f64::max);
    0.8 / (lam * lam + lam + w_max + 2.0)
}

/// Iterates [`primal_dual_step`] until the state settles (update per unit
/// step below `tol`) or `max_steps`.
#[allow(clippy::too_many_arguments)]
pub fn primal_dual_solve(
    state0: PdState,
    weights: &[f64],
    centers: &[f64],
    lower: &[f64],
    upper: &[f64],
    p_ref: f64,
    l: &LaplacianMatrix,
    h_step: f64,
    max_steps: usize,
    tol: f64,
) -> (PdState, usize) {
    let mut state = state0;
    for step in 1..=max_steps {
        let next =
            primal_dual_step(&state, weights, centers, lower, upper, p_ref, l, h_step);
        let update = crate::math::norm_inf(&(&next.p - &state.p))
            .max(crate::math::norm_inf(&(&next.y - &state.y)))
            .max(crate::math::norm_inf(&(&next.lambda - &state.lambda)));
        state = next;
        if update / h_step < tol {
            return (state, step);
        }
    }
    (state, max_steps)
}
