//! Nested stochastic optimization via distributed cubic-regularized Newton
//! updates.
//!
//! Outer iterate: every agent holds a scalar copy `xᵢ` that must agree
//! across the network. Per outer step, a batch of inner allocation problems
//! (one per sampled realization) is solved by the Laplacian-gradient flow
//! with a locally checkable stopping rule, the approximate solutions are
//! assembled into a regularized second-order submodel, and decentralized
//! gradient descent minimizes the submodel in the agreement subspace.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::graph::LaplacianMatrix;
use crate::math;
use crate::problems::{feasible_initializer_with_offsets, NestedProblem};

/// Positive-definite truncated inverse: eigenvalue magnitudes floored at
/// `m`, signs flipped, then inverted. Result is symmetric positive definite
/// with spectrum in `(0, 1/m]`.
pub fn pt_inverse(a: &DMatrix<f64>, m: f64) -> DMatrix<f64> {
    assert!(m > 0.0, "PT-inverse needs m > 0");
    let eig = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let mag = eig.eigenvalues[k].abs().max(m);
        let q = eig.eigenvectors.column(k);
        out += q * q.transpose() / mag;
    }
    out
}

/// Scalar PT-inverse `1 / max(|a|, m)`; the per-agent special case used by
/// the distributed dynamics where the Hessian is diagonal.
pub fn pt_inverse_scalar(a: f64, m: f64) -> f64 {
    1.0 / a.abs().max(m)
}

/// One inner flow step `p⁺ = p − η L ∇_p f(x, p)`; conserves `Σp` exactly
/// (up to rounding) because the update is in the range of `L`.
pub fn inner_flow_step(
    p: &DVector<f64>,
    x: &DVector<f64>,
    problem: &NestedProblem,
    l: &LaplacianMatrix,
    eta: f64,
) -> DVector<f64> {
    let grad = problem.inner_grad(x, p);
    p - l.apply(&grad) * eta
}

/// The distributed stopping rule: every agent's last update must satisfy
/// `|pᵢ⁺ − pᵢ| ≤ Δ η λ₂ ω / √n`. When this fires, the pre-update iterate is
/// within `Δ` of the exact inner optimum.
pub fn inner_stop_check(
    p: &DVector<f64>,
    p_next: &DVector<f64>,
    delta: f64,
    eta: f64,
    lambda2: f64,
    omega: f64,
    n: usize,
) -> bool {
    let threshold = delta * eta * lambda2 * omega / (n as f64).sqrt();
    p_next.iter().zip(p.iter()).all(|(&a, &b)| (a - b).abs() <= threshold)
}

/// Step-size bounds for the inner flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaBounds {
    /// Asymptotic-convergence bound `2/(θ λ_n)`.
    pub asymptotic: f64,
    /// Exponential-rate bound `2ωλ₂/(θ²λ_n²)`.
    pub rate: f64,
    /// The certified choice `ωλ₂/(θ²λ_n²)`.
    pub certified: f64,
    /// Per-step contraction `√(1 − ω²λ₂²/(θ²λ_n²))` at the certified step.
    pub contraction: f64,
}

pub fn eta_bounds(omega: f64, theta: f64, lambda2: f64, lambda_n: f64) -> EtaBounds {
    let asymptotic = 2.0 / (theta * lambda_n);
    let rate = 2.0 * omega * lambda2 / (theta * theta * lambda_n * lambda_n);
    let certified = 0.5 * rate;
    let ratio = omega * omega * lambda2 * lambda2 / (lambda_n * lambda_n * theta * theta);
    let contraction = (1.0 - ratio).max(0.0).sqrt();
    EtaBounds { asymptotic, rate, certified, contraction }
}

/// Round count `K ≥ log(Δ/‖p⁰−p*‖) / log(contraction)` guaranteeing
/// `‖p^K − p*‖ ≤ Δ`; one step suffices when the contraction is exact.
pub fn iteration_bound(delta: f64, initial_error: f64, contraction: f64) -> usize {
    if initial_error <= delta {
        return 0;
    }
    if contraction <= 0.0 {
        return 1;
    }
    let k = (delta / initial_error).ln() / contraction.ln();
    k.ceil() as usize
}

/// Step-size policy for the inner flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    /// `ωλ₂/(θ²λ_n²)` with the problem's global constants: certified
    /// exponential rate, very conservative when θ is large.
    Prop2Certified,
    /// `c · 2/(θ_inst λ_n)` with the instance's own curvature bound
    /// `θ_inst = maxᵢ α(xᵢ)`; convergent for `c < 1`, much faster.
    Prop1Fraction(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolverConfig {
    pub eta: EtaRule,
    /// Target accuracy Δ of the returned inner solution.
    pub delta: f64,
    pub max_rounds: usize,
}

impl Default for InnerSolverConfig {
    fn default() -> Self {
        Self { eta: EtaRule::Prop2Certified, delta: 0.1, max_rounds: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolve {
    pub p: DVector<f64>,
    pub rounds: usize,
    pub stopped: bool,
    pub eta: f64,
}

/// Runs the inner flow from the standard feasible start until the stopping
/// rule fires (or the round cap is hit).
pub fn inner_solve(
    problem: &NestedProblem,
    l: &LaplacianMatrix,
    x: &DVector<f64>,
    offsets: &[f64],
    config: &InnerSolverConfig,
) -> InnerSolve {
    let n = problem.n();
    let omega = problem.omega();
    let eta = match config.eta {
        EtaRule::Prop2Certified => {
            let theta = problem.theta();
            eta_bounds(omega, theta, l.lambda2(), l.lambda_max()).certified
        }
        EtaRule::Prop1Fraction(c) => {
            let theta_inst = (0..n)
                .map(|i| problem.costs[i].alpha.eval(x[i]))
                .fold(f64::NEG_INFINITY, f64::max);
            c * 2.0 / (theta_inst * l.lambda_max())
        }
        EtaRule::Fixed(v) => v,
    };
    let mut p = feasible_initializer_with_offsets(problem.p_ref, offsets);
    let mut rounds = 0;
    let mut stopped = false;
    while rounds < config.max_rounds {
        let next = inner_flow_step(&p, x, problem, l, eta);
        rounds += 1;
        if inner_stop_check(&p, &next, config.delta, eta, l.lambda2(), omega, n) {
            p = next;
            stopped = true;
            break;
        }
        p = next;
    }
    InnerSolve { p, rounds, stopped, eta }
}

/// Which regularized second-order model the outer update minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubmodelKind {
    /// `⟨g, δ⟩ + ½δᵀHδ + Σᵢ ρᵢ/6 |δᵢ|³` — the cubic-regularized model.
    Cubic { rho: f64 },
    /// `⟨g, δ⟩ + Σᵢ η_g/2 δᵢ²` — gradient baseline.
    Gradient { eta_g: f64 },
    /// `⟨g, δ⟩ + ½δᵀHδ + Σᵢ η_H/2 δᵢ²` — Newton baseline.
    Newton { eta_h: f64 },
}

/// Batch-averaged submodel anchored at `x^k` (scalar copies, so the
/// per-agent blocks are scalars).
#[derive(Debug, Clone, PartialEq)]
pub struct Submodel {
    pub anchor: DVector<f64>,
    pub gradient: DVector<f64>,
    pub hessian: DVector<f64>,
    pub kind: SubmodelKind,
    /// `F^S(x^k)`: the batch objective at the anchor.
    pub base_value: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiscrnError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("graph must be connected")]
    Disconnected,
}

/// Assembles `gᵏ`, `Hᵏ` from a batch of approximately solved realizations:
/// `gᵢ = mean_s ∇_{xᵢ} fᵢ(xᵢᵏ, p̃ᵢˢ)` and likewise for the diagonal Hessian.
pub fn build_submodel(
    anchor: &DVector<f64>,
    batch: &[DVector<f64>],
    problem: &NestedProblem,
    kind: SubmodelKind,
) -> Result<Submodel, DiscrnError> {
    if batch.is_empty() {
        return Err(DiscrnError::EmptyBatch);
    }
    let n = problem.n();
    let s = batch.len() as f64;
    let mut gradient = DVector::zeros(n);
    let mut hessian = DVector::zeros(n);
    let mut base_value = 0.0;
    for p in batch {
        for i in 0..n {
            gradient[i] += problem.costs[i].grad_x(anchor[i], p[i]);
            hessian[i] += problem.costs[i].hess_x(anchor[i], p[i]);
            base_value += problem.costs[i].eval(anchor[i], p[i]);
        }
    }
    gradient /= s;
    hessian /= s;
    base_value /= s;
    Ok(Submodel { anchor: anchor.clone(), gradient, hessian, kind, base_value })
}

impl Submodel {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let delta = x - &self.anchor;
        let mut v = self.base_value + self.gradient.dot(&delta);
        match self.kind {
            SubmodelKind::Cubic { rho } => {
                v += 0.5 * delta.component_mul(&self.hessian).dot(&delta);
                v += delta.iter().map(|&d| rho / 6.0 * d.abs().powi(3)).sum::<f64>();
            }
            SubmodelKind::Gradient { eta_g } => {
                v += 0.5 * eta_g * delta.norm_squared();
            }
            SubmodelKind::Newton { eta_h } => {
                v += 0.5 * delta.component_mul(&self.hessian).dot(&delta);
                v += 0.5 * eta_h * delta.norm_squared();
            }
        }
        v
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let delta = x - &self.anchor;
        let mut g = self.gradient.clone();
        match self.kind {
            SubmodelKind::Cubic { rho } => {
                g += delta.component_mul(&self.hessian);
                g += DVector::from_iterator(
                    delta.len(),
                    delta.iter().map(|&d| 0.5 * rho * d.abs() * d),
                );
            }
            SubmodelKind::Gradient { eta_g } => {
                g += &delta * eta_g;
            }
            SubmodelKind::Newton { eta_h } => {
                g += delta.component_mul(&self.hessian);
                g += &delta * eta_h;
            }
        }
        g
    }

    /// Curvature scale used for the automatic subsolver step size.
    fn curvature_scale(&self) -> f64 {
        let h_max = self.hessian.iter().fold(0.0f64, |acc, &h| acc.max(h.abs()));
        match self.kind {
            SubmodelKind::Cubic { rho } => h_max + rho,
            SubmodelKind::Gradient { eta_g } => eta_g,
            SubmodelKind::Newton { eta_h } => h_max + eta_h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgdConfig {
    pub rounds: usize,
    /// Initial step of the `α₀/t` schedule; `None` derives `1/L` from the
    /// submodel curvature.
    pub alpha0: Option<f64>,
    pub tol: f64,
}

impl Default for DgdConfig {
    fn default() -> Self {
        Self { rounds: 10_000, alpha0: None, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgdResult {
    pub x: DVector<f64>,
    pub rounds: usize,
    /// Submodel value at the start and end (monitoring the decrease side of
    /// the subsolver-output condition).
    pub value_start: f64,
    pub value_end: f64,
    /// Largest submodel value increase between consecutive recorded rounds.
    pub worst_increase: f64,
}

/// Decentralized gradient descent on the submodel:
/// `x^{t+1} = W x^t − α_t ∇m(x^t)` with `W = I − L/λ_n`, `α_t = α₀/t`.
pub fn dgd_subsolver(submodel: &Submodel, l: &LaplacianMatrix, config: &DgdConfig) -> DgdResult {
    let lambda_n = l.lambda_max();
    let alpha0 = config.alpha0.unwrap_or_else(|| 1.0 / submodel.curvature_scale().max(1e-12));
    let mut x = submodel.anchor.clone();
    let value_start = submodel.value(&x);
    let mut prev_value = value_start;
    let mut worst_increase = 0.0f64;
    let mut rounds = 0;
    for t in 1..=config.rounds {
        let mixed = &x - l.apply(&x) / lambda_n;
        let next = mixed - submodel.grad(&x) * (alpha0 / t as f64);
        let update = math::norm_inf(&(&next - &x));
        x = next;
        rounds = t;
        if t % 64 == 0 {
            let v = submodel.value(&x);
            worst_increase = worst_increase.max(v - prev_value);
            prev_value = v;
        }
        if update < config.tol {
            break;
        }
    }
    let value_end = submodel.value(&x);
    DgdResult { x, rounds, value_start, value_end, worst_increase }
}

/// Consensus residual `‖(I − 𝟙𝟙ᵀ/n) x‖`.
pub fn disagreement(x: &DVector<f64>) -> f64 {
    let mean = x.mean();
    (x - DVector::from_element(x.len(), mean)).norm()
}

/// The subsolver-output condition: consensus up to tolerance plus a strict
/// decrease margin `m(x⁺) − m(x) < −cε‖Δ‖ − c√(ρε)‖Δ‖²`.
pub fn subsolver_condition_check(
    x_k: &DVector<f64>,
    x_next: &DVector<f64>,
    submodel: &Submodel,
    c: f64,
    epsilon: f64,
    rho: f64,
    consensus_tol: f64,
) -> bool {
    let scale = 1.0 + x_next.norm();
    if disagreement(x_next) > consensus_tol * scale {
        return false;
    }
    let step = (x_next - x_k).norm();
    let lhs = submodel.value(x_next) - submodel.value(x_k);
    lhs < -c * epsilon * step - c * (rho * epsilon).sqrt() * step * step
}

/// Batch size sufficient for the concentration argument:
/// `S ≥ max(M₁/(c̄ε), σ₁²/(c̄²ε²), M₂/(c̄√(ρε)), σ₂²/(c̄²ρε)) · log((ε^1.5 ζ c̄)^{-1})`,
/// with the log factor floored at one.
#[allow(clippy::too_many_arguments)]
pub fn batch_size(
    m1: f64,
    sigma1: f64,
    m2: f64,
    sigma2: f64,
    c_bar: f64,
    epsilon: f64,
    rho: f64,
    zeta: f64,
) -> f64 {
    let lead = (m1 / (c_bar * epsilon))
        .max(sigma1 * sigma1 / (c_bar * c_bar * epsilon * epsilon))
        .max(m2 / (c_bar * (rho * epsilon).sqrt()))
        .max(sigma2 * sigma2 / (c_bar * c_bar * rho * epsilon));
    let log_factor = (1.0 / (epsilon.powf(1.5) * zeta * c_bar)).ln().max(1.0);
    lead * log_factor
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrnConfig {
    pub kind: SubmodelKind,
    /// Batch size S.
    pub batch: usize,
    pub inner: InnerSolverConfig,
    pub dgd: DgdConfig,
    pub outer_iters: usize,
    /// Realization count for the empirical objective estimate.
    pub empirical_realizations: usize,
    /// Subsolver-output condition constants.
    pub cond_c: f64,
    pub cond_epsilon: f64,
    pub cond_rho: f64,
    pub consensus_tol: f64,
    /// Consensual initial value of every agent's copy.
    pub x0: f64,
}

impl Default for DiscrnConfig {
    fn default() -> Self {
        Self {
            kind: SubmodelKind::Cubic { rho: 50.0 },
            batch: 20,
            inner: InnerSolverConfig::default(),
            dgd: DgdConfig::default(),
            outer_iters: 60,
            empirical_realizations: 500,
            cond_c: 1e-3,
            cond_epsilon: 1e-2,
            cond_rho: 50.0,
            consensus_tol: 1e-6,
            x0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub iter: usize,
    pub empirical_f: f64,
    pub disagreement: f64,
    pub accepted: bool,
    pub inner_rounds_total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrnRun {
    pub x: DVector<f64>,
    pub records: Vec<OuterRecord>,
}

/// Empirical objective: `f(x, p*)` averaged over fresh realizations with
/// the inner problem solved exactly (closed form).
pub fn empirical_objective(
    problem: &NestedProblem,
    x: &DVector<f64>,
    realizations: usize,
    rng: &mut crate::Rng,
) -> f64 {
    let mut acc = 0.0;
    for _ in 0..realizations {
        let offsets = problem.sample_offsets(rng);
        let p_star = problem.inner_optimum(x, &offsets);
        acc += problem.inner_cost(x, &p_star);
    }
    acc / realizations as f64
}

/// The full nested loop: realize a batch, solve each instance to Δ, build
/// the submodel, run the subsolver, repeat.
pub fn discrn_run(
    problem: &NestedProblem,
    config: &DiscrnConfig,
    seed: u64,
) -> Result<DiscrnRun, DiscrnError> {
    if !problem.graph.is_connected() {
        return Err(DiscrnError::Disconnected);
    }
    let splitter = crate::SeedSplitter::new(seed);
    let mut batch_rng = splitter.stream("discrn-batch");
    let mut eval_rng = splitter.stream("discrn-eval");
    let l = problem.graph.laplacian();
    let n = problem.n();
    let mut x = DVector::from_element(n, config.x0);
    let mut records = Vec::with_capacity(config.outer_iters);
    for iter in 0..config.outer_iters {
        let mut batch = Vec::with_capacity(config.batch);
        let mut inner_rounds_total = 0;
        for _ in 0..config.batch {
            let offsets = problem.sample_offsets(&mut batch_rng);
            let solve = inner_solve(problem, &l, &x, &offsets, &config.inner);
            inner_rounds_total += solve.rounds;
            batch.push(solve.p);
        }
        let submodel = build_submodel(&x, &batch, problem, config.kind)?;
        let result = dgd_subsolver(&submodel, &l, &config.dgd);
        let accepted = subsolver_condition_check(
            &x,
            &result.x,
            &submodel,
            config.cond_c,
            config.cond_epsilon,
            config.cond_rho,
            config.consensus_tol,
        );
        let empirical_f =
            empirical_objective(problem, &result.x, config.empirical_realizations, &mut eval_rng);
        records.push(OuterRecord {
            iter,
            empirical_f,
            disagreement: disagreement(&result.x),
            accepted,
            inner_rounds_total,
        });
        x = result.x;
    }
    Ok(DiscrnRun { x, records })
}

/// The two-driver example: chargers with preferred rates 1 and 2, net-zero
/// reference, and generation that is deterministic on sunny days.
pub fn ev_example(sunny: bool) -> NestedProblem {
    use crate::math::Poly;
    use crate::problems::{Dist, ShiftedQuadratic};
    let graph = crate::graph::Graph::new(2, &[(0, 1)]).unwrap();
    // f₁(x,p) = (2x + p − 1)², f₂(x,p) = (x + p − 2)²
    let f1 = ShiftedQuadratic::new(
        Poly::constant(2.0),
        Poly::new(alloc::vec![-2.0, 4.0]),
        Poly::new(alloc::vec![1.0, -4.0, 4.0]),
    )
    .unwrap();
    let f2 = ShiftedQuadratic::new(
        Poly::constant(2.0),
        Poly::new(alloc::vec![-4.0, 2.0]),
        Poly::new(alloc::vec![4.0, -4.0, 1.0]),
    )
    .unwrap();
    let dist = if sunny {
        Dist::PointMass { value: 1.5 }
    } else {
        Dist::Uniform { lo: 0.0, hi: 1.5 }
    };
    NestedProblem::new(alloc::vec![f1, f2], 0.0, alloc::vec![dist, dist], graph).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_connected_graph, Graph};
    use crate::math::Poly;
    use crate::problems::{Dist, ShiftedQuadratic};
    use rand::Rng as _;
    use rand::SeedableRng;

    #[test]
    fn pt_inverse_diagonal_example() {
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, -1.0, 0.05]));
        let inv = pt_inverse(&a, 0.1);
        let expect = [0.5, 1.0, 10.0];
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { expect[i] } else { 0.0 };
                assert!((inv[(i, j)] - want).abs() < 1e-12);
            }
        }
        assert!((pt_inverse_scalar(2.0, 0.1) - 0.5).abs() < 1e-15);
        assert!((pt_inverse_scalar(-1.0, 0.1) - 1.0).abs() < 1e-15);
        assert!((pt_inverse_scalar(0.05, 0.1) - 10.0).abs() < 1e-15);
    }

    #[test]
    fn pt_inverse_reduces_to_inverse_for_well_conditioned_spd() {
        let mut rng = crate::Rng::seed_from_u64(8);
        let b = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(5, 5) * 2.0; // ≻ 2I ≻ mI
        let inv = pt_inverse(&a, 0.5);
        let direct = a.try_inverse().unwrap();
        assert!((inv - direct).norm() < 1e-10);
    }

    #[test]
    fn pt_inverse_spectrum_is_positive_and_bounded() {
        let mut rng = crate::Rng::seed_from_u64(9);
        let b = DMatrix::from_fn(8, 8, |_, _| rng.gen_range(-2.0..2.0));
        let a = (&b + &b.transpose()) * 0.5;
        let m = 0.1;
        let inv = pt_inverse(&a, m);
        assert!((inv.clone() - inv.transpose()).norm() < 1e-12);
        let vals = math::symmetric_eigenvalues_sorted(&inv);
        assert!(vals[0] > 0.0);
        assert!(*vals.last().unwrap() <= 1.0 / m + 1e-12);
    }

    fn quadratic_nested(n: usize, m_edges: usize, seed: u64) -> NestedProblem {
        // constant α per agent: the inner problem is a plain quadratic
        let mut rng = crate::Rng::seed_from_u64(seed);
        let graph = random_connected_graph(n, m_edges, seed).unwrap();
        let costs: Vec<ShiftedQuadratic> = (0..n)
            .map(|_| {
                ShiftedQuadratic::new(
                    Poly::constant(rng.gen_range(1.0..4.0)),
                    Poly::constant(rng.gen_range(-2.0..2.0)),
                    Poly::constant(0.0),
                )
                .unwrap()
            })
            .collect();
        let dists = alloc::vec![Dist::Uniform { lo: 0.0, hi: 1.5 }; n];
        NestedProblem::new(costs, 10.0, dists, graph).unwrap()
    }

    #[test]
    fn uniform_gradients_are_a_fixed_point() {
        // identical costs and equal p: all marginals agree so L∇f = 0
        let graph = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let cost = ShiftedQuadratic::new(
            Poly::constant(2.0),
            Poly::constant(1.0),
            Poly::constant(0.0),
        )
        .unwrap();
        let problem = NestedProblem::new(
            alloc::vec![cost.clone(), cost.clone(), cost],
            6.0,
            alloc::vec![Dist::PointMass { value: 0.0 }; 3],
            graph,
        )
        .unwrap();
        let l = problem.graph.laplacian();
        let p = DVector::from_element(3, 2.0);
        let x = DVector::zeros(3);
        let next = inner_flow_step(&p, &x, &problem, &l, 0.1);
        assert!((next - p).norm() < 1e-14);
    }

    #[test]
    fn two_node_flow_reaches_kkt_optimum() {
        let problem = quadratic_nested(2, 1, 3);
        let l = problem.graph.laplacian();
        let x = DVector::zeros(2);
        let offsets = [1.0, 0.5];
        let mut p = feasible_initializer_with_offsets(problem.p_ref, &offsets);
        let sum0 = p.sum();
        for _ in 0..5000 {
            p = inner_flow_step(&p, &x, &problem, &l, 0.05);
            assert!((p.sum() - sum0).abs() <= 1e-12 * sum0.abs().max(1.0));
        }
        let p_star = problem.inner_optimum(&x, &offsets);
        assert!((p - p_star).norm() < 1e-9);
    }

    #[test]
    fn stop_check_boundary_cases() {
        let p = DVector::from_column_slice(&[1.0, 2.0]);
        assert!(inner_stop_check(&p, &p, 0.1, 0.1, 1.0, 1.0, 2));
        let mut moved = p.clone();
        moved[0] += 1.0;
        assert!(!inner_stop_check(&p, &moved, 0.1, 0.1, 1.0, 1.0, 2));
    }

    #[test]
    fn stop_check_implies_delta_accuracy() {
        let mut rng = crate::Rng::seed_from_u64(21);
        for trial in 0..50 {
            let n = rng.gen_range(2..8);
            let m = rng.gen_range(n - 1..=n * (n - 1) / 2);
            let problem = quadratic_nested(n, m, 100 + trial);
            let l = problem.graph.laplacian();
            let x = DVector::zeros(n);
            let offsets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.5)).collect();
            let delta = 0.05;
            let omega = problem.omega();
            let eta = eta_bounds(omega, problem.theta(), l.lambda2(), l.lambda_max()).certified;
            let mut p = feasible_initializer_with_offsets(problem.p_ref, &offsets);
            let p_star = problem.inner_optimum(&x, &offsets);
            let mut fired = false;
            for _ in 0..500_000 {
                let next = inner_flow_step(&p, &x, &problem, &l, eta);
                if inner_stop_check(&p, &next, delta, eta, l.lambda2(), omega, n) {
                    assert!(
                        (&p - &p_star).norm() <= delta,
                        "trial {trial}: accuracy guarantee broken"
                    );
                    fired = true;
                    break;
                }
                p = next;
            }
            assert!(fired, "trial {trial}: stop rule never fired");
        }
    }

    #[test]
    fn eta_bounds_on_k2_with_unit_constants() {
        let b = eta_bounds(1.0, 1.0, 2.0, 2.0);
        assert!((b.asymptotic - 1.0).abs() < 1e-15);
        assert!((b.rate - 1.0).abs() < 1e-15);
        assert!((b.certified - 0.5).abs() < 1e-15);
        assert!(b.contraction.abs() < 1e-15);
        assert_eq!(iteration_bound(0.1, 5.0, b.contraction), 1);
    }

    #[test]
    fn certified_rate_contracts_every_round() {
        let mut rng = crate::Rng::seed_from_u64(33);
        for trial in 0..20 {
            let n = rng.gen_range(2..7);
            let m = rng.gen_range(n - 1..=n * (n - 1) / 2);
            let problem = quadratic_nested(n, m, 500 + trial);
            let l = problem.graph.laplacian();
            let x = DVector::zeros(n);
            let offsets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.5)).collect();
            let bounds = eta_bounds(problem.omega(), problem.theta(), l.lambda2(), l.lambda_max());
            let p_star = problem.inner_optimum(&x, &offsets);
            let mut p = feasible_initializer_with_offsets(problem.p_ref, &offsets);
            let k_bound = iteration_bound(0.05, (&p - &p_star).norm(), bounds.contraction);
            for round in 0..600 {
                let next = inner_flow_step(&p, &x, &problem, &l, bounds.certified);
                let before = (&p - &p_star).norm();
                let after = (&next - &p_star).norm();
                assert!(
                    after <= bounds.contraction * before + 1e-12,
                    "trial {trial} round {round}: {after} > {} * {before}",
                    bounds.contraction
                );
                p = next;
                if round + 1 == k_bound {
                    assert!(
                        (&p - &p_star).norm() <= 0.05 + 1e-9,
                        "trial {trial}: K formula not an upper bound"
                    );
                }
            }
        }
    }

    #[test]
    fn submodel_evaluates_to_batch_objective_at_anchor() {
        let problem = quadratic_nested(4, 5, 9);
        let mut rng = crate::Rng::seed_from_u64(2);
        let anchor = DVector::from_element(4, 0.2);
        let batch: Vec<DVector<f64>> = (0..6)
            .map(|_| {
                let offsets = problem.sample_offsets(&mut rng);
                problem.inner_optimum(&anchor, &offsets)
            })
            .collect();
        let m =
            build_submodel(&anchor, &batch, &problem, SubmodelKind::Cubic { rho: 10.0 }).unwrap();
        assert!((m.value(&anchor) - m.base_value).abs() < 1e-12);
        assert_eq!(
            build_submodel(&anchor, &[], &problem, m.kind).unwrap_err(),
            DiscrnError::EmptyBatch
        );
    }

    #[test]
    fn submodel_gradients_match_finite_differences() {
        let problem = quadratic_nested(3, 3, 12);
        let mut rng = crate::Rng::seed_from_u64(4);
        let anchor = DVector::from_element(3, -0.1);
        let batch: Vec<DVector<f64>> = (0..4)
            .map(|_| {
                let offsets = problem.sample_offsets(&mut rng);
                problem.inner_optimum(&anchor, &offsets)
            })
            .collect();
        for kind in [
            SubmodelKind::Cubic { rho: 25.0 },
            SubmodelKind::Gradient { eta_g: 100.0 },
            SubmodelKind::Newton { eta_h: 50.0 },
        ] {
            let m = build_submodel(&anchor, &batch, &problem, kind).unwrap();
            let h = 1e-6;
            for _ in 0..50 {
                let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
                let g = m.grad(&x);
                for i in 0..3 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (m.value(&xp) - m.value(&xm)) / (2.0 * h);
                    assert!((g[i] - fd).abs() < 1e-5 * fd.abs().max(1.0), "{kind:?}");
                }
            }
        }
    }

    #[test]
    fn ev_example_gradient_estimate_within_interconnection_bound() {
        // deterministic realizations: the batch gradient must sit within
        // ψ_g·Δ of the analytic gradient at the exact inner optimum
        let problem = ev_example(true);
        let l = problem.graph.laplacian();
        let x = DVector::from_column_slice(&[0.3, 0.3]);
        let offsets = [1.5, 1.5];
        let delta = 0.05;
        let config =
            InnerSolverConfig { eta: EtaRule::Prop2Certified, delta, max_rounds: 500_000 };
        let solve = inner_solve(&problem, &l, &x, &offsets, &config);
        assert!(solve.stopped);
        let m = build_submodel(&x, &[solve.p], &problem, SubmodelKind::Cubic { rho: 1.0 }).unwrap();
        let p_star = problem.inner_optimum(&x, &offsets);
        let exact =
            DVector::from_iterator(2, (0..2).map(|i| problem.costs[i].grad_x(x[i], p_star[i])));
        // ∂²f/∂x∂p = (4, 2) so ψ_g = ‖(4,2)‖
        let psi_g = (16.0f64 + 4.0).sqrt();
        assert!((m.gradient - exact).norm() <= psi_g * delta);
    }

    #[test]
    fn sunny_day_outer_updates_stay_small() {
        let problem = ev_example(true);
        let config = DiscrnConfig {
            kind: SubmodelKind::Cubic { rho: 10.0 },
            batch: 1,
            inner: InnerSolverConfig {
                eta: EtaRule::Prop2Certified,
                delta: 0.02,
                max_rounds: 500_000,
            },
            dgd: DgdConfig { rounds: 4000, ..Default::default() },
            outer_iters: 5,
            empirical_realizations: 50,
            x0: 0.0,
            ..Default::default()
        };
        let run = discrn_run(&problem, &config, 7).unwrap();
        // x = 0 balances the sunny-day system; updates stay O(Δ)
        assert!(run.x.norm() <= 0.1, "x drifted: {:?}", run.x);
    }

    #[test]
    fn cubic_overestimates_frozen_batch_objective() {
        let problem = quadratic_nested(4, 6, 44);
        let mut rng = crate::Rng::seed_from_u64(10);
        let anchor = DVector::from_element(4, 0.4);
        let offsets_batch: Vec<Vec<f64>> =
            (0..5).map(|_| problem.sample_offsets(&mut rng)).collect();
        let batch: Vec<DVector<f64>> =
            offsets_batch.iter().map(|off| problem.inner_optimum(&anchor, off)).collect();
        // exact per-agent Hessian-Lipschitz constant of the frozen objective
        let mut rho = 0.0f64;
        for i in 0..4 {
            let a3 = problem.costs[i].alpha.derivative().derivative().derivative();
            let b3 = problem.costs[i].beta.derivative().derivative().derivative();
            for p in batch.iter().map(|b| b[i]) {
                for k in 0..=100 {
                    let x = -3.0 + 0.06 * k as f64;
                    rho = rho.max((0.5 * a3.eval(x) * p * p + b3.eval(x) * p).abs());
                }
            }
        }
        let m = build_submodel(&anchor, &batch, &problem, SubmodelKind::Cubic { rho: rho * 1.01 })
            .unwrap();
        // frozen-batch objective (p̃ fixed) must be over-estimated by m
        for _ in 0..200 {
            let shift: f64 = rng.gen_range(-1.5..1.5);
            let x = DVector::from_element(4, anchor[0] + shift);
            let frozen: f64 =
                batch.iter().map(|p| problem.inner_cost(&x, p)).sum::<f64>() / batch.len() as f64;
            assert!(m.value(&x) >= frozen - 1e-9, "shift {shift}");
        }
    }

    #[test]
    fn dgd_fixed_point_and_consensus_preservation() {
        let problem = quadratic_nested(5, 8, 77);
        let l = problem.graph.laplacian();
        let anchor = DVector::from_element(5, 0.0);
        let m = Submodel {
            anchor: anchor.clone(),
            gradient: DVector::zeros(5),
            hessian: DVector::from_element(5, 1.0),
            kind: SubmodelKind::Cubic { rho: 1.0 },
            base_value: 0.0,
        };
        let out = dgd_subsolver(&m, &l, &DgdConfig { rounds: 100, ..Default::default() });
        assert!((out.x - anchor).norm() < 1e-14);
        // W fixes the agreement subspace
        let v = DVector::from_element(5, 3.7);
        let mixed = &v - l.apply(&v) / l.lambda_max();
        assert!((mixed - v).norm() < 1e-12);
    }

    #[test]
    fn condition_check_rejects_no_move_and_accepts_strict_decrease() {
        let problem = quadratic_nested(3, 3, 13);
        let mut rng = crate::Rng::seed_from_u64(6);
        let anchor = DVector::from_element(3, 0.5);
        let batch: Vec<DVector<f64>> = (0..3)
            .map(|_| {
                let offsets = problem.sample_offsets(&mut rng);
                problem.inner_optimum(&anchor, &offsets)
            })
            .collect();
        let m =
            build_submodel(&anchor, &batch, &problem, SubmodelKind::Cubic { rho: 20.0 }).unwrap();
        assert!(!subsolver_condition_check(&anchor, &anchor, &m, 1e-3, 1e-2, 20.0, 1e-6));
        let l = problem.graph.laplacian();
        let out = dgd_subsolver(&m, &l, &DgdConfig::default());
        if m.value(&out.x) < m.value(&anchor) {
            assert!(subsolver_condition_check(&anchor, &out.x, &m, 1e-9, 1e-2, 20.0, 1e-4));
        }
    }

    #[test]
    fn scalar_cubic_submodel_matches_grid_search() {
        // consensual scalar displacement: minimize m(x_k + c·𝟙) over c
        let problem = quadratic_nested(4, 6, 19);
        let mut rng = crate::Rng::seed_from_u64(15);
        let anchor = DVector::from_element(4, 0.1);
        let batch: Vec<DVector<f64>> = (0..8)
            .map(|_| {
                let offsets = problem.sample_offsets(&mut rng);
                problem.inner_optimum(&anchor, &offsets)
            })
            .collect();
        let m =
            build_submodel(&anchor, &batch, &problem, SubmodelKind::Cubic { rho: 30.0 }).unwrap();
        let l = problem.graph.laplacian();
        let out = dgd_subsolver(&m, &l, &DgdConfig { rounds: 40_000, ..Default::default() });
        let mut best_v = f64::INFINITY;
        for k in 0..=40_000 {
            let c = -2.0 + 4.0 * k as f64 / 40_000.0;
            let v = m.value(&DVector::from_element(4, anchor[0] + c));
            if v < best_v {
                best_v = v;
            }
        }
        let reached = m.value(&out.x);
        assert!(disagreement(&out.x) < 1e-3);
        assert!(
            reached <= best_v + 1e-3 * best_v.abs().max(1.0),
            "dgd {reached} vs grid {best_v}"
        );
    }

    #[test]
    fn batch_size_monotone_in_cbar_and_epsilon() {
        let base = batch_size(1.0, 1.0, 1.0, 1.0, 0.1, 0.01, 50.0, 0.05);
        assert!(batch_size(1.0, 1.0, 1.0, 1.0, 0.2, 0.01, 50.0, 0.05) <= base);
        assert!(batch_size(1.0, 1.0, 1.0, 1.0, 0.1, 0.02, 50.0, 0.05) <= base);
    }
}
