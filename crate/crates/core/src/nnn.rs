//! Binary on/off resource allocation via Hopfield-style Newton dynamics.
//!
//! The relaxation runs in the open hypercube `x ∈ (0,1)ⁿ` on an energy that
//! adds a logistic-integral barrier to the penalized allocation cost. The
//! centralized dynamics (`binpac`) weight the descent by a PT-inverse of
//! the full energy Hessian; the distributed variant (`binpad`) introduces
//! an auxiliary variable `y` that splits the quadratic penalty so the
//! Hessian becomes diagonal and every update needs at most two-hop
//! neighbor data. Deterministic annealing shrinks `T/τ` to push the
//! interior equilibria onto binary corners.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::discrn::{pt_inverse, pt_inverse_scalar};
use crate::graph::Graph;
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnnError {
    #[error("bad parameter: {0}")]
    BadParameter(alloc::string::String),
    #[error("problem size {0} exceeds the brute-force guard (24)")]
    TooLargeForBruteForce(usize),
    #[error("a communication graph is required for the distributed dynamics")]
    MissingGraph,
    #[error("quality metric needs at least two methods and one trial")]
    DegenerateComparison,
}

/// Binary allocation problem
/// `min_{x ∈ {0,1}ⁿ} Σᵢ fᵢ(xᵢ) + γ/2 (pᵀx − P_r)²` with quadratic
/// relaxation costs `fᵢ(x) = aᵢ/2 (x−bᵢ)² − aᵢbᵢ²/2 + dᵢ`, so that
/// `fᵢ(0) = dᵢ` and `fᵢ(1) = cᵢ + dᵢ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinaryProblem {
    pub c: Vec<f64>,
    pub p: Vec<f64>,
    pub p_r: f64,
    pub gamma: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    /// Needed by the distributed dynamics only.
    pub graph: Option<Graph>,
}

impl BinaryProblem {
    /// Builds the quadratic shapes from incremental costs: `bᵢ = ½ − cᵢ/aᵢ`
    /// enforces `aᵢ/2 (1−bᵢ)² − aᵢ/2 bᵢ² = cᵢ`.
    pub fn new(
        c: Vec<f64>,
        p: Vec<f64>,
        p_r: f64,
        gamma: f64,
        a: Vec<f64>,
        graph: Option<Graph>,
    ) -> Result<Self, NnnError> {
        let n = c.len();
        if p.len() != n || a.len() != n {
            return Err(NnnError::BadParameter("length mismatch".into()));
        }
        if !(gamma > 0.0) {
            return Err(NnnError::BadParameter("gamma must be positive".into()));
        }
        if a.iter().any(|&ai| ai == 0.0) {
            return Err(NnnError::BadParameter("a must be nonzero".into()));
        }
        if let Some(g) = &graph {
            if g.n() != n {
                return Err(NnnError::BadParameter("graph size mismatch".into()));
            }
        }
        let b: Vec<f64> = c.iter().zip(&a).map(|(&ci, &ai)| 0.5 - ci / ai).collect();
        // identity check: a/2 (1-b)^2 - a/2 b^2 = c
        for i in 0..n {
            let got = 0.5 * a[i] * (1.0 - b[i]) * (1.0 - b[i]) - 0.5 * a[i] * b[i] * b[i];
            if (got - c[i]).abs() > 1e-10 * c[i].abs().max(1.0) {
                return Err(NnnError::BadParameter("cost identity violated".into()));
            }
        }
        let d = alloc::vec![0.0; n];
        Ok(Self { c, p, p_r, gamma, a, b, d, graph })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// Relaxed objective on the closed hypercube.
    pub fn cost(&self, x: &DVector<f64>) -> f64 {
        let local: f64 = (0..self.n())
            .map(|i| {
                0.5 * self.a[i] * (x[i] - self.b[i]) * (x[i] - self.b[i])
                    - 0.5 * self.a[i] * self.b[i] * self.b[i]
                    + self.d[i]
            })
            .sum();
        let mismatch: f64 = self.p.iter().zip(x.iter()).map(|(&pi, &xi)| pi * xi).sum::<f64>()
            - self.p_r;
        local + 0.5 * self.gamma * mismatch * mismatch
    }

    /// Objective of a binary corner.
    pub fn corner_cost(&self, bits: &[bool]) -> f64 {
        let x = DVector::from_iterator(self.n(), bits.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        self.cost(&x)
    }

    /// `W = −diag(a) − γppᵀ`.
    pub fn w_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut w = DMatrix::from_fn(n, n, |i, j| -self.gamma * self.p[i] * self.p[j]);
        for i in 0..n {
            w[(i, i)] -= self.a[i];
        }
        w
    }

    /// `v = (aᵢbᵢ)ᵢ + γ P_r p`.
    pub fn v_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n(),
            (0..self.n()).map(|i| self.a[i] * self.b[i] + self.gamma * self.p_r * self.p[i]),
        )
    }

    /// Penalty coefficient of the distributed reformulation. Splitting the
    /// global term through `σ = (pᵢxᵢ)ᵢ + Ly − (P_r/n)𝟙` leaves only the
    /// mean component `((pᵀx − P_r)/n)𝟙` once `y` is optimal, so the
    /// distributed penalty must be scaled by `n` for
    /// `min_y f̃(x,y) = f(x)` to hold exactly.
    pub fn gamma_dist(&self) -> f64 {
        self.gamma * self.n() as f64
    }

    /// `σ(x, y) = (pᵢxᵢ)ᵢ + Ly − (P_r/n)𝟙`.
    pub fn sigma(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, NnnError> {
        let g = self.graph.as_ref().ok_or(NnnError::MissingGraph)?;
        let l = g.laplacian();
        let px = DVector::from_iterator(self.n(), (0..self.n()).map(|i| self.p[i] * x[i]));
        Ok(px + l.apply(y) - DVector::from_element(self.n(), self.p_r / self.n() as f64))
    }

    /// Distributed objective `f̃(x, y) = Σ fᵢ + γ̃/2 σᵀσ`.
    pub fn cost_dist(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64, NnnError> {
        let sigma = self.sigma(x, y)?;
        let local: f64 = (0..self.n())
            .map(|i| {
                0.5 * self.a[i] * (x[i] - self.b[i]) * (x[i] - self.b[i])
                    - 0.5 * self.a[i] * self.b[i] * self.b[i]
                    + self.d[i]
            })
            .sum();
        Ok(local + 0.5 * self.gamma_dist() * sigma.norm_squared())
    }

    /// Concavity margin `maxᵢ aᵢ + γ‖p‖² + 4T/τ`; negative values satisfy
    /// the design guidance for binary-pushing dynamics.
    pub fn concavity_margin(&self, t: f64, tau: f64) -> f64 {
        let p_norm_sq: f64 = self.p.iter().map(|&v| v * v).sum();
        let a_max = self.a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        a_max + self.gamma * p_norm_sq + 4.0 * t / tau
    }
}

/// Logistic activation `g(u) = 1/(1 + e^{−u/T})`.
pub fn logistic(u: f64, t: f64) -> f64 {
    assert!(t > 0.0);
    1.0 / (1.0 + (-u / t).exp())
}

/// Inverse activation `g⁻¹(x) = −T log(1/x − 1)` for `x ∈ (0,1)`.
pub fn logistic_inverse(x: f64, t: f64) -> Result<f64, NnnError> {
    assert!(t > 0.0);
    if !(0.0 < x && x < 1.0) {
        return Err(NnnError::BadParameter("logistic inverse needs x in (0,1)".into()));
    }
    Ok(-t * (1.0 / x - 1.0).ln())
}

/// Closed form of `∫₀^z g⁻¹`: `T (log(1−z) − z log(1/z − 1))` on `(0,1)`,
/// zero at the endpoints.
pub fn barrier_integral(z: f64, t: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        return 0.0;
    }
    t * ((1.0 - z).ln() - z * (1.0 / z - 1.0).ln())
}

/// Energy `E(x) = f(x) + (1/τ) Σᵢ ∫₀^{xᵢ} g⁻¹`.
pub fn energy(x: &DVector<f64>, problem: &BinaryProblem, t: f64, tau: f64) -> f64 {
    problem.cost(x) + x.iter().map(|&z| barrier_integral(z, t)).sum::<f64>() / tau
}

/// Distributed energy `Ẽ(x, y) = f̃(x, y) + (1/τ) Σᵢ ∫₀^{xᵢ} g⁻¹`.
pub fn energy_dist(
    x: &DVector<f64>,
    y: &DVector<f64>,
    problem: &BinaryProblem,
    t: f64,
    tau: f64,
) -> Result<f64, NnnError> {
    Ok(problem.cost_dist(x, y)? + x.iter().map(|&z| barrier_integral(z, t)).sum::<f64>() / tau)
}

/// Interior clamp: trajectories live in `[ε, 1−ε]`.
pub const INTERIOR_EPS: f64 = 1e-12;

fn clamp_interior(x: &mut DVector<f64>) -> usize {
    let mut bound = 0;
    for v in x.iter_mut() {
        let clamped = v.clamp(INTERIOR_EPS, 1.0 - INTERIOR_EPS);
        if clamped != *v {
            bound += 1;
        }
        *v = clamped;
    }
    bound
}

/// `ẋ` of the centralized dynamics:
/// `(|H(x)|_m)⁻¹ diag((xᵢ−xᵢ²)/T) (Wx + v + (T/τ) log(1/x − 1))`.
pub fn binpac_xdot(
    x: &DVector<f64>,
    problem: &BinaryProblem,
    t: f64,
    tau: f64,
    m: f64,
) -> DVector<f64> {
    let n = problem.n();
    let w = problem.w_matrix();
    let v = problem.v_vector();
    // H(x) = −W + (T/τ) diag(1/(xᵢ−xᵢ²))
    let mut h = -&w;
    for i in 0..n {
        h[(i, i)] += t / tau / (x[i] - x[i] * x[i]);
    }
    let weight = pt_inverse(&h, m);
    let force = &w * x
        + &v
        + DVector::from_iterator(n, x.iter().map(|&z| t / tau * (1.0 / z - 1.0).ln()));
    let scaled = DVector::from_iterator(n, (0..n).map(|i| (x[i] - x[i] * x[i]) / t * force[i]));
    weight * scaled
}

/// Outcome of one adaptive Euler step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Step size actually taken after halvings.
    pub h_used: f64,
    /// Clamp events at the interior boundary.
    pub clamped: usize,
    /// Energy decreased (steps that still increase energy after the halving
    /// cap are taken anyway and flagged).
    pub descended: bool,
    /// `‖ẋ‖_∞` at the starting point.
    pub xdot_norm: f64,
}

/// Adaptive Euler step of the centralized dynamics: halve `h` (up to
/// `max_halvings`) until the energy decreases.
pub fn binpac_step(
    x: &mut DVector<f64>,
    problem: &BinaryProblem,
    t: f64,
    tau: f64,
    m: f64,
    h0: f64,
    max_halvings: usize,
) -> StepOutcome {
    let xdot = binpac_xdot(x, problem, t, tau, m);
    let e0 = energy(x, problem, t, tau);
    let mut h = h0;
    for attempt in 0..=max_halvings {
        let mut candidate = x.clone() + &xdot * h;
        let clamped = clamp_interior(&mut candidate);
        let e1 = energy(&candidate, problem, t, tau);
        if e1 <= e0 || attempt == max_halvings {
            *x = candidate;
            return StepOutcome {
                h_used: h,
                clamped,
                descended: e1 <= e0,
                xdot_norm: math::norm_inf(&xdot),
            };
        }
        h *= 0.5;
    }
    unreachable!("loop always returns");
}

/// Closed-form minimizer of the distributed energy in `y` for fixed `x`:
/// `y* = −L†(pᵢxᵢ)ᵢ + (κ/n)𝟙`.
pub fn y_star(x: &DVector<f64>, problem: &BinaryProblem, kappa: f64) -> Result<DVector<f64>, NnnError> {
    let g = problem.graph.as_ref().ok_or(NnnError::MissingGraph)?;
    let l = g.laplacian();
    let px = DVector::from_iterator(problem.n(), (0..problem.n()).map(|i| problem.p[i] * x[i]));
    let n = problem.n() as f64;
    Ok(-l.pinv_apply(&px, 1e-10) + DVector::from_element(problem.n(), kappa / n))
}

/// `(ẋ, ẏ)` of the distributed dynamics. The `x`-Hessian of `Ẽ` is
/// diagonal, `H̃ᵢᵢ = aᵢ + γ̃pᵢ² + (T/τ)(xᵢ−xᵢ²)⁻¹`, so the PT-inverse is a
/// per-agent scalar; the `y`-update `ẏ = −αγ̃L((pᵢxᵢ)ᵢ + Ly)` needs two-hop
/// information.
pub fn binpad_xydot(
    x: &DVector<f64>,
    y: &DVector<f64>,
    problem: &BinaryProblem,
    t: f64,
    tau: f64,
    m: f64,
    alpha: f64,
) -> Result<(DVector<f64>, DVector<f64>), NnnError> {
    let g = problem.graph.as_ref().ok_or(NnnError::MissingGraph)?;
    let l = g.laplacian();
    let n = problem.n();
    let gamma_d = problem.gamma_dist();
    let ly = l.apply(y);
    let mut xdot = DVector::zeros(n);
    for i in 0..n {
        let w_tilde_ii = -(problem.a[i] + gamma_d * problem.p[i] * problem.p[i]);
        let v_tilde_i = problem.a[i] * problem.b[i]
            + gamma_d * problem.p[i] * (problem.p_r / n as f64 - ly[i]);
        let h_tilde = -w_tilde_ii + t / tau / (x[i] - x[i] * x[i]);
        let force = w_tilde_ii * x[i] + t / tau * (1.0 / x[i] - 1.0).ln() + v_tilde_i;
        xdot[i] = pt_inverse_scalar(h_tilde, m) * (x[i] - x[i] * x[i]) / t * force;
    }
    let px = DVector::from_iterator(n, (0..n).map(|i| problem.p[i] * x[i]));
    let ydot = -l.apply(&(px + ly)) * (alpha * gamma_d);
    Ok((xdot, ydot))
}

/// Adaptive Euler step of the distributed dynamics on `Ẽ`.
#[allow(clippy::too_many_arguments)]
pub fn binpad_step(
    x: &mut DVector<f64>,
    y: &mut DVector<f64>,
    problem: &BinaryProblem,
    t: f64,
    tau: f64,
    m: f64,
    alpha: f64,
    h0: f64,
    max_halvings: usize,
) -> Result<StepOutcome, NnnError> {
    let (xdot, ydot) = binpad_xydot(x, y, problem, t, tau, m, alpha)?;
    let e0 = energy_dist(x, y, problem, t, tau)?;
    let mut h = h0;
    for attempt in 0..=max_halvings {
        let mut cx = x.clone() + &xdot * h;
        let cy = y.clone() + &ydot * h;
        let clamped = clamp_interior(&mut cx);
        let e1 = energy_dist(&cx, &cy, problem, t, tau)?;
        if e1 <= e0 || attempt == max_halvings {
            *x = cx;
            *y = cy;
            return Ok(StepOutcome {
                h_used: h,
                clamped,
                descended: e1 <= e0,
                xdot_norm: math::norm_inf(&xdot).max(math::norm_inf(&ydot)),
            });
        }
        h *= 0.5;
    }
    unreachable!("loop always returns");
}

/// Which dynamics the annealed run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnnMode {
    Centralized,
    Distributed,
}

/// Which parameter the learning step moves: both shrink `T/τ` by `β`, but
/// lowering `T` keeps the barrier weight `1/τ` fixed, so the dynamics stay
/// fast near the corners (raising `τ` slows the whole flow by the same
/// factor it cools).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnealUpdate {
    DecreaseT,
    IncreaseTau,
}

/// Annealing schedule: integrate for `t_d` seconds, then cool `T/τ` by
/// `β`, repeated `steps` times.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    pub beta: f64,
    pub t0: f64,
    pub tau0: f64,
    pub t_d: f64,
    pub steps: usize,
    /// PT truncation.
    pub m: f64,
    /// Gain of the auxiliary dynamics (distributed mode).
    pub alpha: f64,
    /// Initial Euler step; grows adaptively up to `h_max` while the energy
    /// keeps decreasing and halves when it does not.
    pub h: f64,
    pub h_max: f64,
    pub update: AnnealUpdate,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            beta: 1.4,
            t0: 1.0,
            tau0: 0.1,
            t_d: 50.0,
            steps: 10,
            m: 0.1,
            alpha: 1.0,
            h: 1e-3,
            h_max: 0.5,
            update: AnnealUpdate::DecreaseT,
        }
    }
}

/// Per-window integration statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct WindowStats {
    clamped: usize,
    non_descent: usize,
}

/// Integrates the chosen dynamics for `t_d` simulated seconds (or until
/// `‖ẋ‖_∞ < stop_tol`), carrying an adaptive step: doubled after clean
/// descents up to `h_max`, halved inside a step on energy increase.
#[allow(clippy::too_many_arguments)]
fn integrate_window(
    problem: &BinaryProblem,
    mode: NnnMode,
    x: &mut DVector<f64>,
    y: &mut DVector<f64>,
    t: f64,
    tau: f64,
    schedule: &AnnealSchedule,
    h_cur: &mut f64,
    t_d: f64,
    stop_tol: f64,
) -> Result<WindowStats, NnnError> {
    let mut stats = WindowStats::default();
    let mut elapsed = 0.0;
    let max_steps = 400_000;
    let mut steps = 0;
    while elapsed < t_d && steps < max_steps {
        let outcome = match mode {
            NnnMode::Centralized => binpac_step(x, problem, t, tau, schedule.m, *h_cur, 20),
            NnnMode::Distributed => {
                binpad_step(x, y, problem, t, tau, schedule.m, schedule.alpha, *h_cur, 20)?
            }
        };
        stats.clamped += outcome.clamped;
        if !outcome.descended {
            stats.non_descent += 1;
        }
        elapsed += outcome.h_used;
        steps += 1;
        *h_cur = if outcome.h_used < *h_cur {
            outcome.h_used
        } else {
            (*h_cur * 2.0).min(schedule.h_max)
        };
        if outcome.xdot_norm < stop_tol {
            break;
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealResult {
    /// Final relaxed iterate (pre-rounding).
    pub x: DVector<f64>,
    /// Nearest binary corner.
    pub corner: Vec<bool>,
    /// Objective value of the corner.
    pub corner_cost: f64,
    /// `maxᵢ min(xᵢ, 1−xᵢ)` before rounding.
    pub interior_distance: f64,
    /// Total clamp events along the run.
    pub clamp_events: usize,
    /// Energy-increase steps that survived the halving cap.
    pub non_descent_steps: usize,
    /// Per-window equilibria (one per learning step).
    pub window_ends: Vec<DVector<f64>>,
}

/// Deterministic-annealing run: random interior start near `½𝟙`, `T`/`τ`
/// jittered ±1%, then `steps` learning windows each integrating the chosen
/// dynamics for `t_d` seconds before increasing `τ` by `β`.
pub fn anneal_run(
    problem: &BinaryProblem,
    schedule: &AnnealSchedule,
    mode: NnnMode,
    rng: &mut crate::Rng,
) -> Result<AnnealResult, NnnError> {
    let n = problem.n();
    // uniform in a small ball around the center, plus ±1% parameter jitter
    let mut x = DVector::from_element(n, 0.5);
    let dir = DVector::from_fn(n, |_, _| math::sample_normal(rng));
    let radius = 0.01 * rng.gen_range(0.0f64..1.0).powf(1.0 / n as f64);
    if dir.norm() > 0.0 {
        x += dir.normalize() * radius;
    }
    let mut t = schedule.t0 * rng.gen_range(0.99..1.01);
    let mut tau = schedule.tau0 * rng.gen_range(0.99..1.01);
    let mut y = DVector::zeros(n);
    let mut h_cur = schedule.h;
    let mut clamp_events = 0;
    let mut non_descent_steps = 0;
    let mut window_ends = Vec::with_capacity(schedule.steps + 1);

    let stats = integrate_window(
        problem, mode, &mut x, &mut y, t, tau, schedule, &mut h_cur, schedule.t_d, 1e-8,
    )?;
    clamp_events += stats.clamped;
    non_descent_steps += stats.non_descent;
    window_ends.push(x.clone());
    for _ in 0..schedule.steps {
        match schedule.update {
            AnnealUpdate::IncreaseTau => tau *= schedule.beta,
            AnnealUpdate::DecreaseT => t /= schedule.beta,
        }
        let stats = integrate_window(
            problem, mode, &mut x, &mut y, t, tau, schedule, &mut h_cur, schedule.t_d, 1e-8,
        )?;
        clamp_events += stats.clamped;
        non_descent_steps += stats.non_descent;
        window_ends.push(x.clone());
    }

    let corner: Vec<bool> = x.iter().map(|&v| v >= 0.5).collect();
    let interior_distance = x.iter().map(|&v| v.min(1.0 - v)).fold(0.0f64, f64::max);
    Ok(AnnealResult {
        corner_cost: problem.corner_cost(&corner),
        corner,
        interior_distance,
        clamp_events,
        non_descent_steps,
        window_ends,
        x,
    })
}

/// Non-annealed run at fixed `(T, τ)`: integrate the dynamics from the
/// random interior start until `‖ẋ‖_∞ < 1e−8` (or `max_time` simulated
/// seconds), then round to the nearest corner.
pub fn fixed_run(
    problem: &BinaryProblem,
    schedule: &AnnealSchedule,
    mode: NnnMode,
    max_time: f64,
    rng: &mut crate::Rng,
) -> Result<AnnealResult, NnnError> {
    let only_window = AnnealSchedule { steps: 0, t_d: max_time, ..schedule.clone() };
    anneal_run(problem, &only_window, mode, rng)
}

/// Greedy baseline: repeatedly switch on the element whose inclusion
/// lowers the objective the most; ties break toward the lowest index.
pub fn greedy(problem: &BinaryProblem) -> Vec<bool> {
    let n = problem.n();
    let mut bits = alloc::vec![false; n];
    let mut current = problem.corner_cost(&bits);
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if bits[i] {
                continue;
            }
            bits[i] = true;
            let cost = problem.corner_cost(&bits);
            bits[i] = false;
            if best.map_or(true, |(_, c)| cost < c) {
                best = Some((i, cost));
            }
        }
        match best {
            Some((i, cost)) if cost < current => {
                bits[i] = true;
                current = cost;
            }
            _ => break,
        }
    }
    bits
}

/// Exhaustive optimum over the `2ⁿ` corners; guarded to `n ≤ 24`.
pub fn brute_force(problem: &BinaryProblem) -> Result<(Vec<bool>, f64), NnnError> {
    let n = problem.n();
    if n > 24 {
        return Err(NnnError::TooLargeForBruteForce(n));
    }
    let mut best_bits = alloc::vec![false; n];
    let mut best_cost = problem.corner_cost(&best_bits);
    for mask in 1u64..(1u64 << n) {
        let bits: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        let cost = problem.corner_cost(&bits);
        if cost < best_cost {
            best_cost = cost;
            best_bits = bits;
        }
    }
    Ok((best_bits, best_cost))
}

/// Solution-quality score: per trial, the cheapest method earns `k−1`
/// points down to zero for the costliest (ties share averaged points);
/// totals are normalized by `(k−1) · trials`.
pub fn quality_metric(costs_per_method: &[Vec<f64>]) -> Result<Vec<f64>, NnnError> {
    let k = costs_per_method.len();
    if k < 2 || costs_per_method[0].is_empty() {
        return Err(NnnError::DegenerateComparison);
    }
    let trials = costs_per_method[0].len();
    if costs_per_method.iter().any(|c| c.len() != trials) {
        return Err(NnnError::BadParameter("ragged cost table".into()));
    }
    let mut points = alloc::vec![0.0f64; k];
    for trial in 0..trials {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            costs_per_method[a][trial].partial_cmp(&costs_per_method[b][trial]).unwrap()
        });
        // points for rank r (0-based best) is k-1-r; ties share the average
        let mut r = 0;
        while r < k {
            let mut r_end = r;
            while r_end + 1 < k
                && costs_per_method[order[r_end + 1]][trial]
                    == costs_per_method[order[r]][trial]
            {
                r_end += 1;
            }
            let share: f64 = (r..=r_end).map(|rr| (k - 1 - rr) as f64).sum::<f64>()
                / (r_end - r + 1) as f64;
            for rr in r..=r_end {
                points[order[rr]] += share;
            }
            r = r_end + 1;
        }
    }
    let norm = (k - 1) as f64 * trials as f64;
    Ok(points.into_iter().map(|p| p / norm).collect())
}

/// The two-agent visualization instance:
/// `c = (2,1)`, `p = (3,1)`, `P_r = 2.8`, `γ = 4`, `a = −(10,10)`.
pub fn two_dim_instance() -> BinaryProblem {
    BinaryProblem::new(
        alloc::vec![2.0, 1.0],
        alloc::vec![3.0, 1.0],
        2.8,
        4.0,
        alloc::vec![-10.0, -10.0],
        Some(Graph::new(2, &[(0, 1)]).unwrap()),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn logistic_pair_and_values() {
        assert!((logistic(0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((logistic(0.0, 7.3) - 0.5).abs() < 1e-15);
        assert!((logistic(3.0f64.ln(), 1.0) - 0.75).abs() < 1e-12);
        for k in 1..100 {
            let x = k as f64 / 100.0;
            let u = logistic_inverse(x, 0.7).unwrap();
            assert!((logistic(u, 0.7) - x).abs() < 1e-12);
        }
        assert!(logistic_inverse(0.0, 1.0).is_err());
        assert!(logistic_inverse(1.0, 1.0).is_err());
    }

    #[test]
    fn barrier_integral_values() {
        assert!((barrier_integral(0.5, 1.0) - 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(barrier_integral(0.0, 1.0), 0.0);
        assert_eq!(barrier_integral(1.0, 1.0), 0.0);
    }

    #[test]
    fn two_dim_corner_costs() {
        let p = two_dim_instance();
        assert!((p.corner_cost(&[false, false]) - 15.68).abs() < 1e-10);
        assert!((p.corner_cost(&[true, false]) - 2.08).abs() < 1e-10);
        assert!((p.corner_cost(&[false, true]) - 7.48).abs() < 1e-10);
        assert!((p.corner_cost(&[true, true]) - 5.88).abs() < 1e-10);
        // energy at a corner equals the objective (barrier vanishes)
        let x = DVector::from_column_slice(&[1.0, 0.0]);
        assert!((energy(&x, &p, 1.0, 0.1) - p.cost(&x)).abs() < 1e-12);
    }

    #[test]
    fn brute_force_and_greedy_on_two_dim_instance() {
        let p = two_dim_instance();
        let (bits, cost) = brute_force(&p).unwrap();
        assert_eq!(bits, alloc::vec![true, false]);
        assert!((cost - 2.08).abs() < 1e-10);
        let g = greedy(&p);
        assert_eq!(g, alloc::vec![true, false]);
        assert!((p.corner_cost(&g) - 2.08).abs() < 1e-10);
    }

    #[test]
    fn greedy_no_improving_add_returns_zeros() {
        // positive incremental costs and no penalty pressure: stay off
        let p = BinaryProblem::new(
            alloc::vec![5.0, 3.0],
            alloc::vec![1.0, 1.0],
            0.0,
            1e-9,
            alloc::vec![-10.0, -10.0],
            None,
        )
        .unwrap();
        assert_eq!(greedy(&p), alloc::vec![false, false]);
        let single = BinaryProblem::new(
            alloc::vec![5.0],
            alloc::vec![1.0],
            0.0,
            1e-9,
            alloc::vec![-10.0],
            None,
        )
        .unwrap();
        let (bits, _) = brute_force(&single).unwrap();
        assert_eq!(bits, alloc::vec![false]);
    }

    #[test]
    fn greedy_never_beats_brute_force() {
        let mut rng = crate::Rng::seed_from_u64(31);
        for trial in 0..60 {
            let n = rng.gen_range(2..=12);
            let p_vals: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..50.0)).collect();
            let c_vals: Vec<f64> =
                p_vals.iter().map(|&pv| pv.powf(rng.gen_range(1.2..1.8))).collect();
            let p_r: f64 = p_vals.iter().sum::<f64>() * rng.gen_range(0.2..0.8);
            let norm_sq: f64 = p_vals.iter().map(|&v| v * v).sum();
            let a = alloc::vec![-1.05 * (norm_sq + 40.0); n];
            let problem = BinaryProblem::new(c_vals, p_vals, p_r, 1.0, a, None).unwrap();
            let (_, best) = brute_force(&problem).unwrap();
            let g_cost = problem.corner_cost(&greedy(&problem));
            assert!(g_cost >= best - 1e-9, "trial {trial}: greedy beat brute force");
        }
    }

    #[test]
    fn energy_decreases_along_binpac_steps() {
        let mut rng = crate::Rng::seed_from_u64(3);
        let p = two_dim_instance();
        let (t, tau) = (1.0, 0.5);
        let mut accepted = 0;
        for _ in 0..50 {
            let mut x = DVector::from_fn(2, |_, _| rng.gen_range(0.05..0.95));
            for _ in 0..20 {
                let e0 = energy(&x, &p, t, tau);
                let outcome = binpac_step(&mut x, &p, t, tau, 0.1, 1e-3, 20);
                let e1 = energy(&x, &p, t, tau);
                if outcome.descended {
                    assert!(e1 <= e0 + 1e-12);
                    accepted += 1;
                }
                assert!(x.iter().all(|&v| v > 0.0 && v < 1.0), "interior violated");
            }
        }
        assert!(accepted >= 900, "only {accepted} accepted steps");
    }

    #[test]
    fn stationary_points_are_fixed() {
        // symmetric one-dimensional design: equilibrium exactly at 0.5
        let p = BinaryProblem::new(
            alloc::vec![0.0],
            alloc::vec![1.0],
            0.5,
            1.0,
            alloc::vec![-3.0],
            None,
        )
        .unwrap();
        // -∇E(0.5) = W·0.5 + v with W = 3−1 = 2, v = ab + γP_r p = -1.5+0.5
        let x = DVector::from_element(1, 0.5);
        let xdot = binpac_xdot(&x, &p, 1.0, 1.0, 0.1);
        assert!(xdot.norm() < 1e-12);
    }

    #[test]
    fn one_dim_single_interior_equilibrium_when_margin_positive() {
        // a > −γp² − 4T/τ: strictly convex energy, one interior crossing
        let p = BinaryProblem::new(
            alloc::vec![0.0],
            alloc::vec![1.0],
            0.5,
            1.0,
            alloc::vec![-3.0],
            None,
        )
        .unwrap();
        assert!(p.concavity_margin(1.0, 1.0) > 0.0);
        let mut crossings = 0;
        let mut prev_sign = 0i8;
        for k in 1..2000 {
            let x = DVector::from_element(1, k as f64 / 2000.0);
            let d = binpac_xdot(&x, &p, 1.0, 1.0, 0.1)[0];
            let sign = if d > 0.0 { 1 } else { -1 };
            if prev_sign != 0 && sign != prev_sign {
                crossings += 1;
                // crossing near the center for the symmetric design
                assert!((x[0] - 0.5).abs() < 0.1, "crossing at {}", x[0]);
            }
            prev_sign = sign;
        }
        assert_eq!(crossings, 1);
    }

    #[test]
    fn y_star_properties() {
        let mut rng = crate::Rng::seed_from_u64(12);
        let graph = crate::graph::random_connected_graph(6, 9, 5).unwrap();
        let problem = BinaryProblem::new(
            (0..6).map(|_| rng.gen_range(1.0..5.0)).collect(),
            (0..6).map(|_| rng.gen_range(1.0..3.0)).collect(),
            4.0,
            2.0,
            alloc::vec![-40.0; 6],
            Some(graph),
        )
        .unwrap();
        let x = DVector::from_fn(6, |_, _| rng.gen_range(0.1..0.9));
        let kappa = 1.7;
        let ys = y_star(&x, &problem, kappa).unwrap();
        assert!((ys.sum() - kappa).abs() < 1e-10);
        // ∇_y Ẽ = γ̃ L((pᵢxᵢ) + Ly) must vanish
        let l = problem.graph.as_ref().unwrap().laplacian();
        let px = DVector::from_iterator(6, (0..6).map(|i| problem.p[i] * x[i]));
        let residual = l.apply(&(px + l.apply(&ys))) * problem.gamma_dist();
        assert!(residual.norm() < 1e-9, "residual {}", residual.norm());
        // p = 0 degenerates to the mean vector
        let trivial = BinaryProblem::new(
            alloc::vec![1.0, 1.0],
            alloc::vec![0.0, 0.0],
            0.0,
            1.0,
            alloc::vec![-5.0, -5.0],
            Some(crate::graph::Graph::new(2, &[(0, 1)]).unwrap()),
        )
        .unwrap();
        let yt = y_star(&DVector::from_element(2, 0.3), &trivial, 3.0).unwrap();
        assert!((yt - DVector::from_element(2, 1.5)).norm() < 1e-12);
    }

    #[test]
    fn binpad_conserves_y_sum_and_descends() {
        let p = two_dim_instance();
        let mut rng = crate::Rng::seed_from_u64(9);
        let mut x = DVector::from_fn(2, |_, _| rng.gen_range(0.4..0.6));
        let mut y = DVector::from_column_slice(&[0.3, -0.3]);
        let kappa = y.sum();
        let (t, tau) = (1.0, 0.5);
        for _ in 0..500 {
            let e0 = energy_dist(&x, &y, &p, t, tau).unwrap();
            let out = binpad_step(&mut x, &mut y, &p, t, tau, 0.1, 1.0, 1e-3, 20).unwrap();
            let e1 = energy_dist(&x, &y, &p, t, tau).unwrap();
            assert!((y.sum() - kappa).abs() < 1e-12);
            if out.descended {
                assert!(e1 <= e0 + 1e-12);
            }
        }
    }

    #[test]
    fn binpad_fixed_point_at_energy_critical_point() {
        // high T/τ keeps the critical point strictly interior: run to
        // convergence, then verify the closed-form y* matches and the
        // equivalence f(x̂) = f̃(x̂, y*) holds at the fixed point
        let p = two_dim_instance();
        let mut rng = crate::Rng::seed_from_u64(5);
        let mut x = DVector::from_fn(2, |_, _| rng.gen_range(0.45..0.55));
        let mut y = DVector::from_column_slice(&[0.2, -0.2]);
        let (t, tau) = (1.0, 0.1);
        for _ in 0..200_000 {
            let out = binpad_step(&mut x, &mut y, &p, t, tau, 0.1, 1.0, 1e-2, 20).unwrap();
            if out.xdot_norm < 1e-11 {
                break;
            }
        }
        let ys = y_star(&x, &p, y.sum()).unwrap();
        assert!((&y - &ys).norm() < 1e-6, "y did not reach y*: {:?} vs {:?}", y, ys);
        let f_tilde = p.cost_dist(&x, &ys).unwrap();
        assert!((p.cost(&x) - f_tilde).abs() < 1e-8);
        // and the dynamics are stationary there
        let (xdot, ydot) = binpad_xydot(&x, &y, &p, t, tau, 0.1, 1.0).unwrap();
        assert!(xdot.norm() < 1e-8 && ydot.norm() < 1e-8);
    }

    #[test]
    fn scalar_pt_matches_dense_on_diagonal_hessian() {
        let mut rng = crate::Rng::seed_from_u64(18);
        let n = 7;
        let graph = crate::graph::random_connected_graph(n, 12, 3).unwrap();
        let problem = BinaryProblem::new(
            (0..n).map(|_| rng.gen_range(1.0..5.0)).collect(),
            (0..n).map(|_| rng.gen_range(1.0..3.0)).collect(),
            6.0,
            2.0,
            alloc::vec![-30.0; n],
            Some(graph),
        )
        .unwrap();
        let x = DVector::from_fn(n, |_, _| rng.gen_range(0.1..0.9));
        let (t, tau, m) = (1.0, 0.5, 0.1);
        let gd = problem.gamma_dist();
        let diag = DVector::from_iterator(
            n,
            (0..n).map(|i| {
                problem.a[i] + gd * problem.p[i] * problem.p[i]
                    + t / tau / (x[i] - x[i] * x[i])
            }),
        );
        let dense = pt_inverse(&DMatrix::from_diagonal(&diag), m);
        for i in 0..n {
            let scalar = pt_inverse_scalar(diag[i], m);
            assert!((dense[(i, i)] - scalar).abs() < 1e-10);
        }
    }

    #[test]
    fn annealed_two_dim_instance_reaches_optimal_corner() {
        let p = two_dim_instance();
        let schedule = AnnealSchedule { steps: 15, ..Default::default() };
        for seed in 0..3 {
            let mut rng = crate::Rng::seed_from_u64(seed);
            let result = anneal_run(&p, &schedule, NnnMode::Centralized, &mut rng).unwrap();
            assert_eq!(result.corner, alloc::vec![true, false], "seed {seed}");
            assert!(result.interior_distance <= 1e-3, "seed {seed}: {}", result.interior_distance);
        }
    }

    #[test]
    fn annealed_distributed_two_dim_instance_reaches_optimal_corner() {
        let p = two_dim_instance();
        let schedule = AnnealSchedule { steps: 15, ..Default::default() };
        for seed in 0..3 {
            let mut rng = crate::Rng::seed_from_u64(100 + seed);
            let result = anneal_run(&p, &schedule, NnnMode::Distributed, &mut rng).unwrap();
            assert_eq!(result.corner, alloc::vec![true, false], "seed {seed}");
            assert!(result.interior_distance <= 1e-3, "seed {seed}: {}", result.interior_distance);
        }
    }

    #[test]
    fn quality_metric_degenerate_and_simple_cases() {
        assert!(quality_metric(&[alloc::vec![1.0]]).is_err());
        let q = quality_metric(&[alloc::vec![1.0; 10], alloc::vec![2.0; 10]]).unwrap();
        assert_eq!(q, alloc::vec![1.0, 0.0]);
        // seven methods, max total = (k−1)·trials = 600 for 100 trials
        let costs: Vec<Vec<f64>> = (0..7).map(|m| alloc::vec![m as f64; 100]).collect();
        let q7 = quality_metric(&costs).unwrap();
        assert!((q7[0] - 1.0).abs() < 1e-12);
        assert!((q7[6] - 0.0).abs() < 1e-12);
        // ties share points
        let qt = quality_metric(&[alloc::vec![1.0], alloc::vec![1.0], alloc::vec![5.0]]).unwrap();
        assert!((qt[0] - 0.75).abs() < 1e-12);
        assert!((qt[1] - 0.75).abs() < 1e-12);
        assert!((qt[2] - 0.0).abs() < 1e-12);
    }
}
