//! Cost-function catalog and problem containers.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DVector;

use crate::graph::Graph;
use crate::math::Poly;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("bad cost parameter: {0}")]
    BadParameter(String),
    #[error("hessian bounds unsupported for this cost kind")]
    UnsupportedKind,
    #[error("box infeasible: need sum(lower) < d < sum(upper) strictly")]
    InfeasibleBox,
    #[error("agent count mismatch: {0} costs for graph of {1} nodes")]
    AgentCountMismatch(usize, usize),
}

/// Scalar-argument cost catalog.
///
/// `Quadratic` and `SinusoidalQuadratic` are the single-argument families
/// used by the Newton descent algorithms; `BinaryQuadratic` is the on/off
/// allocation shape `a/2 (x−b)² − a/2 b² + d` with `f(0)=d`, `f(1)=c+d`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum CostFunction {
    Quadratic { a: f64, b: f64 },
    SinusoidalQuadratic { a: f64, b: f64, c: f64, theta: f64 },
    BinaryQuadratic { a: f64, b: f64, d: f64 },
}

impl CostFunction {
    pub fn quadratic(a: f64, b: f64) -> Result<Self, ProblemError> {
        if !(a > 0.0) {
            return Err(ProblemError::BadParameter("quadratic requires a > 0".into()));
        }
        Ok(Self::Quadratic { a, b })
    }

    pub fn sinusoidal_quadratic(a: f64, b: f64, c: f64, theta: f64) -> Result<Self, ProblemError> {
        if !(a - c > 0.0) || c < 0.0 {
            return Err(ProblemError::BadParameter(
                "sinusoidal quadratic requires 0 <= c < a".into(),
            ));
        }
        Ok(Self::SinusoidalQuadratic { a, b, c, theta })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Quadratic { a, b } => 0.5 * a * x * x + b * x,
            Self::SinusoidalQuadratic { a, b, c, theta } => {
                0.5 * a * x * x + b * x + c * (x + theta).sin()
            }
            Self::BinaryQuadratic { a, b, d } => 0.5 * a * (x - b) * (x - b) - 0.5 * a * b * b + d,
        }
    }

    pub fn grad(&self, x: f64) -> f64 {
        match *self {
            Self::Quadratic { a, b } => a * x + b,
            Self::SinusoidalQuadratic { a, b, c, theta } => a * x + b + c * (x + theta).cos(),
            Self::BinaryQuadratic { a, b, .. } => a * (x - b),
        }
    }

    pub fn hess(&self, x: f64) -> f64 {
        match *self {
            Self::Quadratic { a, .. } => a,
            Self::SinusoidalQuadratic { a, c, theta, .. } => a - c * (x + theta).sin(),
            Self::BinaryQuadratic { a, .. } => a,
        }
    }

    /// Tightest analytic second-derivative bounds, where the catalog admits
    /// them: quadratic → `(a, a)`, sinusoidal quadratic → `(a−c, a+c)`.
    pub fn hessian_bounds(&self) -> Result<(f64, f64), ProblemError> {
        match *self {
            Self::Quadratic { a, .. } => Ok((a, a)),
            Self::SinusoidalQuadratic { a, c, .. } => Ok((a - c, a + c)),
            Self::BinaryQuadratic { .. } => Err(ProblemError::UnsupportedKind),
        }
    }
}

/// Per-agent Hessian bounds `0 < δᵢ ≤ Δᵢ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HessianBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl HessianBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ProblemError> {
        if lower.len() != upper.len() {
            return Err(ProblemError::BadParameter("bound length mismatch".into()));
        }
        for (&lo, &hi) in lower.iter().zip(&upper) {
            if !(lo > 0.0 && lo <= hi) {
                return Err(ProblemError::BadParameter("need 0 < delta_i <= Delta_i".into()));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn for_costs(costs: &[CostFunction]) -> Result<Self, ProblemError> {
        let mut lower = Vec::with_capacity(costs.len());
        let mut upper = Vec::with_capacity(costs.len());
        for c in costs {
            let (lo, hi) = c.hessian_bounds()?;
            lower.push(lo);
            upper.push(hi);
        }
        Self::new(lower, upper)
    }

    /// Scalar fallback when only global bounds are known: every agent gets
    /// `(min δᵢ, max Δᵢ)`.
    pub fn globalized(&self) -> Self {
        let lo = self.lower.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            lower: alloc::vec![lo; self.lower.len()],
            upper: alloc::vec![hi; self.upper.len()],
        }
    }

    pub fn lower_diag(&self) -> DVector<f64> {
        DVector::from_vec(self.lower.clone())
    }

    pub fn upper_diag(&self) -> DVector<f64> {
        DVector::from_vec(self.upper.clone())
    }
}

/// Separable allocation problem `min Σ fᵢ(xᵢ) s.t. Σ xᵢ = d`, with optional
/// per-agent boxes, over a communication graph.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AllocationProblem {
    pub costs: Vec<CostFunction>,
    pub demand: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub graph: Graph,
}

impl AllocationProblem {
    pub fn new(
        costs: Vec<CostFunction>,
        demand: f64,
        lower: Option<Vec<f64>>,
        upper: Option<Vec<f64>>,
        graph: Graph,
    ) -> Result<Self, ProblemError> {
        if costs.len() != graph.n() {
            return Err(ProblemError::AgentCountMismatch(costs.len(), graph.n()));
        }
        if let (Some(lo), Some(hi)) = (&lower, &upper) {
            let slo: f64 = lo.iter().sum();
            let shi: f64 = hi.iter().sum();
            if !(slo < demand && demand < shi) {
                return Err(ProblemError::InfeasibleBox);
            }
        }
        Ok(Self { costs, demand, lower, upper, graph })
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    pub fn total_cost(&self, x: &DVector<f64>) -> f64 {
        self.costs.iter().zip(x.iter()).map(|(c, &xi)| c.eval(xi)).sum()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.costs.iter().zip(x.iter()).map(|(c, &xi)| c.grad(xi)))
    }

    pub fn hessian_diag(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.costs.iter().zip(x.iter()).map(|(c, &xi)| c.hess(xi)))
    }

    pub fn hessian_bounds(&self) -> Result<HessianBounds, ProblemError> {
        HessianBounds::for_costs(&self.costs)
    }
}

/// How [`feasible_initializer`] spreads the total resource.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// `xᵢ⁰ = d/n` for every agent.
    Uniform,
    /// Agent 0 carries the whole demand; everyone else starts at zero.
    SingleAgent,
}

/// Initial vector with `Σ xᵢ⁰ = d` exactly.
pub fn feasible_initializer(n: usize, demand: f64, mode: InitMode) -> DVector<f64> {
    match mode {
        InitMode::Uniform => DVector::from_element(n, demand / n as f64),
        InitMode::SingleAgent => {
            let mut x = DVector::zeros(n);
            x[0] = demand;
            x
        }
    }
}

/// Inner-problem start `p⁰ = (P_ref + χ̂₀, χ̂₁, …)`: the reference is told to
/// agent 0, every agent adds its own realization, so `Σ pᵢ⁰ = P_ref + Σ χ̂ᵢ`.
pub fn feasible_initializer_with_offsets(p_ref: f64, offsets: &[f64]) -> DVector<f64> {
    let mut p = DVector::from_column_slice(offsets);
    p[0] += p_ref;
    p
}

/// Scalar random variable attached to an agent of the nested problem.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "dist", rename_all = "snake_case"))]
pub enum Dist {
    PointMass { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Dist {
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::PointMass { value } => value,
            Self::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.gen_range(lo..hi)
                }
            }
        }
    }
}

/// Parameterized inner cost `f(x, p) = ½ α(x) p² + β(x) p + γ(x)` with
/// polynomial coefficient functions of the scalar outer variable.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShiftedQuadratic {
    pub alpha: Poly,
    pub beta: Poly,
    pub gamma: Poly,
    /// Cached strong-convexity constant `min_x α(x)` over the working range.
    pub omega: f64,
}

/// Outer-variable range over which α is certified positive and θ computed.
pub const OUTER_RANGE: (f64, f64) = (-3.0, 3.0);

impl ShiftedQuadratic {
    pub fn new(alpha: Poly, beta: Poly, gamma: Poly) -> Result<Self, ProblemError> {
        let (_, omega) = alpha.min_on_interval(OUTER_RANGE.0, OUTER_RANGE.1, 3000);
        if !(omega > 0.0) {
            return Err(ProblemError::BadParameter("shifted quadratic needs min α(x) > 0".into()));
        }
        Ok(Self { alpha, beta, gamma, omega })
    }

    pub fn eval(&self, x: f64, p: f64) -> f64 {
        0.5 * self.alpha.eval(x) * p * p + self.beta.eval(x) * p + self.gamma.eval(x)
    }

    pub fn grad_p(&self, x: f64, p: f64) -> f64 {
        self.alpha.eval(x) * p + self.beta.eval(x)
    }

    pub fn hess_p(&self, x: f64, _p: f64) -> f64 {
        self.alpha.eval(x)
    }

    pub fn grad_x(&self, x: f64, p: f64) -> f64 {
        0.5 * self.alpha.derivative().eval(x) * p * p
            + self.beta.derivative().eval(x) * p
            + self.gamma.derivative().eval(x)
    }

    pub fn hess_x(&self, x: f64, p: f64) -> f64 {
        let a2 = self.alpha.derivative().derivative().eval(x);
        let b2 = self.beta.derivative().derivative().eval(x);
        let g2 = self.gamma.derivative().derivative().eval(x);
        0.5 * a2 * p * p + b2 * p + g2
    }

    /// Largest curvature in `p` over the working outer range.
    pub fn theta(&self) -> f64 {
        let (_, hi) = self.alpha.max_on_interval(OUTER_RANGE.0, OUTER_RANGE.1, 3000);
        hi
    }
}

/// Nested stochastic problem: outer scalar `x` per agent, inner allocation
/// `min_p Σ fᵢ(x, pᵢ)` subject to `Σ pᵢ = P_ref + Σ χ̂ᵢ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NestedProblem {
    pub costs: Vec<ShiftedQuadratic>,
    pub p_ref: f64,
    pub dists: Vec<Dist>,
    pub graph: Graph,
}

impl NestedProblem {
    pub fn new(
        costs: Vec<ShiftedQuadratic>,
        p_ref: f64,
        dists: Vec<Dist>,
        graph: Graph,
    ) -> Result<Self, ProblemError> {
        if costs.len() != graph.n() || dists.len() != graph.n() {
            return Err(ProblemError::AgentCountMismatch(costs.len(), graph.n()));
        }
        Ok(Self { costs, p_ref, dists, graph })
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    /// `min_i ωᵢ`: the network-wide strong-convexity constant.
    pub fn omega(&self) -> f64 {
        self.costs.iter().map(|c| c.omega).fold(f64::INFINITY, f64::min)
    }

    /// `max_i θᵢ` over the working outer range.
    pub fn theta(&self) -> f64 {
        self.costs.iter().map(|c| c.theta()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact inner optimum for per-agent outer values `x` and realization
    /// offsets: the equal-marginal closed form of the quadratic-in-`p`
    /// problem. Used as the KKT reference everywhere.
    pub fn inner_optimum(&self, x: &DVector<f64>, offsets: &[f64]) -> DVector<f64> {
        let total: f64 = self.p_ref + offsets.iter().sum::<f64>();
        let mut inv_sum = 0.0;
        let mut ratio_sum = 0.0;
        for (i, c) in self.costs.iter().enumerate() {
            let a = c.alpha.eval(x[i]);
            inv_sum += 1.0 / a;
            ratio_sum += c.beta.eval(x[i]) / a;
        }
        let nu = (total + ratio_sum) / inv_sum;
        DVector::from_iterator(
            self.n(),
            self.costs.iter().enumerate().map(|(i, c)| {
                (nu - c.beta.eval(x[i])) / c.alpha.eval(x[i])
            }),
        )
    }

    /// Inner objective value at `(x, p)`.
    pub fn inner_cost(&self, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        self.costs
            .iter()
            .enumerate()
            .map(|(i, c)| c.eval(x[i], p[i]))
            .sum()
    }

    pub fn inner_grad(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n(),
            self.costs.iter().enumerate().map(|(i, c)| c.grad_p(x[i], p[i])),
        )
    }

    pub fn sample_offsets<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.dists.iter().map(|d| d.sample(rng)).collect()
    }
}

/// The synthetic quartic construction for nested-problem studies: for each
/// agent draw roots `z¹..z⁴` in the four unit subintervals of `[-2, 2]`,
/// a quartic leading coefficient, a target strong-convexity level `ωᵢ`, and
/// a (possibly nonconvex) quadratic `β`; the quartic offset is solved so
/// that `min_x α(x) = ωᵢ`.
pub fn synthetic_quartic_costs<R: rand::Rng>(n: usize, rng: &mut R) -> Vec<ShiftedQuadratic> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let a1: f64 = rng.gen_range(0.5..1.5);
        let roots = [
            rng.gen_range(-2.0..-1.0),
            rng.gen_range(-1.0..0.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(1.0..2.0),
        ];
        let omega: f64 = rng.gen_range(1.0..5.0);
        let bare = Poly::from_roots(a1, &roots, 0.0);
        let (_, min_bare) = bare.min_on_interval(OUTER_RANGE.0, OUTER_RANGE.1, 3000);
        let alpha = Poly::from_roots(a1, &roots, omega - min_bare);
        let b1: f64 = rng.gen_range(-1.0..1.0);
        let beta = Poly::from_roots(b1, &[rng.gen_range(-2.0..0.0), rng.gen_range(0.0..2.0)], 0.0);
        let gamma = Poly::constant(0.0);
        out.push(ShiftedQuadratic::new(alpha, beta, gamma).expect("construction enforces ω > 0"));
    }
    out
}
