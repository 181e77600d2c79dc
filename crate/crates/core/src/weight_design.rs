//! The ε convergence metric of the reduced Hessian and the spectral
//! post-scaling that brings a connected Laplacian inside the unit ball.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use crate::graph::{LaplacianMatrix, ProjectionMatrix};
use crate::math;
use crate::problems::HessianBounds;

/// Result of evaluating the convergence metric
/// `ε = max(1 − μ_min(M_δ), μ_max(M_Δ) − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonReport {
    pub epsilon: f64,
    pub mu_min_lower: f64,
    pub mu_max_upper: f64,
    /// True iff ε < 1, i.e. the eigenvalues of `I − M(x)` stay in the unit
    /// ball for every Hessian between the bounds.
    pub satisfied: bool,
}

/// Evaluates ε for the Laplacian `l` under per-agent Hessian bounds.
///
/// `M_δ = J Tᵀ L H_δ L T Jᵀ` and `M_Δ = J Tᵀ L H_Δ L T Jᵀ` sandwich `M(x)`
/// for every admissible Hessian, so the two extreme eigenvalues decide the
/// whole family.
pub fn epsilon_metric(
    l: &LaplacianMatrix,
    bounds: &HessianBounds,
    t: &ProjectionMatrix,
) -> EpsilonReport {
    let m_lower = t.reduced_hessian(l, &bounds.lower_diag());
    let m_upper = t.reduced_hessian(l, &bounds.upper_diag());
    let lo_vals = math::symmetric_eigenvalues_sorted(&m_lower);
    let hi_vals = math::symmetric_eigenvalues_sorted(&m_upper);
    let mu_min_lower = lo_vals[0];
    let mu_max_upper = *hi_vals.last().expect("nonempty spectrum");
    let epsilon = (1.0 - mu_min_lower).max(mu_max_upper - 1.0);
    EpsilonReport { epsilon, mu_min_lower, mu_max_upper, satisfied: epsilon < 1.0 }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeightDesignError {
    #[error("degenerate spectrum: μ₁(M_δ) + μ_max(M_Δ) = {0} must be positive")]
    DegenerateSpectrum(f64),
}

/// Post-scaling `β = √(2 / (μ₁(M_δ) + μ_{n−1}(M_Δ)))`, returning `L* = βL`.
///
/// After scaling, `1 − μ₁(M*_δ) = −(1 − μ_{n−1}(M*_Δ))`: the spectrum of
/// `I − M*` is centered, which makes ε < 1 for any connected graph.
pub fn post_scale_beta(
    l: &LaplacianMatrix,
    bounds: &HessianBounds,
    t: &ProjectionMatrix,
) -> Result<(f64, LaplacianMatrix), WeightDesignError> {
    let m_lower = t.reduced_hessian(l, &bounds.lower_diag());
    let m_upper = t.reduced_hessian(l, &bounds.upper_diag());
    let mu1 = math::symmetric_eigenvalues_sorted(&m_lower)[0];
    let mu_top = *math::symmetric_eigenvalues_sorted(&m_upper).last().unwrap();
    let denom = mu1 + mu_top;
    if !(denom > 0.0) {
        return Err(WeightDesignError::DegenerateSpectrum(denom));
    }
    let beta = (2.0 / denom).sqrt();
    Ok((beta, l.scaled(beta)))
}
