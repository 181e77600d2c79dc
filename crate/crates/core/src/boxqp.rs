//! Exact reference solvers for separable allocation problems.
//!
//! These are the oracles the iterative algorithms are checked against: a
//! breakpoint active-set solver for box-constrained quadratics and an
//! equal-marginal bisection solver for the general strictly convex catalog.
//! Both are direct (non-iterative in the network sense) and share no code
//! with the distributed dynamics they certify.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::vec::Vec;
use nalgebra::DVector;

use crate::problems::CostFunction;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("infeasible: sum(lower) = {sum_lower} > d = {d} or sum(upper) = {sum_upper} < d")]
    Infeasible { sum_lower: f64, sum_upper: f64, d: f64 },
    #[error("inputs must have equal lengths")]
    LengthMismatch,
    #[error("quadratic coefficients must be positive")]
    NonConvex,
}

/// Exact solution of `min Σ ½aᵢxᵢ² + bᵢxᵢ s.t. Σxᵢ = d, lᵢ ≤ xᵢ ≤ uᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxQpSolution {
    pub x: DVector<f64>,
    /// Multiplier of the resource constraint (the common marginal cost).
    pub nu: f64,
    /// Multipliers of the active lower bounds (zero elsewhere).
    pub mult_lower: DVector<f64>,
    /// Multipliers of the active upper bounds (zero elsewhere).
    pub mult_upper: DVector<f64>,
}

/// Breakpoint (exact active-set) method: the water-filling map
/// `xᵢ(ν) = clamp((ν − bᵢ)/aᵢ, lᵢ, uᵢ)` has a piecewise-linear,
/// nondecreasing total; the segment containing `d` is found by sorting the
/// `2n` breakpoints and the multiplier solved linearly inside it.
pub fn solve_box_qp(
    a: &[f64],
    b: &[f64],
    d: f64,
    lower: &[f64],
    upper: &[f64],
) -> Result<BoxQpSolution, OracleError> {
    let n = a.len();
    if b.len() != n || lower.len() != n || upper.len() != n {
        return Err(OracleError::LengthMismatch);
    }
    if a.iter().any(|&ai| !(ai > 0.0)) {
        return Err(OracleError::NonConvex);
    }
    let sum_lower: f64 = lower.iter().sum();
    let sum_upper: f64 = upper.iter().sum();
    if d < sum_lower - 1e-12 || d > sum_upper + 1e-12 {
        return Err(OracleError::Infeasible { sum_lower, sum_upper, d });
    }

    let total = |nu: f64| -> f64 {
        (0..n)
            .map(|i| ((nu - b[i]) / a[i]).clamp(lower[i], upper[i]))
            .sum()
    };

    let mut breakpoints: Vec<f64> = Vec::with_capacity(2 * n);
    for i in 0..n {
        breakpoints.push(a[i] * lower[i] + b[i]);
        breakpoints.push(a[i] * upper[i] + b[i]);
    }
    breakpoints.sort_by(|x, y| x.partial_cmp(y).expect("NaN breakpoint"));

    // locate the segment [bp_k, bp_{k+1}] whose totals bracket d
    let nu = if total(breakpoints[0]) >= d {
        breakpoints[0]
    } else if total(breakpoints[2 * n - 1]) <= d {
        breakpoints[2 * n - 1]
    } else {
        let mut k = 0;
        while k + 1 < 2 * n && total(breakpoints[k + 1]) < d {
            k += 1;
        }
        let (lo_bp, hi_bp) = (breakpoints[k], breakpoints[k + 1]);
        // inside the segment, agents with lo_bp < aᵢxᵢ+bᵢ-range spanning are free
        let mut slope = 0.0;
        for i in 0..n {
            let lo_i = a[i] * lower[i] + b[i];
            let hi_i = a[i] * upper[i] + b[i];
            if lo_i <= lo_bp + 1e-15 && hi_i >= hi_bp - 1e-15 {
                slope += 1.0 / a[i];
            }
        }
        if slope > 0.0 {
            lo_bp + (d - total(lo_bp)) / slope
        } else {
            // degenerate flat segment: any ν in it gives the same x
            0.5 * (lo_bp + hi_bp)
        }
    };

    let x = DVector::from_iterator(n, (0..n).map(|i| ((nu - b[i]) / a[i]).clamp(lower[i], upper[i])));
    let mut mult_lower = DVector::zeros(n);
    let mut mult_upper = DVector::zeros(n);
    for i in 0..n {
        let marginal = a[i] * x[i] + b[i];
        if x[i] <= lower[i] + 1e-12 {
            mult_lower[i] = (marginal - nu).max(0.0);
        }
        if x[i] >= upper[i] - 1e-12 {
            mult_upper[i] = (nu - marginal).max(0.0);
        }
    }
    Ok(BoxQpSolution { x, nu, mult_lower, mult_upper })
}

/// Unconstrained-box variant (`Σx = d` only): closed form of the quadratic
/// equal-marginal conditions.
pub fn solve_equality_qp(a: &[f64], b: &[f64], d: f64) -> Result<BoxQpSolution, OracleError> {
    let n = a.len();
    if b.len() != n {
        return Err(OracleError::LengthMismatch);
    }
    if a.iter().any(|&ai| !(ai > 0.0)) {
        return Err(OracleError::NonConvex);
    }
    let inv_sum: f64 = a.iter().map(|ai| 1.0 / ai).sum();
    let ratio_sum: f64 = a.iter().zip(b).map(|(&ai, &bi)| bi / ai).sum();
    let nu = (d + ratio_sum) / inv_sum;
    let x = DVector::from_iterator(n, a.iter().zip(b).map(|(&ai, &bi)| (nu - bi) / ai));
    Ok(BoxQpSolution { x, nu, mult_lower: DVector::zeros(n), mult_upper: DVector::zeros(n) })
}

/// Equal-marginal solver for the strictly convex scalar catalog (with or
/// without boxes): bisection on the common marginal ν, inverting each
/// agent's strictly increasing marginal by an inner bisection.
pub fn solve_separable(
    costs: &[CostFunction],
    d: f64,
    lower: Option<&[f64]>,
    upper: Option<&[f64]>,
) -> Result<BoxQpSolution, OracleError> {
    let n = costs.len();
    let lo_i = |i: usize| lower.map_or(f64::NEG_INFINITY, |l| l[i]);
    let hi_i = |i: usize| upper.map_or(f64::INFINITY, |u| u[i]);
    if let (Some(l), Some(u)) = (lower, upper) {
        let (sl, su): (f64, f64) = (l.iter().sum(), u.iter().sum());
        if d < sl - 1e-12 || d > su + 1e-12 {
            return Err(OracleError::Infeasible { sum_lower: sl, sum_upper: su, d });
        }
    }

    // invert f'(x) = nu on [lo, hi] for one agent (f' strictly increasing)
    let invert = |i: usize, nu: f64| -> f64 {
        let (mut xl, mut xh) = (-1.0f64, 1.0f64);
        while costs[i].grad(xl) > nu && xl > -1e12 {
            xl *= 2.0;
        }
        while costs[i].grad(xh) < nu && xh < 1e12 {
            xh *= 2.0;
        }
        let x = crate::math::bisect(|x| costs[i].grad(x) - nu, xl, xh, 1e-14 * xh.abs().max(1.0));
        x.clamp(lo_i(i), hi_i(i))
    };
    let total = |nu: f64| -> f64 { (0..n).map(|i| invert(i, nu)).sum() };

    let (mut nu_lo, mut nu_hi) = (-1.0f64, 1.0f64);
    while total(nu_lo) > d && nu_lo > -1e12 {
        nu_lo *= 2.0;
    }
    while total(nu_hi) < d && nu_hi < 1e12 {
        nu_hi *= 2.0;
    }
    let nu = crate::math::bisect(|nu| total(nu) - d, nu_lo, nu_hi, 1e-14 * nu_hi.abs().max(1.0));
    let x = DVector::from_iterator(n, (0..n).map(|i| invert(i, nu)));
    let mut mult_lower = DVector::zeros(n);
    let mut mult_upper = DVector::zeros(n);
    for i in 0..n {
        let marginal = costs[i].grad(x[i]);
        if lower.is_some() && x[i] <= lo_i(i) + 1e-11 {
            mult_lower[i] = (marginal - nu).max(0.0);
        }
        if upper.is_some() && x[i] >= hi_i(i) - 1e-11 {
            mult_upper[i] = (nu - marginal).max(0.0);
        }
    }
    Ok(BoxQpSolution { x, nu, mult_lower, mult_upper })
}

/// Max KKT violation of a candidate `x` for the box QP: returns
/// `(feasibility, stationarity, complementarity)` residuals.
pub fn kkt_residual(
    a: &[f64],
    b: &[f64],
    d: f64,
    lower: &[f64],
    upper: &[f64],
    x: &DVector<f64>,
    band: f64,
) -> (f64, f64, f64) {
    let n = a.len();
    let feas = (x.sum() - d).abs();
    // estimate nu from agents strictly inside their boxes
    let mut free: Vec<f64> = (0..n)
        .filter(|&i| x[i] > lower[i] + band && x[i] < upper[i] - band)
        .map(|i| a[i] * x[i] + b[i])
        .collect();
    free.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let nu = if free.is_empty() {
        (0..n).map(|i| a[i] * x[i] + b[i]).sum::<f64>() / n as f64
    } else {
        free[free.len() / 2]
    };
    let mut stat = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..n {
        let marg = a[i] * x[i] + b[i];
        if x[i] > lower[i] + band && x[i] < upper[i] - band {
            stat = stat.max((marg - nu).abs());
        } else if x[i] <= lower[i] + band {
            // at the lower bound the marginal must not be below nu
            comp = comp.max((nu - marg).max(0.0));
        } else {
            comp = comp.max((marg - nu).max(0.0));
        }
    }
    (feas, stat, comp)
}
