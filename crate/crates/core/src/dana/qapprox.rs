//! The truncated Neumann series `A_q = Σ_{p=0}^q (I − LHL)^p`.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use nalgebra::{DMatrix, DVector};

use crate::graph::LaplacianMatrix;

/// Applies `A_q v` by the two-hop recursion `w ← w − L (h ∘ (L w))`,
/// accumulating each series term. `h` holds the diagonal Hessian entries.
/// Cost: `2q` Laplacian products, i.e. `q` rounds of two-hop exchanges.
pub fn q_approx_apply(
    l: &LaplacianMatrix,
    h: &DVector<f64>,
    v: &DVector<f64>,
    q: usize,
) -> DVector<f64> {
    let mut term = v.clone();
    let mut acc = v.clone();
    for _ in 0..q {
        let t = l.apply(&term);
        let s = t.component_mul(h);
        term -= l.apply(&s);
        acc += &term;
    }
    acc
}

/// Dense `A_q` (reference path for tests and Lyapunov evaluation).
pub fn q_approx_matrix(l: &LaplacianMatrix, h: &DVector<f64>, q: usize) -> DMatrix<f64> {
    let n = l.n();
    let hd = DMatrix::from_diagonal(h);
    let lhl = l.matrix() * hd * l.matrix();
    let step = DMatrix::<f64>::identity(n, n) - lhl;
    let mut acc = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for _ in 0..q {
        term = &term * &step;
        acc += &term;
    }
    acc
}
