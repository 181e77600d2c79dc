//! Small numeric helpers shared across modules.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

/// SplitMix64 finalizer; used to derive sub-seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// FNV-1a hash of a byte string.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Standard normal sample via Box-Muller.
pub fn sample_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n−1 normalization).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Sorted eigenvalues of a symmetric matrix (ascending).
pub fn symmetric_eigenvalues_sorted(a: &DMatrix<f64>) -> Vec<f64> {
    let mut vals: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalue NaN"));
    vals
}

/// Dense polynomial in one variable, coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Poly {
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: alloc::vec![c] }
    }

    /// Monic polynomial with the given roots, scaled by `lead`, plus `offset`.
    pub fn from_roots(lead: f64, roots: &[f64], offset: f64) -> Self {
        let mut coeffs = alloc::vec![1.0];
        for &r in roots {
            // multiply by (x - r)
            let mut next = alloc::vec![0.0; coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i] -= r * c;
                next[i + 1] += c;
            }
            coeffs = next;
        }
        for c in coeffs.iter_mut() {
            *c *= lead;
        }
        coeffs[0] += offset;
        Self { coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| i as f64 * c)
                .collect(),
        )
    }

    /// Global minimum over `[lo, hi]` by dense grid scan plus golden-section
    /// refinement around the best cell. Adequate for the low-degree
    /// polynomials in the catalog.
    pub fn min_on_interval(&self, lo: f64, hi: f64, grid: usize) -> (f64, f64) {
        let n = grid.max(8);
        let step = (hi - lo) / n as f64;
        let mut best_x = lo;
        let mut best_v = self.eval(lo);
        for i in 1..=n {
            let x = lo + step * i as f64;
            let v = self.eval(x);
            if v < best_v {
                best_v = v;
                best_x = x;
            }
        }
        let (mut a, mut b) = ((best_x - step).max(lo), (best_x + step).min(hi));
        let inv_phi = 0.618_033_988_749_894_8;
        let (mut c, mut d) = (b - inv_phi * (b - a), a + inv_phi * (b - a));
        let (mut fc, mut fd) = (self.eval(c), self.eval(d));
        for _ in 0..200 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = self.eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = self.eval(d);
            }
            if (b - a).abs() < 1e-14 {
                break;
            }
        }
        let x = 0.5 * (a + b);
        (x, self.eval(x))
    }

    /// Maximum over `[lo, hi]`; same scheme as [`Poly::min_on_interval`].
    pub fn max_on_interval(&self, lo: f64, hi: f64, grid: usize) -> (f64, f64) {
        let neg = Poly::new(self.coeffs.iter().map(|c| -c).collect());
        let (x, v) = neg.min_on_interval(lo, hi, grid);
        (x, -v)
    }
}

/// Bisection for a root of `f` on `[lo, hi]`; requires a sign change.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    debug_assert!(flo * f(hi) <= 0.0, "bisect: no sign change");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo) < tol {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}
