//! Distributed Newton-like algorithms for separable resource allocation
//! over sparse communication graphs.
//!
//! The crate covers four algorithm families that all operate on problems of
//! the form `min Σᵢ fᵢ(xᵢ) s.t. Σᵢ xᵢ = d` (plus per-agent box or binary
//! constraints), where agents may only exchange values with graph neighbors:
//!
//! - [`dana`]: discrete- and continuous-time distributed approximate Newton
//!   descent built on a truncated Neumann series of the reduced Hessian,
//!   plus a robust saddle-point variant.
//! - [`discrn`]: nested stochastic optimization where batches of inner
//!   allocation problems feed a cubic-regularized Newton outer update.
//! - [`nnn`]: binary on/off allocation via Hopfield-style Newton dynamics
//!   with a PT-inverse weighting and deterministic annealing.
//! - [`dispatch`]: per-second setpoint tracking across heterogeneous device
//!   fleets using ratio-consensus, primal-dual, and DANA tick solvers.
//!
//! Supporting modules: [`graph`] (Laplacians, spectra, the reduced-Hessian
//! projection), [`problems`] (the cost-function catalog), [`weight_design`]
//! (the ε convergence metric and spectral post-scaling), [`boxqp`] (an exact
//! box-constrained QP solver used as reference oracle), and [`simnet`] (a
//! synchronous-round message-passing simulator that checks communication
//! locality).
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable default
//! features to drop `std`. Everything is deterministic given a seed.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod boxqp;
pub mod dana;
pub mod discrn;
pub mod dispatch;
pub mod graph;
pub mod math;
pub mod nnn;
pub mod problems;
pub mod simnet;
pub mod weight_design;

pub use graph::{Graph, GraphError, LaplacianMatrix, ProjectionMatrix};
pub use problems::{AllocationProblem, CostFunction, HessianBounds, NestedProblem};

/// Deterministic RNG used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Derives independent deterministic RNG streams from a run seed.
///
/// Sub-streams are labeled so that parameter sweeps do not perturb draws of
/// unrelated subsystems (e.g. changing a cost parameter does not change the
/// generated graph).
#[derive(Debug, Clone, Copy)]
pub struct SeedSplitter {
    seed: u64,
}

impl SeedSplitter {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// RNG for the sub-stream named `label`.
    pub fn stream(&self, label: &str) -> Rng {
        use rand::SeedableRng;
        Rng::seed_from_u64(math::splitmix64(self.seed ^ math::fnv1a(label.as_bytes())))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}
