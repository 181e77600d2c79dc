//! Frequency-regulation tracking across a heterogeneous device fleet.
//!
//! Every second, a separable box-constrained allocation problem splits the
//! regulation target among devices; three distributed solvers are
//! available (ratio-consensus for constant costs, primal-dual and the
//! approximate-Newton flow for quadratic costs). Device models apply
//! quantization, transport delay, and first-order settling to the
//! commanded setpoints, and tracking quality is scored by normalized RMSE
//! plus the correlation/delay/precision triple.
//!
//! All powers are handled as deviations from each device's baseline, so
//! boxes are centered and the target signal is zero-mean by construction.

mod consensus;
mod devices;
mod metrics;
mod pipeline;
mod signal;

pub use consensus::{
    pd_stable_step, primal_dual_solve, primal_dual_step, ratio_consensus, rc_closed_form, PdState,
    RcResult,
};
pub use devices::{DeviceFleet, DeviceKind, DeviceSpec, FleetSimulator, Quantization};
pub use metrics::{tracking_metrics, TrackingReport};
pub use pipeline::{
    single_stage_run, two_stage_run, DispatchRun, Method, TickAllocator, TickRecord,
};
pub use signal::{
    normalize_signal, preprocess_measurement, synthetic_building, synthetic_pv, synthetic_regd,
    RegulationSignal, STANDARD_TICKS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DispatchError {
    #[error("signal components must share one length")]
    LengthMismatch,
    #[error("normalization needs a nonzero source signal")]
    ZeroSupNorm,
    #[error("target statistics degenerate (zero-variance target)")]
    DegenerateTarget,
    #[error("streams must contain at least two samples")]
    TooShort,
    #[error("ratio consensus did not converge within the round cap")]
    RcNonConvergence,
    #[error("device fleet is empty")]
    EmptyFleet,
    #[error("bad device parameter: {0}")]
    BadDevice(alloc::string::String),
    #[error("{0}")]
    Graph(#[from] crate::graph::GraphError),
}
