//! The per-second allocation pipeline: tick solvers with warm starts,
//! stale-setpoint holding, device simulation, and the two-stage scheme.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::vec::Vec;
use nalgebra::DVector;

use super::consensus::{pd_stable_step, primal_dual_solve, ratio_consensus, rc_closed_form, PdState};
use super::devices::{DeviceFleet, DeviceKind, FleetSimulator};
use super::signal::RegulationSignal;
use super::DispatchError;
use crate::boxqp;
use crate::dana;
use crate::graph::{random_connected_graph, Graph, LaplacianMatrix};
use crate::problems::{AllocationProblem, CostFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Rc,
    Pd,
    Dana,
}

/// Warm-started per-tick solver over a device fleet.
pub struct TickAllocator {
    method: Method,
    graph: Graph,
    l: LaplacianMatrix,
    lower: Vec<f64>,
    upper: Vec<f64>,
    weights: Vec<f64>,
    // primal-dual warm state
    pd: PdState,
    // approximate-Newton warm state
    dana_problem: AllocationProblem,
    dana_l: LaplacianMatrix,
    dana_state: dana::PrimalDualState,
    prev_command: DVector<f64>,
    /// Ticks whose target had to be clamped into the feasible range.
    pub infeasible_ticks: usize,
}

impl TickAllocator {
    /// `graph_seed` fixes the communication topology (a sparse random
    /// connected graph with `2n` edges, or a ring when `n` is tiny).
    pub fn new(fleet: &DeviceFleet, method: Method, graph_seed: u64) -> Result<Self, DispatchError> {
        let n = fleet.n();
        let (lower, upper) = fleet.deviation_bounds();
        let weights = fleet.cost_weights();
        let graph = if n == 1 {
            Graph::new(1, &[])?
        } else {
            let m = (2 * n).min(n * (n - 1) / 2);
            random_connected_graph(n, m, graph_seed)?
        };
        let l = graph.laplacian();
        let costs: Vec<CostFunction> = weights
            .iter()
            .map(|&w| CostFunction::quadratic(w, 0.0).expect("positive weight"))
            .collect();
        let dana_problem = AllocationProblem::new(
            costs,
            0.0,
            Some(lower.clone()),
            Some(upper.clone()),
            graph.clone(),
        )
        .map_err(|e| DispatchError::BadDevice(alloc::format!("{e}")))?;
        let (dana_l, _eps) = if n >= 2 {
            dana::prepare_scaled(&dana_problem)
                .map_err(|e| DispatchError::BadDevice(alloc::format!("{e}")))?
        } else {
            (l.clone(), 0.0)
        };
        Ok(Self {
            method,
            graph,
            l,
            lower,
            upper,
            weights,
            pd: PdState::zeros(n),
            dana_problem,
            dana_l,
            dana_state: dana::PrimalDualState::zeros(n),
            prev_command: DVector::zeros(n),
            infeasible_ticks: 0,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Clamps an infeasible target into the box-achievable range (with a
    /// hair of margin so the boxed problem stays strictly feasible).
    fn clamp_target(&mut self, target: f64) -> f64 {
        let lo: f64 = self.lower.iter().sum();
        let hi: f64 = self.upper.iter().sum();
        let margin = 1e-9 * (hi - lo);
        if target < lo + margin || target > hi - margin {
            self.infeasible_ticks += 1;
            target.clamp(lo + margin, hi - margin)
        } else {
            target
        }
    }

    /// Solves this tick's allocation; returns per-device deviation
    /// setpoints summing to the (possibly clamped) target.
    pub fn allocate(&mut self, target: f64) -> Result<DVector<f64>, DispatchError> {
        let n = self.lower.len();
        let target = self.clamp_target(target);
        let solution = match self.method {
            Method::Rc => {
                if n == 1 {
                    DVector::from_element(1, target)
                } else {
                    ratio_consensus(
                        &self.graph,
                        &self.lower,
                        &self.upper,
                        target,
                        &[0],
                        1e-13,
                        2_000_000,
                    )?
                    .p
                }
            }
            Method::Pd => {
                let centers = alloc::vec![0.0; n];
                let h_step = pd_stable_step(&self.l, &self.weights);
                let (state, _) = primal_dual_solve(
                    self.pd.clone(),
                    &self.weights,
                    &centers,
                    &self.lower,
                    &self.upper,
                    target,
                    &self.l,
                    h_step,
                    30_000,
                    1e-5,
                );
                self.pd = state;
                self.pd.p.clone()
            }
            Method::Dana => {
                // feasible anchor: previous command corrected uniformly
                let correction = (target - self.prev_command.sum()) / n as f64;
                let x0 = &self.prev_command + DVector::from_element(n, correction);
                let config = dana::DanaConfig {
                    q: 2,
                    h: 5e-2,
                    max_iters: 30_000,
                    tol: 1e-6,
                    ..Default::default()
                };
                let mut state = dana::PrimalDualState::new(
                    DVector::zeros(n),
                    self.dana_state.lambda_lower.clone(),
                    self.dana_state.lambda_upper.clone(),
                );
                let mut iters = 0;
                while iters < config.max_iters {
                    let next =
                        dana::dana_c_step(&state, &self.dana_problem, &x0, &self.dana_l, &config)
                            .map_err(|e| DispatchError::BadDevice(alloc::format!("{e}")))?;
                    let update = crate::math::norm_inf(&(&next.z - &state.z))
                        .max(crate::math::norm_inf(&(&next.lambda_lower - &state.lambda_lower)))
                        .max(crate::math::norm_inf(&(&next.lambda_upper - &state.lambda_upper)));
                    state = next;
                    iters += 1;
                    if update < config.tol {
                        break;
                    }
                }
                let x = state.x(&x0, &self.dana_l);
                self.dana_state = state;
                x
            }
        };
        self.prev_command = solution.clone();
        Ok(solution)
    }

    /// Exact reference for the same tick (proportional share for constant
    /// costs, the box-QP optimum otherwise).
    pub fn oracle(&self, target: f64) -> DVector<f64> {
        match self.method {
            Method::Rc => rc_closed_form(&self.lower, &self.upper, target),
            _ => {
                let b = alloc::vec![0.0; self.lower.len()];
                boxqp::solve_box_qp(&self.weights, &b, target, &self.lower, &self.upper)
                    .expect("clamped target is feasible")
                    .x
            }
        }
    }
}

/// One row of the per-tick log.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub t: usize,
    pub target: f64,
    pub commanded_total: f64,
    pub measured_total: f64,
    /// Per-class measured deviations (AHU, V1G, V2G, BESS).
    pub class_measured: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchRun {
    pub records: Vec<TickRecord>,
    /// `Σ‖p − p*‖² / Σ‖p*‖²` over all solver ticks.
    pub solver_mse_normalized: f64,
    /// Worst per-tick `‖p − p*‖²` normalized by the run-mean `‖p*‖²`.
    pub solver_mse_worst_tick: f64,
    pub infeasible_ticks: usize,
    pub measured_totals: Vec<f64>,
    pub targets: Vec<f64>,
}

fn class_index(kind: DeviceKind) -> usize {
    match kind {
        DeviceKind::Ahu => 0,
        DeviceKind::V1g => 1,
        DeviceKind::V2g => 2,
        DeviceKind::Bess => 3,
    }
}

/// Runs the full horizon with one allocator over the whole fleet: solve,
/// hold stale setpoints per device cadence, actuate, measure.
pub fn single_stage_run(
    signal: &RegulationSignal,
    fleet: &DeviceFleet,
    method: Method,
    graph_seed: u64,
) -> Result<DispatchRun, DispatchError> {
    let subset: Vec<usize> = (0..fleet.n()).collect();
    staged_run(signal, fleet, &subset, method, graph_seed, None)
}

/// Two-stage actuation: stage 1 tracks the target, stage 2 tracks the
/// residual left by stage 1's *measured* output at the same tick.
pub fn two_stage_run(
    signal: &RegulationSignal,
    fleet: &DeviceFleet,
    stage1: &[usize],
    stage2: &[usize],
    method: Method,
    graph_seed: u64,
) -> Result<DispatchRun, DispatchError> {
    if stage1.is_empty() {
        // no first stage: the scheme degenerates to a single stage
        return staged_run(signal, fleet, stage2, method, graph_seed.wrapping_add(1), None);
    }
    let first = staged_run(signal, fleet, stage1, method, graph_seed, None)?;
    if stage2.is_empty() {
        return Ok(first);
    }
    let residual: Vec<f64> = (0..signal.len())
        .map(|t| signal.samples[t] - first.measured_totals[t])
        .collect();
    let second = staged_run(
        signal,
        fleet,
        stage2,
        method,
        graph_seed.wrapping_add(1),
        Some(&residual),
    )?;
    // merge the two stages tick by tick
    let mut records = Vec::with_capacity(signal.len());
    let mut measured_totals = Vec::with_capacity(signal.len());
    for t in 0..signal.len() {
        let mut class_measured = [0.0; 4];
        for c in 0..4 {
            class_measured[c] = first.records[t].class_measured[c] + second.records[t].class_measured[c];
        }
        let measured_total = first.records[t].measured_total + second.records[t].measured_total;
        records.push(TickRecord {
            t,
            target: signal.samples[t],
            commanded_total: first.records[t].commanded_total + second.records[t].commanded_total,
            measured_total,
            class_measured,
        });
        measured_totals.push(measured_total);
    }
    Ok(DispatchRun {
        records,
        solver_mse_normalized: first.solver_mse_normalized.max(second.solver_mse_normalized),
        solver_mse_worst_tick: first.solver_mse_worst_tick.max(second.solver_mse_worst_tick),
        infeasible_ticks: first.infeasible_ticks + second.infeasible_ticks,
        measured_totals,
        targets: signal.samples.clone(),
    })
}

fn staged_run(
    signal: &RegulationSignal,
    fleet: &DeviceFleet,
    subset: &[usize],
    method: Method,
    graph_seed: u64,
    override_target: Option<&[f64]>,
) -> Result<DispatchRun, DispatchError> {
    let sub_fleet = DeviceFleet::new(subset.iter().map(|&i| fleet.devices[i].clone()).collect())?;
    let mut allocator = TickAllocator::new(&sub_fleet, method, graph_seed)?;
    let mut simulator = FleetSimulator::new(&sub_fleet);
    let n = sub_fleet.n();
    let mut held = DVector::<f64>::zeros(n);
    let mut records = Vec::with_capacity(signal.len());
    let mut measured_totals = Vec::with_capacity(signal.len());
    let mut err_sq_sum = 0.0;
    let mut oracle_sq_sum = 0.0;
    let mut worst_err_sq: f64 = 0.0;
    for t in 0..signal.len() {
        let target = override_target.map_or(signal.samples[t], |r| r[t]);
        let solved = allocator.allocate(target)?;
        let clamped_target = solved.sum();
        let oracle = allocator.oracle(clamped_target);
        let err_sq = (&solved - &oracle).norm_squared();
        err_sq_sum += err_sq;
        oracle_sq_sum += oracle.norm_squared();
        worst_err_sq = worst_err_sq.max(err_sq);
        // stale-setpoint holding per device cadence
        for i in 0..n {
            let spec = &sub_fleet.devices[i];
            if (t as u32 + spec.update_phase) % spec.update_period == 0 {
                held[i] = solved[i];
            }
        }
        let measured = simulator.step(&held);
        let mut class_measured = [0.0; 4];
        for i in 0..n {
            class_measured[class_index(sub_fleet.devices[i].kind)] += measured[i];
        }
        let measured_total = measured.sum();
        records.push(TickRecord {
            t,
            target,
            commanded_total: held.sum(),
            measured_total,
            class_measured,
        });
        measured_totals.push(measured_total);
    }
    let denom = oracle_sq_sum.max(f64::MIN_POSITIVE);
    Ok(DispatchRun {
        solver_mse_normalized: err_sq_sum / denom,
        solver_mse_worst_tick: worst_err_sq / (denom / signal.len() as f64),
        infeasible_ticks: allocator.infeasible_ticks,
        records,
        measured_totals,
        targets: signal.samples.clone(),
    })
}
