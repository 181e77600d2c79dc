//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measured margins (run with `--nocapture` to see them).
//!
//! Every tolerance is pinned in code; all runs are deterministic.

use dana_core::boxqp;
use dana_core::dana::{
    self, dana_c_run, dana_d_step, linear_rate_decrease_bound, prepare_scaled, theorem_alpha,
    DanaConfig, PrimalDualState,
};
use dana_core::discrn::{eta_bounds, inner_flow_step, inner_stop_check};
use dana_core::dispatch::{
    ratio_consensus, rc_closed_form, single_stage_run, tracking_metrics, two_stage_run,
    DeviceFleet, DeviceKind, DeviceSpec, FleetSimulator, Method,
};
use dana_core::graph::random_connected_graph;
use dana_core::nnn::{
    anneal_run, binpac_step, binpad_step, brute_force, energy, energy_dist, greedy,
    two_dim_instance, AnnealSchedule, BinaryProblem, NnnMode,
};
use dana_core::problems::{
    feasible_initializer, feasible_initializer_with_offsets, AllocationProblem, CostFunction,
    Dist, InitMode, NestedProblem, ShiftedQuadratic,
};
use dana_core::{math, Rng, SeedSplitter};
use dana_lab::presets::{
    DanaContinuousPreset, DanaDiscretePreset, DiscrnPreset, DispatchFulldayPreset,
    NnnTraj2dPreset,
};
use dana_lab::runner::{dana_discrete_iters_to_tol, fullday_signal, plateau_iteration};
use nalgebra::DVector;
use rand::{Rng as _, SeedableRng};

fn pass(number: u32, name: &str, detail: String) {
    println!("ACCEPTANCE {number} ({name}): PASS — {detail}");
}

/// Criterion 1: with the convergence-theorem step size, the objective is
/// nonincreasing on every step and the linear-rate per-step decrease bound
/// holds on every step, across 50 random sinusoidal-quadratic instances.
#[test]
fn criterion_01_dana_d_theorem_compliance() {
    let mut rng = Rng::seed_from_u64(0xACC1);
    let mut steps_checked = 0usize;
    for trial in 0..50 {
        let n = rng.gen_range(4..=20);
        let m = rng.gen_range(n - 1..=(3 * n).min(n * (n - 1) / 2));
        let graph = random_connected_graph(n, m, 10_000 + trial).unwrap();
        let costs: Vec<CostFunction> = (0..n)
            .map(|_| {
                CostFunction::sinusoidal_quadratic(
                    rng.gen_range(2.0..4.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..core::f64::consts::TAU),
                )
                .unwrap()
            })
            .collect();
        let demand = rng.gen_range(-5.0..5.0);
        let problem = AllocationProblem::new(costs, demand, None, None, graph).unwrap();
        let (l_star, eps) = prepare_scaled(&problem).unwrap();
        let q = rng.gen_range(0..=4usize);
        let alpha = theorem_alpha(n, eps, q);
        let x0 = feasible_initializer(n, demand, InitMode::Uniform);
        // reference optimum pinned to the trajectory hyperplane 𝟙ᵀz = 0
        let oracle = boxqp::solve_separable(&problem.costs, demand, None, None).unwrap();
        let z_star = l_star.pinv_apply(&(&oracle.x - &x0), 1e-9);
        let g_of = |z: &DVector<f64>| problem.total_cost(&(&x0 + l_star.apply(z)));

        let mut z = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
        let shift = z.mean();
        z.add_scalar_mut(-shift); // 𝟙ᵀz(0) = 0 to match z*
        let mut g_now = g_of(&z);
        for step in 0..300 {
            let z_next = dana_d_step(&z, &problem, &x0, &l_star, q, alpha);
            let g_next = g_of(&z_next);
            assert!(
                g_next <= g_now + 1e-12 * g_now.abs().max(1.0),
                "trial {trial} step {step}: objective increased"
            );
            let bound = linear_rate_decrease_bound(n, eps, q, (&z - &z_star).norm_squared());
            assert!(
                g_next - g_now <= bound + 1e-10 * g_now.abs().max(1.0),
                "trial {trial} step {step}: per-step decrease bound violated: {} > {}",
                g_next - g_now,
                bound
            );
            z = z_next;
            g_now = g_next;
            steps_checked += 1;
        }
    }
    pass(1, "theorem compliance", format!("50 instances, {steps_checked} steps certified"));
}

/// Criterion 2: on the 100-node study preset, iterations to reach a 1e-6
/// objective gap strictly decrease from q=0 to q=2 to q=4 on >= 8/10 seeds.
#[test]
fn criterion_02_q_speedup() {
    let preset = DanaDiscretePreset::default();
    let mut wins = 0;
    let mut table = Vec::new();
    for seed in 0..10 {
        let result = dana_discrete_iters_to_tol(&preset, seed, 1e-6, 30_000).unwrap();
        let iters: Vec<Option<usize>> = result.iter().map(|&(_, k)| k).collect();
        let strict = matches!(
            (iters[0], iters[1], iters[2]),
            (Some(a), Some(b), Some(c)) if a > b && b > c
        );
        if strict {
            wins += 1;
        }
        table.push(format!("seed {seed}: {iters:?}"));
    }
    assert!(wins >= 8, "strict q-speedup on only {wins}/10 seeds:\n{}", table.join("\n"));
    pass(2, "q speedup", format!("strictly decreasing iterations on {wins}/10 seeds"));
}

/// Criterion 3: the published three-node box-constrained instance converges
/// to the active-set optimum within 1e-4, with complementary slackness
/// residual <= 1e-4 and a nonincreasing Lyapunov value after the transient.
#[test]
fn criterion_03_dana_c_three_node_instance() {
    let preset = DanaContinuousPreset::default();
    let problem = preset.build().unwrap();
    let (l_star, _) = prepare_scaled(&problem).unwrap();
    let x0 = DVector::from_column_slice(&preset.x0);
    let state0 = PrimalDualState::new(
        DVector::zeros(3),
        DVector::from_column_slice(&preset.lambda_lower0),
        DVector::from_column_slice(&preset.lambda_upper0),
    );
    let config = DanaConfig { q: 2, h: 1e-3, max_iters: 120_000, tol: 1e-12, ..Default::default() };
    let reference = dana::vq_reference(&problem, &x0, &l_star, 2, 0.0).unwrap();
    let run = dana_c_run(&problem, &x0, &l_star, state0, &config, Some(&reference), 25).unwrap();

    let x_err = (&run.x - &reference.x_star).norm();
    assert!(x_err <= 1e-4, "|x - x*| = {x_err}");
    let mut comp: f64 = 0.0;
    for i in 0..3 {
        comp = comp.max((run.state.lambda_lower[i] * (preset.lower[i] - run.x[i])).abs());
        comp = comp.max((run.state.lambda_upper[i] * (run.x[i] - preset.upper[i])).abs());
    }
    assert!(comp <= 1e-4, "complementary slackness residual {comp}");
    let vqs: Vec<f64> = run.trajectory.iter().filter_map(|r| r.vq).collect();
    let transient = vqs.len() / 10;
    for w in vqs[transient..].windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "V_Q increased after transient: {} -> {}", w[0], w[1]);
    }
    pass(
        3,
        "three-node flow",
        format!("|x-x*| = {x_err:.2e}, complementarity {comp:.2e}, V_Q monotone"),
    );
}

/// Criterion 4: 200 random quadratic inner problems; whenever the local
/// stopping rule fires the pre-update iterate is within Delta of the exact
/// optimum (zero violations), and the certified contraction factor holds on
/// every round.
#[test]
fn criterion_04_inner_loop_certification() {
    let mut rng = Rng::seed_from_u64(0xACC4);
    let mut fired = 0usize;
    for trial in 0..200 {
        let n = rng.gen_range(2..10);
        let m = rng.gen_range(n - 1..=n * (n - 1) / 2);
        let graph = random_connected_graph(n, m, 20_000 + trial).unwrap();
        let costs: Vec<ShiftedQuadratic> = (0..n)
            .map(|_| {
                ShiftedQuadratic::new(
                    dana_core::math::Poly::constant(rng.gen_range(1.0..4.0)),
                    dana_core::math::Poly::constant(rng.gen_range(-2.0..2.0)),
                    dana_core::math::Poly::constant(0.0),
                )
                .unwrap()
            })
            .collect();
        let problem = NestedProblem::new(
            costs,
            rng.gen_range(2.0..20.0),
            vec![Dist::Uniform { lo: 0.0, hi: 1.5 }; n],
            graph,
        )
        .unwrap();
        let l = problem.graph.laplacian();
        let x = DVector::zeros(n);
        let offsets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.5)).collect();
        let delta = 0.05;
        let omega = problem.omega();
        let bounds = eta_bounds(omega, problem.theta(), l.lambda2(), l.lambda_max());
        let p_star = problem.inner_optimum(&x, &offsets);
        let mut p = feasible_initializer_with_offsets(problem.p_ref, &offsets);
        let mut stopped = false;
        for _ in 0..200_000 {
            let next = inner_flow_step(&p, &x, &problem, &l, bounds.certified);
            let before = (&p - &p_star).norm();
            let after = (&next - &p_star).norm();
            assert!(
                after <= bounds.contraction * before + 1e-12,
                "trial {trial}: contraction factor violated"
            );
            if inner_stop_check(&p, &next, delta, bounds.certified, l.lambda2(), omega, n) {
                assert!(before <= delta, "trial {trial}: stop fired at error {before} > {delta}");
                stopped = true;
                break;
            }
            p = next;
        }
        assert!(stopped, "trial {trial}: stopping rule never fired");
        fired += 1;
    }
    pass(4, "inner-loop certification", format!("{fired}/200 trials certified, 0 violations"));
}

/// Criterion 5: on the published nested-study preset, the cubic method
/// reaches its empirical-objective plateau in at most 0.7x the Newton
/// baseline's iterations and 0.5x the gradient baseline's, on >= 7/10 seeds.
#[test]
fn criterion_05_discrn_vs_baselines() {
    use dana_core::discrn::{
        discrn_run, DgdConfig, DiscrnConfig, EtaRule, InnerSolverConfig, SubmodelKind,
    };
    let preset = DiscrnPreset::default();
    let outer_iters = 40;
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..10 {
        let problem = preset.build(seed).unwrap();
        let mut plateaus = Vec::new();
        for kind in [
            SubmodelKind::Cubic { rho: preset.rho },
            SubmodelKind::Newton { eta_h: preset.eta_h },
            SubmodelKind::Gradient { eta_g: preset.eta_g },
        ] {
            let config = DiscrnConfig {
                kind,
                batch: preset.batch,
                inner: InnerSolverConfig {
                    eta: EtaRule::Prop1Fraction(0.5),
                    delta: preset.delta,
                    max_rounds: 200_000,
                },
                dgd: DgdConfig::default(),
                outer_iters,
                empirical_realizations: preset.empirical_realizations,
                cond_rho: preset.rho,
                consensus_tol: 1e-3,
                ..Default::default()
            };
            let run = discrn_run(&problem, &config, seed).unwrap();
            let series: Vec<f64> = run.records.iter().map(|r| r.empirical_f).collect();
            plateaus.push(plateau_iteration(&series, 0.02));
        }
        let (cubic, newton, gradient) = (plateaus[0], plateaus[1], plateaus[2]);
        let ok = (cubic as f64) <= 0.7 * newton as f64 && (cubic as f64) <= 0.5 * gradient as f64;
        if ok {
            wins += 1;
        }
        lines.push(format!(
            "seed {seed}: cubic {cubic}, newton {newton}, gradient {gradient}{}",
            if ok { "" } else { "  <-- miss" }
        ));
    }
    assert!(wins >= 7, "cubic speedup on only {wins}/10 seeds:\n{}", lines.join("\n"));
    pass(5, "nested-study speedup", format!("cubic fastest on {wins}/10 seeds"));
}

/// Criterion 6: on the published two-agent binary instance, brute force
/// returns ((1,0), 2.08) and fifteen-step annealed runs of both dynamics
/// end within 1e-3 of that corner on >= 9/10 seeds.
#[test]
fn criterion_06_binary_two_dim_instance() {
    let problem = two_dim_instance();
    let (bits, cost) = brute_force(&problem).unwrap();
    assert_eq!(bits, vec![true, false]);
    assert!((cost - 2.08).abs() < 1e-10, "brute-force cost {cost}");

    let schedule = AnnealSchedule { steps: NnnTraj2dPreset::default().learning_steps, ..Default::default() };
    let mut hits = [0usize; 2];
    for (mi, mode) in [NnnMode::Centralized, NnnMode::Distributed].into_iter().enumerate() {
        for seed in 0..10 {
            let mut rng = Rng::seed_from_u64(600 + seed);
            let result = anneal_run(&problem, &schedule, mode, &mut rng).unwrap();
            if result.corner == vec![true, false] && result.interior_distance <= 1e-3 {
                hits[mi] += 1;
            }
        }
    }
    assert!(hits[0] >= 9, "centralized reached the corner on {}/10 seeds", hits[0]);
    assert!(hits[1] >= 9, "distributed reached the corner on {}/10 seeds", hits[1]);
    pass(
        6,
        "two-agent binary instance",
        format!("brute ((1,0), 2.08); corner hits {}/10 and {}/10", hits[0], hits[1]),
    );
}

/// Criterion 7: invariants over 100 seeded binary runs (n <= 30): energy
/// monotone across accepted steps, iterates strictly interior, auxiliary
/// sum conserved to 1e-12, and greedy never beats brute force at n <= 12.
#[test]
fn criterion_07_nnn_invariant_suite() {
    let mut rng = Rng::seed_from_u64(0xACC7);
    let mut accepted_steps = 0usize;
    for trial in 0..100u64 {
        let n = rng.gen_range(3..=30);
        let m = (2 * n).min(n * (n - 1) / 2);
        let graph = random_connected_graph(n, m, 30_000 + trial).unwrap();
        let p_vals: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..10.0)).collect();
        let norm_sq: f64 = p_vals.iter().map(|v| v * v).sum();
        let problem = BinaryProblem::new(
            (0..n).map(|_| rng.gen_range(0.5..8.0)).collect(),
            p_vals,
            rng.gen_range(1.0..20.0),
            1.0,
            vec![-1.05 * (norm_sq + 40.0); n],
            Some(graph),
        )
        .unwrap();
        let (t, tau, m_trunc) = (1.0, 0.4, 0.1);
        let distributed = trial % 2 == 1;
        let mut x = DVector::from_fn(n, |_, _| rng.gen_range(0.35..0.65));
        let mut y = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
        let kappa = y.sum();
        for _ in 0..60 {
            if distributed {
                let e0 = energy_dist(&x, &y, &problem, t, tau).unwrap();
                let out =
                    binpad_step(&mut x, &mut y, &problem, t, tau, m_trunc, 1.0 / n as f64, 1e-3, 20)
                        .unwrap();
                if out.descended {
                    accepted_steps += 1;
                    assert!(energy_dist(&x, &y, &problem, t, tau).unwrap() <= e0 + 1e-12);
                }
                assert!(
                    (y.sum() - kappa).abs() <= 1e-12 * kappa.abs().max(1.0),
                    "trial {trial}: auxiliary sum drifted"
                );
            } else {
                let e0 = energy(&x, &problem, t, tau);
                let out = binpac_step(&mut x, &problem, t, tau, m_trunc, 1e-3, 20);
                if out.descended {
                    accepted_steps += 1;
                    assert!(energy(&x, &problem, t, tau) <= e0 + 1e-12);
                }
            }
            assert!(
                x.iter().all(|&v| v > 0.0 && v < 1.0),
                "trial {trial}: iterate left the open hypercube"
            );
        }
    }
    // greedy vs brute on every small instance
    let mut compared = 0usize;
    for trial in 0..40u64 {
        let n = rng.gen_range(2..=12);
        let p_vals: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..50.0)).collect();
        let c_vals: Vec<f64> = p_vals.iter().map(|&p| p.powf(rng.gen_range(1.2..2.0))).collect();
        let norm_sq: f64 = p_vals.iter().map(|v| v * v).sum();
        let p_r: f64 = p_vals.iter().sum::<f64>() * rng.gen_range(0.2..0.8);
        let problem = BinaryProblem::new(
            c_vals,
            p_vals,
            p_r,
            1.0,
            vec![-1.05 * (norm_sq + 40.0); n],
            None,
        )
        .unwrap();
        let (_, best) = brute_force(&problem).unwrap();
        let greedy_cost = problem.corner_cost(&greedy(&problem));
        assert!(greedy_cost >= best - 1e-9, "trial {trial}: greedy beat brute force");
        compared += 1;
    }
    pass(
        7,
        "binary invariant suite",
        format!("100 runs, {accepted_steps} accepted steps monotone; greedy>=brute on {compared} instances"),
    );
}

/// Criterion 8: ratio consensus matches the closed-form share to 1e-8 and
/// conserves the reference sum to 1e-9 on 50 random connected graphs.
#[test]
fn criterion_08_ratio_consensus_exactness() {
    let mut rng = Rng::seed_from_u64(0xACC8);
    let mut worst_gap: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for trial in 0..50 {
        let n = rng.gen_range(3..20);
        let m = rng.gen_range(n - 1..=n * (n - 1) / 2);
        let graph = random_connected_graph(n, m, 40_000 + trial).unwrap();
        let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..0.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|&lo| lo + rng.gen_range(0.5..4.0)).collect();
        let span: f64 = lower.iter().zip(&upper).map(|(&lo, &hi)| hi - lo).sum();
        let p_ref = lower.iter().sum::<f64>() + rng.gen_range(0.05..0.95) * span;
        let informed = vec![rng.gen_range(0..n)];
        let result =
            ratio_consensus(&graph, &lower, &upper, p_ref, &informed, 1e-13, 2_000_000).unwrap();
        let direct = rc_closed_form(&lower, &upper, p_ref);
        worst_gap = worst_gap.max((&result.p - &direct).norm());
        worst_sum = worst_sum.max((result.p.sum() - p_ref).abs());
    }
    assert!(worst_gap <= 1e-8, "worst closed-form gap {worst_gap}");
    assert!(worst_sum <= 1e-9, "worst sum residual {worst_sum}");
    pass(
        8,
        "ratio-consensus exactness",
        format!("worst gap {worst_gap:.2e}, worst sum residual {worst_sum:.2e}"),
    );
}

/// Criterion 9: tracking metrics are exact on identical streams, recover an
/// injected 105 s device-class delay within one second, and match the
/// three-sample hand computation. (The published hardware scores need the
/// recorded streams, which are not shipped.)
#[test]
fn criterion_09_pjm_metric_fidelity() {
    // identity
    let x: Vec<f64> = (0..1200).map(|t| 4.0 + (t as f64 / 40.0).sin()).collect();
    let r = tracking_metrics(&x, &x, 300).unwrap();
    assert_eq!(r.rmse, 0.0);
    assert_eq!(r.delay, 0);
    assert_eq!(r.performance_score, 1.0);

    // delay recovery through the device simulator with the 105 s class
    let mut spec = DeviceSpec::ahu();
    spec.update_period = 1;
    let fleet = DeviceFleet::new(vec![spec; 30]).unwrap();
    let mut sim = FleetSimulator::new(&fleet);
    let ticks = 1500;
    let signal = dana_core::dispatch::synthetic_regd(ticks, 77);
    let mut target = Vec::with_capacity(ticks);
    let mut measured = Vec::with_capacity(ticks);
    for t in 0..ticks {
        let total = 24.0 * signal[t];
        let per_device = DVector::from_element(30, total / 30.0);
        let out = sim.step(&per_device);
        target.push(total);
        measured.push(out.sum());
    }
    let r = tracking_metrics(&measured, &target, 300).unwrap();
    assert!(
        (r.delay as i64 - 105).abs() <= 1,
        "recovered delay {} s, expected 105 +/- 1",
        r.delay
    );

    // three-sample hand computation: provided = 2 * target
    let target3 = [1.0, 2.0, 3.0];
    let provided3 = [2.0, 4.0, 6.0];
    let r3 = tracking_metrics(&provided3, &target3, 0).unwrap();
    assert!((r3.rmse - 1.0).abs() < 1e-12);
    assert!((r3.correlation_score - 1.0).abs() < 1e-12);
    assert!((r3.delay_score - 1.0).abs() < 1e-12);
    assert!((r3.precision_score - 0.0).abs() < 1e-12);
    assert!((r3.performance_score - 2.0 / 3.0).abs() < 1e-12);
    pass(
        9,
        "tracking-metric fidelity",
        format!("identity exact; delay recovered {} s; hand computation matches", r.delay),
    );
}

/// Criterion 10: full-horizon tick-solver accuracy (normalized MSE vs the
/// exact oracle <= 1e-5 for PD and the Newton flow, floating-point zero for
/// ratio consensus) and the two-stage scheme at least ties single-stage
/// tracking on >= 18/20 paired seeds.
#[test]
fn criterion_10_dispatch_tick_accuracy_and_two_stage() {
    let preset = DispatchFulldayPreset::default();
    let fleet = preset.fleet();
    let signal = fullday_signal(&preset, 1).unwrap();

    let rc = single_stage_run(&signal, &fleet, Method::Rc, 1).unwrap();
    assert!(
        rc.solver_mse_normalized <= 1e-18,
        "ratio-consensus mse {} not at floating-point zero",
        rc.solver_mse_normalized
    );
    let pd = single_stage_run(&signal, &fleet, Method::Pd, 1).unwrap();
    assert!(pd.solver_mse_normalized <= 1e-5, "pd mse {}", pd.solver_mse_normalized);
    let dn = single_stage_run(&signal, &fleet, Method::Dana, 1).unwrap();
    assert!(dn.solver_mse_normalized <= 1e-5, "dana mse {}", dn.solver_mse_normalized);

    let stage1 = fleet.subset(|d| d.kind == DeviceKind::Ahu);
    let stage2 = fleet.subset(|d| d.kind != DeviceKind::Ahu);
    let mut improved = 0;
    let mut lines = Vec::new();
    for seed in 0..20 {
        let signal = fullday_signal(&preset, seed).unwrap();
        let single = single_stage_run(&signal, &fleet, Method::Rc, seed).unwrap();
        let double = two_stage_run(&signal, &fleet, &stage1, &stage2, Method::Rc, seed).unwrap();
        let rmse_single = tracking_metrics(&single.measured_totals, &single.targets, 300)
            .unwrap()
            .rmse;
        let rmse_double = tracking_metrics(&double.measured_totals, &double.targets, 300)
            .unwrap()
            .rmse;
        if rmse_double <= rmse_single {
            improved += 1;
        }
        lines.push(format!("seed {seed}: single {rmse_single:.4}, two-stage {rmse_double:.4}"));
    }
    assert!(
        improved >= 18,
        "two-stage no worse on only {improved}/20 seeds:\n{}",
        lines.join("\n")
    );
    pass(
        10,
        "dispatch tick accuracy",
        format!(
            "rc mse {:.1e}, pd mse {:.1e}, newton-flow mse {:.1e}; two-stage no worse on {improved}/20 seeds",
            rc.solver_mse_normalized, pd.solver_mse_normalized, dn.solver_mse_normalized
        ),
    );
}

/// The seed-splitter keeps labeled streams stable; used by every criterion
/// above implicitly, pinned here explicitly.
#[test]
fn seed_streams_are_independent_and_stable() {
    let s = SeedSplitter::new(42);
    let a: Vec<u64> = (0..4).map(|_| s.stream("graph").gen()).collect();
    let b: Vec<u64> = (0..4).map(|_| s.stream("graph").gen()).collect();
    assert_eq!(a, b);
    let c: Vec<u64> = (0..4).map(|_| s.stream("costs").gen()).collect();
    assert_ne!(a, c);
    let _ = math::splitmix64(1);
}
