//! `dana-lab`: run scenario presets and individual algorithms from the
//! command line. Exit codes: 0 success, 2 when a solver flagged
//! nonconvergence, 3 for configuration errors.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use dana_core::boxqp;
use dana_core::dana::{self, AlphaRule, DanaConfig};
use dana_core::dispatch::{
    normalize_signal, single_stage_run, synthetic_building, synthetic_pv, synthetic_regd,
    two_stage_run, DeviceFleet, DeviceKind, Method, RegulationSignal,
};
use dana_core::nnn::{anneal_run, brute_force, fixed_run, greedy, NnnMode};
use dana_core::problems::InitMode;
use dana_core::SeedSplitter;
use dana_lab::presets::*;
use dana_lab::runner::{run_preset, tracking_summary, RunReport};
use dana_lab::{ExperimentConfig, RunStatus, Scenario};

#[derive(Parser)]
#[command(name = "dana-lab", version, about = "Distributed allocation algorithm lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named scenario preset.
    Preset(PresetArgs),
    /// Discrete approximate-Newton descent on a random instance.
    DanaD(DanaDArgs),
    /// Box-constrained primal-dual flow on the three-node instance.
    DanaC(DanaCArgs),
    /// Saddle-point variant tolerant to infeasible starts and perturbations.
    DanaRobust(DanaRobustArgs),
    /// Nested stochastic cubic-regularized optimization.
    Discrn(DiscrnArgs),
    /// Binary on/off allocation via Hopfield-style Newton dynamics.
    Nnn(NnnArgs),
    /// Per-second tracking over a heterogeneous device fleet.
    Dispatch(DispatchArgs),
}

#[derive(Args)]
struct PresetArgs {
    /// One of: dana_discrete, dana_continuous, dana_robust, discrn,
    /// nnn_quality, nnn_traj2d, dispatch_fullday.
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON or TOML file holding an experiment config (flags override it).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario parameter overrides, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct DanaDArgs {
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Edge count (defaults to 2.5 links per node).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 2)]
    q: usize,
    /// "auto" (the convergence-theorem step), "practical", or a number.
    #[arg(long, default_value = "practical")]
    alpha: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40.0)]
    demand: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DanaCArgs {
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    #[arg(long, default_value_t = 120_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DanaRobustArgs {
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 40)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Spread the reference over one agent instead of uniformly.
    #[arg(long)]
    sparse_target: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiscrnArgs {
    #[arg(long, value_enum, default_value_t = DiscrnMethod::Cubic)]
    method: DiscrnMethod,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    outer_iters: usize,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiscrnMethod {
    Cubic,
    Newton,
    Gradient,
}

#[derive(Args)]
struct NnnArgs {
    #[arg(long, value_enum, default_value_t = NnnCliMode::Binpac)]
    mode: NnnCliMode,
    /// Anneal the temperature ratio instead of holding it fixed.
    #[arg(long)]
    anneal: bool,
    /// Comma list from {greedy, brute}.
    #[arg(long, default_value = "greedy")]
    baselines: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NnnCliMode {
    Binpac,
    Binpad,
}

#[derive(Args)]
struct DispatchArgs {
    /// "synthetic" or "csv:PATH" (one normalized sample per line, or
    /// three comma-separated columns: market, pv, building).
    #[arg(long, default_value = "synthetic")]
    signal: String,
    /// JSON file with `{ "devices": [DeviceSpec, ...] }`.
    #[arg(long)]
    devices: Option<PathBuf>,
    #[arg(long, default_value = "rc,pd,dana")]
    methods: String,
    #[arg(long)]
    two_stage: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2401)]
    ticks: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok(RunStatus::Ok) => ExitCode::SUCCESS,
        Ok(RunStatus::NonConvergenceFlagged) => {
            eprintln!("warning: nonconvergence flagged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<RunStatus> {
    match cli.command {
        Command::Preset(args) => cmd_preset(args),
        Command::DanaD(args) => cmd_dana_d(args),
        Command::DanaC(args) => cmd_dana_c(args),
        Command::DanaRobust(args) => cmd_dana_robust(args),
        Command::Discrn(args) => cmd_discrn(args),
        Command::Nnn(args) => cmd_nnn(args),
        Command::Dispatch(args) => cmd_dispatch(args),
    }
}

fn default_out(tag: &str, seed: u64) -> PathBuf {
    PathBuf::from("runs").join(format!("{tag}-{seed}"))
}

fn print_report(report: &RunReport, out: &std::path::Path) {
    println!("{}", serde_json::to_string_pretty(&report.summary).unwrap_or_default());
    println!("artifacts: {}", out.display());
}

fn cmd_preset(args: PresetArgs) -> anyhow::Result<RunStatus> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            if path.extension().is_some_and(|e| e == "toml") {
                toml::from_str::<ExperimentConfig>(&text)?
            } else {
                serde_json::from_str::<ExperimentConfig>(&text)?
            }
        }
        None => {
            let scenario = Scenario::parse(&args.scenario)
                .ok_or_else(|| anyhow::anyhow!("unknown scenario `{}`", args.scenario))?;
            ExperimentConfig::new(scenario, args.seed, default_out(&args.scenario, args.seed))
        }
    };
    if args.config.is_some() {
        if let Some(scenario) = Scenario::parse(&args.scenario) {
            config.scenario = scenario;
        }
        if args.seed != 0 {
            config.seed = args.seed;
        }
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    let mut sets = BTreeMap::new();
    for kv in &args.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--set expects key=value, got `{kv}`"))?;
        sets.insert(k.to_string(), v.to_string());
    }
    config.overrides.extend(sets);
    let report = run_preset(&config)?;
    print_report(&report, &config.output_dir);
    Ok(report.status)
}

fn cmd_dana_d(args: DanaDArgs) -> anyhow::Result<RunStatus> {
    let out = args.out.unwrap_or_else(|| default_out("dana-d", args.seed));
    let m = args.m.unwrap_or((5 * args.n / 2).max(args.n - 1));
    let alpha = match args.alpha.as_str() {
        "auto" => AlphaRule::TheoremBound,
        "practical" => AlphaRule::Practical,
        other => AlphaRule::Fixed(
            other.parse::<f64>().map_err(|_| anyhow::anyhow!("bad --alpha `{other}`"))?,
        ),
    };
    let preset = DanaDiscretePreset {
        n: args.n,
        edges: m,
        demand: args.demand,
        ..Default::default()
    };
    let problem = preset.build(args.seed)?;
    let (l_star, eps) = dana::prepare_scaled(&problem)?;
    let x0 = dana_core::problems::feasible_initializer(args.n, args.demand, InitMode::Uniform);
    let config = DanaConfig { q: args.q, alpha, max_iters: args.max_iters, ..Default::default() };
    let run = dana::dana_d_run(&problem, &x0, &l_star, eps, &config)?;
    let f_star = boxqp::solve_separable(&problem.costs, problem.demand, None, None)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let f_opt = problem.total_cost(&f_star.x);

    std::fs::create_dir_all(&out)?;
    let mut w = csv::Writer::from_path(out.join("series.csv"))?;
    w.write_record(["iter", "f", "grad_norm", "feas_residual"])?;
    for r in &run.trajectory {
        w.write_record([
            r.iter.to_string(),
            r.f.to_string(),
            r.grad_norm.to_string(),
            r.feas_residual.to_string(),
        ])?;
    }
    w.flush()?;
    let summary = serde_json::json!({
        "n": args.n, "m": m, "q": args.q, "epsilon": eps, "alpha": run.alpha,
        "iters": run.iters, "converged": run.converged,
        "comm_rounds": run.comm_rounds,
        "final_gap": problem.total_cost(&run.x) - f_opt,
    });
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(if run.converged { RunStatus::Ok } else { RunStatus::NonConvergenceFlagged })
}

fn cmd_dana_c(args: DanaCArgs) -> anyhow::Result<RunStatus> {
    let out = args.out.unwrap_or_else(|| default_out("dana-c", args.seed));
    let config = ExperimentConfig::new(Scenario::DanaContinuous, args.seed, out.clone())
        .set("q", args.q)
        .set("h", args.h)
        .set("max_iters", args.max_iters);
    let report = run_preset(&config)?;
    print_report(&report, &out);
    Ok(report.status)
}

fn cmd_dana_robust(args: DanaRobustArgs) -> anyhow::Result<RunStatus> {
    let out = args.out.unwrap_or_else(|| default_out("dana-robust", args.seed));
    let mut config = ExperimentConfig::new(Scenario::DanaRobust, args.seed, out.clone())
        .set("n", args.n)
        .set("edges", args.m)
        .set("q", args.q);
    if args.sparse_target {
        config = config.set("dbar", "sparse");
    }
    let report = run_preset(&config)?;
    print_report(&report, &out);
    Ok(report.status)
}

fn cmd_discrn(args: DiscrnArgs) -> anyhow::Result<RunStatus> {
    let out = args.out.unwrap_or_else(|| default_out("discrn", args.seed));
    let method = match args.method {
        DiscrnMethod::Cubic => "cubic",
        DiscrnMethod::Newton => "newton",
        DiscrnMethod::Gradient => "gradient",
    };
    let mut config = ExperimentConfig::new(Scenario::Discrn, args.seed, out.clone())
        .set("method", method)
        .set("outer_iters", args.outer_iters);
    if let Some(n) = args.n {
        config = config.set("n", n);
    }
    if let Some(edges) = args.edges {
        config = config.set("edges", edges);
    }
    let report = run_preset(&config)?;
    print_report(&report, &out);
    Ok(report.status)
}

fn cmd_nnn(args: NnnArgs) -> anyhow::Result<RunStatus> {
    let out = args.out.unwrap_or_else(|| default_out("nnn", args.seed));
    let preset = NnnQualityPreset { n: args.n, ..Default::default() };
    let edges = args.edges.unwrap_or((3 * args.n).min(args.n * (args.n - 1) / 2));
    let splitter = SeedSplitter::new(args.seed);
    let mut rng = splitter.stream("instance");
    let preset_edges = NnnQualityPreset {
        edges_per_node: (edges / args.n.max(1)).max(1),
        ..preset.clone()
    };
    let problem = preset_edges.build_trial(&mut rng)?;
    let schedule = preset.schedule();
    let mode = match args.mode {
        NnnCliMode::Binpac => NnnMode::Centralized,
        NnnCliMode::Binpad => NnnMode::Distributed,
    };

    std::fs::create_dir_all(&out)?;
    let mut w = csv::Writer::from_path(out.join("series.csv"))?;
    w.write_record(["method", "cost", "runtime_s", "corner"])?;
    let mut write_row = |name: &str, cost: f64, runtime: f64, corner: &[bool]| {
        let bits: String = corner.iter().map(|&b| if b { '1' } else { '0' }).collect();
        w.write_record([name.to_string(), cost.to_string(), runtime.to_string(), bits])
    };

    let started = std::time::Instant::now();
    let mut run_rng = splitter.stream("run");
    let result = if args.anneal {
        anneal_run(&problem, &schedule, mode, &mut run_rng)?
    } else {
        fixed_run(&problem, &schedule, mode, 200.0, &mut run_rng)?
    };
    let main_name = match (args.mode, args.anneal) {
        (NnnCliMode::Binpac, false) => "binpac",
        (NnnCliMode::Binpac, true) => "binpac_da",
        (NnnCliMode::Binpad, false) => "binpad",
        (NnnCliMode::Binpad, true) => "binpad_da",
    };
    write_row(main_name, result.corner_cost, started.elapsed().as_secs_f64(), &result.corner)?;

    for baseline in args.baselines.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let started = std::time::Instant::now();
        match baseline {
            "greedy" => {
                let bits = greedy(&problem);
                let cost = problem.corner_cost(&bits);
                write_row("greedy", cost, started.elapsed().as_secs_f64(), &bits)?;
            }
            "brute" => {
                let (bits, cost) = brute_force(&problem)?;
                write_row("brute", cost, started.elapsed().as_secs_f64(), &bits)?;
            }
            other => anyhow::bail!("unknown baseline `{other}`"),
        }
    }
    w.flush()?;
    let summary = serde_json::json!({
        "mode": main_name,
        "n": args.n,
        "corner_cost": result.corner_cost,
        "interior_distance": result.interior_distance,
    });
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(RunStatus::Ok)
}

fn load_signal_csv(path: &str, capacities: &[f64], beta: f64) -> anyhow::Result<RegulationSignal> {
    let mut reg_d = Vec::new();
    let mut pv = Vec::new();
    let mut building = Vec::new();
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    for record in reader.records() {
        let record = record?;
        let get = |i: usize| -> anyhow::Result<f64> {
            record
                .get(i)
                .map(|s| s.trim().parse::<f64>())
                .transpose()?
                .ok_or_else(|| anyhow::anyhow!("missing column {i}"))
        };
        reg_d.push(get(0)?);
        pv.push(if record.len() > 1 { get(1)? } else { 0.0 });
        building.push(if record.len() > 2 { get(2)? } else { 0.0 });
    }
    Ok(normalize_signal(&reg_d, &pv, &building, capacities, beta)?)
}

fn cmd_dispatch(args: DispatchArgs) -> anyhow::Result<RunStatus> {
    let out = args.out.unwrap_or_else(|| default_out("dispatch", args.seed));
    let fleet = match &args.devices {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<DeviceFleet>(&text)?
        }
        None => DispatchFulldayPreset { ticks: args.ticks, ..Default::default() }.fleet(),
    };
    let signal = if let Some(path) = args.signal.strip_prefix("csv:") {
        load_signal_csv(path, &fleet.capacities(), 0.75)?
    } else if args.signal == "synthetic" {
        let reg_d = synthetic_regd(args.ticks, args.seed);
        let pv = synthetic_pv(args.ticks, args.seed);
        let building = synthetic_building(args.ticks, args.seed);
        normalize_signal(&reg_d, &pv, &building, &fleet.capacities(), 0.75)?
    } else {
        anyhow::bail!("--signal must be `synthetic` or `csv:PATH`");
    };

    std::fs::create_dir_all(&out)?;
    let mut w = csv::Writer::from_path(out.join("series.csv"))?;
    w.write_record([
        "series",
        "t",
        "target",
        "commanded_total",
        "measured_ahu",
        "measured_v1g",
        "measured_v2g",
        "measured_bess",
        "measured_total",
    ])?;
    let mut metrics = serde_json::Map::new();
    let mut runs = Vec::new();
    for name in args.methods.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let method = match name {
            "rc" => Method::Rc,
            "pd" => Method::Pd,
            "dana" => Method::Dana,
            other => anyhow::bail!("unknown method `{other}`"),
        };
        let run = single_stage_run(&signal, &fleet, method, args.seed)?;
        let baseline_total: f64 = fleet.devices.iter().map(|d| d.baseline).sum();
        let mut report = tracking_summary(&run.measured_totals, &run.targets, baseline_total)?;
        report
            .as_object_mut()
            .expect("object summary")
            .insert("solver_mse_normalized".into(), serde_json::json!(run.solver_mse_normalized));
        metrics.insert(name.to_string(), report);
        runs.push((name.to_string(), run));
    }
    if args.two_stage {
        let stage1 = fleet.subset(|d| d.kind == DeviceKind::Ahu);
        let stage2 = fleet.subset(|d| d.kind != DeviceKind::Ahu);
        let run = two_stage_run(&signal, &fleet, &stage1, &stage2, Method::Rc, args.seed)?;
        let baseline_total: f64 = fleet.devices.iter().map(|d| d.baseline).sum();
        let report = tracking_summary(&run.measured_totals, &run.targets, baseline_total)?;
        metrics.insert("two_stage_rc".to_string(), report);
        runs.push(("two_stage_rc".to_string(), run));
    }
    for (name, run) in &runs {
        for r in &run.records {
            w.write_record([
                name.clone(),
                r.t.to_string(),
                r.target.to_string(),
                r.commanded_total.to_string(),
                r.class_measured[0].to_string(),
                r.class_measured[1].to_string(),
                r.class_measured[2].to_string(),
                r.class_measured[3].to_string(),
                r.measured_total.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let summary = serde_json::Value::Object(metrics);
    std::fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(RunStatus::Ok)
}
