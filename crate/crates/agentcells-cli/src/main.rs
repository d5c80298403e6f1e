//! Command-line front end: loads a scenario, builds the discretization plan,
//! and runs the abstraction/verification subcommands. All outputs land in the
//! --out directory and embed the plan they were computed under; reruns with
//! the same scenario and seed produce byte-identical files.

mod scenario;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use agentcells::abstraction::{reach, Script, TransitionSystem};
use agentcells::bounds::{self, DiscretizationPlan, TheoremKind, ZetaProfile};
use agentcells::control::{simulate_network, AgentDrive};
use agentcells::decomposition::Decomposition;
use agentcells::selftest;

use scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "agentcells",
    about = "Certified grid abstractions and hybrid feedback for coupled multi-agent systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the space-time discretization plan and emit it as JSON.
    Plan(PlanArgs),
    /// Certified successor cells of one agent's configuration.
    Post(PostArgs),
    /// Propagate certified frontiers over the run horizon.
    Reach(ReachArgs),
    /// Integrate the closed-loop network over the run horizon.
    Simulate(SimulateArgs),
    /// Sampled verification of one discrete transition.
    Verify(VerifyArgs),
    /// Run the built-in checks over the bundled fixtures.
    Selftest(SelftestArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ZetaArg {
    Constant,
    Corollary,
}

impl From<ZetaArg> for ZetaProfile {
    fn from(z: ZetaArg) -> ZetaProfile {
        match z {
            ZetaArg::Constant => ZetaProfile::Constant,
            ZetaArg::Corollary => ZetaProfile::Corollary,
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Plan under this theorem, overriding the scenario (1 or 2).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    theorem: Option<u8>,
    /// Steering-budget profile, overriding the scenario.
    #[arg(long, value_enum)]
    zeta: Option<ZetaArg>,
    /// Accept lambda_hi = 1 (the whole free-input share goes to planning).
    #[arg(long)]
    allow_lambda_hi_one: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Integrator knots per time step.
    #[arg(long, default_value_t = 64)]
    ode_step_divisor: usize,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: ScenarioArgs,
}

#[derive(Args)]
struct PostArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Agent id (1-based, as in the scenario).
    #[arg(long)]
    agent: usize,
    /// Full-network cell assignment (comma-separated flat indices);
    /// defaults to the cells of the scenario's initial states.
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<usize>>,
}

#[derive(Args)]
struct ReachArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Number of steps, overriding the run block.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Number of steps, overriding the run block.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Agent id (1-based, as in the scenario).
    #[arg(long)]
    agent: usize,
    /// Target cell (flat index); defaults to the reference endpoint's cell.
    #[arg(long)]
    target: Option<usize>,
    /// Full-network cell assignment (comma-separated flat indices);
    /// defaults to the cells of the scenario's initial states.
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<usize>>,
    /// Sampled trials per consistency check.
    #[arg(long, default_value_t = 64)]
    cc_trials: usize,
    /// Disturbance/initial-condition sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SelftestArgs {
    /// Sampling seed for the randomized checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Plan(args) => cmd_plan(args),
        Command::Post(args) => cmd_post(args),
        Command::Reach(args) => cmd_reach(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Selftest(args) => cmd_selftest(args),
    }
}

fn load_and_plan(common: &ScenarioArgs) -> Result<(Scenario, DiscretizationPlan)> {
    let sc = scenario::load(&common.scenario)?;
    let mut req = sc.request.clone();
    if common.allow_lambda_hi_one {
        req.allow_lambda_hi_one = true;
    }
    if let Some(z) = common.zeta {
        req.zeta = z.into();
    }
    let theorem = match common.theorem {
        Some(1) => TheoremKind::T1,
        Some(2) => TheoremKind::T2,
        Some(_) => unreachable!("clap range"),
        None => sc.theorem.ok_or_else(|| {
            anyhow!("plan.theorem: not set in the scenario and no --theorem given")
        })?,
    };
    let closure = sc.system.network.closure_report(req.degree);
    let plan = match theorem {
        TheoremKind::T1 => bounds::plan_theorem1(&sc.bounds, &closure, &req),
        TheoremKind::T2 => bounds::plan_theorem2(&sc.bounds, &closure, &req),
    }
    .map_err(|e| anyhow!("plan: {e}"))?;
    if common.ode_step_divisor == 0 {
        bail!("--ode-step-divisor: must be positive");
    }
    Ok((sc, plan))
}

/// The certificates assume every cell fits in a ball of diameter d_max; the
/// grid's cell diagonal is the tight value.
fn check_grid_diameter(grid: &Decomposition, plan: &DiscretizationPlan) -> Result<()> {
    if grid.d_max() > plan.d_max {
        bail!(
            "workspace.cells_per_axis: cell diagonal {} exceeds the planned diameter bound {}",
            grid.d_max(),
            plan.d_max
        );
    }
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

#[derive(Serialize)]
struct GridSummary {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells_per_axis: Vec<usize>,
    cell_side: Vec<f64>,
    cell_diagonal: f64,
    cell_count: usize,
    diagonal_within_plan: bool,
}

fn grid_summary(grid: &Decomposition, plan: &DiscretizationPlan) -> GridSummary {
    GridSummary {
        lower: grid.lower().to_vec(),
        upper: grid.upper().to_vec(),
        cells_per_axis: grid.cells_per_axis().to_vec(),
        cell_side: grid.cell_side().to_vec(),
        cell_diagonal: grid.d_max(),
        cell_count: grid.cell_count(),
        diagonal_within_plan: grid.d_max() <= plan.d_max,
    }
}

fn cmd_plan(args: PlanArgs) -> Result<()> {
    let (sc, plan) = load_and_plan(&args.common)?;

    #[derive(Serialize)]
    struct PlanOutput {
        plan: DiscretizationPlan,
        grid: GridSummary,
        initial_cells: Vec<usize>,
    }
    let out = PlanOutput {
        grid: grid_summary(&sc.grid, &plan),
        initial_cells: sc.initial_cells.clone(),
        plan,
    };
    let path = write_json(&args.common.out, "plan.json", &out)?;

    let plan = &out.plan;
    let theorem = match plan.theorem {
        TheoremKind::T1 => 1,
        TheoremKind::T2 => 2,
    };
    println!("theorem {theorem} plan for {} agents", sc.system.agent_count());
    match plan.dt_upper {
        Some(up) => println!("  dt = {} (admissible interval (0, {}), open)", plan.dt, up),
        None => println!("  dt = {} (admissible interval unbounded)", plan.dt),
    }
    println!(
        "  d_max = {} (upper bound {}; branches {} and {}, {:?} binds)",
        plan.d_max, plan.d_upper, plan.d_branch_first, plan.d_branch_second, plan.binding_branch
    );
    println!(
        "  a_left = {}, a_right_uniform = {}",
        plan.a_left,
        plan.a_right_uniform
            .map_or_else(|| "per-agent".to_string(), |v| v.to_string())
    );
    println!("  planning radius (constant profile) = {}", plan.r_constant);
    println!(
        "  grid cell diagonal = {} ({} the bound)",
        out.grid.cell_diagonal,
        if out.grid.diagonal_within_plan { "within" } else { "EXCEEDS" }
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn resolve_agent(sc: &Scenario, id: usize) -> Result<usize> {
    let n = sc.system.agent_count();
    if id == 0 || id > n {
        bail!("--agent: agent {id} does not exist (1..={n})");
    }
    Ok(id - 1)
}

fn resolve_cells(sc: &Scenario, cells: &Option<Vec<usize>>) -> Result<Vec<usize>> {
    match cells {
        None => Ok(sc.initial_cells.clone()),
        Some(cells) => {
            let n = sc.system.agent_count();
            if cells.len() != n {
                bail!("--cells: expected {n} entries (one per agent), got {}", cells.len());
            }
            for &c in cells {
                if c >= sc.grid.cell_count() {
                    bail!("--cells: cell {c} out of range ({} cells)", sc.grid.cell_count());
                }
            }
            Ok(cells.clone())
        }
    }
}

fn cmd_post(args: PostArgs) -> Result<()> {
    let (sc, plan) = load_and_plan(&args.common)?;
    check_grid_diameter(&sc.grid, &plan)?;
    let agent = resolve_agent(&sc, args.agent)?;
    let full = resolve_cells(&sc, &args.cells)?;
    let cfg = sc
        .system
        .network
        .project(&full, agent, plan.degree)
        .map_err(|e| anyhow!("configuration: {e}"))?;
    let ts = TransitionSystem::new(&sc.system, &sc.grid, &plan, agent, args.common.ode_step_divisor)?;
    let record = ts.post(&cfg)?;

    #[derive(Serialize)]
    struct PostOutput {
        plan: DiscretizationPlan,
        agent: usize,
        config_cells: Vec<usize>,
        post: agentcells::abstraction::PostRecord,
    }
    let out = PostOutput {
        agent: args.agent,
        config_cells: cfg.cells.clone(),
        post: record,
        plan,
    };
    let path = write_json(&args.common.out, "post.json", &out)?;
    println!(
        "agent {}: {} successor cells (radius {}{})",
        args.agent,
        out.post.cells.len(),
        out.post.radius,
        if out.post.truncated { ", ball truncated by the workspace" } else { "" }
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn script_kind(script: &Script) -> &'static str {
    match script {
        Script::CellPath(_) => "cell_path",
        Script::FollowReference => "follow_reference",
        Script::ConstantInput { .. } => "constant_input",
    }
}

fn cmd_reach(args: ReachArgs) -> Result<()> {
    let (sc, plan) = load_and_plan(&args.common)?;
    check_grid_diameter(&sc.grid, &plan)?;
    let steps = match args.steps {
        Some(s) => s,
        None => sc.resolve_steps(plan.dt)?,
    };
    let frontiers = reach(
        &sc.system,
        &sc.grid,
        &plan,
        &sc.initial_cells,
        steps,
        &sc.scripts,
        args.common.ode_step_divisor,
    )?;

    let scripts: BTreeMap<usize, &'static str> = sc
        .scripts
        .iter()
        .map(|(&agent, s)| (agent + 1, script_kind(s)))
        .collect();

    #[derive(Serialize)]
    struct ReachOutput<'a> {
        plan: &'a DiscretizationPlan,
        grid: GridSummary,
        initial_cells: &'a [usize],
        steps: usize,
        /// 1-based agent id -> script kind.
        scripts: BTreeMap<usize, &'static str>,
        /// One record per step, step 1 first; step 0 is `initial_cells`.
        records: &'a [agentcells::abstraction::ReachFrontier],
    }
    let out = ReachOutput {
        plan: &plan,
        grid: grid_summary(&sc.grid, &plan),
        initial_cells: &sc.initial_cells,
        steps,
        scripts,
        records: &frontiers[1..],
    };
    let path = write_json(&args.common.out, "frontiers.json", &out)?;
    println!("reach: {steps} steps of dt = {}", plan.dt);
    for record in &frontiers[1..] {
        let sizes: Vec<usize> = record.reachable.iter().map(|c| c.len()).collect();
        println!("  step {}: reachable cells per agent {:?}", record.step, sizes);
    }

    // occupancy grids for every agent that moves under the certified
    // abstraction (constant-input agents just translate)
    let n = sc.system.agent_count();
    let mut csv_count = 0usize;
    for agent in 0..n {
        if matches!(sc.scripts.get(&agent), Some(Script::ConstantInput { .. })) {
            continue;
        }
        for record in &frontiers[1..] {
            let name = format!("occ_step{}_agent{}.csv", record.step, agent + 1);
            write_occupancy(
                &args.common.out.join(&name),
                &sc.grid,
                &record.reachable[agent],
            )?;
            csv_count += 1;
        }
    }
    println!("wrote {} and {csv_count} occupancy grids", path.display());
    Ok(())
}

/// One row per grid cell: flat index, per-axis integer coordinates, center
/// coordinates, and a 0/1 membership flag.
fn write_occupancy(path: &Path, grid: &Decomposition, cells: &[usize]) -> Result<()> {
    let dim = grid.dim();
    let mut wtr = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec!["cell".to_string()];
    header.extend((0..dim).map(|k| format!("i{k}")));
    header.extend((0..dim).map(|k| format!("x{k}")));
    header.push("occupied".to_string());
    wtr.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for cell in 0..grid.cell_count() {
        row.clear();
        row.push(cell.to_string());
        for i in grid.axis_coords(cell)? {
            row.push(i.to_string());
        }
        for x in grid.reference_point(cell)? {
            row.push(x.to_string());
        }
        row.push(if cells.binary_search(&cell).is_ok() { "1" } else { "0" }.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct StepSummary {
    step: usize,
    final_cells: Vec<usize>,
    arrival_errors: Vec<Option<f64>>,
    tube_margins: Vec<Option<f64>>,
    control_margins: Vec<f64>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let (sc, plan) = load_and_plan(&args.common)?;
    check_grid_diameter(&sc.grid, &plan)?;
    let steps = match args.steps {
        Some(s) => s,
        None => sc.resolve_steps(plan.dt)?,
    };
    let n = sc.system.agent_count();
    let dim = sc.system.dim;
    let divisor = args.common.ode_step_divisor;

    // transition systems only for cell-path agents (their targets come from
    // the certified Post of the current configuration)
    let mut ts_by_agent: BTreeMap<usize, TransitionSystem> = BTreeMap::new();
    for (&agent, script) in &sc.scripts {
        if matches!(script, Script::CellPath(_)) {
            ts_by_agent.insert(
                agent,
                TransitionSystem::new(&sc.system, &sc.grid, &plan, agent, divisor)?,
            );
        }
    }

    std::fs::create_dir_all(&args.common.out)
        .with_context(|| format!("creating output directory {}", args.common.out.display()))?;
    let mut writers = Vec::with_capacity(n);
    let mut traj_names = Vec::with_capacity(n);
    for agent in 0..n {
        let name = format!("trajectory_agent{}.csv", agent + 1);
        let path = args.common.out.join(&name);
        let mut wtr = csv::Writer::from_path(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|k| format!("x{k}")));
        header.extend((0..dim).map(|k| format!("u{k}")));
        wtr.write_record(&header)?;
        writers.push(wtr);
        traj_names.push(name);
    }

    let mut states = sc.initial_states.clone();
    let mut cells = sc.initial_cells.clone();
    let mut per_step = Vec::with_capacity(steps);
    let mut worst_arrival = 0.0f64;
    let mut min_tube_margin = f64::INFINITY;
    let mut min_control_margin = f64::INFINITY;

    for step in 1..=steps {
        let mut drives = Vec::with_capacity(n);
        for agent in 0..n {
            let drive = match sc.scripts.get(&agent) {
                Some(Script::ConstantInput { v, .. }) => AgentDrive::Input { v: v.clone() },
                Some(Script::CellPath(path_cells)) => {
                    let commanded = *path_cells.get(step - 1).ok_or_else(|| {
                        anyhow!(
                            "run.scripts: agent {} supplies {} cells for {steps} steps",
                            agent + 1,
                            path_cells.len()
                        )
                    })?;
                    let ts = &ts_by_agent[&agent];
                    let cfg = sc.system.network.project(&cells, agent, plan.degree)?;
                    let record = ts.post(&cfg)?;
                    if record.cells.binary_search(&commanded).is_err() {
                        bail!(
                            "run.scripts: agent {}, step {step}: commanded cell {commanded} is not certified reachable",
                            agent + 1
                        );
                    }
                    let target = ts.witness_point(&record.chi_end, record.radius, commanded)?;
                    AgentDrive::Feedback { target: Some(target) }
                }
                Some(Script::FollowReference) | None => AgentDrive::Feedback { target: None },
            };
            drives.push(drive);
        }

        let run = simulate_network(&sc.system, &sc.grid, &plan, &cells, &states, &drives, divisor)?;

        let offset = plan.dt * (step - 1) as f64;
        let start_knot = if step == 1 { 0 } else { 1 };
        for agent in 0..n {
            for k in start_knot..run.times.len() {
                let mut row = vec![(offset + run.times[k]).to_string()];
                row.extend(run.states[agent][k].iter().map(|x| x.to_string()));
                row.extend(run.controls[agent][k].iter().map(|u| u.to_string()));
                writers[agent].write_record(&row)?;
            }
        }

        for agent in 0..n {
            if let Some(err) = run.arrival_errors[agent] {
                worst_arrival = worst_arrival.max(err);
            }
            if let Some(m) = run.tube_margins[agent] {
                min_tube_margin = min_tube_margin.min(m);
            }
            min_control_margin = min_control_margin.min(run.control_margins[agent]);
        }
        per_step.push(StepSummary {
            step,
            final_cells: run.final_cells.clone(),
            arrival_errors: run.arrival_errors.clone(),
            tube_margins: run.tube_margins.clone(),
            control_margins: run.control_margins.clone(),
        });
        states = run.final_states;
        cells = run.final_cells;
    }
    for wtr in &mut writers {
        wtr.flush()?;
    }

    #[derive(Serialize)]
    struct SimulateOutput<'a> {
        plan: &'a DiscretizationPlan,
        initial_cells: &'a [usize],
        steps: usize,
        per_step: Vec<StepSummary>,
        worst_arrival_error: f64,
        min_tube_margin: f64,
        min_control_margin: f64,
        trajectory_files: Vec<String>,
    }
    let out = SimulateOutput {
        plan: &plan,
        initial_cells: &sc.initial_cells,
        steps,
        per_step,
        worst_arrival_error: worst_arrival,
        min_tube_margin,
        min_control_margin,
        trajectory_files: traj_names,
    };
    let path = write_json(&args.common.out, "simulate.json", &out)?;
    println!("simulate: {steps} steps of dt = {}", plan.dt);
    println!(
        "  worst arrival error {}, min tube margin {}, min control margin {}",
        out.worst_arrival_error, out.min_tube_margin, out.min_control_margin
    );
    println!("  final cells {:?}", cells);
    println!("wrote {} and {n} trajectory files", path.display());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let (sc, plan) = load_and_plan(&args.common)?;
    check_grid_diameter(&sc.grid, &plan)?;
    let agent = resolve_agent(&sc, args.agent)?;
    let full = resolve_cells(&sc, &args.cells)?;
    let cfg = sc
        .system
        .network
        .project(&full, agent, plan.degree)
        .map_err(|e| anyhow!("configuration: {e}"))?;
    let ts = TransitionSystem::new(&sc.system, &sc.grid, &plan, agent, args.common.ode_step_divisor)?;
    let target = match args.target {
        Some(t) => t,
        None => {
            let record = ts.post(&cfg)?;
            sc.grid.locate(&record.chi_end)?
        }
    };
    let report = ts.verify_transition(&cfg, target, args.cc_trials, args.seed)?;

    #[derive(Serialize)]
    struct VerifyOutput {
        plan: DiscretizationPlan,
        agent: usize,
        seed: u64,
        report: agentcells::abstraction::TransitionReport,
    }
    let out = VerifyOutput {
        agent: args.agent,
        seed: args.seed,
        report,
        plan,
    };
    let path = write_json(&args.common.out, "verify.json", &out)?;
    let report = &out.report;
    println!(
        "agent {} transition {} -> {} over {} trials: {}",
        args.agent,
        report.source_cell,
        report.target_cell,
        report.consistency.trials,
        if report.passed { "PASS" } else { "FAIL" }
    );
    println!(
        "  worst margins: tube {}, control {}, arrival {}",
        report.consistency.worst_tube_margin,
        report.consistency.worst_control_margin,
        report.consistency.worst_arrival_error
    );
    println!("wrote {}", path.display());
    if !report.passed {
        bail!(
            "verify: sampled consistency failed: {}",
            report.consistency.failures.join("; ")
        );
    }
    Ok(())
}

fn cmd_selftest(args: SelftestArgs) -> Result<()> {
    let results = selftest::run_all(args.seed);
    let mut failures = 0usize;
    for r in &results {
        println!(
            "{} {:<26} {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        if !r.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        bail!("selftest: {failures} of {} checks failed", results.len());
    }
    println!("selftest: all {} checks passed", results.len());
    Ok(())
}
