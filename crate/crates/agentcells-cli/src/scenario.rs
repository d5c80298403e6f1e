//! Scenario files: one TOML document describing the workspace decomposition,
//! the agents (neighbor lists, interaction kernels, initial states), the
//! system bounds, the plan parameters, and the run block (horizon, scripted
//! agents, trial counts). Agent ids in the file are 1-based and must appear
//! in order; everything the library sees is converted to 0-based indices.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use agentcells::abstraction::Script;
use agentcells::bounds::{PlanRequest, TheoremKind, ZetaProfile};
use agentcells::decomposition::Decomposition;
use agentcells::dynamics::{KernelSpec, System, SystemBounds};
use agentcells::network::Network;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    workspace: WorkspaceBlock,
    bounds: BoundsBlock,
    plan: PlanBlock,
    #[serde(default)]
    run: RunBlock,
    agents: Vec<AgentBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkspaceBlock {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells_per_axis: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentBlock {
    id: usize,
    #[serde(default)]
    neighbors: Vec<usize>,
    kernel: KernelSpec,
    initial: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsBlock {
    v_max: f64,
    /// Asserted magnitude bound M; mandatory for kernels without an
    /// intrinsic one, must dominate the certified bound otherwise.
    m_bound: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanBlock {
    degree: usize,
    lambda_lo: f64,
    lambda_hi: f64,
    theorem: Option<u8>,
    zeta: Option<ZetaProfile>,
    c_bar: Option<f64>,
    dt: Option<f64>,
    d_max: Option<f64>,
    #[serde(default)]
    allow_lambda_hi_one: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunBlock {
    horizon: Option<f64>,
    steps: Option<usize>,
    #[serde(default)]
    scripts: Vec<ScriptBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptBlock {
    agent: usize,
    kind: String,
    v: Option<Vec<f64>>,
    cells: Option<Vec<usize>>,
}

/// A parsed, validated scenario with library-ready pieces. `scripts` keys
/// are 0-based agent indices.
pub struct Scenario {
    pub system: System,
    pub grid: Decomposition,
    pub bounds: SystemBounds,
    pub request: PlanRequest,
    pub theorem: Option<TheoremKind>,
    pub initial_states: Vec<Vec<f64>>,
    pub initial_cells: Vec<usize>,
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
    pub scripts: HashMap<usize, Script>,
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scenario file {}", path.display()))?;
    let file: ScenarioFile = toml::from_str(&text)
        .with_context(|| format!("parsing scenario file {}", path.display()))?;
    build(file)
}

fn build(file: ScenarioFile) -> Result<Scenario> {
    let dim = file.workspace.lower.len();
    if file.workspace.upper.len() != dim || file.workspace.cells_per_axis.len() != dim {
        bail!(
            "workspace: lower, upper and cells_per_axis must have equal lengths (got {}, {}, {})",
            dim,
            file.workspace.upper.len(),
            file.workspace.cells_per_axis.len()
        );
    }
    let grid = Decomposition::new(
        file.workspace.lower.clone(),
        file.workspace.upper.clone(),
        file.workspace.cells_per_axis.clone(),
    )
    .map_err(|e| anyhow!("workspace: {e}"))?;

    let n = file.agents.len();
    if n == 0 {
        bail!("agents: at least one agent is required");
    }
    let mut neighbor_lists = Vec::with_capacity(n);
    let mut kernels = Vec::with_capacity(n);
    let mut initial_states = Vec::with_capacity(n);
    for (pos, agent) in file.agents.iter().enumerate() {
        let key = format!("agents[{pos}]");
        if agent.id != pos + 1 {
            bail!("{key}.id: expected {} (ids are 1-based, in order), got {}", pos + 1, agent.id);
        }
        let mut list = Vec::with_capacity(agent.neighbors.len());
        for &nb in &agent.neighbors {
            if nb == 0 || nb > n {
                bail!("{key}.neighbors: agent {nb} does not exist (1..={n})");
            }
            list.push(nb - 1);
        }
        neighbor_lists.push(list);
        kernels.push(agent.kernel.clone());
        if agent.initial.len() != dim {
            bail!(
                "{key}.initial: length {} does not match the workspace dimension {dim}",
                agent.initial.len()
            );
        }
        if !grid.contains(&agent.initial) {
            bail!("{key}.initial: {:?} lies outside the workspace", agent.initial);
        }
        initial_states.push(agent.initial.clone());
    }

    let network = Network::new(neighbor_lists).map_err(|e| anyhow!("agents.neighbors: {e}"))?;
    let system =
        System::new(network, kernels, dim).map_err(|e| anyhow!("agents.kernel: {e}"))?;
    let bounds = system
        .derive_bounds(
            file.bounds.v_max,
            file.bounds.m_bound,
            Some((&file.workspace.lower, &file.workspace.upper)),
        )
        .map_err(|e| anyhow!("bounds: {e}"))?;

    let theorem = match file.plan.theorem {
        None => None,
        Some(1) => Some(TheoremKind::T1),
        Some(2) => Some(TheoremKind::T2),
        Some(k) => bail!("plan.theorem: must be 1 or 2, got {k}"),
    };
    let mut request = PlanRequest::new(file.plan.lambda_lo, file.plan.lambda_hi, file.plan.degree);
    request.c_bar = file.plan.c_bar;
    request.dt = file.plan.dt;
    request.d_max = file.plan.d_max;
    request.allow_lambda_hi_one = file.plan.allow_lambda_hi_one;
    request.zeta = file.plan.zeta.unwrap_or(ZetaProfile::Constant);

    let initial_cells: Vec<usize> = initial_states
        .iter()
        .map(|x| grid.locate(x))
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow!("agents.initial: {e}"))?;

    let mut scripts = HashMap::new();
    for (pos, s) in file.run.scripts.iter().enumerate() {
        let key = format!("run.scripts[{pos}]");
        if s.agent == 0 || s.agent > n {
            bail!("{key}.agent: agent {} does not exist (1..={n})", s.agent);
        }
        let agent = s.agent - 1;
        let script = match s.kind.as_str() {
            "constant_input" => {
                let v = s
                    .v
                    .clone()
                    .ok_or_else(|| anyhow!("{key}.v: required for kind = \"constant_input\""))?;
                if v.len() != dim {
                    bail!("{key}.v: length {} does not match dimension {dim}", v.len());
                }
                if norm(&v) > bounds.v_max {
                    bail!("{key}.v: |v| = {} exceeds v_max = {}", norm(&v), bounds.v_max);
                }
                Script::ConstantInput {
                    x0: initial_states[agent].clone(),
                    v,
                }
            }
            "follow_reference" => Script::FollowReference,
            "cell_path" => {
                let cells = s
                    .cells
                    .clone()
                    .ok_or_else(|| anyhow!("{key}.cells: required for kind = \"cell_path\""))?;
                for &c in &cells {
                    if c >= grid.cell_count() {
                        bail!("{key}.cells: cell {c} out of range ({} cells)", grid.cell_count());
                    }
                }
                Script::CellPath(cells)
            }
            other => bail!(
                "{key}.kind: unknown kind {other:?} (constant_input, follow_reference, cell_path)"
            ),
        };
        if scripts.insert(agent, script).is_some() {
            bail!("{key}.agent: agent {} is scripted twice", s.agent);
        }
    }

    Ok(Scenario {
        system,
        grid,
        bounds,
        request,
        theorem,
        initial_states,
        initial_cells,
        horizon: file.run.horizon,
        steps: file.run.steps,
        scripts,
    })
}

impl Scenario {
    /// Steps implied by the run block: explicit `steps`, else the number of
    /// whole dt-intervals fitting in `horizon`.
    pub fn resolve_steps(&self, dt: f64) -> Result<usize> {
        if let Some(steps) = self.steps {
            return Ok(steps);
        }
        let horizon = self
            .horizon
            .ok_or_else(|| anyhow!("run: either steps or horizon is required"))?;
        if !(horizon > 0.0) {
            bail!("run.horizon: must be positive, got {horizon}");
        }
        Ok(((horizon / dt) * (1.0 + 1e-12)).floor() as usize)
    }
}
