//! Per-agent transition systems over the grid: the certified Post operator
//! (ball-cell intersection around the reference endpoint), sampled
//! verification of individual transitions, and multi-step frontier
//! propagation with scripted agents.
//!
//! Post returns the certified subset of the true transition relation — the
//! cells meeting the closed planning ball. Whether further transitions exist
//! is not decidable at this level and is not guessed.

use crate::bounds::{self, BoundsError, DiscretizationPlan};
use crate::control::{check_consistency, ConsistencyReport, ControlError};
use crate::decomposition::{Decomposition, DecompositionError};
use crate::dynamics::{DynamicsError, KernelSpec, System};
use crate::linalg::dist;
use crate::network::{MCellConfig, NetworkError};
use crate::reftraj::{solve_reference_ivp, ReftrajError};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;
use thiserror::Error;

/// Hard cap on the configuration product a frontier step may enumerate.
pub const CONFIG_PRODUCT_LIMIT: usize = 200_000;

#[derive(Debug, Error, PartialEq)]
pub enum AbstractionError {
    #[error("configuration belongs to agent {got}, this transition system is for agent {expected}")]
    ConfigAgentMismatch { expected: usize, got: usize },
    #[error("configuration degree {got} does not match plan degree {expected}")]
    ConfigDegreeMismatch { expected: usize, got: usize },
    #[error("cell {target} is not in the computed Post set of agent {agent}")]
    TargetNotInPost { target: usize, agent: usize },
    #[error("agent {agent}, step {step}: scripted cell {cell} is not certified reachable from every frontier configuration")]
    ScriptedCellUnreachable {
        agent: usize,
        step: usize,
        cell: usize,
    },
    #[error("agent {agent}: script supplies {got} cells for {expected} steps")]
    ScriptLength {
        agent: usize,
        got: usize,
        expected: usize,
    },
    #[error("agent {agent}: reference-following needs every member frontier to be a single cell, but agent {member} has {count} at step {step}")]
    FollowReferenceNeedsSingletons {
        agent: usize,
        member: usize,
        count: usize,
        step: usize,
    },
    #[error("agent {agent}: constant-input scripts require a zero interaction kernel")]
    InputAgentNeedsZeroKernel { agent: usize },
    #[error("agent {agent}: scripted initial state locates in cell {located}, not the declared initial cell {declared}")]
    InputInitialCellMismatch {
        agent: usize,
        located: usize,
        declared: usize,
    },
    #[error("{got} initial cells for {expected} agents")]
    InitialCellCount { got: usize, expected: usize },
    #[error("agent {agent} index out of range for {count} agents")]
    AgentOutOfRange { agent: usize, count: usize },
    #[error("agent {agent}, step {step}: frontier configuration product has {count} entries, over the {limit} limit")]
    TooManyConfigurations {
        agent: usize,
        step: usize,
        count: usize,
        limit: usize,
    },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Reftraj(#[from] ReftrajError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Certified successor cells of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostRecord {
    /// Cells meeting the closed planning ball, sorted ascending.
    pub cells: Vec<usize>,
    /// Reference endpoint the ball is centered on.
    pub chi_end: Vec<f64>,
    pub radius: f64,
    /// The planning ball sticks out of the decomposed workspace; reachable
    /// points beyond it are not represented by any cell.
    pub truncated: bool,
}

/// Lazily materialized transition system of one agent: states are grid
/// cells, actions are m-cell configurations, and the transition relation is
/// computed per configuration on demand and cached.
pub struct TransitionSystem<'a> {
    pub system: &'a System,
    pub grid: &'a Decomposition,
    pub plan: &'a DiscretizationPlan,
    pub agent: usize,
    pub divisor: usize,
    cache: Mutex<HashMap<Vec<usize>, PostRecord>>,
}

impl<'a> TransitionSystem<'a> {
    pub fn new(
        system: &'a System,
        grid: &'a Decomposition,
        plan: &'a DiscretizationPlan,
        agent: usize,
        divisor: usize,
    ) -> Result<Self, AbstractionError> {
        if agent >= system.agent_count() {
            return Err(AbstractionError::AgentOutOfRange {
                agent,
                count: system.agent_count(),
            });
        }
        Ok(TransitionSystem {
            system,
            grid,
            plan,
            agent,
            divisor,
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn check_cfg(&self, cfg: &MCellConfig) -> Result<(), AbstractionError> {
        if cfg.agent != self.agent {
            return Err(AbstractionError::ConfigAgentMismatch {
                expected: self.agent,
                got: cfg.agent,
            });
        }
        if cfg.degree != self.plan.degree {
            return Err(AbstractionError::ConfigDegreeMismatch {
                expected: self.plan.degree,
                got: cfg.degree,
            });
        }
        Ok(())
    }

    /// Certified successor cells: solve the reference problem for the
    /// configuration and intersect the grid with the planning ball around
    /// the endpoint.
    pub fn post(&self, cfg: &MCellConfig) -> Result<PostRecord, AbstractionError> {
        self.check_cfg(cfg)?;
        if let Some(hit) = self.cache.lock().unwrap().get(&cfg.cells) {
            return Ok(hit.clone());
        }
        let bundle = solve_reference_ivp(self.system, self.grid, cfg, self.plan.dt, self.divisor)?;
        let chi_end = bundle.at_end(self.agent)?.to_vec();
        let radius = bounds::planning_radius(self.plan, self.agent)?;
        let cells = self.grid.cells_intersecting_ball(&chi_end, radius);
        let record = PostRecord {
            cells,
            truncated: self.grid.ball_exits_workspace(&chi_end, radius),
            chi_end,
            radius,
        };
        self.cache
            .lock()
            .unwrap()
            .insert(cfg.cells.clone(), record.clone());
        Ok(record)
    }

    /// Witness target for a transition: the point of the target cell nearest
    /// to the reference endpoint, pulled 1e-9 * radius toward the ball
    /// center so it lies in the open ball. When the endpoint sits outside
    /// the cell the pull moves the witness that far outside the closed box;
    /// the report states the offset.
    pub fn witness_point(&self, chi_end: &[f64], radius: f64, target: usize) -> Result<Vec<f64>, AbstractionError> {
        let (lo, hi) = self.grid.cell_bounds(target)?;
        let clamped: Vec<f64> = chi_end
            .iter()
            .zip(&lo)
            .zip(&hi)
            .map(|((&c, &a), &b)| c.clamp(a, b))
            .collect();
        let gap = dist(&clamped, chi_end);
        if gap == 0.0 {
            return Ok(clamped);
        }
        let pull = (1e-9 * radius).min(gap);
        Ok(clamped
            .iter()
            .zip(chi_end)
            .map(|(&w, &c)| w + pull * (c - w) / gap)
            .collect())
    }

    /// Sampled verification of one transition: synthesize the steering
    /// parameter for the witness point and run the consistency check from
    /// every sampled initial condition and disturbance realization.
    pub fn verify_transition(
        &self,
        cfg: &MCellConfig,
        target: usize,
        trials: usize,
        seed: u64,
    ) -> Result<TransitionReport, AbstractionError> {
        let record = self.post(cfg)?;
        if record.cells.binary_search(&target).is_err() {
            return Err(AbstractionError::TargetNotInPost {
                target,
                agent: self.agent,
            });
        }
        let bundle =
            solve_reference_ivp(self.system, self.grid, cfg, self.plan.dt, self.divisor)?;
        let witness = self.witness_point(&record.chi_end, record.radius, target)?;
        let (lo, hi) = self.grid.cell_bounds(target)?;
        let witness_cell_offset = witness
            .iter()
            .zip(&lo)
            .zip(&hi)
            .map(|((&w, &a), &b)| (w - w.clamp(a, b)).abs())
            .fold(0.0f64, f64::max);
        let source_cell = cfg.cells[0];
        let consistency = check_consistency(
            self.system,
            self.grid,
            self.plan,
            &bundle,
            source_cell,
            &witness,
            trials,
            seed,
            self.divisor,
        )?;
        let passed = consistency.passed;
        Ok(TransitionReport {
            agent: self.agent,
            config_cells: cfg.cells.clone(),
            source_cell,
            target_cell: target,
            witness_distance_to_center: dist(&record.chi_end, &witness),
            witness,
            witness_cell_offset,
            radius: record.radius,
            consistency,
            passed,
        })
    }
}

/// Result of verifying one transition of one agent.
#[derive(Debug, Clone, Serialize)]
pub struct TransitionReport {
    pub agent: usize,
    pub config_cells: Vec<usize>,
    pub source_cell: usize,
    pub target_cell: usize,
    pub witness: Vec<f64>,
    pub witness_distance_to_center: f64,
    /// How far the witness sits outside the closed target cell (at most
    /// 1e-9 * radius, zero when the endpoint is outside the cell interior).
    pub witness_cell_offset: f64,
    pub radius: f64,
    pub consistency: ConsistencyReport,
    pub passed: bool,
}

/// How a scripted agent advances during reach; unscripted agents propagate
/// their full certified frontier.
#[derive(Debug, Clone, PartialEq)]
pub enum Script {
    /// Commanded cell per step; each command must be certified reachable
    /// from every configuration the current frontiers admit.
    CellPath(Vec<usize>),
    /// Steer to the reference endpoint each step (zero steering term);
    /// deterministic, so every member frontier must be a single cell.
    FollowReference,
    /// Constant free input on a zero-kernel agent; advances by the located
    /// cells of the straight-line trajectory.
    ConstantInput { x0: Vec<f64>, v: Vec<f64> },
}

/// Per-step cell sets. `committed` is what downstream agents must assume
/// (scripted agents: the script; free agents: everything certified).
/// `reachable` is the certified Post union regardless of script.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachFrontier {
    pub step: usize,
    pub committed: Vec<Vec<usize>>,
    pub reachable: Vec<Vec<usize>>,
}

fn product_count(sets: &[&BTreeSet<usize>]) -> usize {
    sets.iter()
        .try_fold(1usize, |acc, s| acc.checked_mul(s.len()))
        .unwrap_or(usize::MAX)
}

/// All configurations over the given member cell sets, deduplicated and in
/// deterministic order.
fn config_product(sets: &[&BTreeSet<usize>]) -> Vec<Vec<usize>> {
    let mut out: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut current = Vec::with_capacity(sets.len());
    fn recurse(
        sets: &[&BTreeSet<usize>],
        pos: usize,
        current: &mut Vec<usize>,
        out: &mut BTreeSet<Vec<usize>>,
    ) {
        if pos == sets.len() {
            out.insert(current.clone());
            return;
        }
        for &cell in sets[pos] {
            current.push(cell);
            recurse(sets, pos + 1, current, out);
            current.pop();
        }
    }
    recurse(sets, 0, &mut current, &mut out);
    out.into_iter().collect()
}

/// Propagate per-agent cell frontiers over `steps` synchronized rounds.
/// Free agents take the union of Post over every configuration their
/// m-neighborhood frontiers admit; scripted agents advance per script after
/// validation. Returns steps + 1 frontiers, index 0 being the initial cells.
pub fn reach(
    system: &System,
    grid: &Decomposition,
    plan: &DiscretizationPlan,
    initial_cells: &[usize],
    steps: usize,
    scripts: &HashMap<usize, Script>,
    divisor: usize,
) -> Result<Vec<ReachFrontier>, AbstractionError> {
    let n = system.agent_count();
    if initial_cells.len() != n {
        return Err(AbstractionError::InitialCellCount {
            got: initial_cells.len(),
            expected: n,
        });
    }
    for (&agent, script) in scripts {
        if agent >= n {
            return Err(AbstractionError::AgentOutOfRange { agent, count: n });
        }
        match script {
            Script::CellPath(path) => {
                if path.len() != steps {
                    return Err(AbstractionError::ScriptLength {
                        agent,
                        got: path.len(),
                        expected: steps,
                    });
                }
                for &cell in path {
                    grid.cell_bounds(cell)?;
                }
            }
            Script::FollowReference => {}
            Script::ConstantInput { x0, v } => {
                if !matches!(system.kernels[agent], KernelSpec::Zero) {
                    return Err(AbstractionError::InputAgentNeedsZeroKernel { agent });
                }
                let nv = crate::linalg::norm(v);
                if nv > plan.v_max * (1.0 + 1e-12) {
                    return Err(AbstractionError::Control(ControlError::InputTooLarge {
                        agent,
                        norm: nv,
                        v_max: plan.v_max,
                    }));
                }
                let located = grid.locate(x0)?;
                if located != initial_cells[agent] {
                    return Err(AbstractionError::InputInitialCellMismatch {
                        agent,
                        located,
                        declared: initial_cells[agent],
                    });
                }
            }
        }
    }

    let orders: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            system
                .network
                .ordered_mneighborhood(i, plan.degree)
                .map(|o| o.sequence)
        })
        .collect::<Result<_, _>>()?;
    let systems: Vec<TransitionSystem> = (0..n)
        .map(|i| TransitionSystem::new(system, grid, plan, i, divisor))
        .collect::<Result<_, _>>()?;

    let mut committed: Vec<BTreeSet<usize>> = initial_cells
        .iter()
        .map(|&c| BTreeSet::from([c]))
        .collect();
    let mut frontiers = vec![ReachFrontier {
        step: 0,
        committed: committed.iter().map(|s| s.iter().copied().collect()).collect(),
        reachable: committed.iter().map(|s| s.iter().copied().collect()).collect(),
    }];

    for step in 1..=steps {
        let mut next_committed: Vec<BTreeSet<usize>> = Vec::with_capacity(n);
        let mut reachable: Vec<Vec<usize>> = Vec::with_capacity(n);
        for i in 0..n {
            let member_sets: Vec<&BTreeSet<usize>> =
                orders[i].iter().map(|&a| &committed[a]).collect();
            let count = product_count(&member_sets);
            if count > CONFIG_PRODUCT_LIMIT {
                return Err(AbstractionError::TooManyConfigurations {
                    agent: i,
                    step,
                    count,
                    limit: CONFIG_PRODUCT_LIMIT,
                });
            }
            let configs = config_product(&member_sets);
            let records: Vec<PostRecord> = configs
                .par_iter()
                .map(|cells| {
                    systems[i].post(&MCellConfig {
                        agent: i,
                        degree: plan.degree,
                        cells: cells.clone(),
                    })
                })
                .collect::<Result<_, _>>()?;
            let mut union: BTreeSet<usize> = BTreeSet::new();
            for r in &records {
                union.extend(r.cells.iter().copied());
            }
            reachable.push(union.iter().copied().collect());

            let next: BTreeSet<usize> = match scripts.get(&i) {
                None => union,
                Some(Script::CellPath(path)) => {
                    let cell = path[step - 1];
                    let ok = records
                        .iter()
                        .all(|r| r.cells.binary_search(&cell).is_ok());
                    if !ok {
                        return Err(AbstractionError::ScriptedCellUnreachable {
                            agent: i,
                            step,
                            cell,
                        });
                    }
                    BTreeSet::from([cell])
                }
                Some(Script::FollowReference) => {
                    for (&member, set) in orders[i].iter().zip(&member_sets) {
                        if set.len() != 1 {
                            return Err(AbstractionError::FollowReferenceNeedsSingletons {
                                agent: i,
                                member,
                                count: set.len(),
                                step,
                            });
                        }
                    }
                    // unique configuration: land exactly on the reference
                    // endpoint, whose cell Post always contains
                    let end = &records[0].chi_end;
                    BTreeSet::from([grid.locate(end)?])
                }
                Some(Script::ConstantInput { x0, v }) => {
                    let t = plan.dt * step as f64;
                    let x: Vec<f64> = x0.iter().zip(v).map(|(&a, &b)| a + t * b).collect();
                    BTreeSet::from([grid.locate(&x)?])
                }
            };
            next_committed.push(next);
        }
        committed = next_committed;
        frontiers.push(ReachFrontier {
            step,
            committed: committed.iter().map(|s| s.iter().copied().collect()).collect(),
            reachable,
        });
    }
    Ok(frontiers)
}
