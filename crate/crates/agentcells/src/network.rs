//! Directed interaction graph: path-level neighbor sets, the deterministic
//! total ordering of an agent's m-neighborhood, projections of full cell
//! configurations, and configuration consistency between neighbors.
//!
//! Agent indices are 0-based throughout the library; the CLI layer converts
//! from the 1-based indices used in scenario files.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("agent index {index} out of range for {count} agents")]
    AgentOutOfRange { index: usize, count: usize },
    #[error("agent {0} lists itself as a neighbor")]
    SelfNeighbor(usize),
    #[error("agent {agent} lists neighbor {neighbor} more than once")]
    DuplicateNeighbor { agent: usize, neighbor: usize },
    #[error("full configuration has {got} entries, expected {expected}")]
    ConfigLength { got: usize, expected: usize },
    #[error("configurations have different degrees: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("agent {candidate} is not a neighbor of agent {agent}")]
    NotANeighbor { agent: usize, candidate: usize },
    #[error("cell tuple has {got} entries, expected {expected} for the ordered m-neighborhood")]
    CellTupleLength { got: usize, expected: usize },
}

/// Directed interaction graph. `neighbors[i]` is the tuple of agents whose
/// state enters agent i's dynamics (an edge (l, i) means l is a neighbor of i).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    neighbors: Vec<Vec<usize>>,
}

/// Exact-shortest-path shells around one agent: `levels[k]` holds the agents
/// whose shortest path to the agent (following edges backwards) has length
/// exactly k, with the agent itself never re-appearing at k >= 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSets {
    pub agent: usize,
    pub levels: Vec<Vec<usize>>,
}

impl LevelSets {
    /// Union of levels 0..=m, sorted ascending.
    pub fn closed_members(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.levels.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    pub fn level_of(&self, agent: usize) -> Option<usize> {
        self.levels
            .iter()
            .position(|lvl| lvl.binary_search(&agent).is_ok())
    }
}

/// The total order on an agent's closed m-neighborhood: levels in increasing
/// order, ascending agent index within a level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodOrder {
    pub agent: usize,
    pub degree: usize,
    pub sequence: Vec<usize>,
}

impl NeighborhoodOrder {
    pub fn position_of(&self, agent: usize) -> Option<usize> {
        self.sequence.iter().position(|&a| a == agent)
    }
}

/// An agent's view of a cell configuration: cell indices for every member of
/// its closed m-neighborhood, aligned with [`NeighborhoodOrder::sequence`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCellConfig {
    pub agent: usize,
    pub degree: usize,
    pub cells: Vec<usize>,
}

/// Per-agent closure facts at a fixed degree m: whether the (m+1)-level shell
/// is empty (this selects the reference-trajectory integration case) and the
/// set inclusions the graph lemmas promise, re-checked on this graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentClosure {
    pub agent: usize,
    pub next_level_empty: bool,
    /// Both this agent and every one of its neighbors have empty (m+1)-level
    /// shells, so neighbor reference-trajectory estimates are deviation-free
    /// for consistent configurations.
    pub deviation_free: bool,
    pub closed_members: Vec<usize>,
    /// For every neighbor l: closure(l, m-1) is contained in closure(i, m).
    pub neighbor_closures_nested: bool,
    /// For every member l of closure(i, m): N_l is contained in closure(i, m+1).
    pub member_neighbors_in_extended: bool,
    /// When `next_level_empty`: every member's neighbor set stays inside
    /// closure(i, m), i.e. the subsystem is closed. `None` otherwise.
    pub subsystem_closed: Option<bool>,
    /// When level m itself is empty: neighbor closures up to depth m+2 stay
    /// inside closure(i, m), and i's presence in a neighbor list forces that
    /// agent's (m+1)-shell empty. `None` when level m is nonempty.
    pub stability_under_deepening: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureReport {
    pub degree: usize,
    pub agents: Vec<AgentClosure>,
}

impl ClosureReport {
    /// True iff every agent has an empty (m+1)-shell, the standing hypothesis
    /// of the sharper discretization theorem.
    pub fn all_next_levels_empty(&self) -> bool {
        self.agents.iter().all(|a| a.next_level_empty)
    }
}

impl Network {
    pub fn new(neighbors: Vec<Vec<usize>>) -> Result<Self, NetworkError> {
        let count = neighbors.len();
        for (i, list) in neighbors.iter().enumerate() {
            let mut seen = vec![false; count];
            for &l in list {
                if l >= count {
                    return Err(NetworkError::AgentOutOfRange {
                        index: l,
                        count,
                    });
                }
                if l == i {
                    return Err(NetworkError::SelfNeighbor(i));
                }
                if seen[l] {
                    return Err(NetworkError::DuplicateNeighbor {
                        agent: i,
                        neighbor: l,
                    });
                }
                seen[l] = true;
            }
        }
        Ok(Network { neighbors })
    }

    pub fn agent_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn max_neighbor_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn check_agent(&self, i: usize) -> Result<(), NetworkError> {
        if i >= self.agent_count() {
            Err(NetworkError::AgentOutOfRange {
                index: i,
                count: self.agent_count(),
            })
        } else {
            Ok(())
        }
    }

    /// Breadth-first shells of the reversed edge relation from agent i,
    /// truncated at depth m. Levels are exact shortest-path lengths, so they
    /// are pairwise disjoint, and i is excluded from every level >= 1.
    pub fn level_sets(&self, i: usize, m: usize) -> Result<LevelSets, NetworkError> {
        self.check_agent(i)?;
        let n = self.agent_count();
        let mut visited = vec![false; n];
        visited[i] = true;
        let mut levels = Vec::with_capacity(m + 1);
        let mut frontier = vec![i];
        levels.push(frontier.clone());
        for _ in 0..m {
            let mut next = Vec::new();
            for &a in &frontier {
                for &l in &self.neighbors[a] {
                    if !visited[l] {
                        visited[l] = true;
                        next.push(l);
                    }
                }
            }
            next.sort_unstable();
            levels.push(next.clone());
            frontier = next;
        }
        Ok(LevelSets { agent: i, levels })
    }

    pub fn ordered_mneighborhood(
        &self,
        i: usize,
        m: usize,
    ) -> Result<NeighborhoodOrder, NetworkError> {
        let ls = self.level_sets(i, m)?;
        let sequence: Vec<usize> = ls.levels.into_iter().flatten().collect();
        Ok(NeighborhoodOrder {
            agent: i,
            degree: m,
            sequence,
        })
    }

    /// pr_i: restrict a full length-N cell configuration to agent i's ordered
    /// closed m-neighborhood.
    pub fn project(
        &self,
        full_config: &[usize],
        i: usize,
        m: usize,
    ) -> Result<MCellConfig, NetworkError> {
        if full_config.len() != self.agent_count() {
            return Err(NetworkError::ConfigLength {
                got: full_config.len(),
                expected: self.agent_count(),
            });
        }
        let order = self.ordered_mneighborhood(i, m)?;
        let cells = order.sequence.iter().map(|&a| full_config[a]).collect();
        Ok(MCellConfig {
            agent: i,
            degree: m,
            cells,
        })
    }

    /// Configuration consistency: cfg_other belongs to a neighbor of
    /// cfg_own.agent, and the two assign the same cell to every agent their
    /// closed m-neighborhoods share.
    pub fn is_consistent(
        &self,
        cfg_own: &MCellConfig,
        cfg_other: &MCellConfig,
    ) -> Result<bool, NetworkError> {
        if cfg_own.degree != cfg_other.degree {
            return Err(NetworkError::DegreeMismatch(cfg_own.degree, cfg_other.degree));
        }
        if !self.neighbors[cfg_own.agent].contains(&cfg_other.agent) {
            return Err(NetworkError::NotANeighbor {
                agent: cfg_own.agent,
                candidate: cfg_other.agent,
            });
        }
        let m = cfg_own.degree;
        let ord_own = self.ordered_mneighborhood(cfg_own.agent, m)?;
        let ord_other = self.ordered_mneighborhood(cfg_other.agent, m)?;
        if cfg_own.cells.len() != ord_own.sequence.len() {
            return Err(NetworkError::CellTupleLength {
                got: cfg_own.cells.len(),
                expected: ord_own.sequence.len(),
            });
        }
        if cfg_other.cells.len() != ord_other.sequence.len() {
            return Err(NetworkError::CellTupleLength {
                got: cfg_other.cells.len(),
                expected: ord_other.sequence.len(),
            });
        }
        for (pos, &a) in ord_own.sequence.iter().enumerate() {
            if let Some(pos_other) = ord_other.position_of(a) {
                if cfg_own.cells[pos] != cfg_other.cells[pos_other] {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Closure facts for every agent at degree m; the inclusion flags restate
    /// the graph lemmas and must all verify on any graph.
    pub fn closure_report(&self, m: usize) -> ClosureReport {
        let n = self.agent_count();
        let mut agents = Vec::with_capacity(n);
        for i in 0..n {
            let deep = self.level_sets(i, m + 1).expect("agent index in range");
            let next_level_empty = deep.levels[m + 1].is_empty();
            let closed_members: Vec<usize> =
                deep.levels[..=m].iter().flatten().copied().collect();
            let mut closed_sorted = closed_members.clone();
            closed_sorted.sort_unstable();
            let contains = |set: &[usize], x: usize| set.binary_search(&x).is_ok();

            let extended = deep.closed_members();

            // vacuous at m = 0: the nested-closure claim needs depth m-1
            let neighbor_closures_nested = m == 0
                || self.neighbors[i].iter().all(|&l| {
                    self.level_sets(l, m - 1)
                        .expect("agent index in range")
                        .closed_members()
                        .iter()
                        .all(|&a| contains(&closed_sorted, a))
                });

            let member_neighbors_in_extended = closed_sorted
                .iter()
                .all(|&l| self.neighbors[l].iter().all(|&a| contains(&extended, a)));

            let subsystem_closed = next_level_empty.then(|| {
                closed_sorted
                    .iter()
                    .all(|&l| self.neighbors[l].iter().all(|&a| contains(&closed_sorted, a)))
            });

            let level_m_empty = deep.levels[m].is_empty();
            let stability_under_deepening = level_m_empty.then(|| {
                let deeper_ok = self.neighbors[i].iter().all(|&l| {
                    (0..=2).all(|kappa| {
                        self.level_sets(l, m + kappa)
                            .expect("agent index in range")
                            .closed_members()
                            .iter()
                            .all(|&a| contains(&closed_sorted, a))
                    })
                });
                let listeners_ok = (0..n)
                    .filter(|&l| self.neighbors[l].contains(&i))
                    .all(|l| {
                        self.level_sets(l, m + 1)
                            .expect("agent index in range")
                            .levels[m + 1]
                            .is_empty()
                    });
                deeper_ok && listeners_ok
            });

            agents.push(AgentClosure {
                agent: i,
                next_level_empty,
                deviation_free: false,
                closed_members: closed_sorted,
                neighbor_closures_nested,
                member_neighbors_in_extended,
                subsystem_closed,
                stability_under_deepening,
            });
        }
        let empties: Vec<bool> = agents.iter().map(|a| a.next_level_empty).collect();
        for (i, a) in agents.iter_mut().enumerate() {
            a.deviation_free = empties[i] && self.neighbors[i].iter().all(|&l| empties[l]);
        }
        ClosureReport { degree: m, agents }
    }
}
