//! Interaction kernels and their certified constants: the magnitude bound M,
//! the neighbor-block Lipschitz constant L1, the own-state Lipschitz constant
//! L2, the free-input bound v_max, and the maximum neighbor count.
//!
//! Kernels form a closed registry so every constant the certificates rely on
//! is derived, not asserted (except the magnitude of the linear-diffusive
//! kernel, which is unbounded on all of space and must be supplied together
//! with the workspace on which it is checked).

use crate::linalg::{dist, norm};
use crate::network::Network;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("kernel count {got} does not match agent count {expected}")]
    KernelCount { got: usize, expected: usize },
    #[error("agent {agent}: saturation threshold rho must be positive, got {rho}")]
    NonPositiveRho { agent: usize, rho: f64 },
    #[error("agent {agent}: diffusive weight {weight} is negative")]
    NegativeWeight { agent: usize, weight: f64 },
    #[error("agent {agent}: {got} diffusive weights for {expected} neighbors")]
    WeightCount {
        agent: usize,
        got: usize,
        expected: usize,
    },
    #[error("state dimension must be positive")]
    ZeroDimension,
    #[error("agent {agent}: neighbor block has {got} coordinates, expected {expected}")]
    BlockLength {
        agent: usize,
        got: usize,
        expected: usize,
    },
    #[error("input-magnitude bound violated: v_max = {v_max} must be strictly below the dynamics bound M = {m_bound}")]
    InputBoundNotBelowM { v_max: f64, m_bound: f64 },
    #[error("v_max must be positive, got {0}")]
    NonPositiveVmax(f64),
    #[error("dynamics bound M is not certifiable for {kind} kernels; supply bounds.m_override")]
    MOverrideRequired { kind: &'static str },
    #[error("bounds.m_override = {supplied} is below the certified requirement {required} on the declared workspace")]
    MOverrideTooSmall { supplied: f64, required: f64 },
}

/// sat_rho: identity inside the closed rho-ball, radial retraction onto it
/// outside. Nonexpansive, |sat_rho(x)| = min(|x|, rho).
pub fn sat(x: &[f64], rho: f64) -> Vec<f64> {
    let n = norm(x);
    if n < rho {
        x.to_vec()
    } else {
        x.iter().map(|v| v * rho / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Zero,
    /// f_i = sum_j a_ij (x_j - x_i), weights aligned with the neighbor tuple.
    LinearDiffusive { weights: Vec<f64> },
    /// f_i = sum over neighbors of sat_rho(x_j - x_i).
    SaturatedSum { rho: f64 },
}

impl KernelSpec {
    fn kind_name(&self) -> &'static str {
        match self {
            KernelSpec::Zero => "zero",
            KernelSpec::LinearDiffusive { .. } => "linear_diffusive",
            KernelSpec::SaturatedSum { .. } => "saturated_sum",
        }
    }
}

/// Per-agent certified constants; the advisory per-agent coefficient
/// refinement consumes these. `m_bound` is `None` when the kernel magnitude
/// is not certifiable from the kernel alone (linear diffusive without a
/// declared workspace).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerAgentBounds {
    pub agent: usize,
    pub m_bound: Option<f64>,
    pub l1: f64,
    pub l2: f64,
    pub neighbor_count: usize,
}

/// System-wide constants entering every certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemBounds {
    /// Bound on |f_i| over the relevant domain.
    pub m_bound: f64,
    /// Lipschitz constant of f_i in the stacked neighbor block.
    pub l1: f64,
    /// Lipschitz constant of f_i in the agent's own state.
    pub l2: f64,
    /// Free-input magnitude bound, strictly below m_bound.
    pub v_max: f64,
    /// Maximum neighbor count over agents.
    pub n_max: usize,
}

/// The coupled system: interaction graph plus one kernel per agent, all
/// agents sharing the state dimension `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct System {
    pub network: Network,
    pub kernels: Vec<KernelSpec>,
    pub dim: usize,
}

impl System {
    pub fn new(
        network: Network,
        kernels: Vec<KernelSpec>,
        dim: usize,
    ) -> Result<Self, DynamicsError> {
        if dim == 0 {
            return Err(DynamicsError::ZeroDimension);
        }
        if kernels.len() != network.agent_count() {
            return Err(DynamicsError::KernelCount {
                got: kernels.len(),
                expected: network.agent_count(),
            });
        }
        for (agent, spec) in kernels.iter().enumerate() {
            match spec {
                KernelSpec::Zero => {}
                KernelSpec::SaturatedSum { rho } => {
                    if !(*rho > 0.0) {
                        return Err(DynamicsError::NonPositiveRho { agent, rho: *rho });
                    }
                }
                KernelSpec::LinearDiffusive { weights } => {
                    if weights.len() != network.neighbors(agent).len() {
                        return Err(DynamicsError::WeightCount {
                            agent,
                            got: weights.len(),
                            expected: network.neighbors(agent).len(),
                        });
                    }
                    for &w in weights {
                        if w < 0.0 {
                            return Err(DynamicsError::NegativeWeight { agent, weight: w });
                        }
                    }
                }
            }
        }
        Ok(System {
            network,
            kernels,
            dim,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.network.agent_count()
    }

    /// f_i(x_i, neighbor block); the block stacks neighbor states in the
    /// agent's listed neighbor order.
    pub fn eval_kernel(&self, i: usize, x_i: &[f64], block: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        let mut out = vec![0.0; self.dim];
        self.eval_kernel_into(i, x_i, block, &mut out)?;
        Ok(out)
    }

    pub fn eval_kernel_into(
        &self,
        i: usize,
        x_i: &[f64],
        block: &[f64],
        out: &mut [f64],
    ) -> Result<(), DynamicsError> {
        let k = self.network.neighbors(i).len();
        if block.len() != k * self.dim {
            return Err(DynamicsError::BlockLength {
                agent: i,
                got: block.len(),
                expected: k * self.dim,
            });
        }
        debug_assert_eq!(x_i.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        out.fill(0.0);
        match &self.kernels[i] {
            KernelSpec::Zero => {}
            KernelSpec::SaturatedSum { rho } => {
                let mut diff = vec![0.0; self.dim];
                for j in 0..k {
                    let xj = &block[j * self.dim..(j + 1) * self.dim];
                    for d in 0..self.dim {
                        diff[d] = xj[d] - x_i[d];
                    }
                    let n = norm(&diff);
                    if n < *rho {
                        for d in 0..self.dim {
                            out[d] += diff[d];
                        }
                    } else {
                        for d in 0..self.dim {
                            out[d] += diff[d] * *rho / n;
                        }
                    }
                }
            }
            KernelSpec::LinearDiffusive { weights } => {
                for (j, &a) in weights.iter().enumerate() {
                    let xj = &block[j * self.dim..(j + 1) * self.dim];
                    for d in 0..self.dim {
                        out[d] += a * (xj[d] - x_i[d]);
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-agent certified constants. For a linear-diffusive kernel the exact
    /// supremum of |f_i| over a box workspace is (sum of weights) times the
    /// box diagonal, attained at opposite corners; it is reported only when
    /// the workspace is given.
    pub fn per_agent_bounds(&self, workspace: Option<(&[f64], &[f64])>) -> Vec<PerAgentBounds> {
        let diam = workspace.map(|(lo, hi)| dist(hi, lo));
        (0..self.agent_count())
            .map(|agent| {
                let k = self.network.neighbors(agent).len();
                match &self.kernels[agent] {
                    KernelSpec::Zero => PerAgentBounds {
                        agent,
                        m_bound: Some(0.0),
                        l1: 0.0,
                        l2: 0.0,
                        neighbor_count: k,
                    },
                    KernelSpec::SaturatedSum { rho } => PerAgentBounds {
                        agent,
                        // each summand has norm <= rho; sat is nonexpansive,
                        // so L1 = sqrt(k) over the stacked block and L2 = k
                        m_bound: Some(k as f64 * rho),
                        l1: (k as f64).sqrt(),
                        l2: k as f64,
                        neighbor_count: k,
                    },
                    KernelSpec::LinearDiffusive { weights } => {
                        let row_sum: f64 = weights.iter().sum();
                        let row_norm = norm(weights);
                        PerAgentBounds {
                            agent,
                            m_bound: diam.map(|d| row_sum * d),
                            l1: row_norm,
                            l2: row_sum,
                            neighbor_count: k,
                        }
                    }
                }
            })
            .collect()
    }

    /// Aggregate the per-agent constants into system-wide bounds and validate
    /// the free-input bound against them. `m_override` asserts a magnitude
    /// bound; it must dominate every certifiable per-agent bound, and it is
    /// mandatory when a kernel has no intrinsic bound (linear diffusive
    /// without workspace, or all-zero kernels whose certified M would not
    /// exceed v_max).
    pub fn derive_bounds(
        &self,
        v_max: f64,
        m_override: Option<f64>,
        workspace: Option<(&[f64], &[f64])>,
    ) -> Result<SystemBounds, DynamicsError> {
        if !(v_max > 0.0) {
            return Err(DynamicsError::NonPositiveVmax(v_max));
        }
        let per_agent = self.per_agent_bounds(workspace);
        let mut certified_m: f64 = 0.0;
        for (agent, b) in per_agent.iter().enumerate() {
            // a linear-diffusive kernel has no intrinsic magnitude bound, so
            // the user must assert M; the workspace supremum then validates it
            let intrinsic = !matches!(self.kernels[agent].kind_name(), "linear_diffusive");
            if !intrinsic && m_override.is_none() {
                return Err(DynamicsError::MOverrideRequired {
                    kind: self.kernels[agent].kind_name(),
                });
            }
            if let Some(m) = b.m_bound {
                certified_m = certified_m.max(m);
            }
        }
        let m_bound = match m_override {
            Some(supplied) => {
                if supplied < certified_m {
                    return Err(DynamicsError::MOverrideTooSmall {
                        supplied,
                        required: certified_m,
                    });
                }
                supplied
            }
            None => certified_m,
        };
        if !(v_max < m_bound) {
            return Err(DynamicsError::InputBoundNotBelowM { v_max, m_bound });
        }
        let l1 = per_agent.iter().map(|b| b.l1).fold(0.0, f64::max);
        let l2 = per_agent.iter().map(|b| b.l2).fold(0.0, f64::max);
        Ok(SystemBounds {
            m_bound,
            l1,
            l2,
            v_max,
            n_max: self.network.max_neighbor_count(),
        })
    }
}
