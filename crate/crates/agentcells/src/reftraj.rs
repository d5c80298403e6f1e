//! Reference trajectories: each agent integrates an initial-value problem
//! over its closed m-neighborhood, started from the cell reference points of
//! a configuration. When the (m+1)-level shell is empty the neighborhood is a
//! closed subsystem and integrates fully coupled; otherwise only the closed
//! (m-1)-neighborhood evolves and the level-m members stay frozen at their
//! reference points.
//!
//! Integration is classical fixed-step fourth-order Runge-Kutta; knot
//! derivatives are stored so estimates between knots come from cubic Hermite
//! interpolation. Knot times are computed as dt * k / divisor, making the
//! endpoint exact.

use crate::decomposition::{Decomposition, DecompositionError};
use crate::dynamics::{DynamicsError, System};
use crate::linalg::axpy;
use crate::network::{MCellConfig, NetworkError};
use thiserror::Error;

pub const DEFAULT_DIVISOR: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum ReftrajError {
    #[error("reference trajectories need degree >= 1, got 0")]
    DegreeZero,
    #[error("configuration has {got} cells, the closed m-neighborhood has {expected} members")]
    CellTupleLength { got: usize, expected: usize },
    #[error("time step must be positive and finite, got {0}")]
    NonPositiveDt(f64),
    #[error("step divisor must be positive")]
    ZeroDivisor,
    #[error("agent {member} is not a member of agent {agent}'s bundle")]
    MemberNotInBundle { member: usize, agent: usize },
    #[error("time {t} outside the bundle interval [0, {hi}]")]
    TimeOutOfRange { t: f64, hi: f64 },
    #[error("knot index {index} out of range for {count} knots")]
    KnotOutOfRange { index: usize, count: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Which initial-value problem the bundle solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvpCase {
    /// Empty (m+1)-level shell: the closed m-neighborhood is a closed
    /// subsystem and every member evolves.
    FullCoupled,
    /// Nonempty (m+1)-level shell: members at level m stay frozen at their
    /// cell reference points; the closed (m-1)-neighborhood evolves against
    /// them.
    FrozenLevelM,
}

/// Solved reference trajectories for every member of one agent's closed
/// m-neighborhood over [0, dt].
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBundle {
    pub agent: usize,
    pub degree: usize,
    pub case: IvpCase,
    /// Ordered closed m-neighborhood (levels ascending, index ascending
    /// within a level), aligned with the configuration's cell tuple.
    pub members: Vec<usize>,
    /// Aligned with `members`; frozen members have constant trajectories.
    pub frozen: Vec<bool>,
    pub dt: f64,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    dim: usize,
}

struct Subsystem<'a> {
    system: &'a System,
    members: &'a [usize],
    frozen: &'a [bool],
    /// Stacked-vector position of each agent present in the bundle.
    position: Vec<Option<usize>>,
}

impl Subsystem<'_> {
    /// Stacked vector field: each evolving member's kernel on its own block,
    /// with neighbor blocks gathered from the stacked state; frozen members
    /// get zero derivative. Every evolving member's neighbors are bundle
    /// members by construction, so the gather cannot miss.
    fn deriv(&self, y: &[f64], out: &mut [f64], block: &mut Vec<f64>) {
        let dim = self.system.dim;
        out.fill(0.0);
        for (p, &member) in self.members.iter().enumerate() {
            if self.frozen[p] {
                continue;
            }
            let neighbors = self.system.network.neighbors(member);
            block.clear();
            for &l in neighbors {
                let q = self.position[l].expect("evolving member's neighbor is in the bundle");
                block.extend_from_slice(&y[q * dim..(q + 1) * dim]);
            }
            let own = &y[p * dim..(p + 1) * dim];
            self.system
                .eval_kernel_into(member, own, block, &mut out[p * dim..(p + 1) * dim])
                .expect("gathered block has the declared length");
        }
    }
}

/// Solve the reference initial-value problem for the configuration's agent
/// at its degree, over one time step.
pub fn solve_reference_ivp(
    system: &System,
    grid: &Decomposition,
    cfg: &MCellConfig,
    dt: f64,
    divisor: usize,
) -> Result<ReferenceBundle, ReftrajError> {
    let (i, m) = (cfg.agent, cfg.degree);
    if m == 0 {
        return Err(ReftrajError::DegreeZero);
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ReftrajError::NonPositiveDt(dt));
    }
    if divisor == 0 {
        return Err(ReftrajError::ZeroDivisor);
    }
    let ls = system.network.level_sets(i, m + 1)?;
    let members: Vec<usize> = ls.levels[..=m].iter().flatten().copied().collect();
    if cfg.cells.len() != members.len() {
        return Err(ReftrajError::CellTupleLength {
            got: cfg.cells.len(),
            expected: members.len(),
        });
    }
    let next_empty = ls.levels[m + 1].is_empty();
    let case = if next_empty {
        IvpCase::FullCoupled
    } else {
        IvpCase::FrozenLevelM
    };
    let frozen: Vec<bool> = members
        .iter()
        .map(|&a| !next_empty && ls.levels[m].binary_search(&a).is_ok())
        .collect();

    let dim = system.dim;
    let mut position = vec![None; system.agent_count()];
    for (p, &a) in members.iter().enumerate() {
        position[a] = Some(p);
    }
    let sub = Subsystem {
        system,
        members: &members,
        frozen: &frozen,
        position,
    };

    let n_state = members.len() * dim;
    let mut y = Vec::with_capacity(n_state);
    for &cell in &cfg.cells {
        y.extend(grid.reference_point(cell)?);
    }

    let h = dt / divisor as f64;
    let mut k1 = vec![0.0; n_state];
    let mut k2 = vec![0.0; n_state];
    let mut k3 = vec![0.0; n_state];
    let mut k4 = vec![0.0; n_state];
    let mut stage = vec![0.0; n_state];
    let mut block = Vec::new();
    let mut states = Vec::with_capacity(divisor + 1);
    let mut derivs = Vec::with_capacity(divisor + 1);

    for _ in 0..divisor {
        sub.deriv(&y, &mut k1, &mut block);
        states.push(y.clone());
        derivs.push(k1.clone());

        stage.copy_from_slice(&y);
        axpy(&mut stage, 0.5 * h, &k1);
        sub.deriv(&stage, &mut k2, &mut block);

        stage.copy_from_slice(&y);
        axpy(&mut stage, 0.5 * h, &k2);
        sub.deriv(&stage, &mut k3, &mut block);

        stage.copy_from_slice(&y);
        axpy(&mut stage, h, &k3);
        sub.deriv(&stage, &mut k4, &mut block);

        for p in 0..n_state {
            y[p] += h / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
        }
    }
    sub.deriv(&y, &mut k1, &mut block);
    states.push(y);
    derivs.push(k1.clone());

    let times = (0..=divisor)
        .map(|k| dt * k as f64 / divisor as f64)
        .collect();

    Ok(ReferenceBundle {
        agent: i,
        degree: m,
        case,
        members,
        frozen,
        dt,
        times,
        states,
        derivs,
        dim,
    })
}

impl ReferenceBundle {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.times
    }

    pub fn member_position(&self, member: usize) -> Option<usize> {
        self.members.iter().position(|&a| a == member)
    }

    fn position(&self, member: usize) -> Result<usize, ReftrajError> {
        self.member_position(member)
            .ok_or(ReftrajError::MemberNotInBundle {
                member,
                agent: self.agent,
            })
    }

    pub fn is_frozen(&self, member: usize) -> Result<bool, ReftrajError> {
        Ok(self.frozen[self.position(member)?])
    }

    fn block(&self, knot: usize, p: usize) -> &[f64] {
        &self.states[knot][p * self.dim..(p + 1) * self.dim]
    }

    pub fn knot_state(&self, knot: usize, member: usize) -> Result<&[f64], ReftrajError> {
        if knot >= self.states.len() {
            return Err(ReftrajError::KnotOutOfRange {
                index: knot,
                count: self.states.len(),
            });
        }
        let p = self.position(member)?;
        Ok(self.block(knot, p))
    }

    pub fn knot_deriv(&self, knot: usize, member: usize) -> Result<&[f64], ReftrajError> {
        if knot >= self.derivs.len() {
            return Err(ReftrajError::KnotOutOfRange {
                index: knot,
                count: self.derivs.len(),
            });
        }
        let p = self.position(member)?;
        Ok(&self.derivs[knot][p * self.dim..(p + 1) * self.dim])
    }

    /// Initial state: the reference point of the member's configured cell.
    pub fn initial(&self, member: usize) -> Result<&[f64], ReftrajError> {
        self.knot_state(0, member)
    }

    /// State at the end of the interval (an exact knot, no interpolation).
    pub fn at_end(&self, member: usize) -> Result<&[f64], ReftrajError> {
        self.knot_state(self.states.len() - 1, member)
    }

    /// Dense-output estimate of the member's reference trajectory at t,
    /// cubic Hermite between the surrounding knots. Exact at the knots.
    pub fn estimate(&self, member: usize, t: f64) -> Result<Vec<f64>, ReftrajError> {
        let p = self.position(member)?;
        if !(t >= 0.0 && t <= self.dt) {
            return Err(ReftrajError::TimeOutOfRange { t, hi: self.dt });
        }
        let steps = self.times.len() - 1;
        let k = ((t / self.dt * steps as f64).floor() as usize).min(steps - 1);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let y0 = self.block(k, p);
        let y1 = self.block(k + 1, p);
        let d0 = &self.derivs[k][p * self.dim..(p + 1) * self.dim];
        let d1 = &self.derivs[k + 1][p * self.dim..(p + 1) * self.dim];
        Ok((0..self.dim)
            .map(|c| h00 * y0[c] + h10 * h * d0[c] + h01 * y1[c] + h11 * h * d1[c])
            .collect())
    }

    /// Largest member speed seen at any stored knot.
    pub fn max_knot_speed(&self) -> f64 {
        let mut best = 0.0f64;
        for d in &self.derivs {
            for p in 0..self.members.len() {
                let v = crate::linalg::norm(&d[p * self.dim..(p + 1) * self.dim]);
                best = best.max(v);
            }
        }
        best
    }
}
