//! Hybrid feedback: the three-term control law that cancels the coupling,
//! drifts the cell reference point onto the agent's initial state, and spends
//! the planning fraction of the input budget steering toward a target in the
//! planning ball.
//!
//! The closed loop has an exact solution built from the reference trajectory,
//! which serves as an independent cross-check of the simulated loop. The
//! realized trajectory does not depend on what the neighbors do; their
//! positions only load the control magnitude, which is why the sampled
//! verification drives them along envelope-hugging realizations.

use crate::bounds::{self, BoundsError, DiscretizationPlan};
use crate::decomposition::{Decomposition, DecompositionError};
use crate::dynamics::{DynamicsError, System};
use crate::linalg::{dist, norm};
use crate::network::NetworkError;
use crate::reftraj::{solve_reference_ivp, ReferenceBundle, ReftrajError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("vector has {got} coordinates, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("steering parameter norm {norm} exceeds the input bound {v_max}")]
    WTooLarge { norm: f64, v_max: f64 },
    #[error("target lies outside the planning ball: distance {distance} exceeds radius {radius}")]
    TargetOutsideBall { distance: f64, radius: f64 },
    #[error("planning fraction integrates to zero, so only the reference endpoint is reachable; target sits {distance} away")]
    TargetNeedsZeroBudget { distance: f64 },
    #[error("agent {agent}: initial state lies outside its configured cell")]
    InitialOutsideCell { agent: usize },
    #[error("{got} drives for {expected} agents")]
    DriveCount { got: usize, expected: usize },
    #[error("{got} initial states for {expected} agents")]
    InitialCount { got: usize, expected: usize },
    #[error("agent {agent}: constant input norm {norm} exceeds the input bound {v_max}")]
    InputTooLarge {
        agent: usize,
        norm: f64,
        v_max: f64,
    },
    #[error("step divisor must be positive")]
    ZeroDivisor,
    #[error("bundle was solved over dt = {bundle_dt}, the plan uses dt = {plan_dt}")]
    BundleStepMismatch { bundle_dt: f64, plan_dt: f64 },
    #[error("bundle degree {bundle} does not match plan degree {plan}")]
    BundleDegreeMismatch { bundle: usize, plan: usize },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Reftraj(#[from] ReftrajError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
}

/// Steering parameter for a target in the planning ball around the reference
/// endpoint: w = (target - chi(dt)) / integral of zeta. Degenerate profiles
/// with zero budget only admit the endpoint itself.
pub fn w_for_target(
    plan: &DiscretizationPlan,
    bundle: &ReferenceBundle,
    target: &[f64],
) -> Result<Vec<f64>, ControlError> {
    let chi_end = bundle.at_end(bundle.agent)?;
    if target.len() != chi_end.len() {
        return Err(ControlError::DimensionMismatch {
            got: target.len(),
            expected: chi_end.len(),
        });
    }
    let integral = bounds::integral_zeta(plan, bundle.agent)?;
    let distance = dist(target, chi_end);
    if integral == 0.0 {
        if distance <= 1e-12 {
            return Ok(vec![0.0; chi_end.len()]);
        }
        return Err(ControlError::TargetNeedsZeroBudget { distance });
    }
    let radius = plan.v_max * integral;
    if distance > radius * (1.0 + 1e-9) {
        return Err(ControlError::TargetOutsideBall { distance, radius });
    }
    Ok(target
        .iter()
        .zip(chi_end)
        .map(|(&t, &c)| (t - c) / integral)
        .collect())
}

/// The control law of one agent over one time step, bound to its reference
/// bundle, its actual initial state, and a steering parameter.
pub struct FeedbackLaw<'a> {
    pub system: &'a System,
    pub plan: &'a DiscretizationPlan,
    pub bundle: &'a ReferenceBundle,
    pub agent: usize,
    x0: Vec<f64>,
    cell_ref: Vec<f64>,
    w: Vec<f64>,
    integral_full: f64,
}

impl<'a> FeedbackLaw<'a> {
    pub fn new(
        system: &'a System,
        plan: &'a DiscretizationPlan,
        bundle: &'a ReferenceBundle,
        x0: &[f64],
        w: Vec<f64>,
    ) -> Result<Self, ControlError> {
        let dim = system.dim;
        if bundle.dt != plan.dt {
            return Err(ControlError::BundleStepMismatch {
                bundle_dt: bundle.dt,
                plan_dt: plan.dt,
            });
        }
        if bundle.degree != plan.degree {
            return Err(ControlError::BundleDegreeMismatch {
                bundle: bundle.degree,
                plan: plan.degree,
            });
        }
        if x0.len() != dim {
            return Err(ControlError::DimensionMismatch {
                got: x0.len(),
                expected: dim,
            });
        }
        if w.len() != dim {
            return Err(ControlError::DimensionMismatch {
                got: w.len(),
                expected: dim,
            });
        }
        let w_norm = norm(&w);
        if w_norm > plan.v_max * (1.0 + 1e-9) {
            return Err(ControlError::WTooLarge {
                norm: w_norm,
                v_max: plan.v_max,
            });
        }
        let agent = bundle.agent;
        let cell_ref = bundle.initial(agent)?.to_vec();
        let integral_full = bounds::integral_zeta(plan, agent)?;
        Ok(FeedbackLaw {
            system,
            plan,
            bundle,
            agent,
            x0: x0.to_vec(),
            cell_ref,
            w,
            integral_full,
        })
    }

    pub fn for_target(
        system: &'a System,
        plan: &'a DiscretizationPlan,
        bundle: &'a ReferenceBundle,
        x0: &[f64],
        target: &[f64],
    ) -> Result<Self, ControlError> {
        let w = w_for_target(plan, bundle, target)?;
        FeedbackLaw::new(system, plan, bundle, x0, w)
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    /// Where the closed loop lands at the end of the step.
    pub fn target(&self) -> Result<Vec<f64>, ControlError> {
        let chi_end = self.bundle.at_end(self.agent)?;
        Ok(chi_end
            .iter()
            .zip(&self.w)
            .map(|(&c, &w)| c + w * self.integral_full)
            .collect())
    }

    /// Reference estimates of the agent's neighbors at time t, stacked in
    /// the listed neighbor order.
    pub fn reference_block(&self, t: f64) -> Result<Vec<f64>, ControlError> {
        let neighbors = self.system.network.neighbors(self.agent);
        let mut block = Vec::with_capacity(neighbors.len() * self.system.dim);
        for &l in neighbors {
            block.extend(self.bundle.estimate(l, t)?);
        }
        Ok(block)
    }

    /// k(t, x) = [f(chi(t), chi_block(t)) - f(x, measured block)]
    ///         + (cell reference - x0) / dt
    ///         + zeta(t) w.
    pub fn control(
        &self,
        t: f64,
        x: &[f64],
        measured_block: &[f64],
    ) -> Result<Vec<f64>, ControlError> {
        let chi = self.bundle.estimate(self.agent, t)?;
        let chi_block = self.reference_block(t)?;
        let on_ref = self.system.eval_kernel(self.agent, &chi, &chi_block)?;
        let on_actual = self.system.eval_kernel(self.agent, x, measured_block)?;
        let z = bounds::zeta(self.plan, self.agent, t)?;
        Ok((0..self.system.dim)
            .map(|c| {
                on_ref[c] - on_actual[c] + (self.cell_ref[c] - self.x0[c]) / self.plan.dt
                    + z * self.w[c]
            })
            .collect())
    }

    /// Exact closed-loop solution: the coupling cancels, leaving
    /// x(t) = chi(t) + (dt - t)/dt (x0 - cell reference) + w * integral of
    /// zeta on [0, t]. Independent of what the neighbors actually do.
    pub fn analytic_state(&self, t: f64) -> Result<Vec<f64>, ControlError> {
        let chi = self.bundle.estimate(self.agent, t)?;
        let blend = (self.plan.dt - t) / self.plan.dt;
        let part = bounds::integral_zeta_partial(self.plan, self.agent, t)?;
        Ok((0..self.system.dim)
            .map(|c| chi[c] + blend * (self.x0[c] - self.cell_ref[c]) + self.w[c] * part)
            .collect())
    }
}

/// One closed-loop run of a single agent against a disturbance realization
/// of its neighbor block.
pub struct DisturbedRun {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub analytic: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub max_control_norm: f64,
    pub max_sim_vs_analytic: f64,
}

/// Integrate the closed loop of one agent with the neighbor block supplied
/// by a disturbance realization. The vector field is the plant plus the full
/// control law, so the coupling cancellation is exercised, not assumed.
pub fn simulate_disturbed(
    law: &FeedbackLaw,
    neighbor_block: &dyn Fn(f64) -> Vec<f64>,
    divisor: usize,
) -> Result<DisturbedRun, ControlError> {
    if divisor == 0 {
        return Err(ControlError::ZeroDivisor);
    }
    let dt = law.plan.dt;
    let dim = law.system.dim;
    let rhs = |t: f64, x: &[f64]| -> Result<Vec<f64>, ControlError> {
        let block = neighbor_block(t);
        let f = law.system.eval_kernel(law.agent, x, &block)?;
        let k = law.control(t, x, &block)?;
        Ok((0..dim).map(|c| f[c] + k[c]).collect())
    };

    let mut x = law.initial_state().to_vec();
    let mut times = Vec::with_capacity(divisor + 1);
    let mut states = Vec::with_capacity(divisor + 1);
    let mut analytic = Vec::with_capacity(divisor + 1);
    let mut controls = Vec::with_capacity(divisor + 1);
    let mut max_control_norm = 0.0f64;
    let mut max_gap = 0.0f64;

    for k in 0..=divisor {
        let t = dt * k as f64 / divisor as f64;
        let a = law.analytic_state(t)?;
        let ctl = law.control(t, &x, &neighbor_block(t))?;
        max_control_norm = max_control_norm.max(norm(&ctl));
        max_gap = max_gap.max(dist(&x, &a));
        times.push(t);
        states.push(x.clone());
        analytic.push(a);
        controls.push(ctl);
        if k == divisor {
            break;
        }
        let t_half = dt * (2 * k + 1) as f64 / (2 * divisor) as f64;
        let t_next = dt * (k + 1) as f64 / divisor as f64;
        let h = t_next - t;
        let k1 = rhs(t, &x)?;
        let mut s = x.clone();
        crate::linalg::axpy(&mut s, 0.5 * h, &k1);
        let k2 = rhs(t_half, &s)?;
        s.copy_from_slice(&x);
        crate::linalg::axpy(&mut s, 0.5 * h, &k2);
        let k3 = rhs(t_half, &s)?;
        s.copy_from_slice(&x);
        crate::linalg::axpy(&mut s, h, &k3);
        let k4 = rhs(t_next, &s)?;
        for c in 0..dim {
            x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }

    Ok(DisturbedRun {
        times,
        states,
        analytic,
        controls,
        max_control_norm,
        max_sim_vs_analytic: max_gap,
    })
}

/// Outcome of the sampled verification of one transition: worst margins over
/// all trials, and descriptions of any violated condition.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    /// What this check is: a sampled verification, not a proof.
    pub kind: &'static str,
    pub agent: usize,
    pub trials: usize,
    pub divisor: usize,
    /// Smallest beta(t) - |x(t) - chi(t)| seen; must stay strictly positive.
    pub worst_tube_margin: f64,
    /// Smallest v_max - |k(t)| seen; admissible down to -1e-9.
    pub worst_control_margin: f64,
    /// Largest |simulated - analytic| over all knots and trials.
    pub worst_sim_vs_analytic: f64,
    /// Largest |x(dt) - target| over trials.
    pub worst_arrival_error: f64,
    pub failures: Vec<String>,
    pub passed: bool,
}

struct TrialOutcome {
    tube_margin: f64,
    control_margin: f64,
    sim_vs_analytic: f64,
    arrival_error: f64,
    failure: Option<String>,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Initial states cycling through pulled-in cell corners, then interior grid
/// points, then uniform samples; all strictly inside the closed cell.
fn trial_initial_state(
    grid: &Decomposition,
    cell: usize,
    trial: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, ControlError> {
    let (lo, hi) = grid.cell_bounds(cell)?;
    let dim = lo.len();
    let corners = 1usize << dim.min(10);
    if trial == 0 {
        return Ok(grid.reference_point(cell)?);
    }
    if trial <= corners {
        let mask = trial - 1;
        return Ok((0..dim)
            .map(|a| {
                let side = hi[a] - lo[a];
                if mask >> a & 1 == 1 {
                    hi[a] - 1e-9 * side
                } else {
                    lo[a] + 1e-9 * side
                }
            })
            .collect());
    }
    let grid_trials = 3usize.pow(dim.min(6) as u32);
    if trial <= corners + grid_trials {
        let mut idx = trial - corners - 1;
        return Ok((0..dim)
            .map(|a| {
                let frac = (idx % 3 + 1) as f64 / 4.0;
                idx /= 3;
                lo[a] + frac * (hi[a] - lo[a])
            })
            .collect());
    }
    Ok((0..dim).map(|a| rng.gen_range(lo[a]..hi[a])).collect())
}

/// Disturbance realization for the neighbor block: each neighbor moves around
/// the agent's estimate of its reference, within (1 - 1e-9) of the admissible
/// envelope alpha(t) + beta(t). Kind cycles: on-reference, constant
/// direction, rotating direction, mixed sinusoids.
struct DisturbanceSpec {
    kind: usize,
    directions: Vec<(Vec<f64>, Vec<f64>)>,
    omegas: Vec<f64>,
    phases: Vec<f64>,
}

impl DisturbanceSpec {
    fn draw(rng: &mut ChaCha8Rng, kind: usize, neighbor_count: usize, dim: usize) -> Self {
        DisturbanceSpec {
            kind,
            directions: (0..neighbor_count)
                .map(|_| (unit_vector(rng, dim), unit_vector(rng, dim)))
                .collect(),
            omegas: (0..neighbor_count)
                .map(|_| rng.gen_range(1.0..30.0))
                .collect(),
            phases: (0..neighbor_count)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect(),
        }
    }

    fn offset(&self, j: usize, t: f64, envelope: f64, dim: usize) -> Vec<f64> {
        let scale = envelope * (1.0 - 1e-9);
        let (u1, u2) = &self.directions[j];
        match self.kind {
            0 => vec![0.0; dim],
            1 => u1.iter().map(|&u| scale * u).collect(),
            2 => {
                // rotate in the (u1, u1-orthogonalized u2) plane; the norm of
                // cos * u1 + sin * e2 is exactly 1
                let d = u1.iter().zip(u2).map(|(a, b)| a * b).sum::<f64>();
                let mut e2: Vec<f64> = u2.iter().zip(u1).map(|(b, a)| b - d * a).collect();
                let n = norm(&e2);
                if n < 1e-9 {
                    return u1.iter().map(|&u| scale * u).collect();
                }
                e2.iter_mut().for_each(|v| *v /= n);
                let ph = self.omegas[j] * t + self.phases[j];
                u1.iter()
                    .zip(&e2)
                    .map(|(&a, &b)| scale * (ph.cos() * a + ph.sin() * b))
                    .collect()
            }
            _ => {
                let ph1 = self.omegas[j] * t + self.phases[j];
                let ph2 = 2.3 * self.omegas[j] * t;
                u1.iter()
                    .zip(u2)
                    .map(|(&a, &b)| scale * (0.5 * ph1.sin() * a + 0.5 * ph2.cos() * b))
                    .collect()
            }
        }
    }
}

/// Sampled verification that the plan's guarantees hold for one transition:
/// initial states across the cell, neighbors on envelope-hugging disturbance
/// realizations, margins recorded at every knot. This samples the guarantee;
/// it does not prove it.
#[allow(clippy::too_many_arguments)]
pub fn check_consistency(
    system: &System,
    grid: &Decomposition,
    plan: &DiscretizationPlan,
    bundle: &ReferenceBundle,
    cell: usize,
    target: &[f64],
    trials: usize,
    seed: u64,
    divisor: usize,
) -> Result<ConsistencyReport, ControlError> {
    let agent = bundle.agent;
    let dim = system.dim;
    let neighbors = system.network.neighbors(agent).to_vec();

    let outcomes: Vec<Result<TrialOutcome, ControlError>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_add((trial as u64).wrapping_mul(0x9E3779B97F4A7C15)),
            );
            let x0 = trial_initial_state(grid, cell, trial, &mut rng)?;
            let law = FeedbackLaw::for_target(system, plan, bundle, &x0, target)?;
            let spec = DisturbanceSpec::draw(&mut rng, trial % 4, neighbors.len(), dim);

            let realization = |t: f64| -> Vec<f64> {
                let mut block = Vec::with_capacity(neighbors.len() * dim);
                let alpha = bounds::plan_alpha(plan, agent, t).expect("agent in plan");
                let beta = bounds::plan_beta(plan, t).expect("t within step");
                for (j, &l) in neighbors.iter().enumerate() {
                    let chi = bundle.estimate(l, t).expect("neighbor in bundle");
                    let off = spec.offset(j, t, alpha + beta, dim);
                    block.extend(chi.iter().zip(&off).map(|(&c, &o)| c + o));
                }
                block
            };

            let run = simulate_disturbed(&law, &realization, divisor)?;

            let mut tube_margin = f64::INFINITY;
            for (k, t) in run.times.iter().enumerate() {
                let chi = bundle.estimate(agent, *t)?;
                let beta = bounds::plan_beta(plan, *t)?;
                tube_margin = tube_margin.min(beta - dist(&run.states[k], &chi));
            }
            let control_margin = plan.v_max - run.max_control_norm;
            let arrival_error = dist(run.states.last().unwrap(), target);

            let mut failure = None;
            if tube_margin <= 0.0 {
                failure = Some(format!(
                    "trial {trial}: tube containment violated, margin {tube_margin}"
                ));
            } else if control_margin < -1e-9 {
                failure = Some(format!(
                    "trial {trial}: control magnitude bound violated, margin {control_margin}"
                ));
            } else if arrival_error > 1e-6 {
                failure = Some(format!(
                    "trial {trial}: arrival missed the target by {arrival_error}"
                ));
            }
            Ok(TrialOutcome {
                tube_margin,
                control_margin,
                sim_vs_analytic: run.max_sim_vs_analytic,
                arrival_error,
                failure,
            })
        })
        .collect();

    let mut report = ConsistencyReport {
        kind: "sampled verification",
        agent,
        trials,
        divisor,
        worst_tube_margin: f64::INFINITY,
        worst_control_margin: f64::INFINITY,
        worst_sim_vs_analytic: 0.0,
        worst_arrival_error: 0.0,
        failures: Vec::new(),
        passed: true,
    };
    for outcome in outcomes {
        let o = outcome?;
        report.worst_tube_margin = report.worst_tube_margin.min(o.tube_margin);
        report.worst_control_margin = report.worst_control_margin.min(o.control_margin);
        report.worst_sim_vs_analytic = report.worst_sim_vs_analytic.max(o.sim_vs_analytic);
        report.worst_arrival_error = report.worst_arrival_error.max(o.arrival_error);
        if let Some(f) = o.failure {
            report.failures.push(f);
        }
    }
    report.passed = report.failures.is_empty();
    Ok(report)
}

/// How one agent is driven over a network step.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentDrive {
    /// Full feedback law; `target` None steers to the reference endpoint.
    Feedback { target: Option<Vec<f64>> },
    /// Constant free input, |v| <= v_max.
    Input { v: Vec<f64> },
}

/// One synchronized network step: every agent's knot trajectory, applied
/// inputs, and end-of-step facts.
#[derive(Debug)]
pub struct NetworkRun {
    pub times: Vec<f64>,
    /// states[agent][knot] is that agent's state.
    pub states: Vec<Vec<Vec<f64>>>,
    /// controls[agent][knot] is the applied input (feedback or constant).
    pub controls: Vec<Vec<Vec<f64>>>,
    pub final_states: Vec<Vec<f64>>,
    pub final_cells: Vec<usize>,
    /// For feedback agents: |x(dt) - target|.
    pub arrival_errors: Vec<Option<f64>>,
    /// For feedback agents: min over knots of beta - |x - chi|.
    pub tube_margins: Vec<Option<f64>>,
    /// v_max - max |input| per agent.
    pub control_margins: Vec<f64>,
}

/// Simulate every agent simultaneously over one time step: feedback agents
/// run their laws against the actual (simulated) neighbor states, input
/// agents apply their constant free input on top of their coupling.
pub fn simulate_network(
    system: &System,
    grid: &Decomposition,
    plan: &DiscretizationPlan,
    full_config: &[usize],
    initial: &[Vec<f64>],
    drives: &[AgentDrive],
    divisor: usize,
) -> Result<NetworkRun, ControlError> {
    let n = system.agent_count();
    let dim = system.dim;
    if drives.len() != n {
        return Err(ControlError::DriveCount {
            got: drives.len(),
            expected: n,
        });
    }
    if initial.len() != n {
        return Err(ControlError::InitialCount {
            got: initial.len(),
            expected: n,
        });
    }
    if divisor == 0 {
        return Err(ControlError::ZeroDivisor);
    }
    for (i, x0) in initial.iter().enumerate() {
        if x0.len() != dim {
            return Err(ControlError::DimensionMismatch {
                got: x0.len(),
                expected: dim,
            });
        }
        let (lo, hi) = grid.cell_bounds(full_config[i])?;
        let inside = x0
            .iter()
            .zip(&lo)
            .zip(&hi)
            .all(|((&x, &a), &b)| x >= a && x <= b);
        if !inside {
            return Err(ControlError::InitialOutsideCell { agent: i });
        }
    }

    // per-agent bundles and laws for the feedback-driven agents
    let mut bundles: Vec<Option<ReferenceBundle>> = Vec::with_capacity(n);
    for (i, drive) in drives.iter().enumerate() {
        match drive {
            AgentDrive::Feedback { .. } => {
                let cfg = system.network.project(full_config, i, plan.degree)?;
                bundles.push(Some(solve_reference_ivp(
                    system, grid, &cfg, plan.dt, divisor,
                )?));
            }
            AgentDrive::Input { v } => {
                if v.len() != dim {
                    return Err(ControlError::DimensionMismatch {
                        got: v.len(),
                        expected: dim,
                    });
                }
                let nv = norm(v);
                if nv > plan.v_max * (1.0 + 1e-12) {
                    return Err(ControlError::InputTooLarge {
                        agent: i,
                        norm: nv,
                        v_max: plan.v_max,
                    });
                }
                bundles.push(None);
            }
        }
    }
    let mut laws: Vec<Option<FeedbackLaw>> = Vec::with_capacity(n);
    for (i, drive) in drives.iter().enumerate() {
        match drive {
            AgentDrive::Feedback { target } => {
                let bundle = bundles[i].as_ref().unwrap();
                let law = match target {
                    Some(t) => FeedbackLaw::for_target(system, plan, bundle, &initial[i], t)?,
                    None => {
                        FeedbackLaw::new(system, plan, bundle, &initial[i], vec![0.0; dim])?
                    }
                };
                laws.push(Some(law));
            }
            AgentDrive::Input { .. } => laws.push(None),
        }
    }

    let gather = |y: &[f64], i: usize| -> Vec<f64> {
        let mut block = Vec::with_capacity(system.network.neighbors(i).len() * dim);
        for &l in system.network.neighbors(i) {
            block.extend_from_slice(&y[l * dim..(l + 1) * dim]);
        }
        block
    };
    let input_at = |t: f64, y: &[f64], i: usize| -> Result<Vec<f64>, ControlError> {
        match &drives[i] {
            AgentDrive::Feedback { .. } => {
                let law = laws[i].as_ref().unwrap();
                law.control(t, &y[i * dim..(i + 1) * dim], &gather(y, i))
            }
            AgentDrive::Input { v } => Ok(v.clone()),
        }
    };
    let rhs = |t: f64, y: &[f64]| -> Result<Vec<f64>, ControlError> {
        let mut out = vec![0.0; n * dim];
        for i in 0..n {
            let block = gather(y, i);
            let f = system.eval_kernel(i, &y[i * dim..(i + 1) * dim], &block)?;
            let v = input_at(t, y, i)?;
            for c in 0..dim {
                out[i * dim + c] = f[c] + v[c];
            }
        }
        Ok(out)
    };

    let dt = plan.dt;
    let mut y: Vec<f64> = initial.iter().flatten().copied().collect();
    let mut times = Vec::with_capacity(divisor + 1);
    let mut states = vec![Vec::with_capacity(divisor + 1); n];
    let mut controls = vec![Vec::with_capacity(divisor + 1); n];
    for k in 0..=divisor {
        let t = dt * k as f64 / divisor as f64;
        times.push(t);
        for i in 0..n {
            states[i].push(y[i * dim..(i + 1) * dim].to_vec());
            controls[i].push(input_at(t, &y, i)?);
        }
        if k == divisor {
            break;
        }
        let t_half = dt * (2 * k + 1) as f64 / (2 * divisor) as f64;
        let t_next = dt * (k + 1) as f64 / divisor as f64;
        let h = t_next - t;
        let k1 = rhs(t, &y)?;
        let mut s = y.clone();
        crate::linalg::axpy(&mut s, 0.5 * h, &k1);
        let k2 = rhs(t_half, &s)?;
        s.copy_from_slice(&y);
        crate::linalg::axpy(&mut s, 0.5 * h, &k2);
        let k3 = rhs(t_half, &s)?;
        s.copy_from_slice(&y);
        crate::linalg::axpy(&mut s, h, &k3);
        let k4 = rhs(t_next, &s)?;
        for c in 0..n * dim {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }

    let final_states: Vec<Vec<f64>> = (0..n).map(|i| states[i].last().unwrap().clone()).collect();
    let mut final_cells = Vec::with_capacity(n);
    for x in &final_states {
        final_cells.push(grid.locate(x)?);
    }
    let mut arrival_errors = Vec::with_capacity(n);
    let mut tube_margins = Vec::with_capacity(n);
    let mut control_margins = Vec::with_capacity(n);
    for i in 0..n {
        match &laws[i] {
            Some(law) => {
                let target = law.target()?;
                arrival_errors.push(Some(dist(&final_states[i], &target)));
                let bundle = bundles[i].as_ref().unwrap();
                let mut margin = f64::INFINITY;
                for (k, t) in times.iter().enumerate() {
                    let chi = bundle.estimate(i, *t)?;
                    let beta = bounds::plan_beta(plan, *t)?;
                    margin = margin.min(beta - dist(&states[i][k], &chi));
                }
                tube_margins.push(Some(margin));
            }
            None => {
                arrival_errors.push(None);
                tube_margins.push(None);
            }
        }
        let worst = controls[i].iter().map(|k| norm(k)).fold(0.0, f64::max);
        control_margins.push(plan.v_max - worst);
    }

    Ok(NetworkRun {
        times,
        states,
        controls,
        final_states,
        final_cells,
        arrival_errors,
        tube_margins,
        control_margins,
    })
}
