//! Scalar certificates: the deviation horizons t* and t̄, the H-family of
//! neighbor-estimate deviation bounds with their closed forms, the α and β
//! tube radii, and validated space-time discretization plans with the
//! planning-fraction profiles ζ_i and radii r_i.

use crate::dynamics::{PerAgentBounds, SystemBounds};
use crate::network::ClosureReport;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("{name} must be non-negative and finite, got {value}")]
    BadConstant { name: &'static str, value: f64 },
    #[error("deviation order kappa must be at least 1")]
    KappaZero,
    #[error("degree of decentralization must be at least 1")]
    DegreeZero,
    #[error("c_bar = {0} outside its admissible range")]
    CBarRange(f64),
    #[error("c_bar is required for theorem-1 planning")]
    CBarRequired,
    #[error("planning fractions must satisfy 0 <= lambda_lo <= lambda_hi, got lo={lo}, hi={hi}")]
    LambdaOrder { lo: f64, hi: f64 },
    #[error("lambda_hi = {0} violates the strict bound lambda_hi < 1 (enable allow_lambda_hi_one to accept the boundary value)")]
    LambdaHiRange(f64),
    #[error("time {t} outside [0, {hi}]")]
    TimeOutOfRange { t: f64, hi: f64 },
    #[error("time step must be positive, got {0}")]
    DtNonPositive(f64),
    #[error("time-step upper bound violated: dt = {dt} must be strictly below {upper}")]
    DtOutOfInterval { dt: f64, upper: f64 },
    #[error("the time-step interval is unbounded for these constants; supply dt explicitly")]
    DtUnbounded,
    #[error("cell-diameter bound must be positive, got {0}")]
    DmaxNonPositive(f64),
    #[error("cell-diameter bound ({branch} branch) violated: d_max = {d} exceeds {upper}")]
    DmaxOutOfInterval {
        d: f64,
        upper: f64,
        branch: &'static str,
    },
    #[error("theorem-2 planning requires every agent's (m+1)-level shell empty; agent {agent} violates this — use theorem-1 planning")]
    Theorem2Precondition { agent: usize },
    #[error("closure report was computed at degree {closure} but the plan requests degree {requested}")]
    ClosureDegreeMismatch { closure: usize, requested: usize },
    #[error("agent index {index} out of range for {count} agents")]
    AgentOutOfRange { index: usize, count: usize },
}

/// Deviation-certificate horizon; degenerate constants (no coupling or no
/// self-sensitivity) make the underlying equation rootless, so the horizon is
/// unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Unbounded,
}

impl Horizon {
    pub fn finite(self) -> Option<f64> {
        match self {
            Horizon::Finite(t) => Some(t),
            Horizon::Unbounded => None,
        }
    }

    pub fn min_with(self, other: f64) -> f64 {
        match self {
            Horizon::Finite(t) => t.min(other),
            Horizon::Unbounded => other,
        }
    }
}

fn check_nonneg(name: &'static str, value: f64) -> Result<(), BoundsError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(BoundsError::BadConstant { name, value })
    }
}

/// Bisection for the positive root of a convex g with g(0) = 0, g'(0) < 0 and
/// g -> +inf. Maintains g(lo) <= 0 < g(hi); runs to floating-point width.
fn bisect_positive_root(g: impl Fn(f64) -> f64, hi_start: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = hi_start;
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn horizon_root(l1: f64, l2: f64, n_max: usize, c_bar: f64) -> Result<Horizon, BoundsError> {
    check_nonneg("L1", l1)?;
    check_nonneg("L2", l2)?;
    if l1 == 0.0 || l2 == 0.0 || n_max == 0 {
        return Ok(Horizon::Unbounded);
    }
    let coeff = l2 + c_bar * l2 * l2 / (l1 * (n_max as f64).sqrt());
    let g = move |t: f64| (l2 * t).exp() - coeff * t - 1.0;
    Ok(Horizon::Finite(bisect_positive_root(g, 1.0 / l2)))
}

/// Positive root of e^(L2 t) − (L2 + L2²/(L1·sqrt(N_max))) t − 1 = 0: the
/// horizon up to which the first-order deviation bound stays below Mt.
pub fn t_star(l1: f64, l2: f64, n_max: usize) -> Result<Horizon, BoundsError> {
    horizon_root(l1, l2, n_max, 1.0)
}

/// Same root with the quadratic coefficient scaled by c_bar in (0, 1]; for
/// c_bar < 1 this is strictly below t_star and certifies the stronger linear
/// bound on the H family.
pub fn t_bar(l1: f64, l2: f64, n_max: usize, c_bar: f64) -> Result<Horizon, BoundsError> {
    if !(c_bar > 0.0 && c_bar <= 1.0) {
        return Err(BoundsError::CBarRange(c_bar));
    }
    horizon_root(l1, l2, n_max, c_bar)
}

/// Neumaier compensated summation; the alternating closed-form series for
/// H_kappa loses digits to cancellation otherwise.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// H_kappa(t): the recursive deviation bounds
///   H_1(t) = M t,
///   H_k(t) = ∫_0^t e^(L2 (t−s)) L1 sqrt(N_max) H_(k−1)(s) ds,
/// evaluated through their closed forms.
pub fn h_deviation(
    kappa: usize,
    t: f64,
    m_bound: f64,
    l1: f64,
    l2: f64,
    n_max: usize,
) -> Result<f64, BoundsError> {
    if kappa == 0 {
        return Err(BoundsError::KappaZero);
    }
    check_nonneg("t", t)?;
    check_nonneg("M", m_bound)?;
    check_nonneg("L1", l1)?;
    check_nonneg("L2", l2)?;
    if kappa == 1 {
        return Ok(m_bound * t);
    }
    let root_n = (n_max as f64).sqrt();
    if l1 == 0.0 || n_max == 0 {
        return Ok(0.0);
    }
    if l2 == 0.0 {
        // recursion degenerates to iterated integration of M t
        return Ok((l1 * root_n).powi(kappa as i32 - 1) * m_bound * t.powi(kappa as i32)
            / factorial(kappa));
    }
    let pref = (l1 * root_n / l2).powi(kappa as i32 - 1) * m_bound;
    let value = match kappa {
        2 => {
            let e = (l2 * t).exp();
            pref * compensated_sum([e / l2, -t, -1.0 / l2].into_iter())
        }
        3 => {
            let e = (l2 * t).exp();
            pref * compensated_sum([t * e, -2.0 * e / l2, t, 2.0 / l2].into_iter())
        }
        _ => {
            let e = (l2 * t).exp();
            let p = kappa - 2;
            // S = sum_{j=0}^{p} (−1)^j (j+1) L2^(p−1−j) t^(p−j) / (p−j)!
            let series = compensated_sum((0..=p).map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * (j as f64 + 1.0) * l2.powi(p as i32 - 1 - j as i32)
                    * t.powi((p - j) as i32)
                    / factorial(p - j)
            }));
            let tail_sign = if (kappa - 1) % 2 == 0 { 1.0 } else { -1.0 };
            pref * compensated_sum(
                [e * series, tail_sign * t, tail_sign * (kappa as f64 - 1.0) / l2].into_iter(),
            )
        }
    };
    Ok(value)
}

/// α(t) = c̄^(m−1) M t: the neighbor reference-trajectory deviation bound
/// certified on [0, t̄].
pub fn alpha(t: f64, m_bound: f64, c_bar: f64, degree: usize) -> Result<f64, BoundsError> {
    if degree == 0 {
        return Err(BoundsError::DegreeZero);
    }
    if !(c_bar > 0.0 && c_bar <= 1.0) {
        return Err(BoundsError::CBarRange(c_bar));
    }
    check_nonneg("t", t)?;
    Ok(c_bar.powi(degree as i32 - 1) * m_bound * t)
}

/// β(t) = d_max (δt − t)/(2 δt) + λ̄ v_max t: the tube radius around each
/// reference trajectory, interpolating from d_max/2 at 0 to λ̄ v_max δt at δt.
pub fn beta(t: f64, d_max: f64, dt: f64, lambda_hi: f64, v_max: f64) -> Result<f64, BoundsError> {
    if !(t >= 0.0 && t <= dt) {
        return Err(BoundsError::TimeOutOfRange { t, hi: dt });
    }
    Ok(d_max * (dt - t) / (2.0 * dt) + lambda_hi * v_max * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremKind {
    T1,
    T2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaProfile {
    Constant,
    Corollary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmaxBranch {
    First,
    Second,
}

impl DmaxBranch {
    fn name(self) -> &'static str {
        match self {
            DmaxBranch::First => "first",
            DmaxBranch::Second => "second",
        }
    }
}

/// Inputs to plan construction. `dt`/`d_max` override the defaults (half the
/// upper bound, the full upper bound respectively); `per_agent` enables the
/// advisory per-agent coefficient refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub c_bar: Option<f64>,
    pub degree: usize,
    pub dt: Option<f64>,
    pub d_max: Option<f64>,
    pub allow_lambda_hi_one: bool,
    pub zeta: ZetaProfile,
    pub per_agent: Option<Vec<PerAgentBounds>>,
}

impl PlanRequest {
    pub fn new(lambda_lo: f64, lambda_hi: f64, degree: usize) -> Self {
        PlanRequest {
            lambda_lo,
            lambda_hi,
            c_bar: None,
            degree,
            dt: None,
            d_max: None,
            allow_lambda_hi_one: false,
            zeta: ZetaProfile::Constant,
            per_agent: None,
        }
    }
}

/// Advisory per-agent coefficients computed with that agent's own constants
/// in place of the uniform ones; never used in certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedAgentCoefficients {
    pub agent: usize,
    pub a_left: f64,
    pub a_right: f64,
}

/// A validated space-time discretization: the time step and cell-diameter
/// bound inside their admissible intervals, the reachability coefficients,
/// and the system constants the certificates used. Self-describing: every
/// report embeds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationPlan {
    pub theorem: TheoremKind,
    pub degree: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Estimate-deviation contraction constant (theorem 1 only).
    pub c_bar: Option<f64>,
    /// c̄^(m−1), the α slope divided by M (theorem 1 only).
    pub c: Option<f64>,
    /// None = unbounded horizon (degenerate constants).
    pub t_star: Option<f64>,
    pub t_bar: Option<f64>,
    pub dt: f64,
    /// Supremum of admissible time steps; None = unbounded.
    pub dt_upper: Option<f64>,
    pub d_max: f64,
    pub d_upper: f64,
    pub d_branch_first: f64,
    pub d_branch_second: f64,
    pub binding_branch: DmaxBranch,
    pub a_left: f64,
    /// Per-agent right reachability coefficient (case split on whether the
    /// agent's neighbor estimates are deviation-free).
    pub a_right: Vec<f64>,
    /// The uniform sharp value under theorem 2.
    pub a_right_uniform: Option<f64>,
    pub agent_deviation_free: Vec<bool>,
    /// r under ζ ≡ λ̲.
    pub r_constant: f64,
    pub zeta: ZetaProfile,
    pub m_bound: f64,
    pub l1: f64,
    pub l2: f64,
    pub v_max: f64,
    pub n_max: usize,
    pub refined_per_agent: Option<Vec<RefinedAgentCoefficients>>,
    pub refined_note: Option<String>,
}

fn validate_lambdas(req: &PlanRequest) -> Result<(), BoundsError> {
    let (lo, hi) = (req.lambda_lo, req.lambda_hi);
    if !(lo >= 0.0 && lo <= hi) || !hi.is_finite() {
        return Err(BoundsError::LambdaOrder { lo, hi });
    }
    let hi_limit_ok = hi < 1.0 || (hi == 1.0 && req.allow_lambda_hi_one);
    if !hi_limit_ok {
        return Err(BoundsError::LambdaHiRange(hi));
    }
    Ok(())
}

struct PlanCore {
    k_rate: f64,
    c: Option<f64>,
    c_bar: Option<f64>,
    t_star_h: Horizon,
    t_bar_h: Option<Horizon>,
}

fn build_plan(
    theorem: TheoremKind,
    bounds: &SystemBounds,
    closure: &ClosureReport,
    req: &PlanRequest,
) -> Result<DiscretizationPlan, BoundsError> {
    validate_lambdas(req)?;
    if req.degree == 0 {
        return Err(BoundsError::DegreeZero);
    }
    if closure.degree != req.degree {
        return Err(BoundsError::ClosureDegreeMismatch {
            closure: closure.degree,
            requested: req.degree,
        });
    }
    let (m, l1, l2, v, n) = (
        bounds.m_bound,
        bounds.l1,
        bounds.l2,
        bounds.v_max,
        bounds.n_max,
    );
    let root_n = (n as f64).sqrt();
    let (lo, hi) = (req.lambda_lo, req.lambda_hi);

    let core = match theorem {
        TheoremKind::T1 => {
            let c_bar = req.c_bar.ok_or(BoundsError::CBarRequired)?;
            if !(c_bar > 0.0 && c_bar < 1.0) {
                return Err(BoundsError::CBarRange(c_bar));
            }
            let c = c_bar.powi(req.degree as i32 - 1);
            PlanCore {
                k_rate: l1 * root_n * (c * m + hi * v) + lo * l2 * v,
                c: Some(c),
                c_bar: Some(c_bar),
                t_star_h: t_star(l1, l2, n)?,
                t_bar_h: Some(t_bar(l1, l2, n, c_bar)?),
            }
        }
        TheoremKind::T2 => {
            if let Some(bad) = closure.agents.iter().find(|a| !a.next_level_empty) {
                return Err(BoundsError::Theorem2Precondition { agent: bad.agent });
            }
            PlanCore {
                k_rate: l1 * root_n * hi * v + lo * l2 * v,
                c: None,
                c_bar: None,
                t_star_h: t_star(l1, l2, n)?,
                t_bar_h: None,
            }
        }
    };

    // dt interval: open (0, min{t̄, (1−λ̲)v/K}) for T1, open (0, (1−λ̲)v/K)
    // for T2; an infinite bound forces an explicit dt
    let rate_bound = if core.k_rate > 0.0 {
        Horizon::Finite((1.0 - lo) * v / core.k_rate)
    } else {
        Horizon::Unbounded
    };
    let dt_upper = match (core.t_bar_h, rate_bound) {
        (Some(Horizon::Finite(tb)), h) => Some(h.min_with(tb)),
        (Some(Horizon::Unbounded), Horizon::Finite(rb)) | (None, Horizon::Finite(rb)) => Some(rb),
        (Some(Horizon::Unbounded), Horizon::Unbounded) | (None, Horizon::Unbounded) => None,
    };
    let dt = match (req.dt, dt_upper) {
        (Some(dt), _) => dt,
        (None, Some(up)) => 0.5 * up,
        (None, None) => return Err(BoundsError::DtUnbounded),
    };
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(BoundsError::DtNonPositive(dt));
    }
    if let Some(up) = dt_upper {
        if !(dt < up) {
            return Err(BoundsError::DtOutOfInterval { dt, upper: up });
        }
    }

    // d_max interval: (0, min of the two branches], closed on the right
    let d_branch_first = 2.0 * (1.0 - lo) * v * dt / (1.0 + (l1 * root_n + l2) * dt);
    let d_branch_second = 2.0 * (1.0 - lo) * v * dt - 2.0 * core.k_rate * dt * dt;
    let (d_upper, binding_branch) = if d_branch_second <= d_branch_first {
        (d_branch_second, DmaxBranch::Second)
    } else {
        (d_branch_first, DmaxBranch::First)
    };
    let d_max = req.d_max.unwrap_or(d_upper);
    if !(d_max > 0.0) || !d_max.is_finite() {
        return Err(BoundsError::DmaxNonPositive(d_max));
    }
    if d_max > d_upper {
        return Err(BoundsError::DmaxOutOfInterval {
            d: d_max,
            upper: d_upper,
            branch: binding_branch.name(),
        });
    }

    // the budget coefficients are nonnegative whenever d_max ≤ d_upper; at a
    // binding branch their defining subtraction cancels exactly, so ulp-scale
    // negative dust snaps to zero instead of leaking a spurious sign
    let nonneg = |x: f64| {
        if x < 0.0 && x > -1e-12 * (1.0 - lo) * v {
            0.0
        } else {
            x
        }
    };
    let a_left = nonneg(
        (1.0 - lo) * v - l1 * root_n * d_max / 2.0 - d_max / (2.0 * dt) - l2 * d_max / 2.0,
    );
    let sharp_rate = l1 * root_n * hi * v;
    let blunt_rate = core
        .c
        .map(|c| l1 * root_n * (c * m + hi * v))
        .unwrap_or(sharp_rate);
    let base_right = (1.0 - lo) * v - d_max / (2.0 * dt) - l2 * lo * v * dt;
    let agent_deviation_free: Vec<bool> =
        closure.agents.iter().map(|a| a.deviation_free).collect();
    let a_right: Vec<f64> = agent_deviation_free
        .iter()
        .map(|&free| nonneg(base_right - if free { sharp_rate } else { blunt_rate } * dt))
        .collect();
    let a_right_uniform = match theorem {
        TheoremKind::T2 => Some(nonneg(base_right - sharp_rate * dt)),
        TheoremKind::T1 => None,
    };

    let refined_per_agent = req.per_agent.as_ref().map(|per_agent| {
        per_agent
            .iter()
            .map(|b| {
                let rn = (b.neighbor_count as f64).sqrt();
                let mb = b.m_bound.unwrap_or(m);
                let free = agent_deviation_free
                    .get(b.agent)
                    .copied()
                    .unwrap_or(false);
                let rate = if free {
                    b.l1 * rn * hi * v
                } else {
                    b.l1 * rn * (core.c.unwrap_or(0.0) * mb + hi * v)
                };
                RefinedAgentCoefficients {
                    agent: b.agent,
                    a_left: (1.0 - lo) * v
                        - b.l1 * rn * d_max / 2.0
                        - d_max / (2.0 * dt)
                        - b.l2 * d_max / 2.0,
                    a_right: (1.0 - lo) * v - d_max / (2.0 * dt) - b.l2 * lo * v * dt - rate * dt,
                }
            })
            .collect()
    });
    let refined_note = refined_per_agent.as_ref().map(|_| {
        "advisory only: per-agent constants variant, stated without full proof detail; \
         certificates use the uniform coefficients"
            .to_string()
    });

    Ok(DiscretizationPlan {
        theorem,
        degree: req.degree,
        lambda_lo: lo,
        lambda_hi: hi,
        c_bar: core.c_bar,
        c: core.c,
        t_star: core.t_star_h.finite(),
        t_bar: core.t_bar_h.and_then(Horizon::finite),
        dt,
        dt_upper,
        d_max,
        d_upper,
        d_branch_first,
        d_branch_second,
        binding_branch,
        a_left,
        a_right,
        a_right_uniform,
        agent_deviation_free,
        r_constant: lo * v * dt,
        zeta: req.zeta,
        m_bound: m,
        l1,
        l2,
        v_max: v,
        n_max: n,
        refined_per_agent,
        refined_note,
    })
}

/// Validated plan under the general deviation-bound theorem: the time step is
/// additionally capped by t̄ and the interconnection rate includes the cM
/// estimate-deviation term.
pub fn plan_theorem1(
    bounds: &SystemBounds,
    closure: &ClosureReport,
    req: &PlanRequest,
) -> Result<DiscretizationPlan, BoundsError> {
    build_plan(TheoremKind::T1, bounds, closure, req)
}

/// Validated plan under the zero-deviation theorem; requires every agent's
/// (m+1)-level shell empty.
pub fn plan_theorem2(
    bounds: &SystemBounds,
    closure: &ClosureReport,
    req: &PlanRequest,
) -> Result<DiscretizationPlan, BoundsError> {
    build_plan(TheoremKind::T2, bounds, closure, req)
}

/// Re-check a plan against its own intervals (round-trip validation).
pub fn validate_plan(plan: &DiscretizationPlan) -> Result<(), BoundsError> {
    if let Some(up) = plan.dt_upper {
        if !(plan.dt > 0.0 && plan.dt < up) {
            return Err(BoundsError::DtOutOfInterval {
                dt: plan.dt,
                upper: up,
            });
        }
    }
    if !(plan.d_max > 0.0 && plan.d_max <= plan.d_upper) {
        return Err(BoundsError::DmaxOutOfInterval {
            d: plan.d_max,
            upper: plan.d_upper,
            branch: plan.binding_branch.name(),
        });
    }
    Ok(())
}

fn check_agent(plan: &DiscretizationPlan, agent: usize) -> Result<(), BoundsError> {
    if agent >= plan.a_right.len() {
        return Err(BoundsError::AgentOutOfRange {
            index: agent,
            count: plan.a_right.len(),
        });
    }
    Ok(())
}

/// ξ_i(t) = min{λ̄−λ̲, (A^L(δt−t) + A^R_i t)/(δt v_max (1+t))}, clamped at 0.
fn xi(plan: &DiscretizationPlan, agent: usize, t: f64) -> f64 {
    let cap = plan.lambda_hi - plan.lambda_lo;
    let num = plan.a_left * (plan.dt - t) + plan.a_right[agent] * t;
    let den = plan.dt * plan.v_max * (1.0 + t);
    cap.min(num / den).max(0.0)
}

/// ζ_i(t): the planning fraction profile, λ̲ for the constant profile and
/// λ̲ + ξ_i(t) for the reachability-improving profile.
pub fn zeta(plan: &DiscretizationPlan, agent: usize, t: f64) -> Result<f64, BoundsError> {
    check_agent(plan, agent)?;
    if !(t >= 0.0 && t <= plan.dt) {
        return Err(BoundsError::TimeOutOfRange { t, hi: plan.dt });
    }
    Ok(match plan.zeta {
        ZetaProfile::Constant => plan.lambda_lo,
        ZetaProfile::Corollary => plan.lambda_lo + xi(plan, agent, t),
    })
}

/// Composite Simpson quadrature of ζ_i on [0, t]; the planning radius and the
/// parameter-for-target computation share this value exactly.
pub fn integral_zeta_partial(
    plan: &DiscretizationPlan,
    agent: usize,
    t: f64,
) -> Result<f64, BoundsError> {
    check_agent(plan, agent)?;
    if !(t >= 0.0 && t <= plan.dt) {
        return Err(BoundsError::TimeOutOfRange { t, hi: plan.dt });
    }
    match plan.zeta {
        ZetaProfile::Constant => Ok(plan.lambda_lo * t),
        ZetaProfile::Corollary => {
            if t == 0.0 {
                return Ok(0.0);
            }
            const PANELS: usize = 512;
            let h = t / PANELS as f64;
            let mut acc = xi(plan, agent, 0.0) + xi(plan, agent, t);
            for k in 1..PANELS {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * xi(plan, agent, k as f64 * h);
            }
            // integrate the constant part exactly; quadrature only sees ξ >= 0
            Ok(plan.lambda_lo * t + acc * h / 3.0)
        }
    }
}

pub fn integral_zeta(plan: &DiscretizationPlan, agent: usize) -> Result<f64, BoundsError> {
    integral_zeta_partial(plan, agent, plan.dt)
}

/// r_i = v_max ∫_0^δt ζ_i: the radius of the certified planning ball around
/// χ_i(δt).
pub fn planning_radius(plan: &DiscretizationPlan, agent: usize) -> Result<f64, BoundsError> {
    Ok(plan.v_max * integral_zeta(plan, agent)?)
}

/// α for one agent: zero when its neighbor estimates are deviation-free
/// (always under theorem 2), c M t otherwise.
pub fn plan_alpha(plan: &DiscretizationPlan, agent: usize, t: f64) -> Result<f64, BoundsError> {
    check_agent(plan, agent)?;
    if plan.agent_deviation_free[agent] {
        return Ok(0.0);
    }
    match plan.c {
        Some(c) => Ok(c * plan.m_bound * t),
        None => Ok(0.0),
    }
}

/// β for this plan's (d_max, δt, λ̄, v_max).
pub fn plan_beta(plan: &DiscretizationPlan, t: f64) -> Result<f64, BoundsError> {
    beta(t, plan.d_max, plan.dt, plan.lambda_hi, plan.v_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h1_is_linear() {
        assert_eq!(h_deviation(1, 0.37, 2.0, 1.0, 1.0, 1).unwrap(), 0.74);
    }

    #[test]
    fn h_rejects_kappa_zero() {
        assert_eq!(
            h_deviation(0, 1.0, 1.0, 1.0, 1.0, 1),
            Err(BoundsError::KappaZero)
        );
    }

    #[test]
    fn degenerate_l1_gives_unbounded_horizon() {
        assert_eq!(t_star(0.0, 1.0, 1).unwrap(), Horizon::Unbounded);
        assert_eq!(t_star(1.0, 0.0, 1).unwrap(), Horizon::Unbounded);
    }

    #[test]
    fn beta_endpoints() {
        let dt = 3.0 / 14.0;
        let d = 9.0 / 14.0;
        assert_eq!(beta(0.0, d, dt, 1.0, 5.0).unwrap(), d / 2.0);
        assert!((beta(dt, d, dt, 1.0, 5.0).unwrap() - 5.0 * dt).abs() < 1e-15);
    }

    #[test]
    fn alpha_degree_one_is_mt() {
        assert_eq!(alpha(0.5, 3.0, 0.5, 1).unwrap(), 1.5);
    }

    #[test]
    fn t_bar_at_c_one_equals_t_star() {
        let a = t_star(1.0, 1.0, 1).unwrap().finite().unwrap();
        let b = t_bar(1.0, 1.0, 1, 1.0).unwrap().finite().unwrap();
        assert_eq!(a, b);
    }
}
