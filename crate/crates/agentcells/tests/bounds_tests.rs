use agentcells::bounds::{
    beta, h_deviation, integral_zeta, integral_zeta_partial, plan_theorem1, plan_theorem2,
    planning_radius, t_bar, t_star, validate_plan, zeta, BoundsError, DmaxBranch, Horizon,
    PlanRequest, TheoremKind, ZetaProfile,
};
use agentcells::dynamics::SystemBounds;
use agentcells::fixtures::{
    saturated_chain_bounds, saturated_chain_plan, saturated_chain_request,
    saturated_chain_system, unit_pair_plan,
};
use agentcells::network::Network;
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// independent quadrature oracle for the H family
//
// H_1(s) = M s and H_{k+1}(t) = L1 sqrt(N) e^{L2 t} \int_0^t e^{-L2 s} H_k(s) ds.
// The cumulative integral is built on a shared grid with composite Simpson
// steps for even indices and the asymmetric three-point rule for odd ones,
// so the oracle never touches the closed-form series.

const PANELS: usize = 2048;

fn cumulative_integral(g: &[f64], h: f64) -> Vec<f64> {
    let n = g.len() - 1;
    assert!(n >= 2 && n % 2 == 0);
    let mut f = vec![0.0; n + 1];
    f[1] = h / 12.0 * (5.0 * g[0] + 8.0 * g[1] - g[2]);
    for i in (2..=n).step_by(2) {
        f[i] = f[i - 2] + h / 3.0 * (g[i - 2] + 4.0 * g[i - 1] + g[i]);
    }
    for i in (3..n).step_by(2) {
        f[i] = f[i - 1] + h / 12.0 * (5.0 * g[i - 1] + 8.0 * g[i] - g[i + 1]);
    }
    f
}

struct HOracle {
    times: Vec<f64>,
    /// levels[k] holds H_{k+1} sampled on `times`
    levels: Vec<Vec<f64>>,
}

fn h_oracle(top: usize, horizon: f64, m: f64, l1: f64, l2: f64, n_max: usize) -> HOracle {
    let h = horizon / PANELS as f64;
    let times: Vec<f64> = (0..=PANELS).map(|i| i as f64 * h).collect();
    let root_n = (n_max as f64).sqrt();
    let mut levels = vec![times.iter().map(|&t| m * t).collect::<Vec<f64>>()];
    for _ in 1..top {
        let prev = levels.last().unwrap();
        let g: Vec<f64> = times
            .iter()
            .zip(prev)
            .map(|(&t, &v)| (-l2 * t).exp() * v)
            .collect();
        let acc = cumulative_integral(&g, h);
        let next: Vec<f64> = times
            .iter()
            .zip(&acc)
            .map(|(&t, &a)| l1 * root_n * (l2 * t).exp() * a)
            .collect();
        levels.push(next);
    }
    HOracle { times, levels }
}

fn assert_close_guarded(label: &str, got: f64, want: f64, floor: f64) {
    let scale = got.abs().max(want.abs());
    assert!(
        (got - want).abs() <= 1e-6 * scale + floor,
        "{label}: got {got}, oracle {want}"
    );
}

/// Absolute accuracy limit of the alternating closed-form series in f64: the
/// summands reach ~pref·e^{L2 t}(t + κ/L2) before cancelling down to H_κ, so
/// no evaluation route can resolve differences below that scale times ε.
fn cancellation_floor(kappa: usize, t: f64, m: f64, l1: f64, l2: f64, n_max: usize) -> f64 {
    let root_n = (n_max as f64).sqrt();
    if l2 == 0.0 {
        return 1e-12;
    }
    let pref = (l1 * root_n / l2).powi(kappa as i32 - 1) * m;
    1e-13 * pref * (1.0 + (l2 * t).exp() * (t + kappa as f64 / l2))
}

#[test]
fn closed_forms_match_quadrature_oracle() {
    let sets: [(f64, f64, f64, usize); 4] = [
        (1.0, 1.0, 1.0, 1),
        (2.0, 0.7, 1.3, 4),
        (10.0, 1.0, 1.0, 1),
        (3.0, 2.5, 0.3, 2),
    ];
    for (m, l1, l2, n) in sets {
        let horizon = match t_star(l1, l2, n).unwrap() {
            Horizon::Finite(t) => t,
            Horizon::Unbounded => panic!("finite horizon expected"),
        };
        let oracle = h_oracle(5, horizon, m, l1, l2, n);
        for kappa in 1..=5usize {
            for (i, &t) in oracle.times.iter().enumerate() {
                let closed = h_deviation(kappa, t, m, l1, l2, n).unwrap();
                assert_close_guarded(
                    &format!("H_{kappa}(t={t}) at M={m}, L1={l1}, L2={l2}, N={n}"),
                    closed,
                    oracle.levels[kappa - 1][i],
                    cancellation_floor(kappa, t, m, l1, l2, n),
                );
            }
        }
    }
}

#[test]
fn closed_forms_match_quadrature_without_self_sensitivity() {
    // L2 = 0 degenerates the recursion to iterated integration of M t; the
    // quadrature oracle handles it with unit exponential factors.
    let (m, l1, l2, n) = (1.0, 0.8, 0.0, 3);
    let oracle = h_oracle(5, 2.0, m, l1, l2, n);
    let root_n = (n as f64).sqrt();
    for kappa in 2..=5usize {
        let fact: f64 = (1..=kappa).map(|k| k as f64).product();
        for (i, &t) in oracle.times.iter().enumerate() {
            let closed = h_deviation(kappa, t, m, l1, l2, n).unwrap();
            let explicit = (l1 * root_n).powi(kappa as i32 - 1) * m * t.powi(kappa as i32) / fact;
            assert_close_guarded(
                &format!("H_{kappa}({t}) vs oracle"),
                closed,
                oracle.levels[kappa - 1][i],
                1e-12,
            );
            assert_close_guarded(&format!("H_{kappa}({t}) vs monomial"), closed, explicit, 1e-12);
        }
    }
}

#[test]
fn h2_and_h3_reference_values() {
    // hand-evaluated at unit constants: H_2(1) = e - 2, H_3(1) = 3 - e,
    // H_4(1) computed once by 10^6-panel quadrature and frozen
    let e = std::f64::consts::E;
    assert!((h_deviation(2, 1.0, 1.0, 1.0, 1.0, 1).unwrap() - (e - 2.0)).abs() < 1e-12);
    assert!((h_deviation(3, 1.0, 1.0, 1.0, 1.0, 1).unwrap() - (3.0 - e)).abs() < 1e-12);
    assert!(
        (h_deviation(4, 1.0, 1.0, 1.0, 1.0, 1).unwrap() - 0.07742274268856786).abs() < 1e-10
    );
    for kappa in 1..=6 {
        assert_eq!(h_deviation(kappa, 0.0, 1.0, 1.0, 1.0, 1).unwrap(), 0.0);
    }
}

#[test]
fn h_family_stays_below_linear_envelope_on_certified_horizon() {
    // H_m(t) <= c̄^{m-1} M t on [0, t̄(c̄)]; equality is attained by H_2 at
    // the endpoint, so the comparison carries a relative slack.
    let sets: [(f64, f64, f64, usize); 2] = [(1.0, 1.0, 1.0, 1), (2.0, 0.7, 1.3, 4)];
    for (m, l1, l2, n) in sets {
        for c_bar in [1.0, 0.5] {
            let horizon = match t_bar(l1, l2, n, c_bar).unwrap() {
                Horizon::Finite(t) => t,
                Horizon::Unbounded => panic!("finite horizon expected"),
            };
            for level in 1..=5usize {
                for k in 1..=1000 {
                    let t = horizon * k as f64 / 1000.0;
                    let value = h_deviation(level, t, m, l1, l2, n).unwrap();
                    let envelope = c_bar.powi(level as i32 - 1) * m * t;
                    assert!(
                        value <= envelope + 1e-9 * (1.0 + envelope),
                        "H_{level}({t}) = {value} above envelope {envelope} \
                         (M={m}, L1={l1}, L2={l2}, N={n}, c_bar={c_bar})"
                    );
                }
            }
        }
    }
}

#[test]
fn horizon_roots_match_frozen_values() {
    // both roots at unit constants, frozen from an independent bisection
    let star = match t_star(1.0, 1.0, 1).unwrap() {
        Horizon::Finite(t) => t,
        Horizon::Unbounded => panic!("unit constants have a finite horizon"),
    };
    let bar = match t_bar(1.0, 1.0, 1, 0.5).unwrap() {
        Horizon::Finite(t) => t,
        Horizon::Unbounded => panic!("unit constants have a finite horizon"),
    };
    assert!((star - 1.2564312086261697).abs() < 1e-12);
    assert!((bar - 0.7626885608503390).abs() < 1e-12);
    assert!(bar < star);

    // residuals of the defining equation, evaluated directly
    let g = |t: f64, c: f64| (t).exp() - (1.0 + c) * t - 1.0;
    assert!(g(star, 1.0).abs() < 1e-10);
    assert!(g(bar, 0.5).abs() < 1e-10);

    // c_bar = 1 reduces t̄ to t* by construction
    assert_eq!(t_bar(1.0, 1.0, 1, 1.0).unwrap(), t_star(1.0, 1.0, 1).unwrap());
}

#[test]
fn degenerate_constants_make_the_horizon_unbounded() {
    assert_eq!(t_star(0.0, 1.0, 3).unwrap(), Horizon::Unbounded);
    assert_eq!(t_star(1.0, 0.0, 3).unwrap(), Horizon::Unbounded);
    assert_eq!(t_star(1.0, 1.0, 0).unwrap(), Horizon::Unbounded);
    assert_eq!(h_deviation(3, 0.9, 2.0, 0.0, 1.0, 3).unwrap(), 0.0);
    assert_eq!(h_deviation(3, 0.9, 2.0, 1.0, 1.0, 0).unwrap(), 0.0);
    assert_eq!(t_bar(1.0, 1.0, 1, 0.0), Err(BoundsError::CBarRange(0.0)));
    assert_eq!(t_bar(1.0, 1.0, 1, 1.5), Err(BoundsError::CBarRange(1.5)));
    assert_eq!(h_deviation(0, 1.0, 1.0, 1.0, 1.0, 1), Err(BoundsError::KappaZero));
}

#[test]
fn beta_interpolates_between_half_diameter_and_turn_budget() {
    let (d, dt, hi, v) = (0.64, 0.25, 0.8, 5.0);
    assert_eq!(beta(0.0, d, dt, hi, v).unwrap(), d / 2.0);
    assert!((beta(dt, d, dt, hi, v).unwrap() - hi * v * dt).abs() < 1e-15);
    let mid = beta(dt / 2.0, d, dt, hi, v).unwrap();
    assert!((mid - 0.5 * (d / 2.0 + hi * v * dt)).abs() < 1e-15);
    assert!(matches!(
        beta(dt + 1e-9, d, dt, hi, v),
        Err(BoundsError::TimeOutOfRange { .. })
    ));
}

// ---------------------------------------------------------------------------
// plan fixtures with hand-derived numbers

#[test]
fn saturated_chain_plan_numbers() {
    let plan = saturated_chain_plan();
    assert_eq!(plan.theorem, TheoremKind::T2);
    // K = 1*1*1*5 + 0.4*1*5 = 7, so dt_upper = 0.6*5/7 = 3/7 and dt = 3/14
    assert!((plan.dt_upper.unwrap() - 3.0 / 7.0).abs() < 1e-12);
    assert!((plan.dt - 3.0 / 14.0).abs() < 1e-12);
    // first branch 6*(3/14)/(1+3/7) = 9/10, second 9/7 - 9/14 = 9/14
    assert!((plan.d_branch_first - 0.9).abs() < 1e-12);
    assert!((plan.d_branch_second - 9.0 / 14.0).abs() < 1e-12);
    assert_eq!(plan.binding_branch, DmaxBranch::Second);
    assert!((plan.d_upper - 9.0 / 14.0).abs() < 1e-12);
    assert_eq!(plan.d_max, plan.d_upper);
    // A^L = 3 - 9/28 - 3/2 - 9/28 = 6/7; A^R = 3/2 - 3/2 - ... lands on 0
    assert!((plan.a_left - 6.0 / 7.0).abs() < 1e-12);
    let uniform = plan.a_right_uniform.unwrap();
    assert!(uniform.abs() < 1e-12);
    for &a in &plan.a_right {
        assert!((a - uniform).abs() < 1e-15);
    }
    assert!(plan.agent_deviation_free.iter().all(|&f| f));
    assert!((plan.r_constant - 3.0 / 7.0).abs() < 1e-12);
    assert_eq!(plan.t_bar, None);
    assert!((plan.t_star.unwrap() - 1.2564312086261697).abs() < 1e-12);
    validate_plan(&plan).unwrap();
}

#[test]
fn unit_pair_plan_numbers() {
    let plan = unit_pair_plan();
    assert_eq!(plan.theorem, TheoremKind::T1);
    assert_eq!(plan.c_bar, Some(0.5));
    assert_eq!(plan.c, Some(0.5));
    // K = 1*(0.5*1 + 0.2*0.5) + 0.1*1*0.5 = 0.65; the rate bound 0.45/0.65
    // undercuts t̄ = 0.7626..., so the rate branch caps the step
    assert!((plan.dt_upper.unwrap() - 0.45 / 0.65).abs() < 1e-12);
    assert!(plan.dt_upper.unwrap() < plan.t_bar.unwrap());
    assert!((plan.t_bar.unwrap() - 0.7626885608503390).abs() < 1e-12);
    assert!((plan.dt - 0.5 * 0.45 / 0.65).abs() < 1e-12);
    // at dt = 9/26: second branch 0.9*dt - 1.3*dt^2 = 105.3/676
    assert_eq!(plan.binding_branch, DmaxBranch::Second);
    assert!((plan.d_upper - 105.3 / 676.0).abs() < 1e-12);
    // a two-link chain is fully closed at depth 2, so both reachability
    // coefficients use the sharp λ̄v rate even under the general theorem
    assert_eq!(plan.agent_deviation_free, vec![true, true]);
    assert_eq!(plan.a_right[0], plan.a_right[1]);
    assert!(plan.a_right[0] > 0.0 && plan.a_left > 0.0);
    assert_eq!(plan.a_right_uniform, None);
    validate_plan(&plan).unwrap();
}

#[test]
fn plan_interval_endpoints() {
    let bounds = saturated_chain_bounds();
    let system = saturated_chain_system();
    let closure = system.network.closure_report(2);
    let base = saturated_chain_request();

    // the step interval is open on the right
    let mut req = base.clone();
    req.dt = Some(3.0 / 7.0);
    match plan_theorem2(&bounds, &closure, &req) {
        Err(BoundsError::DtOutOfInterval { .. }) => {}
        other => panic!("expected step rejection, got {other:?}"),
    }
    req.dt = Some(3.0 / 7.0 - 1e-9);
    plan_theorem2(&bounds, &closure, &req).unwrap();

    // the diameter interval is closed on the right
    let reference = saturated_chain_plan();
    let mut req = base.clone();
    req.d_max = Some(reference.d_upper);
    plan_theorem2(&bounds, &closure, &req).unwrap();
    req.d_max = Some(reference.d_upper * (1.0 + 1e-9));
    match plan_theorem2(&bounds, &closure, &req) {
        Err(BoundsError::DmaxOutOfInterval { branch, .. }) => assert_eq!(branch, "second"),
        other => panic!("expected diameter rejection, got {other:?}"),
    }

    // round-trip validation rejects hand-mutated plans
    let mut mutated = reference.clone();
    mutated.d_max = mutated.d_upper * 1.1;
    assert!(matches!(
        validate_plan(&mutated),
        Err(BoundsError::DmaxOutOfInterval { .. })
    ));
    let mut mutated = reference;
    mutated.dt = mutated.dt_upper.unwrap();
    assert!(matches!(
        validate_plan(&mutated),
        Err(BoundsError::DtOutOfInterval { .. })
    ));
}

#[test]
fn plan_rejects_bad_fractions_and_contraction() {
    let bounds = saturated_chain_bounds();
    let system = saturated_chain_system();
    let closure = system.network.closure_report(2);

    let mut req = saturated_chain_request();
    req.allow_lambda_hi_one = false;
    assert_eq!(
        plan_theorem2(&bounds, &closure, &req),
        Err(BoundsError::LambdaHiRange(1.0))
    );

    let mut req = saturated_chain_request();
    req.lambda_hi = 1.2;
    assert_eq!(
        plan_theorem2(&bounds, &closure, &req),
        Err(BoundsError::LambdaHiRange(1.2))
    );

    let mut req = saturated_chain_request();
    req.lambda_lo = 0.7;
    req.lambda_hi = 0.5;
    assert!(matches!(
        plan_theorem2(&bounds, &closure, &req),
        Err(BoundsError::LambdaOrder { .. })
    ));

    let mut req = saturated_chain_request();
    req.lambda_lo = -0.1;
    assert!(matches!(
        plan_theorem2(&bounds, &closure, &req),
        Err(BoundsError::LambdaOrder { .. })
    ));

    let mut req = saturated_chain_request();
    req.lambda_hi = 0.9;
    req.c_bar = Some(1.0);
    assert_eq!(
        plan_theorem1(&bounds, &closure, &req),
        Err(BoundsError::CBarRange(1.0))
    );
    req.c_bar = None;
    assert_eq!(
        plan_theorem1(&bounds, &closure, &req),
        Err(BoundsError::CBarRequired)
    );

    let mut req = saturated_chain_request();
    req.degree = 0;
    assert_eq!(
        plan_theorem2(&bounds, &closure, &req),
        Err(BoundsError::DegreeZero)
    );

    let req = saturated_chain_request();
    let shallow = system.network.closure_report(1);
    assert_eq!(
        plan_theorem2(&bounds, &shallow, &req),
        Err(BoundsError::ClosureDegreeMismatch {
            closure: 1,
            requested: 2
        })
    );
}

#[test]
fn zero_deviation_plan_needs_closed_shells() {
    // in the three-agent chain 0 <- 1 <- 2, agent 0 still sees level 2 at
    // degree 1, so only the general theorem applies
    let net = Network::new(vec![vec![1], vec![2], vec![]]).unwrap();
    let closure = net.closure_report(1);
    let bounds = SystemBounds {
        m_bound: 2.0,
        l1: 1.0,
        l2: 1.0,
        v_max: 1.0,
        n_max: 1,
    };
    let mut req = PlanRequest::new(0.2, 0.6, 1);
    assert_eq!(
        plan_theorem2(&bounds, &closure, &req),
        Err(BoundsError::Theorem2Precondition { agent: 0 })
    );
    req.c_bar = Some(0.5);
    let plan = plan_theorem1(&bounds, &closure, &req).unwrap();
    // degree 1 leaves the contraction power at c̄^0 = 1
    assert_eq!(plan.c, Some(1.0));
    // only agent 0 still sees an open shell; its coefficient carries the
    // blunt cM + λ̄v rate and is strictly worse
    assert_eq!(plan.agent_deviation_free, vec![false, true, true]);
    assert_eq!(plan.a_right[1], plan.a_right[2]);
    assert!(plan.a_right[2] > plan.a_right[0]);
}

#[test]
fn uncoupled_constants_force_an_explicit_step() {
    let net = Network::new(vec![vec![], vec![]]).unwrap();
    let closure = net.closure_report(1);
    let bounds = SystemBounds {
        m_bound: 1.0,
        l1: 0.0,
        l2: 0.0,
        v_max: 0.5,
        n_max: 0,
    };
    let req = PlanRequest::new(0.0, 0.5, 1);
    assert_eq!(
        plan_theorem2(&bounds, &closure, &req),
        Err(BoundsError::DtUnbounded)
    );
    let mut req = PlanRequest::new(0.0, 0.5, 1);
    req.dt = Some(0.3);
    let plan = plan_theorem2(&bounds, &closure, &req).unwrap();
    assert_eq!(plan.dt_upper, None);
    assert_eq!(plan.t_star, None);
    // with no coupling both branches collapse to 2(1-λ̲)v δt
    assert!((plan.d_upper - 2.0 * 0.5 * 0.3).abs() < 1e-15);
    validate_plan(&plan).unwrap();
}

// ---------------------------------------------------------------------------
// planning-fraction profiles and radii

#[test]
fn constant_profile_radius_is_exact() {
    let plan = saturated_chain_plan();
    for agent in 0..4 {
        let r = planning_radius(&plan, agent).unwrap();
        assert!((r - plan.r_constant).abs() < 1e-15);
        assert!((integral_zeta(&plan, agent).unwrap() - plan.lambda_lo * plan.dt).abs() < 1e-16);
        assert_eq!(zeta(&plan, agent, 0.0).unwrap(), plan.lambda_lo);
        assert_eq!(
            integral_zeta_partial(&plan, agent, plan.dt / 3.0).unwrap(),
            plan.lambda_lo * (plan.dt / 3.0)
        );
    }
    assert!(matches!(
        zeta(&plan, 0, plan.dt * 1.5),
        Err(BoundsError::TimeOutOfRange { .. })
    ));
    assert!(matches!(
        zeta(&plan, 9, 0.0),
        Err(BoundsError::AgentOutOfRange { .. })
    ));
}

#[test]
fn corollary_profile_improves_the_radius() {
    let mut plan = saturated_chain_plan();
    plan.zeta = ZetaProfile::Corollary;
    let dt = plan.dt;
    for agent in 0..4 {
        // ζ stays inside [λ̲, λ̄] and collapses to λ̲ at the step end
        // because A^R = 0 for this plan
        for k in 0..=1000 {
            let t = dt * k as f64 / 1000.0;
            let z = zeta(&plan, agent, t).unwrap();
            assert!(z >= plan.lambda_lo - 1e-15 && z <= plan.lambda_hi + 1e-15);
        }
        let at_end = zeta(&plan, agent, dt).unwrap();
        assert!((at_end - plan.lambda_lo).abs() < 1e-15);
        // ζ(0) = λ̲ + min(λ̄-λ̲, A^L/v) = 0.4 + 6/35
        let at_start = zeta(&plan, agent, 0.0).unwrap();
        assert!((at_start - (0.4 + 6.0 / 35.0)).abs() < 1e-12);

        let improved = planning_radius(&plan, agent).unwrap();
        assert!(improved > plan.r_constant + 1e-3);

        // midpoint-rule oracle for the quadrature inside integral_zeta
        let n = 100_000;
        let h = dt / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            acc += zeta(&plan, agent, (k as f64 + 0.5) * h).unwrap();
        }
        let oracle = acc * h;
        let integral = integral_zeta(&plan, agent).unwrap();
        assert!(
            (integral - oracle).abs() < 1e-9,
            "agent {agent}: quadrature {integral} vs midpoint {oracle}"
        );
    }
}

#[test]
fn partial_integral_is_monotone_and_consistent() {
    let mut plan = saturated_chain_plan();
    plan.zeta = ZetaProfile::Corollary;
    let mut last = 0.0;
    for k in 0..=64 {
        let t = plan.dt * k as f64 / 64.0;
        let v = integral_zeta_partial(&plan, 0, t).unwrap();
        assert!(v >= last - 1e-15);
        // bracketed between the constant and maximal profiles
        assert!(v >= plan.lambda_lo * t - 1e-12);
        assert!(v <= plan.lambda_hi * t + 1e-12);
        last = v;
    }
    assert_eq!(integral_zeta_partial(&plan, 0, 0.0).unwrap(), 0.0);
    assert_eq!(
        integral_zeta_partial(&plan, 0, plan.dt).unwrap(),
        integral_zeta(&plan, 0).unwrap()
    );
}

// ---------------------------------------------------------------------------
// properties over randomized constants

fn arb_plan_inputs() -> impl Strategy<Value = (SystemBounds, PlanRequest)> {
    (
        0.2f64..2.0,        // l1
        0.2f64..2.0,        // l2
        1usize..4,          // n_max
        0.5f64..3.0,        // m_bound
        0.1f64..0.9,        // v as a fraction of m
        0.0f64..0.5,        // lambda_lo
        0.05f64..0.45,      // hi - lo
        0.1f64..0.95,       // c_bar
        prop::bool::ANY,    // corollary profile?
    )
        .prop_map(|(l1, l2, n, m, vf, lo, gap, c_bar, corollary)| {
            let bounds = SystemBounds {
                m_bound: m,
                l1,
                l2,
                v_max: vf * m,
                n_max: n,
            };
            let mut req = PlanRequest::new(lo, lo + gap, 1);
            req.c_bar = Some(c_bar);
            req.zeta = if corollary {
                ZetaProfile::Corollary
            } else {
                ZetaProfile::Constant
            };
            (bounds, req)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn t_bar_is_strictly_increasing_in_c_bar(
        l1 in 0.1f64..3.0,
        l2 in 0.1f64..3.0,
        n in 1usize..6,
        c_lo in 0.05f64..0.5,
        bump in 0.05f64..0.5,
    ) {
        let c_hi = (c_lo + bump).min(1.0);
        let a = t_bar(l1, l2, n, c_lo).unwrap().finite().unwrap();
        let b = t_bar(l1, l2, n, c_hi).unwrap().finite().unwrap();
        prop_assert!(a < b);
        let star = t_star(l1, l2, n).unwrap().finite().unwrap();
        prop_assert!(b <= star);
        // residual of the defining equation at the reported root
        let coeff = l2 + c_lo * l2 * l2 / (l1 * (n as f64).sqrt());
        let g = (l2 * a).exp() - coeff * a - 1.0;
        prop_assert!(g.abs() <= 1e-9 * (1.0 + (l2 * a).exp()));
    }

    #[test]
    fn random_plans_satisfy_their_own_intervals((bounds, req) in arb_plan_inputs()) {
        let net = Network::new(vec![vec![1], vec![2], vec![0]]).unwrap();
        let closure = net.closure_report(1);
        let plan = plan_theorem1(&bounds, &closure, &req).unwrap();
        prop_assert!(validate_plan(&plan).is_ok());
        let upper = plan.dt_upper.unwrap();
        prop_assert!(plan.dt > 0.0 && plan.dt < upper);
        prop_assert!(plan.d_max > 0.0 && plan.d_max <= plan.d_upper);
        prop_assert!(plan.d_upper <= plan.d_branch_first + 1e-15);
        prop_assert!(plan.d_upper <= plan.d_branch_second + 1e-15);

        for agent in 0..3 {
            let cap = plan.lambda_hi - plan.lambda_lo;
            for k in 0..=32 {
                let t = plan.dt * k as f64 / 32.0;
                let z = zeta(&plan, agent, t).unwrap();
                prop_assert!(z >= plan.lambda_lo - 1e-15);
                prop_assert!(z <= plan.lambda_lo + cap + 1e-15);
            }
            let r = planning_radius(&plan, agent).unwrap();
            prop_assert!(r >= plan.r_constant * (1.0 - 1e-12));
            prop_assert!(r <= plan.lambda_hi * plan.v_max * plan.dt * (1.0 + 1e-12));
        }
    }
}
