//! Built-in fixtures: the eight-agent directed graph whose shell structure
//! the neighborhood tests pin down, and a four-agent planar system with
//! saturated attraction kernels that the self-test, the bundled scenario,
//! and the acceptance suite drive end to end.

use crate::bounds::{
    plan_theorem1, plan_theorem2, DiscretizationPlan, PlanRequest, ZetaProfile,
};
use crate::decomposition::Decomposition;
use crate::dynamics::{KernelSpec, System, SystemBounds};
use crate::network::Network;

/// Eight agents with a mix of one-way and mutual edges; agents 0 and 4 have
/// their exact shells frozen in the test suites (agent 0 reaches everyone
/// within three hops, agent 4's three-hop shell is empty).
pub fn eight_agent_graph() -> Network {
    Network::new(vec![
        vec![1, 5],
        vec![2],
        vec![1, 3],
        vec![],
        vec![2],
        vec![0, 1, 4, 6],
        vec![5, 7],
        vec![6],
    ])
    .expect("fixture graph is valid")
}

/// Four planar agents: 0 is attracted to 1, 2 to 1, 3 to 2 through
/// saturated-difference kernels with threshold 10; agent 1 has no coupling
/// and is free to be driven as a pure input.
pub fn saturated_chain_system() -> System {
    let net = Network::new(vec![vec![1], vec![], vec![1], vec![2]]).expect("valid graph");
    System::new(
        net,
        vec![
            KernelSpec::SaturatedSum { rho: 10.0 },
            KernelSpec::Zero,
            KernelSpec::SaturatedSum { rho: 10.0 },
            KernelSpec::SaturatedSum { rho: 10.0 },
        ],
        2,
    )
    .expect("valid system")
}

/// [-10, 10]^2 split into 44 x 44 squares; the cell diagonal 0.642824...
/// sits just inside the plan's diameter bound 9/14.
pub fn saturated_chain_grid() -> Decomposition {
    Decomposition::new(vec![-10.0, -10.0], vec![10.0, 10.0], vec![44, 44])
        .expect("valid decomposition")
}

pub fn saturated_chain_bounds() -> SystemBounds {
    saturated_chain_system()
        .derive_bounds(5.0, None, None)
        .expect("bounds certify")
}

pub fn saturated_chain_request() -> PlanRequest {
    PlanRequest {
        lambda_lo: 0.4,
        lambda_hi: 1.0,
        c_bar: None,
        degree: 2,
        dt: None,
        d_max: None,
        allow_lambda_hi_one: true,
        zeta: ZetaProfile::Constant,
        per_agent: None,
    }
}

/// The zero-deviation plan: dt = 3/14, diameter bound 9/14 (second branch
/// binding), uniform right reachability coefficient exactly 0.
pub fn saturated_chain_plan() -> DiscretizationPlan {
    let system = saturated_chain_system();
    let closure = system.network.closure_report(2);
    plan_theorem2(
        &saturated_chain_bounds(),
        &closure,
        &saturated_chain_request(),
    )
    .expect("plan validates")
}

pub fn saturated_chain_initial_states() -> Vec<Vec<f64>> {
    vec![
        vec![9.0, 4.0],
        vec![4.0, 4.0],
        vec![-6.0, 6.0],
        vec![-9.0, -4.0],
    ]
}

pub fn saturated_chain_initial_cells(grid: &Decomposition) -> Vec<usize> {
    saturated_chain_initial_states()
        .iter()
        .map(|x| grid.locate(x).expect("initial state inside workspace"))
        .collect()
}

/// Agent 1 is uncoupled and driven by this constant velocity in the bundled
/// scenario.
pub const CONSTANT_INPUT_AGENT: usize = 1;

pub fn constant_input() -> Vec<f64> {
    vec![-1.0, -4.0]
}

/// Two agents at unit constants (M = 1, both Lipschitz constants 1, one
/// neighbor): the smallest system whose general-theorem plan numbers are
/// frozen in the tests.
pub fn unit_pair_system() -> System {
    let net = Network::new(vec![vec![1], vec![]]).expect("valid graph");
    System::new(
        net,
        vec![KernelSpec::SaturatedSum { rho: 1.0 }, KernelSpec::Zero],
        2,
    )
    .expect("valid system")
}

pub fn unit_pair_request() -> PlanRequest {
    PlanRequest {
        lambda_lo: 0.1,
        lambda_hi: 0.2,
        c_bar: Some(0.5),
        degree: 2,
        dt: None,
        d_max: None,
        allow_lambda_hi_one: false,
        zeta: ZetaProfile::Constant,
        per_agent: None,
    }
}

/// General-theorem plan at unit constants with contraction 0.5 and input
/// bound 0.5: the step upper bound is 0.45/0.65 (the rate branch binds,
/// not the deviation horizon 0.7626...).
pub fn unit_pair_plan() -> DiscretizationPlan {
    let system = unit_pair_system();
    let bounds = system.derive_bounds(0.5, None, None).expect("bounds certify");
    let closure = system.network.closure_report(2);
    plan_theorem1(&bounds, &closure, &unit_pair_request()).expect("plan validates")
}
