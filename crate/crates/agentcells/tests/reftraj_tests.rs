use agentcells::decomposition::Decomposition;
use agentcells::dynamics::{KernelSpec, System};
use agentcells::fixtures::{
    saturated_chain_grid, saturated_chain_initial_cells, saturated_chain_system,
};
use agentcells::network::Network;
use agentcells::reftraj::{solve_reference_ivp, IvpCase, ReftrajError};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn uncoupled_network_stays_at_reference_points() {
    let net = Network::new(vec![vec![], vec![], vec![]]).unwrap();
    let sys = System::new(net, vec![KernelSpec::Zero; 3], 2).unwrap();
    let grid = Decomposition::new(vec![-2.0, -2.0], vec![2.0, 2.0], vec![4, 4]).unwrap();
    for (agent, cell) in [(0usize, 3usize), (1, 9), (2, 14)] {
        let cfg = sys.network.project(&[3, 9, 14], agent, 1).unwrap();
        let b = solve_reference_ivp(&sys, &grid, &cfg, 0.7, 32).unwrap();
        assert_eq!(b.case, IvpCase::FullCoupled);
        assert_eq!(b.members, vec![agent]);
        let anchor = grid.reference_point(cell).unwrap();
        for k in 0..b.knot_times().len() {
            assert_eq!(b.knot_state(k, agent).unwrap(), &anchor[..]);
        }
        assert_eq!(b.max_knot_speed(), 0.0);
    }
}

#[test]
fn linear_diffusive_pair_matches_exponential() {
    // agent 0 relaxes toward a constant upstream agent:
    // x0' = a (c1 - x0), so x0(t) = c1 + (x0(0) - c1) e^{-a t}
    let a = 0.7;
    let net = Network::new(vec![vec![1], vec![]]).unwrap();
    let sys = System::new(
        net,
        vec![
            KernelSpec::LinearDiffusive { weights: vec![a] },
            KernelSpec::Zero,
        ],
        1,
    )
    .unwrap();
    let grid = Decomposition::new(vec![0.0], vec![8.0], vec![8]).unwrap();
    let cfg = sys.network.project(&[1, 6], 0, 1).unwrap();
    let dt = 0.5;
    let b = solve_reference_ivp(&sys, &grid, &cfg, dt, 64).unwrap();
    let x00 = grid.reference_point(1).unwrap()[0];
    let c1 = grid.reference_point(6).unwrap()[0];
    assert_eq!(x00, 1.5);
    assert_eq!(c1, 6.5);
    let closed = |t: f64| c1 + (x00 - c1) * (-a * t).exp();
    for (k, &t) in b.knot_times().to_vec().iter().enumerate() {
        let got = b.knot_state(k, 0).unwrap()[0];
        assert!(
            (got - closed(t)).abs() < 1e-8,
            "knot {k}: integrated {got} vs closed form {}",
            closed(t)
        );
    }
    // Hermite estimates between knots stay within interpolation accuracy
    for j in 0..=500 {
        let t = dt * j as f64 / 500.0;
        let got = b.estimate(0, t).unwrap()[0];
        assert!((got - closed(t)).abs() < 1e-6);
    }
    assert!((b.at_end(0).unwrap()[0] - closed(dt)).abs() < 1e-8);
    // the upstream agent never moves
    assert_eq!(b.at_end(1).unwrap()[0], c1);
}

#[test]
fn refining_the_internal_step_converges() {
    // trajectories that cross the saturation kink drop below classical RK4
    // order, so the endpoint error is checked to shrink with each halving
    // instead of demanding the smooth-field rate everywhere
    let sys = saturated_chain_system();
    let grid = saturated_chain_grid();
    let full = saturated_chain_initial_cells(&grid);
    for agent in 0..4 {
        let cfg = sys.network.project(&full, agent, 2).unwrap();
        let solve =
            |div: usize| solve_reference_ivp(&sys, &grid, &cfg, 3.0 / 14.0, div).unwrap();
        let ladder = [solve(64), solve(128), solve(256), solve(512)];
        for &member in &ladder[0].members {
            let mut gaps = [0.0; 3];
            for (g, pair) in gaps.iter_mut().zip(ladder.windows(2)) {
                *g = dist(pair[0].at_end(member).unwrap(), pair[1].at_end(member).unwrap());
            }
            assert!(
                gaps[0] < 2e-6,
                "agent {agent} member {member}: divisor refinement moved {}",
                gaps[0]
            );
            for w in 0..2 {
                assert!(
                    gaps[w + 1] <= gaps[w] * 0.75 + 1e-15,
                    "agent {agent} member {member}: no contraction {gaps:?}"
                );
            }
        }
    }
    // away from the kink the full fourth-order rate shows
    let cfg = sys.network.project(&full, 0, 2).unwrap();
    let coarse = solve_reference_ivp(&sys, &grid, &cfg, 3.0 / 14.0, 64).unwrap();
    let fine = solve_reference_ivp(&sys, &grid, &cfg, 3.0 / 14.0, 128).unwrap();
    assert!(dist(coarse.at_end(0).unwrap(), fine.at_end(0).unwrap()) < 1e-11);
}

#[test]
fn consistent_configs_share_member_trajectories_exactly() {
    // two bundles drawn from one full configuration agree on every shared
    // member, bit for bit — the well-posedness hinge for the abstraction
    let sys = saturated_chain_system();
    let grid = saturated_chain_grid();
    let full = saturated_chain_initial_cells(&grid);
    let pairs = [(3usize, 2usize), (2, 1), (0, 1)];
    for (i, l) in pairs {
        let bi = solve_reference_ivp(&sys, &grid, &sys.network.project(&full, i, 2).unwrap(), 3.0 / 14.0, 64).unwrap();
        let bl = solve_reference_ivp(&sys, &grid, &sys.network.project(&full, l, 2).unwrap(), 3.0 / 14.0, 64).unwrap();
        let shared: Vec<usize> = bi
            .members
            .iter()
            .copied()
            .filter(|m| bl.members.contains(m))
            .collect();
        assert!(!shared.is_empty());
        assert_eq!(bi.knot_times(), bl.knot_times());
        for &member in &shared {
            for k in 0..bi.knot_times().len() {
                assert_eq!(
                    bi.knot_state(k, member).unwrap(),
                    bl.knot_state(k, member).unwrap(),
                    "member {member} diverges between bundles {i} and {l} at knot {k}"
                );
            }
        }
    }
}

#[test]
fn open_shell_freezes_the_outer_level() {
    // agent 0 of the eight-agent graph still sees level 3 = {3, 7} at
    // degree 2, so its bundle freezes the level-2 members
    let net = agentcells::fixtures::eight_agent_graph();
    let kernels: Vec<KernelSpec> = (0..8).map(|_| KernelSpec::SaturatedSum { rho: 0.5 }).collect();
    let sys = System::new(net, kernels, 1).unwrap();
    let grid = Decomposition::new(vec![-1.0], vec![1.0], vec![16]).unwrap();
    let full = vec![0usize, 3, 15, 8, 12, 10, 5, 2];
    let cfg = sys.network.project(&full, 0, 2).unwrap();
    let b = solve_reference_ivp(&sys, &grid, &cfg, 0.4, 32).unwrap();
    assert_eq!(b.case, IvpCase::FrozenLevelM);
    assert_eq!(b.members, vec![0, 1, 5, 2, 4, 6]);
    assert_eq!(b.frozen, vec![false, false, false, true, true, true]);
    for &member in &[2usize, 4, 6] {
        let anchor = grid.reference_point(full[member]).unwrap();
        for k in 0..b.knot_times().len() {
            assert_eq!(b.knot_state(k, member).unwrap(), &anchor[..]);
        }
    }
    // the center agent is pulled by its level-1 neighbors
    assert!(dist(b.at_end(0).unwrap(), b.initial(0).unwrap()) > 1e-3);
    // level-1 members evolve too
    assert!(!b.is_frozen(1).unwrap() && !b.is_frozen(5).unwrap());
}

#[test]
fn knot_speeds_respect_the_magnitude_bound() {
    let sys = saturated_chain_system();
    let grid = saturated_chain_grid();
    let full = saturated_chain_initial_cells(&grid);
    for agent in 0..4 {
        let cfg = sys.network.project(&full, agent, 2).unwrap();
        let b = solve_reference_ivp(&sys, &grid, &cfg, 3.0 / 14.0, 64).unwrap();
        // |f| <= rho = 10 for every kernel in the chain scenario
        assert!(b.max_knot_speed() <= 10.0 + 1e-12);
    }
}

#[test]
fn bundle_accessors_reject_bad_queries() {
    let sys = saturated_chain_system();
    let grid = saturated_chain_grid();
    let full = saturated_chain_initial_cells(&grid);
    let cfg = sys.network.project(&full, 2, 2).unwrap();
    let b = solve_reference_ivp(&sys, &grid, &cfg, 0.2, 16).unwrap();
    assert_eq!(
        b.estimate(3, 0.1),
        Err(ReftrajError::MemberNotInBundle { member: 3, agent: 2 })
    );
    assert!(matches!(
        b.estimate(2, 0.4),
        Err(ReftrajError::TimeOutOfRange { .. })
    ));
    assert!(matches!(
        b.knot_state(999, 2),
        Err(ReftrajError::KnotOutOfRange { .. })
    ));
    assert_eq!(
        solve_reference_ivp(&sys, &grid, &cfg, 0.2, 0),
        Err(ReftrajError::ZeroDivisor)
    );
    assert!(matches!(
        solve_reference_ivp(&sys, &grid, &cfg, 0.0, 16),
        Err(ReftrajError::NonPositiveDt(_))
    ));
    assert!(matches!(
        solve_reference_ivp(&sys, &grid, &cfg, f64::NAN, 16),
        Err(ReftrajError::NonPositiveDt(_))
    ));
}
