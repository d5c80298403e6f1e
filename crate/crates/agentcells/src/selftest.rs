//! Fast self-checks over the built-in fixtures. The command-line `selftest`
//! subcommand prints one line per check; the full acceptance suite runs the
//! same ground at much higher trial counts.

use crate::abstraction::TransitionSystem;
use crate::bounds::{self, DmaxBranch, ZetaProfile};
use crate::fixtures;
use crate::linalg::dist;
use crate::network::MCellConfig;
use crate::reftraj::solve_reference_ivp;

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

fn check(name: &'static str, run: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match run() {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn near(label: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() < tol {
        Ok(())
    } else {
        Err(format!("{label}: got {got}, want {want} within {tol}"))
    }
}

pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        check("graph-shells", || {
            let net = fixtures::eight_agent_graph();
            let ls0 = net.level_sets(0, 3).map_err(|e| e.to_string())?;
            if ls0.levels != vec![vec![0], vec![1, 5], vec![2, 4, 6], vec![3, 7]] {
                return Err(format!("agent 0 shells: {:?}", ls0.levels));
            }
            let ls4 = net.level_sets(4, 3).map_err(|e| e.to_string())?;
            if ls4.levels != vec![vec![4], vec![2], vec![1, 3], vec![]] {
                return Err(format!("agent 4 shells: {:?}", ls4.levels));
            }
            Ok("agent 0 reaches all eight in three hops; agent 4's three-hop shell empty".into())
        }),
        check("horizon-roots", || {
            let ts = bounds::t_star(1.0, 1.0, 1)
                .map_err(|e| e.to_string())?
                .finite()
                .ok_or("unbounded")?;
            near("t_star", ts, 1.256_431_208_626_169_7, 1e-12)?;
            let res = (ts.exp() - 2.0 * ts - 1.0).abs();
            if res > 1e-10 {
                return Err(format!("t_star residual {res}"));
            }
            let tb = bounds::t_bar(1.0, 1.0, 1, 0.5)
                .map_err(|e| e.to_string())?
                .finite()
                .ok_or("unbounded")?;
            near("t_bar", tb, 0.762_688_560_850_339_0, 1e-12)?;
            let res_b = (tb.exp() - 1.5 * tb - 1.0).abs();
            if res_b > 1e-10 || !(tb < ts) {
                return Err(format!("t_bar residual {res_b}, t_bar < t_star: {}", tb < ts));
            }
            Ok(format!("t_star {ts:.12}, t_bar {tb:.12}, residuals < 1e-10"))
        }),
        check("plan-numbers", || {
            let plan = fixtures::saturated_chain_plan();
            near("dt", plan.dt, 3.0 / 14.0, 1e-12)?;
            near("dt_upper", plan.dt_upper.ok_or("no dt bound")?, 3.0 / 7.0, 1e-12)?;
            near("d_upper", plan.d_upper, 9.0 / 14.0, 1e-12)?;
            near("first branch", plan.d_branch_first, 0.9, 1e-12)?;
            if plan.binding_branch != DmaxBranch::Second {
                return Err("expected the second diameter branch to bind".into());
            }
            near("a_left", plan.a_left, 6.0 / 7.0, 1e-12)?;
            near(
                "a_right",
                plan.a_right_uniform.ok_or("no uniform coefficient")?,
                0.0,
                1e-12,
            )?;
            near("r", plan.r_constant, 3.0 / 7.0, 1e-12)?;
            Ok("dt 3/14, diameter bound 9/14 (second branch), coefficients 6/7 and 0".into())
        }),
        check("deviation-closed-forms", || {
            let e = std::f64::consts::E;
            near(
                "order 2 at t=1",
                bounds::h_deviation(2, 1.0, 1.0, 1.0, 1.0, 1).map_err(|e| e.to_string())?,
                e - 2.0,
                1e-12,
            )?;
            near(
                "order 3 at t=1",
                bounds::h_deviation(3, 1.0, 1.0, 1.0, 1.0, 1).map_err(|e| e.to_string())?,
                3.0 - e,
                1e-12,
            )?;
            near(
                "order 4 at t=1",
                bounds::h_deviation(4, 1.0, 1.0, 1.0, 1.0, 1).map_err(|e| e.to_string())?,
                0.077_422_742_688_567_86,
                1e-12,
            )?;
            for kappa in 1..=6 {
                let v = bounds::h_deviation(kappa, 0.0, 1.0, 1.0, 1.0, 1)
                    .map_err(|e| e.to_string())?;
                if v != 0.0 {
                    return Err(format!("order {kappa} at t=0 gives {v}, want exactly 0"));
                }
            }
            Ok("closed forms hit e-2, 3-e and the frozen order-4 value; all vanish at 0".into())
        }),
        check("estimate-agreement", || {
            let system = fixtures::saturated_chain_system();
            let grid = fixtures::saturated_chain_grid();
            let plan = fixtures::saturated_chain_plan();
            let full = fixtures::saturated_chain_initial_cells(&grid);
            let cfg3 = system.network.project(&full, 3, 2).map_err(|e| e.to_string())?;
            let cfg2 = system.network.project(&full, 2, 2).map_err(|e| e.to_string())?;
            let b3 = solve_reference_ivp(&system, &grid, &cfg3, plan.dt, 32)
                .map_err(|e| e.to_string())?;
            let b2 = solve_reference_ivp(&system, &grid, &cfg2, plan.dt, 32)
                .map_err(|e| e.to_string())?;
            let mut worst = 0.0f64;
            for &member in &b2.members {
                if b3.member_position(member).is_none() {
                    continue;
                }
                for k in 0..b3.knot_times().len() {
                    let a = b3.knot_state(k, member).map_err(|e| e.to_string())?;
                    let b = b2.knot_state(k, member).map_err(|e| e.to_string())?;
                    worst = worst.max(dist(a, b));
                }
            }
            if worst != 0.0 {
                return Err(format!(
                    "shared member trajectories differ by {worst}, want exact equality"
                ));
            }
            Ok("consistent bundles agree exactly on shared members".into())
        }),
        check("closed-loop", || {
            let system = fixtures::saturated_chain_system();
            let grid = fixtures::saturated_chain_grid();
            let plan = fixtures::saturated_chain_plan();
            let full = fixtures::saturated_chain_initial_cells(&grid);
            let cfg = system.network.project(&full, 0, 2).map_err(|e| e.to_string())?;
            let ts = TransitionSystem::new(&system, &grid, &plan, 0, 32)
                .map_err(|e| e.to_string())?;
            let post = ts.post(&cfg).map_err(|e| e.to_string())?;
            let target = *post.cells.last().ok_or("empty successor set")?;
            let report = ts
                .verify_transition(&cfg, target, 8, seed)
                .map_err(|e| e.to_string())?;
            if !report.passed {
                return Err(report.consistency.failures.join("; "));
            }
            if report.consistency.worst_sim_vs_analytic > 1e-8 {
                return Err(format!(
                    "simulated loop drifts {} from the analytic solution",
                    report.consistency.worst_sim_vs_analytic
                ));
            }
            Ok(format!(
                "arrival error {:.2e}, control margin {:.3}, tube margin {:.3}",
                report.consistency.worst_arrival_error,
                report.consistency.worst_control_margin,
                report.consistency.worst_tube_margin
            ))
        }),
        check("post-operator", || {
            let system = fixtures::saturated_chain_system();
            let grid = fixtures::saturated_chain_grid();
            let plan = fixtures::saturated_chain_plan();
            let full = fixtures::saturated_chain_initial_cells(&grid);
            let cfg = system.network.project(&full, 2, 2).map_err(|e| e.to_string())?;
            let ts = TransitionSystem::new(&system, &grid, &plan, 2, 32)
                .map_err(|e| e.to_string())?;
            let a = ts.post(&cfg).map_err(|e| e.to_string())?;
            let fresh = TransitionSystem::new(&system, &grid, &plan, 2, 32)
                .map_err(|e| e.to_string())?;
            let b = fresh.post(&cfg).map_err(|e| e.to_string())?;
            if a != b {
                return Err("recomputed successor set differs".into());
            }
            let center = grid.locate(&a.chi_end).map_err(|e| e.to_string())?;
            if a.cells.binary_search(&center).is_err() {
                return Err("successor set misses the endpoint's own cell".into());
            }
            Ok(format!("{} successor cells, deterministic", a.cells.len()))
        }),
        check("profile-dominance", || {
            let system = fixtures::saturated_chain_system();
            let grid = fixtures::saturated_chain_grid();
            let constant = fixtures::saturated_chain_plan();
            let mut req = fixtures::saturated_chain_request();
            req.zeta = ZetaProfile::Corollary;
            let closure = system.network.closure_report(2);
            let corollary =
                bounds::plan_theorem2(&fixtures::saturated_chain_bounds(), &closure, &req)
                    .map_err(|e| e.to_string())?;
            let full = fixtures::saturated_chain_initial_cells(&grid);
            let cfg: MCellConfig =
                system.network.project(&full, 3, 2).map_err(|e| e.to_string())?;
            let ts_c = TransitionSystem::new(&system, &grid, &constant, 3, 32)
                .map_err(|e| e.to_string())?;
            let ts_x = TransitionSystem::new(&system, &grid, &corollary, 3, 32)
                .map_err(|e| e.to_string())?;
            let base = ts_c.post(&cfg).map_err(|e| e.to_string())?;
            let wide = ts_x.post(&cfg).map_err(|e| e.to_string())?;
            if !(wide.radius > base.radius) {
                return Err(format!(
                    "profile radius {} not above constant radius {}",
                    wide.radius, base.radius
                ));
            }
            for cell in &base.cells {
                if wide.cells.binary_search(cell).is_err() {
                    return Err(format!("cell {cell} lost under the planning profile"));
                }
            }
            Ok(format!(
                "radius grows {:.4} -> {:.4}; successor set nests ({} -> {})",
                base.radius,
                wide.radius,
                base.cells.len(),
                wide.cells.len()
            ))
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_check_passes() {
        let results = run_all(7);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
