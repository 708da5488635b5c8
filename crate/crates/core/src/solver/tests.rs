use std::collections::VecDeque;

use super::nfw::HistoryEntry;
use super::variants::{CfwState, NfwState, StepInput, Variant};
use super::*;
use crate::assignment::conservation_residual;
use crate::cost::{edge_costs, CostVector};
use crate::network::{Edge, OdPair};

fn od(origin: u32, destination: u32, demand: f64) -> OdPair {
    OdPair {
        origin,
        destination,
        demand,
    }
}

fn parallel(edges: &[(f64, f64, f64, f64)]) -> Network {
    Network::new(
        2,
        2,
        1,
        edges
            .iter()
            .map(|&(t, c, b, p)| Edge::bpr(1, 2, t, c, b, p))
            .collect(),
    )
    .unwrap()
}

fn quiet(net: &Network, dm: &DemandMatrix, config: &SolverConfig) -> AlgorithmResult {
    solve(net, dm, config, &mut |_| {}).unwrap()
}

#[test]
fn zero_demand_terminates_immediately() {
    let net = parallel(&[(1.0, 1.0, 0.15, 4.0)]);
    let dm = DemandMatrix::new(2, vec![]).unwrap();
    let r = quiet(&net, &dm, &SolverConfig::default());
    assert_eq!(r.termination, Termination::RgapTol);
    assert!(r.trace.is_empty());
    assert_eq!(r.final_rgap, Some(0.0));
    assert_eq!(&*r.flow, &[0.0]);
}

#[test]
fn single_edge_converges_in_one_iteration() {
    let net = parallel(&[(1.0, 10.0, 0.15, 4.0)]);
    let dm = DemandMatrix::new(2, vec![od(1, 2, 25.0)]).unwrap();
    for alg in [
        Algorithm::Fw,
        Algorithm::Cfw,
        Algorithm::Ffw,
        Algorithm::Wffw,
        Algorithm::Nfw,
    ] {
        let r = quiet(&net, &dm, &SolverConfig::new(alg));
        assert_eq!(r.termination, Termination::RgapTol, "{alg}");
        assert_eq!(r.trace.len(), 1, "{alg}");
        assert!(r.final_rgap.unwrap() <= 1e-6);
        assert_eq!(r.trace[0].fw_gap, 0.0);
        assert_eq!(r.trace[0].gamma, 0.0);
    }
}

#[test]
fn infinite_tolerance_runs_to_max_iter() {
    let net = parallel(&[(1.0, 10.0, 0.15, 4.0), (2.0, 10.0, 0.15, 4.0)]);
    let dm = DemandMatrix::new(2, vec![od(1, 2, 25.0)]).unwrap();
    let config = SolverConfig::new(Algorithm::Fw)
        .with_max_iter(17)
        .with_rgap_tol(f64::INFINITY);
    let r = quiet(&net, &dm, &config);
    assert_eq!(r.termination, Termination::MaxIter);
    assert_eq!(r.trace.len(), 17);
    let iters: Vec<usize> = r.trace.iter().map(|r| r.k).collect();
    assert_eq!(iters, (0..17).collect::<Vec<_>>());
}

#[test]
fn zero_time_budget_stops_early() {
    let net = parallel(&[(1.0, 10.0, 0.15, 4.0), (2.0, 10.0, 0.15, 4.0)]);
    let dm = DemandMatrix::new(2, vec![od(1, 2, 25.0)]).unwrap();
    let config = SolverConfig::new(Algorithm::Fw)
        .with_rgap_tol(f64::INFINITY)
        .with_max_iter(usize::MAX)
        .with_time_budget(std::time::Duration::from_millis(20));
    let r = quiet(&net, &dm, &config);
    assert_eq!(r.termination, Termination::TimeBudget);
    assert!(!r.trace.is_empty());
}

#[test]
fn harmonic_first_step_jumps_to_target() {
    let net = parallel(&[(1.0, 10.0, 0.15, 4.0), (1.5, 10.0, 0.15, 4.0)]);
    let dm = DemandMatrix::new(2, vec![od(1, 2, 30.0)]).unwrap();
    let mut config = SolverConfig::new(Algorithm::Fw);
    config.step_policy = crate::line_search::StepPolicy::Harmonic;
    let mut solver = Solver::new(&net, &dm, config).unwrap();
    let costs = edge_costs(&net, solver.flow()).unwrap();
    let s0 = all_or_nothing(&net, &dm, &costs).unwrap().flow;
    let rec = solver.step().unwrap();
    assert_eq!(rec.gamma, 1.0);
    assert_eq!(solver.flow(), &s0);
}

#[test]
fn fixed_point_takes_no_step() {
    // single route: the initial loading is the equilibrium
    let net = Network::new(
        3,
        3,
        1,
        vec![
            Edge::bpr(1, 2, 1.0, 5.0, 0.15, 4.0),
            Edge::bpr(2, 3, 1.0, 5.0, 0.15, 4.0),
        ],
    )
    .unwrap();
    let dm = DemandMatrix::new(3, vec![od(1, 3, 7.0), od(2, 3, 1.0)]).unwrap();
    let mut solver = Solver::new(&net, &dm, SolverConfig::default()).unwrap();
    let f0 = solver.flow().clone();
    let rec = solver.step().unwrap();
    assert_eq!(rec.gamma, 0.0);
    assert_eq!(rec.fw_gap, 0.0);
    assert_eq!(solver.flow(), &f0);
    assert_eq!(&*f0, &[7.0, 8.0]);
}

#[test]
fn cfw_projects_alpha_to_cap() {
    // one edge with constant curvature: alpha = (s - f) / (s - f_prev) = 1.7
    let net = parallel(&[(1.0, 1.0, 1.0, 1.0)]);
    let mut state = CfwState {
        x_star: FlowVector::new(vec![3.0]),
        prev_flow: Some(FlowVector::new(vec![1.7])),
        alpha_cap: 0.99,
        denominator: CfwDenominator::PreviousIterate,
        last_alpha: None,
    };
    let flow = FlowVector::new(vec![1.0]);
    let target = FlowVector::new(vec![2.7]);
    let costs = CostVector::new(vec![2.0]);
    let input = StepInput {
        net: &net,
        k: 1,
        flow: &flow,
        costs: &costs,
        target: &target,
    };
    let p = state.propose(&input).unwrap();
    assert_eq!(state.last_alpha, Some(0.99));
    let x = 0.99 * 3.0 + 0.01 * 2.7;
    assert!((state.x_star[0] - x).abs() < 1e-15);
    assert!((p.direction[0] - (x - 1.0)).abs() < 1e-15);
    assert!(!p.fallback);
}

#[test]
fn cfw_zero_numerator_is_fw_step() {
    // x* - f is orthogonal (under H) to s - f
    let net = Network::new(
        2,
        2,
        1,
        vec![
            Edge::bpr(1, 2, 1.0, 1.0, 1.0, 1.0),
            Edge::bpr(1, 2, 1.0, 1.0, 1.0, 1.0),
        ],
    )
    .unwrap();
    let mut state = CfwState {
        x_star: FlowVector::new(vec![2.0, 1.0]),
        prev_flow: Some(FlowVector::new(vec![0.5, 0.5])),
        alpha_cap: 0.99,
        denominator: CfwDenominator::PreviousIterate,
        last_alpha: None,
    };
    let flow = FlowVector::new(vec![1.0, 1.0]);
    let target = FlowVector::new(vec![1.0, 3.0]);
    let costs = CostVector::new(vec![2.0, 2.0]);
    let input = StepInput {
        net: &net,
        k: 2,
        flow: &flow,
        costs: &costs,
        target: &target,
    };
    let p = state.propose(&input).unwrap();
    assert_eq!(state.last_alpha, Some(0.0));
    assert_eq!(state.x_star, target);
    assert_eq!(p.direction, flow.towards(&target));
}

#[test]
fn cfw_vanishing_denominator_falls_back() {
    let net = parallel(&[(1.0, 1.0, 1.0, 1.0)]);
    let flow = FlowVector::new(vec![1.0]);
    let mut state = CfwState {
        x_star: flow.clone(),
        prev_flow: Some(FlowVector::new(vec![0.5])),
        alpha_cap: 0.99,
        denominator: CfwDenominator::PreviousIterate,
        last_alpha: None,
    };
    let target = FlowVector::new(vec![2.0]);
    let costs = CostVector::new(vec![2.0]);
    let input = StepInput {
        net: &net,
        k: 3,
        flow: &flow,
        costs: &costs,
        target: &target,
    };
    let p = state.propose(&input).unwrap();
    assert!(p.fallback);
    assert_eq!(state.last_alpha, Some(0.0));
    assert_eq!(state.x_star, target);
}

#[test]
fn nfw_reset_rule() {
    let mut state = NfwState {
        n: 3,
        gamma_max: 0.99,
        history: VecDeque::new(),
    };
    let d = || FlowVector::new(vec![1.0]);
    assert!(!state.commit(d(), 0.5));
    assert!(!state.commit(d(), 0.5));
    assert!(!state.commit(d(), 0.5));
    assert!(!state.commit(d(), 0.5));
    assert_eq!(state.history.len(), 3);
    assert!(state.commit(d(), 0.995));
    assert_eq!(state.history.len(), 1);
    assert_eq!(state.history[0].gamma, 0.995);
    // equality does not reset
    assert!(!state.commit(d(), 0.99));
    assert_eq!(state.history.len(), 2);
}

#[test]
fn nfw_history_grows_to_n() {
    let net = parallel(&[
        (1.0, 10.0, 0.15, 4.0),
        (1.2, 8.0, 0.15, 4.0),
        (1.4, 12.0, 0.15, 4.0),
    ]);
    let dm = DemandMatrix::new(2, vec![od(1, 2, 40.0)]).unwrap();
    let mut solver = Solver::new(&net, &dm, SolverConfig::nfw(2)).unwrap();
    let mut seen = vec![solver.n_curr().unwrap()];
    for _ in 0..6 {
        let rec = solver.step().unwrap();
        seen.push(solver.n_curr().unwrap());
        assert!(solver.n_curr().unwrap() <= solver.k().min(2));
        if rec.reset {
            // dropped directions: the history did not grow
            assert!(solver.n_curr().unwrap() <= *seen.iter().nth_back(1).unwrap());
        }
    }
    assert_eq!(seen[0], 0);
    assert_eq!(seen[1], 1);
    assert!(seen.iter().all(|&n| n <= 2));
}

#[test]
fn nfw_first_step_equals_fw() {
    let net = parallel(&[(1.0, 10.0, 0.15, 4.0), (1.3, 10.0, 0.15, 4.0)]);
    let dm = DemandMatrix::new(2, vec![od(1, 2, 30.0)]).unwrap();
    let mut fw = Solver::new(&net, &dm, SolverConfig::new(Algorithm::Fw)).unwrap();
    let mut nfw = Solver::new(&net, &dm, SolverConfig::nfw(3)).unwrap();
    let a = fw.step().unwrap();
    let b = nfw.step().unwrap();
    assert_eq!(fw.flow(), nfw.flow());
    assert_eq!((a.psi, a.gamma), (b.psi, b.gamma));
}

#[test]
fn wffw_first_smoothing() {
    let net = parallel(&[(1.0, 10.0, 0.15, 4.0), (1.3, 10.0, 0.15, 4.0)]);
    let dm = DemandMatrix::new(2, vec![od(1, 2, 30.0)]).unwrap();
    let mut config = SolverConfig::new(Algorithm::Wffw);
    config.smoothing_weight = 0.5;
    let mut solver = Solver::new(&net, &dm, config).unwrap();
    let f0 = solver.flow().clone();
    assert_eq!(solver.wffw_target(), Some(&f0));
    solver.step().unwrap();
    assert_eq!(solver.wffw_target(), Some(&f0));
    let costs = edge_costs(&net, solver.flow()).unwrap();
    let s1 = all_or_nothing(&net, &dm, &costs).unwrap().flow;
    solver.step().unwrap();
    let q1 = solver.wffw_target().unwrap();
    for e in 0..2 {
        assert_eq!(q1[e], 0.5 * f0[e] + 0.5 * s1[e]);
    }
}

#[test]
fn wffw_target_stays_feasible() {
    let net = Network::new(
        4,
        4,
        1,
        vec![
            Edge::bpr(1, 2, 1.0, 10.0, 0.15, 4.0),
            Edge::bpr(1, 3, 2.0, 10.0, 0.15, 4.0),
            Edge::bpr(2, 4, 2.0, 10.0, 0.15, 4.0),
            Edge::bpr(3, 4, 1.0, 10.0, 0.15, 4.0),
            Edge::bpr(2, 3, 0.5, 10.0, 0.15, 4.0),
        ],
    )
    .unwrap();
    let dm = DemandMatrix::new(4, vec![od(1, 4, 20.0), od(2, 4, 5.0)]).unwrap();
    let mut solver = Solver::new(&net, &dm, SolverConfig::new(Algorithm::Wffw)).unwrap();
    for _ in 0..25 {
        solver.step().unwrap();
        let q = solver.wffw_target().unwrap();
        assert!(q.iter().all(|&x| x >= 0.0));
        assert!(conservation_residual(&net, &dm, q) <= 1e-9 * dm.total_demand());
    }
}

#[test]
fn ffw_first_choice_is_latest_target() {
    let net = parallel(&[(1.0, 10.0, 0.15, 4.0), (1.3, 10.0, 0.15, 4.0)]);
    let dm = DemandMatrix::new(2, vec![od(1, 2, 30.0)]).unwrap();
    let mut fw = Solver::new(&net, &dm, SolverConfig::new(Algorithm::Fw)).unwrap();
    let mut ffw = Solver::new(&net, &dm, SolverConfig::new(Algorithm::Ffw)).unwrap();
    fw.step().unwrap();
    ffw.step().unwrap();
    // q = 0: the mean is the latest target itself and the test is an equality
    assert_eq!(ffw.ffw_choice(), Some(FfwChoice::Mean));
    assert_eq!(fw.last_direction(), ffw.last_direction());
}

#[test]
fn ffw_rejects_ascent_mean() {
    use super::variants::FfwState;
    let net = parallel(&[(1.0, 1.0, 1.0, 1.0), (1.0, 1.0, 1.0, 1.0)]);
    let flow = FlowVector::new(vec![1.0, 1.0]);
    let costs = CostVector::new(vec![1.0, 3.0]);
    let old = FlowVector::new(vec![0.0, 2.0]);
    let target = FlowVector::new(vec![2.0, 0.0]);
    let mut state = FfwState {
        memory: 2,
        targets: VecDeque::from([old.clone(), old]),
        last_choice: None,
    };
    let input = StepInput {
        net: &net,
        k: 5,
        flow: &flow,
        costs: &costs,
        target: &target,
    };
    // mean of (0, 2) and (2, 0) is the current flow, so nu = 0 and w is taken
    let p = state.propose(&input);
    assert_eq!(state.last_choice, Some(FfwChoice::Latest));
    assert_eq!(&*p.direction, &[1.0, -1.0]);

    let mut state = FfwState {
        memory: 2,
        targets: VecDeque::from([FlowVector::new(vec![0.0, 2.0])]),
        last_choice: None,
    };
    let target = FlowVector::new(vec![1.5, 0.5]);
    let input = StepInput {
        target: &target,
        ..input
    };
    // nu = ((0,2) + (1.5,0.5))/2 - f = (-0.25, 0.25): ascent; w = (0.5, -0.5): descent
    let p = state.propose(&input);
    assert_eq!(state.last_choice, Some(FfwChoice::Latest));
    assert_eq!(&*p.direction, &[0.5, -0.5]);
}

#[test]
fn fw_iterates_stay_feasible_and_descend() {
    let net = Network::new(
        4,
        4,
        1,
        vec![
            Edge::bpr(1, 2, 1.0, 10.0, 0.15, 4.0),
            Edge::bpr(1, 3, 2.0, 10.0, 0.15, 4.0),
            Edge::bpr(2, 4, 2.0, 10.0, 0.15, 4.0),
            Edge::bpr(3, 4, 1.0, 10.0, 0.15, 4.0),
            Edge::bpr(2, 3, 0.5, 10.0, 0.15, 4.0),
        ],
    )
    .unwrap();
    let dm = DemandMatrix::new(4, vec![od(1, 4, 20.0), od(2, 4, 5.0)]).unwrap();
    for config in [
        SolverConfig::new(Algorithm::Fw),
        SolverConfig::new(Algorithm::Cfw),
        SolverConfig::new(Algorithm::Ffw),
        SolverConfig::new(Algorithm::Wffw),
        SolverConfig::nfw(2),
        SolverConfig::nfw(3),
    ] {
        let mut solver = Solver::new(&net, &dm, config.clone()).unwrap();
        let mut psi = solver.psi();
        for _ in 0..40 {
            let rec = solver.step().unwrap();
            assert!(rec.psi <= psi + 1e-12 * psi.abs(), "{}", config.label());
            psi = rec.psi;
            let f = solver.flow();
            assert!(conservation_residual(&net, &dm, f) <= 1e-9 * dm.total_demand());
            assert!(f.iter().all(|&x| x >= 0.0));
        }
    }
}

#[test]
fn failure_keeps_partial_trace() {
    let net = parallel(&[(1.0, 10.0, 0.15, 4.0)]);
    let dm = DemandMatrix::new(2, vec![od(2, 1, 1.0)]).unwrap();
    let err = solve(&net, &dm, &SolverConfig::default(), &mut |_| {}).unwrap_err();
    assert!(matches!(err.kind, SolveErrorKind::Assign(_)));
    assert!(err.trace.is_empty());
}

#[test]
fn invalid_config_is_rejected() {
    let net = parallel(&[(1.0, 10.0, 0.15, 4.0)]);
    let dm = DemandMatrix::new(2, vec![od(1, 2, 1.0)]).unwrap();
    let mut config = SolverConfig::new(Algorithm::Wffw);
    config.smoothing_weight = 1.5;
    assert!(matches!(
        Solver::new(&net, &dm, config),
        Err(SolveErrorKind::Config(_))
    ));
}

#[test]
fn variant_history_entries_keep_step_sizes() {
    let f0 = FlowVector::new(vec![1.0]);
    let mut v = Variant::new(&SolverConfig::nfw(2), &f0);
    assert_eq!(v.n_curr(), Some(0));
    if let Variant::Nfw(state) = &mut v {
        state.commit(FlowVector::new(vec![2.0]), 0.25);
        assert_eq!(
            state.history[0],
            HistoryEntry {
                direction: FlowVector::new(vec![2.0]),
                gamma: 0.25
            }
        );
    }
    assert_eq!(v.n_curr(), Some(1));
}
