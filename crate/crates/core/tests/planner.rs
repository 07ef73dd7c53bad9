use oblique_core::op_model::neighbourhood_contains;
use oblique_core::planner::{
    evaluate, initialize, plan, plan_chained, plan_op_2d, plan_vp_2d, scenario_from_tuples, Scheme,
};
use oblique_core::route_optimizer::solve_order_exact;
use oblique_core::scenario_io::{generate, GenerateParams};
use oblique_core::subproblem_solver::{chain_length, ordered_chain_length};
use oblique_core::waypoint_optimizer::{optimize_waypoints, TraceBlock};
use oblique_core::{Error, Scenario64, SolverConfig64, Waypoint64};

fn scenario(seed: u64, k: usize) -> Scenario64 {
    generate(&GenerateParams {
        seed,
        k,
        ..Default::default()
    })
    .unwrap()
    .to_scenario()
    .unwrap()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, k - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn initialization_is_feasible_and_uses_ground_tour() {
    let scn = scenario(4, 7);
    let cfg = SolverConfig64::default();
    let (tour, wps) = initialize(&scn, &cfg).unwrap();
    for (gt, wp) in scn.targets().iter().zip(&wps) {
        assert_eq!(wp.q, gt.center);
        assert!(neighbourhood_contains(scn.camera(), wp, gt, 1e-9).feasible);
    }
    let ground: Vec<Waypoint64> = scn
        .targets()
        .iter()
        .map(|g| Waypoint64::new(g.center.x, g.center.y, 0.0))
        .collect();
    let ground_tour = solve_order_exact(scn.start(), scn.end(), &ground, 13).unwrap();
    assert_eq!(tour.order, ground_tour.order);
}

#[test]
fn single_target_plan_equals_waypoint_optimization() {
    let scn = scenario_from_tuples(
        &[(170.0, 90.0, 20.0, 0.2)],
        (0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0),
    )
    .unwrap();
    let cfg = SolverConfig64::default();
    let (tour, wps) = initialize(&scn, &cfg).unwrap();
    assert_eq!(tour.order, vec![0]);
    let direct = optimize_waypoints(&scn, &[0], &wps, &cfg).unwrap();
    let planned = plan(&scn, &cfg).unwrap();
    assert_eq!(planned.waypoints, direct.waypoints);
    assert_eq!(planned.tour.order, vec![0]);
}

#[test]
fn plan_is_monotone_feasible_and_no_longer_than_start() {
    let cfg = SolverConfig64::default();
    for seed in 0..6 {
        let scn = scenario(seed, 6);
        let (tour, _) = initialize(&scn, &cfg).unwrap();
        let r = plan(&scn, &cfg).unwrap();
        assert!(r.distance <= tour.length + 1e-9);
        assert!(r.trace.is_non_increasing(1e-8));
        assert!(r.feasibility.max_violation <= 1e-6);
        assert!(
            (r.distance
                - ordered_chain_length(
                    scn.start(),
                    scn.end(),
                    &r.waypoints,
                    r.tour.order.iter().copied()
                ))
            .abs()
                <= 1e-9
        );
        assert_eq!(r.trace.last_objective(), r.distance);
    }
}

#[test]
fn final_order_is_globally_optimal_for_its_waypoints() {
    let cfg = SolverConfig64::default();
    for seed in 10..14 {
        let scn = scenario(seed, 6);
        let r = plan(&scn, &cfg).unwrap();
        assert_eq!(r.trace.records.last().unwrap().block, TraceBlock::Order);
        let best = permutations(6)
            .into_iter()
            .map(|p| ordered_chain_length(scn.start(), scn.end(), &r.waypoints, p))
            .fold(f64::INFINITY, f64::min);
        assert!(
            r.distance <= best + 1e-9 * best,
            "seed {seed}: {} vs {best}",
            r.distance
        );
    }
}

#[test]
fn plans_are_bit_identical_across_runs() {
    let scn = scenario(21, 8);
    let cfg = SolverConfig64::default();
    assert_eq!(plan(&scn, &cfg).unwrap(), plan(&scn, &cfg).unwrap());
}

#[test]
fn vp2d_properties() {
    let scn = scenario(2, 8);
    let cfg = SolverConfig64::default();
    let r = plan_vp_2d(&scn, 100.0, &cfg).unwrap();
    assert_eq!(r.scheme, Scheme::Vp2d);
    let straight = chain_length(scn.start(), scn.end(), &[]);
    assert!(r.distance >= straight);
    let lifted: Vec<Waypoint64> = scn
        .targets()
        .iter()
        .map(|g| Waypoint64::new(g.center.x, g.center.y, 100.0))
        .collect();
    assert_eq!(r.waypoints, lifted);
    assert_eq!(
        r.tour,
        solve_order_exact(scn.start(), scn.end(), &lifted, 13).unwrap()
    );
}

#[test]
fn nadir_at_one_hundred_meters_feasible_up_to_its_resolution() {
    // Nadir resolution at 100 m for r = 20 is 0.41990.
    let cfg = SolverConfig64::default();
    let ok = scenario_from_tuples(
        &[(50.0, 50.0, 20.0, 0.41990)],
        (0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0),
    )
    .unwrap();
    assert!(plan_vp_2d(&ok, 100.0, &cfg).is_ok());
    let too_strict = scenario_from_tuples(
        &[(50.0, 50.0, 20.0, 0.4200)],
        (0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0),
    )
    .unwrap();
    assert!(matches!(
        plan_vp_2d(&too_strict, 100.0, &cfg),
        Err(Error::InfeasibleTarget { index: 1, .. })
    ));
}

#[test]
fn op2d_keeps_altitude_and_improves_on_vp2d() {
    let cfg = SolverConfig64::default();
    for seed in 30..34 {
        let scn = scenario(seed, 7);
        let vp = plan_vp_2d(&scn, 100.0, &cfg).unwrap();
        let op = plan_op_2d(&scn, 100.0, &cfg).unwrap();
        assert!(op.waypoints.iter().all(|w| w.z == 100.0));
        assert!(op.distance <= vp.distance);
        assert!(op.feasibility.max_violation <= cfg.feas_tol);
        assert!(op
            .feasibility
            .targets
            .iter()
            .all(|t| t.approximate.min() >= -cfg.feas_tol));
    }
}

#[test]
fn chained_schemes_are_ordered() {
    let cfg = SolverConfig64::default();
    for seed in 40..44 {
        let [vp, op2, op3] = plan_chained(&scenario(seed, 8), 100.0, &cfg).unwrap();
        assert!(
            op3.distance <= op2.distance && op2.distance <= vp.distance,
            "seed {seed}"
        );
        assert_eq!(op2.trace.initial, vp.distance);
        assert_eq!(op3.trace.initial, op2.distance);
    }
}

#[test]
fn evaluate_reports_tampering_and_matches_distance() {
    let scn = scenario(8, 5);
    let cfg = SolverConfig64::default();
    let mut r = plan(&scn, &cfg).unwrap();
    let report = evaluate(&scn, &r).unwrap();
    assert!(report.max_violation <= 1e-6);
    assert!((report.distance - r.distance).abs() <= 1e-9);
    for t in &report.targets {
        assert!(t.exact.is_some());
    }
    r.waypoints[2] = Waypoint64::new(scn.targets()[2].center.x, scn.targets()[2].center.y, 1.0);
    let report = evaluate(&scn, &r).unwrap();
    // A nadir view from 1 m covers a tiny patch of the target disk.
    assert!(report.targets[2].approximate.projection < -19.0);
    assert!(report.max_violation > 1.0);
    r.tour.order.pop();
    assert!(matches!(evaluate(&scn, &r), Err(Error::Inconsistent(_))));
}

#[test]
fn generic_planner_runs_in_single_precision() {
    use oblique_core::{Camera32, Scenario32, SolverConfig32, Target32, Vec2, Waypoint32};
    let targets = vec![
        Target32::new(Vec2::new(120.0, 40.0), 20.0, 0.2).unwrap(),
        Target32::new(Vec2::new(60.0, 150.0), 20.0, 0.3).unwrap(),
    ];
    let origin = Waypoint32::new(0.0, 0.0, 0.0);
    let scn = Scenario32::new(Camera32::default(), targets, origin, origin).unwrap();
    let cfg = SolverConfig32 {
        obj_tol: 1e-4,
        feas_tol: 1e-3,
        ..Default::default()
    };
    let r = oblique_core::planner::plan(&scn, &cfg).unwrap();
    assert!(r.distance < r.trace.initial);
    assert!(r.feasibility.max_violation <= 1e-3);
}
