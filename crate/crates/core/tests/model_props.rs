mod common;

use common::*;
use oblique_core::convex_bounds::{
    build_constraints, BlockConstraints, SubproblemMode, SurrogatePoint,
};
use oblique_core::op_model::{
    coverage_area, coverage_area_exact, inner_distances, inner_distances_exact, resolution,
    slant_distance,
};
use oblique_core::subproblem_solver::{solve_chain, BlockLayout, ChainBlock, ChainProblem};
use oblique_core::{Point3, SolverConfig64, Waypoint64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn nadir_resolution_is_coefficient_over_altitude_squared(seed in any::<u64>(), z in 1.0f64..500.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cam = random_camera(&mut rng);
        let gt = random_target(&mut rng);
        let wp = Waypoint64 { q: gt.center, z };
        let got = resolution(&cam, &wp, &gt).unwrap();
        prop_assert!(rel(got, gt.resolution_coefficient(&cam) / (z * z)) <= 1e-9);
    }

    #[test]
    fn resolution_times_coverage_is_target_area(
        seed in any::<u64>(),
        z in 1.0f64..500.0,
        frac in 0.0f64..0.99,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cam = random_camera(&mut rng);
        let gt = random_target(&mut rng);
        let wp = pose(&mut rng, &cam, &gt, z, frac);
        let product = resolution(&cam, &wp, &gt).unwrap() * coverage_area(&cam, &wp, &gt).unwrap();
        prop_assert!(rel(product, std::f64::consts::PI * gt.radius * gt.radius) <= 1e-9);
    }

    #[test]
    fn closed_forms_track_exact_footprint(
        seed in any::<u64>(),
        z in 5.0f64..500.0,
        frac in 0.0f64..0.95,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cam = random_camera(&mut rng);
        let gt = random_target(&mut rng);
        let wp = pose(&mut rng, &cam, &gt, z, frac);
        let d_u = slant_distance(&wp, &gt);
        prop_assume!(d_u >= 10.0);
        let bound = 2.5 * cam.f0() / d_u;
        prop_assert!(rel(coverage_area(&cam, &wp, &gt).unwrap(), coverage_area_exact(&cam, &wp, &gt).unwrap()) <= bound);
        let (a, e) = (inner_distances(&cam, &wp, &gt).unwrap(), inner_distances_exact(&cam, &wp, &gt).unwrap());
        prop_assert!(rel(a.d1, e.d1) <= bound);
        prop_assert!(rel(a.d2, e.d2) <= bound);
    }

    #[test]
    fn tangent_bounds_are_tight_lower_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in tangent_bound_samples(&mut rng) {
            prop_assert!(bound_holds(&s), "{s:?}");
        }
    }

    #[test]
    fn surrogate_gradients_match_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (set, x) = random_constraint_point(&mut rng);
        if let Some(err) = gradient_error(&set, &x) {
            prop_assert!(err <= 1e-4, "{err} at {x:?}");
        }
    }

    #[test]
    fn surrogate_is_tight_and_inner_at_expansion_point(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cam, gt, wp) = random_feasible_setup(&mut rng);
        for mode in [SubproblemMode::Altitude, SubproblemMode::Horizontal] {
            let set = build_constraints(mode, &gt, &cam, SurrogatePoint::from_waypoint(&wp, &gt), 0.0).unwrap();
            prop_assert!(set.min_margin(&set.anchor()) >= -1e-9 * (1.0 + wp.z.powi(4)));
            // Any surrogate-feasible point nearby is feasible for the original model.
            for _ in 0..50 {
                let x: Vec<f64> = set.anchor().iter().map(|v| v + rng.gen_range(-5.0..5.0)).collect();
                if set.min_margin(&x) >= 0.0 {
                    let (l, z) = set.pose(&x);
                    let moved = Waypoint64 { q: gt.center + l, z };
                    prop_assert!(margins_ok(&cam, &gt, &moved, 1e-9), "{moved:?}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solved_surrogate_subproblems_satisfy_original_constraints(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cam, gt, wp) = random_feasible_setup(&mut rng);
        let mode = if rng.gen_bool(0.5) { SubproblemMode::Altitude } else { SubproblemMode::Horizontal };
        let set = build_constraints(mode, &gt, &cam, SurrogatePoint::from_waypoint(&wp, &gt), 0.0).unwrap();
        let layout = match mode {
            SubproblemMode::Altitude => BlockLayout::Altitude { q: wp.q },
            SubproblemMode::Horizontal => BlockLayout::Horizontal { origin: gt.center, z: wp.z },
        };
        let anchor = set.anchor();
        let far = |rng: &mut ChaCha8Rng| {
            let d = unit(rng) * rng.gen_range(50.0..400.0);
            Point3::new(wp.q.x + d.x, wp.q.y + d.y, rng.gen_range(0.0..150.0))
        };
        let problem = ChainProblem {
            start: far(&mut rng),
            end: far(&mut rng),
            blocks: vec![ChainBlock::new(layout, Some(Box::new(set)), anchor)],
        };
        let out = solve_chain(&problem, &SolverConfig64::default()).unwrap();
        let (l, z) = set.pose(&out.solution[0]);
        let solved = Waypoint64 { q: gt.center + l, z };
        prop_assert!(margins_ok(&cam, &gt, &solved, 1e-9), "{:?}", solved);
    }
}
