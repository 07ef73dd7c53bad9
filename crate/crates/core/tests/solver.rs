use oblique_core::convex_bounds::{
    build_constraints, BlockConstraints, ConstraintEval, SubproblemMode, SurrogatePoint,
};
use oblique_core::op_model::{constraint_margins, CameraIntrinsics, GroundTarget};
use oblique_core::subproblem_solver::{solve_chain, BlockLayout, ChainBlock, ChainProblem};
use oblique_core::{Point3, SolverConfig64, Vec2, Waypoint64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `R² - ‖x - c‖² ≥ 0`.
struct Disk {
    center: [f64; 2],
    radius: f64,
}

impl BlockConstraints<f64> for Disk {
    fn dim(&self) -> usize {
        2
    }

    fn len(&self) -> usize {
        1
    }

    fn eval(&self, _: usize, x: &[f64]) -> Option<ConstraintEval<f64>> {
        let (dx, dy) = (x[0] - self.center[0], x[1] - self.center[1]);
        Some(ConstraintEval {
            value: self.radius * self.radius - dx * dx - dy * dy,
            grad: [-2.0 * dx, -2.0 * dy],
            hess: [[-2.0, 0.0], [0.0, -2.0]],
        })
    }
}

fn dist(a: Point3<f64>, b: Point3<f64>) -> f64 {
    a.distance(b)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) <= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

/// Best path through a point of the disk at height `z`: the free minimizer if it
/// lies inside, else the best boundary point by grid + golden section.
fn disk_oracle(start: Point3<f64>, end: Point3<f64>, c: [f64; 2], r: f64, z: f64) -> f64 {
    let f = |x: f64, y: f64| {
        let p = Point3::new(x, y, z);
        dist(start, p) + dist(p, end)
    };
    let on_circle = |t: f64| f(c[0] + r * t.cos(), c[1] + r * t.sin());
    let n = 2000;
    let step = std::f64::consts::TAU / n as f64;
    let best_i = (0..n)
        .min_by(|&a, &b| on_circle(a as f64 * step).total_cmp(&on_circle(b as f64 * step)))
        .unwrap();
    let t0 = best_i as f64 * step;
    let boundary = golden_min(on_circle, t0 - step, t0 + step);
    // For a fixed height the free minimizer lies on the planar segment between the
    // endpoints; by convexity it is the answer whenever it falls inside the disk.
    let along = |t: f64| {
        (
            start.x + t * (end.x - start.x),
            start.y + t * (end.y - start.y),
        )
    };
    let mut interior = f64::INFINITY;
    let (mut a, mut b) = (0.0, 1.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (u, v) = (b - g * (b - a), a + g * (b - a));
        if f(along(u).0, along(u).1) <= f(along(v).0, along(v).1) {
            b = v;
        } else {
            a = u;
        }
    }
    let (x, y) = along(0.5 * (a + b));
    if (x - c[0]).powi(2) + (y - c[1]).powi(2) <= r * r {
        interior = f(x, y);
    }
    boundary.min(interior)
}

fn disk_problem(
    start: Point3<f64>,
    end: Point3<f64>,
    disks: &[([f64; 2], f64)],
    z: f64,
) -> ChainProblem<f64> {
    ChainProblem {
        start,
        end,
        blocks: disks
            .iter()
            .map(|&(c, r)| {
                ChainBlock::new(
                    BlockLayout::Horizontal {
                        origin: Vec2::zero(),
                        z,
                    },
                    Some(Box::new(Disk {
                        center: c,
                        radius: r,
                    })),
                    c.to_vec(),
                )
            })
            .collect(),
    }
}

#[test]
fn single_disk_matches_boundary_oracle() {
    let cfg = SolverConfig64::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let start = Point3::new(
            rng.gen_range(-100.0..0.0),
            rng.gen_range(-100.0..100.0),
            0.0,
        );
        let end = Point3::new(
            rng.gen_range(100.0..200.0),
            rng.gen_range(-100.0..100.0),
            0.0,
        );
        let c = [rng.gen_range(0.0..100.0), rng.gen_range(-150.0..150.0)];
        let r = rng.gen_range(5.0..30.0);
        let z = rng.gen_range(20.0..120.0);
        let out = solve_chain(&disk_problem(start, end, &[(c, r)], z), &cfg).unwrap();
        let oracle = disk_oracle(start, end, c, r, z);
        assert!(
            out.objective >= oracle - 1e-6,
            "{} below oracle {oracle}",
            out.objective
        );
        assert!(
            out.objective - oracle <= 1e-3,
            "{} vs oracle {oracle}",
            out.objective
        );
        assert!(out.max_violation <= cfg.feas_tol);
    }
}

fn camera() -> CameraIntrinsics<f64> {
    CameraIntrinsics::default()
}

/// Altitude surrogate of one target, solved against a dense feasible grid refined
/// by golden section (the chain length is convex in the free altitude).
#[test]
fn altitude_surrogate_matches_grid_oracle() {
    let cfg = SolverConfig64::default();
    let cam = camera();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 20 {
        let gt = GroundTarget::new(Vec2::new(150.0, 40.0), 20.0, rng.gen_range(0.01..0.4)).unwrap();
        let off = Vec2::new(rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0));
        let wp = Waypoint64 {
            q: gt.center + off,
            z: rng.gen_range(80.0..110.0),
        };
        let Ok(m) = constraint_margins(&cam, &wp, &gt) else {
            continue;
        };
        if m.min() <= 1e-6 {
            continue;
        }
        let set = build_constraints(
            SubproblemMode::Altitude,
            &gt,
            &cam,
            SurrogatePoint::from_waypoint(&wp, &gt),
            1e-6,
        )
        .unwrap();
        let start = Point3::new(0.0, 0.0, rng.gen_range(0.0..60.0));
        let end = Point3::new(300.0, rng.gen_range(0.0..300.0), 0.0);
        let problem = ChainProblem {
            start,
            end,
            blocks: vec![ChainBlock::new(
                BlockLayout::Altitude { q: wp.q },
                Some(Box::new(set)),
                vec![wp.z],
            )],
        };
        let out = solve_chain(&problem, &cfg).unwrap();

        let f = |z: f64| problem.objective(&[vec![z]]);
        let feasible = |z: f64| set.min_margin(&[z]) >= 0.0;
        let grid: Vec<f64> = (0..=20_000)
            .map(|i| 1.0 + i as f64 * 0.01)
            .filter(|&z| feasible(z))
            .collect();
        let (lo, hi) = (grid[0], *grid.last().unwrap());
        let refine = |inside: f64, outside: f64| {
            let (mut a, mut b) = (inside, outside);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if feasible(m) {
                    a = m;
                } else {
                    b = m;
                }
            }
            a
        };
        let (lo, hi) = (refine(lo, lo - 0.01), refine(hi, hi + 0.01));
        let oracle = golden_min(f, lo, hi);
        assert!(
            (out.objective - oracle).abs() <= 1e-3,
            "{} vs oracle {oracle}",
            out.objective
        );
        checked += 1;
    }
}

#[test]
fn two_disks_beat_random_feasible_points() {
    let cfg = SolverConfig64::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let disks = [
            (
                [rng.gen_range(20.0..80.0), rng.gen_range(-80.0..80.0)],
                rng.gen_range(5.0..25.0),
            ),
            (
                [rng.gen_range(120.0..180.0), rng.gen_range(-80.0..80.0)],
                rng.gen_range(5.0..25.0),
            ),
        ];
        let start = Point3::new(0.0, 0.0, 0.0);
        let end = Point3::new(200.0, 0.0, 0.0);
        let problem = disk_problem(start, end, &disks, 50.0);
        let out = solve_chain(&problem, &cfg).unwrap();
        let mut sample = |(c, r): ([f64; 2], f64)| loop {
            let p = [rng.gen_range(-r..r), rng.gen_range(-r..r)];
            if p[0] * p[0] + p[1] * p[1] <= r * r {
                return vec![c[0] + p[0], c[1] + p[1]];
            }
        };
        for _ in 0..1000 {
            let x = vec![sample(disks[0]), sample(disks[1])];
            assert!(out.objective <= problem.objective(&x) + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_descends_and_stays_feasible(
        seed in 0u64..100_000,
        blocks in 1usize..6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let disks: Vec<([f64; 2], f64)> = (0..blocks)
            .map(|_| ([rng.gen_range(0.0..300.0), rng.gen_range(0.0..300.0)], rng.gen_range(1.0..30.0)))
            .collect();
        let start = Point3::new(0.0, 0.0, 0.0);
        let end = Point3::new(rng.gen_range(0.0..300.0), rng.gen_range(0.0..300.0), 0.0);
        let problem = disk_problem(start, end, &disks, rng.gen_range(10.0..120.0));
        let initial = problem.objective(&problem.blocks.iter().map(|b| b.start.clone()).collect::<Vec<_>>());
        let cfg = SolverConfig64::default();
        let out = solve_chain(&problem, &cfg).unwrap();
        prop_assert!(out.objective <= initial);
        prop_assert!(out.max_violation <= cfg.feas_tol);
        prop_assert_eq!(out.objective, problem.objective(&out.solution));
    }
}
