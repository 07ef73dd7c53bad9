//! Visiting order for fixed waypoints: an open-path travelling salesman problem
//! with fixed start and end points.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{OrderSolver, SolverConfig};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::op_model::Waypoint3D;
use crate::scalar::Scalar;
use crate::subproblem_solver::ordered_chain_length;

/// Subset tables grow as `K·2^K`; beyond this the exact solver refuses to run.
pub const EXACT_HARD_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Tour<T> {
    /// 0-based waypoint indices in visiting order.
    pub order: Vec<usize>,
    pub length: T,
}

impl<T: Scalar> Tour<T> {
    pub fn from_order(
        start: &Waypoint3D<T>,
        end: &Waypoint3D<T>,
        waypoints: &[Waypoint3D<T>],
        order: Vec<usize>,
    ) -> Self {
        let length = ordered_chain_length(start, end, waypoints, order.iter().copied());
        Self { order, length }
    }
}

pub fn check_permutation(order: &[usize], k: usize) -> Result<()> {
    if order.len() != k {
        return Err(Error::Route(format!(
            "order has {} entries for {k} waypoints",
            order.len()
        )));
    }
    let mut seen = vec![false; k];
    for &i in order {
        if i >= k || seen[i] {
            return Err(Error::Route(format!(
                "order {order:?} is not a permutation of 0..{k}"
            )));
        }
        seen[i] = true;
    }
    Ok(())
}

struct Distances<T> {
    k: usize,
    /// `between[i*k + j]`
    between: Vec<T>,
    from_start: Vec<T>,
    to_end: Vec<T>,
    start_end: T,
}

impl<T: Scalar> Distances<T> {
    fn new(start: &Waypoint3D<T>, end: &Waypoint3D<T>, waypoints: &[Waypoint3D<T>]) -> Self {
        let pts: Vec<Point3<T>> = waypoints.iter().map(Waypoint3D::point).collect();
        let k = pts.len();
        let mut between = vec![T::zero(); k * k];
        for i in 0..k {
            for j in 0..k {
                between[i * k + j] = pts[i].distance(pts[j]);
            }
        }
        Self {
            k,
            between,
            from_start: pts.iter().map(|p| start.point().distance(*p)).collect(),
            to_end: pts.iter().map(|p| p.distance(end.point())).collect(),
            start_end: start.point().distance(end.point()),
        }
    }

    fn d(&self, i: usize, j: usize) -> T {
        self.between[i * self.k + j]
    }

    /// Distance between path positions where `None` stands for the start (before)
    /// or end (after) point.
    fn leg(&self, a: Option<usize>, b: Option<usize>) -> T {
        match (a, b) {
            (Some(i), Some(j)) => self.d(i, j),
            (None, Some(j)) => self.from_start[j],
            (Some(i), None) => self.to_end[i],
            (None, None) => self.start_end,
        }
    }

    fn length(&self, order: &[usize]) -> T {
        let mut prev = None;
        let mut total = T::zero();
        for &i in order {
            total += self.leg(prev, Some(i));
            prev = Some(i);
        }
        total + self.leg(prev, None)
    }
}

/// Globally shortest order by dynamic programming over subsets. Among orders
/// whose length is within a relative `1e-9` of the optimum, the lexicographically
/// smallest is returned.
pub fn solve_order_exact<T: Scalar>(
    start: &Waypoint3D<T>,
    end: &Waypoint3D<T>,
    waypoints: &[Waypoint3D<T>],
    exact_cap: usize,
) -> Result<Tour<T>> {
    let k = waypoints.len();
    if k > exact_cap.min(EXACT_HARD_LIMIT) {
        return Err(Error::Route(format!(
            "{k} waypoints exceed the exact solver cap of {}",
            exact_cap.min(EXACT_HARD_LIMIT)
        )));
    }
    if k == 0 {
        return Ok(Tour::from_order(start, end, waypoints, Vec::new()));
    }
    let dist = Distances::new(start, end, waypoints);
    let full = (1usize << k) - 1;
    // cost[rest*k + i]: shortest path from waypoint i through every waypoint in
    // `rest` (which excludes i) to the end point.
    let mut cost = vec![T::infinity(); (full + 1) * k];
    for rest in 0..=full {
        for i in 0..k {
            if rest & (1 << i) != 0 {
                continue;
            }
            cost[rest * k + i] = if rest == 0 {
                dist.to_end[i]
            } else {
                let mut best = T::infinity();
                for j in 0..k {
                    if rest & (1 << j) != 0 {
                        best = best.min(dist.d(i, j) + cost[(rest & !(1 << j)) * k + j]);
                    }
                }
                best
            };
        }
    }

    let tie = |best: T| T::lit(1e-9) * best.abs().max(T::one());
    let mut order = Vec::with_capacity(k);
    let mut rest = full;
    let mut cur: Option<usize> = None;
    while rest != 0 {
        let through = |j: usize| dist.leg(cur, Some(j)) + cost[(rest & !(1 << j)) * k + j];
        let best = (0..k)
            .filter(|j| rest & (1 << j) != 0)
            .map(through)
            .fold(T::infinity(), T::min);
        let next = (0..k)
            .filter(|j| rest & (1 << j) != 0)
            .find(|&j| through(j) <= best + tie(best))
            .ok_or_else(|| Error::Numerical("non-finite distances in order solver".into()))?;
        order.push(next);
        rest &= !(1 << next);
        cur = Some(next);
    }
    Ok(Tour::from_order(start, end, waypoints, order))
}

/// Nearest-neighbour construction from the start point, ties to the lower index.
pub fn nearest_neighbour_order<T: Scalar>(
    start: &Waypoint3D<T>,
    end: &Waypoint3D<T>,
    waypoints: &[Waypoint3D<T>],
) -> Vec<usize> {
    let dist = Distances::new(start, end, waypoints);
    nearest_neighbour(&dist)
}

fn nearest_neighbour<T: Scalar>(dist: &Distances<T>) -> Vec<usize> {
    let k = dist.k;
    let mut used = vec![false; k];
    let mut order = Vec::with_capacity(k);
    let mut cur = None;
    for _ in 0..k {
        let mut best: Option<(usize, T)> = None;
        for j in (0..k).filter(|&j| !used[j]) {
            let d = dist.leg(cur, Some(j));
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.expect("an unused waypoint remains");
        used[j] = true;
        order.push(j);
        cur = Some(j);
    }
    order
}

/// Change in path length from reversing `order[i..=j]`.
fn two_opt_delta<T: Scalar>(dist: &Distances<T>, order: &[usize], i: usize, j: usize) -> T {
    let before = if i == 0 { None } else { Some(order[i - 1]) };
    let after = order.get(j + 1).copied();
    let (a, b) = (Some(order[i]), Some(order[j]));
    dist.leg(before, b) + dist.leg(a, after) - dist.leg(before, a) - dist.leg(b, after)
}

fn improvement_threshold<T: Scalar>(dist: &Distances<T>, order: &[usize]) -> T {
    T::lit(1e-12) * dist.length(order).max(T::one())
}

fn two_opt<T: Scalar>(dist: &Distances<T>, order: &mut [usize]) {
    let k = order.len();
    loop {
        let tol = improvement_threshold(dist, order);
        let mut improved = false;
        for i in 0..k {
            for j in i + 1..k {
                if two_opt_delta(dist, order, i, j) < -tol {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Whether some segment reversal shortens the path by more than a relative `1e-12`.
pub fn has_improving_two_opt<T: Scalar>(
    start: &Waypoint3D<T>,
    end: &Waypoint3D<T>,
    waypoints: &[Waypoint3D<T>],
    order: &[usize],
) -> bool {
    let dist = Distances::new(start, end, waypoints);
    let tol = improvement_threshold(&dist, order);
    let k = order.len();
    (0..k).any(|i| (i + 1..k).any(|j| two_opt_delta(&dist, order, i, j) < -tol))
}

/// Runs 2-opt from `order` to a local optimum.
pub fn improve_order<T: Scalar>(
    start: &Waypoint3D<T>,
    end: &Waypoint3D<T>,
    waypoints: &[Waypoint3D<T>],
    order: &[usize],
) -> Result<Tour<T>> {
    check_permutation(order, waypoints.len())?;
    let dist = Distances::new(start, end, waypoints);
    let mut order = order.to_vec();
    two_opt(&dist, &mut order);
    Ok(Tour::from_order(start, end, waypoints, order))
}

/// Nearest neighbour followed by 2-opt, plus `restarts` seeded random starts
/// polished by 2-opt. The shortest local optimum wins; earlier candidates win ties.
pub fn solve_order_heuristic<T: Scalar>(
    start: &Waypoint3D<T>,
    end: &Waypoint3D<T>,
    waypoints: &[Waypoint3D<T>],
    rng_seed: u64,
    restarts: usize,
) -> Tour<T> {
    let dist = Distances::new(start, end, waypoints);
    let mut best = nearest_neighbour(&dist);
    two_opt(&dist, &mut best);
    let mut best_len = dist.length(&best);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..restarts {
        let mut cand: Vec<usize> = (0..dist.k).collect();
        cand.shuffle(&mut rng);
        two_opt(&dist, &mut cand);
        let len = dist.length(&cand);
        if len < best_len {
            best = cand;
            best_len = len;
        }
    }
    Tour::from_order(start, end, waypoints, best)
}

/// Order step of the planner: exact below the cap (unless overridden),
/// heuristic above it. The heuristic also polishes `current` if given, so the
/// result is never longer than the current order.
pub fn solve_order<T: Scalar>(
    start: &Waypoint3D<T>,
    end: &Waypoint3D<T>,
    waypoints: &[Waypoint3D<T>],
    current: Option<&[usize]>,
    cfg: &SolverConfig<T>,
) -> Result<Tour<T>> {
    let exact = match cfg.order_solver {
        OrderSolver::Exact => true,
        OrderSolver::Heuristic => false,
        OrderSolver::Auto => waypoints.len() <= cfg.exact_cap,
    };
    if exact {
        return solve_order_exact(start, end, waypoints, cfg.exact_cap.max(waypoints.len()));
    }
    let mut tour =
        solve_order_heuristic(start, end, waypoints, cfg.rng_seed, cfg.heuristic_restarts);
    if let Some(cur) = current {
        let polished = improve_order(start, end, waypoints, cur)?;
        if polished.length < tour.length {
            tour = polished;
        }
    }
    Ok(tour)
}
