//! Waypoint placement for a fixed visiting order.
//!
//! Altitudes and horizontal positions are optimized alternately. Each block
//! update is a successive convex approximation: build the convex inner
//! constraint sets at the incumbent waypoints, solve the resulting chain problem,
//! accept the result if it is shorter and still satisfies the original
//! constraints, and repeat.

use serde::{Deserialize, Serialize};

use crate::config::{BlockOrder, SolverConfig};
use crate::convex_bounds::{build_constraints, SubproblemMode, SurrogatePoint};
use crate::error::{Error, Result};
use crate::op_model::{constraint_margins, Waypoint3D};
use crate::planner::Scenario;
use crate::scalar::Scalar;
use crate::subproblem_solver::{
    ordered_chain_length, solve_chain, BlockLayout, ChainBlock, ChainProblem, SolveStatus,
};

/// What an iteration changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TraceBlock {
    /// Altitudes.
    #[serde(rename = "Z")]
    Z,
    /// Horizontal positions.
    #[serde(rename = "Q")]
    Q,
    /// Visiting order.
    #[serde(rename = "ORDER")]
    Order,
}

impl TraceBlock {
    pub fn label(self) -> &'static str {
        match self {
            TraceBlock::Z => "Z",
            TraceBlock::Q => "Q",
            TraceBlock::Order => "ORDER",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<T> {
    /// 1-based position in the trace.
    pub iter: usize,
    pub block: TraceBlock,
    /// Chain length after the iteration, meters.
    pub objective: T,
    /// Largest violation of the original constraints after the iteration.
    pub max_violation: T,
}

/// Objective history of an optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace<T> {
    /// Chain length before the first iteration.
    pub initial: T,
    pub records: Vec<TraceRecord<T>>,
}

impl<T: Scalar> IterationTrace<T> {
    pub fn new(initial: T) -> Self {
        Self {
            initial,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, block: TraceBlock, objective: T, max_violation: T) {
        self.records.push(TraceRecord {
            iter: self.records.len() + 1,
            block,
            objective,
            max_violation,
        });
    }

    /// Appends the records of `other`, renumbering them after the existing ones.
    pub fn append(&mut self, other: &IterationTrace<T>) {
        for r in &other.records {
            self.push(r.block, r.objective, r.max_violation);
        }
    }

    pub fn last_objective(&self) -> T {
        self.records.last().map_or(self.initial, |r| r.objective)
    }

    /// Objective values including the initial one.
    pub fn objectives(&self) -> impl Iterator<Item = T> + '_ {
        std::iter::once(self.initial).chain(self.records.iter().map(|r| r.objective))
    }

    /// True when no objective exceeds its predecessor by more than `slack`.
    pub fn is_non_increasing(&self, slack: T) -> bool {
        let objs: Vec<T> = self.objectives().collect();
        objs.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaypointOutcome<T> {
    /// Waypoints indexed by target.
    pub waypoints: Vec<Waypoint3D<T>>,
    pub trace: IterationTrace<T>,
    /// Set when the loop stopped on the improvement tolerance rather than a cap.
    pub converged: bool,
}

/// Largest violation of the original constraints over all targets.
pub fn max_violation<T: Scalar>(scn: &Scenario<T>, waypoints: &[Waypoint3D<T>]) -> T {
    scn.targets()
        .iter()
        .zip(waypoints)
        .map(|(gt, wp)| match constraint_margins(scn.camera(), wp, gt) {
            Ok(m) => m.max_violation(),
            Err(_) => T::infinity(),
        })
        .fold(T::zero(), T::max)
}

fn check_inputs<T: Scalar>(
    scn: &Scenario<T>,
    order: &[usize],
    waypoints: &[Waypoint3D<T>],
    cfg: &SolverConfig<T>,
) -> Result<()> {
    cfg.validate()?;
    let k = scn.targets().len();
    if waypoints.len() != k {
        return Err(Error::InvalidProblem(format!(
            "{} waypoints given for {k} targets",
            waypoints.len()
        )));
    }
    crate::route_optimizer::check_permutation(order, k)?;
    for (i, (gt, wp)) in scn.targets().iter().zip(waypoints).enumerate() {
        let m = constraint_margins(scn.camera(), wp, gt)?;
        if m.min() < -cfg.feas_tol {
            return Err(Error::InfeasibleTarget {
                index: i + 1,
                reason: format!(
                    "waypoint ({}, {}, {}) violates the neighbourhood: {m:?}",
                    wp.q.x, wp.q.y, wp.z
                ),
            });
        }
    }
    Ok(())
}

enum Round {
    Improved,
    Converged,
    Stopped,
}

/// One convex-approximation round for `mode`, updating `waypoints` in place when
/// the result is accepted.
fn sca_round<T: Scalar>(
    scn: &Scenario<T>,
    order: &[usize],
    waypoints: &mut [Waypoint3D<T>],
    mode: SubproblemMode,
    cfg: &SolverConfig<T>,
    trace: &mut IterationTrace<T>,
) -> Result<Round> {
    let cam = scn.camera();
    let mut sets = Vec::with_capacity(order.len());
    let mut blocks = Vec::with_capacity(order.len());
    for &t in order {
        let gt = &scn.targets()[t];
        let wp = &waypoints[t];
        let set = build_constraints(
            mode,
            gt,
            cam,
            SurrogatePoint::from_waypoint(wp, gt),
            cfg.feas_tol,
        )
        .map_err(|e| Error::InfeasibleTarget {
            index: t + 1,
            reason: e.to_string(),
        })?;
        let layout = match mode {
            SubproblemMode::Altitude => BlockLayout::Altitude { q: wp.q },
            SubproblemMode::Horizontal => BlockLayout::Horizontal {
                origin: gt.center,
                z: wp.z,
            },
        };
        blocks.push(ChainBlock::new(layout, Some(Box::new(set)), set.anchor()));
        sets.push(set);
    }
    let problem = ChainProblem {
        start: scn.start().point(),
        end: scn.end().point(),
        blocks,
    };
    let before = ordered_chain_length(scn.start(), scn.end(), waypoints, order.iter().copied());
    let outcome = solve_chain(&problem, cfg)?;
    if outcome.status == SolveStatus::NumericalFailure {
        return Ok(Round::Stopped);
    }

    let mut candidate = waypoints.to_vec();
    for ((&t, set), x) in order.iter().zip(&sets).zip(&outcome.solution) {
        if *x == set.anchor() {
            continue;
        }
        let (l, z) = set.pose(x);
        candidate[t] = Waypoint3D {
            q: scn.targets()[t].center + l,
            z,
        };
    }
    let after = ordered_chain_length(scn.start(), scn.end(), &candidate, order.iter().copied());
    let violation = max_violation(scn, &candidate);
    if !(after <= before) || !(violation <= cfg.feas_tol) {
        return Ok(Round::Stopped);
    }
    waypoints.copy_from_slice(&candidate);
    let block = match mode {
        SubproblemMode::Altitude => TraceBlock::Z,
        SubproblemMode::Horizontal => TraceBlock::Q,
    };
    trace.push(block, after, violation);
    if before - after < cfg.obj_tol * before.max(T::min_positive_value()) {
        Ok(Round::Converged)
    } else {
        Ok(Round::Improved)
    }
}

fn optimize_block<T: Scalar>(
    scn: &Scenario<T>,
    order: &[usize],
    waypoints: &mut [Waypoint3D<T>],
    mode: SubproblemMode,
    cfg: &SolverConfig<T>,
    rounds: usize,
    trace: &mut IterationTrace<T>,
) -> Result<bool> {
    for _ in 0..rounds {
        match sca_round(scn, order, waypoints, mode, cfg, trace)? {
            Round::Improved => {}
            Round::Converged | Round::Stopped => return Ok(true),
        }
    }
    Ok(false)
}

fn optimize_single_block<T: Scalar>(
    scn: &Scenario<T>,
    order: &[usize],
    waypoints: &[Waypoint3D<T>],
    mode: SubproblemMode,
    cfg: &SolverConfig<T>,
) -> Result<WaypointOutcome<T>> {
    check_inputs(scn, order, waypoints, cfg)?;
    let mut wps = waypoints.to_vec();
    let mut trace = IterationTrace::new(ordered_chain_length(
        scn.start(),
        scn.end(),
        &wps,
        order.iter().copied(),
    ));
    let converged = optimize_block(
        scn,
        order,
        &mut wps,
        mode,
        cfg,
        cfg.max_sca_iters,
        &mut trace,
    )?;
    Ok(WaypointOutcome {
        waypoints: wps,
        trace,
        converged,
    })
}

/// Optimizes all altitudes with horizontal positions held fixed.
///
/// `order` lists target indices in visiting order; `waypoints` is indexed by target.
pub fn optimize_altitudes<T: Scalar>(
    scn: &Scenario<T>,
    order: &[usize],
    waypoints: &[Waypoint3D<T>],
    cfg: &SolverConfig<T>,
) -> Result<WaypointOutcome<T>> {
    optimize_single_block(scn, order, waypoints, SubproblemMode::Altitude, cfg)
}

/// Optimizes all horizontal positions with altitudes held fixed.
pub fn optimize_horizontal<T: Scalar>(
    scn: &Scenario<T>,
    order: &[usize],
    waypoints: &[Waypoint3D<T>],
    cfg: &SolverConfig<T>,
) -> Result<WaypointOutcome<T>> {
    optimize_single_block(scn, order, waypoints, SubproblemMode::Horizontal, cfg)
}

/// Alternates altitude and horizontal updates until two consecutive sweeps
/// improve the chain length by less than `obj_tol` (relative) or
/// `max_bcd_iters` sweeps have run.
///
/// A waypoint can get stuck at a point that no single block can improve, such
/// as a nadir pose at the lowest altitude that still fits the whole target in
/// the frame. Which such point the descent reaches depends on the block order,
/// hence `explore_block_orders`.
pub fn optimize_waypoints<T: Scalar>(
    scn: &Scenario<T>,
    order: &[usize],
    waypoints: &[Waypoint3D<T>],
    cfg: &SolverConfig<T>,
) -> Result<WaypointOutcome<T>> {
    check_inputs(scn, order, waypoints, cfg)?;
    let mut wps = waypoints.to_vec();
    let mut trace = IterationTrace::new(ordered_chain_length(
        scn.start(),
        scn.end(),
        &wps,
        order.iter().copied(),
    ));
    let modes = match cfg.block_order {
        BlockOrder::AltitudeFirst => [SubproblemMode::Altitude, SubproblemMode::Horizontal],
        BlockOrder::HorizontalFirst => [SubproblemMode::Horizontal, SubproblemMode::Altitude],
    };
    let rounds = if cfg.interleave_blocks {
        1
    } else {
        cfg.max_sca_iters
    };
    let sweep = |wps: &mut Vec<Waypoint3D<T>>,
                 trace: &mut IterationTrace<T>,
                 modes: [SubproblemMode; 2]|
     -> Result<()> {
        for mode in modes {
            optimize_block(scn, order, wps, mode, cfg, rounds, trace)?;
        }
        Ok(())
    };
    let mut quiet_sweeps = 0;
    let mut converged = false;
    for s in 0..cfg.max_bcd_iters {
        let before = trace.last_objective();
        if s == 0 && cfg.explore_block_orders {
            let mut alt_wps = wps.clone();
            let mut alt_trace = trace.clone();
            sweep(&mut wps, &mut trace, modes)?;
            sweep(&mut alt_wps, &mut alt_trace, [modes[1], modes[0]])?;
            if alt_trace.last_objective() < trace.last_objective() {
                wps = alt_wps;
                trace = alt_trace;
            }
        } else {
            sweep(&mut wps, &mut trace, modes)?;
        }
        let after = trace.last_objective();
        if before - after < cfg.obj_tol * before.max(T::min_positive_value()) {
            quiet_sweeps += 1;
            if quiet_sweeps >= 2 {
                converged = true;
                break;
            }
        } else {
            quiet_sweeps = 0;
        }
    }
    Ok(WaypointOutcome {
        waypoints: wps,
        trace,
        converged,
    })
}
