use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which block the alternating optimizer updates first in each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrder {
    AltitudeFirst,
    HorizontalFirst,
}

/// Visiting-order solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderSolver {
    /// Exact dynamic programming up to `exact_cap` targets, heuristic above.
    Auto,
    Exact,
    Heuristic,
}

/// Tolerances and iteration caps for every stage of the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    default,
    deny_unknown_fields,
    bound(deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct SolverConfig<T> {
    /// Relative objective improvement below which a loop counts as converged.
    pub obj_tol: T,
    /// Absolute slack on constraint margins.
    pub feas_tol: T,
    /// Convex-approximation rounds per block update.
    pub max_sca_iters: usize,
    /// Altitude/horizontal sweeps per waypoint optimization.
    pub max_bcd_iters: usize,
    /// Waypoint/order rounds of the overall planner.
    pub max_outer_iters: usize,
    /// Newton steps per chain solve.
    pub max_newton_iters: usize,
    pub newton_per_stage: usize,
    /// Initial barrier weight on the objective.
    pub barrier_t0: T,
    pub barrier_growth: T,
    /// Objective smoothing radius at the first barrier stage, meters.
    pub smoothing_start: T,
    pub smoothing_min: T,
    /// Barrier stages without objective change before a solve stops.
    pub stall_iters: usize,
    /// Largest target count solved by exact dynamic programming.
    pub exact_cap: usize,
    pub order_solver: OrderSolver,
    /// Random restarts of the 2-opt heuristic besides the nearest-neighbour start.
    pub heuristic_restarts: usize,
    pub block_order: BlockOrder,
    /// Run one convex-approximation round per block before switching blocks,
    /// instead of iterating each block to convergence.
    pub interleave_blocks: bool,
    /// On the first sweep, also try the opposite block order from the same start
    /// and continue from whichever is shorter.
    pub explore_block_orders: bool,
    pub rng_seed: u64,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            obj_tol: T::lit(1e-6),
            feas_tol: T::lit(1e-6),
            max_sca_iters: 30,
            max_bcd_iters: 20,
            max_outer_iters: 10,
            max_newton_iters: 500,
            newton_per_stage: 50,
            barrier_t0: T::one(),
            barrier_growth: T::lit(10.0),
            smoothing_start: T::lit(1e-2),
            smoothing_min: T::lit(1e-8),
            stall_iters: 3,
            exact_cap: 13,
            order_solver: OrderSolver::Auto,
            heuristic_restarts: 8,
            block_order: BlockOrder::AltitudeFirst,
            interleave_blocks: false,
            explore_block_orders: true,
            rng_seed: 0,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let caps = [
            ("max_sca_iters", self.max_sca_iters),
            ("max_bcd_iters", self.max_bcd_iters),
            ("max_outer_iters", self.max_outer_iters),
            ("max_newton_iters", self.max_newton_iters),
            ("newton_per_stage", self.newton_per_stage),
            ("stall_iters", self.stall_iters),
        ];
        for (name, v) in caps {
            if v == 0 {
                return Err(Error::InvalidProblem(format!("{name} must be at least 1")));
            }
        }
        let positive = [
            ("obj_tol", self.obj_tol),
            ("feas_tol", self.feas_tol),
            ("barrier_t0", self.barrier_t0),
            ("smoothing_min", self.smoothing_min),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(Error::InvalidProblem(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.barrier_growth > T::one()) {
            return Err(Error::InvalidProblem("barrier_growth must exceed 1".into()));
        }
        if !(self.smoothing_start >= self.smoothing_min) {
            return Err(Error::InvalidProblem(
                "smoothing_start must be at least smoothing_min".into(),
            ));
        }
        Ok(())
    }
}
