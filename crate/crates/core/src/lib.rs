//! Shortest 3D flight paths for photographing ground targets with a tilted camera.
//!
//! Each target gets one image-taking waypoint inside its neighbourhood, the set of
//! poses that meet its resolution and full-projection requirements. The planner
//! alternates a visiting-order step with a block coordinate descent on altitudes
//! and horizontal positions, each block solved by successive convex approximation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod convex_bounds;
pub mod error;
pub mod geom;
pub mod op_model;
pub mod planner;
pub mod route_optimizer;
pub mod scalar;
pub mod scenario_io;
pub mod subproblem_solver;
pub mod waypoint_optimizer;

pub use config::{BlockOrder, OrderSolver, SolverConfig};
pub use error::{Error, Result};
pub use geom::{Point3, Vec2};
pub use op_model::{CameraIntrinsics, GroundTarget, Waypoint3D};
pub use planner::{PlanResult, Scenario, Scheme};
pub use route_optimizer::Tour;
pub use scalar::Scalar;
pub use waypoint_optimizer::IterationTrace;

pub type Camera64 = CameraIntrinsics<f64>;
pub type Target64 = GroundTarget<f64>;
pub type Waypoint64 = Waypoint3D<f64>;
pub type Scenario64 = Scenario<f64>;
pub type PlanResult64 = PlanResult<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type Tour64 = Tour<f64>;

pub type Camera32 = CameraIntrinsics<f32>;
pub type Target32 = GroundTarget<f32>;
pub type Waypoint32 = Waypoint3D<f32>;
pub type Scenario32 = Scenario<f32>;
pub type PlanResult32 = PlanResult<f32>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type Tour32 = Tour<f32>;
