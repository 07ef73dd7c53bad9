//! Trajectory planning: alternate waypoint placement and visiting order, plus the
//! fixed-altitude baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::op_model::{
    constraint_margins, coverage_area_exact, inner_distances_exact, CameraIntrinsics,
    ConstraintMargins, GroundTarget, Waypoint3D,
};
use crate::route_optimizer::{check_permutation, solve_order, Tour};
use crate::scalar::Scalar;
use crate::subproblem_solver::ordered_chain_length;
use crate::waypoint_optimizer::{
    max_violation, optimize_horizontal, optimize_waypoints, IterationTrace, TraceBlock,
};

/// Altitude of the fixed-altitude schemes unless overridden, meters.
pub const DEFAULT_FIXED_ALTITUDE: f64 = 100.0;

/// Targets, camera and the fixed start and end points of a flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    camera: CameraIntrinsics<T>,
    targets: Vec<GroundTarget<T>>,
    start: Waypoint3D<T>,
    end: Waypoint3D<T>,
}

impl<T: Scalar> Scenario<T> {
    /// Validates that there is at least one target and that every target has a
    /// non-empty nadir altitude band.
    pub fn new(
        camera: CameraIntrinsics<T>,
        targets: Vec<GroundTarget<T>>,
        start: Waypoint3D<T>,
        end: Waypoint3D<T>,
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidProblem("scenario has no targets".into()));
        }
        for p in [&start, &end] {
            if !(p.q.x.is_finite() && p.q.y.is_finite() && p.z.is_finite()) {
                return Err(Error::InvalidProblem(
                    "start and end points must be finite".into(),
                ));
            }
        }
        for (i, gt) in targets.iter().enumerate() {
            let (lo, hi) = gt.nadir_altitude_band(&camera);
            if !(lo <= hi) {
                return Err(Error::InfeasibleTarget {
                    index: i + 1,
                    reason: format!(
                        "no feasible nadir altitude: full projection needs z ≥ {lo} but resolution \
                         needs z ≤ {hi}; only nadir feasibility is checked, oblique-only targets are rejected"
                    ),
                });
            }
        }
        Ok(Self {
            camera,
            targets,
            start,
            end,
        })
    }

    pub fn camera(&self) -> &CameraIntrinsics<T> {
        &self.camera
    }

    pub fn targets(&self) -> &[GroundTarget<T>] {
        &self.targets
    }

    pub fn start(&self) -> &Waypoint3D<T> {
        &self.start
    }

    pub fn end(&self) -> &Waypoint3D<T> {
        &self.end
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Waypoints directly above each target at `altitude`, checked against every
    /// target's neighbourhood.
    pub fn nadir_waypoints(&self, altitude: T, feas_tol: T) -> Result<Vec<Waypoint3D<T>>> {
        if !(altitude > T::zero()) {
            return Err(Error::InvalidProblem(format!(
                "altitude must be positive, got {altitude}"
            )));
        }
        self.targets
            .iter()
            .enumerate()
            .map(|(i, gt)| {
                let wp = Waypoint3D { q: gt.center, z: altitude };
                let m = constraint_margins(&self.camera, &wp, gt)?;
                if m.min() < -feas_tol {
                    return Err(Error::InfeasibleTarget {
                        index: i + 1,
                        reason: format!("nadir waypoint at altitude {altitude} violates the neighbourhood: {m:?}"),
                    });
                }
                Ok(wp)
            })
            .collect()
    }

    pub fn distance(&self, order: &[usize], waypoints: &[Waypoint3D<T>]) -> T {
        ordered_chain_length(&self.start, &self.end, waypoints, order.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Altitudes, horizontal positions and order optimized.
    #[serde(rename = "OP3D")]
    Op3d,
    /// Horizontal positions and order optimized at a fixed altitude.
    #[serde(rename = "OP2D")]
    Op2d,
    /// Waypoints directly above the targets at a fixed altitude; order only.
    #[serde(rename = "VP2D")]
    Vp2d,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Op3d, Scheme::Op2d, Scheme::Vp2d];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Op3d => "OP3D",
            Scheme::Op2d => "OP2D",
            Scheme::Vp2d => "VP2D",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "op3d" => Ok(Scheme::Op3d),
            "op2d" => Ok(Scheme::Op2d),
            "vp2d" => Ok(Scheme::Vp2d),
            _ => Err(Error::Parse(format!(
                "unknown scheme {s:?}; expected op3d, op2d or vp2d"
            ))),
        }
    }
}

/// Margins of one waypoint against its target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetReport<T> {
    /// Margins under the closed-form model the optimizer uses.
    pub approximate: ConstraintMargins<T>,
    /// Margins under the exact trapezoid footprint; `None` when the pose is past
    /// the focal limit and the footprint is unbounded.
    pub exact: Option<ConstraintMargins<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport<T> {
    /// Indexed by target.
    pub targets: Vec<TargetReport<T>>,
    /// Largest violation of the approximate constraints.
    pub max_violation: T,
    /// Chain length recomputed from the waypoints and order.
    pub distance: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult<T> {
    pub scheme: Scheme,
    pub tour: Tour<T>,
    /// Indexed by target.
    pub waypoints: Vec<Waypoint3D<T>>,
    pub distance: T,
    pub trace: IterationTrace<T>,
    pub feasibility: FeasibilityReport<T>,
}

impl<T: Scalar> PlanResult<T> {
    /// Number of trace records.
    pub fn iterations(&self) -> usize {
        self.trace.records.len()
    }

    pub fn mean_altitude(&self) -> T {
        let sum = self.waypoints.iter().fold(T::zero(), |acc, w| acc + w.z);
        sum / T::from_usize_lossy(self.waypoints.len().max(1))
    }
}

fn exact_margins<T: Scalar>(
    cam: &CameraIntrinsics<T>,
    wp: &Waypoint3D<T>,
    gt: &GroundTarget<T>,
    approx: &ConstraintMargins<T>,
) -> Option<ConstraintMargins<T>> {
    let area = coverage_area_exact(cam, wp, gt).ok()?;
    let inner = inner_distances_exact(cam, wp, gt).ok()?;
    Some(ConstraintMargins {
        resolution: T::PI() * gt.radius * gt.radius / area - gt.min_resolution,
        projection: inner.d1.min(inner.d2) - gt.radius,
        focal: approx.focal,
    })
}

/// Recomputes every constraint margin and the chain length of a result.
pub fn evaluate<T: Scalar>(
    scn: &Scenario<T>,
    result: &PlanResult<T>,
) -> Result<FeasibilityReport<T>> {
    if result.waypoints.len() != scn.len() {
        return Err(Error::Inconsistent(format!(
            "result has {} waypoints for {} targets",
            result.waypoints.len(),
            scn.len()
        )));
    }
    check_permutation(&result.tour.order, scn.len())
        .map_err(|e| Error::Inconsistent(e.to_string()))?;
    let mut targets = Vec::with_capacity(scn.len());
    let mut worst = T::zero();
    for (gt, wp) in scn.targets().iter().zip(&result.waypoints) {
        let approximate = constraint_margins(scn.camera(), wp, gt).unwrap_or(ConstraintMargins {
            resolution: T::neg_infinity(),
            projection: T::neg_infinity(),
            focal: T::neg_infinity(),
        });
        worst = worst.max(approximate.max_violation());
        targets.push(TargetReport {
            approximate,
            exact: exact_margins(scn.camera(), wp, gt, &approximate),
        });
    }
    Ok(FeasibilityReport {
        targets,
        max_violation: worst,
        distance: scn.distance(&result.tour.order, &result.waypoints),
    })
}

fn finish<T: Scalar>(
    scn: &Scenario<T>,
    scheme: Scheme,
    order: Vec<usize>,
    waypoints: Vec<Waypoint3D<T>>,
    trace: IterationTrace<T>,
) -> Result<PlanResult<T>> {
    let tour = Tour::from_order(scn.start(), scn.end(), &waypoints, order);
    let mut result = PlanResult {
        scheme,
        distance: tour.length,
        tour,
        waypoints,
        trace,
        feasibility: FeasibilityReport {
            targets: Vec::new(),
            max_violation: T::zero(),
            distance: T::zero(),
        },
    };
    result.feasibility = evaluate(scn, &result)?;
    Ok(result)
}

/// Order step: adopts a new order only if it is strictly shorter, then records
/// the resulting length.
fn order_step<T: Scalar>(
    scn: &Scenario<T>,
    order: &mut Vec<usize>,
    waypoints: &[Waypoint3D<T>],
    cfg: &SolverConfig<T>,
    trace: &mut IterationTrace<T>,
) -> Result<bool> {
    let current = scn.distance(order, waypoints);
    let tour = solve_order(scn.start(), scn.end(), waypoints, Some(order), cfg)?;
    let changed = tour.length < current && tour.order != *order;
    if changed {
        *order = tour.order;
    }
    trace.push(
        TraceBlock::Order,
        scn.distance(order, waypoints),
        max_violation(scn, waypoints),
    );
    Ok(changed)
}

/// Visiting order from the ground positions and nadir waypoints at the middle
/// of each target's feasible altitude band.
pub fn initialize<T: Scalar>(
    scn: &Scenario<T>,
    cfg: &SolverConfig<T>,
) -> Result<(Tour<T>, Vec<Waypoint3D<T>>)> {
    cfg.validate()?;
    let ground: Vec<Waypoint3D<T>> = scn
        .targets()
        .iter()
        .map(|gt| Waypoint3D {
            q: gt.center,
            z: T::zero(),
        })
        .collect();
    let ground_tour = solve_order(scn.start(), scn.end(), &ground, None, cfg)?;
    let half = T::lit(0.5);
    let waypoints: Vec<Waypoint3D<T>> = scn
        .targets()
        .iter()
        .map(|gt| {
            let (lo, hi) = gt.nadir_altitude_band(scn.camera());
            Waypoint3D {
                q: gt.center,
                z: (lo + hi) * half,
            }
        })
        .collect();
    for (i, (gt, wp)) in scn.targets().iter().zip(&waypoints).enumerate() {
        let m = constraint_margins(scn.camera(), wp, gt)?;
        if m.min() < -cfg.feas_tol {
            return Err(Error::InfeasibleTarget {
                index: i + 1,
                reason: format!("initial nadir waypoint violates the neighbourhood: {m:?}"),
            });
        }
    }
    Ok((
        Tour::from_order(scn.start(), scn.end(), &waypoints, ground_tour.order),
        waypoints,
    ))
}

/// Full 3D planning from the default initialization.
pub fn plan<T: Scalar>(scn: &Scenario<T>, cfg: &SolverConfig<T>) -> Result<PlanResult<T>> {
    let (tour, waypoints) = initialize(scn, cfg)?;
    plan_from(scn, &tour.order, &waypoints, cfg)
}

/// Full 3D planning from the given order and feasible waypoints.
pub fn plan_from<T: Scalar>(
    scn: &Scenario<T>,
    order: &[usize],
    waypoints: &[Waypoint3D<T>],
    cfg: &SolverConfig<T>,
) -> Result<PlanResult<T>> {
    alternate(scn, order, waypoints, cfg, Scheme::Op3d)
}

/// Nadir waypoints at a fixed altitude, visited in the best order found.
pub fn plan_vp_2d<T: Scalar>(
    scn: &Scenario<T>,
    altitude: T,
    cfg: &SolverConfig<T>,
) -> Result<PlanResult<T>> {
    cfg.validate()?;
    let waypoints = scn.nadir_waypoints(altitude, cfg.feas_tol)?;
    let mut order: Vec<usize> = (0..scn.len()).collect();
    let mut trace = IterationTrace::new(scn.distance(&order, &waypoints));
    order_step(scn, &mut order, &waypoints, cfg, &mut trace)?;
    finish(scn, Scheme::Vp2d, order, waypoints, trace)
}

/// Horizontal optimization at a fixed altitude, started from the fixed-altitude
/// nadir solution.
pub fn plan_op_2d<T: Scalar>(
    scn: &Scenario<T>,
    altitude: T,
    cfg: &SolverConfig<T>,
) -> Result<PlanResult<T>> {
    let vp = plan_vp_2d(scn, altitude, cfg)?;
    plan_op_2d_from(scn, &vp.tour.order, &vp.waypoints, cfg)
}

/// Horizontal optimization from the given order and feasible waypoints; their
/// altitudes are kept.
pub fn plan_op_2d_from<T: Scalar>(
    scn: &Scenario<T>,
    order: &[usize],
    waypoints: &[Waypoint3D<T>],
    cfg: &SolverConfig<T>,
) -> Result<PlanResult<T>> {
    alternate(scn, order, waypoints, cfg, Scheme::Op2d)
}

/// Runs the fixed-altitude nadir scheme, then the horizontal scheme from its
/// result, then the full 3D scheme from that. Returns results in that order.
pub fn plan_chained<T: Scalar>(
    scn: &Scenario<T>,
    altitude: T,
    cfg: &SolverConfig<T>,
) -> Result<[PlanResult<T>; 3]> {
    let vp = plan_vp_2d(scn, altitude, cfg)?;
    let op2 = plan_op_2d_from(scn, &vp.tour.order, &vp.waypoints, cfg)?;
    let op3 = plan_from(scn, &op2.tour.order, &op2.waypoints, cfg)?;
    Ok([vp, op2, op3])
}

/// Runs one scheme; `altitude` applies to the fixed-altitude schemes.
pub fn plan_scheme<T: Scalar>(
    scn: &Scenario<T>,
    scheme: Scheme,
    altitude: T,
    cfg: &SolverConfig<T>,
) -> Result<PlanResult<T>> {
    match scheme {
        Scheme::Op3d => plan(scn, cfg),
        Scheme::Op2d => plan_op_2d(scn, altitude, cfg),
        Scheme::Vp2d => plan_vp_2d(scn, altitude, cfg),
    }
}

fn alternate<T: Scalar>(
    scn: &Scenario<T>,
    order: &[usize],
    waypoints: &[Waypoint3D<T>],
    cfg: &SolverConfig<T>,
    scheme: Scheme,
) -> Result<PlanResult<T>> {
    cfg.validate()?;
    check_permutation(order, scn.len())?;
    let mut order = order.to_vec();
    let mut wps = waypoints.to_vec();
    let mut trace = IterationTrace::new(scn.distance(&order, &wps));
    for _ in 0..cfg.max_outer_iters {
        let before = trace.last_objective();
        let out = match scheme {
            Scheme::Op3d => optimize_waypoints(scn, &order, &wps, cfg)?,
            _ => optimize_horizontal(scn, &order, &wps, cfg)?,
        };
        trace.append(&out.trace);
        wps = out.waypoints;
        let reordered = order_step(scn, &mut order, &wps, cfg, &mut trace)?;
        let after = trace.last_objective();
        if !reordered && out.converged {
            break;
        }
        if before - after < cfg.obj_tol * before.max(T::min_positive_value()) {
            break;
        }
    }
    finish(scn, scheme, order, wps, trace)
}

/// Default-camera scenario from plain coordinates; `(x, y, radius, min_resolution)` per target.
pub fn scenario_from_tuples(
    targets: &[(f64, f64, f64, f64)],
    start: (f64, f64, f64),
    end: (f64, f64, f64),
) -> Result<Scenario<f64>> {
    let gts = targets
        .iter()
        .map(|&(x, y, r, i)| GroundTarget::new(Vec2::new(x, y), r, i))
        .collect::<Result<Vec<_>>>()?;
    Scenario::new(
        CameraIntrinsics::default(),
        gts,
        Waypoint3D::new(start.0, start.1, start.2),
        Waypoint3D::new(end.0, end.1, end.2),
    )
}
