//! Scenario and result files, scenario generation, plotting and benchmarking.
//!
//! Files are pretty-printed JSON. Target indices are 1-based in files and
//! 0-based in memory. Floats are written in shortest round-trip form, so reading
//! a written file gives back the same values bit for bit.

pub mod bench;
pub mod generate;
pub mod plot;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::op_model::{CameraIntrinsics, ConstraintMargins, GroundTarget, Waypoint3D};
use crate::planner::{evaluate, FeasibilityReport, PlanResult, Scenario, Scheme};
use crate::route_optimizer::Tour;
use crate::waypoint_optimizer::{IterationTrace, TraceBlock};

pub use bench::{run_bench, write_bench_csv, BenchParams, BenchRow};
pub use generate::{generate, GenerateParams};
pub use plot::{render_svg, trace_csv};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub f0_m: f64,
    pub w0_m: f64,
    pub l0_m: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        let c = CameraIntrinsics::<f64>::default();
        Self {
            f0_m: c.f0(),
            w0_m: c.w0(),
            l0_m: c.l0(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub r_m: f64,
    pub i_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
}

impl From<&Waypoint3D<f64>> for PointSpec {
    fn from(w: &Waypoint3D<f64>) -> Self {
        Self {
            x_m: w.q.x,
            y_m: w.q.y,
            z_m: w.z,
        }
    }
}

impl From<&PointSpec> for Waypoint3D<f64> {
    fn from(p: &PointSpec) -> Self {
        Waypoint3D::new(p.x_m, p.y_m, p.z_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub camera: CameraSpec,
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub start: PointSpec,
    #[serde(default)]
    pub end: PointSpec,
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario<f64>> {
        check_version(self.schema_version)?;
        let camera = CameraIntrinsics::new(self.camera.f0_m, self.camera.w0_m, self.camera.l0_m)?;
        let targets = self
            .targets
            .iter()
            .enumerate()
            .map(|(i, t)| {
                GroundTarget::new(Vec2::new(t.x_m, t.y_m), t.r_m, t.i_min)
                    .map_err(|e| Error::InvalidTarget(format!("target {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Scenario::new(camera, targets, (&self.start).into(), (&self.end).into())
    }

    pub fn from_scenario(scn: &Scenario<f64>) -> Self {
        let c = scn.camera();
        Self {
            schema_version: SCHEMA_VERSION,
            camera: CameraSpec {
                f0_m: c.f0(),
                w0_m: c.w0(),
                l0_m: c.l0(),
            },
            targets: scn
                .targets()
                .iter()
                .map(|t| TargetSpec {
                    x_m: t.center.x,
                    y_m: t.center.y,
                    r_m: t.radius,
                    i_min: t.min_resolution,
                })
                .collect(),
            start: scn.start().into(),
            end: scn.end().into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRow {
    pub iter: usize,
    pub block: TraceBlock,
    pub objective_m: f64,
    pub max_violation: f64,
}

/// Constraint margins of one waypoint; non-negative means satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginRow {
    /// 1-based target index.
    pub target: usize,
    pub resolution: f64,
    pub projection_m: f64,
    pub focal_m: f64,
    /// Margins under the exact trapezoid footprint, absent past the focal limit.
    pub exact_resolution: Option<f64>,
    pub exact_projection_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub schema_version: u32,
    pub scheme: Scheme,
    /// 1-based target indices in visiting order.
    pub order: Vec<usize>,
    /// Indexed by target.
    pub waypoints: Vec<PointSpec>,
    pub distance_m: f64,
    pub initial_distance_m: f64,
    pub trace: Vec<TraceRow>,
    pub feasibility: Vec<MarginRow>,
}

impl ResultFile {
    pub fn from_plan(result: &PlanResult<f64>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scheme: result.scheme,
            order: result.tour.order.iter().map(|i| i + 1).collect(),
            waypoints: result.waypoints.iter().map(PointSpec::from).collect(),
            distance_m: result.distance,
            initial_distance_m: result.trace.initial,
            trace: result
                .trace
                .records
                .iter()
                .map(|r| TraceRow {
                    iter: r.iter,
                    block: r.block,
                    objective_m: r.objective,
                    max_violation: r.max_violation,
                })
                .collect(),
            feasibility: margin_rows(&result.feasibility),
        }
    }

    /// Rebuilds the plan, recomputing feasibility and checking the stored
    /// distance against the waypoints and order.
    pub fn to_plan(&self, scn: &Scenario<f64>) -> Result<PlanResult<f64>> {
        check_version(self.schema_version)?;
        if self.order.contains(&0) {
            return Err(Error::Inconsistent("order indices are 1-based".into()));
        }
        let order: Vec<usize> = self.order.iter().map(|i| i - 1).collect();
        let waypoints: Vec<Waypoint3D<f64>> = self.waypoints.iter().map(Waypoint3D::from).collect();
        let mut trace = IterationTrace::new(self.initial_distance_m);
        for (n, r) in self.trace.iter().enumerate() {
            if r.iter != n + 1 {
                return Err(Error::Inconsistent(format!(
                    "trace entry {} has iter {}",
                    n + 1,
                    r.iter
                )));
            }
            trace.push(r.block, r.objective_m, r.max_violation);
        }
        let mut plan = PlanResult {
            scheme: self.scheme,
            tour: Tour {
                order,
                length: self.distance_m,
            },
            waypoints,
            distance: self.distance_m,
            trace,
            feasibility: FeasibilityReport {
                targets: Vec::new(),
                max_violation: 0.0,
                distance: 0.0,
            },
        };
        plan.feasibility = evaluate(scn, &plan)?;
        let recomputed = plan.feasibility.distance;
        if (recomputed - self.distance_m).abs() > 1e-9 * recomputed.max(1.0) {
            return Err(Error::Inconsistent(format!(
                "stored distance {} does not match the waypoints ({recomputed})",
                self.distance_m
            )));
        }
        Ok(plan)
    }
}

pub fn margin_rows(report: &FeasibilityReport<f64>) -> Vec<MarginRow> {
    report
        .targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let a: &ConstraintMargins<f64> = &t.approximate;
            MarginRow {
                target: i + 1,
                resolution: a.resolution,
                projection_m: a.projection,
                focal_m: a.focal,
                exact_resolution: t.exact.map(|e| e.resolution),
                exact_projection_m: t.exact.map(|e| e.projection),
            }
        })
        .collect()
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported schema_version {v}; this build reads version {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_scenario(path: &Path) -> Result<Scenario<f64>> {
    read_json::<ScenarioFile>(path)?.to_scenario()
}
