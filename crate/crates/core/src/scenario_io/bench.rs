//! Batch runs over seeded random scenarios.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::generate::{generate, GenerateParams};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::planner::{
    plan_from, plan_op_2d_from, plan_scheme, plan_vp_2d, PlanResult, Scheme, DEFAULT_FIXED_ALTITUDE,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    /// Seeds `0..seeds` are run.
    pub seeds: u64,
    pub schemes: Vec<Scheme>,
    /// Scenario parameters; the seed field is overridden per run.
    pub scenario: GenerateParams,
    pub altitude: f64,
    /// Start each scheme from the previous one's result (nadir, then
    /// horizontal, then full 3D) instead of its own initialization.
    pub chained: bool,
    /// Record wall-clock times. Off by default so output is reproducible.
    pub timing: bool,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            seeds: 5,
            schemes: vec![Scheme::Vp2d, Scheme::Op2d, Scheme::Op3d],
            scenario: GenerateParams {
                k: 10,
                ..Default::default()
            },
            altitude: DEFAULT_FIXED_ALTITUDE,
            chained: true,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub seed: u64,
    pub scheme: Scheme,
    pub distance_m: f64,
    pub iterations: usize,
    pub wall_ms: Option<f64>,
}

fn timed<R>(f: impl FnOnce() -> Result<R>) -> Result<(R, f64)> {
    let t0 = Instant::now();
    let r = f()?;
    Ok((r, t0.elapsed().as_secs_f64() * 1e3))
}

fn run_seed(seed: u64, p: &BenchParams, cfg: &SolverConfig<f64>) -> Result<Vec<BenchRow>> {
    let scn = generate(&GenerateParams {
        seed,
        ..p.scenario.clone()
    })?
    .to_scenario()?;
    let mut results: Vec<(Scheme, PlanResult<f64>, f64)> = Vec::new();
    if p.chained {
        let wants = |s: Scheme| p.schemes.contains(&s);
        let (vp, t_vp) = timed(|| plan_vp_2d(&scn, p.altitude, cfg))?;
        if wants(Scheme::Op2d) || wants(Scheme::Op3d) {
            let (op2, t_op2) = timed(|| plan_op_2d_from(&scn, &vp.tour.order, &vp.waypoints, cfg))?;
            if wants(Scheme::Op3d) {
                let (op3, t_op3) = timed(|| plan_from(&scn, &op2.tour.order, &op2.waypoints, cfg))?;
                results.push((Scheme::Op3d, op3, t_op3));
            }
            results.push((Scheme::Op2d, op2, t_op2));
        }
        results.push((Scheme::Vp2d, vp, t_vp));
    } else {
        for &s in &p.schemes {
            let (r, t) = timed(|| plan_scheme(&scn, s, p.altitude, cfg))?;
            results.push((s, r, t));
        }
    }
    Ok(p.schemes
        .iter()
        .filter_map(|s| results.iter().find(|(rs, _, _)| rs == s))
        .map(|(s, r, t)| BenchRow {
            seed,
            scheme: *s,
            distance_m: r.distance,
            iterations: r.iterations(),
            wall_ms: p.timing.then_some(*t),
        })
        .collect())
}

/// Runs every seed, in parallel across seeds; rows come back ordered by seed and
/// then by the requested scheme order.
pub fn run_bench(p: &BenchParams, cfg: &SolverConfig<f64>) -> Result<Vec<BenchRow>> {
    if p.schemes.is_empty() {
        return Err(Error::InvalidProblem("no schemes requested".into()));
    }
    cfg.validate()?;
    let per_seed: Vec<Vec<BenchRow>> = (0..p.seeds)
        .into_par_iter()
        .map(|seed| run_seed(seed, p, cfg))
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    if rows.is_empty() {
        w.write_record(["seed", "scheme", "distance_m", "iterations", "wall_ms"])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "bench output".into(),
        source,
    })
}
