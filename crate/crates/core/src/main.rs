use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oblique_core::error::{Error, Result};
use oblique_core::planner::{plan_scheme, Scheme, DEFAULT_FIXED_ALTITUDE};
use oblique_core::scenario_io::{
    self, generate, read_json, read_scenario, render_svg, run_bench, to_json, trace_csv,
    write_bench_csv, write_json, write_text, BenchParams, GenerateParams, ResultFile,
};
use oblique_core::SolverConfig;

/// Plan minimum-length UAV flights that photograph ground targets obliquely.
#[derive(Parser)]
#[command(name = "oblique", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random scenario.
    Gen(GenArgs),
    /// Plan a trajectory for a scenario.
    Plan(PlanArgs),
    /// Check a result against its scenario.
    Eval(EvalArgs),
    /// Run every scheme on seeded random scenarios and write a CSV summary.
    Bench(BenchArgs),
    /// Draw a result as SVG, with the trace alongside as CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct ScenarioShape {
    /// Number of ground targets.
    #[arg(long)]
    k: Option<usize>,
    /// Side of the square the targets are placed in, meters.
    #[arg(long, default_value_t = 300.0)]
    area: f64,
    /// Target radius, meters.
    #[arg(long, default_value_t = 20.0)]
    radius: f64,
    #[arg(long, default_value_t = 0.01)]
    imin_lo: f64,
    #[arg(long, default_value_t = 0.4)]
    imin_hi: f64,
}

impl ScenarioShape {
    fn params(&self, seed: u64, default_k: usize) -> GenerateParams {
        GenerateParams {
            seed,
            k: self.k.unwrap_or(default_k),
            area_m: self.area,
            radius_m: self.radius,
            i_min_lo: self.imin_lo,
            i_min_hi: self.imin_hi,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    shape: ScenarioShape,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "op3d")]
    scheme: Scheme,
    /// Fixed altitude of the 2D schemes, meters.
    #[arg(long, default_value_t = DEFAULT_FIXED_ALTITUDE)]
    altitude: f64,
    /// Solver settings as JSON; unspecified fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    result: PathBuf,
    /// Largest tolerated constraint violation.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Number of seeds; seeds 0..N are run.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[command(flatten)]
    shape: ScenarioShape,
    #[arg(long, value_delimiter = ',', default_value = "vp2d,op2d,op3d")]
    schemes: Vec<Scheme>,
    #[arg(long, default_value_t = DEFAULT_FIXED_ALTITUDE)]
    altitude: f64,
    /// Plan each scheme from its own initialization instead of chaining them.
    #[arg(long)]
    independent: bool,
    /// Fill the wall_ms column.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    result: PathBuf,
    /// SVG output; the trace CSV is written next to it with a .csv extension.
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<SolverConfig<f64>> {
    let cfg = match path {
        Some(p) => read_json(p)?,
        None => SolverConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let file = generate(&a.shape.params(a.seed, 30))?;
            emit(a.out.as_deref(), &to_json(&file)?)
        }
        Command::Plan(a) => {
            let scn = read_scenario(&a.scenario)?;
            let cfg = load_config(a.config.as_deref())?;
            let result = plan_scheme(&scn, a.scheme, a.altitude, &cfg)?;
            eprintln!(
                "{}: distance {:.3} m over {} iterations, max violation {:.3e}",
                result.scheme,
                result.distance,
                result.iterations(),
                result.feasibility.max_violation
            );
            let file = ResultFile::from_plan(&result);
            match a.out {
                Some(p) => write_json(&p, &file),
                None => emit(None, &to_json(&file)?),
            }
        }
        Command::Eval(a) => {
            let scn = read_scenario(&a.scenario)?;
            let file: ResultFile = read_json(&a.result)?;
            let plan = file.to_plan(&scn)?;
            let report = &plan.feasibility;
            println!("scheme {}", plan.scheme);
            println!("distance_m {}", report.distance);
            println!("max_violation {:e}", report.max_violation);
            for row in scenario_io::margin_rows(report) {
                println!(
                    "target {} resolution {:.6} projection_m {:.6} focal_m {:.6}",
                    row.target, row.resolution, row.projection_m, row.focal_m
                );
            }
            if report.max_violation > a.tol {
                let worst = report
                    .targets
                    .iter()
                    .position(|t| t.approximate.max_violation() == report.max_violation)
                    .map_or(0, |i| i + 1);
                return Err(Error::InfeasibleTarget {
                    index: worst,
                    reason: format!("violation {:e} exceeds {:e}", report.max_violation, a.tol),
                });
            }
            Ok(())
        }
        Command::Bench(a) => {
            let cfg = load_config(a.config.as_deref())?;
            let params = BenchParams {
                seeds: a.seeds,
                schemes: a.schemes,
                scenario: a.shape.params(0, 10),
                altitude: a.altitude,
                chained: !a.independent,
                timing: a.timing,
            };
            let rows = run_bench(&params, &cfg)?;
            let mut buf = Vec::new();
            write_bench_csv(&rows, &mut buf)?;
            emit(a.out_csv.as_deref(), &String::from_utf8_lossy(&buf))
        }
        Command::Plot(a) => {
            let scn = read_scenario(&a.scenario)?;
            let file: ResultFile = read_json(&a.result)?;
            let plan = file.to_plan(&scn)?;
            write_text(&a.out, &render_svg(&scn, &plan)?)?;
            write_text(&a.out.with_extension("csv"), &trace_csv(&plan.trace)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
