use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CameraSpec, PointSpec, ScenarioFile, TargetSpec, SCHEMA_VERSION};
use crate::error::{Error, Result};

/// Random scenario parameters. Defaults: 30 targets of radius 20 m uniformly
/// placed in a 300 m square, minimum resolutions uniform in [0.01, 0.4], start
/// and end at the origin on the ground.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerateParams {
    pub seed: u64,
    pub k: usize,
    pub area_m: f64,
    pub radius_m: f64,
    pub i_min_lo: f64,
    pub i_min_hi: f64,
}

impl Default for GenerateParams {
    fn default() -> Self {
        Self {
            seed: 0,
            k: 30,
            area_m: 300.0,
            radius_m: 20.0,
            i_min_lo: 0.01,
            i_min_hi: 0.4,
        }
    }
}

/// Draws a scenario; the same parameters always give the same file.
pub fn generate(p: &GenerateParams) -> Result<ScenarioFile> {
    if p.k == 0 {
        return Err(Error::InvalidProblem("k must be at least 1".into()));
    }
    if !(p.area_m.is_finite() && p.area_m >= 0.0) {
        return Err(Error::InvalidProblem(format!(
            "area must be finite and non-negative, got {}",
            p.area_m
        )));
    }
    if !(p.radius_m.is_finite() && p.radius_m > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "radius must be positive, got {}",
            p.radius_m
        )));
    }
    if !(p.i_min_lo > 0.0 && p.i_min_lo <= p.i_min_hi && p.i_min_hi < 1.0) {
        return Err(Error::InvalidProblem(format!(
            "resolution range [{}, {}] must satisfy 0 < lo ≤ hi < 1",
            p.i_min_lo, p.i_min_hi
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let targets = (0..p.k)
        .map(|_| {
            let x_m = rng.gen::<f64>() * p.area_m;
            let y_m = rng.gen::<f64>() * p.area_m;
            let i_min = p.i_min_lo + (p.i_min_hi - p.i_min_lo) * rng.gen::<f64>();
            TargetSpec {
                x_m,
                y_m,
                r_m: p.radius_m,
                i_min,
            }
        })
        .collect();
    let file = ScenarioFile {
        schema_version: SCHEMA_VERSION,
        camera: CameraSpec::default(),
        targets,
        start: PointSpec::default(),
        end: PointSpec::default(),
    };
    file.to_scenario()?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario_io::to_json;

    #[test]
    fn deterministic_for_a_seed() {
        let p = GenerateParams {
            seed: 7,
            k: 5,
            ..Default::default()
        };
        assert_eq!(
            to_json(&generate(&p).unwrap()).unwrap(),
            to_json(&generate(&p).unwrap()).unwrap()
        );
        let q = GenerateParams {
            seed: 8,
            ..p.clone()
        };
        assert_ne!(generate(&p).unwrap(), generate(&q).unwrap());
    }

    #[test]
    fn defaults_stay_in_range() {
        let f = generate(&GenerateParams::default()).unwrap();
        assert_eq!(f.targets.len(), 30);
        for t in &f.targets {
            assert!((0.0..=300.0).contains(&t.x_m) && (0.0..=300.0).contains(&t.y_m));
            assert!((0.01..=0.4).contains(&t.i_min));
            assert_eq!(t.r_m, 20.0);
        }
        assert_eq!(f.start, PointSpec::default());
        assert_eq!(f.end, PointSpec::default());
    }

    #[test]
    fn zero_area_puts_target_at_origin() {
        let f = generate(&GenerateParams {
            k: 1,
            area_m: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!((f.targets[0].x_m, f.targets[0].y_m), (0.0, 0.0));
    }

    #[test]
    fn rejects_nadir_infeasible_range() {
        let err = generate(&GenerateParams {
            i_min_lo: 0.6,
            i_min_hi: 0.7,
            ..Default::default()
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(generate(&GenerateParams {
            k: 0,
            ..Default::default()
        })
        .is_err());
    }
}
