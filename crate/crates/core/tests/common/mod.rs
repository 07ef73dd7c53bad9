#![allow(dead_code)]

use oblique_core::convex_bounds::{
    altitude_log_bound, altitude_log_term, altitude_quartic_bound, altitude_quartic_term,
    cross_term, cross_term_bound_in_altitude, cross_term_bound_in_offset, offset_quartic_bound,
    offset_quartic_term, slant_log_bound_in_altitude, slant_log_bound_in_offset, slant_log_term,
    SubproblemMode, SurrogateConstraint, SurrogatePoint, WaypointConstraintSet,
};
use oblique_core::op_model::{constraint_margins, CameraIntrinsics, GroundTarget};
use oblique_core::{Vec2, Waypoint64};
use rand::Rng;

pub type Camera = CameraIntrinsics<f64>;
pub type Target = GroundTarget<f64>;

pub fn random_camera(rng: &mut impl Rng) -> Camera {
    CameraIntrinsics::new(
        rng.gen_range(0.01..0.1),
        rng.gen_range(0.005..0.05),
        rng.gen_range(0.005..0.05),
    )
    .unwrap()
}

pub fn random_target(rng: &mut impl Rng) -> Target {
    GroundTarget::new(
        Vec2::new(rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0)),
        rng.gen_range(2.0..40.0),
        rng.gen_range(0.01..0.4),
    )
    .unwrap()
}

pub fn unit(rng: &mut impl Rng) -> Vec2<f64> {
    let t = rng.gen_range(0.0..std::f64::consts::TAU);
    Vec2::new(t.cos(), t.sin())
}

/// Pose at altitude `z` whose oblique angle is `frac` of the way to the focal limit.
pub fn pose(rng: &mut impl Rng, cam: &Camera, gt: &Target, z: f64, frac: f64) -> Waypoint64 {
    let d = unit(rng);
    let n = frac * cam.b1() * z;
    Waypoint64 {
        q: Vec2::new(gt.center.x + n * d.x, gt.center.y + n * d.y),
        z,
    }
}

/// A pose satisfying every neighbourhood constraint, by rejection sampling.
pub fn feasible_pose(rng: &mut impl Rng, cam: &Camera, gt: &Target) -> Option<Waypoint64> {
    let (lo, hi) = gt.nadir_altitude_band(cam);
    for _ in 0..1000 {
        let z = rng.gen_range(0.8 * lo..1.1 * hi.max(lo));
        let frac = rng.gen_range(0.0..0.6);
        let wp = pose(rng, cam, gt, z, frac);
        if constraint_margins(cam, &wp, gt).is_ok_and(|m| m.min() >= 0.0) {
            return Some(wp);
        }
    }
    None
}

/// A camera/target pair with a non-empty neighbourhood.
pub fn random_feasible_setup(rng: &mut impl Rng) -> (Camera, Target, Waypoint64) {
    loop {
        let cam = random_camera(rng);
        let gt = random_target(rng);
        if let Some(wp) = feasible_pose(rng, &cam, &gt) {
            return (cam, gt, wp);
        }
    }
}

/// One tangent lower bound checked at a random point and at its expansion point:
/// `(name, bound, term, bound at reference, term at reference)`.
pub type BoundSample = (&'static str, f64, f64, f64, f64);

/// Evaluates all seven tangent bounds for random altitudes and offsets.
pub fn tangent_bound_samples(rng: &mut impl Rng) -> Vec<BoundSample> {
    let z = rng.gen_range(1.0..300.0);
    let zr = rng.gen_range(1.0..300.0);
    let n = rng.gen_range(0.0..300.0);
    let l = unit(rng) * rng.gen_range(0.0..300.0);
    let lr = unit(rng) * rng.gen_range(0.0..300.0);
    let zl = rng.gen_range(1.0..300.0);
    vec![
        (
            "slant log in altitude",
            slant_log_bound_in_altitude(z, zr, n),
            slant_log_term(z, n * n),
            slant_log_bound_in_altitude(zr, zr, n),
            slant_log_term(zr, n * n),
        ),
        (
            "altitude log",
            altitude_log_bound(z, zr),
            altitude_log_term(z),
            altitude_log_bound(zr, zr),
            altitude_log_term(zr),
        ),
        (
            "altitude quartic",
            altitude_quartic_bound(z, zr),
            altitude_quartic_term(z),
            altitude_quartic_bound(zr, zr),
            altitude_quartic_term(zr),
        ),
        (
            "cross term in altitude",
            cross_term_bound_in_altitude(z, zr, n),
            cross_term(z, n * n),
            cross_term_bound_in_altitude(zr, zr, n),
            cross_term(zr, n * n),
        ),
        (
            "slant log in offset",
            slant_log_bound_in_offset(l, lr, zl),
            slant_log_term(zl, l.norm_sq()),
            slant_log_bound_in_offset(lr, lr, zl),
            slant_log_term(zl, lr.norm_sq()),
        ),
        (
            "cross term in offset",
            cross_term_bound_in_offset(l, lr, zl),
            cross_term(zl, l.norm_sq()),
            cross_term_bound_in_offset(lr, lr, zl),
            cross_term(zl, lr.norm_sq()),
        ),
        (
            "offset quartic",
            offset_quartic_bound(l, lr),
            offset_quartic_term(l.norm_sq()),
            offset_quartic_bound(lr, lr),
            offset_quartic_term(lr.norm_sq()),
        ),
    ]
}

/// Lower-bound and tightness check with rounding slack relative to the term size.
pub fn bound_holds(s: &BoundSample) -> bool {
    let (_, bound, term, bound_ref, term_ref) = *s;
    let scale = 1.0 + bound.abs().max(term.abs());
    let scale_ref = 1.0 + term_ref.abs();
    bound <= term + 1e-12 * scale && (bound_ref - term_ref).abs() <= 1e-12 * scale_ref
}

/// A constraint set around a random pose inside the focal limit, and an evaluation
/// point in its domain.
pub fn random_constraint_point(rng: &mut impl Rng) -> (WaypointConstraintSet<f64>, Vec<f64>) {
    let cam = random_camera(rng);
    let gt = random_target(rng);
    let mode = if rng.gen_bool(0.5) {
        SubproblemMode::Altitude
    } else {
        SubproblemMode::Horizontal
    };
    let zr = rng.gen_range(20.0..200.0);
    let frac = rng.gen_range(0.0..0.8);
    let reference = pose(rng, &cam, &gt, zr, frac);
    let set = WaypointConstraintSet {
        target: gt,
        camera: cam,
        surrogate: SurrogatePoint::from_waypoint(&reference, &gt),
        mode,
    };
    let x = match mode {
        SubproblemMode::Altitude => vec![zr * rng.gen_range(0.8..1.25)],
        SubproblemMode::Horizontal => {
            // Keep away from ℓ = 0 where the near-side branch is not differentiable.
            let l = unit(rng) * (cam.b1() * zr * rng.gen_range(0.02..0.8));
            l.as_array().to_vec()
        }
    };
    (set, x)
}

/// Largest relative mismatch between analytic and central-difference gradients
/// over the four surrogate constraints, or `None` outside the domain.
pub fn gradient_error(set: &WaypointConstraintSet<f64>, x: &[f64]) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for kind in SurrogateConstraint::ALL {
        let e = set.evaluate(kind, x)?;
        let mut fd = [0.0; 2];
        for (i, d) in fd.iter_mut().enumerate().take(x.len()) {
            let h = 1e-6 * x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let (mut up, mut dn) = (x.to_vec(), x.to_vec());
            up[i] += h;
            dn[i] -= h;
            *d = (set.evaluate(kind, &up)?.value - set.evaluate(kind, &dn)?.value) / (2.0 * h);
        }
        let norm = e.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let diff = e
            .grad
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (g, f)| m.max((g - f).abs()));
        worst = worst.max(diff / norm.max(1e-300));
    }
    Some(worst)
}

pub fn margins_ok(cam: &Camera, gt: &Target, wp: &Waypoint64, tol: f64) -> bool {
    constraint_margins(cam, wp, gt).is_ok_and(|m| m.min() >= -tol)
}
