//! Oblique photography geometry.
//!
//! A camera tilted by the oblique angle `θ` toward a disk-shaped ground target
//! projects an isosceles trapezoid onto the ground. This module computes that
//! footprint, the resulting coverage area and image resolution, the two inner
//! distances from the target center to the footprint border, and membership in
//! a target's neighbourhood (the set of poses that photograph it acceptably).
//!
//! The closed forms used by the optimizer take `d_u - f0 ≈ d_u`. The exact
//! trapezoid constructions are kept alongside for validation.

use crate::error::{Error, Result};
use crate::geom::{Point3, Vec2};
use crate::scalar::Scalar;

/// Additive slack applied to every neighbourhood inequality by default.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Pinhole camera intrinsics: focal length and image-plane size, all in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<T> {
    f0: T,
    w0: T,
    l0: T,
    b1: T,
    b2: T,
}

impl<T: Scalar> CameraIntrinsics<T> {
    pub fn new(f0: T, w0: T, l0: T) -> Result<Self> {
        let positive = |v: T| v.is_finite() && v > T::zero();
        if !(positive(f0) && positive(w0) && positive(l0)) {
            return Err(Error::InvalidCamera(format!(
                "focal length and sensor size must be positive and finite (f0={f0}, w0={w0}, l0={l0})"
            )));
        }
        let two = T::lit(2.0);
        Ok(Self {
            f0,
            w0,
            l0,
            b1: two * f0 / w0,
            b2: two * f0 / l0,
        })
    }

    pub fn f0(&self) -> T {
        self.f0
    }

    pub fn w0(&self) -> T {
        self.w0
    }

    pub fn l0(&self) -> T {
        self.l0
    }

    /// `2 f0 / w0`: inverse half field of view across the tilt direction.
    pub fn b1(&self) -> T {
        self.b1
    }

    /// `2 f0 / l0`: inverse half field of view along the tilt axis.
    pub fn b2(&self) -> T {
        self.b2
    }

    /// Largest oblique angle before the far footprint edge reaches the horizon.
    pub fn max_oblique_angle(&self) -> T {
        self.b1.atan()
    }
}

impl<T: Scalar> Default for CameraIntrinsics<T> {
    /// 35 mm lens on a 15.6 mm × 23.5 mm sensor.
    fn default() -> Self {
        Self::new(T::lit(0.035), T::lit(0.0156), T::lit(0.0235)).expect("default camera is valid")
    }
}

/// Disk-shaped ground target with a minimum image resolution requirement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTarget<T> {
    pub center: Vec2<T>,
    pub radius: T,
    pub min_resolution: T,
}

impl<T: Scalar> GroundTarget<T> {
    pub fn new(center: Vec2<T>, radius: T, min_resolution: T) -> Result<Self> {
        if !(center.x.is_finite() && center.y.is_finite()) {
            return Err(Error::InvalidTarget("center must be finite".into()));
        }
        if !(radius.is_finite() && radius > T::zero()) {
            return Err(Error::InvalidTarget(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if !(min_resolution > T::zero() && min_resolution < T::one()) {
            return Err(Error::InvalidTarget(format!(
                "minimum resolution must lie in (0, 1), got {min_resolution}"
            )));
        }
        Ok(Self {
            center,
            radius,
            min_resolution,
        })
    }

    /// Resolution numerator `b1 b2 π r² / 4`, so that nadir resolution is this over `z²`.
    pub fn resolution_coefficient(&self, cam: &CameraIntrinsics<T>) -> T {
        cam.b1() * cam.b2() * T::PI() * self.radius * self.radius / T::lit(4.0)
    }

    /// Altitude band `[lo, hi]` in which the nadir pose satisfies every constraint.
    ///
    /// `lo = r·max(b1, b2)` comes from full projection and `hi = sqrt(a / i_min)` from
    /// the resolution requirement. The band is empty when `lo > hi`.
    pub fn nadir_altitude_band(&self, cam: &CameraIntrinsics<T>) -> (T, T) {
        let lo = self.radius * cam.b1().max(cam.b2());
        let hi = (self.resolution_coefficient(cam) / self.min_resolution).sqrt();
        (lo, hi)
    }
}

/// Image-taking location: horizontal position and altitude.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Waypoint3D<T> {
    pub q: Vec2<T>,
    pub z: T,
}

impl<T: Scalar> Waypoint3D<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self {
            q: Vec2::new(x, y),
            z,
        }
    }

    pub fn point(&self) -> Point3<T> {
        Point3::new(self.q.x, self.q.y, self.z)
    }

    pub fn distance(&self, other: &Self) -> T {
        self.point().distance(other.point())
    }

    /// Horizontal offset from the target center, `q - w`.
    pub fn offset_from(&self, gt: &GroundTarget<T>) -> Vec2<T> {
        self.q - gt.center
    }
}

/// Ground footprint extents of the tilted camera, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootprintExtents<T> {
    /// Trapezoid height along the tilt direction.
    pub ef: T,
    /// Near (short) parallel side.
    pub ad: T,
    /// Far (long) parallel side.
    pub bc: T,
}

impl<T: Scalar> FootprintExtents<T> {
    pub fn area(&self) -> T {
        T::lit(0.5) * self.ef * (self.ad + self.bc)
    }
}

/// Inner distances from the target center to the footprint's short side (`d1`)
/// and slanted side (`d2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerDistances<T> {
    pub d1: T,
    pub d2: T,
}

/// Which neighbourhood inequality a pose fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeighbourhoodConstraint {
    /// Image resolution at least the target's requirement.
    Resolution,
    /// Target disk fully inside the footprint: `r ≤ min(d1, d2)`.
    FullProjection,
    /// Oblique angle below `arctan(b1)`: `b1 z - ‖q - w‖ ≥ 0`.
    FocalLimit,
}

/// Signed slack of each neighbourhood inequality; non-negative means satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintMargins<T> {
    pub resolution: T,
    pub projection: T,
    pub focal: T,
}

impl<T: Scalar> ConstraintMargins<T> {
    pub fn min(&self) -> T {
        self.resolution.min(self.projection).min(self.focal)
    }

    /// Largest violation, zero when every inequality holds.
    pub fn max_violation(&self) -> T {
        (-self.min()).max(T::zero())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub feasible: bool,
    pub failed: Vec<NeighbourhoodConstraint>,
}

struct Pose<T> {
    /// Horizontal distance to the target center.
    ell: T,
    z: T,
}

fn pose<T: Scalar>(wp: &Waypoint3D<T>, gt: &GroundTarget<T>) -> Pose<T> {
    Pose {
        ell: wp.offset_from(gt).norm(),
        z: wp.z,
    }
}

/// Rejects poses at or below the ground and poses at or past the focal limit.
fn checked_pose<T: Scalar>(
    cam: &CameraIntrinsics<T>,
    wp: &Waypoint3D<T>,
    gt: &GroundTarget<T>,
) -> Result<Pose<T>> {
    let p = pose(wp, gt);
    if !(p.z > T::zero()) {
        return Err(Error::Domain(format!(
            "altitude must be positive, got {}",
            p.z
        )));
    }
    if !(cam.b1() * p.z - p.ell > T::zero()) {
        return Err(Error::Domain(format!(
            "oblique angle at or beyond the focal limit (b1·z = {}, offset = {})",
            cam.b1() * p.z,
            p.ell
        )));
    }
    Ok(p)
}

fn check_angle<T: Scalar>(cam: &CameraIntrinsics<T>, theta: T) -> Result<()> {
    if !(theta >= T::zero() && theta < cam.max_oblique_angle()) {
        return Err(Error::Domain(format!(
            "oblique angle {} outside [0, {})",
            theta,
            cam.max_oblique_angle()
        )));
    }
    Ok(())
}

/// Distance from the camera to the target center.
pub fn slant_distance<T: Scalar>(wp: &Waypoint3D<T>, gt: &GroundTarget<T>) -> T {
    let p = pose(wp, gt);
    p.ell.hypot(p.z)
}

/// Tilt of the optical axis from the vertical, in radians.
pub fn oblique_angle<T: Scalar>(wp: &Waypoint3D<T>, gt: &GroundTarget<T>) -> Result<T> {
    let p = pose(wp, gt);
    if !(p.z > T::zero()) {
        return Err(Error::Domain(format!(
            "altitude must be positive, got {}",
            p.z
        )));
    }
    Ok((p.ell / p.z).atan())
}

/// Exact trapezoid extents from similar triangles, without the `f0 ≪ d_u` shortcut.
pub fn footprint_extents_exact<T: Scalar>(
    cam: &CameraIntrinsics<T>,
    d_u: T,
    theta: T,
) -> Result<FootprintExtents<T>> {
    check_angle(cam, theta)?;
    if !(d_u > cam.f0()) {
        return Err(Error::Domain(format!(
            "slant distance {} must exceed the focal length {}",
            d_u,
            cam.f0()
        )));
    }
    let (s, c) = theta.sin_cos();
    let half_w = cam.w0() / T::lit(2.0);
    let reach = (d_u - cam.f0()) * c;
    let near = cam.f0() * c + half_w * s;
    let far = cam.f0() * c - half_w * s;
    let ef = cam.f0() * cam.w0() * reach / (near * far);
    Ok(FootprintExtents {
        ef,
        ad: cam.l0() * reach / near,
        bc: cam.l0() * reach / far,
    })
}

/// Growth of the coverage area relative to the nadir footprint at the same altitude.
pub fn coverage_scale_factor<T: Scalar>(cam: &CameraIntrinsics<T>, theta: T) -> Result<T> {
    check_angle(cam, theta)?;
    let t = theta.tan() / cam.b1();
    let shrink = T::one() - t * t;
    Ok(T::one() / (shrink * shrink * theta.cos().powi(3)))
}

/// Ground area covered by the image, `4z²/(b1 b2) · φ(θ)`.
pub fn coverage_area<T: Scalar>(
    cam: &CameraIntrinsics<T>,
    wp: &Waypoint3D<T>,
    gt: &GroundTarget<T>,
) -> Result<T> {
    let p = checked_pose(cam, wp, gt)?;
    let theta = (p.ell / p.z).atan();
    let nadir = T::lit(4.0) * p.z * p.z / (cam.b1() * cam.b2());
    Ok(nadir * coverage_scale_factor(cam, theta)?)
}

/// Coverage area of the exact trapezoid, built from [`footprint_extents_exact`].
pub fn coverage_area_exact<T: Scalar>(
    cam: &CameraIntrinsics<T>,
    wp: &Waypoint3D<T>,
    gt: &GroundTarget<T>,
) -> Result<T> {
    let p = checked_pose(cam, wp, gt)?;
    let theta = (p.ell / p.z).atan();
    Ok(footprint_extents_exact(cam, p.ell.hypot(p.z), theta)?.area())
}

/// Ratio of the target's disk area to the coverage area.
pub fn resolution<T: Scalar>(
    cam: &CameraIntrinsics<T>,
    wp: &Waypoint3D<T>,
    gt: &GroundTarget<T>,
) -> Result<T> {
    let p = checked_pose(cam, wp, gt)?;
    let ell2 = p.ell * p.ell;
    let z2 = p.z * p.z;
    let squeeze = z2 - ell2 / (cam.b1() * cam.b1());
    let slant3 = (ell2 + z2).powf(T::lit(1.5));
    Ok(gt.resolution_coefficient(cam) * squeeze * squeeze / (slant3 * z2 * p.z))
}

/// Closed-form inner distances used by the optimizer.
pub fn inner_distances<T: Scalar>(
    cam: &CameraIntrinsics<T>,
    wp: &Waypoint3D<T>,
    gt: &GroundTarget<T>,
) -> Result<InnerDistances<T>> {
    let p = checked_pose(cam, wp, gt)?;
    Ok(inner_distances_raw(cam, p.z, p.ell))
}

fn inner_distances_raw<T: Scalar>(cam: &CameraIntrinsics<T>, z: T, ell: T) -> InnerDistances<T> {
    let ell2 = ell * ell;
    let z2 = z * z;
    let b2sq = cam.b2() * cam.b2();
    InnerDistances {
        d1: (z2 + ell2) / (cam.b1() * z + ell),
        d2: (z2 + ell2) / (b2sq * z2 + (T::one() + b2sq) * ell2).sqrt(),
    }
}

/// Inner distances of the exact trapezoid.
pub fn inner_distances_exact<T: Scalar>(
    cam: &CameraIntrinsics<T>,
    wp: &Waypoint3D<T>,
    gt: &GroundTarget<T>,
) -> Result<InnerDistances<T>> {
    let p = checked_pose(cam, wp, gt)?;
    let theta = (p.ell / p.z).atan();
    let fp = footprint_extents_exact(cam, p.ell.hypot(p.z), theta)?;
    let parallel_sum = fp.ad + fp.bc;
    let half_diff = (fp.bc - fp.ad) / T::lit(2.0);
    let leg = (half_diff * half_diff + fp.ef * fp.ef).sqrt();
    Ok(InnerDistances {
        d1: fp.ad * fp.ef / parallel_sum,
        d2: fp.ad * fp.bc * fp.ef / (parallel_sum * leg),
    })
}

/// Signed slacks of the three neighbourhood inequalities.
///
/// Only a non-positive altitude is rejected; poses past the focal limit still get
/// margins (the focal margin is then negative) so they can be reported.
pub fn constraint_margins<T: Scalar>(
    cam: &CameraIntrinsics<T>,
    wp: &Waypoint3D<T>,
    gt: &GroundTarget<T>,
) -> Result<ConstraintMargins<T>> {
    let p = pose(wp, gt);
    if !(p.z > T::zero()) {
        return Err(Error::Domain(format!(
            "altitude must be positive, got {}",
            p.z
        )));
    }
    let focal = cam.b1() * p.z - p.ell;
    let ell2 = p.ell * p.ell;
    let z2 = p.z * p.z;
    let squeeze = z2 - ell2 / (cam.b1() * cam.b1());
    let res = gt.resolution_coefficient(cam) * squeeze * squeeze
        / ((ell2 + z2).powf(T::lit(1.5)) * z2 * p.z);
    let inner = inner_distances_raw(cam, p.z, p.ell);
    Ok(ConstraintMargins {
        resolution: res - gt.min_resolution,
        projection: inner.d1.min(inner.d2) - gt.radius,
        focal,
    })
}

/// Whether `wp` lies in the target's neighbourhood, with per-inequality slack `tol`.
pub fn neighbourhood_contains<T: Scalar>(
    cam: &CameraIntrinsics<T>,
    wp: &Waypoint3D<T>,
    gt: &GroundTarget<T>,
    tol: T,
) -> Membership {
    let margins = match constraint_margins(cam, wp, gt) {
        Ok(m) => m,
        Err(_) => {
            return Membership {
                feasible: false,
                failed: vec![NeighbourhoodConstraint::FocalLimit],
            }
        }
    };
    let mut failed = Vec::new();
    // Past the focal limit the resolution formula is meaningless.
    if margins.focal < -tol {
        failed.push(NeighbourhoodConstraint::FocalLimit);
    } else {
        if !(margins.resolution >= -tol) {
            failed.push(NeighbourhoodConstraint::Resolution);
        }
        if !(margins.projection >= -tol) {
            failed.push(NeighbourhoodConstraint::FullProjection);
        }
    }
    Membership {
        feasible: failed.is_empty(),
        failed,
    }
}
