//! Convex inner approximations of the neighbourhood constraints.
//!
//! The resolution requirement is handled in log form,
//! `-3/2 ln(‖ℓ‖² + z²) - 3 ln z ≥ ln(i_min/a) - 2 ln(z² - ‖ℓ‖²/b1²)`,
//! and the full-projection requirement squared,
//! `(z² + ‖ℓ‖²)² ≥ r² max((b1 z + ‖ℓ‖)², b2² z² + (1 + b2²)‖ℓ‖²)`.
//! Each left-hand term is convex in the free block, so replacing it by its tangent
//! at the incumbent gives a global under-estimator and therefore a convex subset of
//! the true feasible set that touches it at the incumbent.
//!
//! Every constraint is exposed in margin form `g(x) ≥ 0` with `g` concave in the
//! free block, together with its gradient and Hessian.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::op_model::{constraint_margins, CameraIntrinsics, GroundTarget, Waypoint3D};
use crate::scalar::Scalar;

/// `ln(i_min / a) - 2 ln(z² - ‖ℓ‖²/b1²)`, the right-hand side of the log-resolution
/// constraint. Rejects poses too close to the focal limit for the logarithm.
pub fn resolution_log_rhs<T: Scalar>(
    z: T,
    l_norm: T,
    gt: &GroundTarget<T>,
    cam: &CameraIntrinsics<T>,
) -> Result<T> {
    let squeeze = z * z - l_norm * l_norm / (cam.b1() * cam.b1());
    if !(squeeze > domain_floor(z)) {
        return Err(Error::Domain(format!(
            "z² - ‖ℓ‖²/b1² = {squeeze} is not positive (z = {z}, ‖ℓ‖ = {l_norm})"
        )));
    }
    Ok((gt.min_resolution / gt.resolution_coefficient(cam)).ln() - T::lit(2.0) * squeeze.ln())
}

/// `r² max((b1 z + ‖ℓ‖)², b2² z² + (1 + b2²)‖ℓ‖²)`, the right-hand side of the
/// squared full-projection constraint.
pub fn projection_rhs<T: Scalar>(
    z: T,
    l_norm: T,
    gt: &GroundTarget<T>,
    cam: &CameraIntrinsics<T>,
) -> T {
    let near = cam.b1() * z + l_norm;
    let b2sq = cam.b2() * cam.b2();
    let side = b2sq * z * z + (T::one() + b2sq) * l_norm * l_norm;
    gt.radius * gt.radius * (near * near).max(side)
}

/// Slack of the log-resolution constraint at the true (unapproximated) left side.
pub fn resolution_log_margin<T: Scalar>(
    z: T,
    l_norm: T,
    gt: &GroundTarget<T>,
    cam: &CameraIntrinsics<T>,
) -> Result<T> {
    let rhs = resolution_log_rhs(z, l_norm, gt, cam)?;
    Ok(slant_log_term(z, l_norm * l_norm) + altitude_log_term(z) - rhs)
}

/// Slack of the squared full-projection constraint at the true left side.
pub fn projection_quartic_margin<T: Scalar>(
    z: T,
    l_norm: T,
    gt: &GroundTarget<T>,
    cam: &CameraIntrinsics<T>,
) -> T {
    let s = l_norm * l_norm;
    let lhs = z * z + s;
    lhs * lhs - projection_rhs(z, l_norm, gt, cam)
}

fn domain_floor<T: Scalar>(z: T) -> T {
    T::lit(1e-8) * z * z
}

// Terms that the tangent bounds below under-estimate.

/// `-3/2 ln(‖ℓ‖² + z²)`.
pub fn slant_log_term<T: Scalar>(z: T, l_norm_sq: T) -> T {
    T::lit(-1.5) * (l_norm_sq + z * z).ln()
}

/// `-3 ln z`.
pub fn altitude_log_term<T: Scalar>(z: T) -> T {
    T::lit(-3.0) * z.ln()
}

/// `z⁴`.
pub fn altitude_quartic_term<T: Scalar>(z: T) -> T {
    z.powi(4)
}

/// `2 z² ‖ℓ‖²`.
pub fn cross_term<T: Scalar>(z: T, l_norm_sq: T) -> T {
    T::lit(2.0) * z * z * l_norm_sq
}

/// `‖ℓ‖⁴`.
pub fn offset_quartic_term<T: Scalar>(l_norm_sq: T) -> T {
    l_norm_sq * l_norm_sq
}

/// Tangent of `-3/2 ln(‖ℓ‖² + z²)` in the variable `z²`, expanded at `z_ref`.
pub fn slant_log_bound_in_altitude<T: Scalar>(z: T, z_ref: T, l_norm: T) -> T {
    let base = l_norm * l_norm + z_ref * z_ref;
    T::lit(-1.5) * base.ln() - T::lit(1.5) / base * (z * z - z_ref * z_ref)
}

/// Tangent of `-3 ln z` at `z_ref`.
pub fn altitude_log_bound<T: Scalar>(z: T, z_ref: T) -> T {
    T::lit(-3.0) * z_ref.ln() - T::lit(3.0) / z_ref * (z - z_ref)
}

/// Tangent of `z⁴` at `z_ref`.
pub fn altitude_quartic_bound<T: Scalar>(z: T, z_ref: T) -> T {
    z_ref.powi(4) + T::lit(4.0) * z_ref.powi(3) * (z - z_ref)
}

/// Tangent of `2 z² ‖ℓ‖²` in `z` at `z_ref`.
pub fn cross_term_bound_in_altitude<T: Scalar>(z: T, z_ref: T, l_norm: T) -> T {
    let s = l_norm * l_norm;
    T::lit(2.0) * z_ref * z_ref * s + T::lit(4.0) * z_ref * s * (z - z_ref)
}

/// Tangent of `-3/2 ln(‖ℓ‖² + z²)` in the variable `‖ℓ‖²`, expanded at `l_ref`.
pub fn slant_log_bound_in_offset<T: Scalar>(l: Vec2<T>, l_ref: Vec2<T>, z: T) -> T {
    let base = l_ref.norm_sq() + z * z;
    T::lit(-1.5) * base.ln() - T::lit(1.5) / base * (l.norm_sq() - l_ref.norm_sq())
}

/// Tangent of `2 z² ‖ℓ‖²` in the vector `ℓ` at `l_ref`.
pub fn cross_term_bound_in_offset<T: Scalar>(l: Vec2<T>, l_ref: Vec2<T>, z: T) -> T {
    let z2 = z * z;
    T::lit(2.0) * z2 * l_ref.norm_sq() + T::lit(4.0) * z2 * l_ref.dot(l - l_ref)
}

/// Tangent of `‖ℓ‖⁴` in the vector `ℓ` at `l_ref`.
pub fn offset_quartic_bound<T: Scalar>(l: Vec2<T>, l_ref: Vec2<T>) -> T {
    let s = l_ref.norm_sq();
    s * s + T::lit(4.0) * s * l_ref.dot(l - l_ref)
}

/// Incumbent pose around which the tangent bounds are built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogatePoint<T> {
    pub z_ref: T,
    /// Horizontal offset `q - w` at the incumbent.
    pub l_ref: Vec2<T>,
}

impl<T: Scalar> SurrogatePoint<T> {
    pub fn from_waypoint(wp: &Waypoint3D<T>, gt: &GroundTarget<T>) -> Self {
        Self {
            z_ref: wp.z,
            l_ref: wp.offset_from(gt),
        }
    }
}

/// Which block of a waypoint is free in a subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubproblemMode {
    /// Altitude free, horizontal offset frozen at `l_ref`.
    Altitude,
    /// Horizontal offset free, altitude frozen at `z_ref`.
    Horizontal,
}

impl SubproblemMode {
    pub fn dim(self) -> usize {
        match self {
            SubproblemMode::Altitude => 1,
            SubproblemMode::Horizontal => 2,
        }
    }
}

/// The inequalities of one waypoint's convex subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurrogateConstraint {
    /// Tangent-bounded log-resolution constraint.
    Resolution,
    /// Squared projection constraint, near-side branch of the max.
    ProjectionNear,
    /// Squared projection constraint, slanted-side branch of the max.
    ProjectionSide,
    /// Focal limit. Linear `b1 z - ‖ℓ‖` in altitude mode, `b1² z² - ‖ℓ‖²` in
    /// horizontal mode (equivalent since `z > 0` is frozen, and smooth in `ℓ`).
    FocalLimit,
}

impl SurrogateConstraint {
    pub const ALL: [SurrogateConstraint; 4] = [
        SurrogateConstraint::Resolution,
        SurrogateConstraint::ProjectionNear,
        SurrogateConstraint::ProjectionSide,
        SurrogateConstraint::FocalLimit,
    ];
}

/// Value, gradient and Hessian of a margin function over a block of dimension
/// one or two. Unused entries are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintEval<T> {
    pub value: T,
    pub grad: [T; 2],
    pub hess: [[T; 2]; 2],
}

impl<T: Scalar> ConstraintEval<T> {
    fn scalar(value: T, d: T, dd: T) -> Self {
        Self {
            value,
            grad: [d, T::zero()],
            hess: [[dd, T::zero()], [T::zero(), T::zero()]],
        }
    }
}

/// A collection of concave margin functions `g_i(x) ≥ 0` over one free block.
pub trait BlockConstraints<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `None` when `x` is outside the function's domain (treated as infeasible).
    fn eval(&self, index: usize, x: &[T]) -> Option<ConstraintEval<T>>;

    fn value(&self, index: usize, x: &[T]) -> Option<T> {
        self.eval(index, x).map(|e| e.value)
    }

    /// Smallest margin over all constraints; `-∞` outside any domain.
    fn min_margin(&self, x: &[T]) -> T {
        (0..self.len())
            .map(|i| self.value(i, x).unwrap_or_else(T::neg_infinity))
            .fold(T::infinity(), T::min)
    }
}

/// Convex constraint set for one waypoint, built at a surrogate point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointConstraintSet<T> {
    pub target: GroundTarget<T>,
    pub camera: CameraIntrinsics<T>,
    pub surrogate: SurrogatePoint<T>,
    pub mode: SubproblemMode,
}

/// Builds the convex constraint set for `gt` around `surrogate`.
///
/// The surrogate must be a valid pose (positive altitude, strictly inside the
/// focal limit) and satisfy the original neighbourhood constraints within `tol`.
pub fn build_constraints<T: Scalar>(
    mode: SubproblemMode,
    gt: &GroundTarget<T>,
    cam: &CameraIntrinsics<T>,
    surrogate: SurrogatePoint<T>,
    tol: T,
) -> Result<WaypointConstraintSet<T>> {
    let z = surrogate.z_ref;
    let n = surrogate.l_ref.norm();
    if !(z > T::zero()) || !(cam.b1() * z - n > T::zero()) {
        return Err(Error::InfeasibleSurrogate(format!(
            "pose (‖ℓ‖ = {n}, z = {z}) is outside the focal limit"
        )));
    }
    let wp = Waypoint3D {
        q: gt.center + surrogate.l_ref,
        z,
    };
    let margins = constraint_margins(cam, &wp, gt)?;
    if margins.min() < -tol {
        return Err(Error::InfeasibleSurrogate(format!(
            "pose (‖ℓ‖ = {n}, z = {z}) violates the neighbourhood: {margins:?}"
        )));
    }
    Ok(WaypointConstraintSet {
        target: *gt,
        camera: *cam,
        surrogate,
        mode,
    })
}

impl<T: Scalar> WaypointConstraintSet<T> {
    /// The frozen horizontal offset (altitude mode) as a vector.
    pub fn frozen_offset(&self) -> Vec2<T> {
        self.surrogate.l_ref
    }

    /// The frozen altitude (horizontal mode).
    pub fn frozen_altitude(&self) -> T {
        self.surrogate.z_ref
    }

    /// Block value at the expansion point.
    pub fn anchor(&self) -> Vec<T> {
        match self.mode {
            SubproblemMode::Altitude => vec![self.surrogate.z_ref],
            SubproblemMode::Horizontal => self.surrogate.l_ref.as_array().to_vec(),
        }
    }

    /// Full pose `(ℓ, z)` for a block value.
    pub fn pose(&self, x: &[T]) -> (Vec2<T>, T) {
        match self.mode {
            SubproblemMode::Altitude => (self.surrogate.l_ref, x[0]),
            SubproblemMode::Horizontal => (Vec2::from_slice(x), self.surrogate.z_ref),
        }
    }

    pub fn evaluate(&self, kind: SurrogateConstraint, x: &[T]) -> Option<ConstraintEval<T>> {
        match self.mode {
            SubproblemMode::Altitude => self.eval_altitude(kind, x[0]),
            SubproblemMode::Horizontal => self.eval_horizontal(kind, Vec2::from_slice(x)),
        }
    }

    fn eval_altitude(&self, kind: SurrogateConstraint, z: T) -> Option<ConstraintEval<T>> {
        let cam = &self.camera;
        let gt = &self.target;
        let zr = self.surrogate.z_ref;
        let n = self.surrogate.l_ref.norm();
        let s = n * n;
        let r2 = gt.radius * gt.radius;
        let (two, three, four) = (T::lit(2.0), T::lit(3.0), T::lit(4.0));
        match kind {
            SurrogateConstraint::Resolution => {
                if !(z > T::zero()) {
                    return None;
                }
                let rhs = resolution_log_rhs(z, n, gt, cam).ok()?;
                let value = slant_log_bound_in_altitude(z, zr, n) + altitude_log_bound(z, zr) - rhs;
                let base = s + zr * zr;
                let h = z * z - s / (cam.b1() * cam.b1());
                let d = -three * z / base - three / zr + four * z / h;
                let dd = -three / base + four / h - T::lit(8.0) * z * z / (h * h);
                Some(ConstraintEval::scalar(value, d, dd))
            }
            SurrogateConstraint::ProjectionNear | SurrogateConstraint::ProjectionSide => {
                let lhs =
                    altitude_quartic_bound(z, zr) + cross_term_bound_in_altitude(z, zr, n) + s * s;
                let dlhs = four * zr * zr * zr + four * zr * s;
                let (rhs, drhs, ddrhs) = if kind == SurrogateConstraint::ProjectionNear {
                    let near = cam.b1() * z + n;
                    (
                        r2 * near * near,
                        two * r2 * cam.b1() * near,
                        two * r2 * cam.b1() * cam.b1(),
                    )
                } else {
                    let b2sq = cam.b2() * cam.b2();
                    (
                        r2 * (b2sq * z * z + (T::one() + b2sq) * s),
                        two * r2 * b2sq * z,
                        two * r2 * b2sq,
                    )
                };
                Some(ConstraintEval::scalar(lhs - rhs, dlhs - drhs, -ddrhs))
            }
            SurrogateConstraint::FocalLimit => Some(ConstraintEval::scalar(
                cam.b1() * z - n,
                cam.b1(),
                T::zero(),
            )),
        }
    }

    fn eval_horizontal(&self, kind: SurrogateConstraint, l: Vec2<T>) -> Option<ConstraintEval<T>> {
        let cam = &self.camera;
        let gt = &self.target;
        let z = self.surrogate.z_ref;
        let lr = self.surrogate.l_ref;
        let sr = lr.norm_sq();
        let s = l.norm_sq();
        let n = s.sqrt();
        let r2 = gt.radius * gt.radius;
        let b1sq = cam.b1() * cam.b1();
        let (two, three, four) = (T::lit(2.0), T::lit(3.0), T::lit(4.0));
        let zero = T::zero();
        match kind {
            SurrogateConstraint::Resolution => {
                let rhs = resolution_log_rhs(z, n, gt, cam).ok()?;
                let value = slant_log_bound_in_offset(l, lr, z) + altitude_log_term(z) - rhs;
                let base = sr + z * z;
                let h = z * z - s / b1sq;
                // ∇ = -3ℓ/base - 4ℓ/(b1² h)
                let c = -three / base - four / (b1sq * h);
                let outer = T::lit(8.0) / (b1sq * b1sq * h * h);
                Some(ConstraintEval {
                    value,
                    grad: [c * l.x, c * l.y],
                    hess: [
                        [c - outer * l.x * l.x, -outer * l.x * l.y],
                        [-outer * l.x * l.y, c - outer * l.y * l.y],
                    ],
                })
            }
            SurrogateConstraint::ProjectionNear => {
                let lhs =
                    z.powi(4) + cross_term_bound_in_offset(l, lr, z) + offset_quartic_bound(l, lr);
                let dl = (four * z * z + four * sr) * T::one();
                let near = cam.b1() * z + n;
                let value = lhs - r2 * near * near;
                // r²(b1 z + n)² = r²(b1² z² + 2 b1 z n + s)
                let (ux, uy) = if n > zero {
                    (l.x / n, l.y / n)
                } else {
                    (zero, zero)
                };
                let k = two * r2 * cam.b1() * z;
                let grad = [
                    dl * lr.x - k * ux - two * r2 * l.x,
                    dl * lr.y - k * uy - two * r2 * l.y,
                ];
                // Curvature of ‖ℓ‖ is (I - uuᵀ)/‖ℓ‖; its singularity at ℓ = 0 is
                // capped so Newton steps stay finite.
                let n_eff = n.max(T::lit(1e-3) * z);
                let c = k / n_eff;
                Some(ConstraintEval {
                    value,
                    grad,
                    hess: [
                        [-c * (T::one() - ux * ux) - two * r2, c * ux * uy],
                        [c * ux * uy, -c * (T::one() - uy * uy) - two * r2],
                    ],
                })
            }
            SurrogateConstraint::ProjectionSide => {
                let lhs =
                    z.powi(4) + cross_term_bound_in_offset(l, lr, z) + offset_quartic_bound(l, lr);
                let dl = four * z * z + four * sr;
                let b2sq = cam.b2() * cam.b2();
                let value = lhs - r2 * (b2sq * z * z + (T::one() + b2sq) * s);
                let k = two * r2 * (T::one() + b2sq);
                Some(ConstraintEval {
                    value,
                    grad: [dl * lr.x - k * l.x, dl * lr.y - k * l.y],
                    hess: [[-k, zero], [zero, -k]],
                })
            }
            SurrogateConstraint::FocalLimit => Some(ConstraintEval {
                value: b1sq * z * z - s,
                grad: [-two * l.x, -two * l.y],
                hess: [[-two, zero], [zero, -two]],
            }),
        }
    }
}

impl<T: Scalar> BlockConstraints<T> for WaypointConstraintSet<T> {
    fn dim(&self) -> usize {
        self.mode.dim()
    }

    fn len(&self) -> usize {
        SurrogateConstraint::ALL.len()
    }

    fn eval(&self, index: usize, x: &[T]) -> Option<ConstraintEval<T>> {
        self.evaluate(SurrogateConstraint::ALL[index], x)
    }
}
