//! Shortest chain through per-waypoint convex regions.
//!
//! The chain visits a fixed start point, one point per block, and a fixed end
//! point. Each block frees either the altitude or the horizontal position of its
//! point and carries concave margin constraints `g_i(x) ≥ 0`. The problem is solved
//! by a feasible-start log-barrier method: the sum of leg lengths is smoothed as
//! `Σ sqrt(‖d‖² + ε²)`, centering uses damped Newton steps with backtracking that
//! keeps every iterate strictly feasible, and the barrier weight and smoothing
//! radius are tightened together between stages.

use crate::config::SolverConfig;
use crate::convex_bounds::BlockConstraints;
use crate::error::{Error, Result};
use crate::geom::{Point3, Vec2};
use crate::op_model::Waypoint3D;
use crate::scalar::Scalar;

/// Total length of the polyline start → waypoints → end.
pub fn chain_length<T: Scalar>(
    start: &Waypoint3D<T>,
    end: &Waypoint3D<T>,
    waypoints: &[Waypoint3D<T>],
) -> T {
    ordered_chain_length(start, end, waypoints, 0..waypoints.len())
}

/// Chain length visiting `waypoints[order[0]], waypoints[order[1]], ...`.
pub fn ordered_chain_length<T: Scalar>(
    start: &Waypoint3D<T>,
    end: &Waypoint3D<T>,
    waypoints: &[Waypoint3D<T>],
    order: impl IntoIterator<Item = usize>,
) -> T {
    let mut total = T::zero();
    let mut prev = start.point();
    for i in order {
        let p = waypoints[i].point();
        total += prev.distance(p);
        prev = p;
    }
    total + prev.distance(end.point())
}

/// How a block's free variables map to its chain point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockLayout<T> {
    /// Free altitude above the fixed horizontal position `q`.
    Altitude { q: Vec2<T> },
    /// Free horizontal offset from `origin` at the fixed altitude `z`.
    Horizontal { origin: Vec2<T>, z: T },
}

impl<T: Scalar> BlockLayout<T> {
    pub fn dim(&self) -> usize {
        match self {
            BlockLayout::Altitude { .. } => 1,
            BlockLayout::Horizontal { .. } => 2,
        }
    }

    pub fn point(&self, x: &[T]) -> Point3<T> {
        match *self {
            BlockLayout::Altitude { q } => Point3::new(q.x, q.y, x[0]),
            BlockLayout::Horizontal { origin, z } => {
                Point3::new(origin.x + x[0], origin.y + x[1], z)
            }
        }
    }

    /// Coordinates of the 3D point moved by each free variable.
    fn axes(&self) -> &'static [usize] {
        match self {
            BlockLayout::Altitude { .. } => &[2],
            BlockLayout::Horizontal { .. } => &[0, 1],
        }
    }
}

pub struct ChainBlock<T: Scalar> {
    pub layout: BlockLayout<T>,
    pub constraints: Option<Box<dyn BlockConstraints<T>>>,
    /// Feasible starting value of the free variables.
    pub start: Vec<T>,
}

impl<T: Scalar> ChainBlock<T> {
    pub fn new(
        layout: BlockLayout<T>,
        constraints: Option<Box<dyn BlockConstraints<T>>>,
        start: Vec<T>,
    ) -> Self {
        Self {
            layout,
            constraints,
            start,
        }
    }

    fn constraint_count(&self) -> usize {
        self.constraints.as_ref().map_or(0, |c| c.len())
    }

    fn min_margin(&self, x: &[T]) -> T {
        self.constraints
            .as_ref()
            .map_or(T::infinity(), |c| c.min_margin(x))
    }
}

pub struct ChainProblem<T: Scalar> {
    pub start: Point3<T>,
    pub end: Point3<T>,
    pub blocks: Vec<ChainBlock<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome<T> {
    /// Free-variable values per block.
    pub solution: Vec<Vec<T>>,
    /// Unsmoothed chain length at `solution`.
    pub objective: T,
    /// Newton steps taken.
    pub iterations: usize,
    pub status: SolveStatus,
    /// Largest constraint violation at `solution` (zero when strictly feasible).
    pub max_violation: T,
}

impl<T: Scalar> ChainProblem<T> {
    pub fn points(&self, values: &[Vec<T>]) -> Vec<Point3<T>> {
        let mut pts = Vec::with_capacity(self.blocks.len() + 2);
        pts.push(self.start);
        pts.extend(
            self.blocks
                .iter()
                .zip(values)
                .map(|(b, x)| b.layout.point(x)),
        );
        pts.push(self.end);
        pts
    }

    pub fn objective(&self, values: &[Vec<T>]) -> T {
        let pts = self.points(values);
        pts.windows(2)
            .fold(T::zero(), |acc, w| acc + w[0].distance(w[1]))
    }

    pub fn max_violation(&self, values: &[Vec<T>]) -> T {
        self.blocks
            .iter()
            .zip(values)
            .map(|(b, x)| (-b.min_margin(x)).max(T::zero()))
            .fold(T::zero(), T::max)
    }

    fn validate(&self, cfg: &SolverConfig<T>) -> Result<()> {
        for (k, b) in self.blocks.iter().enumerate() {
            if b.start.len() != b.layout.dim() {
                return Err(Error::InvalidProblem(format!(
                    "block {k}: start has {} values, layout needs {}",
                    b.start.len(),
                    b.layout.dim()
                )));
            }
            if let Some(c) = &b.constraints {
                if c.dim() != b.layout.dim() {
                    return Err(Error::InvalidProblem(format!(
                        "block {k}: constraint dimension {} does not match layout {}",
                        c.dim(),
                        b.layout.dim()
                    )));
                }
            }
            let m = b.min_margin(&b.start);
            if !(m >= -cfg.feas_tol) {
                return Err(Error::InvalidProblem(format!(
                    "block {k}: start point violates its constraints (margin {m})"
                )));
            }
        }
        Ok(())
    }
}

/// Minimizes the chain length subject to every block's constraints.
///
/// Blocks whose start point sits on (or numerically outside) a constraint
/// boundary cannot host a barrier and stay fixed. The returned objective is never
/// worse than the start objective.
pub fn solve_chain<T: Scalar>(
    problem: &ChainProblem<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolveOutcome<T>> {
    problem.validate(cfg)?;
    let start_values: Vec<Vec<T>> = problem.blocks.iter().map(|b| b.start.clone()).collect();
    let start_obj = problem.objective(&start_values);

    let free: Vec<bool> = problem
        .blocks
        .iter()
        .map(|b| b.min_margin(&b.start) > T::zero())
        .collect();
    let barrier = Barrier::new(problem, &free);
    if barrier.n == 0 {
        return Ok(SolveOutcome {
            solution: start_values.clone(),
            objective: start_obj,
            iterations: 0,
            status: SolveStatus::Converged,
            max_violation: problem.max_violation(&start_values),
        });
    }

    let mut x = barrier.pack(&start_values);
    let m = T::from_usize_lossy(barrier.constraint_count);
    let legs = T::from_usize_lossy(problem.blocks.len() + 1);
    let mut t = cfg.barrier_t0;
    let mut eps = cfg.smoothing_start;
    let mut iterations = 0usize;
    let mut status = SolveStatus::Converged;
    let mut stage_objs: Vec<T> = Vec::new();

    'stages: loop {
        for _ in 0..cfg.newton_per_stage {
            if iterations >= cfg.max_newton_iters {
                status = SolveStatus::IterationLimit;
                break 'stages;
            }
            match barrier.newton_step(&mut x, t, eps) {
                Step::Moved => iterations += 1,
                Step::Centered | Step::Stalled => break,
                Step::Failed => {
                    status = SolveStatus::NumericalFailure;
                    break 'stages;
                }
            }
        }
        let obj = problem.objective(&barrier.unpack(&x, &start_values));
        // Suboptimality of the stage point: m/t from the barrier plus the
        // smoothing bias of at most ε per leg.
        let bound = m / t + legs * eps;
        let scale = obj.max(T::one());
        if bound <= cfg.obj_tol * scale {
            break;
        }
        stage_objs.push(obj);
        if stage_objs.len() > cfg.stall_iters && eps <= cfg.smoothing_min {
            let recent = &stage_objs[stage_objs.len() - 1 - cfg.stall_iters..];
            let spread = recent.iter().copied().fold(T::neg_infinity(), T::max)
                - recent.iter().copied().fold(T::infinity(), T::min);
            if spread <= T::lit(1e-3) * cfg.obj_tol * scale {
                break;
            }
        }
        t *= cfg.barrier_growth;
        eps = (eps / cfg.barrier_growth).max(cfg.smoothing_min);
    }

    let mut solution = barrier.unpack(&x, &start_values);
    let mut objective = problem.objective(&solution);
    if status == SolveStatus::NumericalFailure || !(objective <= start_obj) {
        solution = start_values;
        objective = start_obj;
    }
    let max_violation = problem.max_violation(&solution);
    Ok(SolveOutcome {
        solution,
        objective,
        iterations,
        status,
        max_violation,
    })
}

enum Step {
    Moved,
    Centered,
    Stalled,
    Failed,
}

struct Barrier<'a, T: Scalar> {
    problem: &'a ChainProblem<T>,
    /// Offset of each block in the packed variable vector, `None` when frozen.
    offsets: Vec<Option<usize>>,
    n: usize,
    constraint_count: usize,
    frozen_points: Vec<Point3<T>>,
}

impl<'a, T: Scalar> Barrier<'a, T> {
    fn new(problem: &'a ChainProblem<T>, free: &[bool]) -> Self {
        let mut offsets = Vec::with_capacity(free.len());
        let mut n = 0;
        let mut constraint_count = 0;
        for (b, &f) in problem.blocks.iter().zip(free) {
            if f {
                offsets.push(Some(n));
                n += b.layout.dim();
                constraint_count += b.constraint_count();
            } else {
                offsets.push(None);
            }
        }
        let frozen_points = problem
            .blocks
            .iter()
            .map(|b| b.layout.point(&b.start))
            .collect();
        Self {
            problem,
            offsets,
            n,
            constraint_count,
            frozen_points,
        }
    }

    fn pack(&self, values: &[Vec<T>]) -> Vec<T> {
        let mut x = vec![T::zero(); self.n];
        for (off, v) in self.offsets.iter().zip(values) {
            if let Some(o) = off {
                x[*o..*o + v.len()].copy_from_slice(v);
            }
        }
        x
    }

    fn unpack(&self, x: &[T], start: &[Vec<T>]) -> Vec<Vec<T>> {
        self.offsets
            .iter()
            .zip(start)
            .zip(&self.problem.blocks)
            .map(|((off, s), b)| match off {
                Some(o) => x[*o..*o + b.layout.dim()].to_vec(),
                None => s.clone(),
            })
            .collect()
    }

    fn block_x<'x>(&self, k: usize, x: &'x [T]) -> Option<&'x [T]> {
        self.offsets[k].map(|o| &x[o..o + self.problem.blocks[k].layout.dim()])
    }

    fn points(&self, x: &[T]) -> Vec<Point3<T>> {
        let mut pts = Vec::with_capacity(self.offsets.len() + 2);
        pts.push(self.problem.start);
        for (k, b) in self.problem.blocks.iter().enumerate() {
            pts.push(match self.block_x(k, x) {
                Some(bx) => b.layout.point(bx),
                None => self.frozen_points[k],
            });
        }
        pts.push(self.problem.end);
        pts
    }

    fn strictly_feasible(&self, x: &[T]) -> bool {
        self.problem.blocks.iter().enumerate().all(|(k, b)| {
            match (self.block_x(k, x), &b.constraints) {
                (Some(bx), Some(c)) => {
                    (0..c.len()).all(|i| matches!(c.value(i, bx), Some(v) if v > T::zero()))
                }
                _ => true,
            }
        })
    }

    /// Barrier function `t·F_ε(x) - Σ ln g_i(x)`; `None` outside the interior.
    fn value(&self, x: &[T], t: T, eps: T) -> Option<T> {
        let pts = self.points(x);
        let eps2 = eps * eps;
        let mut f = T::zero();
        for w in pts.windows(2) {
            let d = w[1].delta(w[0]);
            f += (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + eps2).sqrt();
        }
        let mut phi = t * f;
        for (k, b) in self.problem.blocks.iter().enumerate() {
            if let (Some(bx), Some(c)) = (self.block_x(k, x), &b.constraints) {
                for i in 0..c.len() {
                    let g = c.value(i, bx)?;
                    if !(g > T::zero()) {
                        return None;
                    }
                    phi -= g.ln();
                }
            }
        }
        Some(phi)
    }

    /// Gradient and dense Hessian of the barrier function.
    fn derivatives(&self, x: &[T], t: T, eps: T) -> Option<(Vec<T>, Vec<T>)> {
        let n = self.n;
        let mut grad = vec![T::zero(); n];
        let mut hess = vec![T::zero(); n * n];
        let pts = self.points(x);
        let eps2 = eps * eps;
        let blocks = &self.problem.blocks;
        let nblocks = blocks.len();
        // Point j of the chain is block j-1 for 1 ≤ j ≤ nblocks.
        let var = |j: usize| -> Option<(usize, &'static [usize])> {
            if j == 0 || j > nblocks {
                return None;
            }
            self.offsets[j - 1].map(|o| (o, blocks[j - 1].layout.axes()))
        };
        for j in 0..pts.len() - 1 {
            let d = pts[j + 1].delta(pts[j]);
            let psi = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + eps2).sqrt();
            let g = [d[0] / psi, d[1] / psi, d[2] / psi];
            let mut h = [[T::zero(); 3]; 3];
            for (r, row) in h.iter_mut().enumerate() {
                for (c, cell) in row.iter_mut().enumerate() {
                    let id = if r == c { T::one() } else { T::zero() };
                    *cell = t * (id - g[r] * g[c]) / psi;
                }
            }
            let ends = [(var(j), -T::one()), (var(j + 1), T::one())];
            for &(a, sa) in &ends {
                let Some((oa, axa)) = a else { continue };
                for (ia, &ca) in axa.iter().enumerate() {
                    grad[oa + ia] += sa * t * g[ca];
                }
                for &(b, sb) in &ends {
                    let Some((ob, axb)) = b else { continue };
                    for (ia, &ca) in axa.iter().enumerate() {
                        for (ib, &cb) in axb.iter().enumerate() {
                            hess[(oa + ia) * n + ob + ib] += sa * sb * h[ca][cb];
                        }
                    }
                }
            }
        }
        for (k, b) in blocks.iter().enumerate() {
            let (Some(o), Some(c)) = (self.offsets[k], &b.constraints) else {
                continue;
            };
            let dim = b.layout.dim();
            let bx = &x[o..o + dim];
            for i in 0..c.len() {
                let e = c.eval(i, bx)?;
                if !(e.value > T::zero()) {
                    return None;
                }
                let inv = T::one() / e.value;
                for r in 0..dim {
                    grad[o + r] -= e.grad[r] * inv;
                    for cc in 0..dim {
                        hess[(o + r) * n + o + cc] +=
                            e.grad[r] * e.grad[cc] * inv * inv - e.hess[r][cc] * inv;
                    }
                }
            }
        }
        Some((grad, hess))
    }

    fn newton_step(&self, x: &mut [T], t: T, eps: T) -> Step {
        let n = self.n;
        let Some((grad, hess)) = self.derivatives(x, t, eps) else {
            return Step::Failed;
        };
        let Some(phi0) = self.value(x, t, eps) else {
            return Step::Failed;
        };
        let Some(dir) = regularized_newton_direction(&hess, &grad, n) else {
            return Step::Failed;
        };
        let slope: T = grad
            .iter()
            .zip(&dir)
            .fold(T::zero(), |acc, (g, d)| acc + *g * *d);
        if !(slope < T::zero()) {
            return Step::Centered;
        }
        if -slope / T::lit(2.0) <= T::lit(1e-10) {
            return Step::Centered;
        }
        let mut step = T::one();
        let mut trial = vec![T::zero(); n];
        let min_step = T::epsilon() * T::epsilon();
        loop {
            for i in 0..n {
                trial[i] = x[i] + step * dir[i];
            }
            if self.strictly_feasible(&trial) {
                if let Some(phi) = self.value(&trial, t, eps) {
                    if phi <= phi0 + T::lit(0.25) * step * slope {
                        break;
                    }
                }
            }
            step *= T::lit(0.5);
            if step < min_step {
                return Step::Stalled;
            }
        }
        x.copy_from_slice(&trial);
        Step::Moved
    }
}

/// Solves `(H + λI) d = -g`, raising `λ` until the Cholesky factorization succeeds.
fn regularized_newton_direction<T: Scalar>(hess: &[T], grad: &[T], n: usize) -> Option<Vec<T>> {
    let diag_scale = (0..n)
        .map(|i| hess[i * n + i].abs())
        .fold(T::zero(), T::max)
        .max(T::one());
    let bw = bandwidth(hess, n);
    let mut lambda = T::zero();
    for _ in 0..20 {
        let mut a = hess.to_vec();
        for i in 0..n {
            a[i * n + i] += lambda;
        }
        if cholesky_in_place(&mut a, n, bw) {
            let mut d: Vec<T> = grad.iter().map(|g| -*g).collect();
            cholesky_solve(&a, n, bw, &mut d);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        lambda = if lambda == T::zero() {
            diag_scale * T::lit(1e-12)
        } else {
            lambda * T::lit(100.0)
        };
    }
    None
}

/// Largest `|i - j|` over nonzero entries of a symmetric matrix.
fn bandwidth<T: Scalar>(a: &[T], n: usize) -> usize {
    let mut bw = 0;
    for i in 0..n {
        for j in 0..i {
            if a[i * n + j] != T::zero() {
                bw = bw.max(i - j);
                break;
            }
        }
    }
    bw
}

/// Banded Cholesky factor stored in the lower half of `a`.
fn cholesky_in_place<T: Scalar>(a: &mut [T], n: usize, bw: usize) -> bool {
    for j in 0..n {
        let lo = j.saturating_sub(bw);
        let mut diag = a[j * n + j];
        for k in lo..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        for i in j + 1..n.min(j + bw + 1) {
            let mut v = a[i * n + j];
            for k in i.saturating_sub(bw)..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / ljj;
        }
    }
    true
}

fn cholesky_solve<T: Scalar>(l: &[T], n: usize, bw: usize, b: &mut [T]) {
    for i in 0..n {
        let mut v = b[i];
        for k in i.saturating_sub(bw)..i {
            v -= l[i * n + k] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n.min(i + bw + 1) {
            v -= l[k * n + i] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}
