//! Damped-least-squares inverse kinematics with joint-limit clamping, random
//! restarts, best-fit fallback and two-stage (loose then tight) solving.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix6, UnitQuaternion, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::{ChainError, JointVector, KinematicChain, Pose};

/// Meters per radian when position and orientation errors are compared on
/// one scale: 1 rad of orientation error counts as 0.25 m.
pub const ORIENTATION_WEIGHT: f64 = 0.25;

const DAMPING_MIN: f64 = 1e-4;
const DAMPING_MAX: f64 = 1.0;
/// Largest per-joint change taken in one iteration, radians.
const MAX_STEP: f64 = 0.5;
/// An attempt is abandoned after this many accepted steps that each shave off
/// less than `STALL_RATIO` of the error.
const STALL_ITERS: usize = 6;
const STALL_RATIO: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IkError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("target pose is not finite")]
    NonFiniteTarget,
    #[error("invalid solver config: {0}")]
    InvalidConfig(&'static str),
    #[error("loose tolerances must be at least as large as tight tolerances")]
    ToleranceOrder,
    #[error("target sequence is empty")]
    EmptyPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkConfig {
    /// Initial damping factor of the DLS update.
    pub damping: f64,
    /// Iterations per attempt (initial seed and each restart).
    pub max_iters: usize,
    /// Wall-clock budget in seconds, checked between attempts.
    pub time_budget: f64,
    pub pos_tol: f64,
    pub ori_tol: f64,
    pub restarts: usize,
    pub rng_seed: u64,
}

impl IkConfig {
    /// 1 mm / 0.01 rad.
    pub fn tight() -> Self {
        Self {
            damping: 0.05,
            max_iters: 60,
            time_budget: 1.0,
            pos_tol: 1e-3,
            ori_tol: 1e-2,
            restarts: 60,
            rng_seed: 0,
        }
    }

    /// 5 mm / 0.05 rad.
    pub fn loose() -> Self {
        Self {
            pos_tol: 5e-3,
            ori_tol: 5e-2,
            ..Self::tight()
        }
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    pub fn validate(&self) -> Result<(), IkError> {
        if !(self.pos_tol > 0.0) || !(self.ori_tol > 0.0) {
            return Err(IkError::InvalidConfig("tolerances must be positive"));
        }
        if !(self.damping > 0.0) {
            return Err(IkError::InvalidConfig("damping must be positive"));
        }
        if self.max_iters == 0 {
            return Err(IkError::InvalidConfig("max_iters must be at least 1"));
        }
        if !(self.time_budget > 0.0) {
            return Err(IkError::InvalidConfig("time_budget must be positive"));
        }
        Ok(())
    }

    pub fn accepts(&self, pos_err: f64, ori_err: f64) -> bool {
        pos_err <= self.pos_tol && ori_err <= self.ori_tol
    }
}

impl Default for IkConfig {
    fn default() -> Self {
        Self::tight()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IkStatus {
    Exact,
    BestFit,
}

/// Which solver pass produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStage {
    Single,
    Loose,
    Tight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkResult {
    pub joints: JointVector,
    pub achieved: Pose,
    pub pos_err: f64,
    pub ori_err: f64,
    /// Judged against `pos_tol` / `ori_tol` below.
    pub status: IkStatus,
    pub stage: SolveStage,
    pub pos_tol: f64,
    pub ori_tol: f64,
    pub iterations: usize,
    /// Seconds.
    pub elapsed: f64,
}

impl IkResult {
    pub fn is_exact(&self) -> bool {
        self.status == IkStatus::Exact
    }

    pub fn weighted_error(&self) -> f64 {
        weighted_error(self.pos_err, self.ori_err)
    }

    fn rejudge(mut self, pos_tol: f64, ori_tol: f64) -> Self {
        self.pos_tol = pos_tol;
        self.ori_tol = ori_tol;
        self.status = if self.pos_err <= pos_tol && self.ori_err <= ori_tol {
            IkStatus::Exact
        } else {
            IkStatus::BestFit
        };
        self
    }
}

/// `[target.p - actual.p, log(target.R * actual.R^-1)]`, the rotation part
/// as a shortest-arc axis-angle vector.
pub fn pose_error(target: &Pose, actual: &Pose) -> Vector6<f64> {
    let dp = target.position - actual.position;
    let dr = rotation_vector(&(target.orientation * actual.orientation.inverse()));
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

fn rotation_vector(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = q.quaternion();
    let (w, v) = if q.w < 0.0 { (-q.w, -q.imag()) } else { (q.w, q.imag()) };
    let s = v.norm();
    if s < 1e-300 {
        return Vector3::zeros();
    }
    v * (2.0 * s.atan2(w) / s)
}

pub fn weighted_error(pos_err: f64, ori_err: f64) -> f64 {
    pos_err.hypot(ORIENTATION_WEIGHT * ori_err)
}

struct Eval {
    err: Vector6<f64>,
    pos: f64,
    ori: f64,
    weighted: f64,
}

fn evaluate(chain: &KinematicChain, target: &Pose, q: &[f64]) -> (Pose, Eval) {
    let actual = chain.forward_kinematics(q).expect("length checked by caller");
    let err = pose_error(target, &actual);
    let pos = err.fixed_rows::<3>(0).norm();
    let ori = err.fixed_rows::<3>(3).norm();
    (
        actual,
        Eval {
            err,
            pos,
            ori,
            weighted: weighted_error(pos, ori),
        },
    )
}

struct Best {
    q: Vec<f64>,
    pose: Pose,
    pos: f64,
    ori: f64,
    weighted: f64,
    exact: bool,
}

impl Best {
    /// Keeps the lowest weighted error, except that an iterate inside the
    /// tolerances always beats one outside them.
    fn offer(&mut self, q: &[f64], pose: &Pose, e: &Eval, exact: bool) {
        if (exact && !self.exact) || (exact == self.exact && e.weighted < self.weighted) {
            self.exact = exact;
            self.q.clear();
            self.q.extend_from_slice(q);
            self.pose = *pose;
            self.pos = e.pos;
            self.ori = e.ori;
            self.weighted = e.weighted;
        }
    }
}

enum Attempt {
    Converged,
    Exhausted,
}

/// `Jᵀ(JJᵀ + λ²I)⁻¹ e`, re-solved with the columns of joints that sit on a
/// limit and would be pushed past it removed.
fn limited_step(
    chain: &KinematicChain,
    q: &[f64],
    jac: &mut DMatrix<f64>,
    e: &Vector6<f64>,
    lambda: f64,
) -> Option<DVector<f64>> {
    let damping = Matrix6::identity() * (lambda * lambda);
    loop {
        let jjt: Matrix6<f64> = (&*jac * jac.transpose()).fixed_view::<6, 6>(0, 0).into_owned();
        let dq = jac.transpose() * (jjt + damping).cholesky()?.solve(e);
        let mut pinned = false;
        for (i, (joint, (&qi, &d))) in chain.joints().iter().zip(q.iter().zip(dq.iter())).enumerate() {
            let blocked = (qi <= joint.limit_lo && d < 0.0) || (qi >= joint.limit_hi && d > 0.0);
            if blocked && jac.column(i).iter().any(|&v| v != 0.0) {
                jac.column_mut(i).fill(0.0);
                pinned = true;
            }
        }
        if !pinned {
            return Some(dq);
        }
    }
}

/// Runs one DLS descent from `q`, updating `best` with every iterate.
fn descend(
    chain: &KinematicChain,
    target: &Pose,
    q: &mut Vec<f64>,
    cfg: &IkConfig,
    best: &mut Best,
    iterations: &mut usize,
) -> Attempt {
    let (pose, mut cur) = evaluate(chain, target, q);
    let exact = cfg.accepts(cur.pos, cur.ori);
    best.offer(q, &pose, &cur, exact);
    if exact {
        return Attempt::Converged;
    }
    let weights = Vector6::new(1.0, 1.0, 1.0, ORIENTATION_WEIGHT, ORIENTATION_WEIGHT, ORIENTATION_WEIGHT);
    let mut lambda = cfg.damping.clamp(DAMPING_MIN, DAMPING_MAX);
    let mut stalled = 0;
    let mut candidate = q.clone();

    for _ in 0..cfg.max_iters {
        *iterations += 1;
        let mut jac = chain.jacobian(q).expect("length checked by caller");
        for (r, w) in weights.iter().enumerate() {
            jac.row_mut(r).scale_mut(*w);
        }
        let e = cur.err.component_mul(&weights);
        let Some(mut dq) = limited_step(chain, q, &mut jac, &e, lambda) else {
            lambda = (lambda * 2.0).min(DAMPING_MAX);
            continue;
        };
        let largest = dq.amax();
        if largest > MAX_STEP {
            dq *= MAX_STEP / largest;
        }
        for ((c, qi), (d, joint)) in candidate.iter_mut().zip(q.iter()).zip(dq.iter().zip(chain.joints())) {
            *c = (qi + d).clamp(joint.limit_lo, joint.limit_hi);
        }
        let (pose, next) = evaluate(chain, target, &candidate);
        if next.weighted < cur.weighted {
            let exact = cfg.accepts(next.pos, next.ori);
            best.offer(&candidate, &pose, &next, exact);
            if exact {
                q.copy_from_slice(&candidate);
                return Attempt::Converged;
            }
            if next.weighted > cur.weighted * (1.0 - STALL_RATIO) {
                stalled += 1;
                if stalled >= STALL_ITERS {
                    return Attempt::Exhausted;
                }
            } else {
                stalled = 0;
            }
            q.copy_from_slice(&candidate);
            cur = next;
            lambda = (lambda * 0.5).max(DAMPING_MIN);
        } else {
            if lambda >= DAMPING_MAX {
                return Attempt::Exhausted;
            }
            lambda = (lambda * 2.0).min(DAMPING_MAX);
        }
    }
    Attempt::Exhausted
}

fn check_target(chain: &KinematicChain, target: &Pose, seed: &[f64]) -> Result<(), IkError> {
    if seed.len() != chain.dof() {
        return Err(ChainError::LengthMismatch {
            expected: chain.dof(),
            got: seed.len(),
        }
        .into());
    }
    if !target.is_finite() || !seed.iter().all(|v| v.is_finite()) {
        return Err(IkError::NonFiniteTarget);
    }
    Ok(())
}

/// Solves for joints reaching `target`, starting at `seed` (clamped into the
/// limits). Never fails for an unreachable target: when no attempt meets the
/// tolerances the lowest-error configuration visited comes back as
/// [`IkStatus::BestFit`].
pub fn solve(
    chain: &KinematicChain,
    target: &Pose,
    seed: &[f64],
    cfg: &IkConfig,
) -> Result<IkResult, IkError> {
    cfg.validate()?;
    check_target(chain, target, seed)?;
    let start = Instant::now();
    let budget = Duration::from_secs_f64(cfg.time_budget);

    let mut q = chain.clamp_to_limits(seed)?.0;
    let mut best = Best {
        q: q.clone(),
        pose: chain.forward_kinematics(&q)?,
        pos: f64::INFINITY,
        ori: f64::INFINITY,
        weighted: f64::INFINITY,
        exact: false,
    };
    let mut iterations = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    for attempt in 0..=cfg.restarts {
        if attempt > 0 {
            if start.elapsed() >= budget {
                break;
            }
            for (v, j) in q.iter_mut().zip(chain.joints()) {
                *v = rng.random_range(j.limit_lo..=j.limit_hi);
            }
        }
        if let Attempt::Converged = descend(chain, target, &mut q, cfg, &mut best, &mut iterations) {
            break;
        }
    }

    let status = if best.exact {
        IkStatus::Exact
    } else {
        IkStatus::BestFit
    };
    Ok(IkResult {
        joints: JointVector(best.q),
        achieved: best.pose,
        pos_err: best.pos,
        ori_err: best.ori,
        status,
        stage: SolveStage::Single,
        pos_tol: cfg.pos_tol,
        ori_tol: cfg.ori_tol,
        iterations,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// Loose solve, then a tight refinement seeded by the loose answer. When the
/// refinement misses, the loose answer is returned; the result's status is
/// always judged at the tight tolerances.
pub fn solve_two_stage(
    chain: &KinematicChain,
    target: &Pose,
    seed: &[f64],
    loose: &IkConfig,
    tight: &IkConfig,
) -> Result<IkResult, IkError> {
    if loose.pos_tol < tight.pos_tol || loose.ori_tol < tight.ori_tol {
        return Err(IkError::ToleranceOrder);
    }
    tight.validate()?;
    let start = Instant::now();
    let first = solve(chain, target, seed, loose)?;
    let mut result = if first.is_exact() {
        let second = solve(chain, target, &first.joints, tight)?;
        if second.is_exact() {
            IkResult {
                stage: SolveStage::Tight,
                iterations: first.iterations + second.iterations,
                ..second
            }
        } else {
            IkResult {
                stage: SolveStage::Loose,
                iterations: first.iterations + second.iterations,
                ..first
            }
        }
    } else {
        IkResult {
            stage: SolveStage::Loose,
            ..first
        }
    };
    result = result.rejudge(tight.pos_tol, tight.ori_tol);
    result.elapsed = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Follows a sequence of targets, seeding each solve with the previous
/// answer. Produces exactly one result per target.
pub fn track(
    chain: &KinematicChain,
    targets: &[Pose],
    seed: Option<&[f64]>,
    loose: &IkConfig,
    tight: &IkConfig,
) -> Result<Vec<IkResult>, IkError> {
    if targets.is_empty() {
        return Err(IkError::EmptyPath);
    }
    let mut seed = match seed {
        Some(s) => s.to_vec(),
        None => vec![0.0; chain.dof()],
    };
    let mut out = Vec::with_capacity(targets.len());
    for target in targets {
        let r = solve_two_stage(chain, target, &seed, loose, tight)?;
        seed.clone_from(&r.joints.0);
        out.push(r);
    }
    Ok(out)
}
