//! Serial revolute chains: data model, forward kinematics and the geometric
//! Jacobian.
//!
//! A chain is `base * Π (offset_i * Rot(axis_i, q_i)) * tool`. Every joint
//! rotates about its own local axis after the fixed offset from its parent.

mod config;
mod profile;

pub use config::{parse_chain_config, write_chain_config};
pub use profile::{open_arms_chain, ArmProfile, Profile, OPEN_ARMS_JOINTS};

use std::collections::HashSet;
use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, Isometry3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rigid transform, meters + unit quaternion.
pub type Transform = Isometry3<f64>;

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("joint `{0}`: limit_lo must be below limit_hi")]
    InvertedLimits(String),
    #[error("joint `{0}`: axis is not a unit vector")]
    AxisNotUnit(String),
    #[error("joint `{0}`: offset quaternion is not unit norm")]
    QuaternionNotUnit(String),
    #[error("duplicate joint name `{0}`")]
    DuplicateJoint(String),
    #[error("chain has no joints")]
    Empty,
    #[error("expected {expected} joint values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unknown arm profile `{0}`")]
    UnknownProfile(String),
    #[error("chain config line {line}: {msg}")]
    Config { line: usize, msg: String },
}

/// One revolute joint.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    /// Rotation axis in the joint's own frame.
    pub axis: Unit<Vector3<f64>>,
    pub limit_lo: f64,
    pub limit_hi: f64,
    /// Parent joint frame to this joint's frame at zero angle.
    pub offset: Transform,
}

impl JointSpec {
    pub fn new(
        name: impl Into<String>,
        axis: Vector3<f64>,
        limits: (f64, f64),
        offset: Transform,
    ) -> Result<Self, ChainError> {
        let name = name.into();
        if (axis.norm() - 1.0).abs() > UNIT_TOL {
            return Err(ChainError::AxisNotUnit(name));
        }
        if (offset.rotation.quaternion().norm() - 1.0).abs() > UNIT_TOL {
            return Err(ChainError::QuaternionNotUnit(name));
        }
        if !(limits.0 < limits.1) {
            return Err(ChainError::InvertedLimits(name));
        }
        Ok(Self {
            name,
            axis: Unit::new_unchecked(axis),
            limit_lo: limits.0,
            limit_hi: limits.1,
            offset,
        })
    }

    pub fn span(&self) -> f64 {
        self.limit_hi - self.limit_lo
    }

    fn motion(&self, angle: f64) -> Transform {
        self.offset * UnitQuaternion::from_axis_angle(&self.axis, angle)
    }
}

/// Ordered chain of revolute joints between a base and a tool frame.
///
/// Immutable once built; share it freely between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    base: Transform,
    joints: Vec<JointSpec>,
    tool: Transform,
}

impl KinematicChain {
    pub fn new(base: Transform, joints: Vec<JointSpec>, tool: Transform) -> Result<Self, ChainError> {
        if joints.is_empty() {
            return Err(ChainError::Empty);
        }
        let mut seen = HashSet::new();
        for j in &joints {
            if !seen.insert(j.name.as_str()) {
                return Err(ChainError::DuplicateJoint(j.name.clone()));
            }
        }
        Ok(Self { base, joints, tool })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn base(&self) -> &Transform {
        &self.base
    }

    pub fn tool(&self) -> &Transform {
        &self.tool
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Sum of the translation lengths from base to tool; bounds the reach.
    pub fn total_link_length(&self) -> f64 {
        self.joints
            .iter()
            .map(|j| j.offset.translation.vector.norm())
            .sum::<f64>()
            + self.tool.translation.vector.norm()
    }

    fn check_len(&self, q: &[f64]) -> Result<(), ChainError> {
        if q.len() != self.dof() {
            return Err(ChainError::LengthMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// World frame of every joint (after its rotation) followed by the tool frame.
    pub fn link_frames(&self, q: &[f64]) -> Result<Vec<Transform>, ChainError> {
        self.check_len(q)?;
        let mut frames = Vec::with_capacity(self.dof() + 1);
        let mut t = self.base;
        for (joint, &angle) in self.joints.iter().zip(q) {
            t *= joint.motion(angle);
            frames.push(t);
        }
        frames.push(t * self.tool);
        Ok(frames)
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Pose, ChainError> {
        self.check_len(q)?;
        Ok(Pose::from_transform(&self.end_transform(q)))
    }

    fn end_transform(&self, q: &[f64]) -> Transform {
        let t = self
            .joints
            .iter()
            .zip(q)
            .fold(self.base, |t, (joint, &angle)| t * joint.motion(angle));
        t * self.tool
    }

    /// Geometric Jacobian in the world frame. Rows 0..3 are linear velocity,
    /// rows 3..6 angular velocity.
    pub fn jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>, ChainError> {
        self.check_len(q)?;
        let n = self.dof();
        let mut axes = Vec::with_capacity(n);
        let mut t = self.base;
        for (joint, &angle) in self.joints.iter().zip(q) {
            let frame = t * joint.offset;
            axes.push((frame.rotation * joint.axis.into_inner(), frame.translation.vector));
            t = frame * UnitQuaternion::from_axis_angle(&joint.axis, angle);
        }
        let p_tool = (t * self.tool).translation.vector;
        let mut jac = DMatrix::zeros(6, n);
        for (i, (z, p)) in axes.iter().enumerate() {
            let lin = z.cross(&(p_tool - p));
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(z);
        }
        Ok(jac)
    }

    pub fn clamp_to_limits(&self, q: &[f64]) -> Result<JointVector, ChainError> {
        self.check_len(q)?;
        Ok(JointVector(
            self.joints
                .iter()
                .zip(q)
                .map(|(j, &v)| v.clamp(j.limit_lo, j.limit_hi))
                .collect(),
        ))
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof()
            && self
                .joints
                .iter()
                .zip(q)
                .all(|(j, &v)| v >= j.limit_lo && v <= j.limit_hi)
    }

    /// Midpoint of each joint range.
    pub fn center(&self) -> JointVector {
        JointVector(self.joints.iter().map(|j| 0.5 * (j.limit_lo + j.limit_hi)).collect())
    }
}

/// Joint angles in radians, one per joint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVector(pub Vec<f64>);

impl JointVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Largest absolute per-joint difference.
    pub fn max_abs_diff(&self, other: &JointVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for JointVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for JointVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for JointVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// End-effector pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn from_transform(t: &Transform) -> Self {
        Self {
            position: t.translation.vector,
            orientation: UnitQuaternion::new_normalize(t.rotation.into_inner()),
        }
    }

    pub fn to_transform(&self) -> Transform {
        Isometry3::from_parts(self.position.into(), self.orientation)
    }

    /// `[w, x, y, z]`
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
    }
}

/// Distance between two rotations as unit quaternions, sign-invariant.
pub fn quaternion_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let (a, b) = (a.coords, b.coords);
    (a - b).norm().min((a + b).norm())
}
