//! JSON message bodies. Positions are meters, joints radians, quaternions
//! `[w, x, y, z]`.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use openarms::arm::{KinematicChain, Pose, Transform};
use openarms::grasp::{CameraModel, GraspRectangle, GraspWorld};
use openarms::ik::{IkResult, IkStatus, SolveStage};
use serde::{Deserialize, Serialize};

use crate::ApiError;

/// Quaternions shorter than this cannot be normalized.
const MIN_QUATERNION_NORM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseMsg {
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
}

impl PoseMsg {
    pub fn from_pose(p: &Pose) -> Self {
        Self { position: p.position.into(), quaternion: p.quaternion_wxyz() }
    }

    pub fn from_transform(t: &Transform) -> Self {
        Self::from_pose(&Pose::from_transform(t))
    }

    /// Normalizes the quaternion; rejects non-finite values and a zero
    /// quaternion.
    pub fn to_pose(&self) -> Result<Pose, ApiError> {
        if !self.position.iter().chain(&self.quaternion).all(|v| v.is_finite()) {
            return Err(ApiError::request("pose values must be finite"));
        }
        let [w, x, y, z] = self.quaternion;
        let q = Quaternion::new(w, x, y, z);
        if q.norm() < MIN_QUATERNION_NORM {
            return Err(ApiError::request("quaternion has near-zero norm and cannot be normalized"));
        }
        Ok(Pose::new(Vector3::from(self.position), UnitQuaternion::from_quaternion(q)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointInfo {
    pub name: String,
    pub axis: [f64; 3],
    /// `[lo, hi]`
    pub limits: [f64; 2],
    pub offset: PoseMsg,
}

/// `GET /chain`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainInfo {
    pub dof: usize,
    pub base: PoseMsg,
    pub joints: Vec<JointInfo>,
    pub tool: PoseMsg,
}

impl ChainInfo {
    pub fn from_chain(chain: &KinematicChain) -> Self {
        Self {
            dof: chain.dof(),
            base: PoseMsg::from_transform(chain.base()),
            joints: chain
                .joints()
                .iter()
                .map(|j| JointInfo {
                    name: j.name.clone(),
                    axis: j.axis.into_inner().into(),
                    limits: [j.limit_lo, j.limit_hi],
                    offset: PoseMsg::from_transform(&j.offset),
                })
                .collect(),
            tool: PoseMsg::from_transform(chain.tool()),
        }
    }
}

/// `POST /fk`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkRequest {
    pub joints: Vec<f64>,
}

/// `POST /ik`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkRequest {
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
    /// Defaults to all zeros.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkResponse {
    pub joints: Vec<f64>,
    pub status: IkStatus,
    pub stage: SolveStage,
    /// Pose the returned joints actually reach.
    pub achieved: PoseMsg,
    pub pos_err: f64,
    pub ori_err: f64,
    pub iterations: usize,
    pub elapsed_s: f64,
}

impl From<&IkResult> for IkResponse {
    fn from(r: &IkResult) -> Self {
        Self {
            joints: r.joints.0.clone(),
            status: r.status,
            stage: r.stage,
            achieved: PoseMsg::from_pose(&r.achieved),
            pos_err: r.pos_err,
            ori_err: r.ori_err,
            iterations: r.iterations,
            elapsed_s: r.elapsed,
        }
    }
}

/// One target on the `/track` stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRequest {
    pub seq: u64,
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReply {
    pub seq: u64,
    #[serde(flatten)]
    pub result: IkResponse,
}

/// Sent instead of a reply when a stream message cannot be processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFrame {
    pub seq: Option<u64>,
    pub error: String,
}

/// First frame on a new `/track` stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHello {
    pub session: String,
    pub dof: usize,
    pub idle_timeout_s: f64,
}

/// Inline depth image, meters, row-major; `null` marks a missing pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthPayload {
    pub width: usize,
    pub height: usize,
    pub values: Vec<Option<f64>>,
}

/// `POST /grasp`. Exactly one of `depth` and `depth_path` (a PGM or CSV
/// depth file readable by the server).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GraspRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_path: Option<String>,
    /// `"heuristic"` (default) or `"network"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    /// Require robot-frame poses; fails when no camera is configured.
    #[serde(default)]
    pub world: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldGrasp {
    pub position: [f64; 3],
    pub phi: f64,
    /// Meters.
    pub width: f64,
    pub quality: f64,
}

impl From<&GraspWorld> for WorldGrasp {
    fn from(g: &GraspWorld) -> Self {
        Self { position: g.position.into(), phi: g.phi, width: g.width, quality: g.quality }
    }
}

/// A detected grasp in original image pixels, plus its robot-frame pose when
/// a camera is configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspEntry {
    pub center: [f64; 2],
    pub angle: f64,
    pub width: f64,
    pub height: f64,
    pub quality: f64,
    pub corners: [[f64; 2]; 4],
    pub world: Option<WorldGrasp>,
}

impl GraspEntry {
    pub fn new(rect: &GraspRectangle, quality: f64, world: Option<WorldGrasp>) -> Self {
        Self {
            center: [rect.center.0, rect.center.1],
            angle: rect.angle,
            width: rect.width,
            height: rect.height,
            quality,
            corners: rect.corners().map(|(x, y)| [x, y]),
            world,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspResponse {
    pub grasps: Vec<GraspEntry>,
}

/// Camera file read by `serve --camera`: pinhole intrinsics in pixels and
/// the camera pose in the robot frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
}

impl CameraConfig {
    pub fn to_model(&self) -> Result<CameraModel, ApiError> {
        let intrinsics = [self.fx, self.fy, self.cx, self.cy];
        if !intrinsics.iter().all(|v| v.is_finite()) || !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(ApiError::config("camera focal lengths must be finite and positive"));
        }
        let pose = PoseMsg { position: self.position, quaternion: self.quaternion }.to_pose()?;
        Ok(CameraModel::new(self.fx, self.fy, self.cx, self.cy, pose.to_transform()))
    }
}
