//! Planar antipodal grasps: the per-pixel grasp map, its decoding into grasp
//! candidates, oriented rectangles with the IoU-based success metric, and
//! the image → camera → robot transforms.
//!
//! Image coordinates are `(u, v)` = (column, row) with pixel centers on
//! integers. A grasp angle `phi` is the direction of the gripper's closing
//! axis in that frame, `(cos phi, sin phi)`, folded into `(-π/2, π/2]` since
//! a two-finger grasp is symmetric under a half turn.

mod camera;
mod map;
mod rect;

pub use camera::{camera_to_robot, image_to_camera, CameraModel};
pub use map::{decode_grasp_map, encode_ground_truth, GraspMap};
pub use rect::{
    angle_difference, format_rectangles, grasp_success, iou, rect_from_pixel, GraspRectangle,
    ANGLE_THRESHOLD, IOU_THRESHOLD,
};

use std::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

/// Pixels represented by a width-plane value of 1.
pub const WIDTH_SCALE: f64 = 150.0;
/// Jaw extent of a predicted rectangle relative to its opening width.
pub const DEFAULT_HEIGHT_RATIO: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraspError {
    #[error("angle is undefined for a zero (cos 2φ, sin 2φ) vector")]
    UndefinedAngle,
    #[error("grasp width must be positive")]
    ZeroWidth,
    #[error("height ratio must be positive")]
    BadHeightRatio,
    #[error("ground-truth rectangle list is empty")]
    NoGroundTruth,
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("rectangle centered at ({u:.1}, {v:.1}) lies outside the {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: usize, height: usize },
    #[error("grasp map planes must share dimensions {width}x{height}")]
    PlaneSize { width: usize, height: usize },
    #[error("k must be at least 1")]
    ZeroK,
}

/// A grasp in image space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPixel {
    /// Center `(u, v)` in pixels.
    pub center: (f64, f64),
    pub phi: f64,
    /// Opening width in pixels.
    pub omega: f64,
    pub quality: f64,
}

/// A grasp in a metric 3D frame: center position, rotation about that
/// frame's z axis, opening width in meters, and quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspWorld {
    pub position: nalgebra::Vector3<f64>,
    pub phi: f64,
    pub width: f64,
    pub quality: f64,
}

/// `(cos 2φ, sin 2φ)`
pub fn encode_angle(phi: f64) -> (f64, f64) {
    let (s, c) = (2.0 * phi).sin_cos();
    (c, s)
}

/// Inverse of [`encode_angle`]; `(-1, 0)` decodes to `+π/2`.
pub fn decode_angle(c: f64, s: f64) -> Result<f64, GraspError> {
    if c == 0.0 && s == 0.0 {
        return Err(GraspError::UndefinedAngle);
    }
    Ok(wrap_half_pi(0.5 * s.atan2(c)))
}

/// Folds an angle modulo π into `(-π/2, π/2]`.
pub fn wrap_half_pi(phi: f64) -> f64 {
    let mut a = phi.rem_euclid(PI);
    if a > FRAC_PI_2 {
        a -= PI;
    }
    if a <= -FRAC_PI_2 {
        a += PI;
    }
    a
}
