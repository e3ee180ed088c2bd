use nalgebra::Vector3;

use super::{wrap_half_pi, GraspError, GraspPixel, GraspWorld};
use crate::arm::Transform;

/// Pinhole intrinsics plus the camera pose in the robot frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Camera frame → robot frame.
    pub extrinsic: Transform,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, extrinsic: Transform) -> Self {
        Self { fx, fy, cx, cy, extrinsic }
    }
}

/// Back-projects an image grasp at `depth` meters into the camera frame
/// (x right, y down, z along the optical axis).
pub fn image_to_camera(gp: &GraspPixel, depth: f64, cam: &CameraModel) -> Result<GraspWorld, GraspError> {
    if !(depth > 0.0) {
        return Err(GraspError::NonPositiveDepth(depth));
    }
    let (u, v) = gp.center;
    Ok(GraspWorld {
        position: Vector3::new((u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth),
        phi: gp.phi,
        width: gp.omega * depth / cam.fx,
        quality: gp.quality,
    })
}

/// Moves a camera-frame grasp into the robot frame. The closing axis is
/// rotated with the extrinsic and its projection onto the robot xy-plane
/// gives the new angle.
pub fn camera_to_robot(g: &GraspWorld, cam: &CameraModel) -> GraspWorld {
    let axis = cam.extrinsic.rotation * Vector3::new(g.phi.cos(), g.phi.sin(), 0.0);
    let phi = if axis.x.hypot(axis.y) > 1e-12 {
        wrap_half_pi(axis.y.atan2(axis.x))
    } else {
        g.phi
    };
    GraspWorld {
        position: cam.extrinsic.transform_point(&g.position.into()).coords,
        phi,
        ..*g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Translation3, UnitQuaternion};
    use std::f64::consts::FRAC_PI_2;

    fn cam(extrinsic: Transform) -> CameraModel {
        CameraModel::new(400.0, 400.0, 200.0, 200.0, extrinsic)
    }

    fn pixel(u: f64, v: f64) -> GraspPixel {
        GraspPixel { center: (u, v), phi: 0.3, omega: 400.0, quality: 0.8 }
    }

    #[test]
    fn pinhole_examples() {
        let c = cam(Transform::identity());
        let g = image_to_camera(&pixel(200.0, 200.0), 0.5, &c).unwrap();
        assert_eq!(g.position, Vector3::new(0.0, 0.0, 0.5));
        let g = image_to_camera(&pixel(600.0, 200.0), 1.0, &c).unwrap();
        assert_eq!(g.position, Vector3::new(1.0, 0.0, 1.0));
        assert_eq!(g.width, 1.0);
        assert_eq!(g.phi, 0.3);
        assert_eq!(image_to_camera(&pixel(0.0, 0.0), 0.0, &c), Err(GraspError::NonPositiveDepth(0.0)));
    }

    #[test]
    fn extrinsic_examples() {
        let g = GraspWorld { position: Vector3::new(1.0, 0.0, 0.0), phi: 0.3, width: 0.05, quality: 0.7 };
        assert_eq!(camera_to_robot(&g, &cam(Transform::identity())), g);

        let shifted = camera_to_robot(&g, &cam(Transform::translation(0.0, 0.0, 1.0)));
        assert_eq!(shifted.position, Vector3::new(1.0, 0.0, 1.0));
        assert_eq!(shifted.phi, 0.3);

        let yaw = Transform::from_parts(
            Translation3::identity(),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2),
        );
        let turned = camera_to_robot(&g, &cam(yaw));
        assert!((turned.position - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((turned.phi - wrap_half_pi(0.3 + FRAC_PI_2)).abs() < 1e-12);
        assert_eq!((turned.width, turned.quality), (0.05, 0.7));
    }
}
