//! Depth image in, ranked grasps out: inpaint, crop and scale, predict,
//! decode peaks, and map the rectangles back to the original frame.

use thiserror::Error;

use crate::cornell::{inpaint, preprocess, DataError, DepthImage, FrameTransform};
use crate::grasp::{
    camera_to_robot, image_to_camera, decode_grasp_map, rect_from_pixel, CameraModel, GraspError, GraspPixel,
    GraspRectangle, GraspWorld, DEFAULT_HEIGHT_RATIO,
};
use crate::nn::{NnError, Predictor, Tensor};

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Net(#[from] NnError),
    #[error(transparent)]
    Grasp(#[from] GraspError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    /// Side of the square network input.
    pub input_size: usize,
    pub top_k: usize,
    /// Minimum distance between reported peaks, in processed pixels.
    pub min_separation: f64,
    pub height_ratio: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { input_size: 400, top_k: 5, min_separation: 20.0, height_ratio: DEFAULT_HEIGHT_RATIO }
    }
}

/// One grasp, in the original image frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub pixel: GraspPixel,
    pub rect: GraspRectangle,
}

/// Grasps in descending quality, in original image coordinates.
pub fn detect_grasps(depth: &DepthImage, predictor: &dyn Predictor, cfg: &DetectConfig) -> Result<Vec<Detection>, DetectError> {
    let filled = inpaint(depth)?;
    let (processed, transform) = preprocess(&filled, cfg.input_size)?;
    let input = Tensor::new(
        vec![1, cfg.input_size, cfg.input_size],
        processed.values().iter().map(|&v| v as f32).collect(),
    )?;
    let map = predictor.predict(&input)?;
    let peaks = decode_grasp_map(&map, cfg.top_k, cfg.min_separation)?;
    let mut out = Vec::with_capacity(peaks.len());
    for gp in peaks {
        if gp.omega <= 0.0 {
            continue;
        }
        out.push(to_original(&gp, &transform, cfg.height_ratio)?);
    }
    Ok(out)
}

fn to_original(gp: &GraspPixel, t: &FrameTransform, height_ratio: f64) -> Result<Detection, GraspError> {
    let rect = t.rect_to_original(&rect_from_pixel(gp, height_ratio)?);
    let pixel = GraspPixel { center: rect.center, omega: rect.width, ..*gp };
    Ok(Detection { pixel, rect })
}

/// Robot-frame pose of a detection, using the (inpainted) depth at its
/// center pixel.
pub fn detection_to_world(det: &Detection, depth: &DepthImage, cam: &CameraModel) -> Result<GraspWorld, DetectError> {
    let filled;
    let depth = if depth.is_fully_valid() {
        depth
    } else {
        filled = inpaint(depth)?;
        &filled
    };
    let u = det.pixel.center.0.round().clamp(0.0, (depth.width() - 1) as f64) as usize;
    let v = det.pixel.center.1.round().clamp(0.0, (depth.height() - 1) as f64) as usize;
    let camera = image_to_camera(&det.pixel, depth.get(u, v), cam)?;
    Ok(camera_to_robot(&camera, cam))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::angle_difference;
    use crate::nn::heuristic_predictor;
    use std::f64::consts::FRAC_PI_2;

    fn table_with_block() -> DepthImage {
        let (w, h) = (160, 120);
        let mut d = DepthImage::filled(w, h, 0.70);
        for v in 50..70 {
            for u in 50..110 {
                d.set(u, v, 0.64);
            }
        }
        d.invalidate(3, 3);
        d
    }

    #[test]
    fn block_scene_detections() {
        let d = table_with_block();
        let dets = detect_grasps(&d, &heuristic_predictor(), &DetectConfig { top_k: 3, ..Default::default() }).unwrap();
        assert!(!dets.is_empty());
        for pair in dets.windows(2) {
            assert!(pair[0].pixel.quality >= pair[1].pixel.quality);
        }
        let best = dets[0];
        let (u, v) = best.rect.center;
        assert!((50.0..110.0).contains(&u) && (50.0..70.0).contains(&v), "{best:?}");
        assert!(angle_difference(best.rect.angle, FRAC_PI_2) < 10f64.to_radians());
    }

    #[test]
    fn world_pose_with_identity_extrinsic() {
        let d = table_with_block();
        let cam = CameraModel::new(200.0, 200.0, 80.0, 60.0, crate::arm::Transform::identity());
        let det = Detection {
            pixel: GraspPixel { center: (80.0, 60.0), phi: 0.4, omega: 20.0, quality: 0.9 },
            rect: GraspRectangle::new((80.0, 60.0), 0.4, 20.0, 10.0),
        };
        let g = detection_to_world(&det, &d, &cam).unwrap();
        let camera = image_to_camera(&det.pixel, 0.64, &cam).unwrap();
        assert_eq!(g.position, camera.position);
        assert!((g.phi - camera.phi).abs() < 1e-12);
        assert!((g.position.z - 0.64).abs() < 1e-12);
        assert!((g.width - 20.0 * 0.64 / 200.0).abs() < 1e-12);
    }
}
