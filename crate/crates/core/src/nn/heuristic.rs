use super::{shape_err, NnError, Predictor, Tensor};
use crate::grasp::GraspMap;

/// Width plane value of every heuristic grasp (fraction of the width scale).
pub const HEURISTIC_WIDTH: f32 = 0.4;

/// Non-learned baseline. Quality is high where the surface is flat and
/// stands above the median depth (nearer the camera); the closing axis
/// follows the dominant local depth gradient, so the jaws close across the
/// narrow side of an object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicPredictor {
    /// Smoothing window radius as a fraction of the shorter image side.
    pub window: f32,
    pub width: f32,
}

impl Default for HeuristicPredictor {
    fn default() -> Self {
        Self { window: 1.0 / 16.0, width: HEURISTIC_WIDTH }
    }
}

pub fn heuristic_predictor() -> HeuristicPredictor {
    HeuristicPredictor::default()
}

/// Box filter of radius `r` with edge clamping, via a summed-area table.
fn box_blur(src: &[f32], w: usize, h: usize, r: usize) -> Vec<f32> {
    let mut sat = vec![0.0f64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0f64;
        for x in 0..w {
            row += src[y * w + x] as f64;
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let s = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0] + sat[y0 * (w + 1) + x0];
            out[y * w + x] = (s / ((y1 - y0) * (x1 - x0)) as f64) as f32;
        }
    }
    out
}

fn gradients(d: &[f32], w: usize, h: usize) -> (Vec<f32>, Vec<f32>) {
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            if xr > xl {
                gx[y * w + x] = (d[y * w + xr] - d[y * w + xl]) / (xr - xl) as f32;
            }
            if yd > yu {
                gy[y * w + x] = (d[yd * w + x] - d[yu * w + x]) / (yd - yu) as f32;
            }
        }
    }
    (gx, gy)
}

fn median(values: &[f32]) -> f32 {
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    *v.select_nth_unstable_by(mid, f32::total_cmp).1
}

impl HeuristicPredictor {
    fn planes(&self, d: &[f32], w: usize, h: usize) -> GraspMap {
        let n = w * h;
        let r = ((w.min(h) as f32 * self.window).round() as usize).max(1);
        let (gx, gy) = gradients(d, w, h);

        let mag: Vec<f32> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
        let max_mag = mag.iter().cloned().fold(0.0f32, f32::max);
        let med = median(d);
        let lowest = d.iter().cloned().fold(f32::INFINITY, f32::min);
        let relief = med - lowest;
        let mut raw = vec![0.0f32; n];
        for i in 0..n {
            let flat = if max_mag > 0.0 { 1.0 - mag[i] / max_mag } else { 1.0 };
            let raised = if relief > 1e-6 { ((med - d[i]) / relief).clamp(0.0, 1.0) } else { 1.0 };
            raw[i] = flat * raised;
        }
        let smooth = |mut p: Vec<f32>| {
            for _ in 0..3 {
                p = box_blur(&p, w, h, r);
            }
            p
        };
        let mut q = smooth(raw);
        let q_max = q.iter().cloned().fold(0.0f32, f32::max);
        if q_max > 0.0 {
            q.iter_mut().for_each(|v| *v /= q_max);
        }

        let jxx = smooth(gx.iter().map(|g| g * g).collect());
        let jyy = smooth(gy.iter().map(|g| g * g).collect());
        let jxy = smooth(gx.iter().zip(&gy).map(|(a, b)| a * b).collect());
        let mut cos = vec![0.0f32; n];
        let mut sin = vec![0.0f32; n];
        for i in 0..n {
            let (c, s) = (jxx[i] - jyy[i], 2.0 * jxy[i]);
            let norm = c.hypot(s);
            if norm > 1e-12 {
                cos[i] = c / norm;
                sin[i] = s / norm;
            }
        }
        GraspMap::from_planes(w, h, q, cos, sin, vec![self.width; n]).expect("planes sized to the image")
    }
}

impl Predictor for HeuristicPredictor {
    fn predict(&self, input: &Tensor) -> Result<GraspMap, NnError> {
        let [1, h, w] = input.shape()[..] else {
            return Err(shape_err("heuristic", format!("expected a 1xHxW depth tensor, got {:?}", input.shape())));
        };
        if h == 0 || w == 0 {
            return Err(shape_err("heuristic", "empty image"));
        }
        if !input.is_finite() {
            return Err(NnError::NonFinite("input".into()));
        }
        Ok(self.planes(input.data(), w, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::{angle_difference, decode_grasp_map};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn flat_plane_is_uniform() {
        let g = heuristic_predictor().predict(&Tensor::zeros(&[1, 40, 30])).unwrap();
        assert_eq!((g.width(), g.height()), (30, 40));
        assert!(g.quality.iter().all(|&q| q == g.quality[0]));
        assert!(g.grasp_width.iter().all(|&w| w == HEURISTIC_WIDTH));
    }

    fn block(w: usize, h: usize, u: (usize, usize), v: (usize, usize)) -> Tensor {
        let mut d = vec![0.1f32; w * h];
        for y in v.0..v.1 {
            for x in u.0..u.1 {
                d[y * w + x] = -0.05;
            }
        }
        Tensor::new(vec![1, h, w], d).unwrap()
    }

    #[test]
    fn raised_block_is_grasped_across() {
        // 120 px long along u, 40 px narrow along v.
        let g = heuristic_predictor().predict(&block(200, 160, (40, 160), (60, 100))).unwrap();
        let top = decode_grasp_map(&g, 3, 10.0).unwrap();
        assert!(!top.is_empty());
        for gp in &top {
            let (u, v) = gp.center;
            assert!((40.0..160.0).contains(&u) && (60.0..100.0).contains(&v), "{gp:?}");
            assert!(angle_difference(gp.phi, FRAC_PI_2) < 10f64.to_radians(), "{gp:?}");
        }

        // The same block standing upright flips the closing axis.
        let g = heuristic_predictor().predict(&block(160, 200, (60, 100), (40, 160))).unwrap();
        let gp = decode_grasp_map(&g, 1, 10.0).unwrap()[0];
        assert!(angle_difference(gp.phi, 0.0) < 10f64.to_radians(), "{gp:?}");
    }

    #[test]
    fn rejects_bad_input() {
        let p = heuristic_predictor();
        assert!(p.predict(&Tensor::zeros(&[2, 4, 4])).is_err());
        let mut t = Tensor::zeros(&[1, 4, 4]);
        t.data_mut()[3] = f32::NAN;
        assert!(p.predict(&t).is_err());
    }
}
