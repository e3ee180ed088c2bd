use std::collections::VecDeque;

use super::{decode_angle, encode_angle, GraspError, GraspPixel, GraspRectangle, WIDTH_SCALE};

/// Per-pixel grasp quality, angle (as `cos 2φ`, `sin 2φ`) and normalized
/// opening width, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMap {
    width: usize,
    height: usize,
    pub quality: Vec<f32>,
    pub cos2phi: Vec<f32>,
    pub sin2phi: Vec<f32>,
    pub grasp_width: Vec<f32>,
}

impl GraspMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            quality: vec![0.0; n],
            cos2phi: vec![0.0; n],
            sin2phi: vec![0.0; n],
            grasp_width: vec![0.0; n],
        }
    }

    /// Builds a map from four planes; quality is clamped into `[0, 1]`.
    pub fn from_planes(
        width: usize,
        height: usize,
        mut quality: Vec<f32>,
        cos2phi: Vec<f32>,
        sin2phi: Vec<f32>,
        grasp_width: Vec<f32>,
    ) -> Result<Self, GraspError> {
        let n = width * height;
        if [quality.len(), cos2phi.len(), sin2phi.len(), grasp_width.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(GraspError::PlaneSize { width, height });
        }
        for q in &mut quality {
            *q = q.clamp(0.0, 1.0);
        }
        Ok(Self {
            width,
            height,
            quality,
            cos2phi,
            sin2phi,
            grasp_width,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn same_grasp(&self, a: usize, b: usize) -> bool {
        self.quality[a] == self.quality[b] && self.cos2phi[a] == self.cos2phi[b] && self.sin2phi[a] == self.sin2phi[b]
    }

    fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (u, v) = ((idx % self.width) as isize, (idx / self.width) as isize);
        let (w, h) = (self.width as isize, self.height as isize);
        (-1..=1)
            .flat_map(move |dv| (-1..=1).map(move |du| (u + du, v + dv)))
            .filter(move |&(x, y)| (x, y) != (u, v) && x >= 0 && y >= 0 && x < w && y < h)
            .map(move |(x, y)| (y * w + x) as usize)
    }

    fn grasp_at(&self, idx: usize) -> GraspPixel {
        let phi = decode_angle(self.cos2phi[idx] as f64, self.sin2phi[idx] as f64).unwrap_or(0.0);
        GraspPixel {
            center: ((idx % self.width) as f64, (idx / self.width) as f64),
            phi,
            omega: self.grasp_width[idx] as f64 * WIDTH_SCALE,
            quality: self.quality[idx] as f64,
        }
    }
}

struct Peak {
    index: usize,
    quality: f32,
    size: usize,
}

/// Finds local maxima of quality. A plateau of pixels carrying the same grasp
/// (equal quality and angle, 8-connected) counts as one peak, located at the
/// plateau pixel nearest the middle of its extent along the grasp axes.
fn find_peaks(g: &GraspMap) -> Vec<Peak> {
    let n = g.width * g.height;
    let mut visited = vec![false; n];
    let mut peaks = Vec::new();
    let mut queue = VecDeque::new();
    let mut members = Vec::new();
    for start in 0..n {
        if visited[start] || g.quality[start] <= 0.0 {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        members.clear();
        let mut is_peak = true;
        while let Some(idx) = queue.pop_front() {
            members.push(idx);
            for nb in g.neighbors(idx) {
                if g.quality[nb] > g.quality[start] {
                    is_peak = false;
                } else if !visited[nb] && g.same_grasp(nb, start) {
                    visited[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
        if !is_peak {
            continue;
        }
        // Midpoint of the plateau's extent along the grasp axes.
        let phi = decode_angle(g.cos2phi[start] as f64, g.sin2phi[start] as f64).unwrap_or(0.0);
        let (sn, cs) = phi.sin_cos();
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for &i in &members {
            let (u, v) = ((i % g.width) as f64, (i / g.width) as f64);
            for (k, t) in [u * cs + v * sn, -u * sn + v * cs].into_iter().enumerate() {
                lo[k] = lo[k].min(t);
                hi[k] = hi[k].max(t);
            }
        }
        let (a, b) = (0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]));
        let (cu, cv) = (a * cs - b * sn, a * sn + b * cs);
        let dist = |i: usize| ((i % g.width) as f64 - cu).powi(2) + ((i / g.width) as f64 - cv).powi(2);
        let index = members
            .iter()
            .copied()
            .min_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)))
            .expect("non-empty plateau");
        peaks.push(Peak {
            index,
            quality: g.quality[start],
            size: members.len(),
        });
    }
    peaks
}

/// Returns up to `k` grasps at quality peaks in descending quality (larger
/// plateaus first on ties). Peaks closer than `min_separation` pixels to an
/// already chosen one are dropped. A pixel with a zero angle vector decodes
/// with `phi = 0`.
pub fn decode_grasp_map(g: &GraspMap, k: usize, min_separation: f64) -> Result<Vec<GraspPixel>, GraspError> {
    if k == 0 {
        return Err(GraspError::ZeroK);
    }
    let mut peaks = find_peaks(g);
    peaks.sort_by(|a, b| {
        b.quality
            .total_cmp(&a.quality)
            .then(b.size.cmp(&a.size))
            .then(a.index.cmp(&b.index))
    });
    let mut chosen: Vec<GraspPixel> = Vec::with_capacity(k);
    for p in peaks {
        let gp = g.grasp_at(p.index);
        let close = chosen.iter().any(|c| {
            (c.center.0 - gp.center.0).hypot(c.center.1 - gp.center.1) < min_separation
        });
        if !close {
            chosen.push(gp);
            if chosen.len() == k {
                break;
            }
        }
    }
    Ok(chosen)
}

/// Paints training targets: every pixel in the middle third (across the jaw
/// axis) of each rectangle gets quality 1, the rectangle's angle, and width
/// `min(width / WIDTH_SCALE, 1)`. Later rectangles overwrite earlier ones.
pub fn encode_ground_truth(rects: &[GraspRectangle], height: usize, width: usize) -> Result<GraspMap, GraspError> {
    let mut map = GraspMap::zeros(width, height);
    for r in rects {
        let (cu, cv) = r.center;
        if !(cu >= 0.0 && cv >= 0.0 && cu <= (width - 1) as f64 && cv <= (height - 1) as f64) {
            return Err(GraspError::OutOfBounds { u: cu, v: cv, width, height });
        }
        let core = GraspRectangle {
            height: r.height / 3.0,
            ..*r
        };
        let corners = core.corners();
        let (lo_u, hi_u) = corners.iter().fold((f64::MAX, f64::MIN), |(a, b), c| (a.min(c.0), b.max(c.0)));
        let (lo_v, hi_v) = corners.iter().fold((f64::MAX, f64::MIN), |(a, b), c| (a.min(c.1), b.max(c.1)));
        let (c, s) = encode_angle(r.angle);
        let w = (r.width / WIDTH_SCALE).min(1.0) as f32;
        let u0 = lo_u.ceil().max(0.0) as usize;
        let v0 = lo_v.ceil().max(0.0) as usize;
        let u1 = (hi_u.floor() as isize).min(width as isize - 1);
        let v1 = (hi_v.floor() as isize).min(height as isize - 1);
        if u1 < 0 || v1 < 0 {
            continue;
        }
        for v in v0..=v1 as usize {
            for u in u0..=u1 as usize {
                if core.contains((u as f64, v as f64)) {
                    let i = v * width + u;
                    map.quality[i] = 1.0;
                    map.cos2phi[i] = c as f32;
                    map.sin2phi[i] = s as f32;
                    map.grasp_width[i] = w;
                }
            }
        }
    }
    Ok(map)
}
