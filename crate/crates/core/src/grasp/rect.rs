use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt::Write as _;

use super::{wrap_half_pi, GraspError, GraspPixel};

/// Predicted and ground-truth angles must differ by less than this.
pub const ANGLE_THRESHOLD: f64 = 30.0 * PI / 180.0;
/// IoU must exceed this.
pub const IOU_THRESHOLD: f64 = 0.25;

/// Oriented grasp rectangle. `width` runs along the closing axis at `angle`,
/// `height` is the jaw extent perpendicular to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspRectangle {
    pub center: (f64, f64),
    pub angle: f64,
    pub width: f64,
    pub height: f64,
}

type Point = (f64, f64);

impl GraspRectangle {
    pub fn new(center: (f64, f64), angle: f64, width: f64, height: f64) -> Self {
        Self {
            center,
            angle: wrap_half_pi(angle),
            width,
            height,
        }
    }

    fn axes(&self) -> (Point, Point) {
        let (s, c) = self.angle.sin_cos();
        ((c, s), (-s, c))
    }

    /// Corners in counter-clockwise order (in `(u, v)` axes), starting so that
    /// the first edge runs along the closing axis.
    pub fn corners(&self) -> [Point; 4] {
        let ((dx, dy), (nx, ny)) = self.axes();
        let (hw, hh) = (0.5 * self.width, 0.5 * self.height);
        let (cu, cv) = self.center;
        let at = |a: f64, b: f64| (cu + a * dx + b * nx, cv + a * dy + b * ny);
        [at(-hw, -hh), at(hw, -hh), at(hw, hh), at(-hw, hh)]
    }

    /// Rebuilds a rectangle from four vertices in order; the edge from the
    /// first to the second vertex is the closing axis.
    pub fn from_vertices(p: &[Point; 4]) -> Self {
        let center = (
            0.25 * (p[0].0 + p[1].0 + p[2].0 + p[3].0),
            0.25 * (p[0].1 + p[1].1 + p[2].1 + p[3].1),
        );
        let (ex, ey) = (p[1].0 - p[0].0, p[1].1 - p[0].1);
        let (fx, fy) = (p[2].0 - p[1].0, p[2].1 - p[1].1);
        Self::new(center, ey.atan2(ex), ex.hypot(ey), fx.hypot(fy))
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Whether the point lies inside (boundary included).
    pub fn contains(&self, p: Point) -> bool {
        let ((dx, dy), (nx, ny)) = self.axes();
        let (ru, rv) = (p.0 - self.center.0, p.1 - self.center.1);
        (ru * dx + rv * dy).abs() <= 0.5 * self.width && (ru * nx + rv * ny).abs() <= 0.5 * self.height
    }

    fn key(&self) -> [f64; 5] {
        [self.center.0, self.center.1, self.angle, self.width, self.height]
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        self.key()
            .iter()
            .zip(other.key().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

pub fn rect_from_pixel(gp: &GraspPixel, height_ratio: f64) -> Result<GraspRectangle, GraspError> {
    if !(gp.omega > 0.0) {
        return Err(GraspError::ZeroWidth);
    }
    if !(height_ratio > 0.0) {
        return Err(GraspError::BadHeightRatio);
    }
    Ok(GraspRectangle::new(gp.center, gp.phi, gp.omega, gp.omega * height_ratio))
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn line_intersection(s: Point, e: Point, a: Point, b: Point) -> Point {
    let d1 = cross(a, b, s);
    let d2 = cross(a, b, e);
    let t = d1 / (d1 - d2);
    (s.0 + t * (e.0 - s.0), s.1 + t * (e.1 - s.1))
}

/// Sutherland-Hodgman: clip a convex polygon by a counter-clockwise convex
/// clip polygon.
fn clip(subject: &[Point], clipper: &[Point]) -> Vec<Point> {
    let mut out = subject.to_vec();
    for i in 0..clipper.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clipper[i], clipper[(i + 1) % clipper.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (s, e) = (input[(j + input.len() - 1) % input.len()], input[j]);
            let (s_in, e_in) = (cross(a, b, s) >= 0.0, cross(a, b, e) >= 0.0);
            if e_in {
                if !s_in {
                    out.push(line_intersection(s, e, a, b));
                }
                out.push(e);
            } else if s_in {
                out.push(line_intersection(s, e, a, b));
            }
        }
    }
    out
}

fn shoelace(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let twice: f64 = (0..poly.len())
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            p.0 * q.1 - q.0 * p.1
        })
        .sum();
    0.5 * twice.abs()
}

/// Exact intersection-over-union of two rectangles. Symmetric bit for bit:
/// the pair is put in a canonical order before clipping.
pub fn iou(a: &GraspRectangle, b: &GraspRectangle) -> f64 {
    let (a, b) = match a.cmp_key(b) {
        Ordering::Equal => return 1.0,
        Ordering::Less => (a, b),
        Ordering::Greater => (b, a),
    };
    let inter = shoelace(&clip(&a.corners(), &b.corners()));
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Difference between two grasp angles modulo π, in `[0, π/2]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Rectangle metric: some ground truth within 30° (strict) with IoU above
/// 0.25 (strict).
pub fn grasp_success(pred: &GraspRectangle, gts: &[GraspRectangle]) -> Result<bool, GraspError> {
    if gts.is_empty() {
        return Err(GraspError::NoGroundTruth);
    }
    Ok(gts
        .iter()
        .any(|gt| angle_difference(pred.angle, gt.angle) < ANGLE_THRESHOLD && iou(pred, gt) > IOU_THRESHOLD))
}

/// Cornell text layout: four `x y` lines per rectangle.
pub fn format_rectangles(rects: &[GraspRectangle]) -> String {
    let mut out = String::new();
    for r in rects {
        for (x, y) in r.corners() {
            let _ = writeln!(out, "{x:.3} {y:.3}");
        }
    }
    out
}
