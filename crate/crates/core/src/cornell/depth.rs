use std::fmt::Write as _;

use super::DataError;
use crate::grasp::GraspRectangle;

/// Depth in meters, row-major, with a validity mask. Invalid pixels hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthImage {
    /// Values that are non-finite or not positive are marked invalid.
    pub fn from_meters(width: usize, height: usize, values: Vec<f64>) -> Result<Self, DataError> {
        if values.len() != width * height || width == 0 || height == 0 {
            return Err(DataError::Shape(format!(
                "{} values for a {width}x{height} depth image",
                values.len()
            )));
        }
        let valid: Vec<bool> = values.iter().map(|v| v.is_finite() && *v > 0.0).collect();
        let values = values
            .into_iter()
            .zip(&valid)
            .map(|(v, &ok)| if ok { v } else { 0.0 })
            .collect();
        Ok(Self { width, height, values, valid })
    }

    /// Takes values and mask as given; used for mean-centered images whose
    /// values may be negative.
    pub fn with_mask(width: usize, height: usize, values: Vec<f64>, valid: Vec<bool>) -> Result<Self, DataError> {
        if values.len() != width * height || valid.len() != values.len() {
            return Err(DataError::Shape("values and mask lengths differ".into()));
        }
        if values.iter().zip(&valid).any(|(v, &ok)| ok && !v.is_finite()) {
            return Err(DataError::Shape("non-finite value under a valid mask".into()));
        }
        Ok(Self { width, height, values, valid })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
            valid: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.valid[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        let i = v * self.width + u;
        self.values[i] = value;
        self.valid[i] = true;
    }

    pub fn invalidate(&mut self, u: usize, v: usize) {
        let i = v * self.width + u;
        self.values[i] = 0.0;
        self.valid[i] = false;
    }

    pub fn is_fully_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| !v).count()
    }

    pub fn mean(&self) -> f64 {
        let (sum, n) = self
            .values
            .iter()
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Bilinear sample at a fractional position, clamped to the image.
    /// Falls back to the nearest pixel when a contributing neighbor is
    /// invalid; returns `None` if that pixel is invalid too.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<f64> {
        let u = u.clamp(0.0, (self.width - 1) as f64);
        let v = v.clamp(0.0, (self.height - 1) as f64);
        let (u0, v0) = (u.floor() as usize, v.floor() as usize);
        let (u1, v1) = ((u0 + 1).min(self.width - 1), (v0 + 1).min(self.height - 1));
        let (fu, fv) = (u - u0 as f64, v - v0 as f64);
        let taps = [
            (u0, v0, (1.0 - fu) * (1.0 - fv)),
            (u1, v0, fu * (1.0 - fv)),
            (u0, v1, (1.0 - fu) * fv),
            (u1, v1, fu * fv),
        ];
        if taps.iter().all(|&(x, y, w)| w == 0.0 || self.is_valid(x, y)) {
            return Some(taps.iter().map(|&(x, y, w)| if w == 0.0 { 0.0 } else { w * self.get(x, y) }).sum());
        }
        let (nu, nv) = (u.round() as usize, v.round() as usize);
        self.is_valid(nu, nv).then(|| self.get(nu, nv))
    }
}

/// Scale header comment of depth PGM files: millimeters per stored unit.
const UNIT_KEY: &str = "depth_unit_mm";

fn next_token<'a>(data: &'a [u8], pos: &mut usize, unit_mm: &mut f64) -> Option<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            let start = *pos;
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            let comment = String::from_utf8_lossy(&data[start + 1..*pos]);
            let mut parts = comment.split_whitespace();
            if parts.next() == Some(UNIT_KEY) {
                if let Some(v) = parts.next().and_then(|s| s.parse::<f64>().ok()) {
                    *unit_mm = v;
                }
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &data[start..*pos])
}

/// Reads a binary (P5) grayscale PGM holding depth; 0 marks missing depth.
/// The `# depth_unit_mm <f>` comment sets the scale (default 1 mm).
pub fn read_depth_pgm(data: &[u8]) -> Result<DepthImage, DataError> {
    let bad = |m: &str| DataError::Format(format!("pgm: {m}"));
    let mut pos = 0;
    let mut unit_mm = 1.0;
    if next_token(data, &mut pos, &mut unit_mm) != Some(b"P5") {
        return Err(bad("expected P5 magic"));
    }
    let mut number = |what: &str| -> Result<usize, DataError> {
        next_token(data, &mut pos, &mut unit_mm)
            .and_then(|t| std::str::from_utf8(t).ok())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(&format!("missing {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad("invalid header values"));
    }
    pos += 1;
    let bytes = if maxval > 255 { 2 } else { 1 };
    let payload = data.get(pos..pos + width * height * bytes).ok_or_else(|| bad("truncated pixel data"))?;
    let scale = unit_mm * 1e-3;
    let values = payload
        .chunks_exact(bytes)
        .map(|c| {
            let raw = if bytes == 2 { u16::from_be_bytes([c[0], c[1]]) } else { c[0] as u16 };
            raw as f64 * scale
        })
        .collect();
    DepthImage::from_meters(width, height, values)
}

/// Writes a 16-bit PGM in whole millimeters; invalid pixels become 0.
pub fn write_depth_pgm(d: &DepthImage) -> Vec<u8> {
    let mut out = format!("P5\n# {UNIT_KEY} 1\n{} {}\n65535\n", d.width, d.height).into_bytes();
    for (v, &ok) in d.values.iter().zip(&d.valid) {
        let mm = if ok { (v * 1000.0).round().clamp(1.0, 65535.0) as u16 } else { 0 };
        out.extend_from_slice(&mm.to_be_bytes());
    }
    out
}

/// Comma-separated meters, one image row per line.
pub fn read_depth_csv(text: &str) -> Result<DepthImage, DataError> {
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .split(',')
            .map(|t| {
                let t = t.trim();
                if t.eq_ignore_ascii_case("nan") || t.is_empty() {
                    Ok(f64::NAN)
                } else {
                    t.parse::<f64>()
                        .map_err(|_| DataError::Format(format!("csv line {}: `{t}` is not a number", i + 1)))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(DataError::Format(format!("csv line {}: ragged row", i + 1)));
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    DepthImage::from_meters(width.unwrap_or(0), height, values)
}

pub fn write_depth_csv(d: &DepthImage) -> String {
    let mut out = String::new();
    for row in 0..d.height {
        for col in 0..d.width {
            if col > 0 {
                out.push(',');
            }
            let i = row * d.width + col;
            let _ = write!(out, "{}", if d.valid[i] { d.values[i] } else { 0.0 });
        }
        out.push('\n');
    }
    out
}

/// Fills invalid pixels by repeated neighbor diffusion: each pass gives every
/// invalid pixel with at least one valid 4-neighbor the mean of those
/// neighbors (as of the start of the pass). Valid pixels are never touched.
pub fn inpaint(d: &DepthImage) -> Result<DepthImage, DataError> {
    if d.valid.iter().all(|&v| !v) {
        return Err(DataError::NoValidDepth);
    }
    let mut out = d.clone();
    let (w, h) = (d.width, d.height);
    let mut pending: Vec<usize> = (0..w * h).filter(|&i| !out.valid[i]).collect();
    let mut updates = Vec::new();
    while !pending.is_empty() {
        updates.clear();
        pending.retain(|&i| {
            let (u, v) = (i % w, i / w);
            let mut sum = 0.0;
            let mut n = 0;
            let mut take = |j: usize| {
                if out.valid[j] {
                    sum += out.values[j];
                    n += 1;
                }
            };
            if u > 0 {
                take(i - 1);
            }
            if u + 1 < w {
                take(i + 1);
            }
            if v > 0 {
                take(i - w);
            }
            if v + 1 < h {
                take(i + w);
            }
            if n > 0 {
                updates.push((i, sum / n as f64));
                false
            } else {
                true
            }
        });
        for &(i, value) in &updates {
            out.values[i] = value;
            out.valid[i] = true;
        }
    }
    Ok(out)
}

/// Maps pixel coordinates of the original image to the processed square:
/// `p' = (p - origin) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTransform {
    pub origin: (f64, f64),
    pub scale: f64,
}

impl FrameTransform {
    pub fn identity() -> Self {
        Self { origin: (0.0, 0.0), scale: 1.0 }
    }

    pub fn to_processed(&self, p: (f64, f64)) -> (f64, f64) {
        ((p.0 - self.origin.0) * self.scale, (p.1 - self.origin.1) * self.scale)
    }

    pub fn to_original(&self, p: (f64, f64)) -> (f64, f64) {
        (p.0 / self.scale + self.origin.0, p.1 / self.scale + self.origin.1)
    }

    pub fn rect_to_processed(&self, r: &GraspRectangle) -> GraspRectangle {
        GraspRectangle::new(self.to_processed(r.center), r.angle, r.width * self.scale, r.height * self.scale)
    }

    pub fn rect_to_original(&self, r: &GraspRectangle) -> GraspRectangle {
        GraspRectangle::new(self.to_original(r.center), r.angle, r.width / self.scale, r.height / self.scale)
    }
}

/// Center-crops the largest square, resamples it bilinearly to
/// `out_size`², and subtracts the mean depth.
pub fn preprocess(d: &DepthImage, out_size: usize) -> Result<(DepthImage, FrameTransform), DataError> {
    if out_size < 1 {
        return Err(DataError::OutputSize);
    }
    if !d.is_fully_valid() {
        return Err(DataError::NotInpainted(d.invalid_count()));
    }
    let side = d.width.min(d.height);
    let origin = (((d.width - side) / 2) as f64, ((d.height - side) / 2) as f64);
    let scale = out_size as f64 / side as f64;
    let transform = FrameTransform { origin, scale };

    let mut values = Vec::with_capacity(out_size * out_size);
    for row in 0..out_size {
        for col in 0..out_size {
            let (u, v) = transform.to_original((col as f64, row as f64));
            let u = u.min(origin.0 + (side - 1) as f64);
            let v = v.min(origin.1 + (side - 1) as f64);
            values.push(d.sample_bilinear(u, v).expect("fully valid input"));
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for v in &mut values {
        *v -= mean;
    }
    let out = DepthImage::with_mask(out_size, out_size, values, vec![true; out_size * out_size])?;
    Ok((out, transform))
}
