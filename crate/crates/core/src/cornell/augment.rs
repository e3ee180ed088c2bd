use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fnv1a, io_err, write_manifest, write_scene, DataError, DepthImage, SceneRecord};
use crate::grasp::GraspRectangle;

/// Random crop (shift), rotation and zoom applied around the image center.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    /// Maximum shift along each axis, pixels.
    pub crop_jitter: f64,
    /// Rotation drawn from `[-rotation_range, rotation_range]`, radians.
    pub rotation_range: f64,
    pub zoom_range: (f64, f64),
    pub count_per_record: usize,
    pub rng_seed: u64,
}

impl AugmentSpec {
    pub fn identity(count_per_record: usize) -> Self {
        Self {
            crop_jitter: 0.0,
            rotation_range: 0.0,
            zoom_range: (1.0, 1.0),
            count_per_record,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let (lo, hi) = self.zoom_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(DataError::AugmentSpec("zoom range must satisfy 0 < min <= max"));
        }
        if !(self.crop_jitter >= 0.0 && self.crop_jitter.is_finite()) {
            return Err(DataError::AugmentSpec("crop jitter must be finite and non-negative"));
        }
        if !(self.rotation_range >= 0.0 && self.rotation_range.is_finite()) {
            return Err(DataError::AugmentSpec("rotation range must be finite and non-negative"));
        }
        Ok(())
    }
}

/// The affine actually applied: `p' = c + zoom * R(rotation) (p - c) + shift`.
/// Also the content of the `<id>transform.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub source_id: String,
    pub rotation_rad: f64,
    pub zoom: f64,
    pub shift_u: f64,
    pub shift_v: f64,
    pub center_u: f64,
    pub center_v: f64,
}

impl AugmentParams {
    fn is_identity(&self) -> bool {
        self.rotation_rad == 0.0 && self.zoom == 1.0 && self.shift_u == 0.0 && self.shift_v == 0.0
    }

    pub fn forward(&self, p: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.rotation_rad.sin_cos();
        let (du, dv) = (p.0 - self.center_u, p.1 - self.center_v);
        (
            self.center_u + self.zoom * (c * du - s * dv) + self.shift_u,
            self.center_v + self.zoom * (s * du + c * dv) + self.shift_v,
        )
    }

    pub fn inverse(&self, p: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.rotation_rad.sin_cos();
        let (du, dv) = (
            (p.0 - self.center_u - self.shift_u) / self.zoom,
            (p.1 - self.center_v - self.shift_v) / self.zoom,
        );
        (self.center_u + c * du + s * dv, self.center_v - s * du + c * dv)
    }

    pub fn apply_rect(&self, r: &GraspRectangle) -> GraspRectangle {
        GraspRectangle::from_vertices(&r.corners().map(|p| self.forward(p)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub record: SceneRecord,
    pub params: AugmentParams,
}

fn warp_depth(d: &DepthImage, p: &AugmentParams) -> DepthImage {
    let (w, h) = (d.width(), d.height());
    let mut values = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let (su, sv) = p.inverse((u as f64, v as f64));
            match d.sample_bilinear(su, sv) {
                Some(x) => {
                    values.push(x);
                    valid.push(true);
                }
                None => {
                    values.push(0.0);
                    valid.push(false);
                }
            }
        }
    }
    DepthImage::with_mask(w, h, values, valid).expect("warped image keeps its shape")
}

fn in_frame(r: &GraspRectangle, w: usize, h: usize) -> bool {
    let (u, v) = r.center;
    u >= 0.0 && v >= 0.0 && u <= (w - 1) as f64 && v <= (h - 1) as f64
}

fn transform_rects(rects: &[GraspRectangle], p: &AugmentParams, w: usize, h: usize) -> Vec<GraspRectangle> {
    rects
        .iter()
        .map(|r| p.apply_rect(r))
        .filter(|r| in_frame(r, w, h))
        .collect()
}

fn sample(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Produces `count_per_record` augmented copies with ids `<id>_aNN`, along
/// with the parameters applied to each. The random stream depends only on
/// the seed and the record id.
pub fn augment_detailed(rec: &SceneRecord, spec: &AugmentSpec) -> Result<Vec<Augmented>, DataError> {
    spec.validate()?;
    let (w, h) = (rec.depth.width(), rec.depth.height());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed ^ fnv1a(rec.id.as_bytes()));
    let mut out = Vec::with_capacity(spec.count_per_record);
    for n in 0..spec.count_per_record {
        let params = AugmentParams {
            source_id: rec.id.clone(),
            rotation_rad: sample(&mut rng, -spec.rotation_range, spec.rotation_range),
            zoom: sample(&mut rng, spec.zoom_range.0, spec.zoom_range.1),
            shift_u: sample(&mut rng, -spec.crop_jitter, spec.crop_jitter),
            shift_v: sample(&mut rng, -spec.crop_jitter, spec.crop_jitter),
            center_u: 0.5 * (w - 1) as f64,
            center_v: 0.5 * (h - 1) as f64,
        };
        let id = format!("{}_a{n:02}", rec.id);
        let record = if params.is_identity() {
            SceneRecord { id, ..rec.clone() }
        } else {
            SceneRecord {
                id,
                object_id: rec.object_id.clone(),
                depth: warp_depth(&rec.depth, &params),
                pos_rects: transform_rects(&rec.pos_rects, &params, w, h),
                neg_rects: transform_rects(&rec.neg_rects, &params, w, h),
            }
        };
        out.push(Augmented { record, params });
    }
    Ok(out)
}

pub fn augment(rec: &SceneRecord, spec: &AugmentSpec) -> Result<Vec<SceneRecord>, DataError> {
    Ok(augment_detailed(rec, spec)?.into_iter().map(|a| a.record).collect())
}

/// Augments every record in parallel and writes the results under
/// `<out>/aug/` in the dataset layout, each with a `<id>transform.json`
/// sidecar. Returns the number of records written.
pub fn write_augmented(records: &[SceneRecord], spec: &AugmentSpec, out: &Path) -> Result<usize, DataError> {
    spec.validate()?;
    let dir = out.join("aug");
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let batches = records
        .par_iter()
        .map(|rec| {
            let augmented = augment_detailed(rec, spec)?;
            for a in &augmented {
                write_scene(&dir, &a.record)?;
                let path = dir.join(format!("{}transform.json", a.record.id));
                let json = serde_json::to_string_pretty(&a.params).expect("params serialize");
                fs::write(&path, json).map_err(io_err(&path))?;
            }
            Ok(augmented.into_iter().map(|a| a.record).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    let all: Vec<SceneRecord> = batches.into_iter().flatten().collect();
    write_manifest(&dir, &all)?;
    Ok(all.len())
}
