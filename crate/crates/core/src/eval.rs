//! Cross-validated rectangle-metric evaluation of a predictor on a
//! Cornell-format dataset. A fixed predictor has nothing to train, so each
//! fold simply scores its validation records.

use rayon::prelude::*;

use crate::cornell::{make_splits, DataError, SceneRecord, SplitMode};
use crate::detect::{detect_grasps, DetectConfig, DetectError};
use crate::grasp::grasp_success;
use crate::nn::Predictor;

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    /// Validation records with at least one positive rectangle.
    pub evaluated: usize,
    pub successes: usize,
}

impl FoldResult {
    pub fn accuracy(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.successes as f64 / self.evaluated as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: SplitMode,
    pub folds: Vec<FoldResult>,
    /// Records skipped for having no positive rectangles.
    pub skipped: usize,
}

impl EvalReport {
    pub fn evaluated(&self) -> usize {
        self.folds.iter().map(|f| f.evaluated).sum()
    }

    pub fn successes(&self) -> usize {
        self.folds.iter().map(|f| f.successes).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.evaluated();
        if n == 0 {
            0.0
        } else {
            self.successes() as f64 / n as f64
        }
    }

    pub fn summary(&self) -> String {
        let mode = match self.mode {
            SplitMode::ImageWise => "image-wise",
            SplitMode::ObjectWise => "object-wise",
        };
        let mut out = format!(
            "{mode}: {}/{} = {:.1}% over {} folds ({} skipped)\n",
            self.successes(),
            self.evaluated(),
            100.0 * self.accuracy(),
            self.folds.len(),
            self.skipped
        );
        for f in &self.folds {
            out.push_str(&format!("  fold {}: {}/{} = {:.1}%\n", f.fold, f.successes, f.evaluated, 100.0 * f.accuracy()));
        }
        out
    }
}

/// Top-1 success of one record: the best detection must match a positive
/// rectangle under the rectangle metric. `None` if the record has no
/// positives.
pub fn score_record(rec: &SceneRecord, predictor: &dyn Predictor, cfg: &DetectConfig) -> Result<Option<bool>, DetectError> {
    if rec.pos_rects.is_empty() {
        return Ok(None);
    }
    let dets = detect_grasps(&rec.depth, predictor, &DetectConfig { top_k: 1, ..*cfg })?;
    Ok(Some(match dets.first() {
        Some(d) => grasp_success(&d.rect, &rec.pos_rects)?,
        None => false,
    }))
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Split(#[from] DataError),
    #[error("scene `{id}`: {source}")]
    Scene { id: String, source: DetectError },
}

pub fn evaluate(
    records: &[SceneRecord],
    predictor: &dyn Predictor,
    mode: SplitMode,
    folds: usize,
    rng_seed: u64,
    cfg: &DetectConfig,
) -> Result<EvalReport, EvalError> {
    let split = make_splits(records, mode, folds, rng_seed)?;
    let scores = records
        .par_iter()
        .map(|r| score_record(r, predictor, cfg).map_err(|source| EvalError::Scene { id: r.id.clone(), source }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut results: Vec<FoldResult> = (0..folds).map(|fold| FoldResult { fold, evaluated: 0, successes: 0 }).collect();
    let mut skipped = 0;
    for (rec, score) in records.iter().zip(scores) {
        let fold = split.fold_of(&rec.id).expect("every record has a fold");
        match score {
            Some(ok) => {
                results[fold].evaluated += 1;
                results[fold].successes += ok as usize;
            }
            None => skipped += 1,
        }
    }
    Ok(EvalReport { mode, folds: results, skipped })
}
