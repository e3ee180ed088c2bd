//! Cornell grasping data: rectangle files, depth images, dataset layout on
//! disk, preprocessing, augmentation and cross-validation splits.
//!
//! Layout of a dataset root:
//!
//! ```text
//! <root>/objects.csv          scene_id,object_id
//! <root>/<id>d.pgm            16-bit depth (or <id>d.csv in meters)
//! <root>/<id>cpos.txt         positive rectangles, four "x y" lines each
//! <root>/<id>cneg.txt         negative rectangles
//! ```

mod augment;
mod depth;
mod split;

pub use augment::{augment, augment_detailed, write_augmented, AugmentParams, AugmentSpec, Augmented};
pub use depth::{
    inpaint, preprocess, read_depth_csv, read_depth_pgm, write_depth_csv, write_depth_pgm, DepthImage,
    FrameTransform,
};
pub use split::{make_splits, DatasetSplit, SplitMode};

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grasp::{format_rectangles, GraspRectangle};

/// Scene and rectangle counts of the full Cornell grasping set.
pub const CORNELL_SCENES: usize = 885;
pub const CORNELL_POSITIVE: usize = 5110;
pub const CORNELL_NEGATIVE: usize = 2909;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Format(String),
    #[error("rectangle file line {line}: {msg}")]
    RectLine { line: usize, msg: String },
    #[error("rectangle file ends with an incomplete group of {0} lines")]
    TruncatedGroup(usize),
    #[error("{0}")]
    Shape(String),
    #[error("depth image has no valid pixels")]
    NoValidDepth,
    #[error("depth image still has {0} invalid pixels; inpaint first")]
    NotInpainted(usize),
    #[error("output size must be at least 1")]
    OutputSize,
    #[error("invalid augmentation spec: {0}")]
    AugmentSpec(&'static str),
    #[error("need at least 2 folds")]
    TooFewFolds,
    #[error("{objects} objects cannot fill {folds} object-wise folds")]
    TooFewObjects { objects: usize, folds: usize },
    #[error("duplicate scene id `{0}`")]
    DuplicateScene(String),
    #[error("scene `{0}` has no depth file")]
    MissingDepth(String),
}

impl PartialEq for DataError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

/// Rectangles read from one file, plus the number of 4-line groups dropped
/// for holding non-finite coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RectFile {
    pub rects: Vec<GraspRectangle>,
    pub skipped: usize,
}

/// Parses a Cornell rectangle file. Groups containing `NaN` are skipped and
/// counted; any other unparsable line is an error.
pub fn parse_rect_file(text: &str) -> Result<RectFile, DataError> {
    let mut out = RectFile::default();
    let mut group: Vec<(f64, f64)> = Vec::with_capacity(4);
    let mut poisoned = false;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(DataError::RectLine {
                line: i + 1,
                msg: format!("expected two numbers, got `{trimmed}`"),
            });
        }
        let mut xy = [0.0; 2];
        for (slot, p) in xy.iter_mut().zip(&parts) {
            *slot = p.parse::<f64>().map_err(|_| DataError::RectLine {
                line: i + 1,
                msg: format!("`{p}` is not a number"),
            })?;
        }
        poisoned |= !xy[0].is_finite() || !xy[1].is_finite();
        group.push((xy[0], xy[1]));
        if group.len() == 4 {
            if poisoned {
                out.skipped += 1;
            } else {
                let pts = [group[0], group[1], group[2], group[3]];
                out.rects.push(GraspRectangle::from_vertices(&pts));
            }
            group.clear();
            poisoned = false;
        }
    }
    if !group.is_empty() {
        return Err(DataError::TruncatedGroup(group.len()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub id: String,
    pub object_id: String,
    pub depth: DepthImage,
    pub pos_rects: Vec<GraspRectangle>,
    pub neg_rects: Vec<GraspRectangle>,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<SceneRecord>,
    pub skipped_pos: usize,
    pub skipped_neg: usize,
}

impl Dataset {
    pub fn positive_count(&self) -> usize {
        self.records.iter().map(|r| r.pos_rects.len()).sum()
    }

    pub fn negative_count(&self) -> usize {
        self.records.iter().map(|r| r.neg_rects.len()).sum()
    }
}

fn read_text(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn read_optional_rects(path: &Path) -> Result<RectFile, DataError> {
    if path.exists() {
        parse_rect_file(&read_text(path)?)
    } else {
        Ok(RectFile::default())
    }
}

/// Scene ids and object ids from `objects.csv`, or every `<id>d.pgm` /
/// `<id>d.csv` in the directory (each its own object) when the manifest is
/// absent.
fn scene_manifest(root: &Path) -> Result<Vec<(String, String)>, DataError> {
    let manifest = root.join("objects.csv");
    if manifest.exists() {
        let text = read_text(&manifest)?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("scene_id")) {
                continue;
            }
            let (scene, object) = line
                .split_once(',')
                .ok_or_else(|| DataError::Format(format!("objects.csv line {}: expected scene_id,object_id", i + 1)))?;
            out.push((scene.trim().to_string(), object.trim().to_string()));
        }
        return Ok(out);
    }
    let mut ids: Vec<String> = fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_suffix("d.pgm")
                .or_else(|| name.strip_suffix("d.csv"))
                .map(str::to_string)
        })
        .collect();
    ids.sort();
    ids.dedup();
    Ok(ids.into_iter().map(|id| (id.clone(), id)).collect())
}

pub fn load_scene(root: &Path, id: &str, object_id: &str) -> Result<(SceneRecord, usize, usize), DataError> {
    let pgm = root.join(format!("{id}d.pgm"));
    let csv = root.join(format!("{id}d.csv"));
    let depth = if pgm.exists() {
        read_depth_pgm(&fs::read(&pgm).map_err(io_err(&pgm))?)?
    } else if csv.exists() {
        read_depth_csv(&read_text(&csv)?)?
    } else {
        return Err(DataError::MissingDepth(id.to_string()));
    };
    let pos = read_optional_rects(&root.join(format!("{id}cpos.txt")))?;
    let neg = read_optional_rects(&root.join(format!("{id}cneg.txt")))?;
    Ok((
        SceneRecord {
            id: id.to_string(),
            object_id: object_id.to_string(),
            depth,
            pos_rects: pos.rects,
            neg_rects: neg.rects,
        },
        pos.skipped,
        neg.skipped,
    ))
}

/// Loads every scene of a dataset root.
pub fn load_dataset(root: &Path) -> Result<Dataset, DataError> {
    let mut seen = HashSet::new();
    let mut ds = Dataset::default();
    for (id, object) in scene_manifest(root)? {
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateScene(id));
        }
        let (rec, sp, sn) = load_scene(root, &id, &object)?;
        ds.records.push(rec);
        ds.skipped_pos += sp;
        ds.skipped_neg += sn;
    }
    Ok(ds)
}

/// Writes one scene in the dataset layout (depth as PGM).
pub fn write_scene(dir: &Path, rec: &SceneRecord) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let write = |name: String, data: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, data).map_err(io_err(&path))
    };
    write(format!("{}d.pgm", rec.id), &write_depth_pgm(&rec.depth))?;
    write(format!("{}cpos.txt", rec.id), format_rectangles(&rec.pos_rects).as_bytes())?;
    write(format!("{}cneg.txt", rec.id), format_rectangles(&rec.neg_rects).as_bytes())?;
    Ok(())
}

pub fn write_manifest(dir: &Path, records: &[SceneRecord]) -> Result<(), DataError> {
    let mut text = String::from("scene_id,object_id\n");
    for r in records {
        text.push_str(&format!("{},{}\n", r.id, r.object_id));
    }
    let path = dir.join("objects.csv");
    fs::write(&path, text).map_err(io_err(&path))
}

/// Stable 64-bit FNV-1a, used to derive per-record random streams.
pub(crate) fn fnv1a(data: &[u8]) -> u64 {
    data.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

#[cfg(test)]
mod tests {
    use super::*;

    const RECT_60X30: &str = "70 85\n130 85\n130 115\n70 115\n";

    #[test]
    fn parses_axis_aligned_rect() {
        let f = parse_rect_file(RECT_60X30).unwrap();
        assert_eq!(f.rects.len(), 1);
        let r = f.rects[0];
        assert_eq!(r.center, (100.0, 100.0));
        assert_eq!(r.angle, 0.0);
        assert_eq!((r.width, r.height), (60.0, 30.0));
    }

    #[test]
    fn grouping_and_empty() {
        assert_eq!(parse_rect_file("").unwrap(), RectFile::default());
        let two = format!("{RECT_60X30}{RECT_60X30}");
        assert_eq!(parse_rect_file(&two).unwrap().rects.len(), 2);
    }

    #[test]
    fn nan_groups_are_skipped() {
        let text = format!("{RECT_60X30}NaN NaN\n1 2\n3 4\n5 6\n{RECT_60X30}");
        let f = parse_rect_file(&text).unwrap();
        assert_eq!(f.rects.len(), 2);
        assert_eq!(f.skipped, 1);
    }

    #[test]
    fn malformed_files() {
        assert!(matches!(parse_rect_file("1 2\n3 x\n"), Err(DataError::RectLine { line: 2, .. })));
        assert!(matches!(parse_rect_file("1 2 3\n"), Err(DataError::RectLine { line: 1, .. })));
        assert!(matches!(parse_rect_file("1 2\n3 4\n"), Err(DataError::TruncatedGroup(2))));
    }

    #[test]
    fn scene_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let rec = SceneRecord {
            id: "pcd0100".into(),
            object_id: "mug".into(),
            depth: DepthImage::filled(8, 6, 0.65),
            pos_rects: parse_rect_file(RECT_60X30).unwrap().rects,
            neg_rects: vec![],
        };
        write_scene(dir.path(), &rec).unwrap();
        write_manifest(dir.path(), std::slice::from_ref(&rec)).unwrap();
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.records.len(), 1);
        let back = &ds.records[0];
        assert_eq!(back.object_id, "mug");
        assert_eq!(back.depth, rec.depth);
        assert!((back.pos_rects[0].width - 60.0).abs() < 1e-9);

        fs::remove_file(dir.path().join("objects.csv")).unwrap();
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.records[0].object_id, "pcd0100");

        fs::remove_file(dir.path().join("pcd0100d.pgm")).unwrap();
        fs::write(dir.path().join("objects.csv"), "scene_id,object_id\npcd0100,mug\n").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DataError::MissingDepth(_))));
    }
}
