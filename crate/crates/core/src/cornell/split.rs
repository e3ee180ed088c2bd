use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, SceneRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitMode {
    /// Image-wise: records shuffled and dealt round-robin.
    ImageWise,
    /// Object-wise: objects shuffled and dealt round-robin, each taking all
    /// of its records into one fold.
    ObjectWise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub mode: SplitMode,
    pub folds: usize,
    /// Record id → fold index.
    pub assignment: BTreeMap<String, usize>,
}

impl DatasetSplit {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Indices into `records` of (training, validation) for one fold.
    pub fn partition(&self, records: &[SceneRecord], fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..records.len()).partition(|&i| self.fold_of(&records[i].id) != Some(fold))
    }
}

pub fn make_splits(records: &[SceneRecord], mode: SplitMode, folds: usize, rng_seed: u64) -> Result<DatasetSplit, DataError> {
    if folds < 2 {
        return Err(DataError::TooFewFolds);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut assignment = BTreeMap::new();
    match mode {
        SplitMode::ImageWise => {
            let mut ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
            ids.shuffle(&mut rng);
            for (i, id) in ids.into_iter().enumerate() {
                assignment.insert(id.to_string(), i % folds);
            }
        }
        SplitMode::ObjectWise => {
            let objects: BTreeSet<&str> = records.iter().map(|r| r.object_id.as_str()).collect();
            if objects.len() < folds {
                return Err(DataError::TooFewObjects { objects: objects.len(), folds });
            }
            let mut objects: Vec<&str> = objects.into_iter().collect();
            objects.shuffle(&mut rng);
            let fold_of: BTreeMap<&str, usize> = objects.into_iter().enumerate().map(|(i, o)| (o, i % folds)).collect();
            for r in records {
                assignment.insert(r.id.clone(), fold_of[r.object_id.as_str()]);
            }
        }
    }
    Ok(DatasetSplit { mode, folds, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cornell::DepthImage;

    fn records(n: usize, objects: usize) -> Vec<SceneRecord> {
        (0..n)
            .map(|i| SceneRecord {
                id: format!("pcd{i:04}"),
                object_id: format!("obj{}", i % objects),
                depth: DepthImage::filled(2, 2, 0.5),
                pos_rects: vec![],
                neg_rects: vec![],
            })
            .collect()
    }

    #[test]
    fn image_wise_is_balanced() {
        let s = make_splits(&records(10, 10), SplitMode::ImageWise, 5, 1).unwrap();
        assert_eq!(s.fold_sizes(), vec![2; 5]);
        let (train, val) = s.partition(&records(10, 10), 3);
        assert_eq!((train.len(), val.len()), (8, 2));
    }

    #[test]
    fn object_wise_keeps_objects_together() {
        let recs = records(40, 7);
        let s = make_splits(&recs, SplitMode::ObjectWise, 5, 3).unwrap();
        let mut fold_of_object = BTreeMap::new();
        for r in &recs {
            let f = s.fold_of(&r.id).unwrap();
            assert_eq!(*fold_of_object.entry(r.object_id.clone()).or_insert(f), f);
        }
        assert!(s.fold_sizes().iter().all(|&n| n > 0));
    }

    #[test]
    fn deterministic_per_seed() {
        let recs = records(30, 6);
        let a = make_splits(&recs, SplitMode::ImageWise, 5, 7).unwrap();
        assert_eq!(a, make_splits(&recs, SplitMode::ImageWise, 5, 7).unwrap());
        assert_ne!(a, make_splits(&recs, SplitMode::ImageWise, 5, 8).unwrap());
    }

    #[test]
    fn errors() {
        assert_eq!(make_splits(&records(4, 4), SplitMode::ImageWise, 1, 0), Err(DataError::TooFewFolds));
        assert!(matches!(
            make_splits(&records(10, 3), SplitMode::ObjectWise, 5, 0),
            Err(DataError::TooFewObjects { objects: 3, folds: 5 })
        ));
    }
}
