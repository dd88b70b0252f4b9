use serde::{Deserialize, Serialize};

use crate::dataset::{class_count, class_size, AdditionKey};
use crate::error::Result;
use crate::splits::SplitManifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCoverage {
    pub label: u32,
    /// Training keys whose sum is `label`.
    pub train_keys: Vec<AdditionKey>,
    pub class_size: u32,
    pub ratio: f64,
    pub zero: bool,
}

/// How many of each label's combinations the training set contains.
pub fn class_coverage(manifest: &SplitManifest) -> Result<Vec<ClassCoverage>> {
    let n_max = manifest.n_max;
    let mut by_label: Vec<Vec<AdditionKey>> = vec![Vec::new(); class_count(n_max)];
    for key in manifest.train_keys() {
        by_label[key.label() as usize].push(key);
    }
    by_label
        .into_iter()
        .enumerate()
        .map(|(k, train_keys)| {
            let size = class_size(k as u32, n_max)?;
            Ok(ClassCoverage {
                label: k as u32,
                ratio: train_keys.len() as f64 / size as f64,
                zero: train_keys.is_empty(),
                class_size: size,
                train_keys,
            })
        })
        .collect()
}
