use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{AdditionKey, ImageSet};
use crate::error::{Error, Result};
use crate::train::{check_checkpoint_set, probabilities, Checkpoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub key: AdditionKey,
    pub label: u32,
    pub predicted: u32,
    /// 1-based position of the true label in `ranked`.
    pub true_rank: usize,
    /// Every class with its probability, highest first (ties: lower class first).
    pub ranked: Vec<(u32, f32)>,
    pub prob_sum: f64,
}

impl ProbeReport {
    /// The first `k` `(class, probability)` rows as text.
    pub fn table(&self, k: usize) -> String {
        let mut out = format!("{} = {} (true rank {})\n", self.key, self.label, self.true_rank);
        for (c, p) in self.ranked.iter().take(k) {
            let _ = writeln!(out, "({c}, {p:.5})");
        }
        out
    }
}

pub fn probe(ckpt: &Checkpoint, set: &ImageSet, key: AdditionKey) -> Result<ProbeReport> {
    if !key.in_range(set.n_max) {
        return Err(Error::KeyOutOfRange { n: key.n, m: key.m, n_max: set.n_max });
    }
    check_checkpoint_set(ckpt, set)?;
    let probs = probabilities(&ckpt.spec, &ckpt.params, set, &[key])?.pop().expect("one key in, one row out");
    let mut ranked: Vec<(u32, f32)> = probs.iter().enumerate().map(|(c, &p)| (c as u32, p)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let label = key.label();
    let true_rank = ranked.iter().position(|&(c, _)| c == label).expect("label is a class") + 1;
    Ok(ProbeReport {
        key,
        label,
        predicted: ranked[0].0,
        true_rank,
        prob_sum: probs.iter().map(|&p| p as f64).sum(),
        ranked,
    })
}
