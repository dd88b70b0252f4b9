use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::ImageSet;
use crate::error::{Error, Result};
use crate::nn::NetworkSpec;
use crate::splits::SplitProtocol;
use crate::train::{run_trials, summarize, TrainConfig};

/// Split protocols parameterized by a training fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitFamily {
    Commutativity,
    RandomPair,
    UniformRandom,
}

impl SplitFamily {
    pub fn protocol(self, train_fraction: f64) -> SplitProtocol {
        match self {
            SplitFamily::Commutativity => SplitProtocol::Commutativity { train_fraction },
            SplitFamily::RandomPair => SplitProtocol::RandomPair { train_fraction },
            SplitFamily::UniformRandom => SplitProtocol::UniformRandom { test_fraction: 1.0 - train_fraction },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    /// Realized |Φ|/|Ω| and |Ψ|/|Ω| of the first trial's split.
    pub train_share: f64,
    pub test_share: f64,
    pub trials: usize,
    pub mean_test_top1: Option<f64>,
}

/// Trains `trials` networks at each training fraction.
pub fn sweep_train_fraction(
    set: &ImageSet,
    family: SplitFamily,
    fractions: &[f64],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    trials: usize,
) -> Result<Vec<SweepRow>> {
    if fractions.is_empty() {
        return Err(Error::InvalidArgument("no fractions to sweep".into()));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!("fractions must be strictly ascending: {fractions:?}")));
    }
    let templates = fractions
        .iter()
        .map(|&f| family.protocol(f).apply(set.n_max, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let omega = set.len() as f64;
    fractions
        .iter()
        .zip(&templates)
        .map(|(&fraction, template)| {
            let outs = run_trials(spec, set, template, cfg, trials)?;
            let results: Vec<_> = outs.into_iter().map(|o| o.result).collect();
            let summary = summarize(&results)?;
            Ok(SweepRow {
                fraction,
                train_share: results[0].train_count as f64 / omega,
                test_share: results[0].test_count as f64 / omega,
                trials,
                mean_test_top1: summary.mean_test_top1,
            })
        })
        .collect()
}

/// Smallest swept fraction whose mean test accuracy reaches `target`.
pub fn find_min_fraction(rows: &[SweepRow], target: f64) -> Option<f64> {
    rows.iter().find(|r| r.mean_test_top1.is_some_and(|a| a >= target)).map(|r| r.fraction)
}

/// `fraction,train_share,test_share,trials,mean_test_top1` with `NA` for an empty test set.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("fraction,train_share,test_share,trials,mean_test_top1\n");
    for r in rows {
        let acc = r.mean_test_top1.map_or_else(|| "NA".to_string(), |a| format!("{a:.6}"));
        let _ = writeln!(out, "{},{:.6},{:.6},{},{acc}", r.fraction, r.train_share, r.test_share, r.trials);
    }
    out
}
