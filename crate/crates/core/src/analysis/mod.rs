//! Learning maps, error histograms, carry-loss tables, probability probes,
//! class-coverage audits and training-fraction sweeps.

mod coverage;
mod errors;
mod map;
mod probe;
mod sweep;

pub use coverage::{class_coverage, ClassCoverage};
pub use errors::{carry_loss_report, error_histogram, CarryReport, ErrorHistogram};
pub use map::{learning_map, render_map, write_map, CellCounts, CellState, LearningMap, DEFAULT_CELL_SIZE};
pub use probe::{probe, ProbeReport};
pub use sweep::{find_min_fraction, sweep_train_fraction, sweep_csv, SplitFamily, SweepRow};

use crate::dataset::AdditionKey;
use crate::error::{Error, Result};
use crate::train::{Prediction, TrialResult};

/// Predictions of `trial` indexed by `key.index(n_max)`, requiring exactly one per key of Ω.
fn indexed(trial: &TrialResult) -> Result<Vec<&Prediction>> {
    let n_max = trial.n_max;
    let omega = ((n_max + 1) * (n_max + 1)) as usize;
    let mut slots: Vec<Option<&Prediction>> = vec![None; omega];
    for p in &trial.predictions {
        if !p.key.in_range(n_max) {
            return Err(Error::CoverageMismatch(format!("key {} outside Ω for N={n_max}", p.key)));
        }
        let slot = &mut slots[p.key.index(n_max)];
        if slot.is_some() {
            return Err(Error::CoverageMismatch(format!("key {} predicted twice", p.key)));
        }
        *slot = Some(p);
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.ok_or_else(|| {
                let k = AdditionKey::new(i as u32 / (n_max + 1), i as u32 % (n_max + 1));
                Error::CoverageMismatch(format!("no prediction for {k}"))
            })
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::dataset::{all_keys, AdditionKey};
    use crate::splits::SplitManifest;
    use crate::train::{top1, Counters, Prediction, TrialResult};
    use crate::Role;

    /// A trial over Ω that predicts the true label except at the listed keys.
    pub fn trial(manifest: &SplitManifest, wrong: &[((u32, u32), u32)]) -> TrialResult {
        let n_max = manifest.n_max;
        let predictions: Vec<Prediction> = all_keys(n_max)
            .map(|key| {
                let predicted = wrong.iter().find(|(k, _)| AdditionKey::new(k.0, k.1) == key).map_or(key.label(), |w| w.1);
                Prediction {
                    key,
                    role: Some(manifest.role(key)),
                    label: key.label(),
                    predicted,
                    p_top1: 1.0,
                    prob_digest: String::new(),
                }
            })
            .collect();
        TrialResult {
            trial: 0,
            seed: 0,
            n_max,
            protocol: manifest.protocol.name().into(),
            train_count: manifest.train_count(),
            test_count: manifest.test_count(),
            epochs_run: 1,
            train_top1: top1(&predictions, Role::Train).unwrap_or(0.0),
            test_top1: top1(&predictions, Role::Test),
            epoch_history: vec![],
            deterministic: true,
            counters: Counters::default(),
            predictions,
        }
    }
}
