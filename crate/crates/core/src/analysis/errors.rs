use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::class_count;
use crate::error::{Error, Result};
use crate::splits::Role;
use crate::train::TrialResult;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub n_max: u32,
    /// Wrong test predictions per true label, summed over trials.
    pub counts: Vec<u64>,
    pub trials: usize,
}

impl ErrorHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `label,count` rows for every label.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,count\n");
        for (label, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{label},{c}");
        }
        out
    }
}

pub fn error_histogram(trials: &[TrialResult]) -> Result<ErrorHistogram> {
    let first = trials.first().ok_or_else(|| Error::InconsistentTrials("no trials".into()))?;
    let mut counts = vec![0u64; class_count(first.n_max)];
    for t in trials {
        if t.n_max != first.n_max || t.protocol != first.protocol || t.test_count != first.test_count {
            return Err(Error::InconsistentTrials(format!(
                "trial {} ({}, N={}, |Ψ|={}) does not match trial {} ({}, N={}, |Ψ|={})",
                t.trial, t.protocol, t.n_max, t.test_count, first.trial, first.protocol, first.n_max, first.test_count
            )));
        }
        for p in super::indexed(t)? {
            if p.role == Some(Role::Test) && !p.correct() {
                counts[p.label as usize] += 1;
            }
        }
    }
    Ok(ErrorHistogram { n_max: first.n_max, counts, trials: trials.len() })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarryReport {
    pub total_errors: u64,
    /// `predicted − true` → count over wrong test predictions.
    pub diff_histogram: BTreeMap<i64, u64>,
    pub lost_ten: u64,
}

impl CarryReport {
    /// `diff,count` rows in ascending order of difference.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("diff,count\n");
        for (d, c) in &self.diff_histogram {
            let _ = writeln!(out, "{d},{c}");
        }
        out
    }
}

pub fn carry_loss_report(trial: &TrialResult) -> CarryReport {
    let mut report = CarryReport::default();
    for p in trial.predictions.iter().filter(|p| p.role == Some(Role::Test) && !p.correct()) {
        *report.diff_histogram.entry(p.predicted as i64 - p.label as i64).or_default() += 1;
        report.total_errors += 1;
    }
    report.lost_ten = report.diff_histogram.get(&-10).copied().unwrap_or(0);
    report
}
