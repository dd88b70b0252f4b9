use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::AdditionKey;
use crate::error::{Error, Result};
use crate::splits::Role;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub key: AdditionKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    pub label: u32,
    pub predicted: u32,
    pub p_top1: f32,
    /// First 16 hex digits of the SHA-256 of the f32 LE probability vector.
    pub prob_digest: String,
}

impl Prediction {
    pub fn correct(&self) -> bool {
        self.label == self.predicted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
}

/// How many examples of each role the optimizer consumed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub examples_seen: u64,
    pub test_examples_seen: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub n_max: u32,
    pub protocol: String,
    pub train_count: usize,
    pub test_count: usize,
    pub epochs_run: usize,
    pub train_top1: f64,
    /// `None` when the split has no test keys.
    pub test_top1: Option<f64>,
    pub epoch_history: Vec<EpochStats>,
    pub deterministic: bool,
    pub counters: Counters,
    pub predictions: Vec<Prediction>,
}

/// Top-1 accuracy over predictions with the given role, `None` if there are none.
pub fn top1(predictions: &[Prediction], role: Role) -> Option<f64> {
    let (hit, total) = predictions
        .iter()
        .filter(|p| p.role == Some(role))
        .fold((0usize, 0usize), |(h, t), p| (h + p.correct() as usize, t + 1));
    (total > 0).then(|| hit as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub mean_test_top1: Option<f64>,
    pub min_test_top1: Option<f64>,
    pub max_test_top1: Option<f64>,
    pub mean_train_top1: f64,
}

pub fn summarize(results: &[TrialResult]) -> Result<TrialSummary> {
    let first = results.first().ok_or_else(|| Error::InconsistentTrials("no trials".into()))?;
    if let Some(bad) = results.iter().find(|r| r.n_max != first.n_max || r.protocol != first.protocol) {
        return Err(Error::InconsistentTrials(format!(
            "trial {} ({} N={}) differs from trial {} ({} N={})",
            bad.trial, bad.protocol, bad.n_max, first.trial, first.protocol, first.n_max
        )));
    }
    let tests: Vec<f64> = results.iter().filter_map(|r| r.test_top1).collect();
    let n = results.len() as f64;
    Ok(TrialSummary {
        trials: results.len(),
        mean_test_top1: (!tests.is_empty()).then(|| tests.iter().sum::<f64>() / tests.len() as f64),
        min_test_top1: tests.iter().copied().reduce(f64::min),
        max_test_top1: tests.iter().copied().reduce(f64::max),
        mean_train_top1: results.iter().map(|r| r.train_top1).sum::<f64>() / n,
    })
}

fn fmt_acc(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |a| format!("{a:.6}"))
}

/// One row per trial: `trial,seed,epochs_run,train_top1,test_top1`.
pub fn trials_csv(results: &[TrialResult]) -> String {
    let mut out = String::from("trial,seed,epochs_run,train_top1,test_top1\n");
    for r in results {
        let _ = writeln!(out, "{},{},{},{:.6},{}", r.trial, r.seed, r.epochs_run, r.train_top1, fmt_acc(r.test_top1));
    }
    out
}

/// One row per key: `n,m,role,label,predicted,p_top1,prob_digest`.
pub fn predictions_csv(predictions: &[Prediction]) -> String {
    let mut out = String::from("n,m,role,label,predicted,p_top1,prob_digest\n");
    for p in predictions {
        let role = match p.role {
            Some(Role::Train) => "train",
            Some(Role::Test) => "test",
            None => "NA",
        };
        let _ = writeln!(
            out,
            "{},{},{role},{},{},{:.6},{}",
            p.key.n, p.key.m, p.label, p.predicted, p.p_top1, p.prob_digest
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(n: u32, m: u32, role: Role, predicted: u32) -> Prediction {
        Prediction {
            key: AdditionKey::new(n, m),
            role: Some(role),
            label: n + m,
            predicted,
            p_top1: 0.5,
            prob_digest: "00".into(),
        }
    }

    fn result(trial: usize, test: Option<f64>) -> TrialResult {
        TrialResult {
            trial,
            seed: trial as u64,
            n_max: 3,
            protocol: "uniform_random".into(),
            train_count: 10,
            test_count: 6,
            epochs_run: 4,
            train_top1: 1.0,
            test_top1: test,
            epoch_history: vec![],
            deterministic: true,
            counters: Counters::default(),
            predictions: vec![],
        }
    }

    #[test]
    fn accuracy_by_role() {
        let p = vec![pred(1, 1, Role::Train, 2), pred(1, 2, Role::Test, 3), pred(2, 1, Role::Test, 4)];
        assert_eq!(top1(&p, Role::Train), Some(1.0));
        assert_eq!(top1(&p, Role::Test), Some(0.5));
        assert_eq!(top1(&p[..1], Role::Test), None);
    }

    #[test]
    fn csv_marks_missing_test_accuracy() {
        let csv = trials_csv(&[result(0, Some(0.25)), result(1, None)]);
        assert_eq!(csv.lines().nth(1), Some("0,0,4,1.000000,0.250000"));
        assert_eq!(csv.lines().nth(2), Some("1,1,4,1.000000,NA"));
    }

    #[test]
    fn summary_and_consistency() {
        let s = summarize(&[result(0, Some(0.2)), result(1, Some(0.6)), result(2, None)]).unwrap();
        assert!((s.mean_test_top1.unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(s.min_test_top1, Some(0.2));
        assert_eq!(s.max_test_top1, Some(0.6));
        let mut other = result(3, None);
        other.n_max = 4;
        assert!(matches!(summarize(&[result(0, None), other]), Err(Error::InconsistentTrials(_))));
        assert!(summarize(&[]).is_err());
    }
}
