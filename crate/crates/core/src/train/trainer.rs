use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dataset::{class_count, AdditionKey, ImageSet};
use crate::error::{Error, Result};
use crate::nn::{backward, forward, infer, init_params, loss_softmax_xent, softmax, argmax, NetworkSpec, Parameters, Tensor};
use crate::rng::{derive_seed, Lane, SplitMix64};
use crate::scalar::Scalar;
use crate::splits::{Role, SplitManifest};

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::optim::Optimizer;
use super::result::{top1, Counters, EpochStats, Prediction, TrialResult};

/// Examples per gradient sub-batch. Fixed so the worker count never changes
/// how a batch is partitioned.
pub const GRAD_CHUNK: usize = 8;
/// Examples per inference batch.
pub const EVAL_BATCH: usize = 64;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub result: TrialResult,
    /// The split this network was trained on.
    pub split: SplitManifest,
}

fn check_compat(spec: &NetworkSpec, set: &ImageSet) -> Result<()> {
    let classes = spec.output_dim()?;
    if classes != class_count(set.n_max) {
        return Err(Error::Precondition(format!(
            "network '{}' has {classes} outputs but N={} needs {}",
            spec.name,
            set.n_max,
            class_count(set.n_max)
        )));
    }
    let [c, h, w] = spec.input;
    let cfg = &set.render_cfg;
    if c != 1 || h != cfg.height as usize || w != cfg.width as usize {
        return Err(Error::Precondition(format!(
            "network input {:?} does not fit {}x{} grayscale images",
            spec.input, cfg.width, cfg.height
        )));
    }
    Ok(())
}

/// Stacks the images of `keys` into a `[B, 1, H, W]` tensor scaled to `[0, 1]`.
fn batch_tensor<T: Scalar>(set: &ImageSet, keys: &[AdditionKey]) -> Result<(Tensor<T>, Vec<usize>)> {
    let (w, h) = (set.render_cfg.width as usize, set.render_cfg.height as usize);
    let scale = T::from_f64_lossy(1.0 / 255.0);
    let mut data = Vec::with_capacity(keys.len() * w * h);
    let mut labels = Vec::with_capacity(keys.len());
    for &key in keys {
        let ex = set.get(key).ok_or(Error::KeyOutOfRange { n: key.n, m: key.m, n_max: set.n_max })?;
        data.extend(ex.image.pixels.iter().map(|&p| T::from_f64_lossy(p as f64) * scale));
        labels.push(ex.label as usize);
    }
    Ok((Tensor::new(vec![keys.len(), 1, h, w], data)?, labels))
}

struct ChunkOut<T> {
    grads: Parameters<T>,
    loss_sum: f64,
    correct: usize,
}

fn chunk_gradient<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    set: &ImageSet,
    keys: &[AdditionKey],
    batch_len: usize,
) -> Result<ChunkOut<T>> {
    let (x, labels) = batch_tensor::<T>(set, keys)?;
    let (logits, cache) = forward(spec, params, &x)?;
    let (loss, mut dlogits) = loss_softmax_xent(&logits, &labels)?;
    // Rescale the chunk mean to a share of the full batch mean.
    let share = T::from_f64_lossy(keys.len() as f64 / batch_len as f64);
    dlogits.data_mut().iter_mut().for_each(|g| *g *= share);
    let correct = labels.iter().enumerate().filter(|&(i, &l)| argmax(logits.row(i)) == l).count();
    Ok(ChunkOut {
        grads: backward(spec, params, &cache, &dlogits)?,
        loss_sum: loss.to_f64_lossy() * keys.len() as f64,
        correct,
    })
}

fn merge<T: Scalar>(mut a: ChunkOut<T>, b: ChunkOut<T>) -> ChunkOut<T> {
    a.grads.add_assign(&b.grads);
    a.loss_sum += b.loss_sum;
    a.correct += b.correct;
    a
}

/// Trains from a fresh initialization, then predicts every key of the set.
pub fn train(spec: &NetworkSpec, set: &ImageSet, split: &SplitManifest, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_as::<f32>(spec, set, split, cfg)
}

pub fn train_as<T: Scalar>(
    spec: &NetworkSpec,
    set: &ImageSet,
    split: &SplitManifest,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_compat(spec, set)?;
    if split.n_max != set.n_max {
        return Err(Error::Precondition(format!("split is for N={}, image set for N={}", split.n_max, set.n_max)));
    }
    let mut train_keys = split.train_keys();
    if train_keys.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }

    let mut params: Parameters<T> = init_params(spec, cfg.seed)?;
    let mut opt = Optimizer::new(&cfg.optimizer, &params);
    let mut shuffle_rng = SplitMix64::lane(cfg.seed, Lane::Shuffle);
    let mut counters = Counters::default();
    let mut history = Vec::new();
    let mut streak = 0;

    for epoch in 1..=cfg.epochs {
        shuffle_rng.shuffle(&mut train_keys);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (bi, batch) in train_keys.chunks(cfg.batch_size).enumerate() {
            let leaked = batch.iter().filter(|&&k| split.role(k) != Role::Train).count() as u64;
            counters.test_examples_seen += leaked;
            counters.examples_seen += batch.len() as u64;

            let chunks: Vec<&[AdditionKey]> = batch.chunks(GRAD_CHUNK).collect();
            let params_ref = &params;
            let run = |keys: &&[AdditionKey]| chunk_gradient(spec, params_ref, set, keys, batch.len());
            let out = if cfg.deterministic {
                let parts = chunks.par_iter().map(run).collect::<Result<Vec<_>>>()?;
                parts.into_iter().reduce(merge).expect("batch is non-empty")
            } else {
                chunks.par_iter().map(run).try_reduce_with(|a, b| Ok(merge(a, b))).expect("batch is non-empty")?
            };
            let batch_loss = out.loss_sum / batch.len() as f64;
            if !batch_loss.is_finite() || !out.grads.all_finite() {
                return Err(Error::Diverged { epoch, batch: bi, loss: batch_loss });
            }
            opt.step(&mut params, &out.grads);
            loss_sum += out.loss_sum;
            correct += out.correct;
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / train_keys.len() as f64,
            train_acc: correct as f64 / train_keys.len() as f64,
        };
        history.push(stats);
        if let Some(stop) = cfg.early_stop {
            streak = if stats.train_acc >= stop.train_acc_target { streak + 1 } else { 0 };
            if streak >= stop.patience.max(1) {
                break;
            }
        }
    }

    let epochs_run = history.len();
    let keys: Vec<AdditionKey> = set.keys().collect();
    let predictions = predict_keys(spec, &params, set, &keys, Some(split))?;
    let checkpoint = Checkpoint {
        spec: spec.clone(),
        params: params.cast::<f32>(),
        n_max: set.n_max,
        render_digest: set.digest(),
        train_config_digest: cfg.digest(),
        epoch: epochs_run,
    };
    let result = TrialResult {
        trial: 0,
        seed: cfg.seed,
        n_max: set.n_max,
        protocol: split.protocol.name().to_string(),
        train_count: split.train_count(),
        test_count: split.test_count(),
        epochs_run,
        train_top1: top1(&predictions, Role::Train).unwrap_or(0.0),
        test_top1: top1(&predictions, Role::Test),
        epoch_history: history,
        deterministic: cfg.deterministic,
        counters,
        predictions,
    };
    Ok(TrainOutcome { checkpoint, result, split: split.clone() })
}

fn prob_digest(probs: &[f32]) -> String {
    let mut h = Sha256::new();
    for p in probs {
        h.update(p.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Class probabilities (f32) for each key, in key order.
pub fn probabilities<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    set: &ImageSet,
    keys: &[AdditionKey],
) -> Result<Vec<Vec<f32>>> {
    let batches = keys
        .par_chunks(EVAL_BATCH)
        .map(|chunk| {
            let (x, _) = batch_tensor::<T>(set, chunk)?;
            let logits = infer(spec, params, &x)?;
            Ok((0..chunk.len())
                .map(|i| softmax(logits.row(i)).into_iter().map(|p| p.to_f64_lossy() as f32).collect())
                .collect::<Vec<Vec<f32>>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(batches.into_iter().flatten().collect())
}

fn predict_keys<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    set: &ImageSet,
    keys: &[AdditionKey],
    split: Option<&SplitManifest>,
) -> Result<Vec<Prediction>> {
    let probs = probabilities(spec, params, set, keys)?;
    Ok(keys
        .iter()
        .zip(probs)
        .map(|(&key, p)| {
            let predicted = argmax(&p);
            Prediction {
                key,
                role: split.map(|s| s.role(key)),
                label: key.label(),
                predicted: predicted as u32,
                p_top1: p[predicted],
                prob_digest: prob_digest(&p),
            }
        })
        .collect())
}

/// Ensures a checkpoint was trained on exactly this rendered set.
pub fn check_checkpoint_set(ckpt: &Checkpoint, set: &ImageSet) -> Result<()> {
    if ckpt.n_max != set.n_max {
        return Err(Error::SetMismatch(format!("checkpoint N={}, image set N={}", ckpt.n_max, set.n_max)));
    }
    let digest = set.digest();
    if ckpt.render_digest != digest {
        return Err(Error::SetMismatch(format!(
            "checkpoint was trained on render {}, image set is {}",
            &ckpt.render_digest[..ckpt.render_digest.len().min(12)],
            &digest[..12]
        )));
    }
    check_compat(&ckpt.spec, set)
}

/// Predicts `keys` with a saved network; roles are filled in when a split is given.
pub fn evaluate(
    ckpt: &Checkpoint,
    set: &ImageSet,
    keys: &[AdditionKey],
    split: Option<&SplitManifest>,
) -> Result<Vec<Prediction>> {
    if keys.is_empty() {
        return Err(Error::EmptyKeySet);
    }
    check_checkpoint_set(ckpt, set)?;
    if let Some(&bad) = keys.iter().find(|k| !k.in_range(set.n_max)) {
        return Err(Error::KeyOutOfRange { n: bad.n, m: bad.m, n_max: set.n_max });
    }
    predict_keys(&ckpt.spec, &ckpt.params, set, keys, split)
}

/// Runs `trials` independent trainings. Trial `t` uses seed
/// `derive_seed(cfg.seed, t)` for initialization, shuffling and, when the
/// protocol is randomized, a fresh split.
pub fn run_trials(
    spec: &NetworkSpec,
    set: &ImageSet,
    template: &SplitManifest,
    cfg: &TrainConfig,
    trials: usize,
) -> Result<Vec<TrainOutcome>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(cfg.seed, t as u64);
            let split = if template.protocol.is_randomized() {
                template.protocol.apply(template.n_max, seed)?
            } else {
                template.clone()
            };
            let trial_cfg = TrainConfig { seed, ..cfg.clone() };
            let mut out = train(spec, set, &split, &trial_cfg)?;
            out.result.trial = t;
            Ok(out)
        })
        .collect()
}
