use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Max-subtracted softmax of one logit row.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean softmax cross-entropy over the batch and its gradient `(softmax − onehot) / B`.
pub fn loss_softmax_xent<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let [b, c] = logits.shape() else {
        return Err(Error::InvalidArgument(format!("logits must be rank 2, got {:?}", logits.shape())));
    };
    let (b, c) = (*b, *c);
    if labels.len() != b {
        return Err(Error::InvalidArgument(format!("{} labels for batch of {b}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::LabelOutOfRange { label: bad as u32, max: c as u32 - 1 });
    }
    let inv_b = T::one() / T::from_usize(b).expect("batch fits");
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(b * c);
    for (s, &label) in labels.iter().enumerate() {
        let row = logits.row(s);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - row[label];
        for (j, &z) in row.iter().enumerate() {
            let p = (z - lse).exp();
            let target = if j == label { T::one() } else { T::zero() };
            grad.push((p - target) * inv_b);
        }
    }
    Ok((total * inv_b, Tensor::new(vec![b, c], grad)?))
}

/// Top-`k` `(class, probability)` pairs, highest first; ties go to the lower class.
pub fn predict_topk<T: Scalar>(logits: &[T], k: usize) -> Result<Vec<(usize, T)>> {
    if k == 0 || k > logits.len() {
        return Err(Error::InvalidArgument(format!("k={k} outside 1..={}", logits.len())));
    }
    let probs = softmax(logits);
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    Ok(idx.into_iter().take(k).map(|i| (i, probs[i])).collect())
}

/// Index of the largest logit, lowest index on ties.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
