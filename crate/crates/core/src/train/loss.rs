//! Pixel-summed binary cross-entropy and its batch mean.

use crate::autodiff::LOG_CLAMP;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn check_pair<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("bce", pred.shape(), target.shape()));
    }
    if let Some(i) = target.data().iter().position(|&y| y != T::zero() && y != T::one()) {
        return Err(Error::invalid(format!(
            "bce: target element {i} is {}, expected 0 or 1",
            target.data()[i]
        )));
    }
    Ok(())
}

/// Cross-entropy summed over all pixels of each image, one value per batch
/// item. Log arguments are clamped at `1e-12`.
pub fn bce_values<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Vec<T>> {
    check_pair(pred, target)?;
    let s = pred.shape();
    let per_image = s.c * s.plane();
    let lo = T::from_f64(LOG_CLAMP);
    Ok(pred
        .data()
        .chunks(per_image.max(1))
        .zip(target.data().chunks(per_image.max(1)))
        .take(s.n)
        .map(|(p, y)| {
            p.iter().zip(y).fold(T::zero(), |acc, (&pv, &yv)| {
                acc - (yv * pv.max(lo).ln() + (T::one() - yv) * (T::one() - pv).max(lo).ln())
            })
        })
        .collect())
}

/// Cross-entropy of a single-image pair.
pub fn bce<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    let values = bce_values(pred, target)?;
    Ok(values.into_iter().fold(T::zero(), |a, v| a + v))
}

/// Mean of the per-image cross-entropies over every image in `batch`.
pub fn batch_loss<T: Scalar>(batch: &[(Tensor<T>, Tensor<T>)]) -> Result<T> {
    let mut values = Vec::new();
    for (pred, target) in batch {
        values.extend(bce_values(pred, target)?);
    }
    if values.is_empty() {
        return Err(Error::invalid("batch_loss: empty batch"));
    }
    let n = T::from_f64(values.len() as f64);
    Ok(values.into_iter().fold(T::zero(), |a, v| a + v) / n)
}
