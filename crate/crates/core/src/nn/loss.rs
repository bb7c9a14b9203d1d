//! Binary cross-entropy over per-class sigmoid probabilities, paired with
//! one-hot label vectors. The mean is taken over classes and over the
//! batch so loss magnitudes stay comparable across label-set sizes.

use crate::autodiff::{Graph, NodeId, Real};
use crate::error::CoreError;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the
/// logs so a saturated sigmoid cannot produce an infinite loss.
pub const PROB_CLAMP: f64 = 1e-7;

/// BCE between a probability vector and a one-hot target:
/// mean over classes of `-(y*ln p + (1-y)*ln(1-p))`.
pub fn bce_loss<T: Real>(probs: &[T], target: &[T]) -> Result<T, CoreError> {
    if probs.len() != target.len() {
        return Err(CoreError::Config(format!(
            "bce_loss: {} probabilities vs {} targets",
            probs.len(),
            target.len()
        )));
    }
    let mut ones = 0usize;
    for &t in target {
        if t == T::ONE {
            ones += 1;
        } else if t != T::ZERO {
            return Err(CoreError::Config(
                "bce_loss: target is not one-hot (entry neither 0 nor 1)".to_string(),
            ));
        }
    }
    if ones != 1 {
        return Err(CoreError::Config(format!(
            "bce_loss: target is not one-hot ({ones} entries set)"
        )));
    }

    let lo = T::from_f64(PROB_CLAMP);
    let hi = T::ONE - lo;
    let mut total = T::ZERO;
    for (&p, &y) in probs.iter().zip(target) {
        let p = if p < lo {
            lo
        } else if p > hi {
            hi
        } else {
            p
        };
        total += -(y * p.ln() + (T::ONE - y) * (T::ONE - p).ln());
    }
    Ok(total / T::from_f64(probs.len() as f64))
}

/// Graph version over `[batch, classes]` probabilities and a constant
/// one-hot target leaf of the same shape; scalar mean over all entries.
pub fn bce_node<T: Real>(
    g: &mut Graph<T>,
    probs: NodeId,
    target: NodeId,
) -> Result<NodeId, CoreError> {
    let lo = T::from_f64(PROB_CLAMP);
    let hi = T::ONE - lo;
    let p = g.clamp(probs, lo, hi)?;

    let ln_p = g.ln(p)?;
    let pos = g.mul(target, ln_p)?;

    let neg_p = g.scale(p, -T::ONE)?;
    let one_minus_p = g.add_scalar(neg_p, T::ONE)?;
    let ln_q = g.ln(one_minus_p)?;
    let neg_y = g.scale(target, -T::ONE)?;
    let one_minus_y = g.add_scalar(neg_y, T::ONE)?;
    let neg = g.mul(one_minus_y, ln_q)?;

    let sum = g.add(pos, neg)?;
    let mean = g.mean_all(sum)?;
    Ok(g.scale(mean, -T::ONE)?)
}
