//! Seeded train/test splitting. A split is a shuffle followed by a cut;
//! subset mode subsamples the training side only, leaving the test side
//! untouched so evaluation keeps the realistic distribution.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DataError;

/// Splits `0..n` into (train, test) index sets with `round(n * fraction)`
/// training examples. Both sides are returned sorted; membership is fully
/// determined by `(n, fraction, seed)`.
pub fn split_indices(
    n: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Config(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(DataError::Config(format!(
            "split of {n} examples at fraction {train_fraction} leaves an empty side"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut train = indices[..n_train].to_vec();
    let mut test = indices[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Keeps a random `fraction` of the given (training) indices.
pub fn subset_indices(
    indices: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<Vec<usize>, DataError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DataError::Config(format!(
            "subset fraction must be in (0, 1], got {fraction}"
        )));
    }
    let keep = (indices.len() as f64 * fraction).round() as usize;
    if keep == 0 {
        return Err(DataError::Config(format!(
            "subset fraction {fraction} keeps no examples of {}",
            indices.len()
        )));
    }
    let mut shuffled = indices.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let mut kept = shuffled[..keep].to_vec();
    kept.sort_unstable();
    Ok(kept)
}
