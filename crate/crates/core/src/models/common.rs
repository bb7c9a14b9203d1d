use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Tensor};
use crate::data::{Corpus, LabelHierarchy};
use crate::error::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    Bilstm,
    Cvae,
    Hcvae,
    UpperBound,
}

impl ModelVariant {
    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Bilstm => "bilstm",
            ModelVariant::Cvae => "cvae",
            ModelVariant::Hcvae => "hcvae",
            ModelVariant::UpperBound => "upper-bound",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CoreError> {
        match s {
            "bilstm" => Ok(ModelVariant::Bilstm),
            "cvae" => Ok(ModelVariant::Cvae),
            "hcvae" => Ok(ModelVariant::Hcvae),
            "upper-bound" => Ok(ModelVariant::UpperBound),
            other => Err(CoreError::Config(format!("unknown model variant {other:?}"))),
        }
    }

    /// Whether training (and, for the upper bound, testing) consumes the
    /// category label.
    pub fn needs_category(self) -> bool {
        matches!(self, ModelVariant::Hcvae | ModelVariant::UpperBound)
    }

    /// Number of `[batch, latent]` standard-normal draws per training
    /// step: the HCVAE samples its basic, category, group, and prior-side
    /// category latents; the CVAE samples one posterior latent.
    pub fn train_noise_count(self) -> usize {
        match self {
            ModelVariant::Hcvae => 4,
            ModelVariant::Cvae => 1,
            _ => 0,
        }
    }

    /// Number of per-example draws in `sample`-mode prediction.
    pub fn predict_noise_count(self) -> usize {
        match self {
            ModelVariant::Hcvae => 3,
            ModelVariant::Cvae => 1,
            _ => 0,
        }
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Test-time latent handling: `mean` substitutes each Gaussian's mean
/// (deterministic reporting); `sample` draws latents as the training/test
/// procedure literally specifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMode {
    Mean,
    Sample,
}

impl TestMode {
    pub fn name(self) -> &'static str {
        match self {
            TestMode::Mean => "mean",
            TestMode::Sample => "sample",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CoreError> {
        match s {
            "mean" => Ok(TestMode::Mean),
            "sample" => Ok(TestMode::Sample),
            other => Err(CoreError::Config(format!("unknown test mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub latent: usize,
    pub mlp_hidden: usize,
    pub categories: usize,
    pub groups: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<(), CoreError> {
        for (name, v) in [
            ("vocab", self.vocab),
            ("embed", self.embed),
            ("hidden", self.hidden),
            ("latent", self.latent),
            ("mlp_hidden", self.mlp_hidden),
            ("categories", self.categories),
            ("groups", self.groups),
        ] {
            if v == 0 {
                return Err(CoreError::Config(format!("dimension {name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One training batch: token-id sequences plus labels.
#[derive(Debug, Clone)]
pub struct Batch {
    pub seqs: Vec<Vec<usize>>,
    pub cats: Vec<Option<usize>>,
    pub groups: Vec<usize>,
}

impl Batch {
    pub fn from_corpus(corpus: &Corpus, indices: &[usize]) -> Batch {
        let mut seqs = Vec::with_capacity(indices.len());
        let mut cats = Vec::with_capacity(indices.len());
        let mut groups = Vec::with_capacity(indices.len());
        for &i in indices {
            let ex = &corpus.examples[i];
            seqs.push(ex.tokens.clone());
            cats.push(ex.category);
            groups.push(ex.group);
        }
        Batch { seqs, cats, groups }
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    /// Contract checks for a variant: category presence where required
    /// and label-pair consistency with the hierarchy.
    pub fn check(&self, hier: &LabelHierarchy, variant: ModelVariant) -> Result<(), CoreError> {
        for (i, (&group, cat)) in self.groups.iter().zip(&self.cats).enumerate() {
            match cat {
                Some(c) => {
                    if *c != hier.group_parent(group) {
                        return Err(CoreError::HierarchyMismatch {
                            index: i,
                            category: *c,
                            group,
                        });
                    }
                }
                None => {
                    if variant.needs_category() {
                        return Err(CoreError::MissingCategory {
                            index: i,
                            variant: variant.name().to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Unwraps the category labels, required by the HCVAE and upper-bound
    /// variants.
    pub fn categories_required(&self, variant: ModelVariant) -> Result<Vec<usize>, CoreError> {
        self.cats
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| CoreError::MissingCategory {
                    index: i,
                    variant: variant.name().to_string(),
                })
            })
            .collect()
    }
}

/// Per-head loss values of one training step, all batch means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rec_c: Option<f64>,
    pub rec_g: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl_g: Option<f64>,
}

impl LossBreakdown {
    pub fn components_sum(&self) -> f64 {
        self.rec_c.unwrap_or(0.0)
            + self.rec_g
            + self.kl_c.unwrap_or(0.0)
            + self.kl_g.unwrap_or(0.0)
    }
}

/// Scores are per-class sigmoid outputs; labels are their argmax with
/// ties broken toward the lowest class index.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub group_scores: Vec<f64>,
    pub group: usize,
    pub category_scores: Option<Vec<f64>>,
    pub category: Option<usize>,
}

pub fn argmax_tie_low(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// One-hot rows `[len(ids), classes]`.
pub fn one_hot_rows<T: Real>(ids: &[usize], classes: usize) -> Result<Tensor<T>, CoreError> {
    let mut t = Tensor::zeros(&[ids.len(), classes]);
    for (row, &id) in ids.iter().enumerate() {
        if id >= classes {
            return Err(CoreError::Config(format!(
                "label {id} out of range for {classes} classes"
            )));
        }
        t.data_mut()[row * classes + id] = T::ONE;
    }
    Ok(t)
}

/// Training-step noise: `count` standard-normal tensors `[batch, latent]`
/// drawn in order from the given stream.
pub fn draw_train_noise<T: Real>(
    rng: &mut ChaCha8Rng,
    count: usize,
    batch: usize,
    latent: usize,
) -> Vec<Tensor<T>> {
    (0..count)
        .map(|_| {
            let data: Vec<T> = (0..batch * latent)
                .map(|_| T::from_f64(StandardNormal.sample(rng)))
                .collect();
            Tensor::from_vec(vec![batch, latent], data).expect("noise shape")
        })
        .collect()
}

/// Prediction noise with one RNG stream per example, derived from
/// `(seed, example index)`, so results do not depend on batch boundaries
/// or thread scheduling. Each example's stream yields its `draws` latent
/// noise vectors in order.
pub fn draw_predict_noise<T: Real>(
    seed: u64,
    example_offset: usize,
    batch: usize,
    latent: usize,
    draws: usize,
) -> Vec<Tensor<T>> {
    let mut tensors = vec![Tensor::zeros(&[batch, latent]); draws];
    for b in 0..batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((example_offset + b) as u64);
        for t in tensors.iter_mut() {
            let row = &mut t.data_mut()[b * latent..(b + 1) * latent];
            for v in row.iter_mut() {
                *v = T::from_f64(StandardNormal.sample(&mut rng));
            }
        }
    }
    tensors
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_on_ties() {
        assert_eq!(argmax_tie_low(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax_tie_low(&[0.1, 0.7, 0.7]), 1);
        assert_eq!(argmax_tie_low(&[0.1, 0.2, 0.9]), 2);
    }

    #[test]
    fn one_hot_checks_range() {
        let t = one_hot_rows::<f64>(&[1, 0], 3).unwrap();
        assert_eq!(t.data(), &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(one_hot_rows::<f64>(&[3], 3).is_err());
    }

    #[test]
    fn predict_noise_is_batch_invariant() {
        // Example 5's noise must be identical whether it sits in a batch
        // starting at offset 5 or offset 0 of a larger batch.
        let single: Vec<Tensor<f64>> = draw_predict_noise(9, 5, 1, 4, 2);
        let batched: Vec<Tensor<f64>> = draw_predict_noise(9, 0, 8, 4, 2);
        for d in 0..2 {
            assert_eq!(
                &single[d].data()[0..4],
                &batched[d].data()[5 * 4..6 * 4],
                "draw {d}"
            );
        }
    }
}
