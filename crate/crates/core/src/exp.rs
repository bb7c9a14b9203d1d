//! Experiment orchestration: the training loop (weighted-sampled batches,
//! per-epoch loss logging, NaN guard), evaluation, and the
//! complete-vs-subset comparison harness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Hyper;
use crate::data::corpus::encode_corpus;
use crate::data::{
    subset_indices, Corpus, LabelHierarchy, TextCorpus, Vocab, WeightedSampler,
};
use crate::error::CoreError;
use crate::metrics::{confusion_fraction, f1_scores, heatmap_diff, HeatmapDiff, MetricsReport};
use crate::models::{
    draw_train_noise, Batch, LossBreakdown, Model, ModelDims, ModelVariant, TestMode,
};
use crate::nn::{adam_step, AdamHyper, AdamState};

/// Splitmix64 of `seed ^ f(salt)`: decorrelates the RNG streams used for
/// init, sampling, and noise without giving up one-seed reproducibility.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SALT_INIT: u64 = 1;
const SALT_SAMPLER: u64 = 2;
const SALT_NOISE: u64 = 3;

/// One training-log record; single-head models omit the category fields
/// and the non-variational models omit the KL fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Debug)]
pub struct TrainedModel {
    pub model: Model<f32>,
    pub adam: AdamState<f32>,
    pub log: Vec<EpochLog>,
}

pub fn model_dims(hyper: &Hyper, vocab_size: usize, hier: &LabelHierarchy) -> ModelDims {
    ModelDims {
        vocab: vocab_size,
        embed: hyper.embed,
        hidden: hyper.hidden,
        latent: hyper.latent,
        mlp_hidden: hyper.mlp_hidden,
        categories: hier.n_categories(),
        groups: hier.n_groups(),
    }
}

/// Trains one model for `hyper.epochs` epochs, where an epoch is
/// corpus-size draws from the group-equalizing weighted sampler.
/// Single-threaded and fully determined by `(inputs, seed)`.
pub fn train_model(
    variant: ModelVariant,
    hyper: &Hyper,
    train: &Corpus,
    hier: &LabelHierarchy,
    vocab_size: usize,
    seed: u64,
) -> Result<TrainedModel, CoreError> {
    hyper.validate()?;
    let dims = model_dims(hyper, vocab_size, hier);
    let mut model: Model<f32> = Model::new(variant, dims, derive_seed(seed, SALT_INIT))?;
    let mut adam = AdamState::new(
        &model.params,
        AdamHyper {
            lr: hyper.lr,
            ..AdamHyper::default()
        },
    );
    let mut sampler = WeightedSampler::new(train, hier, derive_seed(seed, SALT_SAMPLER))?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SALT_NOISE));

    let mut log = Vec::with_capacity(hyper.epochs);
    for epoch in 1..=hyper.epochs {
        let draws = train.len();
        let mut done = 0usize;
        let mut step = 0usize;
        let mut acc_total = 0.0f64;
        let mut acc_rec_c = 0.0f64;
        let mut acc_rec_g = 0.0f64;
        let mut acc_kl_c = 0.0f64;
        let mut acc_kl_g = 0.0f64;
        let mut has_c = false;
        let mut has_kl = false;

        while done < draws {
            let bsize = (draws - done).min(hyper.batch);
            let indices: Vec<usize> = (&mut sampler).take(bsize).collect();
            let batch = Batch::from_corpus(train, &indices);
            batch.check(hier, variant)?;
            let noise = draw_train_noise::<f32>(
                &mut noise_rng,
                variant.train_noise_count(),
                bsize,
                hyper.latent,
            );
            let (breakdown, grads) = model.train_loss(&batch, &noise)?;
            if !breakdown.total.is_finite() {
                return Err(CoreError::NanLoss { epoch, step });
            }
            for kl in [breakdown.kl_c, breakdown.kl_g].into_iter().flatten() {
                if kl < -1e-9 {
                    return Err(CoreError::NegativeKl {
                        value: kl,
                        epoch,
                        step,
                    });
                }
            }
            adam_step(&mut model.params, &grads, &mut adam)?;

            let w = bsize as f64;
            acc_total += breakdown.total * w;
            acc_rec_g += breakdown.rec_g * w;
            if let Some(v) = breakdown.rec_c {
                acc_rec_c += v * w;
                has_c = true;
            }
            if let Some(v) = breakdown.kl_c {
                acc_kl_c += v * w;
            }
            if let Some(v) = breakdown.kl_g {
                acc_kl_g += v * w;
                has_kl = true;
            }
            done += bsize;
            step += 1;
        }

        let n = draws as f64;
        log.push(EpochLog {
            epoch,
            loss: LossBreakdown {
                total: acc_total / n,
                rec_c: has_c.then_some(acc_rec_c / n),
                rec_g: acc_rec_g / n,
                kl_c: has_c.then_some(acc_kl_c / n),
                kl_g: has_kl.then_some(acc_kl_g / n),
            },
        });
    }

    Ok(TrainedModel { model, adam, log })
}

#[derive(Debug)]
pub struct EvalOutput {
    pub group_preds: Vec<usize>,
    pub cat_preds: Option<Vec<usize>>,
    pub report: MetricsReport,
}

/// Batched prediction over a corpus plus group-level metrics. In `sample`
/// mode each example's noise stream derives from `(seed, example index)`,
/// so scores are independent of the batch size.
pub fn evaluate_model(
    model: &Model<f32>,
    corpus: &Corpus,
    hier: &LabelHierarchy,
    mode: TestMode,
    seed: u64,
    batch: usize,
) -> Result<EvalOutput, CoreError> {
    assert!(batch > 0, "evaluation batch size must be positive");
    let needs_cats = model.variant == ModelVariant::UpperBound;
    let cats: Option<Vec<usize>> = if needs_cats {
        Some(
            corpus
                .examples
                .iter()
                .enumerate()
                .map(|(i, ex)| {
                    ex.category.ok_or_else(|| CoreError::MissingCategory {
                        index: i,
                        variant: model.variant.name().to_string(),
                    })
                })
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };

    let mut group_preds = Vec::with_capacity(corpus.len());
    let mut cat_preds: Vec<usize> = Vec::new();
    let mut offset = 0usize;
    while offset < corpus.len() {
        let end = (offset + batch).min(corpus.len());
        let seqs: Vec<Vec<usize>> = corpus.examples[offset..end]
            .iter()
            .map(|ex| ex.tokens.clone())
            .collect();
        let batch_cats = cats.as_ref().map(|c| &c[offset..end]);
        let preds = model.predict(&seqs, batch_cats, mode, seed, offset)?;
        for p in preds {
            group_preds.push(p.group);
            if let Some(c) = p.category {
                cat_preds.push(c);
            }
        }
        offset = end;
    }

    let truths = corpus.group_labels();
    let report = f1_scores(&group_preds, &truths, hier.n_groups())?;
    Ok(EvalOutput {
        group_preds,
        cat_preds: (!cat_preds.is_empty()).then_some(cat_preds),
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Complete,
    Subset,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Complete => "complete",
            Regime::Subset => "subset",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareCell {
    pub variant: ModelVariant,
    pub regime: Regime,
    pub seed_index: usize,
    pub seed: u64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub weighted_f1: f64,
    #[serde(skip)]
    pub group_preds: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareMedianRow {
    pub variant: ModelVariant,
    pub regime: Regime,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatmapGain {
    pub seed_index: usize,
    pub diagonal_gain: f64,
    pub same_category_gain: f64,
    pub other_category_gain: f64,
}

#[derive(Debug)]
pub struct CompareHeatmaps {
    pub per_seed: Vec<(usize, HeatmapDiff)>,
    pub gains: Vec<HeatmapGain>,
}

#[derive(Debug)]
pub struct CompareOutcome {
    pub cells: Vec<CompareCell>,
    pub medians: Vec<CompareMedianRow>,
    /// Present when both the HCVAE and CVAE were compared: per-seed
    /// difference matrices of their complete-regime confusion fractions.
    pub heatmaps: Option<CompareHeatmaps>,
}

impl CompareOutcome {
    pub fn median_row(&self, variant: ModelVariant, regime: Regime) -> Option<&CompareMedianRow> {
        self.medians
            .iter()
            .find(|r| r.variant == variant && r.regime == regime)
    }
}

#[derive(Debug, Clone)]
pub struct CompareSettings {
    pub variants: Vec<ModelVariant>,
    pub seeds: Vec<u64>,
    pub subset_fraction: f64,
    pub hyper: Hyper,
    pub max_len: usize,
    pub min_freq: usize,
    pub eval_mode: TestMode,
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Trains every `(variant, regime, seed)` cell and reports per-cell and
/// median scores. The subset regime retrains on a random
/// `subset_fraction` of the training corpus; the test corpus is fixed.
/// Cells run in parallel; each cell is single-threaded and owns seeds
/// derived from its coordinates, so the outcome is independent of
/// scheduling.
pub fn run_compare(
    train_text: &TextCorpus,
    test_text: &TextCorpus,
    hier: &LabelHierarchy,
    settings: &CompareSettings,
) -> Result<CompareOutcome, CoreError> {
    if settings.variants.len() < 2 {
        return Err(CoreError::Config(
            "compare needs at least two model variants".to_string(),
        ));
    }
    let regimes = [Regime::Complete, Regime::Subset];
    let mut specs = Vec::new();
    for &variant in &settings.variants {
        for &regime in &regimes {
            for (seed_index, &seed) in settings.seeds.iter().enumerate() {
                specs.push((variant, regime, seed_index, seed));
            }
        }
    }

    let cells: Vec<CompareCell> = specs
        .par_iter()
        .map(|&(variant, regime, seed_index, seed)| -> Result<CompareCell, CoreError> {
            let all: Vec<usize> = (0..train_text.len()).collect();
            let train_slice = match regime {
                Regime::Complete => train_text.clone(),
                Regime::Subset => {
                    let kept =
                        subset_indices(&all, settings.subset_fraction, derive_seed(seed, 17))?;
                    train_text.select(&kept)
                }
            };
            let vocab = Vocab::build(&train_slice, settings.min_freq);
            let train = encode_corpus(&train_slice, &vocab, settings.max_len);
            let test = encode_corpus(test_text, &vocab, settings.max_len);

            let trained =
                train_model(variant, &settings.hyper, &train, hier, vocab.len(), seed)?;
            let eval = evaluate_model(
                &trained.model,
                &test,
                hier,
                settings.eval_mode,
                derive_seed(seed, 23),
                settings.hyper.batch,
            )?;
            Ok(CompareCell {
                variant,
                regime,
                seed_index,
                seed,
                macro_f1: eval.report.macro_f1,
                micro_f1: eval.report.micro_f1,
                weighted_f1: eval.report.weighted_f1,
                group_preds: eval.group_preds,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut medians = Vec::new();
    for &variant in &settings.variants {
        for &regime in &regimes {
            let of = |f: fn(&CompareCell) -> f64| {
                let vals: Vec<f64> = cells
                    .iter()
                    .filter(|c| c.variant == variant && c.regime == regime)
                    .map(f)
                    .collect();
                median(&vals)
            };
            medians.push(CompareMedianRow {
                variant,
                regime,
                macro_f1: of(|c| c.macro_f1),
                micro_f1: of(|c| c.micro_f1),
                weighted_f1: of(|c| c.weighted_f1),
            });
        }
    }

    let heatmaps = if settings.variants.contains(&ModelVariant::Hcvae)
        && settings.variants.contains(&ModelVariant::Cvae)
    {
        let truths = test_text
            .examples
            .iter()
            .map(|ex| ex.group)
            .collect::<Vec<_>>();
        let mut per_seed = Vec::new();
        let mut gains = Vec::new();
        for seed_index in 0..settings.seeds.len() {
            let find = |variant| {
                cells
                    .iter()
                    .find(|c| {
                        c.variant == variant
                            && c.regime == Regime::Complete
                            && c.seed_index == seed_index
                    })
                    .expect("cell exists")
            };
            let h = confusion_fraction(&find(ModelVariant::Hcvae).group_preds, &truths, hier.n_groups())?;
            let c = confusion_fraction(&find(ModelVariant::Cvae).group_preds, &truths, hier.n_groups())?;
            let diff = heatmap_diff(&h, &c, hier)?;
            gains.push(HeatmapGain {
                seed_index,
                diagonal_gain: diff.diagonal_gain,
                same_category_gain: diff.same_category_gain,
                other_category_gain: diff.other_category_gain,
            });
            per_seed.push((seed_index, diff));
        }
        Some(CompareHeatmaps { per_seed, gains })
    } else {
        None
    };

    Ok(CompareOutcome {
        cells,
        medians,
        heatmaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[5.0]), 5.0);
    }

    #[test]
    fn derived_seeds_differ_by_salt() {
        let s = 42;
        let a = derive_seed(s, SALT_INIT);
        let b = derive_seed(s, SALT_SAMPLER);
        let c = derive_seed(s, SALT_NOISE);
        assert_ne!(a, b);
        assert_ne!(b, c);
        assert_eq!(a, derive_seed(s, SALT_INIT));
    }
}
