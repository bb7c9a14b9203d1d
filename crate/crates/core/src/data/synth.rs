//! Synthetic hierarchical corpus generator with controllable class
//! separability.
//!
//! Each synthetic tweet mixes three disjoint token pools: tokens unique
//! to its group, tokens shared by all groups of its category, and
//! background tokens. Per-token mixing:
//!
//! - with probability `group_signal` a group-indicative token is drawn;
//!   within that, `sibling_overlap` of draws come from a pool shared by
//!   sibling groups instead of the group-unique pool, which makes sibling
//!   groups partially confusable while the category stays identifiable;
//! - otherwise, with probability `category_signal`, a category token;
//! - otherwise a background token.
//!
//! Per-group counts can follow a power law (`imbalance_exponent > 0`) to
//! mimic a heavily skewed collection.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{TextCorpus, TextExample};
use super::hierarchy::LabelHierarchy;
use super::DataError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub categories: usize,
    pub groups: usize,
    pub train_per_group: usize,
    pub test_per_group: usize,
    /// Tokens in each group's unique pool (and each category's sibling
    /// pool when `sibling_overlap > 0`).
    pub group_pool: usize,
    pub category_pool: usize,
    pub background_pool: usize,
    pub tokens_min: usize,
    pub tokens_max: usize,
    pub category_signal: f64,
    pub group_signal: f64,
    pub sibling_overlap: f64,
    pub imbalance_exponent: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            categories: 13,
            groups: 40,
            train_per_group: 200,
            test_per_group: 50,
            group_pool: 20,
            category_pool: 20,
            background_pool: 500,
            tokens_min: 6,
            tokens_max: 10,
            category_signal: 0.5,
            group_signal: 0.8,
            sibling_overlap: 0.0,
            imbalance_exponent: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let err = |msg: String| Err(DataError::Config(msg));
        if self.categories == 0 {
            return err("categories must be positive".into());
        }
        if self.groups < self.categories {
            return err(format!(
                "{} groups cannot cover {} categories",
                self.groups, self.categories
            ));
        }
        if self.train_per_group == 0 {
            return err("train_per_group must be positive".into());
        }
        if self.group_pool == 0 || self.category_pool == 0 || self.background_pool == 0 {
            return err("token pools must be non-empty".into());
        }
        if self.tokens_min == 0 || self.tokens_max < self.tokens_min {
            return err(format!(
                "invalid token length range {}..={}",
                self.tokens_min, self.tokens_max
            ));
        }
        for (name, v) in [
            ("category_signal", self.category_signal),
            ("group_signal", self.group_signal),
            ("sibling_overlap", self.sibling_overlap),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.imbalance_exponent < 0.0 {
            return err("imbalance_exponent must be non-negative".into());
        }
        Ok(())
    }
}

/// Ground-truth generation artifacts, useful for oracles and reports.
#[derive(Debug, Clone)]
pub struct SynthInfo {
    pub group_tokens: Vec<Vec<String>>,
    pub sibling_tokens: Vec<Vec<String>>,
    pub category_tokens: Vec<Vec<String>>,
    pub background_tokens: Vec<String>,
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub hierarchy: LabelHierarchy,
    pub train: TextCorpus,
    pub test: TextCorpus,
    pub info: SynthInfo,
}

fn per_group_counts(cfg: &SynthConfig, base: usize) -> Vec<usize> {
    if base == 0 {
        return vec![0; cfg.groups];
    }
    if cfg.imbalance_exponent == 0.0 {
        return vec![base; cfg.groups];
    }
    let raw: Vec<f64> = (0..cfg.groups)
        .map(|g| ((g + 1) as f64).powf(-cfg.imbalance_exponent))
        .collect();
    let norm = cfg.groups as f64 / raw.iter().sum::<f64>();
    raw.iter()
        .map(|r| ((r * norm * base as f64).round() as usize).max(1))
        .collect()
}

fn gen_corpus(
    cfg: &SynthConfig,
    hier: &LabelHierarchy,
    info: &SynthInfo,
    counts: &[usize],
    rng: &mut ChaCha8Rng,
) -> TextCorpus {
    let mut examples = Vec::new();
    for g in 0..cfg.groups {
        let c = hier.group_parent(g);
        for _ in 0..counts[g] {
            let len = rng.gen_range(cfg.tokens_min..=cfg.tokens_max);
            let mut tokens = Vec::with_capacity(len);
            for _ in 0..len {
                let tok = if rng.gen_range(0.0..1.0) < cfg.group_signal {
                    if cfg.sibling_overlap > 0.0 && rng.gen_range(0.0..1.0) < cfg.sibling_overlap {
                        let k = rng.gen_range(0..cfg.group_pool);
                        info.sibling_tokens[c][k].clone()
                    } else {
                        let k = rng.gen_range(0..cfg.group_pool);
                        info.group_tokens[g][k].clone()
                    }
                } else if rng.gen_range(0.0..1.0) < cfg.category_signal {
                    let k = rng.gen_range(0..cfg.category_pool);
                    info.category_tokens[c][k].clone()
                } else {
                    let k = rng.gen_range(0..cfg.background_pool);
                    info.background_tokens[k].clone()
                };
                tokens.push(tok);
            }
            examples.push(TextExample {
                text: tokens.join(" "),
                category: Some(c),
                group: g,
            });
        }
    }
    TextCorpus { examples }
}

/// Generates a hierarchy plus train and test corpora. Identical
/// `(config, seed)` pairs produce identical output.
pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<SynthOutput, DataError> {
    cfg.validate()?;

    let categories: Vec<String> = (0..cfg.categories).map(|c| format!("cat{c:02}")).collect();
    let groups: Vec<(String, usize)> = (0..cfg.groups)
        .map(|g| (format!("grp{g:02}"), g % cfg.categories))
        .collect();
    let hierarchy = LabelHierarchy::new(categories, groups)?;

    let info = SynthInfo {
        group_tokens: (0..cfg.groups)
            .map(|g| (0..cfg.group_pool).map(|k| format!("g{g}i{k}")).collect())
            .collect(),
        sibling_tokens: (0..cfg.categories)
            .map(|c| (0..cfg.group_pool).map(|k| format!("s{c}i{k}")).collect())
            .collect(),
        category_tokens: (0..cfg.categories)
            .map(|c| (0..cfg.category_pool).map(|k| format!("c{c}i{k}")).collect())
            .collect(),
        background_tokens: (0..cfg.background_pool).map(|k| format!("w{k}")).collect(),
        train_counts: per_group_counts(cfg, cfg.train_per_group),
        test_counts: per_group_counts(cfg, cfg.test_per_group),
    };

    let mut train_rng = ChaCha8Rng::seed_from_u64(seed);
    train_rng.set_stream(0);
    let train = gen_corpus(cfg, &hierarchy, &info, &info.train_counts, &mut train_rng);

    let mut test_rng = ChaCha8Rng::seed_from_u64(seed);
    test_rng.set_stream(1);
    let test = gen_corpus(cfg, &hierarchy, &info, &info.test_counts, &mut test_rng);

    Ok(SynthOutput {
        hierarchy,
        train,
        test,
        info,
    })
}

/// Naive token-matching classifier over the generator's ground-truth
/// pools: predicts the group with the most unique-pool hits, counting
/// sibling-pool hits for every group of that category. Ties go to the
/// lowest group index. Diagnostic only.
pub fn oracle_group(text: &str, info: &SynthInfo, hier: &LabelHierarchy) -> usize {
    let n_groups = info.group_tokens.len();
    let mut scores = vec![0usize; n_groups];
    for tok in super::vocab::tokenize(text) {
        for (g, pool) in info.group_tokens.iter().enumerate() {
            if pool.iter().any(|p| *p == tok) {
                scores[g] += 2;
            }
        }
        for (c, pool) in info.sibling_tokens.iter().enumerate() {
            if pool.iter().any(|p| *p == tok) {
                for g in hier.groups_of(c) {
                    scores[g] += 1;
                }
            }
        }
    }
    let mut best = 0;
    for g in 1..n_groups {
        if scores[g] > scores[best] {
            best = g;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            categories: 3,
            groups: 6,
            train_per_group: 30,
            test_per_group: 10,
            group_pool: 5,
            category_pool: 5,
            background_pool: 50,
            tokens_min: 5,
            tokens_max: 8,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_identical_corpus() {
        let a = generate(&small_cfg(), 9).unwrap();
        let b = generate(&small_cfg(), 9).unwrap();
        assert_eq!(a.train.len(), b.train.len());
        for (x, y) in a.train.examples.iter().zip(&b.train.examples) {
            assert_eq!(x.text, y.text);
            assert_eq!(x.group, y.group);
        }
        let c = generate(&small_cfg(), 10).unwrap();
        assert!(a
            .train
            .examples
            .iter()
            .zip(&c.train.examples)
            .any(|(x, y)| x.text != y.text));
    }

    #[test]
    fn full_group_signal_is_oracle_separable() {
        let cfg = SynthConfig {
            group_signal: 1.0,
            sibling_overlap: 0.0,
            ..small_cfg()
        };
        let out = generate(&cfg, 4).unwrap();
        let correct = out
            .test
            .examples
            .iter()
            .filter(|ex| oracle_group(&ex.text, &out.info, &out.hierarchy) == ex.group)
            .count();
        assert_eq!(correct, out.test.len(), "oracle must be perfect at signal 1.0");
    }

    #[test]
    fn no_signal_leaves_oracle_at_chance() {
        let cfg = SynthConfig {
            group_signal: 0.0,
            category_signal: 0.0,
            tokens_min: 3,
            tokens_max: 5,
            ..small_cfg()
        };
        let out = generate(&cfg, 4).unwrap();
        let correct = out
            .test
            .examples
            .iter()
            .filter(|ex| oracle_group(&ex.text, &out.info, &out.hierarchy) == ex.group)
            .count();
        let acc = correct as f64 / out.test.len() as f64;
        // All-background text: the oracle degenerates to always predicting
        // group 0, i.e. the prior frequency of one balanced class.
        let prior = 1.0 / cfg.groups as f64;
        assert!(
            (acc - prior).abs() < 0.1,
            "expected chance-level {prior}, got {acc}"
        );
    }

    #[test]
    fn imbalance_profile_is_decreasing() {
        let cfg = SynthConfig {
            imbalance_exponent: 1.0,
            ..small_cfg()
        };
        let out = generate(&cfg, 1).unwrap();
        let counts = &out.info.train_counts;
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
        assert!(counts[0] > counts[cfg.groups - 1]);
        assert_eq!(out.train.len(), counts.iter().sum::<usize>());
    }

    #[test]
    fn hierarchy_consistency_holds() {
        let out = generate(&small_cfg(), 2).unwrap();
        for ex in &out.train.examples {
            assert_eq!(ex.category, Some(out.hierarchy.group_parent(ex.group)));
        }
    }

    #[test]
    fn zero_train_count_rejected() {
        let cfg = SynthConfig {
            train_per_group: 0,
            ..small_cfg()
        };
        assert!(matches!(
            generate(&cfg, 0).unwrap_err(),
            DataError::Config(_)
        ));
    }
}
