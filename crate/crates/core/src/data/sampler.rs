//! Weighted random sampling with replacement for imbalanced training.
//! Each example's weight is the inverse of its group's count, so group
//! marginals are uniform in expectation regardless of the count profile.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::corpus::Corpus;
use super::hierarchy::LabelHierarchy;
use super::DataError;

#[derive(Debug, Clone)]
pub struct WeightedSampler {
    dist: WeightedIndex<f64>,
    rng: ChaCha8Rng,
}

impl WeightedSampler {
    /// Every hierarchy group must be present in the corpus; a group with
    /// zero examples cannot be upweighted and is a configuration error.
    pub fn new(corpus: &Corpus, hier: &LabelHierarchy, seed: u64) -> Result<Self, DataError> {
        let counts = corpus.group_counts(hier.n_groups());
        for (g, &count) in counts.iter().enumerate() {
            if count == 0 {
                return Err(DataError::EmptyGroup {
                    name: hier.group_name(g).to_string(),
                });
            }
        }
        let weights: Vec<f64> = corpus
            .examples
            .iter()
            .map(|ex| 1.0 / counts[ex.group] as f64)
            .collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| DataError::Config(format!("sampler weights: {e}")))?;
        Ok(WeightedSampler {
            dist,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn next_index(&mut self) -> usize {
        self.dist.sample(&mut self.rng)
    }
}

impl Iterator for WeightedSampler {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        Some(self.next_index())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::corpus::Example;

    fn corpus_with_counts(counts: &[usize]) -> Corpus {
        let mut examples = Vec::new();
        for (g, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                examples.push(Example {
                    tokens: vec![2],
                    category: Some(0),
                    group: g,
                });
            }
        }
        Corpus { examples }
    }

    fn hier_of(n_groups: usize) -> LabelHierarchy {
        LabelHierarchy::new(
            vec!["c".into()],
            (0..n_groups).map(|g| (format!("g{g}"), 0)).collect(),
        )
        .unwrap()
    }

    fn group_frequencies(counts: &[usize], draws: usize, seed: u64) -> Vec<f64> {
        let corpus = corpus_with_counts(counts);
        let hier = hier_of(counts.len());
        let mut sampler = WeightedSampler::new(&corpus, &hier, seed).unwrap();
        let mut hits = vec![0usize; counts.len()];
        for _ in 0..draws {
            hits[corpus.examples[sampler.next_index()].group] += 1;
        }
        hits.iter().map(|&h| h as f64 / draws as f64).collect()
    }

    #[test]
    fn two_group_ninety_ten_balances() {
        let freqs = group_frequencies(&[90, 10], 100_000, 7);
        assert!((0.48..=0.52).contains(&freqs[0]), "{freqs:?}");
        assert!((0.48..=0.52).contains(&freqs[1]), "{freqs:?}");
    }

    #[test]
    fn equal_counts_behave_uniformly() {
        let freqs = group_frequencies(&[50, 50, 50, 50], 100_000, 11);
        for f in freqs {
            assert!((0.23..=0.27).contains(&f), "{f}");
        }
    }

    #[test]
    fn single_group_draws_only_it() {
        let freqs = group_frequencies(&[25], 1000, 3);
        assert_eq!(freqs, vec![1.0]);
    }

    #[test]
    fn empty_group_is_named_in_error() {
        let corpus = corpus_with_counts(&[5, 0]);
        let hier = hier_of(2);
        let err = WeightedSampler::new(&corpus, &hier, 0).unwrap_err();
        assert!(err.to_string().contains("g1"), "{err}");
    }

    #[test]
    fn same_seed_same_stream() {
        let corpus = corpus_with_counts(&[3, 9]);
        let hier = hier_of(2);
        let a: Vec<usize> = WeightedSampler::new(&corpus, &hier, 42)
            .unwrap()
            .take(50)
            .collect();
        let b: Vec<usize> = WeightedSampler::new(&corpus, &hier, 42)
            .unwrap()
            .take(50)
            .collect();
        assert_eq!(a, b);
    }
}
