//! Training-loop and harness tests on toy corpora: descent, learnability
//! of a separable task, determinism, generalization sanity, and the
//! comparison grid's shape.

use hcvae_core::config::Hyper;
use hcvae_core::data::corpus::encode_corpus;
use hcvae_core::data::{generate, Corpus, LabelHierarchy, SynthConfig, Vocab};
use hcvae_core::exp::{
    evaluate_model, median, run_compare, train_model, CompareSettings, Regime,
};
use hcvae_core::models::{ModelVariant, TestMode};

fn toy_hyper(epochs: usize) -> Hyper {
    // Deliberately small and fast; these tests exercise the machinery,
    // not the reference hyperparameters.
    Hyper {
        embed: 16,
        hidden: 8,
        latent: 8,
        mlp_hidden: 16,
        batch: 10,
        lr: 5e-3,
        epochs,
    }
}

fn toy_synth() -> SynthConfig {
    SynthConfig {
        categories: 1,
        groups: 2,
        train_per_group: 30,
        test_per_group: 10,
        group_pool: 3,
        category_pool: 2,
        background_pool: 10,
        tokens_min: 4,
        tokens_max: 7,
        category_signal: 0.5,
        group_signal: 1.0,
        sibling_overlap: 0.0,
        imbalance_exponent: 0.0,
    }
}

struct ToyData {
    hier: LabelHierarchy,
    train: Corpus,
    test: Corpus,
    vocab_len: usize,
}

fn toy_data(seed: u64) -> ToyData {
    let out = generate(&toy_synth(), seed).unwrap();
    let vocab = Vocab::build(&out.train, 1);
    ToyData {
        train: encode_corpus(&out.train, &vocab, 16),
        test: encode_corpus(&out.test, &vocab, 16),
        hier: out.hierarchy,
        vocab_len: vocab.len(),
    }
}

#[test]
fn cvae_descends_on_separable_toy() {
    // Median over 3 seeds: the last epoch's loss is strictly below the
    // first epoch's after ~50 steps of training.
    let mut firsts = Vec::new();
    let mut lasts = Vec::new();
    for seed in [1, 2, 3] {
        let data = toy_data(seed);
        // 60 examples / batch 10 = 6 steps per epoch; 9 epochs ~ 54 steps.
        let trained = train_model(
            ModelVariant::Cvae,
            &toy_hyper(9),
            &data.train,
            &data.hier,
            data.vocab_len,
            seed,
        )
        .unwrap();
        firsts.push(trained.log.first().unwrap().loss.total);
        lasts.push(trained.log.last().unwrap().loss.total);
    }
    assert!(
        median(&lasts) < median(&firsts),
        "median loss must drop: {firsts:?} -> {lasts:?}"
    );
}

#[test]
fn hcvae_descends_within_thirty_epochs() {
    let data = toy_data(7);
    let trained = train_model(
        ModelVariant::Hcvae,
        &toy_hyper(30),
        &data.train,
        &data.hier,
        data.vocab_len,
        7,
    )
    .unwrap();
    let first = trained.log.first().unwrap().loss.total;
    let last = trained.log.last().unwrap().loss.total;
    assert!(last < first, "{first} -> {last}");
    // Every step's KL obeys the non-negativity floor; epoch means do too.
    for log in &trained.log {
        assert!(log.loss.kl_c.unwrap() >= -1e-9);
        assert!(log.loss.kl_g.unwrap() >= -1e-9);
    }
}

#[test]
fn bilstm_reaches_high_micro_on_separable_toy() {
    // Micro-F1 >= 0.95 within 30 epochs, median over 3 seeds.
    let mut micros = Vec::new();
    for seed in [11, 12, 13] {
        let data = toy_data(seed);
        let trained = train_model(
            ModelVariant::Bilstm,
            &toy_hyper(30),
            &data.train,
            &data.hier,
            data.vocab_len,
            seed,
        )
        .unwrap();
        let eval = evaluate_model(
            &trained.model,
            &data.test,
            &data.hier,
            TestMode::Mean,
            seed,
            10,
        )
        .unwrap();
        micros.push(eval.report.micro_f1);
    }
    let med = median(&micros);
    assert!(med >= 0.95, "median micro {med} from {micros:?}");
}

#[test]
fn zero_epochs_keep_initial_parameters() {
    let data = toy_data(3);
    let trained = train_model(
        ModelVariant::Bilstm,
        &toy_hyper(0),
        &data.train,
        &data.hier,
        data.vocab_len,
        3,
    )
    .unwrap();
    assert!(trained.log.is_empty());
    assert_eq!(trained.adam.step_count(), 0);

    use hcvae_core::exp::{derive_seed, model_dims};
    use hcvae_core::models::Model;
    let fresh: Model<f32> = Model::new(
        ModelVariant::Bilstm,
        model_dims(&toy_hyper(0), data.vocab_len, &data.hier),
        derive_seed(3, 1),
    )
    .unwrap();
    for (name, t) in fresh.params.iter() {
        assert_eq!(
            t.data(),
            trained.model.params.get(name).unwrap().data(),
            "{name}"
        );
    }
}

#[test]
fn training_is_deterministic_given_the_seed() {
    let data = toy_data(21);
    let run = || {
        train_model(
            ModelVariant::Hcvae,
            &toy_hyper(3),
            &data.train,
            &data.hier,
            data.vocab_len,
            21,
        )
        .unwrap()
    };
    let a = run();
    let b = run();
    for (la, lb) in a.log.iter().zip(&b.log) {
        assert_eq!(la.loss.total.to_bits(), lb.loss.total.to_bits());
    }
    for (name, t) in a.model.params.iter() {
        let t2 = b.model.params.get(name).unwrap();
        for (x, y) in t.data().iter().zip(t2.data()) {
            assert_eq!(x.to_bits(), y.to_bits(), "{name}");
        }
    }

    let ea = evaluate_model(&a.model, &data.test, &data.hier, TestMode::Mean, 5, 10).unwrap();
    let eb = evaluate_model(&b.model, &data.test, &data.hier, TestMode::Mean, 5, 10).unwrap();
    assert_eq!(ea.group_preds, eb.group_preds);
}

#[test]
fn sample_mode_eval_is_batch_size_invariant() {
    // Per-example noise streams make scores independent of eval batching.
    let data = toy_data(9);
    let trained = train_model(
        ModelVariant::Cvae,
        &toy_hyper(2),
        &data.train,
        &data.hier,
        data.vocab_len,
        9,
    )
    .unwrap();
    let small = evaluate_model(&trained.model, &data.test, &data.hier, TestMode::Sample, 5, 3)
        .unwrap();
    let large = evaluate_model(&trained.model, &data.test, &data.hier, TestMode::Sample, 5, 20)
        .unwrap();
    assert_eq!(small.group_preds, large.group_preds);
}

#[test]
fn train_scores_at_least_match_test_scores_on_separable_toy() {
    // Generalization-gap sanity: median over 3 seeds.
    let mut gaps = Vec::new();
    for seed in [31, 32, 33] {
        let data = toy_data(seed);
        let trained = train_model(
            ModelVariant::Bilstm,
            &toy_hyper(20),
            &data.train,
            &data.hier,
            data.vocab_len,
            seed,
        )
        .unwrap();
        let on_train =
            evaluate_model(&trained.model, &data.train, &data.hier, TestMode::Mean, 5, 10)
                .unwrap();
        let on_test =
            evaluate_model(&trained.model, &data.test, &data.hier, TestMode::Mean, 5, 10)
                .unwrap();
        gaps.push(on_train.report.micro_f1 - on_test.report.micro_f1);
    }
    assert!(median(&gaps) >= 0.0, "gaps {gaps:?}");
}

#[test]
fn compare_grid_has_expected_shape() {
    let synth = SynthConfig {
        categories: 2,
        groups: 4,
        train_per_group: 20,
        test_per_group: 5,
        group_pool: 3,
        category_pool: 2,
        background_pool: 10,
        tokens_min: 4,
        tokens_max: 6,
        group_signal: 0.9,
        ..toy_synth()
    };
    let out = generate(&synth, 5).unwrap();
    let settings = CompareSettings {
        variants: vec![ModelVariant::Bilstm, ModelVariant::Cvae, ModelVariant::Hcvae],
        seeds: vec![100, 101],
        subset_fraction: 0.5,
        hyper: toy_hyper(2),
        max_len: 16,
        min_freq: 1,
        eval_mode: TestMode::Mean,
    };
    let outcome = run_compare(&out.train, &out.test, &out.hierarchy, &settings).unwrap();

    assert_eq!(outcome.cells.len(), 3 * 2 * 2, "variants x regimes x seeds");
    assert_eq!(outcome.medians.len(), 3 * 2);
    for variant in &settings.variants {
        for regime in [Regime::Complete, Regime::Subset] {
            assert!(outcome.median_row(*variant, regime).is_some());
        }
    }
    // Both hcvae and cvae are present, so heatmaps must be emitted,
    // one per seed.
    let heatmaps = outcome.heatmaps.expect("heatmap section");
    assert_eq!(heatmaps.per_seed.len(), 2);
    assert_eq!(heatmaps.gains.len(), 2);

    // Without the cvae there is nothing to diff against.
    let settings2 = CompareSettings {
        variants: vec![ModelVariant::Bilstm, ModelVariant::Hcvae],
        seeds: vec![100],
        ..settings
    };
    let outcome2 = run_compare(&out.train, &out.test, &out.hierarchy, &settings2).unwrap();
    assert!(outcome2.heatmaps.is_none());
}
