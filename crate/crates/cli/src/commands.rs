use std::fs;
use std::io::Write;
use std::path::Path;

use hcvae_core::autodiff::{grad_check, GradCheckSettings};
use hcvae_core::config::RunConfig;
use hcvae_core::data::corpus::encode_corpus;
use hcvae_core::data::{
    generate, load_corpus, save_corpus, split_indices, subset_indices, LabelHierarchy, TextCorpus,
    Vocab,
};
use hcvae_core::error::CoreError;
use hcvae_core::exp::{
    derive_seed, evaluate_model, model_dims, run_compare, train_model, CompareSettings,
};
use hcvae_core::metrics::report as report_files;
use hcvae_core::models::{draw_train_noise, Batch, Model, ModelVariant, TestMode};
use hcvae_core::nn::checkpoint::{self, CheckpointMeta};

fn load_config(path: &Path, seed_override: Option<u64>) -> Result<RunConfig, CoreError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_config_echo(out: &Path, cfg: &RunConfig) -> Result<(), CoreError> {
    let mut text = serde_json::to_string_pretty(&cfg.echo())?;
    text.push('\n');
    fs::write(out.join("config.json"), text)?;
    Ok(())
}

pub fn synth(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CoreError> {
    let cfg = load_config(config, seed)?;
    let synth_cfg = cfg
        .data
        .synth
        .clone()
        .ok_or_else(|| CoreError::Config("synth command needs a data.synth block".to_string()))?;
    let output = generate(&synth_cfg, cfg.seed)?;

    fs::create_dir_all(out)?;
    write_config_echo(out, &cfg)?;
    output.hierarchy.save(&out.join("hierarchy.json"))?;
    save_corpus(&out.join("train.jsonl"), &output.train, &output.hierarchy)?;
    if !output.test.is_empty() {
        save_corpus(&out.join("test.jsonl"), &output.test, &output.hierarchy)?;
    }

    println!("group\tcategory\ttrain\ttest");
    for g in 0..output.hierarchy.n_groups() {
        println!(
            "{}\t{}\t{}\t{}",
            output.hierarchy.group_name(g),
            output
                .hierarchy
                .category_name(output.hierarchy.group_parent(g)),
            output.info.train_counts[g],
            output.info.test_counts[g],
        );
    }
    println!(
        "total\t\t{}\t{}",
        output.train.len(),
        output.test.len()
    );
    Ok(())
}

/// Training data resolution: either the synth block (generated in memory)
/// or a corpus file split into train/test, with the optional training-side
/// subset applied.
fn resolve_train_text(cfg: &RunConfig) -> Result<(TextCorpus, LabelHierarchy), CoreError> {
    if let Some(synth_cfg) = &cfg.data.synth {
        let output = generate(synth_cfg, cfg.seed)?;
        let mut train = output.train;
        if let Some(fraction) = cfg.data.subset_fraction {
            let all: Vec<usize> = (0..train.len()).collect();
            let kept = subset_indices(&all, fraction, derive_seed(cfg.seed, 17))?;
            train = train.select(&kept);
        }
        return Ok((train, output.hierarchy));
    }
    let corpus_path = cfg
        .data
        .corpus
        .as_ref()
        .ok_or_else(|| CoreError::Config("data needs a corpus path or a synth block".to_string()))?;
    let hier_path = cfg
        .data
        .hierarchy
        .as_ref()
        .ok_or_else(|| CoreError::Config("file-mode data needs a hierarchy path".to_string()))?;
    let hier = LabelHierarchy::load(Path::new(hier_path))?;
    let text = load_corpus(Path::new(corpus_path), &hier)?;
    if text.is_empty() {
        eprintln!("warning: corpus {corpus_path} is empty");
        return Ok((text, hier));
    }
    let (mut train_idx, _test_idx) =
        split_indices(text.len(), cfg.data.split_fraction, cfg.seed)?;
    if let Some(fraction) = cfg.data.subset_fraction {
        train_idx = subset_indices(&train_idx, fraction, derive_seed(cfg.seed, 17))?;
    }
    Ok((text.select(&train_idx), hier))
}

pub fn train(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CoreError> {
    let cfg = load_config(config, seed)?;
    let (train_text, hier) = resolve_train_text(&cfg)?;

    let vocab = Vocab::build(&train_text, cfg.data.min_freq);
    let train_corpus = encode_corpus(&train_text, &vocab, cfg.data.max_len);

    let trained = train_model(
        cfg.model,
        &cfg.hyper,
        &train_corpus,
        &hier,
        vocab.len(),
        cfg.seed,
    )?;

    fs::create_dir_all(out)?;
    write_config_echo(out, &cfg)?;
    let mut log_file = fs::File::create(out.join("train_log.jsonl"))?;
    for record in &trained.log {
        let line = serde_json::to_string(record)?;
        writeln!(log_file, "{line}")?;
        eprintln!("epoch {}: total {:.6}", record.epoch, record.loss.total);
    }
    log_file.flush()?;

    let meta = CheckpointMeta {
        variant: cfg.model.name().to_string(),
        seed: cfg.seed,
        config: cfg.echo(),
        vocab: vocab.tokens().to_vec(),
        hierarchy: hier,
    };
    checkpoint::save(
        &out.join("model.ckpt"),
        &trained.model.params,
        Some(&trained.adam),
        &meta,
    )?;
    println!(
        "trained {} for {} epochs on {} examples; checkpoint at {}",
        cfg.model,
        cfg.hyper.epochs,
        train_corpus.len(),
        out.join("model.ckpt").display()
    );
    Ok(())
}

pub fn eval(
    checkpoint_path: &Path,
    corpus_path: &Path,
    hierarchy_path: Option<&Path>,
    mode: &str,
    out: &Path,
    seed: Option<u64>,
) -> Result<(), CoreError> {
    let mode = TestMode::parse(mode)?;
    let (params, _adam, meta) = checkpoint::load::<f32>(checkpoint_path)?;
    let cfg: RunConfig = serde_json::from_value(meta.config.clone())
        .map_err(|e| CoreError::Checkpoint(format!("config echo does not parse: {e}")))?;
    let variant = ModelVariant::parse(&meta.variant)?;

    if let Some(path) = hierarchy_path {
        let provided = LabelHierarchy::load(path)?;
        if provided != meta.hierarchy {
            return Err(CoreError::Config(format!(
                "hierarchy {} does not match the checkpoint's ({} categories / {} groups)",
                path.display(),
                meta.hierarchy.n_categories(),
                meta.hierarchy.n_groups()
            )));
        }
    }
    let hier = meta.hierarchy.clone();
    let vocab = Vocab::from_tokens(meta.vocab.clone());
    let dims = model_dims(&cfg.hyper, vocab.len(), &hier);
    let model = Model::from_params(variant, dims, params)?;

    let text = load_corpus(corpus_path, &hier)?;
    if text.is_empty() {
        eprintln!("warning: corpus {} is empty", corpus_path.display());
    }
    let corpus = encode_corpus(&text, &vocab, cfg.data.max_len);
    let eval_seed = seed.unwrap_or(derive_seed(meta.seed, 23));
    let output = evaluate_model(&model, &corpus, &hier, mode, eval_seed, cfg.hyper.batch)?;

    fs::create_dir_all(out)?;
    let mut echo = meta.config.clone();
    if let serde_json::Value::Object(map) = &mut echo {
        map.insert(
            "eval".to_string(),
            serde_json::json!({
                "corpus": corpus_path.display().to_string(),
                "mode": mode.name(),
                "seed": eval_seed,
            }),
        );
    }
    report_files::write_scores_json(&out.join("scores.json"), &output.report, &echo)?;
    let group_names: Vec<String> = (0..hier.n_groups())
        .map(|g| hier.group_name(g).to_string())
        .collect();
    report_files::write_per_class_csv(&out.join("per_class.csv"), &output.report, &group_names)?;
    report_files::write_count_matrix_csv(&out.join("confusion.csv"), &output.report.confusion)?;

    println!("macro_f1 {:.6}", output.report.macro_f1);
    println!("micro_f1 {:.6}", output.report.micro_f1);
    println!("weighted_f1 {:.6}", output.report.weighted_f1);
    Ok(())
}

/// Train/test resolution for compare: synth mode generates both sides;
/// file mode splits the corpus once with the run seed.
fn resolve_compare_data(
    cfg: &RunConfig,
) -> Result<(TextCorpus, TextCorpus, LabelHierarchy), CoreError> {
    if let Some(synth_cfg) = &cfg.data.synth {
        let output = generate(synth_cfg, cfg.seed)?;
        if output.test.is_empty() {
            return Err(CoreError::Config(
                "compare needs synth.test_per_group > 0".to_string(),
            ));
        }
        return Ok((output.train, output.test, output.hierarchy));
    }
    let corpus_path = cfg
        .data
        .corpus
        .as_ref()
        .ok_or_else(|| CoreError::Config("data needs a corpus path or a synth block".to_string()))?;
    let hier_path = cfg
        .data
        .hierarchy
        .as_ref()
        .ok_or_else(|| CoreError::Config("file-mode data needs a hierarchy path".to_string()))?;
    let hier = LabelHierarchy::load(Path::new(hier_path))?;
    let text = load_corpus(Path::new(corpus_path), &hier)?;
    let (train_idx, test_idx) = split_indices(text.len(), cfg.data.split_fraction, cfg.seed)?;
    Ok((text.select(&train_idx), text.select(&test_idx), hier))
}

pub fn compare(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CoreError> {
    let cfg = load_config(config, seed)?;
    let (train_text, test_text, hier) = resolve_compare_data(&cfg)?;

    let settings = CompareSettings {
        variants: cfg.compare.variants.clone(),
        seeds: (0..cfg.compare.n_seeds)
            .map(|i| derive_seed(cfg.seed, 1000 + i as u64))
            .collect(),
        subset_fraction: cfg.compare.subset_fraction,
        hyper: cfg.hyper.clone(),
        max_len: cfg.data.max_len,
        min_freq: cfg.data.min_freq,
        eval_mode: cfg.test_mode,
    };
    let outcome = run_compare(&train_text, &test_text, &hier, &settings)?;

    fs::create_dir_all(out)?;
    write_config_echo(out, &cfg)?;
    let report = serde_json::json!({
        "config": cfg.echo(),
        "cells": outcome.cells,
        "medians": outcome.medians,
        "heatmap_gains": outcome.heatmaps.as_ref().map(|h| &h.gains),
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(out.join("compare_report.json"), text)?;

    if let Some(heatmaps) = &outcome.heatmaps {
        for (seed_index, diff) in &heatmaps.per_seed {
            report_files::write_matrix_csv(
                &out.join(format!("heatmap_diff_seed{seed_index}.csv")),
                &diff.matrix,
            )?;
            report_files::write_pgm(
                &out.join(format!("heatmap_diff_seed{seed_index}.pgm")),
                &diff.matrix,
                &format!(
                    "hcvae-cvae confusion fraction difference, seed index {seed_index}"
                ),
            )?;
        }
    }

    println!("variant\tregime\tmacro\tmicro\tweighted");
    for row in &outcome.medians {
        println!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}",
            row.variant,
            row.regime.name(),
            row.macro_f1,
            row.micro_f1,
            row.weighted_f1
        );
    }
    if let Some(h) = &outcome.heatmaps {
        for g in &h.gains {
            println!(
                "heatmap seed {}: diagonal {:+.4}, same-category {:+.4}, other {:+.4}",
                g.seed_index, g.diagonal_gain, g.same_category_gain, g.other_category_gain
            );
        }
    }
    Ok(())
}

pub fn gradcheck(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(), CoreError> {
    let cfg = load_config(config, seed)?;
    if cfg.hyper.hidden > 8 || cfg.hyper.latent > 8 {
        return Err(CoreError::Config(format!(
            "gradcheck needs tiny dims (hidden <= 8, latent <= 8); got hidden {} latent {}",
            cfg.hyper.hidden, cfg.hyper.latent
        )));
    }

    // The check runs on one batch of a tiny synthetic corpus.
    let synth_cfg = cfg.data.synth.clone().unwrap_or_else(|| {
        hcvae_core::data::SynthConfig {
            categories: 2,
            groups: 4,
            train_per_group: 2,
            test_per_group: 0,
            group_pool: 2,
            category_pool: 2,
            background_pool: 8,
            tokens_min: 3,
            tokens_max: 5,
            ..hcvae_core::data::SynthConfig::default()
        }
    });
    let output = generate(&synth_cfg, cfg.seed)?;
    let vocab = Vocab::build(&output.train, 1);
    let corpus = encode_corpus(&output.train, &vocab, cfg.data.max_len);
    let dims = model_dims(&cfg.hyper, vocab.len(), &output.hierarchy);
    let batch_size = cfg.hyper.batch.min(corpus.len());
    let indices: Vec<usize> = (0..batch_size).collect();
    let batch = Batch::from_corpus(&corpus, &indices);

    let settings = GradCheckSettings {
        epsilon: 1e-4,
        tolerance: 1e-3,
        max_checked_per_tensor: 128,
        subsample_seed: derive_seed(cfg.seed, 7),
        denom_floor: 1e-8,
    };

    let mut summaries = Vec::new();
    let mut all_pass = true;
    let mut worst = 0.0f64;
    for variant in [
        ModelVariant::Bilstm,
        ModelVariant::UpperBound,
        ModelVariant::Cvae,
        ModelVariant::Hcvae,
    ] {
        let model: Model<f64> = Model::new(variant, dims, derive_seed(cfg.seed, 31))?;
        let mut noise_rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 3));
        use rand::SeedableRng;
        let noise = draw_train_noise::<f64>(
            &mut noise_rng,
            variant.train_noise_count(),
            batch.len(),
            dims.latent,
        );
        let report = grad_check(&model.params, &settings, |p, want| {
            model.loss_with_params(p, &batch, &noise, want)
        })?;
        println!("== {variant} ==");
        print!("{report}");
        all_pass &= report.all_pass;
        worst = worst.max(report.max_rel_err);
        summaries.push(serde_json::json!({
            "variant": variant.name(),
            "max_rel_err": report.max_rel_err,
            "pass": report.all_pass,
            "tensors": report.tensors.iter().map(|t| {
                serde_json::json!({
                    "name": t.name,
                    "checked": t.elements_checked,
                    "max_rel_err": t.max_rel_err,
                    "pass": t.pass,
                })
            }).collect::<Vec<_>>(),
        }));
    }

    if let Some(out) = out {
        fs::create_dir_all(out)?;
        let payload = serde_json::json!({
            "config": cfg.echo(),
            "tolerance": settings.tolerance,
            "epsilon": settings.epsilon,
            "variants": summaries,
        });
        let mut text = serde_json::to_string_pretty(&payload)?;
        text.push('\n');
        fs::write(out.join("gradcheck.json"), text)?;
    }

    if all_pass {
        println!("gradcheck PASS (max rel err {worst:.3e})");
        Ok(())
    } else {
        Err(CoreError::GradCheckFailed {
            max_rel_err: worst,
            tolerance: settings.tolerance,
        })
    }
}
