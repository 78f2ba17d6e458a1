use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use autodiff_core::{grad_check, Precision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokenizer_bpe::Tokenizer;
use train_harness::{
    evaluate, load_checkpoint, load_corpus, AdamState, CheckpointMeta,
    MetricsRecord, ModelSpec, TokenizerRef, TrainHooks,
};

use ipa_cli::config::RunConfig;
use ipa_cli::CliError;

pub fn tokenizer_train(corpus: &Path, vocab: usize, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read(corpus)
        .map_err(|e| CliError::io(format!("cannot read corpus {}: {e}", corpus.display())))?;
    let tokenizer = tokenizer_bpe::bpe_train(&text, vocab)?;
    tokenizer_bpe::save_tokenizer(&tokenizer, out)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", out.display())))?;
    println!(
        "trained tokenizer: {} tokens ({} merges) -> {}",
        tokenizer.vocab_size(),
        tokenizer.merges().len(),
        out.display()
    );
    Ok(())
}

fn load_tokenizer_for(
    reference: &TokenizerRef,
    override_path: Option<&Path>,
) -> Result<Tokenizer, CliError> {
    match reference {
        TokenizerRef::ByteLevel => {
            if override_path.is_some() {
                return Err(CliError::config(
                    "checkpoint uses the byte-level tokenizer; --tokenizer does not apply".into(),
                ));
            }
            Ok(Tokenizer::byte_level())
        }
        TokenizerRef::File { path, sha256 } => {
            let actual_path = override_path.unwrap_or_else(|| Path::new(path));
            let tok = tokenizer_bpe::load_tokenizer(actual_path)?;
            let digest = TokenizerRef::sha256_of(&tok);
            if digest != *sha256 {
                return Err(CliError::config(format!(
                    "tokenizer {} does not match the checkpoint (sha256 {digest} != {sha256})",
                    actual_path.display()
                )));
            }
            Ok(tok)
        }
    }
}

fn tokenizer_reference(cfg: &RunConfig, tokenizer: &Tokenizer) -> TokenizerRef {
    match &cfg.data.tokenizer {
        None => TokenizerRef::ByteLevel,
        Some(path) => TokenizerRef::File {
            path: path.display().to_string(),
            sha256: TokenizerRef::sha256_of(tokenizer),
        },
    }
}

pub fn train(config_path: &Path, resume: Option<&Path>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config_path)?;
    let tokenizer = match &cfg.data.tokenizer {
        Some(path) => tokenizer_bpe::load_tokenizer(path)?,
        None => Tokenizer::byte_level(),
    };
    let corpus = load_corpus(&cfg.data.source()?, &tokenizer)?;
    let vocab_size = tokenizer.vocab_size();
    let tok_ref = tokenizer_reference(&cfg, &tokenizer);

    let (mut meta, mut model, mut adam) = match resume {
        None => {
            let model = cfg
                .model
                .build(vocab_size, cfg.train.seed, cfg.train.precision)?;
            let adam = AdamState::new(model.params());
            let meta = CheckpointMeta::fresh(
                cfg.model.clone(),
                cfg.train.clone(),
                vocab_size,
                tok_ref,
            );
            (meta, model, adam)
        }
        Some(path) => {
            let (mut meta, model, adam) = load_checkpoint(path)?;
            if meta.model != cfg.model {
                return Err(CliError::config(
                    "checkpoint architecture does not match the config's model".into(),
                ));
            }
            if meta.vocab_size != vocab_size {
                return Err(CliError::config(format!(
                    "checkpoint vocabulary {} does not match tokenizer {}",
                    meta.vocab_size, vocab_size
                )));
            }
            if meta.tokenizer != tok_ref {
                return Err(CliError::config(
                    "checkpoint tokenizer reference does not match the config".into(),
                ));
            }
            meta.train = cfg.train.clone();
            (meta, model, adam)
        }
    };

    let mut metrics_file = OpenOptions::new()
        .create(true)
        .append(resume.is_some())
        .truncate(resume.is_none())
        .write(true)
        .open(&cfg.out.metrics)
        .map_err(|e| CliError::io(format!("cannot open {}: {e}", cfg.out.metrics.display())))?;

    let best_path = cfg.out.checkpoint.with_extension("best.bin");
    let mut hooks = TrainHooks {
        metrics: Some(&mut metrics_file),
        best_checkpoint: Some(&best_path),
        final_checkpoint: Some(&cfg.out.checkpoint),
    };
    let outcome = train_harness::train(model.as_mut(), &mut adam, &mut meta, &corpus, &mut hooks)?;

    let last_test = outcome
        .history
        .iter()
        .rev()
        .find(|r| r.split == "test")
        .map(|r| r.loss);
    println!(
        "trained {} steps; final test loss {}; best test loss {}; checkpoint {}",
        outcome.final_step,
        last_test.map_or("n/a".into(), |l| format!("{l:.4}")),
        outcome
            .best_eval_loss
            .map_or("n/a".into(), |l| format!("{l:.4}")),
        cfg.out.checkpoint.display()
    );
    Ok(())
}

pub fn eval(
    checkpoint: &Path,
    corpus: &Path,
    m: usize,
    batch: usize,
    metrics: Option<&Path>,
    tokenizer_override: Option<&Path>,
) -> Result<(), CliError> {
    let (meta, model, _) = load_checkpoint(checkpoint)?;
    let tokenizer = load_tokenizer_for(&meta.tokenizer, tokenizer_override)?;
    let text = std::fs::read(corpus)
        .map_err(|e| CliError::io(format!("cannot read corpus {}: {e}", corpus.display())))?;
    let stream = tokenizer.encode(&text);

    let t0 = Instant::now();
    let loss = evaluate(model.as_ref(), &stream, m, batch)?;
    let windows = (stream.len() - 1) / m;
    let ms_per_window = t0.elapsed().as_secs_f64() * 1e3 / windows.max(1) as f64;

    let record = MetricsRecord::new(meta.step, "eval", loss, ms_per_window, model.param_count(m))
        .map_err(|e| CliError::numeric(e.to_string()))?;
    println!("loss {loss:.6} over {windows} windows of m={m}");
    match metrics {
        Some(path) => {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))?;
            record
                .write_jsonl(&mut file)
                .map_err(|e| CliError::io(e.to_string()))?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            record
                .write_jsonl(&mut out)
                .map_err(|e| CliError::io(e.to_string()))?;
        }
    }
    Ok(())
}

pub fn generate(
    checkpoint: &Path,
    prompt: &str,
    max_new: usize,
    temperature: f64,
    seed: u64,
    tokenizer_override: Option<&Path>,
) -> Result<(), CliError> {
    let (meta, model, _) = load_checkpoint(checkpoint)?;
    let tokenizer = load_tokenizer_for(&meta.tokenizer, tokenizer_override)?;
    let prompt_ids = tokenizer.encode(prompt.as_bytes());
    let ids = train_harness::generate(model.as_ref(), &prompt_ids, max_new, temperature, seed)?;
    let bytes = tokenizer.decode(&ids)?;
    let mut out = std::io::stdout().lock();
    out.write_all(&bytes)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| CliError::io(e.to_string()))?;
    Ok(())
}

pub fn gradcheck(model_kind: &str, seed: u64) -> Result<(), CliError> {
    // Tiny fixed architectures: V=20, n=8, m=6, two layers, two experts or
    // heads, rank 3 / head width 4.
    let vocab = 20usize;
    let m = 6usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<usize> = (0..m).map(|_| rng.random_range(0..vocab)).collect();
    let targets: Vec<usize> = (0..m).map(|_| rng.random_range(0..vocab)).collect();

    let err = match model_kind {
        "ipa" => {
            let cfg = ipa_core::ModelConfig::new(8, m, 2, 2, 2, 3, vocab);
            let model =
                ipa_core::IpaModel::new(cfg, seed).map_err(|e| CliError::config(e.to_string()))?;
            grad_check(&model.params, 1e-5, |_p, g| {
                let logits = ipa_core::ipa_forward(g, &ids, &model)?;
                Ok(g.cross_entropy(logits, &targets)?)
            })
        }
        "gpt" => {
            let cfg = baseline_gpt::GptConfig::new(8, 2, 16, 2, m, vocab);
            let mut model = baseline_gpt::GptModel::new(cfg, seed)
                .map_err(|e| CliError::config(e.to_string()))?;
            // The feedforward kink makes finite differences meaningless on
            // its non-differentiable set; move to a clear point first.
            baseline_gpt::ensure_kink_free(&mut model, &ids, 1e-2)
                .map_err(|e| CliError::numeric(e.to_string()))?;
            grad_check(&model.params, 1e-5, |_p, g| {
                let logits = baseline_gpt::gpt_forward(g, &ids, &model)?;
                Ok(g.cross_entropy(logits, &targets)?)
            })
        }
        other => return Err(CliError::config(format!("unknown model kind {other:?}"))),
    }
    .map_err(|e| CliError::numeric(e.to_string()))?;

    println!("gradcheck {model_kind}: max relative error {err:.3e}");
    if err > 1e-4 {
        return Err(CliError::numeric(format!(
            "gradient mismatch: {err:.3e} exceeds 1e-4"
        )));
    }
    Ok(())
}

/// Matched counterpart derivation: heads <-> column experts, per-head width
/// <-> factor rank, feedforward ratio <-> row experts.
fn matched_pair(spec: &ModelSpec) -> (Option<ModelSpec>, Option<ModelSpec>) {
    match *spec {
        ModelSpec::Ipa {
            embed_dim,
            max_seq_len,
            layers,
            col_experts,
            row_experts,
            rank: _,
            tie_head,
            ..
        } => {
            let gpt = ModelSpec::Gpt {
                embed_dim,
                max_seq_len,
                layers,
                heads: col_experts,
                ff_dim: row_experts * embed_dim,
                tie_head,
                layernorm: false,
            };
            (Some(spec.clone()), Some(gpt))
        }
        ModelSpec::Gpt {
            embed_dim,
            max_seq_len,
            layers,
            heads,
            ff_dim,
            tie_head,
            ..
        } => {
            let ipa = if heads > 0 && embed_dim % heads == 0 && ff_dim % embed_dim == 0 {
                Some(ModelSpec::Ipa {
                    embed_dim,
                    max_seq_len,
                    layers,
                    col_experts: heads,
                    row_experts: ff_dim / embed_dim,
                    rank: embed_dim / heads,
                    tie_head,
                    residual: false,
                    layernorm: false,
                    prefix_scale: false,
                })
            } else {
                None
            };
            (ipa, Some(spec.clone()))
        }
    }
}

fn count_for(spec: &ModelSpec, vocab: usize, m: usize) -> Result<u64, CliError> {
    let built = spec.build(vocab, 0, Precision::F64)?;
    if m > built.max_seq_len() {
        return Err(CliError::config(format!(
            "m {m} exceeds the model's max_seq_len {}",
            built.max_seq_len()
        )));
    }
    Ok(built.param_count(m))
}

pub fn params(
    config_path: &Path,
    ms: &[usize],
    vocab: Option<usize>,
    json: bool,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config_path)?;
    let vocab_size = match (vocab, &cfg.data.tokenizer) {
        (Some(v), _) => v,
        (None, Some(path)) if path.exists() => {
            tokenizer_bpe::load_tokenizer(path)?.vocab_size()
        }
        _ => 32768,
    };

    let (ipa_spec, gpt_spec) = matched_pair(&cfg.model);
    let mut rows = Vec::new();
    for &m in ms {
        let ipa = ipa_spec.as_ref().map(|s| count_for(s, vocab_size, m)).transpose()?;
        let gpt = gpt_spec.as_ref().map(|s| count_for(s, vocab_size, m)).transpose()?;
        rows.push((m, ipa, gpt));
    }

    if json {
        let payload = serde_json::json!({
            "vocab_size": vocab_size,
            "rows": rows.iter().map(|(m, ipa, gpt)| serde_json::json!({
                "m": m, "ipa": ipa, "gpt": gpt,
            })).collect::<Vec<_>>(),
        });
        println!("{payload}");
        return Ok(());
    }

    println!("vocab_size: {vocab_size}");
    println!("{:>8} {:>14} {:>14}", "m", "ipa", "gpt");
    let fmt = |v: &Option<u64>| v.map_or("-".to_string(), |c| c.to_string());
    for (m, ipa, gpt) in &rows {
        println!("{:>8} {:>14} {:>14}", m, fmt(ipa), fmt(gpt));
    }
    for pair in rows.windows(2) {
        let (m0, i0, g0) = &pair[0];
        let (m1, i1, g1) = &pair[1];
        let delta = |a: &Option<u64>, b: &Option<u64>| match (a, b) {
            (Some(a), Some(b)) => format!("{}", *b as i128 - *a as i128),
            _ => "-".to_string(),
        };
        println!(
            "delta m={m0}->{m1}: ipa {} gpt {}",
            delta(i0, i1),
            delta(g0, g1)
        );
    }
    Ok(())
}
