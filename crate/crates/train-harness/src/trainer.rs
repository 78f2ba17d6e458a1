use std::io::Write;
use std::path::Path;
use std::time::Instant;

use autodiff_core::{Gradients, Graph};
use rayon::prelude::*;

use crate::adam::{adam_step, AdamHyper, AdamState};
use crate::batch::{batch_at, Batch};
use crate::checkpoint::save_checkpoint;
use crate::corpus::Corpus;
use crate::eval::{evaluate_windows, telemetry_windows};
use crate::metrics::MetricsRecord;
use crate::spec::CheckpointMeta;
use crate::threads::init_thread_pool;
use crate::{Error, LanguageModel, Result};

/// Output sinks for a training run. All optional; the loss history is
/// always returned.
#[derive(Default)]
pub struct TrainHooks<'a> {
    /// JSONL metrics sink.
    pub metrics: Option<&'a mut dyn Write>,
    /// Written whenever the test loss improves.
    pub best_checkpoint: Option<&'a Path>,
    /// Written once at completion, and on divergence before aborting.
    pub final_checkpoint: Option<&'a Path>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub history: Vec<MetricsRecord>,
    pub final_step: u64,
    pub best_eval_loss: Option<f64>,
}

/// Runs the training loop described by `meta.train`, starting from
/// `meta.step` (zero for a fresh model, the saved counter when resuming).
/// Deterministic given the seed: batches tile the stream in step order and
/// gradient reduction is sequential in batch order.
pub fn train(
    model: &mut dyn LanguageModel,
    adam: &mut AdamState,
    meta: &mut CheckpointMeta,
    corpus: &Corpus,
    hooks: &mut TrainHooks,
) -> Result<TrainOutcome> {
    let cfg = meta.train.clone();
    cfg.validate()?;
    if cfg.seq_len > model.max_seq_len() {
        return Err(Error::Contract(format!(
            "train seq_len {} exceeds model maximum {}",
            cfg.seq_len,
            model.max_seq_len()
        )));
    }
    init_thread_pool();

    let params_count = model.param_count(cfg.seq_len);
    let hyper = AdamHyper {
        learning_rate: cfg.learning_rate,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        epsilon: cfg.adam_epsilon,
    };

    let mut history = Vec::new();
    let mut step_times_ms: Vec<f64> = Vec::new();
    let start_step = meta.step;

    // Initial evaluation. Time-per-iteration is not observable before the
    // first update, so time one batch without applying it.
    let probe_ms = {
        let t0 = Instant::now();
        let batch = batch_at(&corpus.train, start_step, cfg.batch_size, cfg.seq_len)?;
        let _ = batch_step(model, &batch)?;
        t0.elapsed().as_secs_f64() * 1e3
    };
    log_eval(
        model, adam, meta, corpus, &cfg, start_step, probe_ms, params_count, hooks,
        &mut history,
    )?;

    for step in start_step..cfg.max_steps {
        let t0 = Instant::now();
        let batch = batch_at(&corpus.train, step, cfg.batch_size, cfg.seq_len)?;
        let (loss, mut grads) = batch_step(model, &batch)?;

        if !loss.is_finite() {
            meta.step = step;
            if let Some(path) = hooks.final_checkpoint {
                save_checkpoint(path, meta, model, adam)?;
            }
            return Err(Error::Diverged { step });
        }

        if let Some(limit) = cfg.grad_clip {
            let norm = grads.global_norm();
            if norm > limit {
                grads.scale(limit / norm);
            }
        }
        if let Err(e) = adam_step(model.params_mut(), &grads, adam, &hyper) {
            meta.step = step;
            if let Some(path) = hooks.final_checkpoint {
                save_checkpoint(path, meta, model, adam)?;
            }
            return Err(e);
        }
        meta.step = step + 1;
        step_times_ms.push(t0.elapsed().as_secs_f64() * 1e3);

        let done = step + 1 == cfg.max_steps;
        if (step + 1) % cfg.eval_interval == 0 || done {
            let ms = median(&step_times_ms).unwrap_or(probe_ms);
            log_eval(
                model, adam, meta, corpus, &cfg, step + 1, ms, params_count, hooks,
                &mut history,
            )?;
            step_times_ms.clear();
        }
    }

    if let Some(path) = hooks.final_checkpoint {
        save_checkpoint(path, meta, model, adam)?;
    }
    Ok(TrainOutcome {
        history,
        final_step: meta.step,
        best_eval_loss: meta.best_eval_loss,
    })
}

/// Mean loss and mean parameter gradients over one batch. Sequences run on
/// independent graphs (possibly in parallel); the reduction is sequential
/// in batch order, so the result does not depend on scheduling.
fn batch_step(model: &dyn LanguageModel, batch: &Batch) -> Result<(f64, Gradients)> {
    let per_item: Vec<Result<(f64, Gradients)>> = batch
        .inputs
        .par_iter()
        .zip(batch.targets.par_iter())
        .map(|(inputs, targets)| {
            let mut g = Graph::new(model.params());
            let logits = model.forward(&mut g, inputs)?;
            let loss = g.cross_entropy(logits, targets)?;
            let grads = g.backward(loss)?;
            Ok((g.value(loss).item()?, grads))
        })
        .collect();

    let mut total_loss = 0.0;
    let mut total_grads: Option<Gradients> = None;
    for item in per_item {
        let (loss, grads) = item?;
        total_loss += loss;
        match &mut total_grads {
            Some(acc) => acc.add_assign(&grads)?,
            slot => *slot = Some(grads),
        }
    }
    let b = batch.inputs.len() as f64;
    let mut grads = total_grads.expect("batch is non-empty");
    grads.scale(1.0 / b);
    Ok((total_loss / b, grads))
}

#[allow(clippy::too_many_arguments)]
fn log_eval(
    model: &dyn LanguageModel,
    adam: &AdamState,
    meta: &mut CheckpointMeta,
    corpus: &Corpus,
    cfg: &crate::spec::TrainConfig,
    step: u64,
    ms_per_iter: f64,
    params_count: u64,
    hooks: &mut TrainHooks,
    history: &mut Vec<MetricsRecord>,
) -> Result<()> {
    let mut test_loss = None;
    for (split, stream) in [("train", &corpus.train), ("test", &corpus.test)] {
        let windows = telemetry_windows(stream.len(), cfg.seq_len, cfg.eval_windows);
        if windows.is_empty() {
            return Err(Error::Contract(format!(
                "{split} split too short to evaluate at m={}",
                cfg.seq_len
            )));
        }
        let loss = evaluate_windows(
            model,
            stream,
            cfg.seq_len,
            cfg.batch_size.max(1),
            windows.into_iter(),
        )?;
        if split == "test" {
            test_loss = Some(loss);
        }
        let record = MetricsRecord::new(step, split, loss, ms_per_iter, params_count)?;
        if let Some(sink) = hooks.metrics.as_deref_mut() {
            record.write_jsonl(sink)?;
        }
        history.push(record);
    }

    let test_loss = test_loss.expect("test split evaluated");
    let improved = meta.best_eval_loss.map_or(true, |best| test_loss < best);
    if improved {
        meta.best_eval_loss = Some(test_loss);
        if let Some(path) = hooks.best_checkpoint {
            save_checkpoint(path, meta, model, adam)?;
        }
    }
    Ok(())
}

fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    })
}

/// Median wall-clock milliseconds per optimizer step: `warmup` throwaway
/// steps, then the median over `samples` further steps. Mutates the model.
pub fn median_step_ms(
    model: &mut dyn LanguageModel,
    adam: &mut AdamState,
    corpus: &Corpus,
    cfg: &crate::spec::TrainConfig,
    warmup: usize,
    samples: usize,
) -> Result<f64> {
    init_thread_pool();
    let hyper = AdamHyper {
        learning_rate: cfg.learning_rate,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        epsilon: cfg.adam_epsilon,
    };
    let mut times = Vec::with_capacity(samples);
    for step in 0..(warmup + samples) as u64 {
        let t0 = Instant::now();
        let batch = batch_at(&corpus.train, step, cfg.batch_size, cfg.seq_len)?;
        let (_, grads) = batch_step(model, &batch)?;
        adam_step(model.params_mut(), &grads, adam, &hyper)?;
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        if step >= warmup as u64 {
            times.push(ms);
        }
    }
    median(&times).ok_or_else(|| Error::Contract("no timing samples".into()))
}
