use autodiff_core::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, LanguageModel, Result};

/// Autoregressive sampling. Temperature zero takes the argmax (lowest id on
/// exact ties); otherwise tokens are drawn from softmax(logits /
/// temperature) with a ChaCha stream seeded by `seed`, so equal seeds give
/// equal output. Generation stops early if the context window fills up.
pub fn generate(
    model: &dyn LanguageModel,
    prompt: &[u32],
    max_new: usize,
    temperature: f64,
    seed: u64,
) -> Result<Vec<u32>> {
    if prompt.is_empty() {
        return Err(Error::Contract("prompt must not be empty".into()));
    }
    if prompt.len() >= model.max_seq_len() {
        return Err(Error::Contract(format!(
            "prompt of {} tokens does not fit the {}-token context",
            prompt.len(),
            model.max_seq_len()
        )));
    }
    if !(temperature >= 0.0) {
        return Err(Error::Contract(format!(
            "temperature must be non-negative, got {temperature}"
        )));
    }

    let vocab = model.vocab_size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<u32> = prompt.to_vec();

    for _ in 0..max_new {
        if ids.len() >= model.max_seq_len() {
            break;
        }
        let inputs: Vec<usize> = ids.iter().map(|&t| t as usize).collect();
        let mut g = Graph::with_tracking(model.params(), false);
        let logits = model.forward(&mut g, &inputs)?;
        let m = inputs.len();
        let last: Vec<f64> = (0..vocab)
            .map(|v| g.value(logits).at(&[v, m - 1]))
            .collect();

        let next = if temperature == 0.0 {
            argmax(&last)
        } else {
            sample(&last, temperature, &mut rng)
        };
        ids.push(next as u32);
    }
    Ok(ids)
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn sample(scores: &[f64], temperature: f64, rng: &mut ChaCha8Rng) -> usize {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores
        .iter()
        .map(|&s| ((s - max) / temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let draw: f64 = rng.random_range(0.0..1.0) * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if draw < acc {
            return i;
        }
    }
    weights.len() - 1
}
