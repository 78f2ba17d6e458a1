use autodiff_core::Graph;
use rayon::prelude::*;

use crate::threads::init_thread_pool;
use crate::{Error, LanguageModel, Result};

/// Mean cross-entropy over non-overlapping windows of the stream; a final
/// partial window is dropped. `batch_size` only controls parallel chunking,
/// never the result.
pub fn evaluate(
    model: &dyn LanguageModel,
    stream: &[u32],
    seq_len: usize,
    batch_size: usize,
) -> Result<f64> {
    if seq_len == 0 || batch_size == 0 {
        return Err(Error::Contract(
            "seq_len and batch_size must be positive".into(),
        ));
    }
    if stream.len() <= seq_len {
        return Err(Error::Contract(format!(
            "stream of {} tokens is too short to evaluate at m={}",
            stream.len(),
            seq_len
        )));
    }
    let windows = (stream.len() - 1) / seq_len;
    evaluate_windows(model, stream, seq_len, batch_size, 0..windows)
}

/// Mean cross-entropy over an explicit set of window indices.
pub(crate) fn evaluate_windows(
    model: &dyn LanguageModel,
    stream: &[u32],
    seq_len: usize,
    batch_size: usize,
    windows: impl Iterator<Item = usize>,
) -> Result<f64> {
    init_thread_pool();
    let indices: Vec<usize> = windows.collect();
    if indices.is_empty() {
        return Err(Error::Contract("no evaluation windows".into()));
    }

    let mut total = 0.0;
    for chunk in indices.chunks(batch_size) {
        let losses: Vec<Result<f64>> = chunk
            .par_iter()
            .map(|&w| window_loss(model, stream, seq_len, w))
            .collect();
        for l in losses {
            total += l?;
        }
    }
    Ok(total / indices.len() as f64)
}

fn window_loss(model: &dyn LanguageModel, stream: &[u32], seq_len: usize, w: usize) -> Result<f64> {
    let base = w * seq_len;
    let inputs: Vec<usize> = stream[base..base + seq_len].iter().map(|&t| t as usize).collect();
    let targets: Vec<usize> = stream[base + 1..base + seq_len + 1]
        .iter()
        .map(|&t| t as usize)
        .collect();
    let mut g = Graph::with_tracking(model.params(), false);
    let logits = model.forward(&mut g, &inputs)?;
    let loss = g.cross_entropy(logits, &targets)?;
    Ok(g.value(loss).item()?)
}

/// Evenly spaced window subset used for training-loop telemetry; `limit` of
/// zero means every window.
pub(crate) fn telemetry_windows(stream_len: usize, seq_len: usize, limit: usize) -> Vec<usize> {
    let total = if stream_len <= seq_len {
        0
    } else {
        (stream_len - 1) / seq_len
    };
    if total == 0 {
        return Vec::new();
    }
    if limit == 0 || limit >= total {
        return (0..total).collect();
    }
    (0..limit).map(|i| i * total / limit).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn telemetry_windows_are_unique_and_in_range() {
        let w = telemetry_windows(1001, 10, 7);
        assert_eq!(w.len(), 7);
        let mut sorted = w.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 7);
        assert!(w.iter().all(|&i| i < 100));

        assert_eq!(telemetry_windows(101, 10, 0).len(), 10);
        assert_eq!(telemetry_windows(5, 10, 3).len(), 0);
    }
}
