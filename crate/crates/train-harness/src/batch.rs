use crate::{Error, Result};

/// One training batch: `targets[b][t]` is the token following
/// `inputs[b][t]` in the source stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<Vec<usize>>,
    pub targets: Vec<Vec<usize>>,
}

/// Number of whole batches the stream supports before wrapping around.
pub fn num_full_batches(stream_len: usize, batch_size: usize, seq_len: usize) -> usize {
    let span = batch_size * seq_len;
    if stream_len < span + 1 {
        0
    } else {
        (stream_len - 1) / span
    }
}

/// The batch for a given training step. Batches tile the stream in order
/// (step k covers tokens [k*B*m, (k+1)*B*m) plus the shifted targets) and
/// wrap around once the tail no longer fits, so concatenating consecutive
/// batch targets reconstructs the shifted stream exactly.
pub fn batch_at(stream: &[u32], step: u64, batch_size: usize, seq_len: usize) -> Result<Batch> {
    let full = num_full_batches(stream.len(), batch_size, seq_len);
    if full == 0 {
        return Err(Error::Contract(format!(
            "stream of {} tokens cannot fill one {}x{} batch",
            stream.len(),
            batch_size,
            seq_len
        )));
    }
    let span = batch_size * seq_len;
    let start = (step % full as u64) as usize * span;

    let mut inputs = Vec::with_capacity(batch_size);
    let mut targets = Vec::with_capacity(batch_size);
    for b in 0..batch_size {
        let base = start + b * seq_len;
        inputs.push(stream[base..base + seq_len].iter().map(|&t| t as usize).collect());
        targets.push(
            stream[base + 1..base + seq_len + 1]
                .iter()
                .map(|&t| t as usize)
                .collect(),
        );
    }
    Ok(Batch { inputs, targets })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_are_inputs_shifted_by_one() {
        let stream: Vec<u32> = (0..50).collect();
        let b = batch_at(&stream, 0, 3, 4).unwrap();
        assert_eq!(b.inputs[0], vec![0, 1, 2, 3]);
        assert_eq!(b.targets[0], vec![1, 2, 3, 4]);
        assert_eq!(b.inputs[2], vec![8, 9, 10, 11]);
        assert_eq!(b.targets[2], vec![9, 10, 11, 12]);
    }

    #[test]
    fn consecutive_batches_tile_the_stream() {
        let stream: Vec<u32> = (0..100).collect();
        let (bs, m) = (2, 5);
        let full = num_full_batches(stream.len(), bs, m);
        let mut flat_targets = Vec::new();
        for step in 0..full as u64 {
            let b = batch_at(&stream, step, bs, m).unwrap();
            for t in b.targets {
                flat_targets.extend(t);
            }
        }
        let expected: Vec<usize> = stream[1..1 + flat_targets.len()]
            .iter()
            .map(|&t| t as usize)
            .collect();
        assert_eq!(flat_targets, expected);
    }

    #[test]
    fn wraps_around_deterministically() {
        let stream: Vec<u32> = (0..21).collect();
        let full = num_full_batches(stream.len(), 2, 5); // span 10 -> 2 full
        assert_eq!(full, 2);
        let a = batch_at(&stream, 0, 2, 5).unwrap();
        let again = batch_at(&stream, 2, 2, 5).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn too_short_stream_is_a_contract_error() {
        let stream: Vec<u32> = (0..10).collect();
        assert!(batch_at(&stream, 0, 2, 5).is_err());
        assert!(batch_at(&stream, 0, 1, 10).is_err());
        assert!(batch_at(&stream, 0, 1, 9).is_ok());
    }
}
