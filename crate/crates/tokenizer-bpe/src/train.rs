use std::collections::{HashMap, HashSet};

use crate::pretoken;
use crate::{Error, MergeList, Result, Tokenizer, Vocab, BASE_VOCAB};

/// Trains a tokenizer by greedy highest-frequency pair merging.
///
/// Merging stops when the vocabulary reaches `target_vocab` or no pair
/// occurs at least twice. Ties break on the lexicographic order of the
/// pair's byte strings, so retraining on the same corpus reproduces the
/// identical merge list.
pub fn bpe_train(corpus: &[u8], target_vocab: usize) -> Result<Tokenizer> {
    if corpus.is_empty() {
        return Err(Error::Contract("training corpus is empty".into()));
    }
    if target_vocab < BASE_VOCAB {
        return Err(Error::Contract(format!(
            "target vocabulary {target_vocab} is below the {BASE_VOCAB} base tokens"
        )));
    }

    let mut vocab = Vocab::base();
    let mut merges = MergeList::default();
    let mut seen_bytes: HashSet<Vec<u8>> =
        (0..vocab.size()).map(|i| vocab.token_bytes(i as u32).unwrap().to_vec()).collect();

    // Distinct pre-token chunks with their corpus frequencies.
    let mut chunk_freq: HashMap<&[u8], u64> = HashMap::new();
    for chunk in pretoken::chunks(corpus) {
        *chunk_freq.entry(chunk).or_insert(0) += 1;
    }
    let mut words: Vec<(Vec<u32>, u64)> = chunk_freq
        .into_iter()
        .map(|(chunk, freq)| (chunk.iter().map(|&b| b as u32).collect(), freq))
        .collect();
    // Fixed processing order; makes debugging reproducible even though the
    // selection rule alone already guarantees a deterministic result.
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut pair_counts: HashMap<(u32, u32), i64> = HashMap::new();
    let mut pair_words: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (wi, (ids, freq)) in words.iter().enumerate() {
        for w in ids.windows(2) {
            let pair = (w[0], w[1]);
            *pair_counts.entry(pair).or_insert(0) += *freq as i64;
            pair_words.entry(pair).or_default().push(wi);
        }
    }

    while vocab.size() < target_vocab {
        let Some(pair) = select_pair(&pair_counts, &vocab, &mut seen_bytes) else {
            break;
        };

        let mut merged_bytes = vocab.token_bytes(pair.0)?.to_vec();
        merged_bytes.extend_from_slice(vocab.token_bytes(pair.1)?);
        let new_id = vocab.push(merged_bytes.clone());
        seen_bytes.insert(merged_bytes);
        merges.push(pair.0, pair.1);

        // Rewrite only the words that contain the chosen pair, updating the
        // counts from their before/after pair multisets.
        let candidates = pair_words.remove(&pair).unwrap_or_default();
        let mut touched: Vec<usize> = candidates;
        touched.sort_unstable();
        touched.dedup();
        for wi in touched {
            let (ids, freq) = &words[wi];
            if !contains_pair(ids, pair) {
                continue; // stale index entry from an earlier rewrite
            }
            let freq = *freq as i64;
            for w in ids.windows(2) {
                *pair_counts.entry((w[0], w[1])).or_insert(0) -= freq;
            }
            let rewritten = merge_pair(ids, pair, new_id);
            for w in rewritten.windows(2) {
                let p = (w[0], w[1]);
                *pair_counts.entry(p).or_insert(0) += freq;
                pair_words.entry(p).or_default().push(wi);
            }
            words[wi].0 = rewritten;
        }
        pair_counts.remove(&pair);
    }

    Tokenizer::new(vocab, merges)
}

/// Highest-count pair occurring at least twice; ties resolved by the
/// lexicographic order of (left bytes, right bytes). Pairs whose merged
/// byte string already names a token are skipped to keep the vocabulary
/// bijective.
fn select_pair(
    pair_counts: &HashMap<(u32, u32), i64>,
    vocab: &Vocab,
    seen_bytes: &mut HashSet<Vec<u8>>,
) -> Option<(u32, u32)> {
    let mut ranked: Vec<(i64, (u32, u32))> = pair_counts
        .iter()
        .filter(|(_, &c)| c >= 2)
        .map(|(&p, &c)| (c, p))
        .collect();
    ranked.sort_by(|a, b| {
        b.0.cmp(&a.0).then_with(|| {
            let (al, ar) = pair_bytes(vocab, a.1);
            let (bl, br) = pair_bytes(vocab, b.1);
            al.cmp(bl).then(ar.cmp(br))
        })
    });
    for (_, pair) in ranked {
        let mut joined = vocab.token_bytes(pair.0).unwrap().to_vec();
        joined.extend_from_slice(vocab.token_bytes(pair.1).unwrap());
        if !seen_bytes.contains(&joined) {
            return Some(pair);
        }
    }
    None
}

fn pair_bytes(vocab: &Vocab, pair: (u32, u32)) -> (&[u8], &[u8]) {
    (
        vocab.token_bytes(pair.0).unwrap(),
        vocab.token_bytes(pair.1).unwrap(),
    )
}

fn contains_pair(ids: &[u32], pair: (u32, u32)) -> bool {
    ids.windows(2).any(|w| (w[0], w[1]) == pair)
}

/// Left-to-right non-overlapping rewrite of `pair` to `new_id`.
fn merge_pair(ids: &[u32], pair: (u32, u32), new_id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(ids.len());
    let mut i = 0;
    while i < ids.len() {
        if i + 1 < ids.len() && (ids[i], ids[i + 1]) == pair {
            out.push(new_id);
            i += 2;
        } else {
            out.push(ids[i]);
            i += 1;
        }
    }
    out
}
