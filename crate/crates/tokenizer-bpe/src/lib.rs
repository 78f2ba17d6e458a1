//! Byte-level BPE tokenizer: training, encoding, decoding, persistence.
//!
//! The base alphabet is all 256 single bytes plus one end-of-text token, so
//! every byte string encodes without an unknown-token mechanism. Merges are
//! learned greedily by pair frequency and never cross whitespace boundaries;
//! a single space attaches to the following word as a prefix marker.

mod format;
mod pretoken;
mod train;

pub use format::{
    load_tokenizer, read_tokenizer, save_tokenizer, tokenizer_bytes, write_tokenizer,
    FORMAT_VERSION,
};
pub use train::bpe_train;

/// Errors from tokenizer training, encoding, and persistence.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("token id out of range: {id} >= {vocab}")]
    IdOutOfRange { id: u32, vocab: usize },

    #[error("malformed tokenizer file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Id reserved for the end-of-text marker.
pub const EOT_ID: u32 = 256;
/// Byte rendering of the end-of-text token (used by decode and the file
/// format; never produced by merges).
pub const EOT_BYTES: &[u8] = b"<|eot|>";
/// Base alphabet size: 256 bytes + end-of-text.
pub const BASE_VOCAB: usize = 257;

/// Bijective id <-> token byte-string table. Ids are contiguous from 0:
/// 0..=255 are the single bytes, 256 is end-of-text, merged tokens follow.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<Vec<u8>>,
}

impl Vocab {
    /// The byte-level vocabulary with no merges.
    pub fn base() -> Self {
        let mut tokens: Vec<Vec<u8>> = (0u16..256).map(|b| vec![b as u8]).collect();
        tokens.push(EOT_BYTES.to_vec());
        Vocab { tokens }
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn token_bytes(&self, id: u32) -> Result<&[u8]> {
        self.tokens
            .get(id as usize)
            .map(|t| t.as_slice())
            .ok_or(Error::IdOutOfRange {
                id,
                vocab: self.tokens.len(),
            })
    }

    pub fn contains_bytes(&self, bytes: &[u8]) -> bool {
        self.tokens.iter().any(|t| t == bytes)
    }

    fn push(&mut self, bytes: Vec<u8>) -> u32 {
        self.tokens.push(bytes);
        (self.tokens.len() - 1) as u32
    }
}

/// Ordered merge rules. Merge `i` rewrites the adjacent id pair
/// `(left, right)` to id `BASE_VOCAB + i`; applying the list in order is
/// deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergeList {
    pairs: Vec<(u32, u32)>,
}

impl MergeList {
    pub fn new(pairs: Vec<(u32, u32)>) -> Self {
        MergeList { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    fn push(&mut self, left: u32, right: u32) {
        self.pairs.push((left, right));
    }
}

/// A frozen tokenizer. Encode and decode are reentrant; no state mutates
/// after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Tokenizer {
    vocab: Vocab,
    merges: MergeList,
}

impl Tokenizer {
    pub fn new(vocab: Vocab, merges: MergeList) -> Result<Self> {
        if vocab.size() < BASE_VOCAB {
            return Err(Error::Contract(format!(
                "vocabulary must include the {BASE_VOCAB} base tokens, got {}",
                vocab.size()
            )));
        }
        if vocab.size() != BASE_VOCAB + merges.len() {
            return Err(Error::Contract(format!(
                "vocabulary size {} does not match {} merges",
                vocab.size(),
                merges.len()
            )));
        }
        Ok(Tokenizer { vocab, merges })
    }

    /// The trivial byte-level tokenizer (V = 257, no merges).
    pub fn byte_level() -> Self {
        Tokenizer {
            vocab: Vocab::base(),
            merges: MergeList::default(),
        }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn merges(&self) -> &MergeList {
        &self.merges
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.size()
    }

    pub fn eot_id(&self) -> u32 {
        EOT_ID
    }

    /// Encode a byte stream. Depends only on the vocabulary and merge list,
    /// never on corpus statistics.
    pub fn encode(&self, text: &[u8]) -> Vec<u32> {
        if text.is_empty() {
            return Vec::new();
        }
        let ranks = self.rank_table();
        let mut out = Vec::with_capacity(text.len() / 2);
        for chunk in pretoken::chunks(text) {
            encode_chunk(chunk, &ranks, &mut out);
        }
        out
    }

    /// Decode ids to the concatenation of their token byte strings.
    pub fn decode(&self, ids: &[u32]) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(ids.len() * 2);
        for &id in ids {
            out.extend_from_slice(self.vocab.token_bytes(id)?);
        }
        Ok(out)
    }

    /// Pair -> (rank, merged id) lookup for encoding.
    fn rank_table(&self) -> std::collections::HashMap<(u32, u32), (u32, u32)> {
        self.merges
            .pairs()
            .iter()
            .enumerate()
            .map(|(i, &(l, r))| ((l, r), (i as u32, (BASE_VOCAB + i) as u32)))
            .collect()
    }
}

/// Applies merges to one pre-token: repeatedly rewrite the lowest-ranked
/// adjacent pair. For merge lists produced by training (where every rule's
/// parts predate it) this equals applying the list in order.
fn encode_chunk(
    chunk: &[u8],
    ranks: &std::collections::HashMap<(u32, u32), (u32, u32)>,
    out: &mut Vec<u32>,
) {
    let mut ids: Vec<u32> = chunk.iter().map(|&b| b as u32).collect();
    loop {
        let mut best: Option<(u32, usize, u32)> = None;
        for i in 0..ids.len().saturating_sub(1) {
            if let Some(&(rank, merged)) = ranks.get(&(ids[i], ids[i + 1])) {
                if best.map_or(true, |(r, _, _)| rank < r) {
                    best = Some((rank, i, merged));
                }
            }
        }
        let Some((_, pos, merged)) = best else { break };
        ids[pos] = merged;
        ids.remove(pos + 1);
    }
    out.extend_from_slice(&ids);
}
