//! Tokenizer file format.
//!
//! A single text file with `\n` line endings, bit-exact across platforms:
//! line 1 is the version tag, line 2 the vocabulary size V, then V lines of
//! base64-encoded token byte strings (ids 0..V in order), then one line per
//! merge holding the left and right token ids separated by one space.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;

use crate::{Error, MergeList, Result, Tokenizer, Vocab, BASE_VOCAB, EOT_BYTES};

pub const FORMAT_VERSION: &str = "ipa-bpe-1";

pub fn write_tokenizer(tokenizer: &Tokenizer, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{FORMAT_VERSION}")?;
    writeln!(out, "{}", tokenizer.vocab_size())?;
    for id in 0..tokenizer.vocab_size() {
        writeln!(out, "{}", B64.encode(tokenizer.vocab().token_bytes(id as u32)?))?;
    }
    for &(l, r) in tokenizer.merges().pairs() {
        writeln!(out, "{l} {r}")?;
    }
    Ok(())
}

pub fn read_tokenizer(input: &mut impl Read) -> Result<Tokenizer> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    let mut next_line = |what: &str| -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Format(format!("missing {what}")))
    };

    let version = next_line("version tag")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {version:?}, expected {FORMAT_VERSION:?}"
        )));
    }
    let v: usize = next_line("vocabulary size")?
        .trim()
        .parse()
        .map_err(|e| Error::Format(format!("bad vocabulary size: {e}")))?;
    if v < BASE_VOCAB {
        return Err(Error::Format(format!(
            "vocabulary size {v} is below the {BASE_VOCAB} base tokens"
        )));
    }
    // Guard against absurd sizes from corrupt input before allocating.
    if v > 1 << 24 {
        return Err(Error::Format(format!("vocabulary size {v} is implausible")));
    }

    let mut tokens: Vec<Vec<u8>> = Vec::with_capacity(v);
    for id in 0..v {
        let line = next_line("token line")?;
        let bytes = B64
            .decode(line.trim())
            .map_err(|e| Error::Format(format!("token {id}: bad base64: {e}")))?;
        tokens.push(bytes);
    }
    for (id, token) in tokens.iter().enumerate().take(256) {
        if token.as_slice() != [id as u8] {
            return Err(Error::Format(format!(
                "token {id} must be the single byte {id:#04x}"
            )));
        }
    }
    if tokens[256] != EOT_BYTES {
        return Err(Error::Format("token 256 must be the end-of-text marker".into()));
    }

    let mut pairs = Vec::with_capacity(v - BASE_VOCAB);
    for i in 0..v - BASE_VOCAB {
        let line = next_line("merge line")?;
        let mut parts = line.split_whitespace();
        let parse = |s: Option<&str>| -> Result<u32> {
            s.ok_or_else(|| Error::Format(format!("merge {i}: missing id")))?
                .parse()
                .map_err(|e| Error::Format(format!("merge {i}: bad id: {e}")))
        };
        let left = parse(parts.next())?;
        let right = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::Format(format!("merge {i}: trailing fields")));
        }
        let new_id = BASE_VOCAB + i;
        // Each rule may only reference tokens that exist before it.
        if left as usize >= new_id || right as usize >= new_id {
            return Err(Error::Format(format!(
                "merge {i}: pair ({left}, {right}) references a later token"
            )));
        }
        let mut joined = tokens[left as usize].clone();
        joined.extend_from_slice(&tokens[right as usize]);
        if joined != tokens[new_id] {
            return Err(Error::Format(format!(
                "merge {i}: token {new_id} bytes do not equal left + right"
            )));
        }
        pairs.push((left, right));
    }
    if lines.next().transpose()?.is_some_and(|l| !l.trim().is_empty()) {
        return Err(Error::Format("trailing content after merges".into()));
    }

    let mut vocab = Vocab::base();
    for t in tokens.into_iter().skip(BASE_VOCAB) {
        vocab.push(t);
    }
    Tokenizer::new(vocab, MergeList::new(pairs))
}

pub fn save_tokenizer(tokenizer: &Tokenizer, path: impl AsRef<Path>) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write_tokenizer(tokenizer, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn load_tokenizer(path: impl AsRef<Path>) -> Result<Tokenizer> {
    let mut file = File::open(path)?;
    read_tokenizer(&mut file)
}

/// The canonical serialized bytes; also what checkpoint hashes refer to.
pub fn tokenizer_bytes(tokenizer: &Tokenizer) -> Vec<u8> {
    let mut buf = Vec::new();
    write_tokenizer(tokenizer, &mut buf).expect("in-memory write cannot fail");
    buf
}
