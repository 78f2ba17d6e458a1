use std::path::{Path, PathBuf};

use tokenizer_bpe::{bpe_train, Tokenizer};

use crate::{Error, Result};

/// Where the text comes from and how it splits.
#[derive(Debug, Clone)]
pub enum CorpusSource {
    /// One file cut into train/valid/test by token-count fractions.
    SingleFile { path: PathBuf, fractions: [f64; 3] },
    /// Pre-split files.
    PreSplit {
        train: PathBuf,
        valid: PathBuf,
        test: PathBuf,
    },
}

/// Contiguous token-id streams per split.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub train: Vec<u32>,
    pub valid: Vec<u32>,
    pub test: Vec<u32>,
}

impl Corpus {
    pub fn split(&self, name: &str) -> Option<&[u32]> {
        match name {
            "train" => Some(&self.train),
            "valid" => Some(&self.valid),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn check_fractions(fractions: &[f64; 3]) -> Result<()> {
    if fractions.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::Contract(
            "every split fraction must be positive".into(),
        ));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "split fractions must sum to 1, got {sum}"
        )));
    }
    Ok(())
}

/// Tokenizes the source into per-split id streams with an existing
/// tokenizer. With fractions, the whole file is tokenized once and the id
/// stream is cut at `round(fraction * total)`, so split sizes match the
/// fractions to within one token.
pub fn load_corpus(source: &CorpusSource, tokenizer: &Tokenizer) -> Result<Corpus> {
    let corpus = match source {
        CorpusSource::SingleFile { path, fractions } => {
            check_fractions(fractions)?;
            let text = read_bytes(path)?;
            let ids = tokenizer.encode(&text);
            let total = ids.len();
            let c1 = (fractions[0] * total as f64).round() as usize;
            let c2 = ((fractions[0] + fractions[1]) * total as f64).round() as usize;
            let c1 = c1.min(total);
            let c2 = c2.clamp(c1, total);
            Corpus {
                train: ids[..c1].to_vec(),
                valid: ids[c1..c2].to_vec(),
                test: ids[c2..].to_vec(),
            }
        }
        CorpusSource::PreSplit { train, valid, test } => Corpus {
            train: tokenizer.encode(&read_bytes(train)?),
            valid: tokenizer.encode(&read_bytes(valid)?),
            test: tokenizer.encode(&read_bytes(test)?),
        },
    };
    for (name, split) in [
        ("train", &corpus.train),
        ("valid", &corpus.valid),
        ("test", &corpus.test),
    ] {
        if split.is_empty() {
            return Err(Error::Contract(format!("{name} split is empty")));
        }
    }
    Ok(corpus)
}

/// Trains a fresh tokenizer on the training split only — merges never see
/// validation or test text — then tokenizes as [`load_corpus`].
pub fn load_corpus_with_new_tokenizer(
    source: &CorpusSource,
    target_vocab: usize,
) -> Result<(Corpus, Tokenizer)> {
    let tokenizer = match source {
        CorpusSource::SingleFile { path, fractions } => {
            check_fractions(fractions)?;
            let text = read_bytes(path)?;
            let train_bytes = (fractions[0] * text.len() as f64).round() as usize;
            let train_bytes = train_bytes.clamp(1, text.len());
            bpe_train(&text[..train_bytes], target_vocab)?
        }
        CorpusSource::PreSplit { train, .. } => bpe_train(&read_bytes(train)?, target_vocab)?,
    };
    let corpus = load_corpus(source, &tokenizer)?;
    Ok((corpus, tokenizer))
}
