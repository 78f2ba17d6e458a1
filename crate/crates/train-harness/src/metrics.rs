use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One telemetry line. Serialized as JSONL with exactly these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub step: u64,
    pub split: String,
    pub loss: f64,
    pub ms_per_iter: f64,
    pub params: u64,
}

impl MetricsRecord {
    pub fn new(step: u64, split: &str, loss: f64, ms_per_iter: f64, params: u64) -> Result<Self> {
        if !loss.is_finite() {
            return Err(Error::Contract(format!(
                "metrics loss must be finite, got {loss}"
            )));
        }
        if !(ms_per_iter > 0.0) {
            return Err(Error::Contract(format!(
                "metrics ms_per_iter must be positive, got {ms_per_iter}"
            )));
        }
        Ok(MetricsRecord {
            step,
            split: split.to_string(),
            loss,
            ms_per_iter,
            params,
        })
    }

    pub fn write_jsonl(&self, out: &mut dyn Write) -> Result<()> {
        serde_json::to_writer(&mut *out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// Parses a JSONL metrics stream.
pub fn read_metrics(reader: impl BufRead) -> Result<Vec<MetricsRecord>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
