use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One line of a JSONL trace. `loss` and `grad_norm_sq` always refer to the
/// full objective; optimizer-specific fields are `null` where they do not
/// apply (baselines, or iteration 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub iter: usize,
    pub epoch: usize,
    pub sfo_calls: u64,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub delta_k: Option<f64>,
    pub lambda_k: Option<f64>,
    pub fell_back: bool,
    pub wall_ms: Option<f64>,
}

/// Writes records one JSON object per line, flushing after each so a failed
/// run leaves a readable prefix.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        TraceWriter { out }
    }

    pub fn write(&mut self, rec: &TraceRecord) -> Result<()> {
        let line = serde_json::to_string(rec).expect("trace records always serialize");
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parses a JSONL trace back into records.
pub fn read_trace(text: &str) -> serde_json::Result<Vec<TraceRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_field_set() {
        let rec = TraceRecord {
            iter: 3,
            epoch: 0,
            sfo_calls: 30,
            loss: 0.5,
            grad_norm_sq: 1e-3,
            alpha: Some(1.0),
            beta: Some(1.0),
            delta_k: Some(0.01),
            lambda_k: None,
            fell_back: false,
            wall_ms: None,
        };
        let mut w = TraceWriter::new(Vec::new());
        w.write(&rec).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        let mut expected = [
            "iter",
            "epoch",
            "sfo_calls",
            "loss",
            "grad_norm_sq",
            "alpha",
            "beta",
            "delta_k",
            "lambda_k",
            "fell_back",
            "wall_ms",
        ];
        expected.sort_unstable();
        assert_eq!(keys, expected);
        assert_eq!(read_trace(&text).unwrap(), vec![rec]);
    }
}
