//! Observation batches and their JSON-lines form.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::matching::Matching;
use super::scheme::MatchingScheme;
use crate::error::{Error, Result};

/// One matching X_t with its observed rewards, aligned with `pairs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub pairs: Vec<(usize, usize)>,
    pub y: Vec<f64>,
}

impl Observation {
    /// sum(X_t).
    pub fn revealed(&self) -> usize {
        self.pairs.len()
    }

    /// Iterates (i, j, y).
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pairs.iter().zip(&self.y).map(|(&(i, j), &y)| (i, j, y))
    }
}

/// {(X_t, Y_t)} for t = 0..T together with how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBatch {
    pub scheme: MatchingScheme,
    pub d1: usize,
    pub d2: usize,
    pub sigma: f64,
    pub seed: Option<u64>,
    pub records: Vec<Observation>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    scheme: MatchingScheme,
    d1: usize,
    d2: usize,
    sigma: f64,
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct Line {
    t: usize,
    pairs: Vec<(usize, usize)>,
    y: Vec<f64>,
}

impl ObservationBatch {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header {
            scheme: self.scheme,
            d1: self.d1,
            d2: self.d2,
            sigma: self.sigma,
            seed: self.seed,
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for (t, rec) in self.records.iter().enumerate() {
            let line = Line { t, pairs: rec.pairs.clone(), y: rec.y.clone() };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Parses and validates a batch; every record must be a feasible
    /// matching for the header's scheme.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (_, first) = lines.next().ok_or_else(|| Error::Format("empty batch file".into()))?;
        let header: Header =
            serde_json::from_str(&first?).map_err(|e| Error::Format(format!("batch header: {e}")))?;
        let mut records = Vec::new();
        for (n, line) in lines {
            let line: Line = serde_json::from_str(&line?)
                .map_err(|e| Error::Format(format!("batch line {}: {e}", n + 1)))?;
            if line.y.len() != line.pairs.len() {
                return Err(Error::Format(format!("batch line {}: {} rewards for {} pairs", n + 1, line.y.len(), line.pairs.len())));
            }
            Matching { d1: header.d1, d2: header.d2, pairs: line.pairs.clone() }
                .check(&header.scheme)
                .map_err(|e| Error::Format(format!("batch line {}: {e}", n + 1)))?;
            records.push(Observation { pairs: line.pairs, y: line.y });
        }
        Ok(ObservationBatch {
            scheme: header.scheme,
            d1: header.d1,
            d2: header.d2,
            sigma: header.sigma,
            seed: header.seed,
            records,
        })
    }
}
