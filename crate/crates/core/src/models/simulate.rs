//! Response simulation and the dataset CSV format.

use super::params::{ItemParams, Proportions};
use crate::error::{Error, Result};
use crate::par::{map_range, Execution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;

/// Rows simulated per random stream.
pub const CHUNK_ROWS: usize = 4096;

/// N response vectors over J items. Bit j of a row is the response to item j + 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    j: usize,
    responses: Vec<u64>,
    #[serde(skip)]
    pub true_params: Option<(ItemParams, Proportions)>,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(j: usize, responses: Vec<u64>) -> Result<Self> {
        if j == 0 || j > 64 {
            return Err(Error::SizeGuard(format!("J = {j} must be in 1..=64")));
        }
        if j < 64 && responses.iter().any(|r| r >> j != 0) {
            return Err(Error::Dimension(format!("a response vector exceeds J = {j}")));
        }
        Ok(Dataset { j, responses, true_params: None, seed: None })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn responses(&self) -> &[u64] {
        &self.responses
    }

    /// Distinct response patterns in ascending order with their counts.
    pub fn pattern_counts(&self) -> Vec<(u64, u64)> {
        let mut sorted = self.responses.clone();
        sorted.sort_unstable();
        let mut out: Vec<(u64, u64)> = Vec::new();
        for r in sorted {
            match out.last_mut() {
                Some((last, n)) if *last == r => *n += 1,
                _ => out.push((r, 1)),
            }
        }
        out
    }

    /// Empirical P(R ⪰ r) for every r in ascending bitmask order. Requires J ≤ 20.
    pub fn upper_frequencies(&self) -> Result<Vec<f64>> {
        if self.j > 20 {
            return Err(Error::SizeGuard(format!("J = {} exceeds 20", self.j)));
        }
        let size = 1usize << self.j;
        let mut f = vec![0.0; size];
        for &r in &self.responses {
            f[r as usize] += 1.0;
        }
        // superset sums
        for bit in 0..self.j {
            for r in 0..size {
                if r >> bit & 1 == 0 {
                    f[r] += f[r | 1 << bit];
                }
            }
        }
        let n = self.responses.len().max(1) as f64;
        Ok(f.into_iter().map(|x| x / n).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.responses.len() * self.j * 2);
        for &r in &self.responses {
            let line: Vec<&str> = (0..self.j).map(|j| if r >> j & 1 == 1 { "1" } else { "0" }).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut j = None;
        let mut responses = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            if *j.get_or_insert(rec.len()) != rec.len() {
                return Err(Error::Dimension(format!("row {} has {} entries", line + 1, rec.len())));
            }
            let mut r = 0u64;
            for (i, f) in rec.iter().enumerate() {
                match f {
                    "0" => {}
                    "1" => r |= 1 << i,
                    _ => return Err(Error::Parse(format!("row {}: '{f}' is not 0 or 1", line + 1))),
                }
            }
            responses.push(r);
        }
        let j = j.ok_or_else(|| Error::Parse("dataset is empty".into()))?;
        Dataset::new(j, responses)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }
}

fn simulate_chunk(theta: &ItemParams, cumulative: &[f64], seed: u64, chunk: usize, rows: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    (0..rows)
        .map(|_| {
            let u: f64 = rng.random();
            let a = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
            (0..theta.j()).fold(0u64, |r, j| if rng.random::<f64>() < theta.get(j, a) { r | 1 << j } else { r })
        })
        .collect()
}

/// Draws `n` i.i.d. response vectors from the latent class mixture.
pub fn simulate(theta: &ItemParams, p: &Proportions, n: usize, seed: u64) -> Result<Dataset> {
    simulate_with(Execution::default(), theta, p, n, seed)
}

/// [`simulate`] with an explicit execution mode. Output does not depend on the mode.
pub fn simulate_with(exec: Execution, theta: &ItemParams, p: &Proportions, n: usize, seed: u64) -> Result<Dataset> {
    if p.len() != theta.m() {
        return Err(Error::Dimension(format!("{} proportions for m = {}", p.len(), theta.m())));
    }
    if theta.j() > 64 {
        return Err(Error::SizeGuard("J exceeds 64".into()));
    }
    let cumulative: Vec<f64> = p
        .as_slice()
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let chunks = n.div_ceil(CHUNK_ROWS);
    let parts = map_range(exec, chunks, |c| {
        let rows = CHUNK_ROWS.min(n - c * CHUNK_ROWS);
        simulate_chunk(theta, &cumulative, seed, c, rows)
    });
    let mut data = Dataset::new(theta.j(), parts.concat())?;
    data.true_params = Some((theta.clone(), p.clone()));
    data.seed = Some(seed);
    Ok(data)
}
