//! Scheduling-independent Monte Carlo plumbing.
//!
//! Realizations are grouped into fixed-size chunks, each chunk is processed
//! sequentially with one RNG stream per realization, and chunk results are
//! merged in chunk order. The output is therefore the same for any number of
//! worker threads.

use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

pub(crate) const CHUNK: usize = 256;

/// Runs `work` over `0..n` in chunks of [`CHUNK`] and returns the per-chunk
/// results in index order.
pub(crate) fn chunked<A, F>(n: usize, work: F) -> Vec<A>
where
    A: Send,
    F: Fn(Range<usize>) -> A + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| work(c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect()
}

/// Running sums of a vector-valued sample.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct VecAcc {
    pub n: u64,
    pub sum: Vec<f64>,
    pub sq: Vec<f64>,
}

impl VecAcc {
    pub fn new(len: usize) -> Self {
        VecAcc {
            n: 0,
            sum: vec![0.0; len],
            sq: vec![0.0; len],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for ((s, q), &v) in self.sum.iter_mut().zip(&mut self.sq).zip(x) {
            *s += v;
            *q += v * v;
        }
    }

    pub fn merge(&mut self, other: &VecAcc) {
        self.n += other.n;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sq.iter_mut().zip(&other.sq) {
            *a += b;
        }
    }

    pub fn merge_all(len: usize, parts: &[VecAcc]) -> VecAcc {
        let mut acc = VecAcc::new(len);
        for p in parts {
            acc.merge(p);
        }
        acc
    }

    pub fn finish(&self) -> Estimate {
        let n = self.n as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let stderr = mean
            .iter()
            .zip(&self.sq)
            .map(|(m, q)| {
                if self.n < 2 {
                    return f64::NAN;
                }
                let var = ((q - n * m * m) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect();
        Estimate {
            n: self.n,
            mean,
            stderr,
        }
    }
}

/// Sample means with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    /// Number of independent samples.
    pub n: u64,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Estimate {
    /// Average of the per-element means.
    pub fn overall(&self) -> f64 {
        self.mean.iter().sum::<f64>() / self.mean.len() as f64
    }
}
