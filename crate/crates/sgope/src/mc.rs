//! Batched Monte Carlo with deterministic seeding.
//!
//! A run of `budget` samples is split into [`BATCHES`] batches. Batch `b`
//! draws from a ChaCha8 generator seeded with the run seed and switched to
//! stream `b`, so batches are independent and their results do not depend on
//! how they are scheduled across threads. Batch means are kept on the
//! estimate: sums, scalings, ratios and linear fits of estimates are carried
//! out batch by batch, which propagates standard errors (including any
//! correlation from shared seeds) without further bookkeeping.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of batches used for batch-mean standard errors.
pub const BATCHES: usize = 64;

/// Deterministically derives a sub-seed from a seed and a list of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    tags.iter().fold(splitmix(seed), |acc, &t| splitmix(acc ^ splitmix(t)))
}

/// Generator for batch `batch` of a run seeded with `seed`.
pub fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

/// A Monte Carlo estimate with its batch means.
///
/// Deterministic quantities are represented with an empty batch list and a
/// zero standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: Complex64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    #[serde(skip)]
    pub batches: Vec<Complex64>,
}

impl McEstimate {
    pub fn exact(value: Complex64) -> Self {
        McEstimate {
            value,
            stderr: 0.0,
            n_samples: 1,
            seed: 0,
            batches: Vec::new(),
        }
    }

    pub fn exact_real(value: f64) -> Self {
        Self::exact(Complex64::new(value, 0.0))
    }

    fn from_batches(batches: Vec<Complex64>, n_samples: u64, seed: u64) -> Self {
        let nb = batches.len() as f64;
        let value = batches.iter().sum::<Complex64>() / nb;
        let mut out = McEstimate {
            value,
            stderr: 0.0,
            n_samples,
            seed,
            batches,
        };
        out.stderr = out.stderr_re().hypot(out.stderr_im());
        out
    }

    fn component_stderr(&self, part: impl Fn(Complex64) -> f64) -> f64 {
        let nb = self.batches.len();
        if nb < 2 {
            return if nb == 0 { 0.0 } else { f64::INFINITY };
        }
        let mean = part(self.value);
        let ss: f64 = self.batches.iter().map(|&b| (part(b) - mean).powi(2)).sum();
        (ss / ((nb * (nb - 1)) as f64)).sqrt()
    }

    pub fn stderr_re(&self) -> f64 {
        self.component_stderr(|z| z.re)
    }

    pub fn stderr_im(&self) -> f64 {
        self.component_stderr(|z| z.im)
    }

    pub fn is_exact(&self) -> bool {
        self.batches.is_empty()
    }

    fn batch(&self, b: usize) -> Complex64 {
        if self.batches.is_empty() {
            self.value
        } else {
            self.batches[b]
        }
    }

    /// Batchwise combination `f(self_b, other_b)`.
    pub fn zip_with(&self, other: &McEstimate, f: impl Fn(Complex64, Complex64) -> Complex64) -> McEstimate {
        Self::combine(&[self, other], |v| f(v[0], v[1]))
    }

    /// Batchwise combination of several estimates by a linear map `f`.
    ///
    /// Nonlinear `f` would bias the batch means; use [`Self::ratio`] for quotients.
    pub fn combine(parts: &[&McEstimate], f: impl Fn(&[Complex64]) -> Complex64) -> McEstimate {
        let nb = parts.iter().map(|p| p.batches.len()).max().unwrap_or(0);
        let values: Vec<Complex64> = parts.iter().map(|p| p.value).collect();
        let n_samples = parts.iter().map(|p| p.n_samples).max().unwrap_or(1);
        let seed = parts.iter().find(|p| !p.is_exact()).map_or(0, |p| p.seed);
        if nb == 0 {
            return McEstimate {
                n_samples,
                seed,
                ..Self::exact(f(&values))
            };
        }
        let batches = (0..nb)
            .map(|b| {
                let v: Vec<Complex64> = parts.iter().map(|p| p.batch(b)).collect();
                f(&v)
            })
            .collect();
        let mut out = Self::from_batches(batches, n_samples, seed);
        // keep the exact linear value rather than the mean of batch values
        out.value = f(&values);
        out
    }

    pub fn scale(&self, c: Complex64) -> McEstimate {
        Self::combine(&[self], |v| v[0] * c)
    }

    pub fn add(&self, other: &McEstimate) -> McEstimate {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &McEstimate) -> McEstimate {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn conj(&self) -> McEstimate {
        Self::combine(&[self], |v| v[0].conj())
    }

    /// `num / den` with batches linearised about the point estimate.
    pub fn ratio(num: &McEstimate, den: &McEstimate) -> McEstimate {
        let r = num.value / den.value;
        let (n0, d0) = (num.value, den.value);
        Self::combine(&[num, den], |v| r + (v[0] - n0) / d0 - r * (v[1] - d0) / d0)
    }

    /// Sum of several estimates.
    pub fn sum(parts: &[McEstimate]) -> McEstimate {
        let refs: Vec<&McEstimate> = parts.iter().collect();
        if refs.is_empty() {
            return Self::exact_real(0.0);
        }
        Self::combine(&refs, |v| v.iter().sum())
    }
}

/// Runs `budget` samples of `sample` in [`BATCHES`] seeded batches and
/// returns one estimate per output component.
pub fn run<const K: usize, F>(budget: u64, seed: u64, sample: F) -> Result<[McEstimate; K]>
where
    F: Fn(&mut ChaCha8Rng) -> [Complex64; K] + Sync,
{
    if budget == 0 {
        return Err(Error::param("Monte Carlo budget must be at least 1"));
    }
    let nb = (BATCHES as u64).min(budget) as usize;
    let per = budget / nb as u64;
    let extra = (budget % nb as u64) as usize;
    let means: Vec<[Complex64; K]> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            let count = per + u64::from(b < extra);
            let mut acc = [Complex64::new(0.0, 0.0); K];
            for _ in 0..count {
                let s = sample(&mut rng);
                for k in 0..K {
                    acc[k] += s[k];
                }
            }
            acc.map(|a| a / count as f64)
        })
        .collect();
    Ok(std::array::from_fn(|k| {
        McEstimate::from_batches(means.iter().map(|m| m[k]).collect(), budget, seed)
    }))
}
