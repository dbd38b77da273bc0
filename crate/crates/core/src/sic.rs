//! Ideal ordered SIC receiver and Monte-Carlo estimation of `m_h(γ)`, the
//! mean number of packets decoded when `h` packets collide in one slot.
//!
//! Received powers are normalized by the noise power. With target SNR
//! `S0 = γ / c`, transmitter `j` arrives with power `S_j = G_j * S0` where
//! `G_j` is a unit-mean exponential fading gain. Sorting powers in
//! descending order, packet `ℓ` decodes iff every stronger packet decoded
//! and `S_ℓ / (1 + Σ_{r>ℓ} S_r) >= γ`. Cancellation is perfect.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::target_snr;
use crate::math::mix_seed;
use crate::{Error, Result};

/// Default Monte-Carlo sample count per `(h, γ)` entry.
pub const DEFAULT_MH_SAMPLES: u64 = 100_000;

/// Result of decoding one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub num_decoded: usize,
    /// Success flag per transmitter, in the caller's order.
    pub decoded_flags: Vec<bool>,
}

/// Reusable SIC receiver for a fixed `(γ, ε)` pair.
///
/// Holds scratch buffers so repeated decoding does not allocate.
#[derive(Debug, Clone)]
pub struct SicReceiver {
    gamma: f64,
    s0: f64,
    order: Vec<usize>,
    suffix: Vec<f64>,
}

impl SicReceiver {
    pub fn new(gamma: f64, epsilon: f64) -> Result<Self> {
        let s0 = target_snr(gamma, epsilon)?;
        Ok(Self {
            gamma,
            s0,
            order: Vec::new(),
            suffix: Vec::new(),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Target received SNR `S0`.
    pub fn s0(&self) -> f64 {
        self.s0
    }

    /// Decodes one slot, writing per-transmitter success flags into `flags`
    /// (caller's order). Returns the number of decoded packets.
    pub fn decode_into<R: Rng + ?Sized>(
        &mut self,
        gains: &[f64],
        rng: &mut R,
        flags: &mut Vec<bool>,
    ) -> Result<usize> {
        flags.clear();
        flags.resize(gains.len(), false);
        if gains.is_empty() {
            return Ok(0);
        }
        if let Some(g) = gains.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::domain(format!(
                "fading gain must be positive, got {g}"
            )));
        }

        self.order.clear();
        self.order.extend(0..gains.len());
        self.order
            .sort_unstable_by(|&a, &b| gains[b].total_cmp(&gains[a]));
        // Equal received powers are ordered uniformly at random.
        let mut start = 0;
        while start < self.order.len() {
            let g = gains[self.order[start]];
            let mut end = start + 1;
            while end < self.order.len() && gains[self.order[end]] == g {
                end += 1;
            }
            if end - start > 1 {
                self.order[start..end].shuffle(rng);
            }
            start = end;
        }

        let h = gains.len();
        self.suffix.clear();
        self.suffix.resize(h, 0.0);
        for pos in (0..h - 1).rev() {
            self.suffix[pos] = self.suffix[pos + 1] + gains[self.order[pos + 1]] * self.s0;
        }

        let mut decoded = 0;
        for pos in 0..h {
            let power = gains[self.order[pos]] * self.s0;
            if power / (1.0 + self.suffix[pos]) >= self.gamma {
                flags[self.order[pos]] = true;
                decoded += 1;
            } else {
                break;
            }
        }
        Ok(decoded)
    }

    pub fn decode<R: Rng + ?Sized>(&mut self, gains: &[f64], rng: &mut R) -> Result<DecodeOutcome> {
        let mut flags = Vec::with_capacity(gains.len());
        let num_decoded = self.decode_into(gains, rng, &mut flags)?;
        Ok(DecodeOutcome {
            num_decoded,
            decoded_flags: flags,
        })
    }
}

/// Decodes a single slot. `rng` is only consumed to break exact power ties.
pub fn decode_slot<R: Rng + ?Sized>(
    gains: &[f64],
    gamma: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<DecodeOutcome> {
    SicReceiver::new(gamma, epsilon)?.decode(gains, rng)
}

/// Counts decoded packets for powers already sorted in descending order.
/// `suffix` is scratch space.
fn count_decoded_sorted(powers: &[f64], gamma: f64, suffix: &mut Vec<f64>) -> usize {
    let h = powers.len();
    suffix.clear();
    suffix.resize(h, 0.0);
    for pos in (0..h.saturating_sub(1)).rev() {
        suffix[pos] = suffix[pos + 1] + powers[pos + 1];
    }
    powers
        .iter()
        .zip(suffix.iter())
        .position(|(s, i)| s / (1.0 + i) < gamma)
        .unwrap_or(h)
}

/// Monte-Carlo estimate of `m_h(γ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Estimates the mean decoded count for `h` simultaneous transmitters by
/// sampling `samples` i.i.d. unit-mean exponential gain vectors.
pub fn estimate_mh(
    h: usize,
    gamma: f64,
    epsilon: f64,
    samples: u64,
    seed: u64,
) -> Result<MhEstimate> {
    let s0 = target_snr(gamma, epsilon)?;
    if samples == 0 {
        return Err(Error::domain("samples must be at least 1"));
    }
    if h == 0 {
        return Ok(MhEstimate {
            mean: 0.0,
            stderr: 0.0,
            samples,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut powers = vec![0.0f64; h];
    let mut suffix = Vec::with_capacity(h);
    let (mut sum, mut sum_sq) = (0u64, 0u64);
    for _ in 0..samples {
        for p in powers.iter_mut() {
            let g: f64 = rng.sample(Exp1);
            *p = g * s0;
        }
        powers.sort_unstable_by(|a, b| b.total_cmp(a));
        let k = count_decoded_sorted(&powers, gamma, &mut suffix) as u64;
        sum += k;
        sum_sq += k * k;
    }
    let n = samples as f64;
    let mean = sum as f64 / n;
    let stderr = if samples > 1 {
        let var = (sum_sq as f64 - n * mean * mean).max(0.0) / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(MhEstimate {
        mean,
        stderr,
        samples,
    })
}

/// Rounds `gamma` to six significant digits for use as a table key.
pub fn quantize_gamma(gamma: f64) -> f64 {
    format!("{gamma:.5e}")
        .parse()
        .expect("formatted float parses")
}

fn entry_seed(base: u64, gamma_q: f64, h: usize) -> u64 {
    mix_seed(mix_seed(base, gamma_q.to_bits()), h as u64)
}

/// One cached `m_h(γ)` estimate. Columns of the persisted table follow the
/// field order: `h,gamma,epsilon,samples,seed,estimate,stderr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MhEntry {
    pub h: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub samples: u64,
    /// Base seed; the stream for this entry is derived from it, `h` and `gamma`.
    pub seed: u64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Cache of `m_h(γ)` estimates for one outage tolerance `ε`, keyed by
/// `(quantized γ, h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MhTable {
    epsilon: f64,
    entries: BTreeMap<(u64, usize), MhEntry>,
}

impl MhTable {
    pub fn new(epsilon: f64) -> Result<Self> {
        crate::config::outage_constant(epsilon)?;
        Ok(Self {
            epsilon,
            entries: BTreeMap::new(),
        })
    }

    /// Builds a table covering `h = 0..=h_max` at `gamma`.
    pub fn build(h_max: usize, gamma: f64, epsilon: f64, samples: u64, seed: u64) -> Result<Self> {
        if h_max == 0 {
            return Err(Error::domain("h_max must be at least 1"));
        }
        let mut table = Self::new(epsilon)?;
        table.ensure(h_max, gamma, samples, seed)?;
        Ok(table)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &MhEntry> {
        self.entries.values()
    }

    /// Adds every missing entry for `h = 0..=h_max` at `gamma` and returns
    /// how many entries had to be sampled.
    ///
    /// An existing entry recorded with a different sample count or seed is
    /// an error rather than being recomputed.
    pub fn ensure(&mut self, h_max: usize, gamma: f64, samples: u64, seed: u64) -> Result<usize> {
        target_snr(gamma, self.epsilon)?;
        if samples == 0 {
            return Err(Error::domain("samples must be at least 1"));
        }
        let gamma_q = quantize_gamma(gamma);
        let mut missing = Vec::new();
        for h in 0..=h_max {
            match self.entries.get(&(gamma_q.to_bits(), h)) {
                Some(e) if e.samples == samples && e.seed == seed => {}
                Some(e) => {
                    return Err(Error::MhConflict {
                        h,
                        gamma: gamma_q,
                        stored_samples: e.samples,
                        stored_seed: e.seed,
                        samples,
                        seed,
                    })
                }
                None => missing.push(h),
            }
        }
        let epsilon = self.epsilon;
        let computed: Vec<MhEntry> = missing
            .par_iter()
            .map(|&h| {
                let est = estimate_mh(h, gamma_q, epsilon, samples, entry_seed(seed, gamma_q, h))?;
                Ok(MhEntry {
                    h,
                    gamma: gamma_q,
                    epsilon,
                    samples,
                    seed,
                    estimate: est.mean,
                    stderr: est.stderr,
                })
            })
            .collect::<Result<_>>()?;
        let count = computed.len();
        for e in computed {
            self.entries.insert((e.gamma.to_bits(), e.h), e);
        }
        Ok(count)
    }

    pub fn get(&self, h: usize, gamma: f64) -> Result<&MhEntry> {
        let gamma_q = quantize_gamma(gamma);
        self.entries
            .get(&(gamma_q.to_bits(), h))
            .ok_or(Error::MissingMh { h, gamma: gamma_q })
    }

    /// `m_h(γ)`; `m_0 = 0` whether or not it is stored.
    pub fn mean(&self, h: usize, gamma: f64) -> Result<f64> {
        if h == 0 {
            return Ok(0.0);
        }
        Ok(self.get(h, gamma)?.estimate)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for e in self.entries.values() {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let mut table: Option<Self> = None;
        for rec in rdr.deserialize() {
            let e: MhEntry = rec?;
            let t = match &mut table {
                Some(t) => t,
                None => table.insert(Self::new(e.epsilon)?),
            };
            if e.epsilon != t.epsilon {
                return Err(Error::Format {
                    path: path.to_owned(),
                    msg: format!("mixed epsilon values {} and {}", t.epsilon, e.epsilon),
                });
            }
            if !(0.0..=e.h as f64).contains(&e.estimate) {
                return Err(Error::Format {
                    path: path.to_owned(),
                    msg: format!("estimate {} out of [0, {}]", e.estimate, e.h),
                });
            }
            t.entries.insert((e.gamma.to_bits(), e.h), e);
        }
        table.ok_or_else(|| Error::Format {
            path: path.to_owned(),
            msg: "empty m_h table".into(),
        })
    }

    /// Loads `path` if it exists, otherwise returns an empty table.
    pub fn load_or_new(path: impl AsRef<Path>, epsilon: f64) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Self::new(epsilon);
        }
        let t = Self::load(path)?;
        if t.epsilon != epsilon {
            return Err(Error::Format {
                path: path.to_owned(),
                msg: format!(
                    "table epsilon {} differs from requested {epsilon}",
                    t.epsilon
                ),
            });
        }
        Ok(t)
    }
}
