//! Seeded Monte Carlo cross-check of the analytic delay model.
//!
//! Each slot draws a user count `N ~ Poisson(b)`, caches rules for a uniform
//! random subset of `capacity` users (matching the model's assumption that
//! the table holds an unbiased selection, not an LRU or popularity-ordered
//! one), has every user send one packet, and records the fraction of packets
//! that missed the table. Averaging over slots estimates the normalized
//! expected delay.
//!
//! Reproducibility contract: slot `i` consumes randomness only from stream
//! `i` of a ChaCha8 generator seeded with `cfg.seed`, and chunk results are
//! merged in fixed index order. Estimates are therefore bit-identical across
//! runs and across thread counts, and the packet-level and conditional
//! estimators see the same user-count draws for a given seed.

use crate::error::{Error, Result};
use crate::model::{per_packet_delay, ModelParams};
use crate::specfun::log_factorial;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Below this mean, inversion by sequential search is fastest and exact;
/// above it the search loop grows linearly and the transformed-rejection
/// sampler takes over.
const INVERSION_CUTOFF: f64 = 30.0;

/// Slots per work unit. Small enough to parallelize short runs, large
/// enough that per-chunk setup is noise.
const CHUNK_SLOTS: u64 = 4096;

/// How a slot's miss fraction is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Full mechanics: sample the cached subset, emit one packet per user,
    /// count the misses.
    PacketLevel,
    /// Conditional (Rao-Blackwellized) form: average the analytic per-slot
    /// expectation `(1 - capacity/n)+` over the same user-count draws,
    /// skipping subset sampling.
    Conditional,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PacketLevel => "packet_level",
            Self::Conditional => "conditional",
        })
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "packet-level" | "packet_level" => Ok(Self::PacketLevel),
            "conditional" => Ok(Self::Conditional),
            other => Err(Error::InvalidInput {
                field: "estimator",
                reason: format!("expected `packet-level` or `conditional`, got `{other}`"),
            }),
        }
    }
}

/// Simulation controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Number of simulated slots (one user-count draw each). At least 1.
    pub slots: u64,
    /// Seed for the splittable generator; equal seeds give bit-identical
    /// estimates.
    pub seed: u64,
    /// Which estimator to run.
    pub estimator: Estimator,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            slots: 100_000,
            seed: 0,
            estimator: Estimator::PacketLevel,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::InvalidInput {
                field: "slots",
                reason: "must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

/// A Monte Carlo estimate of the normalized expected delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    /// Sample mean of the per-slot miss fractions (normalized delay units).
    pub mean: f64,
    /// Sample standard deviation divided by sqrt(slots).
    pub std_error: f64,
    /// `mean - 1.96 * std_error`.
    pub ci95_low: f64,
    /// `mean + 1.96 * std_error`.
    pub ci95_high: f64,
    /// Number of slots behind the estimate.
    pub samples: u64,
    /// Seed that produced it.
    pub seed: u64,
}

/// Uniform f64 in [0, 1) with 53 random bits.
#[inline]
fn next_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in [0, n), rejection-corrected so no residue class is
/// favored.
#[inline]
fn uniform_below<R: RngCore>(rng: &mut R, n: u64) -> u64 {
    debug_assert!(n > 0);
    let zone = u64::MAX - u64::MAX % n;
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % n;
        }
    }
}

/// Draws from Poisson(b).
///
/// For `b < 30`: inversion by sequential search, walking the cdf until it
/// passes a single uniform. Exact; cost grows like `b`.
///
/// For `b >= 30`: Hörmann's transformed rejection with squeeze (the PTRS
/// algorithm from "The transformed rejection method for generating Poisson
/// random variables", 1993). A floor of a transformed uniform proposes a
/// count, a cheap squeeze accepts most proposals, and the log-density test
/// makes the method exact. Cost is O(1) in `b`.
pub fn sample_poisson<R: RngCore>(rng: &mut R, b: f64) -> u64 {
    assert!(
        b > 0.0 && b.is_finite(),
        "sample_poisson: mean must be positive and finite, got {b}"
    );
    if b < INVERSION_CUTOFF {
        poisson_inversion(rng, b)
    } else {
        poisson_ptrs(rng, b)
    }
}

fn poisson_inversion<R: RngCore>(rng: &mut R, b: f64) -> u64 {
    let u = next_f64(rng);
    let mut k = 0_u64;
    let mut mass = (-b).exp();
    let mut cdf = mass;
    // The cap is ~20 standard deviations out (mass beyond ~1e-89); it exists
    // only so rounding in `cdf` can never loop forever.
    let cap = (b + 20.0 * b.sqrt() + 20.0).ceil() as u64;
    while u > cdf && k < cap {
        k += 1;
        mass *= b / k as f64;
        cdf += mass;
    }
    k
}

fn poisson_ptrs<R: RngCore>(rng: &mut R, b: f64) -> u64 {
    let log_b = b.ln();
    let beta = 0.931 + 2.53 * b.sqrt();
    let alpha = -0.059 + 0.02483 * beta;
    let inv_alpha = 1.1239 + 1.1328 / (beta - 3.4);
    let v_r = 0.9277 - 3.6224 / (beta - 2.0);
    loop {
        let u = next_f64(rng) - 0.5;
        let v = next_f64(rng);
        let u_shifted = 0.5 - u.abs();
        let k = ((2.0 * alpha / u_shifted + beta) * u + b + 0.43).floor();
        if u_shifted >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (u_shifted < 0.013 && v > u_shifted) {
            continue;
        }
        // Exact acceptance: log of the transformed density against the
        // Poisson log-mass.
        if v.ln() + inv_alpha.ln() - (alpha / (u_shifted * u_shifted) + beta).ln()
            <= k * log_b - b - log_factorial(k as u64)
        {
            return k as u64;
        }
    }
}

/// Reusable buffers for the packet-level slot mechanics.
struct SlotScratch {
    indices: Vec<u64>,
    cached: Vec<bool>,
}

impl SlotScratch {
    fn new() -> Self {
        Self {
            indices: Vec::new(),
            cached: Vec::new(),
        }
    }
}

fn simulate_slot_with<R: RngCore>(
    rng: &mut R,
    users: u64,
    capacity: u64,
    scratch: &mut SlotScratch,
) -> f64 {
    if users <= capacity {
        return 0.0;
    }
    let n = usize::try_from(users).expect("user count exceeds addressable memory");

    // Partial Fisher-Yates: after `capacity` swaps the prefix holds a
    // uniform random capacity-subset of 0..users.
    scratch.indices.clear();
    scratch.indices.extend(0..users);
    for i in 0..capacity {
        let j = i + uniform_below(rng, users - i);
        scratch.indices.swap(i as usize, j as usize);
    }

    scratch.cached.clear();
    scratch.cached.resize(n, false);
    for &user in &scratch.indices[..capacity as usize] {
        scratch.cached[user as usize] = true;
    }

    // Every user sends one packet; count the packets whose owner holds no
    // table entry.
    let misses = scratch.cached.iter().filter(|&&hit| !hit).count();
    misses as f64 / users as f64
}

/// One slot of the packet-level mechanics: cache a uniform random
/// `capacity`-subset of the `users` present, let each user send one packet,
/// and return the fraction of packets that missed the table.
pub fn simulate_slot<R: RngCore>(rng: &mut R, users: u64, capacity: u64) -> f64 {
    simulate_slot_with(rng, users, capacity, &mut SlotScratch::new())
}

/// Streaming mean/variance accumulator (Welford), mergeable across chunks.
#[derive(Debug, Clone, Copy)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn new() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        Moments { count, mean, m2 }
    }
}

fn run_chunk(params: &ModelParams, cfg: &SimConfig, base: &ChaCha8Rng, range: std::ops::Range<u64>) -> Moments {
    let b = params.mean_users();
    let mut moments = Moments::new();
    let mut scratch = SlotScratch::new();
    for slot in range {
        let mut rng = base.clone();
        rng.set_stream(slot);
        let users = sample_poisson(&mut rng, b);
        let value = match cfg.estimator {
            Estimator::PacketLevel => {
                simulate_slot_with(&mut rng, users, params.capacity, &mut scratch)
            }
            Estimator::Conditional => per_packet_delay(users, params.capacity, 1.0),
        };
        moments.push(value);
    }
    moments
}

/// Runs `cfg.slots` independent slots and returns the mean miss fraction
/// with its standard error and a 95% confidence interval.
///
/// The result is in normalized units; multiply `mean` by `d_ctrl` for
/// seconds. Deterministic: a given `(params, cfg)` produces bit-identical
/// output regardless of run count or rayon thread count.
pub fn estimate_expected_delay(params: &ModelParams, cfg: &SimConfig) -> Result<SimEstimate> {
    params.validate()?;
    cfg.validate()?;
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);

    let chunks = cfg.slots.div_ceil(CHUNK_SLOTS);
    let total = if params.mean_users() == 0.0 {
        // Empty cell: every slot is a deterministic zero.
        let mut m = Moments::new();
        m.count = cfg.slots;
        m
    } else {
        (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let start = chunk * CHUNK_SLOTS;
                let end = (start + CHUNK_SLOTS).min(cfg.slots);
                run_chunk(params, cfg, &base, start..end)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Moments::new(), Moments::merge)
    };

    let variance = if total.count > 1 {
        (total.m2 / (total.count as f64 - 1.0)).max(0.0)
    } else {
        0.0
    };
    let std_error = (variance / total.count as f64).sqrt();
    Ok(SimEstimate {
        mean: total.mean,
        std_error,
        ci95_low: total.mean - 1.96 * std_error,
        ci95_high: total.mean + 1.96 * std_error,
        samples: total.count,
        seed: cfg.seed,
    })
}
