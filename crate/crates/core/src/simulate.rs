//! Event-level Monte Carlo of the multiplexed source.
//!
//! Each trial draws the pair number of every crystal, fires each threshold
//! detector with probability `1 - (1 - eta)^N`, selects the first firing
//! channel (channel 1 if none fires) and thins its signal photons through the
//! channel's routers. Nothing here uses the analytic formulas, so the two can
//! check each other.
//!
//! Trials are split into fixed chunks of [`CHUNK_TRIALS`]. Chunk `c` draws
//! from ChaCha8 keyed by `seed` (via `seed_from_u64`) on stream `c`, so the
//! result depends only on the seed and trial count, never on the number of
//! worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::ln_factorial;
use crate::arch::{ChannelSpec, Efficiencies};
use crate::error::{Error, Result};

pub const CHUNK_TRIALS: u64 = 65_536;

/// Empirical output distribution and selected-channel histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    /// Estimated `P(N = n)` for `n = 0..=n_cap`.
    pub p_hat: Vec<f64>,
    /// Binomial standard error of each `p_hat` entry.
    pub stderr: Vec<f64>,
    pub n_trials: u64,
    pub seed: u64,
    /// Entry 0 counts trials where no detector fired; entry `i` counts channel `i` selected first.
    pub chi_hist: Vec<u64>,
    /// Raw counts behind `p_hat`.
    pub counts: Vec<u64>,
    /// Trials with more than `n_cap` output photons.
    pub overflow: u64,
}

impl McEstimate {
    /// Standard error of the empirical frequency of selected channel `index`.
    pub fn chi_stderr(&self, index: usize) -> f64 {
        binomial_stderr(self.chi_hist[index], self.n_trials)
    }

    pub fn chi_freq(&self, index: usize) -> f64 {
        self.chi_hist[index] as f64 / self.n_trials as f64
    }
}

fn binomial_stderr(count: u64, trials: u64) -> f64 {
    let p = count as f64 / trials as f64;
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Poisson sampler: inversion for small means, PTRS transformed rejection above.
#[derive(Debug, Clone, Copy)]
pub enum PoissonSampler {
    Zero,
    Inversion { mu: f64, p0: f64 },
    Ptrs(Ptrs),
}

#[derive(Debug, Clone, Copy)]
pub struct Ptrs {
    mu: f64,
    ln_mu: f64,
    a: f64,
    b: f64,
    inv_alpha: f64,
    v_r: f64,
}

impl PoissonSampler {
    pub fn new(mu: f64) -> Self {
        if mu <= 0.0 {
            PoissonSampler::Zero
        } else if mu < 10.0 {
            PoissonSampler::Inversion { mu, p0: (-mu).exp() }
        } else {
            let b = 0.931 + 2.53 * mu.sqrt();
            PoissonSampler::Ptrs(Ptrs {
                mu,
                ln_mu: mu.ln(),
                a: -0.059 + 0.02483 * b,
                b,
                inv_alpha: 1.1239 + 1.1328 / (b - 3.4),
                v_r: 0.9277 - 3.6224 / (b - 2.0),
            })
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            PoissonSampler::Zero => 0,
            PoissonSampler::Inversion { mu, p0 } => {
                let u: f64 = rng.random();
                let (mut k, mut p, mut cdf) = (0u64, p0, p0);
                while u > cdf && k < 1000 {
                    k += 1;
                    p *= mu / k as f64;
                    cdf += p;
                }
                k
            }
            PoissonSampler::Ptrs(ref s) => s.sample(rng),
        }
    }
}

impl Ptrs {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        loop {
            let u = rng.random::<f64>() - 0.5;
            let v: f64 = rng.random();
            let us = 0.5 - u.abs();
            let k = ((2.0 * self.a / us + self.b) * u + self.mu + 0.43).floor();
            if us >= 0.07 && v <= self.v_r {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = v.ln() + self.inv_alpha.ln() - (self.a / (us * us) + self.b).ln();
            let rhs = -self.mu + k * self.ln_mu - ln_factorial(k as u64);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }
}

struct Channel {
    pairs: PoissonSampler,
    transmission: f64,
}

struct Counts {
    output: Vec<u64>,
    overflow: u64,
    chi: Vec<u64>,
}

impl Counts {
    fn new(n_cap: usize, channels: usize) -> Self {
        Counts {
            output: vec![0; n_cap + 1],
            overflow: 0,
            chi: vec![0; channels + 1],
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.output.iter_mut().zip(other.output) {
            *a += b;
        }
        for (a, b) in self.chi.iter_mut().zip(other.chi) {
            *a += b;
        }
        self.overflow += other.overflow;
        self
    }
}

fn thin<R: Rng + ?Sized>(photons: u64, transmission: f64, rng: &mut R) -> u64 {
    if photons == 0 || transmission >= 1.0 {
        return photons;
    }
    if photons <= 32 {
        return (0..photons).filter(|_| rng.random::<f64>() < transmission).count() as u64;
    }
    Binomial::new(photons, transmission)
        .expect("transmission is a probability")
        .sample(rng)
}

fn run_chunk(channels: &[Channel], eta: f64, seed: u64, chunk: u64, trials: u64, n_cap: usize) -> Counts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let ln_miss = (-eta).ln_1p();
    let mut counts = Counts::new(n_cap, channels.len());
    for _ in 0..trials {
        let mut first_pairs = 0u64;
        let mut selected = None;
        for (i, ch) in channels.iter().enumerate() {
            let pairs = ch.pairs.sample(&mut rng);
            if i == 0 {
                first_pairs = pairs;
            }
            // P(at least one of `pairs` idlers detected) = 1 - (1 - eta)^pairs
            let fires = pairs > 0 && rng.random::<f64>() < -(pairs as f64 * ln_miss).exp_m1();
            if fires {
                selected = Some((i, pairs));
                break;
            }
        }
        let (chi, index, pairs) = match selected {
            Some((i, pairs)) => (i + 1, i, pairs),
            None => (0, 0, first_pairs),
        };
        counts.chi[chi] += 1;
        let out = thin(pairs, channels[index].transmission, &mut rng) as usize;
        match counts.output.get_mut(out) {
            Some(slot) => *slot += 1,
            None => counts.overflow += 1,
        }
    }
    counts
}

/// Simulates `n_trials` pulses of the channel list.
///
/// Photons of channels that are not selected are discarded. Channels after the
/// first firing one are not sampled: they cannot influence the output.
pub fn simulate(
    channels: &[ChannelSpec],
    eff: &Efficiencies,
    n_trials: u64,
    seed: u64,
    n_cap: usize,
) -> Result<McEstimate> {
    if n_cap < 2 {
        return Err(Error::InvalidArgument(format!("n_cap must be at least 2, got {n_cap}")));
    }
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    if channels.is_empty() {
        return Err(Error::InvalidArchitecture("empty channel list".into()));
    }
    for c in channels {
        ChannelSpec::new(c.mu, c.k)?;
    }
    let prepared: Vec<Channel> = channels
        .iter()
        .map(|c| Channel {
            pairs: PoissonSampler::new(c.mu),
            transmission: eff.transmission(c.k),
        })
        .collect();

    let n_chunks = n_trials.div_ceil(CHUNK_TRIALS);
    let counts = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let trials = CHUNK_TRIALS.min(n_trials - chunk * CHUNK_TRIALS);
            run_chunk(&prepared, eff.eta, seed, chunk, trials, n_cap)
        })
        .reduce(|| Counts::new(n_cap, prepared.len()), Counts::merge);

    let total = n_trials as f64;
    Ok(McEstimate {
        p_hat: counts.output.iter().map(|&c| c as f64 / total).collect(),
        stderr: counts.output.iter().map(|&c| binomial_stderr(c, n_trials)).collect(),
        n_trials,
        seed,
        chi_hist: counts.chi,
        counts: counts.output,
        overflow: counts.overflow,
    })
}
