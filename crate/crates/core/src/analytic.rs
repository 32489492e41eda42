//! Exact photon-number statistics at the output of a multiplexed source.
//!
//! The canonical evaluator is the general priority-switch formula over an
//! ordered channel list ([`general_pn`]). Every named scheme reduces to it
//! through [`crate::arch::expand`]; the scheme-specific closed forms below are
//! kept as independent cross-checks.
//!
//! All products of exponentials are accumulated as sums of logarithms and
//! exponentiated once, with anything below `exp(-745)` flushed to zero.

use std::sync::OnceLock;

use serde::{Serialize, Serializer};

use crate::arch::{ChannelRun, ChannelSpec, Efficiencies};
use crate::error::{Error, Result};

/// Default truncation of reported distributions.
pub const DEFAULT_N_MAX: usize = 40;

/// Exponents below this evaluate to exactly zero.
const EXP_FLOOR: f64 = -745.0;

/// Below this multi-photon mass the SNR is reported as `+inf`.
const SNR_DENOMINATOR_FLOOR: f64 = 1e-300;

pub(crate) fn exp_clamped(x: f64) -> f64 {
    if x < EXP_FLOOR || x.is_nan() {
        0.0
    } else {
        x.exp()
    }
}

/// `eta * x` with `0 * inf = 0`: zero detection efficiency removes the term.
fn eta_times(eta: f64, x: f64) -> f64 {
    if eta == 0.0 || x == 0.0 {
        0.0
    } else {
        eta * x
    }
}

const LN_FACTORIAL_TABLE: usize = 256;

/// `ln(n!)`; tabulated for small `n`, Stirling series beyond.
pub fn ln_factorial(n: u64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE + 1);
        let mut acc = 0.0f64;
        t.push(0.0);
        for i in 1..=LN_FACTORIAL_TABLE {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    });
    if (n as usize) <= LN_FACTORIAL_TABLE {
        return table[n as usize];
    }
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// `ln P(X = n)` for `X ~ Poisson(mu)`; `-inf` for impossible outcomes.
pub fn ln_poisson_pmf(mu: f64, n: u64) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if n == 0 {
        return -mu;
    }
    n as f64 * mu.ln() - mu - ln_factorial(n)
}

/// `mu^n e^{-mu} / n!`, evaluated in log space.
pub fn poisson_pmf(mu: f64, n: u64) -> f64 {
    exp_clamped(ln_poisson_pmf(mu, n))
}

/// `P(X >= 2)` for `X ~ Poisson(lambda)` without cancellation at small `lambda`.
fn poisson_tail2(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda >= 1.0 {
        return -(-lambda).exp_m1() - lambda * (-lambda).exp();
    }
    let mut p = lambda * (-lambda).exp();
    let mut sum = 0.0;
    for n in 2..200u32 {
        p *= lambda / n as f64;
        sum += p;
        if p <= 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Signal-to-noise ratio of a faint laser with mean photon number `mu`.
pub fn fl_snr(mu: f64) -> f64 {
    if mu <= 0.0 {
        return f64::INFINITY;
    }
    if mu < 1e-4 {
        return 2.0 / mu - 2.0 / 3.0 + mu / 18.0;
    }
    mu / (mu.exp_m1() - mu)
}

/// `ln(1 - (1-eta)^n e^{-loss})`: probability factor that the heralded
/// channel triggered, given `n` photons reach the output and `loss` is
/// `eta` times the mean number of pairs absorbed by the routers.
fn ln_trigger_bracket(eta: f64, loss: f64, n: u64) -> f64 {
    let exponent = if n == 0 {
        -loss
    } else {
        n as f64 * (-eta).ln_1p() - loss
    };
    (-exponent.exp_m1()).ln()
}

/// `ln sum_{j<count} e^{-j x}`.
fn ln_geometric(count: u64, x: f64) -> f64 {
    if count == 1 {
        0.0
    } else if x == 0.0 {
        (count as f64).ln()
    } else {
        (-(-(count as f64) * x).exp_m1()).ln() - (-(-x).exp_m1()).ln()
    }
}

fn run_loss(eta: f64, run: &ChannelRun) -> f64 {
    eta_times(eta, (run.mu - run.lambda).max(0.0))
}

fn total_pairs(runs: &[ChannelRun]) -> f64 {
    runs.iter().map(|r| r.count as f64 * r.mu).sum()
}

/// `P(N = n)` over compressed channel runs.
pub fn run_pn(runs: &[ChannelRun], eta: f64, n: u64) -> f64 {
    let Some(first) = runs.first() else {
        return 0.0;
    };
    let none_fire = eta_times(eta, total_pairs(runs));
    let mut p = exp_clamped(ln_poisson_pmf(first.lambda * (1.0 - eta), n) - none_fire);
    let mut ln_prior = 0.0;
    for run in runs {
        let x = eta_times(eta, run.mu);
        let ln_term = ln_poisson_pmf(run.lambda, n)
            + ln_trigger_bracket(eta, run_loss(eta, run), n)
            + ln_prior
            + ln_geometric(run.count, x);
        p += exp_clamped(ln_term);
        ln_prior -= eta_times(run.count as f64, x);
    }
    p
}

/// `sum_{n>=2} P(Y = n) [1 - (1-eta)^n e^{-loss}]` for `Y ~ Poisson(lambda)`.
fn triggered_multi_mass(lambda: f64, eta: f64, loss: f64) -> f64 {
    if lambda == 0.0 || eta == 0.0 {
        return 0.0;
    }
    if lambda > 40.0 {
        let kept = exp_clamped(-loss - eta * lambda);
        return (poisson_tail2(lambda) - kept * poisson_tail2(lambda * (1.0 - eta))).max(0.0);
    }
    let ln_keep = (-eta).ln_1p();
    let mut p = lambda * (-lambda).exp();
    let mut sum = 0.0;
    let mut n = 1u64;
    loop {
        n += 1;
        p *= lambda / n as f64;
        sum += p * -(n as f64 * ln_keep - loss).exp_m1();
        if p == 0.0 || (n as f64 > 2.0 * lambda && p <= 1e-18 * sum) || n > 2000 {
            break;
        }
    }
    sum
}

/// `P(N >= 2)` over compressed channel runs, summed term by term so that it
/// stays accurate when it is many orders of magnitude below one.
pub fn run_multi(runs: &[ChannelRun], eta: f64) -> f64 {
    let Some(first) = runs.first() else {
        return 0.0;
    };
    let none_fire = eta_times(eta, total_pairs(runs));
    let mut p = poisson_tail2(first.lambda * (1.0 - eta)) * exp_clamped(-none_fire);
    let mut ln_prior = 0.0;
    for run in runs {
        let x = eta_times(eta, run.mu);
        let mass = triggered_multi_mass(run.lambda, eta, run_loss(eta, run));
        if mass > 0.0 {
            p += mass * exp_clamped(ln_prior + ln_geometric(run.count, x));
        }
        ln_prior -= eta_times(run.count as f64, x);
    }
    p
}

/// Zero-, one- and multi-photon probabilities of a source output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputSummary {
    pub p0: f64,
    pub p1: f64,
    pub p_multi: f64,
}

impl OutputSummary {
    pub fn from_runs(runs: &[ChannelRun], eta: f64) -> Self {
        OutputSummary {
            p0: run_pn(runs, eta, 0),
            p1: run_pn(runs, eta, 1),
            p_multi: run_multi(runs, eta),
        }
    }

    pub fn snr(&self) -> f64 {
        snr_from(self.p1, self.p_multi)
    }
}

fn snr_from(p1: f64, p_multi: f64) -> f64 {
    if p_multi <= SNR_DENOMINATOR_FLOOR {
        f64::INFINITY
    } else {
        p1 / p_multi
    }
}

/// Truncated photon-number distribution with exact low-order probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonDistribution {
    /// `P(N = n)` for `n = 0..=n_max`.
    pub probs: Vec<f64>,
    pub n_max: usize,
    pub p0: f64,
    pub p1: f64,
    /// `1 - p0 - p1`, computed directly rather than by subtraction.
    pub p_multi: f64,
    #[serde(serialize_with = "serialize_snr")]
    pub snr: f64,
}

fn serialize_snr<S: Serializer>(snr: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if snr.is_finite() {
        s.serialize_f64(*snr)
    } else {
        s.serialize_str("inf")
    }
}

impl PhotonDistribution {
    pub fn from_runs(runs: &[ChannelRun], eta: f64, n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_max must be at least 2, got {n_max}"
            )));
        }
        if runs.is_empty() {
            return Err(Error::InvalidArchitecture("empty channel list".into()));
        }
        let probs: Vec<f64> = (0..=n_max as u64).map(|n| run_pn(runs, eta, n)).collect();
        let p_multi = run_multi(runs, eta);
        Ok(PhotonDistribution {
            p0: probs[0],
            p1: probs[1],
            p_multi,
            snr: snr_from(probs[1], p_multi),
            probs,
            n_max,
        })
    }

    /// Builds a distribution from `probs` with externally supplied exact `p0`, `p1`.
    pub fn from_parts(probs: Vec<f64>, p0: f64, p1: f64) -> Result<Self> {
        if probs.len() < 3 {
            return Err(Error::InvalidArgument("need probabilities up to n = 2".into()));
        }
        let p_multi = (1.0 - p0 - p1).max(0.0);
        Ok(PhotonDistribution {
            n_max: probs.len() - 1,
            probs,
            p0,
            p1,
            p_multi,
            snr: snr_from(p1, p_multi),
        })
    }

    /// Probability mass beyond `n_max`.
    pub fn tail_mass(&self) -> f64 {
        1.0 - self.probs.iter().sum::<f64>()
    }
}

/// `P1 / (1 - P0 - P1)`, or `+inf` when the multi-photon mass vanishes.
pub fn snr_of(dist: &PhotonDistribution) -> f64 {
    snr_from(dist.p1, dist.p_multi)
}

fn check_channels(channels: &[ChannelSpec]) -> Result<()> {
    if channels.is_empty() {
        return Err(Error::InvalidArchitecture("empty channel list".into()));
    }
    for c in channels {
        ChannelSpec::new(c.mu, c.k)?;
    }
    Ok(())
}

/// `P(N = n)` at the output of a priority-switched channel list.
///
/// When no detector fires, channel 1 is routed to the output; otherwise the
/// first triggering channel is. Signal photons of channel `i` each survive its
/// `k_i` routers with probability `gamma^k_i`.
pub fn general_pn(channels: &[ChannelSpec], eff: &Efficiencies, n: u64) -> Result<f64> {
    check_channels(channels)?;
    Ok(run_pn(&ChannelRun::from_channels(channels, eff), eff.eta, n))
}

pub fn general_distribution(
    channels: &[ChannelSpec],
    eff: &Efficiencies,
    n_max: usize,
) -> Result<PhotonDistribution> {
    check_channels(channels)?;
    PhotonDistribution::from_runs(&ChannelRun::from_channels(channels, eff), eff.eta, n_max)
}

/// Law of the selected-channel index: entry 0 is "no detector fired", entry
/// `i` is "channel `i` is the first to fire".
pub fn trigger_law(channels: &[ChannelSpec], eta: f64) -> Vec<f64> {
    let mut law = Vec::with_capacity(channels.len() + 1);
    law.push(0.0);
    let mut ln_prior = 0.0;
    for c in channels {
        let x = eta_times(eta, c.mu);
        law.push(-(-x).exp_m1() * exp_clamped(ln_prior));
        ln_prior -= x;
    }
    law[0] = exp_clamped(ln_prior);
    law
}

/// Ideal multiplexed source: `m` crystals pumped to `mu`, perfect detection and routing.
pub fn mhps_pn(m: u32, mu: f64, n: u64) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if n == 0 {
        return exp_clamped(-(m as f64) * mu);
    }
    let gain = (-(-(m as f64) * mu).exp_m1()) / (-(-mu).exp_m1());
    poisson_pmf(mu, n) * gain
}

/// Symmetric router tree of depth `k`, every crystal pumped to `mu_tilde / gamma^k`.
pub fn smhps_pn(k: u32, mu_tilde: f64, eff: &Efficiencies, n: u64) -> f64 {
    let Efficiencies { eta, gamma } = *eff;
    let ln_inv_t = -(k as f64) * gamma.ln();
    let one = eta_times(eta, mu_tilde * ln_inv_t.exp());
    let all = eta_times(eta, mu_tilde * (ln_inv_t + k as f64 * std::f64::consts::LN_2).exp());
    let idle = exp_clamped(ln_poisson_pmf((1.0 - eta) * mu_tilde, n) - all);

    let loss = eta_times(eta, ln_inv_t.exp_m1() * mu_tilde);
    let bracket = ln_trigger_bracket(eta, loss, n);
    let ratio = if one == 0.0 {
        (k as f64 * std::f64::consts::LN_2).exp()
    } else {
        (-(-all).exp_m1()) / (-(-one).exp_m1())
    };
    idle + exp_clamped(ln_poisson_pmf(mu_tilde, n) + bracket) * ratio
}

/// Asymmetric router chain of `m` crystals with compensated pumps `mu_bar / gamma^k_i`.
///
/// The compact chain sums are singular at `gamma = 1`; there the general
/// evaluator is used instead.
pub fn amhps_pn(m: u32, mu_bar: f64, eff: &Efficiencies, n: u64) -> f64 {
    let Efficiencies { eta, gamma } = *eff;
    if gamma == 1.0 {
        let runs = crate::arch::Scheme::Asymmetric { m }.runs(mu_bar, eff);
        return run_pn(&runs, eta, n);
    }
    let ln_g = gamma.ln();
    // (gamma^{1-i} - 1) / (1 - gamma): pairs pumped into channels ahead of i.
    let ahead = |i: u32| ((1.0 - i as f64) * ln_g).exp_m1() / (1.0 - gamma);
    let chain = ((2.0 - gamma) * ((1.0 - m as f64) * ln_g).exp() - 1.0) / (1.0 - gamma);
    let idle = exp_clamped(ln_poisson_pmf((1.0 - eta) * mu_bar, n) - eta_times(eta, mu_bar * chain));

    let eta_mu = eta_times(eta, mu_bar);
    let ln_pois = ln_poisson_pmf(mu_bar, n);
    let fired: f64 = crate::arch::asymmetric_depths(m)
        .zip(1..=m)
        .map(|(depth, i)| {
            let loss = eta_times(eta_mu, (-(depth as f64) * ln_g).exp_m1());
            exp_clamped(ln_pois + ln_trigger_bracket(eta, loss, n) - eta_times(eta_mu, ahead(i)))
        })
        .sum();
    idle + fired
}

/// Closed-form SNR of the symmetric tree of depth `k` at pump `mu`.
pub fn smhps_snr_closed(k: u32, mu: f64, eff: &Efficiencies) -> f64 {
    let Efficiencies { eta, gamma } = *eff;
    let inv_t = (-(k as f64) * gamma.ln()).exp();
    let first = exp_clamped(-eta_times(eta, mu * inv_t));
    let all = exp_clamped(-eta_times(eta, mu * inv_t * 2f64.powi(k as i32)));
    let back = (eta * mu).exp();
    let survive = 1.0 + mu - eta * mu;

    let num = mu * (1.0 - first * back * (1.0 - eta) - all * (1.0 - back * (1.0 - eta)));
    let den = mu.exp_m1() - mu - first * (mu.exp() - back * survive)
        + all * ((1.0 + mu) - back * survive);
    snr_from(num, den)
}

/// Gain of the symmetric tree over a faint laser at matched SNR, with both
/// pumps rescaled as `mu / 2^k`.
pub fn smhps_gain(k: u32, mu: f64, eff: &Efficiencies) -> f64 {
    let Efficiencies { eta, gamma } = *eff;
    if eta == 0.0 {
        return 1.0;
    }
    let kf = k as f64;
    let per_branch = eta * mu * (-kf * (2.0 * gamma).ln()).exp();
    let absorbed = per_branch * -(kf * gamma.ln()).exp_m1();
    let deep = eta * mu * (-kf * gamma.ln()).exp();
    let rescaled = eta * mu * (-kf * std::f64::consts::LN_2).exp();

    let num = 1.0
        - exp_clamped(-absorbed) * (1.0 - eta)
        - exp_clamped(-deep) * (1.0 - rescaled.exp() * (1.0 - eta));
    num / -(-per_branch).exp_m1()
}
