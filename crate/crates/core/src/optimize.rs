//! SNR-constrained performance index: the largest one-photon probability a
//! scheme reaches while keeping its SNR at or above a threshold.

use serde::Serialize;

use crate::analytic::OutputSummary;
use crate::arch::{Efficiencies, Scheme};
use crate::error::{Error, Result};

/// Lower end of the pump bracket.
const BRACKET_LO: f64 = 1e-12;
/// Upper end beyond which the threshold is declared unreachable.
const BRACKET_HI_LIMIT: f64 = 1e6;
const BISECTION_MAX_ITER: usize = 120;
const THRESHOLD_REL_TOL: f64 = 1e-13;
/// SNR samples used to check that the curve decreases across the bracket.
const MONOTONE_SAMPLES: usize = 64;
const COARSE_POINTS: usize = 200;
/// Coarse scan spans `[mu_theta * COARSE_SPAN, mu_theta]`.
const COARSE_SPAN: f64 = 1e-8;
const GOLDEN_REL_WIDTH: f64 = 1e-10;
const FALLBACK_POINTS: usize = 4000;
/// Relative margin below which two candidates count as tied.
const TIE_REL: f64 = 1e-12;

/// `(p0, p1, p_multi)` of `scheme` at pump `pump`.
pub fn evaluate(scheme: &Scheme, eff: &Efficiencies, pump: f64) -> OutputSummary {
    OutputSummary::from_runs(&scheme.runs(pump, eff), eff.eta)
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(theta))
    }
}

/// Pump at which the SNR falls to the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSolution {
    /// Largest bisected pump whose SNR is still `>= theta`.
    pub mu: f64,
    pub snr: f64,
    /// Upper end of the final bracket (SNR below `theta`).
    pub bracket_hi: f64,
    /// Whether the sampled SNR curve was strictly decreasing over the bracket.
    pub monotone: bool,
}

/// Solves `SNR(mu) = theta` by bracket expansion and bisection.
///
/// The bracket starts at `[1e-12, 1]` and doubles its upper end until the SNR
/// drops below `theta`. The returned pump satisfies `SNR >= theta` and
/// `|SNR - theta| <= 1e-13 theta` unless bisection ran out of resolution.
pub fn solve_snr_threshold(
    scheme: &Scheme,
    eff: &Efficiencies,
    theta: f64,
) -> Result<ThresholdSolution> {
    check_theta(theta)?;
    scheme.validate()?;
    let snr = |mu: f64| evaluate(scheme, eff, mu).snr();

    let mut lo = BRACKET_LO;
    let mut snr_lo = snr(lo);
    while snr_lo < theta {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Unbracketable { theta, mu: lo });
        }
        snr_lo = snr(lo);
    }
    let bracket_lo = lo;

    let mut hi = 1.0;
    while snr(hi) >= theta {
        hi *= 2.0;
        if hi > BRACKET_HI_LIMIT {
            return Err(Error::Unbracketable { theta, mu: hi });
        }
    }
    let bracket_hi = hi;

    for _ in 0..BISECTION_MAX_ITER {
        if snr_lo - theta <= THRESHOLD_REL_TOL * theta {
            break;
        }
        let mid = if hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        let s = snr(mid);
        if s >= theta {
            lo = mid;
            snr_lo = s;
        } else {
            hi = mid;
        }
    }

    let monotone = sampled_decreasing(&snr, bracket_lo, bracket_hi);
    Ok(ThresholdSolution {
        mu: lo,
        snr: snr_lo,
        bracket_hi: hi,
        monotone,
    })
}

fn log_space(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| {
        if i + 1 == n {
            hi
        } else {
            (a + (b - a) * i as f64 / (n - 1) as f64).exp()
        }
    })
}

fn sampled_decreasing(snr: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> bool {
    let values: Vec<f64> = log_space(lo, hi, MONOTONE_SAMPLES).map(snr).collect();
    values.windows(2).all(|w| w[1] < w[0] || (w[0].is_infinite() && w[1].is_infinite()))
}

/// Golden-section search for a maximum of `f` on `[a, b]`, stopping when the
/// bracket is narrower than `rel_width` times its midpoint.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_width: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..400 {
        if (b - a) <= rel_width * 0.5 * (a.abs() + b.abs()) {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Optimum of the performance index for one scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptResult {
    pub scheme: Scheme,
    pub eta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub mu_star: f64,
    pub p1_bar: f64,
    pub snr_at_opt: f64,
    /// Crystals actually used by the optimum.
    pub chosen_m: u64,
    /// False when the SNR curve was not decreasing and a global grid search was used.
    pub monotone: bool,
}

/// Maximizes `P(N = 1)` over the pump subject to `SNR >= theta`.
///
/// With a decreasing SNR curve the feasible pumps are `(0, mu_theta]`. That
/// range is scanned on 200 log-spaced points and the best point is refined by
/// golden section. Otherwise every pump on a global grid is tested directly.
pub fn p1_max(scheme: &Scheme, eff: &Efficiencies, theta: f64) -> Result<OptResult> {
    let threshold = solve_snr_threshold(scheme, eff, theta)?;
    let p1 = |mu: f64| evaluate(scheme, eff, mu).p1;

    let mu_star = if threshold.monotone {
        let hi = threshold.mu;
        let grid: Vec<f64> = log_space(hi * COARSE_SPAN, hi, COARSE_POINTS).collect();
        let values: Vec<f64> = grid.iter().map(|&mu| p1(mu)).collect();
        let best = argmax(&values);
        let a = grid[best.saturating_sub(1)];
        let b = grid[(best + 1).min(grid.len() - 1)];
        let (x, fx) = if b > a {
            golden_section_max(&p1, a, b, GOLDEN_REL_WIDTH)
        } else {
            (grid[best], values[best])
        };
        if fx > values[best] {
            x
        } else {
            grid[best]
        }
    } else {
        global_search(scheme, eff, theta, threshold.bracket_hi)
    };

    let mut summary = evaluate(scheme, eff, mu_star);
    let mut mu_star = mu_star;
    if summary.snr() < theta - 1e-9 {
        // Sampled monotonicity missed a wiggle; the bisected pump is feasible.
        mu_star = threshold.mu;
        summary = evaluate(scheme, eff, mu_star);
    }
    Ok(OptResult {
        scheme: *scheme,
        eta: eff.eta,
        gamma: eff.gamma,
        theta,
        mu_star,
        p1_bar: summary.p1,
        snr_at_opt: summary.snr(),
        chosen_m: scheme.crystals(),
        monotone: threshold.monotone,
    })
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > values[best] { i } else { best })
}

fn global_search(scheme: &Scheme, eff: &Efficiencies, theta: f64, hi: f64) -> f64 {
    let feasible_p1 = |mu: f64| {
        let s = evaluate(scheme, eff, mu);
        if s.snr() >= theta {
            s.p1
        } else {
            f64::NEG_INFINITY
        }
    };
    let grid: Vec<f64> = log_space(BRACKET_LO, hi, FALLBACK_POINTS).collect();
    let values: Vec<f64> = grid.iter().map(|&mu| feasible_p1(mu)).collect();
    let best = argmax(&values);
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    let (x, fx) = golden_section_max(&feasible_p1, a, b, GOLDEN_REL_WIDTH);
    if fx > values[best] {
        x
    } else {
        grid[best]
    }
}

/// Best symmetric tree with at most `m_max` crystals, including the single
/// crystal (`k = 0`). Ties go to the smaller tree.
pub fn best_symmetric(m_max: u32, eff: &Efficiencies, theta: f64) -> Result<OptResult> {
    if m_max == 0 {
        return Err(Error::InvalidArgument("m_max must be at least 1".into()));
    }
    let depth_max = 31 - m_max.leading_zeros();
    let mut best: Option<OptResult> = None;
    for k in 0..=depth_max {
        let candidate = p1_max(&Scheme::Symmetric { k }, eff, theta)?;
        match &best {
            Some(b) if candidate.p1_bar <= b.p1_bar * (1.0 + TIE_REL) => {}
            _ => best = Some(candidate),
        }
    }
    Ok(best.expect("k = 0 is always evaluated"))
}

/// Percentage gain of the `m`-crystal asymmetric chain over the best
/// symmetric tree with at most `m` crystals.
pub fn delta_percent(eff: &Efficiencies, theta: f64, m: u32) -> Result<f64> {
    let (asym, sym) = delta_parts(eff, theta, m)?;
    Ok(100.0 * (asym.p1_bar - sym.p1_bar) / sym.p1_bar)
}

/// Asymmetric and best-symmetric optima underlying [`delta_percent`].
pub fn delta_parts(eff: &Efficiencies, theta: f64, m: u32) -> Result<(OptResult, OptResult)> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let asym = p1_max(&Scheme::Asymmetric { m }, eff, theta)?;
    let sym = best_symmetric(m, eff, theta)?;
    Ok((asym, sym))
}

/// One-photon probability of two ideal crystals pumped independently.
pub fn two_crystal_p1(mu1: f64, mu2: f64) -> f64 {
    mu1 * (-mu1).exp() + mu2 * (-(mu1 + mu2)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoCrystalOptimum {
    pub mu1: f64,
    pub mu2: f64,
    pub p1: f64,
}

/// Maximizes [`two_crystal_p1`] by alternating one-dimensional golden-section passes.
pub fn two_crystal_ideal_opt() -> TwoCrystalOptimum {
    let (mut mu1, mut mu2) = (0.5, 0.5);
    for _ in 0..200 {
        let (next1, _) = golden_section_max(|x| two_crystal_p1(x, mu2), 0.0, 5.0, GOLDEN_REL_WIDTH);
        let (next2, _) = golden_section_max(|x| two_crystal_p1(next1, x), 0.0, 5.0, GOLDEN_REL_WIDTH);
        let moved = (next1 - mu1).abs().max((next2 - mu2).abs());
        mu1 = next1;
        mu2 = next2;
        if moved < 1e-12 {
            break;
        }
    }
    TwoCrystalOptimum {
        mu1,
        mu2,
        p1: two_crystal_p1(mu1, mu2),
    }
}
