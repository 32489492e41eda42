//! Monte Carlo cross-check of the analytic distributions.

use photon_mux_core::analytic::{general_pn, trigger_law};
use photon_mux_core::arch::expand_with_bound;
use photon_mux_core::{simulate, Architecture, Efficiencies};
use serde::Serialize;

use crate::error::CliResult;

/// Photon numbers compared, `0..=MAX_N`.
pub const MAX_N: usize = 4;
pub const SIGMAS: f64 = 4.0;
/// Absolute tolerance floor for `|p_hat - P|`.
pub const ABS_FLOOR: f64 = 1e-4;
const N_CAP: usize = 8;

pub const ETAS: [f64; 4] = [0.0, 0.3, 0.6, 1.0];
pub const GAMMAS: [f64; 4] = [0.3, 0.5, 0.8, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub arch: Architecture,
    pub eff: Efficiencies,
}

/// Four architectures (at most 8 crystals, pumps at most 0.5) on every
/// combination of `ETAS` and `GAMMAS`: 64 cases.
pub fn standard_grid() -> Vec<Case> {
    let archs = [
        Architecture::Symmetric { k: 2, pump: 0.3 },
        Architecture::Symmetric { k: 3, pump: 0.1 },
        Architecture::Asymmetric { m: 4, pump: 0.2 },
        Architecture::Asymmetric { m: 8, pump: 0.5 },
    ];
    let mut cases = vec![];
    for arch in &archs {
        for &eta in &ETAS {
            for &gamma in &GAMMAS {
                cases.push(Case {
                    arch: arch.clone(),
                    eff: Efficiencies::new(eta, gamma).expect("grid values are valid"),
                });
            }
        }
    }
    cases
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub architecture: Architecture,
    pub eta: f64,
    pub gamma: f64,
    pub seed: u64,
    pub n_trials: u64,
    /// Analytic `P(N = n)`, `n = 0..=4`.
    pub exact: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Analytic law of the selected channel; index 0 means no detector fired.
    pub chi_exact: Vec<f64>,
    pub chi_hat: Vec<f64>,
    /// Largest `|p_hat - P| / max(4 stderr, 1e-4)` over `n`.
    pub pn_score: f64,
    /// Largest `|chi_hat - law| / (4 sigma)`, sigma taken from the law itself
    /// with the law floored at one count in `n_trials`.
    pub chi_score: f64,
    pub pass: bool,
}

/// Simulates one case and compares it with the analytic distribution.
pub fn run_case(case: &Case, trials: u64, seed: u64, overflow_bound: f64) -> CliResult<CaseReport> {
    let channels = expand_with_bound(&case.arch, &case.eff, overflow_bound)?;
    let est = simulate(&channels, &case.eff, trials, seed, N_CAP)?;
    let exact = (0..=MAX_N as u64)
        .map(|n| general_pn(&channels, &case.eff, n))
        .collect::<Result<Vec<_>, _>>()?;

    let pn_score = exact
        .iter()
        .enumerate()
        .map(|(n, &p)| (est.p_hat[n] - p).abs() / (SIGMAS * est.stderr[n]).max(ABS_FLOOR))
        .fold(0.0, f64::max);

    let chi_exact = trigger_law(&channels, case.eff.eta);
    let chi_hat: Vec<f64> = (0..chi_exact.len()).map(|i| est.chi_freq(i)).collect();
    let chi_score = chi_exact
        .iter()
        .zip(&chi_hat)
        .map(|(&law, &freq)| {
            // Below one expected count the normal approximation understates the
            // spread of a Poisson count; one count is the finest resolution.
            let p = law.max(1.0 / trials as f64);
            let sigma = (p * (1.0 - law) / trials as f64).max(0.0).sqrt();
            let diff = (freq - law).abs();
            if diff <= 1e-12 {
                0.0
            } else if sigma == 0.0 {
                f64::INFINITY
            } else {
                diff / (SIGMAS * sigma)
            }
        })
        .fold(0.0, f64::max);

    Ok(CaseReport {
        architecture: case.arch.clone(),
        eta: case.eff.eta,
        gamma: case.eff.gamma,
        seed,
        n_trials: trials,
        exact,
        p_hat: est.p_hat[..=MAX_N].to_vec(),
        stderr: est.stderr[..=MAX_N].to_vec(),
        chi_exact,
        chi_hat,
        pn_score,
        chi_score,
        pass: pn_score <= 1.0 && chi_score <= 1.0,
    })
}

/// Runs every case; case `i` uses seed `seed + i`.
pub fn run_cases(cases: &[Case], trials: u64, seed: u64, overflow_bound: f64) -> CliResult<Vec<CaseReport>> {
    cases
        .iter()
        .enumerate()
        .map(|(i, case)| run_case(case, trials, seed.wrapping_add(i as u64), overflow_bound))
        .collect()
}
