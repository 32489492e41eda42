//! Photon-number statistics and performance indices of multiplexed heralded
//! single-photon sources.
//!
//! Supported architectures are the faint laser, the ideal multi-crystal
//! source, the symmetric router tree, the asymmetric router chain and any
//! explicit priority-ordered channel list.
//!
//! - [`arch`]: architectures, efficiencies and their channel expansion.
//! - [`analytic`]: exact output distributions, SNR and closed forms.
//! - [`optimize`]: SNR-constrained maximization of the one-photon probability.
//! - [`simulate`]: seedable, parallel Monte Carlo of the physical process.
//! - [`sweep`]: scalability curves and (eta, gamma) grids.

pub mod analytic;
pub mod arch;
pub mod error;
pub mod optimize;
pub mod simulate;
pub mod sweep;

pub use analytic::{
    amhps_pn, fl_snr, general_distribution, general_pn, mhps_pn, poisson_pmf, smhps_gain,
    smhps_pn, smhps_snr_closed, snr_of, trigger_law, OutputSummary, PhotonDistribution,
};
pub use arch::{expand, Architecture, ChannelSpec, Efficiencies, Scheme};
pub use error::{Error, Result};
pub use optimize::{
    best_symmetric, delta_percent, p1_max, solve_snr_threshold, two_crystal_ideal_opt, OptResult,
};
pub use simulate::{simulate, McEstimate};
pub use sweep::{contour_grid, scalability_curve, Metric, SchemeKind, SweepGrid};
