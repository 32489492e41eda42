//! Source architectures and their per-channel expansion.
//!
//! Every scheme is evaluated through the same general representation: an
//! ordered list of heralded channels, each with its own mean pair number and
//! router depth. Channel 1 is checked first by the switching network; when no
//! detector fires, channel 1 is routed to the output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on a single channel's mean pair number after pump compensation.
pub const DEFAULT_OVERFLOW_BOUND: f64 = 1e6;

/// Largest channel list `expand` will materialize.
pub const MAX_EXPANDED_CHANNELS: usize = 1 << 20;

/// Detector efficiency `eta` and per-router transmissivity `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEfficiencies")]
pub struct Efficiencies {
    pub eta: f64,
    pub gamma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEfficiencies {
    eta: f64,
    gamma: f64,
}

impl TryFrom<RawEfficiencies> for Efficiencies {
    type Error = Error;

    fn try_from(raw: RawEfficiencies) -> Result<Self> {
        Efficiencies::new(raw.eta, raw.gamma)
    }
}

impl Efficiencies {
    /// Perfect detectors and lossless routers.
    pub const IDEAL: Efficiencies = Efficiencies {
        eta: 1.0,
        gamma: 1.0,
    };

    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidEfficiencies(format!(
                "eta = {eta} outside [0, 1]"
            )));
        }
        // gamma = 0 is degenerate: pump compensation divides by gamma^k.
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidEfficiencies(format!(
                "gamma = {gamma} outside (0, 1]"
            )));
        }
        Ok(Efficiencies { eta, gamma })
    }

    /// Probability that a signal photon survives `depth` routers.
    pub fn transmission(&self, depth: u32) -> f64 {
        self.gamma.powi(depth as i32)
    }
}

/// One heralded crystal in priority order: mean pair number and router depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub mu: f64,
    pub k: u32,
}

impl ChannelSpec {
    pub fn new(mu: f64, k: u32) -> Result<Self> {
        check_pump("channel mu", mu)?;
        Ok(ChannelSpec { mu, k })
    }
}

/// A source architecture with its pump setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArchitectureDoc", into = "ArchitectureDoc")]
pub enum Architecture {
    /// Attenuated pulsed laser with Poisson photon number of mean `pump`.
    FaintLaser { pump: f64 },
    /// `m` crystals, perfect detection and routing, each pumped to `pump` mean pairs.
    Ideal { m: u32, pump: f64 },
    /// Binary router tree of depth `k` over `2^k` crystals, each pumped to `pump / gamma^k`.
    Symmetric { k: u32, pump: f64 },
    /// Router chain over `m` crystals with per-channel compensation `pump / gamma^k_i`.
    Asymmetric { m: u32, pump: f64 },
    /// Arbitrary channel list in priority order.
    General { channels: Vec<ChannelSpec> },
}

/// Architecture family with its size fixed and the pump left free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scheme {
    FaintLaser,
    Ideal { m: u32 },
    Symmetric { k: u32 },
    Asymmetric { m: u32 },
}

impl Scheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Scheme::Ideal { m } | Scheme::Asymmetric { m } if m == 0 => Err(
                Error::InvalidArchitecture("crystal count m must be at least 1".into()),
            ),
            Scheme::Symmetric { k } if k > 62 => Err(Error::InvalidArchitecture(format!(
                "tree depth k = {k} is too large"
            ))),
            _ => Ok(()),
        }
    }

    /// Total number of crystals.
    pub fn crystals(&self) -> u64 {
        match *self {
            Scheme::FaintLaser => 1,
            Scheme::Ideal { m } | Scheme::Asymmetric { m } => m as u64,
            Scheme::Symmetric { k } => 1u64 << k,
        }
    }

    pub fn with_pump(&self, pump: f64) -> Architecture {
        match *self {
            Scheme::FaintLaser => Architecture::FaintLaser { pump },
            Scheme::Ideal { m } => Architecture::Ideal { m, pump },
            Scheme::Symmetric { k } => Architecture::Symmetric { k, pump },
            Scheme::Asymmetric { m } => Architecture::Asymmetric { m, pump },
        }
    }

    /// Short lowercase name, matching the JSON `scheme` tag.
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::FaintLaser => "faint_laser",
            Scheme::Ideal { .. } => "ideal",
            Scheme::Symmetric { .. } => "symmetric",
            Scheme::Asymmetric { .. } => "asymmetric",
        }
    }

    /// Compressed channel list for pump `pump`; see [`ChannelRun`].
    ///
    /// No overflow bound is applied: deep channels may carry an infinite mean,
    /// which the evaluators treat as "always triggers".
    pub fn runs(&self, pump: f64, eff: &Efficiencies) -> Vec<ChannelRun> {
        match *self {
            Scheme::FaintLaser => vec![ChannelRun::plain(pump, 1.0, 1)],
            Scheme::Ideal { m } => vec![ChannelRun::plain(pump, 1.0, m as u64)],
            Scheme::Symmetric { k } => {
                vec![ChannelRun::compensated(pump, eff.transmission(k), 1u64 << k)]
            }
            Scheme::Asymmetric { m } => asymmetric_depths(m)
                .fold(Vec::<ChannelRun>::new(), |mut runs, depth| {
                    let t = eff.transmission(depth);
                    match runs.last_mut() {
                        Some(last) if last.transmission == t => last.count += 1,
                        _ => runs.push(ChannelRun::compensated(pump, t, 1)),
                    }
                    runs
                }),
        }
    }
}

/// Router depths of the asymmetric chain: `k_i = i` for `i < m`, `k_m = m - 1`.
pub fn asymmetric_depths(m: u32) -> impl Iterator<Item = u32> {
    (1..=m).map(move |i| if i < m { i } else { m - 1 })
}

/// A block of `count` consecutive identical channels.
///
/// `mu` is the mean pair number at the crystal, `lambda` the mean photon
/// number surviving the routers (`mu * transmission`). Both are stored so that
/// compensated schemes keep `lambda` exact even when `mu` overflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRun {
    pub mu: f64,
    pub lambda: f64,
    pub transmission: f64,
    pub count: u64,
}

impl ChannelRun {
    pub fn plain(mu: f64, transmission: f64, count: u64) -> Self {
        ChannelRun {
            mu,
            lambda: mu * transmission,
            transmission,
            count,
        }
    }

    /// Channel pumped to `lambda / transmission` so that `lambda` reaches the output.
    pub fn compensated(lambda: f64, transmission: f64, count: u64) -> Self {
        ChannelRun {
            mu: if lambda == 0.0 { 0.0 } else { lambda / transmission },
            lambda,
            transmission,
            count,
        }
    }

    pub fn from_channels(channels: &[ChannelSpec], eff: &Efficiencies) -> Vec<ChannelRun> {
        channels
            .iter()
            .map(|c| ChannelRun::plain(c.mu, eff.transmission(c.k), 1))
            .collect()
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        match self {
            Architecture::General { channels } => {
                if channels.is_empty() {
                    return Err(Error::InvalidArchitecture(
                        "general architecture needs at least one channel".into(),
                    ));
                }
                for c in channels {
                    check_pump("channel mu", c.mu)?;
                }
                Ok(())
            }
            other => {
                let (scheme, pump) = other.split().expect("named scheme");
                scheme.validate()?;
                check_pump("pump", pump)
            }
        }
    }

    /// Scheme family and pump, or `None` for a general channel list.
    pub fn split(&self) -> Option<(Scheme, f64)> {
        match *self {
            Architecture::FaintLaser { pump } => Some((Scheme::FaintLaser, pump)),
            Architecture::Ideal { m, pump } => Some((Scheme::Ideal { m }, pump)),
            Architecture::Symmetric { k, pump } => Some((Scheme::Symmetric { k }, pump)),
            Architecture::Asymmetric { m, pump } => Some((Scheme::Asymmetric { m }, pump)),
            Architecture::General { .. } => None,
        }
    }

    /// Compressed channel list used by the fast evaluators.
    pub fn runs(&self, eff: &Efficiencies) -> Result<Vec<ChannelRun>> {
        self.validate()?;
        Ok(match self {
            Architecture::General { channels } => ChannelRun::from_channels(channels, eff),
            other => {
                let (scheme, pump) = other.split().expect("named scheme");
                scheme.runs(pump, eff)
            }
        })
    }
}

fn check_pump(what: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArchitecture(format!(
            "{what} = {value} must be finite and non-negative"
        )))
    }
}

/// Expands an architecture into its priority-ordered channel list, rejecting
/// any channel whose compensated pump exceeds [`DEFAULT_OVERFLOW_BOUND`].
pub fn expand(arch: &Architecture, eff: &Efficiencies) -> Result<Vec<ChannelSpec>> {
    expand_with_bound(arch, eff, DEFAULT_OVERFLOW_BOUND)
}

pub fn expand_with_bound(
    arch: &Architecture,
    eff: &Efficiencies,
    bound: f64,
) -> Result<Vec<ChannelSpec>> {
    arch.validate()?;
    let channels = match arch {
        Architecture::General { channels } => channels.clone(),
        Architecture::FaintLaser { pump } => vec![ChannelSpec { mu: *pump, k: 0 }],
        Architecture::Ideal { m, pump } => vec![ChannelSpec { mu: *pump, k: 0 }; *m as usize],
        Architecture::Symmetric { k, pump } => {
            let count = 1usize.checked_shl(*k).unwrap_or(usize::MAX);
            if *k >= usize::BITS || count > MAX_EXPANDED_CHANNELS {
                return Err(Error::InvalidArchitecture(format!(
                    "symmetric tree of depth {k} has too many channels to expand"
                )));
            }
            vec![
                ChannelSpec {
                    mu: pump / eff.transmission(*k),
                    k: *k,
                };
                count
            ]
        }
        Architecture::Asymmetric { m, pump } => {
            if *m as usize > MAX_EXPANDED_CHANNELS {
                return Err(Error::InvalidArchitecture(format!(
                    "asymmetric chain of {m} crystals has too many channels to expand"
                )));
            }
            asymmetric_depths(*m)
                .map(|k| ChannelSpec {
                    mu: pump / eff.transmission(k),
                    k,
                })
                .collect()
        }
    };
    if let Some((index, c)) = channels
        .iter()
        .enumerate()
        .find(|(_, c)| !(c.mu <= bound))
    {
        return Err(Error::PumpOverflow {
            index: index + 1,
            mu: c.mu,
            bound,
        });
    }
    Ok(channels)
}

/// Wire form of [`Architecture`]; field names are part of the file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchitectureDoc {
    scheme: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pump: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channels: Option<Vec<ChannelSpec>>,
}

impl From<Architecture> for ArchitectureDoc {
    fn from(arch: Architecture) -> Self {
        let mut doc = ArchitectureDoc {
            scheme: String::new(),
            m: None,
            k: None,
            pump: None,
            channels: None,
        };
        match arch {
            Architecture::General { channels } => {
                doc.scheme = "general".into();
                doc.channels = Some(channels);
            }
            other => {
                let (scheme, pump) = other.split().expect("named scheme");
                doc.scheme = scheme.name().into();
                doc.pump = Some(pump);
                match scheme {
                    Scheme::Ideal { m } | Scheme::Asymmetric { m } => doc.m = Some(m),
                    Scheme::Symmetric { k } => doc.k = Some(k),
                    Scheme::FaintLaser => {}
                }
            }
        }
        doc
    }
}

impl TryFrom<ArchitectureDoc> for Architecture {
    type Error = Error;

    fn try_from(doc: ArchitectureDoc) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArchitecture(msg);
        let scheme = doc.scheme.to_ascii_lowercase();
        let arch = if scheme == "general" {
            if doc.m.is_some() || doc.k.is_some() || doc.pump.is_some() {
                return Err(bad("general scheme takes only `channels`".into()));
            }
            let channels = doc
                .channels
                .ok_or_else(|| bad("general scheme requires `channels`".into()))?;
            Architecture::General { channels }
        } else {
            if doc.channels.is_some() {
                return Err(bad(format!("scheme `{scheme}` does not take `channels`")));
            }
            let pump = doc
                .pump
                .ok_or_else(|| bad(format!("scheme `{scheme}` requires `pump`")))?;
            let scheme = parse_scheme(&scheme, doc.m, doc.k)?;
            scheme.with_pump(pump)
        };
        arch.validate()?;
        Ok(arch)
    }
}

/// Builds a [`Scheme`] from its name and size fields.
///
/// Accepted names: `faint_laser` (`fl`), `ideal` (`mhps`), `symmetric`
/// (`smhps`), `asymmetric` (`amhps`). A symmetric tree may be sized by `k` or
/// by a power-of-two `m`.
pub fn parse_scheme(name: &str, m: Option<u32>, k: Option<u32>) -> Result<Scheme> {
    let bad = |msg: String| Error::InvalidArchitecture(msg);
    let need_m = |m: Option<u32>| m.ok_or_else(|| bad(format!("scheme `{name}` requires `m`")));
    let scheme = match name.to_ascii_lowercase().as_str() {
        "faint_laser" | "fl" => {
            if m.is_some_and(|m| m != 1) || k.is_some_and(|k| k != 0) {
                return Err(bad("faint laser has a single source".into()));
            }
            Scheme::FaintLaser
        }
        "ideal" | "mhps" => {
            if k.is_some() {
                return Err(bad("ideal scheme is sized by `m`".into()));
            }
            Scheme::Ideal { m: need_m(m)? }
        }
        "asymmetric" | "amhps" => {
            if k.is_some() {
                return Err(bad("asymmetric scheme is sized by `m`".into()));
            }
            Scheme::Asymmetric { m: need_m(m)? }
        }
        "symmetric" | "smhps" => match (m, k) {
            (_, Some(k)) if m.is_some_and(|m| Some(m) != 1u32.checked_shl(k)) => {
                return Err(bad(format!("symmetric m must equal 2^k (k = {k})")));
            }
            (_, Some(k)) => Scheme::Symmetric { k },
            (Some(m), None) if m.is_power_of_two() => Scheme::Symmetric {
                k: m.trailing_zeros(),
            },
            (Some(m), None) => {
                return Err(bad(format!("symmetric scheme needs m = 2^k, got {m}")));
            }
            (None, None) => return Err(bad("symmetric scheme requires `k` or `m`".into())),
        },
        other => return Err(bad(format!("unknown scheme `{other}`"))),
    };
    scheme.validate()?;
    Ok(scheme)
}
