//! Run configuration: JSON config file merged with command-line flags.
//!
//! Flags override config keys, which override the built-in defaults.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use photon_mux_core::arch::{parse_scheme, DEFAULT_OVERFLOW_BOUND};
use photon_mux_core::sweep::{linspace, Metric};
use photon_mux_core::{Architecture, ChannelSpec, Efficiencies, Scheme};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_THETA: f64 = 10.0;
pub const DEFAULT_GRID: usize = 101;
pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_N_MAX: usize = 40;

/// Flags shared by every subcommand; each command reads the ones it needs.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run configuration; flags given here take precedence over its keys.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// faint_laser (fl), ideal (mhps), symmetric (smhps), asymmetric (amhps) or general.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Number of crystals.
    #[arg(long)]
    pub m: Option<u32>,
    /// Depth of the symmetric router tree (2^k crystals).
    #[arg(long)]
    pub k: Option<u32>,
    /// Mean pair number per pulse before router-loss compensation.
    #[arg(long)]
    pub pump: Option<f64>,
    /// Detection efficiency.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Router transmissivity.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Guaranteed SNR.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Monte Carlo trials per configuration.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Monte Carlo seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points per axis of (eta, gamma) grids.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Output file, or output directory for `reproduce`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also render an SVG chart next to the output file.
    #[arg(long)]
    pub svg: bool,
    /// Grid metric for `sweep`: p1_symmetric_best, p1_asymmetric or delta.
    #[arg(long)]
    pub metric: Option<String>,
    /// Crystal counts for a scalability curve, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub m_values: Option<Vec<u32>>,
    /// For `optimize` with a symmetric scheme: pick the best tree with at most `m` crystals.
    #[arg(long)]
    pub best: bool,
    /// Largest photon number reported by `dist`.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Largest mean pair number any single crystal may need.
    #[arg(long)]
    pub overflow_bound: Option<f64>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

/// Scheme description; the same fields as the architecture JSON, all optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<ChannelSpec>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffSpec {
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub metric: Option<String>,
    pub m_values: Option<Vec<u32>>,
    pub grid: Option<usize>,
    pub eta_axis: Option<Vec<f64>>,
    pub gamma_axis: Option<Vec<f64>>,
    /// (eta, gamma) pairs of the scalability figures.
    pub pairs: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub architecture: Option<ArchSpec>,
    pub efficiencies: Option<EffSpec>,
    pub theta: Option<f64>,
    pub n_max: Option<usize>,
    pub overflow_bound: Option<f64>,
    pub sweep: Option<SweepSpec>,
    pub mc: Option<McSpec>,
    pub out: Option<PathBuf>,
    pub svg: Option<bool>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub arch: ArchSpec,
    pub eta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub n_max: usize,
    pub overflow_bound: f64,
    pub best: bool,
    pub metric: Option<Metric>,
    pub m_values: Option<Vec<u32>>,
    pub grid: usize,
    pub eta_axis: Option<Vec<f64>>,
    pub gamma_axis: Option<Vec<f64>>,
    pub pairs: Option<Vec<(f64, f64)>>,
    pub trials: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub svg: bool,
    pub json: bool,
}

impl Settings {
    /// Reads the config file named by `flags` (if any) and applies the flags on top.
    pub fn resolve(flags: &Flags) -> CliResult<Self> {
        let config = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        Self::merge(config, flags)
    }

    pub fn merge(config: RunConfig, flags: &Flags) -> CliResult<Self> {
        let mut arch = config.architecture.unwrap_or_default();
        if let Some(name) = &flags.scheme {
            let same = arch
                .scheme
                .as_deref()
                .is_some_and(|s| s.eq_ignore_ascii_case(name));
            if !same {
                // A different scheme from the command line discards the file's sizing.
                arch = ArchSpec {
                    pump: arch.pump,
                    ..ArchSpec::default()
                };
            }
            arch.scheme = Some(name.clone());
        }
        if flags.m.is_some() {
            arch.m = flags.m;
        }
        if flags.k.is_some() {
            arch.k = flags.k;
        }
        if flags.pump.is_some() {
            arch.pump = flags.pump;
        }

        let eff = config.efficiencies.unwrap_or_default();
        let sweep = config.sweep.unwrap_or_default();
        let mc = config.mc.unwrap_or_default();
        let metric = match flags.metric.as_ref().or(sweep.metric.as_ref()) {
            Some(name) => Some(name.parse::<Metric>()?),
            None => None,
        };
        let settings = Settings {
            arch,
            eta: flags.eta.or(eff.eta).unwrap_or(1.0),
            gamma: flags.gamma.or(eff.gamma).unwrap_or(1.0),
            theta: flags.theta.or(config.theta).unwrap_or(DEFAULT_THETA),
            n_max: flags.n_max.or(config.n_max).unwrap_or(DEFAULT_N_MAX),
            overflow_bound: flags
                .overflow_bound
                .or(config.overflow_bound)
                .unwrap_or(DEFAULT_OVERFLOW_BOUND),
            best: flags.best,
            metric,
            m_values: flags.m_values.clone().or(sweep.m_values),
            grid: flags.grid.or(sweep.grid).unwrap_or(DEFAULT_GRID),
            eta_axis: sweep.eta_axis,
            gamma_axis: sweep.gamma_axis,
            pairs: sweep.pairs,
            trials: flags.trials.or(mc.trials).unwrap_or(DEFAULT_TRIALS),
            seed: flags.seed.or(mc.seed).unwrap_or(DEFAULT_SEED),
            out: flags.out.clone().or(config.out),
            svg: flags.svg || config.svg.unwrap_or(false),
            json: flags.json,
        };
        settings.check()?;
        Ok(settings)
    }

    fn check(&self) -> CliResult<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(CliError::Config(format!("theta must be positive, got {}", self.theta)));
        }
        if self.grid < 2 {
            return Err(CliError::Config(format!("grid needs at least 2 points, got {}", self.grid)));
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if !(self.overflow_bound > 0.0) {
            return Err(CliError::Config("overflow bound must be positive".into()));
        }
        Ok(())
    }

    pub fn efficiencies(&self) -> CliResult<Efficiencies> {
        Ok(Efficiencies::new(self.eta, self.gamma)?)
    }

    pub fn has_scheme(&self) -> bool {
        self.arch.scheme.is_some()
    }

    fn scheme_name(&self) -> CliResult<&str> {
        self.arch
            .scheme
            .as_deref()
            .ok_or_else(|| CliError::Config("no scheme given (use --scheme or a config file)".into()))
    }

    /// Architecture including its pump.
    pub fn architecture(&self) -> CliResult<Architecture> {
        self.scheme_name()?;
        let doc = serde_json::to_value(&self.arch).expect("plain data");
        serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Named scheme with the pump left free.
    pub fn scheme(&self) -> CliResult<Scheme> {
        let name = self.scheme_name()?;
        if name.eq_ignore_ascii_case("general") {
            return Err(CliError::Config("a general channel list has no free pump to optimize".into()));
        }
        Ok(parse_scheme(name, self.arch.m, self.arch.k)?)
    }

    /// Grid axes: explicit lists from the config, else `grid` points over `[0.01, 1]`.
    pub fn axes(&self) -> (Vec<f64>, Vec<f64>) {
        let default = linspace(0.01, 1.0, self.grid);
        (
            self.eta_axis.clone().unwrap_or_else(|| default.clone()),
            self.gamma_axis.clone().unwrap_or(default),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let config = RunConfig::from_json(
            r#"{"architecture": {"scheme": "asymmetric", "m": 8, "pump": 0.2},
                "efficiencies": {"eta": 0.6}, "theta": 20, "mc": {"seed": 9}}"#,
        )
        .unwrap();
        let flags = Flags {
            pump: Some(0.3),
            seed: Some(4),
            ..Flags::default()
        };
        let s = Settings::merge(config, &flags).unwrap();
        assert_eq!(s.arch.m, Some(8));
        assert_eq!(s.arch.pump, Some(0.3));
        assert_eq!((s.eta, s.gamma, s.theta), (0.6, 1.0, 20.0));
        assert_eq!((s.seed, s.trials), (4, DEFAULT_TRIALS));
        assert_eq!(s.architecture().unwrap(), Architecture::Asymmetric { m: 8, pump: 0.3 });
    }

    #[test]
    fn scheme_flag_replaces_file_sizing() {
        let config =
            RunConfig::from_json(r#"{"architecture": {"scheme": "asymmetric", "m": 8, "pump": 0.2}}"#)
                .unwrap();
        let flags = Flags {
            scheme: Some("symmetric".into()),
            k: Some(2),
            ..Flags::default()
        };
        let s = Settings::merge(config, &flags).unwrap();
        assert_eq!(s.architecture().unwrap(), Architecture::Symmetric { k: 2, pump: 0.2 });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"thta": 10}"#).is_err());
        assert!(RunConfig::from_json(r#"{"mc": {"trials": 10, "sed": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"architecture": {"scheme": "fl", "pmp": 1}}"#).is_err());
    }

    #[test]
    fn bad_values_are_config_errors() {
        let flags = Flags {
            theta: Some(-1.0),
            ..Flags::default()
        };
        assert_eq!(Settings::merge(RunConfig::default(), &flags).unwrap_err().exit_code(), 2);
        let flags = Flags {
            metric: Some("p2".into()),
            ..Flags::default()
        };
        assert!(Settings::merge(RunConfig::default(), &flags).is_err());
        let s = Settings::merge(RunConfig::default(), &Flags::default()).unwrap();
        assert!(s.architecture().is_err());
    }
}
