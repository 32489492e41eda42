use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use photon_mux_core::arch::{parse_scheme, ChannelRun};
use photon_mux_core::sweep::{default_m_values, write_curve_csv};
use photon_mux_core::{
    best_symmetric, contour_grid, p1_max, scalability_curve, Architecture, Error, OptResult,
    PhotonDistribution, Scheme, SchemeKind,
};
use serde::Serialize;

use crate::config::Settings;
use crate::error::{CliError, CliResult};
use crate::json::to_json;
use crate::reproduce::{reproduce, Manifest, ReproduceParams};
use crate::svg::{contour_levels, Heatmap, LineChart, Scale, Series};
use crate::validate::{run_cases, standard_grid, Case, CaseReport, ABS_FLOOR, MAX_N, SIGMAS};

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::Io(format!("stdout: {e}"))
}

/// Rejects channels whose compensated mean pair number exceeds the bound.
fn check_overflow(runs: &[ChannelRun], bound: f64) -> CliResult<()> {
    let mut index = 1;
    for run in runs {
        if !(run.mu <= bound) {
            return Err(Error::PumpOverflow { index, mu: run.mu, bound }.into());
        }
        index += run.count as usize;
    }
    Ok(())
}

#[derive(Serialize)]
struct DistReport<'a> {
    architecture: &'a Architecture,
    eta: f64,
    gamma: f64,
    distribution: &'a PhotonDistribution,
}

/// Output photon-number distribution of one architecture.
pub fn cmd_dist(settings: &Settings, out: &mut dyn Write) -> CliResult<PhotonDistribution> {
    let arch = settings.architecture()?;
    let eff = settings.efficiencies()?;
    let runs = arch.runs(&eff)?;
    check_overflow(&runs, settings.overflow_bound)?;
    let dist = PhotonDistribution::from_runs(&runs, eff.eta, settings.n_max)?;
    let json = to_json(&DistReport {
        architecture: &arch,
        eta: eff.eta,
        gamma: eff.gamma,
        distribution: &dist,
    });
    if let Some(path) = &settings.out {
        write_file(path, json.as_bytes())?;
    }
    if settings.json {
        out.write_all(json.as_bytes()).map_err(stdout_err)?;
    } else {
        let mut t = String::new();
        t.push_str(&format!("architecture  {}\n", describe(&arch)));
        t.push_str(&format!("eta = {}, gamma = {}\n\n", eff.eta, eff.gamma));
        t.push_str("   n  P(N = n)\n");
        for (n, p) in dist.probs.iter().enumerate() {
            t.push_str(&format!("{n:>4}  {p:.10e}\n"));
        }
        t.push_str(&format!(
            "\nP1 = {:.5}  P0 = {:.5}  P(N>=2) = {:.5e}  SNR = {:.5}\n",
            dist.p1, dist.p0, dist.p_multi, dist.snr
        ));
        out.write_all(t.as_bytes()).map_err(stdout_err)?;
    }
    Ok(dist)
}

fn describe(arch: &Architecture) -> String {
    match arch {
        Architecture::FaintLaser { pump } => format!("faint laser, pump {pump}"),
        Architecture::Ideal { m, pump } => format!("ideal, m = {m}, pump {pump}"),
        Architecture::Symmetric { k, pump } => format!("symmetric, k = {k} ({} crystals), pump {pump}", 1u64 << k),
        Architecture::Asymmetric { m, pump } => format!("asymmetric, m = {m}, pump {pump}"),
        Architecture::General { channels } => format!("general, {} channels", channels.len()),
    }
}

/// Performance index of one scheme; `--best` picks the best symmetric tree
/// with at most `m` crystals.
pub fn cmd_optimize(settings: &Settings, out: &mut dyn Write) -> CliResult<OptResult> {
    let eff = settings.efficiencies()?;
    let result = if settings.best {
        let m_max = match settings.scheme()? {
            Scheme::Symmetric { k } => 1u32
                .checked_shl(k)
                .ok_or_else(|| CliError::Config(format!("tree depth {k} too large")))?,
            _ => return Err(CliError::Config("--best applies to symmetric schemes".into())),
        };
        best_symmetric(settings.arch.m.unwrap_or(m_max), &eff, settings.theta)?
    } else {
        p1_max(&settings.scheme()?, &eff, settings.theta)?
    };
    let json = to_json(&result);
    if let Some(path) = &settings.out {
        write_file(path, json.as_bytes())?;
    }
    if settings.json {
        out.write_all(json.as_bytes()).map_err(stdout_err)?;
    } else {
        let t = format!(
            "scheme       {}\ncrystals     {}\neta, gamma   {}, {}\ntheta        {}\npump mu*     {:.10e}\nP1 bar       {:.10}\nSNR at mu*   {:.10}\n",
            result.scheme.name(),
            result.chosen_m,
            result.eta,
            result.gamma,
            result.theta,
            result.mu_star,
            result.p1_bar,
            result.snr_at_opt
        );
        out.write_all(t.as_bytes()).map_err(stdout_err)?;
    }
    Ok(result)
}

fn svg_path(csv: &Path) -> PathBuf {
    csv.with_extension("svg")
}

/// Scalability curve (no metric) or (eta, gamma) grid (with a metric).
pub fn cmd_sweep(settings: &Settings, out: &mut dyn Write) -> CliResult<()> {
    let mut csv = vec![];
    let svg = if let Some(metric) = settings.metric {
        let m = settings
            .arch
            .m
            .or(settings.arch.k.map(|k| 1u32 << k.min(31)))
            .ok_or_else(|| CliError::Config("grid sweeps need --m".into()))?;
        let (eta_axis, gamma_axis) = settings.axes();
        let grid = contour_grid(metric, settings.theta, m, &eta_axis, &gamma_axis)?;
        grid.write_csv(&mut csv).map_err(stdout_err)?;
        let values: Vec<Vec<f64>> = grid.cells.iter().map(|r| r.iter().map(|c| c.value).collect()).collect();
        let extra: &[f64] = if metric == photon_mux_core::Metric::Delta { &[0.0] } else { &[] };
        Heatmap {
            title: format!("{}, m={m}, theta={}", metric.name(), settings.theta),
            x_label: "detection efficiency eta".into(),
            y_label: "transmissivity gamma".into(),
            levels: contour_levels(&values, 8, extra),
            x: eta_axis,
            y: gamma_axis,
            values,
            overlays: vec![],
            markers: vec![],
        }
        .render()
    } else {
        // The crystal count is swept, so any configured size is ignored.
        let name = settings
            .arch
            .scheme
            .as_deref()
            .ok_or_else(|| CliError::Config("curve sweeps need --scheme (or --metric for a grid)".into()))?;
        let kind = match parse_scheme(name, Some(1), None)? {
            Scheme::Ideal { .. } => SchemeKind::Ideal,
            Scheme::Symmetric { .. } => SchemeKind::Symmetric,
            Scheme::Asymmetric { .. } => SchemeKind::Asymmetric,
            Scheme::FaintLaser => return Err(CliError::Config("the faint laser has no crystal count to sweep".into())),
        };
        let m_values = settings.m_values.clone().unwrap_or_else(|| {
            let all = default_m_values();
            match kind {
                SchemeKind::Symmetric => all.into_iter().filter(|m| m.is_power_of_two()).collect(),
                _ => all,
            }
        });
        let eff = settings.efficiencies()?;
        let points = scalability_curve(kind, settings.theta, &eff, &m_values)?;
        write_curve_csv(&points, &mut csv).map_err(stdout_err)?;
        LineChart {
            title: format!("{:?} scheme, eta={}, gamma={}, theta={}", kind, eff.eta, eff.gamma, settings.theta),
            x_label: "number of crystals m".into(),
            y_label: "P1 at guaranteed SNR".into(),
            x_scale: Scale::Log2,
            series: vec![Series {
                name: format!("{kind:?}"),
                points: points.iter().map(|p| (p.m as f64, p.p1)).collect(),
                dashed: false,
            }],
        }
        .render()
    };
    match &settings.out {
        Some(path) => {
            write_file(path, &csv)?;
            if settings.svg {
                write_file(&svg_path(path), svg.as_bytes())?;
            }
        }
        None if settings.svg => return Err(CliError::Config("--svg needs --out".into())),
        None => out.write_all(&csv).map_err(stdout_err)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct ValidationReport<'a> {
    rule: String,
    cases: usize,
    failures: usize,
    pass: bool,
    results: &'a [CaseReport],
}

/// Monte Carlo check of the given architecture, or of the standard grid when
/// no scheme is configured. Fails with exit code 3 on any discrepancy.
pub fn cmd_mc_validate(settings: &Settings, out: &mut dyn Write) -> CliResult<Vec<CaseReport>> {
    let cases = if settings.has_scheme() {
        vec![Case {
            arch: settings.architecture()?,
            eff: settings.efficiencies()?,
        }]
    } else {
        standard_grid()
    };
    let reports = run_cases(&cases, settings.trials, settings.seed, settings.overflow_bound)?;
    let failures = reports.iter().filter(|r| !r.pass).count();
    let mut t = String::new();
    for r in &reports {
        t.push_str(&format!(
            "{}  {:<48} eta={:<4} gamma={:<4} n-score={:.3} chi-score={:.3}\n",
            if r.pass { "ok  " } else { "FAIL" },
            describe(&r.architecture),
            r.eta,
            r.gamma,
            r.pn_score,
            r.chi_score
        ));
    }
    t.push_str(&format!(
        "{} of {} cases within |p_hat - P| <= max({SIGMAS} stderr, {ABS_FLOOR:e}) for n <= {MAX_N} and chi within {SIGMAS} sigma\n",
        reports.len() - failures,
        reports.len()
    ));
    if let Some(path) = &settings.out {
        let json = to_json(&ValidationReport {
            rule: format!("|p_hat - P| <= max({SIGMAS} stderr, {ABS_FLOOR:e}), n <= {MAX_N}; chi within {SIGMAS} sigma"),
            cases: reports.len(),
            failures,
            pass: failures == 0,
            results: &reports,
        });
        write_file(path, json.as_bytes())?;
    }
    out.write_all(t.as_bytes()).map_err(stdout_err)?;
    if failures > 0 {
        return Err(CliError::Validation(format!("{failures} of {} cases disagree", reports.len())));
    }
    Ok(reports)
}

/// Default output directory of `reproduce`.
pub const DEFAULT_REPRODUCE_DIR: &str = "figures";

pub fn cmd_reproduce(settings: &Settings, out: &mut dyn Write) -> CliResult<Manifest> {
    let dir = settings
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_REPRODUCE_DIR));
    let params = ReproduceParams::new(
        settings.theta,
        settings.grid,
        settings.pairs.clone(),
        settings.seed,
        settings.trials,
    );
    let mut params = params;
    if let Some(axis) = &settings.eta_axis {
        params.eta_axis = axis.clone();
    }
    if let Some(axis) = &settings.gamma_axis {
        params.gamma_axis = axis.clone();
    }
    if let Some(m_values) = &settings.m_values {
        params.m_values = m_values.clone();
    }
    let manifest = reproduce(&dir, &params)?;
    let mut t = String::new();
    for f in &manifest.files {
        t.push_str(&format!("{}  {:>9}  {}\n", f.sha256, f.bytes, f.name));
    }
    t.push_str(&format!("wrote {} files and manifest.json to {}\n", manifest.files.len(), dir.display()));
    out.write_all(t.as_bytes()).map_err(stdout_err)?;
    Ok(manifest)
}
