//! Regenerates every figure dataset with its SVG rendering and a checksummed manifest.

use std::ffi::CString;
use std::fs;
use std::path::{Path, PathBuf};

use photon_mux_core::arch::expand;
use photon_mux_core::optimize::{two_crystal_ideal_opt, two_crystal_p1};
use photon_mux_core::sweep::{default_m_values, fmt_f64, linspace, CurvePoint, SweepGrid};
use photon_mux_core::{
    contour_grid, p1_max, scalability_curve, simulate, Architecture, Efficiencies, Metric,
    SchemeKind, Scheme,
};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::json::to_json;
use crate::svg::{contour_levels, Heatmap, LineChart, Scale, Series};

/// Free space required in the output file system before anything is written.
pub const MIN_FREE_BYTES: u64 = 1 << 30;

/// (eta, gamma) pairs of the scalability curves unless configured otherwise.
pub const DEFAULT_PAIRS: [(f64, f64); 5] = [(1.0, 1.0), (0.9, 0.9), (0.8, 0.7), (0.62, 0.5), (0.5, 0.3)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproduceParams {
    pub theta: f64,
    /// Points per axis of the (eta, gamma) contour grids.
    pub grid: usize,
    pub eta_axis: Vec<f64>,
    pub gamma_axis: Vec<f64>,
    pub pairs: Vec<(f64, f64)>,
    pub m_values: Vec<u32>,
    /// Guaranteed-SNR axis of the ideal-source comparison.
    pub theta_axis: Vec<f64>,
    pub ideal_m: Vec<u32>,
    /// Pump axis (both crystals) of the two-crystal map.
    pub two_crystal_axis: Vec<f64>,
    /// Seed and trial count of the Monte Carlo spot check.
    pub seed: u64,
    pub trials: u64,
    pub spot_check_m: u32,
}

impl ReproduceParams {
    pub fn new(theta: f64, grid: usize, pairs: Option<Vec<(f64, f64)>>, seed: u64, trials: u64) -> Self {
        ReproduceParams {
            theta,
            grid,
            eta_axis: linspace(0.01, 1.0, grid),
            gamma_axis: linspace(0.01, 1.0, grid),
            pairs: pairs.unwrap_or_else(|| DEFAULT_PAIRS.to_vec()),
            m_values: default_m_values(),
            theta_axis: linspace(1.0, 100.0, 199),
            ideal_m: vec![4, 8, 16],
            two_crystal_axis: linspace(0.0, 2.5, 126),
            seed,
            trials,
            spot_check_m: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub generator: String,
    pub parameters: ReproduceParams,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Free bytes available to unprivileged users on the file system holding
/// `path` or its nearest existing ancestor.
pub fn free_space(path: &Path) -> std::io::Result<u64> {
    let mut probe = path.to_path_buf();
    while !probe.exists() {
        if !probe.pop() {
            probe = PathBuf::from(".");
            break;
        }
    }
    if probe.as_os_str().is_empty() {
        probe = PathBuf::from(".");
    }
    let c_path = CString::new(probe.to_string_lossy().as_bytes())
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
    // SAFETY: `c_path` is a valid NUL-terminated string and `stat` is a
    // zero-initialized out-parameter of the right type.
    let mut stat: libc::statvfs = unsafe { std::mem::zeroed() };
    let rc = unsafe { libc::statvfs(c_path.as_ptr(), &mut stat) };
    if rc != 0 {
        return Err(std::io::Error::last_os_error());
    }
    Ok(stat.f_bavail as u64 * stat.f_frsize as u64)
}

struct Bundle<'a> {
    dir: &'a Path,
    files: Vec<FileEntry>,
}

impl Bundle<'_> {
    fn emit(&mut self, name: &str, contents: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileEntry {
            name: name.into(),
            bytes: contents.len() as u64,
            sha256: sha256_hex(contents),
        });
        Ok(())
    }
}

fn grid_csv(grid: &SweepGrid) -> Vec<u8> {
    let mut buf = vec![];
    grid.write_csv(&mut buf).expect("writing to memory");
    buf
}

fn grid_svg(grid: &SweepGrid, title: &str, extra_levels: &[f64]) -> String {
    let values: Vec<Vec<f64>> = grid
        .cells
        .iter()
        .map(|row| row.iter().map(|c| c.value).collect())
        .collect();
    Heatmap {
        title: title.into(),
        x_label: "detection efficiency eta".into(),
        y_label: "transmissivity gamma".into(),
        levels: contour_levels(&values, 8, extra_levels),
        x: grid.eta_axis.clone(),
        y: grid.gamma_axis.clone(),
        values,
        overlays: vec![],
        markers: vec![],
    }
    .render()
}

fn curves_csv(curves: &[((f64, f64), Vec<CurvePoint>)]) -> String {
    let mut s = String::from("eta,gamma,m,p1,mu_star,snr\n");
    for ((eta, gamma), points) in curves {
        for p in points {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_f64(*eta),
                fmt_f64(*gamma),
                p.m,
                fmt_f64(p.p1),
                fmt_f64(p.mu_star),
                fmt_f64(p.snr)
            ));
        }
    }
    s
}

fn curves_svg(title: &str, curves: &[((f64, f64), Vec<CurvePoint>)], fl: f64) -> String {
    let mut series: Vec<Series> = curves
        .iter()
        .map(|((eta, gamma), points)| Series {
            name: format!("eta={eta}, gamma={gamma}"),
            points: points.iter().map(|p| (p.m as f64, p.p1)).collect(),
            dashed: false,
        })
        .collect();
    if let (Some(first), Some(last)) = (
        curves.iter().flat_map(|c| c.1.first()).map(|p| p.m).min(),
        curves.iter().flat_map(|c| c.1.last()).map(|p| p.m).max(),
    ) {
        series.push(Series {
            name: format!("faint laser {fl:.3}"),
            points: vec![(first as f64, fl), (last as f64, fl)],
            dashed: true,
        });
    }
    LineChart {
        title: title.into(),
        x_label: "number of crystals m".into(),
        y_label: "P1 at guaranteed SNR".into(),
        x_scale: Scale::Log2,
        series,
    }
    .render()
}

fn curves(
    kind: SchemeKind,
    params: &ReproduceParams,
    m_values: &[u32],
) -> CliResult<Vec<((f64, f64), Vec<CurvePoint>)>> {
    params
        .pairs
        .iter()
        .map(|&(eta, gamma)| {
            let eff = Efficiencies::new(eta, gamma)?;
            Ok(((eta, gamma), scalability_curve(kind, params.theta, &eff, m_values)?))
        })
        .collect()
}

/// Writes the full bundle into `dir` and returns its manifest (also written
/// as `manifest.json`).
pub fn reproduce(dir: &Path, params: &ReproduceParams) -> CliResult<Manifest> {
    let free = free_space(dir).map_err(|e| CliError::io(dir, e))?;
    if free < MIN_FREE_BYTES {
        return Err(CliError::Io(format!(
            "{}: only {free} bytes free, need at least {MIN_FREE_BYTES}",
            dir.display()
        )));
    }
    if params.grid < 2 || params.pairs.is_empty() {
        return Err(CliError::Config("reproduce needs a grid of at least 2 points and one (eta, gamma) pair".into()));
    }
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut bundle = Bundle { dir, files: vec![] };
    let theta = params.theta;
    let ideal = Efficiencies::IDEAL;
    let fl = p1_max(&Scheme::FaintLaser, &ideal, theta)?;

    // Ideal sources against the faint laser over the guaranteed SNR.
    let rows: Vec<Vec<f64>> = params
        .theta_axis
        .par_iter()
        .map(|&t| {
            let mut row = vec![p1_max(&Scheme::FaintLaser, &ideal, t)?.p1_bar];
            for &m in &params.ideal_m {
                row.push(p1_max(&Scheme::Ideal { m }, &ideal, t)?.p1_bar);
            }
            Ok(row)
        })
        .collect::<CliResult<_>>()?;
    let mut csv = String::from("theta,fl");
    for m in &params.ideal_m {
        csv.push_str(&format!(",mhps_m{m}"));
    }
    csv.push('\n');
    for (t, row) in params.theta_axis.iter().zip(&rows) {
        csv.push_str(&fmt_f64(*t));
        for v in row {
            csv.push(',');
            csv.push_str(&fmt_f64(*v));
        }
        csv.push('\n');
    }
    bundle.emit("fig2.csv", csv.as_bytes())?;
    let mut series = vec![Series {
        name: "faint laser".into(),
        points: params.theta_axis.iter().zip(&rows).map(|(&t, r)| (t, r[0])).collect(),
        dashed: true,
    }];
    for (c, m) in params.ideal_m.iter().enumerate() {
        series.push(Series {
            name: format!("MHPS m={m}"),
            points: params.theta_axis.iter().zip(&rows).map(|(&t, r)| (t, r[c + 1])).collect(),
            dashed: false,
        });
    }
    let chart = LineChart {
        title: "P1 of ideal sources vs guaranteed SNR".into(),
        x_label: "guaranteed SNR theta".into(),
        y_label: "P1 at guaranteed SNR".into(),
        x_scale: Scale::Linear,
        series,
    };
    bundle.emit("fig2.svg", chart.render().as_bytes())?;

    // Scalability in the number of crystals.
    let asym = curves(SchemeKind::Asymmetric, params, &params.m_values)?;
    bundle.emit("fig4.csv", curves_csv(&asym).as_bytes())?;
    bundle.emit(
        "fig4.svg",
        curves_svg(&format!("Asymmetric chain, theta={theta}"), &asym, fl.p1_bar).as_bytes(),
    )?;
    let powers: Vec<u32> = params.m_values.iter().copied().filter(|m| m.is_power_of_two()).collect();
    let sym = curves(SchemeKind::Symmetric, params, &powers)?;
    bundle.emit("fig5.csv", curves_csv(&sym).as_bytes())?;
    bundle.emit(
        "fig5.svg",
        curves_svg(&format!("Symmetric tree, theta={theta}"), &sym, fl.p1_bar).as_bytes(),
    )?;

    // Contours over (eta, gamma) and the percentage differences.
    let (ea, ga) = (&params.eta_axis, &params.gamma_axis);
    let mut deltas = vec![];
    for (fig, m) in [("fig6", 4u32), ("fig7", 8)] {
        let s = contour_grid(Metric::P1SymmetricBest, theta, m, ea, ga)?;
        let a = contour_grid(Metric::P1Asymmetric, theta, m, ea, ga)?;
        bundle.emit(&format!("{fig}_symmetric.csv"), &grid_csv(&s))?;
        bundle.emit(
            &format!("{fig}_symmetric.svg"),
            grid_svg(&s, &format!("Best symmetric tree, m'<={m}, theta={theta}"), &[]).as_bytes(),
        )?;
        bundle.emit(&format!("{fig}_asymmetric.csv"), &grid_csv(&a))?;
        bundle.emit(
            &format!("{fig}_asymmetric.svg"),
            grid_svg(&a, &format!("Asymmetric chain, m={m}, theta={theta}"), &[]).as_bytes(),
        )?;
        if m == 4 {
            deltas.push(SweepGrid::delta_from(&a, &s)?);
        }
    }
    deltas.push(contour_grid(Metric::Delta, theta, 32, ea, ga)?);
    for d in &deltas {
        let m = d.m;
        bundle.emit(&format!("fig8_m{m}.csv"), &grid_csv(d))?;
        bundle.emit(
            &format!("fig8_m{m}.svg"),
            grid_svg(d, &format!("Delta (%) asymmetric vs best symmetric, m={m}"), &[0.0]).as_bytes(),
        )?;
    }

    // Two ideal crystals pumped independently.
    let axis = &params.two_crystal_axis;
    let values: Vec<Vec<f64>> = axis
        .iter()
        .map(|&mu1| axis.iter().map(|&mu2| two_crystal_p1(mu1, mu2)).collect())
        .collect();
    let mut csv = String::from("mu1,mu2,p1\n");
    for (i, &mu1) in axis.iter().enumerate() {
        for (j, &mu2) in axis.iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", fmt_f64(mu1), fmt_f64(mu2), fmt_f64(values[i][j])));
        }
    }
    bundle.emit("fig9.csv", csv.as_bytes())?;
    let opt = two_crystal_ideal_opt();
    let (lo, hi) = (axis[0], axis[axis.len() - 1]);
    let map = Heatmap {
        title: "P1 of two ideal crystals".into(),
        x_label: "mu1".into(),
        y_label: "mu2".into(),
        levels: contour_levels(&values, 10, &[]),
        x: axis.clone(),
        y: axis.clone(),
        values,
        overlays: vec![vec![(lo, lo), (hi, hi)]],
        markers: vec![(opt.mu1, opt.mu2)],
    };
    bundle.emit("fig9.svg", map.render().as_bytes())?;

    // Monte Carlo spot check of the asymmetric optimum for each pair.
    let m = params.spot_check_m;
    let mut csv = String::from("eta,gamma,m,pump,p1_exact,p1_hat,stderr\n");
    for (i, &(eta, gamma)) in params.pairs.iter().enumerate() {
        let eff = Efficiencies::new(eta, gamma)?;
        let opt = p1_max(&Scheme::Asymmetric { m }, &eff, theta)?;
        let channels = expand(&Architecture::Asymmetric { m, pump: opt.mu_star }, &eff)?;
        let est = simulate(&channels, &eff, params.trials, params.seed.wrapping_add(i as u64), 8)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(eta),
            fmt_f64(gamma),
            m,
            fmt_f64(opt.mu_star),
            fmt_f64(opt.p1_bar),
            fmt_f64(est.p_hat[1]),
            fmt_f64(est.stderr[1])
        ));
    }
    bundle.emit("mc_check.csv", csv.as_bytes())?;

    let manifest = Manifest {
        generator: format!("photon-mux {}", env!("CARGO_PKG_VERSION")),
        parameters: params.clone(),
        files: bundle.files,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, to_json(&manifest)).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}
