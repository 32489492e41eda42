//! Scalability curves and (eta, gamma) grids of the performance index.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::{Efficiencies, Scheme};
use crate::error::{Error, Result};
use crate::optimize::{best_symmetric, delta_parts, p1_max, OptResult};

/// Largest grid `contour_grid` accepts.
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// Crystal counts `2..=256`.
pub fn default_m_values() -> Vec<u32> {
    (2..=256).collect()
}

/// 101 uniform points over `[0.01, 1]`.
pub fn default_axis() -> Vec<f64> {
    linspace(0.01, 1.0, 101)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Scheme family swept over its crystal count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Ideal,
    Symmetric,
    Asymmetric,
}

impl SchemeKind {
    pub fn scheme(&self, m: u32) -> Result<Scheme> {
        match self {
            SchemeKind::Ideal => Ok(Scheme::Ideal { m }),
            SchemeKind::Asymmetric => Ok(Scheme::Asymmetric { m }),
            SchemeKind::Symmetric if m.is_power_of_two() => Ok(Scheme::Symmetric {
                k: m.trailing_zeros(),
            }),
            SchemeKind::Symmetric => Err(Error::InvalidArgument(format!(
                "symmetric scheme needs a power-of-two crystal count, got {m}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m: u32,
    pub p1: f64,
    pub mu_star: f64,
    pub snr: f64,
}

/// Performance index at each crystal count in `m_values` (ascending).
pub fn scalability_curve(
    kind: SchemeKind,
    theta: f64,
    eff: &Efficiencies,
    m_values: &[u32],
) -> Result<Vec<CurvePoint>> {
    if m_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("m values must be strictly ascending".into()));
    }
    let schemes = m_values
        .iter()
        .map(|&m| kind.scheme(m))
        .collect::<Result<Vec<_>>>()?;
    schemes
        .par_iter()
        .zip(m_values.par_iter())
        .map(|(scheme, &m)| {
            p1_max(scheme, eff, theta).map(|r| CurvePoint {
                m,
                p1: r.p1_bar,
                mu_star: r.mu_star,
                snr: r.snr_at_opt,
            })
        })
        .collect()
}

/// Quantity evaluated at every grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Best symmetric tree with at most `m` crystals.
    P1SymmetricBest,
    /// Asymmetric chain of `m` crystals.
    P1Asymmetric,
    /// Percentage gain of the asymmetric chain over the best symmetric tree.
    Delta,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::P1SymmetricBest => "p1_symmetric_best",
            Metric::P1Asymmetric => "p1_asymmetric",
            Metric::Delta => "delta",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p1_symmetric_best" => Ok(Metric::P1SymmetricBest),
            "p1_asymmetric" => Ok(Metric::P1Asymmetric),
            "delta" => Ok(Metric::Delta),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

/// One evaluated cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub value: f64,
    /// Crystals used by the symmetric optimum, or `m` for the asymmetric chain.
    pub chosen_m: u64,
    /// Optimal pump of the asymmetric chain for `p1_asymmetric` and `delta`,
    /// of the chosen symmetric tree otherwise.
    pub mu_star: f64,
}

/// Metric values over an (eta, gamma) grid; `cells[i][j]` sits at
/// `(eta_axis[i], gamma_axis[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub metric: Metric,
    pub theta: f64,
    pub m: u32,
    pub eta_axis: Vec<f64>,
    pub gamma_axis: Vec<f64>,
    pub cells: Vec<Vec<Cell>>,
}

impl SweepGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.cells[i][j].value
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().flatten().map(|c| c.value)
    }

    /// Delta grid from already evaluated `p1_asymmetric` and `p1_symmetric_best`
    /// grids on the same axes; equals `contour_grid(Metric::Delta, ..)`.
    pub fn delta_from(asym: &SweepGrid, sym: &SweepGrid) -> Result<SweepGrid> {
        if asym.metric != Metric::P1Asymmetric || sym.metric != Metric::P1SymmetricBest {
            return Err(Error::InvalidArgument("delta needs an asymmetric and a symmetric grid".into()));
        }
        if asym.m != sym.m
            || asym.theta != sym.theta
            || asym.eta_axis != sym.eta_axis
            || asym.gamma_axis != sym.gamma_axis
        {
            return Err(Error::InvalidArgument("grids differ in m, theta or axes".into()));
        }
        let cells = asym
            .cells
            .iter()
            .zip(&sym.cells)
            .map(|(ra, rs)| {
                ra.iter()
                    .zip(rs)
                    .map(|(a, s)| Cell {
                        value: 100.0 * (a.value - s.value) / s.value,
                        chosen_m: s.chosen_m,
                        mu_star: a.mu_star,
                    })
                    .collect()
            })
            .collect();
        Ok(SweepGrid {
            metric: Metric::Delta,
            cells,
            ..asym.clone()
        })
    }

    /// CSV with header `eta,gamma,value,chosen_m,mu_star`, eta-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "eta,gamma,value,chosen_m,mu_star")?;
        for (i, &eta) in self.eta_axis.iter().enumerate() {
            for (j, &gamma) in self.gamma_axis.iter().enumerate() {
                let c = &self.cells[i][j];
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_f64(eta),
                    fmt_f64(gamma),
                    fmt_f64(c.value),
                    c.chosen_m,
                    fmt_f64(c.mu_star)
                )?;
            }
        }
        Ok(())
    }
}

/// Curve CSV with header `m,p1,mu_star,snr`.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], mut out: W) -> io::Result<()> {
    writeln!(out, "m,p1,mu_star,snr")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.m, fmt_f64(p.p1), fmt_f64(p.mu_star), fmt_f64(p.snr))?;
    }
    Ok(())
}

/// 17 significant digits; `inf` / `-inf` / `nan` spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} axis is empty")));
    }
    if let Some(v) = axis.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::InvalidArgument(format!("{name} axis value {v} outside (0, 1]")));
    }
    Ok(())
}

/// Evaluates `metric` at one (eta, gamma) point.
pub fn evaluate_cell(metric: Metric, theta: f64, m: u32, eff: &Efficiencies) -> Result<Cell> {
    let from = |r: &OptResult| Cell {
        value: r.p1_bar,
        chosen_m: r.chosen_m,
        mu_star: r.mu_star,
    };
    match metric {
        Metric::P1SymmetricBest => best_symmetric(m, eff, theta).map(|r| from(&r)),
        Metric::P1Asymmetric => p1_max(&Scheme::Asymmetric { m }, eff, theta).map(|r| from(&r)),
        Metric::Delta => {
            let (asym, sym) = delta_parts(eff, theta, m)?;
            Ok(Cell {
                value: 100.0 * (asym.p1_bar - sym.p1_bar) / sym.p1_bar,
                chosen_m: sym.chosen_m,
                mu_star: asym.mu_star,
            })
        }
    }
}

/// Evaluates `metric` on every (eta, gamma) pair of the axes.
pub fn contour_grid(
    metric: Metric,
    theta: f64,
    m: u32,
    eta_axis: &[f64],
    gamma_axis: &[f64],
) -> Result<SweepGrid> {
    check_axis("eta", eta_axis)?;
    check_axis("gamma", gamma_axis)?;
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let points = eta_axis.len().saturating_mul(gamma_axis.len());
    if points > MAX_GRID_POINTS {
        return Err(Error::InvalidArgument(format!("grid of {points} points is too large")));
    }
    let flat: Vec<Cell> = (0..points)
        .into_par_iter()
        .map(|idx| {
            let eff = Efficiencies::new(eta_axis[idx / gamma_axis.len()], gamma_axis[idx % gamma_axis.len()])?;
            evaluate_cell(metric, theta, m, &eff)
        })
        .collect::<Result<_>>()?;
    let cells = flat.chunks(gamma_axis.len()).map(<[Cell]>::to_vec).collect();
    Ok(SweepGrid {
        metric,
        theta,
        m,
        eta_axis: eta_axis.to_vec(),
        gamma_axis: gamma_axis.to_vec(),
        cells,
    })
}
