//! Acceptance criteria, each reported on its own PASS/FAIL line.
//!
//! Run with `cargo test -p photon-mux-cli --test acceptance -- --nocapture`
//! to see the report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use photon_mux_cli::commands::cmd_reproduce;
use photon_mux_cli::reproduce::sha256_hex;
use photon_mux_cli::validate::{run_cases, standard_grid};
use photon_mux_cli::{Flags, RunConfig, Settings};
use photon_mux_core::analytic::{amhps_pn, fl_snr, general_pn, poisson_pmf, smhps_gain, smhps_pn};
use photon_mux_core::arch::{expand, Architecture, ChannelSpec, Efficiencies, Scheme};
use photon_mux_core::optimize::{delta_percent, p1_max, two_crystal_ideal_opt, two_crystal_p1};
use photon_mux_core::sweep::{contour_grid, linspace, Metric};
use photon_mux_core::PhotonDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn fl_index() -> f64 {
    p1_max(&Scheme::FaintLaser, &Efficiencies::IDEAL, 10.0).unwrap().p1_bar
}

fn faint_laser_anchor() -> Outcome {
    let start = Instant::now();
    let r = p1_max(&Scheme::FaintLaser, &Efficiencies::IDEAL, 10.0).map_err(|e| e.to_string())?;
    within_time(start.elapsed(), Duration::from_secs(1))?;
    check((r.p1_bar - 0.155).abs() <= 0.002, format!("P1 bar = {}", r.p1_bar))?;
    Ok(format!("P1 bar = {:.6} at mu* = {:.6} in {:?}", r.p1_bar, r.mu_star, start.elapsed()))
}

fn single_pulse_anchors() -> Outcome {
    let arch = Architecture::FaintLaser { pump: 1.0 };
    let runs = arch.runs(&Efficiencies::IDEAL).map_err(|e| e.to_string())?;
    let d = PhotonDistribution::from_runs(&runs, 1.0, 40).map_err(|e| e.to_string())?;
    let e = std::f64::consts::E;
    check((d.p1 - (-1f64).exp()).abs() <= 1e-9, format!("P1 = {}", d.p1))?;
    check((d.snr - 1.0 / (e - 2.0)).abs() <= 1e-9, format!("SNR = {}", d.snr))?;
    Ok(format!("P1 = {:.12}, SNR = {:.12}", d.p1, d.snr))
}

fn two_crystal_optimum() -> Outcome {
    let start = Instant::now();
    let opt = two_crystal_ideal_opt();
    let elapsed = start.elapsed();
    within_time(elapsed, Duration::from_secs(1))?;
    let want = (1.0 - (-1f64).exp(), 1.0);
    let want_p1 = ((-1f64).exp() - 1.0).exp();
    check(
        (opt.mu1 - want.0).abs() <= 1e-6 && (opt.mu2 - want.1).abs() <= 1e-6,
        format!("optimum at ({}, {})", opt.mu1, opt.mu2),
    )?;
    check((opt.p1 - want_p1).abs() <= 1e-9, format!("P1 = {}", opt.p1))?;

    // Independent oracle: exhaustive grid with step 1e-3 over [0, 3]^2.
    let (mut best, mut at) = (f64::MIN, (0.0, 0.0));
    for i in 0..=3000 {
        let mu1 = i as f64 * 1e-3;
        for j in 0..=3000 {
            let mu2 = j as f64 * 1e-3;
            let p = two_crystal_p1(mu1, mu2);
            if p > best {
                best = p;
                at = (mu1, mu2);
            }
        }
    }
    check(
        (at.0 - opt.mu1).abs() <= 1e-3 && (at.1 - opt.mu2).abs() <= 1e-3,
        format!("grid maximum at {at:?}"),
    )?;
    check(best <= opt.p1 + 1e-12 && opt.p1 - best < 1e-5, format!("grid maximum {best}"))?;
    Ok(format!(
        "(mu1, mu2) = ({:.9}, {:.9}), P1 = {:.12}; grid oracle {at:?} P1 {best:.9}; {elapsed:?}",
        opt.mu1, opt.mu2, opt.p1
    ))
}

fn specialization_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut comparisons = 0;
    for point in 0..1000 {
        let mu = rng.random_range(1e-3..2.0);
        let eta = rng.random_range(0.0..=1.0);
        let gamma = rng.random_range(0.2..=1.0);
        let eff = Efficiencies::new(eta, gamma).unwrap();
        let (arch, closed): (Architecture, Box<dyn Fn(u64) -> f64>) = if point % 2 == 0 {
            let k = rng.random_range(0..=6u32);
            (Architecture::Symmetric { k, pump: mu }, Box::new(move |n| smhps_pn(k, mu, &eff, n)))
        } else {
            let m = rng.random_range(1..=8u32);
            (Architecture::Asymmetric { m, pump: mu }, Box::new(move |n| amhps_pn(m, mu, &eff, n)))
        };
        let channels = expand(&arch, &eff).map_err(|e| e.to_string())?;
        for n in 0..=6 {
            let general = general_pn(&channels, &eff, n).map_err(|e| e.to_string())?;
            let d = rel_diff(general, closed(n));
            worst = worst.max(d);
            comparisons += 1;
            check(d <= 1e-12, format!("{arch:?} eta {eta} gamma {gamma} n {n}: rel diff {d:e}"))?;
        }
    }
    within_time(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "1000 points, {comparisons} comparisons, worst relative difference {worst:.2e}, {:?}",
        start.elapsed()
    ))
}

fn monte_carlo_agreement() -> Outcome {
    let start = Instant::now();
    let cases = standard_grid();
    check(cases.len() >= 48, format!("only {} cases", cases.len()))?;
    let reports = run_cases(&cases, 1_000_000, 1, 1e6).map_err(|e| e.to_string())?;
    let failed: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
    let worst_n = reports.iter().map(|r| r.pn_score).fold(0.0, f64::max);
    let worst_chi = reports.iter().map(|r| r.chi_score).fold(0.0, f64::max);
    check(
        failed.is_empty(),
        format!(
            "{} failing cases, first: {:?} eta {} gamma {}",
            failed.len(),
            failed.first().map(|r| &r.architecture),
            failed.first().map_or(0.0, |r| r.eta),
            failed.first().map_or(0.0, |r| r.gamma)
        ),
    )?;
    within_time(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "{} cases x 1e6 trials; worst n-score {worst_n:.3}, worst chi-score {worst_chi:.3} (pass <= 1); {:?}",
        reports.len(),
        start.elapsed()
    ))
}

fn limit_suite() -> Outcome {
    // (a) Lossless routers: chain and tree coincide for m = 2^k.
    let mut worst_a = 0.0f64;
    for k in 0..=6u32 {
        for &mu in &[0.01, 0.1, 0.5, 1.0, 3.0] {
            for &eta in &[0.0, 0.3, 0.7, 1.0] {
                let eff = Efficiencies::new(eta, 1.0).unwrap();
                for n in 0..=6 {
                    let d = (amhps_pn(1 << k, mu, &eff, n) - smhps_pn(k, mu, &eff, n)).abs();
                    worst_a = worst_a.max(d);
                }
            }
        }
    }
    check(worst_a <= 1e-12, format!("(a) worst difference {worst_a:e}"))?;

    // (b) Blind detectors: channel 1 is always routed.
    let mut worst_b = 0.0f64;
    for &gamma in &[0.2, 0.5, 0.9, 1.0] {
        let eff = Efficiencies::new(0.0, gamma).unwrap();
        for &mu in &[0.01, 0.3, 1.0, 2.5] {
            let archs = [
                Architecture::FaintLaser { pump: mu },
                Architecture::Ideal { m: 5, pump: mu },
                Architecture::Symmetric { k: 3, pump: mu },
                Architecture::Asymmetric { m: 7, pump: mu },
            ];
            for arch in archs {
                let runs = arch.runs(&eff).map_err(|e| e.to_string())?;
                let d = PhotonDistribution::from_runs(&runs, 0.0, 6).map_err(|e| e.to_string())?;
                for n in 0..=6 {
                    worst_b = worst_b.max((d.probs[n] - poisson_pmf(mu, n as u64)).abs());
                }
            }
            let general = vec![
                ChannelSpec { mu, k: 0 },
                ChannelSpec { mu: 0.7, k: 2 },
                ChannelSpec { mu: 1.9, k: 3 },
            ];
            let eff_general = Efficiencies::new(0.0, 1.0).unwrap();
            for n in 0..=6 {
                let p = general_pn(&general, &eff_general, n).map_err(|e| e.to_string())?;
                worst_b = worst_b.max((p - poisson_pmf(mu, n)).abs());
            }
        }
    }
    check(worst_b <= 1e-12, format!("(b) worst difference {worst_b:e}"))?;

    // (c) Deep symmetric tree: the faint laser is recovered.
    let (mut worst_snr, mut worst_p1) = (0.0f64, 0.0f64);
    for &eta in &[0.2, 0.6, 1.0] {
        let eff = Efficiencies::new(eta, 0.7).unwrap();
        let runs_of = |mu| Architecture::Symmetric { k: 50, pump: mu }.runs(&eff);
        for &mu in &[0.05, 0.2, 0.5, 1.0, 2.0] {
            let d = PhotonDistribution::from_runs(&runs_of(mu).map_err(|e| e.to_string())?, eta, 6)
                .map_err(|e| e.to_string())?;
            worst_snr = worst_snr.max(rel_diff(d.snr, fl_snr(mu)));
            worst_p1 = worst_p1.max((d.p1 - mu * (-mu).exp()).abs());
        }
    }
    check(worst_snr <= 1e-6, format!("(c) SNR relative difference {worst_snr:e}"))?;
    check(worst_p1 <= 1e-6, format!("(c) P1 difference {worst_p1:e}"))?;
    Ok(format!(
        "(a) {worst_a:.1e}  (b) {worst_b:.1e}  (c) SNR rel {worst_snr:.1e}, P1 {worst_p1:.1e}"
    ))
}

fn gain_limit() -> Outcome {
    let g = |gamma, k| smhps_gain(k, 1.0, &Efficiencies::new(0.8, gamma).unwrap());
    let (a, b, c) = (g(0.4, 60), g(0.5, 60), g(0.6, 40));
    check((a - 1.0).abs() <= 1e-3, format!("gain(0.4, 60) = {a}"))?;
    check(b > 1.0, format!("gain(0.5, 60) = {b}"))?;
    check(c > 10.0, format!("gain(0.6, 40) = {c}"))?;
    Ok(format!("gamma 0.4: {a:.6}, gamma 0.5: {b:.6}, gamma 0.6 (k=40): {c:.4e}"))
}

fn ordering_properties() -> Outcome {
    let start = Instant::now();
    let axis = linspace(0.01, 1.0, 21);
    let fl = fl_index();
    let mut asym = vec![];
    let mut worst = f64::MAX;
    for m in [4u32, 8, 32] {
        let a = contour_grid(Metric::P1Asymmetric, 10.0, m, &axis, &axis).map_err(|e| e.to_string())?;
        let s = contour_grid(Metric::P1SymmetricBest, 10.0, m, &axis, &axis).map_err(|e| e.to_string())?;
        for v in a.values().chain(s.values()) {
            worst = worst.min(v - fl);
        }
        asym.push(a);
    }
    check(worst >= -1e-9, format!("a value falls {:e} below the faint laser", -worst))?;
    let mut smallest_step = f64::MAX;
    for pair in asym.windows(2) {
        for (lo, hi) in pair[0].values().zip(pair[1].values()) {
            smallest_step = smallest_step.min(hi - lo);
        }
    }
    check(smallest_step >= -1e-12, format!("chain index drops by {:e} with more crystals", -smallest_step))?;
    Ok(format!(
        "21x21 grid, m in {{4, 8, 32}}: min margin over FL {worst:.3e}, min step in m {smallest_step:.3e}; {:?}",
        start.elapsed()
    ))
}

fn read_csv(path: &Path) -> Result<Vec<BTreeMap<String, f64>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty csv")?.split(',').collect();
    lines
        .map(|line| {
            header
                .iter()
                .zip(line.split(','))
                .map(|(h, v)| {
                    v.parse::<f64>()
                        .map(|x| (h.to_string(), x))
                        .map_err(|e| format!("{}: `{v}`: {e}", path.display()))
                })
                .collect()
        })
        .collect()
}

fn run_reproduce(dir: &Path) -> Result<(), String> {
    let flags = Flags {
        out: Some(dir.to_path_buf()),
        ..Flags::default()
    };
    let settings = Settings::merge(RunConfig::default(), &flags).map_err(|e| e.to_string())?;
    cmd_reproduce(&settings, &mut std::io::sink()).map_err(|e| e.to_string())?;
    Ok(())
}

/// Delta interpolated bilinearly at (eta, gamma), with the four surrounding cells.
fn delta_near(rows: &[BTreeMap<String, f64>], eta: f64, gamma: f64) -> Result<(f64, Vec<f64>), String> {
    let mut etas: Vec<f64> = rows.iter().map(|r| r["eta"]).collect();
    let mut gammas: Vec<f64> = rows.iter().map(|r| r["gamma"]).collect();
    etas.sort_by(f64::total_cmp);
    etas.dedup();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let i = etas.iter().rposition(|&e| e <= eta).ok_or("eta outside grid")?;
    let j = gammas.iter().rposition(|&g| g <= gamma).ok_or("gamma outside grid")?;
    let value = |e: f64, g: f64| {
        rows.iter()
            .find(|r| r["eta"] == e && r["gamma"] == g)
            .map(|r| r["value"])
            .ok_or("missing cell")
    };
    let (e0, e1, g0, g1) = (etas[i], etas[i + 1], gammas[j], gammas[j + 1]);
    let corners = vec![value(e0, g0)?, value(e1, g0)?, value(e0, g1)?, value(e1, g1)?];
    let (te, tg) = ((eta - e0) / (e1 - e0), (gamma - g0) / (g1 - g0));
    let interp = corners[0] * (1.0 - te) * (1.0 - tg)
        + corners[1] * te * (1.0 - tg)
        + corners[2] * (1.0 - te) * tg
        + corners[3] * te * tg;
    Ok((interp, corners))
}

fn figure_reproduction(dir: &Path) -> Outcome {
    let start = Instant::now();
    run_reproduce(dir)?;
    let elapsed = start.elapsed();
    for name in [
        "fig2.csv", "fig4.csv", "fig5.csv", "fig6_symmetric.csv", "fig6_asymmetric.csv",
        "fig7_symmetric.csv", "fig7_asymmetric.csv", "fig8_m4.csv", "fig8_m32.csv", "fig9.csv",
        "fig2.svg", "fig4.svg", "fig5.svg", "fig6_symmetric.svg", "fig6_asymmetric.svg",
        "fig7_symmetric.svg", "fig7_asymmetric.svg", "fig8_m4.svg", "fig8_m32.svg", "fig9.svg",
        "manifest.json",
    ] {
        let meta = fs::metadata(dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
        check(meta.len() > 0, format!("{name} is empty"))?;
    }

    let fig2 = read_csv(&dir.join("fig2.csv"))?;
    let thetas: Vec<f64> = fig2.iter().map(|r| r["theta"]).collect();
    check(thetas[0] <= 1.0 && *thetas.last().unwrap() >= 100.0, "fig2 does not span [1, 100]")?;
    for r in &fig2 {
        check(
            r["mhps_m16"] > r["mhps_m8"] && r["mhps_m8"] > r["mhps_m4"] && r["mhps_m4"] > r["fl"],
            format!("fig2 ordering broken at theta {}", r["theta"]),
        )?;
    }

    let fl = fl_index();
    let fig5 = read_csv(&dir.join("fig5.csv"))?;
    let mut curves: BTreeMap<(u64, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for r in &fig5 {
        curves
            .entry((r["eta"].to_bits(), r["gamma"].to_bits()))
            .or_default()
            .push((r["m"], r["p1"]));
    }
    let mut lossy = 0;
    for ((_, g), curve) in &curves {
        if f64::from_bits(*g) >= 1.0 {
            continue;
        }
        lossy += 1;
        let peak = curve.iter().map(|p| p.1).fold(f64::MIN, f64::max);
        let top = curve.iter().position(|p| p.1 == peak).unwrap();
        let last = curve.last().unwrap().1;
        check(top + 1 < curve.len() && last < peak, "fig5 lossy curve does not turn down")?;
        check(
            curve[top..].windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12),
            "fig5 lossy curve rises again after its peak",
        )?;
        check(last >= fl - 1e-9 && last - fl < peak - fl, "fig5 tail does not approach the faint laser")?;
    }
    check(lossy > 0, "fig5 has no curve with gamma < 1")?;

    let mut deltas = vec![];
    for name in ["fig8_m4.csv", "fig8_m32.csv"] {
        let rows = read_csv(&dir.join(name))?;
        let (interp, corners) = delta_near(&rows, 0.62, 0.5)?;
        check(
            interp > 0.0 && corners.iter().all(|&c| c > 0.0),
            format!("{name}: delta near (0.62, 0.5) = {interp}, corners {corners:?}"),
        )?;
        deltas.push(interp);
    }
    let direct = delta_percent(&Efficiencies::new(0.62, 0.5).unwrap(), 10.0, 32).map_err(|e| e.to_string())?;
    check(direct > 0.0, format!("direct delta(0.62, 0.5, m=32) = {direct}"))?;

    Ok(format!(
        "fig2 ordered on {} thetas; {lossy} lossy fig5 curves fall toward FL {fl:.4}; delta(0.62, 0.5) = {:.3}% (m=4), {:.3}% (m=32), direct {direct:.3}%; {elapsed:?}",
        fig2.len(),
        deltas[0],
        deltas[1]
    ))
}

fn bundle_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        let bytes = fs::read(entry.path()).map_err(|e| e.to_string())?;
        files.insert(entry.file_name().to_string_lossy().into_owned(), bytes);
    }
    Ok(files)
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    run_reproduce(second)?;
    let (a, b) = (bundle_files(first)?, bundle_files(second)?);
    check(
        a.keys().eq(b.keys()),
        format!("file sets differ: {:?} vs {:?}", a.keys(), b.keys()),
    )?;
    for (name, bytes) in &a {
        check(*bytes == b[name], format!("{name} differs between runs"))?;
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&a["manifest.json"]).map_err(|e| e.to_string())?;
    let listed = manifest["files"].as_array().ok_or("manifest has no file list")?;
    check(listed.len() + 1 == a.len(), "manifest does not list every file")?;
    for f in listed {
        let name = f["name"].as_str().ok_or("unnamed manifest entry")?;
        let bytes = a.get(name).ok_or(format!("{name} listed but missing"))?;
        check(f["sha256"].as_str() == Some(sha256_hex(bytes).as_str()), format!("{name}: checksum mismatch"))?;
    }
    Ok(format!("{} files byte-identical across two runs; manifest checksums verified", a.len()))
}

#[test]
fn acceptance_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let (first, second) = (tmp.path().join("run1"), tmp.path().join("run2"));

    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "faint-laser anchor", faint_laser_anchor()),
        (2, "single-pulse anchors", single_pulse_anchors()),
        (3, "two-crystal optimum", two_crystal_optimum()),
        (4, "specialization equivalence", specialization_equivalence()),
        (5, "Monte Carlo agreement", monte_carlo_agreement()),
        (6, "limit suite", limit_suite()),
        (7, "gain limit", gain_limit()),
        (8, "ordering properties", ordering_properties()),
        (9, "figure reproduction", figure_reproduction(&first)),
    ];
    let reproduced = matches!(results.last(), Some((_, _, Ok(_))));
    results.push((
        10,
        "determinism",
        if reproduced {
            determinism(&first, &second)
        } else {
            Err("first reproduce run failed".into())
        },
    ));

    let mut failures = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail}");
            }
        }
    }
    assert_eq!(failures, 0, "{failures} acceptance criteria failed");
}
