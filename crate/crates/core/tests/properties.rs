use photon_mux_core::analytic::{amhps_pn, general_pn, mhps_pn, poisson_pmf, smhps_pn};
use photon_mux_core::arch::{expand, expand_with_bound, Architecture, Efficiencies, Scheme};
use photon_mux_core::optimize::{evaluate, p1_max};
use photon_mux_core::PhotonDistribution;
use proptest::prelude::*;

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn symmetric_closed_form_matches_general(
        k in 0u32..=6,
        mu in 1e-3f64..2.0,
        eta in 0.0f64..=1.0,
        gamma in 0.1f64..0.99,
        n in 0u64..=6,
    ) {
        let eff = Efficiencies::new(eta, gamma).unwrap();
        let channels = expand_with_bound(&Architecture::Symmetric { k, pump: mu }, &eff, f64::MAX).unwrap();
        let general = general_pn(&channels, &eff, n).unwrap();
        let closed = smhps_pn(k, mu, &eff, n);
        prop_assert!(rel_close(general, closed, 1e-12), "general {general} closed {closed}");
    }

    #[test]
    fn asymmetric_closed_form_matches_general(
        m in 1u32..=6,
        mu in 1e-3f64..2.0,
        eta in 0.0f64..=1.0,
        gamma in 0.1f64..0.99,
        n in 0u64..=6,
    ) {
        let eff = Efficiencies::new(eta, gamma).unwrap();
        let channels = expand_with_bound(&Architecture::Asymmetric { m, pump: mu }, &eff, f64::MAX).unwrap();
        let general = general_pn(&channels, &eff, n).unwrap();
        let closed = amhps_pn(m, mu, &eff, n);
        prop_assert!(rel_close(general, closed, 1e-12), "general {general} closed {closed}");
    }

    #[test]
    fn distributions_normalize_at_default_truncation(
        m in 1u32..=8,
        mu in 1e-3f64..5.0,
        eta in 0.0f64..=1.0,
        gamma in 0.2f64..=1.0,
    ) {
        let eff = Efficiencies::new(eta, gamma).unwrap();
        for scheme in [Scheme::Ideal { m }, Scheme::Asymmetric { m }, Scheme::Symmetric { k: m.min(4) }] {
            // Keep every crystal pump at or below 5 mean pairs.
            let pump = match scheme {
                Scheme::Ideal { .. } => mu,
                Scheme::Asymmetric { m } => mu * eff.transmission(m.saturating_sub(1)),
                Scheme::Symmetric { k } => mu * eff.transmission(k),
                Scheme::FaintLaser => mu,
            };
            let d = PhotonDistribution::from_runs(&scheme.runs(pump, &eff), eta, 40).unwrap();
            prop_assert!(d.tail_mass().abs() < 1e-12, "{scheme:?} tail {}", d.tail_mass());
        }
    }

    #[test]
    fn zero_detection_efficiency_gives_poisson(
        m in 1u32..=8,
        mu in 1e-3f64..2.0,
        gamma in 0.1f64..=1.0,
        n in 0u64..=6,
    ) {
        let eff = Efficiencies::new(0.0, gamma).unwrap();
        let want = poisson_pmf(mu, n);
        for arch in [
            Architecture::Asymmetric { m, pump: mu },
            Architecture::Symmetric { k: m.min(5), pump: mu },
            Architecture::Ideal { m, pump: mu },
        ] {
            let channels = expand_with_bound(&arch, &eff, f64::MAX).unwrap();
            let got = general_pn(&channels, &eff, n).unwrap();
            prop_assert!(rel_close(got, want, 1e-12), "{arch:?}: {got} vs {want}");
        }
    }

    #[test]
    fn multi_photon_mass_matches_complement(
        m in 1u32..=8,
        mu in 0.05f64..3.0,
        eta in 0.0f64..=1.0,
        gamma in 0.2f64..=1.0,
    ) {
        let eff = Efficiencies::new(eta, gamma).unwrap();
        let s = evaluate(&Scheme::Asymmetric { m }, &eff, mu);
        prop_assert!((s.p_multi - (1.0 - s.p0 - s.p1)).abs() < 1e-13);
    }
}

#[test]
fn ideal_general_matches_mhps_up_to_ten_photons() {
    for m in 1..=8u32 {
        for &mu in &[0.01, 0.2, 0.9, 2.5] {
            let channels = expand(&Architecture::Ideal { m, pump: mu }, &Efficiencies::IDEAL).unwrap();
            for n in 0..=10 {
                let g = general_pn(&channels, &Efficiencies::IDEAL, n).unwrap();
                assert!(rel_close(g, mhps_pn(m, mu, n), 1e-13), "{m} {mu} {n}");
            }
        }
    }
}

#[test]
fn snr_is_monotone_for_every_scheme() {
    let mus: Vec<f64> = (0..400).map(|i| 10f64.powf(-4.0 + 5.0 * i as f64 / 399.0)).collect();
    for &eta in &[0.0, 0.3, 0.6, 1.0] {
        for &gamma in &[0.1, 0.5, 0.9, 1.0] {
            let eff = Efficiencies::new(eta, gamma).unwrap();
            for scheme in [
                Scheme::FaintLaser,
                Scheme::Ideal { m: 8 },
                Scheme::Symmetric { k: 3 },
                Scheme::Asymmetric { m: 8 },
            ] {
                let snr: Vec<f64> = mus.iter().map(|&mu| evaluate(&scheme, &eff, mu).snr()).collect();
                for (w, mu) in snr.windows(2).zip(&mus) {
                    assert!(w[1] < w[0], "{scheme:?} eta {eta} gamma {gamma} at mu {mu}");
                }
            }
        }
    }
}

#[test]
fn mhps_index_grows_with_crystal_count() {
    let mut last = 0.0;
    for m in 1..=32 {
        let r = p1_max(&Scheme::Ideal { m }, &Efficiencies::IDEAL, 10.0).unwrap();
        assert!(r.p1_bar >= last - 1e-12, "m = {m}");
        last = r.p1_bar;
    }
}

#[test]
fn symmetric_depth_fifty_approaches_faint_laser() {
    let eff = Efficiencies::new(0.6, 0.7).unwrap();
    for &mu in &[0.05, 0.3, 1.0] {
        let p1 = smhps_pn(50, mu, &eff, 1);
        assert!((p1 - mu * (-mu).exp()).abs() < 1e-6);
    }
}
