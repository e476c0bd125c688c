use dpminimax_core::bounds::{classical_risk_term, private_risk_term, Setting, Side};
use dpminimax_core::*;
use proptest::prelude::*;

fn pure(eps: f64) -> PrivacyBudget {
    PrivacyBudget::pure(eps).unwrap()
}

/// e^{-1} by its alternating series.
fn inv_e_series() -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..30 {
        term *= -1.0 / n as f64;
        sum += term;
    }
    sum
}

#[test]
fn le_cam_examples() {
    for &(eps, delta, d) in &[(0.1, 0.0, 3.0), (2.0, 0.01, 0.2), (1.0, 0.5, 10.0)] {
        let b = le_cam_bound(0.0, d, PrivacyBudget::new(eps, delta).unwrap()).unwrap();
        assert_eq!(b.value, 0.5);
        assert_eq!(b.binding, "statistical");
    }
    assert!((le_cam_bound(1.0, 0.0, pure(3.0)).unwrap().value - 0.45).abs() < 1e-15);
    let v = le_cam_bound(1.0, 1.0, pure(0.1)).unwrap().value;
    assert!((v - 0.45 * inv_e_series()).abs() < 1e-12);
    assert!((v - 0.16554).abs() < 1e-5);
}

#[test]
fn fano_examples() {
    let b = fano_bound(1.0, 1.0, 0.1, 16.0, 1.0).unwrap();
    let first = 0.5 * (1.0 - (1.0 + 2f64.ln()) / 16f64.ln());
    assert!((b.terms["statistical"] - first).abs() < 1e-12);
    assert!((first - 0.19465).abs() < 1e-4);
    assert!((b.terms["privacy"] - 0.4).abs() < 1e-12);
    assert!((b.value - 0.4).abs() < 1e-12);

    // noiseless, free privacy: tends to alpha / 2 as M grows
    let alpha = 0.3;
    let big = fano_bound(alpha, 0.0, 0.0, 1e300, 1.0).unwrap().value;
    assert!((big - alpha / 2.0).abs() < alpha / 2.0 * 2f64.ln() / 1e300f64.ln() + 1e-12);

    for &(eps, d) in &[(0.1, 2.0), (1.0, 0.5), (0.05, 30.0)] {
        let m = (10.0f64 * eps * d).exp();
        let b = fano_bound(0.2, 0.0, d, m, eps).unwrap();
        assert!((b.terms["privacy"] - 0.08).abs() < 1e-12);
    }
}

#[test]
fn assouad_examples() {
    assert!((assouad_bound(7, 0.02, 0.0, pure(1.0)).unwrap().value - 0.45 * 7.0 * 0.02).abs() < 1e-15);
    // delta past the sign change clamps to zero
    let (eps, d) = (0.5, 2.0);
    let delta = 0.09 * (-10.0f64 * eps * d).exp() / d;
    let b = assouad_bound(5, 0.1, d, PrivacyBudget::new(eps, delta * 1.0001).unwrap()).unwrap();
    assert_eq!(b.value, 0.0);

    // hypercube instantiation for k-ary TV: 2.25 alpha e^{-200 n eps alpha / k}
    for &(k, alpha, n, eps) in &[(10usize, 0.1, 50usize, 0.01), (20, 0.05, 100, 0.02)] {
        let kf = k as f64;
        let b = assouad_bound(k / 2, 10.0 * alpha / kf, 20.0 * alpha * n as f64 / kf, pure(eps)).unwrap();
        let expect = 2.25 * alpha * (-200.0 * n as f64 * eps * alpha / kf).exp();
        assert!((b.value - expect).abs() < 1e-14, "{} vs {expect}", b.value);
    }
}

#[test]
fn group_privacy_examples() {
    let b = PrivacyBudget::new(0.5, 0.01).unwrap();
    assert_eq!(group_privacy_factor(b, 0), (1.0, 0.0));
    let (m, a) = group_privacy_factor(b, 3);
    assert!((m - 1.5f64.exp()).abs() < 1e-12);
    assert!((a - 0.03 * 1f64.exp()).abs() < 1e-12);
}

#[test]
fn packing_bound_examples() {
    assert!((packing_bound(2.0, 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
    assert!((packing_bound(10f64.exp(), 10.0).unwrap() - 1.0).abs() < 1e-15);
    // point-mass Fano: the privacy term drops below 0.4 alpha exactly when
    // eps exceeds the packing level ln M / (10 d)
    let (m, d) = (1000.0, 4.0);
    let level = packing_bound(m, d).unwrap() / 10.0;
    let below = fano_bound(1.0, 0.0, d, m, level * 0.99).unwrap().terms["privacy"];
    let above = fano_bound(1.0, 0.0, d, m, level * 1.01).unwrap().terms["privacy"];
    assert!((below - 0.4).abs() < 1e-15);
    assert!(above < 0.4);
}

#[test]
fn table_examples() {
    let rows = sample_complexity_table(
        Problem::KaryTv,
        TableParams {
            k: Some(100),
            d: None,
            alpha: 0.1,
            radius: None,
        },
        pure(1.0),
    )
    .unwrap();
    for r in rows.iter().filter(|r| r.setting == Setting::Pure) {
        assert!((r.value - 11_000.0).abs() < 1e-9);
    }
    assert!(rows.iter().any(|r| r.side == Side::Lower) && rows.iter().any(|r| r.side == Side::Upper));

    let rows = sample_complexity_table(
        Problem::KaryL2,
        TableParams {
            k: Some(100),
            d: None,
            alpha: 0.2,
            radius: None,
        },
        PrivacyBudget::new(1.0, 0.5).unwrap(),
    )
    .unwrap();
    let lower = rows
        .iter()
        .find(|r| r.setting == Setting::Pure && r.side == Side::Lower)
        .unwrap();
    assert!(lower.expression.contains("ln(k a^2)"));
    let approx = rows
        .iter()
        .find(|r| r.setting == Setting::Approx && r.side == Side::Lower)
        .unwrap();
    assert!(approx.expression.contains("eps+delta"));
}

#[test]
fn kary_thresholds_double_with_k() {
    let alpha = 0.01;
    let (beta, gamma, eps) = (10_000.0 * alpha * alpha, 24.0 * alpha, 1.0);
    let t = |k: f64| {
        let log_m = 7.0 * k / 128.0 * 2f64.ln();
        fano_sample_complexity(3.0 * alpha, beta, gamma, log_m, eps, alpha).unwrap()
    };
    for k in [1280.0, 2560.0, 5120.0] {
        let (a, b) = (t(k), t(2.0 * k));
        // doubling is exact up to the constant offsets ln 2 / beta and ln(6/5)/(10 eps gamma)
        let slack_c = 2f64.ln() / beta + 2.0;
        let slack_p = (6.0f64 / 5.0).ln() / (10.0 * eps * gamma) + 2.0;
        assert!(
            (b.n_classical as f64 - 2.0 * a.n_classical as f64).abs() <= slack_c,
            "{a:?} {b:?}"
        );
        assert!(
            (b.n_private as f64 - 2.0 * a.n_private as f64).abs() <= slack_p,
            "{a:?} {b:?}"
        );
    }
}

proptest! {
    #[test]
    fn thresholds_are_strict_crossings(
        log_m in 1.0f64..200.0,
        beta in 0.001f64..1.0,
        gamma in 0.001f64..0.5,
        eps in 0.01f64..5.0,
        tau in 0.001f64..0.1,
    ) {
        let t = fano_sample_complexity(3.0 * tau, beta, gamma, log_m, eps, tau).unwrap();
        if t.n_classical > 0 {
            prop_assert!(classical_risk_term(t.n_classical, beta, log_m, tau) > tau);
        }
        prop_assert!(classical_risk_term(t.n_classical + 1, beta, log_m, tau) <= tau);
        prop_assert!(private_risk_term(t.n_private, gamma, log_m, eps, tau) > tau || t.n_private == 0);
        prop_assert!(private_risk_term(t.n_private + 1, gamma, log_m, eps, tau) <= tau);
        // agrees with the algebraic inversion up to the boundary convention
        let inv = (log_m - (5.0f64 / 6.0).ln()) / (10.0 * eps * gamma);
        prop_assert!((t.n_private as f64 - inv.floor()).abs() <= 1.0);
    }

    #[test]
    fn bounds_are_monotone(
        tv in 0.0f64..1.0,
        d in 0.0f64..5.0,
        dd in 0.0f64..5.0,
        eps in 0.0f64..2.0,
        de in 0.0f64..2.0,
        delta in 0.0f64..0.1,
        ddelta in 0.0f64..0.1,
        k in 1usize..50,
        tau in 0.0f64..0.1,
    ) {
        let b0 = PrivacyBudget::new(eps, delta).unwrap();
        let lc = le_cam_bound(tv, d, b0).unwrap().value;
        let asd = assouad_bound(k, tau, d, b0).unwrap().value;
        prop_assert!((0.0..=0.5).contains(&lc));
        prop_assert!(asd >= 0.0 && asd <= 0.45 * k as f64 * tau + 1e-15);
        for b1 in [
            (d + dd, b0),
            (d, PrivacyBudget::new(eps + de, delta).unwrap()),
            (d, PrivacyBudget::new(eps, delta + ddelta).unwrap()),
        ] {
            prop_assert!(le_cam_bound(tv, b1.0, b1.1).unwrap().value <= lc + 1e-15);
            prop_assert!(assouad_bound(k, tau, b1.0, b1.1).unwrap().value <= asd + 1e-15);
        }
        let f0 = fano_bound(0.3, 0.1, d, 50.0, eps).unwrap().value;
        prop_assert!(fano_bound(0.3, 0.1, d + dd, 50.0, eps).unwrap().value <= f0 + 1e-15);
        prop_assert!(fano_bound(0.3, 0.1, d, 50.0, eps + de).unwrap().value <= f0 + 1e-15);
    }

    #[test]
    fn group_privacy_dominates_iterated_composition(eps in 0.0f64..2.0, delta in 0.0f64..0.1, t in 1u32..12) {
        let (m, a) = group_privacy_factor(PrivacyBudget::new(eps, delta).unwrap(), t);
        // chaining t single steps: delta_t = e^eps delta_{t-1} + delta
        let mut iterated = 0.0;
        for _ in 0..t {
            iterated = eps.exp() * iterated + delta;
        }
        prop_assert!((m - (t as f64 * eps).exp()).abs() <= 1e-12 * m);
        prop_assert!(a >= iterated * (1.0 - 1e-12));
        if eps == 0.0 {
            prop_assert!((a - iterated).abs() <= 1e-15);
        }
    }
}
