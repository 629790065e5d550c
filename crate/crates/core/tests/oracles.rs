use drams_core::channel::{finite_blocklength_rate, q_inverse, sample_rician, shannon_rate};
use drams_core::linkbudget::{build_mode_table, harvested_power, HarvesterParams};
use drams_core::rng::stream;
use drams_core::traffic::{duration_of_busyness, duration_of_idleness, idle_wait_estimate, TrafficProfile};

/// Gaussian tail by composite Simpson integration of the density over
/// `[x, x + 40]`.
fn q_by_quadrature(x: f64) -> f64 {
    let n = 20_000;
    let h = 40.0 / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(x) + pdf(x + 40.0);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(x + k as f64 * h);
    }
    s * h / 3.0
}

fn q_inv_by_bisection(eps: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_by_quadrature(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn fbl_oracle(gamma: f64, m: f64, eps: f64) -> f64 {
    let v = (1.0 - 1.0 / ((1.0 + gamma) * (1.0 + gamma))) * std::f64::consts::LOG2_E.powi(2);
    ((1.0 + gamma).log2() - (v / m).sqrt() * q_inv_by_bisection(eps)).max(0.0)
}

#[test]
fn q_inverse_matches_quadrature() {
    for eps in [1e-1, 1e-2, 1e-4, 1e-6, 1e-9] {
        let a = q_inverse(eps).unwrap();
        let b = q_inv_by_bisection(eps);
        assert!((a - b).abs() < 1e-8, "eps {eps}: {a} vs {b}");
    }
}

#[test]
fn fbl_matches_oracle() {
    for gamma in [0.01, 0.5, 1.0, 10.0, 100.0, 1e4] {
        for m in [10.0, 100.0, 1000.0, 1e6] {
            for eps in [1e-3, 1e-4, 1e-6] {
                let a = finite_blocklength_rate(gamma, m, eps).unwrap();
                let b = fbl_oracle(gamma, m, eps);
                assert!((a - b).abs() < 1e-8, "γ {gamma} M {m} ε {eps}: {a} vs {b}");
            }
        }
    }
    let r = finite_blocklength_rate(10.0, 1000.0, 1e-4).unwrap();
    assert!((r - 3.29046513).abs() < 1e-7);
}

#[test]
fn fbl_approaches_shannon() {
    for gamma in [1.0, 10.0, 100.0] {
        let r = finite_blocklength_rate(gamma, 1e9, 1e-4).unwrap();
        assert!((r - shannon_rate(gamma)).abs() <= 1e-3);
    }
}

#[test]
fn fbl_monotone_on_grid() {
    let gammas: Vec<f64> = (0..50).map(|k| 10f64.powf(-3.0 + 7.0 * k as f64 / 49.0)).collect();
    let blocks: Vec<f64> = (0..50).map(|k| 10f64.powf(1.0 + 8.0 * k as f64 / 49.0)).collect();
    let rate = |g: f64, m: f64| finite_blocklength_rate(g, m, 1e-4).unwrap();
    for &m in &blocks {
        for w in gammas.windows(2) {
            assert!(rate(w[1], m) >= rate(w[0], m));
        }
    }
    for &g in &gammas {
        for w in blocks.windows(2) {
            assert!(rate(g, w[1]) >= rate(g, w[0]));
        }
    }
}

#[test]
fn fbl_rejects_bad_inputs() {
    assert!(finite_blocklength_rate(-1.0, 100.0, 1e-4).is_err());
    assert!(finite_blocklength_rate(1.0, 0.5, 1e-4).is_err());
    assert!(finite_blocklength_rate(1.0, 100.0, 0.0).is_err());
    assert!(finite_blocklength_rate(1.0, 100.0, 1.0).is_err());
    assert_eq!(finite_blocklength_rate(1e-6, 10.0, 1e-4).unwrap(), 0.0);
}

#[test]
fn reference_mode_thresholds() {
    let expected = [9.8554, 12.8657, 14.6266, 15.8760, 16.8451, 17.6369, 18.3063, 18.8863];
    let got = build_mode_table(1e-6).unwrap().thresholds_db();
    assert_eq!(got.len(), expected.len());
    for (g, e) in got.iter().zip(expected) {
        assert!((g - e).abs() <= 1e-4, "{g} vs {e}");
    }
}

#[test]
fn mode_intervals_tile_the_line() {
    let table = build_mode_table(1e-6).unwrap();
    let modes = table.modes();
    assert_eq!(modes[0].snr_lower_db, f64::NEG_INFINITY);
    assert_eq!(modes.last().unwrap().snr_upper_db, f64::INFINITY);
    for w in modes.windows(2) {
        assert_eq!(w[0].snr_upper_db, w[1].snr_lower_db);
        assert_eq!(w[1].bits, w[0].bits + 1);
    }
    for k in 0..=4000 {
        let snr = -10.0 + k as f64 * 0.01;
        let m = table.select(snr);
        assert!(m.snr_lower_db <= snr && snr < m.snr_upper_db);
    }
}

#[test]
fn traffic_estimates() {
    let p = TrafficProfile::new(0.004, 0.004, 1e-4).unwrap();
    let m = p.transition_matrix();
    assert!((m.p01 - 0.024690087971667).abs() < 1e-12);
    assert!((m.p00 + m.p01 - 1.0).abs() < 1e-15);
    let expected = 40.0 * (1.0f64 / 0.9).ln();
    assert!((duration_of_idleness(&p, 0.1).unwrap() - expected).abs() < 1e-9);
    assert!((duration_of_busyness(&p, 0.1).unwrap() - expected).abs() < 1e-9);
    assert!((duration_of_idleness(&p, 0.1).unwrap() - 4.214420626313).abs() < 1e-9);
    assert!((idle_wait_estimate(&p, 0.01).unwrap() - 37.1526709362).abs() < 1e-8);
}

#[test]
fn harvester_shape() {
    let h = HarvesterParams::new(0.024, 150.0, 0.014).unwrap();
    assert_eq!(harvested_power(&h, 0.0), 0.0);
    assert!((harvested_power(&h, 0.014) * 1e3 - 10.5305).abs() < 1e-3);
    let mut prev = 0.0;
    for k in 1..=2000 {
        let p = harvested_power(&h, k as f64 * 1e-4);
        assert!(p >= prev && p < 0.024);
        prev = p;
    }
    assert!(0.024 - harvested_power(&h, 1.0) < 1e-9);
}

#[test]
fn rician_unit_power() {
    let mut rng = stream(11, &[1]);
    let n = 200_000;
    let ms: f64 = (0..n).map(|_| sample_rician(10.0, &mut rng).norm_sqr()).sum::<f64>() / n as f64;
    assert!((ms - 1.0).abs() < 0.01, "{ms}");
}

#[test]
fn rayleigh_envelope_ks() {
    let mut rng = stream(12, &[1]);
    let n = 20_000;
    let mut r: Vec<f64> = (0..n).map(|_| sample_rician(f64::NEG_INFINITY, &mut rng).norm()).collect();
    r.sort_by(f64::total_cmp);
    let d = r
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x * x).exp();
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 1.63 / (n as f64).sqrt(), "KS statistic {d}");
}
