//! Simulator checks against independent oracles and statistical properties.

use std::f64::consts::PI;

use chanpred::sim::{
    add_noise, compute_cfr, init_scene, noise_stream, path_geometry, received_clean,
    run_simulation, Multipath, ScenarioConfig,
};
use chanpred::stats::{band_power_series, normalized_covariance};
use chanpred::Complex64;

fn noiseless() -> ScenarioConfig {
    ScenarioConfig { snr_db: None, ..Default::default() }
}

fn unit_path() -> Multipath {
    Multipath { length_l: 1.0, delay_tau: 0.0, phase_phi: 0.0, amplitude_a: 1.0, doppler_d: 0.0 }
}

fn direct_dft(x: &[Complex64], index: usize) -> Complex64 {
    let k_len = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(k, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (index * k) as f64 / k_len))
        .sum()
}

#[test]
fn cfr_matches_direct_dft_over_centered_band() {
    let cfg = noiseless();
    let scene = init_scene(&cfg).unwrap();
    let samples = received_clean(&path_geometry(&scene, &cfg).unwrap(), &cfg).unwrap();
    let cfr = compute_cfr(&samples, &cfg).unwrap();
    assert_eq!(cfr.values.len(), 128);
    let k_len = samples.len();
    for (j, h) in cfr.values.iter().enumerate() {
        let index = (k_len + j - 64) % k_len;
        let want = direct_dft(&samples, index);
        assert!((h - want).norm() <= 1e-9 * want.norm().max(1.0), "bin {j}");
    }
}

#[test]
fn single_zero_delay_path_has_flat_real_response() {
    // The window starts at the pulse peak, so the DFT sees a one-sided sinc:
    // its real part is half the flat two-sided response plus half the peak.
    let cfg = noiseless();
    let samples = received_clean(&[unit_path()], &cfg).unwrap();
    let cfr = compute_cfr(&samples, &cfg).unwrap();
    let level = (cfg.f_s / cfg.bandwidth_b + 1.0) / 2.0;
    for (j, h) in cfr.values.iter().enumerate().skip(1) {
        assert!((h.re - level).abs() < 0.05 * level, "bin {j}: {}", h.re);
    }
}

#[test]
fn parseval_holds_over_full_spectrum() {
    // With B = f_s every DFT bin is retained.
    let cfg = ScenarioConfig { bandwidth_b: 51.2e6, ..noiseless() };
    let scene = init_scene(&cfg).unwrap();
    let samples = received_clean(&path_geometry(&scene, &cfg).unwrap(), &cfg).unwrap();
    let cfr = compute_cfr(&samples, &cfg).unwrap();
    assert_eq!(cfr.values.len(), samples.len());
    let time: f64 = samples.iter().map(|s| s.norm_sqr()).sum();
    let freq: f64 = cfr.values.iter().map(|h| h.norm_sqr()).sum::<f64>() / samples.len() as f64;
    assert!((time - freq).abs() / time < 1e-10);
}

#[test]
fn noise_power_matches_configured_snr() {
    let cfg = noiseless();
    let scene = init_scene(&cfg).unwrap();
    let clean = received_clean(&path_geometry(&scene, &cfg).unwrap(), &cfg).unwrap();
    let signal: f64 = clean.iter().map(|s| s.norm_sqr()).sum::<f64>() / clean.len() as f64;
    let mut rng = noise_stream(9);
    let mut noise = 0.0;
    let windows = 10_000;
    for _ in 0..windows {
        let mut noisy = clean.clone();
        add_noise(&mut noisy, 12.0, &mut rng);
        noise += noisy.iter().zip(&clean).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
    }
    noise /= (windows * clean.len()) as f64;
    let snr = 10.0 * (signal / noise).log10();
    assert!((snr - 12.0).abs() < 0.5, "measured {snr} dB");
}

#[test]
fn runs_are_deterministic_per_seed() {
    let cfg = ScenarioConfig { seed: 4, ..Default::default() };
    let a = run_simulation(&cfg, 8).unwrap();
    let b = run_simulation(&cfg, 8).unwrap();
    assert_eq!(a, b);
    let c = run_simulation(&ScenarioConfig { seed: 5, ..cfg }, 8).unwrap();
    assert_ne!(a.snapshots, c.snapshots);
}

#[test]
fn static_scene_is_stationary() {
    let cfg = ScenarioConfig { n_m: 0, mu_rx: 0.0, sigma2_rx: 0.0, ..noiseless() };
    let series = run_simulation(&cfg, 6).unwrap();
    for s in &series.snapshots[1..] {
        assert_eq!(s.values, series.snapshots[0].values);
    }
    let power = band_power_series(&series);
    assert!(power.iter().all(|&p| p == power[0]));
}

#[test]
fn band_power_decorrelates_in_dynamic_scene() {
    let series = run_simulation(&ScenarioConfig::default(), 1024).unwrap();
    let power = band_power_series(&series);
    let auto = normalized_covariance(&power, &power, 1023).unwrap();
    assert_eq!(auto.values[0], 1.0);
    assert!(auto.first_lag_below(0.5).is_some());
}
