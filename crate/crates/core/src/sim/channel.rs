use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Scene, ScenarioConfig};
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One transmitter -> reflection point -> receiver propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multipath {
    /// Path length (m).
    pub length_l: f64,
    /// Excess delay relative to the shortest path (s).
    pub delay_tau: f64,
    /// Carrier phase in `[0, 2pi)`.
    pub phase_phi: f64,
    /// Free-space amplitude gain `c / (4 pi f_c l)`.
    pub amplitude_a: f64,
    /// Explicit Doppler shift (Hz). Motion normally enters through the
    /// geometry updates between snapshots, so this stays zero unless set.
    pub doppler_d: f64,
}

impl Multipath {
    pub fn gain(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude_a, self.phase_phi)
    }
}

/// Normalised sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Length, delay, phase and gain of every path in the scene.
pub fn path_geometry(scene: &Scene, config: &ScenarioConfig) -> Result<Vec<Multipath>> {
    let lengths: Vec<f64> = scene
        .p_r
        .iter()
        .map(|&p| (p - scene.p_rx).norm() + (p - config.p_tx).norm())
        .collect();
    if let Some(i) = lengths.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::DegenerateGeometry(format!(
            "reflection point {i} has path length {}",
            lengths[i]
        )));
    }
    let min_delay = lengths
        .iter()
        .map(|&l| l / SPEED_OF_LIGHT)
        .fold(f64::INFINITY, f64::min);

    Ok(lengths
        .into_iter()
        .map(|l| {
            let cycles = config.f_c * l / SPEED_OF_LIGHT;
            Multipath {
                length_l: l,
                delay_tau: l / SPEED_OF_LIGHT - min_delay,
                phase_phi: TAU * (-cycles).rem_euclid(1.0),
                amplitude_a: SPEED_OF_LIGHT / (4.0 * PI * config.f_c * l),
                doppler_d: 0.0,
            }
        })
        .collect())
}

/// Noise-free received window:
/// `s[k] = sum_i a_i exp(i (phi_i + 2 pi D_i t_k)) sinc(B (t_k - tau_i))`, `t_k = k / f_s`.
pub fn received_clean(paths: &[Multipath], config: &ScenarioConfig) -> Result<Vec<Complex64>> {
    if paths.is_empty() {
        return Err(Error::EmptyScene);
    }
    let k_len = config.sample_count()?;
    let b = config.bandwidth_b;
    let mut out = vec![Complex64::new(0.0, 0.0); k_len];
    for path in paths {
        let g = path.gain();
        for (k, s) in out.iter_mut().enumerate() {
            let t = k as f64 / config.f_s;
            let pulse = sinc(b * (t - path.delay_tau));
            if path.doppler_d == 0.0 {
                *s += g * pulse;
            } else {
                *s += g * Complex64::from_polar(pulse, TAU * path.doppler_d * t);
            }
        }
    }
    Ok(out)
}

/// Adds circular complex Gaussian noise whose variance makes the mean
/// window power over the noise variance equal `10^(snr_db / 10)`.
pub fn add_noise<R: Rng + ?Sized>(samples: &mut [Complex64], snr_db: f64, rng: &mut R) {
    if samples.is_empty() {
        return;
    }
    let power = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64;
    let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    for s in samples.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += Complex64::new(re * sigma, im * sigma);
    }
}

/// Received window with noise drawn from `rng` (skipped when `snr_db` is `None`).
pub fn synthesize_received<R: Rng + ?Sized>(
    paths: &[Multipath],
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let mut samples = received_clean(paths, config)?;
    if let Some(snr) = config.snr_db {
        add_noise(&mut samples, snr, rng);
    }
    Ok(samples)
}
