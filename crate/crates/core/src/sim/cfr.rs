use std::sync::Arc;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use super::{
    advance_scene, init_scene, noise_stream, path_geometry, synthesize_received, Scene,
    ScenarioConfig,
};
use crate::error::{Error, Result};

/// One channel frequency response `H_j` over the retained bins.
#[derive(Debug, Clone, PartialEq)]
pub struct CfrSnapshot {
    pub values: Vec<Complex64>,
    pub t_index: usize,
    /// Frequencies (Hz, baseband) of the lowest and highest retained bin.
    pub band_hz: (f64, f64),
}

impl CfrSnapshot {
    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|h| h.norm())
    }
}

/// Time-ordered sequence of snapshots from one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CfrSeries {
    pub snapshots: Vec<CfrSnapshot>,
    pub delta_t: f64,
    pub scenario_fingerprint: u64,
}

impl CfrSeries {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Bins per snapshot (0 for an empty series).
    pub fn bins(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.values.len())
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.bins();
        for (i, s) in self.snapshots.iter().enumerate() {
            if s.values.len() != f {
                return Err(Error::shape(format!(
                    "snapshot {i} has {} bins, expected {f}",
                    s.values.len()
                )));
            }
            if i > 0 && s.t_index != self.snapshots[i - 1].t_index + 1 {
                return Err(Error::format("snapshot t_index must increase by one"));
            }
            if !s.values.iter().all(|h| h.re.is_finite() && h.im.is_finite()) {
                return Err(Error::Numerical(format!("snapshot {i} has non-finite values")));
            }
        }
        Ok(())
    }
}

/// Forward DFT of a receive window followed by selection of the `F` bins
/// spanning the transmitted band, ordered from `-B/2` upwards.
///
/// The `sinc(B t)` pulse occupies `|f| <= B/2`, so the retained bins are
/// the `floor(F/2)` highest (negative-frequency) DFT bins followed by bins
/// `0..F - floor(F/2)`. The DFT is unnormalised.
#[derive(Clone)]
pub struct CfrTransform {
    fft: Arc<dyn Fft<f64>>,
    window_len: usize,
    bins: usize,
    bin_spacing: f64,
}

impl CfrTransform {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let window_len = config.sample_count()?;
        let bins = config.band_bins()?;
        let fft = FftPlanner::new().plan_fft_forward(window_len);
        Ok(CfrTransform {
            fft,
            window_len,
            bins,
            bin_spacing: config.bin_spacing()?,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// DFT index of each retained bin, in output order.
    pub fn bin_indices(&self) -> Vec<usize> {
        let neg = self.bins / 2;
        (self.window_len - neg..self.window_len)
            .chain(0..self.bins - neg)
            .collect()
    }

    pub fn band_hz(&self) -> (f64, f64) {
        let neg = (self.bins / 2) as f64;
        let pos = (self.bins - self.bins / 2) as f64 - 1.0;
        (-neg * self.bin_spacing, pos * self.bin_spacing)
    }

    pub fn apply(&self, samples: &[Complex64], t_index: usize) -> Result<CfrSnapshot> {
        if samples.len() != self.window_len {
            return Err(Error::shape(format!(
                "expected {} samples, got {}",
                self.window_len,
                samples.len()
            )));
        }
        let mut spectrum = samples.to_vec();
        self.fft.process(&mut spectrum);
        let values = self.bin_indices().into_iter().map(|i| spectrum[i]).collect();
        Ok(CfrSnapshot {
            values,
            t_index,
            band_hz: self.band_hz(),
        })
    }
}

/// CFR of one receive window (`t_index` 0). Reuse a [`CfrTransform`] when
/// converting many windows.
pub fn compute_cfr(samples: &[Complex64], config: &ScenarioConfig) -> Result<CfrSnapshot> {
    CfrTransform::new(config)?.apply(samples, 0)
}

/// Stateful snapshot generator: scene, noise stream and step counter.
pub struct Simulator {
    config: ScenarioConfig,
    scene: Scene,
    noise: ChaCha8Rng,
    transform: CfrTransform,
    step: usize,
}

impl Simulator {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let scene = init_scene(config)?;
        Ok(Simulator {
            transform: CfrTransform::new(config)?,
            noise: noise_stream(config.seed),
            config: config.clone(),
            scene,
            step: 0,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    /// Measures the channel at the current scene, then advances the scene.
    pub fn next_snapshot(&mut self) -> Result<CfrSnapshot> {
        let paths = path_geometry(&self.scene, &self.config)?;
        let samples = synthesize_received(&paths, &self.config, &mut self.noise)?;
        let snapshot = self.transform.apply(&samples, self.step)?;
        self.scene = advance_scene(&self.scene, self.config.delta_t);
        self.step += 1;
        Ok(snapshot)
    }
}

pub fn run_simulation(config: &ScenarioConfig, n_steps: usize) -> Result<CfrSeries> {
    if n_steps == 0 {
        return Err(Error::config("n_steps must be at least 1"));
    }
    let mut sim = Simulator::new(config)?;
    let snapshots = (0..n_steps)
        .map(|_| sim.next_snapshot())
        .collect::<Result<Vec<_>>>()?;
    Ok(CfrSeries {
        snapshots,
        delta_t: config.delta_t,
        scenario_fingerprint: config.fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_band_has_128_bins() {
        let cfg = ScenarioConfig::default();
        let tr = CfrTransform::new(&cfg).unwrap();
        assert_eq!(tr.bins(), 128);
        let idx = tr.bin_indices();
        assert_eq!((idx[0], idx[63], idx[64], idx[127]), (448, 511, 0, 63));
        assert_eq!(tr.band_hz(), (-6.4e6, 6.3e6));
    }

    #[test]
    fn zero_input_zero_cfr() {
        let cfg = ScenarioConfig::default();
        let snap = compute_cfr(&vec![Complex64::new(0.0, 0.0); 512], &cfg).unwrap();
        assert_eq!(snap.values.len(), 128);
        assert!(snap.values.iter().all(|h| h.norm() == 0.0));
    }

    #[test]
    fn wrong_window_length_is_rejected() {
        let cfg = ScenarioConfig::default();
        assert!(compute_cfr(&[Complex64::new(1.0, 0.0); 10], &cfg).is_err());
    }

    #[test]
    fn fractional_bin_count_is_config_error() {
        let cfg = ScenarioConfig { bandwidth_b: 12.85e6, ..Default::default() };
        assert!(matches!(CfrTransform::new(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn series_length_and_indices() {
        let cfg = ScenarioConfig { n_r: 8, n_m: 2, ..Default::default() };
        let one = run_simulation(&cfg, 1).unwrap();
        assert_eq!(one.len(), 1);
        let three = run_simulation(&cfg, 3).unwrap();
        three.validate().unwrap();
        assert_eq!(three.snapshots[2].t_index, 2);
        assert_eq!(three.scenario_fingerprint, cfg.fingerprint());
        assert!(matches!(run_simulation(&cfg, 0), Err(Error::Config(_))));
    }
}
