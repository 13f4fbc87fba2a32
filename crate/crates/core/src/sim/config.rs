use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scene::Vec2;
use crate::error::{Error, Result};

/// Geometry, RF and randomness settings of one simulated channel.
///
/// Missing keys in a JSON config fall back to the reference defaults
/// returned by [`ScenarioConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Transmitter position (m).
    pub p_tx: Vec2,
    /// Receiver starting position (m).
    pub p_rx_init: Vec2,
    /// Number of reflection points.
    pub n_r: usize,
    /// Number of mobile reflection points.
    pub n_m: usize,
    /// Carrier frequency (Hz).
    pub f_c: f64,
    /// Sampling frequency (Hz).
    pub f_s: f64,
    /// Bandwidth of the transmitted `sinc` pulse (Hz).
    pub bandwidth_b: f64,
    /// Receive window length (s).
    pub window_p: f64,
    pub mu_p: f64,
    pub sigma2_p: f64,
    pub mu_rx: f64,
    pub sigma2_rx: f64,
    pub mu_s: f64,
    pub sigma2_s: f64,
    /// Receiver SNR in dB; `None` disables noise.
    pub snr_db: Option<f64>,
    /// Time between consecutive snapshots (s).
    pub delta_t: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            p_tx: Vec2::new(-200.0, 0.0),
            p_rx_init: Vec2::new(200.0, 0.0),
            n_r: 256,
            n_m: 63,
            f_c: 900e6,
            f_s: 51.2e6,
            bandwidth_b: 12.8e6,
            window_p: 10e-6,
            mu_p: 0.0,
            sigma2_p: 70.0 * 70.0,
            mu_rx: 1.0,
            sigma2_rx: 4.0,
            mu_s: 0.0,
            sigma2_s: 100.0,
            snr_db: Some(12.0),
            delta_t: 500e-6,
            seed: 1,
        }
    }
}

const INTEGER_TOL: f64 = 1e-6;

fn as_count(value: f64, what: &str) -> Result<usize> {
    let rounded = value.round();
    if !value.is_finite() || rounded < 1.0 || (value - rounded).abs() > INTEGER_TOL {
        return Err(Error::config(format!(
            "{what} must be a positive integer, got {value}"
        )));
    }
    Ok(rounded as usize)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_m > self.n_r {
            return Err(Error::config(format!(
                "n_m ({}) exceeds n_r ({})",
                self.n_m, self.n_r
            )));
        }
        for (name, v) in [
            ("f_c", self.f_c),
            ("f_s", self.f_s),
            ("bandwidth_b", self.bandwidth_b),
            ("window_p", self.window_p),
            ("delta_t", self.delta_t),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("sigma2_p", self.sigma2_p),
            ("sigma2_rx", self.sigma2_rx),
            ("sigma2_s", self.sigma2_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "{name} must be a non-negative variance, got {v}"
                )));
            }
        }
        for (name, v) in [("mu_p", self.mu_p), ("mu_rx", self.mu_rx), ("mu_s", self.mu_s)] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::config("snr_db must be finite (use null for noiseless)"));
            }
        }
        if !(self.p_tx.is_finite() && self.p_rx_init.is_finite()) {
            return Err(Error::config("positions must be finite"));
        }
        self.sample_count()?;
        Ok(())
    }

    /// Samples per receive window, `K = f_s * window_p`.
    pub fn sample_count(&self) -> Result<usize> {
        as_count(self.f_s * self.window_p, "f_s * window_p")
    }

    /// Retained DFT bins, `F = K * B / f_s`.
    pub fn band_bins(&self) -> Result<usize> {
        let k = self.sample_count()?;
        let f = as_count(k as f64 * self.bandwidth_b / self.f_s, "K * B / f_s")?;
        if f > k {
            return Err(Error::config(format!(
                "band needs {f} bins but the window only has {k}"
            )));
        }
        Ok(f)
    }

    /// DFT bin spacing `f_s / K` (Hz).
    pub fn bin_spacing(&self) -> Result<f64> {
        Ok(self.f_s / self.sample_count()? as f64)
    }

    /// Stable 64-bit digest of the canonical JSON form.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("bad scenario config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_reference_settings() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.sample_count().unwrap(), 512);
        assert_eq!(cfg.band_bins().unwrap(), 128);
        assert_eq!((cfg.n_r, cfg.n_m), (256, 63));
        assert_eq!(cfg.sigma2_p, 4900.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ScenarioConfig { n_m: 300, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg = ScenarioConfig { window_p: 0.0, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg = ScenarioConfig { window_p: 10.01e-6, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg = ScenarioConfig { sigma2_s: -1.0, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg = ScenarioConfig { delta_t: 0.0, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg = ScenarioConfig { bandwidth_b: 12.85e6, ..Default::default() };
        assert!(matches!(cfg.band_bins(), Err(Error::Config(_))));
    }

    #[test]
    fn partial_json_falls_back_to_defaults() {
        let cfg = ScenarioConfig::from_json(r#"{"n_r": 2, "n_m": 2, "seed": 42}"#).unwrap();
        assert_eq!(cfg.n_r, 2);
        assert_eq!(cfg.f_c, 900e6);
        assert!(ScenarioConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let noiseless = ScenarioConfig::from_json(r#"{"snr_db": null}"#).unwrap();
        assert_eq!(noiseless.snr_db, None);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ScenarioConfig::default();
        let b = ScenarioConfig { seed: 2, ..Default::default() };
        assert_eq!(a.fingerprint(), ScenarioConfig::default().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
