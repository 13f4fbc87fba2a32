//! Normalised covariance diagnostics for simulated channels.
//!
//! `R(tau) = (1/N) sum_{j >= tau} (x_j - mean x)(y_{j - tau} - mean y) / sqrt(var x * var y)`
//! for `tau >= 0`. The biased `1/N` normalisation keeps `|R| <= 1` by
//! Cauchy-Schwarz and gives `R(0) = 1` for an auto-covariance.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::report::fmt_f64;
use crate::sim::CfrSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceKind {
    Auto,
    Cross,
}

impl CovarianceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CovarianceKind::Auto => "auto",
            CovarianceKind::Cross => "cross",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceProfile {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub kind: CovarianceKind,
}

impl CovarianceProfile {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// First lag whose value drops below `level`.
    pub fn first_lag_below(&self, level: f64) -> Option<usize> {
        self.lags
            .iter()
            .zip(&self.values)
            .find(|(_, &v)| v < level)
            .map(|(&l, _)| l)
    }

    /// CSV with header `lag,value,kind`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,value,kind\n");
        for (lag, v) in self.lags.iter().zip(&self.values) {
            let _ = writeln!(out, "{lag},{},{}", fmt_f64(*v), self.kind.as_str());
        }
        out
    }
}

fn centered(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = d.iter().map(|v| v * v).sum::<f64>() / n;
    (d, var)
}

fn lagged_sum(x: &[f64], y: &[f64], lag: usize) -> f64 {
    x[lag..].iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn normalized_covariance(x: &[f64], y: &[f64], max_lag: usize) -> Result<CovarianceProfile> {
    if x.len() != y.len() {
        return Err(Error::shape(format!(
            "covariance inputs differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateInput("need at least two samples".into()));
    }
    if max_lag >= n {
        return Err(Error::config(format!(
            "max_lag {max_lag} must be below the series length {n}"
        )));
    }
    let kind = if x == y {
        CovarianceKind::Auto
    } else {
        CovarianceKind::Cross
    };
    let (dx, var_x) = centered(x);
    let (dy, var_y) = centered(y);
    if var_x <= 0.0 || var_y <= 0.0 || !(var_x.is_finite() && var_y.is_finite()) {
        return Err(Error::DegenerateInput("input has zero variance".into()));
    }
    let denom = match kind {
        CovarianceKind::Auto => var_x,
        CovarianceKind::Cross => (var_x * var_y).sqrt(),
    };
    let lags: Vec<usize> = (0..=max_lag).collect();
    let values = lags
        .iter()
        .map(|&lag| lagged_sum(&dx, &dy, lag) / n as f64 / denom)
        .collect();
    Ok(CovarianceProfile { lags, values, kind })
}

/// Per-snapshot band power `sum_f |H_j(f)|^2`.
pub fn band_power_series(series: &CfrSeries) -> Vec<f64> {
    series
        .snapshots
        .iter()
        .map(|s| s.values.iter().map(|h| h.norm_sqr()).sum())
        .collect()
}

/// Magnitude trace `|H_j(bin)|` of a single bin.
pub fn bin_magnitude_series(series: &CfrSeries, bin: usize) -> Result<Vec<f64>> {
    series
        .snapshots
        .iter()
        .map(|s| {
            s.values
                .get(bin)
                .map(|h| h.norm())
                .ok_or_else(|| Error::config(format!("bin {bin} outside the {}-bin band", s.values.len())))
        })
        .collect()
}

/// The bin lying furthest below its snapshot's mean magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadeDepth {
    pub snapshot: usize,
    pub bin: usize,
    /// `20 log10(mean |H| / |H(bin)|)`; infinite for an exact null.
    pub depth_db: f64,
}

/// Deepest fade over all snapshots, relative to each snapshot's mean
/// magnitude. `None` for an empty series or all-zero snapshots.
pub fn deepest_fade(series: &CfrSeries) -> Option<FadeDepth> {
    let mut best: Option<FadeDepth> = None;
    for (j, snap) in series.snapshots.iter().enumerate() {
        if snap.values.is_empty() {
            continue;
        }
        let mean = snap.magnitudes().sum::<f64>() / snap.values.len() as f64;
        if mean <= 0.0 {
            continue;
        }
        let (bin, min) = snap
            .magnitudes()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (f, m)| if m < acc.1 { (f, m) } else { acc });
        let depth_db = 20.0 * (mean / min).log10();
        if best.is_none_or(|b| depth_db > b.depth_db) {
            best = Some(FadeDepth { snapshot: j, bin, depth_db });
        }
    }
    best
}
