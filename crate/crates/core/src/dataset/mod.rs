//! From CFR series to network tensors.
//!
//! Example `e` of a series uses the window ending at snapshot
//! `j = e + T - 1`: input time index `i` holds `H_{j - T + 1 + i}` split into
//! real (channel 0) and imaginary (channel 1) planes, and the `D` future
//! snapshots `H_{j+1} ..= H_{j+D}` provide the labels.

mod container;

use std::fmt::Write as _;

use num_complex::Complex64;

pub use container::{
    load_dataset, load_series, read_container, read_dataset, read_series, save_dataset,
    save_series, write_container, write_dataset, write_series, Block, BlockData, Container, Role,
    FORMAT_VERSION, MAGIC,
};

use crate::error::{Error, Result};
use crate::report::fmt_f64;
use crate::sim::CfrSeries;
use crate::tensor::Tensor4;

/// Future CFR values per example, laid out as (example, bin, step).
#[derive(Debug, Clone, PartialEq)]
pub struct FutureCfr {
    pub examples: usize,
    pub bins: usize,
    pub span_d: usize,
    pub values: Vec<Complex64>,
}

impl FutureCfr {
    #[inline]
    pub fn get(&self, e: usize, f: usize, d: usize) -> Complex64 {
        self.values[(e * self.bins + f) * self.span_d + d]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensorized {
    /// (examples, F, T, 2).
    pub inputs: Tensor4,
    pub future: FutureCfr,
}

/// Number of examples a series of `len` snapshots yields, if any.
pub fn example_count(len: usize, t_len: usize, span_d: usize) -> Option<usize> {
    (len + 1).checked_sub(t_len + span_d).filter(|&n| n > 0)
}

fn check_window(t_len: usize, span_d: usize) -> Result<()> {
    if t_len == 0 || span_d == 0 {
        return Err(Error::config("t_len and span_d must be at least 1"));
    }
    Ok(())
}

/// Tensorizes every example of the series.
pub fn tensorize(series: &CfrSeries, t_len: usize, span_d: usize) -> Result<Tensorized> {
    check_window(t_len, span_d)?;
    let count = example_count(series.len(), t_len, span_d).ok_or(Error::InsufficientData {
        required: t_len + span_d,
        available: series.len(),
    })?;
    tensorize_range(series, t_len, span_d, 0, count, 1.0)
}

/// Tensorizes `count` examples starting at example `start`, multiplying the
/// input planes by `input_scale`.
pub fn tensorize_range(
    series: &CfrSeries,
    t_len: usize,
    span_d: usize,
    start: usize,
    count: usize,
    input_scale: f64,
) -> Result<Tensorized> {
    check_window(t_len, span_d)?;
    series.validate()?;
    let available = example_count(series.len(), t_len, span_d).unwrap_or(0);
    if start + count > available {
        return Err(Error::InsufficientData {
            required: start + count + t_len + span_d - 1,
            available: series.len(),
        });
    }
    let bins = series.bins();
    let snaps = &series.snapshots;
    let mut inputs = Tensor4::zeros([count, bins, t_len, 2]);
    let mut future = Vec::with_capacity(count * bins * span_d);
    for e in 0..count {
        let j = start + e + t_len - 1;
        for f in 0..bins {
            for i in 0..t_len {
                let h = snaps[j + 1 + i - t_len].values[f];
                inputs.set(e, f, i, 0, input_scale * h.re);
                inputs.set(e, f, i, 1, input_scale * h.im);
            }
            for d in 0..span_d {
                future.push(snaps[j + 1 + d].values[f]);
            }
        }
    }
    Ok(Tensorized {
        inputs,
        future: FutureCfr { examples: count, bins, span_d, values: future },
    })
}

/// `label[e, f, 0, d] = scale * |H_{j+1+d}(f)|`.
pub fn make_predictor_labels(future: &FutureCfr, scale: f64) -> Tensor4 {
    let data = future.values.iter().map(|h| scale * h.norm()).collect();
    Tensor4::from_vec([future.examples, future.bins, 1, future.span_d], data)
        .expect("future grid is consistent")
}

/// `1` where `scale * |H| < threshold`, else `0`.
pub fn make_classifier_labels(future: &FutureCfr, scale: f64, threshold: f64) -> Tensor4 {
    let data = future
        .values
        .iter()
        .map(|h| if scale * h.norm() < threshold { 1.0 } else { 0.0 })
        .collect();
    Tensor4::from_vec([future.examples, future.bins, 1, future.span_d], data)
        .expect("future grid is consistent")
}

/// How the deep-fade threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// Quantile in `[0, 1)` of the scaled training magnitudes.
    Percentile(f64),
    /// Fixed value in scaled magnitude units.
    Absolute(f64),
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Percentile(0.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub t_len: usize,
    pub span_d: usize,
    pub n_train_per_run: usize,
    pub n_test_per_run: usize,
    pub threshold: ThresholdRule,
}

impl SplitConfig {
    /// Snapshots each run needs to supply both partitions.
    pub fn required_snapshots(&self) -> usize {
        self.n_train_per_run + self.n_test_per_run + self.t_len + self.span_d - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub x_train: Tensor4,
    pub x_test: Tensor4,
    pub y_pred_train: Tensor4,
    pub y_pred_test: Tensor4,
    pub y_cls_train: Tensor4,
    pub y_cls_test: Tensor4,
    /// Multiplier applied to raw CFR values (inputs and magnitudes).
    pub scale: f64,
    /// Deep-fade threshold in scaled magnitude units.
    pub threshold: f64,
    pub t_len: usize,
    pub span_d: usize,
}

impl DatasetSplit {
    pub fn bins(&self) -> usize {
        self.x_train.dims()[1]
    }

    pub fn validate(&self) -> Result<()> {
        let [ntr, f, t, c] = self.x_train.dims();
        let [nte, f2, t2, c2] = self.x_test.dims();
        if c != 2 || c2 != 2 || f != f2 || t != t2 || t != self.t_len {
            return Err(Error::shape("inconsistent input tensors"));
        }
        let label_dims = |n| [n, f, 1, self.span_d];
        for (name, y, n) in [
            ("y_pred_train", &self.y_pred_train, ntr),
            ("y_cls_train", &self.y_cls_train, ntr),
            ("y_pred_test", &self.y_pred_test, nte),
            ("y_cls_test", &self.y_cls_test, nte),
        ] {
            if y.dims() != label_dims(n) {
                return Err(Error::shape(format!(
                    "{name} has dims {:?}, expected {:?}",
                    y.dims(),
                    label_dims(n)
                )));
            }
        }
        if !self
            .y_cls_train
            .data()
            .iter()
            .chain(self.y_cls_test.data())
            .all(|&v| v == 0.0 || v == 1.0)
        {
            return Err(Error::format("classifier labels must be 0 or 1"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::format(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }

    /// Fraction of positive classifier labels in the training partition.
    pub fn train_positive_rate(&self) -> f64 {
        let d = self.y_cls_train.data();
        d.iter().sum::<f64>() / d.len() as f64
    }
}

/// Value at rank `floor(q * n)` of the ascending order statistics.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((q * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
    sorted[idx]
}

/// Builds the time-ordered train/test split: per run, the first
/// `n_train_per_run` examples train and the next `n_test_per_run` test.
/// The scale is `1 / RMS` of the training magnitudes.
pub fn split_train_test(runs: &[CfrSeries], cfg: &SplitConfig) -> Result<DatasetSplit> {
    check_window(cfg.t_len, cfg.span_d)?;
    if runs.is_empty() {
        return Err(Error::config("no simulation runs given"));
    }
    if cfg.n_train_per_run == 0 || cfg.n_test_per_run == 0 {
        return Err(Error::config("both partitions need at least one example per run"));
    }
    let bins = runs[0].bins();
    let required = cfg.required_snapshots();
    for run in runs {
        if run.len() < required {
            return Err(Error::InsufficientData { required, available: run.len() });
        }
        if run.bins() != bins {
            return Err(Error::shape("runs differ in bin count"));
        }
    }

    let mut train_parts = Vec::with_capacity(runs.len());
    let mut test_parts = Vec::with_capacity(runs.len());
    for run in runs {
        train_parts.push(tensorize_range(run, cfg.t_len, cfg.span_d, 0, cfg.n_train_per_run, 1.0)?);
        test_parts.push(tensorize_range(
            run,
            cfg.t_len,
            cfg.span_d,
            cfg.n_train_per_run,
            cfg.n_test_per_run,
            1.0,
        )?);
    }

    let train_mags: Vec<f64> = train_parts
        .iter()
        .flat_map(|p| p.future.values.iter().map(|h| h.norm()))
        .collect();
    let mean_sq = train_mags.iter().map(|m| m * m).sum::<f64>() / train_mags.len() as f64;
    if !(mean_sq > 0.0 && mean_sq.is_finite()) {
        return Err(Error::Numerical("training magnitudes have zero RMS".into()));
    }
    let scale = 1.0 / mean_sq.sqrt();

    let threshold = match cfg.threshold {
        ThresholdRule::Absolute(t) => t,
        ThresholdRule::Percentile(q) => {
            if !(0.0..1.0).contains(&q) {
                return Err(Error::config(format!("percentile {q} outside [0, 1)")));
            }
            let scaled: Vec<f64> = train_mags.iter().map(|m| scale * m).collect();
            percentile(&scaled, q)
        }
    };

    let assemble = |parts: &mut Vec<Tensorized>| -> Result<(Tensor4, Tensor4, Tensor4)> {
        let mut xs = Vec::with_capacity(parts.len());
        let mut yp = Vec::with_capacity(parts.len());
        let mut yc = Vec::with_capacity(parts.len());
        for p in parts.drain(..) {
            let mut x = p.inputs;
            x.data_mut().iter_mut().for_each(|v| *v *= scale);
            yp.push(make_predictor_labels(&p.future, scale));
            yc.push(make_classifier_labels(&p.future, scale, threshold));
            xs.push(x);
        }
        let x = if xs.len() == 1 {
            xs.pop().unwrap()
        } else {
            Tensor4::concat(&xs.iter().collect::<Vec<_>>())?
        };
        Ok((
            x,
            Tensor4::concat(&yp.iter().collect::<Vec<_>>())?,
            Tensor4::concat(&yc.iter().collect::<Vec<_>>())?,
        ))
    };
    let (x_train, y_pred_train, y_cls_train) = assemble(&mut train_parts)?;
    let (x_test, y_pred_test, y_cls_test) = assemble(&mut test_parts)?;

    Ok(DatasetSplit {
        x_train,
        x_test,
        y_pred_train,
        y_pred_test,
        y_cls_train,
        y_cls_test,
        scale,
        threshold,
        t_len: cfg.t_len,
        span_d: cfg.span_d,
    })
}

/// CSV (`b,f,t,c,value`) of the batch entries `batches` of a tensor.
pub fn tensor_slice_csv(tensor: &Tensor4, batches: std::ops::Range<usize>) -> Result<String> {
    let [nb, nf, nt, nc] = tensor.dims();
    if batches.end > nb || batches.start > batches.end {
        return Err(Error::shape(format!("batch range {batches:?} outside 0..{nb}")));
    }
    let mut out = String::from("b,f,t,c,value\n");
    for b in batches {
        for f in 0..nf {
            for t in 0..nt {
                for c in 0..nc {
                    let _ = writeln!(out, "{b},{f},{t},{c},{}", fmt_f64(tensor.get(b, f, t, c)));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::CfrSnapshot;

    pub(crate) fn series_of(values: Vec<Vec<Complex64>>) -> CfrSeries {
        CfrSeries {
            snapshots: values
                .into_iter()
                .enumerate()
                .map(|(t_index, values)| CfrSnapshot { values, t_index, band_hz: (0.0, 0.0) })
                .collect(),
            delta_t: 1.0,
            scenario_fingerprint: 0,
        }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn direct_read_of_the_window() {
        let s = series_of(vec![vec![c(1.0, 2.0)], vec![c(3.0, 4.0)], vec![c(0.0, 0.0)]]);
        let t = tensorize(&s, 2, 1).unwrap();
        assert_eq!(t.inputs.dims(), [1, 1, 2, 2]);
        assert_eq!([t.inputs.get(0, 0, 0, 0), t.inputs.get(0, 0, 1, 0)], [1.0, 3.0]);
        assert_eq!([t.inputs.get(0, 0, 0, 1), t.inputs.get(0, 0, 1, 1)], [2.0, 4.0]);
        assert_eq!(t.future.get(0, 0, 0), c(0.0, 0.0));
    }

    #[test]
    fn example_counts() {
        assert_eq!(example_count(5, 3, 2), Some(1));
        assert_eq!(example_count(4, 3, 2), None);
        assert_eq!(example_count(4160, 64, 10), Some(4087));
        let short = series_of(vec![vec![c(1.0, 0.0)]; 4]);
        assert!(matches!(
            tensorize(&short, 3, 2),
            Err(Error::InsufficientData { required: 5, available: 4 })
        ));
    }

    #[test]
    fn predictor_labels() {
        let fut = FutureCfr { examples: 1, bins: 1, span_d: 2, values: vec![c(3.0, 4.0), c(0.0, 0.0)] };
        assert_eq!(make_predictor_labels(&fut, 1.0).data(), &[5.0, 0.0]);
        assert_eq!(make_predictor_labels(&fut, 2.0).data(), &[10.0, 0.0]);
    }

    #[test]
    fn classifier_labels() {
        let fut = FutureCfr {
            examples: 1,
            bins: 3,
            span_d: 1,
            values: vec![c(0.1, 0.0), c(0.0, 0.5), c(0.9, 0.0)],
        };
        assert_eq!(make_classifier_labels(&fut, 1.0, 0.2).data(), &[1.0, 0.0, 0.0]);
        assert_eq!(make_classifier_labels(&fut, 1.0, 0.0).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn percentile_rule() {
        let v: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.1), 10.0);
        assert_eq!(v.iter().filter(|&&x| x < percentile(&v, 0.1)).count(), 10);
    }

    #[test]
    fn one_run_one_and_one() {
        let s = series_of((0..4).map(|k| vec![c(k as f64 + 1.0, 0.5)]).collect());
        let cfg = SplitConfig {
            t_len: 2,
            span_d: 1,
            n_train_per_run: 1,
            n_test_per_run: 1,
            threshold: ThresholdRule::Absolute(0.5),
        };
        let split = split_train_test(std::slice::from_ref(&s), &cfg).unwrap();
        split.validate().unwrap();
        assert_eq!((split.x_train.batch(), split.x_test.batch()), (1, 1));
        let scaled = split.y_pred_train.data()[0];
        assert!((scaled - 1.0).abs() < 1e-15);
        let short = series_of(s.snapshots[..3].iter().map(|x| x.values.clone()).collect());
        assert!(matches!(split_train_test(&[short], &cfg), Err(Error::InsufficientData { required: 4, .. })));
    }

    #[test]
    fn slice_csv() {
        let t = Tensor4::from_vec([2, 1, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            tensor_slice_csv(&t, 1..2).unwrap(),
            "b,f,t,c,value\n1,0,0,0,3.00000000e0\n1,0,0,1,4.00000000e0\n"
        );
        assert!(tensor_slice_csv(&t, 1..3).is_err());
    }
}
