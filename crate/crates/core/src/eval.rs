//! Evaluation: per-step-ahead MSE, ROC/AUC and fresh-channel checks.

use crate::dataset::{example_count, make_predictor_labels, tensorize_range};
use crate::error::{Error, Result};
use crate::models::Network;
use crate::report::fmt_f64;
use crate::sim::CfrSeries;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMse {
    /// 1-based step ahead.
    pub step: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMseReport {
    pub rows: Vec<StepMse>,
    /// Mean over every element, accumulated in the same order as the
    /// training loop's loss so the two agree bit for bit.
    pub overall: f64,
    pub examples: usize,
}

impl StepMseReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,mse\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}\n", r.step, fmt_f64(r.mse)));
        }
        out
    }

    /// Largest over smallest per-step MSE.
    pub fn max_min_ratio(&self) -> f64 {
        let (lo, hi) = self
            .rows
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.mse), hi.max(r.mse)));
        hi / lo
    }
}

/// Streams (prediction, label) examples into per-step sums.
#[derive(Debug, Clone)]
struct StepMseAccumulator {
    bins: usize,
    span_d: usize,
    step_sums: Vec<f64>,
    total: f64,
    examples: usize,
}

impl StepMseAccumulator {
    fn new(bins: usize, span_d: usize) -> Self {
        StepMseAccumulator {
            bins,
            span_d,
            step_sums: vec![0.0; span_d],
            total: 0.0,
            examples: 0,
        }
    }

    fn push(&mut self, pred: &Tensor4, labels: &Tensor4) {
        for b in 0..pred.batch() {
            let mut example_sum = 0.0;
            for (i, (p, y)) in pred.example(b).iter().zip(labels.example(b)).enumerate() {
                let e = p - y;
                example_sum += e * e;
                self.step_sums[i % self.span_d] += e * e;
            }
            self.total += example_sum;
        }
        self.examples += pred.batch();
    }

    fn finish(self) -> Result<StepMseReport> {
        if self.examples == 0 {
            return Err(Error::shape("no examples to evaluate"));
        }
        let per_step = (self.examples * self.bins) as f64;
        Ok(StepMseReport {
            rows: self
                .step_sums
                .iter()
                .enumerate()
                .map(|(d, s)| StepMse { step: d + 1, mse: s / per_step })
                .collect(),
            overall: self.total / (per_step * self.span_d as f64),
            examples: self.examples,
        })
    }
}

fn check_labels(pred: &Tensor4, labels: &Tensor4) -> Result<[usize; 4]> {
    let dims = pred.dims();
    if dims != labels.dims() || dims[2] != 1 {
        return Err(Error::shape(format!(
            "predictions {:?} and labels {:?} must agree and be (B, F, 1, D)",
            dims,
            labels.dims()
        )));
    }
    Ok(dims)
}

/// Mean squared error for each step ahead, averaged over batch and bins.
pub fn per_step_mse(pred: &Tensor4, labels: &Tensor4) -> Result<StepMseReport> {
    let [_, f, _, d] = check_labels(pred, labels)?;
    let mut acc = StepMseAccumulator::new(f, d);
    acc.push(pred, labels);
    acc.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate) from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub step_ahead: usize,
    /// Bin the scores came from; `None` when bins were pooled.
    pub band_index: Option<usize>,
}

impl RocCurve {
    pub fn csv_header() -> &'static str {
        "step,fpr,tpr\n"
    }

    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for &(fpr, tpr) in &self.points {
            out.push_str(&format!("{},{},{}\n", self.step_ahead, fmt_f64(fpr), fmt_f64(tpr)));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{}{}", Self::csv_header(), self.csv_rows())
    }
}

/// ROC curve sweeping a threshold down through the distinct scores; equal
/// scores form a single point. AUC is the trapezoidal area.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::DegenerateInput("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels(format!(
            "{positives} positive and {negatives} negative labels; both classes are required"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().unwrap();
        let (x1, y1) = (fp as f64 / n, tp as f64 / p);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    Ok(RocCurve {
        points,
        auc,
        step_ahead: 1,
        band_index: None,
    })
}

/// Which bins feed a per-step ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinSelection {
    Single(usize),
    Pooled,
}

impl BinSelection {
    /// The band-centre bin of an `F`-bin grid ordered from `-B/2` upwards.
    pub fn center(bins: usize) -> Self {
        BinSelection::Single(bins / 2)
    }
}

/// One ROC curve per step ahead from classifier outputs and 0/1 labels.
pub fn roc_per_step(prob: &Tensor4, labels: &Tensor4, bins: BinSelection) -> Result<Vec<RocCurve>> {
    let [nb, nf, _, nd] = check_labels(prob, labels)?;
    if let BinSelection::Single(k) = bins {
        if k >= nf {
            return Err(Error::config(format!("bin {k} out of range for {nf} bins")));
        }
    }
    let selected: Vec<usize> = match bins {
        BinSelection::Single(k) => vec![k],
        BinSelection::Pooled => (0..nf).collect(),
    };
    (0..nd)
        .map(|d| {
            let mut scores = Vec::with_capacity(nb * selected.len());
            let mut truth = Vec::with_capacity(nb * selected.len());
            for b in 0..nb {
                for &f in &selected {
                    scores.push(prob.get(b, f, 0, d));
                    truth.push(labels.get(b, f, 0, d) > 0.5);
                }
            }
            let mut curve = roc_curve(&scores, &truth)?;
            curve.step_ahead = d + 1;
            curve.band_index = match bins {
                BinSelection::Single(k) => Some(k),
                BinSelection::Pooled => None,
            };
            Ok(curve)
        })
        .collect()
}

/// Concatenated `step,fpr,tpr` CSV of several curves.
pub fn roc_csv(curves: &[RocCurve]) -> String {
    let mut out = String::from(RocCurve::csv_header());
    for c in curves {
        out.push_str(&c.csv_rows());
    }
    out
}

const FRESH_CHUNK: usize = 256;

/// Per-step MSE of a trained predictor on a newly simulated series. Inputs
/// and labels use the training `scale`; nothing is re-fitted. Up to
/// `max_examples` examples (all by default) are evaluated in chunks.
pub fn fresh_channel_check(
    net: &Network,
    series: &CfrSeries,
    scale: f64,
    t_len: usize,
    max_examples: Option<usize>,
) -> Result<StepMseReport> {
    let span_d = net.span_d();
    let available = example_count(series.len(), t_len, span_d).ok_or(Error::InsufficientData {
        required: t_len + span_d,
        available: series.len(),
    })?;
    let count = max_examples.map_or(available, |m| m.min(available));
    if count == 0 {
        return Err(Error::config("no examples requested"));
    }
    let mut acc = StepMseAccumulator::new(series.bins(), span_d);
    let mut start = 0;
    while start < count {
        let n = FRESH_CHUNK.min(count - start);
        let chunk = tensorize_range(series, t_len, span_d, start, n, scale)?;
        let labels = make_predictor_labels(&chunk.future, scale);
        let pred = net.predict(&chunk.inputs)?;
        acc.push(&pred, &labels);
        start += n;
    }
    acc.finish()
}
