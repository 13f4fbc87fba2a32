//! Predictor and deep-fade classifier networks and their training loop.
//!
//! Both networks share the same four dilated causal layers; only the
//! output layer's activation differs (exponential magnitudes versus sigmoid
//! fade probabilities). They are built and trained independently.

mod network;
mod train;

pub use network::Network;
pub use train::{evaluate_loss, fit, fit_with, loss_gradient, TrainConfig, TrainLog, TrainLogRow};

use crate::error::{Error, Result};
use crate::nn::{Activation, ConvLayerSpec, TimePadding};

/// Time span of the reference output kernel.
pub const REFERENCE_T: usize = 64;
/// Input channels: real and imaginary parts.
pub const INPUT_CHANNELS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Predictor,
    Classifier,
}

impl Head {
    pub fn activation(self) -> Activation {
        match self {
            Head::Predictor => Activation::Exponential,
            Head::Classifier => Activation::Sigmoid,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Head::Predictor => "predictor",
            Head::Classifier => "classifier",
        }
    }
}

impl std::str::FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "predictor" => Ok(Head::Predictor),
            "classifier" => Ok(Head::Classifier),
            other => Err(Error::config(format!("unknown head {other:?}, expected predictor or classifier"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub layers: Vec<ConvLayerSpec>,
    pub head: Head,
    pub span_d: usize,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        let (first, last) = match (self.layers.first(), self.layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::config("network has no layers")),
        };
        if first.in_channels != INPUT_CHANNELS {
            return Err(Error::config(format!(
                "first layer must take {INPUT_CHANNELS} input channels, got {}",
                first.in_channels
            )));
        }
        for pair in self.layers.windows(2) {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::config("layer channel counts do not chain"));
            }
        }
        for layer in &self.layers {
            layer.validate()?;
        }
        if last.out_channels != self.span_d {
            return Err(Error::config(format!(
                "output layer has {} channels but the horizon is {}",
                last.out_channels, self.span_d
            )));
        }
        if last.activation != self.head.activation() {
            return Err(Error::config(format!(
                "{} head needs a {:?} output activation",
                self.head.as_str(),
                self.head.activation()
            )));
        }
        Ok(())
    }

    /// Total weights plus biases.
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(ConvLayerSpec::param_count).sum()
    }

    /// Time length of each layer's output for an input of `t_len` samples.
    pub fn time_lengths(&self, t_len: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        out.push(t_len);
        let mut t = t_len;
        for layer in &self.layers {
            t = layer.output_time_len(t)?;
            out.push(t);
        }
        Ok(out)
    }
}

fn layer(
    in_channels: usize,
    out_channels: usize,
    kernel: (usize, usize),
    dilation: (usize, usize),
    activation: Activation,
    time_padding: TimePadding,
) -> ConvLayerSpec {
    ConvLayerSpec {
        in_channels,
        out_channels,
        kernel,
        dilation,
        activation,
        time_padding,
    }
}

/// The reference layer stack. Below `REFERENCE_T` input samples the time
/// dilations shrink by `t_len / 64` (minimum 1) and the output kernel spans
/// exactly `t_len`; at `t_len >= 64` this is the reference stack unchanged.
pub fn build_network(head: Head, span_d: usize, t_len: usize) -> Result<NetworkSpec> {
    if span_d == 0 {
        return Err(Error::config("prediction horizon must be at least 1"));
    }
    if t_len == 0 {
        return Err(Error::config("input window must be at least 1"));
    }
    let t_dil = |d: usize| {
        if t_len >= REFERENCE_T {
            d
        } else {
            (d * t_len / REFERENCE_T).max(1)
        }
    };
    let out_kt = t_len.min(REFERENCE_T);
    let (tanh, causal) = (Activation::Tanh, TimePadding::Causal);
    let spec = NetworkSpec {
        layers: vec![
            layer(INPUT_CHANNELS, 2, (3, 10), (1, t_dil(1)), tanh, causal),
            layer(2, 3, (10, 10), (1, t_dil(16)), tanh, causal),
            layer(3, 3, (10, 10), (10, t_dil(1)), tanh, causal),
            layer(3, 2, (10, 3), (1, t_dil(64)), tanh, causal),
            layer(2, span_d, (1, out_kt), (1, 1), head.activation(), TimePadding::Valid),
        ],
        head,
        span_d,
    };
    spec.validate()?;
    Ok(spec)
}

fn require_reference_window(t_len: usize) -> Result<()> {
    if t_len < REFERENCE_T {
        return Err(Error::config(format!(
            "the reference network needs at least {REFERENCE_T} input snapshots, got {t_len}"
        )));
    }
    Ok(())
}

/// The five-layer magnitude predictor; requires `t_len >= 64`.
pub fn build_predictor(span_d: usize, t_len: usize) -> Result<NetworkSpec> {
    require_reference_window(t_len)?;
    build_network(Head::Predictor, span_d, t_len)
}

/// The deep-fade classifier: predictor layers with a sigmoid output.
pub fn build_classifier(span_d: usize, t_len: usize) -> Result<NetworkSpec> {
    require_reference_window(t_len)?;
    build_network(Head::Classifier, span_d, t_len)
}
