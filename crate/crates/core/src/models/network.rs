use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Head, NetworkSpec};
use crate::error::{Error, Result};
use crate::nn::{self, Activation, ConvLayer};
use crate::tensor::Tensor4;

/// A layer stack with its parameters. Outputs are `(B, F, 1, D)`: when the
/// window is longer than the output kernel, the most recent output time step
/// is the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<ConvLayer>,
}

/// Per-example activation buffers, reused across examples.
pub(crate) struct Workspace {
    pub f_len: usize,
    pub t_lens: Vec<usize>,
    /// `acts[0]` is the planar input, `acts[l + 1]` the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
    pub grad_a: Vec<f64>,
    pub grad_b: Vec<f64>,
    pub scratch: Vec<f64>,
}

impl Network {
    /// Glorot-uniform weights and zero biases from a seeded stream.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layers
            .iter()
            .map(|s| ConvLayer::glorot(s.clone(), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Network { spec, layers })
    }

    /// Rebuilds a network from stored layers; the head follows from the
    /// output activation.
    pub fn from_layers(layers: Vec<ConvLayer>) -> Result<Self> {
        let last = layers.last().ok_or_else(|| Error::config("network has no layers"))?;
        let head = match last.spec.activation {
            Activation::Exponential => Head::Predictor,
            Activation::Sigmoid => Head::Classifier,
            other => return Err(Error::config(format!("no head uses a {other:?} output"))),
        };
        let spec = NetworkSpec {
            layers: layers.iter().map(|l| l.spec.clone()).collect(),
            head,
            span_d: last.spec.out_channels,
        };
        spec.validate()?;
        Ok(Network { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn head(&self) -> Head {
        self.spec.head
    }

    pub fn span_d(&self) -> usize {
        self.spec.span_d
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.spec.parameter_count()
    }

    /// All weights then biases, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        nn::save_weights(&self.layers, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Network::from_layers(nn::load_weights(path)?)
    }

    pub(crate) fn workspace(&self, input_dims: [usize; 4]) -> Result<Workspace> {
        let [_, f_len, t_len, c] = input_dims;
        if c != self.layers[0].spec.in_channels {
            return Err(Error::shape(format!(
                "network expects {} input channels, got {c}",
                self.layers[0].spec.in_channels
            )));
        }
        if f_len == 0 {
            return Err(Error::shape("input has no frequency bins"));
        }
        let t_lens = self.spec.time_lengths(t_len)?;
        let mut acts = vec![vec![0.0; c * f_len * t_len]];
        for (layer, &t) in self.layers.iter().zip(&t_lens[1..]) {
            acts.push(vec![0.0; layer.spec.out_channels * f_len * t]);
        }
        let widest = acts.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Workspace {
            f_len,
            t_lens,
            acts,
            grad_a: vec![0.0; widest],
            grad_b: vec![0.0; widest],
            scratch: Vec::with_capacity(widest),
        })
    }

    /// Forward pass of one `[F][T][C]` example into the workspace.
    pub(crate) fn forward_example(&self, ws: &mut Workspace, example: &[f64]) {
        let (f_len, t0) = (ws.f_len, ws.t_lens[0]);
        nn::to_planar_into(example, f_len, t0, self.layers[0].spec.in_channels, &mut ws.acts[0]);
        for (l, layer) in self.layers.iter().enumerate() {
            let (inputs, outputs) = ws.acts.split_at_mut(l + 1);
            nn::forward_planar(layer, &inputs[l], f_len, ws.t_lens[l], &mut outputs[0]);
        }
    }

    /// Copies the newest output time step of the last forward pass into
    /// `out`, laid out `[F][1][D]`.
    pub(crate) fn read_output(&self, ws: &Workspace, out: &mut [f64]) {
        let t_last = *ws.t_lens.last().unwrap();
        let d_len = self.spec.span_d;
        let last = ws.acts.last().unwrap();
        for d in 0..d_len {
            for f in 0..ws.f_len {
                out[f * d_len + d] = last[(d * ws.f_len + f) * t_last + t_last - 1];
            }
        }
    }

    /// Backpropagates `grad_pred` (laid out like [`Network::read_output`])
    /// through the last forward pass, accumulating parameter gradients.
    pub(crate) fn backward_example(
        &self,
        ws: &mut Workspace,
        grad_pred: &[f64],
        grad_w: &mut [Vec<f64>],
        grad_bias: &mut [Vec<f64>],
    ) {
        let n_layers = self.layers.len();
        let f_len = ws.f_len;
        let d_len = self.spec.span_d;
        let t_last = ws.t_lens[n_layers];
        let top_len = ws.acts[n_layers].len();
        ws.grad_a[..top_len].fill(0.0);
        for d in 0..d_len {
            for f in 0..f_len {
                ws.grad_a[(d * f_len + f) * t_last + t_last - 1] = grad_pred[f * d_len + d];
            }
        }
        for l in (0..n_layers).rev() {
            let in_len = ws.acts[l].len();
            let out_len = ws.acts[l + 1].len();
            let grad_in = if l > 0 { Some(&mut ws.grad_b[..in_len]) } else { None };
            nn::backward_planar(
                &self.layers[l],
                &ws.acts[l],
                &ws.acts[l + 1],
                &ws.grad_a[..out_len],
                f_len,
                ws.t_lens[l],
                grad_in,
                &mut grad_w[l],
                &mut grad_bias[l],
                &mut ws.scratch,
            );
            std::mem::swap(&mut ws.grad_a, &mut ws.grad_b);
        }
    }

    /// Pure forward pass: `(B, F, T, 2)` to `(B, F, 1, D)`.
    pub fn predict(&self, x: &Tensor4) -> Result<Tensor4> {
        let mut ws = self.workspace(x.dims())?;
        let [nb, nf, _, _] = x.dims();
        let mut out = Tensor4::zeros([nb, nf, 1, self.spec.span_d]);
        for b in 0..nb {
            self.forward_example(&mut ws, x.example(b));
            self.read_output(&ws, out.example_mut(b));
        }
        if !out.all_finite() {
            return Err(Error::Numerical("network output is not finite".into()));
        }
        Ok(out)
    }
}
