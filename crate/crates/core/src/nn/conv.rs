//! Dilated 2-D convolution over (frequency, time).
//!
//! For output position `(f, t)`:
//!
//! ```text
//! z[co][f][t] = b[co] + sum_{ci, vf, vt} w[co][ci][vf][vt] * x[ci][f + off - vf*df][t + shift - vt*dt]
//! ```
//!
//! with out-of-range input reads treated as zero. `off = ((kf - 1) * df) / 2`
//! centres the frequency support, so frequency length is preserved. Causal
//! layers use `shift = 0` (only present and past samples, output length
//! `T`); valid layers use `shift = (kt - 1) * dt` and shrink time to
//! `T - (kt - 1) * dt`.

use rand::Rng;

use super::Activation;
use crate::error::{Error, Result};
use crate::tensor::Tensor4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimePadding {
    Causal,
    Valid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvLayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// (frequency, time) taps.
    pub kernel: (usize, usize),
    /// (frequency, time) tap spacing.
    pub dilation: (usize, usize),
    pub activation: Activation,
    pub time_padding: TimePadding,
}

impl ConvLayerSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.in_channels,
            self.out_channels,
            self.kernel.0,
            self.kernel.1,
            self.dilation.0,
            self.dilation.1,
        ];
        if counts.contains(&0) {
            return Err(Error::config(format!("layer spec has a zero count: {self:?}")));
        }
        Ok(())
    }

    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel.0 * self.kernel.1
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }

    pub fn freq_span(&self) -> usize {
        (self.kernel.0 - 1) * self.dilation.0
    }

    pub fn time_span(&self) -> usize {
        (self.kernel.1 - 1) * self.dilation.1
    }

    fn freq_offset(&self) -> isize {
        (self.freq_span() / 2) as isize
    }

    fn time_shift(&self) -> isize {
        match self.time_padding {
            TimePadding::Causal => 0,
            TimePadding::Valid => self.time_span() as isize,
        }
    }

    pub fn output_time_len(&self, t_in: usize) -> Result<usize> {
        match self.time_padding {
            TimePadding::Causal => Ok(t_in),
            TimePadding::Valid => t_in
                .checked_sub(self.time_span())
                .filter(|&t| t > 0)
                .ok_or_else(|| {
                    Error::shape(format!(
                        "valid time kernel spans {} samples but the input has only {t_in}",
                        self.time_span() + 1
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub spec: ConvLayerSpec,
    /// (out, in, k_f, k_t), row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(spec: ConvLayerSpec) -> Result<Self> {
        spec.validate()?;
        Ok(ConvLayer {
            weights: vec![0.0; spec.weight_count()],
            bias: vec![0.0; spec.out_channels],
            spec,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(spec: ConvLayerSpec, rng: &mut R) -> Result<Self> {
        let mut layer = ConvLayer::zeros(spec)?;
        let taps = (layer.spec.kernel.0 * layer.spec.kernel.1) as f64;
        let fan_in = layer.spec.in_channels as f64 * taps;
        let fan_out = layer.spec.out_channels as f64 * taps;
        let limit = (6.0 / (fan_in + fan_out)).sqrt();
        for w in &mut layer.weights {
            *w = rng.gen_range(-limit..limit);
        }
        Ok(layer)
    }

    pub fn from_parts(spec: ConvLayerSpec, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if weights.len() != spec.weight_count() || bias.len() != spec.out_channels {
            return Err(Error::shape(format!(
                "layer needs {} weights and {} biases, got {} and {}",
                spec.weight_count(),
                spec.out_channels,
                weights.len(),
                bias.len()
            )));
        }
        Ok(ConvLayer { spec, weights, bias })
    }

    #[inline]
    pub fn weight_index(&self, co: usize, ci: usize, vf: usize, vt: usize) -> usize {
        let (kf, kt) = self.spec.kernel;
        ((co * self.spec.in_channels + ci) * kf + vf) * kt + vt
    }
}

/// Output positions `lo..hi` (along one axis of length `out_len`) whose
/// source index `pos + delta` lies inside `0..in_len`.
#[inline]
fn valid_range(delta: isize, in_len: usize, out_len: usize) -> (usize, usize) {
    let lo = (-delta).max(0) as usize;
    let hi = (in_len as isize - delta).clamp(0, out_len as isize) as usize;
    (lo.min(hi), hi)
}

/// Per time tap: `(t_lo, t_hi, source offset)` of the output samples whose
/// input read falls inside the window.
fn time_taps(spec: &ConvLayerSpec, t_in: usize, t_out: usize) -> Vec<(usize, usize, isize)> {
    let shift = spec.time_shift();
    (0..spec.kernel.1)
        .map(|vt| {
            let delta = shift - (vt * spec.dilation.1) as isize;
            let (lo, hi) = valid_range(delta, t_in, t_out);
            (lo, hi, delta)
        })
        .collect()
}

/// Forward pass of one planar example. `input` is `[C_in][F][T_in]`,
/// `out` receives the activated `[C_out][F][T_out]`.
///
/// Every output sample accumulates its terms in (input channel, frequency
/// tap, time tap) order regardless of the loop schedule.
pub(crate) fn forward_planar(layer: &ConvLayer, input: &[f64], f_len: usize, t_in: usize, out: &mut [f64]) {
    let spec = &layer.spec;
    let t_out = spec.output_time_len(t_in).expect("time length checked by caller");
    let (kf, kt) = spec.kernel;
    let df = spec.dilation.0 as isize;
    let off = spec.freq_offset();
    let in_plane = f_len * t_in;
    let out_plane = f_len * t_out;
    let taps = time_taps(spec, t_in, t_out);
    // Short outputs (a window-wide kernel) are cheaper tap-inner.
    let tap_inner = t_out < kt;

    for co in 0..spec.out_channels {
        let dst_plane = &mut out[co * out_plane..(co + 1) * out_plane];
        dst_plane.fill(layer.bias[co]);
        for f in 0..f_len {
            let dst = &mut dst_plane[f * t_out..(f + 1) * t_out];
            for ci in 0..spec.in_channels {
                for vf in 0..kf {
                    let sf = f as isize + off - vf as isize * df;
                    if sf < 0 || sf >= f_len as isize {
                        continue;
                    }
                    let row = ci * in_plane + sf as usize * t_in;
                    let src = &input[row..row + t_in];
                    let w0 = layer.weight_index(co, ci, vf, 0);
                    let w = &layer.weights[w0..w0 + kt];
                    if tap_inner {
                        for (t, o) in dst.iter_mut().enumerate() {
                            let mut acc = *o;
                            for (&(lo, hi, delta), &wv) in taps.iter().zip(w) {
                                if t >= lo && t < hi {
                                    acc += wv * src[(t as isize + delta) as usize];
                                }
                            }
                            *o = acc;
                        }
                    } else {
                        for (&(lo, hi, delta), &wv) in taps.iter().zip(w) {
                            if lo == hi {
                                continue;
                            }
                            let s0 = (lo as isize + delta) as usize;
                            for (o, &x) in dst[lo..hi].iter_mut().zip(&src[s0..s0 + hi - lo]) {
                                *o += wv * x;
                            }
                        }
                    }
                }
            }
        }
        for v in dst_plane.iter_mut() {
            *v = spec.activation.apply(*v);
        }
    }
}

/// Backward pass of one planar example. `output` is the activated forward
/// output, `grad_out` the loss gradient with respect to it. Parameter
/// gradients are accumulated; `grad_in`, when given, is overwritten.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_planar(
    layer: &ConvLayer,
    input: &[f64],
    output: &[f64],
    grad_out: &[f64],
    f_len: usize,
    t_in: usize,
    grad_in: Option<&mut [f64]>,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    let spec = &layer.spec;
    let t_out = spec.output_time_len(t_in).expect("time length checked by caller");
    let (kf, kt) = spec.kernel;
    let df = spec.dilation.0 as isize;
    let off = spec.freq_offset();
    let in_plane = f_len * t_in;
    let out_plane = f_len * t_out;
    let taps = time_taps(spec, t_in, t_out);
    let tap_inner = t_out < kt;

    scratch.clear();
    scratch.extend(
        output
            .iter()
            .zip(grad_out)
            .map(|(&y, &g)| g * spec.activation.derivative_from_output(y)),
    );
    let gz = &scratch[..];
    let mut grad_in = grad_in;
    if let Some(gi) = grad_in.as_deref_mut() {
        gi.fill(0.0);
    }

    for co in 0..spec.out_channels {
        let gz_plane = &gz[co * out_plane..(co + 1) * out_plane];
        grad_b[co] += gz_plane.iter().sum::<f64>();
        for f in 0..f_len {
            let g = &gz_plane[f * t_out..(f + 1) * t_out];
            for ci in 0..spec.in_channels {
                for vf in 0..kf {
                    let sf = f as isize + off - vf as isize * df;
                    if sf < 0 || sf >= f_len as isize {
                        continue;
                    }
                    let row = ci * in_plane + sf as usize * t_in;
                    let src = &input[row..row + t_in];
                    let w0 = layer.weight_index(co, ci, vf, 0);
                    let w = &layer.weights[w0..w0 + kt];
                    let gw = &mut grad_w[w0..w0 + kt];
                    let mut gi = grad_in.as_deref_mut().map(|gi| &mut gi[row..row + t_in]);
                    if tap_inner {
                        for (t, &gv) in g.iter().enumerate() {
                            for ((&(lo, hi, delta), &wv), gwv) in taps.iter().zip(w).zip(gw.iter_mut()) {
                                if t >= lo && t < hi {
                                    let s = (t as isize + delta) as usize;
                                    *gwv += gv * src[s];
                                    if let Some(gi) = gi.as_deref_mut() {
                                        gi[s] += wv * gv;
                                    }
                                }
                            }
                        }
                    } else {
                        for ((&(lo, hi, delta), &wv), gwv) in taps.iter().zip(w).zip(gw.iter_mut()) {
                            if lo == hi {
                                continue;
                            }
                            let s0 = (lo as isize + delta) as usize;
                            let n = hi - lo;
                            let gs = &g[lo..hi];
                            *gwv += gs.iter().zip(&src[s0..s0 + n]).map(|(a, b)| a * b).sum::<f64>();
                            if let Some(gi) = gi.as_deref_mut() {
                                for (o, &gv) in gi[s0..s0 + n].iter_mut().zip(gs) {
                                    *o += wv * gv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `[F][T][C]` example slice to `[C][F][T]`.
pub fn to_planar(example: &[f64], f_len: usize, t_len: usize, c_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; example.len()];
    to_planar_into(example, f_len, t_len, c_len, &mut out);
    out
}

pub(crate) fn to_planar_into(example: &[f64], f_len: usize, t_len: usize, c_len: usize, out: &mut [f64]) {
    for f in 0..f_len {
        for t in 0..t_len {
            for c in 0..c_len {
                out[(c * f_len + f) * t_len + t] = example[(f * t_len + t) * c_len + c];
            }
        }
    }
}

/// `[C][F][T]` planar buffer back to an `[F][T][C]` example slice.
pub fn from_planar(planar: &[f64], f_len: usize, t_len: usize, c_len: usize, out: &mut [f64]) {
    for c in 0..c_len {
        for f in 0..f_len {
            for t in 0..t_len {
                out[(f * t_len + t) * c_len + c] = planar[(c * f_len + f) * t_len + t];
            }
        }
    }
}

fn check_input(input_dims: [usize; 4], layer: &ConvLayer) -> Result<usize> {
    layer.spec.validate()?;
    if input_dims[3] != layer.spec.in_channels {
        return Err(Error::shape(format!(
            "layer expects {} input channels, got {}",
            layer.spec.in_channels, input_dims[3]
        )));
    }
    layer.spec.output_time_len(input_dims[2])
}

/// Applies one layer to a (B, F, T, C_in) tensor.
pub fn conv2d_forward(input: &Tensor4, layer: &ConvLayer) -> Result<Tensor4> {
    let [nb, nf, nt, nc] = input.dims();
    let t_out = check_input(input.dims(), layer)?;
    let c_out = layer.spec.out_channels;
    let mut output = Tensor4::zeros([nb, nf, t_out, c_out]);
    let mut planar_out = vec![0.0; c_out * nf * t_out];
    for b in 0..nb {
        let planar_in = to_planar(input.example(b), nf, nt, nc);
        forward_planar(layer, &planar_in, nf, nt, &mut planar_out);
        from_planar(&planar_out, nf, t_out, c_out, output.example_mut(b));
    }
    Ok(output)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub grad_input: Tensor4,
    pub grad_weights: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

/// Gradients of a loss with respect to the layer input and parameters,
/// given the loss gradient `grad_out` at the layer output. Batch entries
/// are accumulated in index order.
pub fn conv2d_backward(grad_out: &Tensor4, cached_input: &Tensor4, layer: &ConvLayer) -> Result<ConvGrads> {
    let [nb, nf, nt, nc] = cached_input.dims();
    let t_out = check_input(cached_input.dims(), layer)?;
    let c_out = layer.spec.out_channels;
    if grad_out.dims() != [nb, nf, t_out, c_out] {
        return Err(Error::shape(format!(
            "grad_out has dims {:?}, expected {:?}",
            grad_out.dims(),
            [nb, nf, t_out, c_out]
        )));
    }
    let mut grads = ConvGrads {
        grad_input: Tensor4::zeros(cached_input.dims()),
        grad_weights: vec![0.0; layer.spec.weight_count()],
        grad_bias: vec![0.0; c_out],
    };
    let mut out = vec![0.0; c_out * nf * t_out];
    let mut gi = vec![0.0; nc * nf * nt];
    let mut scratch = Vec::new();
    for b in 0..nb {
        let x = to_planar(cached_input.example(b), nf, nt, nc);
        forward_planar(layer, &x, nf, nt, &mut out);
        let g = to_planar(grad_out.example(b), nf, t_out, c_out);
        backward_planar(
            layer,
            &x,
            &out,
            &g,
            nf,
            nt,
            Some(&mut gi),
            &mut grads.grad_weights,
            &mut grads.grad_bias,
            &mut scratch,
        );
        from_planar(&gi, nf, nt, nc, grads.grad_input.example_mut(b));
    }
    Ok(grads)
}
