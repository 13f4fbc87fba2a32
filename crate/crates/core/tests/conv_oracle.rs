//! Convolution engine against a direct evaluation of the defining sum, plus
//! finite-difference gradient checks of every layer kind.

use chanpred::nn::{
    activation_backward, activation_forward, bce_loss, conv2d_backward, conv2d_forward, mse_loss,
    Activation, ConvLayer, ConvLayerSpec, TimePadding,
};
use chanpred::Tensor4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ACTIVATIONS: [Activation; 4] = [
    Activation::Tanh,
    Activation::Sigmoid,
    Activation::Exponential,
    Activation::Identity,
];

fn oracle(x: &Tensor4, layer: &ConvLayer) -> Tensor4 {
    let [nb, nf, nt, nc] = x.dims();
    let s = &layer.spec;
    let (kf, kt) = s.kernel;
    let (df, dt) = s.dilation;
    let off = ((kf - 1) * df) as isize / 2;
    let (shift, t_out) = match s.time_padding {
        TimePadding::Causal => (0, nt),
        TimePadding::Valid => ((kt - 1) * dt, nt - (kt - 1) * dt),
    };
    let mut y = Tensor4::zeros([nb, nf, t_out, s.out_channels]);
    for b in 0..nb {
        for co in 0..s.out_channels {
            for f in 0..nf {
                for t in 0..t_out {
                    let mut z = layer.bias[co];
                    for ci in 0..nc {
                        for vf in 0..kf {
                            for vt in 0..kt {
                                let fi = f as isize + off - (vf * df) as isize;
                                let ti = (t + shift) as isize - (vt * dt) as isize;
                                if fi < 0 || fi >= nf as isize || ti < 0 || ti >= nt as isize {
                                    continue;
                                }
                                z += layer.weights[layer.weight_index(co, ci, vf, vt)]
                                    * x.get(b, fi as usize, ti as usize, ci);
                            }
                        }
                    }
                    y.set(b, f, t, co, s.activation.apply(z));
                }
            }
        }
    }
    y
}

fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 4]) -> Tensor4 {
    let n = dims.iter().product();
    Tensor4::from_vec(dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_layer(rng: &mut ChaCha8Rng, spec: ConvLayerSpec) -> ConvLayer {
    let w = (0..spec.weight_count()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let b = (0..spec.out_channels).map(|_| rng.gen_range(-0.5..0.5)).collect();
    ConvLayer::from_parts(spec, w, b).unwrap()
}

fn random_case(rng: &mut ChaCha8Rng) -> (Tensor4, ConvLayer) {
    let padding = if rng.gen_bool(0.5) {
        TimePadding::Causal
    } else {
        TimePadding::Valid
    };
    let kernel = (rng.gen_range(1..=4), rng.gen_range(1..=4));
    let dilation = (rng.gen_range(1..=3), rng.gen_range(1..=3));
    let min_t = match padding {
        TimePadding::Causal => 1,
        TimePadding::Valid => (kernel.1 - 1) * dilation.1 + 1,
    };
    let dims = [
        rng.gen_range(1..=3),
        rng.gen_range(1..=9),
        rng.gen_range(min_t..=min_t + 8),
        rng.gen_range(1..=3),
    ];
    let spec = ConvLayerSpec {
        in_channels: dims[3],
        out_channels: rng.gen_range(1..=4),
        kernel,
        dilation,
        activation: ACTIVATIONS[rng.gen_range(0..ACTIVATIONS.len())],
        time_padding: padding,
    };
    (random_tensor(rng, dims), random_layer(rng, spec))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn forward_matches_direct_sum_on_random_layers() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let (x, layer) = random_case(&mut rng);
        let y = conv2d_forward(&x, &layer).unwrap();
        let want = oracle(&x, &layer);
        assert_eq!(y.dims(), want.dims(), "case {case}");
        assert!(max_abs_diff(y.data(), want.data()) < 1e-12, "case {case}");
    }
}

#[test]
fn three_channel_layer_on_small_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = random_tensor(&mut rng, [1, 4, 5, 2]);
    for padding in [TimePadding::Causal, TimePadding::Valid] {
        let spec = ConvLayerSpec {
            in_channels: 2,
            out_channels: 3,
            kernel: (3, 2),
            dilation: (1, 2),
            activation: Activation::Identity,
            time_padding: padding,
        };
        let layer = random_layer(&mut rng, spec);
        let y = conv2d_forward(&x, &layer).unwrap();
        let t_out = if padding == TimePadding::Causal { 5 } else { 3 };
        assert_eq!(y.dims(), [1, 4, t_out, 3]);
        assert!(max_abs_diff(y.data(), oracle(&x, &layer).data()) < 1e-12);
    }
}

/// Central difference of `f` at `v[i]`.
fn numeric(v: &mut [f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = v[i];
    v[i] = orig + h;
    let up = f(v);
    v[i] = orig - h;
    let down = f(v);
    v[i] = orig;
    (up - down) / (2.0 * h)
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

const H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;

#[test]
fn layer_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for activation in ACTIVATIONS {
        for padding in [TimePadding::Causal, TimePadding::Valid] {
            let spec = ConvLayerSpec {
                in_channels: 2,
                out_channels: 3,
                kernel: (3, 3),
                dilation: (2, 2),
                activation,
                time_padding: padding,
            };
            let layer = random_layer(&mut rng, spec.clone());
            let x = random_tensor(&mut rng, [2, 5, 7, 2]);
            let y = conv2d_forward(&x, &layer).unwrap();
            // Loss = sum(r * y) for a fixed random r, so dL/dy = r.
            let r = random_tensor(&mut rng, y.dims());
            let loss = |x: &Tensor4, layer: &ConvLayer| -> f64 {
                let y = conv2d_forward(x, layer).unwrap();
                y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
            };
            let grads = conv2d_backward(&r, &x, &layer).unwrap();
            let ctx = format!("{activation:?} {padding:?}");

            let mut xv = x.data().to_vec();
            for i in 0..xv.len() {
                let n = numeric(&mut xv, i, H, |v| {
                    loss(&Tensor4::from_vec(x.dims(), v.to_vec()).unwrap(), &layer)
                });
                assert!(rel_err(grads.grad_input.data()[i], n) < GRAD_TOL, "{ctx} input {i}");
            }
            let mut wv = layer.weights.clone();
            for i in 0..wv.len() {
                let n = numeric(&mut wv, i, H, |v| {
                    let l = ConvLayer::from_parts(spec.clone(), v.to_vec(), layer.bias.clone());
                    loss(&x, &l.unwrap())
                });
                assert!(rel_err(grads.grad_weights[i], n) < GRAD_TOL, "{ctx} weight {i}");
            }
            let mut bv = layer.bias.clone();
            for i in 0..bv.len() {
                let n = numeric(&mut bv, i, H, |v| {
                    let l = ConvLayer::from_parts(spec.clone(), layer.weights.clone(), v.to_vec());
                    loss(&x, &l.unwrap())
                });
                assert!(rel_err(grads.grad_bias[i], n) < GRAD_TOL, "{ctx} bias {i}");
            }
        }
    }
}

#[test]
fn activation_derivatives_match_finite_differences() {
    let xs: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.15).collect();
    let ones = vec![1.0; xs.len()];
    for kind in ACTIVATIONS {
        let analytic = activation_backward(kind, &xs, &ones);
        for (i, &x) in xs.iter().enumerate() {
            let mut v = [x];
            let n = numeric(&mut v, 0, H, |v| activation_forward(kind, v)[0]);
            assert!((analytic[i] - n).abs() < 1e-6, "{kind:?} at {x}");
        }
    }
}

#[test]
fn loss_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let target: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..2.0)).collect();
    let mut pred: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..2.0)).collect();
    let (_, g) = mse_loss(&pred, &target).unwrap();
    for i in 0..pred.len() {
        let n = numeric(&mut pred, i, H, |p| mse_loss(p, &target).unwrap().0);
        assert!(rel_err(g[i], n) < GRAD_TOL, "mse {i}");
    }

    let labels: Vec<f64> = (0..12).map(|i| (i % 3 == 0) as u8 as f64).collect();
    let mut prob: Vec<f64> = (0..12).map(|_| rng.gen_range(0.05..0.95)).collect();
    let (_, g) = bce_loss(&prob, &labels).unwrap();
    for i in 0..prob.len() {
        let n = numeric(&mut prob, i, H, |p| bce_loss(p, &labels).unwrap().0);
        assert!(rel_err(g[i], n) < GRAD_TOL, "bce {i}");
    }
}

#[test]
fn causal_output_ignores_future_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for dilation in [1, 2, 4] {
        let spec = ConvLayerSpec {
            in_channels: 2,
            out_channels: 3,
            kernel: (3, 4),
            dilation: (1, dilation),
            activation: Activation::Tanh,
            time_padding: TimePadding::Causal,
        };
        let layer = random_layer(&mut rng, spec);
        let x = random_tensor(&mut rng, [1, 6, 12, 2]);
        let y = conv2d_forward(&x, &layer).unwrap();
        for t0 in 0..12 {
            let mut x2 = x.clone();
            for f in 0..6 {
                for t in t0..12 {
                    for c in 0..2 {
                        x2.set(0, f, t, c, rng.gen_range(-5.0..5.0));
                    }
                }
            }
            let y2 = conv2d_forward(&x2, &layer).unwrap();
            for f in 0..6 {
                for t in 0..t0 {
                    for c in 0..3 {
                        assert_eq!(y.get(0, f, t, c).to_bits(), y2.get(0, f, t, c).to_bits());
                    }
                }
            }
        }
    }
}
