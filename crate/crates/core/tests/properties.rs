//! Property tests for the invariants shared across modules.

use chanpred::dataset::{read_dataset, read_series, write_dataset, write_series, DatasetSplit};
use chanpred::eval::{per_step_mse, roc_curve};
use chanpred::models::{build_network, Head, Network};
use chanpred::nn::{
    conv2d_forward, read_weights, write_weights, Activation, ConvLayer, ConvLayerSpec, TimePadding,
};
use chanpred::sim::{CfrSeries, CfrSnapshot};
use chanpred::stats::normalized_covariance;
use chanpred::{Complex64, Tensor4};
use proptest::prelude::*;

fn values(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, n)
}

fn tensor(dims: [usize; 4]) -> impl Strategy<Value = Tensor4> {
    let n: usize = dims.iter().product();
    prop::collection::vec(-2.0..2.0f64, n).prop_map(move |v| Tensor4::from_vec(dims, v).unwrap())
}

fn labels(dims: [usize; 4]) -> impl Strategy<Value = Tensor4> {
    let n: usize = dims.iter().product();
    prop::collection::vec(prop::bool::ANY, n)
        .prop_map(move |v| Tensor4::from_vec(dims, v.into_iter().map(|b| b as u8 as f64).collect()).unwrap())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_is_bounded(x in values(2..80), y in values(2..80)) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        prop_assume!(!is_constant(x) && !is_constant(y));
        for (a, b) in [(x, y), (x, x)] {
            let r = normalized_covariance(a, b, n - 1).unwrap();
            prop_assert_eq!(r.lags.len(), r.values.len());
            prop_assert!(r.values.iter().all(|v| v.abs() <= 1.0 + 1e-9));
        }
    }

    #[test]
    fn autocovariance_is_reversal_symmetric(x in values(2..80)) {
        prop_assume!(!is_constant(&x));
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        let a = normalized_covariance(&x, &x, x.len() - 1).unwrap();
        let b = normalized_covariance(&rev, &rev, x.len() - 1).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            prop_assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn auc_invariant_under_increasing_transform(
        pairs in prop::collection::vec((0u32..40, prop::bool::ANY), 2..120),
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let base = roc_curve(&scores, &labels).unwrap().auc;
        let affine: Vec<f64> = scores.iter().map(|s| 3.0 * s - 7.0).collect();
        let exp: Vec<f64> = scores.iter().map(|s| (s / 8.0).exp()).collect();
        prop_assert_eq!(roc_curve(&affine, &labels).unwrap().auc, base);
        prop_assert_eq!(roc_curve(&exp, &labels).unwrap().auc, base);
    }

    #[test]
    fn roc_is_monotone_between_fixed_endpoints(
        pairs in prop::collection::vec((0.0..1.0f64, prop::bool::ANY), 2..120),
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let roc = roc_curve(&scores, &labels).unwrap();
        prop_assert_eq!(roc.points[0], (0.0, 0.0));
        prop_assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
        for w in roc.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        prop_assert!((0.0..=1.0).contains(&roc.auc));
    }

    #[test]
    fn per_step_mse_of_concatenation_is_weighted_mean(
        (p1, y1, p2, y2) in (1usize..5, 1usize..5).prop_flat_map(|(n1, n2)| (
            tensor([n1, 3, 1, 4]), tensor([n1, 3, 1, 4]),
            tensor([n2, 3, 1, 4]), tensor([n2, 3, 1, 4]),
        )),
    ) {
        let (n1, n2) = (p1.batch(), p2.batch());
        let a = per_step_mse(&p1, &y1).unwrap();
        let b = per_step_mse(&p2, &y2).unwrap();
        let all = per_step_mse(
            &Tensor4::concat(&[&p1, &p2]).unwrap(),
            &Tensor4::concat(&[&y1, &y2]).unwrap(),
        ).unwrap();
        prop_assert_eq!(all.examples, n1 + n2);
        let w = |x: f64, y: f64| (n1 as f64 * x + n2 as f64 * y) / (n1 + n2) as f64;
        for ((r, ra), rb) in all.rows.iter().zip(&a.rows).zip(&b.rows) {
            prop_assert!((r.mse - w(ra.mse, rb.mse)).abs() < 1e-12);
        }
        prop_assert!((all.overall - w(a.overall, b.overall)).abs() < 1e-12);
    }

    #[test]
    fn dilated_conv_equals_zero_stuffed_kernel(
        kf in 1usize..4, kt in 1usize..4, df in 1usize..4, dt in 1usize..4,
        causal in prop::bool::ANY,
        w in prop::collection::vec(-1.0..1.0f64, 36),
        x in tensor([1, 7, 12, 2]),
    ) {
        let padding = if causal { TimePadding::Causal } else { TimePadding::Valid };
        let spec = |kernel, dilation| ConvLayerSpec {
            in_channels: 2,
            out_channels: 2,
            kernel,
            dilation,
            activation: Activation::Tanh,
            time_padding: padding,
        };
        let dilated = ConvLayer::from_parts(
            spec((kf, kt), (df, dt)), w[..2 * 2 * kf * kt].to_vec(), vec![0.1, -0.2],
        ).unwrap();
        let (sf, st) = ((kf - 1) * df + 1, (kt - 1) * dt + 1);
        let mut stuffed = ConvLayer::zeros(spec((sf, st), (1, 1))).unwrap();
        stuffed.bias = dilated.bias.clone();
        for co in 0..2 {
            for ci in 0..2 {
                for vf in 0..kf {
                    for vt in 0..kt {
                        let i = stuffed.weight_index(co, ci, vf * df, vt * dt);
                        stuffed.weights[i] = dilated.weights[dilated.weight_index(co, ci, vf, vt)];
                    }
                }
            }
        }
        let a = conv2d_forward(&x, &dilated).unwrap();
        let b = conv2d_forward(&x, &stuffed).unwrap();
        prop_assert_eq!(a.dims(), b.dims());
        prop_assert!(a.data().iter().zip(b.data()).all(|(u, v)| u == v));
    }

    #[test]
    fn predictions_are_batch_independent(x in tensor([3, 4, 8, 2]), seed in 0u64..1000) {
        let net = Network::init(build_network(Head::Predictor, 3, 8).unwrap(), seed).unwrap();
        let all = net.predict(&x).unwrap();
        prop_assert!(all.data().iter().all(|&v| v > 0.0));
        for b in 0..3 {
            let one = net.predict(&x.gather(&[b])).unwrap();
            prop_assert_eq!(bits(one.data()), bits(all.example(b)));
        }
        let rev = net.predict(&x.gather(&[2, 1, 0])).unwrap();
        prop_assert_eq!(bits(rev.example(0)), bits(all.example(2)));
    }

    #[test]
    fn classifier_outputs_are_probabilities(x in tensor([2, 4, 8, 2]), seed in 0u64..1000) {
        let net = Network::init(build_network(Head::Classifier, 3, 8).unwrap(), seed).unwrap();
        let y = net.predict(&x).unwrap();
        prop_assert!(y.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn weight_files_round_trip(
        layers in prop::collection::vec((1usize..4, 1usize..4, 1usize..4, 1usize..4, 1usize..3, 0usize..4, prop::bool::ANY), 1..4),
        fill in -1e6..1e6f64,
    ) {
        let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Exponential, Activation::Identity];
        let built: Vec<ConvLayer> = layers.iter().enumerate().map(|(i, &(ci, co, kf, kt, d, a, causal))| {
            let spec = ConvLayerSpec {
                in_channels: ci,
                out_channels: co,
                kernel: (kf, kt),
                dilation: (d, d + 1),
                activation: acts[a],
                time_padding: if causal { TimePadding::Causal } else { TimePadding::Valid },
            };
            let w = (0..spec.weight_count()).map(|k| fill / (k + i + 1) as f64).collect();
            let b = (0..co).map(|k| -fill * k as f64).collect();
            ConvLayer::from_parts(spec, w, b).unwrap()
        }).collect();
        let mut buf = Vec::new();
        write_weights(&mut buf, &built).unwrap();
        let back = read_weights(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), built.len());
        for (a, b) in back.iter().zip(&built) {
            prop_assert_eq!(&a.spec, &b.spec);
            prop_assert_eq!(bits(&a.weights), bits(&b.weights));
            prop_assert_eq!(bits(&a.bias), bits(&b.bias));
        }
    }

    #[test]
    fn datasets_round_trip(
        x_train in tensor([3, 4, 5, 2]), x_test in tensor([2, 4, 5, 2]),
        y_train in tensor([3, 4, 1, 2]), y_test in tensor([2, 4, 1, 2]),
        c_train in labels([3, 4, 1, 2]), c_test in labels([2, 4, 1, 2]),
        scale in 1e-3..1e6f64, threshold in 0.0..3.0f64,
    ) {
        let split = DatasetSplit {
            x_train, x_test,
            y_pred_train: y_train, y_pred_test: y_test,
            y_cls_train: c_train, y_cls_test: c_test,
            scale, threshold, t_len: 5, span_d: 2,
        };
        let mut buf = Vec::new();
        write_dataset(&mut buf, &split).unwrap();
        let back = read_dataset(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back, split);
    }

    #[test]
    fn series_round_trip(
        raw in prop::collection::vec(prop::collection::vec((-1e-3..1e-3f64, -1e-3..1e-3f64), 6), 1..10),
        first in 0usize..100, fingerprint in any::<u64>(),
    ) {
        let series = CfrSeries {
            snapshots: raw.iter().enumerate().map(|(j, v)| CfrSnapshot {
                values: v.iter().map(|&(re, im)| Complex64::new(re, im)).collect(),
                t_index: first + j,
                band_hz: (-6.4e6, 6.3e6),
            }).collect(),
            delta_t: 5e-4,
            scenario_fingerprint: fingerprint,
        };
        let mut buf = Vec::new();
        write_series(&mut buf, &series).unwrap();
        prop_assert_eq!(read_series(&mut buf.as_slice()).unwrap(), series);
    }
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

