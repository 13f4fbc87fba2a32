use chanpred::dataset::split_train_test;
use chanpred::models::{build_predictor, fit, Head, Network, TrainConfig};
use chanpred::nn::{conv2d_backward, conv2d_forward};
use chanpred::profile::Profile;
use chanpred::sim::{run_simulation, ScenarioConfig, Simulator};
use chanpred::Tensor4;
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn ramp(dims: [usize; 4]) -> Tensor4 {
    let n: usize = dims.iter().product();
    Tensor4::from_vec(dims, (0..n).map(|i| ((i % 97) as f64 / 48.5) - 1.0).collect()).unwrap()
}

fn conv_layers(c: &mut Criterion) {
    let net = Network::init(build_predictor(10, 64).unwrap(), 0).unwrap();
    let mut x = ramp([1, 128, 64, 2]);
    for (i, layer) in net.layers().iter().enumerate() {
        let y = conv2d_forward(&x, layer).unwrap();
        c.bench_function(&format!("conv_forward_layer{}", i + 1), |b| {
            b.iter(|| conv2d_forward(black_box(&x), layer).unwrap())
        });
        let g = ramp(y.dims());
        c.bench_function(&format!("conv_backward_layer{}", i + 1), |b| {
            b.iter(|| conv2d_backward(black_box(&g), &x, layer).unwrap())
        });
        x = y;
    }
}

fn network(c: &mut Criterion) {
    let net = Network::init(build_predictor(10, 64).unwrap(), 0).unwrap();
    let x = ramp([8, 128, 64, 2]);
    c.bench_function("predict_reference_batch8", |b| b.iter(|| net.predict(black_box(&x)).unwrap()));

    let p = Profile::desk();
    let runs: Vec<_> = p.run_configs().iter().map(|c| run_simulation(c, p.snapshots_per_run()).unwrap()).collect();
    let split = split_train_test(&runs, &p.split).unwrap();
    let cfg = TrainConfig { epochs: 1, ..p.train.clone() };
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("desk_epoch", |b| {
        b.iter(|| {
            let spec = chanpred::models::build_network(Head::Predictor, p.split.span_d, p.split.t_len).unwrap();
            fit(Network::init(spec, 0).unwrap(), &split, &cfg).unwrap()
        })
    });
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut sim = Simulator::new(&ScenarioConfig::default()).unwrap();
    c.bench_function("simulate_snapshot_reference", |b| b.iter(|| sim.next_snapshot().unwrap()));
}

criterion_group!(benches, conv_layers, network, simulation);
criterion_main!(benches);
