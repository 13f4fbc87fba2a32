use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Head, Network};
use crate::dataset::DatasetSplit;
use crate::error::{Error, Result};
use crate::nn::{bce_into, mse_into, AdamConfig, AdamState};
use crate::report::fmt_f64;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 30,
            lr: 0.003,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config("batch size and epochs must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,test_loss\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.epoch, fmt_f64(r.train_loss), fmt_f64(r.test_loss)));
        }
        out
    }

    pub fn first(&self) -> Option<&TrainLogRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&TrainLogRow> {
        self.rows.last()
    }
}

fn loss_into(head: Head, pred: &[f64], target: &[f64], norm: usize, grad: &mut [f64]) -> f64 {
    match head {
        Head::Predictor => mse_into(pred, target, norm, grad),
        Head::Classifier => bce_into(pred, target, norm, grad),
    }
}

fn check_pair(net: &Network, x: &Tensor4, y: &Tensor4) -> Result<()> {
    let [nb, nf, _, _] = x.dims();
    let want = [nb, nf, 1, net.span_d()];
    if y.dims() != want {
        return Err(Error::config(format!(
            "labels have dims {:?}, the network produces {want:?}",
            y.dims()
        )));
    }
    Ok(())
}

/// Mean loss of the network's head (MSE or BCE) over a whole labelled set.
pub fn evaluate_loss(net: &Network, x: &Tensor4, y: &Tensor4) -> Result<f64> {
    check_pair(net, x, y)?;
    let nb = x.batch();
    if nb == 0 {
        return Err(Error::config("cannot evaluate on an empty set"));
    }
    let mut ws = net.workspace(x.dims())?;
    let per = y.example_len();
    let mut pred = vec![0.0; per];
    let mut grad = vec![0.0; per];
    let norm = nb * per;
    let mut sum = 0.0;
    for b in 0..nb {
        net.forward_example(&mut ws, x.example(b));
        net.read_output(&ws, &mut pred);
        sum += loss_into(net.head(), &pred, y.example(b), norm, &mut grad);
    }
    let loss = sum / norm as f64;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("{} loss is not finite", net.head().as_str())));
    }
    Ok(loss)
}

/// Mean loss over a labelled set and its gradient with respect to
/// [`Network::parameters`], via the same backward pass as training.
pub fn loss_gradient(net: &Network, x: &Tensor4, y: &Tensor4) -> Result<(f64, Vec<f64>)> {
    check_pair(net, x, y)?;
    let nb = x.batch();
    if nb == 0 {
        return Err(Error::config("cannot differentiate over an empty set"));
    }
    let mut ws = net.workspace(x.dims())?;
    let per = y.example_len();
    let mut pred = vec![0.0; per];
    let mut grad = vec![0.0; per];
    let mut grad_w: Vec<Vec<f64>> = net.layers().iter().map(|l| vec![0.0; l.weights.len()]).collect();
    let mut grad_b: Vec<Vec<f64>> = net.layers().iter().map(|l| vec![0.0; l.bias.len()]).collect();
    let norm = nb * per;
    let mut sum = 0.0;
    for b in 0..nb {
        net.forward_example(&mut ws, x.example(b));
        net.read_output(&ws, &mut pred);
        sum += loss_into(net.head(), &pred, y.example(b), norm, &mut grad);
        net.backward_example(&mut ws, &grad, &mut grad_w, &mut grad_b);
    }
    let flat = grad_w
        .iter()
        .zip(&grad_b)
        .flat_map(|(w, b)| w.iter().chain(b).copied())
        .collect();
    Ok((sum / norm as f64, flat))
}

/// [`fit_with`] without a progress callback.
pub fn fit(net: Network, split: &DatasetSplit, cfg: &TrainConfig) -> Result<(Network, TrainLog)> {
    fit_with(net, split, cfg, |_| {})
}

/// Mini-batch training: MSE against magnitude labels for the predictor, BCE
/// against fade labels for the classifier, one Adam update per batch. The
/// logged training loss is the epoch mean weighted by batch size; the test
/// loss is evaluated on the full test partition after each epoch.
pub fn fit_with(
    mut net: Network,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&TrainLogRow),
) -> Result<(Network, TrainLog)> {
    cfg.validate()?;
    split.validate().map_err(|e| Error::config(e.to_string()))?;
    let (y_train, y_test) = match net.head() {
        Head::Predictor => (&split.y_pred_train, &split.y_pred_test),
        Head::Classifier => (&split.y_cls_train, &split.y_cls_test),
    };
    let x_train = &split.x_train;
    check_pair(&net, x_train, y_train)?;
    check_pair(&net, &split.x_test, y_test)?;
    let n = x_train.batch();
    if n == 0 {
        return Err(Error::config("training partition is empty"));
    }

    let mut ws = net.workspace(x_train.dims())?;
    let per = y_train.example_len();
    let mut pred = vec![0.0; per];
    let mut grad = vec![0.0; per];
    let mut grad_w: Vec<Vec<f64>> = net.layers().iter().map(|l| vec![0.0; l.weights.len()]).collect();
    let mut grad_b: Vec<Vec<f64>> = net.layers().iter().map(|l| vec![0.0; l.bias.len()]).collect();
    let adam_cfg = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let mut adam = AdamState::new(net.parameter_count(), adam_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut weighted = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad_w.iter_mut().chain(grad_b.iter_mut()).for_each(|g| g.fill(0.0));
            let norm = batch.len() * per;
            let mut sum = 0.0;
            for &i in batch {
                net.forward_example(&mut ws, x_train.example(i));
                net.read_output(&ws, &mut pred);
                sum += loss_into(net.head(), &pred, y_train.example(i), norm, &mut grad);
                net.backward_example(&mut ws, &grad, &mut grad_w, &mut grad_b);
            }
            let batch_loss = sum / norm as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "{} training loss diverged in epoch {epoch}",
                    net.head().as_str()
                )));
            }
            weighted += batch_loss * batch.len() as f64;

            let mut params: Vec<&mut [f64]> = net
                .layers_mut()
                .iter_mut()
                .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
                .collect();
            let grads: Vec<&[f64]> = grad_w
                .iter()
                .zip(&grad_b)
                .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
                .collect();
            adam.step(&mut params, &grads)?;
        }
        let row = TrainLogRow {
            epoch,
            train_loss: weighted / n as f64,
            test_loss: evaluate_loss(&net, &split.x_test, y_test)?,
        };
        on_epoch(&row);
        log.rows.push(row);
    }
    Ok((net, log))
}
