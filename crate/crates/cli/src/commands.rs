use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use chanpred::dataset::{load_dataset, load_series, save_dataset, save_series, split_train_test};
use chanpred::eval::{fresh_channel_check, per_step_mse, roc_csv, roc_per_step, BinSelection};
use chanpred::models::{build_network, fit_with, Head, Network, REFERENCE_T};
use chanpred::report::fmt_f64;
use chanpred::sim::{run_simulation, ScenarioConfig};
use chanpred::stats::{band_power_series, bin_magnitude_series, deepest_fade, normalized_covariance};

use crate::config::{PipelineConfig, ThresholdSection};
use crate::error::{CliError, CliResult};
use crate::manifest::{record, FileRecord, RunManifest};
use crate::{
    usage, BuildDatasetArgs, Cli, Command, CovarianceArgs, EvalMode, EvaluateArgs, GlobalArgs, Partition,
    SimulateArgs, TrainArgs,
};

struct Ctx<'a> {
    global: &'a GlobalArgs,
    cfg: PipelineConfig,
    started: Instant,
}

impl Ctx<'_> {
    /// Relative outputs land under `--out-dir` when one is set.
    fn output(&self, path: &Path) -> CliResult<PathBuf> {
        let full = match &self.global.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        };
        if let Some(parent) = full.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        Ok(full)
    }

    fn inputs(&self, files: &[(&str, &Path)]) -> CliResult<Vec<FileRecord>> {
        let mut out = Vec::new();
        if let Some(cfg) = &self.global.config {
            out.push(record("config", cfg)?);
        }
        for (role, path) in files {
            out.push(record(role, path)?);
        }
        Ok(out)
    }

    fn finish(
        &self,
        command: &str,
        seeds: Vec<u64>,
        inputs: Vec<FileRecord>,
        artifacts: Vec<FileRecord>,
        summary: Value,
    ) -> CliResult<()> {
        let primary = artifacts.first().map(|a| a.path.clone()).expect("a command writes an artifact");
        let manifest = RunManifest {
            tool: "chanpred",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: json!({ "pipeline": self.cfg, "summary": summary }),
            seeds,
            inputs,
            artifacts,
            wall_clock_ms: self.started.elapsed().as_millis(),
        };
        let path = manifest.write(&primary)?;
        println!("manifest {}", path.display());
        Ok(())
    }
}

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    let started = Instant::now();
    let g = &cli.global;
    let cfg = PipelineConfig::load(&g.profile, g.config.as_deref(), &g.overrides)?;
    let mut ctx = Ctx { global: g, cfg, started };
    match &cli.command {
        Command::Simulate(a) => simulate(&mut ctx, a),
        Command::BuildDataset(a) => build_dataset(&mut ctx, a),
        Command::Train(a) => train(&mut ctx, a),
        Command::Evaluate(a) => evaluate(&mut ctx, a),
        Command::Covariance(a) => covariance(&mut ctx, a),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn simulate(ctx: &mut Ctx, a: &SimulateArgs) -> CliResult<()> {
    if let Some(seed) = a.seed {
        ctx.cfg.scenario.seed = seed;
    }
    let steps = a.steps.unwrap_or_else(|| ctx.cfg.split().required_snapshots());
    if steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    let scenario = &ctx.cfg.scenario;
    let default_out = PathBuf::from(format!("series_seed{}.cfrd", scenario.seed));
    let out = ctx.output(a.out.as_deref().unwrap_or(&default_out))?;
    let series = run_simulation(scenario, steps)?;
    save_series(&series, &out)?;

    let band = series.snapshots[0].band_hz;
    println!(
        "simulated {} snapshots x {} bins, band {} .. {} Hz, seed {}",
        series.len(),
        series.bins(),
        fmt_f64(band.0),
        fmt_f64(band.1),
        scenario.seed
    );
    let fade = deepest_fade(&series);
    if let Some(f) = fade {
        println!(
            "deepest fade {} dB below the snapshot mean (snapshot {}, bin {})",
            fmt_f64(f.depth_db),
            f.snapshot,
            f.bin
        );
    }
    let summary = json!({
        "snapshots": series.len(),
        "bins": series.bins(),
        "deepest_fade_db": fade.map(|f| f.depth_db),
    });
    let inputs = ctx.inputs(&[])?;
    ctx.finish("simulate", vec![scenario.seed], inputs, vec![record("series", &out)?], summary)
}

fn build_dataset(ctx: &mut Ctx, a: &BuildDatasetArgs) -> CliResult<()> {
    let d = &mut ctx.cfg.dataset;
    d.t_len = a.t_len.unwrap_or(d.t_len);
    d.span_d = a.span_d.unwrap_or(d.span_d);
    d.n_train_per_run = a.n_train.unwrap_or(d.n_train_per_run);
    d.n_test_per_run = a.n_test.unwrap_or(d.n_test_per_run);
    if let Some(q) = a.threshold_quantile {
        d.threshold = ThresholdSection::Percentile(q);
    }
    if let Some(v) = a.threshold_abs {
        d.threshold = ThresholdSection::Absolute(v);
    }
    let runs = a.runs.iter().map(load_series).collect::<Result<Vec<_>, _>>()?;
    let split = split_train_test(&runs, &ctx.cfg.split())?;
    let out = ctx.output(&a.out)?;
    save_dataset(&split, &out)?;

    println!(
        "dataset: {} train / {} test examples, inputs {:?}, labels {:?}",
        split.x_train.batch(),
        split.x_test.batch(),
        &split.x_train.dims()[1..],
        &split.y_pred_train.dims()[1..]
    );
    println!(
        "scale {}, fade threshold {}, training fade rate {}",
        fmt_f64(split.scale),
        fmt_f64(split.threshold),
        fmt_f64(split.train_positive_rate())
    );
    let summary = json!({
        "train_examples": split.x_train.batch(),
        "test_examples": split.x_test.batch(),
        "scale": split.scale,
        "threshold": split.threshold,
    });
    let run_inputs: Vec<(&str, &Path)> = a.runs.iter().map(|p| ("series", p.as_path())).collect();
    let inputs = ctx.inputs(&run_inputs)?;
    ctx.finish("build-dataset", vec![], inputs, vec![record("dataset", &out)?], summary)
}

fn train(ctx: &mut Ctx, a: &TrainArgs) -> CliResult<()> {
    let t = &mut ctx.cfg.train;
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.lr = a.lr.unwrap_or(t.lr);
    t.seed = a.seed.unwrap_or(t.seed);
    if a.no_shuffle {
        t.shuffle = false;
    }
    let head: Head = a.head.into();
    let split = load_dataset(&a.dataset)?;
    let spec = build_network(head, split.span_d, split.t_len)?;
    if split.t_len < REFERENCE_T {
        println!(
            "note: {}-snapshot windows use the time-scaled layer stack (reference needs {REFERENCE_T})",
            split.t_len
        );
    }
    let train_cfg = ctx.cfg.train_config();
    let net = Network::init(spec, train_cfg.seed)?;
    println!(
        "training {} with {} parameters on {} examples: {} epochs, batch {}, lr {}",
        head.as_str(),
        net.parameter_count(),
        split.x_train.batch(),
        train_cfg.epochs,
        train_cfg.batch_size,
        train_cfg.lr
    );
    let (net, log) = fit_with(net, &split, &train_cfg, |row| {
        println!(
            "epoch {:>3}  train {}  test {}",
            row.epoch,
            fmt_f64(row.train_loss),
            fmt_f64(row.test_loss)
        );
    })?;

    let weights = ctx.output(a.out.as_deref().unwrap_or(Path::new(&format!("{}.cnnw", head.as_str()))))?;
    let log_path = ctx.output(a.log.as_deref().unwrap_or(Path::new(&format!("{}_log.csv", head.as_str()))))?;
    net.save(&weights)?;
    write_text(&log_path, &log.to_csv())?;
    let last = log.last().expect("at least one epoch");
    let summary = json!({
        "head": head.as_str(),
        "parameters": net.parameter_count(),
        "final_train_loss": last.train_loss,
        "final_test_loss": last.test_loss,
    });
    let inputs = ctx.inputs(&[("dataset", &a.dataset)])?;
    let artifacts = vec![record("weights", &weights)?, record("train_log", &log_path)?];
    ctx.finish("train", vec![train_cfg.seed], inputs, artifacts, summary)
}

fn evaluate(ctx: &mut Ctx, a: &EvaluateArgs) -> CliResult<()> {
    let net = Network::load(&a.weights)?;
    let split = load_dataset(&a.dataset)?;
    if net.span_d() != split.span_d {
        return Err(usage(format!(
            "network predicts {} steps but the dataset has {}",
            net.span_d(),
            split.span_d
        )));
    }
    let need = |head: Head| {
        if net.head() == head {
            Ok(())
        } else {
            Err(usage(format!("this mode needs {} weights", head.as_str())))
        }
    };
    let (x, y_pred, y_cls) = match a.partition {
        Partition::Train => (&split.x_train, &split.y_pred_train, &split.y_cls_train),
        Partition::Test => (&split.x_test, &split.y_pred_test, &split.y_cls_test),
    };
    let mode = match a.mode {
        EvalMode::Mse => "mse",
        EvalMode::Roc => "roc",
        EvalMode::Fresh => "fresh",
    };
    let out = ctx.output(a.out.as_deref().unwrap_or(Path::new(&format!("{mode}.csv"))))?;
    let mut seeds = vec![];

    let summary = match a.mode {
        EvalMode::Mse => {
            need(Head::Predictor)?;
            let report = per_step_mse(&net.predict(x)?, y_pred)?;
            write_text(&out, &report.to_csv())?;
            for r in &report.rows {
                println!("step {:>2}  mse {}", r.step, fmt_f64(r.mse));
            }
            println!("overall {}", fmt_f64(report.overall));
            json!({ "overall_mse": report.overall, "mse": report.rows.iter().map(|r| r.mse).collect::<Vec<_>>() })
        }
        EvalMode::Roc => {
            need(Head::Classifier)?;
            let bins = match (a.pool, a.bin) {
                (true, _) => BinSelection::Pooled,
                (false, Some(k)) => BinSelection::Single(k),
                (false, None) => BinSelection::center(split.bins()),
            };
            let curves = roc_per_step(&net.predict(x)?, y_cls, bins)?;
            write_text(&out, &roc_csv(&curves))?;
            for c in &curves {
                println!("step {:>2}  auc {}", c.step_ahead, fmt_f64(c.auc));
            }
            json!({
                "bin": curves[0].band_index,
                "auc": curves.iter().map(|c| c.auc).collect::<Vec<_>>(),
            })
        }
        EvalMode::Fresh => {
            need(Head::Predictor)?;
            let seed = a.seed.unwrap_or(ctx.cfg.eval.fresh_seed);
            if ctx.cfg.eval.run_seeds.contains(&seed) {
                return Err(usage(format!(
                    "fresh-channel seed {seed} was used for training runs {:?}",
                    ctx.cfg.eval.run_seeds
                )));
            }
            let examples = a.examples.unwrap_or(ctx.cfg.eval.fresh_examples);
            if examples == 0 {
                return Err(usage("--examples must be at least 1"));
            }
            let scenario = ScenarioConfig { seed, ..ctx.cfg.scenario.clone() };
            let series = run_simulation(&scenario, examples + split.t_len + split.span_d - 1)?;
            if series.bins() != split.bins() {
                return Err(usage(format!(
                    "scenario yields {} bins but the dataset has {}",
                    series.bins(),
                    split.bins()
                )));
            }
            let report = fresh_channel_check(&net, &series, split.scale, split.t_len, Some(examples))?;
            write_text(&out, &report.to_csv())?;
            for r in &report.rows {
                println!("step {:>2}  mse {}", r.step, fmt_f64(r.mse));
            }
            println!("max/min across steps {}", fmt_f64(report.max_min_ratio()));
            seeds.push(seed);
            json!({
                "examples": report.examples,
                "mse": report.rows.iter().map(|r| r.mse).collect::<Vec<_>>(),
                "max_min_ratio": report.max_min_ratio(),
            })
        }
    };
    let inputs = ctx.inputs(&[("weights", &a.weights), ("dataset", &a.dataset)])?;
    ctx.finish(&format!("evaluate {mode}"), seeds, inputs, vec![record(mode, &out)?], summary)
}

fn covariance(ctx: &mut Ctx, a: &CovarianceArgs) -> CliResult<()> {
    let trace = |path: &Path| -> CliResult<Vec<f64>> {
        let series = load_series(path)?;
        Ok(match a.bin {
            Some(bin) => bin_magnitude_series(&series, bin)?,
            None => band_power_series(&series),
        })
    };
    let x = trace(&a.run_a)?;
    let profile = match &a.run_b {
        None => normalized_covariance(&x, &x, a.max_lag)?,
        Some(b) => {
            let y = trace(b)?;
            let n = x.len().min(y.len());
            normalized_covariance(&x[..n], &y[..n], a.max_lag)?
        }
    };
    let out = ctx.output(&a.out)?;
    write_text(&out, &profile.to_csv())?;
    println!("{} covariance over lags 0..={}", profile.kind.as_str(), a.max_lag);
    println!("R(0) {}", fmt_f64(profile.values[0]));
    println!("max |R| {}", fmt_f64(profile.max_abs()));
    if let Some(lag) = profile.first_lag_below(0.5) {
        println!("first lag below 0.5: {lag}");
    }
    let summary = json!({
        "kind": profile.kind.as_str(),
        "r0": profile.values[0],
        "max_abs": profile.max_abs(),
        "first_lag_below_half": profile.first_lag_below(0.5),
    });
    let mut files: Vec<(&str, &Path)> = vec![("series", &a.run_a)];
    if let Some(b) = &a.run_b {
        files.push(("series", b));
    }
    let inputs = ctx.inputs(&files)?;
    ctx.finish("covariance", vec![], inputs, vec![record("covariance", &out)?], summary)
}
