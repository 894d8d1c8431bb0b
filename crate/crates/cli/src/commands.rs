use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::ValueEnum;
use p2ad::data::{
    farneback_flow, make_dataset, read_flo, read_pfm, read_pgm, write_flo, write_pfm, Dataset, FlowField, Image,
    LabeledFrame,
};
use p2ad::denoise::ThresholdSpec;
use p2ad::eval::{attributable_savings_pct, emit_csv, emit_roc_points, sweep, NetworkKind, Scorer, SweepConfig};
use p2ad::network::{AnyModel, InferenceResult};
use p2ad::tensor::{FixedWeight, OpCounter, Pow2Weight};
use p2ad::train::{train_run, TrainRun};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::ManifestBuilder;
use crate::{BenchArgs, CliResult, DataContext, EvalArgs, FlowArgs, GenDataArgs, TrainArgs, UsageContext};

pub const MODEL_FILE: &str = "model.p2ad";
pub const REPORT_FILE: &str = "report.csv";
pub const BENCH_FILE: &str = "bench.json";
pub const MAGNITUDE_FILE: &str = "magnitude.pfm";
pub const FLOW_FILE: &str = "flow.flo";

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).data()
}

fn load_dataset(dir: &Path) -> CliResult<Dataset> {
    if !dir.is_dir() {
        return Err(crate::Failure::Data(anyhow!("dataset directory {} does not exist", dir.display())));
    }
    Dataset::load(dir).with_context(|| format!("loading dataset {}", dir.display())).data()
}

fn load_model(path: &Path) -> CliResult<AnyModel> {
    AnyModel::load(path).with_context(|| format!("loading model {}", path.display())).data()
}

pub fn gen_data(mut config: RunConfig, args: GenDataArgs) -> CliResult<()> {
    let d = &mut config.data;
    d.normal = args.normal.unwrap_or(d.normal);
    d.anomalous = args.anomalous.unwrap_or(d.anomalous);
    d.train_fraction = args.train_fraction.unwrap_or(d.train_fraction);
    d.synth.validate().usage()?;
    if !(0.0..=1.0).contains(&d.train_fraction) {
        return Err(crate::Failure::Usage(anyhow!("train_fraction must lie in [0, 1], got {}", d.train_fraction)));
    }

    let d = &config.data;
    let mut manifest = ManifestBuilder::new("gen-data", config.seed, d).data()?;
    let ds = make_dataset(&d.synth, d.normal, d.anomalous, config.seed, d.train_fraction)?;
    create_dir(&args.out)?;
    ds.save(&args.out)?;
    let hash = ds.content_hash();
    manifest.output(&args.out.join(p2ad::data::MANIFEST_FILE)).data()?;
    manifest.result("content_hash", &hash).data()?;
    manifest.result("train_frames", ds.train.len()).data()?;
    manifest.result("test_frames", ds.test.len()).data()?;
    manifest.write(&args.out).data()?;
    println!("wrote {} frames ({} train, {} test) to {}", ds.len(), ds.train.len(), ds.test.len(), args.out.display());
    println!("content hash {hash}");
    Ok(())
}

#[derive(Serialize)]
struct TrainManifestConfig<'a> {
    network: NetworkKind,
    model: &'a p2ad::network::ModelSpec,
    train: &'a p2ad::train::TrainConfig,
}

pub fn train(mut config: RunConfig, args: TrainArgs) -> CliResult<()> {
    let t = &mut config.train;
    t.seed = config.seed;
    t.epochs_max = args.epochs.unwrap_or(t.epochs_max);
    t.batch_size = args.batch_size.unwrap_or(t.batch_size);
    t.learning_rate = args.learning_rate.unwrap_or(t.learning_rate);
    t.loss_stop = args.loss_stop.unwrap_or(t.loss_stop);
    if let Some(q) = args.theta_quantile {
        t.theta_quantile = q;
    }
    if args.regular {
        config.network = NetworkKind::Regular;
    }
    config.train.validate().usage()?;
    config.model.layout().usage()?;

    let ds = load_dataset(&args.data)?;
    let mut manifest = ManifestBuilder::new(
        "train",
        config.seed,
        &TrainManifestConfig { network: config.network, model: &config.model, train: &config.train },
    )
    .data()?;
    manifest.input(&args.data);
    manifest.result("dataset_hash", ds.content_hash()).data()?;

    let started = Instant::now();
    let (model, losses) = match config.network {
        NetworkKind::Pow2 => {
            let run: TrainRun<Pow2Weight> = train_run(&ds.train, &config.train, &config.model)?;
            (AnyModel::Pow2(run.model), run.epoch_losses)
        }
        NetworkKind::Regular => {
            let run: TrainRun<FixedWeight> = train_run(&ds.train, &config.train, &config.model)?;
            (AnyModel::Regular(run.model), run.epoch_losses)
        }
    };
    let elapsed = started.elapsed();
    create_dir(&args.out)?;
    let path = args.out.join(MODEL_FILE);
    model.save(&path)?;
    let final_loss = losses.last().copied();
    manifest.output(&path).data()?;
    manifest.result("network", config.network).data()?;
    manifest.result("epochs", losses.len()).data()?;
    manifest.result("final_loss", final_loss).data()?;
    manifest.result("epoch_losses", &losses).data()?;
    manifest.result("converged", final_loss.is_some_and(|l| l < config.train.loss_stop)).data()?;
    manifest.result("thresholds", model.spec().thresholds.clone()).data()?;
    manifest.write(&args.out).data()?;
    println!(
        "trained {} model for {} epochs in {:.1?}, final BCE {}",
        config.network,
        losses.len(),
        elapsed,
        final_loss.map_or("n/a".to_owned(), |l| format!("{l:.5}"))
    );
    println!("wrote {}", path.display());
    Ok(())
}

pub fn eval(mut config: RunConfig, args: EvalArgs) -> CliResult<()> {
    if let Some(t) = args.thresholds {
        config.eval.thresholds = t;
    }
    if let Some(n) = args.noise {
        config.eval.noise = n;
    }
    let configs = config.eval.sweep_configs().usage()?;
    if config.eval.noise.is_empty() {
        return Err(crate::Failure::Usage(anyhow!("at least one noise level is required")));
    }
    config.eval.noise_params.validate().usage()?;

    let ds = load_dataset(&args.data)?;
    let models = args.model.iter().map(|p| load_model(p)).collect::<CliResult<Vec<_>>>()?;
    let mut manifest = ManifestBuilder::new("eval", config.seed, &config.eval).data()?;
    for p in &args.model {
        manifest.input(p);
    }
    manifest.input(&args.data);

    let scorers: Vec<&dyn Scorer> = models.iter().map(|m| m as &dyn Scorer).collect();
    let report = sweep(&scorers, &ds.test, &configs, &config.eval.noise, &config.eval.noise_params, config.seed)?;
    create_dir(&args.out)?;
    let csv_path = args.out.join(REPORT_FILE);
    let csv = emit_csv(&report.rows)?;
    p2ad::data::write_atomic(&csv_path, csv.as_bytes())?;
    manifest.output(&csv_path).data()?;
    for p in emit_roc_points(&report, &args.out.join("roc"))? {
        manifest.output(&p).data()?;
    }
    manifest.result("rows", report.rows.len()).data()?;
    manifest.write(&args.out).data()?;
    print!("{csv}");
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Test,
    All,
}

#[derive(Debug, Serialize)]
pub struct BenchSummary {
    pub network: NetworkKind,
    pub frames: usize,
    pub thresholds: ThresholdSpec,
    pub dense_total: u64,
    pub shift_adds_done: u64,
    pub accumulates_skipped: u64,
    /// Mean over frames of skipped / dense, in percent.
    pub savings_pct: f64,
    /// Same accounting as the eval report's `savings_pct`.
    pub denoising_savings_pct: f64,
    /// Mean per-layer savings, in percent, head last.
    pub layer_savings_pct: Vec<f64>,
    pub frames_per_sec: f64,
}

fn mean_pct(results: &[InferenceResult], f: impl Fn(&InferenceResult) -> OpCounter) -> f64 {
    100.0 * results.iter().map(|r| f(r).savings_fraction()).sum::<f64>() / results.len() as f64
}

pub fn bench(config: RunConfig, args: BenchArgs) -> CliResult<()> {
    let model = load_model(&args.model)?;
    let thresholds = match &args.thresholds {
        Some(s) => SweepConfig::parse(s).and_then(|c| c.to_spec()).usage()?,
        None => model.spec().thresholds.clone(),
    };
    let ds = load_dataset(&args.data)?;
    let frames: Vec<&LabeledFrame> = match args.split {
        SplitChoice::Train => ds.train.iter().collect(),
        SplitChoice::Test => ds.test.iter().collect(),
        SplitChoice::All => ds.train.iter().chain(&ds.test).collect(),
    };
    if frames.is_empty() {
        return Err(crate::Failure::Data(anyhow!("no frames in the selected split")));
    }

    let started = Instant::now();
    let results = frames.iter().map(|f| model.infer_with(&f.frame, &thresholds)).collect::<Result<Vec<_>, _>>()?;
    let secs = started.elapsed().as_secs_f64();
    let baseline =
        frames.iter().map(|f| model.infer_with(&f.frame, &ThresholdSpec::disabled())).collect::<Result<Vec<_>, _>>()?;

    let total: OpCounter = results.iter().map(|r| r.counter).sum();
    let layers = results[0].layer_counters.len();
    let summary = BenchSummary {
        network: model.kind(),
        frames: frames.len(),
        thresholds,
        dense_total: total.dense_total,
        shift_adds_done: total.shift_adds_done,
        accumulates_skipped: total.accumulates_skipped,
        savings_pct: mean_pct(&results, |r| r.counter),
        denoising_savings_pct: attributable_savings_pct(&results, &baseline)?,
        layer_savings_pct: (0..layers).map(|l| mean_pct(&results, |r| r.layer_counters[l])).collect(),
        frames_per_sec: frames.len() as f64 / secs.max(f64::MIN_POSITIVE),
    };

    println!("network              {}", summary.network);
    println!("frames               {}", summary.frames);
    println!("dense_total          {}", summary.dense_total);
    println!("shift_adds_done      {}", summary.shift_adds_done);
    println!("accumulates_skipped  {}", summary.accumulates_skipped);
    println!("savings_pct          {:.4}", summary.savings_pct);
    println!("denoising_savings    {:.4}", summary.denoising_savings_pct);
    for (l, s) in summary.layer_savings_pct.iter().enumerate() {
        println!("layer {:<2} savings_pct {s:.4}", l + 1);
    }
    println!("frames_per_sec       {:.1}", summary.frames_per_sec);

    if let Some(out) = &args.out {
        create_dir(out)?;
        let mut manifest = ManifestBuilder::new("bench", config.seed, &summary.thresholds).data()?;
        manifest.input(&args.model);
        manifest.input(&args.data);
        let path = out.join(BENCH_FILE);
        let mut text = serde_json::to_string_pretty(&summary).data()?;
        text.push('\n');
        p2ad::data::write_atomic(&path, text.as_bytes())?;
        manifest.output(&path).data()?;
        manifest.result("savings_pct", summary.savings_pct).data()?;
        manifest.result("denoising_savings_pct", summary.denoising_savings_pct).data()?;
        manifest.write(out).data()?;
    }
    Ok(())
}

fn read_image(path: &Path) -> CliResult<Image<f32>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "pgm" => Ok(read_pgm(path)?),
        "pfm" => Ok(read_pfm(path)?),
        _ => Err(crate::Failure::Usage(anyhow!("{}: expected a .pgm or .pfm frame", path.display()))),
    }
}

pub fn flow(mut config: RunConfig, args: FlowArgs) -> CliResult<()> {
    config.flow.window = args.window.unwrap_or(config.flow.window);
    config.flow.iterations = args.iterations.unwrap_or(config.flow.iterations);
    config.flow.validate().usage()?;
    let mut manifest = ManifestBuilder::new("flow", config.seed, &config.flow).data()?;

    let (field, estimated): (FlowField<f32>, bool) = match (&args.a, &args.b, &args.flo) {
        (Some(a), Some(b), None) => {
            manifest.input(a);
            manifest.input(b);
            let (fa, fb) = (read_image(a)?.cast::<f64>(), read_image(b)?.cast::<f64>());
            (farneback_flow(&fa, &fb, &config.flow)?.cast(), true)
        }
        (None, None, Some(flo)) => {
            manifest.input(flo);
            (read_flo(flo)?, false)
        }
        _ => return Err(crate::Failure::Usage(anyhow!("give either --a and --b, or --flo"))),
    };
    create_dir(&args.out)?;
    let magnitude = field.magnitude();
    let mag_path = args.out.join(MAGNITUDE_FILE);
    write_pfm(&mag_path, &magnitude)?;
    manifest.output(&mag_path).data()?;
    let mut outputs: Vec<PathBuf> = vec![mag_path];
    if args.write_flo && estimated {
        let flo_path = args.out.join(FLOW_FILE);
        write_flo(&field, &flo_path)?;
        manifest.output(&flo_path).data()?;
        outputs.push(flo_path);
    }
    let mut sorted: Vec<f32> = magnitude.data().to_vec();
    sorted.sort_by(f32::total_cmp);
    let median = sorted[sorted.len() / 2];
    manifest.result("median_magnitude", median).data()?;
    manifest.result("max_magnitude", magnitude.max()).data()?;
    manifest.write(&args.out).data()?;
    println!("{}x{} flow, median magnitude {median:.4}, max {:.4}", field.width(), field.height(), magnitude.max());
    for p in outputs {
        println!("wrote {}", p.display());
    }
    Ok(())
}
