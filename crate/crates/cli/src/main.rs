//! `sibow`: run the bag-of-features / weighted-SVM pipeline from a TOML config.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sibow::codebook::Codebook;
use sibow::pipeline::{
    self, check_codebook, eval_records, extract_descriptors, featurize_sets, predict_features,
    predictions_from_csv, predictions_to_csv, DatasetManifest, ManifestEntry, Pipeline, PipelineConfig, Stage,
};
use sibow::pooling::FeatureSet;
use sibow::wsvm::MulticlassModel;
use sibow::{Error, ErrorKind, Result};

#[derive(Parser, Debug)]
#[command(name = "sibow", version, about = "SIFT bag-of-features image classification with weighted-SVM probabilities")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Pipeline configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the split, k-means and tuning seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract or import descriptors for every manifest image.
    Extract,
    /// Build the visual codebook from training descriptors.
    Codebook,
    /// Encode and pool train/test features.
    Encode,
    /// Select lambda and gamma by held-out EGKL.
    Tune,
    /// Fit the final multiclass model.
    Train,
    /// Score features or images with a trained model.
    Predict(PredictArgs),
    /// Compute metrics for test predictions.
    Evaluate(EvaluateArgs),
    /// Run every stage.
    Pipeline {
        /// Repeat tuning and training `eval.repeats` times and report mean and SE.
        #[arg(long)]
        repeated: bool,
    },
    /// Write a seeded synthetic texture dataset with a matching config.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model artifact; defaults to `<out>/model.sbwm`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// SBWF feature file to score.
    #[arg(long, conflicts_with_all = ["images", "manifest"])]
    features: Option<PathBuf>,
    /// PGM images to score (requires the codebook).
    #[arg(long, num_args = 1..)]
    images: Vec<PathBuf>,
    /// Manifest of images to score (class column ignored).
    #[arg(long, conflicts_with = "images")]
    manifest: Option<PathBuf>,
    /// Codebook artifact for image input; defaults to `<out>/codebook.sbwc`.
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Predictions CSV; when omitted the pipeline runs through evaluation.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    per_class: usize,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.apply_seed(s);
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run_stages(cfg: PipelineConfig, out: &Path, last: Stage) -> Result<()> {
    let mut p = Pipeline::new(cfg, out)?;
    let art = p.run_until(last)?;
    for l in &p.log {
        eprintln!("{:<9} {}", l.stage, if l.reused { "reused" } else { "done" });
    }
    if let Some(t) = &art.tuned {
        println!("lambda={} gamma={}", t.lambda, t.gamma);
    }
    if let Some(r) = &art.report {
        print_report(r);
    }
    Ok(())
}

fn print_report(r: &sibow::metrics::EvalReport) {
    println!("n={} k={}", r.n, r.k);
    println!("te1={:.4}", r.te1);
    if let Some(te2) = r.te2 {
        println!("te2={te2:.4}");
    }
    println!("precision={:.4} recall={:.4} f1={:.4}", r.precision, r.recall, r.f1);
    match r.auc {
        Some(a) => println!("auc={a:.4}"),
        None => println!("auc=undefined"),
    }
    println!("ece={:.4}", r.ece);
}

fn predict(cfg: PipelineConfig, out: &Path, args: &PredictArgs) -> Result<()> {
    let model_path = args.model.clone().unwrap_or_else(|| out.join(pipeline::MODEL_FILE));
    let (model, _) = MulticlassModel::from_bytes(&read(&model_path)?)?;
    let features = if let Some(f) = &args.features {
        let (fs, meta) = FeatureSet::from_bytes(&read(f)?)?;
        check_codebook(&model, &meta)?;
        fs
    } else {
        let entries: Vec<ManifestEntry> = if let Some(m) = &args.manifest {
            let text = String::from_utf8_lossy(&read(m)?).into_owned();
            let base = m.parent().unwrap_or(Path::new("."));
            DatasetManifest::parse(&text)?
                .into_iter()
                .map(|mut e| {
                    if e.path.is_relative() {
                        e.path = base.join(&e.path);
                    }
                    e
                })
                .collect()
        } else if !args.images.is_empty() {
            args.images
                .iter()
                .map(|p| ManifestEntry {
                    image_id: p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
                    path: p.clone(),
                    class: String::new(),
                })
                .collect()
        } else {
            let (fs, meta) = FeatureSet::from_bytes(&read(&out.join(pipeline::FEATURES_TEST_FILE))?)?;
            check_codebook(&model, &meta)?;
            return emit_predictions(&model, &fs, args);
        };
        let cb_path = args.codebook.clone().unwrap_or_else(|| out.join(pipeline::CODEBOOK_FILE));
        let cb_bytes = read(&cb_path)?;
        let hash = sibow::artifact::sha256_hex(&cb_bytes);
        if !model.codebook_hash.is_empty() && model.codebook_hash != hash {
            return Err(Error::Incompatible(format!("{} is not the model's codebook", cb_path.display())));
        }
        let (codebook, _): (Codebook, _) = Codebook::from_bytes(&cb_bytes)?;
        let sets = extract_descriptors(&cfg, &entries)?;
        featurize_sets(&cfg, &codebook, &sets, &vec![None; sets.len()])?
    };
    emit_predictions(&model, &features, args)
}

fn emit_predictions(model: &MulticlassModel, features: &FeatureSet, args: &PredictArgs) -> Result<()> {
    let csv = predictions_to_csv(&predict_features(model, features)?);
    match &args.output {
        Some(p) => write(p, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn evaluate(cfg: PipelineConfig, out: &Path, args: &EvaluateArgs) -> Result<()> {
    let Some(pred_path) = &args.predictions else {
        return run_stages(cfg, out, Stage::Evaluate);
    };
    let text = String::from_utf8_lossy(&read(pred_path)?).into_owned();
    let preds = predictions_from_csv(&text)?;
    let manifest = DatasetManifest::load(&cfg.data.manifest, cfg.data.classes.clone())?;
    let records = eval_records(&preds, &manifest)?;
    let report = sibow::metrics::evaluate(&records, cfg.eval.ece_bins)?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    write(&out.join(pipeline::REPORT_FILE), report.to_json()?.as_bytes())?;
    write(&out.join(pipeline::RELIABILITY_FILE), report.reliability.to_csv().as_bytes())?;
    write(
        &out.join(pipeline::CONFUSION_FILE),
        pipeline::confusion_to_csv(&report.confusion, &manifest.classes).as_bytes(),
    )?;
    print_report(&report);
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let manifest = pipeline::write_synthetic_dataset(&args.dir, args.per_class, args.size, args.data_seed)?;
    let mut cfg = PipelineConfig::default();
    cfg.data.manifest = PathBuf::from("manifest.csv");
    cfg.data.standard_size = args.size.max(16);
    cfg.codebook.size = 16;
    write(&args.dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    println!("{}", manifest.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Synth(a) = &cli.command {
        return synth(a);
    }
    let cfg = load_config(&cli.common)?;
    let out = cli.common.out.clone();
    pipeline::with_workers(cfg.workers, move || match &cli.command {
        Command::Extract => run_stages(cfg, &out, Stage::Extract),
        Command::Codebook => run_stages(cfg, &out, Stage::Codebook),
        Command::Encode => run_stages(cfg, &out, Stage::Encode),
        Command::Tune => run_stages(cfg, &out, Stage::Tune),
        Command::Train => run_stages(cfg, &out, Stage::Train),
        Command::Predict(a) => predict(cfg, &out, a),
        Command::Evaluate(a) => evaluate(cfg, &out, a),
        Command::Pipeline { repeated: false } => run_stages(cfg, &out, Stage::Evaluate),
        Command::Pipeline { repeated: true } => {
            let mut p = Pipeline::new(cfg, &out)?;
            let rep = p.run_repeated()?;
            println!("repeats={}", rep.repeats);
            println!("te1={:.4} (se {:.4})", rep.te1.mean, rep.te1.se);
            println!("ece={:.4} (se {:.4})", rep.ece.mean, rep.ece.se);
            Ok(())
        }
        Command::Synth(_) => unreachable!(),
    })?
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}
