//! End-to-end orchestration: extract → codebook → encode → tune → train →
//! predict → evaluate, with every stage's output written to an output
//! directory and reused on later runs when its embedded hashes still match.

mod config;
mod manifest;
mod store;

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    CodebookConfig, DataConfig, DescriptorSource, EvalConfig, PipelineConfig, SplitConfig, SvmConfig,
};
pub use manifest::{DatasetManifest, ManifestEntry};
pub use store::{descriptors_from_bytes, descriptors_to_bytes};

use crate::artifact::{sha256_hex, ArtifactMeta};
use crate::codebook::{build_pool, multipass_kmeans, Codebook};
use crate::encoding::encode_image;
use crate::error::{Error, Result};
use crate::imageio::{read_pgm, resize_bilinear, write_pgm};
use crate::metrics::{evaluate, EvalRecord, EvalReport};
use crate::pooling::{featurize, FeatureSet, Source};
use crate::sift::{extract, import_vlfeat, DescriptorSet, VLFEAT_SUFFIX};
use crate::split::Split;
use crate::synthetic::{texture_image, TEXTURE_CLASSES};
use crate::wsvm::{
    classify, default_gamma_grid, fit_multiclass, tune_egkl, KernelKind, KernelSpec, MulticlassModel,
    Rule, SquaredDistances, TuneReport, WsvmParams,
};

pub const DESCRIPTORS_FILE: &str = "descriptors.sbwd";
pub const SPLIT_FILE: &str = "split.json";
pub const CODEBOOK_FILE: &str = "codebook.sbwc";
pub const FEATURES_TRAIN_FILE: &str = "features_train.sbwf";
pub const FEATURES_TEST_FILE: &str = "features_test.sbwf";
pub const TUNE_FILE: &str = "tune.json";
pub const MODEL_FILE: &str = "model.sbwm";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const REPORT_FILE: &str = "report.json";
pub const RELIABILITY_FILE: &str = "reliability.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const REPEATS_FILE: &str = "repeats.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Extract,
    Codebook,
    Encode,
    Tune,
    Train,
    Predict,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Extract => "extract",
            Stage::Codebook => "codebook",
            Stage::Encode => "encode",
            Stage::Tune => "tune",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
        })
    }
}

/// Whether a stage ran or was satisfied from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageLog {
    pub stage: Stage,
    pub reused: bool,
}

/// Tuning result as persisted in `tune.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneArtifact {
    pub meta: ArtifactMeta,
    pub lambda: f64,
    pub gamma: f64,
    /// Absent when both values were fixed in the config.
    pub report: Option<TuneReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Standard error of the mean; 0 for a single run.
    pub se: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

/// Repeated train/tune re-split summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedReport {
    pub repeats: usize,
    pub te1: MetricSummary,
    pub te2: Option<MetricSummary>,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    pub auc: Option<MetricSummary>,
    pub ece: MetricSummary,
    pub runs: Vec<RepeatRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRun {
    pub tune_seed: u64,
    pub lambda: f64,
    pub gamma: f64,
    pub report: EvalReport,
}

impl RepeatedReport {
    pub fn from_runs(runs: Vec<RepeatRun>) -> Self {
        let pick = |f: &dyn Fn(&EvalReport) -> f64| -> MetricSummary {
            MetricSummary::of(&runs.iter().map(|r| f(&r.report)).collect::<Vec<_>>())
        };
        let pick_opt = |f: &dyn Fn(&EvalReport) -> Option<f64>| -> Option<MetricSummary> {
            runs.iter()
                .map(|r| f(&r.report))
                .collect::<Option<Vec<f64>>>()
                .map(|v| MetricSummary::of(&v))
        };
        Self {
            repeats: runs.len(),
            te1: pick(&|r| r.te1),
            te2: pick_opt(&|r| r.te2),
            precision: pick(&|r| r.precision),
            recall: pick(&|r| r.recall),
            f1: pick(&|r| r.f1),
            auc: pick_opt(&|r| r.auc),
            ece: pick(&|r| r.ece),
            runs,
        }
    }
}

/// One scored image.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub image_id: String,
    pub probs: Vec<f64>,
    pub argmax: usize,
    pub maxvote: Option<usize>,
}

/// Scores features with `model` in input order.
pub fn predict_features(model: &MulticlassModel, features: &FeatureSet) -> Result<Vec<Prediction>> {
    features
        .rows
        .par_iter()
        .map(|f| {
            let est = model
                .predict_feature(f)
                .map_err(|e| e.in_stage("predict", f.image_id.clone()))?;
            Ok(Prediction {
                image_id: f.image_id.clone(),
                argmax: classify(&est, Rule::Argmax)?,
                maxvote: match est.table {
                    Some(_) => Some(classify(&est, Rule::MaxVote)?),
                    None => None,
                },
                probs: est.probs,
            })
        })
        .collect()
}

/// CSV with columns `image_id, p_1..p_K, argmax, maxvote`; `maxvote` is
/// empty for schemes without a pairwise table.
pub fn predictions_to_csv(preds: &[Prediction]) -> String {
    let k = preds.first().map_or(0, |p| p.probs.len());
    let mut out = String::from("image_id");
    for j in 1..=k {
        out.push_str(&format!(",p_{j}"));
    }
    out.push_str(",argmax,maxvote\n");
    for p in preds {
        out.push_str(&p.image_id);
        for v in &p.probs {
            out.push_str(&format!(",{v:?}"));
        }
        out.push_str(&format!(",{},", p.argmax));
        if let Some(v) = p.maxvote {
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn predictions_from_csv(text: &str) -> Result<Vec<Prediction>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let width = rdr.headers()?.len();
    if width < 4 {
        return Err(Error::Config("predictions CSV needs image_id, p_1.., argmax, maxvote".into()));
    }
    let bad = |line: usize, tok: &str| Error::BadToken {
        line,
        token: tok.to_string(),
    };
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let probs = (1..width - 2)
            .map(|j| rec[j].trim().parse::<f64>().map_err(|_| bad(line, &rec[j])))
            .collect::<Result<Vec<_>>>()?;
        let argmax = rec[width - 2].trim().parse().map_err(|_| bad(line, &rec[width - 2]))?;
        let mv = rec[width - 1].trim();
        let maxvote = if mv.is_empty() {
            None
        } else {
            Some(mv.parse().map_err(|_| bad(line, mv))?)
        };
        out.push(Prediction {
            image_id: rec[0].to_string(),
            probs,
            argmax,
            maxvote,
        });
    }
    Ok(out)
}

/// Joins predictions with manifest labels by image id.
pub fn eval_records(preds: &[Prediction], manifest: &DatasetManifest) -> Result<Vec<EvalRecord>> {
    let index: std::collections::HashMap<&str, usize> = manifest
        .entries
        .iter()
        .zip(manifest.labels())
        .map(|(e, &l)| (e.image_id.as_str(), l))
        .collect();
    preds
        .iter()
        .map(|p| {
            let &true_label = index
                .get(p.image_id.as_str())
                .ok_or_else(|| Error::Config(format!("prediction for unknown image '{}'", p.image_id)))?;
            Ok(EvalRecord {
                true_label,
                predicted_argmax: p.argmax,
                predicted_maxvote: p.maxvote,
                probs: p.probs.clone(),
            })
        })
        .collect()
}

pub fn confusion_to_csv(confusion: &[Vec<usize>], classes: &[String]) -> String {
    let mut out = String::from("true\\predicted");
    for c in classes {
        out.push_str(&format!(",{c}"));
    }
    out.push('\n');
    for (c, row) in classes.iter().zip(confusion) {
        out.push_str(c);
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

fn hash_json<T: Serialize + ?Sized>(v: &T) -> String {
    sha256_hex(&serde_json::to_vec(v).expect("serializable"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads an artifact when it exists and carries `meta`.
fn cached<T>(path: &Path, meta: &ArtifactMeta, parse: impl Fn(&[u8]) -> Result<(T, ArtifactMeta)>) -> Option<(T, String)> {
    let bytes = std::fs::read(path).ok()?;
    match parse(&bytes) {
        Ok((v, m)) if m == *meta => Some((v, sha256_hex(&bytes))),
        _ => None,
    }
}

/// Runs `f` on a dedicated pool of `workers` threads (0 = available
/// parallelism).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Reads one manifest image as the extractor sees it.
pub fn load_image(entry: &ManifestEntry, data: &DataConfig) -> Result<crate::GrayImage> {
    let img = read_pgm(&read_file(&entry.path)?)?;
    Ok(if data.resize {
        resize_bilinear(&img, data.standard_size, data.standard_size)
    } else {
        img
    })
}

/// Descriptors for each entry, in order.
pub fn extract_descriptors(cfg: &PipelineConfig, entries: &[ManifestEntry]) -> Result<Vec<DescriptorSet>> {
    entries
        .par_iter()
        .map(|e| {
            let set = match cfg.data.descriptor_source {
                DescriptorSource::Builtin => load_image(e, &cfg.data).and_then(|img| extract(&img, &cfg.sift, e.image_id.clone())),
                DescriptorSource::VlfeatImport => {
                    let dir = cfg.data.descriptor_dir.as_deref().unwrap_or(Path::new("."));
                    let path = dir.join(format!("{}{VLFEAT_SUFFIX}", e.image_id));
                    std::fs::read_to_string(&path)
                        .map_err(|err| Error::io(&path, err))
                        .and_then(|t| import_vlfeat(&t, e.image_id.clone()))
                }
            };
            set.map_err(|err| err.in_stage("extract", e.image_id.clone()))
        })
        .collect()
}

/// Encodes and pools descriptor sets into a feature set.
pub fn featurize_sets(
    cfg: &PipelineConfig,
    codebook: &Codebook,
    sets: &[DescriptorSet],
    labels: &[Option<usize>],
) -> Result<FeatureSet> {
    let llc = cfg.llc.clone().unwrap_or_default();
    let rows = sets
        .par_iter()
        .zip(labels)
        .map(|(s, &label)| {
            let codes = encode_image(s, codebook, cfg.encoder, &llc)
                .map_err(|e| e.in_stage("encode", s.image_id.clone()))?;
            Ok(featurize(&codes, cfg.pooling, Source::from(cfg.encoder), s.image_id.clone(), label))
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureSet::new(codebook.size(), cfg.pooling, rows)
}

/// Refuses features whose codebook differs from the model's.
pub fn check_codebook(model: &MulticlassModel, feature_meta: &ArtifactMeta) -> Result<()> {
    if !model.codebook_hash.is_empty() && !feature_meta.upstream.contains(&model.codebook_hash) {
        return Err(Error::Incompatible(format!(
            "features were not encoded with the model's codebook {}",
            &model.codebook_hash[..12.min(model.codebook_hash.len())]
        )));
    }
    Ok(())
}

/// Stage runner over one output directory.
pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub manifest: DatasetManifest,
    pub out: PathBuf,
    pub log: Vec<StageLog>,
    config_hash: String,
    manifest_hash: String,
}

/// Everything produced by a run, with the content hash of each artifact.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub split: Split,
    pub descriptors: Vec<DescriptorSet>,
    pub descriptors_hash: String,
    pub codebook: Option<(Codebook, String)>,
    pub features: Option<(FeatureSet, FeatureSet, String)>,
    pub tuned: Option<TuneArtifact>,
    pub model: Option<(MulticlassModel, String)>,
    pub predictions: Option<Vec<Prediction>>,
    pub report: Option<EvalReport>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, out: impl Into<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        let manifest = DatasetManifest::load(&cfg.data.manifest, cfg.data.classes.clone())?;
        Self::with_manifest(cfg, manifest, out)
    }

    pub fn with_manifest(cfg: PipelineConfig, manifest: DatasetManifest, out: impl Into<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        let out = out.into();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        // paths are excluded so a moved dataset keeps its cache
        let mut hashed = cfg.clone();
        hashed.data.manifest = PathBuf::new();
        hashed.data.descriptor_dir = None;
        hashed.workers = 0;
        let config_hash = hash_json(&hashed);
        let manifest_hash = hash_json(&(
            &manifest.classes,
            manifest.entries.iter().map(|e| (&e.image_id, &e.class)).collect::<Vec<_>>(),
        ));
        Ok(Self {
            cfg,
            manifest,
            out,
            log: Vec::new(),
            config_hash,
            manifest_hash,
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }

    /// Hash of the full config, as embedded in `config.toml`'s neighbors.
    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    fn note(&mut self, stage: Stage, reused: bool) {
        self.log.push(StageLog { stage, reused });
    }

    fn stage_meta<T: Serialize + ?Sized>(section: &T, upstream: Vec<String>) -> ArtifactMeta {
        ArtifactMeta {
            config_hash: hash_json(section),
            upstream,
        }
    }

    fn extract_stage(&mut self) -> Result<(Vec<DescriptorSet>, String)> {
        let d = &self.cfg.data;
        let section = (&d.descriptor_source, d.resize, d.standard_size, &self.cfg.sift);
        let meta = Self::stage_meta(&section, vec![self.manifest_hash.clone()]);
        let path = self.path(DESCRIPTORS_FILE);
        if let Some(hit) = cached(&path, &meta, descriptors_from_bytes) {
            self.note(Stage::Extract, true);
            return Ok(hit);
        }
        let sets = extract_descriptors(&self.cfg, &self.manifest.entries)?;
        let bytes = descriptors_to_bytes(&sets, &meta);
        write_file(&path, &bytes)?;
        self.note(Stage::Extract, false);
        Ok((sets, sha256_hex(&bytes)))
    }

    fn split_stage(&self) -> Result<Split> {
        let s = &self.cfg.split;
        let split = self.manifest.split_indices(s.train_fraction, s.seed, s.stratified)?;
        let ids = |idx: &[usize]| -> Vec<&str> {
            idx.iter().map(|&i| self.manifest.entries[i].image_id.as_str()).collect()
        };
        let json = serde_json::to_string_pretty(&serde_json::json!({
            "train": ids(&split.train),
            "test": ids(&split.test),
        }))?;
        write_file(&self.path(SPLIT_FILE), json.as_bytes())?;
        Ok(split)
    }

    fn codebook_stage(&mut self, sets: &[DescriptorSet], desc_hash: &str, split: &Split) -> Result<(Codebook, String)> {
        let meta = Self::stage_meta(&(&self.cfg.codebook, &self.cfg.split), vec![desc_hash.to_string()]);
        let path = self.path(CODEBOOK_FILE);
        if let Some(hit) = cached(&path, &meta, Codebook::from_bytes) {
            self.note(Stage::Codebook, true);
            return Ok(hit);
        }
        let train: Vec<DescriptorSet> = split.train.iter().map(|&i| sets[i].clone()).collect();
        let cb = build_pool(&train)
            .and_then(|pool| multipass_kmeans(&pool, self.cfg.codebook.size, &self.cfg.codebook.kmeans()))
            .map_err(|e| e.in_stage("codebook", "training descriptor pool"))?;
        let bytes = cb.to_bytes(&meta);
        write_file(&path, &bytes)?;
        write_file(&self.path("codebook.csv"), cb.to_csv().as_bytes())?;
        self.note(Stage::Codebook, false);
        Ok((cb, sha256_hex(&bytes)))
    }

    fn encode_stage(
        &mut self,
        sets: &[DescriptorSet],
        split: &Split,
        desc_hash: &str,
        codebook: &(Codebook, String),
    ) -> Result<(FeatureSet, FeatureSet, String)> {
        let section = (&self.cfg.encoder, &self.cfg.llc, &self.cfg.pooling);
        let meta = Self::stage_meta(&section, vec![desc_hash.to_string(), codebook.1.clone()]);
        let (tr_path, te_path) = (self.path(FEATURES_TRAIN_FILE), self.path(FEATURES_TEST_FILE));
        if let (Some(tr), Some(te)) = (
            cached(&tr_path, &meta, FeatureSet::from_bytes),
            cached(&te_path, &meta, FeatureSet::from_bytes),
        ) {
            self.note(Stage::Encode, true);
            return Ok((tr.0, te.0, tr.1));
        }
        let labels = self.manifest.labels();
        let part = |idx: &[usize]| -> Result<FeatureSet> {
            let s: Vec<DescriptorSet> = idx.iter().map(|&i| sets[i].clone()).collect();
            let l: Vec<Option<usize>> = idx.iter().map(|&i| Some(labels[i])).collect();
            featurize_sets(&self.cfg, &codebook.0, &s, &l)
        };
        let train = part(&split.train)?;
        let test = part(&split.test)?;
        let tr_bytes = train.to_bytes(&meta);
        write_file(&tr_path, &tr_bytes)?;
        write_file(&te_path, &test.to_bytes(&meta))?;
        write_file(&self.path("features_train.csv"), train.to_csv()?.as_bytes())?;
        write_file(&self.path("features_test.csv"), test.to_csv()?.as_bytes())?;
        self.note(Stage::Encode, false);
        Ok((train, test, sha256_hex(&tr_bytes)))
    }

    fn base_params(&self) -> WsvmParams {
        let svm = &self.cfg.svm;
        WsvmParams {
            lambda: svm.lambdas()[0],
            kernel: match svm.kernel {
                KernelKind::Linear => KernelSpec::linear(),
                KernelKind::Rbf => KernelSpec::rbf(svm.gamma.unwrap_or(1.0)),
            },
            grid: svm.grid(),
            estimator: svm.estimator,
            solver: svm.solver,
        }
    }

    /// Selects `(lambda, gamma)`; `tune_seed` drives the train/tune split.
    pub fn tune_params(&self, train: &FeatureSet, tune_seed: u64) -> Result<(f64, f64, Option<TuneReport>)> {
        let svm = &self.cfg.svm;
        let base = self.base_params();
        if !svm.needs_tuning() {
            return Ok((base.lambda, base.kernel.gamma, None));
        }
        let rows: Vec<&[f64]> = train.rows.iter().map(|r| r.values.as_slice()).collect();
        let gammas = match (svm.kernel, svm.gamma, &svm.gamma_grid) {
            (KernelKind::Linear, ..) => vec![0.0],
            (_, Some(g), _) => vec![g],
            (_, None, Some(g)) => g.clone(),
            (_, None, None) => default_gamma_grid(SquaredDistances::new(&rows).median()),
        };
        let report = tune_egkl(
            &rows,
            &train.labels(),
            self.manifest.k(),
            svm.scheme,
            &base,
            &svm.lambdas(),
            &gammas,
            tune_seed,
        )
        .map_err(|e| e.in_stage("tune", "training features"))?;
        Ok((report.lambda, report.gamma, Some(report)))
    }

    fn tune_stage(&mut self, train: &FeatureSet, feat_hash: &str) -> Result<TuneArtifact> {
        let meta = Self::stage_meta(&self.cfg.svm, vec![feat_hash.to_string()]);
        let path = self.path(TUNE_FILE);
        if let Some(t) = std::fs::read(&path)
            .ok()
            .and_then(|b| serde_json::from_slice::<TuneArtifact>(&b).ok())
            .filter(|t| t.meta == meta)
        {
            self.note(Stage::Tune, true);
            return Ok(t);
        }
        let (lambda, gamma, report) = self.tune_params(train, self.cfg.svm.tune_seed)?;
        let t = TuneArtifact { meta, lambda, gamma, report };
        write_file(&path, serde_json::to_string_pretty(&t)?.as_bytes())?;
        self.note(Stage::Tune, false);
        Ok(t)
    }

    /// Fits the final model on all training features.
    pub fn fit_model(&self, train: &FeatureSet, lambda: f64, gamma: f64) -> Result<MulticlassModel> {
        let mut params = self.base_params();
        params.lambda = lambda;
        if params.kernel.kind == KernelKind::Rbf {
            params.kernel = KernelSpec::rbf(gamma);
        }
        let rows: Vec<&[f64]> = train.rows.iter().map(|r| r.values.as_slice()).collect();
        let mut model = fit_multiclass(&rows, &train.labels(), self.manifest.k(), self.cfg.svm.scheme, &params)
            .map_err(|e| e.in_stage("train", "training features"))?;
        model.pooling_id = Some(train.pooling_id);
        model.support_refs = model.support_index.iter().map(|&i| train.rows[i].image_id.clone()).collect();
        Ok(model)
    }

    fn train_stage(
        &mut self,
        train: &FeatureSet,
        feat_hash: &str,
        codebook_hash: &str,
        tuned: &TuneArtifact,
    ) -> Result<(MulticlassModel, String)> {
        let tune_hash = hash_json(tuned);
        let meta = Self::stage_meta(&self.cfg.svm, vec![feat_hash.to_string(), tune_hash]);
        let path = self.path(MODEL_FILE);
        if let Some(hit) = cached(&path, &meta, MulticlassModel::from_bytes) {
            self.note(Stage::Train, true);
            return Ok(hit);
        }
        let mut model = self.fit_model(train, tuned.lambda, tuned.gamma)?;
        model.feature_hash = feat_hash.to_string();
        model.codebook_hash = codebook_hash.to_string();
        let bytes = model.to_bytes(&meta);
        write_file(&path, &bytes)?;
        self.note(Stage::Train, false);
        Ok((model, sha256_hex(&bytes)))
    }

    fn evaluate_preds(&self, preds: &[Prediction]) -> Result<EvalReport> {
        let records = eval_records(preds, &self.manifest)?;
        evaluate(&records, self.cfg.eval.ece_bins).map_err(|e| e.in_stage("evaluate", "test predictions"))
    }

    /// Runs every stage up to and including `last`.
    pub fn run_until(&mut self, last: Stage) -> Result<Artifacts> {
        let mut recorded = self.cfg.clone();
        recorded.workers = 0;
        let text = format!("# worker count omitted: results do not depend on it\n{}", recorded.to_toml());
        write_file(&self.path(CONFIG_FILE), text.as_bytes())?;
        let (descriptors, descriptors_hash) = self.extract_stage()?;
        let split = self.split_stage()?;
        let mut art = Artifacts {
            split,
            descriptors,
            descriptors_hash,
            codebook: None,
            features: None,
            tuned: None,
            model: None,
            predictions: None,
            report: None,
        };
        if last == Stage::Extract {
            return Ok(art);
        }
        let cb = self.codebook_stage(&art.descriptors, &art.descriptors_hash, &art.split)?;
        art.codebook = Some(cb);
        if last == Stage::Codebook {
            return Ok(art);
        }
        let cb = art.codebook.as_ref().unwrap();
        let feats = self.encode_stage(&art.descriptors, &art.split, &art.descriptors_hash, cb)?;
        art.features = Some(feats);
        if last == Stage::Encode {
            return Ok(art);
        }
        let (train, test, feat_hash) = art.features.as_ref().unwrap();
        let tuned = self.tune_stage(train, feat_hash)?;
        if last == Stage::Tune {
            art.tuned = Some(tuned);
            return Ok(art);
        }
        let codebook_hash = art.codebook.as_ref().unwrap().1.clone();
        let model = self.train_stage(train, feat_hash, &codebook_hash, &tuned)?;
        art.tuned = Some(tuned);
        if last == Stage::Train {
            art.model = Some(model);
            return Ok(art);
        }
        let preds = predict_features(&model.0, test)?;
        write_file(&self.path(PREDICTIONS_FILE), predictions_to_csv(&preds).as_bytes())?;
        self.note(Stage::Predict, false);
        art.model = Some(model);
        if last == Stage::Predict {
            art.predictions = Some(preds);
            return Ok(art);
        }
        let report = self.evaluate_preds(&preds)?;
        self.write_report(&report)?;
        self.note(Stage::Evaluate, false);
        art.predictions = Some(preds);
        art.report = Some(report);
        Ok(art)
    }

    fn write_report(&self, report: &EvalReport) -> Result<()> {
        write_file(&self.path(REPORT_FILE), report.to_json()?.as_bytes())?;
        write_file(&self.path(RELIABILITY_FILE), report.reliability.to_csv().as_bytes())?;
        write_file(
            &self.path(CONFUSION_FILE),
            confusion_to_csv(&report.confusion, &self.manifest.classes).as_bytes(),
        )
    }

    pub fn run(&mut self) -> Result<Artifacts> {
        self.run_until(Stage::Evaluate)
    }

    /// Reruns tuning and training `eval.repeats` times with tune seeds
    /// `svm.tune_seed + r`, scoring each model on the fixed test set.
    pub fn run_repeated(&mut self) -> Result<RepeatedReport> {
        let art = self.run_until(Stage::Encode)?;
        let (train, test, _) = art.features.as_ref().unwrap();
        let mut runs = Vec::with_capacity(self.cfg.eval.repeats);
        for r in 0..self.cfg.eval.repeats as u64 {
            let tune_seed = self.cfg.svm.tune_seed.wrapping_add(r);
            let (lambda, gamma, _) = self.tune_params(train, tune_seed)?;
            let model = self.fit_model(train, lambda, gamma)?;
            let report = self.evaluate_preds(&predict_features(&model, test)?)?;
            runs.push(RepeatRun {
                tune_seed,
                lambda,
                gamma,
                report,
            });
        }
        let summary = RepeatedReport::from_runs(runs);
        write_file(&self.path(REPEATS_FILE), serde_json::to_string_pretty(&summary)?.as_bytes())?;
        Ok(summary)
    }
}

/// Writes `n_per_class` seeded texture PGMs per class plus `manifest.csv`
/// into `dir` and returns the manifest path.
pub fn write_synthetic_dataset(dir: &Path, n_per_class: usize, size: usize, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut csv = String::from("path,image_id,class\n");
    for i in 0..n_per_class {
        for c in 0..TEXTURE_CLASSES {
            let id = format!("c{c}_{i:03}");
            let img = texture_image(c, size, seed.wrapping_mul(1_000_003).wrapping_add((i * TEXTURE_CLASSES + c) as u64));
            write_file(&dir.join(format!("{id}.pgm")), &write_pgm(&img, 255))?;
            csv.push_str(&format!("{id}.pgm,{id},class{c}\n"));
        }
    }
    let path = dir.join("manifest.csv");
    write_file(&path, csv.as_bytes())?;
    Ok(path)
}
