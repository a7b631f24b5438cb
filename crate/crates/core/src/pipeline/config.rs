use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codebook::{KMeansParams, Passes};
use crate::encoding::{Encoder, LlcParams};
use crate::error::{Error, Result};
use crate::pooling::{NormMode, PoolMode, PoolingId};
use crate::sift::SiftParams;
use crate::wsvm::{
    default_lambda_grid, default_pi_grid, validate_pi_grid, EstimatorRule, KernelKind, Scheme,
    SolverParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorSource {
    /// Run the built-in SIFT extractor on the manifest's PGM files.
    #[default]
    Builtin,
    /// Read `<image_id>.sift.txt` files from `data.descriptor_dir`.
    VlfeatImport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV with columns `path,image_id,class`; relative image paths resolve
    /// against the manifest's directory.
    pub manifest: PathBuf,
    pub descriptor_source: DescriptorSource,
    pub descriptor_dir: Option<PathBuf>,
    /// Class order; defaults to first appearance in the manifest.
    pub classes: Option<Vec<String>>,
    /// Resize every image to `standard_size` squared before extraction.
    pub resize: bool,
    pub standard_size: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.csv"),
            descriptor_source: DescriptorSource::Builtin,
            descriptor_dir: None,
            classes: None,
            resize: true,
            standard_size: crate::imageio::STANDARD_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookConfig {
    pub size: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub n_init: usize,
    pub passes: Passes,
    pub chunk_rows: usize,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        let k = KMeansParams::default();
        Self {
            size: 64,
            max_iters: k.max_iters,
            tol: k.tol,
            seed: k.seed,
            n_init: k.n_init,
            passes: k.passes,
            chunk_rows: k.chunk_rows,
        }
    }
}

impl CodebookConfig {
    pub fn kmeans(&self) -> KMeansParams {
        KMeansParams {
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            n_init: self.n_init,
            passes: self.passes,
            chunk_rows: self.chunk_rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub scheme: Scheme,
    pub kernel: KernelKind,
    /// Explicit pi grid; overrides `pi_grid_size`.
    pub pi_grid: Option<Vec<f64>>,
    pub pi_grid_size: usize,
    pub estimator: EstimatorRule,
    /// Fixed lambda; skips tuning of lambda when set.
    pub lambda: Option<f64>,
    /// Fixed rbf gamma; skips tuning of gamma when set.
    pub gamma: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    /// Absolute gamma grid; defaults to powers of two over the median
    /// squared distance of the training features.
    pub gamma_grid: Option<Vec<f64>>,
    pub tune_seed: u64,
    pub solver: SolverParams,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Baseline(crate::wsvm::BaselineRule::B1),
            kernel: KernelKind::Rbf,
            pi_grid: None,
            pi_grid_size: 19,
            estimator: EstimatorRule::default(),
            lambda: None,
            gamma: None,
            lambda_grid: None,
            gamma_grid: None,
            tune_seed: 0,
            solver: SolverParams::default(),
        }
    }
}

impl SvmConfig {
    pub fn grid(&self) -> Vec<f64> {
        self.pi_grid
            .clone()
            .unwrap_or_else(|| default_pi_grid(self.pi_grid_size))
    }

    pub fn lambdas(&self) -> Vec<f64> {
        match (self.lambda, &self.lambda_grid) {
            (Some(l), _) => vec![l],
            (None, Some(g)) => g.clone(),
            (None, None) => default_lambda_grid(),
        }
    }

    /// Whether a tuning run is needed at all.
    pub fn needs_tuning(&self) -> bool {
        let gamma_fixed = self.kernel == KernelKind::Linear || self.gamma.is_some();
        !(self.lambda.is_some() && gamma_fixed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            stratified: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ece_bins: usize,
    /// Train/tune re-splits in repeated evaluation.
    pub repeats: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ece_bins: crate::metrics::DEFAULT_ECE_BINS,
            repeats: 10,
        }
    }
}

/// The whole experiment, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub sift: SiftParams,
    pub codebook: CodebookConfig,
    pub encoder: Encoder,
    pub llc: Option<LlcParams>,
    pub pooling: PoolingId,
    pub svm: SvmConfig,
    pub split: SplitConfig,
    pub eval: EvalConfig,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            sift: SiftParams::default(),
            codebook: CodebookConfig::default(),
            encoder: Encoder::Vq,
            llc: None,
            pooling: PoolingId::new(PoolMode::Sum, NormMode::Ltf),
            svm: SvmConfig::default(),
            split: SplitConfig::default(),
            eval: EvalConfig::default(),
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.llc.is_none() && !cfg.encoder.is_vq() {
            cfg.llc = Some(LlcParams::default());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; a relative manifest path resolves against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.data.manifest.is_relative() {
            cfg.data.manifest = base.join(&cfg.data.manifest);
        }
        if let Some(d) = &cfg.data.descriptor_dir {
            if d.is_relative() {
                cfg.data.descriptor_dir = Some(base.join(d));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets every seed (split, k-means, tuning) to `seed`.
    pub fn apply_seed(&mut self, seed: u64) {
        self.split.seed = seed;
        self.codebook.seed = seed;
        self.svm.tune_seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.encoder.is_vq() && self.llc.is_some() {
            return bad("[llc] parameters given but encoder is vq".into());
        }
        if let Some(p) = &self.llc {
            if !(p.lambda > 0.0 && p.sigma > 0.0 && p.ridge_eps >= 0.0) {
                return bad("llc lambda and sigma must be positive, ridge_eps non-negative".into());
            }
            if p.knn == 0 || p.knn > self.codebook.size {
                return bad(format!("llc knn must be in 1..={}", self.codebook.size));
            }
        }
        if self.codebook.size == 0 {
            return bad("codebook size must be positive".into());
        }
        if self.codebook.n_init == 0 || self.codebook.chunk_rows == 0 {
            return bad("codebook n_init and chunk_rows must be positive".into());
        }
        self.sift.validate().map_err(|e| Error::Config(e.to_string()))?;
        validate_pi_grid(&self.svm.grid()).map_err(|e| Error::Config(e.to_string()))?;
        if self.svm.lambdas().iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad("lambda values must be positive".into());
        }
        if let Some(g) = self.svm.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad("gamma must be positive".into());
            }
        }
        if self.svm.gamma_grid.as_ref().is_some_and(|g| g.is_empty() || g.iter().any(|&v| !(v > 0.0)))
            || self.svm.lambda_grid.as_ref().is_some_and(|g| g.is_empty())
        {
            return bad("tuning grids must be non-empty and positive".into());
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return bad("split.train_fraction must lie in (0, 1)".into());
        }
        if self.eval.ece_bins == 0 || self.eval.repeats == 0 {
            return bad("eval.ece_bins and eval.repeats must be positive".into());
        }
        if self.data.resize && self.data.standard_size < 16 {
            return bad("data.standard_size must be at least 16".into());
        }
        if self.data.descriptor_source == DescriptorSource::VlfeatImport && self.data.descriptor_dir.is_none() {
            return bad("vlfeat_import needs data.descriptor_dir".into());
        }
        Ok(())
    }
}
