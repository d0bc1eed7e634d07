//! Run configuration: one TOML file, unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bridge_core::acquisition::ProposalConfig;
use bridge_core::baselines::{TopK, TOP_10};
use bridge_core::optimizer::OptimizerConfig;
use bridge_core::orchestrator::{MilestoneKey, Mode, OptimizeSlot, OrchestratorConfig};
use bridge_core::runtime::synthetic::{GenerationModelSpec, OracleKind, PopulationSpec};
use bridge_core::scalarization::ScalarizationConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "BRIDGE_OUT";

/// Default output directory, relative to the config file.
pub const DEFAULT_OUTPUT: &str = "bridge-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_slot")]
    pub optimize_slot: OptimizeSlot,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub milestones_to_report: Option<Vec<MilestoneKey>>,
    #[serde(default = "default_select_k")]
    pub select_k: SelectK,
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub population: PopulationSection,
    #[serde(default)]
    pub data: DataSection,
    pub evaluator: EvaluatorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_evaluator: Option<EvaluatorSpec>,
    #[serde(default = "default_generator")]
    pub generator: GeneratorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder: Option<EmbedderSpec>,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

fn default_rounds() -> usize {
    3
}

fn default_mode() -> Mode {
    Mode::Standard
}

fn default_slot() -> OptimizeSlot {
    OptimizeSlot::Bo
}

fn default_select_k() -> SelectK {
    SelectK::Count(10)
}

fn default_generator() -> GeneratorSpec {
    GeneratorSpec::Synthetic(SyntheticGeneratorSpec {})
}

/// Retrieval/diversity subset size: a count or `"all"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SelectK {
    Count(usize),
    Word(String),
}

impl SelectK {
    pub fn resolve(&self) -> Result<TopK> {
        match self {
            SelectK::Count(0) => bail!("select_k must be >= 1"),
            SelectK::Count(k) => Ok(TopK::Count(*k)),
            SelectK::Word(w) => Ok(TopK::parse(w)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "default_n_eval")]
    pub n_eval: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_init: Option<usize>,
    #[serde(default = "default_beta_lb")]
    pub beta_lb: f64,
    #[serde(default = "default_beta_ub")]
    pub beta_ub: f64,
    #[serde(default = "default_n_starts")]
    pub n_starts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

fn default_n_eval() -> usize {
    32
}

fn default_beta_lb() -> f64 {
    ScalarizationConfig::default().beta_lb
}

fn default_beta_ub() -> f64 {
    ScalarizationConfig::default().beta_ub
}

fn default_n_starts() -> usize {
    ProposalConfig::default().n_starts
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            n_eval: default_n_eval(),
            n_init: None,
            beta_lb: default_beta_lb(),
            beta_ub: default_beta_ub(),
            n_starts: default_n_starts(),
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    #[serde(default = "default_pull_rate")]
    pub pull_rate: f64,
    #[serde(default = "default_quality_noise_sd")]
    pub quality_noise_sd: f64,
    #[serde(default = "default_slope")]
    pub correctness_slope: f64,
}

fn default_pull_rate() -> f64 {
    GenerationModelSpec::default().pull_rate
}

fn default_quality_noise_sd() -> f64 {
    GenerationModelSpec::default().quality_noise_sd
}

fn default_slope() -> f64 {
    GenerationModelSpec::default().correctness_slope
}

impl Default for GenerationSection {
    fn default() -> Self {
        GenerationSection {
            pull_rate: default_pull_rate(),
            quality_noise_sd: default_quality_noise_sd(),
            correctness_slope: default_slope(),
        }
    }
}

impl GenerationSection {
    pub fn spec(&self) -> GenerationModelSpec {
        GenerationModelSpec {
            pull_rate: self.pull_rate,
            quality_noise_sd: self.quality_noise_sd,
            correctness_slope: self.correctness_slope,
        }
    }
}

/// The synthetic world sampled when a synthetic backend is configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSection {
    #[serde(default = "default_size")]
    pub size: usize,
    #[serde(default)]
    pub quality_mean: f64,
    #[serde(default = "default_quality_sd")]
    pub quality_sd: f64,
    #[serde(default = "default_harmful_pair_rate")]
    pub harmful_pair_rate: f64,
    #[serde(default = "default_harm_strength")]
    pub harm_strength: f64,
    #[serde(default = "default_slope")]
    pub correctness_slope: f64,
    /// Seed of the world itself; the run seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_size() -> usize {
    PopulationSpec::default().size
}

fn default_quality_sd() -> f64 {
    PopulationSpec::default().quality_sd
}

fn default_harmful_pair_rate() -> f64 {
    PopulationSpec::default().harmful_pair_rate
}

fn default_harm_strength() -> f64 {
    PopulationSpec::default().harm_strength
}

impl Default for PopulationSection {
    fn default() -> Self {
        PopulationSection {
            size: default_size(),
            quality_mean: 0.0,
            quality_sd: default_quality_sd(),
            harmful_pair_rate: default_harmful_pair_rate(),
            harm_strength: default_harm_strength(),
            correctness_slope: default_slope(),
            seed: None,
        }
    }
}

impl PopulationSection {
    pub fn spec(&self) -> PopulationSpec {
        PopulationSpec {
            size: self.size,
            quality_mean: self.quality_mean,
            quality_sd: self.quality_sd,
            harmful_pair_rate: self.harmful_pair_rate,
            harm_strength: self.harm_strength,
            correctness_slope: self.correctness_slope,
        }
    }
}

/// Split names and optional example files. Paths are relative to the config
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default = "default_train")]
    pub train: String,
    #[serde(default = "default_validation")]
    pub validation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unlabeled: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_pool: Option<PathBuf>,
}

fn default_train() -> String {
    "train".into()
}

fn default_validation() -> String {
    "validation".into()
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            train: default_train(),
            validation: default_validation(),
            unlabeled: None,
            train_file: None,
            validation_file: None,
            initial_pool: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleName {
    Additive,
    Interference,
}

impl From<OracleName> for OracleKind {
    fn from(o: OracleName) -> Self {
        match o {
            OracleName::Additive => OracleKind::Additive,
            OracleName::Interference => OracleKind::Interference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EvaluatorSpec {
    Synthetic(SyntheticEvaluatorSpec),
    External(ExternalSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticEvaluatorSpec {
    pub oracle: OracleName,
    #[serde(default)]
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub command: Vec<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    60_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorSpec {
    Synthetic(SyntheticGeneratorSpec),
    External(ExternalSpec),
}

/// The synthetic generator takes its dynamics from `[generation]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticGeneratorSpec {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderSpec {
    Hash(HashEmbedderSpec),
    External(ExternalSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HashEmbedderSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_n_design")]
    pub n_design: usize,
    #[serde(default = "default_step")]
    pub step: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

fn default_n_design() -> usize {
    bridge_core::importance::DEFAULT_N_DESIGN
}

fn default_step() -> usize {
    1
}

fn default_replicates() -> usize {
    1
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            n_design: default_n_design(),
            step: default_step(),
            replicates: default_replicates(),
        }
    }
}

/// A parsed config together with the directory its relative paths hang off.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config = parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let loaded = LoadedConfig { config, base_dir };
        loaded.check_paths()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The output directory, honouring [`OUT_ENV`].
    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(dir);
        }
        let out = self.config.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
        self.resolve(&out)
    }

    fn check_paths(&self) -> Result<()> {
        let d = &self.config.data;
        for (key, p) in [
            ("data.train_file", &d.train_file),
            ("data.validation_file", &d.validation_file),
            ("data.initial_pool", &d.initial_pool),
        ] {
            if let Some(p) = p {
                let full = self.resolve(p);
                if !full.is_file() {
                    bail!("{key}: {} does not exist", full.display());
                }
            }
        }
        Ok(())
    }
}

pub fn parse(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text)?;
    config.orchestrator()?;
    Ok(config)
}

impl RunConfig {
    pub fn optimizer(&self) -> Result<OptimizerConfig> {
        let o = &self.optimizer;
        let cfg = OptimizerConfig {
            n_eval: o.n_eval,
            n_init: o.n_init,
            scalarization: ScalarizationConfig::new(o.beta_lb, o.beta_ub)?,
            proposal: ProposalConfig {
                n_starts: o.n_starts,
                max_steps: o.max_steps,
                ..Default::default()
            },
            seed: self.seed,
        };
        cfg.validate().context("optimizer")?;
        Ok(cfg)
    }

    pub fn orchestrator(&self) -> Result<OrchestratorConfig> {
        let cfg = OrchestratorConfig {
            rounds: self.rounds,
            optimizer: self.optimizer()?,
            slot: self.optimize_slot,
            mode: self.mode,
            milestones: self.milestones_to_report.clone(),
            select_k: self.select_k.resolve().unwrap_or(TOP_10),
            timing: self.timing,
        };
        self.select_k.resolve().context("select_k")?;
        cfg.validate()?;
        self.generation.spec().validate().context("generation")?;
        if self.mode == Mode::Mt && self.data.unlabeled.is_none() {
            bail!("mode = \"mt\" needs data.unlabeled");
        }
        if matches!(self.optimize_slot, OptimizeSlot::Retrieval | OptimizeSlot::Diversity) && self.embedder.is_none() {
            bail!("optimize_slot = \"{}\" needs an [embedder] section", self.optimize_slot);
        }
        Ok(cfg)
    }

    /// Hash of everything that shapes the results except the seed and the
    /// output location, so runs that differ only by seed aggregate together.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("seed");
            obj.remove("output");
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}
