//! The outer loop: optimize a subset of the current pool, regenerate the pool
//! with that subset as demonstrations, repeat.
//!
//! Four modes share the loop. `Standard` filters every regenerated pool to
//! correct examples; `Restricted` additionally keeps only items that were
//! correct at round 0; `IterativeReinforced` skips the optimize step and
//! seeds each generation with the whole previous pool; `Mt` generates on an
//! unlabeled split, seeds with the optimized subset plus the train split and
//! applies no correctness filter.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{diverse_k, embed_pool, embedding_text, retrieve_topk, EmbeddingMatrix, TopK};
use crate::error::{Error, Result};
use crate::ledger::LedgerEntry;
use crate::optimizer::{bayes_opt, random_search, OptimizerConfig, Session};
use crate::pool::{EvaluationRecord, Example, ExamplePool, Phase, SubsetVector};
use crate::runtime::{
    evaluate_checked, pool_from_generated, Dataset, Embedder, EvalRequest, Evaluator, GenerateRequest, Generator,
};
use crate::util::Fnv1a;

/// Split name used for milestone evaluations by a held-out evaluator.
pub const TEST_SPLIT: &str = "test";

/// What fills the optimize step of each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizeSlot {
    Bo,
    Rs,
    Retrieval,
    Diversity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Standard,
    IterativeReinforced,
    Restricted,
    Mt,
}

impl OptimizeSlot {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizeSlot::Bo => "bo",
            OptimizeSlot::Rs => "rs",
            OptimizeSlot::Retrieval => "retrieval",
            OptimizeSlot::Diversity => "diversity",
        }
    }
}

impl FromStr for OptimizeSlot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bo" => Ok(OptimizeSlot::Bo),
            "rs" => Ok(OptimizeSlot::Rs),
            "retrieval" => Ok(OptimizeSlot::Retrieval),
            "diversity" => Ok(OptimizeSlot::Diversity),
            _ => Err(Error::InvalidArgument(format!(
                "unknown optimize slot {s:?} (expected bo, rs, retrieval or diversity)"
            ))),
        }
    }
}

impl fmt::Display for OptimizeSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A milestone key: after the optimize (`kO`) or generate (`kG`) step of
/// round `k`, or the plain round number in iterative-reinforced runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MilestoneKey {
    Optimized(usize),
    Generated(usize),
    Round(usize),
}

impl MilestoneKey {
    pub fn round(self) -> usize {
        match self {
            MilestoneKey::Optimized(k) | MilestoneKey::Generated(k) | MilestoneKey::Round(k) => k,
        }
    }

    /// Position in run order.
    pub fn sort_key(self) -> (usize, u8) {
        match self {
            MilestoneKey::Optimized(k) => (k, 0),
            MilestoneKey::Generated(k) => (k, 1),
            MilestoneKey::Round(k) => (k, 2),
        }
    }
}

impl fmt::Display for MilestoneKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MilestoneKey::Optimized(k) => write!(f, "{k}O"),
            MilestoneKey::Generated(k) => write!(f, "{k}G"),
            MilestoneKey::Round(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for MilestoneKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed milestone key {s:?}"));
        let (digits, ctor): (&str, fn(usize) -> MilestoneKey) = if let Some(d) = s.strip_suffix('O') {
            (d, MilestoneKey::Optimized)
        } else if let Some(d) = s.strip_suffix('G') {
            (d, MilestoneKey::Generated)
        } else {
            (s, MilestoneKey::Round)
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let k: usize = digits.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        Ok(ctor(k))
    }
}

impl Serialize for MilestoneKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MilestoneKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorConfig {
    pub rounds: usize,
    /// Budget and settings of each optimize step; its seed is the run seed.
    pub optimizer: OptimizerConfig,
    pub slot: OptimizeSlot,
    pub mode: Mode,
    /// `None` reports [`OrchestratorConfig::default_milestones`].
    pub milestones: Option<Vec<MilestoneKey>>,
    /// Subset size for the retrieval and diversity slots.
    pub select_k: TopK,
    /// Record real evaluation times in the ledger.
    pub timing: bool,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            rounds: 3,
            optimizer: OptimizerConfig::default(),
            slot: OptimizeSlot::Bo,
            mode: Mode::Standard,
            milestones: None,
            select_k: crate::baselines::TOP_10,
            timing: false,
        }
    }
}

impl OrchestratorConfig {
    /// `1O, 1G, ..., KO` (or `1, ..., K` without an optimize step).
    pub fn default_milestones(&self) -> Vec<MilestoneKey> {
        let k = self.rounds;
        if self.mode == Mode::IterativeReinforced {
            return (1..=k).map(MilestoneKey::Round).collect();
        }
        let mut keys = Vec::with_capacity(2 * k);
        for r in 1..=k {
            keys.push(MilestoneKey::Optimized(r));
            if r < k {
                keys.push(MilestoneKey::Generated(r));
            }
        }
        keys
    }

    pub fn milestones(&self) -> Vec<MilestoneKey> {
        let mut keys = self.milestones.clone().unwrap_or_else(|| self.default_milestones());
        keys.sort_by_key(|k| k.sort_key());
        keys.dedup();
        keys
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidArgument("rounds must be >= 1".into()));
        }
        if self.mode != Mode::IterativeReinforced {
            self.optimizer.validate()?;
        }
        if let TopK::Count(0) = self.select_k {
            return Err(Error::InvalidArgument("select_k must be >= 1".into()));
        }
        for key in self.milestones() {
            let fits_mode = matches!(
                (key, self.mode),
                (MilestoneKey::Round(_), Mode::IterativeReinforced)
                    | (MilestoneKey::Optimized(_) | MilestoneKey::Generated(_), Mode::Standard | Mode::Restricted | Mode::Mt)
            );
            if !fits_mode || key.round() > self.rounds {
                return Err(Error::InvalidArgument(format!(
                    "milestone {key} is not available with {} rounds in this mode",
                    self.rounds
                )));
            }
        }
        Ok(())
    }

    fn wants(&self, key: MilestoneKey) -> bool {
        self.milestones().contains(&key)
    }
}

/// The datasets a run refers to. Examples may be left empty when the backend
/// owns the data and only the split names travel.
#[derive(Debug, Clone, Default)]
pub struct DatasetRefs {
    pub train: Dataset,
    pub validation: Dataset,
    pub unlabeled: Option<Dataset>,
    /// Round-0 pool; when absent it is generated zero-shot on the train split
    /// (on the unlabeled split, conditioned on train and validation, in MT
    /// mode).
    pub initial_pool: Option<ExamplePool>,
}

/// The black boxes a run calls.
pub struct Backends<'a> {
    /// Scores subsets during the optimize step (validation split).
    pub evaluator: &'a mut dyn Evaluator,
    /// Held-out evaluator for milestone metrics. Without one, `kO` reports the
    /// optimize step's best validation metric and `kG` is measured by
    /// `evaluator`.
    pub test_evaluator: Option<&'a mut dyn Evaluator>,
    pub generator: &'a mut dyn Generator,
    /// Needed by the retrieval and diversity slots.
    pub embedder: Option<&'a mut dyn Embedder>,
    pub embedding_cache: Option<&'a Path>,
}

/// One milestone line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub round: usize,
    pub milestone: MilestoneKey,
    pub subset_ids: Vec<String>,
    /// Snapshot of the pool the subset ids refer to.
    pub pool_path: String,
    pub metric: f64,
}

/// What happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Subset of the previous round's pool; absent without an optimize step.
    pub e_star: Option<SubsetVector>,
    /// Best validation metric of the optimize step.
    pub best_metric: Option<f64>,
    /// Pool regenerated at the end of the round, if any.
    pub pool: Option<ExamplePool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilestoneLedger {
    pub pool0: ExamplePool,
    pub rounds: Vec<RoundRecord>,
    pub milestones: Vec<Milestone>,
}

impl MilestoneLedger {
    pub fn metric(&self, key: MilestoneKey) -> Option<f64> {
        self.milestones.iter().find(|m| m.milestone == key).map(|m| m.metric)
    }

    /// Pool at the end of round `k` (round 0 is the initial pool).
    pub fn pool(&self, k: usize) -> Option<&ExamplePool> {
        if k == 0 {
            return Some(&self.pool0);
        }
        self.rounds.get(k - 1).and_then(|r| r.pool.as_ref())
    }
}

/// Persistence hooks, called as soon as each artifact exists.
pub trait RunObserver {
    fn on_pool(&mut self, _round: usize, _pool: &ExamplePool) -> Result<()> {
        Ok(())
    }

    fn on_evaluation(&mut self, _entry: &LedgerEntry) -> Result<()> {
        Ok(())
    }

    fn on_milestone(&mut self, _milestone: &Milestone) -> Result<()> {
        Ok(())
    }
}

/// Observer that keeps nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct Discard;

impl RunObserver for Discard {}

/// File name of the round-`k` pool snapshot, relative to the run directory.
pub fn pool_file_name(round: usize) -> String {
    format!("pools/round_{round}.jsonl")
}

/// Seed of the optimize step in round `k`.
pub fn round_seed(seed: u64, round: usize) -> u64 {
    Fnv1a::default().write_u64(seed).write_u64(round as u64).finish()
}

/// Runs the mode selected in `cfg`.
pub fn run(
    cfg: &OrchestratorConfig,
    data: &DatasetRefs,
    backends: Backends<'_>,
    observer: &mut dyn RunObserver,
) -> Result<MilestoneLedger> {
    match cfg.mode {
        Mode::Standard => run_bridge(cfg, data, backends, observer),
        Mode::IterativeReinforced => run_iterative_reinforced(cfg, data, backends, observer),
        Mode::Restricted => run_restricted(cfg, data, backends, observer),
        Mode::Mt => run_mt(cfg, data, backends, observer),
    }
}

pub fn run_bridge(
    cfg: &OrchestratorConfig,
    data: &DatasetRefs,
    backends: Backends<'_>,
    observer: &mut dyn RunObserver,
) -> Result<MilestoneLedger> {
    expect_mode(cfg, Mode::Standard)?;
    Loop::new(cfg, data, backends, observer).optimize_generate()
}

pub fn run_restricted(
    cfg: &OrchestratorConfig,
    data: &DatasetRefs,
    backends: Backends<'_>,
    observer: &mut dyn RunObserver,
) -> Result<MilestoneLedger> {
    expect_mode(cfg, Mode::Restricted)?;
    Loop::new(cfg, data, backends, observer).optimize_generate()
}

pub fn run_mt(
    cfg: &OrchestratorConfig,
    data: &DatasetRefs,
    backends: Backends<'_>,
    observer: &mut dyn RunObserver,
) -> Result<MilestoneLedger> {
    expect_mode(cfg, Mode::Mt)?;
    let unlabeled = data
        .unlabeled
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("mt mode needs an unlabeled split".into()))?;
    if unlabeled.name == data.train.name || unlabeled.name == data.validation.name {
        return Err(Error::InvalidArgument(
            "the unlabeled split must differ from train and validation".into(),
        ));
    }
    check_disjoint(&data.train, &data.validation)?;
    Loop::new(cfg, data, backends, observer).optimize_generate()
}

pub fn run_iterative_reinforced(
    cfg: &OrchestratorConfig,
    data: &DatasetRefs,
    backends: Backends<'_>,
    observer: &mut dyn RunObserver,
) -> Result<MilestoneLedger> {
    expect_mode(cfg, Mode::IterativeReinforced)?;
    Loop::new(cfg, data, backends, observer).generate_only()
}

fn expect_mode(cfg: &OrchestratorConfig, mode: Mode) -> Result<()> {
    cfg.validate()?;
    if cfg.mode != mode {
        return Err(Error::InvalidArgument(format!(
            "configuration is for {:?} mode, not {mode:?}",
            cfg.mode
        )));
    }
    Ok(())
}

fn check_disjoint(train: &Dataset, validation: &Dataset) -> Result<()> {
    if train.name == validation.name {
        return Err(Error::InvalidArgument(format!(
            "train and validation splits must be disjoint, both are {:?}",
            train.name
        )));
    }
    let train_ids: HashSet<&str> = train.examples.iter().map(|e| e.id.as_str()).collect();
    let shared: Vec<&str> = validation
        .examples
        .iter()
        .map(|e| e.id.as_str())
        .filter(|id| train_ids.contains(id))
        .collect();
    if !shared.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "train and validation splits must be disjoint; shared ids: {}",
            shared.join(", ")
        )));
    }
    Ok(())
}

/// Split that pools are generated on: the unlabeled split in MT mode, the
/// train split otherwise.
pub fn generation_target(mode: Mode, data: &DatasetRefs) -> &str {
    match (mode, &data.unlabeled) {
        (Mode::Mt, Some(u)) => &u.name,
        _ => &data.train.name,
    }
}

fn non_empty(pool: ExamplePool, mode: Mode, round: usize) -> Result<ExamplePool> {
    if !pool.is_empty() {
        return Ok(pool);
    }
    Err(match mode {
        Mode::Mt => Error::Backend(format!("generation at round {round} returned no examples")),
        _ => Error::NoCorrectExamples(round),
    })
}

/// The round-0 pool: `data.initial_pool` if given, otherwise a zero-shot
/// generation on the train split (in MT mode, a generation on the unlabeled
/// split seeded with train and validation). Filtered to correct examples
/// except in MT mode.
pub fn initial_pool(mode: Mode, data: &DatasetRefs, generator: &mut dyn Generator) -> Result<ExamplePool> {
    let pool = match &data.initial_pool {
        Some(p) => ExamplePool::new(p.examples().to_vec(), 0)?,
        None => {
            let seeds: Vec<Example> = if mode == Mode::Mt {
                data.train.examples.iter().chain(&data.validation.examples).cloned().collect()
            } else {
                Vec::new()
            };
            let request = GenerateRequest {
                round: 0,
                target: generation_target(mode, data),
                seeds: &seeds,
            };
            pool_from_generated(generator.generate(&request)?, 0)
        }
    };
    let pool = if mode == Mode::Mt { pool } else { pool.correct_only() };
    non_empty(pool, mode, 0)
}

struct Loop<'r, 'b> {
    cfg: &'r OrchestratorConfig,
    data: &'r DatasetRefs,
    b: Backends<'b>,
    observer: &'r mut dyn RunObserver,
    milestones: Vec<Milestone>,
    /// Base ids allowed in restricted mode.
    allowed: Option<HashSet<String>>,
}

impl<'r, 'b> Loop<'r, 'b> {
    fn new(
        cfg: &'r OrchestratorConfig,
        data: &'r DatasetRefs,
        b: Backends<'b>,
        observer: &'r mut dyn RunObserver,
    ) -> Self {
        Loop {
            cfg,
            data,
            b,
            observer,
            milestones: Vec::new(),
            allowed: None,
        }
    }

    fn generation_target(&self) -> &'r str {
        generation_target(self.cfg.mode, self.data)
    }

    /// Keeps what the mode allows from a freshly generated example list.
    fn admit(&self, examples: Vec<Example>, round: usize) -> Result<ExamplePool> {
        let mut pool = pool_from_generated(examples, round);
        if self.cfg.mode != Mode::Mt {
            pool = pool.correct_only();
        }
        if let Some(allowed) = &self.allowed {
            pool = pool.filtered(|e| allowed.contains(e.base_id()));
        }
        non_empty(pool, self.cfg.mode, round)
    }

    fn initial_pool(&mut self) -> Result<ExamplePool> {
        let pool = initial_pool(self.cfg.mode, self.data, &mut *self.b.generator)?;
        if self.cfg.mode == Mode::Restricted {
            self.allowed = Some(pool.examples().iter().map(|e| e.base_id().to_string()).collect());
        }
        self.observer.on_pool(0, &pool)?;
        Ok(pool)
    }

    fn generate(&mut self, round: usize, seeds: &[Example]) -> Result<ExamplePool> {
        let request = GenerateRequest {
            round,
            target: self.generation_target(),
            seeds,
        };
        let examples = self.b.generator.generate(&request)?;
        let pool = self.admit(examples, round)?;
        self.observer.on_pool(round, &pool)?;
        Ok(pool)
    }

    /// Evaluates a milestone subset with the held-out evaluator, or with the
    /// validation evaluator when there is none.
    fn milestone_metric(
        &mut self,
        round: usize,
        iteration: usize,
        pool: &ExamplePool,
        subset: &SubsetVector,
    ) -> Result<f64> {
        let (evaluator, split): (&mut dyn Evaluator, &str) = match self.b.test_evaluator.as_deref_mut() {
            Some(t) => (t, TEST_SPLIT),
            None => (&mut *self.b.evaluator, &self.data.validation.name),
        };
        let request = EvalRequest {
            round,
            split,
            pool,
            subset,
        };
        let metric = evaluate_checked(evaluator, &request)?;
        let record = EvaluationRecord {
            subset: subset.clone(),
            metric,
            phase: Phase::Milestone,
            round,
            iteration,
            beta: None,
            wallclock_ms: 0,
        };
        self.observer.on_evaluation(&LedgerEntry::from_record(&record, pool)?)?;
        Ok(metric)
    }

    fn record_milestone(
        &mut self,
        key: MilestoneKey,
        pool_round: usize,
        pool: &ExamplePool,
        subset: &SubsetVector,
        metric: f64,
    ) -> Result<()> {
        let milestone = Milestone {
            round: key.round(),
            milestone: key,
            subset_ids: subset.ids(pool)?,
            pool_path: pool_file_name(pool_round),
            metric,
        };
        self.observer.on_milestone(&milestone)?;
        self.milestones.push(milestone);
        Ok(())
    }

    /// Runs the configured optimize slot on `pool`; returns the chosen subset
    /// and its validation metric.
    fn optimize(&mut self, round: usize, pool: &ExamplePool) -> Result<(SubsetVector, f64)> {
        let seed = round_seed(self.cfg.optimizer.seed, round);
        let split = self.data.validation.name.clone();
        let observer = &mut *self.observer;
        let mut on_record = |r: &EvaluationRecord| observer.on_evaluation(&LedgerEntry::from_record(r, pool)?);
        let mut session = Session {
            round,
            split: &split,
            timing: self.cfg.timing,
            on_record: &mut on_record,
        };
        let opt_cfg = OptimizerConfig {
            seed,
            ..self.cfg.optimizer.clone()
        };
        let chosen = match self.cfg.slot {
            OptimizeSlot::Bo => {
                let out = bayes_opt(&mut *self.b.evaluator, pool, &opt_cfg, &mut session)?;
                return Ok((out.best_subset, out.best_metric));
            }
            OptimizeSlot::Rs => {
                let out = random_search(&mut *self.b.evaluator, pool, &opt_cfg, &mut session)?;
                return Ok((out.best_subset, out.best_metric));
            }
            OptimizeSlot::Retrieval => {
                let (emb, query) = self.embed_for_selection(pool)?;
                let k = TopK::Count(self.cfg.select_k.resolve(pool.len()));
                let order = retrieve_topk(&emb, &query, k)?;
                SubsetVector::from_indices(pool.len(), order)?
            }
            OptimizeSlot::Diversity => {
                let (emb, _) = self.embed_for_selection(pool)?;
                let k = self.cfg.select_k.resolve(pool.len());
                diverse_k(&emb, k, &mut ChaCha8Rng::seed_from_u64(seed))?
            }
        };
        let request = EvalRequest {
            round,
            split: &split,
            pool,
            subset: &chosen,
        };
        let metric = evaluate_checked(&mut *self.b.evaluator, &request)?;
        let record = EvaluationRecord {
            subset: chosen.clone(),
            metric,
            phase: Phase::Select,
            round,
            iteration: 0,
            beta: None,
            wallclock_ms: 0,
        };
        self.observer.on_evaluation(&LedgerEntry::from_record(&record, pool)?)?;
        Ok((chosen, metric))
    }

    /// Pool embeddings and the mean validation embedding used as query.
    fn embed_for_selection(&mut self, pool: &ExamplePool) -> Result<(EmbeddingMatrix, Vec<f64>)> {
        let cache = self.b.embedding_cache;
        let embedder = self
            .b
            .embedder
            .as_deref_mut()
            .ok_or_else(|| Error::InvalidArgument(format!("the {} slot needs an embedder", self.cfg.slot)))?;
        let emb = embed_pool(embedder, pool, cache)?;
        let validation = &self.data.validation.examples;
        if validation.is_empty() {
            return Ok((emb.clone(), emb.mean()));
        }
        let ids: Vec<String> = validation.iter().map(|e| e.id.clone()).collect();
        let texts: Vec<String> = validation.iter().map(|e| embedding_text(e).to_string()).collect();
        let query = EmbeddingMatrix::new(embedder.embed(&ids, &texts)?)?;
        if query.dim() != emb.dim() {
            return Err(Error::LengthMismatch {
                expected: emb.dim(),
                found: query.dim(),
            });
        }
        Ok((emb, query.mean()))
    }

    fn optimize_generate(mut self) -> Result<MilestoneLedger> {
        let k_max = self.cfg.rounds;
        let pool0 = self.initial_pool()?;
        let mut current = pool0.clone();
        let mut rounds = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let (e_star, best) = self.optimize(k, &current)?;
            let key = MilestoneKey::Optimized(k);
            if self.cfg.wants(key) {
                let metric = if self.b.test_evaluator.is_some() {
                    self.milestone_metric(k, 0, &current, &e_star)?
                } else {
                    best
                };
                self.record_milestone(key, k - 1, &current, &e_star, metric)?;
            }
            let key = MilestoneKey::Generated(k);
            let next = if k < k_max || self.cfg.wants(key) {
                let mut seeds: Vec<Example> = current.select(&e_star)?.into_iter().cloned().collect();
                if self.cfg.mode == Mode::Mt {
                    seeds.extend(self.data.train.examples.iter().cloned());
                }
                let pool = self.generate(k, &seeds)?;
                if self.cfg.wants(key) {
                    let full = SubsetVector::full(pool.len());
                    let metric = self.milestone_metric(k, 1, &pool, &full)?;
                    self.record_milestone(key, k, &pool, &full, metric)?;
                }
                Some(pool)
            } else {
                None
            };
            rounds.push(RoundRecord {
                round: k,
                e_star: Some(e_star),
                best_metric: Some(best),
                pool: next.clone(),
            });
            if let Some(p) = next {
                current = p;
            }
        }
        Ok(MilestoneLedger {
            pool0,
            rounds,
            milestones: self.milestones,
        })
    }

    fn generate_only(mut self) -> Result<MilestoneLedger> {
        let pool0 = self.initial_pool()?;
        let mut current = pool0.clone();
        let mut rounds = Vec::with_capacity(self.cfg.rounds);
        for k in 1..=self.cfg.rounds {
            let seeds = current.examples().to_vec();
            let pool = self.generate(k, &seeds)?;
            let key = MilestoneKey::Round(k);
            if self.cfg.wants(key) {
                let full = SubsetVector::full(pool.len());
                let metric = self.milestone_metric(k, 0, &pool, &full)?;
                self.record_milestone(key, k, &pool, &full, metric)?;
            }
            rounds.push(RoundRecord {
                round: k,
                e_star: None,
                best_metric: None,
                pool: Some(pool.clone()),
            });
            current = pool;
        }
        Ok(MilestoneLedger {
            pool0,
            rounds,
            milestones: self.milestones,
        })
    }
}
