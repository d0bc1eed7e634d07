//! Budgeted subset optimization: Bayesian optimization under random
//! Tchebyshev scalarization, and random search with the same budget.

use std::collections::HashSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{propose, ProposalConfig};
use crate::error::{Error, Result};
use crate::pool::{sample_subset, EvaluationRecord, ExamplePool, Phase, SubsetVector};
use crate::runtime::{evaluate_checked, EvalRequest, Evaluator};
use crate::scalarization::{sample_beta, tch, ScalarizationConfig};
use crate::surrogate::fit_gp;

/// Draws attempted before a duplicate random subset is accepted.
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub n_eval: usize,
    /// `None` uses [`default_n_init`].
    pub n_init: Option<usize>,
    pub scalarization: ScalarizationConfig,
    /// The tabu set is filled in by the optimizer; entries given here are
    /// kept as additional exclusions.
    pub proposal: ProposalConfig,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            n_eval: 32,
            n_init: None,
            scalarization: ScalarizationConfig::default(),
            proposal: ProposalConfig::default(),
            seed: 0,
        }
    }
}

/// `min(16, n_eval / 2)` with integer division, and at least one.
pub fn default_n_init(n_eval: usize) -> usize {
    (n_eval / 2).clamp(1, 16)
}

impl OptimizerConfig {
    pub fn with_budget(n_eval: usize, seed: u64) -> Self {
        OptimizerConfig {
            n_eval,
            seed,
            ..Default::default()
        }
    }

    pub fn n_init(&self) -> usize {
        self.n_init.unwrap_or_else(|| default_n_init(self.n_eval))
    }

    pub fn validate(&self) -> Result<()> {
        let n_init = self.n_init();
        if self.n_eval == 0 {
            return Err(Error::InvalidArgument("n_eval must be >= 1".into()));
        }
        if n_init == 0 || n_init > self.n_eval {
            return Err(Error::InvalidArgument(format!(
                "n_init must satisfy 1 <= n_init <= n_eval, got n_init = {n_init}, n_eval = {}",
                self.n_eval
            )));
        }
        self.scalarization.validate()?;
        self.proposal.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    pub best_subset: SubsetVector,
    pub best_metric: f64,
    pub records: Vec<EvaluationRecord>,
}

impl OptimizerResult {
    /// Earliest record with the highest metric.
    fn from_records(records: Vec<EvaluationRecord>) -> Result<Self> {
        let mut best: Option<&EvaluationRecord> = None;
        for r in &records {
            if best.is_none_or(|b| r.metric > b.metric) {
                best = Some(r);
            }
        }
        let best = best.ok_or_else(|| Error::InvalidArgument("no evaluations".into()))?;
        Ok(OptimizerResult {
            best_subset: best.subset.clone(),
            best_metric: best.metric,
            records,
        })
    }
}

/// Round, split and bookkeeping shared by one optimizer run.
pub struct Session<'a> {
    pub round: usize,
    pub split: &'a str,
    /// Record real elapsed time per evaluation; off keeps ledgers reproducible.
    pub timing: bool,
    /// Called after every evaluation, before the next one starts.
    pub on_record: &'a mut dyn FnMut(&EvaluationRecord) -> Result<()>,
}

struct Recorder<'s, 'a, E: ?Sized> {
    evaluator: &'s mut E,
    pool: &'s ExamplePool,
    session: &'s mut Session<'a>,
    records: Vec<EvaluationRecord>,
}

impl<E: Evaluator + ?Sized> Recorder<'_, '_, E> {
    fn evaluate(&mut self, subset: SubsetVector, phase: Phase, beta: Option<f64>) -> Result<()> {
        let request = EvalRequest {
            round: self.session.round,
            split: self.session.split,
            pool: self.pool,
            subset: &subset,
        };
        let started = Instant::now();
        let metric = evaluate_checked(self.evaluator, &request)?;
        let wallclock_ms = if self.session.timing {
            started.elapsed().as_millis() as u64
        } else {
            0
        };
        let record = EvaluationRecord {
            subset,
            metric,
            phase,
            round: self.session.round,
            iteration: self.records.len(),
            beta,
            wallclock_ms,
        };
        (self.session.on_record)(&record)?;
        self.records.push(record);
        Ok(())
    }

    fn evaluated(&self) -> HashSet<SubsetVector> {
        self.records.iter().map(|r| r.subset.clone()).collect()
    }
}

/// A random subset not in `avoid`, giving up after [`MAX_REDRAWS`] draws.
fn fresh_subset(
    m: usize,
    avoid: &HashSet<SubsetVector>,
    rng: &mut ChaCha8Rng,
) -> Result<SubsetVector> {
    let mut subset = sample_subset(m, rng)?;
    for _ in 1..MAX_REDRAWS {
        if !avoid.contains(&subset) {
            break;
        }
        subset = sample_subset(m, rng)?;
    }
    Ok(subset)
}

/// Bayesian optimization of `evaluator` over subsets of `pool`.
///
/// The first `n_init` subsets are random (duplicates re-drawn as in
/// [`random_search`]). Each later iteration draws a weight `beta`,
/// scalarizes every metric so far against subset size, fits a GP to the
/// standardized scalarized values and evaluates the expected-improvement
/// proposal. The winner is the earliest subset with the best raw metric.
pub fn bayes_opt<E: Evaluator + ?Sized>(
    evaluator: &mut E,
    pool: &ExamplePool,
    cfg: &OptimizerConfig,
    session: &mut Session<'_>,
) -> Result<OptimizerResult> {
    cfg.validate()?;
    let m = pool.len();
    if m == 0 {
        return Err(Error::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut run = Recorder {
        evaluator,
        pool,
        session,
        records: Vec::with_capacity(cfg.n_eval),
    };
    for _ in 0..cfg.n_init() {
        let subset = fresh_subset(m, &run.evaluated(), &mut rng)?;
        run.evaluate(subset, Phase::Init, None)?;
    }
    let mut proposal = cfg.proposal.clone();
    let mut cards: Vec<usize> = run.records.iter().map(|r| r.subset.cardinality()).collect();
    while run.records.len() < cfg.n_eval {
        let beta = sample_beta(&cfg.scalarization, &mut rng);
        let metrics: Vec<f64> = run.records.iter().map(|r| r.metric).collect();
        let h = tch(&metrics, &cards, beta)?;
        let inputs: Vec<SubsetVector> = run.records.iter().map(|r| r.subset.clone()).collect();
        let model = fit_gp(&inputs, &h)?;
        let incumbent = model
            .train_targets()
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        // Proposal works on the model's output scale.
        let incumbent = incumbent * model.target_std() + model.target_mean();
        proposal.tabu.extend(inputs);
        let next = match propose(&model, incumbent, &proposal, &mut rng) {
            Ok(next) => next,
            // Every subset has been tried: spend the rest of the budget on repeats.
            Err(Error::SearchExhausted) => sample_subset(m, &mut rng)?,
            Err(e) => return Err(e),
        };
        cards.push(next.cardinality());
        run.evaluate(next, Phase::Bo, Some(beta))?;
    }
    OptimizerResult::from_records(run.records)
}

/// `n_eval` random subsets, duplicates re-drawn up to [`MAX_REDRAWS`] times.
pub fn random_search<E: Evaluator + ?Sized>(
    evaluator: &mut E,
    pool: &ExamplePool,
    cfg: &OptimizerConfig,
    session: &mut Session<'_>,
) -> Result<OptimizerResult> {
    cfg.validate()?;
    let m = pool.len();
    if m == 0 {
        return Err(Error::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut run = Recorder {
        evaluator,
        pool,
        session,
        records: Vec::with_capacity(cfg.n_eval),
    };
    let mut seen = HashSet::new();
    for _ in 0..cfg.n_eval {
        let subset = fresh_subset(m, &seen, &mut rng)?;
        seen.insert(subset.clone());
        run.evaluate(subset, Phase::Rs, None)?;
    }
    OptimizerResult::from_records(run.records)
}
