//! Synthetic populations with known structure, the oracles defined on them
//! and a pull-to-seed regeneration model.
//!
//! Every item `j` has a latent quality `q_j`; a symmetric interaction matrix
//! `W` (zero diagonal) models pairs of demonstrations that help or hurt each
//! other. Synthetic examples carry their item index and current quality in
//! `meta`, so an evaluator can score any pool drawn from the population
//! without sharing mutable state with the generator.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::pool::{base_id, round_id, Example, ExamplePool, SubsetVector};
use crate::runtime::{EvalRequest, Evaluator, GenerateRequest, Generator};
use crate::util::{logistic, Fnv1a};

/// `meta` key holding an example's latent quality.
pub const QUALITY_KEY: &str = "quality";
/// `meta` key holding an example's item index in its population.
pub const ITEM_KEY: &str = "item";

/// Parameters for drawing a random population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationSpec {
    pub size: usize,
    pub quality_mean: f64,
    pub quality_sd: f64,
    /// Probability that a pair of items interferes.
    pub harmful_pair_rate: f64,
    /// Typical magnitude of a harmful interaction.
    pub harm_strength: f64,
    pub correctness_slope: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            size: 24,
            quality_mean: 0.0,
            quality_sd: 1.0,
            harmful_pair_rate: 0.1,
            harm_strength: 1.0,
            correctness_slope: 2.0,
        }
    }
}

/// Regeneration dynamics of the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationModelSpec {
    /// Pull rate toward the seed mean, in `[0, 1]`.
    pub pull_rate: f64,
    pub quality_noise_sd: f64,
    pub correctness_slope: f64,
}

impl Default for GenerationModelSpec {
    fn default() -> Self {
        GenerationModelSpec {
            pull_rate: 0.5,
            quality_noise_sd: 0.1,
            correctness_slope: 2.0,
        }
    }
}

impl GenerationModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pull_rate) {
            return Err(Error::InvalidArgument(format!(
                "pull_rate must lie in [0, 1], got {}",
                self.pull_rate
            )));
        }
        if !(self.quality_noise_sd >= 0.0 && self.quality_noise_sd.is_finite()) {
            return Err(Error::InvalidArgument(
                "quality_noise_sd must be >= 0".into(),
            ));
        }
        if !(self.correctness_slope > 0.0 && self.correctness_slope.is_finite()) {
            return Err(Error::InvalidArgument(
                "correctness_slope must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Which closed-form objective a [`SyntheticEvaluator`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Additive,
    Interference,
}

/// Latent state of a set of synthetic items.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPopulation {
    /// Base ids, one per item.
    pub ids: Vec<String>,
    pub quality: Vec<f64>,
    /// Per-item difficulty in `(0, 1)`; item `j` is answered correctly iff
    /// `threshold[j] < logistic(slope * quality[j])`.
    pub threshold: Vec<f64>,
    pub correct: Vec<bool>,
    pub interaction: DMatrix<f64>,
    /// Fixed at creation so that metrics stay comparable across rounds.
    pub normalizer: f64,
    pub round: usize,
}

impl SyntheticPopulation {
    /// Builds a population, validating shapes and the interaction matrix.
    pub fn new(
        ids: Vec<String>,
        quality: Vec<f64>,
        interaction: DMatrix<f64>,
        threshold: Vec<f64>,
        correctness_slope: f64,
    ) -> Result<Self> {
        let m = ids.len();
        for (what, len) in [("quality", quality.len()), ("threshold", threshold.len())] {
            if len != m {
                return Err(Error::InvalidArgument(format!(
                    "{what} has {len} entries for {m} items"
                )));
            }
        }
        if interaction.nrows() != m || interaction.ncols() != m {
            return Err(Error::InvalidArgument(format!(
                "interaction matrix is {}x{} for {m} items",
                interaction.nrows(),
                interaction.ncols()
            )));
        }
        if quality
            .iter()
            .chain(interaction.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("population entries".into()));
        }
        for i in 0..m {
            if interaction[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(
                    "interaction diagonal must be zero".into(),
                ));
            }
            for j in 0..i {
                if interaction[(i, j)] != interaction[(j, i)] {
                    return Err(Error::InvalidArgument(
                        "interaction matrix must be symmetric".into(),
                    ));
                }
            }
        }
        let positive: f64 = quality.iter().map(|q| q.max(0.0)).sum();
        let normalizer = if positive > 0.0 { positive } else { 1.0 };
        let correct = quality
            .iter()
            .zip(&threshold)
            .map(|(&q, &u)| u < logistic(correctness_slope * q))
            .collect();
        Ok(SyntheticPopulation {
            ids,
            quality,
            threshold,
            correct,
            interaction,
            normalizer,
            round: 0,
        })
    }

    /// Population with the given qualities, no interactions, and every item correct.
    pub fn additive(quality: Vec<f64>) -> Result<Self> {
        let m = quality.len();
        let ids = (0..m).map(|j| format!("ex{j}")).collect();
        let mut pop =
            SyntheticPopulation::new(ids, quality, DMatrix::zeros(m, m), vec![0.0; m], 1.0)?;
        pop.correct = vec![true; m];
        Ok(pop)
    }

    /// Draws a random population.
    pub fn sample<R: Rng + ?Sized>(spec: &PopulationSpec, rng: &mut R) -> Result<Self> {
        if spec.size == 0 {
            return Err(Error::InvalidArgument(
                "population size must be >= 1".into(),
            ));
        }
        let m = spec.size;
        let quality_dist = Normal::new(spec.quality_mean, spec.quality_sd)
            .map_err(|e| Error::InvalidArgument(format!("quality distribution: {e}")))?;
        let quality: Vec<f64> = (0..m).map(|_| quality_dist.sample(rng)).collect();
        let threshold: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let mut interaction = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in (i + 1)..m {
                if rng.random::<f64>() < spec.harmful_pair_rate {
                    let w = -spec.harm_strength * rng.random_range(0.5..1.5);
                    interaction[(i, j)] = w;
                    interaction[(j, i)] = w;
                }
            }
        }
        let ids = (0..m).map(|j| format!("ex{j}")).collect();
        SyntheticPopulation::new(ids, quality, interaction, threshold, spec.correctness_slope)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        let base = base_id(id);
        self.ids.iter().position(|i| i == base)
    }

    pub fn mean_quality(&self) -> f64 {
        self.quality.iter().sum::<f64>() / self.len().max(1) as f64
    }

    /// The example for item `j` at this population's round.
    pub fn example(&self, j: usize) -> Example {
        let id = if self.round == 0 {
            self.ids[j].clone()
        } else {
            round_id(&self.ids[j], self.round)
        };
        let mut ex = Example::new(
            id,
            format!("synthetic question {j} about topic {}", j % 7),
            format!("answer {j}"),
        );
        ex.rationale = format!("reasoning for item {j} at round {}", self.round);
        ex.correct = self.correct[j];
        ex.meta.insert(ITEM_KEY.into(), json!(j));
        ex.meta.insert(QUALITY_KEY.into(), json!(self.quality[j]));
        ex
    }

    /// Every item, correct or not.
    pub fn examples(&self) -> Vec<Example> {
        (0..self.len()).map(|j| self.example(j)).collect()
    }

    /// Pool of the items answered correctly.
    pub fn pool(&self) -> ExamplePool {
        let examples = (0..self.len())
            .filter(|&j| self.correct[j])
            .map(|j| self.example(j))
            .collect();
        ExamplePool::new(examples, self.round).expect("population ids are unique")
    }

    /// The population restricted to the items of `pool`, in pool order.
    ///
    /// Qualities come from each example's `meta` when present, so a pool
    /// from any round can be scored against the round-0 interaction matrix.
    pub fn view(&self, pool: &ExamplePool) -> Result<SyntheticPopulation> {
        let mut items = Vec::with_capacity(pool.len());
        let mut quality = Vec::with_capacity(pool.len());
        for ex in pool.examples() {
            let j = match ex.meta.get(ITEM_KEY).and_then(Value::as_u64) {
                Some(j) if (j as usize) < self.len() => j as usize,
                _ => self
                    .index_of(&ex.id)
                    .ok_or_else(|| Error::UnknownId(ex.id.clone()))?,
            };
            let q = match ex.meta.get(QUALITY_KEY) {
                Some(v) => v.as_f64().ok_or_else(|| {
                    Error::InvalidArgument(format!("example {:?} has a non-numeric quality", ex.id))
                })?,
                None => self.quality[j],
            };
            items.push(j);
            quality.push(q);
        }
        let m = items.len();
        Ok(SyntheticPopulation {
            ids: items.iter().map(|&j| self.ids[j].clone()).collect(),
            quality,
            threshold: items.iter().map(|&j| self.threshold[j]).collect(),
            correct: vec![true; m],
            interaction: DMatrix::from_fn(m, m, |a, b| self.interaction[(items[a], items[b])]),
            normalizer: self.normalizer,
            round: pool.round(),
        })
    }

    fn check_subset(&self, subset: &SubsetVector) -> Result<()> {
        if subset.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: subset.len(),
            });
        }
        Ok(())
    }
}

/// Noiseless additive objective `sum_j q_j e_j / normalizer`, unclamped.
pub fn additive_value(pop: &SyntheticPopulation, subset: &SubsetVector) -> Result<f64> {
    pop.check_subset(subset)?;
    let total: f64 = subset.ones().map(|j| pop.quality[j]).sum();
    Ok(total / pop.normalizer)
}

/// Noiseless interference objective
/// `(sum_j q_j e_j + sum_{i<j} W_ij e_i e_j) / normalizer`, unclamped.
pub fn interference_value(pop: &SyntheticPopulation, subset: &SubsetVector) -> Result<f64> {
    pop.check_subset(subset)?;
    let chosen: Vec<usize> = subset.ones().collect();
    let mut total: f64 = chosen.iter().map(|&j| pop.quality[j]).sum();
    for (a, &i) in chosen.iter().enumerate() {
        for &j in &chosen[a + 1..] {
            total += pop.interaction[(i, j)];
        }
    }
    Ok(total / pop.normalizer)
}

fn noisy_clamped(value: f64, noise_sd: f64, noise_seed: u64) -> Result<f64> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise_sd must be >= 0, got {noise_sd}"
        )));
    }
    let noise = if noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        Normal::new(0.0, noise_sd)
            .expect("validated standard deviation")
            .sample(&mut rng)
    } else {
        0.0
    };
    Ok((value + noise).clamp(0.0, 1.0))
}

/// Additive oracle: [`additive_value`] plus `N(0, noise_sd^2)` noise drawn
/// from a stream seeded by `noise_seed`, clamped to `[0, 1]`.
pub fn additive_oracle(
    pop: &SyntheticPopulation,
    subset: &SubsetVector,
    noise_sd: f64,
    noise_seed: u64,
) -> Result<f64> {
    noisy_clamped(additive_value(pop, subset)?, noise_sd, noise_seed)
}

/// Interference oracle: [`interference_value`] with noise, clamped to `[0, 1]`.
pub fn interference_oracle(
    pop: &SyntheticPopulation,
    subset: &SubsetVector,
    noise_sd: f64,
    noise_seed: u64,
) -> Result<f64> {
    noisy_clamped(interference_value(pop, subset)?, noise_sd, noise_seed)
}

/// Moves every quality toward `seed_mean`: `q' = q + pull (seed_mean - q) + noise`,
/// then recomputes correctness. The result is tagged with `round`.
pub fn regenerate<R: Rng + ?Sized>(
    pop: &SyntheticPopulation,
    seed_mean: f64,
    round: usize,
    spec: &GenerationModelSpec,
    rng: &mut R,
) -> Result<SyntheticPopulation> {
    spec.validate()?;
    if !seed_mean.is_finite() {
        return Err(Error::NonFinite(format!("seed mean {seed_mean}")));
    }
    let noise = Normal::new(0.0, spec.quality_noise_sd).expect("validated noise");
    let quality: Vec<f64> = pop
        .quality
        .iter()
        .map(|&q| {
            let eps = if spec.quality_noise_sd > 0.0 {
                noise.sample(rng)
            } else {
                0.0
            };
            q + spec.pull_rate * (seed_mean - q) + eps
        })
        .collect();
    let correct = quality
        .iter()
        .zip(&pop.threshold)
        .map(|(&q, &u)| u < logistic(spec.correctness_slope * q))
        .collect();
    Ok(SyntheticPopulation {
        ids: pop.ids.clone(),
        quality,
        threshold: pop.threshold.clone(),
        correct,
        interaction: pop.interaction.clone(),
        normalizer: pop.normalizer,
        round,
    })
}

/// Regenerates `pop` seeded by the items in `seed_subset` and returns the new
/// population together with its pool of correct examples.
pub fn synthetic_generate<R: Rng + ?Sized>(
    pop: &SyntheticPopulation,
    seed_subset: &SubsetVector,
    spec: &GenerationModelSpec,
    rng: &mut R,
) -> Result<(SyntheticPopulation, ExamplePool)> {
    pop.check_subset(seed_subset)?;
    let n = seed_subset.cardinality();
    if n == 0 {
        return Err(Error::InvalidArgument("seed subset is empty".into()));
    }
    let seed_mean = seed_subset.ones().map(|j| pop.quality[j]).sum::<f64>() / n as f64;
    let next = regenerate(pop, seed_mean, pop.round + 1, spec, rng)?;
    let pool = next.pool();
    Ok((next, pool))
}

/// Evaluator backed by [`additive_oracle`] or [`interference_oracle`].
///
/// Noise is a pure function of `(seed, round, split, subset, k)` where `k`
/// counts earlier evaluations of the same request, so a fresh evaluator
/// reproduces any sequence of calls exactly while repeated calls still see
/// independent noise.
#[derive(Debug, Clone)]
pub struct SyntheticEvaluator {
    kind: OracleKind,
    world: SyntheticPopulation,
    noise_sd: f64,
    seed: u64,
    seen: HashMap<u64, u64>,
}

impl SyntheticEvaluator {
    pub fn new(
        kind: OracleKind,
        world: SyntheticPopulation,
        noise_sd: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_sd must be >= 0, got {noise_sd}"
            )));
        }
        Ok(SyntheticEvaluator {
            kind,
            world,
            noise_sd,
            seed,
            seen: HashMap::new(),
        })
    }

    pub fn world(&self) -> &SyntheticPopulation {
        &self.world
    }

    fn request_key(&self, request: &EvalRequest<'_>) -> Result<u64> {
        let mut h = Fnv1a::default();
        h.write_u64(self.seed)
            .write_u64(request.round as u64)
            .write_str(request.split);
        for id in request.subset.ids(request.pool)? {
            h.write_str(&id);
        }
        Ok(h.finish())
    }

    fn next_noise_seed(&mut self, request: &EvalRequest<'_>) -> Result<u64> {
        let key = self.request_key(request)?;
        let k = self.seen.entry(key).or_insert(0);
        let seed = Fnv1a::default().write_u64(key).write_u64(*k).finish();
        *k += 1;
        Ok(seed)
    }
}

impl Evaluator for SyntheticEvaluator {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<f64> {
        request.pool.check_len(request.subset)?;
        let view = self.world.view(request.pool)?;
        let noise_seed = self.next_noise_seed(request)?;
        match self.kind {
            OracleKind::Additive => {
                additive_oracle(&view, request.subset, self.noise_sd, noise_seed)
            }
            OracleKind::Interference => {
                interference_oracle(&view, request.subset, self.noise_sd, noise_seed)
            }
        }
    }

    fn observe(&mut self, request: &EvalRequest<'_>, _metric: f64) {
        let _ = self.next_noise_seed(request);
    }
}

/// Generator over one or more named synthetic populations.
///
/// An empty seed list returns the target population unchanged (zero-shot
/// prediction); otherwise the population is regenerated toward the mean
/// quality of the seed examples, read from their `meta`.
#[derive(Debug, Clone)]
pub struct SyntheticGenerator {
    populations: HashMap<String, SyntheticPopulation>,
    spec: GenerationModelSpec,
    rng: ChaCha8Rng,
    pub calls: usize,
}

impl SyntheticGenerator {
    pub fn new(spec: GenerationModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(SyntheticGenerator {
            populations: HashMap::new(),
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            calls: 0,
        })
    }

    pub fn with_population(mut self, target: impl Into<String>, pop: SyntheticPopulation) -> Self {
        self.populations.insert(target.into(), pop);
        self
    }

    pub fn population(&self, target: &str) -> Option<&SyntheticPopulation> {
        self.populations.get(target)
    }
}

/// Mean latent quality of synthetic examples.
pub fn mean_example_quality(examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no examples".into()));
    }
    let mut total = 0.0;
    for ex in examples {
        total += ex
            .meta
            .get(QUALITY_KEY)
            .and_then(Value::as_f64)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("example {:?} has no latent quality", ex.id))
            })?;
    }
    Ok(total / examples.len() as f64)
}

impl Generator for SyntheticGenerator {
    fn generate(&mut self, request: &GenerateRequest<'_>) -> Result<Vec<Example>> {
        self.calls += 1;
        let pop = self.populations.get(request.target).ok_or_else(|| {
            Error::Backend(format!(
                "no synthetic population for split {:?}",
                request.target
            ))
        })?;
        if request.seeds.is_empty() {
            return Ok(pop.examples());
        }
        let seed_mean = mean_example_quality(request.seeds)?;
        let next = regenerate(pop, seed_mean, request.round, &self.spec, &mut self.rng)?;
        let out = next.examples();
        self.populations.insert(request.target.to_string(), next);
        Ok(out)
    }
}
