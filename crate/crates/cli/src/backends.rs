//! Builds the configured evaluators, generator and embedder.

use std::time::Duration;

use anyhow::{Context, Result};
use bridge_core::baselines::HashEmbedder;
use bridge_core::orchestrator::{DatasetRefs, Mode};
use bridge_core::pool::{load_pool, Example};
use bridge_core::runtime::process::ExternalBackend;
use bridge_core::runtime::synthetic::{SyntheticEvaluator, SyntheticGenerator, SyntheticPopulation};
use bridge_core::runtime::{Dataset, Embedder, EvalRequest, Evaluator, GenerateRequest, Generator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{EmbedderSpec, EvaluatorSpec, ExternalSpec, GeneratorSpec, LoadedConfig};

pub enum AnyEvaluator {
    Synthetic(SyntheticEvaluator),
    External(ExternalBackend),
}

impl Evaluator for AnyEvaluator {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> bridge_core::Result<f64> {
        match self {
            AnyEvaluator::Synthetic(e) => e.evaluate(request),
            AnyEvaluator::External(e) => e.evaluate(request),
        }
    }

    fn observe(&mut self, request: &EvalRequest<'_>, metric: f64) {
        match self {
            AnyEvaluator::Synthetic(e) => e.observe(request, metric),
            AnyEvaluator::External(e) => e.observe(request, metric),
        }
    }
}

pub enum AnyGenerator {
    Synthetic(Box<SyntheticGenerator>),
    External(ExternalBackend),
}

impl Generator for AnyGenerator {
    fn generate(&mut self, request: &GenerateRequest<'_>) -> bridge_core::Result<Vec<Example>> {
        match self {
            AnyGenerator::Synthetic(g) => g.generate(request),
            AnyGenerator::External(g) => g.generate(request),
        }
    }
}

pub enum AnyEmbedder {
    Hash(HashEmbedder),
    External(ExternalBackend),
}

impl Embedder for AnyEmbedder {
    fn embed(&mut self, ids: &[String], texts: &[String]) -> bridge_core::Result<Vec<Vec<f64>>> {
        match self {
            AnyEmbedder::Hash(e) => e.embed(ids, texts),
            AnyEmbedder::External(e) => e.embed(ids, texts),
        }
    }
}

/// Everything a run needs besides the orchestrator settings.
pub struct Built {
    pub evaluator: AnyEvaluator,
    pub test_evaluator: Option<AnyEvaluator>,
    pub generator: AnyGenerator,
    pub embedder: Option<AnyEmbedder>,
    pub data: DatasetRefs,
}

fn spawn(spec: &ExternalSpec, what: &str) -> Result<ExternalBackend> {
    ExternalBackend::spawn(&spec.command, Duration::from_millis(spec.timeout_ms))
        .with_context(|| format!("starting {what} backend {:?}", spec.command))
}

pub fn build(loaded: &LoadedConfig) -> Result<Built> {
    let c = &loaded.config;
    let mut cached: Option<SyntheticPopulation> = None;
    let mut world = || -> Result<SyntheticPopulation> {
        if let Some(w) = &cached {
            return Ok(w.clone());
        }
        let seed = c.population.seed.unwrap_or(c.seed);
        let w = SyntheticPopulation::sample(&c.population.spec(), &mut ChaCha8Rng::seed_from_u64(seed))
            .context("population")?;
        cached = Some(w.clone());
        Ok(w)
    };
    let make_evaluator = |spec: &EvaluatorSpec, what: &str, world: &mut dyn FnMut() -> Result<SyntheticPopulation>| {
        Ok::<_, anyhow::Error>(match spec {
            EvaluatorSpec::Synthetic(s) => {
                AnyEvaluator::Synthetic(SyntheticEvaluator::new(s.oracle.into(), world()?, s.noise_sd, c.seed)?)
            }
            EvaluatorSpec::External(s) => AnyEvaluator::External(spawn(s, what)?),
        })
    };
    let evaluator = make_evaluator(&c.evaluator, "evaluator", &mut world)?;
    let test_evaluator = match &c.test_evaluator {
        Some(spec) => Some(make_evaluator(spec, "test evaluator", &mut world)?),
        None => None,
    };
    let generator = match &c.generator {
        GeneratorSpec::Synthetic(_) => {
            let w = world()?;
            let mut g = SyntheticGenerator::new(c.generation.spec(), c.seed)?.with_population(&c.data.train, w.clone());
            if let Some(u) = &c.data.unlabeled {
                g = g.with_population(u, w);
            }
            AnyGenerator::Synthetic(Box::new(g))
        }
        GeneratorSpec::External(s) => AnyGenerator::External(spawn(s, "generator")?),
    };
    let embedder = match &c.embedder {
        Some(EmbedderSpec::Hash(h)) => Some(AnyEmbedder::Hash(HashEmbedder::new(h.dim)?)),
        Some(EmbedderSpec::External(s)) => Some(AnyEmbedder::External(spawn(s, "embedder")?)),
        None => None,
    };
    Ok(Built {
        evaluator,
        test_evaluator,
        generator,
        embedder,
        data: datasets(loaded)?,
    })
}

fn datasets(loaded: &LoadedConfig) -> Result<DatasetRefs> {
    let d = &loaded.config.data;
    let read = |file: &Option<std::path::PathBuf>| -> Result<Vec<Example>> {
        match file {
            Some(p) => {
                let path = loaded.resolve(p);
                Ok(load_pool(&path)
                    .with_context(|| format!("reading {}", path.display()))?
                    .into_examples())
            }
            None => Ok(Vec::new()),
        }
    };
    let initial_pool = match &d.initial_pool {
        Some(p) => {
            let path = loaded.resolve(p);
            Some(load_pool(&path).with_context(|| format!("reading {}", path.display()))?)
        }
        None => None,
    };
    let unlabeled = d.unlabeled.as_ref().map(Dataset::named);
    if loaded.config.mode == Mode::Mt && unlabeled.is_none() {
        anyhow::bail!("mode = \"mt\" needs data.unlabeled");
    }
    Ok(DatasetRefs {
        train: Dataset::new(&d.train, read(&d.train_file)?),
        validation: Dataset::new(&d.validation, read(&d.validation_file)?),
        unlabeled,
        initial_pool,
    })
}
