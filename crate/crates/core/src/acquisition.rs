//! Expected improvement and its maximization over the subset lattice.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::pool::{sample_subset, SubsetVector};
use crate::surrogate::GPModel;

const VAR_TOLERANCE: f64 = 1e-10;

/// Closed-form expected improvement of a Gaussian `N(mean, var)` over `incumbent`.
pub fn expected_improvement(mean: f64, var: f64, incumbent: f64) -> Result<f64> {
    if !(mean.is_finite() && var.is_finite() && incumbent.is_finite()) {
        return Err(Error::NonFinite(format!(
            "expected improvement inputs mean={mean} var={var} incumbent={incumbent}"
        )));
    }
    if var < -VAR_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "negative posterior variance {var}"
        )));
    }
    let sigma = var.max(0.0).sqrt();
    if sigma == 0.0 {
        return Ok((mean - incumbent).max(0.0));
    }
    let z = (mean - incumbent) / sigma;
    let n = Normal::standard();
    Ok((sigma * (z * n.cdf(z) + n.pdf(z))).max(0.0))
}

/// Settings for [`propose`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalConfig {
    pub n_starts: usize,
    /// Hill-climbing steps per start; `None` means twice the pool size.
    pub max_steps: Option<usize>,
    /// Subsets that must not be proposed, typically everything evaluated so far.
    pub tabu: HashSet<SubsetVector>,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            n_starts: 16,
            max_steps: None,
            tabu: HashSet::new(),
        }
    }
}

impl ProposalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::InvalidArgument("n_starts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Memoized EI over subsets for a single proposal.
struct EiSurface<'a> {
    model: &'a GPModel,
    incumbent: f64,
    cache: HashMap<SubsetVector, f64>,
}

impl EiSurface<'_> {
    fn value(&mut self, e: &SubsetVector) -> Result<f64> {
        if let Some(&v) = self.cache.get(e) {
            return Ok(v);
        }
        let (mean, var) = self.model.posterior(e)?;
        let v = expected_improvement(mean, var, self.incumbent)?;
        self.cache.insert(e.clone(), v);
        Ok(v)
    }
}

/// Returns the subset to evaluate next: an approximate EI maximizer that is
/// neither empty nor tabu.
///
/// Multi-start steepest-ascent hill climbing over single-bit flips. The first
/// start is the best training input of `model`, the rest are fresh
/// [`sample_subset`] draws. Each step moves to the best strictly improving
/// neighbour, lowest flipped index first on ties.
pub fn propose<R: Rng + ?Sized>(
    model: &GPModel,
    incumbent: f64,
    cfg: &ProposalConfig,
    rng: &mut R,
) -> Result<SubsetVector> {
    cfg.validate()?;
    let m = model.dim();
    if m == 0 {
        return Err(Error::SearchExhausted);
    }
    if lattice_exhausted(m, &cfg.tabu) {
        return Err(Error::SearchExhausted);
    }
    let max_steps = cfg.max_steps.unwrap_or(2 * m);
    let admissible = |e: &SubsetVector| e.cardinality() > 0 && !cfg.tabu.contains(e);

    let mut surface = EiSurface {
        model,
        incumbent,
        cache: HashMap::new(),
    };
    let mut starts = Vec::with_capacity(cfg.n_starts);
    if let Some(best) = best_training_input(model) {
        starts.push(best.clone());
    }
    while starts.len() < cfg.n_starts {
        starts.push(sample_subset(m, rng)?);
    }

    let mut best: Option<(f64, SubsetVector)> = None;
    let mut consider = |v: f64, e: &SubsetVector| {
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, e.clone()));
        }
    };

    for start in starts {
        let mut current = start;
        let mut current_value = surface.value(&current)?;
        if admissible(&current) {
            consider(current_value, &current);
        }
        for _ in 0..max_steps {
            let mut step: Option<(f64, usize)> = None;
            for j in 0..m {
                let neighbour = current.flipped(j);
                if !admissible(&neighbour) {
                    continue;
                }
                let v = surface.value(&neighbour)?;
                consider(v, &neighbour);
                if step.is_none_or(|(b, _)| v > b) {
                    step = Some((v, j));
                }
            }
            match step {
                Some((v, j)) if v > current_value => {
                    current.flip(j);
                    current_value = v;
                }
                _ => break,
            }
        }
    }

    match best {
        Some((_, e)) => Ok(e),
        None => random_admissible(m, &cfg.tabu, rng),
    }
}

fn best_training_input(model: &GPModel) -> Option<&SubsetVector> {
    let targets = model.train_targets();
    let mut best: Option<usize> = None;
    for (i, &y) in targets.iter().enumerate() {
        if best.is_none_or(|b| y > targets[b]) {
            best = Some(i);
        }
    }
    best.map(|i| &model.train_inputs()[i])
}

fn lattice_exhausted(m: usize, tabu: &HashSet<SubsetVector>) -> bool {
    if m >= 64 {
        return false;
    }
    let nonempty = tabu
        .iter()
        .filter(|e| e.len() == m && e.cardinality() > 0)
        .count() as u64;
    nonempty >= (1u64 << m) - 1
}

/// Uniformly random nonempty subset outside `tabu`.
fn random_admissible<R: Rng + ?Sized>(
    m: usize,
    tabu: &HashSet<SubsetVector>,
    rng: &mut R,
) -> Result<SubsetVector> {
    const ATTEMPTS: usize = 10_000;
    if m > 20 {
        for _ in 0..ATTEMPTS {
            let e = sample_subset(m, rng)?;
            if !tabu.contains(&e) {
                return Ok(e);
            }
        }
        return Err(Error::SearchExhausted);
    }
    let free: Vec<u64> = (1..1u64 << m)
        .filter(|&code| !tabu.contains(&SubsetVector::from_code(m, code)))
        .collect();
    if free.is_empty() {
        return Err(Error::SearchExhausted);
    }
    Ok(SubsetVector::from_code(
        m,
        free[rng.random_range(0..free.len())],
    ))
}
