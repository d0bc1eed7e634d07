//! Black-box contracts: evaluators score subsets, generators regenerate
//! pools, embedders map example text to vectors.
//!
//! [`synthetic`] provides desk-scale oracles with known structure and
//! [`process`] talks to an external backend over the line protocol defined in
//! [`protocol`].

pub mod process;
pub mod protocol;
pub mod synthetic;

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::pool::{round_id, Example, ExamplePool, SubsetVector};

/// A named split of labeled data (train, validation, unlabeled, test).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub name: String,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, examples: Vec<Example>) -> Self {
        Dataset {
            name: name.into(),
            examples,
        }
    }

    /// A handle that carries only a name; the backend owns the data.
    pub fn named(name: impl Into<String>) -> Self {
        Dataset::new(name, Vec::new())
    }
}

/// What an evaluator is asked to score.
#[derive(Debug, Clone, Copy)]
pub struct EvalRequest<'a> {
    pub round: usize,
    /// Name of the split the metric is computed on.
    pub split: &'a str,
    pub pool: &'a ExamplePool,
    pub subset: &'a SubsetVector,
}

/// The expensive black-box objective `g`. Higher is better.
pub trait Evaluator {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<f64>;

    /// Informs the evaluator of a result it did not compute itself (a replayed
    /// ledger entry), so that stateful evaluators stay in step with a run
    /// that was never interrupted.
    fn observe(&mut self, _request: &EvalRequest<'_>, _metric: f64) {}
}

impl<F> Evaluator for F
where
    F: FnMut(&EvalRequest<'_>) -> Result<f64>,
{
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<f64> {
        self(request)
    }
}

/// Input to one pool regeneration.
#[derive(Debug, Clone, Copy)]
pub struct GenerateRequest<'a> {
    pub round: usize,
    /// Name of the split the generator predicts on.
    pub target: &'a str,
    /// Demonstrations placed in context. Empty means zero-shot.
    pub seeds: &'a [Example],
}

/// Produces a fresh set of examples by re-predicting on a split.
pub trait Generator {
    fn generate(&mut self, request: &GenerateRequest<'_>) -> Result<Vec<Example>>;
}

impl<F> Generator for F
where
    F: FnMut(&GenerateRequest<'_>) -> Result<Vec<Example>>,
{
    fn generate(&mut self, request: &GenerateRequest<'_>) -> Result<Vec<Example>> {
        self(request)
    }
}

/// Maps example texts to fixed-dimension vectors.
pub trait Embedder {
    fn embed(&mut self, ids: &[String], texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Evaluates and wraps any failure with the ids of the subset being scored.
pub fn evaluate_checked<E: Evaluator + ?Sized>(
    evaluator: &mut E,
    request: &EvalRequest<'_>,
) -> Result<f64> {
    let wrap = |source: Error| Error::Evaluation {
        subset_ids: request.subset.ids(request.pool).unwrap_or_default(),
        source: Box::new(source),
    };
    let metric = evaluator.evaluate(request).map_err(wrap)?;
    if !metric.is_finite() {
        return Err(wrap(Error::NonFinite(format!("metric {metric}"))));
    }
    Ok(metric)
}

/// Normalizes a freshly generated example list into a round-`round` pool.
///
/// Every id is re-keyed to `<base>#r<round>`; when two examples share a base
/// id only the first is kept.
pub fn pool_from_generated(examples: Vec<Example>, round: usize) -> ExamplePool {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(examples.len());
    for mut ex in examples {
        if round > 0 {
            ex.id = round_id(&ex.id, round);
        }
        if seen.insert(ex.id.clone()) {
            out.push(ex);
        }
    }
    ExamplePool::new(out, round).expect("ids deduplicated above")
}

/// Counts calls on the way through to an inner evaluator.
#[derive(Debug)]
pub struct CountingEvaluator<E> {
    pub inner: E,
    pub calls: usize,
}

impl<E> CountingEvaluator<E> {
    pub fn new(inner: E) -> Self {
        CountingEvaluator { inner, calls: 0 }
    }
}

impl<E: Evaluator> Evaluator for CountingEvaluator<E> {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<f64> {
        self.calls += 1;
        self.inner.evaluate(request)
    }

    fn observe(&mut self, request: &EvalRequest<'_>, metric: f64) {
        self.inner.observe(request, metric);
    }
}

/// One previously observed evaluation, used to replay a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub round: usize,
    pub subset_ids: Vec<String>,
    pub metric: f64,
}

/// Answers from a recorded prefix of evaluations, then defers to `inner`.
///
/// Replay requires the same requests in the same order; a mismatch means the
/// run diverged from its ledger and is reported as an error.
#[derive(Debug)]
pub struct ReplayEvaluator<E> {
    recorded: VecDeque<Observation>,
    pub inner: E,
    pub replayed: usize,
}

impl<E> ReplayEvaluator<E> {
    pub fn new(recorded: impl IntoIterator<Item = Observation>, inner: E) -> Self {
        ReplayEvaluator {
            recorded: recorded.into_iter().collect(),
            inner,
            replayed: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.recorded.len()
    }
}

impl<E: Evaluator> Evaluator for ReplayEvaluator<E> {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<f64> {
        let Some(next) = self.recorded.pop_front() else {
            return self.inner.evaluate(request);
        };
        let ids = request.subset.ids(request.pool)?;
        if next.round != request.round || next.subset_ids != ids {
            return Err(Error::Backend(format!(
                "replay diverged: ledger has round {} [{}], run asked for round {} [{}]",
                next.round,
                next.subset_ids.join(","),
                request.round,
                ids.join(",")
            )));
        }
        self.replayed += 1;
        self.inner.observe(request, next.metric);
        Ok(next.metric)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> ExamplePool {
        ExamplePool::new(
            vec![Example::new("a", "x", "y"), Example::new("b", "x", "y")],
            0,
        )
        .unwrap()
    }

    #[test]
    fn checked_evaluation_wraps_errors_with_subset() {
        let p = pool();
        let s = SubsetVector::full(2);
        let mut failing =
            |_: &EvalRequest<'_>| -> Result<f64> { Err(Error::Backend("boom".into())) };
        let req = EvalRequest {
            round: 1,
            split: "validation",
            pool: &p,
            subset: &s,
        };
        let err = evaluate_checked(&mut failing, &req).unwrap_err();
        match err {
            Error::Evaluation { subset_ids, .. } => assert_eq!(subset_ids, ["a", "b"]),
            other => panic!("unexpected {other:?}"),
        }
        let mut nan = |_: &EvalRequest<'_>| -> Result<f64> { Ok(f64::NAN) };
        assert!(evaluate_checked(&mut nan, &req).is_err());
    }

    #[test]
    fn generated_ids_are_rekeyed_and_deduplicated() {
        let examples = vec![
            Example::new("ex1", "q", "a"),
            Example::new("ex2#r1", "q", "a"),
            Example::new("ex1#r1", "q", "b"),
        ];
        let p = pool_from_generated(examples, 2);
        assert_eq!(p.ids().collect::<Vec<_>>(), ["ex1#r2", "ex2#r2"]);
        assert_eq!(p.round(), 2);
    }

    #[test]
    fn replay_then_defer() {
        let p = pool();
        let s = SubsetVector::from_bit_str("10").unwrap();
        let rec = vec![Observation {
            round: 1,
            subset_ids: vec!["a".into()],
            metric: 0.25,
        }];
        let inner = |_: &EvalRequest<'_>| -> Result<f64> { Ok(0.75) };
        let mut ev = ReplayEvaluator::new(rec, inner);
        let req = EvalRequest {
            round: 1,
            split: "v",
            pool: &p,
            subset: &s,
        };
        assert_eq!(ev.evaluate(&req).unwrap(), 0.25);
        assert_eq!(ev.evaluate(&req).unwrap(), 0.75);
        assert_eq!(ev.replayed, 1);
    }

    #[test]
    fn replay_detects_divergence() {
        let p = pool();
        let s = SubsetVector::from_bit_str("01").unwrap();
        let rec = vec![Observation {
            round: 1,
            subset_ids: vec!["a".into()],
            metric: 0.25,
        }];
        let inner = |_: &EvalRequest<'_>| -> Result<f64> { Ok(0.75) };
        let mut ev = ReplayEvaluator::new(rec, inner);
        let req = EvalRequest {
            round: 1,
            split: "v",
            pool: &p,
            subset: &s,
        };
        assert!(ev.evaluate(&req).is_err());
    }
}
