//! Per-example importance from the gradient of a GP fitted on random subsets,
//! and the ascending/descending sweeps built from it.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::{sample_subset, ExamplePool, SubsetVector};
use crate::runtime::{evaluate_checked, EvalRequest, Evaluator};
use crate::surrogate::{fit_gp, GPModel};

/// Number of random design subsets used when none is configured.
pub const DEFAULT_N_DESIGN: usize = 64;

/// Importance score per pool example.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    pub scores: Vec<f64>,
    pub n_design: usize,
    pub seed: u64,
}

impl ImportanceVector {
    /// Pool indices sorted by score, ascending, ties by index.
    pub fn order(&self) -> Vec<usize> {
        ascending_order(&self.scores)
    }
}

/// Which end of the importance ranking a set is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ascending,
    Descending,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Ascending => "ascending",
            Direction::Descending => "descending",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where design evaluations are sent.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisContext<'a> {
    pub round: usize,
    pub split: &'a str,
}

impl Default for AnalysisContext<'_> {
    fn default() -> Self {
        AnalysisContext {
            round: 0,
            split: "validation",
        }
    }
}

/// Mean over the training inputs of the posterior-mean gradient.
pub fn scores_from_model(model: &GPModel) -> Result<Vec<f64>> {
    let inputs = model.train_inputs();
    if inputs.is_empty() {
        return Err(Error::InvalidArgument(
            "model has no training inputs".into(),
        ));
    }
    let mut scores = vec![0.0; model.dim()];
    for e in inputs {
        for (s, g) in scores.iter_mut().zip(model.posterior_gradient(e)?) {
            *s += g;
        }
    }
    let t = inputs.len() as f64;
    scores.iter_mut().for_each(|s| *s /= t);
    Ok(scores)
}

/// Scores every pool example by evaluating `n_design` random subsets,
/// fitting a GP to the metrics and averaging its gradient over the designs.
pub fn importance_scores<E: Evaluator + ?Sized>(
    evaluator: &mut E,
    pool: &ExamplePool,
    n_design: usize,
    seed: u64,
    ctx: AnalysisContext<'_>,
) -> Result<ImportanceVector> {
    let m = pool.len();
    if n_design < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_design must be >= 2, got {n_design}"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "importance needs m >= 2, got {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n_design);
    let mut targets = Vec::with_capacity(n_design);
    for _ in 0..n_design {
        let subset = sample_subset(m, &mut rng)?;
        let request = EvalRequest {
            round: ctx.round,
            split: ctx.split,
            pool,
            subset: &subset,
        };
        targets.push(evaluate_checked(evaluator, &request)?);
        inputs.push(subset);
    }
    let model = fit_gp(&inputs, &targets)?;
    Ok(ImportanceVector {
        scores: scores_from_model(&model)?,
        n_design,
        seed,
    })
}

fn ascending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order
}

/// The `t` lowest-scored (ascending) or highest-scored (descending) examples.
///
/// Ranking is by score with ties broken by pool index, lower index ranking
/// lower, so the two directions partition the pool: the descending set of
/// size `t` is the complement of the ascending set of size `m - t`.
pub fn build_ranked_sets(scores: &[f64], t: usize, direction: Direction) -> Result<SubsetVector> {
    let m = scores.len();
    if t == 0 || t > m {
        return Err(Error::InvalidArgument(format!(
            "set size {t} outside 1..={m}"
        )));
    }
    let order = ascending_order(scores);
    let chosen = match direction {
        Direction::Ascending => &order[..t],
        Direction::Descending => &order[m - t..],
    };
    SubsetVector::from_indices(m, chosen.iter().copied())
}

/// Set sizes `1, 1 + step, 1 + 2 step, ...` below `m`, then `m`.
pub fn sweep_sizes(m: usize, step: usize) -> Result<Vec<usize>> {
    if step == 0 {
        return Err(Error::InvalidArgument("sweep step must be >= 1".into()));
    }
    if m == 0 {
        return Err(Error::EmptyPool);
    }
    let mut sizes: Vec<usize> = (1..m).step_by(step).collect();
    sizes.push(m);
    Ok(sizes)
}

/// One evaluated point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub direction: Direction,
    pub t: usize,
    pub replicate: usize,
    pub metric: f64,
}

/// All points of a sweep, in (direction, t, replicate) order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSweep {
    pub order: Vec<usize>,
    pub points: Vec<SweepPoint>,
}

impl RankedSweep {
    /// Mean metric per set size for one direction, in increasing `t`.
    pub fn mean_curve(&self, direction: Direction) -> Vec<(usize, f64)> {
        let mut curve: Vec<(usize, f64, usize)> = Vec::new();
        for p in self.points.iter().filter(|p| p.direction == direction) {
            match curve.last_mut() {
                Some((t, sum, n)) if *t == p.t => {
                    *sum += p.metric;
                    *n += 1;
                }
                _ => curve.push((p.t, p.metric, 1)),
            }
        }
        curve
            .into_iter()
            .map(|(t, sum, n)| (t, sum / n as f64))
            .collect()
    }

    /// Trapezoidal area under the mean curve of one direction.
    pub fn area(&self, direction: Direction) -> f64 {
        let curve = self.mean_curve(direction);
        if curve.len() == 1 {
            return curve[0].1;
        }
        curve
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) as f64 * (w[0].1 + w[1].1) / 2.0)
            .sum()
    }

    /// Header and rows of the sweep table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("direction,t,replicate,metric\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.direction, p.t, p.replicate, p.metric
            ));
        }
        out
    }
}

/// Evaluates the ascending and descending sets at every size of
/// [`sweep_sizes`], `replicates` times each.
///
/// `on_point` sees each point as soon as it is measured, so a caller can
/// persist partial results before an evaluator failure is returned.
pub fn sweep<E: Evaluator + ?Sized>(
    evaluator: &mut E,
    pool: &ExamplePool,
    scores: &[f64],
    step: usize,
    replicates: usize,
    ctx: AnalysisContext<'_>,
    on_point: &mut dyn FnMut(&SweepPoint) -> Result<()>,
) -> Result<RankedSweep> {
    pool.check_len(&SubsetVector::empty(scores.len()))?;
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    let sizes = sweep_sizes(scores.len(), step)?;
    let mut points = Vec::with_capacity(2 * sizes.len() * replicates);
    for direction in [Direction::Ascending, Direction::Descending] {
        for &t in &sizes {
            let subset = build_ranked_sets(scores, t, direction)?;
            for replicate in 0..replicates {
                let request = EvalRequest {
                    round: ctx.round,
                    split: ctx.split,
                    pool,
                    subset: &subset,
                };
                let point = SweepPoint {
                    direction,
                    t,
                    replicate,
                    metric: evaluate_checked(evaluator, &request)?,
                };
                on_point(&point)?;
                points.push(point);
            }
        }
    }
    Ok(RankedSweep {
        order: ascending_order(scores),
        points,
    })
}
