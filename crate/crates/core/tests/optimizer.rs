use std::collections::HashSet;

use bridge_core::acquisition::{expected_improvement, propose, ProposalConfig};
use bridge_core::optimizer::{bayes_opt, OptimizerConfig, Session};
use bridge_core::pool::{sample_subset, EvaluationRecord, Phase, SubsetVector};
use bridge_core::runtime::synthetic::{OracleKind, PopulationSpec, SyntheticEvaluator, SyntheticPopulation};
use bridge_core::runtime::CountingEvaluator;
use bridge_core::surrogate::fit_gp;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn proposal_is_close_to_the_enumerated_acquisition_maximum() {
    let m = 8;
    let mut good = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<SubsetVector> = (0..10).map(|_| sample_subset(m, &mut rng).unwrap()).collect();
        let targets: Vec<f64> = inputs
            .iter()
            .map(|x| x.cardinality() as f64 * 0.1 + rng.random_range(-0.2..0.2))
            .collect();
        let model = fit_gp(&inputs, &targets).unwrap();
        let incumbent = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tabu: HashSet<SubsetVector> = inputs.iter().cloned().collect();
        let ei = |s: &SubsetVector| {
            let (mu, var) = model.posterior(s).unwrap();
            expected_improvement(mu, var, incumbent).unwrap()
        };
        let best = (1..1u64 << m)
            .map(|c| SubsetVector::from_code(m, c))
            .filter(|s| !tabu.contains(s))
            .map(|s| ei(&s))
            .fold(0.0, f64::max);
        let cfg = ProposalConfig {
            tabu: tabu.clone(),
            ..Default::default()
        };
        let got = propose(&model, incumbent, &cfg, &mut rng).unwrap();
        assert!(!tabu.contains(&got));
        assert!(got.cardinality() > 0);
        if ei(&got) >= 0.95 * best {
            good += 1;
        }
    }
    assert!(good >= 18, "proposal within 5% of the maximum in {good}/20 instances");
}

fn world(size: usize, seed: u64) -> SyntheticPopulation {
    let spec = PopulationSpec {
        size,
        ..Default::default()
    };
    let mut w = SyntheticPopulation::sample(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    w.correct = vec![true; size];
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn budget_and_phases_hold_for_any_setting(n_eval in 1usize..24, m in 1usize..9, seed in 0u64..1000) {
        let w = world(m, seed);
        let pool = w.pool();
        let mut ev = CountingEvaluator::new(SyntheticEvaluator::new(OracleKind::Interference, w, 0.05, seed).unwrap());
        let cfg = OptimizerConfig::with_budget(n_eval, seed);
        let mut seen = Vec::new();
        let mut sink = |r: &EvaluationRecord| {
            seen.push(r.clone());
            Ok(())
        };
        let mut s = Session { round: 1, split: "validation", timing: false, on_record: &mut sink };
        let res = bayes_opt(&mut ev, &pool, &cfg, &mut s).unwrap();
        prop_assert_eq!(ev.calls, n_eval);
        prop_assert_eq!(seen.len(), n_eval);
        prop_assert_eq!(&res.records, &seen);
        let n_init = cfg.n_init();
        for (i, r) in seen.iter().enumerate() {
            let phase = if i < n_init { Phase::Init } else { Phase::Bo };
            prop_assert_eq!(r.phase, phase);
            prop_assert!(r.subset.cardinality() > 0);
            prop_assert_eq!(r.subset.len(), m);
        }
        let max = seen.iter().map(|r| r.metric).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(res.best_metric, max);
    }
}
