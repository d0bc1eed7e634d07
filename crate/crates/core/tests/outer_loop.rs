use std::collections::HashSet;

use bridge_core::optimizer::OptimizerConfig;
use bridge_core::orchestrator::{run, Backends, DatasetRefs, Discard, MilestoneLedger, Mode, OrchestratorConfig};
use bridge_core::pool::{base_id, Example, SubsetVector};
use bridge_core::runtime::synthetic::{
    interference_value, synthetic_generate, GenerationModelSpec, OracleKind, PopulationSpec, SyntheticEvaluator,
    SyntheticGenerator, SyntheticPopulation,
};
use bridge_core::runtime::Dataset;
use bridge_core::stats::{mean_std, sign_test_greater};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn world(size: usize, seed: u64) -> SyntheticPopulation {
    let spec = PopulationSpec {
        size,
        ..Default::default()
    };
    SyntheticPopulation::sample(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn top_half(pop: &SyntheticPopulation) -> SubsetVector {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| pop.quality[b].total_cmp(&pop.quality[a]));
    SubsetVector::from_indices(pop.len(), order[..pop.len() / 2].iter().copied()).unwrap()
}

#[test]
fn generation_seeded_by_good_items_raises_quality() {
    let mut diffs = Vec::new();
    for seed in 0..20 {
        let w = world(20, seed);
        let (next, pool) = synthetic_generate(
            &w,
            &top_half(&w),
            &GenerationModelSpec::default(),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        assert_eq!(pool.len(), next.correct.iter().filter(|&&c| c).count());
        assert_eq!(next.round, 1);
        diffs.push(next.mean_quality() - w.mean_quality());
    }
    let t = sign_test_greater(&diffs);
    assert!(t.p_value < 0.01, "{t:?}");
}

#[test]
fn generation_preserves_interaction_structure() {
    let w = world(12, 3);
    let full = SubsetVector::full(12);
    let (next, _) =
        synthetic_generate(&w, &full, &GenerationModelSpec::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(next.interaction, w.interaction);
    assert_eq!(next.normalizer, w.normalizer);
    assert!(interference_value(&next, &full).unwrap().is_finite());
}

fn data() -> DatasetRefs {
    DatasetRefs {
        train: Dataset::named("train"),
        validation: Dataset::named("validation"),
        ..Default::default()
    }
}

fn run_mode(mode: Mode, rounds: usize, w: &SyntheticPopulation, seed: u64, data: &DatasetRefs, target: &str) -> MilestoneLedger {
    let mut val = SyntheticEvaluator::new(OracleKind::Interference, w.clone(), 0.02, seed).unwrap();
    let mut test = SyntheticEvaluator::new(OracleKind::Interference, w.clone(), 0.02, seed + 500).unwrap();
    let mut gen = SyntheticGenerator::new(GenerationModelSpec::default(), seed)
        .unwrap()
        .with_population(target, w.clone());
    let cfg = OrchestratorConfig {
        rounds,
        mode,
        optimizer: OptimizerConfig::with_budget(24, seed),
        ..Default::default()
    };
    run(
        &cfg,
        data,
        Backends {
            evaluator: &mut val,
            test_evaluator: Some(&mut test),
            generator: &mut gen,
            embedder: None,
            embedding_cache: None,
        },
        &mut Discard,
    )
    .unwrap()
}

#[test]
fn restricted_pools_stay_within_round_zero_and_compare_with_unrestricted() {
    let mut restricted = Vec::new();
    let mut unrestricted = Vec::new();
    for seed in 0..20 {
        let w = world(20, 700 + seed);
        let r = run_mode(Mode::Restricted, 3, &w, seed, &data(), "train");
        let u = run_mode(Mode::Standard, 3, &w, seed, &data(), "train");
        let base: HashSet<&str> = r.pool0.ids().collect();
        let pool1 = r.pool(1).expect("round 1 pool");
        assert!(pool1.ids().all(|id| base.contains(base_id(id))));
        let key = "2G".parse().unwrap();
        restricted.push(r.metric(key).unwrap());
        unrestricted.push(u.metric(key).unwrap());
    }
    let (rm, _) = mean_std(&restricted).unwrap();
    let (um, _) = mean_std(&unrestricted).unwrap();
    println!("2G mean over 20 seeds: restricted {rm:.4}, unrestricted {um:.4}");
    assert!(rm.is_finite() && um.is_finite());
}

#[test]
fn mt_second_round_improves_on_first() {
    let mut diffs = Vec::new();
    for seed in 0..20 {
        let u = world(20, 900 + seed);
        let labelled = |prefix: &str, n: usize, q: f64| -> Vec<Example> {
            (0..n)
                .map(|i| {
                    let mut e = Example::new(format!("{prefix}{i}"), "src", "ref");
                    e.meta.insert("quality".into(), q.into());
                    e
                })
                .collect()
        };
        let d = DatasetRefs {
            train: Dataset::new("train", labelled("t", 4, 1.5)),
            validation: Dataset::new("validation", labelled("v", 2, 1.0)),
            unlabeled: Some(Dataset::named("unlabeled")),
            initial_pool: None,
        };
        let l = run_mode(Mode::Mt, 2, &u, seed, &d, "unlabeled");
        diffs.push(l.metric("2O".parse().unwrap()).unwrap() - l.metric("1O".parse().unwrap()).unwrap());
    }
    let t = sign_test_greater(&diffs);
    println!("MT 2O > 1O: {}/{} (p={:.3e})", t.positive, t.trials, t.p_value);
    assert!(t.p_value < 0.05, "{t:?}");
}
