//! `optimize` and `baseline`: run the outer loop into a run directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bridge_core::ledger::read_ledger;
use bridge_core::orchestrator::{self, Backends, MilestoneLedger, OptimizeSlot};
use bridge_core::pool::Phase;
use bridge_core::runtime::{Embedder, Evaluator, Observation, ReplayEvaluator};

use crate::backends;
use crate::config::LoadedConfig;
use crate::output::{trim_partial_line, FileObserver, Manifest, RunDir, Status, LEDGER_FILE, MILESTONES_FILE};

pub const EMBEDDING_CACHE: &str = "embeddings.txt";

#[derive(Debug)]
pub enum Outcome {
    Completed { dir: PathBuf, ledger: MilestoneLedger },
    AlreadyComplete { dir: PathBuf },
}

impl Outcome {
    pub fn dir(&self) -> &Path {
        match self {
            Outcome::Completed { dir, .. } | Outcome::AlreadyComplete { dir } => dir,
        }
    }
}

/// Directory of one seed's run under the output root.
pub fn run_dir(output: &Path, seed: u64, baseline: Option<OptimizeSlot>) -> PathBuf {
    let root = match baseline {
        Some(slot) => output.join(format!("baseline-{slot}")),
        None => output.to_path_buf(),
    };
    root.join(format!("seed-{seed}"))
}

/// Runs the configured mode. `baseline` replaces the optimize slot.
pub fn optimize(config_path: &Path, resume: bool, baseline: Option<OptimizeSlot>) -> Result<Outcome> {
    let mut loaded = LoadedConfig::load(config_path)?;
    let command = match baseline {
        Some(slot) => {
            loaded.config.optimize_slot = slot;
            "baseline"
        }
        None => "optimize",
    };
    let orch = loaded.config.orchestrator()?;
    let seed = loaded.config.seed;
    let hash = loaded.config.hash();
    let dir = RunDir::acquire(&run_dir(&loaded.output_dir(), seed, baseline))?;
    let dir_path = dir.path().to_path_buf();

    let mut resumed = false;
    if let Some(m) = dir.read_manifest()? {
        if m.config_hash != hash || m.seed != seed {
            bail!(
                "{} holds a run of a different configuration (config hash {}, seed {})",
                dir_path.display(),
                m.config_hash,
                m.seed
            );
        }
        match m.status {
            Status::Complete => return Ok(Outcome::AlreadyComplete { dir: dir_path }),
            _ if !resume => bail!(
                "{} holds an unfinished run; pass --resume to continue it",
                dir_path.display()
            ),
            _ => resumed = true,
        }
    }

    let (observer, validation_obs, test_obs) = if resumed {
        let n_entries = trim_partial_line(&dir.join(LEDGER_FILE))?;
        let n_milestones = trim_partial_line(&dir.join(MILESTONES_FILE))?;
        let entries = if n_entries > 0 { read_ledger(dir.join(LEDGER_FILE))? } else { Vec::new() };
        let split_test = loaded.config.test_evaluator.is_some();
        let (test, validation): (Vec<Observation>, Vec<Observation>) = {
            let (t, v): (Vec<_>, Vec<_>) = entries
                .iter()
                .partition(|e| split_test && e.phase == Phase::Milestone);
            (
                t.iter().map(|e| e.observation()).collect(),
                v.iter().map(|e| e.observation()).collect(),
            )
        };
        eprintln!(
            "resuming {}: replaying {} evaluations, {} milestones",
            dir_path.display(),
            n_entries,
            n_milestones
        );
        (FileObserver::resume(&dir_path, n_entries, n_milestones)?, validation, test)
    } else {
        (FileObserver::create(&dir_path)?, Vec::new(), Vec::new())
    };
    let mut observer = observer;

    let mut manifest = Manifest {
        command: command.into(),
        config_hash: hash,
        seed,
        status: Status::Running,
        error: None,
        config: serde_json::to_value(&loaded.config)?,
    };
    dir.write_manifest(&manifest)?;

    let built = backends::build(&loaded)?;
    let mut generator = built.generator;
    let mut embedder = built.embedder;
    let mut evaluator = ReplayEvaluator::new(validation_obs, built.evaluator);
    let mut test_evaluator = built.test_evaluator.map(|t| ReplayEvaluator::new(test_obs, t));
    let cache = dir.join(EMBEDDING_CACHE);
    let b = Backends {
        evaluator: &mut evaluator,
        test_evaluator: test_evaluator.as_mut().map(|t| t as &mut dyn Evaluator),
        generator: &mut generator,
        embedder: embedder.as_mut().map(|e| e as &mut dyn Embedder),
        embedding_cache: Some(&cache),
    };
    match orchestrator::run(&orch, &built.data, b, &mut observer) {
        Ok(ledger) => {
            manifest.status = Status::Complete;
            dir.write_manifest(&manifest)?;
            Ok(Outcome::Completed { dir: dir_path, ledger })
        }
        Err(e) => {
            manifest.status = Status::Failed;
            manifest.error = Some(e.to_string());
            dir.write_manifest(&manifest)?;
            Err(e).with_context(|| format!("run in {} failed; ledger kept", dir_path.display()))
        }
    }
}

/// Human-readable summary of a finished run.
pub fn summary(ledger: &MilestoneLedger) -> String {
    let mut out = String::from("milestone  metric\n");
    for m in &ledger.milestones {
        out.push_str(&format!("{:<9}  {:.6}\n", m.milestone.to_string(), m.metric));
    }
    out
}
