//! `analyze`: importance scores and ascending/descending sweeps on the
//! round-0 pool.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use bridge_core::importance::{importance_scores, sweep, AnalysisContext, Direction, RankedSweep};
use bridge_core::orchestrator::initial_pool;

use crate::backends;
use crate::chart::sweep_svg;
use crate::config::LoadedConfig;
use crate::output::{Manifest, RunDir, Status};

pub const IMPORTANCE_FILE: &str = "importance.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const CHART_FILE: &str = "sweep.svg";

#[derive(Debug)]
pub struct Analysis {
    pub dir: PathBuf,
    pub sweep: RankedSweep,
}

pub fn analysis_dir(output: &Path, seed: u64) -> PathBuf {
    output.join("analysis").join(format!("seed-{seed}"))
}

pub fn analyze(config_path: &Path) -> Result<Analysis> {
    let loaded = LoadedConfig::load(config_path)?;
    let c = &loaded.config;
    let hash = c.hash();
    let dir = RunDir::acquire(&analysis_dir(&loaded.output_dir(), c.seed))?;
    let mut manifest = Manifest {
        command: "analyze".into(),
        config_hash: hash.clone(),
        seed: c.seed,
        status: Status::Running,
        error: None,
        config: serde_json::to_value(c)?,
    };
    dir.write_manifest(&manifest)?;

    let mut built = backends::build(&loaded)?;
    let pool = initial_pool(c.mode, &built.data, &mut built.generator)?;
    let ctx = AnalysisContext {
        round: 0,
        split: &built.data.validation.name,
    };
    let a = &c.analysis;
    let scores = importance_scores(&mut built.evaluator, &pool, a.n_design, c.seed, ctx)?;
    let result = sweep(
        &mut built.evaluator,
        &pool,
        &scores.scores,
        a.step,
        a.replicates,
        ctx,
        &mut |_| Ok(()),
    )?;

    let mut csv = String::from("index,id,score\n");
    for (i, (id, s)) in pool.ids().zip(&scores.scores).enumerate() {
        csv.push_str(&format!("{i},{id},{s}\n"));
    }
    fs::write(dir.join(IMPORTANCE_FILE), csv)?;
    fs::write(dir.join(SWEEP_FILE), result.to_csv())?;
    let meta = format!("config_hash={hash} seed={}", c.seed);
    let title = format!("importance sweep, {} examples", pool.len());
    fs::write(dir.join(CHART_FILE), sweep_svg(&result, &title, &meta))?;

    manifest.status = Status::Complete;
    dir.write_manifest(&manifest)?;
    Ok(Analysis {
        dir: dir.path().to_path_buf(),
        sweep: result,
    })
}

pub fn summary(a: &Analysis) -> String {
    format!(
        "area ascending {:.6}\narea descending {:.6}\nwritten to {}\n",
        a.sweep.area(Direction::Ascending),
        a.sweep.area(Direction::Descending),
        a.dir.display()
    )
}
