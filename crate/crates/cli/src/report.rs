//! `report`: mean and standard deviation per milestone across seed runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bridge_core::orchestrator::MilestoneKey;
use bridge_core::stats::mean_std;

use crate::output::{read_manifest, read_milestones, MILESTONES_FILE};

pub const REPORT_FILE: &str = "report.csv";

/// Milestones the report marks as recommended stopping points.
pub const RECOMMENDED: [MilestoneKey; 2] = [MilestoneKey::Generated(2), MilestoneKey::Optimized(2)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Best,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub milestone: MilestoneKey,
    pub mean: f64,
    pub stdev: f64,
    pub runs: usize,
    pub rank: Option<Rank>,
    pub recommended: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<Row>,
    pub warnings: Vec<String>,
}

/// Run directories under `dir`: `dir` itself if it holds a milestone ledger,
/// otherwise its immediate subdirectories that do.
pub fn find_runs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    if dir.join(MILESTONES_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut runs = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.join(MILESTONES_FILE).is_file() {
            runs.push(path);
        }
    }
    runs.sort();
    Ok(runs)
}

pub fn build(dir: &Path) -> Result<Report> {
    let runs = find_runs(dir)?;
    if runs.is_empty() {
        bail!("no milestone ledgers under {}", dir.display());
    }
    let mut hash: Option<(String, PathBuf)> = None;
    let mut seeds = Vec::new();
    let mut values: BTreeMap<(usize, u8), (MilestoneKey, Vec<f64>)> = BTreeMap::new();
    let mut warnings = Vec::new();
    for run in &runs {
        let manifest = read_manifest(run)?.with_context(|| format!("{} has no manifest", run.display()))?;
        match &hash {
            None => hash = Some((manifest.config_hash.clone(), run.clone())),
            Some((h, first)) if *h != manifest.config_hash => bail!(
                "config hash mismatch: {} has {}, {} has {}",
                first.display(),
                h,
                run.display(),
                manifest.config_hash
            ),
            Some(_) => {}
        }
        if manifest.status != crate::output::Status::Complete {
            warnings.push(format!("{} is not complete", run.display()));
        }
        seeds.push(manifest.seed);
        for m in read_milestones(&run.join(MILESTONES_FILE))? {
            values
                .entry(m.milestone.sort_key())
                .or_insert_with(|| (m.milestone, Vec::new()))
                .1
                .push(m.metric);
        }
    }
    if runs.len() == 1 {
        warnings.push("single seed: standard deviations are 0 and not informative".into());
    }
    let mut rows: Vec<Row> = values
        .into_values()
        .map(|(milestone, v)| {
            let (mean, stdev) = mean_std(&v).expect("at least one value");
            Row {
                milestone,
                mean,
                stdev,
                runs: v.len(),
                rank: None,
                recommended: RECOMMENDED.contains(&milestone),
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    // Stable: ties go to the earlier milestone.
    order.sort_by(|&a, &b| rows[b].mean.total_cmp(&rows[a].mean));
    if let Some(&i) = order.first() {
        rows[i].rank = Some(Rank::Best);
    }
    if let Some(&i) = order.get(1) {
        rows[i].rank = Some(Rank::Second);
    }
    Ok(Report {
        config_hash: hash.expect("at least one run").0,
        seeds,
        rows,
        warnings,
    })
}

fn rank_label(r: Option<Rank>) -> &'static str {
    match r {
        Some(Rank::Best) => "best",
        Some(Rank::Second) => "second",
        None => "",
    }
}

impl Report {
    fn seed_list(&self) -> String {
        self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
    }

    /// Milestones as columns.
    pub fn to_table(&self) -> String {
        let cells = |f: &dyn Fn(&Row) -> String| -> Vec<String> { self.rows.iter().map(f).collect() };
        let lines: Vec<(&str, Vec<String>)> = vec![
            ("milestone", cells(&|r| r.milestone.to_string())),
            ("mean±sd", cells(&|r| format!("{:.4}±{:.4}", r.mean, r.stdev))),
            ("runs", cells(&|r| r.runs.to_string())),
            ("rank", cells(&|r| rank_label(r.rank).to_string())),
            (
                "note",
                cells(&|r| if r.recommended { "stop here".into() } else { String::new() }),
            ),
        ];
        let widths: Vec<usize> = (0..self.rows.len())
            .map(|i| lines.iter().map(|(_, c)| c[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = format!(
            "config {} seeds {} ({} runs)\n",
            self.config_hash,
            self.seed_list(),
            self.seeds.len()
        );
        for (label, c) in &lines {
            let mut line = format!("{label:<9}");
            for (cell, w) in c.iter().zip(&widths) {
                line.push_str("  ");
                line.push_str(cell);
                line.push_str(&" ".repeat(w - cell.chars().count()));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("milestone,mean,stdev,runs,rank,recommended,config_hash,seeds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.milestone,
                r.mean,
                r.stdev,
                r.runs,
                rank_label(r.rank),
                r.recommended,
                self.config_hash,
                self.seed_list()
            ));
        }
        out
    }
}

/// Builds the report and writes it next to the runs.
pub fn report(dir: &Path) -> Result<Report> {
    let r = build(dir)?;
    fs::write(dir.join(REPORT_FILE), r.to_csv())?;
    Ok(r)
}
