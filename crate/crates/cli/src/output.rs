//! Run directories: lock, manifest, ledgers and pool snapshots.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bridge_core::ledger::{LedgerEntry, RunLedger};
use bridge_core::orchestrator::{pool_file_name, Milestone, RunObserver};
use bridge_core::pool::{save_pool, ExamplePool};
use serde::{Deserialize, Serialize};

pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const MILESTONES_FILE: &str = "milestones.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lock";

/// A run directory held under an exclusive lock for the life of the value.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    _lock: File,
}

impl RunDir {
    pub fn acquire(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        let lock_path = path.join(LOCK_FILE);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .with_context(|| format!("opening {}", lock_path.display()))?;
        if lock.try_lock().is_err() {
            bail!("{} is in use by another run", path.display());
        }
        Ok(RunDir {
            path: path.to_path_buf(),
            _lock: lock,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn join(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.path.join(rel)
    }

    pub fn read_manifest(&self) -> Result<Option<Manifest>> {
        read_manifest(&self.path)
    }

    /// Replaces the manifest atomically.
    pub fn write_manifest(&self, manifest: &Manifest) -> Result<()> {
        let tmp = self.join(format!("{MANIFEST_FILE}.tmp"));
        let mut text = serde_json::to_string_pretty(manifest)?;
        text.push('\n');
        fs::write(&tmp, text)?;
        fs::rename(&tmp, self.join(MANIFEST_FILE))?;
        Ok(())
    }
}

pub fn read_manifest(dir: &Path) -> Result<Option<Manifest>> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    let m = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Failed,
    Complete,
}

/// Identity and state of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// The effective configuration, defaults filled in.
    pub config: serde_json::Value,
}

/// Drops a trailing partial line left by an interrupted write and returns the
/// number of complete lines.
pub fn trim_partial_line(path: &Path) -> Result<usize> {
    if !path.exists() {
        return Ok(0);
    }
    let bytes = fs::read(path)?;
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if keep < bytes.len() {
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(keep as u64)?;
    }
    Ok(bytes[..keep].iter().filter(|&&b| b == b'\n').count())
}

/// Writes ledger lines, milestone lines and pool snapshots as they appear.
///
/// The first `skip_entries` evaluations and `skip_milestones` milestones are
/// already on disk from an interrupted run and are not written again.
pub struct FileObserver {
    dir: PathBuf,
    ledger: RunLedger,
    milestones: File,
    skip_entries: usize,
    skip_milestones: usize,
}

impl FileObserver {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join("pools"))?;
        Ok(FileObserver {
            dir: dir.to_path_buf(),
            ledger: RunLedger::create(dir.join(LEDGER_FILE))?,
            milestones: File::create(dir.join(MILESTONES_FILE))?,
            skip_entries: 0,
            skip_milestones: 0,
        })
    }

    pub fn resume(dir: &Path, skip_entries: usize, skip_milestones: usize) -> Result<Self> {
        fs::create_dir_all(dir.join("pools"))?;
        let milestones = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(MILESTONES_FILE))?;
        Ok(FileObserver {
            dir: dir.to_path_buf(),
            ledger: RunLedger::append_to(dir.join(LEDGER_FILE))?,
            milestones,
            skip_entries,
            skip_milestones,
        })
    }
}

impl RunObserver for FileObserver {
    fn on_pool(&mut self, round: usize, pool: &ExamplePool) -> bridge_core::Result<()> {
        let path = self.dir.join(pool_file_name(round));
        let tmp = path.with_extension("jsonl.tmp");
        save_pool(pool, &tmp)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    fn on_evaluation(&mut self, entry: &LedgerEntry) -> bridge_core::Result<()> {
        if self.skip_entries > 0 {
            self.skip_entries -= 1;
            return Ok(());
        }
        self.ledger.append(entry)
    }

    fn on_milestone(&mut self, milestone: &Milestone) -> bridge_core::Result<()> {
        if self.skip_milestones > 0 {
            self.skip_milestones -= 1;
            return Ok(());
        }
        let mut line = serde_json::to_string(milestone).map_err(std::io::Error::from)?;
        line.push('\n');
        self.milestones.write_all(line.as_bytes())?;
        self.milestones.flush()?;
        Ok(())
    }
}

/// Reads a milestone ledger, ignoring a trailing partial line.
pub fn read_milestones(path: &Path) -> Result<Vec<Milestone>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}: malformed milestone", path.display(), i + 1))
        })
        .collect()
}
