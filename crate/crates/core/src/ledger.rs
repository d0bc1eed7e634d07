//! Append-only run ledger: one JSON object per evaluation, one per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::{EvaluationRecord, ExamplePool, Phase};
use crate::runtime::Observation;

/// The on-disk form of an [`EvaluationRecord`].
///
/// Subsets are stored as example ids so a ledger stays readable without the
/// pool it was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerEntry {
    pub phase: Phase,
    pub round: usize,
    pub iteration: usize,
    pub subset_ids: Vec<String>,
    pub metric: f64,
    pub beta: Option<f64>,
    pub wallclock_ms: u64,
}

impl LedgerEntry {
    pub fn from_record(record: &EvaluationRecord, pool: &ExamplePool) -> Result<Self> {
        Ok(LedgerEntry {
            phase: record.phase,
            round: record.round,
            iteration: record.iteration,
            subset_ids: record.subset.ids(pool)?,
            metric: record.metric,
            beta: record.beta,
            wallclock_ms: record.wallclock_ms,
        })
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("ledger entries always serialize")
    }

    pub fn observation(&self) -> Observation {
        Observation {
            round: self.round,
            subset_ids: self.subset_ids.clone(),
            metric: self.metric,
        }
    }
}

/// Writer that flushes every entry as soon as it is appended.
#[derive(Debug)]
pub struct RunLedger {
    path: PathBuf,
    file: File,
}

impl RunLedger {
    /// Creates (or truncates) the ledger at `path`.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path)?;
        Ok(RunLedger { path, file })
    }

    /// Opens `path` for appending, creating it if needed.
    pub fn append_to(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(RunLedger { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, entry: &LedgerEntry) -> Result<()> {
        writeln!(self.file, "{}", entry.to_line())?;
        self.file.flush()?;
        Ok(())
    }
}

/// Reads every complete entry of a ledger.
///
/// A final line without a trailing newline is the trace of an interrupted
/// write and is ignored; any other unparsable line is an error.
pub fn read_ledger(path: impl AsRef<Path>) -> Result<Vec<LedgerEntry>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut entries = Vec::new();
    let mut line = String::new();
    let mut number = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        number += 1;
        if !line.ends_with('\n') {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(line.trim_end()).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: number,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::{Example, SubsetVector};

    fn entry(iteration: usize, beta: Option<f64>) -> LedgerEntry {
        LedgerEntry {
            phase: if beta.is_some() {
                Phase::Bo
            } else {
                Phase::Init
            },
            round: 1,
            iteration,
            subset_ids: vec!["a".into(), "c".into()],
            metric: 0.1 + iteration as f64 / 3.0,
            beta,
            wallclock_ms: 0,
        }
    }

    #[test]
    fn field_set_and_order_are_fixed() {
        let line = entry(0, None).to_line();
        assert_eq!(
            line,
            r#"{"phase":"init","round":1,"iteration":0,"subset_ids":["a","c"],"metric":0.1,"beta":null,"wallclock_ms":0}"#
        );
    }

    #[test]
    fn from_record_uses_pool_ids() {
        let pool = ExamplePool::new(
            vec![
                Example::new("a", "", ""),
                Example::new("b", "", ""),
                Example::new("c", "", ""),
            ],
            0,
        )
        .unwrap();
        let record = EvaluationRecord {
            subset: SubsetVector::from_bit_str("101").unwrap(),
            metric: 0.5,
            phase: Phase::Rs,
            round: 2,
            iteration: 4,
            beta: None,
            wallclock_ms: 0,
        };
        let e = LedgerEntry::from_record(&record, &pool).unwrap();
        assert_eq!(e.subset_ids, ["a", "c"]);
        assert_eq!(e.observation().round, 2);
    }

    #[test]
    fn round_trip_and_truncated_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let mut ledger = RunLedger::create(&path).unwrap();
        let written = vec![entry(0, None), entry(1, Some(0.3125)), entry(2, Some(0.9))];
        for e in &written {
            ledger.append(e).unwrap();
        }
        drop(ledger);
        assert_eq!(read_ledger(&path).unwrap(), written);

        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        write!(f, r#"{{"phase":"bo","rou"#).unwrap();
        drop(f);
        assert_eq!(read_ledger(&path).unwrap(), written);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        std::fs::write(
            &path,
            format!(
                "{}\nnot json\n{}\n",
                entry(0, None).to_line(),
                entry(1, None).to_line()
            ),
        )
        .unwrap();
        match read_ledger(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let mut v: serde_json::Value = serde_json::from_str(&entry(0, None).to_line()).unwrap();
        v["extra"] = 1.into();
        std::fs::write(&path, format!("{v}\n")).unwrap();
        assert!(read_ledger(&path).is_err());
    }
}
