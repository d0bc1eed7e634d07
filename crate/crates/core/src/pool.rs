//! Example pools, subset vectors and the cardinality-uniform subset sampler.
//!
//! A pool is an ordered list of demonstrations. Every [`SubsetVector`] is a
//! bit mask aligned to that order, so bit `j` always refers to
//! `pool.examples()[j]`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// A single demonstration: an input, the model's rationale and its final output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example {
    pub id: String,
    pub input: String,
    #[serde(default)]
    pub rationale: String,
    pub output: String,
    pub correct: bool,
    #[serde(default)]
    pub meta: Map<String, Value>,
}

impl Example {
    pub fn new(id: impl Into<String>, input: impl Into<String>, output: impl Into<String>) -> Self {
        Example {
            id: id.into(),
            input: input.into(),
            rationale: String::new(),
            output: output.into(),
            correct: true,
            meta: Map::new(),
        }
    }

    /// The id with any `#r<k>` regeneration suffix removed.
    ///
    /// Regenerated examples answer the same underlying train item as the
    /// example they replace, so this is the key used to join pools across
    /// rounds.
    pub fn base_id(&self) -> &str {
        base_id(&self.id)
    }
}

/// Strip a `#r<k>` round suffix from an example id.
pub fn base_id(id: &str) -> &str {
    match id.rfind("#r") {
        Some(pos) if id[pos + 2..].chars().all(|c| c.is_ascii_digit()) && pos + 2 < id.len() => {
            &id[..pos]
        }
        _ => id,
    }
}

/// Id of the round-`round` regeneration of the item behind `id`.
pub fn round_id(id: &str, round: usize) -> String {
    format!("{}#r{round}", base_id(id))
}

/// Ordered collection of candidate demonstrations for one outer round.
#[derive(Debug, Clone, PartialEq)]
pub struct ExamplePool {
    examples: Vec<Example>,
    round: usize,
    index: HashMap<String, usize>,
}

impl ExamplePool {
    /// Builds a pool, rejecting duplicate ids. Order is preserved as given.
    pub fn new(examples: Vec<Example>, round: usize) -> Result<Self> {
        let mut index = HashMap::with_capacity(examples.len());
        for (i, ex) in examples.iter().enumerate() {
            if index.insert(ex.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(ex.id.clone()));
            }
        }
        Ok(ExamplePool {
            examples,
            round,
            index,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Example> {
        self.examples.get(index)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.id.as_str())
    }

    /// Keeps only the examples for which `keep` returns true, preserving order.
    pub fn filtered(&self, mut keep: impl FnMut(&Example) -> bool) -> ExamplePool {
        let examples = self.examples.iter().filter(|e| keep(e)).cloned().collect();
        // Ids of a valid pool stay unique under filtering.
        ExamplePool::new(examples, self.round).expect("filtering preserves unique ids")
    }

    /// Only the examples flagged correct.
    pub fn correct_only(&self) -> ExamplePool {
        self.filtered(|e| e.correct)
    }

    /// The examples selected by `subset`, in pool order.
    pub fn select(&self, subset: &SubsetVector) -> Result<Vec<&Example>> {
        self.check_len(subset)?;
        Ok(subset.ones().map(|j| &self.examples[j]).collect())
    }

    pub(crate) fn check_len(&self, subset: &SubsetVector) -> Result<()> {
        if subset.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: subset.len(),
            });
        }
        Ok(())
    }
}

/// Reads a pool from a line-delimited JSON file.
pub fn load_pool(path: impl AsRef<Path>) -> Result<ExamplePool> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    read_pool(reader, path)
}

pub(crate) fn read_pool(reader: impl BufRead, path: &Path) -> Result<ExamplePool> {
    let mut examples = Vec::new();
    let mut first_line = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let ex: Example = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: e.to_string(),
        })?;
        if let Some(prev) = first_line.insert(ex.id.clone(), lineno) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!(
                    "duplicate example id {:?} (first seen on line {prev})",
                    ex.id
                ),
            });
        }
        examples.push(ex);
    }
    if examples.is_empty() {
        return Err(Error::EmptyPool);
    }
    ExamplePool::new(examples, 0)
}

/// Writes a pool as one JSON record per line, in pool order.
pub fn save_pool(pool: &ExamplePool, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_pool(pool, &mut out)?;
    out.flush()?;
    Ok(())
}

pub(crate) fn write_pool(pool: &ExamplePool, out: &mut impl Write) -> Result<()> {
    for ex in pool.examples() {
        serde_json::to_writer(&mut *out, ex).map_err(io_error)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub(crate) fn io_error(e: serde_json::Error) -> Error {
    Error::Io(e.into())
}

/// Binary indicator over a pool: bit `j` selects `pool.examples()[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetVector {
    bits: Vec<bool>,
}

impl SubsetVector {
    pub fn new(bits: Vec<bool>) -> Self {
        SubsetVector { bits }
    }

    pub fn empty(m: usize) -> Self {
        SubsetVector {
            bits: vec![false; m],
        }
    }

    pub fn full(m: usize) -> Self {
        SubsetVector {
            bits: vec![true; m],
        }
    }

    /// Subset of an `m`-pool with exactly the given indices set.
    pub fn from_indices(m: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut bits = vec![false; m];
        for j in indices {
            if j >= m {
                return Err(Error::InvalidArgument(format!(
                    "index {j} out of range for pool of size {m}"
                )));
            }
            bits[j] = true;
        }
        Ok(SubsetVector { bits })
    }

    /// Parses a `"0101"`-style bit string.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidArgument(format!(
                    "bad bit {other:?} in {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(SubsetVector::new)
    }

    /// Decodes the subset whose bit `j` is bit `j` of `code`.
    pub fn from_code(m: usize, code: u64) -> Self {
        debug_assert!(m <= 64);
        SubsetVector {
            bits: (0..m).map(|j| code >> j & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn set(&mut self, j: usize, value: bool) {
        self.bits[j] = value;
    }

    pub fn flip(&mut self, j: usize) {
        self.bits[j] = !self.bits[j];
    }

    /// Copy with bit `j` toggled.
    pub fn flipped(&self, j: usize) -> Self {
        let mut out = self.clone();
        out.flip(j);
        out
    }

    /// Number of selected examples.
    pub fn cardinality(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Indices of the selected examples, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
    }

    /// Relaxation into `{0.0, 1.0}^m`.
    pub fn to_f64(&self) -> Vec<f64> {
        self.bits
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn hamming(&self, other: &SubsetVector) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count())
    }

    /// Ids of the selected examples, in pool order.
    pub fn ids(&self, pool: &ExamplePool) -> Result<Vec<String>> {
        Ok(pool
            .select(self)?
            .into_iter()
            .map(|e| e.id.clone())
            .collect())
    }
}

impl fmt::Display for SubsetVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Subset of `pool` selecting exactly the given ids. Repeated ids count once.
pub fn subset_from_ids<S: AsRef<str>>(pool: &ExamplePool, ids: &[S]) -> Result<SubsetVector> {
    let mut subset = SubsetVector::empty(pool.len());
    for id in ids {
        let id = id.as_ref();
        let j = pool
            .index_of(id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))?;
        subset.set(j, true);
    }
    Ok(subset)
}

/// Draws a random nonempty subset of an `m`-pool.
///
/// The cardinality is uniform on `1..=m`; given the cardinality, membership
/// is uniform over all subsets of that size (partial Fisher-Yates shuffle).
pub fn sample_subset<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<SubsetVector> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "cannot sample a subset of an empty pool".into(),
        ));
    }
    let c = rng.random_range(1..=m);
    let mut order: Vec<usize> = (0..m).collect();
    for i in 0..c {
        let j = rng.random_range(i..m);
        order.swap(i, j);
    }
    SubsetVector::from_indices(m, order[..c].iter().copied())
}

/// Phase of the run that produced an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Init,
    Bo,
    Rs,
    Select,
    Sweep,
    Milestone,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Bo => "bo",
            Phase::Rs => "rs",
            Phase::Select => "select",
            Phase::Sweep => "sweep",
            Phase::Milestone => "milestone",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One black-box evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub subset: SubsetVector,
    pub metric: f64,
    pub phase: Phase,
    pub round: usize,
    pub iteration: usize,
    /// Scalarization weight in force when the subset was proposed.
    pub beta: Option<f64>,
    pub wallclock_ms: u64,
}

/// Ids of a subset as a set, for order-insensitive comparisons.
pub fn id_set(ids: &[String]) -> HashSet<&str> {
    ids.iter().map(String::as_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pool(ids: &[&str]) -> ExamplePool {
        let examples = ids
            .iter()
            .map(|id| Example::new(*id, format!("q {id}"), "a"))
            .collect();
        ExamplePool::new(examples, 0).unwrap()
    }

    fn write_lines(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    fn line(id: &str) -> String {
        format!(
            r#"{{"id":"{id}","input":"in","rationale":"","output":"out","correct":true,"meta":{{}}}}"#
        )
    }

    #[test]
    fn load_preserves_order() {
        let f = write_lines(&[line("c"), line("a"), line("b")]);
        let p = load_pool(f.path()).unwrap();
        assert_eq!(p.ids().collect::<Vec<_>>(), ["c", "a", "b"]);
    }

    #[test]
    fn load_rejects_duplicate_ids() {
        let lines: Vec<_> = ["ex1", "ex7", "ex3", "ex4", "ex7"]
            .iter()
            .map(|i| line(i))
            .collect();
        let f = write_lines(&lines);
        let err = load_pool(f.path()).unwrap_err().to_string();
        assert!(err.contains("ex7"), "{err}");
        assert!(err.contains(":5:"), "{err}");
    }

    #[test]
    fn load_rejects_empty_file() {
        let f = write_lines(&[]);
        assert!(matches!(load_pool(f.path()), Err(Error::EmptyPool)));
    }

    #[test]
    fn load_reports_parse_line() {
        let f = write_lines(&[line("a"), "{not json".into()]);
        match load_pool(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_rejects_unknown_fields() {
        let f = write_lines(&[r#"{"id":"a","input":"","rationale":"","output":"","correct":true,"meta":{},"extra":1}"#.into()]);
        assert!(matches!(
            load_pool(f.path()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn seventy_five_line_pool() {
        let lines: Vec<_> = (0..75).map(|i| line(&format!("ex{i}"))).collect();
        let f = write_lines(&lines);
        assert_eq!(load_pool(f.path()).unwrap().len(), 75);
    }

    #[test]
    fn save_load_round_trip_is_byte_identical() {
        let lines: Vec<_> = (0..4).map(|i| line(&format!("ex{i}"))).collect();
        let f = write_lines(&lines);
        let p = load_pool(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_pool(&p, out.path()).unwrap();
        let a = std::fs::read_to_string(f.path()).unwrap();
        let b = std::fs::read_to_string(out.path()).unwrap();
        assert_eq!(a.trim_end(), b.trim_end());
    }

    #[test]
    fn subset_from_ids_cases() {
        let p = pool(&["a", "b", "c"]);
        assert_eq!(subset_from_ids(&p, &["a", "c"]).unwrap().to_string(), "101");
        assert_eq!(subset_from_ids::<&str>(&p, &[]).unwrap().to_string(), "000");
        assert_eq!(subset_from_ids(&p, &["a", "a"]).unwrap().to_string(), "100");
        match subset_from_ids(&p, &["zz"]) {
            Err(Error::UnknownId(id)) => assert_eq!(id, "zz"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sample_subset_single_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(sample_subset(1, &mut rng).unwrap().bits(), &[true]);
        }
    }

    #[test]
    fn sample_subset_rejects_empty_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_subset(0, &mut rng).is_err());
    }

    #[test]
    fn sample_subset_cardinality_is_uniform() {
        // Chi-square goodness of fit against Uniform{1,..,4}; 3 degrees of
        // freedom, critical value for p = 0.001 is 16.266.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_subset(4, &mut rng).unwrap().cardinality() - 1] += 1;
        }
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 16.266, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn sample_subset_membership_is_uniform_at_fixed_cardinality() {
        // m = 4, cardinality 2: six equally likely subsets; 5 dof, p = 0.001 -> 20.515.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut total = 0usize;
        while total < 60_000 {
            let s = sample_subset(4, &mut rng).unwrap();
            if s.cardinality() == 2 {
                *counts.entry(s.to_string()).or_default() += 1;
                total += 1;
            }
        }
        assert_eq!(counts.len(), 6);
        let expected = total as f64 / 6.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 20.515, "chi2 = {chi2}");
    }

    #[test]
    fn base_id_strips_round_suffix() {
        assert_eq!(base_id("ex7#r2"), "ex7");
        assert_eq!(base_id("ex7"), "ex7");
        assert_eq!(base_id("a#rb"), "a#rb");
        assert_eq!(round_id("ex7#r1", 2), "ex7#r2");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sampled_subsets_are_nonempty_and_reproducible(m in 1usize..40, seed in any::<u64>()) {
                let mut a = ChaCha8Rng::seed_from_u64(seed);
                let mut b = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..8 {
                    let x = sample_subset(m, &mut a).unwrap();
                    let y = sample_subset(m, &mut b).unwrap();
                    prop_assert!(x.cardinality() >= 1);
                    prop_assert_eq!(x.len(), m);
                    prop_assert_eq!(x, y);
                }
            }

            #[test]
            fn ids_round_trip(mask in proptest::collection::vec(any::<bool>(), 1..20)) {
                let ids: Vec<String> = (0..mask.len()).map(|i| format!("e{i}")).collect();
                let p = pool(&ids.iter().map(String::as_str).collect::<Vec<_>>());
                let chosen: Vec<String> = ids.iter().zip(&mask).filter(|(_, &b)| b).map(|(i, _)| i.clone()).collect();
                let s = subset_from_ids(&p, &chosen).unwrap();
                prop_assert_eq!(s.ids(&p).unwrap(), chosen);
            }
        }
    }
}
