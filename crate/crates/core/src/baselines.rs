//! Learning-free selection: nearest neighbours of a query embedding, and
//! one representative per k-means cluster.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::pool::{ExamplePool, SubsetVector};
use crate::runtime::Embedder;
use crate::util::Fnv1a;

/// Retrieval presets.
pub const TOP_10: TopK = TopK::Count(10);
pub const TOP_25: TopK = TopK::Count(25);

pub const KMEANS_MAX_ITERS: usize = 300;
pub const KMEANS_TOL: f64 = 1e-6;

/// How many examples retrieval keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopK {
    Count(usize),
    All,
}

impl TopK {
    /// Parses `"all"` or a positive count.
    pub fn parse(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(TopK::All);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(TopK::Count(k)),
            _ => Err(Error::InvalidArgument(format!(
                "expected a positive count or \"all\", got {s:?}"
            ))),
        }
    }

    /// The count for a pool of `m` examples, saturating at `m`.
    pub fn resolve(self, m: usize) -> usize {
        match self {
            TopK::Count(k) => k.min(m),
            TopK::All => m,
        }
    }
}

/// One embedding row per pool example, in pool order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

impl EmbeddingMatrix {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors.first().map(Vec::len).ok_or(Error::EmptyPool)?;
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension is 0".into()));
        }
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("embedding row {i}")));
            }
        }
        Ok(EmbeddingMatrix { vectors, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Component-wise mean of the rows.
    pub fn mean(&self) -> Vec<f64> {
        mean_of(self.vectors.iter().map(Vec::as_slice), self.dim)
    }
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for r in rows {
        for (s, x) in sum.iter_mut().zip(r) {
            *s += x;
        }
        n += 1;
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    sum
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` rows most cosine-similar to `query`, least similar first, so the
/// closest example comes last. Equal similarities order by pool index.
pub fn retrieve_topk(embeddings: &EmbeddingMatrix, query: &[f64], k: TopK) -> Result<Vec<usize>> {
    if query.len() != embeddings.dim {
        return Err(Error::LengthMismatch {
            expected: embeddings.dim,
            found: query.len(),
        });
    }
    let m = embeddings.len();
    let k = match k {
        TopK::All => m,
        TopK::Count(k) if k >= 1 && k <= m => k,
        TopK::Count(k) => {
            return Err(Error::InvalidArgument(format!(
                "retrieval size {k} outside 1..={m}"
            )))
        }
    };
    let qn = dot(query, query).sqrt();
    if qn == 0.0 {
        return Err(Error::InvalidArgument("query vector has zero norm".into()));
    }
    let mut sims = Vec::with_capacity(m);
    for (i, row) in embeddings.vectors.iter().enumerate() {
        let rn = dot(row, row).sqrt();
        if rn == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "embedding of example {i} has zero norm"
            )));
        }
        sims.push(dot(row, query) / (rn * qn));
    }
    // Most similar first, lower index first among equals.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.reverse();
    Ok(order)
}

/// Result of Lloyd's algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// k-means with k-means++ seeding.
pub fn kmeans<R: Rng + ?Sized>(embeddings: &EmbeddingMatrix, k: usize, rng: &mut R) -> Result<KMeans> {
    let m = embeddings.len();
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "cluster count {k} outside 1..={m}"
        )));
    }
    let rows = &embeddings.vectors;
    let mut centroids = vec![rows[rng.random_range(0..m)].clone()];
    let mut nearest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = m - 1;
            for (i, d) in nearest.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            // Every row coincides with a centroid already.
            rng.random_range(0..m)
        };
        centroids.push(rows[pick].clone());
        for (n, r) in nearest.iter_mut().zip(rows) {
            *n = n.min(sq_dist(r, &centroids[centroids.len() - 1]));
        }
    }

    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERS {
        iterations += 1;
        let assign: Vec<usize> = rows
            .iter()
            .map(|r| {
                (0..k)
                    .min_by(|&a, &b| sq_dist(r, &centroids[a]).total_cmp(&sq_dist(r, &centroids[b])))
                    .expect("k >= 1")
            })
            .collect();
        let mut moved: f64 = 0.0;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members = rows
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a == c)
                .map(|(r, _)| r.as_slice());
            let mut count = 0;
            let next = mean_of(members.inspect(|_| count += 1), embeddings.dim);
            // An empty cluster keeps its centroid.
            if count > 0 {
                moved = moved.max(sq_dist(&next, centroid).sqrt());
                *centroid = next;
            }
        }
        if moved <= KMEANS_TOL {
            break;
        }
    }
    Ok(KMeans {
        centroids,
        iterations,
    })
}

/// One example per k-means cluster: the example nearest each centroid.
///
/// Pairs (centroid, example) are taken greedily by increasing distance, so
/// no example represents two clusters and exactly `k` are chosen.
pub fn diverse_k<R: Rng + ?Sized>(
    embeddings: &EmbeddingMatrix,
    k: usize,
    rng: &mut R,
) -> Result<SubsetVector> {
    let fit = kmeans(embeddings, k, rng)?;
    let m = embeddings.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * m);
    for (c, centroid) in fit.centroids.iter().enumerate() {
        for (i, row) in embeddings.vectors.iter().enumerate() {
            pairs.push((sq_dist(row, centroid), c, i));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut centroid_done = vec![false; k];
    let mut taken = vec![false; m];
    let mut left = k;
    for (_, c, i) in pairs {
        if left == 0 {
            break;
        }
        if centroid_done[c] || taken[i] {
            continue;
        }
        centroid_done[c] = true;
        taken[i] = true;
        left -= 1;
    }
    Ok(SubsetVector::new(taken))
}

/// Text used to embed an example.
pub fn embedding_text(ex: &crate::pool::Example) -> &str {
    &ex.input
}

/// Embeds a pool, reading and extending a cache file when one is given.
///
/// The cache starts with a `d=<dim>` header followed by one line per
/// example: the id and `dim` space-separated reals.
pub fn embed_pool(
    embedder: &mut dyn Embedder,
    pool: &ExamplePool,
    cache: Option<&Path>,
) -> Result<EmbeddingMatrix> {
    let mut known = match cache {
        Some(path) if path.exists() => read_embedding_cache(path)?,
        _ => HashMap::new(),
    };
    let missing: Vec<usize> = (0..pool.len())
        .filter(|&i| !known.contains_key(&pool.examples()[i].id))
        .collect();
    if !missing.is_empty() {
        let ids: Vec<String> = missing.iter().map(|&i| pool.examples()[i].id.clone()).collect();
        let texts: Vec<String> = missing
            .iter()
            .map(|&i| embedding_text(&pool.examples()[i]).to_string())
            .collect();
        let vectors = embedder.embed(&ids, &texts)?;
        if vectors.len() != ids.len() {
            return Err(Error::LengthMismatch {
                expected: ids.len(),
                found: vectors.len(),
            });
        }
        known.extend(ids.into_iter().zip(vectors));
    }
    let rows: Vec<Vec<f64>> = pool.ids().map(|id| known[id].clone()).collect();
    let matrix = EmbeddingMatrix::new(rows)?;
    if let Some(path) = cache {
        let mut entries: Vec<(&String, &Vec<f64>)> = known.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        write_embedding_cache(path, matrix.dim(), entries)?;
    }
    Ok(matrix)
}

pub fn read_embedding_cache(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let dim: usize = header
        .strip_prefix("d=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| parse_err(1, format!("expected header \"d=<dim>\", found {header:?}")))?;
    let mut out = HashMap::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let mut parts = line.split_whitespace();
        let Some(id) = parts.next() else { continue };
        let values: Vec<f64> = parts
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(lineno, format!("{e}")))?;
        if values.len() != dim {
            return Err(parse_err(lineno, format!("expected {dim} values, found {}", values.len())));
        }
        out.insert(id.to_string(), values);
    }
    Ok(out)
}

pub fn write_embedding_cache<'a>(
    path: &Path,
    dim: usize,
    entries: impl IntoIterator<Item = (&'a String, &'a Vec<f64>)>,
) -> Result<()> {
    let mut out = format!("d={dim}\n");
    for (id, v) in entries {
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!(
                "id {id:?} cannot be stored in an embedding cache"
            )));
        }
        if v.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        out.push_str(id);
        for x in v {
            out.push(' ');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Deterministic bag-of-words hashing embedder, for tests and dry runs only.
///
/// Each whitespace token adds `+1` or `-1` to one of `dim` buckets; a
/// constant first component keeps every vector away from zero norm.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("hash embedding needs dim >= 2".into()));
        }
        Ok(HashEmbedder { dim })
    }

    pub fn vector(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        v[0] = 1.0;
        for token in text.split_whitespace() {
            let h = Fnv1a::default().write_str(&token.to_lowercase()).finish();
            let bucket = 1 + (h % (self.dim as u64 - 1)) as usize;
            v[bucket] += if (h >> 63) == 0 { 1.0 } else { -1.0 };
        }
        v
    }
}

impl Embedder for HashEmbedder {
    fn embed(&mut self, _ids: &[String], texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::Example;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn exact_match_is_retrieved() {
        let e = matrix(&[&[1.0, 0.0], &[0.6, 0.8], &[0.0, 1.0]]);
        assert_eq!(retrieve_topk(&e, &[0.6, 0.8], TopK::Count(1)).unwrap(), [1]);
    }

    #[test]
    fn all_is_ordered_least_similar_first() {
        // Unit rows with cosines 0.2, 0.9 and 0.5 against the query e1.
        let row = |c: f64| vec![c, (1.0 - c * c).sqrt()];
        let e = EmbeddingMatrix::new(vec![row(0.2), row(0.9), row(0.5)]).unwrap();
        assert_eq!(retrieve_topk(&e, &[1.0, 0.0], TopK::All).unwrap(), [0, 2, 1]);
    }

    #[test]
    fn equal_similarity_prefers_lower_index_last() {
        let e = matrix(&[&[1.0, 0.0], &[2.0, 0.0], &[0.0, 1.0]]);
        // Rows 0 and 1 tie; row 0 ranks as more similar and so comes last.
        assert_eq!(retrieve_topk(&e, &[1.0, 0.0], TopK::All).unwrap(), [2, 1, 0]);
    }

    #[test]
    fn presets_and_bounds() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![1.0, i as f64]).collect();
        let e = EmbeddingMatrix::new(rows).unwrap();
        assert_eq!(retrieve_topk(&e, &[1.0, 3.0], TOP_10).unwrap().len(), 10);
        assert_eq!(retrieve_topk(&e, &[1.0, 3.0], TOP_25).unwrap().len(), 25);
        assert!(retrieve_topk(&e, &[1.0, 3.0], TopK::Count(31)).is_err());
        assert!(retrieve_topk(&e, &[1.0, 3.0], TopK::Count(0)).is_err());
        assert_eq!(TOP_25.resolve(12), 12);
        assert_eq!(TopK::parse("ALL").unwrap(), TopK::All);
        assert_eq!(TopK::parse("10").unwrap(), TOP_10);
        assert!(TopK::parse("0").is_err());
    }

    #[test]
    fn zero_norm_is_named() {
        let e = matrix(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let err = retrieve_topk(&e, &[1.0, 0.0], TopK::All).unwrap_err();
        assert!(err.to_string().contains("example 1"), "{err}");
        assert!(retrieve_topk(&e, &[0.0, 0.0], TopK::All).is_err());
    }

    #[test]
    fn diversity_edge_cases() {
        let e = matrix(&[&[0.0, 0.0], &[1.0, 0.0], &[5.0, 5.0], &[5.0, 6.0], &[10.0, 0.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(diverse_k(&e, 5, &mut rng).unwrap(), SubsetVector::full(5));
        // Global centroid is (4.2, 2.2); row 2 is nearest.
        let one = diverse_k(&e, 1, &mut rng).unwrap();
        assert_eq!(one.ones().collect::<Vec<_>>(), [2]);
        assert!(diverse_k(&e, 6, &mut rng).is_err());
        assert!(diverse_k(&e, 0, &mut rng).is_err());
    }

    #[test]
    fn diversity_separates_clusters() {
        let e = matrix(&[&[0.0, 0.0], &[0.1, 0.0], &[10.0, 10.0], &[10.1, 10.0], &[-10.0, 5.0], &[-10.0, 5.1]]);
        let pick = diverse_k(&e, 3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let chosen: Vec<usize> = pick.ones().collect();
        assert_eq!(chosen.len(), 3);
        let cluster = |i: usize| i / 2;
        let mut clusters: Vec<usize> = chosen.iter().map(|&i| cluster(i)).collect();
        clusters.dedup();
        assert_eq!(clusters, [0, 1, 2]);
    }

    #[test]
    fn diversity_is_deterministic_per_seed() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]).collect();
        let e = EmbeddingMatrix::new(rows).unwrap();
        let a = diverse_k(&e, 7, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = diverse_k(&e, 7, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cardinality(), 7);
    }

    #[test]
    fn duplicate_rows_still_give_k_distinct_examples() {
        let e = EmbeddingMatrix::new(vec![vec![1.0, 1.0]; 6]).unwrap();
        let pick = diverse_k(&e, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(pick.cardinality(), 4);
    }

    #[test]
    fn cache_round_trip_and_reuse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        let pool = ExamplePool::new(
            vec![Example::new("a", "red apple", "x"), Example::new("b", "green pear", "y")],
            0,
        )
        .unwrap();
        let mut emb = HashEmbedder::new(8).unwrap();
        let first = embed_pool(&mut emb, &pool, Some(&path)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("d=8\n"));
        assert_eq!(text.lines().count(), 3);
        let mut never = |_: &[String], _: &[String]| -> Result<Vec<Vec<f64>>> { unreachable!() };
        type EmbedFn = dyn FnMut(&[String], &[String]) -> Result<Vec<Vec<f64>>>;
        struct Never<'a>(&'a mut EmbedFn);
        impl Embedder for Never<'_> {
            fn embed(&mut self, ids: &[String], texts: &[String]) -> Result<Vec<Vec<f64>>> {
                (self.0)(ids, texts)
            }
        }
        let second = embed_pool(&mut Never(&mut never), &pool, Some(&path)).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn malformed_cache_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        fs::write(&path, "d=2\na 1 2\nb 1\n").unwrap();
        match read_embedding_cache(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "dim 2\n").unwrap();
        assert!(read_embedding_cache(&path).is_err());
    }

    proptest! {
        #[test]
        fn retrieval_commutes_with_pool_permutation(
            rows in proptest::collection::vec(proptest::collection::vec(0.1f64..1.0, 3), 2..8),
            query in proptest::collection::vec(0.1f64..1.0, 3),
            rot in 0usize..8,
        ) {
            let m = rows.len();
            let perm: Vec<usize> = (0..m).map(|i| (i + rot) % m).collect();
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
            let a = retrieve_topk(&EmbeddingMatrix::new(rows.clone()).unwrap(), &query, TopK::All).unwrap();
            let b = retrieve_topk(&EmbeddingMatrix::new(permuted).unwrap(), &query, TopK::All).unwrap();
            // Same multiset of examples; identical order unless similarities tie.
            let mapped: Vec<usize> = b.iter().map(|&i| perm[i]).collect();
            let mut sa = a.clone();
            let mut sb = mapped.clone();
            sa.sort();
            sb.sort();
            prop_assert_eq!(sa, sb);
            let e = EmbeddingMatrix::new(rows).unwrap();
            let sim = |i: usize| dot(e.row(i), &query) / (dot(e.row(i), e.row(i)).sqrt() * dot(&query, &query).sqrt());
            for (x, y) in a.iter().zip(&mapped) {
                prop_assert!((sim(*x) - sim(*y)).abs() < 1e-12);
            }
        }

        #[test]
        fn diversity_returns_k_distinct(
            rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), 1..20),
            frac in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let m = rows.len();
            let k = 1 + ((frac * m as f64) as usize).min(m - 1);
            let e = EmbeddingMatrix::new(rows).unwrap();
            let pick = diverse_k(&e, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(pick.cardinality(), k);
        }
    }
}
