//! Seeded synthetic corpora with cluster structure.
//!
//! Documents draw their terms from per-cluster pools that partition the
//! vocabulary into contiguous windows, so the corpus has the block locality
//! that superblock pruning exploits. The overlap parameter controls how much
//! of the pool each document samples: at 1.0 every document in a cluster uses
//! the same `terms_per_doc` terms, at 0.0 documents spread over the whole
//! window. Queries sample terms from one home cluster's pool, optionally with
//! weak terms from other clusters to give foreign superblocks small positive
//! bounds.
//!
//! Relevance judgments are the exhaustive top-10 per query, which makes
//! recall budgets well-defined without human labels.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    Corpus, QuantizationParams, QuantizedVector, QueryVector, TermId, Vocabulary,
};
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::oracle::exact_topk;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightDistribution {
    Uniform,
    Zipf { s: f64 },
}

fn default_num_queries() -> u32 {
    20
}

fn default_terms_per_query() -> u32 {
    8
}

fn default_cross_weight_scale() -> f64 {
    0.2
}

/// Deterministic generator configuration; the same spec always produces the
/// same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub num_docs: u32,
    pub vocab_size: u32,
    pub terms_per_doc: u32,
    pub num_clusters: u32,
    /// In [0, 1]: expected term-set similarity of documents within a cluster.
    pub intra_cluster_term_overlap: f64,
    pub weight_distribution: WeightDistribution,
    pub seed: u64,
    #[serde(default = "default_num_queries")]
    pub num_queries: u32,
    #[serde(default = "default_terms_per_query")]
    pub terms_per_query: u32,
    /// Extra query terms drawn from other clusters' pools (0 keeps queries
    /// cluster-pure).
    #[serde(default)]
    pub query_cross_cluster_terms: u32,
    /// Weight multiplier for those cross-cluster terms.
    #[serde(default = "default_cross_weight_scale")]
    pub query_cross_cluster_weight_scale: f64,
}

/// Everything the generator produces for one spec.
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub corpus: Corpus,
    pub queries: Vec<(String, QueryVector)>,
    pub qrels: Qrels,
    /// Cluster of each document, aligned to internal ids.
    pub doc_clusters: Vec<u32>,
    /// Home cluster of each query, aligned to `queries`.
    pub query_clusters: Vec<u32>,
}

struct ClusterPools {
    /// Per cluster: first term and sampled pool length.
    windows: Vec<(u32, u32)>,
}

impl ClusterPools {
    fn build(spec: &SyntheticCorpusSpec) -> Result<ClusterPools> {
        let v = spec.vocab_size;
        let nc = spec.num_clusters;
        let mut windows = Vec::with_capacity(nc as usize);
        for j in 0..nc {
            let start = (j as u64 * v as u64 / nc as u64) as u32;
            let end = ((j + 1) as u64 * v as u64 / nc as u64) as u32;
            let stride = end - start;
            if stride < spec.terms_per_doc {
                return Err(Error::InvalidParameter(format!(
                    "vocabulary too small: cluster window of {stride} terms cannot hold {} terms per document",
                    spec.terms_per_doc
                )));
            }
            // Pool size grows as overlap shrinks: identical documents at 1.0,
            // the whole window at 0.0.
            let overlap = spec.intra_cluster_term_overlap;
            let pool = if overlap <= spec.terms_per_doc as f64 / stride as f64 {
                stride
            } else {
                ((spec.terms_per_doc as f64 / overlap).round() as u32)
                    .clamp(spec.terms_per_doc, stride)
            };
            windows.push((start, pool));
        }
        Ok(ClusterPools { windows })
    }

    fn sample_terms(&self, cluster: u32, count: u32, rng: &mut ChaCha8Rng) -> BTreeSet<u32> {
        let (start, pool) = self.windows[cluster as usize];
        let mut terms = BTreeSet::new();
        if count >= pool {
            terms.extend(start..start + pool);
            return terms;
        }
        while terms.len() < count as usize {
            terms.insert(start + rng.gen_range(0..pool));
        }
        terms
    }
}

fn sample_weight(dist: WeightDistribution, rng: &mut ChaCha8Rng) -> f64 {
    match dist {
        WeightDistribution::Uniform => rng.gen_range(0.05..5.0),
        WeightDistribution::Zipf { s } => {
            let rank = rng.gen_range(1..=1000u32) as f64;
            5.0 / rank.powf(s)
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticCorpusSpec) -> Result<SyntheticSet> {
    if spec.num_docs == 0 || spec.vocab_size == 0 || spec.num_clusters == 0 {
        return Err(Error::InvalidParameter(
            "num_docs, vocab_size, and num_clusters must be positive".into(),
        ));
    }
    if spec.terms_per_doc == 0 {
        return Err(Error::InvalidParameter("terms_per_doc must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.intra_cluster_term_overlap) {
        return Err(Error::InvalidParameter(
            "intra_cluster_term_overlap must be in [0, 1]".into(),
        ));
    }
    let pools = ClusterPools::build(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Documents, cluster-contiguous.
    let mut raw_docs: Vec<Vec<(u32, f64)>> = Vec::with_capacity(spec.num_docs as usize);
    let mut doc_clusters = Vec::with_capacity(spec.num_docs as usize);
    let mut global_max: f64 = 0.0;
    for i in 0..spec.num_docs {
        let cluster = (i as u64 * spec.num_clusters as u64 / spec.num_docs as u64) as u32;
        doc_clusters.push(cluster);
        let terms = pools.sample_terms(cluster, spec.terms_per_doc, &mut rng);
        let mut entries = Vec::with_capacity(terms.len());
        for term in terms {
            let w = sample_weight(spec.weight_distribution, &mut rng);
            global_max = global_max.max(w);
            entries.push((term, w));
        }
        raw_docs.push(entries);
    }

    let params = QuantizationParams::from_global_max(global_max);
    let mut docs = Vec::with_capacity(raw_docs.len());
    for raw in &raw_docs {
        let mut entries = Vec::with_capacity(raw.len());
        for &(term, w) in raw {
            let impact = crate::corpus::quantize(w, &params)?;
            if impact > 0 {
                entries.push((TermId::new(term), impact));
            }
        }
        docs.push(QuantizedVector::from_entries(entries)?);
    }

    let digits = (spec.num_docs.max(2) - 1).to_string().len();
    let external_ids: Vec<String> = (0..spec.num_docs)
        .map(|i| format!("d{i:0digits$}"))
        .collect();
    let vocab = Vocabulary::from_terms(
        (0..spec.vocab_size).map(|t| format!("t{t}")).collect(),
    )?;
    let corpus = Corpus::from_quantized(docs, vocab, external_ids, params)?;

    // Queries: home-cluster terms at full weight, optional cross-cluster
    // terms at reduced weight.
    let mut queries = Vec::with_capacity(spec.num_queries as usize);
    let mut query_clusters = Vec::with_capacity(spec.num_queries as usize);
    for q in 0..spec.num_queries {
        let home = rng.gen_range(0..spec.num_clusters);
        query_clusters.push(home);
        let home_count = spec.terms_per_query.min(pools.windows[home as usize].1);
        let home_terms = pools.sample_terms(home, home_count, &mut rng);

        let mut entries: Vec<(u32, u32)> = Vec::new();
        for &term in &home_terms {
            let w = sample_weight(spec.weight_distribution, &mut rng);
            let weight = ((w * 100.0).round() as u32).max(1);
            entries.push((term, weight));
        }
        if spec.num_clusters > 1 {
            let mut cross = BTreeSet::new();
            let mut attempts = 0;
            while cross.len() < spec.query_cross_cluster_terms as usize && attempts < 1000 {
                attempts += 1;
                let other = rng.gen_range(0..spec.num_clusters);
                if other == home {
                    continue;
                }
                let (start, pool) = pools.windows[other as usize];
                let term = start + rng.gen_range(0..pool);
                if home_terms.contains(&term) {
                    continue;
                }
                cross.insert(term);
            }
            for term in cross {
                let w = sample_weight(spec.weight_distribution, &mut rng)
                    * spec.query_cross_cluster_weight_scale;
                let weight = ((w * 100.0).round() as u32).max(1);
                entries.push((term, weight));
            }
        }
        entries.sort_by_key(|&(t, _)| t);
        entries.dedup_by_key(|&mut (t, _)| t);
        let vector = QueryVector::from_entries(
            entries
                .into_iter()
                .map(|(t, w)| (TermId::new(t), w))
                .collect(),
        )?;
        let qdigits = (spec.num_queries.max(2) - 1).to_string().len();
        queries.push((format!("q{q:0qdigits$}"), vector));
    }

    // Ground truth: exhaustive top-10 per query, grade 1.
    let mut qrels = Qrels::new();
    for (qid, query) in &queries {
        let ranking = exact_topk(&corpus, query, 10)?;
        for &(doc, _) in ranking.entries() {
            qrels.insert(qid, &corpus.manifest.external_ids[doc as usize], 1);
        }
    }

    Ok(SyntheticSet {
        corpus,
        queries,
        qrels,
        doc_clusters,
        query_clusters,
    })
}

/// Write `docs.jsonl`, `queries.jsonl`, and `qrels.tsv` under `dir`.
///
/// Document weights are written dequantized (`impact * scale`), so re-parsing
/// the files reproduces the in-memory corpus impact-for-impact; query weights
/// are written divided by the default query scale for the same reason.
pub fn write_synthetic_files(set: &SyntheticSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let scale = set.corpus.manifest.quantization.scale;

    let mut docs = std::io::BufWriter::new(std::fs::File::create(dir.join("docs.jsonl"))?);
    for (i, doc) in set.corpus.docs.iter().enumerate() {
        let mut vector = serde_json::Map::new();
        for &(term, impact) in doc.entries() {
            let name = set
                .corpus
                .vocab
                .term(term)
                .expect("generated term is in the vocabulary");
            vector.insert(name.to_string(), serde_json::json!(impact as f64 * scale));
        }
        let record = serde_json::json!({
            "id": set.corpus.manifest.external_ids[i],
            "vector": vector,
        });
        writeln!(docs, "{record}")?;
    }
    docs.flush()?;

    let mut queries = std::io::BufWriter::new(std::fs::File::create(dir.join("queries.jsonl"))?);
    for (qid, query) in &set.queries {
        let mut vector = serde_json::Map::new();
        for &(term, weight) in query.entries() {
            let name = set
                .corpus
                .vocab
                .term(term)
                .expect("generated term is in the vocabulary");
            vector.insert(
                name.to_string(),
                serde_json::json!(weight as f64 / crate::corpus::DEFAULT_QUERY_WEIGHT_SCALE),
            );
        }
        let record = serde_json::json!({ "id": qid, "vector": vector });
        writeln!(queries, "{record}")?;
    }
    queries.flush()?;

    let mut qrels = std::io::BufWriter::new(std::fs::File::create(dir.join("qrels.tsv"))?);
    for (qid, _) in &set.queries {
        if let Some(rels) = set.qrels.for_query(qid) {
            let mut rows: Vec<(&String, &u32)> = rels.iter().collect();
            rows.sort();
            for (doc, grade) in rows {
                writeln!(qrels, "{qid}\t{doc}\t{grade}")?;
            }
        }
    }
    qrels.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::build_index;
    use crate::ordering::DocOrdering;
    use crate::ratio::Ratio;
    use crate::search::{search, SearchParams};

    fn base_spec() -> SyntheticCorpusSpec {
        SyntheticCorpusSpec {
            num_docs: 64,
            vocab_size: 64,
            terms_per_doc: 4,
            num_clusters: 4,
            intra_cluster_term_overlap: 0.5,
            weight_distribution: WeightDistribution::Uniform,
            seed: 7,
            num_queries: 4,
            terms_per_query: 3,
            query_cross_cluster_terms: 0,
            query_cross_cluster_weight_scale: 0.2,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = base_spec();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        write_synthetic_files(&generate_synthetic(&spec).unwrap(), &a).unwrap();
        write_synthetic_files(&generate_synthetic(&spec).unwrap(), &b).unwrap();
        for file in ["docs.jsonl", "queries.jsonl", "qrels.tsv"] {
            assert_eq!(
                std::fs::read(a.join(file)).unwrap(),
                std::fs::read(b.join(file)).unwrap(),
                "{file} differs between runs"
            );
        }
    }

    #[test]
    fn full_overlap_single_cluster_shares_one_pool() {
        let mut spec = base_spec();
        spec.num_clusters = 1;
        spec.intra_cluster_term_overlap = 1.0;
        let set = generate_synthetic(&spec).unwrap();
        let first: Vec<_> = set.corpus.docs[0].terms().collect();
        for doc in &set.corpus.docs {
            let terms: Vec<_> = doc.terms().collect();
            assert_eq!(terms, first, "all documents share the same term pool");
        }
    }

    #[test]
    fn zero_overlap_partition_isolates_clusters() {
        // num_clusters = vocab / terms_per_doc gives disjoint windows of
        // exactly terms_per_doc terms; queries score zero outside their home
        // cluster and safe search prunes every foreign superblock.
        let spec = SyntheticCorpusSpec {
            num_docs: 128,
            vocab_size: 64,
            terms_per_doc: 4,
            num_clusters: 16,
            intra_cluster_term_overlap: 0.0,
            weight_distribution: WeightDistribution::Uniform,
            seed: 11,
            num_queries: 6,
            terms_per_query: 3,
            query_cross_cluster_terms: 0,
            query_cross_cluster_weight_scale: 0.2,
        };
        let set = generate_synthetic(&spec).unwrap();
        let index = build_index(
            &set.corpus,
            &DocOrdering::identity(spec.num_docs),
            4,
            2,
        )
        .unwrap();
        let params = SearchParams {
            k: 5,
            ..SearchParams::default()
        };
        for (i, (_, query)) in set.queries.iter().enumerate() {
            let home = set.query_clusters[i];
            // Oracle-side structure: zero scores outside the home cluster.
            let ranking = exact_topk(&set.corpus, query, spec.num_docs as usize).unwrap();
            for &(doc, _) in ranking.entries() {
                assert_eq!(set.doc_clusters[doc as usize], home);
            }
            // Superblocks without home-cluster documents are never visited.
            let mut has_home = vec![false; index.geometry.num_superblocks as usize];
            for sb in 0..index.geometry.num_superblocks {
                for block in index.geometry.child_blocks(sb) {
                    for pos in index.geometry.block_doc_range(block) {
                        if set.doc_clusters[pos as usize] == home {
                            has_home[sb as usize] = true;
                        }
                    }
                }
            }
            let outcome = search(&index, query, &params).unwrap();
            let visited =
                index.geometry.num_superblocks as u64 - outcome.stats.superblocks_pruned;
            let with_home = has_home.iter().filter(|&&h| h).count() as u64;
            assert!(
                visited <= with_home,
                "visited {visited} superblocks but only {with_home} hold home-cluster docs"
            );
        }
    }

    #[test]
    fn rejects_vocab_too_small_for_terms_per_doc() {
        let mut spec = base_spec();
        spec.vocab_size = 8;
        spec.num_clusters = 4;
        spec.terms_per_doc = 4;
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn cross_cluster_terms_stay_weak_and_present() {
        let mut spec = base_spec();
        spec.query_cross_cluster_terms = 2;
        spec.num_queries = 8;
        let set = generate_synthetic(&spec).unwrap();
        let mut saw_foreign_term = false;
        for (i, (_, query)) in set.queries.iter().enumerate() {
            let home = set.query_clusters[i];
            let (start, pool) = (
                (home as u64 * spec.vocab_size as u64 / spec.num_clusters as u64) as u32,
                ((home + 1) as u64 * spec.vocab_size as u64 / spec.num_clusters as u64) as u32,
            );
            for &(term, _) in query.entries() {
                if term.value() < start || term.value() >= pool {
                    saw_foreign_term = true;
                }
            }
        }
        assert!(saw_foreign_term, "cross-cluster terms should appear");
    }

    #[test]
    fn safe_search_on_files_round_trip_matches_in_memory() {
        // Files re-parsed through the ingest path must reproduce the same
        // impacts and therefore the same rankings.
        let spec = base_spec();
        let set = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_synthetic_files(&set, dir.path()).unwrap();

        let reparsed = Corpus::from_jsonl_reader(std::io::BufReader::new(
            std::fs::File::open(dir.path().join("docs.jsonl")).unwrap(),
        ))
        .unwrap();
        assert_eq!(reparsed.num_docs(), set.corpus.num_docs());
        let queries = crate::corpus::parse_queries(
            std::io::BufReader::new(std::fs::File::open(dir.path().join("queries.jsonl")).unwrap()),
            &reparsed.vocab,
            crate::corpus::DEFAULT_QUERY_WEIGHT_SCALE,
        )
        .unwrap();
        for ((qid_mem, q_mem), (qid_file, q_file)) in set.queries.iter().zip(queries.iter()) {
            assert_eq!(qid_mem, qid_file);
            let mem = exact_topk(&set.corpus, q_mem, 10).unwrap();
            let file = exact_topk(&reparsed, q_file, 10).unwrap();
            let mem_ids: Vec<(&str, u64)> = mem
                .entries()
                .iter()
                .map(|&(d, s)| (set.corpus.manifest.external_ids[d as usize].as_str(), s))
                .collect();
            let file_ids: Vec<(&str, u64)> = file
                .entries()
                .iter()
                .map(|&(d, s)| (reparsed.manifest.external_ids[d as usize].as_str(), s))
                .collect();
            assert_eq!(mem_ids, file_ids);
        }
    }
}
