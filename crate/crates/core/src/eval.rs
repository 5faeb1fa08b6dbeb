//! Relevance metrics, recall budgets, and the batch benchmark runner.

use std::collections::HashMap;
use std::io::BufRead;
use std::time::Instant;

use serde::Serialize;

use crate::corpus::QueryVector;
use crate::error::{Error, Result};
use crate::index::SpIndex;
use crate::search::{SearchOutcome, SearchParams, Searcher, TraversalStats};

/// Relevance judgments: query id -> (doc id -> grade). Binary metrics treat
/// grade >= 1 as relevant.
#[derive(Debug, Clone, Default)]
pub struct Qrels {
    map: HashMap<String, HashMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Qrels {
        Qrels::default()
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) {
        self.map
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade);
    }

    pub fn for_query(&self, query_id: &str) -> Option<&HashMap<String, u32>> {
        self.map.get(query_id)
    }

    pub fn num_queries(&self) -> usize {
        self.map.len()
    }

    /// Parse tab-separated `query_id<TAB>doc_id<TAB>grade` lines.
    pub fn parse_tsv<R: BufRead>(reader: R) -> Result<Qrels> {
        let mut qrels = Qrels::new();
        for (line_idx, line) in reader.lines().enumerate() {
            let line_no = line_idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(qid), Some(did), Some(grade)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected query_id<TAB>doc_id<TAB>grade".into(),
                });
            };
            let grade: u32 = grade.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid relevance grade {grade:?}"),
            })?;
            qrels.insert(qid, did, grade);
        }
        Ok(qrels)
    }
}

fn is_relevant(rels: &HashMap<String, u32>, doc: &str) -> bool {
    rels.get(doc).copied().unwrap_or(0) >= 1
}

/// Reciprocal rank of the first relevant document within the top 10; zero if
/// none appears there.
pub fn mrr_at_10(ranked: &[String], rels: &HashMap<String, u32>) -> f64 {
    for (i, doc) in ranked.iter().take(10).enumerate() {
        if is_relevant(rels, doc) {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}

/// Recall@k outcome; `no_relevant` flags queries judged without any relevant
/// document, whose recall is defined as 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecallOutcome {
    pub value: f64,
    pub no_relevant: bool,
}

pub fn recall_at_k(ranked: &[String], rels: &HashMap<String, u32>, k: usize) -> RecallOutcome {
    let total_relevant = rels.values().filter(|&&g| g >= 1).count();
    if total_relevant == 0 {
        return RecallOutcome {
            value: 1.0,
            no_relevant: true,
        };
    }
    if k == 0 {
        return RecallOutcome {
            value: 0.0,
            no_relevant: false,
        };
    }
    let hit = ranked
        .iter()
        .take(k)
        .filter(|doc| is_relevant(rels, doc))
        .count();
    RecallOutcome {
        value: hit as f64 / total_relevant as f64,
        no_relevant: false,
    }
}

/// nDCG@10 with gains `2^grade - 1` and `log2(rank + 1)` discounts,
/// normalized by the ideal ordering of the judged grades; zero when no
/// positive grade exists.
pub fn ndcg_at_10(ranked: &[String], rels: &HashMap<String, u32>) -> f64 {
    fn gain(grade: u32) -> f64 {
        2f64.powi(grade.min(62) as i32) - 1.0
    }
    let dcg: f64 = ranked
        .iter()
        .take(10)
        .enumerate()
        .map(|(i, doc)| {
            let grade = rels.get(doc).copied().unwrap_or(0);
            gain(grade) / ((i + 2) as f64).log2()
        })
        .sum();
    let mut grades: Vec<u32> = rels.values().copied().filter(|&g| g > 0).collect();
    grades.sort_unstable_by(|a, b| b.cmp(a));
    let ideal: f64 = grades
        .iter()
        .take(10)
        .enumerate()
        .map(|(i, &g)| gain(g) / ((i + 2) as f64).log2())
        .sum();
    if ideal == 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}

/// Did an approximate configuration preserve enough of the safe recall?
/// Values above 1 are taken as percentages and normalized.
pub fn recall_budget_eval(safe_recall: f64, achieved_recall: f64, budget: f64) -> Result<bool> {
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "recall budget must be in (0, 1], got {budget}"
        )));
    }
    let normalize = |v: f64| if v > 1.0 { v / 100.0 } else { v };
    Ok(normalize(achieved_recall) >= budget * normalize(safe_recall))
}

/// Per-query metric row in a benchmark report.
#[derive(Debug, Clone, Serialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub mrr_at_10: f64,
    pub recall_at_k: f64,
    pub no_relevant: bool,
    pub ndcg_at_10: f64,
}

/// Mean traversal counters over a query batch, with pruning rates relative
/// to the index geometry.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct MeanStats {
    pub superblocks_pruned: f64,
    pub blocks_pruned: f64,
    pub blocks_scored: f64,
    pub docs_scored: f64,
    pub superblocks_pruned_pct: f64,
}

/// Relevance summary across a batch.
#[derive(Debug, Clone, Serialize)]
pub struct MetricSummary {
    pub mrr_at_10: f64,
    pub recall_at_k: f64,
    pub ndcg_at_10: f64,
    pub queries_without_relevant: usize,
    pub per_query: Vec<QueryMetrics>,
}

/// Full benchmark output: timing, pruning counters, and (with qrels)
/// relevance metrics.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub k: usize,
    pub num_queries: usize,
    pub repetitions: usize,
    pub mean_latency_ms: f64,
    pub mean_stats: MeanStats,
    pub metrics: Option<MetricSummary>,
}

fn mean_stats(stats: &[TraversalStats], num_superblocks: u64) -> MeanStats {
    if stats.is_empty() {
        return MeanStats::default();
    }
    let n = stats.len() as f64;
    let sum = |f: fn(&TraversalStats) -> u64| stats.iter().map(f).sum::<u64>() as f64 / n;
    let superblocks_pruned = sum(|s| s.superblocks_pruned);
    MeanStats {
        superblocks_pruned,
        blocks_pruned: sum(|s| s.blocks_pruned),
        blocks_scored: sum(|s| s.blocks_scored),
        docs_scored: sum(|s| s.docs_scored),
        superblocks_pruned_pct: if num_superblocks > 0 {
            superblocks_pruned / num_superblocks as f64
        } else {
            0.0
        },
    }
}

/// Compute the relevance summary for a batch of finished searches.
pub fn summarize_metrics(
    outcomes: &[(String, SearchOutcome)],
    qrels: &Qrels,
    k: usize,
) -> MetricSummary {
    let empty = HashMap::new();
    let mut per_query = Vec::with_capacity(outcomes.len());
    for (query_id, outcome) in outcomes {
        let rels = qrels.for_query(query_id).unwrap_or(&empty);
        let ranked: Vec<String> = outcome.hits.iter().map(|h| h.doc.clone()).collect();
        let recall = recall_at_k(&ranked, rels, k);
        per_query.push(QueryMetrics {
            query_id: query_id.clone(),
            mrr_at_10: mrr_at_10(&ranked, rels),
            recall_at_k: recall.value,
            no_relevant: recall.no_relevant,
            ndcg_at_10: ndcg_at_10(&ranked, rels),
        });
    }
    let n = per_query.len().max(1) as f64;
    MetricSummary {
        mrr_at_10: per_query.iter().map(|m| m.mrr_at_10).sum::<f64>() / n,
        recall_at_k: per_query.iter().map(|m| m.recall_at_k).sum::<f64>() / n,
        ndcg_at_10: per_query.iter().map(|m| m.ndcg_at_10).sum::<f64>() / n,
        queries_without_relevant: per_query.iter().filter(|m| m.no_relevant).count(),
        per_query,
    }
}

/// Run the query batch `repetitions` times (at least 3), drop the first two
/// passes as warmup, and report mean per-query latency over the remaining
/// passes. Metrics and traversal counters come from the final pass.
///
/// `threads > 1` shards queries across that many worker threads, each with
/// its own searcher and scratch; results are merged back in input order.
pub fn run_benchmark(
    index: &SpIndex,
    queries: &[(String, QueryVector)],
    params: &SearchParams,
    repetitions: usize,
    qrels: Option<&Qrels>,
    threads: usize,
) -> Result<MetricReport> {
    if repetitions < 3 {
        return Err(Error::InvalidParameter(format!(
            "repetitions must be at least 3, got {repetitions}"
        )));
    }
    params.validate()?;

    let mut latencies_ms: Vec<f64> = vec![0.0; queries.len()];
    let mut outcomes: Vec<Option<(String, SearchOutcome)>> = vec![None; queries.len()];
    let kept_passes = (repetitions - 2) as f64;

    let run_shard = |shard: &[(usize, &(String, QueryVector))]| -> Result<Vec<(usize, f64, SearchOutcome)>> {
        let mut searcher = Searcher::new(index);
        let mut rows = Vec::with_capacity(shard.len());
        for &(slot, (qid, query)) in shard {
            let mut kept_ms = 0.0;
            let mut last = None;
            for pass in 0..repetitions {
                let start = Instant::now();
                let outcome = searcher.search(query, params)?;
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                if pass >= 2 {
                    kept_ms += elapsed;
                }
                if pass == repetitions - 1 {
                    last = Some(outcome);
                }
            }
            let _ = qid;
            rows.push((slot, kept_ms / kept_passes, last.expect("ran at least once")));
        }
        Ok(rows)
    };

    let indexed: Vec<(usize, &(String, QueryVector))> = queries.iter().enumerate().collect();
    if threads <= 1 {
        for (slot, mean_ms, outcome) in run_shard(&indexed)? {
            latencies_ms[slot] = mean_ms;
            outcomes[slot] = Some((queries[slot].0.clone(), outcome));
        }
    } else {
        let shards: Vec<Vec<(usize, &(String, QueryVector))>> = (0..threads)
            .map(|t| indexed.iter().skip(t).step_by(threads).copied().collect())
            .collect();
        let results = std::thread::scope(|scope| {
            let handles: Vec<_> = shards
                .iter()
                .map(|shard| scope.spawn(|| run_shard(shard)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("benchmark worker panicked"))
                .collect::<Vec<_>>()
        });
        for result in results {
            for (slot, mean_ms, outcome) in result? {
                latencies_ms[slot] = mean_ms;
                outcomes[slot] = Some((queries[slot].0.clone(), outcome));
            }
        }
    }

    let outcomes: Vec<(String, SearchOutcome)> =
        outcomes.into_iter().map(|o| o.expect("query ran")).collect();
    let stats: Vec<TraversalStats> = outcomes.iter().map(|(_, o)| o.stats).collect();
    let mean_latency_ms = if latencies_ms.is_empty() {
        0.0
    } else {
        latencies_ms.iter().sum::<f64>() / latencies_ms.len() as f64
    };

    Ok(MetricReport {
        k: params.k,
        num_queries: queries.len(),
        repetitions,
        mean_latency_ms,
        mean_stats: mean_stats(&stats, index.geometry.num_superblocks as u64),
        metrics: qrels.map(|q| summarize_metrics(&outcomes, q, params.k)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rels(pairs: &[(&str, u32)]) -> HashMap<String, u32> {
        pairs.iter().map(|&(d, g)| (d.to_string(), g)).collect()
    }

    fn ranked(docs: &[&str]) -> Vec<String> {
        docs.iter().map(|d| d.to_string()).collect()
    }

    #[test]
    fn mrr_first_positions() {
        let r = rels(&[("d2", 1)]);
        assert_eq!(mrr_at_10(&ranked(&["d2", "d0"]), &r), 1.0);
        assert_eq!(mrr_at_10(&ranked(&["d0", "d1", "d2"]), &r), 1.0 / 3.0);
    }

    #[test]
    fn mrr_cutoff_at_ten() {
        let r = rels(&[("d10", 1)]);
        let docs: Vec<String> = (0..11).map(|i| format!("d{i}")).collect();
        assert_eq!(mrr_at_10(&docs, &r), 0.0);
    }

    #[test]
    fn recall_fractions() {
        let r = rels(&[("a", 1), ("b", 1), ("c", 1), ("d", 1)]);
        let out = recall_at_k(&ranked(&["a", "x", "b", "y"]), &r, 4);
        assert_eq!(out.value, 0.5);
        assert!(!out.no_relevant);
        let all = recall_at_k(&ranked(&["a", "b", "c", "d"]), &r, 4);
        assert_eq!(all.value, 1.0);
    }

    #[test]
    fn recall_degenerate_cases() {
        let r = rels(&[("a", 1)]);
        assert_eq!(recall_at_k(&ranked(&["a"]), &r, 0).value, 0.0);
        let none = recall_at_k(&ranked(&["a"]), &rels(&[("z", 0)]), 5);
        assert_eq!(none.value, 1.0);
        assert!(none.no_relevant);
    }

    #[test]
    fn ndcg_hand_cases() {
        let r = rels(&[("a", 1)]);
        assert!((ndcg_at_10(&ranked(&["a", "b"]), &r) - 1.0).abs() < 1e-12);
        // Relevant at rank 2: (1/log2(3)) / 1.
        let expected = 1.0 / 3f64.log2();
        assert!((ndcg_at_10(&ranked(&["b", "a"]), &r) - expected).abs() < 1e-12);
        assert_eq!(ndcg_at_10(&ranked(&["a"]), &rels(&[])), 0.0);
    }

    #[test]
    fn recall_budget_boundaries() {
        // Safe 98.36 on the percent scale; the pass threshold is 97.3764.
        assert!(recall_budget_eval(98.36, 97.38, 0.99).unwrap());
        assert!(!recall_budget_eval(98.36, 97.00, 0.99).unwrap());
        assert!(recall_budget_eval(0.5, 0.5, 1.0).unwrap());
        assert!(recall_budget_eval(98.36, 0.9738, 0.99).unwrap());
        assert!(recall_budget_eval(0.9836, 97.38, 0.99).unwrap());
        assert!(recall_budget_eval(0.5, 0.4, 0.0).is_err());
        assert!(recall_budget_eval(0.5, 0.4, 1.5).is_err());
    }

    #[test]
    fn qrels_round_trip() {
        let text = "q1\td1\t2\nq1\td2\t0\nq2\td1\t1\n";
        let qrels = Qrels::parse_tsv(std::io::Cursor::new(text)).unwrap();
        assert_eq!(qrels.num_queries(), 2);
        assert_eq!(qrels.for_query("q1").unwrap().get("d1"), Some(&2));
        assert!(Qrels::parse_tsv(std::io::Cursor::new("q1 d1 1\n")).is_err());
        assert!(Qrels::parse_tsv(std::io::Cursor::new("q1\td1\tx\n")).is_err());
    }
}
