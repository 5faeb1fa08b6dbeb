//! Exhaustive exact scorer: the pruning-free ground truth.
//!
//! Scores every document by direct summation, sorts, and truncates — no
//! blocks, no bounds, no heap shortcuts — so pruning bugs in the engine
//! cannot cancel out here. Zero-scoring documents are excluded on both sides,
//! so comparisons stay like-for-like when matches are scarce.

use std::cmp::Reverse;

use crate::corpus::{ext_id_ranks, Corpus, QueryVector};
use crate::error::{Error, Result};
use crate::index::SpIndex;
use crate::ratio::Ratio;
use crate::search::{result_fingerprint, SearchOutcome};

/// Exact top-k over one query: `(internal doc id, score)` sorted by score
/// descending then external id ascending, truncated to `k`, zero scores
/// excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactRanking {
    entries: Vec<(u32, u64)>,
    fingerprint: u64,
}

impl ExactRanking {
    pub fn entries(&self) -> &[(u32, u64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scores(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|&(_, s)| s)
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    #[cfg(test)]
    pub(crate) fn for_tests(entries: Vec<(u32, u64)>, fingerprint: u64) -> ExactRanking {
        ExactRanking {
            entries,
            fingerprint,
        }
    }
}

fn dot(doc: &[(crate::corpus::TermId, u8)], query: &[(crate::corpus::TermId, u32)]) -> u64 {
    let mut score = 0u64;
    let mut di = 0;
    let mut qi = 0;
    while di < doc.len() && qi < query.len() {
        match doc[di].0.cmp(&query[qi].0) {
            std::cmp::Ordering::Less => di += 1,
            std::cmp::Ordering::Greater => qi += 1,
            std::cmp::Ordering::Equal => {
                score += doc[di].1 as u64 * query[qi].1 as u64;
                di += 1;
                qi += 1;
            }
        }
    }
    score
}

fn rank_all(scored: Vec<(u32, u64)>, ranks: &[u32], k: usize) -> Vec<(u32, u64)> {
    let mut positive: Vec<(u32, u64)> = scored.into_iter().filter(|&(_, s)| s > 0).collect();
    positive.sort_by_key(|&(id, score)| (Reverse(score), ranks[id as usize]));
    positive.truncate(k);
    positive
}

/// Exhaustive top-k over the corpus. Never touches block structure, so the
/// result is invariant under any partitioning choice.
pub fn exact_topk(corpus: &Corpus, query: &QueryVector, k: usize) -> Result<ExactRanking> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let ranks = ext_id_ranks(&corpus.manifest.external_ids);
    let scored: Vec<(u32, u64)> = corpus
        .docs
        .iter()
        .enumerate()
        .map(|(id, doc)| (id as u32, dot(doc.entries(), query.entries())))
        .collect();
    Ok(ExactRanking {
        entries: rank_all(scored, &ranks, k),
        fingerprint: result_fingerprint(
            corpus.manifest.num_docs,
            corpus.manifest.vocab_size,
            corpus.manifest.quantization.scale,
            query,
            k,
        ),
    })
}

/// Exhaustive top-k over a loaded index, reconstructing document scores from
/// the forward index without any pruning. Ids are ordered positions.
pub fn exact_topk_index(index: &SpIndex, query: &QueryVector, k: usize) -> Result<ExactRanking> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let b = index.geometry.block_size as usize;
    let mut scores = vec![0u64; index.geometry.num_docs as usize];
    for block in 0..index.geometry.num_blocks {
        let postings = index.forward.block(block);
        let base = block as usize * b;
        for (i, &term) in postings.terms.iter().enumerate() {
            let weight = query
                .entries()
                .binary_search_by_key(&term, |&(t, _)| t.value())
                .map(|pos| query.entries()[pos].1)
                .unwrap_or(0);
            if weight == 0 {
                continue;
            }
            for (slot, impact) in postings.postings(i) {
                scores[base + slot as usize] += weight as u64 * impact as u64;
            }
        }
    }
    let ranks: Vec<u32> = (0..index.geometry.num_docs)
        .map(|pos| index.ext_id_rank(pos))
        .collect();
    let scored: Vec<(u32, u64)> = scores
        .into_iter()
        .enumerate()
        .map(|(id, s)| (id as u32, s))
        .collect();
    Ok(ExactRanking {
        entries: rank_all(scored, &ranks, k),
        fingerprint: result_fingerprint(
            index.num_docs(),
            index.vocab_size(),
            index.manifest.quantization.scale,
            query,
            k,
        ),
    })
}

/// Exact mean of the top `k_prime` scores.
pub fn avg_topk(ranking: &ExactRanking, k_prime: usize) -> Result<Ratio> {
    if k_prime == 0 || k_prime > ranking.len() {
        return Err(Error::InvalidParameter(format!(
            "k' must be in [1, {}], got {k_prime}",
            ranking.len()
        )));
    }
    let sum: u64 = ranking.entries[..k_prime].iter().map(|&(_, s)| s).sum();
    Ratio::new(sum, k_prime as u64)
}

/// Result of checking `Avg(k', approx) >= mu * Avg(k', exact)` for every
/// prefix length `k'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompetitivenessReport {
    pub ok: bool,
    /// Smallest `Avg(k', approx) / Avg(k', exact)` over the checked prefixes,
    /// when the exact side is positive somewhere.
    pub worst_ratio: Option<Ratio>,
    /// First prefix length violating the inequality, if any.
    pub failing_k_prime: Option<usize>,
}

/// Verify mu-competitiveness of an approximate result against the exact
/// ranking, in exact rational arithmetic. Prefixes run to the shorter of the
/// two result lists (both sides exclude zero scores, so the lists have equal
/// length whenever enough matches exist).
pub fn competitiveness_report(
    approx: &SearchOutcome,
    exact: &ExactRanking,
    mu: Ratio,
    k: usize,
) -> Result<CompetitivenessReport> {
    if approx.fingerprint() != exact.fingerprint() {
        return Err(Error::FingerprintMismatch);
    }
    if mu.is_zero() || mu > Ratio::ONE {
        return Err(Error::InvalidParameter(format!(
            "mu must be in (0, 1], got {mu}"
        )));
    }
    let n = k.min(approx.hits.len()).min(exact.len());
    let mut approx_sum: u64 = 0;
    let mut exact_sum: u64 = 0;
    let mut worst: Option<(u64, u64)> = None;
    let mut failing = None;
    for k_prime in 1..=n {
        approx_sum += approx.hits[k_prime - 1].score;
        exact_sum += exact.entries[k_prime - 1].1;
        // Avg(k') comparisons share the divisor, so compare the sums:
        // approx_sum >= mu * exact_sum.
        if failing.is_none() && mu.times_cmp(exact_sum, approx_sum) == std::cmp::Ordering::Greater {
            failing = Some(k_prime);
        }
        if exact_sum > 0 {
            let candidate = (approx_sum, exact_sum);
            let smaller = match worst {
                None => true,
                Some((wn, wd)) => (candidate.0 as u128 * wd as u128) < (wn as u128 * candidate.1 as u128),
            };
            if smaller {
                worst = Some(candidate);
            }
        }
    }
    Ok(CompetitivenessReport {
        ok: failing.is_none(),
        worst_ratio: match worst {
            Some((num, den)) => Some(Ratio::new(num, den)?),
            None => None,
        },
        failing_k_prime: failing,
    })
}
