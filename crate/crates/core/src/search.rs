//! Top-k retrieval with two-level dynamic pruning.
//!
//! A query first scores every superblock with two precomputed bounds: the
//! maximum bound (query weights against per-superblock term maxima) and the
//! average bound (query weights against the exact child sums, divided by the
//! child count at decision time). Superblocks whose maximum bound falls under
//! `theta / mu` and whose average bound falls under `theta / eta` are pruned
//! outright; survivors expand into per-block bounds, and surviving blocks are
//! scored against the forward index in descending bound order.
//!
//! With `mu = eta = 1` the traversal is rank-safe: it returns exactly the
//! exhaustive top-k, including the external-id tie-break. To keep that
//! guarantee exact under integer score ties, bounds that *equal* the current
//! threshold are still visited while the heap is full (an equal-scoring
//! document can displace the current worst entry on the id tie-break), and
//! equal-scoring candidates with an earlier external id are admitted to the
//! heap. The standalone [`superblock_prune_decision`] predicate keeps the
//! plain `<=` contract.

use std::cmp::{Ordering, Reverse};
use std::collections::hash_map::DefaultHasher;
use std::collections::BinaryHeap;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::{prune_query, QueryVector, TermId};
use crate::error::{Error, Result};
use crate::index::SpIndex;
use crate::ratio::Ratio;

/// Loop order for accumulating block bounds over the surviving superblocks.
///
/// Both orders compute identical integer sums; they differ in which operand
/// streams through the cache. Superblock-at-a-time keeps one superblock's
/// accumulators hot across all query terms and is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LoopOrder {
    SuperblockAtATime,
    TermAtATime,
}

impl FromStr for LoopOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<LoopOrder> {
        match s {
            "saat" | "superblock-at-a-time" => Ok(LoopOrder::SuperblockAtATime),
            "taat" | "term-at-a-time" => Ok(LoopOrder::TermAtATime),
            other => Err(Error::InvalidParameter(format!(
                "unknown loop order {other:?} (expected \"saat\" or \"taat\")"
            ))),
        }
    }
}

/// Traversal mode. Interleaved merges the superblock stream with the block
/// pool so every prune decision sees the live threshold; two-phase decides
/// all superblocks once upfront (against theta = 0) and then scores blocks in
/// one fully sorted pass, which isolates the loop-order effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SearchMode {
    Interleaved,
    TwoPhase,
}

impl FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<SearchMode> {
        match s {
            "interleaved" => Ok(SearchMode::Interleaved),
            "two-phase" | "twophase" => Ok(SearchMode::TwoPhase),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode {other:?} (expected \"interleaved\" or \"two-phase\")"
            ))),
        }
    }
}

/// Query-time configuration. `mu` and `eta` trade safeness for pruning power
/// and must satisfy `0 < mu <= eta <= 1`; `beta` keeps the smallest
/// weight-mass prefix of query terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    pub k: usize,
    pub mu: Ratio,
    pub eta: Ratio,
    pub beta: Ratio,
    pub loop_order: LoopOrder,
    pub mode: SearchMode,
}

impl Default for SearchParams {
    fn default() -> SearchParams {
        SearchParams {
            k: 10,
            mu: Ratio::ONE,
            eta: Ratio::ONE,
            beta: Ratio::ONE,
            loop_order: LoopOrder::SuperblockAtATime,
            mode: SearchMode::Interleaved,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        validate_pruning_factors(self.mu, self.eta)?;
        if self.beta.is_zero() || self.beta > Ratio::ONE {
            return Err(Error::InvalidParameter(format!(
                "beta must be in (0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

fn validate_pruning_factors(mu: Ratio, eta: Ratio) -> Result<()> {
    if mu.is_zero() || mu > eta || eta > Ratio::ONE {
        return Err(Error::InvalidParameter(format!(
            "pruning factors must satisfy 0 < mu <= eta <= 1, got mu={mu}, eta={eta}"
        )));
    }
    Ok(())
}

/// Counters mirroring the pruning behavior of one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TraversalStats {
    pub superblocks_pruned: u64,
    pub blocks_pruned: u64,
    pub blocks_scored: u64,
    pub docs_scored: u64,
}

// ---------------------------------------------------------------------------
// Top-k accumulation
// ---------------------------------------------------------------------------

/// Heap entry ordered by score, then by earlier external id (smaller rank).
#[derive(Debug, Clone, Copy)]
struct Entry {
    score: u64,
    rank: u32,
    pos: u32,
}

impl Entry {
    fn cmp_goodness(&self, other: &Entry) -> Ordering {
        self.score
            .cmp(&other.score)
            .then_with(|| other.rank.cmp(&self.rank))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Entry) -> bool {
        self.cmp_goodness(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Entry) -> Option<Ordering> {
        Some(self.cmp_goodness(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Entry) -> Ordering {
        self.cmp_goodness(other)
    }
}

/// Min-heap of the best k `(score, doc)` pairs seen so far. `theta` is the
/// k-th best score once the heap is full and never decreases over a query.
/// Zero-scoring documents are never admitted.
#[derive(Debug, Clone)]
pub struct TopKAccumulator {
    k: usize,
    heap: BinaryHeap<Reverse<Entry>>,
}

impl TopKAccumulator {
    pub fn new(k: usize) -> TopKAccumulator {
        TopKAccumulator {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() == self.k
    }

    /// Current threshold: the k-th best score, or 0 while fewer than k
    /// documents have been admitted.
    pub fn theta(&self) -> u64 {
        if self.is_full() {
            self.heap.peek().map(|e| e.0.score).unwrap_or(0)
        } else {
            0
        }
    }

    /// Offer one scored document. Admits scores above `theta`, and scores
    /// equal to `theta` whose external id outranks the current worst entry.
    pub fn offer(&mut self, score: u64, pos: u32, rank: u32) -> bool {
        if score == 0 {
            return false;
        }
        let entry = Entry { score, rank, pos };
        if self.heap.len() < self.k {
            self.heap.push(Reverse(entry));
            return true;
        }
        let worst = self.heap.peek().expect("heap is full").0;
        if entry > worst {
            self.heap.pop();
            self.heap.push(Reverse(entry));
            true
        } else {
            false
        }
    }

    /// Drain into `(position, score)` sorted by score descending, then by
    /// id rank ascending.
    pub fn into_ranked(self) -> Vec<(u32, u64)> {
        let mut entries: Vec<Entry> = self.heap.into_iter().map(|e| e.0).collect();
        entries.sort_by(|a, b| b.cmp_goodness(a));
        entries.into_iter().map(|e| (e.pos, e.score)).collect()
    }
}

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

/// Per-superblock score bounds for one query: `sbmax[x]` bounds any single
/// document in superblock `x`; `child_sum_score[x]` is exactly `c` times the
/// average of its child block bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperblockBounds {
    pub sbmax: Vec<u64>,
    pub child_sum_score: Vec<u64>,
}

/// Accumulate both superblock bounds for every superblock. Query terms
/// outside the vocabulary contribute zero, as if absent from every posting.
pub fn superblock_bounds(index: &SpIndex, query: &QueryVector) -> SuperblockBounds {
    let s = index.geometry.num_superblocks as usize;
    let vocab = index.vocab_size();
    let mut sbmax = vec![0u64; s];
    let mut child_sum_score = vec![0u64; s];
    for &(term, weight) in query.entries() {
        if term.value() >= vocab || weight == 0 {
            continue;
        }
        let w = weight as u64;
        for (x, &m) in index.superblock.max_row(term.value()).iter().enumerate() {
            sbmax[x] += w * m as u64;
        }
        for (x, &cs) in index
            .superblock
            .child_sum_row(term.value())
            .iter()
            .enumerate()
        {
            child_sum_score[x] += w * cs as u64;
        }
    }
    SuperblockBounds {
        sbmax,
        child_sum_score,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneDecision {
    Prune,
    Visit,
}

/// The superblock pruning rule, in exact cross-multiplied arithmetic:
/// prune when `mu * sbmax <= theta` and `eta * child_sum_score <= c * theta`.
pub fn superblock_prune_decision(
    sbmax: u64,
    child_sum_score: u64,
    theta: u64,
    mu: Ratio,
    eta: Ratio,
    c: u32,
) -> Result<PruneDecision> {
    validate_pruning_factors(mu, eta)?;
    let max_prunable = mu.times_cmp(sbmax, theta) != Ordering::Greater;
    let avg_prunable = eta.times_cmp_scaled(child_sum_score, c as u64, theta) != Ordering::Greater;
    if max_prunable && avg_prunable {
        Ok(PruneDecision::Prune)
    } else {
        Ok(PruneDecision::Visit)
    }
}

/// Tie-aware traversal comparison: does `ratio * value` still allow a
/// document this unit could contain to enter the heap? Strictly above theta
/// always does; exactly theta does only while the heap is full, where an
/// equal score can still win the id tie-break.
fn bound_beats(ratio: Ratio, value: u64, theta: u64, heap_full: bool) -> bool {
    match ratio.times_cmp(value, theta) {
        Ordering::Greater => true,
        Ordering::Equal => heap_full,
        Ordering::Less => false,
    }
}

/// Same comparison for the average bound, whose threshold side carries the
/// child-count factor.
fn avg_bound_beats(ratio: Ratio, child_sum_score: u64, c: u32, theta: u64, heap_full: bool) -> bool {
    match ratio.times_cmp_scaled(child_sum_score, c as u64, theta) {
        Ordering::Greater => true,
        Ordering::Equal => heap_full,
        Ordering::Less => false,
    }
}

/// Block bounds for every child block of the listed superblocks, in listing
/// order with children ascending. Both loop orders accumulate the same
/// integer sums.
pub fn block_boundsums(
    index: &SpIndex,
    query: &QueryVector,
    superblock_ids: &[u32],
    loop_order: LoopOrder,
) -> Vec<(u32, u64)> {
    let mut out: Vec<(u32, u64)> = Vec::new();
    let mut offsets = Vec::with_capacity(superblock_ids.len());
    for &x in superblock_ids {
        offsets.push(out.len());
        for block in index.geometry.child_blocks(x) {
            out.push((block, 0));
        }
    }
    let vocab = index.vocab_size();
    match loop_order {
        LoopOrder::TermAtATime => {
            for &(term, weight) in query.entries() {
                if term.value() >= vocab || weight == 0 {
                    continue;
                }
                let w = weight as u64;
                let row = index.block_max.row(term.value());
                for (i, &x) in superblock_ids.iter().enumerate() {
                    let mut slot = offsets[i];
                    for block in index.geometry.child_blocks(x) {
                        out[slot].1 += w * row[block as usize] as u64;
                        slot += 1;
                    }
                }
            }
        }
        LoopOrder::SuperblockAtATime => {
            for (i, &x) in superblock_ids.iter().enumerate() {
                for &(term, weight) in query.entries() {
                    if term.value() >= vocab || weight == 0 {
                        continue;
                    }
                    let w = weight as u64;
                    let row = index.block_max.row(term.value());
                    let mut slot = offsets[i];
                    for block in index.geometry.child_blocks(x) {
                        out[slot].1 += w * row[block as usize] as u64;
                        slot += 1;
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Document scoring
// ---------------------------------------------------------------------------

/// Score every document slot of one block through the forward index and
/// offer the positive scores to the accumulator. Returns the number of real
/// documents in the block; padded slots score zero and are never offered.
pub fn score_block(
    index: &SpIndex,
    query: &QueryVector,
    block_id: u32,
    acc: &mut TopKAccumulator,
) -> u64 {
    let mut scratch = Vec::new();
    score_block_into(index, query.entries(), block_id, acc, &mut scratch)
}

fn score_block_into(
    index: &SpIndex,
    query: &[(TermId, u32)],
    block_id: u32,
    acc: &mut TopKAccumulator,
    scratch: &mut Vec<u64>,
) -> u64 {
    let b = index.geometry.block_size as usize;
    scratch.clear();
    scratch.resize(b, 0);

    let postings = index.forward.block(block_id);
    let terms = postings.terms;
    let mut qi = 0;
    let mut ti = 0;
    while qi < query.len() && ti < terms.len() {
        let (qt, qw) = query[qi];
        match qt.value().cmp(&terms[ti]) {
            Ordering::Less => qi += 1,
            Ordering::Greater => ti += 1,
            Ordering::Equal => {
                if qw > 0 {
                    let w = qw as u64;
                    for (slot, impact) in postings.postings(ti) {
                        scratch[slot as usize] += w * impact as u64;
                    }
                }
                qi += 1;
                ti += 1;
            }
        }
    }

    let doc_range = index.geometry.block_doc_range(block_id);
    let docs_scored = doc_range.len() as u64;
    let base = block_id * index.geometry.block_size;
    for pos in doc_range {
        let score = scratch[(pos - base) as usize];
        if score > 0 {
            acc.offer(score, pos, index.ext_id_rank(pos));
        }
    }
    docs_scored
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

/// One retrieved document: external id plus integer score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchHit {
    pub doc: String,
    pub score: u64,
}

/// Ranked results plus the pruning counters of the traversal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub hits: Vec<SearchHit>,
    pub stats: TraversalStats,
    fingerprint: u64,
}

impl SearchOutcome {
    pub fn scores(&self) -> impl Iterator<Item = u64> + '_ {
        self.hits.iter().map(|h| h.score)
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    #[cfg(test)]
    pub(crate) fn for_tests(hits: Vec<SearchHit>, fingerprint: u64) -> SearchOutcome {
        SearchOutcome {
            hits,
            stats: TraversalStats::default(),
            fingerprint,
        }
    }
}

/// Identifies the `(corpus, query, k)` triple a result was computed for, so
/// mismatched comparisons fail loudly instead of silently.
pub(crate) fn result_fingerprint(
    num_docs: u32,
    vocab_size: u32,
    scale: f64,
    query: &QueryVector,
    k: usize,
) -> u64 {
    let mut hasher = DefaultHasher::new();
    num_docs.hash(&mut hasher);
    vocab_size.hash(&mut hasher);
    scale.to_bits().hash(&mut hasher);
    for &(term, weight) in query.entries() {
        term.value().hash(&mut hasher);
        weight.hash(&mut hasher);
    }
    k.hash(&mut hasher);
    hasher.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BlockCandidate {
    bound: u64,
    block: u32,
}

impl PartialOrd for BlockCandidate {
    fn partial_cmp(&self, other: &BlockCandidate) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BlockCandidate {
    fn cmp(&self, other: &BlockCandidate) -> Ordering {
        // Max-heap by bound; equal bounds surface the lower block id first.
        self.bound
            .cmp(&other.bound)
            .then_with(|| other.block.cmp(&self.block))
    }
}

/// Query executor over one immutable index. Holds per-query scratch, so each
/// concurrent query needs its own `Searcher`; the index itself is shared.
pub struct Searcher<'a> {
    index: &'a SpIndex,
    score_scratch: Vec<u64>,
    child_scratch: Vec<(u32, u64)>,
}

impl<'a> Searcher<'a> {
    pub fn new(index: &'a SpIndex) -> Searcher<'a> {
        Searcher {
            index,
            score_scratch: Vec::new(),
            child_scratch: Vec::new(),
        }
    }

    pub fn index(&self) -> &'a SpIndex {
        self.index
    }

    pub fn search(&mut self, query: &QueryVector, params: &SearchParams) -> Result<SearchOutcome> {
        params.validate()?;
        let pruned = prune_query(query, params.beta)?;
        if !pruned.is_searchable() {
            return Err(Error::EmptyQuery);
        }
        let (acc, stats) = match params.mode {
            SearchMode::Interleaved => self.interleaved(&pruned, params),
            SearchMode::TwoPhase => self.two_phase(&pruned, params),
        };
        let index = self.index;
        let hits = acc
            .into_ranked()
            .into_iter()
            .map(|(pos, score)| SearchHit {
                doc: index.external_id(pos).to_string(),
                score,
            })
            .collect();
        Ok(SearchOutcome {
            hits,
            stats,
            fingerprint: result_fingerprint(
                index.num_docs(),
                index.vocab_size(),
                index.manifest.quantization.scale,
                query,
                params.k,
            ),
        })
    }

    /// Default traversal: a cursor over superblocks sorted by maximum bound
    /// descending, merged with a max-heap pool of discovered block
    /// candidates. Whichever frontier holds the larger bound goes next, so
    /// blocks are scored in globally descending bound order while every
    /// prune decision sees the live threshold.
    fn interleaved(
        &mut self,
        query: &QueryVector,
        params: &SearchParams,
    ) -> (TopKAccumulator, TraversalStats) {
        let index = self.index;
        let c = index.geometry.blocks_per_superblock;
        let bounds = superblock_bounds(index, query);
        let mut order: Vec<u32> = (0..index.geometry.num_superblocks).collect();
        order.sort_unstable_by_key(|&x| (Reverse(bounds.sbmax[x as usize]), x));

        let mut acc = TopKAccumulator::new(params.k);
        let mut stats = TraversalStats::default();
        let mut pool: BinaryHeap<BlockCandidate> = BinaryHeap::new();
        let mut cursor = 0usize;
        let mut stream_open = true;

        loop {
            let next_sb = if stream_open && cursor < order.len() {
                Some(order[cursor])
            } else {
                None
            };
            let take_block = match (pool.peek(), next_sb) {
                (Some(cand), Some(x)) => cand.bound >= bounds.sbmax[x as usize],
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };

            if take_block {
                let cand = pool.pop().expect("pool is non-empty");
                // Re-check against the threshold as of now; it may have grown
                // since this block was discovered.
                if bound_beats(params.eta, cand.bound, acc.theta(), acc.is_full()) {
                    stats.blocks_scored += 1;
                    stats.docs_scored += score_block_into(
                        index,
                        query.entries(),
                        cand.block,
                        &mut acc,
                        &mut self.score_scratch,
                    );
                } else {
                    stats.blocks_pruned += 1;
                }
                continue;
            }

            let x = next_sb.expect("stream is open");
            let sbmax = bounds.sbmax[x as usize];
            // The stream is sorted by sbmax, so once eta * sbmax cannot beat
            // theta, no later superblock can pass either prune inequality
            // (mu <= eta and the average bound never exceeds the maximum).
            if !bound_beats(params.eta, sbmax, acc.theta(), acc.is_full()) {
                stats.superblocks_pruned += (order.len() - cursor) as u64;
                stream_open = false;
                continue;
            }
            cursor += 1;

            let visit = bound_beats(params.mu, sbmax, acc.theta(), acc.is_full())
                || avg_bound_beats(
                    params.eta,
                    bounds.child_sum_score[x as usize],
                    c,
                    acc.theta(),
                    acc.is_full(),
                );
            if !visit {
                stats.superblocks_pruned += 1;
                continue;
            }

            self.expand_superblock(query, x, params.loop_order);
            for &(block, bound) in &self.child_scratch {
                if bound_beats(params.eta, bound, acc.theta(), acc.is_full()) {
                    pool.push(BlockCandidate { bound, block });
                } else {
                    stats.blocks_pruned += 1;
                }
            }
        }

        (acc, stats)
    }

    /// Ablation traversal: all superblocks decided once against theta = 0,
    /// surviving blocks' bounds computed in the chosen loop order, then one
    /// fully sorted scoring pass with dynamic block-rule re-checks.
    fn two_phase(
        &mut self,
        query: &QueryVector,
        params: &SearchParams,
    ) -> (TopKAccumulator, TraversalStats) {
        let index = self.index;
        let c = index.geometry.blocks_per_superblock;
        let bounds = superblock_bounds(index, query);

        let mut acc = TopKAccumulator::new(params.k);
        let mut stats = TraversalStats::default();
        let mut survivors = Vec::new();
        for x in 0..index.geometry.num_superblocks {
            let decision = superblock_prune_decision(
                bounds.sbmax[x as usize],
                bounds.child_sum_score[x as usize],
                0,
                params.mu,
                params.eta,
                c,
            )
            .expect("params were validated");
            match decision {
                PruneDecision::Prune => stats.superblocks_pruned += 1,
                PruneDecision::Visit => survivors.push(x),
            }
        }

        let mut blocks = block_boundsums(index, query, &survivors, params.loop_order);
        blocks.sort_unstable_by_key(|&(block, bound)| (Reverse(bound), block));
        for (block, bound) in blocks {
            if bound_beats(params.eta, bound, acc.theta(), acc.is_full()) {
                stats.blocks_scored += 1;
                stats.docs_scored += score_block_into(
                    index,
                    query.entries(),
                    block,
                    &mut acc,
                    &mut self.score_scratch,
                );
            } else {
                stats.blocks_pruned += 1;
            }
        }

        (acc, stats)
    }

    fn expand_superblock(&mut self, query: &QueryVector, x: u32, loop_order: LoopOrder) {
        let index = self.index;
        self.child_scratch.clear();
        for block in index.geometry.child_blocks(x) {
            self.child_scratch.push((block, 0));
        }
        let vocab = index.vocab_size();
        // For a single superblock the two loop orders coincide.
        let _ = loop_order;
        for &(term, weight) in query.entries() {
            if term.value() >= vocab || weight == 0 {
                continue;
            }
            let w = weight as u64;
            let row = index.block_max.row(term.value());
            for entry in self.child_scratch.iter_mut() {
                entry.1 += w * row[entry.0 as usize] as u64;
            }
        }
    }
}

/// Convenience for one-off queries; see [`Searcher`] for repeated use.
pub fn search(index: &SpIndex, query: &QueryVector, params: &SearchParams) -> Result<SearchOutcome> {
    Searcher::new(index).search(query, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, QuantizationParams, QuantizedVector, Vocabulary};
    use crate::index::{build_index, SpIndex};
    use crate::ordering::DocOrdering;

    /// Running example: b=2, c=2, d0={t0:10,t1:4}, d1={t0:6,t2:8},
    /// d2={t1:12}, d3={t0:2,t1:2,t2:2}; query {t0:1, t1:2}.
    fn sample() -> (Corpus, SpIndex, QueryVector) {
        let docs = vec![
            QuantizedVector::from_entries(vec![(TermId::new(0), 10), (TermId::new(1), 4)]).unwrap(),
            QuantizedVector::from_entries(vec![(TermId::new(0), 6), (TermId::new(2), 8)]).unwrap(),
            QuantizedVector::from_entries(vec![(TermId::new(1), 12)]).unwrap(),
            QuantizedVector::from_entries(vec![
                (TermId::new(0), 2),
                (TermId::new(1), 2),
                (TermId::new(2), 2),
            ])
            .unwrap(),
        ];
        let vocab = Vocabulary::from_terms(vec!["t0".into(), "t1".into(), "t2".into()]).unwrap();
        let ids = vec!["d0".into(), "d1".into(), "d2".into(), "d3".into()];
        let corpus =
            Corpus::from_quantized(docs, vocab, ids, QuantizationParams::from_global_max(12.0))
                .unwrap();
        let index = build_index(&corpus, &DocOrdering::identity(4), 2, 2).unwrap();
        let query =
            QueryVector::from_entries(vec![(TermId::new(0), 1), (TermId::new(1), 2)]).unwrap();
        (corpus, index, query)
    }

    #[test]
    fn superblock_bounds_match_hand_evaluation() {
        let (_, index, query) = sample();
        let bounds = superblock_bounds(&index, &query);
        // sbmax = 1*10 + 2*12; child_sum_score = 1*12 + 2*16.
        assert_eq!(bounds.sbmax, vec![34]);
        assert_eq!(bounds.child_sum_score, vec![44]);
    }

    #[test]
    fn empty_query_gives_zero_bounds() {
        let (_, index, _) = sample();
        let bounds = superblock_bounds(&index, &QueryVector::default());
        assert_eq!(bounds.sbmax, vec![0]);
        assert_eq!(bounds.child_sum_score, vec![0]);
    }

    #[test]
    fn out_of_vocab_terms_contribute_zero() {
        let (_, index, query) = sample();
        let mut entries = query.entries().to_vec();
        entries.push((TermId::new(999), 7));
        let extended = QueryVector::from_entries(entries).unwrap();
        assert_eq!(
            superblock_bounds(&index, &extended),
            superblock_bounds(&index, &query)
        );
    }

    #[test]
    fn prune_decision_examples() {
        let one = Ratio::ONE;
        let half = Ratio::new(1, 2).unwrap();
        // 34 > 18: visit.
        assert_eq!(
            superblock_prune_decision(34, 44, 18, one, one, 2).unwrap(),
            PruneDecision::Visit
        );
        // 34 <= 40 and 22 <= 40: prune.
        assert_eq!(
            superblock_prune_decision(34, 44, 40, one, one, 2).unwrap(),
            PruneDecision::Prune
        );
        // mu=0.5: 17 <= 18 holds, but avg 22 > 18 fails: visit.
        assert_eq!(
            superblock_prune_decision(34, 44, 18, half, one, 2).unwrap(),
            PruneDecision::Visit
        );
    }

    #[test]
    fn prune_decision_rejects_bad_factors() {
        let p6 = Ratio::new(3, 5).unwrap();
        let p4 = Ratio::new(2, 5).unwrap();
        assert!(superblock_prune_decision(1, 1, 1, p6, p4, 2).is_err());
        assert!(superblock_prune_decision(1, 1, 1, Ratio::ZERO, p4, 2).is_err());
        assert!(superblock_prune_decision(1, 1, 1, p4, Ratio::new(3, 2).unwrap(), 2).is_err());
    }

    #[test]
    fn block_bounds_match_hand_evaluation_in_both_orders() {
        let (_, index, query) = sample();
        let expected = vec![(0u32, 18u64), (1, 26)];
        for order in [LoopOrder::TermAtATime, LoopOrder::SuperblockAtATime] {
            assert_eq!(block_boundsums(&index, &query, &[0], order), expected);
        }
        assert!(block_boundsums(&index, &query, &[], LoopOrder::TermAtATime).is_empty());
    }

    #[test]
    fn score_block_updates_heap_and_theta() {
        let (_, index, query) = sample();
        let mut acc = TopKAccumulator::new(2);
        // Block 1 holds d2 (24) and d3 (6).
        let docs = score_block(&index, &query, 1, &mut acc);
        assert_eq!(docs, 2);
        assert_eq!(acc.theta(), 6);
        // Block 0 holds d0 (18) and d1 (6): d0 replaces d3, d1 cannot enter.
        score_block(&index, &query, 0, &mut acc);
        assert_eq!(acc.theta(), 18);
        let ranked = acc.into_ranked();
        assert_eq!(
            ranked.iter().map(|&(_, s)| s).collect::<Vec<_>>(),
            vec![24, 18]
        );
    }

    #[test]
    fn block_without_query_terms_offers_nothing() {
        let (_, index, _) = sample();
        let query = QueryVector::from_entries(vec![(TermId::new(2), 0)]).unwrap();
        let mut acc = TopKAccumulator::new(2);
        score_block(&index, &query, 0, &mut acc);
        assert!(acc.is_empty());
    }

    #[test]
    fn search_matches_running_example() {
        let (_, index, query) = sample();
        let params = SearchParams {
            k: 2,
            ..SearchParams::default()
        };
        let outcome = search(&index, &query, &params).unwrap();
        let got: Vec<(&str, u64)> = outcome
            .hits
            .iter()
            .map(|h| (h.doc.as_str(), h.score))
            .collect();
        assert_eq!(got, vec![("d2", 24), ("d0", 18)]);
    }

    #[test]
    fn search_with_k_over_corpus_returns_all_positive() {
        let (_, index, query) = sample();
        let params = SearchParams {
            k: 100,
            ..SearchParams::default()
        };
        let outcome = search(&index, &query, &params).unwrap();
        let got: Vec<(&str, u64)> = outcome
            .hits
            .iter()
            .map(|h| (h.doc.as_str(), h.score))
            .collect();
        // All four documents score positively: 24, 18, then the 6-6 tie
        // broken by external id (d1 before d3).
        assert_eq!(got, vec![("d2", 24), ("d0", 18), ("d1", 6), ("d3", 6)]);
    }

    #[test]
    fn equal_score_tie_prefers_earlier_external_id() {
        // Two docs with identical vectors; k=1 must pick the earlier id even
        // when the later one is scored first.
        let docs = vec![
            QuantizedVector::from_entries(vec![(TermId::new(0), 5)]).unwrap(),
            QuantizedVector::from_entries(vec![(TermId::new(0), 5)]).unwrap(),
        ];
        let vocab = Vocabulary::from_terms(vec!["t0".into()]).unwrap();
        let corpus = Corpus::from_quantized(
            docs,
            vocab,
            vec!["zz".into(), "aa".into()],
            QuantizationParams::from_global_max(5.0),
        )
        .unwrap();
        let index = build_index(&corpus, &DocOrdering::identity(2), 1, 1).unwrap();
        let query = QueryVector::from_entries(vec![(TermId::new(0), 1)]).unwrap();
        let outcome = search(
            &index,
            &query,
            &SearchParams {
                k: 1,
                ..SearchParams::default()
            },
        )
        .unwrap();
        assert_eq!(outcome.hits.len(), 1);
        assert_eq!(outcome.hits[0].doc, "aa");
    }

    #[test]
    fn invalid_params_are_rejected() {
        let (_, index, query) = sample();
        let mut params = SearchParams::default();
        params.k = 0;
        assert!(search(&index, &query, &params).is_err());
        params = SearchParams::default();
        params.mu = Ratio::new(4, 5).unwrap();
        params.eta = Ratio::new(3, 5).unwrap();
        assert!(search(&index, &query, &params).is_err());
    }

    #[test]
    fn zero_weight_query_is_rejected() {
        let (_, index, _) = sample();
        let query = QueryVector::from_entries(vec![(TermId::new(0), 0)]).unwrap();
        assert!(matches!(
            search(&index, &query, &SearchParams::default()),
            Err(Error::EmptyQuery)
        ));
    }

    #[test]
    fn stats_account_for_every_superblock_and_block() {
        let (_, index, query) = sample();
        let params = SearchParams {
            k: 2,
            ..SearchParams::default()
        };
        let outcome = search(&index, &query, &params).unwrap();
        let s = index.geometry.num_superblocks as u64;
        let visited = s - outcome.stats.superblocks_pruned;
        assert_eq!(
            outcome.stats.blocks_scored + outcome.stats.blocks_pruned,
            visited * index.geometry.blocks_per_superblock as u64
        );
    }

    #[test]
    fn theta_never_decreases() {
        let mut acc = TopKAccumulator::new(3);
        let mut last = acc.theta();
        for (i, score) in [5u64, 2, 9, 1, 7, 7, 3, 9].iter().enumerate() {
            acc.offer(*score, i as u32, i as u32);
            let theta = acc.theta();
            assert!(theta >= last);
            last = theta;
        }
    }
}
