//! Two-level block index: per-term block maxima, superblock maxima and child
//! sums, and a per-block forward index for document scoring.
//!
//! The corpus (in its chosen order) is cut into blocks of `b` documents, and
//! every run of `c` consecutive blocks forms a superblock. For each term the
//! index keeps the maximum impact per block, plus per superblock the maximum
//! and the exact sum of its child block maxima. The sum is the lossless
//! 16-bit stand-in for the per-superblock average: dividing by `c` happens at
//! decision time by cross-multiplication, so the average bound stays exact in
//! integer arithmetic.
//!
//! Tables are term-major: the per-term rows over blocks (or superblocks) are
//! contiguous, so bound computations stream sequential memory whichever loop
//! order the search uses.

mod serialize;

pub use serialize::{load_index, save_index};

use serde::Serialize;

use crate::corpus::{Corpus, CorpusManifest, QueryVector, Vocabulary};
use crate::error::{Error, Result};
use crate::ordering::DocOrdering;

/// Maximum blocks per superblock; keeps child sums within 16 bits.
pub const MAX_BLOCKS_PER_SUPERBLOCK: u32 = 256;

/// Index layout: `b` documents per block, `c` blocks per superblock. The last
/// block and superblock are implicitly padded with empty documents and
/// all-zero blocks, so bound formulas never see a partial unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PartitionGeometry {
    pub block_size: u32,
    pub blocks_per_superblock: u32,
    pub num_blocks: u32,
    pub num_superblocks: u32,
    pub num_docs: u32,
}

impl PartitionGeometry {
    pub fn new(num_docs: u32, block_size: u32, blocks_per_superblock: u32) -> Result<PartitionGeometry> {
        if num_docs == 0 {
            return Err(Error::EmptyCorpus);
        }
        if block_size == 0 {
            return Err(Error::InvalidParameter("block size must be positive".into()));
        }
        if blocks_per_superblock == 0 || blocks_per_superblock > MAX_BLOCKS_PER_SUPERBLOCK {
            return Err(Error::InvalidParameter(format!(
                "blocks per superblock must be in [1, {MAX_BLOCKS_PER_SUPERBLOCK}], got {blocks_per_superblock}"
            )));
        }
        let num_blocks = num_docs.div_ceil(block_size);
        let num_superblocks = num_blocks.div_ceil(blocks_per_superblock);
        Ok(PartitionGeometry {
            block_size,
            blocks_per_superblock,
            num_blocks,
            num_superblocks,
            num_docs,
        })
    }

    /// Ordered positions of the real documents in `block` (padding excluded).
    pub fn block_doc_range(&self, block: u32) -> std::ops::Range<u32> {
        let start = block * self.block_size;
        let end = (start + self.block_size).min(self.num_docs);
        start..end.max(start)
    }

    /// Real child blocks of `superblock` (virtual all-zero padding excluded).
    pub fn child_blocks(&self, superblock: u32) -> std::ops::Range<u32> {
        let start = superblock * self.blocks_per_superblock;
        let end = (start + self.blocks_per_superblock).min(self.num_blocks);
        start..end.max(start)
    }
}

/// Per-term dense rows of block maxima `max impact of t within block`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMaxTable {
    num_blocks: u32,
    values: Vec<u8>,
}

impl BlockMaxTable {
    pub fn value(&self, term: u32, block: u32) -> u8 {
        self.values[term as usize * self.num_blocks as usize + block as usize]
    }

    /// The full per-block row for one term.
    pub fn row(&self, term: u32) -> &[u8] {
        let n = self.num_blocks as usize;
        &self.values[term as usize * n..(term as usize + 1) * n]
    }

    pub fn raw(&self) -> &[u8] {
        &self.values
    }
}

/// Per-term superblock rows: maximum of the child block maxima, and their
/// exact 16-bit sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperblockTable {
    num_superblocks: u32,
    max_values: Vec<u8>,
    child_sums: Vec<u16>,
}

impl SuperblockTable {
    pub fn max_row(&self, term: u32) -> &[u8] {
        let s = self.num_superblocks as usize;
        &self.max_values[term as usize * s..(term as usize + 1) * s]
    }

    pub fn child_sum_row(&self, term: u32) -> &[u16] {
        let s = self.num_superblocks as usize;
        &self.child_sums[term as usize * s..(term as usize + 1) * s]
    }

    pub fn raw_max(&self) -> &[u8] {
        &self.max_values
    }

    pub fn raw_child_sums(&self) -> &[u16] {
        &self.child_sums
    }
}

/// Term-grouped postings per block, CSR-style. Scoring a block walks the
/// query and the block's sorted term list in lockstep and accumulates
/// `weight * impact` into a slot array of length `b`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForwardBlockIndex {
    /// `num_blocks + 1` offsets into `terms` / `posting_offsets`.
    block_term_offsets: Vec<u32>,
    /// Sorted unique terms within each block.
    terms: Vec<u32>,
    /// `terms.len() + 1` offsets into `slots` / `impacts`.
    posting_offsets: Vec<u32>,
    slots: Vec<u16>,
    impacts: Vec<u8>,
}

/// Postings of one block, borrowed from the forward index.
#[derive(Debug, Clone, Copy)]
pub struct BlockPostings<'a> {
    pub terms: &'a [u32],
    posting_offsets: &'a [u32],
    slots: &'a [u16],
    impacts: &'a [u8],
    base: u32,
}

impl<'a> BlockPostings<'a> {
    /// `(slot, impact)` pairs of the `i`-th term in this block's term list.
    pub fn postings(&self, i: usize) -> impl Iterator<Item = (u16, u8)> + 'a {
        let start = (self.posting_offsets[i] - self.base) as usize;
        let end = (self.posting_offsets[i + 1] - self.base) as usize;
        self.slots[start..end]
            .iter()
            .copied()
            .zip(self.impacts[start..end].iter().copied())
    }
}

impl ForwardBlockIndex {
    pub fn block(&self, block: u32) -> BlockPostings<'_> {
        let t_start = self.block_term_offsets[block as usize] as usize;
        let t_end = self.block_term_offsets[block as usize + 1] as usize;
        let base = self.posting_offsets[t_start];
        let p_start = base as usize;
        let p_end = self.posting_offsets[t_end] as usize;
        BlockPostings {
            terms: &self.terms[t_start..t_end],
            posting_offsets: &self.posting_offsets[t_start..=t_end],
            slots: &self.slots[p_start..p_end],
            impacts: &self.impacts[p_start..p_end],
            base,
        }
    }

    pub fn num_postings(&self) -> usize {
        self.slots.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub(crate) fn parts(
        &self,
    ) -> (&[u32], &[u32], &[u32], &[u16], &[u8]) {
        (
            &self.block_term_offsets,
            &self.terms,
            &self.posting_offsets,
            &self.slots,
            &self.impacts,
        )
    }

    pub(crate) fn from_parts(
        block_term_offsets: Vec<u32>,
        terms: Vec<u32>,
        posting_offsets: Vec<u32>,
        slots: Vec<u16>,
        impacts: Vec<u8>,
    ) -> ForwardBlockIndex {
        ForwardBlockIndex {
            block_term_offsets,
            terms,
            posting_offsets,
            slots,
            impacts,
        }
    }
}

/// The complete searchable index. Immutable once built; safe to share across
/// concurrent readers.
#[derive(Debug, Clone)]
pub struct SpIndex {
    pub geometry: PartitionGeometry,
    pub block_max: BlockMaxTable,
    pub superblock: SuperblockTable,
    pub forward: ForwardBlockIndex,
    /// External ids follow ordered position; `external_ids[p]` names the
    /// document stored at position `p`.
    pub manifest: CorpusManifest,
    pub vocab: Vocabulary,
    /// Rank of each position under ascending external id, for tie-breaking.
    ext_id_rank: Vec<u32>,
}

impl SpIndex {
    pub fn vocab_size(&self) -> u32 {
        self.manifest.vocab_size
    }

    pub fn num_docs(&self) -> u32 {
        self.manifest.num_docs
    }

    /// Tie-break rank of the document at ordered position `pos`; smaller rank
    /// means the external id sorts earlier.
    pub fn ext_id_rank(&self, pos: u32) -> u32 {
        self.ext_id_rank[pos as usize]
    }

    pub fn external_id(&self, pos: u32) -> &str {
        &self.manifest.external_ids[pos as usize]
    }

    pub(crate) fn assemble(
        geometry: PartitionGeometry,
        block_max: BlockMaxTable,
        superblock: SuperblockTable,
        forward: ForwardBlockIndex,
        manifest: CorpusManifest,
        vocab: Vocabulary,
    ) -> SpIndex {
        let ext_id_rank = crate::corpus::ext_id_ranks(&manifest.external_ids);
        SpIndex {
            geometry,
            block_max,
            superblock,
            forward,
            manifest,
            vocab,
            ext_id_rank,
        }
    }

    /// Resolve a term-string query against this index's vocabulary.
    pub fn resolve_query(
        &self,
        vector: &[(String, f64)],
        weight_scale: f64,
    ) -> Result<QueryVector> {
        let mut entries = Vec::new();
        for (term, weight) in vector {
            if let Some(id) = self.vocab.id_of(term) {
                entries.push((id, (weight * weight_scale).round() as u32));
            }
        }
        entries.sort_by_key(|&(t, _)| t);
        entries.dedup_by_key(|&mut (t, _)| t);
        QueryVector::from_entries(entries)
    }
}

/// Build the block-max table, superblock table, and forward index over the
/// corpus in the given order. Deterministic for fixed inputs.
pub fn build_index(
    corpus: &Corpus,
    ordering: &DocOrdering,
    block_size: u32,
    blocks_per_superblock: u32,
) -> Result<SpIndex> {
    if ordering.len() != corpus.num_docs() as usize {
        return Err(Error::InvalidParameter(
            "ordering length does not match corpus size".into(),
        ));
    }
    let geometry = PartitionGeometry::new(corpus.num_docs(), block_size, blocks_per_superblock)?;
    let vocab_size = corpus.vocab_size() as usize;
    let n = geometry.num_blocks as usize;
    let s = geometry.num_superblocks as usize;

    let mut block_values = vec![0u8; vocab_size * n];
    let mut fwd_terms: Vec<u32> = Vec::new();
    let mut fwd_posting_offsets: Vec<u32> = vec![0];
    let mut fwd_slots: Vec<u16> = Vec::new();
    let mut fwd_impacts: Vec<u8> = Vec::new();
    let mut block_term_offsets: Vec<u32> = Vec::with_capacity(n + 1);
    block_term_offsets.push(0);

    let mut block_entries: Vec<(u32, u16, u8)> = Vec::new();
    for block in 0..geometry.num_blocks {
        block_entries.clear();
        for pos in geometry.block_doc_range(block) {
            let slot = (pos - block * geometry.block_size) as u16;
            let doc = &corpus.docs[ordering.original_id(pos) as usize];
            for &(term, impact) in doc.entries() {
                let t = term.value();
                let cell = &mut block_values[t as usize * n + block as usize];
                if impact > *cell {
                    *cell = impact;
                }
                block_entries.push((t, slot, impact));
            }
        }
        block_entries.sort_unstable();
        let mut i = 0;
        while i < block_entries.len() {
            let term = block_entries[i].0;
            fwd_terms.push(term);
            while i < block_entries.len() && block_entries[i].0 == term {
                fwd_slots.push(block_entries[i].1);
                fwd_impacts.push(block_entries[i].2);
                i += 1;
            }
            fwd_posting_offsets.push(fwd_slots.len() as u32);
        }
        block_term_offsets.push(fwd_terms.len() as u32);
    }

    let mut max_values = vec![0u8; vocab_size * s];
    let mut child_sums = vec![0u16; vocab_size * s];
    for term in 0..vocab_size {
        let row = &block_values[term * n..(term + 1) * n];
        let max_row = &mut max_values[term * s..(term + 1) * s];
        let sum_row = &mut child_sums[term * s..(term + 1) * s];
        for (block, &value) in row.iter().enumerate() {
            let sb = block / geometry.blocks_per_superblock as usize;
            if value > max_row[sb] {
                max_row[sb] = value;
            }
            sum_row[sb] += value as u16;
        }
    }

    let external_ids: Vec<String> = ordering
        .as_slice()
        .iter()
        .map(|&orig| corpus.manifest.external_ids[orig as usize].clone())
        .collect();
    let manifest = CorpusManifest {
        num_docs: corpus.manifest.num_docs,
        vocab_size: corpus.manifest.vocab_size,
        external_ids,
        quantization: corpus.manifest.quantization,
    };

    Ok(SpIndex::assemble(
        geometry,
        BlockMaxTable {
            num_blocks: geometry.num_blocks,
            values: block_values,
        },
        SuperblockTable {
            num_superblocks: geometry.num_superblocks,
            max_values,
            child_sums,
        },
        ForwardBlockIndex {
            block_term_offsets,
            terms: fwd_terms,
            posting_offsets: fwd_posting_offsets,
            slots: fwd_slots,
            impacts: fwd_impacts,
        },
        manifest,
        corpus.vocab.clone(),
    ))
}

/// Byte-level size of the bound tables and forward index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IndexSpaceReport {
    pub superblock_table_bytes: u64,
    pub block_table_bytes: u64,
    pub forward_bytes: u64,
}

/// Superblock table cost: one byte of maximum plus two bytes of child sum per
/// term per superblock.
pub fn superblock_table_bytes(vocab_size: u64, num_superblocks: u64) -> u64 {
    vocab_size * num_superblocks * 3
}

pub fn index_space_report(index: &SpIndex) -> IndexSpaceReport {
    let forward = &index.forward;
    let forward_bytes = (forward.block_term_offsets.len() * 4
        + forward.terms.len() * 4
        + forward.posting_offsets.len() * 4
        + forward.slots.len() * 2
        + forward.impacts.len()) as u64;
    IndexSpaceReport {
        superblock_table_bytes: superblock_table_bytes(
            index.vocab_size() as u64,
            index.geometry.num_superblocks as u64,
        ),
        block_table_bytes: index.block_max.values.len() as u64,
        forward_bytes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{QuantizationParams, QuantizedVector, TermId, Vocabulary};
    use crate::ordering::{order_documents, OrderingStrategy};

    /// Four documents over three terms, b=2, c=2:
    /// d0={t0:10,t1:4}, d1={t0:6,t2:8}, d2={t1:12}, d3={t0:2,t1:2,t2:2}.
    pub(crate) fn sample_corpus() -> Corpus {
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
        Corpus::from_quantized(docs, vocab, ids, QuantizationParams::from_global_max(12.0))
            .unwrap()
    }

    pub(crate) fn sample_index() -> SpIndex {
        let corpus = sample_corpus();
        let ordering = order_documents(&corpus, OrderingStrategy::Identity).unwrap();
        build_index(&corpus, &ordering, 2, 2).unwrap()
    }

    #[test]
    fn block_maxima_match_hand_enumeration() {
        let index = sample_index();
        // Block 0 holds d0, d1; block 1 holds d2, d3.
        assert_eq!(index.block_max.value(0, 0), 10);
        assert_eq!(index.block_max.value(1, 0), 4);
        assert_eq!(index.block_max.value(2, 0), 8);
        assert_eq!(index.block_max.value(0, 1), 2);
        assert_eq!(index.block_max.value(1, 1), 12);
        assert_eq!(index.block_max.value(2, 1), 2);
    }

    #[test]
    fn superblock_rows_are_max_and_sum_of_children() {
        let index = sample_index();
        assert_eq!(index.superblock.max_row(0), &[10]);
        assert_eq!(index.superblock.max_row(1), &[12]);
        assert_eq!(index.superblock.max_row(2), &[8]);
        assert_eq!(index.superblock.child_sum_row(0), &[12]);
        assert_eq!(index.superblock.child_sum_row(1), &[16]);
        assert_eq!(index.superblock.child_sum_row(2), &[10]);
    }

    #[test]
    fn padding_arithmetic() {
        // 5 docs, b=2, c=2: 3 blocks (last half-full), 2 superblocks (last
        // with one real child).
        let geometry = PartitionGeometry::new(5, 2, 2).unwrap();
        assert_eq!(geometry.num_blocks, 3);
        assert_eq!(geometry.num_superblocks, 2);
        assert_eq!(geometry.block_doc_range(2), 4..5);
        assert_eq!(geometry.child_blocks(1), 2..3);
    }

    #[test]
    fn rejects_empty_corpus_and_oversized_superblocks() {
        assert!(matches!(
            PartitionGeometry::new(0, 2, 2),
            Err(Error::EmptyCorpus)
        ));
        assert!(PartitionGeometry::new(10, 2, 257).is_err());
        assert!(PartitionGeometry::new(10, 2, 256).is_ok());
    }

    #[test]
    fn dominance_chain_holds_per_term() {
        let corpus = sample_corpus();
        let index = sample_index();
        for term in 0..3u32 {
            for sb in 0..index.geometry.num_superblocks {
                let sb_max = index.superblock.max_row(term)[sb as usize];
                let mut sum = 0u32;
                for block in index.geometry.child_blocks(sb) {
                    let block_max = index.block_max.value(term, block);
                    assert!(sb_max >= block_max);
                    sum += block_max as u32;
                    for pos in index.geometry.block_doc_range(block) {
                        let doc = &corpus.docs[pos as usize];
                        let impact = doc
                            .entries()
                            .iter()
                            .find(|(t, _)| t.value() == term)
                            .map(|&(_, w)| w)
                            .unwrap_or(0);
                        assert!(block_max >= impact);
                    }
                }
                assert_eq!(
                    index.superblock.child_sum_row(term)[sb as usize] as u32,
                    sum
                );
            }
        }
    }

    #[test]
    fn reordered_rebuild_commutes_with_relabeling() {
        let corpus = sample_corpus();
        let ordering = DocOrdering::from_permutation(vec![2, 0, 3, 1]).unwrap();
        let index_a = build_index(&corpus, &ordering, 2, 2).unwrap();

        // Relabel the corpus by sigma, then order with sigma^-1 ∘ pi so the
        // document sequence is unchanged.
        let sigma = [3u32, 2, 0, 1];
        let mut sigma_inv = [0u32; 4];
        for (i, &v) in sigma.iter().enumerate() {
            sigma_inv[v as usize] = i as u32;
        }
        let permuted_docs: Vec<_> = sigma.iter().map(|&i| corpus.docs[i as usize].clone()).collect();
        let permuted_ids: Vec<String> = sigma
            .iter()
            .map(|&i| corpus.manifest.external_ids[i as usize].clone())
            .collect();
        let permuted = Corpus::from_quantized(
            permuted_docs,
            corpus.vocab.clone(),
            permuted_ids,
            corpus.manifest.quantization,
        )
        .unwrap();
        let composed: Vec<u32> = ordering
            .as_slice()
            .iter()
            .map(|&orig| sigma_inv[orig as usize])
            .collect();
        let index_b = build_index(
            &permuted,
            &DocOrdering::from_permutation(composed).unwrap(),
            2,
            2,
        )
        .unwrap();

        assert_eq!(index_a.block_max, index_b.block_max);
        assert_eq!(index_a.superblock, index_b.superblock);
        assert_eq!(index_a.forward, index_b.forward);
        assert_eq!(index_a.manifest, index_b.manifest);
    }

    #[test]
    fn space_report_formula() {
        let index = sample_index();
        let report = index_space_report(&index);
        // vocab 3, S = 1.
        assert_eq!(report.superblock_table_bytes, 9);
        assert_eq!(report.block_table_bytes, 3 * 2);

        assert_eq!(superblock_table_bytes(3, 2), 18);
    }

    #[test]
    fn space_formula_at_web_scale_geometry() {
        // 1.1M blocks of 8 docs, c=64, 30k-term vocabulary: the superblock
        // tables land in the low gigabytes.
        let geometry = PartitionGeometry::new(8_800_000, 8, 64).unwrap();
        let bytes = superblock_table_bytes(30_522, geometry.num_superblocks as u64);
        assert!(bytes > 1_000_000_000 && bytes < 3_000_000_000);
    }

    #[test]
    fn forward_index_reconstructs_documents() {
        let corpus = sample_corpus();
        let index = sample_index();
        for block in 0..index.geometry.num_blocks {
            let postings = index.forward.block(block);
            let mut reconstructed: Vec<Vec<(u32, u8)>> =
                vec![Vec::new(); index.geometry.block_size as usize];
            for (i, &term) in postings.terms.iter().enumerate() {
                for (slot, impact) in postings.postings(i) {
                    reconstructed[slot as usize].push((term, impact));
                }
            }
            for pos in index.geometry.block_doc_range(block) {
                let slot = (pos - block * index.geometry.block_size) as usize;
                let expected: Vec<(u32, u8)> = corpus.docs[pos as usize]
                    .entries()
                    .iter()
                    .map(|&(t, w)| (t.value(), w))
                    .collect();
                assert_eq!(reconstructed[slot], expected);
            }
        }
    }
}
