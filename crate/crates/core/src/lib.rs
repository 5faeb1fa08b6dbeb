//! Learned-sparse top-k retrieval with two-level dynamic pruning.
//!
//! The engine quantizes sparse document vectors to 8-bit impacts, partitions
//! the (optionally reordered) corpus into fixed-size blocks and superblocks,
//! and answers queries by filtering superblocks with precomputed maximum and
//! average score bounds before descending to per-block bounds and
//! forward-index scoring. With `mu = eta = 1` results are exactly the
//! exhaustive top-k; relaxing the factors trades rank-safeness for speed
//! under a provable score-competitiveness floor.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod index;
pub mod oracle;
pub mod ordering;
pub mod ratio;
pub mod search;
pub mod synth;

pub use corpus::{
    parse_collection, parse_queries, prune_query, quantize, Corpus, CorpusManifest,
    QuantizationParams, QuantizedVector, QueryVector, TermId, Vocabulary,
    DEFAULT_QUERY_WEIGHT_SCALE,
};
pub use error::{Error, Result};
pub use eval::{
    mrr_at_10, ndcg_at_10, recall_at_k, recall_budget_eval, run_benchmark, MetricReport, Qrels,
};
pub use index::{
    build_index, index_space_report, load_index, save_index, IndexSpaceReport, PartitionGeometry,
    SpIndex,
};
pub use oracle::{
    avg_topk, competitiveness_report, exact_topk, exact_topk_index, CompetitivenessReport,
    ExactRanking,
};
pub use ordering::{order_documents, DocOrdering, OrderingStrategy};
pub use ratio::Ratio;
pub use search::{
    block_boundsums, score_block, search, superblock_bounds, superblock_prune_decision, LoopOrder,
    PruneDecision, SearchMode, SearchOutcome, SearchParams, Searcher, SuperblockBounds,
    TopKAccumulator, TraversalStats,
};
pub use synth::{generate_synthetic, write_synthetic_files, SyntheticCorpusSpec, SyntheticSet};
