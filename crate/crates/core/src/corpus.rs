//! Corpus ingestion: sparse vectors, vocabulary, and impact quantization.
//!
//! Documents and queries arrive as line-delimited JSON records of
//! `{"id": string, "vector": {term: weight, ...}}`. Term strings are resolved
//! to dense [`TermId`]s in first-seen order, and real-valued document weights
//! are quantized once at ingest to 8-bit impacts under a single global scale.
//! All downstream scoring, bounds, and safeness guarantees are defined over
//! this integer model.

use std::collections::HashMap;
use std::io::BufRead;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ratio::Ratio;

/// Dense index into the corpus vocabulary. Assignment is stable across the
/// documents and queries of one corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermId(u32);

impl TermId {
    pub fn new(value: u32) -> TermId {
        TermId(value)
    }

    pub fn value(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Global quantization model: 256 levels, `scale` weight units per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationParams {
    pub scale: f64,
}

impl QuantizationParams {
    pub const LEVELS: u32 = 256;
    const MAX_LEVEL: f64 = (Self::LEVELS - 1) as f64;

    /// Derive the scale so the largest raw document weight maps to impact 255.
    /// A corpus without any positive weight gets a scale of 1.0; every impact
    /// quantizes to zero under it, which is consistent with such a corpus.
    pub fn from_global_max(max_weight: f64) -> QuantizationParams {
        let scale = if max_weight > 0.0 {
            max_weight / Self::MAX_LEVEL
        } else {
            1.0
        };
        QuantizationParams { scale }
    }
}

/// Round-half-up quantization of one raw weight to an impact in `[0, 255]`.
///
/// Weights beyond the top quantization step mean the caller is mixing a stale
/// scale with newer data; that is an error rather than a silent clamp.
pub fn quantize(raw_weight: f64, params: &QuantizationParams) -> Result<u8> {
    if !raw_weight.is_finite() || raw_weight < 0.0 {
        return Err(Error::WeightOutOfRange(raw_weight));
    }
    let level = (raw_weight / params.scale + 0.5).floor();
    if level > QuantizationParams::MAX_LEVEL {
        return Err(Error::WeightOutOfRange(raw_weight));
    }
    Ok(level as u8)
}

/// A document as the engine scores it: sorted `(term, impact)` entries with
/// strictly increasing terms and no zero impacts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuantizedVector {
    entries: Vec<(TermId, u8)>,
}

impl QuantizedVector {
    pub fn from_entries(entries: Vec<(TermId, u8)>) -> Result<QuantizedVector> {
        for window in entries.windows(2) {
            if window[0].0 >= window[1].0 {
                return Err(Error::InvalidParameter(
                    "vector terms must be strictly increasing".into(),
                ));
            }
        }
        if entries.iter().any(|&(_, impact)| impact == 0) {
            return Err(Error::InvalidParameter(
                "vector entries must have nonzero impacts".into(),
            ));
        }
        Ok(QuantizedVector { entries })
    }

    pub fn entries(&self) -> &[(TermId, u8)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = TermId> + '_ {
        self.entries.iter().map(|&(t, _)| t)
    }
}

/// A query over the same vocabulary: sorted terms with non-negative integer
/// weights. Callers pre-scale real-valued query weights (by
/// [`DEFAULT_QUERY_WEIGHT_SCALE`] unless stated otherwise) and round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryVector {
    entries: Vec<(TermId, u32)>,
}

/// Factor applied to real-valued query weights before rounding to integers.
pub const DEFAULT_QUERY_WEIGHT_SCALE: f64 = 100.0;

impl QueryVector {
    pub fn from_entries(entries: Vec<(TermId, u32)>) -> Result<QueryVector> {
        for window in entries.windows(2) {
            if window[0].0 >= window[1].0 {
                return Err(Error::InvalidParameter(
                    "query terms must be strictly increasing".into(),
                ));
            }
        }
        Ok(QueryVector { entries })
    }

    pub fn entries(&self) -> &[(TermId, u32)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_weight(&self) -> u64 {
        self.entries.iter().map(|&(_, w)| w as u64).sum()
    }

    /// True if at least one term carries positive weight.
    pub fn is_searchable(&self) -> bool {
        self.entries.iter().any(|&(_, w)| w > 0)
    }
}

/// Keep the smallest prefix of terms, by decreasing weight, whose cumulative
/// weight reaches `beta` of the query's total weight. `beta = 1` returns the
/// query unchanged.
pub fn prune_query(query: &QueryVector, beta: Ratio) -> Result<QueryVector> {
    if beta.is_zero() || beta > Ratio::ONE {
        return Err(Error::InvalidParameter(format!(
            "beta must be in (0, 1], got {beta}"
        )));
    }
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    if beta.is_one() {
        return Ok(query.clone());
    }

    let mut by_weight: Vec<(TermId, u32)> = query.entries.clone();
    by_weight.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let total = query.total_weight();
    let mut kept = Vec::new();
    let mut cumulative: u64 = 0;
    for &(term, weight) in &by_weight {
        // Stop once cumulative >= beta * total, i.e. beta * total <= cumulative.
        if beta.times_cmp(total, cumulative) != std::cmp::Ordering::Greater {
            break;
        }
        kept.push((term, weight));
        cumulative += weight as u64;
    }
    kept.sort_by_key(|&(term, _)| term);
    QueryVector::from_entries(kept)
}

/// Corpus-level bookkeeping: document count, vocabulary size, external ids
/// aligned to internal ids, and the quantization model.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub num_docs: u32,
    pub vocab_size: u32,
    pub external_ids: Vec<String>,
    pub quantization: QuantizationParams,
}

/// Bidirectional term-string <-> [`TermId`] mapping, in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    term_to_id: HashMap<String, TermId>,
    terms: Vec<String>,
}

impl Vocabulary {
    pub fn new() -> Vocabulary {
        Vocabulary::default()
    }

    pub fn from_terms(terms: Vec<String>) -> Result<Vocabulary> {
        let mut vocab = Vocabulary::new();
        for term in terms {
            if vocab.term_to_id.contains_key(&term) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate vocabulary term {term:?}"
                )));
            }
            vocab.insert_or_get(&term);
        }
        Ok(vocab)
    }

    pub fn insert_or_get(&mut self, term: &str) -> TermId {
        if let Some(&id) = self.term_to_id.get(term) {
            return id;
        }
        let id = TermId::new(self.terms.len() as u32);
        self.terms.push(term.to_string());
        self.term_to_id.insert(term.to_string(), id);
        id
    }

    pub fn id_of(&self, term: &str) -> Option<TermId> {
        self.term_to_id.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> Option<&str> {
        self.terms.get(id.index()).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Rank of each slot under ascending external id; the shared tie-break key
/// for equal scores.
pub(crate) fn ext_id_ranks(ids: &[String]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..ids.len() as u32).collect();
    order.sort_by(|&a, &b| ids[a as usize].cmp(&ids[b as usize]));
    let mut ranks = vec![0u32; ids.len()];
    for (rank, &pos) in order.iter().enumerate() {
        ranks[pos as usize] = rank as u32;
    }
    ranks
}

/// One parsed document before quantization.
#[derive(Debug, Clone, Default)]
pub struct RawVector {
    pub entries: Vec<(TermId, f64)>,
}

/// Output of [`parse_collection`]: manifest, vocabulary, and raw vectors.
#[derive(Debug, Clone)]
pub struct ParsedCollection {
    pub manifest: CorpusManifest,
    pub vocab: Vocabulary,
    pub raw_docs: Vec<RawVector>,
}

#[derive(Deserialize)]
struct VectorRecord {
    id: String,
    // serde_json is built with preserve_order, so member order in the file is
    // the first-seen order for TermId assignment.
    vector: serde_json::Map<String, serde_json::Value>,
}

/// Parse a line-delimited stream of sparse-vector records, assigning fresh
/// [`TermId`]s in first-seen order. Records with empty vectors are retained
/// as empty documents.
pub fn parse_collection<R: BufRead>(reader: R) -> Result<ParsedCollection> {
    let mut vocab = Vocabulary::new();
    let mut external_ids = Vec::new();
    let mut seen_ids: HashMap<String, ()> = HashMap::new();
    let mut raw_docs = Vec::new();
    let mut global_max: f64 = 0.0;

    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: VectorRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if seen_ids.insert(record.id.clone(), ()).is_some() {
            return Err(Error::DuplicateDocId(record.id));
        }

        let mut entries = Vec::with_capacity(record.vector.len());
        for (term, value) in &record.vector {
            let weight = value.as_f64().ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("weight of term {term:?} is not a number"),
            })?;
            if !weight.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("weight of term {term:?} is not finite"),
                });
            }
            if weight < 0.0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("negative weight {weight} for term {term:?}"),
                });
            }
            let id = vocab.insert_or_get(term);
            entries.push((id, weight));
            if weight > global_max {
                global_max = weight;
            }
        }
        entries.sort_by_key(|&(t, _)| t);
        external_ids.push(record.id);
        raw_docs.push(RawVector { entries });
    }

    let manifest = CorpusManifest {
        num_docs: raw_docs.len() as u32,
        vocab_size: vocab.len() as u32,
        external_ids,
        quantization: QuantizationParams::from_global_max(global_max),
    };
    Ok(ParsedCollection {
        manifest,
        vocab,
        raw_docs,
    })
}

/// A fully ingested corpus: immutable after construction and safe to share
/// read-only across threads.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub vocab: Vocabulary,
    pub docs: Vec<QuantizedVector>,
}

impl Corpus {
    pub fn from_parsed(parsed: ParsedCollection) -> Result<Corpus> {
        let params = parsed.manifest.quantization;
        let mut docs = Vec::with_capacity(parsed.raw_docs.len());
        for raw in &parsed.raw_docs {
            let mut entries = Vec::with_capacity(raw.entries.len());
            for &(term, weight) in &raw.entries {
                let impact = quantize(weight, &params)?;
                if impact > 0 {
                    entries.push((term, impact));
                }
            }
            docs.push(QuantizedVector::from_entries(entries)?);
        }
        Ok(Corpus {
            manifest: parsed.manifest,
            vocab: parsed.vocab,
            docs,
        })
    }

    pub fn from_jsonl_reader<R: BufRead>(reader: R) -> Result<Corpus> {
        Corpus::from_parsed(parse_collection(reader)?)
    }

    /// Assemble a corpus directly from quantized vectors. Used by the
    /// synthetic generator and by tests that pin integer impacts.
    pub fn from_quantized(
        docs: Vec<QuantizedVector>,
        vocab: Vocabulary,
        external_ids: Vec<String>,
        quantization: QuantizationParams,
    ) -> Result<Corpus> {
        if external_ids.len() != docs.len() {
            return Err(Error::InvalidParameter(
                "external_ids must align with documents".into(),
            ));
        }
        let mut seen = HashMap::new();
        for id in &external_ids {
            if seen.insert(id.clone(), ()).is_some() {
                return Err(Error::DuplicateDocId(id.clone()));
            }
        }
        let vocab_size = vocab.len() as u32;
        for doc in &docs {
            if let Some((last, _)) = doc.entries().last() {
                if last.value() >= vocab_size {
                    return Err(Error::InvalidParameter(
                        "document term outside vocabulary".into(),
                    ));
                }
            }
        }
        Ok(Corpus {
            manifest: CorpusManifest {
                num_docs: docs.len() as u32,
                vocab_size,
                external_ids,
                quantization,
            },
            vocab,
            docs,
        })
    }

    pub fn num_docs(&self) -> u32 {
        self.manifest.num_docs
    }

    pub fn vocab_size(&self) -> u32 {
        self.manifest.vocab_size
    }
}

/// Parse a query stream against an existing vocabulary. Real-valued weights
/// are multiplied by `weight_scale` and rounded half-up; terms outside the
/// vocabulary are dropped, which scores identically to keeping them (they
/// appear in no posting).
pub fn parse_queries<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
    weight_scale: f64,
) -> Result<Vec<(String, QueryVector)>> {
    if weight_scale <= 0.0 || !weight_scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "query weight scale must be positive, got {weight_scale}"
        )));
    }
    let mut queries = Vec::new();
    let mut seen_ids: HashMap<String, ()> = HashMap::new();
    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: VectorRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if seen_ids.insert(record.id.clone(), ()).is_some() {
            return Err(Error::DuplicateDocId(record.id));
        }
        let mut entries = Vec::new();
        for (term, value) in &record.vector {
            let weight = value.as_f64().ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("weight of term {term:?} is not a number"),
            })?;
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("invalid weight {weight} for term {term:?}"),
                });
            }
            let Some(id) = vocab.id_of(term) else {
                continue;
            };
            let scaled = (weight * weight_scale).round();
            entries.push((id, scaled as u32));
        }
        entries.sort_by_key(|&(t, _)| t);
        entries.dedup_by_key(|&mut (t, _)| t);
        queries.push((record.id, QueryVector::from_entries(entries)?));
    }
    Ok(queries)
}
