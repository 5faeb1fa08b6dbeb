//! Document ordering ahead of block partitioning.
//!
//! Block and superblock bounds tighten when neighboring documents share
//! terms. The ordering step is a pluggable hook: identity keeps ingest order,
//! and a greedy term-overlap chain gives a cheap clustering default.

use std::str::FromStr;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Permutation mapping ordered position -> original internal document id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocOrdering {
    permutation: Vec<u32>,
}

impl DocOrdering {
    pub fn identity(num_docs: u32) -> DocOrdering {
        DocOrdering {
            permutation: (0..num_docs).collect(),
        }
    }

    pub fn from_permutation(permutation: Vec<u32>) -> Result<DocOrdering> {
        let n = permutation.len();
        let mut seen = vec![false; n];
        for &p in &permutation {
            let idx = p as usize;
            if idx >= n || seen[idx] {
                return Err(Error::InvalidParameter(
                    "ordering is not a bijection over the corpus".into(),
                ));
            }
            seen[idx] = true;
        }
        Ok(DocOrdering { permutation })
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// Original document id placed at `position`.
    pub fn original_id(&self, position: u32) -> u32 {
        self.permutation[position as usize]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.permutation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingStrategy {
    Identity,
    GreedySimilarity,
}

impl FromStr for OrderingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<OrderingStrategy> {
        match s {
            "identity" => Ok(OrderingStrategy::Identity),
            "greedy" | "greedy-similarity" => Ok(OrderingStrategy::GreedySimilarity),
            other => Err(Error::UnknownStrategy(other.to_string())),
        }
    }
}

/// Order the corpus for partitioning.
///
/// `GreedySimilarity` seeds with document 0, then repeatedly appends the
/// unplaced document sharing the most terms with the last placed one, ties by
/// ascending original id. Documents sharing no terms with the chain tail are
/// reached through the tie rule (overlap zero for all candidates).
pub fn order_documents(corpus: &Corpus, strategy: OrderingStrategy) -> Result<DocOrdering> {
    let n = corpus.num_docs();
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    match strategy {
        OrderingStrategy::Identity => Ok(DocOrdering::identity(n)),
        OrderingStrategy::GreedySimilarity => greedy_similarity(corpus),
    }
}

fn greedy_similarity(corpus: &Corpus) -> Result<DocOrdering> {
    let n = corpus.num_docs() as usize;

    // Postings over the corpus so each step only inspects documents that can
    // have nonzero overlap with the chain tail.
    let mut postings: Vec<Vec<u32>> = vec![Vec::new(); corpus.vocab_size() as usize];
    for (doc_id, doc) in corpus.docs.iter().enumerate() {
        for term in doc.terms() {
            postings[term.index()].push(doc_id as u32);
        }
    }

    let mut placed = vec![false; n];
    let mut permutation = Vec::with_capacity(n);
    let mut overlap = vec![0u32; n];
    let mut touched: Vec<u32> = Vec::new();
    // Cursor into the ascending id space for the zero-overlap fallback.
    let mut next_unplaced = 0usize;

    let mut current = 0u32;
    placed[0] = true;
    permutation.push(0);

    for _ in 1..n {
        touched.clear();
        for term in corpus.docs[current as usize].terms() {
            for &cand in &postings[term.index()] {
                if !placed[cand as usize] {
                    if overlap[cand as usize] == 0 {
                        touched.push(cand);
                    }
                    overlap[cand as usize] += 1;
                }
            }
        }

        let mut best: Option<(u32, u32)> = None; // (overlap, id)
        for &cand in &touched {
            let score = overlap[cand as usize];
            let better = match best {
                None => true,
                Some((bs, bid)) => score > bs || (score == bs && cand < bid),
            };
            if better {
                best = Some((score, cand));
            }
        }

        let chosen = match best {
            Some((_, id)) => id,
            None => {
                while placed[next_unplaced] {
                    next_unplaced += 1;
                }
                next_unplaced as u32
            }
        };

        for &cand in &touched {
            overlap[cand as usize] = 0;
        }

        placed[chosen as usize] = true;
        permutation.push(chosen);
        current = chosen;
    }

    Ok(DocOrdering { permutation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{QuantizationParams, QuantizedVector, TermId, Vocabulary};

    fn corpus_from_term_sets(term_sets: &[&[u32]]) -> Corpus {
        let max_term = term_sets.iter().flat_map(|s| s.iter()).max().copied().unwrap_or(0);
        let vocab =
            Vocabulary::from_terms((0..=max_term).map(|t| format!("t{t}")).collect()).unwrap();
        let docs = term_sets
            .iter()
            .map(|terms| {
                QuantizedVector::from_entries(
                    terms.iter().map(|&t| (TermId::new(t), 1)).collect(),
                )
                .unwrap()
            })
            .collect::<Vec<_>>();
        let ids = (0..docs.len()).map(|i| format!("d{i}")).collect();
        Corpus::from_quantized(docs, vocab, ids, QuantizationParams::from_global_max(1.0)).unwrap()
    }

    #[test]
    fn identity_order() {
        let corpus = corpus_from_term_sets(&[&[0], &[1], &[2]]);
        let ordering = order_documents(&corpus, OrderingStrategy::Identity).unwrap();
        assert_eq!(ordering.as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn greedy_follows_term_overlap() {
        // d0={a}, d1={b}, d2={a}: overlap(d0,d2)=1 > overlap(d0,d1)=0.
        let corpus = corpus_from_term_sets(&[&[0], &[1], &[0]]);
        let ordering = order_documents(&corpus, OrderingStrategy::GreedySimilarity).unwrap();
        assert_eq!(ordering.as_slice(), &[0, 2, 1]);
    }

    #[test]
    fn singleton_corpus() {
        let corpus = corpus_from_term_sets(&[&[0]]);
        for strategy in [OrderingStrategy::Identity, OrderingStrategy::GreedySimilarity] {
            let ordering = order_documents(&corpus, strategy).unwrap();
            assert_eq!(ordering.as_slice(), &[0]);
        }
    }

    #[test]
    fn greedy_ties_break_by_ascending_id() {
        // d1 and d2 both overlap d0 by one term; d1 wins by id.
        let corpus = corpus_from_term_sets(&[&[0, 1], &[1], &[0]]);
        let ordering = order_documents(&corpus, OrderingStrategy::GreedySimilarity).unwrap();
        assert_eq!(ordering.as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!(
            "identity".parse::<OrderingStrategy>().unwrap(),
            OrderingStrategy::Identity
        );
        assert_eq!(
            "greedy".parse::<OrderingStrategy>().unwrap(),
            OrderingStrategy::GreedySimilarity
        );
        assert!(matches!(
            "bp".parse::<OrderingStrategy>(),
            Err(Error::UnknownStrategy(_))
        ));
    }

    #[test]
    fn rejects_non_bijective_permutations() {
        assert!(DocOrdering::from_permutation(vec![0, 0, 1]).is_err());
        assert!(DocOrdering::from_permutation(vec![0, 3]).is_err());
        assert!(DocOrdering::from_permutation(vec![2, 0, 1]).is_ok());
    }
}
