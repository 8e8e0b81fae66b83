//! Grounding natural-language place queries to knowledge-base entities.
//!
//! Retrieval runs in two stages: [`analyze_query`] extracts cues (category
//! hint, modifiers, negations), then [`constrained_beam_search`] decodes an
//! entity ID token by token. Every expansion is masked by the [`EntityTrie`],
//! so whatever the scorer proposes, the result is always an existing ID.

mod beam;
mod cues;
mod dataset;
mod scorer;
mod socket;
mod trie;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{KnowledgeBase, OsmId, Target};
use crate::tokenize::EOS;

pub use beam::{constrained_beam_search, BeamConfig, RankedEntity, RetrievalResult};
pub use cues::{analyze_query, CategoryLexicon, LexiconEntry, QueryCues};
pub use dataset::{read_query_jsonl, write_query_jsonl, Difficulty, QueryRecord};
pub use scorer::{lexical_baseline_scorer, GoldScorer, LexicalScorer, SequenceScorer};
pub use socket::{serve_scorer_connection, SocketScorer};
pub use trie::{EntityTrie, NodeRef};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("duplicate entity id {0:?}")]
    DuplicateId(String),
    #[error("prefix {0:?} is not a path in the trie")]
    InvalidPrefix(String),
    #[error("the entity corpus is empty")]
    EmptyCorpus,
    #[error("query is empty")]
    EmptyQuery,
    #[error("beam width {beam} and K {k} must satisfy beam >= K >= 1")]
    InvalidBeam { beam: usize, k: usize },
    #[error("invalid token distribution: {0}")]
    InvalidDistribution(String),
    #[error("scorer failed: {0}")]
    Scorer(String),
    #[error("entity {0} has no usable geometry")]
    MissingGeometry(OsmId),
    #[error("query dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
}

/// Probability over next tokens, including [`EOS`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenDistribution {
    probs: BTreeMap<String, f64>,
}

impl TokenDistribution {
    /// Accepts probabilities that are finite, non-negative and sum to 1 within 1e-6.
    pub fn new(probs: BTreeMap<String, f64>) -> Result<Self, RetrievalError> {
        if probs.values().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(RetrievalError::InvalidDistribution("negative or non-finite mass".into()));
        }
        let total: f64 = probs.values().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(RetrievalError::InvalidDistribution(format!("mass sums to {total}")));
        }
        Ok(TokenDistribution { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: BTreeMap<String, f64>) -> Result<Self, RetrievalError> {
        if weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RetrievalError::InvalidDistribution("negative or non-finite weight".into()));
        }
        let total: f64 = weights.values().sum();
        if total <= 0.0 {
            return Err(RetrievalError::InvalidDistribution("all weights are zero".into()));
        }
        Ok(TokenDistribution {
            probs: weights.into_iter().map(|(k, w)| (k, w / total)).collect(),
        })
    }

    /// Softmax over log-probabilities; `-inf` entries get zero mass.
    pub fn from_logprobs(logprobs: BTreeMap<String, f64>) -> Result<Self, RetrievalError> {
        if logprobs.values().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(RetrievalError::InvalidDistribution("NaN or +inf log-probability".into()));
        }
        let max = logprobs.values().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(RetrievalError::InvalidDistribution("all log-probabilities are -inf".into()));
        }
        Self::from_weights(logprobs.into_iter().map(|(k, l)| (k, (l - max).exp())).collect())
    }

    /// All mass on one token.
    pub fn point(token: &str) -> Self {
        TokenDistribution {
            probs: BTreeMap::from([(token.to_string(), 1.0)]),
        }
    }

    pub fn get(&self, token: &str) -> f64 {
        self.probs.get(token).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Distribution restricted to the admissible children of a trie node.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDistribution {
    pub probs: BTreeMap<String, f64>,
    /// The scorer gave no mass to any admissible token, so the children were
    /// weighted uniformly.
    pub fallback: bool,
}

impl MaskedDistribution {
    pub fn get(&self, token: &str) -> f64 {
        self.probs.get(token).copied().unwrap_or(0.0)
    }
}

/// Zeroes every token that is not a child of the node reached by `prefix`
/// and renormalizes the surviving mass.
pub fn mask_distribution<S: AsRef<str>>(
    dist: &TokenDistribution,
    trie: &EntityTrie,
    prefix: &[S],
) -> Result<MaskedDistribution, RetrievalError> {
    let node = trie.walk(prefix).ok_or_else(|| {
        RetrievalError::InvalidPrefix(prefix.iter().map(AsRef::as_ref).collect::<Vec<_>>().join("|"))
    })?;
    Ok(mask_at(dist, trie, node))
}

pub(crate) fn mask_at(dist: &TokenDistribution, trie: &EntityTrie, node: NodeRef) -> MaskedDistribution {
    if trie.child_count(node) == 0 {
        return MaskedDistribution {
            probs: BTreeMap::from([(EOS.to_string(), 1.0)]),
            fallback: false,
        };
    }
    let mass: f64 = trie.children(node).map(|(t, _)| dist.get(t)).sum();
    if mass > 0.0 && mass.is_finite() {
        MaskedDistribution {
            probs: trie.children(node).map(|(t, _)| (t.to_string(), dist.get(t) / mass)).collect(),
            fallback: false,
        }
    } else {
        let uniform = 1.0 / trie.child_count(node) as f64;
        MaskedDistribution {
            probs: trie.children(node).map(|(t, _)| (t.to_string(), uniform)).collect(),
            fallback: true,
        }
    }
}

/// Ranked candidates plus the rank-1 entity's geometry.
#[derive(Debug, Clone)]
pub struct Retrieval {
    pub cues: QueryCues,
    pub result: RetrievalResult,
    pub osm_id: OsmId,
    pub target: Target,
}

/// Full pipeline: cue extraction, constrained decoding and geometry lookup.
pub fn retrieve(
    query: &str,
    kb: &KnowledgeBase,
    trie: &EntityTrie,
    scorer: &dyn SequenceScorer,
    lexicon: &CategoryLexicon,
    config: BeamConfig,
) -> Result<Retrieval, RetrievalError> {
    if query.trim().is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    let cues = analyze_query(query, lexicon);
    let result = constrained_beam_search(query, &cues, trie, scorer, config)?;
    let top = result.entries.first().ok_or(RetrievalError::EmptyCorpus)?;
    let target = kb.target(top.osm_id).ok_or(RetrievalError::MissingGeometry(top.osm_id))?;
    Ok(Retrieval {
        osm_id: top.osm_id,
        cues,
        result,
        target,
    })
}
