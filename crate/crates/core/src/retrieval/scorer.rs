//! Sequence scorers: the pluggable next-token model used during decoding.

use std::collections::{BTreeMap, BTreeSet};

use super::{QueryCues, RetrievalError, TokenDistribution};
use crate::kb::{EntityId, KnowledgeBase};
use crate::tokenize::{detokenize, tokenize, words, EOS};

/// Next-token model conditioned on the query, its cues and the decoded prefix.
///
/// Implementations must be deterministic for a fixed configuration.
pub trait SequenceScorer: Send + Sync {
    fn score(&self, query: &str, cues: &QueryCues, prefix: &[String]) -> Result<TokenDistribution, RetrievalError>;
}

impl<T: SequenceScorer + ?Sized> SequenceScorer for &T {
    fn score(&self, query: &str, cues: &QueryCues, prefix: &[String]) -> Result<TokenDistribution, RetrievalError> {
        (**self).score(query, cues, prefix)
    }
}

impl<T: SequenceScorer + ?Sized> SequenceScorer for Box<T> {
    fn score(&self, query: &str, cues: &QueryCues, prefix: &[String]) -> Result<TokenDistribution, RetrievalError> {
        (**self).score(query, cues, prefix)
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "is", "are", "where", "what", "which", "how", "to", "of", "in", "at", "on", "for", "find",
    "me", "take", "go", "navigate", "please", "i", "want", "need", "place", "not", "but", "except", "and",
    "or", "can", "could", "you", "show", "get", "nearest", "closest", "some", "any", "somewhere", "excluding",
];

/// Word-padded character trigrams.
fn grams_of_word(word: &str, out: &mut BTreeSet<String>) {
    let padded: Vec<char> = format!(" {word} ").chars().collect();
    for w in padded.windows(3) {
        out.insert(w.iter().collect());
    }
}

fn grams_of_text<'a>(words: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for w in words {
        grams_of_word(w, &mut out);
    }
    out
}

/// Offline stand-in for a language model: trigram overlap between the query
/// context and each candidate token, a bonus for continuing the hinted
/// category, and a penalty for tokens that only match negated spans.
#[derive(Debug, Clone)]
pub struct LexicalScorer {
    vocab: Vec<String>,
    token_grams: Vec<BTreeSet<String>>,
    floor: f64,
    category_bonus: f64,
    negation_factor: f64,
}

/// Baseline scorer over the vocabulary of `kb`'s entity IDs.
pub fn lexical_baseline_scorer(kb: &KnowledgeBase) -> LexicalScorer {
    LexicalScorer::new(kb.entity_ids().map(|(id, _)| id))
}

impl LexicalScorer {
    pub const DEFAULT_FLOOR: f64 = 0.02;
    pub const DEFAULT_CATEGORY_BONUS: f64 = 1.0;
    pub const DEFAULT_NEGATION_FACTOR: f64 = 0.05;

    pub fn new<'a>(ids: impl IntoIterator<Item = &'a EntityId>) -> Self {
        let mut vocab: BTreeSet<String> = BTreeSet::new();
        for id in ids {
            vocab.extend(id.tokens().iter().cloned());
        }
        vocab.insert(EOS.to_string());
        let vocab: Vec<String> = vocab.into_iter().collect();
        let token_grams = vocab
            .iter()
            .map(|t| {
                if t == EOS {
                    BTreeSet::new()
                } else {
                    let ws: Vec<String> = words(t).collect();
                    grams_of_text(ws.iter().map(String::as_str))
                }
            })
            .collect();
        LexicalScorer {
            vocab,
            token_grams,
            floor: Self::DEFAULT_FLOOR,
            category_bonus: Self::DEFAULT_CATEGORY_BONUS,
            negation_factor: Self::DEFAULT_NEGATION_FACTOR,
        }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn positive_words(query: &str, cues: &QueryCues) -> Vec<String> {
        let mut text = query.to_lowercase();
        for neg in &cues.negations {
            text = text.replace(&neg.to_lowercase(), " ");
        }
        let mut out: Vec<String> = words(&text).filter(|w| !STOPWORDS.contains(&w.as_str())).collect();
        for m in &cues.modifiers {
            out.extend(words(m));
        }
        if let Some(hint) = &cues.category_hint {
            out.extend(words(hint));
        }
        out
    }
}

impl SequenceScorer for LexicalScorer {
    fn score(&self, query: &str, cues: &QueryCues, prefix: &[String]) -> Result<TokenDistribution, RetrievalError> {
        let positive = Self::positive_words(query, cues);
        let q = grams_of_text(positive.iter().map(String::as_str));
        let negative_words: Vec<String> = cues.negations.iter().flat_map(|n| words(n).collect::<Vec<_>>()).collect();
        let neg = grams_of_text(negative_words.iter().map(String::as_str));
        let prefix_text = detokenize(prefix);
        let prefix_words: Vec<String> = words(&prefix_text).collect();
        let covered = grams_of_text(prefix_words.iter().map(String::as_str));
        let remaining: BTreeSet<&String> = q.difference(&covered).collect();
        let coverage = if q.is_empty() {
            0.0
        } else {
            q.intersection(&covered).count() as f64 / q.len() as f64
        };
        let hint_next: Option<String> = cues.category_hint.as_ref().and_then(|h| {
            let ht = tokenize(h);
            (prefix.len() < ht.len() && ht[..prefix.len()] == *prefix).then(|| ht[prefix.len()].clone())
        });

        let mut weights = BTreeMap::new();
        for (tok, g) in self.vocab.iter().zip(&self.token_grams) {
            let w = if tok == EOS {
                self.floor + coverage
            } else if g.is_empty() {
                self.floor
            } else {
                let hits = g.iter().filter(|x| remaining.contains(x)).count();
                let overlap = hits as f64 / g.len() as f64;
                let bonus = if hint_next.as_deref() == Some(tok.as_str()) {
                    self.category_bonus
                } else {
                    0.0
                };
                let mut raw = self.floor + overlap + bonus;
                if hits == 0 && bonus == 0.0 && g.iter().any(|x| neg.contains(x)) {
                    raw *= self.negation_factor;
                }
                raw
            };
            weights.insert(tok.clone(), w);
        }
        TokenDistribution::from_weights(weights)
    }
}

/// Puts all mass on the next token of one fixed ID; used as an oracle.
#[derive(Debug, Clone)]
pub struct GoldScorer {
    tokens: Vec<String>,
}

impl GoldScorer {
    pub fn new(gold: &EntityId) -> Self {
        GoldScorer {
            tokens: gold.tokens().to_vec(),
        }
    }
}

impl SequenceScorer for GoldScorer {
    fn score(&self, _query: &str, _cues: &QueryCues, prefix: &[String]) -> Result<TokenDistribution, RetrievalError> {
        let on_path = prefix.len() < self.tokens.len() && self.tokens[..prefix.len()] == *prefix;
        Ok(if on_path {
            TokenDistribution::point(&self.tokens[prefix.len()])
        } else {
            TokenDistribution::point(EOS)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigrams_are_word_padded() {
        let g = grams_of_text(["ab"]);
        assert_eq!(g.into_iter().collect::<Vec<_>>(), vec![" ab", "ab "]);
    }

    #[test]
    fn empty_cues_still_total() {
        let ids = [EntityId::new("Dining", "Cafe").unwrap()];
        let s = LexicalScorer::new(ids.iter());
        let d = s.score("", &QueryCues::default(), &[]).unwrap();
        let total: f64 = d.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(d.iter().all(|(_, p)| p > 0.0));
    }

    #[test]
    fn negated_tokens_are_penalized() {
        let ids = [
            EntityId::new("Teaching Area", "Building A").unwrap(),
            EntityId::new("Teaching Area", "Building B").unwrap(),
        ];
        let s = LexicalScorer::new(ids.iter());
        let cues = QueryCues {
            category_hint: None,
            modifiers: vec!["Building B".into()],
            negations: vec!["Building A".into()],
        };
        let prefix: Vec<String> = tokenize("Teaching Area-Building");
        let d = s.score("Not Building A, but Building B", &cues, &prefix).unwrap();
        assert!(d.get(" B") > 10.0 * d.get(" A"));
    }

    #[test]
    fn gold_scorer_follows_gold_path() {
        let gold = EntityId::new("Dining", "Cafe").unwrap();
        let s = GoldScorer::new(&gold);
        assert_eq!(s.score("", &QueryCues::default(), &[]).unwrap().get("Dining"), 1.0);
        let full = gold.tokens().to_vec();
        assert_eq!(s.score("", &QueryCues::default(), &full).unwrap().get(EOS), 1.0);
    }
}
