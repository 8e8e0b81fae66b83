use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{mask_at, EntityTrie, NodeRef, QueryCues, RetrievalError, SequenceScorer};
use crate::kb::OsmId;
use crate::tokenize::{detokenize, EOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam: usize,
    pub k: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig { beam: 5, k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntity {
    pub entity_id: String,
    pub osm_id: OsmId,
    /// Mean log-probability per decoded token, `EOS` included.
    pub log_score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub entries: Vec<RankedEntity>,
    /// Some expansion had no admissible mass and fell back to uniform.
    pub fallback_used: bool,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.entity_id.as_str()).collect()
    }
}

struct Hypothesis {
    tokens: Vec<String>,
    node: NodeRef,
    log_prob: f64,
    rendered: String,
}

impl Hypothesis {
    fn score(&self) -> f64 {
        self.log_prob / self.tokens.len().max(1) as f64
    }
}

fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score()
        .total_cmp(&a.score())
        .then_with(|| a.rendered.cmp(&b.rendered))
}

/// Length-normalized beam search where every expansion is masked by the trie.
///
/// Finished hypotheses leave the beam, the `beam` best live ones continue,
/// and the `k` best finished ones are returned. Ties go to the
/// lexicographically smaller rendered ID.
pub fn constrained_beam_search(
    query: &str,
    cues: &QueryCues,
    trie: &EntityTrie,
    scorer: &dyn SequenceScorer,
    config: BeamConfig,
) -> Result<RetrievalResult, RetrievalError> {
    if config.k == 0 || config.beam < config.k {
        return Err(RetrievalError::InvalidBeam {
            beam: config.beam,
            k: config.k,
        });
    }
    if trie.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        node: EntityTrie::ROOT,
        log_prob: 0.0,
        rendered: String::new(),
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut fallback_used = false;
    while !live.is_empty() {
        let mut candidates = Vec::new();
        for hyp in &live {
            let dist = scorer.score(query, cues, &hyp.tokens)?;
            let masked = mask_at(&dist, trie, hyp.node);
            fallback_used |= masked.fallback;
            for (tok, p) in &masked.probs {
                if *p <= 0.0 {
                    continue;
                }
                let Some(child) = trie.child(hyp.node, tok) else { continue };
                let mut tokens = hyp.tokens.clone();
                tokens.push(tok.clone());
                let next = Hypothesis {
                    rendered: detokenize(&tokens),
                    tokens,
                    node: child,
                    log_prob: hyp.log_prob + p.ln(),
                };
                if tok == EOS {
                    finished.push(next);
                } else {
                    candidates.push(next);
                }
            }
        }
        candidates.sort_by(rank);
        candidates.truncate(config.beam);
        live = candidates;
    }
    finished.sort_by(rank);
    let entries = finished
        .into_iter()
        .filter_map(|h| {
            let (osm_id, rendered) = trie.terminal(h.node)?;
            Some(RankedEntity {
                entity_id: rendered.to_string(),
                osm_id,
                log_score: h.score(),
            })
        })
        .take(config.k)
        .collect();
    Ok(RetrievalResult { entries, fallback_used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::EntityId;
    use crate::retrieval::{analyze_query, CategoryLexicon, GoldScorer, LexicalScorer, TokenDistribution};

    fn trie_of(names: &[&str]) -> (EntityTrie, Vec<EntityId>) {
        let ids: Vec<EntityId> = names
            .iter()
            .map(|s| {
                let (c, n) = s.split_once('-').unwrap();
                EntityId::new(c, n).unwrap()
            })
            .collect();
        let trie = EntityTrie::build(ids.iter().cloned().enumerate().map(|(i, id)| (id, OsmId::way(i as i64)))).unwrap();
        (trie, ids)
    }

    struct Uniformish;
    impl SequenceScorer for Uniformish {
        fn score(&self, _: &str, _: &QueryCues, _: &[String]) -> Result<TokenDistribution, RetrievalError> {
            Ok(TokenDistribution::point("nothing-admissible"))
        }
    }

    #[test]
    fn single_id_corpus_always_wins() {
        let (trie, _) = trie_of(&["Dining-Cafe"]);
        let r = constrained_beam_search("anything", &QueryCues::default(), &trie, &Uniformish, BeamConfig::default())
            .unwrap();
        assert_eq!(r.ids(), vec!["Dining-Cafe"]);
        assert!(r.fallback_used);
    }

    #[test]
    fn gold_scorer_ranks_gold_first() {
        let (trie, ids) = trie_of(&["Place-Hall", "Place-Hall B", "Dining-Hall", "Dining-Cafe North"]);
        for id in &ids {
            let r = constrained_beam_search("q", &QueryCues::default(), &trie, &GoldScorer::new(id), BeamConfig::default())
                .unwrap();
            assert_eq!(r.entries[0].entity_id, id.rendered());
            assert_eq!(r.entries[0].log_score, 0.0);
        }
    }

    #[test]
    fn lexical_scorer_prefers_named_building() {
        let (trie, ids) = trie_of(&["Teaching Area-Building A", "Teaching Area-Building B"]);
        let scorer = LexicalScorer::new(ids.iter());
        let q = "Teaching Area Building A";
        let cues = analyze_query(q, &CategoryLexicon::default());
        let r = constrained_beam_search(q, &cues, &trie, &scorer, BeamConfig::default()).unwrap();
        assert_eq!(r.ids(), vec!["Teaching Area-Building A", "Teaching Area-Building B"]);
        assert!(r.entries[0].log_score >= r.entries[1].log_score);
    }

    #[test]
    fn ties_break_lexicographically() {
        let (trie, _) = trie_of(&["Place-B", "Place-A", "Place-C"]);
        let r = constrained_beam_search("", &QueryCues::default(), &trie, &Uniformish, BeamConfig { beam: 3, k: 3 })
            .unwrap();
        assert_eq!(r.ids(), vec!["Place-A", "Place-B", "Place-C"]);
    }

    #[test]
    fn rejects_bad_config() {
        let (trie, _) = trie_of(&["Place-A"]);
        let cues = QueryCues::default();
        assert!(constrained_beam_search("", &cues, &trie, &Uniformish, BeamConfig { beam: 2, k: 3 }).is_err());
        assert!(constrained_beam_search("", &cues, &trie, &Uniformish, BeamConfig { beam: 2, k: 0 }).is_err());
        let empty = EntityTrie::build(Vec::new()).unwrap();
        assert!(matches!(
            constrained_beam_search("", &cues, &empty, &Uniformish, BeamConfig::default()),
            Err(RetrievalError::EmptyCorpus)
        ));
    }
}
