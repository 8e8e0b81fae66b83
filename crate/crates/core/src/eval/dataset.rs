use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::kb::KnowledgeBase;
use crate::retrieval::{CategoryLexicon, Difficulty, QueryRecord};

/// Template queries over `kb`: `round(n * easy_ratio)` direct-name questions
/// followed by function-only and negation questions, alternating.
pub fn generate_query_dataset(
    kb: &KnowledgeBase,
    lexicon: &CategoryLexicon,
    n: usize,
    easy_ratio: f64,
    seed: u64,
) -> Result<Vec<QueryRecord>, EvalError> {
    if !(0.0..=1.0).contains(&easy_ratio) {
        return Err(EvalError::Dataset(format!("easy_ratio {easy_ratio} is outside [0, 1]")));
    }
    let ids: Vec<(String, String, String)> = kb
        .entity_ids()
        .map(|(id, _)| (id.rendered().to_string(), id.category_part().to_string(), id.name_part().to_string()))
        .collect();
    if ids.is_empty() {
        return Err(EvalError::Dataset("the knowledge base is empty".into()));
    }
    let n_easy = (n as f64 * easy_ratio).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);

    let mut order: Vec<usize> = (0..ids.len()).collect();
    for i in 0..n_easy {
        if i % ids.len() == 0 {
            order.shuffle(&mut rng);
        }
        let (gold, _, name) = &ids[order[i % ids.len()]];
        out.push(QueryRecord {
            query: format!("Where is the {name}?"),
            gold_entity_id: gold.clone(),
            difficulty: Difficulty::Easy,
        });
    }

    let mut by_category: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (_, cat, _)) in ids.iter().enumerate() {
        by_category.entry(cat.as_str()).or_default().push(i);
    }
    let functional: Vec<usize> = (0..ids.len()).filter(|i| !lexicon.functions_for(&ids[*i].1).is_empty()).collect();
    let pairs: Vec<&Vec<usize>> = by_category.values().filter(|v| v.len() >= 2).collect();
    if n > n_easy && functional.is_empty() && pairs.is_empty() {
        return Err(EvalError::Dataset(
            "no category has function phrases or two entities for hard queries".into(),
        ));
    }
    for i in 0..n - n_easy {
        let negation = (i % 2 == 1 || functional.is_empty()) && !pairs.is_empty();
        if negation {
            let group = pairs[rng.random_range(0..pairs.len())];
            let a = group[rng.random_range(0..group.len())];
            let mut b = group[rng.random_range(0..group.len() - 1)];
            if b >= a {
                b += 1;
            }
            out.push(QueryRecord {
                query: format!("Not {}, but {}.", ids[a].2, ids[b].2),
                gold_entity_id: ids[b].0.clone(),
                difficulty: Difficulty::Hard,
            });
        } else {
            let e = functional[rng.random_range(0..functional.len())];
            let phrases = lexicon.functions_for(&ids[e].1);
            let phrase = &phrases[rng.random_range(0..phrases.len())];
            out.push(QueryRecord {
                query: format!("Where can I {phrase}?"),
                gold_entity_id: ids[e].0.clone(),
                difficulty: Difficulty::Hard,
            });
        }
    }
    Ok(out)
}
