//! Deterministic cue extraction: category hint, salient modifiers and negations.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueryCues {
    pub category_hint: Option<String>,
    pub modifiers: Vec<String>,
    pub negations: Vec<String>,
}

/// Keywords for one category. `nouns` name a kind of place and also count as
/// modifiers; `functions` describe what one does there and only vote for the
/// category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub category: String,
    pub nouns: Vec<String>,
    pub functions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryLexicon {
    pub entries: Vec<LexiconEntry>,
}

impl Default for CategoryLexicon {
    fn default() -> Self {
        let entry = |category: &str, nouns: &[&str], functions: &[&str]| LexiconEntry {
            category: category.to_string(),
            nouns: nouns.iter().map(|s| s.to_string()).collect(),
            functions: functions.iter().map(|s| s.to_string()).collect(),
        };
        CategoryLexicon {
            entries: vec![
                entry(
                    "Study Area",
                    &["library", "reading room", "study room", "study hall"],
                    &["study", "read", "borrow books", "do homework", "find a book"],
                ),
                entry(
                    "Teaching Area",
                    &["classroom", "lecture hall", "teaching building", "lab", "laboratory"],
                    &["attend a lecture", "take a class", "attend class", "teach", "have a seminar"],
                ),
                entry(
                    "Dining",
                    &["canteen", "cafeteria", "restaurant", "cafe", "dining hall", "food court"],
                    &["eat", "have lunch", "have dinner", "have breakfast", "get coffee", "grab a bite"],
                ),
                entry(
                    "Residence",
                    &["dormitory", "dorm", "residence hall", "apartment"],
                    &["sleep", "rest", "live"],
                ),
                entry(
                    "Sports",
                    &["gym", "gymnasium", "stadium", "sports center", "swimming pool", "court"],
                    &["work out", "exercise", "swim", "play basketball", "go running"],
                ),
                entry(
                    "Medical",
                    &["hospital", "clinic", "infirmary"],
                    &["see a doctor", "get medicine", "get a checkup"],
                ),
                entry(
                    "Administration",
                    &["office", "administration building", "registrar"],
                    &["pay tuition", "register", "get a transcript"],
                ),
                entry("Parking", &["parking lot", "garage", "car park"], &["park the car", "park a car"]),
            ],
        }
    }
}

impl CategoryLexicon {
    /// Function phrases for `category`, used by the dataset generator.
    pub fn functions_for(&self, category: &str) -> &[String] {
        self.entries
            .iter()
            .find(|e| e.category == category)
            .map(|e| e.functions.as_slice())
            .unwrap_or(&[])
    }

    pub fn nouns_for(&self, category: &str) -> &[String] {
        self.entries
            .iter()
            .find(|e| e.category == category)
            .map(|e| e.nouns.as_slice())
            .unwrap_or(&[])
    }
}

const NEGATION_MARKERS: &[&str] = &["not", "except", "excluding"];
const NEGATION_SKIP: &[&str] = &["the", "a", "an", "for"];
const NEGATION_STOP: &[&str] = &["but", "and", "or", "then"];
const RUN_START_EXCLUDED: &[&str] = &[
    "where", "what", "which", "who", "how", "is", "are", "find", "navigate", "go", "take", "show", "please",
    "i", "the", "a", "an", "not", "but", "then", "and", "to", "me", "can", "could", "would", "lead", "guide",
    "bring", "head", "walk", "drive", "locate", "search", "look", "get", "let", "except", "excluding", "near",
    "next", "in", "at", "on", "of", "for", "with", "from", "my", "we", "you",
];
const ORDINALS: &[&str] = &[
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
];

#[derive(Debug, Clone)]
enum Item {
    Word { text: String, lower: String, start: usize, end: usize },
    Quote,
    Punct,
}

fn item_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"[\p{L}\p{N}][\p{L}\p{N}'#&]*|"|[,.;:!?()]"#).expect("valid regex"))
}

fn ordinal_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d+(st|nd|rd|th)$").expect("valid regex"))
}

fn lex(q: &str) -> Vec<Item> {
    item_regex()
        .find_iter(q)
        .map(|m| match m.as_str() {
            "\"" => Item::Quote,
            s if s.chars().next().is_some_and(|c| c.is_alphanumeric()) => Item::Word {
                text: s.to_string(),
                lower: s.to_lowercase(),
                start: m.start(),
                end: m.end(),
            },
            _ => Item::Punct,
        })
        .collect()
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(|c| c.is_uppercase())
}

/// Short designators such as `A`, `B2` or `3` that continue a name.
fn is_designator(word: &str) -> bool {
    word.chars().count() <= 3
        && (word.chars().any(|c| c.is_ascii_digit()) || word.chars().all(|c| c.is_uppercase()))
}

fn phrase_words(phrase: &str) -> Vec<String> {
    phrase.split_whitespace().map(str::to_lowercase).collect()
}

fn word_matches(pattern: &str, word: &str, last: bool) -> bool {
    word == pattern
        || (last && (word.strip_suffix('s') == Some(pattern) || word.strip_suffix("es") == Some(pattern)))
}

/// Extracts cues from a query. Total: every input yields some cue set.
pub fn analyze_query(q: &str, lexicon: &CategoryLexicon) -> QueryCues {
    let items = lex(q);
    let n = items.len();
    let mut negated = vec![false; n];
    let mut negations: Vec<String> = Vec::new();

    let mut i = 0;
    while i < n {
        let Item::Word { lower, .. } = &items[i] else {
            i += 1;
            continue;
        };
        if !NEGATION_MARKERS.contains(&lower.as_str()) {
            i += 1;
            continue;
        }
        negated[i] = true;
        let mut j = i + 1;
        while let Some(Item::Word { lower, .. }) = items.get(j) {
            if NEGATION_SKIP.contains(&lower.as_str()) {
                negated[j] = true;
                j += 1;
            } else {
                break;
            }
        }
        let first = j;
        while let Some(Item::Word { lower, .. }) = items.get(j) {
            if NEGATION_STOP.contains(&lower.as_str()) || NEGATION_MARKERS.contains(&lower.as_str()) {
                break;
            }
            negated[j] = true;
            j += 1;
        }
        if j > first {
            if let (Item::Word { start, .. }, Item::Word { end, .. }) = (&items[first], &items[j - 1]) {
                negations.push(q[*start..*end].to_string());
            }
        }
        i = j.max(i + 1);
    }

    let mut modifiers: Vec<String> = Vec::new();

    // Quoted spans.
    let quotes: Vec<usize> = (0..n).filter(|k| matches!(items[*k], Item::Quote)).collect();
    for pair in quotes.chunks(2) {
        if let [open, close] = pair {
            let inner: Vec<(usize, usize)> = (open + 1..*close)
                .filter(|k| !negated[*k])
                .filter_map(|k| match &items[k] {
                    Item::Word { start, end, .. } => Some((*start, *end)),
                    _ => None,
                })
                .collect();
            if let (Some(first), Some(last)) = (inner.first(), inner.last()) {
                modifiers.push(q[first.0..last.1].to_string());
            }
        }
    }

    // Capitalized runs.
    let mut run: Option<(usize, usize)> = None;
    let flush = |run: &mut Option<(usize, usize)>, modifiers: &mut Vec<String>| {
        if let Some((s, e)) = run.take() {
            modifiers.push(q[s..e].to_string());
        }
    };
    for k in 0..n {
        match &items[k] {
            Item::Word { text, lower, start, end } if !negated[k] => {
                let continues = run.is_some() && (is_capitalized(text) || is_designator(text));
                let starts = run.is_none() && is_capitalized(text) && !RUN_START_EXCLUDED.contains(&lower.as_str());
                if continues {
                    if let Some((_, e)) = run.as_mut() {
                        *e = *end;
                    }
                } else if starts {
                    run = Some((*start, *end));
                } else {
                    flush(&mut run, &mut modifiers);
                }
            }
            _ => flush(&mut run, &mut modifiers),
        }
    }
    flush(&mut run, &mut modifiers);

    let words: Vec<(usize, &str)> = items
        .iter()
        .enumerate()
        .filter_map(|(k, it)| match it {
            Item::Word { lower, .. } => Some((k, lower.as_str())),
            _ => None,
        })
        .collect();

    // Ordinal phrases.
    for w in 0..words.len() {
        let (k, lower) = words[w];
        if negated[k] || !(ORDINALS.contains(&lower) || ordinal_regex().is_match(lower)) {
            continue;
        }
        if let Some((k2, _)) = words.get(w + 1) {
            if *k2 == k + 1 && !negated[*k2] {
                if let (Item::Word { start, .. }, Item::Word { end, .. }) = (&items[k], &items[*k2]) {
                    modifiers.push(q[*start..*end].to_string());
                }
            }
        }
    }

    // Keyword matches: nouns become modifiers, every match votes for its category.
    let find_phrase = |phrase: &str| -> Option<(usize, usize)> {
        let pw = phrase_words(phrase);
        if pw.is_empty() || pw.len() > words.len() {
            return None;
        }
        (0..=words.len() - pw.len()).find_map(|w| {
            let ok = pw.iter().enumerate().all(|(j, p)| {
                let (k, word) = words[w + j];
                !negated[k] && (j == 0 || words[w + j - 1].0 + 1 == k) && word_matches(p, word, j + 1 == pw.len())
            });
            ok.then(|| (words[w].0, words[w + pw.len() - 1].0))
        })
    };
    let mut best: Option<(usize, &str)> = None;
    for entry in &lexicon.entries {
        let mut votes = 0;
        if find_phrase(&entry.category).is_some() {
            votes += 1;
        }
        for noun in &entry.nouns {
            if let Some((a, b)) = find_phrase(noun) {
                votes += 1;
                if let (Item::Word { start, .. }, Item::Word { end, .. }) = (&items[a], &items[b]) {
                    let text = &q[*start..*end];
                    let lower = text.to_lowercase();
                    if !modifiers.iter().any(|m| m.to_lowercase().contains(&lower)) {
                        modifiers.push(text.to_string());
                    }
                }
            }
        }
        votes += entry.functions.iter().filter(|f| find_phrase(f).is_some()).count();
        if votes > 0 && best.is_none_or(|(v, _)| votes > v) {
            best = Some((votes, &entry.category));
        }
    }

    let negated_lower: BTreeSet<String> = negations.iter().map(|s| s.to_lowercase()).collect();
    let mut seen = BTreeSet::new();
    modifiers.retain(|m| {
        let lower = m.to_lowercase();
        !negated_lower.contains(&lower) && seen.insert(lower)
    });

    QueryCues {
        category_hint: best.map(|(_, c)| c.to_string()),
        modifiers,
        negations,
    }
}
