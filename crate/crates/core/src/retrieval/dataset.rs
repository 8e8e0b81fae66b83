use serde::{Deserialize, Serialize};

use super::RetrievalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

/// One line of a query dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRecord {
    pub query: String,
    pub gold_entity_id: String,
    pub difficulty: Difficulty,
}

pub fn read_query_jsonl(text: &str) -> Result<Vec<QueryRecord>, RetrievalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RetrievalError::Dataset {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_query_jsonl(records: &[QueryRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let records = vec![QueryRecord {
            query: "Where is the library?".into(),
            gold_entity_id: "Study Area-Main Library".into(),
            difficulty: Difficulty::Easy,
        }];
        let text = write_query_jsonl(&records);
        assert!(text.contains("\"difficulty\":\"easy\""));
        assert_eq!(read_query_jsonl(&text).unwrap(), records);
        assert!(matches!(
            read_query_jsonl("\n{\"query\":1}"),
            Err(RetrievalError::Dataset { line: 2, .. })
        ));
    }
}
