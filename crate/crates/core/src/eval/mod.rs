//! Evaluation: Recall@K, success rate and SPL, episode and query-set
//! generation, and report rendering.

mod dataset;
mod episodes;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::Difficulty;

pub use dataset::generate_query_dataset;
pub use episodes::{
    distinct_starts, generate_episodes, optimal_length, run_episode, EpisodeDesign, EpisodeSpec, NAV_SUCCESS_RADIUS_M,
    OBJECT_SUCCESS_RADIUS_M,
};
pub use report::{emit_report, format_number, Metrics, NavRow, RecallRow, ReportFormat};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0} is undefined on an empty set")]
    Undefined(&'static str),
    #[error("K must be at least 1")]
    InvalidK,
    #[error("episode {index}: optimal length {value} is not positive")]
    NonPositiveOptimal { index: usize, value: f64 },
    #[error("episode {index}: actual length {value} is negative")]
    NegativeLength { index: usize, value: f64 },
    #[error("need {need} buildings with usable start positions, found {found}")]
    InsufficientBuildings { need: usize, found: usize },
    #[error("invalid episode design: {0}")]
    InvalidDesign(String),
    #[error("cannot generate queries: {0}")]
    Dataset(String),
    #[error("unknown report format {0:?}; expected json, csv or markdown")]
    UnknownFormat(String),
}

/// One retrieval evaluation line: the gold id and the ranked predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalRecord {
    pub query: String,
    pub gold: String,
    #[serde(default)]
    pub predictions: Vec<String>,
    pub difficulty: Difficulty,
}

/// Outcome of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub actual_length_m: f64,
    pub optimal_length_m: f64,
    pub tick_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_cause: Option<String>,
}

/// Fraction of records whose gold id is among the first `k` predictions.
pub fn recall_at_k(records: &[RetrievalRecord], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if records.is_empty() {
        return Err(EvalError::Undefined("Recall@K"));
    }
    let hits = records
        .iter()
        .filter(|r| r.predictions.iter().take(k).any(|p| *p == r.gold))
        .count();
    Ok(hits as f64 / records.len() as f64)
}

/// Percentage of successful episodes.
pub fn success_rate(results: &[EpisodeResult]) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::Undefined("success rate"));
    }
    let ok = results.iter().filter(|r| r.success).count();
    Ok(100.0 * ok as f64 / results.len() as f64)
}

/// Success weighted by optimal over actual path length, as a fraction.
pub fn spl(results: &[EpisodeResult]) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::Undefined("SPL"));
    }
    let mut sum = 0.0;
    for (index, r) in results.iter().enumerate() {
        if r.optimal_length_m.is_nan() || r.optimal_length_m <= 0.0 {
            return Err(EvalError::NonPositiveOptimal {
                index,
                value: r.optimal_length_m,
            });
        }
        if r.actual_length_m.is_nan() || r.actual_length_m < 0.0 {
            return Err(EvalError::NegativeLength {
                index,
                value: r.actual_length_m,
            });
        }
        if r.success {
            sum += r.optimal_length_m / r.optimal_length_m.max(r.actual_length_m);
        }
    }
    Ok(sum / results.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(gold: &str, preds: &[&str]) -> RetrievalRecord {
        RetrievalRecord {
            query: String::new(),
            gold: gold.into(),
            predictions: preds.iter().map(|s| s.to_string()).collect(),
            difficulty: Difficulty::Easy,
        }
    }

    fn ep(success: bool, actual: f64, optimal: f64) -> EpisodeResult {
        EpisodeResult {
            success,
            actual_length_m: actual,
            optimal_length_m: optimal,
            tick_count: 0,
            failure_cause: None,
        }
    }

    #[test]
    fn recall_examples() {
        let all_first = vec![rec("a", &["a", "b"]), rec("b", &["b"])];
        assert_eq!(recall_at_k(&all_first, 1).unwrap(), 1.0);
        let five = vec![
            rec("a", &["x", "a"]),
            rec("b", &["x", "y", "z", "w", "b"]),
            rec("c", &["c"]),
            rec("d", &["x", "y", "z", "w", "v", "d"]),
            rec("e", &[]),
        ];
        assert_eq!(recall_at_k(&five, 5).unwrap(), 0.6);
        assert!(matches!(recall_at_k(&five, 0), Err(EvalError::InvalidK)));
        assert!(matches!(recall_at_k(&[], 1), Err(EvalError::Undefined(_))));
    }

    #[test]
    fn success_rate_examples() {
        assert_eq!(success_rate(&vec![ep(true, 1.0, 1.0); 3]).unwrap(), 100.0);
        let mut v = vec![ep(false, 1.0, 1.0); 45];
        v.iter_mut().take(9).for_each(|r| r.success = true);
        assert_eq!(success_rate(&v).unwrap(), 20.0);
        assert!(success_rate(&[]).is_err());
    }

    #[test]
    fn spl_examples() {
        assert_eq!(spl(&[ep(true, 10.0, 10.0)]).unwrap(), 1.0);
        assert_eq!(spl(&[ep(false, 10.0, 10.0)]).unwrap(), 0.0);
        assert_eq!(spl(&[ep(true, 20.0, 10.0)]).unwrap(), 0.5);
        assert_eq!(spl(&[ep(true, 5.0, 10.0)]).unwrap(), 1.0);
        assert!(matches!(spl(&[ep(true, 1.0, 0.0)]), Err(EvalError::NonPositiveOptimal { index: 0, .. })));
        assert!(spl(&[ep(true, -1.0, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn spl_never_exceeds_success_fraction(
            eps in prop::collection::vec((any::<bool>(), 0.0f64..1e4, 0.1f64..1e4), 1..60)
        ) {
            let v: Vec<_> = eps.iter().map(|(s, a, o)| ep(*s, *a, *o)).collect();
            let sr = success_rate(&v).unwrap();
            let s = spl(&v).unwrap();
            prop_assert!(s >= 0.0);
            prop_assert!(s <= sr / 100.0 + 1e-12);
            prop_assert!(sr <= 100.0);
        }

        #[test]
        fn recall_is_monotone_in_k(
            rows in prop::collection::vec((0u8..6, prop::collection::vec(0u8..6, 0..8)), 1..30)
        ) {
            let recs: Vec<_> = rows
                .iter()
                .map(|(g, p)| RetrievalRecord {
                    query: String::new(),
                    gold: g.to_string(),
                    predictions: p.iter().map(|x| x.to_string()).collect(),
                    difficulty: Difficulty::Hard,
                })
                .collect();
            let mut last = 0.0;
            for k in 1..10 {
                let r = recall_at_k(&recs, k).unwrap();
                prop_assert!((0.0..=1.0).contains(&r));
                prop_assert!(r >= last);
                last = r;
            }
        }
    }
}
