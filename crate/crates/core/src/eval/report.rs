use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::EvalError;

/// Navigation result row. `sr` and `spl` are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavRow {
    pub task: String,
    pub range: String,
    pub sr: f64,
    pub spl: f64,
}

/// Retrieval result row. Recalls are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecallRow {
    pub split: String,
    pub r1: f64,
    pub r5: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Metrics {
    pub navigation: Vec<NavRow>,
    pub retrieval: Vec<RecallRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(EvalError::UnknownFormat(s.to_string())),
        }
    }
}

/// Rounds to two decimals and drops trailing zeros: 100 → "100",
/// 85.250 → "85.25", 0.5 → "0.5".
pub fn format_number(v: f64) -> String {
    let s = format!("{:.2}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn number_value(v: f64) -> Value {
    let text = format_number(v);
    match text.parse::<i64>() {
        Ok(i) => json!(i),
        Err(_) => json!(text.parse::<f64>().expect("formatted number parses")),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn md_field(s: &str) -> String {
    s.replace('|', "\\|")
}

/// Renders both tables. Output is byte-identical for identical inputs.
pub fn emit_report(metrics: &Metrics, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let nav: Vec<Value> = metrics
                .navigation
                .iter()
                .map(|r| json!({ "task": r.task, "range": r.range, "SR": number_value(r.sr), "SPL": number_value(r.spl) }))
                .collect();
            let ret: Vec<Value> = metrics
                .retrieval
                .iter()
                .map(|r| json!({ "split": r.split, "R@1": number_value(r.r1), "R@5": number_value(r.r5) }))
                .collect();
            let mut s = serde_json::to_string_pretty(&json!({ "navigation": nav, "retrieval": ret }))
                .expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from("task,range,SR,SPL\n");
            for r in &metrics.navigation {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    csv_field(&r.task),
                    csv_field(&r.range),
                    format_number(r.sr),
                    format_number(r.spl)
                );
            }
            s.push_str("\nsplit,R@1,R@5\n");
            for r in &metrics.retrieval {
                let _ = writeln!(s, "{},{},{}", csv_field(&r.split), format_number(r.r1), format_number(r.r5));
            }
            s
        }
        ReportFormat::Markdown => {
            let mut s = String::from("| task | range | SR | SPL |\n|---|---|---|---|\n");
            for r in &metrics.navigation {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} |",
                    md_field(&r.task),
                    md_field(&r.range),
                    format_number(r.sr),
                    format_number(r.spl)
                );
            }
            s.push_str("\n| split | R@1 | R@5 |\n|---|---|---|\n");
            for r in &metrics.retrieval {
                let _ = writeln!(s, "| {} | {} | {} |", md_field(&r.split), format_number(r.r1), format_number(r.r5));
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_trim() {
        assert_eq!(format_number(100.0), "100");
        assert_eq!(format_number(85.25), "85.25");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(66.666), "66.67");
        assert_eq!(format_number(-0.001), "0");
        assert_eq!(format_number(0.0), "0");
    }

    #[test]
    fn formats_parse() {
        assert_eq!("JSON".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Markdown);
        assert!(matches!("xml".parse::<ReportFormat>(), Err(EvalError::UnknownFormat(_))));
    }

    #[test]
    fn csv_quotes_fields() {
        let m = Metrics {
            navigation: vec![NavRow {
                task: "a,b".into(),
                range: "x".into(),
                sr: 100.0,
                spl: 85.25,
            }],
            retrieval: vec![],
        };
        assert!(emit_report(&m, ReportFormat::Csv).contains("\"a,b\",x,100,85.25\n"));
    }
}
