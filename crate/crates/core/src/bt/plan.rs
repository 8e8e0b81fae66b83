use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{BtError, BtNode, SkillRegistry};

pub const GLOBAL_PLANNING: &str = "GlobalPlanning";
pub const FOLLOW_PATH: &str = "FollowPath";
pub const REPLAN: &str = "Replan";
pub const EXPLORATION: &str = "Exploration";

/// One step of a mission plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Subtask {
    Nav { query: String },
    Explore { query: String },
}

impl Subtask {
    pub fn query(&self) -> &str {
        match self {
            Subtask::Nav { query } | Subtask::Explore { query } => query,
        }
    }
}

/// Ordered, validated list of subtasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct MissionPlan {
    tasks: Vec<Subtask>,
}

impl<'de> Deserialize<'de> for MissionPlan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        MissionPlan::new(Vec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl MissionPlan {
    /// Non-empty, with non-blank queries and a navigation step before any
    /// exploration step.
    pub fn new(tasks: Vec<Subtask>) -> Result<Self, BtError> {
        if tasks.is_empty() {
            return Err(BtError::EmptyPlan);
        }
        let mut seen_nav = false;
        for (i, t) in tasks.iter().enumerate() {
            if t.query().trim().is_empty() {
                return Err(BtError::InvalidPlan(format!("subtask {i} has an empty query")));
            }
            match t {
                Subtask::Nav { .. } => seen_nav = true,
                Subtask::Explore { .. } if !seen_nav => return Err(BtError::ExploreWithoutNav { index: i }),
                Subtask::Explore { .. } => {}
            }
        }
        Ok(MissionPlan { tasks })
    }

    pub fn tasks(&self) -> &[Subtask] {
        &self.tasks
    }
}

static NAV_VERB: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:navigate|go|head|walk|drive)\s+to\s+(.+)$").unwrap());
static FIND_VERB: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:find|search\s+for|look\s+for)\s+(?:(?:the|a|an)\s+)?(.+)$").unwrap());

const STRUCTURED_HINT: &str =
    r#"use a JSON plan such as [{"type":"nav","query":"the library"},{"type":"explore","query":"a red backpack"}]"#;

/// Reads a JSON plan (input starting with `[`) or an instruction such as
/// "Navigate to X and find Y" or "Go to X then Y then find Z".
pub fn parse_mission(input: &str) -> Result<MissionPlan, BtError> {
    let input = input.trim();
    if input.starts_with('[') {
        let tasks: Vec<Subtask> = serde_json::from_str(input).map_err(|e| BtError::InvalidPlan(e.to_string()))?;
        return MissionPlan::new(tasks);
    }
    if input.is_empty() {
        return Err(BtError::EmptyPlan);
    }
    let text = input.trim_end_matches(['.', '!', '?']).trim();
    let mut tasks = Vec::new();
    for (i, clause) in split_clauses(text).into_iter().enumerate() {
        let clause = clause.trim();
        if let Some(c) = FIND_VERB.captures(clause) {
            tasks.push(Subtask::Explore {
                query: c[1].trim().to_string(),
            });
        } else if let Some(c) = NAV_VERB.captures(clause) {
            tasks.push(Subtask::Nav {
                query: c[1].trim().to_string(),
            });
        } else if i > 0 && !clause.is_empty() {
            tasks.push(Subtask::Nav {
                query: clause.to_string(),
            });
        } else {
            return Err(BtError::UnrecognizedInstruction {
                input: input.to_string(),
                hint: STRUCTURED_HINT.to_string(),
            });
        }
    }
    MissionPlan::new(tasks)
}

fn split_clauses(text: &str) -> Vec<&str> {
    static THEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i),?\s+then\s+").unwrap());
    static AND: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i),?\s+and\s+").unwrap());
    let mut out = Vec::new();
    for part in THEN.split(text) {
        let mut start = 0;
        for m in AND.find_iter(part) {
            if FIND_VERB.is_match(&part[m.end()..]) {
                out.push(&part[start..m.start()]);
                start = m.end();
            }
        }
        out.push(&part[start..]);
    }
    out
}

fn nav_subtree(target: &str) -> BtNode {
    BtNode::sequence(vec![
        BtNode::action(GLOBAL_PLANNING, Some(target)),
        BtNode::fallback(vec![
            BtNode::action(FOLLOW_PATH, None),
            BtNode::sequence(vec![BtNode::action(REPLAN, None), BtNode::action(FOLLOW_PATH, None)]),
        ]),
    ])
}

/// Expands a plan into a tree. A single-step plan yields that step's
/// subtree as root; longer plans chain subtrees under a root Sequence.
pub fn build_bt(plan: &MissionPlan, skills: &dyn SkillRegistry) -> Result<BtNode, BtError> {
    let mut subtrees = Vec::with_capacity(plan.tasks().len());
    for t in plan.tasks() {
        let node = match t {
            Subtask::Nav { query } => nav_subtree(query.trim()),
            Subtask::Explore { query } => BtNode::action(EXPLORATION, Some(query.trim())),
        };
        subtrees.push(node);
    }
    let root = if subtrees.len() == 1 && !subtrees[0].is_leaf() {
        subtrees.pop().expect("one subtree")
    } else {
        BtNode::sequence(subtrees)
    };
    for name in root.leaf_names() {
        if !skills.has_skill(name) {
            return Err(BtError::MissingSkill(name.to_string()));
        }
    }
    Ok(root)
}
