use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{BtError, BtNode};
use crate::geodesy::EnuPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TickStatus {
    Running,
    Success,
    Failure,
}

impl fmt::Display for TickStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TickStatus::Running => "Running",
            TickStatus::Success => "Success",
            TickStatus::Failure => "Failure",
        })
    }
}

/// Leaf invocation handed to a skill.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionCall {
    pub skill: String,
    pub target: Option<String>,
    /// True on the first tick of a fresh activation, false while resuming a
    /// leaf that returned Running last time.
    pub fresh: bool,
}

/// Executable binding for an Action or Condition leaf.
pub trait Skill<C> {
    fn tick(&mut self, ctx: &mut C, call: &ActionCall) -> TickStatus;
}

impl<C, F> Skill<C> for F
where
    F: FnMut(&mut C, &ActionCall) -> TickStatus,
{
    fn tick(&mut self, ctx: &mut C, call: &ActionCall) -> TickStatus {
        self(ctx, call)
    }
}

pub trait SkillRegistry {
    fn has_skill(&self, name: &str) -> bool;
}

/// Named skill bindings.
pub struct SkillPool<C> {
    skills: BTreeMap<String, Box<dyn Skill<C>>>,
}

impl<C> Default for SkillPool<C> {
    fn default() -> Self {
        SkillPool {
            skills: BTreeMap::new(),
        }
    }
}

impl<C> SkillRegistry for SkillPool<C> {
    fn has_skill(&self, name: &str) -> bool {
        self.skills.contains_key(name)
    }
}

impl<C> SkillPool<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, skill: impl Skill<C> + 'static) -> &mut Self {
        self.skills.insert(name.to_string(), Box::new(skill));
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.skills.keys().map(String::as_str)
    }

    /// Runs a skill, mapping a missing binding or a panic to Failure.
    fn invoke(&mut self, ctx: &mut C, call: &ActionCall) -> (TickStatus, Option<String>) {
        let Some(skill) = self.skills.get_mut(&call.skill) else {
            return (TickStatus::Failure, Some(format!("no skill named {}", call.skill)));
        };
        match catch_unwind(AssertUnwindSafe(|| skill.tick(ctx, call))) {
            Ok(s) => (s, None),
            Err(payload) => {
                let msg = payload
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| payload.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "unknown panic".into());
                (TickStatus::Failure, Some(format!("skill {} panicked: {msg}", call.skill)))
            }
        }
    }
}

/// Per-node execution memory mirroring the tree shape.
#[derive(Debug, Clone, Default)]
struct NodeState {
    cursor: usize,
    running: bool,
    children: Vec<NodeState>,
}

impl NodeState {
    fn for_node(node: &BtNode) -> Self {
        NodeState {
            cursor: 0,
            running: false,
            children: node.children().iter().map(NodeState::for_node).collect(),
        }
    }

    fn reset(&mut self) {
        self.cursor = 0;
        self.running = false;
        self.children.iter_mut().for_each(NodeState::reset);
    }
}

/// What happened in one tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    /// Child indices from the root to the ticked leaf.
    pub path: Vec<usize>,
    pub leaf: String,
    pub status: TickStatus,
    pub root: TickStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn format_path(path: &[usize]) -> String {
    if path.is_empty() {
        return "/".into();
    }
    path.iter().map(|i| format!("/{i}")).collect()
}

impl fmt::Display for TickRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tick {} | {} | {} | {} | root={}",
            self.tick,
            format_path(&self.path),
            self.leaf,
            self.status,
            self.root
        )
    }
}

/// A tree plus its execution memory. Each tick runs exactly one leaf;
/// Sequences and Fallbacks resume from their active child.
pub struct BehaviorTree {
    root: BtNode,
    state: NodeState,
    ticks: u64,
    status: Option<TickStatus>,
}

impl BehaviorTree {
    pub fn new(root: BtNode) -> Result<Self, BtError> {
        root.validate()?;
        Ok(BehaviorTree {
            state: NodeState::for_node(&root),
            root,
            ticks: 0,
            status: None,
        })
    }

    pub fn root(&self) -> &BtNode {
        &self.root
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Last root status, `None` before the first tick.
    pub fn status(&self) -> Option<TickStatus> {
        self.status
    }

    pub fn tick<C>(&mut self, ctx: &mut C, skills: &mut SkillPool<C>) -> TickRecord {
        self.ticks += 1;
        let mut path = Vec::new();
        let mut leaf = None;
        let root = tick_node(&self.root, &mut self.state, ctx, skills, &mut path, &mut leaf);
        self.status = Some(root);
        let (node, status, note) = leaf.expect("every tick reaches a leaf");
        TickRecord {
            tick: self.ticks,
            path,
            leaf: node,
            status,
            root,
            note,
        }
    }
}

type LeafOutcome = Option<(String, TickStatus, Option<String>)>;

fn tick_node<C>(
    node: &BtNode,
    state: &mut NodeState,
    ctx: &mut C,
    skills: &mut SkillPool<C>,
    path: &mut Vec<usize>,
    leaf: &mut LeafOutcome,
) -> TickStatus {
    match node {
        BtNode::Action { skill, target } => {
            let call = ActionCall {
                skill: skill.clone(),
                target: target.clone(),
                fresh: !state.running,
            };
            let (s, note) = skills.invoke(ctx, &call);
            state.running = s == TickStatus::Running;
            *leaf = Some((node.to_string(), s, note));
            s
        }
        BtNode::Condition { name } => {
            let call = ActionCall {
                skill: name.clone(),
                target: None,
                fresh: true,
            };
            let (s, note) = skills.invoke(ctx, &call);
            // conditions never stay active across ticks
            let s = if s == TickStatus::Running { TickStatus::Failure } else { s };
            *leaf = Some((node.to_string(), s, note));
            s
        }
        BtNode::Sequence { children } | BtNode::Fallback { children } => {
            let (advance_on, stop_on) = match node {
                BtNode::Sequence { .. } => (TickStatus::Success, TickStatus::Failure),
                _ => (TickStatus::Failure, TickStatus::Success),
            };
            let i = state.cursor;
            path.push(i);
            let s = tick_node(&children[i], &mut state.children[i], ctx, skills, path, leaf);
            if s == TickStatus::Running {
                return TickStatus::Running;
            }
            if s == stop_on {
                state.reset();
                return stop_on;
            }
            debug_assert_eq!(s, advance_on);
            state.children[i].reset();
            state.cursor += 1;
            if state.cursor == children.len() {
                state.reset();
                return advance_on;
            }
            TickStatus::Running
        }
    }
}

/// Bounds on a tree run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLimits {
    pub max_ticks: u64,
    #[serde(with = "secs")]
    pub wall_clock: Duration,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            max_ticks: 10_000,
            wall_clock: Duration::from_secs(60),
        }
    }
}

/// Final status of a run with its tick log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: TickStatus,
    pub ticks: Vec<TickRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

impl RunOutcome {
    /// One line per tick followed by a result line, newline-terminated.
    pub fn render_log(&self) -> String {
        let mut out: String = self.ticks.iter().map(|t| format!("{t}\n")).collect();
        match &self.cause {
            Some(c) => out.push_str(&format!("result | {} | {c}\n", self.status)),
            None => out.push_str(&format!("result | {}\n", self.status)),
        }
        out
    }

    pub fn count_leaf(&self, skill: &str) -> usize {
        let prefix = format!("Action skill={skill}");
        self.ticks
            .iter()
            .filter(|t| t.leaf == prefix || t.leaf.starts_with(&format!("{prefix} ")))
            .count()
    }
}

/// Ticks until the root leaves Running or a limit is hit; a limit counts as
/// Failure.
pub fn run_tree<C>(tree: &mut BehaviorTree, ctx: &mut C, skills: &mut SkillPool<C>, limits: RunLimits) -> RunOutcome {
    let started = Instant::now();
    let mut ticks = Vec::new();
    loop {
        if ticks.len() as u64 >= limits.max_ticks {
            return RunOutcome {
                status: TickStatus::Failure,
                ticks,
                cause: Some(format!("timeout: tick budget of {} exhausted", limits.max_ticks)),
            };
        }
        if started.elapsed() > limits.wall_clock {
            return RunOutcome {
                status: TickStatus::Failure,
                ticks,
                cause: Some(format!("timeout: wall-clock budget of {:?} exhausted", limits.wall_clock)),
            };
        }
        let rec = tree.tick(ctx, skills);
        log::debug!("{rec}");
        let root = rec.root;
        let note = rec.note.clone();
        ticks.push(rec);
        if root != TickStatus::Running {
            return RunOutcome {
                status: root,
                ticks,
                cause: if root == TickStatus::Failure { note } else { None },
            };
        }
    }
}

/// Flags a robot whose net displacement over the last `window` poses stays
/// below `eps_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StallMonitor {
    window: usize,
    eps_m: f64,
    history: VecDeque<EnuPoint>,
}

impl Default for StallMonitor {
    fn default() -> Self {
        StallMonitor::new(10, 0.2)
    }
}

impl StallMonitor {
    pub fn new(window: usize, eps_m: f64) -> Self {
        StallMonitor {
            window: window.max(2),
            eps_m,
            history: VecDeque::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn push(&mut self, pose: EnuPoint) {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(pose);
    }

    pub fn is_stalled(&self) -> bool {
        match (self.history.front(), self.history.back()) {
            (Some(a), Some(b)) if self.history.len() == self.window => a.distance(*b) < self.eps_m,
            _ => false,
        }
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }
}

/// Key-value store shared by skills.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Blackboard {
    entries: BTreeMap<String, serde_json::Value>,
}

impl Blackboard {
    pub fn set(&mut self, key: &str, value: serde_json::Value) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&serde_json::Value> {
        self.entries.get(key)
    }

    pub fn remove(&mut self, key: &str) -> Option<serde_json::Value> {
        self.entries.remove(key)
    }
}
