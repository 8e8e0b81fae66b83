//! Mission plans, behavior-tree synthesis, XML exchange and the tick engine.

mod engine;
mod node;
mod plan;

use thiserror::Error;

pub use engine::{
    format_path, run_tree, ActionCall, BehaviorTree, Blackboard, RunLimits, RunOutcome, Skill, SkillPool,
    SkillRegistry, StallMonitor, TickRecord, TickStatus,
};
pub use node::{parse_bt, serialize_bt, BtNode};
pub use plan::{
    build_bt, parse_mission, MissionPlan, Subtask, EXPLORATION, FOLLOW_PATH, GLOBAL_PLANNING, REPLAN,
};

#[derive(Debug, Error)]
pub enum BtError {
    #[error("mission plan is empty")]
    EmptyPlan,
    #[error("subtask {index} explores before any navigation step")]
    ExploreWithoutNav { index: usize },
    #[error("invalid mission plan: {0}")]
    InvalidPlan(String),
    #[error("unrecognized instruction {input:?}; {hint}")]
    UnrecognizedInstruction { input: String, hint: String },
    #[error("skill {0} is not in the skill pool")]
    MissingSkill(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("behavior-tree XML error at {line}:{column}: {message}")]
    Schema { line: usize, column: usize, message: String },
}
