pub mod bt;
pub mod campus;
pub mod error;
pub mod eval;
pub mod geodesy;
pub mod geometry;
pub mod kb;
pub mod mission;
pub mod tokenize;
pub mod retrieval;
pub mod routing;
pub mod sim;
mod xmlpos;

pub use error::Error;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/knowledge-base.md")]
    pub struct KnowledgeBase;
    #[doc = include_str!("../../../book/src/retrieval.md")]
    pub struct Retrieval;
    #[doc = include_str!("../../../book/src/geodesy.md")]
    pub struct Geodesy;
    #[doc = include_str!("../../../book/src/routing.md")]
    pub struct Routing;
    #[doc = include_str!("../../../book/src/behavior-trees.md")]
    pub struct BehaviorTrees;
    #[doc = include_str!("../../../book/src/missions.md")]
    pub struct Missions;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
