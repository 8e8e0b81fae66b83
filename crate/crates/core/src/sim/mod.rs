//! Deterministic grid world with ray-cast sensing, semantic scoring and the
//! last-mile frontier search.

mod arena;
mod explore;
mod frontier;
mod grid;
mod world;

use thiserror::Error;

use crate::geodesy::GeoError;

pub use arena::{exploration_arena, place_objects_near, ArenaSpec, ARENA_QUERY};
pub use explore::{
    explore_last_mile, follow_waypoints, initial_scan, ExploreEnd, ExploreOutcome, Explorer, FollowStep, Follower,
    ScanOutcome,
};
pub use frontier::{
    dbscan, extract_frontiers, frontier_clusters, is_frontier, select_frontier, semantic_goal, Frontier,
    FrontierCluster,
};
pub use grid::{CellIdx, CellState, GridGeometry, OccupancyGrid, SemanticGrid};
pub use world::{cast_ray, query_matches, PoseSample, RobotState, SimConfig, SimWorld, WorldObject, WorldSidecar};

/// Ray-casting parity test with boundary points inside.
pub use crate::geometry::point_in_polygon;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("world fixture line {line}: {message}")]
    Fixture { line: usize, message: String },
    #[error("robot cannot occupy ({x:.2}, {y:.2})")]
    RobotBlocked { x: f64, y: f64 },
    #[error("invalid sim config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
