//! Road-network routing, goal projection and curvature-adaptive sampling.

mod export;
mod network;
mod route;
mod sampling;

use thiserror::Error;

use crate::geodesy::GeoError;

pub use export::{route_to_geojson, waypoints_to_csv};
pub use network::{NetEdge, RoadNetwork, ShortestPaths, Snap};
pub use route::{plan_route, plan_route_avoiding, polyline_length, project_goal, GlobalRoute};
pub use sampling::{
    adaptive_sample, localize_waypoints, segment_curvature, segment_curvature_windowed, SamplerConfig, WaypointList,
};

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("no path: start lies in road component {start_component}, goal in component {goal_component}")]
    Unreachable { start_component: usize, goal_component: usize },
    #[error("the road network has no usable edges")]
    NoEdges,
    #[error("route has no points")]
    EmptyRoute,
    #[error("invalid road network: {0}")]
    InvalidNetwork(String),
    #[error("vertex {index} has a zero-length incident segment")]
    DegenerateSegment { index: usize },
    #[error("curvature needs an interior vertex, got index {index} of {len}")]
    InvalidIndex { index: usize, len: usize },
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
}
