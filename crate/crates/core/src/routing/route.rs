use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{RoadNetwork, RouteError};
use crate::geodesy::EnuPoint;
use crate::kb::Target;

/// Points closer than this are merged when assembling a route.
const MERGE_EPS_M: f64 = 1e-6;

/// Global route from the exact start to the exact goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRoute {
    pub points: Vec<EnuPoint>,
    pub total_length_m: f64,
    pub goal: EnuPoint,
    /// Network edges the route runs along, snapped edges included.
    pub edges: Vec<usize>,
}

impl GlobalRoute {
    /// Route through `points`, merging near-duplicate consecutive points.
    pub fn from_points(points: &[EnuPoint]) -> Result<Self, RouteError> {
        let mut merged: Vec<EnuPoint> = Vec::with_capacity(points.len());
        for p in points {
            if !p.is_finite() {
                return Err(RouteError::InvalidNetwork("non-finite route point".into()));
            }
            if merged.last().is_none_or(|q| q.distance(*p) > MERGE_EPS_M) {
                merged.push(*p);
            }
        }
        let goal = *points.last().ok_or(RouteError::EmptyRoute)?;
        if let Some(last) = merged.last_mut() {
            *last = goal;
        }
        Ok(GlobalRoute {
            total_length_m: polyline_length(&merged),
            points: merged,
            goal,
            edges: Vec::new(),
        })
    }

    pub fn start(&self) -> EnuPoint {
        self.points[0]
    }
}

pub fn polyline_length(points: &[EnuPoint]) -> f64 {
    points.windows(2).fold(0.0, |acc, w| acc + w[0].distance(w[1]))
}

/// Shortest route between two points, both snapped to the nearest point on
/// the network.
pub fn plan_route(net: &RoadNetwork, start: EnuPoint, goal: EnuPoint) -> Result<GlobalRoute, RouteError> {
    plan_route_avoiding(net, start, goal, &BTreeSet::new())
}

/// [`plan_route`] treating `blocked` edges as impassable.
pub fn plan_route_avoiding(
    net: &RoadNetwork,
    start: EnuPoint,
    goal: EnuPoint,
    blocked: &BTreeSet<usize>,
) -> Result<GlobalRoute, RouteError> {
    if !start.is_finite() || !goal.is_finite() {
        return Err(RouteError::InvalidNetwork("non-finite route endpoint".into()));
    }
    let s = net.snap(start, blocked).ok_or(RouteError::NoEdges)?;
    let g = net.snap(goal, blocked).ok_or(RouteError::NoEdges)?;
    let se = net.edge(s.edge);
    let ge = net.edge(g.edge);
    let sources = [
        (se.a, s.point.distance(net.point(se.a))),
        (se.b, s.point.distance(net.point(se.b))),
    ];
    let sp = net.shortest_paths(&sources, blocked);

    let mut best: Option<(f64, Option<usize>)> = None;
    for end in [ge.a, ge.b] {
        let d = sp.dist[end] + net.point(end).distance(g.point);
        if d.is_finite() && best.is_none_or(|(b, _)| d < b) {
            best = Some((d, Some(end)));
        }
    }
    if s.edge == g.edge {
        let d = s.point.distance(g.point);
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, None));
        }
    }
    let Some((_, via)) = best else {
        let comps = net.components(blocked);
        return Err(RouteError::Unreachable {
            start_component: comps[se.a],
            goal_component: comps[ge.a],
        });
    };

    let mut points = vec![start, s.point];
    let mut edges = vec![s.edge];
    if let Some(end) = via {
        points.extend(sp.path_to(end).into_iter().map(|n| net.point(n)));
        for e in sp.edges_to(end) {
            if edges.last() != Some(&e) {
                edges.push(e);
            }
        }
        if edges.last() != Some(&g.edge) {
            edges.push(g.edge);
        }
    }
    points.push(g.point);
    points.push(goal);
    let mut route = GlobalRoute::from_points(&points)?;
    route.edges = edges;
    Ok(route)
}

/// Goal point for navigation: the nearest contour point for polygons, the
/// point itself otherwise.
pub fn project_goal(target: &Target, robot: EnuPoint) -> EnuPoint {
    target.project_goal(robot)
}
