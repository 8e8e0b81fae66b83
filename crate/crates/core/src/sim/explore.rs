use serde::{Deserialize, Serialize};

use super::frontier::{dbscan, extract_frontiers, select_frontier, semantic_goal, Frontier};
use super::grid::{CellIdx, OccupancyGrid, SemanticGrid};
use super::world::{SimConfig, SimWorld};
use crate::bt::TickStatus;
use crate::geodesy::EnuPoint;
use crate::geometry::{BufferedPolygon, Polygon};

/// Why an exploration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreEnd {
    /// Arrived at the semantic goal within the success radius of the target.
    Reached,
    /// Arrived at the semantic goal but too far from any target.
    Missed,
    /// No reachable frontier remains inside the search region.
    Exhausted,
    /// The semantic goal could not be reached over known free space.
    GoalUnreachable,
    Timeout,
}

impl std::fmt::Display for ExploreEnd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExploreEnd::Reached => "reached",
            ExploreEnd::Missed => "missed",
            ExploreEnd::Exhausted => "exhausted",
            ExploreEnd::GoalUnreachable => "goal_unreachable",
            ExploreEnd::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreOutcome {
    pub status: TickStatus,
    pub end: ExploreEnd,
    pub frontier_visits: usize,
    pub steps: u64,
    pub goal: Option<EnuPoint>,
    pub final_pose: EnuPoint,
    /// Distance from the final pose to the nearest true target cell.
    pub target_distance_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Phase {
    Scan,
    Select,
    ToFrontier(Vec<CellIdx>),
    ToGoal(Vec<CellIdx>),
}

/// Tick-driven last-mile search: 360° scan, frontier exploration inside the
/// buffered target polygon, then navigation to the dominant detection.
#[derive(Debug, Clone)]
pub struct Explorer {
    query: String,
    region: BufferedPolygon,
    cfg: SimConfig,
    known: OccupancyGrid,
    semantic: SemanticGrid,
    phase: Phase,
    frontier_visits: usize,
    selected: Vec<CellIdx>,
    steps: u64,
    goal: Option<EnuPoint>,
    outcome: Option<ExploreOutcome>,
}

impl Explorer {
    pub fn new(world: &SimWorld, query: &str, polygon: Polygon, cfg: SimConfig) -> Self {
        let g = *world.geometry();
        Explorer {
            query: query.to_string(),
            region: BufferedPolygon::new(polygon, cfg.polygon_buffer_m),
            cfg,
            known: OccupancyGrid::new(g),
            semantic: SemanticGrid::new(g),
            phase: Phase::Scan,
            frontier_visits: 0,
            selected: Vec::new(),
            steps: 0,
            goal: None,
            outcome: None,
        }
    }

    pub fn known(&self) -> &OccupancyGrid {
        &self.known
    }

    pub fn semantic(&self) -> &SemanticGrid {
        &self.semantic
    }

    pub fn region(&self) -> &BufferedPolygon {
        &self.region
    }

    pub fn frontier_visits(&self) -> usize {
        self.frontier_visits
    }

    /// Every frontier cell chosen so far, in order.
    pub fn selected_frontiers(&self) -> &[CellIdx] {
        &self.selected
    }

    pub fn outcome(&self) -> Option<&ExploreOutcome> {
        self.outcome.as_ref()
    }

    fn finish(&mut self, world: &SimWorld, end: ExploreEnd) -> TickStatus {
        let pose = world.robot().pose;
        let target_distance_m = world.distance_to_target(pose);
        let (status, end) = match end {
            ExploreEnd::Reached | ExploreEnd::Missed => {
                if target_distance_m.is_some_and(|d| d <= self.cfg.success_radius_m) {
                    (TickStatus::Success, ExploreEnd::Reached)
                } else {
                    (TickStatus::Failure, ExploreEnd::Missed)
                }
            }
            other => (TickStatus::Failure, other),
        };
        self.outcome = Some(ExploreOutcome {
            status,
            end,
            frontier_visits: self.frontier_visits,
            steps: self.steps,
            goal: self.goal,
            final_pose: pose,
            target_distance_m,
        });
        status
    }

    /// Detection check: dominant cluster of above-threshold cells, if any.
    fn detect(&mut self, world: &SimWorld) -> Option<Vec<CellIdx>> {
        let hot = self.semantic.above(self.cfg.sim_threshold);
        if hot.is_empty() {
            return None;
        }
        let clusters = dbscan(&hot, self.cfg.dbscan_eps_cells, self.cfg.dbscan_min_pts);
        let goal = semantic_goal(&clusters, &self.semantic, &self.known)?;
        let goal_cell = world.geometry().cell_of(goal)?;
        let path = self.known.bfs_path(world.robot_cell(), goal_cell)?;
        self.goal = Some(goal);
        Some(path)
    }

    fn sense(&mut self, world: &mut SimWorld, fov: f64) {
        world.sense(fov, &self.cfg, &self.query, &mut self.known, &mut self.semantic);
    }

    /// Advances by one action: a scan, a frontier selection, or one cell of
    /// motion. Returns Running until the search ends.
    pub fn step(&mut self, world: &mut SimWorld) -> TickStatus {
        if let Some(o) = &self.outcome {
            return o.status;
        }
        if self.steps >= self.cfg.max_steps {
            return self.finish(world, ExploreEnd::Timeout);
        }
        self.steps += 1;
        match std::mem::replace(&mut self.phase, Phase::Select) {
            Phase::Scan => {
                let fov = self.cfg.scan_fov_deg;
                self.sense(world, fov);
                self.phase = match self.detect(world) {
                    Some(path) => Phase::ToGoal(path),
                    None => Phase::Select,
                };
                TickStatus::Running
            }
            Phase::Select => {
                let frontiers = extract_frontiers(&self.known);
                match select_frontier(&frontiers, &self.region, &self.known, world.robot_cell()) {
                    None => self.finish(world, ExploreEnd::Exhausted),
                    Some(f) => {
                        self.frontier_visits += 1;
                        self.selected.push(f.cell);
                        log::debug!("frontier {} at {:?}", self.frontier_visits, f.cell);
                        let path = self
                            .known
                            .bfs_path(world.robot_cell(), f.cell)
                            .expect("selected frontiers are reachable");
                        self.phase = Phase::ToFrontier(path);
                        TickStatus::Running
                    }
                }
            }
            Phase::ToFrontier(path) => {
                let Some(rest) = self.advance(world, path) else {
                    // arrived: look around before choosing the next frontier
                    self.phase = Phase::Scan;
                    return TickStatus::Running;
                };
                let fov = self.cfg.move_fov_deg;
                self.sense(world, fov);
                self.phase = match self.detect(world) {
                    Some(goal_path) => Phase::ToGoal(goal_path),
                    None => Phase::ToFrontier(rest),
                };
                TickStatus::Running
            }
            Phase::ToGoal(path) => match self.advance(world, path) {
                None => self.finish(world, ExploreEnd::Reached),
                Some(rest) => {
                    let fov = self.cfg.move_fov_deg;
                    self.sense(world, fov);
                    self.phase = Phase::ToGoal(rest);
                    TickStatus::Running
                }
            },
        }
    }

    /// Moves one cell along `path` (which starts at the robot cell). Returns
    /// the remaining path, or `None` when already at its end.
    fn advance(&mut self, world: &mut SimWorld, path: Vec<CellIdx>) -> Option<Vec<CellIdx>> {
        if path.len() <= 1 {
            return None;
        }
        if world.step_to(path[1]).is_err() {
            // the path crossed a cell that is no longer free; stay put
            world.wait();
            return Some(path);
        }
        Some(path[1..].to_vec())
    }
}

/// Result of the in-place scan that opens a last-mile search.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub target_found: bool,
    pub frontiers: Vec<Frontier>,
}

/// One full-rotation sense; `target_found` when any fused score reaches the
/// threshold.
pub fn initial_scan(
    world: &mut SimWorld,
    query: &str,
    cfg: &SimConfig,
    known: &mut OccupancyGrid,
    semantic: &mut SemanticGrid,
) -> ScanOutcome {
    world.sense(cfg.scan_fov_deg, cfg, query, known, semantic);
    ScanOutcome {
        target_found: !semantic.above(cfg.sim_threshold).is_empty(),
        frontiers: extract_frontiers(known),
    }
}

/// Runs an [`Explorer`] to completion from the robot's current pose.
pub fn explore_last_mile(world: &mut SimWorld, query: &str, polygon: Polygon, cfg: SimConfig) -> ExploreOutcome {
    let mut ex = Explorer::new(world, query, polygon, cfg);
    while ex.step(world) == TickStatus::Running {}
    ex.outcome.expect("finished explorers carry an outcome")
}

/// Outcome of one follower step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FollowStep {
    Moved,
    Arrived,
    /// The next leg has no free path right now; the robot did not move.
    Blocked,
}

/// Cell-by-cell waypoint follower using windowed BFS between waypoints.
#[derive(Debug, Clone)]
pub struct Follower {
    waypoints: Vec<EnuPoint>,
    tolerance_m: f64,
    next: usize,
    leg: Vec<CellIdx>,
    margin_cells: usize,
    snap_radius_m: f64,
}

impl Follower {
    pub fn new(waypoints: Vec<EnuPoint>, tolerance_m: f64) -> Self {
        Follower {
            waypoints,
            tolerance_m,
            next: 0,
            leg: Vec::new(),
            margin_cells: 10,
            snap_radius_m: 2.0,
        }
    }

    pub fn remaining(&self) -> &[EnuPoint] {
        &self.waypoints[self.next.min(self.waypoints.len())..]
    }

    fn goal_cell(&self, world: &SimWorld, w: EnuPoint) -> Option<CellIdx> {
        let g = world.geometry();
        let c = g.cell_of(w)?;
        if world.truth().is_free(c) {
            return Some(c);
        }
        world.truth().nearest_free(c, self.snap_radius_m / g.resolution_m)
    }

    fn plan_leg(&self, world: &SimWorld, goal: CellIdx) -> Option<Vec<CellIdx>> {
        let start = world.robot_cell();
        let g = world.geometry();
        let m = self.margin_cells;
        let lo = CellIdx::new(start.row.min(goal.row).saturating_sub(m), start.col.min(goal.col).saturating_sub(m));
        let hi = CellIdx::new(
            (start.row.max(goal.row) + m).min(g.height - 1),
            (start.col.max(goal.col) + m).min(g.width - 1),
        );
        world.truth().bfs_path_within(start, goal, Some((lo, hi)))
    }

    pub fn step(&mut self, world: &mut SimWorld) -> FollowStep {
        loop {
            let Some(&last) = self.waypoints.last() else {
                return FollowStep::Arrived;
            };
            if world.robot().pose.distance(last) <= self.tolerance_m {
                self.next = self.waypoints.len();
                return FollowStep::Arrived;
            }
            if self.next >= self.waypoints.len() {
                // past the last waypoint but outside tolerance
                return FollowStep::Blocked;
            }
            if self.leg.len() > 1 && world.truth().is_free(self.leg[1]) {
                let c = self.leg.remove(1);
                self.leg[0] = c;
                world.step_to(c).expect("leg cells are free neighbors");
                return FollowStep::Moved;
            }
            let Some(goal) = self.goal_cell(world, self.waypoints[self.next]) else {
                world.wait();
                return FollowStep::Blocked;
            };
            if goal == world.robot_cell() {
                if self.next + 1 == self.waypoints.len() {
                    // final waypoint reached, possibly after snapping
                    self.next = self.waypoints.len();
                    return FollowStep::Arrived;
                }
                self.next += 1;
                self.leg.clear();
                continue;
            }
            match self.plan_leg(world, goal) {
                Some(path) => self.leg = path,
                None => {
                    self.leg.clear();
                    world.wait();
                    return FollowStep::Blocked;
                }
            }
        }
    }
}

/// Follows `waypoints` to completion: Success within `tolerance_m` of the
/// last one, Failure as soon as a leg is unreachable.
pub fn follow_waypoints(world: &mut SimWorld, waypoints: &[EnuPoint], tolerance_m: f64, max_steps: u64) -> TickStatus {
    let mut f = Follower::new(waypoints.to_vec(), tolerance_m);
    for _ in 0..max_steps {
        match f.step(world) {
            FollowStep::Arrived => return TickStatus::Success,
            FollowStep::Blocked => return TickStatus::Failure,
            FollowStep::Moved => {}
        }
    }
    TickStatus::Failure
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::world::WorldObject;

    fn world(rows: &[&str], robot: (f64, f64), objects: Vec<WorldObject>, polygon: Option<[(f64, f64); 2]>) -> SimWorld {
        let side = serde_json::json!({
            "resolution": 1.0,
            "origin": [0.0, 0.0],
            "seed": 11,
            "robot": {"x": robot.0, "y": robot.1},
            "object_query": "red jacket",
            "objects": objects,
            "target_polygon": polygon.map(|[a, b]| vec![[a.0, a.1], [b.0, a.1], [b.0, b.1], [a.0, b.1]]),
        });
        SimWorld::from_fixture(&rows.join("\n"), &side.to_string()).unwrap()
    }

    fn target(cells: &[(usize, usize)]) -> WorldObject {
        WorldObject {
            label: "person in a red jacket".into(),
            cells: cells.iter().map(|&(r, c)| CellIdx::new(r, c)).collect(),
            quality: 0.9,
            target: true,
        }
    }

    fn small_cfg() -> SimConfig {
        SimConfig {
            polygon_buffer_m: 0.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn visible_target_needs_no_frontiers() {
        let rows = vec![".........."; 10];
        let mut w = world(&rows, (1.5, 1.5), vec![target(&[(6, 6), (6, 7), (7, 6), (7, 7)])], None);
        let poly = Polygon::rectangle(EnuPoint::ORIGIN, EnuPoint::new(10.0, 10.0)).unwrap();
        let out = explore_last_mile(&mut w, "red jacket", poly, small_cfg());
        assert_eq!(out.status, TickStatus::Success, "{out:?}");
        assert_eq!(out.frontier_visits, 0);
        assert!(out.target_distance_m.unwrap() <= 2.0);
    }

    /// Two rooms joined by a single doorway; the target sits in the far
    /// room out of sight of the start.
    fn occluded() -> SimWorld {
        let rows = [
            "##########",
            "#........#",
            "#........#",
            "#........#",
            "#........#",
            "######.###",
            "#........#",
            "#........#",
            "#........#",
            "##########",
        ];
        world(&rows, (1.5, 1.5), vec![target(&[(6, 5), (6, 6), (7, 5), (7, 6)])], Some([(0.0, 0.0), (10.0, 10.0)]))
    }

    #[test]
    fn occluded_target_takes_one_frontier() {
        let mut w = occluded();
        let poly = w.target_polygon().unwrap().clone();
        let out = explore_last_mile(&mut w, "red jacket", poly, small_cfg());
        assert_eq!(out.status, TickStatus::Success, "{out:?}");
        assert_eq!(out.frontier_visits, 1);
    }

    #[test]
    fn missing_target_exhausts_the_region() {
        let rows = vec!["...................."; 20];
        let mut w = world(&rows, (10.5, 10.5), vec![], None);
        let poly = Polygon::rectangle(EnuPoint::new(5.0, 5.0), EnuPoint::new(15.0, 15.0)).unwrap();
        let cfg = SimConfig {
            range_m: 3.0,
            ..small_cfg()
        };
        let out = explore_last_mile(&mut w, "red jacket", poly.clone(), cfg);
        assert_eq!(out.end, ExploreEnd::Exhausted);
        assert_eq!(out.status, TickStatus::Failure);
        assert!(out.frontier_visits >= 1);
    }

    #[test]
    fn exploration_is_deterministic() {
        let run = || {
            let mut w = occluded();
            let poly = w.target_polygon().unwrap().clone();
            let cfg = SimConfig {
                range_m: 3.0,
                ..small_cfg()
            };
            let out = explore_last_mile(&mut w, "red jacket", poly, cfg);
            (out, w.trajectory_csv())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn step_limit_times_out() {
        let mut w = occluded();
        let poly = w.target_polygon().unwrap().clone();
        let cfg = SimConfig {
            max_steps: 2,
            range_m: 3.0,
            ..small_cfg()
        };
        assert_eq!(explore_last_mile(&mut w, "red jacket", poly, cfg).end, ExploreEnd::Timeout);
    }

    #[test]
    fn follower_examples() {
        let rows = ["...................."];
        let mut w = world(&rows, (0.5, 0.5), vec![], None);
        let wps = [EnuPoint::new(5.5, 0.5), EnuPoint::new(12.5, 0.5), EnuPoint::new(19.5, 0.5)];
        assert_eq!(follow_waypoints(&mut w, &wps, 0.1, 100), TickStatus::Success);
        assert!((w.robot().path_length_m - 19.0).abs() <= 1.0);
        assert_eq!(follow_waypoints(&mut w, &[], 0.5, 10), TickStatus::Success);

        let rows = [".......#...", ".......#...", ".......#..."];
        let mut w = world(&rows, (0.5, 0.5), vec![], None);
        assert_eq!(follow_waypoints(&mut w, &[EnuPoint::new(9.5, 1.5)], 0.5, 100), TickStatus::Failure);
        // a waypoint inside the wall snaps to a free cell nearby
        let mut w = world(&rows, (0.5, 0.5), vec![], None);
        assert_eq!(follow_waypoints(&mut w, &[EnuPoint::new(7.5, 1.5)], 0.1, 100), TickStatus::Success);
        assert!(w.robot().pose.distance(EnuPoint::new(7.5, 1.5)) <= 2.0);
        // nothing free within 2 m of the final waypoint
        let rows = [".....#######", ".....#######", ".....#######", ".....#######", ".....#######"];
        let mut w = world(&rows, (0.5, 0.5), vec![], None);
        assert_eq!(follow_waypoints(&mut w, &[EnuPoint::new(10.5, 2.5)], 0.5, 100), TickStatus::Failure);
    }

    #[test]
    fn initial_scan_examples() {
        let cfg = small_cfg();
        let scan = |w: &mut SimWorld| {
            let mut known = OccupancyGrid::new(*w.geometry());
            let mut semantic = SemanticGrid::new(*w.geometry());
            initial_scan(w, "red jacket", &cfg, &mut known, &mut semantic)
        };
        let rows = vec![".........."; 10];
        let mut w = world(&rows, (1.5, 1.5), vec![target(&[(6, 6), (6, 7), (7, 6), (7, 7)])], None);
        assert!(scan(&mut w).target_found);

        let out = scan(&mut occluded());
        assert!(!out.target_found);
        assert!(!out.frontiers.is_empty());

        let rows = ["#####", "#...#", "#...#", "#...#", "#####"];
        let mut w = world(&rows, (2.5, 2.5), vec![], None);
        let out = scan(&mut w);
        assert!(!out.target_found && out.frontiers.is_empty());
    }

    #[test]
    fn blocked_follower_waits_in_place() {
        let rows = ["..........", ".........."];
        let mut w = world(&rows, (0.5, 0.5), vec![], None);
        let mut f = Follower::new(vec![EnuPoint::new(9.5, 0.5)], 0.1);
        assert_eq!(f.step(&mut w), FollowStep::Moved);
        w.set_occupied(CellIdx::new(0, 5), true).unwrap();
        w.set_occupied(CellIdx::new(1, 5), true).unwrap();
        let here = w.robot().pose;
        let mut steps = Vec::new();
        for _ in 0..10 {
            steps.push(f.step(&mut w));
        }
        assert!(steps.contains(&FollowStep::Blocked));
        assert!(w.robot().pose.x < 5.0 && w.robot().pose.distance(here) <= 4.0);
    }
}
