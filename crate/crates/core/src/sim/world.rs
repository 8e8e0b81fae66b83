use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grid::{CellIdx, CellState, GridGeometry, OccupancyGrid, SemanticGrid};
use super::SimError;
use crate::geodesy::{normalize_angle, EnuPoint};
use crate::geometry::Polygon;

/// Simulation and exploration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub scan_fov_deg: f64,
    pub move_fov_deg: f64,
    pub range_m: f64,
    pub sigma_s: f64,
    pub background_max: f64,
    pub sim_threshold: f64,
    pub dbscan_eps_cells: f64,
    pub dbscan_min_pts: usize,
    pub polygon_buffer_m: f64,
    pub success_radius_m: f64,
    pub max_steps: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scan_fov_deg: 360.0,
            move_fov_deg: 90.0,
            range_m: 12.0,
            sigma_s: 0.05,
            background_max: 0.2,
            sim_threshold: 0.6,
            dbscan_eps_cells: 2.0,
            dbscan_min_pts: 4,
            polygon_buffer_m: 5.0,
            success_radius_m: 2.0,
            max_steps: 5_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.scan_fov_deg > 0.0
            && self.scan_fov_deg <= 360.0
            && self.move_fov_deg > 0.0
            && self.move_fov_deg <= 360.0
            && self.range_m > 0.0
            && self.sigma_s >= 0.0
            && (0.0..=1.0).contains(&self.background_max)
            && (0.0..=1.0).contains(&self.sim_threshold)
            && self.dbscan_eps_cells > 0.0
            && self.dbscan_min_pts >= 1
            && self.polygon_buffer_m >= 0.0
            && self.success_radius_m > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// Object placed in the world. `quality` is its similarity to the world's
/// object query; objects never block motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldObject {
    pub label: String,
    pub cells: Vec<CellIdx>,
    pub quality: f64,
    #[serde(default)]
    pub target: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: EnuPoint,
    pub heading: f64,
    pub path_length_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub tick: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotSpec {
    x: f64,
    y: f64,
    #[serde(default)]
    heading: f64,
}

/// JSON sidecar of a world fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSidecar {
    pub resolution: f64,
    pub origin: [f64; 2],
    pub seed: u64,
    robot: RobotSpec,
    pub object_query: String,
    #[serde(default)]
    pub objects: Vec<WorldObject>,
    #[serde(default)]
    pub target_polygon: Option<Vec<[f64; 2]>>,
}

/// Ground-truth world: static occupancy, objects, robot and seeded noise.
#[derive(Debug, Clone)]
pub struct SimWorld {
    truth: OccupancyGrid,
    objects: Vec<WorldObject>,
    object_query: String,
    target_polygon: Option<Polygon>,
    robot: RobotState,
    seed: u64,
    rng: ChaCha8Rng,
    tick: u64,
    trajectory: Vec<PoseSample>,
}

/// Lowercased words with articles removed.
fn query_words(q: &str) -> Vec<String> {
    q.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !matches!(w.as_str(), "a" | "an" | "the"))
        .collect()
}

pub fn query_matches(a: &str, b: &str) -> bool {
    let wa = query_words(a);
    !wa.is_empty() && wa == query_words(b)
}

impl SimWorld {
    /// World over a fully known `truth` grid. The robot is snapped to the
    /// center of its cell, which must be Free.
    pub fn new(
        truth: OccupancyGrid,
        objects: Vec<WorldObject>,
        object_query: &str,
        target_polygon: Option<Polygon>,
        robot_pose: EnuPoint,
        robot_heading: f64,
        seed: u64,
    ) -> Result<Self, SimError> {
        if truth.count(CellState::Unknown) > 0 {
            return Err(SimError::Fixture {
                line: 0,
                message: "ground truth may not contain Unknown cells".into(),
            });
        }
        for o in &objects {
            if !(0.0..=1.0).contains(&o.quality) {
                return Err(SimError::Fixture {
                    line: 0,
                    message: format!("object {:?} has quality outside [0, 1]", o.label),
                });
            }
            if let Some(c) = o.cells.iter().find(|c| !truth.geometry().contains(**c)) {
                return Err(SimError::Fixture {
                    line: 0,
                    message: format!("object {:?} cell {:?} is outside the grid", o.label, c),
                });
            }
        }
        let cell = truth.geometry().cell_of(robot_pose).ok_or(SimError::RobotBlocked {
            x: robot_pose.x,
            y: robot_pose.y,
        })?;
        if !truth.is_free(cell) {
            return Err(SimError::RobotBlocked {
                x: robot_pose.x,
                y: robot_pose.y,
            });
        }
        let pose = truth.geometry().center(cell);
        let mut w = SimWorld {
            truth,
            objects,
            object_query: object_query.to_string(),
            target_polygon,
            robot: RobotState {
                pose,
                heading: normalize_angle(robot_heading),
                path_length_m: 0.0,
            },
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            tick: 0,
            trajectory: Vec::new(),
        };
        w.record();
        Ok(w)
    }

    /// Parses a text grid (`#` occupied, `.` free, first line northmost)
    /// with its JSON sidecar.
    pub fn from_fixture(grid_text: &str, sidecar_json: &str) -> Result<Self, SimError> {
        let side: WorldSidecar = serde_json::from_str(sidecar_json).map_err(|e| SimError::Fixture {
            line: e.line(),
            message: format!("sidecar: {e}"),
        })?;
        let rows: Vec<&str> = grid_text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let width = rows.first().map_or(0, |r| r.chars().count());
        if width == 0 {
            return Err(SimError::Fixture {
                line: 1,
                message: "empty grid".into(),
            });
        }
        if !(side.resolution > 0.0 && side.resolution.is_finite()) {
            return Err(SimError::Fixture {
                line: 0,
                message: "resolution must be positive".into(),
            });
        }
        let geometry = GridGeometry {
            width,
            height: rows.len(),
            resolution_m: side.resolution,
            origin: EnuPoint::new(side.origin[0], side.origin[1]),
        };
        let mut truth = OccupancyGrid::new(geometry);
        for (i, line) in rows.iter().enumerate() {
            if line.chars().count() != width {
                return Err(SimError::Fixture {
                    line: i + 1,
                    message: format!("expected {width} columns, found {}", line.chars().count()),
                });
            }
            let row = rows.len() - 1 - i;
            for (col, ch) in line.chars().enumerate() {
                let s = match ch {
                    '#' => CellState::Occupied,
                    '.' => CellState::Free,
                    other => {
                        return Err(SimError::Fixture {
                            line: i + 1,
                            message: format!("unexpected character {other:?} in column {}", col + 1),
                        })
                    }
                };
                truth.set(CellIdx::new(row, col), s);
            }
        }
        let polygon = side
            .target_polygon
            .map(|v| Polygon::new(v.into_iter().map(|[x, y]| EnuPoint::new(x, y)).collect()))
            .transpose()?;
        SimWorld::new(
            truth,
            side.objects,
            &side.object_query,
            polygon,
            EnuPoint::new(side.robot.x, side.robot.y),
            side.robot.heading,
            side.seed,
        )
    }

    /// Loads `<stem>.txt` and `<stem>.json`.
    pub fn load_fixture(stem: &Path) -> Result<Self, SimError> {
        let grid = std::fs::read_to_string(stem.with_extension("txt"))?;
        let side = std::fs::read_to_string(stem.with_extension("json"))?;
        Self::from_fixture(&grid, &side)
    }

    /// Text grid and sidecar reproducing this world's initial state.
    pub fn to_fixture(&self) -> (String, String) {
        let g = self.truth.geometry();
        let mut text = String::with_capacity((g.width + 1) * g.height);
        for row in (0..g.height).rev() {
            for col in 0..g.width {
                text.push(if self.truth.is_free(CellIdx::new(row, col)) { '.' } else { '#' });
            }
            text.push('\n');
        }
        let first = self.trajectory.first().copied();
        let side = WorldSidecar {
            resolution: g.resolution_m,
            origin: [g.origin.x, g.origin.y],
            seed: self.seed,
            robot: RobotSpec {
                x: first.map_or(self.robot.pose.x, |s| s.x),
                y: first.map_or(self.robot.pose.y, |s| s.y),
                heading: first.map_or(self.robot.heading, |s| s.heading),
            },
            object_query: self.object_query.clone(),
            objects: self.objects.clone(),
            target_polygon: self
                .target_polygon
                .as_ref()
                .map(|p| p.vertices().iter().map(|v| [v.x, v.y]).collect()),
        };
        (text, serde_json::to_string_pretty(&side).expect("sidecar serializes"))
    }

    pub fn truth(&self) -> &OccupancyGrid {
        &self.truth
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.truth.geometry()
    }

    pub fn objects(&self) -> &[WorldObject] {
        &self.objects
    }

    pub fn object_query(&self) -> &str {
        &self.object_query
    }

    pub fn target_polygon(&self) -> Option<&Polygon> {
        self.target_polygon.as_ref()
    }

    pub fn set_target_polygon(&mut self, polygon: Option<Polygon>) {
        self.target_polygon = polygon;
    }

    pub fn add_object(&mut self, object: WorldObject) {
        self.objects.push(object);
    }

    pub fn clear_objects(&mut self) {
        self.objects.clear();
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn robot_cell(&self) -> CellIdx {
        self.geometry().cell_of(self.robot.pose).expect("robot stays on the grid")
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn trajectory(&self) -> &[PoseSample] {
        &self.trajectory
    }

    /// Toggles a ground-truth cell; the robot's own cell cannot be blocked.
    pub fn set_occupied(&mut self, c: CellIdx, occupied: bool) -> Result<(), SimError> {
        if occupied && c == self.robot_cell() {
            return Err(SimError::RobotBlocked {
                x: self.robot.pose.x,
                y: self.robot.pose.y,
            });
        }
        self.truth.set(c, if occupied { CellState::Occupied } else { CellState::Free });
        Ok(())
    }

    /// Places the robot at the center of a Free cell without adding path
    /// length.
    pub fn teleport(&mut self, c: CellIdx, heading: f64) -> Result<(), SimError> {
        if !self.truth.is_free(c) {
            let p = self.geometry().center(c);
            return Err(SimError::RobotBlocked { x: p.x, y: p.y });
        }
        self.robot.pose = self.geometry().center(c);
        self.robot.heading = normalize_angle(heading);
        self.record();
        Ok(())
    }

    /// Moves one cell to a Free 4-neighbor, advancing the clock.
    pub fn step_to(&mut self, c: CellIdx) -> Result<(), SimError> {
        let here = self.robot_cell();
        let adjacent = self.geometry().neighbors4(here).any(|n| n == c);
        if !adjacent || !self.truth.is_free(c) {
            let p = self.geometry().center(c);
            return Err(SimError::RobotBlocked { x: p.x, y: p.y });
        }
        let next = self.geometry().center(c);
        self.robot.heading = (next - self.robot.pose).heading();
        self.robot.path_length_m += self.robot.pose.distance(next);
        self.robot.pose = next;
        self.tick += 1;
        self.record();
        Ok(())
    }

    /// Advances the clock without moving.
    pub fn wait(&mut self) {
        self.tick += 1;
        self.record();
    }

    fn record(&mut self) {
        self.trajectory.push(PoseSample {
            tick: self.tick,
            x: self.robot.pose.x,
            y: self.robot.pose.y,
            heading: self.robot.heading,
        });
    }

    /// Cells of objects flagged as the ground-truth target.
    pub fn target_cells(&self) -> Vec<CellIdx> {
        self.objects.iter().filter(|o| o.target).flat_map(|o| o.cells.iter().copied()).collect()
    }

    /// Distance from `p` to the nearest target cell center.
    pub fn distance_to_target(&self, p: EnuPoint) -> Option<f64> {
        self.target_cells()
            .into_iter()
            .map(|c| self.geometry().center(c).distance(p))
            .min_by(f64::total_cmp)
    }

    /// Casts rays at 1° steps across `fov_deg` centered on the robot
    /// heading, revealing cells up to the first obstacle and recording one
    /// semantic observation per revealed cell.
    pub fn sense(&mut self, fov_deg: f64, cfg: &SimConfig, query: &str, known: &mut OccupancyGrid, semantic: &mut SemanticGrid) {
        let g = *self.geometry();
        let origin = self.robot.pose;
        let mut seen = BTreeSet::new();
        let here = self.robot_cell();
        seen.insert(here);
        known.set(here, CellState::Free);
        let rays = fov_deg.round().max(1.0) as i64;
        let full = rays >= 360;
        for k in 0..rays.min(360) {
            let offset = if full { k as f64 } else { k as f64 - (rays - 1) as f64 / 2.0 };
            let theta = self.robot.heading + offset.to_radians();
            for c in cast_ray(&g, origin, theta, cfg.range_m) {
                let occupied = !self.truth.is_free(c);
                known.set(c, if occupied { CellState::Occupied } else { CellState::Free });
                seen.insert(c);
                if occupied {
                    break;
                }
            }
        }
        let active = query_matches(query, &self.object_query);
        for c in seen {
            let score = self.draw_score(c, active, cfg);
            semantic.observe(c, score);
        }
    }

    fn draw_score(&mut self, c: CellIdx, active: bool, cfg: &SimConfig) -> f64 {
        let object = if active {
            self.objects.iter().filter(|o| o.cells.contains(&c)).map(|o| (o.quality, o.target)).reduce(
                |a, b| if b.0 > a.0 { b } else { a },
            )
        } else {
            None
        };
        match object {
            Some((q, true)) => {
                let n = Normal::new(q, cfg.sigma_s.max(f64::MIN_POSITIVE)).expect("finite sigma");
                n.sample(&mut self.rng).clamp(0.0, 1.0)
            }
            Some((q, false)) => (q + self.rng.random_range(-1.0..=1.0) * cfg.sigma_s).clamp(0.0, 1.0),
            None => self.rng.random_range(0.0..=cfg.background_max),
        }
    }

    /// `tick,x,y,heading` rows.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("tick,x,y,heading\n");
        for s in &self.trajectory {
            let _ = writeln!(out, "{},{:.3},{:.3},{:.4}", s.tick, s.x, s.y, s.heading);
        }
        out
    }
}

/// Cells crossed by a ray from `p` (excluding the start cell) until it
/// leaves the grid or exceeds `range_m`, by grid traversal.
pub fn cast_ray(g: &GridGeometry, p: EnuPoint, theta: f64, range_m: f64) -> Vec<CellIdx> {
    let res = g.resolution_m;
    let (dx, dy) = (theta.cos(), theta.sin());
    let x0 = (p.x - g.origin.x) / res;
    let y0 = (p.y - g.origin.y) / res;
    let mut cx = x0.floor() as i64;
    let mut cy = y0.floor() as i64;
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let t_delta_x = if dx.abs() < 1e-12 { f64::INFINITY } else { 1.0 / dx.abs() };
    let t_delta_y = if dy.abs() < 1e-12 { f64::INFINITY } else { 1.0 / dy.abs() };
    let mut t_max_x = if dx.abs() < 1e-12 {
        f64::INFINITY
    } else if dx > 0.0 {
        (cx as f64 + 1.0 - x0) / dx
    } else {
        (x0 - cx as f64) / -dx
    };
    let mut t_max_y = if dy.abs() < 1e-12 {
        f64::INFINITY
    } else if dy > 0.0 {
        (cy as f64 + 1.0 - y0) / dy
    } else {
        (y0 - cy as f64) / -dy
    };
    let limit = range_m / res;
    let mut out = Vec::new();
    loop {
        let t = if t_max_x < t_max_y {
            cx += step_x;
            let t = t_max_x;
            t_max_x += t_delta_x;
            t
        } else {
            cy += step_y;
            let t = t_max_y;
            t_max_y += t_delta_y;
            t
        };
        if t > limit || cx < 0 || cy < 0 || cx >= g.width as i64 || cy >= g.height as i64 {
            return out;
        }
        out.push(CellIdx::new(cy as usize, cx as usize));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn open_world(n: usize, seed: u64) -> SimWorld {
        let grid = vec![".".repeat(n); n].join("\n");
        let side = format!(
            r#"{{"resolution":0.5,"origin":[0,0],"seed":{seed},"robot":{{"x":{c},"y":{c}}},"object_query":"red jacket","objects":[]}}"#,
            c = n as f64 * 0.25 + 0.1
        );
        SimWorld::from_fixture(&grid, &side).unwrap()
    }

    fn maps(w: &SimWorld) -> (OccupancyGrid, SemanticGrid) {
        (OccupancyGrid::new(*w.geometry()), SemanticGrid::new(*w.geometry()))
    }

    #[test]
    fn open_world_is_fully_revealed() {
        let mut w = open_world(10, 1);
        let (mut k, mut s) = maps(&w);
        w.sense(360.0, &SimConfig::default(), "red jacket", &mut k, &mut s);
        assert_eq!(k.count(CellState::Free), 100);
        assert_eq!(k.count(CellState::Occupied), 0);
    }

    #[test]
    fn wall_casts_a_shadow() {
        let grid = "..........\n..........\n..........\n..........\n..........\n...#......\n..........\n..........\n..........\n..........";
        let side = r#"{"resolution":1.0,"origin":[0,0],"seed":3,"robot":{"x":0.5,"y":4.5},"object_query":"x"}"#;
        let mut w = SimWorld::from_fixture(grid, side).unwrap();
        assert_eq!(w.robot_cell(), CellIdx::new(4, 0));
        let (mut k, mut s) = maps(&w);
        w.sense(360.0, &SimConfig::default(), "x", &mut k, &mut s);
        assert_eq!(k.get(CellIdx::new(4, 3)), CellState::Occupied);
        for col in 4..10 {
            assert_eq!(k.get(CellIdx::new(4, col)), CellState::Unknown, "col {col}");
        }
        assert_eq!(k.get(CellIdx::new(0, 9)), CellState::Free);
    }

    #[test]
    fn target_scores_fuse_near_quality() {
        let mut w = open_world(10, 9);
        let c = CellIdx::new(5, 8);
        w.add_object(WorldObject {
            label: "person".into(),
            cells: vec![c],
            quality: 0.9,
            target: true,
        });
        let (mut k, mut s) = maps(&w);
        let cfg = SimConfig::default();
        for _ in 0..5 {
            w.sense(360.0, &cfg, "the red jacket", &mut k, &mut s);
        }
        assert_eq!(s.count(c), 5);
        let f = s.score(c).unwrap();
        assert!((0.8..=1.0).contains(&f), "{f}");
        assert!(s.score(CellIdx::new(0, 0)).unwrap() <= 0.2);
        let (mut k2, mut s2) = maps(&w);
        w.sense(360.0, &cfg, "blue bench", &mut k2, &mut s2);
        assert!(s2.score(c).unwrap() <= 0.2);
    }

    #[test]
    fn fixtures_round_trip_and_reject_garbage() {
        let w = open_world(6, 4);
        let (g, s) = w.to_fixture();
        let w2 = SimWorld::from_fixture(&g, &s).unwrap();
        assert_eq!(w2.truth(), w.truth());
        assert_eq!(w2.robot(), w.robot());
        assert!(matches!(
            SimWorld::from_fixture("..\n.x", &s),
            Err(SimError::Fixture { line: 2, .. })
        ));
        assert!(SimWorld::from_fixture("..\n...", &s).is_err());
        let blocked = r#"{"resolution":1.0,"origin":[0,0],"seed":3,"robot":{"x":0.5,"y":0.5},"object_query":"x"}"#;
        assert!(matches!(SimWorld::from_fixture("..\n#.", blocked), Err(SimError::RobotBlocked { .. })));
    }

    #[test]
    fn motion_accumulates_path_length() {
        let mut w = open_world(6, 2);
        let start = w.robot_cell();
        let next = CellIdx::new(start.row, start.col + 1);
        w.step_to(next).unwrap();
        assert_eq!(w.robot().path_length_m, 0.5);
        assert_eq!(w.robot().heading, 0.0);
        assert!(w.step_to(CellIdx::new(0, 0)).is_err());
        assert_eq!(w.trajectory().len(), 2);
        assert!(w.trajectory_csv().starts_with("tick,x,y,heading\n0,"));
    }

    #[test]
    fn ray_cells_are_contiguous() {
        let g = GridGeometry {
            width: 20,
            height: 20,
            resolution_m: 1.0,
            origin: EnuPoint::ORIGIN,
        };
        for k in 0..360 {
            let cells = cast_ray(&g, EnuPoint::new(10.5, 10.5), (k as f64).to_radians(), 8.0);
            let mut prev = CellIdx::new(10, 10);
            for c in cells {
                assert_eq!((c.row as i64 - prev.row as i64).abs() + (c.col as i64 - prev.col as i64).abs(), 1);
                prev = c;
            }
        }
    }
}
