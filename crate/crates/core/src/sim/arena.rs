use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::{CellIdx, CellState, GridGeometry, OccupancyGrid};
use super::world::{SimWorld, WorldObject};
use super::SimError;
use crate::geodesy::EnuPoint;
use crate::geometry::Polygon;

/// Parameters of a generated last-mile arena.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArenaSpec {
    pub cells: usize,
    pub resolution_m: f64,
    pub distractors: usize,
    pub clutter_walls: usize,
}

impl Default for ArenaSpec {
    fn default() -> Self {
        ArenaSpec {
            cells: 60,
            resolution_m: 0.5,
            distractors: 2,
            clutter_walls: 4,
        }
    }
}

pub const ARENA_QUERY: &str = "person in a red jacket";

/// Square arena centered on the ENU origin: one building whose footprint is
/// the target polygon, a 2×2-cell target on a random side, distractors on
/// other sides and short clutter walls. The robot starts next to the
/// building.
pub fn exploration_arena(seed: u64, spec: ArenaSpec) -> Result<SimWorld, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_A3E4A);
    let n = spec.cells;
    let half = n as f64 * spec.resolution_m / 2.0;
    let geometry = GridGeometry {
        width: n,
        height: n,
        resolution_m: spec.resolution_m,
        origin: EnuPoint::new(-half, -half),
    };
    for _attempt in 0..64 {
        let mut truth = OccupancyGrid::new(geometry);
        for r in 0..n {
            for c in 0..n {
                truth.set(CellIdx::new(r, c), CellState::Free);
            }
        }
        // building footprint, cells [r0, r1) x [c0, c1)
        let bh = rng.random_range(n / 5..=n / 3);
        let bw = rng.random_range(n / 5..=n / 3);
        let r0 = rng.random_range(n / 3 - 2..=n / 3 + 2);
        let c0 = rng.random_range(n / 3 - 2..=n / 3 + 2);
        let (r1, c1) = (r0 + bh, c0 + bw);
        for r in r0..r1 {
            for c in c0..c1 {
                truth.set(CellIdx::new(r, c), CellState::Occupied);
            }
        }
        let near_building = |cell: CellIdx, margin: usize| {
            cell.row + margin >= r0 && cell.row < r1 + margin && cell.col + margin >= c0 && cell.col < c1 + margin
        };
        for _ in 0..spec.clutter_walls {
            let len = rng.random_range(3..8);
            let vertical = rng.random_bool(0.5);
            let (sr, sc) = (rng.random_range(1..n - 9), rng.random_range(1..n - 9));
            let cells: Vec<CellIdx> = (0..len)
                .map(|k| if vertical { CellIdx::new(sr + k, sc) } else { CellIdx::new(sr, sc + k) })
                .collect();
            if cells.iter().all(|c| !near_building(*c, 4)) {
                for c in cells {
                    truth.set(c, CellState::Occupied);
                }
            }
        }
        // four sides: 0 south, 1 north, 2 west, 3 east
        let side_cells = |side: usize, off: usize, t: f64| -> Vec<CellIdx> {
            let along_r = r0 + ((bh.saturating_sub(2)) as f64 * t) as usize;
            let along_c = c0 + ((bw.saturating_sub(2)) as f64 * t) as usize;
            let (r, c) = match side {
                0 => (r0 - off - 2, along_c),
                1 => (r1 + off, along_c),
                2 => (along_r, c0 - off - 2),
                _ => (along_r, c1 + off),
            };
            vec![CellIdx::new(r, c), CellIdx::new(r, c + 1), CellIdx::new(r + 1, c), CellIdx::new(r + 1, c + 1)]
        };
        let mut sides = [0usize, 1, 2, 3];
        for i in (1..4).rev() {
            sides.swap(i, rng.random_range(0..=i));
        }
        let robot_side = sides[0];
        let target_side = sides[rng.random_range(1..4)];
        let robot_cell = side_cells(robot_side, 2, rng.random_range(0.0..1.0))[0];
        let mut objects = vec![WorldObject {
            label: ARENA_QUERY.into(),
            cells: side_cells(target_side, rng.random_range(1..3), rng.random_range(0.0..1.0)),
            quality: 0.9,
            target: true,
        }];
        for k in 0..spec.distractors {
            let side = sides[(k + 1) % 4];
            let cells = side_cells(side, rng.random_range(1..3), rng.random_range(0.0..1.0));
            if cells.iter().any(|c| objects.iter().any(|o| o.cells.iter().any(|d| d.dist(*c) < 3.0))) {
                continue;
            }
            objects.push(WorldObject {
                label: DISTRACTOR_LABELS[k % 2].into(),
                cells,
                quality: rng.random_range(0.4..=0.55),
                target: false,
            });
        }
        let reach = truth.bfs_distances(robot_cell);
        let all_reachable = objects
            .iter()
            .flat_map(|o| o.cells.iter())
            .all(|c| truth.is_free(*c) && reach[geometry.index(*c)].is_some());
        if !all_reachable || objects.len() < 1 + spec.distractors {
            continue;
        }
        let lo = geometry.center(CellIdx::new(r0, c0)) - EnuPoint::new(spec.resolution_m, spec.resolution_m) * 0.5;
        let hi = geometry.center(CellIdx::new(r1 - 1, c1 - 1)) + EnuPoint::new(spec.resolution_m, spec.resolution_m) * 0.5;
        let polygon = Polygon::rectangle(lo, hi)?;
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        return SimWorld::new(truth, objects, ARENA_QUERY, Some(polygon), geometry.center(robot_cell), heading, seed);
    }
    Err(SimError::Fixture {
        line: 0,
        message: format!("could not lay out an arena for seed {seed}"),
    })
}

const DISTRACTOR_LABELS: [&str; 2] = ["person in a blue jacket", "red fire hydrant"];

/// Target plus distractors around `polygon`: 2×2 blocks of free cells lying
/// 0.5 to 3 m outside it and reachable from the robot. The target sits on a
/// random side (east, north, west, south) and each distractor on another.
/// `None` when no side offers a placement.
pub fn place_objects_near(world: &SimWorld, polygon: &Polygon, distractors: usize, seed: u64) -> Option<Vec<WorldObject>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00B1_EC75);
    let g = *world.geometry();
    let truth = world.truth();
    let reach = truth.bfs_distances(world.robot_cell());
    let (lo, hi) = polygon.bbox();
    let pad = EnuPoint::new(4.0, 4.0);
    let (c0, c1) = (g.cell_of(lo - pad)?, g.cell_of(hi + pad)?);
    let centroid = polygon.centroid();
    let ok_cell = |c: CellIdx| {
        let p = g.center(c);
        g.contains(c)
            && truth.is_free(c)
            && reach[g.index(c)].is_some()
            && !polygon.contains(p)
            && (0.5..=3.0).contains(&polygon.distance_to_boundary(p))
    };
    let mut by_side: [Vec<[CellIdx; 4]>; 4] = Default::default();
    for r in c0.row..c1.row {
        for c in c0.col..c1.col {
            let block = [CellIdx::new(r, c), CellIdx::new(r, c + 1), CellIdx::new(r + 1, c), CellIdx::new(r + 1, c + 1)];
            if block.iter().all(|b| ok_cell(*b)) {
                let v = g.center(block[0]) - centroid;
                let side = ((v.heading() + std::f64::consts::FRAC_PI_4).rem_euclid(std::f64::consts::TAU)
                    / std::f64::consts::FRAC_PI_2) as usize;
                by_side[side.min(3)].push(block);
            }
        }
    }
    let sides: Vec<usize> = (0..4).filter(|s| !by_side[*s].is_empty()).collect();
    if sides.is_empty() {
        return None;
    }
    let first = rng.random_range(0..sides.len());
    let mut objects: Vec<WorldObject> = Vec::new();
    for k in 0..=distractors {
        let side = sides[(first + k) % sides.len()];
        let free: Vec<&[CellIdx; 4]> = by_side[side]
            .iter()
            .filter(|b| b.iter().all(|c| objects.iter().all(|o| o.cells.iter().all(|d| d.dist(*c) >= 6.0))))
            .collect();
        if free.is_empty() {
            continue;
        }
        let block = free[rng.random_range(0..free.len())];
        objects.push(if k == 0 {
            WorldObject {
                label: ARENA_QUERY.into(),
                cells: block.to_vec(),
                quality: 0.9,
                target: true,
            }
        } else {
            WorldObject {
                label: DISTRACTOR_LABELS[(k - 1) % 2].into(),
                cells: block.to_vec(),
                quality: rng.random_range(0.4..=0.55),
                target: false,
            }
        });
    }
    Some(objects)
}
