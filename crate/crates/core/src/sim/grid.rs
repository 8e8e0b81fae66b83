use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geodesy::EnuPoint;

/// Grid cell index; row 0 is the southernmost row. Orders by (row, col).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct CellIdx {
    pub row: usize,
    pub col: usize,
}

impl From<[usize; 2]> for CellIdx {
    fn from([row, col]: [usize; 2]) -> Self {
        CellIdx { row, col }
    }
}

impl From<CellIdx> for [usize; 2] {
    fn from(c: CellIdx) -> Self {
        [c.row, c.col]
    }
}

impl CellIdx {
    pub fn new(row: usize, col: usize) -> Self {
        CellIdx { row, col }
    }

    /// Euclidean distance between cell centers, in cells.
    pub fn dist(&self, other: CellIdx) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        dr.hypot(dc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Unknown,
    Free,
    Occupied,
}

/// Regular lattice anchored at the south-west corner of cell (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub resolution_m: f64,
    pub origin: EnuPoint,
}

impl GridGeometry {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, c: CellIdx) -> usize {
        c.row * self.width + c.col
    }

    pub fn cell_at(&self, i: usize) -> CellIdx {
        CellIdx::new(i / self.width, i % self.width)
    }

    pub fn contains(&self, c: CellIdx) -> bool {
        c.row < self.height && c.col < self.width
    }

    pub fn center(&self, c: CellIdx) -> EnuPoint {
        EnuPoint::new(
            self.origin.x + (c.col as f64 + 0.5) * self.resolution_m,
            self.origin.y + (c.row as f64 + 0.5) * self.resolution_m,
        )
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: EnuPoint) -> Option<CellIdx> {
        let fx = ((p.x - self.origin.x) / self.resolution_m).floor();
        let fy = ((p.y - self.origin.y) / self.resolution_m).floor();
        if !(fx >= 0.0 && fy >= 0.0 && fx < self.width as f64 && fy < self.height as f64) {
            return None;
        }
        Some(CellIdx::new(fy as usize, fx as usize))
    }

    /// In-bounds 4-neighbors in N, S, W, E order.
    pub fn neighbors4(&self, c: CellIdx) -> impl Iterator<Item = CellIdx> + '_ {
        let cand = [
            (c.row.checked_add(1), Some(c.col)),
            (c.row.checked_sub(1), Some(c.col)),
            (Some(c.row), c.col.checked_sub(1)),
            (Some(c.row), c.col.checked_add(1)),
        ];
        cand.into_iter().filter_map(move |(r, k)| {
            let n = CellIdx::new(r?, k?);
            self.contains(n).then_some(n)
        })
    }

    pub fn neighbors8(&self, c: CellIdx) -> impl Iterator<Item = CellIdx> + '_ {
        (-1i64..=1).flat_map(move |dr| {
            (-1i64..=1).filter_map(move |dc| {
                if dr == 0 && dc == 0 {
                    return None;
                }
                let r = c.row as i64 + dr;
                let k = c.col as i64 + dc;
                if r < 0 || k < 0 {
                    return None;
                }
                let n = CellIdx::new(r as usize, k as usize);
                self.contains(n).then_some(n)
            })
        })
    }
}

/// Occupancy lattice; every cell starts Unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(geometry: GridGeometry) -> Self {
        OccupancyGrid {
            cells: vec![CellState::Unknown; geometry.len()],
            geometry,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn resolution_m(&self) -> f64 {
        self.geometry.resolution_m
    }

    /// State of `c`; out-of-bounds cells read as Occupied.
    pub fn get(&self, c: CellIdx) -> CellState {
        if self.geometry.contains(c) {
            self.cells[self.geometry.index(c)]
        } else {
            CellState::Occupied
        }
    }

    pub fn set(&mut self, c: CellIdx, s: CellState) {
        if self.geometry.contains(c) {
            let i = self.geometry.index(c);
            self.cells[i] = s;
        }
    }

    pub fn is_free(&self, c: CellIdx) -> bool {
        self.get(c) == CellState::Free
    }

    pub fn count(&self, s: CellState) -> usize {
        self.cells.iter().filter(|c| **c == s).count()
    }

    pub fn known_count(&self) -> usize {
        self.cells.len() - self.count(CellState::Unknown)
    }

    pub fn cells(&self) -> impl Iterator<Item = (CellIdx, CellState)> + '_ {
        self.cells.iter().enumerate().map(|(i, s)| (self.geometry.cell_at(i), *s))
    }

    /// 4-connected BFS hop counts from `start` over Free cells.
    pub fn bfs_distances(&self, start: CellIdx) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.geometry.len()];
        if !self.is_free(start) {
            return dist;
        }
        dist[self.geometry.index(start)] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let du = dist[self.geometry.index(u)].expect("queued cells have distances");
            for v in self.geometry.neighbors4(u) {
                let vi = self.geometry.index(v);
                if dist[vi].is_none() && self.is_free(v) {
                    dist[vi] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Shortest 4-connected Free path from `start` to `goal`, both included.
    pub fn bfs_path(&self, start: CellIdx, goal: CellIdx) -> Option<Vec<CellIdx>> {
        self.bfs_path_within(start, goal, None)
    }

    /// [`Self::bfs_path`] restricted to cells inside an inclusive
    /// `(min, max)` row/col window.
    pub fn bfs_path_within(
        &self,
        start: CellIdx,
        goal: CellIdx,
        window: Option<(CellIdx, CellIdx)>,
    ) -> Option<Vec<CellIdx>> {
        if !self.is_free(start) || !self.is_free(goal) {
            return None;
        }
        let g = &self.geometry;
        let (lo, hi) = window.unwrap_or((CellIdx::new(0, 0), CellIdx::new(g.height - 1, g.width - 1)));
        let inside = |c: CellIdx| c.row >= lo.row && c.row <= hi.row && c.col >= lo.col && c.col <= hi.col;
        if !inside(start) || !inside(goal) {
            return None;
        }
        let w = hi.col - lo.col + 1;
        let local = |c: CellIdx| (c.row - lo.row) * w + (c.col - lo.col);
        let n = (hi.row - lo.row + 1) * w;
        let mut prev: Vec<Option<CellIdx>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[local(start)] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            if u == goal {
                let mut path = vec![goal];
                let mut at = goal;
                while let Some(p) = prev[local(at)] {
                    path.push(p);
                    at = p;
                }
                path.reverse();
                return Some(path);
            }
            for v in g.neighbors4(u) {
                if !inside(v) {
                    continue;
                }
                let vi = local(v);
                if !seen[vi] && self.is_free(v) {
                    seen[vi] = true;
                    prev[vi] = Some(u);
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// Nearest Free cell within `radius_cells` of `c` by center distance;
    /// ties go to the lowest (row, col).
    pub fn nearest_free(&self, c: CellIdx, radius_cells: f64) -> Option<CellIdx> {
        let r = radius_cells.floor().max(0.0) as i64;
        let mut best: Option<(f64, CellIdx)> = None;
        for dr in -r..=r {
            for dc in -r..=r {
                let (row, col) = (c.row as i64 + dr, c.col as i64 + dc);
                if row < 0 || col < 0 {
                    continue;
                }
                let n = CellIdx::new(row as usize, col as usize);
                let d = c.dist(n);
                if d <= radius_cells && self.is_free(n) && best.is_none_or(|(bd, bc)| d < bd || (d == bd && n < bc)) {
                    best = Some((d, n));
                }
            }
        }
        best.map(|(_, n)| n)
    }
}

/// Per-cell running mean of query similarity observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGrid {
    geometry: GridGeometry,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl SemanticGrid {
    pub fn new(geometry: GridGeometry) -> Self {
        SemanticGrid {
            sum: vec![0.0; geometry.len()],
            count: vec![0; geometry.len()],
            geometry,
        }
    }

    pub fn observe(&mut self, c: CellIdx, score: f64) {
        if self.geometry.contains(c) {
            let i = self.geometry.index(c);
            self.sum[i] += score.clamp(0.0, 1.0);
            self.count[i] += 1;
        }
    }

    /// Fused score, `None` for never-observed cells.
    pub fn score(&self, c: CellIdx) -> Option<f64> {
        if !self.geometry.contains(c) {
            return None;
        }
        let i = self.geometry.index(c);
        (self.count[i] > 0).then(|| self.sum[i] / self.count[i] as f64)
    }

    pub fn count(&self, c: CellIdx) -> u32 {
        if self.geometry.contains(c) {
            self.count[self.geometry.index(c)]
        } else {
            0
        }
    }

    /// Observed cells whose fused score reaches `threshold`, in (row, col) order.
    pub fn above(&self, threshold: f64) -> Vec<CellIdx> {
        (0..self.geometry.len())
            .filter(|&i| self.count[i] > 0 && self.sum[i] / self.count[i] as f64 >= threshold)
            .map(|i| self.geometry.cell_at(i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(w: usize, h: usize) -> GridGeometry {
        GridGeometry {
            width: w,
            height: h,
            resolution_m: 0.5,
            origin: EnuPoint::new(-1.0, -2.0),
        }
    }

    #[test]
    fn cell_centers_round_trip() {
        let g = geom(4, 3);
        for r in 0..3 {
            for c in 0..4 {
                let idx = CellIdx::new(r, c);
                assert_eq!(g.cell_of(g.center(idx)), Some(idx));
            }
        }
        assert_eq!(g.cell_of(EnuPoint::new(-1.01, 0.0)), None);
        assert_eq!(g.neighbors4(CellIdx::new(0, 0)).count(), 2);
        assert_eq!(g.neighbors8(CellIdx::new(1, 1)).count(), 8);
    }

    #[test]
    fn bfs_around_a_wall() {
        let mut g = OccupancyGrid::new(geom(5, 5));
        for r in 0..5 {
            for c in 0..5 {
                g.set(CellIdx::new(r, c), CellState::Free);
            }
        }
        for r in 0..4 {
            g.set(CellIdx::new(r, 2), CellState::Occupied);
        }
        let p = g.bfs_path(CellIdx::new(0, 0), CellIdx::new(0, 4)).unwrap();
        assert_eq!(p.len(), 13);
        let d = g.bfs_distances(CellIdx::new(0, 0));
        assert_eq!(d[g.geometry().index(CellIdx::new(0, 4))], Some(12));
        let win = (CellIdx::new(0, 0), CellIdx::new(3, 4));
        assert!(g.bfs_path_within(CellIdx::new(0, 0), CellIdx::new(0, 4), Some(win)).is_none());
        assert_eq!(g.nearest_free(CellIdx::new(1, 2), 1.0), Some(CellIdx::new(1, 1)));
    }

    #[test]
    fn fusion_is_a_running_mean() {
        let mut s = SemanticGrid::new(geom(2, 2));
        let c = CellIdx::new(1, 1);
        assert_eq!(s.score(c), None);
        s.observe(c, 0.2);
        s.observe(c, 0.8);
        assert!((s.score(c).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(s.above(0.5), vec![c]);
    }
}
