use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::{CellIdx, CellState, GridGeometry, OccupancyGrid, SemanticGrid};
use crate::geodesy::EnuPoint;
use crate::geometry::BufferedPolygon;

/// Free cell with at least one Unknown 4-neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Frontier {
    pub cell: CellIdx,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierCluster {
    pub id: usize,
    pub cells: Vec<CellIdx>,
    pub representative: CellIdx,
}

pub fn is_frontier(grid: &OccupancyGrid, c: CellIdx) -> bool {
    grid.is_free(c) && grid.geometry().neighbors4(c).any(|n| grid.get(n) == CellState::Unknown)
}

/// All frontier cells in (row, col) order, labelled by 8-connected cluster.
pub fn extract_frontiers(grid: &OccupancyGrid) -> Vec<Frontier> {
    let cells: Vec<CellIdx> = grid.cells().map(|(c, _)| c).filter(|c| is_frontier(grid, *c)).collect();
    label_clusters(grid.geometry(), &cells)
}

/// 8-connected labelling of `cells`; ids follow the order of each
/// cluster's first cell.
fn label_clusters(g: &GridGeometry, cells: &[CellIdx]) -> Vec<Frontier> {
    let index: BTreeMap<CellIdx, usize> = cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let mut label = vec![usize::MAX; cells.len()];
    let mut next = 0;
    for i in 0..cells.len() {
        if label[i] != usize::MAX {
            continue;
        }
        label[i] = next;
        let mut stack = vec![cells[i]];
        while let Some(u) = stack.pop() {
            for n in g.neighbors8(u) {
                if let Some(&j) = index.get(&n) {
                    if label[j] == usize::MAX {
                        label[j] = next;
                        stack.push(n);
                    }
                }
            }
        }
        next += 1;
    }
    let mut out: Vec<Frontier> = cells
        .iter()
        .zip(label)
        .map(|(c, cluster)| Frontier { cell: *c, cluster })
        .collect();
    out.sort_by_key(|f| f.cell);
    out
}

/// Groups frontiers by cluster; the representative is the member nearest
/// the cluster centroid, ties to the lowest (row, col).
pub fn frontier_clusters(frontiers: &[Frontier]) -> Vec<FrontierCluster> {
    let mut groups: BTreeMap<usize, Vec<CellIdx>> = BTreeMap::new();
    for f in frontiers {
        groups.entry(f.cluster).or_default().push(f.cell);
    }
    groups
        .into_iter()
        .map(|(id, mut cells)| {
            cells.sort();
            let n = cells.len() as f64;
            let cr = cells.iter().map(|c| c.row as f64).sum::<f64>() / n;
            let cc = cells.iter().map(|c| c.col as f64).sum::<f64>() / n;
            let d = |c: &CellIdx| (c.row as f64 - cr).hypot(c.col as f64 - cc);
            let representative = *cells
                .iter()
                .min_by(|a, b| d(a).total_cmp(&d(b)).then(a.cmp(b)))
                .expect("clusters are non-empty");
            FrontierCluster {
                id,
                cells,
                representative,
            }
        })
        .collect()
}

/// Nearest representative, by BFS over known Free cells, among frontier
/// clusters re-formed from cells inside `region`. Ties go to the lowest
/// (row, col); `None` signals an exhausted search space.
pub fn select_frontier(
    frontiers: &[Frontier],
    region: &BufferedPolygon,
    grid: &OccupancyGrid,
    robot: CellIdx,
) -> Option<Frontier> {
    let g = grid.geometry();
    let inside: Vec<CellIdx> = frontiers
        .iter()
        .map(|f| f.cell)
        .filter(|c| region.contains(g.center(*c)))
        .collect();
    if inside.is_empty() {
        return None;
    }
    let clusters = frontier_clusters(&label_clusters(g, &inside));
    let dist = grid.bfs_distances(robot);
    clusters
        .iter()
        .filter_map(|cl| dist[g.index(cl.representative)].map(|d| (d, cl.representative, cl.id)))
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, cell, cluster)| Frontier { cell, cluster })
}

/// Density clustering of cells by center distance. Noise is dropped;
/// clusters come out in order of their first core cell.
pub fn dbscan(cells: &[CellIdx], eps_cells: f64, min_pts: usize) -> Vec<Vec<CellIdx>> {
    let mut pts: Vec<CellIdx> = cells.to_vec();
    pts.sort();
    pts.dedup();
    let neighbors = |i: usize| -> Vec<usize> { (0..pts.len()).filter(|&j| pts[i].dist(pts[j]) <= eps_cells).collect() };
    let mut label: Vec<Option<usize>> = vec![None; pts.len()];
    let mut visited = vec![false; pts.len()];
    let mut clusters: Vec<Vec<CellIdx>> = Vec::new();
    for i in 0..pts.len() {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let seeds = neighbors(i);
        if seeds.len() < min_pts {
            continue;
        }
        let id = clusters.len();
        clusters.push(Vec::new());
        label[i] = Some(id);
        let mut queue = seeds;
        let mut k = 0;
        while k < queue.len() {
            let j = queue[k];
            k += 1;
            if !visited[j] {
                visited[j] = true;
                let nj = neighbors(j);
                if nj.len() >= min_pts {
                    queue.extend(nj);
                }
            }
            if label[j].is_none() {
                label[j] = Some(id);
            }
        }
    }
    for (i, l) in label.iter().enumerate() {
        if let Some(id) = l {
            clusters[*id].push(pts[i]);
        }
    }
    clusters
}

/// Centroid of the dominant cluster (largest, then highest mean score)
/// snapped to the nearest known Free cell center.
pub fn semantic_goal(clusters: &[Vec<CellIdx>], scores: &SemanticGrid, grid: &OccupancyGrid) -> Option<EnuPoint> {
    let mean = |cl: &Vec<CellIdx>| cl.iter().filter_map(|c| scores.score(*c)).sum::<f64>() / cl.len() as f64;
    let best = clusters
        .iter()
        .filter(|c| !c.is_empty())
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.len()
                .cmp(&b.len())
                .then(mean(a).total_cmp(&mean(b)))
                .then(ib.cmp(ia))
        })?
        .1;
    let g = grid.geometry();
    let n = best.len() as f64;
    let centroid = EnuPoint::new(
        best.iter().map(|c| g.center(*c).x).sum::<f64>() / n,
        best.iter().map(|c| g.center(*c).y).sum::<f64>() / n,
    );
    grid.cells()
        .filter(|(_, s)| *s == CellState::Free)
        .map(|(c, _)| c)
        .min_by(|a, b| {
            g.center(*a)
                .distance(centroid)
                .total_cmp(&g.center(*b).distance(centroid))
                .then(a.cmp(b))
        })
        .map(|c| g.center(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use proptest::prelude::*;

    fn geom(w: usize, h: usize) -> GridGeometry {
        GridGeometry {
            width: w,
            height: h,
            resolution_m: 1.0,
            origin: EnuPoint::ORIGIN,
        }
    }

    /// Rows given north-up: `?` unknown, `.` free, `#` occupied.
    fn grid(rows: &[&str]) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(geom(rows[0].len(), rows.len()));
        for (i, line) in rows.iter().enumerate() {
            for (col, ch) in line.chars().enumerate() {
                let s = match ch {
                    '.' => CellState::Free,
                    '#' => CellState::Occupied,
                    _ => CellState::Unknown,
                };
                g.set(CellIdx::new(rows.len() - 1 - i, col), s);
            }
        }
        g
    }

    #[test]
    fn known_grid_has_no_frontiers() {
        assert!(extract_frontiers(&grid(&["...", ".#.", "..."])).is_empty());
    }

    #[test]
    fn half_revealed_corridor() {
        let g = grid(&["?????", "?????", ".....", ".....", "....."]);
        let f = extract_frontiers(&g);
        assert_eq!(f.len(), 5);
        assert!(f.iter().all(|x| x.cell.row == 2 && x.cluster == 0));
        let cl = frontier_clusters(&f);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].representative, CellIdx::new(2, 2));
    }

    #[test]
    fn two_pockets_give_two_clusters() {
        let g = grid(&["?...?", ".....", ".....", ".....", "?...?"]);
        let cl = frontier_clusters(&extract_frontiers(&g));
        assert_eq!(cl.len(), 4);
        let g = grid(&["??.....", "??.....", ".......", ".......", ".......", ".....??", ".....??"]);
        assert_eq!(frontier_clusters(&extract_frontiers(&g)).len(), 2);
    }

    fn region(min: (f64, f64), max: (f64, f64)) -> BufferedPolygon {
        BufferedPolygon::new(
            Polygon::rectangle(EnuPoint::new(min.0, min.1), EnuPoint::new(max.0, max.1)).unwrap(),
            0.0,
        )
    }

    #[test]
    fn selection_uses_path_distance_and_polygon() {
        // frontiers at the west end (4 steps) and east end (9 steps) of a corridor
        let g = grid(&["?..............?"]);
        let f = extract_frontiers(&g);
        let all = region((0.0, 0.0), (16.0, 1.0));
        let pick = select_frontier(&f, &all, &g, CellIdx::new(0, 5)).unwrap();
        assert_eq!(pick.cell, CellIdx::new(0, 1));
        let pick = select_frontier(&f, &all, &g, CellIdx::new(0, 10)).unwrap();
        assert_eq!(pick.cell, CellIdx::new(0, 14));
        let east = region((8.0, 0.0), (16.0, 1.0));
        assert_eq!(select_frontier(&f, &east, &g, CellIdx::new(0, 5)).unwrap().cell, CellIdx::new(0, 14));
        let none = region((40.0, 40.0), (50.0, 50.0));
        assert_eq!(select_frontier(&f, &none, &g, CellIdx::new(0, 5)), None);
        let g = grid(&["?...............?"]);
        let f = extract_frontiers(&g);
        let tie = select_frontier(&f, &region((0.0, 0.0), (17.0, 1.0)), &g, CellIdx::new(0, 8)).unwrap();
        assert_eq!(tie.cell, CellIdx::new(0, 1));
    }

    fn blob(r0: usize, c0: usize, n: usize) -> Vec<CellIdx> {
        (0..n).flat_map(|r| (0..n).map(move |c| CellIdx::new(r0 + r, c0 + c))).collect()
    }

    #[test]
    fn dbscan_examples() {
        let cl = dbscan(&blob(0, 0, 3), 2.0, 4);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].len(), 9);
        let mut two = blob(0, 0, 3);
        two.extend(blob(0, 12, 3));
        assert_eq!(dbscan(&two, 2.0, 4).len(), 2);
        assert!(dbscan(&[CellIdx::new(4, 4)], 2.0, 4).is_empty());
        let mut noisy = blob(0, 0, 3);
        noisy.push(CellIdx::new(9, 9));
        assert_eq!(dbscan(&noisy, 2.0, 4)[0].len(), 9);
    }

    #[test]
    fn dominant_cluster_rules() {
        let g = grid(&[".........."; 10]);
        let mut s = SemanticGrid::new(*g.geometry());
        let big = blob(0, 0, 3);
        let small = blob(6, 6, 2);
        for c in &big {
            s.observe(*c, 0.7);
        }
        for c in &small {
            s.observe(*c, 0.95);
        }
        let goal = semantic_goal(&[small.clone(), big.clone()], &s, &g).unwrap();
        assert_eq!(goal, EnuPoint::new(1.5, 1.5));
        let a = blob(0, 0, 2);
        let b = blob(6, 6, 2);
        for c in &a {
            s.observe(*c, 0.2);
        }
        let goal = semantic_goal(&[a, b], &s, &g).unwrap();
        // centroid (7, 7) is equidistant from four centers; the lowest wins
        assert_eq!(goal, EnuPoint::new(6.5, 6.5));
        assert!(semantic_goal(&[], &s, &g).is_none());
    }

    fn arb_grid() -> impl Strategy<Value = OccupancyGrid> {
        (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u8..3, w * h).prop_map(move |v| {
                let mut g = OccupancyGrid::new(geom(w, h));
                for (i, s) in v.into_iter().enumerate() {
                    let c = g.geometry().cell_at(i);
                    g.set(c, [CellState::Unknown, CellState::Free, CellState::Occupied][s as usize]);
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn frontiers_match_brute_force(g in arb_grid()) {
            let f = extract_frontiers(&g);
            let mut expect = Vec::new();
            for r in 0..g.height() {
                for c in 0..g.width() {
                    let cell = CellIdx::new(r, c);
                    let unknown_nb = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].iter().any(|(dr, dc)| {
                        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                        rr >= 0 && cc >= 0 && (rr as usize) < g.height() && (cc as usize) < g.width()
                            && g.get(CellIdx::new(rr as usize, cc as usize)) == CellState::Unknown
                    });
                    if g.get(cell) == CellState::Free && unknown_nb {
                        expect.push(cell);
                    }
                }
            }
            prop_assert_eq!(f.iter().map(|x| x.cell).collect::<Vec<_>>(), expect);
            for a in &f {
                for b in &f {
                    if a.cell.dist(b.cell) < 1.5 {
                        prop_assert_eq!(a.cluster, b.cluster);
                    }
                }
            }
        }

        #[test]
        fn selected_frontier_is_inside_region(g in arb_grid(), x0 in 0.0..20.0f64, y0 in 0.0..20.0f64) {
            let reg = region((x0, y0), (x0 + 6.0, y0 + 6.0));
            let f = extract_frontiers(&g);
            if let Some(robot) = g.cells().find(|(_, s)| *s == CellState::Free).map(|(c, _)| c) {
                if let Some(pick) = select_frontier(&f, &reg, &g, robot) {
                    prop_assert!(reg.contains(g.geometry().center(pick.cell)));
                    prop_assert!(is_frontier(&g, pick.cell));
                }
            }
        }

        #[test]
        fn dbscan_partitions_core_cells(cells in proptest::collection::vec((0usize..15, 0usize..15), 0..40)) {
            let cells: Vec<CellIdx> = cells.into_iter().map(|(r, c)| CellIdx::new(r, c)).collect();
            let clusters = dbscan(&cells, 2.0, 4);
            let mut all: Vec<CellIdx> = clusters.iter().flatten().copied().collect();
            let n = all.len();
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), n);
            for cl in &clusters {
                let core = cl.iter().any(|c| all.iter().filter(|d| c.dist(**d) <= 2.0).count() >= 4);
                prop_assert!(core);
            }
        }
    }
}
