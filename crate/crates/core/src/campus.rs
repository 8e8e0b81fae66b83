//! Synthetic campus: a grid of roads with one named building per block,
//! emitted as an OSM XML extract plus a matching ground-truth world grid.

use std::fmt::Write as _;

use quick_xml::escape::escape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geodesy::{enu_to_wgs84, EnuPoint, Wgs84Point};
use crate::geometry::distance_to_segment;
use crate::kb::{parse_osm_extract, CategoryRules, KnowledgeBase};
use crate::routing::RoadNetwork;
use crate::sim::{CellIdx, CellState, GridGeometry, OccupancyGrid, SimWorld};

/// Layout parameters of a synthetic campus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampusSpec {
    pub blocks_x: usize,
    pub blocks_y: usize,
    /// Road spacing.
    pub block_m: f64,
    /// Minimum gap between a road centerline and a building.
    pub setback_m: f64,
    /// Free border around the road grid.
    pub margin_m: f64,
    pub resolution_m: f64,
    pub anchor_lat: f64,
    pub anchor_lon: f64,
}

impl Default for CampusSpec {
    fn default() -> Self {
        CampusSpec {
            blocks_x: 4,
            blocks_y: 4,
            block_m: 100.0,
            setback_m: 10.0,
            margin_m: 20.0,
            resolution_m: 0.5,
            anchor_lat: 22.3364,
            anchor_lon: 114.2655,
        }
    }
}

/// Building names with the OSM tags that decide their category.
pub const CAMPUS_BUILDINGS: &[(&str, &[(&str, &str)])] = &[
    ("Library", &[("building", "library"), ("amenity", "library")]),
    ("Building A", &[("building", "university")]),
    ("Building B", &[("building", "university")]),
    ("Building C", &[("building", "university")]),
    ("Main Canteen", &[("building", "yes"), ("amenity", "canteen")]),
    ("Lakeside Cafe", &[("building", "yes"), ("amenity", "cafe")]),
    ("Sports Center", &[("building", "sports_hall"), ("leisure", "sports_centre")]),
    ("North Dormitory", &[("building", "dormitory")]),
    ("South Dormitory", &[("building", "dormitory")]),
    ("Health Clinic", &[("building", "yes"), ("amenity", "clinic")]),
    ("Administration Building", &[("building", "office")]),
    ("Parking Garage", &[("building", "parking")]),
    ("Science Lab", &[("building", "college")]),
    ("Lecture Hall", &[("building", "school")]),
    ("Art Museum", &[("building", "yes")]),
    ("Student Center", &[("building", "yes")]),
    ("Graduate Residence", &[("building", "apartments")]),
    ("Registrar Office", &[("building", "yes"), ("office", "educational_institution")]),
    ("Engineering Building", &[("building", "university")]),
    ("West Food Court", &[("building", "yes"), ("amenity", "food_court")]),
];

/// Generated campus: the OSM extract, the knowledge base parsed from it and
/// the ground-truth world in the base's ENU frame.
#[derive(Debug, Clone)]
pub struct Campus {
    pub spec: CampusSpec,
    pub osm_xml: String,
    pub kb: KnowledgeBase,
    pub world: SimWorld,
}

impl Campus {
    pub fn network(&self) -> Result<RoadNetwork, Error> {
        Ok(RoadNetwork::from_kb(&self.kb)?)
    }
}

struct Writer {
    nodes: String,
    ways: String,
    next_node: i64,
    next_way: i64,
}

impl Writer {
    fn node(&mut self, anchor: Wgs84Point, p: EnuPoint) -> Result<i64, Error> {
        let g = enu_to_wgs84(anchor, p)?;
        let id = self.next_node;
        self.next_node += 1;
        writeln!(self.nodes, r#"  <node id="{id}" lat="{:.9}" lon="{:.9}"/>"#, g.lat(), g.lon()).unwrap();
        Ok(id)
    }

    fn way(&mut self, refs: &[i64], tags: &[(&str, &str)]) {
        let id = self.next_way;
        self.next_way += 1;
        writeln!(self.ways, r#"  <way id="{id}">"#).unwrap();
        for r in refs {
            writeln!(self.ways, r#"    <nd ref="{r}"/>"#).unwrap();
        }
        for (k, v) in tags {
            writeln!(self.ways, r#"    <tag k="{}" v="{}"/>"#, escape(*k), escape(*v)).unwrap();
        }
        self.ways.push_str("  </way>\n");
    }
}

/// Builds a campus deterministically from `seed`.
pub fn synthetic_campus(spec: CampusSpec, seed: u64) -> Result<Campus, Error> {
    let blocks = spec.blocks_x * spec.blocks_y;
    let inner = spec.block_m - 2.0 * spec.setback_m;
    if spec.blocks_x == 0 || spec.blocks_y == 0 || blocks > CAMPUS_BUILDINGS.len() || inner < 10.0 {
        return Err(Error::InvalidInput(format!(
            "campus needs 1..={} blocks of at least {} m",
            CAMPUS_BUILDINGS.len(),
            2.0 * spec.setback_m + 10.0
        )));
    }
    if !(spec.resolution_m > 0.0 && spec.margin_m >= 0.0) {
        return Err(Error::InvalidInput("campus resolution and margin must be positive".into()));
    }
    let anchor = Wgs84Point::new(spec.anchor_lat, spec.anchor_lon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xCA3_9A5);
    let mut names: Vec<usize> = (0..CAMPUS_BUILDINGS.len()).collect();
    for i in (1..names.len()).rev() {
        names.swap(i, rng.random_range(0..=i));
    }

    let mut w = Writer {
        nodes: String::new(),
        ways: String::new(),
        next_node: 1,
        next_way: 1,
    };
    let (nx, ny) = (spec.blocks_x + 1, spec.blocks_y + 1);
    let mut grid_ids = vec![0i64; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let p = EnuPoint::new(i as f64 * spec.block_m, j as f64 * spec.block_m);
            grid_ids[j * nx + i] = w.node(anchor, p)?;
        }
    }
    for j in 0..ny {
        let refs: Vec<i64> = (0..nx).map(|i| grid_ids[j * nx + i]).collect();
        w.way(&refs, &[("highway", "service")]);
    }
    for i in 0..nx {
        let refs: Vec<i64> = (0..ny).map(|j| grid_ids[j * nx + i]).collect();
        w.way(&refs, &[("highway", "service")]);
    }
    for b in 0..blocks {
        let (bi, bj) = (b % spec.blocks_x, b / spec.blocks_x);
        let wx = inner * rng.random_range(0.4..0.8);
        let wy = inner * rng.random_range(0.4..0.8);
        let x0 = bi as f64 * spec.block_m + spec.setback_m + rng.random_range(0.0..=inner - wx);
        let y0 = bj as f64 * spec.block_m + spec.setback_m + rng.random_range(0.0..=inner - wy);
        let corners = [
            EnuPoint::new(x0, y0),
            EnuPoint::new(x0 + wx, y0),
            EnuPoint::new(x0 + wx, y0 + wy),
            EnuPoint::new(x0, y0 + wy),
        ];
        let mut refs = Vec::with_capacity(5);
        for c in corners {
            refs.push(w.node(anchor, c)?);
        }
        refs.push(refs[0]);
        let (name, tags) = CAMPUS_BUILDINGS[names[b]];
        let mut all: Vec<(&str, &str)> = tags.to_vec();
        all.push(("name", name));
        w.way(&refs, &all);
    }
    let osm_xml = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"geodragon-synth\">\n{}{}</osm>\n",
        w.nodes, w.ways
    );
    let kb = parse_osm_extract(osm_xml.as_bytes(), &CategoryRules::default())?;
    let world = rasterize(&kb, &spec, seed)?;
    Ok(Campus {
        spec,
        osm_xml,
        kb,
        world,
    })
}

/// Ground-truth grid in the base's ENU frame: building footprints occupied,
/// everything else free. The robot starts on the first road node.
fn rasterize(kb: &KnowledgeBase, spec: &CampusSpec, seed: u64) -> Result<SimWorld, Error> {
    let net = RoadNetwork::from_kb(kb)?;
    let footprints: Vec<_> = kb
        .entities()
        .filter_map(|e| kb.target(e.osm_id).and_then(|t| t.polygon().cloned()))
        .collect();
    let mut pts: Vec<EnuPoint> = net.points().to_vec();
    pts.extend(footprints.iter().flat_map(|p| p.vertices().iter().copied()));
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in &pts {
        lo = EnuPoint::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = EnuPoint::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let res = spec.resolution_m;
    let origin = EnuPoint::new(
        ((lo.x - spec.margin_m) / res).floor() * res,
        ((lo.y - spec.margin_m) / res).floor() * res,
    );
    let width = ((hi.x + spec.margin_m - origin.x) / res).ceil() as usize;
    let height = ((hi.y + spec.margin_m - origin.y) / res).ceil() as usize;
    let geometry = GridGeometry {
        width,
        height,
        resolution_m: res,
        origin,
    };
    let mut truth = OccupancyGrid::new(geometry);
    for r in 0..height {
        for c in 0..width {
            truth.set(CellIdx::new(r, c), CellState::Free);
        }
    }
    for poly in &footprints {
        let (a, b) = poly.bbox();
        let (Some(ca), Some(cb)) = (geometry.cell_of(a), geometry.cell_of(b)) else {
            continue;
        };
        for r in ca.row..=cb.row {
            for c in ca.col..=cb.col {
                let cell = CellIdx::new(r, c);
                if poly.contains(geometry.center(cell)) {
                    truth.set(cell, CellState::Occupied);
                }
            }
        }
    }
    let start = net.point(0);
    let start_cell = geometry
        .cell_of(start)
        .ok_or_else(|| Error::Internal("first road node lies outside the grid".into()))?;
    Ok(SimWorld::new(
        truth,
        Vec::new(),
        crate::sim::ARENA_QUERY,
        None,
        geometry.center(start_cell),
        0.0,
        seed,
    )?)
}

/// Walls off a road: occupies every cell within one cell of the segment
/// crossing `edge` at its midpoint, `half_width_m` to either side.
pub fn barrier_across(world: &mut SimWorld, net: &RoadNetwork, edge: usize, half_width_m: f64) -> Result<Vec<CellIdx>, Error> {
    if edge >= net.edge_count() {
        return Err(Error::InvalidInput(format!("no road edge {edge}")));
    }
    let e = net.edge(edge);
    let (a, b) = (net.point(e.a), net.point(e.b));
    let mid = (a + b) * 0.5;
    let dir = (b - a) * (1.0 / a.distance(b));
    let normal = EnuPoint::new(-dir.y, dir.x) * half_width_m;
    let (p, q) = (mid - normal, mid + normal);
    let g = *world.geometry();
    let reach = half_width_m + g.resolution_m;
    let (Some(c0), Some(c1)) = (
        g.cell_of(EnuPoint::new(mid.x - reach, mid.y - reach)),
        g.cell_of(EnuPoint::new(mid.x + reach, mid.y + reach)),
    ) else {
        return Err(Error::InvalidInput("barrier leaves the world grid".into()));
    };
    let mut cells = Vec::new();
    for r in c0.row..=c1.row {
        for c in c0.col..=c1.col {
            let cell = CellIdx::new(r, c);
            if distance_to_segment(g.center(cell), p, q) <= 0.75 * g.resolution_m && cell != world.robot_cell() {
                world.set_occupied(cell, true)?;
                cells.push(cell);
            }
        }
    }
    Ok(cells)
}
