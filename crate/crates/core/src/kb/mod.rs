//! Knowledge base of named campus entities and the road graph.
//!
//! Built once from an OSM extract (XML subset or JSON lines) and immutable
//! afterwards. Iteration order is by OSM key, so identical inputs produce
//! identical bases.

mod ids;
mod osm;
mod snapshot;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{wgs84_to_enu, EnuPoint, GeoError, Wgs84Point};
use crate::geometry::{nearest_point_on_polygon, Polygon};

pub use ids::{assign_entity_ids, CategoryRule, CategoryRules, EntityId, DEFAULT_CATEGORY};
pub use osm::{parse_osm_extract, parse_osm_jsonl, read_osm_jsonl, read_osm_xml, RawExtract, RawNode, RawWay};
pub use snapshot::SNAPSHOT_FORMAT_VERSION;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml { line: usize, column: usize, message: String },
    #[error("invalid <{element}> at line {line}, column {column}: {message}")]
    InvalidElement {
        element: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    JsonLine { line: usize, message: String },
    #[error("input is not valid UTF-8")]
    Utf8,
    #[error("node {id}: {source}")]
    InvalidNode { id: i64, source: GeoError },
    #[error("node id {0} appears more than once")]
    DuplicateNode(i64),
    #[error("way id {0} appears more than once")]
    DuplicateWay(i64),
    #[error("way {way} references missing node {node}")]
    MissingNode { way: i64, node: i64 },
    #[error("building way {way} has an invalid footprint: {source}")]
    InvalidBuilding { way: i64, source: GeoError },
    #[error("extract contains no named buildings")]
    EmptyCorpus,
    #[error("node {node} cannot be projected: {source}")]
    Projection { node: i64, source: GeoError },
    #[error("category rules line {line}: {message}")]
    Rules { line: usize, message: String },
    #[error("invalid entity id: {0}")]
    InvalidId(String),
    #[error("duplicate entity key {0}")]
    DuplicateEntity(OsmId),
    #[error("invalid road graph: {0}")]
    InvalidRoadGraph(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("unsupported snapshot format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Element kind of an OSM key; node and way ids live in separate namespaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OsmKind {
    Node,
    Way,
}

/// Unique entity key, rendered as `way/123` or `node/45`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct OsmId {
    pub kind: OsmKind,
    pub id: i64,
}

impl OsmId {
    pub fn way(id: i64) -> Self {
        OsmId { kind: OsmKind::Way, id }
    }

    pub fn node(id: i64) -> Self {
        OsmId { kind: OsmKind::Node, id }
    }
}

impl fmt::Display for OsmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            OsmKind::Node => write!(f, "node/{}", self.id),
            OsmKind::Way => write!(f, "way/{}", self.id),
        }
    }
}

impl FromStr for OsmId {
    type Err = KbError;

    fn from_str(s: &str) -> Result<Self, KbError> {
        let bad = || KbError::Snapshot(format!("bad osm key {s:?}"));
        let (kind, id) = s.split_once('/').ok_or_else(bad)?;
        let id: i64 = id.parse().map_err(|_| bad())?;
        match kind {
            "node" => Ok(OsmId::node(id)),
            "way" => Ok(OsmId::way(id)),
            _ => Err(bad()),
        }
    }
}

impl From<OsmId> for String {
    fn from(id: OsmId) -> String {
        id.to_string()
    }
}

impl TryFrom<String> for OsmId {
    type Error = KbError;
    fn try_from(s: String) -> Result<Self, KbError> {
        s.parse()
    }
}

/// Footprint of an entity; polygons are counter-clockwise without a closing vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coordinates", rename_all = "lowercase")]
pub enum Geometry {
    Point(Wgs84Point),
    Polygon(Vec<Wgs84Point>),
}

impl Geometry {
    /// Validates and normalizes a geodetic ring.
    pub fn polygon(ring: Vec<Wgs84Point>) -> Result<Self, GeoError> {
        // lon/lat are an affine, orientation-preserving image of the ENU
        // plane, so validity and orientation can be decided here directly.
        let planar: Vec<EnuPoint> = ring.iter().map(|p| EnuPoint::new(p.lon(), p.lat())).collect();
        let normalized = Polygon::new(planar)?;
        let ring = normalized
            .vertices()
            .iter()
            .map(|v| Wgs84Point::new(v.y, v.x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Geometry::Polygon(ring))
    }

    pub fn points(&self) -> &[Wgs84Point] {
        match self {
            Geometry::Point(p) => std::slice::from_ref(p),
            Geometry::Polygon(ring) => ring,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsmEntity {
    pub osm_id: OsmId,
    pub name: String,
    pub category: String,
    pub geometry: Geometry,
    pub tags: BTreeMap<String, String>,
}

/// Navigation target in the ENU frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Point(EnuPoint),
    Polygon(Polygon),
}

impl Target {
    /// Goal point for a robot at `from`: the point itself, or the nearest
    /// point of the polygon contour.
    pub fn project_goal(&self, from: EnuPoint) -> EnuPoint {
        match self {
            Target::Point(p) => *p,
            Target::Polygon(poly) => nearest_point_on_polygon(poly, from),
        }
    }

    pub fn reference_point(&self) -> EnuPoint {
        match self {
            Target::Point(p) => *p,
            Target::Polygon(poly) => poly.centroid(),
        }
    }

    pub fn polygon(&self) -> Option<&Polygon> {
        match self {
            Target::Point(_) => None,
            Target::Polygon(p) => Some(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadEdge {
    pub u: i64,
    pub v: i64,
    pub length_m: f64,
}

/// Undirected road graph over OSM node ids.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RoadGraph {
    nodes: BTreeMap<i64, Wgs84Point>,
    edges: Vec<RoadEdge>,
}

impl RoadGraph {
    pub fn new(nodes: BTreeMap<i64, Wgs84Point>, edges: Vec<RoadEdge>) -> Result<Self, KbError> {
        for e in &edges {
            for end in [e.u, e.v] {
                if !nodes.contains_key(&end) {
                    return Err(KbError::InvalidRoadGraph(format!("edge endpoint {end} is not a node")));
                }
            }
            if !(e.length_m > 0.0 && e.length_m.is_finite()) {
                return Err(KbError::InvalidRoadGraph(format!(
                    "edge {}-{} has non-positive length",
                    e.u, e.v
                )));
            }
        }
        Ok(RoadGraph { nodes, edges })
    }

    pub fn nodes(&self) -> &BTreeMap<i64, Wgs84Point> {
        &self.nodes
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }
}

/// Immutable entity store with a bijective rendered-ID index.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    entities: BTreeMap<OsmId, OsmEntity>,
    ids: BTreeMap<OsmId, EntityId>,
    id_index: BTreeMap<String, OsmId>,
    road_graph: RoadGraph,
    enu_anchor: Wgs84Point,
}

impl KnowledgeBase {
    /// Builds a base from entities whose `category` is already set.
    pub fn from_parts(
        entities: Vec<OsmEntity>,
        road_graph: RoadGraph,
        enu_anchor: Wgs84Point,
    ) -> Result<Self, KbError> {
        if entities.is_empty() {
            return Err(KbError::EmptyCorpus);
        }
        let mut map = BTreeMap::new();
        for e in entities {
            if e.name.trim().is_empty() {
                return Err(KbError::InvalidId(format!("{} has an empty name", e.osm_id)));
            }
            if let Some(prev) = map.insert(e.osm_id, e) {
                return Err(KbError::DuplicateEntity(prev.osm_id));
            }
        }
        for e in map.values() {
            for p in e.geometry.points() {
                wgs84_to_enu(enu_anchor, *p).map_err(|source| KbError::Projection {
                    node: e.osm_id.id,
                    source,
                })?;
            }
        }
        let list: Vec<&OsmEntity> = map.values().collect();
        let assigned = ids::assign_ids_for(&list)?;
        let mut ids = BTreeMap::new();
        let mut id_index = BTreeMap::new();
        for (e, id) in list.iter().zip(assigned) {
            id_index.insert(id.rendered().to_string(), e.osm_id);
            ids.insert(e.osm_id, id);
        }
        Ok(KnowledgeBase {
            entities: map,
            ids,
            id_index,
            road_graph,
            enu_anchor,
        })
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities(&self) -> impl Iterator<Item = &OsmEntity> {
        self.entities.values()
    }

    pub fn entity(&self, osm_id: OsmId) -> Option<&OsmEntity> {
        self.entities.get(&osm_id)
    }

    pub fn entity_id(&self, osm_id: OsmId) -> Option<&EntityId> {
        self.ids.get(&osm_id)
    }

    /// `(EntityId, OsmId)` pairs in key order.
    pub fn entity_ids(&self) -> impl Iterator<Item = (&EntityId, OsmId)> {
        self.ids.iter().map(|(k, v)| (v, *k))
    }

    /// Looks up an entity by its rendered ID.
    pub fn resolve(&self, rendered: &str) -> Option<&OsmEntity> {
        self.id_index.get(rendered).and_then(|k| self.entities.get(k))
    }

    pub fn contains_id(&self, rendered: &str) -> bool {
        self.id_index.contains_key(rendered)
    }

    pub fn id_index(&self) -> &BTreeMap<String, OsmId> {
        &self.id_index
    }

    pub fn road_graph(&self) -> &RoadGraph {
        &self.road_graph
    }

    pub fn enu_anchor(&self) -> Wgs84Point {
        self.enu_anchor
    }

    pub fn to_enu(&self, p: Wgs84Point) -> Result<EnuPoint, GeoError> {
        wgs84_to_enu(self.enu_anchor, p)
    }

    /// Entity geometry in the ENU frame.
    pub fn target(&self, osm_id: OsmId) -> Option<Target> {
        let e = self.entities.get(&osm_id)?;
        let target = match &e.geometry {
            Geometry::Point(p) => Target::Point(self.to_enu(*p).ok()?),
            Geometry::Polygon(ring) => {
                let pts = ring.iter().map(|p| self.to_enu(*p)).collect::<Result<Vec<_>, _>>().ok()?;
                Target::Polygon(Polygon::new(pts).ok()?)
            }
        };
        Some(target)
    }
}
