//! OSM subset readers.
//!
//! XML: `<osm>` containing `<node id lat lon>` and `<way id>` elements with
//! `<nd ref>` and `<tag k v>` children. Relations and unknown elements are
//! skipped.
//!
//! JSON lines: one object per line, either
//! `{"type":"node","id":1,"lat":..,"lon":..,"tags":{..}}` or
//! `{"type":"way","id":2,"nodes":[1,..],"tags":{..}}`.

use std::collections::{BTreeMap, BTreeSet};

use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};
use serde::Deserialize;

use super::{CategoryRules, Geometry, KbError, KnowledgeBase, OsmEntity, OsmId, RoadEdge, RoadGraph};
use crate::geodesy::{wgs84_to_enu, Wgs84Point};
use crate::xmlpos::{line_col, skip_ws};

#[derive(Debug, Clone, PartialEq)]
pub struct RawNode {
    pub id: i64,
    pub lat: f64,
    pub lon: f64,
    pub tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawWay {
    pub id: i64,
    pub refs: Vec<i64>,
    pub tags: BTreeMap<String, String>,
}

/// Nodes and ways in document order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawExtract {
    pub nodes: Vec<RawNode>,
    pub ways: Vec<RawWay>,
}

enum Open {
    Node(RawNode),
    Way(RawWay),
}

struct ElementCtx<'a> {
    text: &'a str,
    offset: u64,
    element: &'static str,
}

impl ElementCtx<'_> {
    fn err(&self, message: impl Into<String>) -> KbError {
        let (line, column) = line_col(self.text, self.offset);
        KbError::InvalidElement {
            element: self.element.to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    fn attrs(&self, e: &BytesStart<'_>) -> Result<BTreeMap<String, String>, KbError> {
        let mut out = BTreeMap::new();
        for attr in e.attributes() {
            let attr = attr.map_err(|err| self.err(err.to_string()))?;
            let key = attr.key.as_ref().to_string();
            let value = attr
                .normalized_value(XmlVersion::Implicit1_0)
                .map_err(|err| self.err(err.to_string()))?
                .into_owned();
            out.insert(key, value);
        }
        Ok(out)
    }

    fn required<T: std::str::FromStr>(&self, attrs: &BTreeMap<String, String>, key: &str) -> Result<T, KbError> {
        let raw = attrs
            .get(key)
            .ok_or_else(|| self.err(format!("missing attribute `{key}`")))?;
        raw.trim()
            .parse()
            .map_err(|_| self.err(format!("attribute `{key}` has invalid value {raw:?}")))
    }
}

/// Reads the XML subset into raw nodes and ways.
pub fn read_osm_xml(text: &str) -> Result<RawExtract, KbError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut out = RawExtract::default();
    let mut open: Option<Open> = None;
    let mut relation_depth = 0usize;
    let mut depth = 0usize;
    loop {
        let offset = skip_ws(text, reader.buffer_position());
        let event = reader.read_event().map_err(|e| {
            let (line, column) = line_col(text, reader.error_position());
            KbError::Xml {
                line,
                column,
                message: e.to_string(),
            }
        })?;
        let (start, is_empty) = match &event {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            Event::End(e) => {
                depth = depth.saturating_sub(1);
                match e.name().as_ref() {
                    "relation" => relation_depth = relation_depth.saturating_sub(1),
                    "node" | "way" if relation_depth == 0 => match open.take() {
                        Some(Open::Node(n)) => out.nodes.push(n),
                        Some(Open::Way(w)) => out.ways.push(w),
                        None => {}
                    },
                    _ => {}
                }
                continue;
            }
            Event::Eof => {
                if depth > 0 {
                    let (line, column) = line_col(text, offset);
                    return Err(KbError::Xml {
                        line,
                        column,
                        message: "document ended before all elements were closed".into(),
                    });
                }
                break;
            }
            _ => continue,
        };
        let Some(e) = start else { continue };
        if !is_empty {
            depth += 1;
        }
        let name = e.name().as_ref().to_string();
        if name == "relation" {
            if !is_empty {
                relation_depth += 1;
            }
            continue;
        }
        if relation_depth > 0 {
            continue;
        }
        match name.as_str() {
            "node" => {
                let ctx = ElementCtx { text, offset, element: "node" };
                let attrs = ctx.attrs(&e)?;
                let node = RawNode {
                    id: ctx.required(&attrs, "id")?,
                    lat: ctx.required(&attrs, "lat")?,
                    lon: ctx.required(&attrs, "lon")?,
                    tags: BTreeMap::new(),
                };
                if is_empty {
                    out.nodes.push(node);
                } else {
                    open = Some(Open::Node(node));
                }
            }
            "way" => {
                let ctx = ElementCtx { text, offset, element: "way" };
                let attrs = ctx.attrs(&e)?;
                let way = RawWay {
                    id: ctx.required(&attrs, "id")?,
                    refs: Vec::new(),
                    tags: BTreeMap::new(),
                };
                if is_empty {
                    out.ways.push(way);
                } else {
                    open = Some(Open::Way(way));
                }
            }
            "tag" => {
                let ctx = ElementCtx { text, offset, element: "tag" };
                let attrs = ctx.attrs(&e)?;
                let k: String = ctx.required(&attrs, "k")?;
                let v = attrs.get("v").cloned().unwrap_or_default();
                match open.as_mut() {
                    Some(Open::Node(n)) => n.tags.insert(k, v),
                    Some(Open::Way(w)) => w.tags.insert(k, v),
                    None => return Err(ctx.err("tag outside a node or way")),
                };
            }
            "nd" => {
                let ctx = ElementCtx { text, offset, element: "nd" };
                let attrs = ctx.attrs(&e)?;
                let r: i64 = ctx.required(&attrs, "ref")?;
                match open.as_mut() {
                    Some(Open::Way(w)) => w.refs.push(r),
                    _ => return Err(ctx.err("nd outside a way")),
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum JsonRecord {
    Node {
        id: i64,
        lat: f64,
        lon: f64,
        #[serde(default)]
        tags: BTreeMap<String, String>,
    },
    Way {
        id: i64,
        nodes: Vec<i64>,
        #[serde(default)]
        tags: BTreeMap<String, String>,
    },
}

/// Reads the JSON-lines form; blank lines are ignored.
pub fn read_osm_jsonl(text: &str) -> Result<RawExtract, KbError> {
    let mut out = RawExtract::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonRecord = serde_json::from_str(line).map_err(|e| KbError::JsonLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        match record {
            JsonRecord::Node { id, lat, lon, tags } => out.nodes.push(RawNode { id, lat, lon, tags }),
            JsonRecord::Way { id, nodes, tags } => out.ways.push(RawWay { id, refs: nodes, tags }),
        }
    }
    Ok(out)
}

/// Parses an XML extract into a knowledge base.
pub fn parse_osm_extract(bytes: &[u8], rules: &CategoryRules) -> Result<KnowledgeBase, KbError> {
    let text = std::str::from_utf8(bytes).map_err(|_| KbError::Utf8)?;
    build(read_osm_xml(text)?, rules)
}

/// Parses a JSON-lines extract into a knowledge base.
pub fn parse_osm_jsonl(bytes: &[u8], rules: &CategoryRules) -> Result<KnowledgeBase, KbError> {
    let text = std::str::from_utf8(bytes).map_err(|_| KbError::Utf8)?;
    build(read_osm_jsonl(text)?, rules)
}

fn named(tags: &BTreeMap<String, String>) -> Option<&str> {
    tags.get("name").map(|n| n.trim()).filter(|n| !n.is_empty())
}

impl RawExtract {
    /// Validates references and builds the knowledge base.
    pub fn build(self, rules: &CategoryRules) -> Result<KnowledgeBase, KbError> {
        build(self, rules)
    }
}

fn build(raw: RawExtract, rules: &CategoryRules) -> Result<KnowledgeBase, KbError> {
    let mut nodes: BTreeMap<i64, Wgs84Point> = BTreeMap::new();
    for n in &raw.nodes {
        let p = Wgs84Point::new(n.lat, n.lon).map_err(|source| KbError::InvalidNode { id: n.id, source })?;
        if nodes.insert(n.id, p).is_some() {
            return Err(KbError::DuplicateNode(n.id));
        }
    }
    let mut way_ids = BTreeSet::new();
    for w in &raw.ways {
        if !way_ids.insert(w.id) {
            return Err(KbError::DuplicateWay(w.id));
        }
        if let Some(missing) = w.refs.iter().find(|r| !nodes.contains_key(r)) {
            return Err(KbError::MissingNode { way: w.id, node: *missing });
        }
    }

    let mut entities = Vec::new();
    for w in &raw.ways {
        let Some(name) = named(&w.tags) else { continue };
        if !w.tags.contains_key("building") {
            continue;
        }
        let ring = w.refs.iter().map(|r| nodes[r]).collect();
        let geometry = Geometry::polygon(ring).map_err(|source| KbError::InvalidBuilding { way: w.id, source })?;
        entities.push(OsmEntity {
            osm_id: OsmId::way(w.id),
            name: name.to_string(),
            category: rules.categorize(&w.tags).to_string(),
            geometry,
            tags: w.tags.clone(),
        });
    }
    if entities.is_empty() {
        return Err(KbError::EmptyCorpus);
    }

    let anchor = bbox_centroid(nodes.values())?;
    let mut road_nodes = BTreeMap::new();
    let mut edges = Vec::new();
    for w in raw.ways.iter().filter(|w| w.tags.contains_key("highway")) {
        for pair in w.refs.windows(2) {
            let (u, v) = (pair[0], pair[1]);
            if u == v {
                continue;
            }
            let pu = wgs84_to_enu(anchor, nodes[&u]).map_err(|source| KbError::Projection { node: u, source })?;
            let pv = wgs84_to_enu(anchor, nodes[&v]).map_err(|source| KbError::Projection { node: v, source })?;
            let length_m = pu.distance(pv);
            if length_m <= 0.0 {
                continue;
            }
            road_nodes.insert(u, nodes[&u]);
            road_nodes.insert(v, nodes[&v]);
            edges.push(RoadEdge { u, v, length_m });
        }
    }
    let road_graph = RoadGraph::new(road_nodes, edges)?;
    KnowledgeBase::from_parts(entities, road_graph, anchor)
}

fn bbox_centroid<'a>(points: impl Iterator<Item = &'a Wgs84Point>) -> Result<Wgs84Point, KbError> {
    let (mut min_lat, mut max_lat) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_lon, mut max_lon) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        min_lat = min_lat.min(p.lat());
        max_lat = max_lat.max(p.lat());
        min_lon = min_lon.min(p.lon());
        max_lon = max_lon.max(p.lon());
    }
    Wgs84Point::new((min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0).map_err(|_| KbError::EmptyCorpus)
}
