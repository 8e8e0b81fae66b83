//! Versioned JSON snapshot (`kb.json`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KbError, KnowledgeBase, OsmEntity, RoadGraph};
use crate::geodesy::Wgs84Point;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Snapshot {
    format_version: u32,
    enu_anchor: Wgs84Point,
    entities: Vec<SnapshotEntity>,
    road_graph: RoadGraph,
}

#[derive(Serialize, Deserialize)]
struct SnapshotEntity {
    entity_id: String,
    #[serde(flatten)]
    entity: OsmEntity,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl KnowledgeBase {
    pub fn to_json(&self) -> String {
        let snapshot = Snapshot {
            format_version: SNAPSHOT_FORMAT_VERSION,
            enu_anchor: self.enu_anchor,
            entities: self
                .entities
                .values()
                .map(|e| SnapshotEntity {
                    entity_id: self.ids[&e.osm_id].rendered().to_string(),
                    entity: e.clone(),
                })
                .collect(),
            road_graph: self.road_graph.clone(),
        };
        serde_json::to_string_pretty(&snapshot).expect("snapshot serializes")
    }

    /// Loads a snapshot, re-validating every invariant.
    pub fn from_json(text: &str) -> Result<Self, KbError> {
        let probe: VersionProbe =
            serde_json::from_str(text).map_err(|e| KbError::Snapshot(format!("missing format_version: {e}")))?;
        if probe.format_version != SNAPSHOT_FORMAT_VERSION {
            return Err(KbError::UnsupportedVersion {
                found: probe.format_version,
                expected: SNAPSHOT_FORMAT_VERSION,
            });
        }
        let snapshot: Snapshot = serde_json::from_str(text).map_err(|e| KbError::Snapshot(e.to_string()))?;
        let stored: Vec<(String, super::OsmId)> = snapshot
            .entities
            .iter()
            .map(|s| (s.entity_id.clone(), s.entity.osm_id))
            .collect();
        let road_graph = RoadGraph::new(
            snapshot.road_graph.nodes().clone(),
            snapshot.road_graph.edges().to_vec(),
        )?;
        let kb = KnowledgeBase::from_parts(
            snapshot.entities.into_iter().map(|s| s.entity).collect(),
            road_graph,
            snapshot.enu_anchor,
        )?;
        for (rendered, osm_id) in stored {
            if kb.id_index.get(&rendered) != Some(&osm_id) {
                return Err(KbError::Snapshot(format!(
                    "stored id {rendered:?} does not match {osm_id}"
                )));
            }
        }
        Ok(kb)
    }

    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        KnowledgeBase::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{parse_osm_extract, CategoryRules};

    const XML: &str = r#"<osm>
  <node id="1" lat="31.0000" lon="121.0000"/>
  <node id="2" lat="31.0000" lon="121.0003"/>
  <node id="3" lat="31.0002" lon="121.0003"/>
  <node id="4" lat="31.0002" lon="121.0000"/>
  <node id="5" lat="31.0004" lon="121.0000"/>
  <way id="100"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/>
    <tag k="building" v="yes"/><tag k="amenity" v="cafe"/><tag k="name" v="Cafe"/></way>
  <way id="101"><nd ref="4"/><nd ref="3"/><nd ref="5"/>
    <tag k="building" v="yes"/><tag k="amenity" v="cafe"/><tag k="name" v="Cafe"/></way>
  <way id="200"><nd ref="1"/><nd ref="5"/><tag k="highway" v="service"/></way>
</osm>"#;

    #[test]
    fn round_trip_preserves_everything() {
        let kb = parse_osm_extract(XML.as_bytes(), &CategoryRules::default()).unwrap();
        let text = kb.to_json();
        assert!(text.contains("\"format_version\": 1"));
        let back = KnowledgeBase::from_json(&text).unwrap();
        assert_eq!(back, kb);
        assert!(back.contains_id("Dining-Cafe#100"));
        assert_eq!(back.entity_ids().count(), 2);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let kb = parse_osm_extract(XML.as_bytes(), &CategoryRules::default()).unwrap();
        let text = kb.to_json().replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(matches!(
            KnowledgeBase::from_json(&text),
            Err(KbError::UnsupportedVersion { found: 9, .. })
        ));
        assert!(KnowledgeBase::from_json("{}").is_err());
    }
}
