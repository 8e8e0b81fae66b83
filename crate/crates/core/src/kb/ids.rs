use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{KbError, OsmEntity};
use crate::tokenize::{tokenize, EOS};

/// Category for entities matched by no rule.
pub const DEFAULT_CATEGORY: &str = "Place";

const DEFAULT_RULES: &str = include_str!("../../data/category_rules.txt");

/// Hierarchical identifier `Category-Name`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawEntityId", into = "RawEntityId")]
pub struct EntityId {
    category_part: String,
    name_part: String,
    rendered: String,
    tokens: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawEntityId {
    category: String,
    name: String,
}

impl TryFrom<RawEntityId> for EntityId {
    type Error = KbError;
    fn try_from(raw: RawEntityId) -> Result<Self, KbError> {
        EntityId::new(&raw.category, &raw.name)
    }
}

impl From<EntityId> for RawEntityId {
    fn from(id: EntityId) -> Self {
        RawEntityId {
            category: id.category_part,
            name: id.name_part,
        }
    }
}

impl EntityId {
    pub fn new(category: &str, name: &str) -> Result<Self, KbError> {
        let (category, name) = (category.trim(), name.trim());
        if category.is_empty() || name.is_empty() {
            return Err(KbError::InvalidId(format!("{category:?}-{name:?} has an empty part")));
        }
        let rendered = format!("{category}-{name}");
        if rendered.contains(EOS) {
            return Err(KbError::InvalidId(format!("{rendered:?} contains the reserved token {EOS}")));
        }
        Ok(EntityId {
            category_part: category.to_string(),
            name_part: name.to_string(),
            tokens: tokenize(&rendered),
            rendered,
        })
    }

    pub fn category_part(&self) -> &str {
        &self.category_part
    }

    pub fn name_part(&self) -> &str {
        &self.name_part
    }

    pub fn rendered(&self) -> &str {
        &self.rendered
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRule {
    pub key: String,
    /// `None` matches any value.
    pub value: Option<String>,
    pub category: String,
}

impl CategoryRule {
    pub fn matches(&self, tags: &BTreeMap<String, String>) -> bool {
        match (tags.get(&self.key), &self.value) {
            (Some(_), None) => true,
            (Some(v), Some(want)) => v == want,
            (None, _) => false,
        }
    }
}

/// Ordered tag rules; the first matching rule decides the category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRules {
    rules: Vec<CategoryRule>,
}

impl Default for CategoryRules {
    fn default() -> Self {
        CategoryRules::parse(DEFAULT_RULES).expect("shipped category rules parse")
    }
}

impl CategoryRules {
    pub fn new(rules: Vec<CategoryRule>) -> Self {
        CategoryRules { rules }
    }

    /// Parses `key=value => Category` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, KbError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| KbError::Rules {
                line: i + 1,
                message: message.to_string(),
            };
            let (lhs, category) = line.split_once("=>").ok_or_else(|| err("expected `key=value => Category`"))?;
            let (key, value) = lhs.split_once('=').ok_or_else(|| err("expected `key=value` before `=>`"))?;
            let (key, value, category) = (key.trim(), value.trim(), category.trim());
            if key.is_empty() || value.is_empty() || category.is_empty() {
                return Err(err("empty key, value or category"));
            }
            rules.push(CategoryRule {
                key: key.to_string(),
                value: (value != "*").then(|| value.to_string()),
                category: category.to_string(),
            });
        }
        Ok(CategoryRules { rules })
    }

    pub fn rules(&self) -> &[CategoryRule] {
        &self.rules
    }

    pub fn categorize(&self, tags: &BTreeMap<String, String>) -> &str {
        self.rules
            .iter()
            .find(|r| r.matches(tags))
            .map(|r| r.category.as_str())
            .unwrap_or(DEFAULT_CATEGORY)
    }

    /// Distinct category names in rule order.
    pub fn categories(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.rules
            .iter()
            .filter(|r| seen.insert(r.category.as_str()))
            .map(|r| r.category.as_str())
            .collect()
    }
}

/// Assigns one ID per entity, categorizing each with `rules`.
///
/// Entities whose rendered form would collide get their OSM id appended to
/// the name part, e.g. `Dining-Cafe#12`.
pub fn assign_entity_ids(entities: &[OsmEntity], rules: &CategoryRules) -> Result<Vec<EntityId>, KbError> {
    let recategorized: Vec<OsmEntity> = entities
        .iter()
        .map(|e| OsmEntity {
            category: rules.categorize(&e.tags).to_string(),
            ..e.clone()
        })
        .collect();
    let refs: Vec<&OsmEntity> = recategorized.iter().collect();
    assign_ids_for(&refs)
}

pub(crate) fn assign_ids_for(entities: &[&OsmEntity]) -> Result<Vec<EntityId>, KbError> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for e in entities {
        let id = EntityId::new(&e.category, &e.name)?;
        *counts.entry(id.rendered).or_default() += 1;
    }
    let mut taken: BTreeSet<String> = counts
        .iter()
        .filter(|(_, n)| **n == 1)
        .map(|(k, _)| k.clone())
        .collect();
    let mut out = Vec::with_capacity(entities.len());
    for e in entities {
        let plain = EntityId::new(&e.category, &e.name)?;
        if counts[plain.rendered()] == 1 {
            out.push(plain);
            continue;
        }
        let mut name = format!("{}#{}", e.name.trim(), e.osm_id.id);
        let mut id = EntityId::new(&e.category, &name)?;
        while taken.contains(id.rendered()) {
            name = format!("{name}#{}", e.osm_id);
            id = EntityId::new(&e.category, &name)?;
        }
        taken.insert(id.rendered().to_string());
        out.push(id);
    }
    Ok(out)
}
