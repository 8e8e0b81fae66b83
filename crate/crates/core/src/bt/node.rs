use std::fmt::{self, Write as _};

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};
use serde::{Deserialize, Serialize};

use super::BtError;
use crate::xmlpos::{line_col, skip_ws};

/// Behavior-tree node. Composites hold at least one child.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BtNode {
    Sequence { children: Vec<BtNode> },
    Fallback { children: Vec<BtNode> },
    Action { skill: String, target: Option<String> },
    Condition { name: String },
}

impl BtNode {
    pub fn sequence(children: Vec<BtNode>) -> Self {
        BtNode::Sequence { children }
    }

    pub fn fallback(children: Vec<BtNode>) -> Self {
        BtNode::Fallback { children }
    }

    pub fn action(skill: &str, target: Option<&str>) -> Self {
        BtNode::Action {
            skill: skill.to_string(),
            target: target.map(str::to_string),
        }
    }

    pub fn condition(name: &str) -> Self {
        BtNode::Condition { name: name.to_string() }
    }

    pub fn children(&self) -> &[BtNode] {
        match self {
            BtNode::Sequence { children } | BtNode::Fallback { children } => children,
            _ => &[],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, BtNode::Action { .. } | BtNode::Condition { .. })
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        self.children().iter().map(|c| c.depth() + 1).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(BtNode::node_count).sum::<usize>()
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&BtNode> {
        if self.is_leaf() {
            return vec![self];
        }
        self.children().iter().flat_map(BtNode::leaves).collect()
    }

    /// Node at a child-index path from this node.
    pub fn at(&self, path: &[usize]) -> Option<&BtNode> {
        path.iter().try_fold(self, |n, &i| n.children().get(i))
    }

    /// Skill and condition names referenced by leaves.
    pub fn leaf_names(&self) -> Vec<&str> {
        self.leaves()
            .into_iter()
            .map(|l| match l {
                BtNode::Action { skill, .. } => skill.as_str(),
                BtNode::Condition { name } => name.as_str(),
                _ => unreachable!(),
            })
            .collect()
    }

    /// Checks that composites are non-empty and names are non-blank.
    pub fn validate(&self) -> Result<(), BtError> {
        match self {
            BtNode::Sequence { children } | BtNode::Fallback { children } => {
                if children.is_empty() {
                    return Err(BtError::InvalidTree(format!("{} without children", self.tag())));
                }
                children.iter().try_for_each(BtNode::validate)
            }
            BtNode::Action { skill, .. } if skill.trim().is_empty() => {
                Err(BtError::InvalidTree("Action with an empty skill".into()))
            }
            BtNode::Condition { name } if name.trim().is_empty() => {
                Err(BtError::InvalidTree("Condition with an empty name".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            BtNode::Sequence { .. } => "Sequence",
            BtNode::Fallback { .. } => "Fallback",
            BtNode::Action { .. } => "Action",
            BtNode::Condition { .. } => "Condition",
        }
    }

    /// Pretty-printed XML, two spaces per level, trailing newline.
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        self.write_xml(&mut out, 0);
        out
    }

    fn write_xml(&self, out: &mut String, level: usize) {
        let pad = "  ".repeat(level);
        match self {
            BtNode::Sequence { children } | BtNode::Fallback { children } => {
                let _ = writeln!(out, "{pad}<{}>", self.tag());
                for c in children {
                    c.write_xml(out, level + 1);
                }
                let _ = writeln!(out, "{pad}</{}>", self.tag());
            }
            BtNode::Action { skill, target } => {
                let _ = write!(out, "{pad}<Action skill=\"{}\"", escape(skill.as_str()));
                if let Some(t) = target {
                    let _ = write!(out, " target=\"{}\"", escape(t.as_str()));
                }
                out.push_str("/>\n");
            }
            BtNode::Condition { name } => {
                let _ = writeln!(out, "{pad}<Condition name=\"{}\"/>", escape(name.as_str()));
            }
        }
    }

    /// Parses the XML schema: `<Sequence>`, `<Fallback>`,
    /// `<Action skill target?/>` and `<Condition name/>`, one root element.
    pub fn from_xml(text: &str) -> Result<BtNode, BtError> {
        parse_bt(text)
    }
}

/// One-line leaf description used in tick logs.
impl fmt::Display for BtNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BtNode::Action { skill, target: Some(t) } => write!(f, "Action skill={skill} target={t:?}"),
            BtNode::Action { skill, target: None } => write!(f, "Action skill={skill}"),
            BtNode::Condition { name } => write!(f, "Condition name={name}"),
            other => write!(f, "{}[{}]", other.tag(), other.children().len()),
        }
    }
}

pub fn serialize_bt(node: &BtNode) -> String {
    node.to_xml()
}

struct Frame {
    tag: &'static str,
    children: Vec<BtNode>,
    line: usize,
    column: usize,
}

pub fn parse_bt(text: &str) -> Result<BtNode, BtError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut stack: Vec<Frame> = Vec::new();
    let mut root: Option<BtNode> = None;
    loop {
        let offset = skip_ws(text, reader.buffer_position());
        let (line, column) = line_col(text, offset);
        let schema = |message: String| BtError::Schema { line, column, message };
        let event = reader.read_event().map_err(|e| {
            let (line, column) = line_col(text, reader.error_position());
            BtError::Schema {
                line,
                column,
                message: e.to_string(),
            }
        })?;
        let finished = match event {
            Event::Start(e) => {
                let tag = composite_or_leaf(&e).map_err(schema)?;
                match tag {
                    "Sequence" | "Fallback" => {
                        no_attributes(&e).map_err(schema)?;
                        stack.push(Frame {
                            tag,
                            children: Vec::new(),
                            line,
                            column,
                        });
                        None
                    }
                    _ => {
                        let leaf = leaf(&e, tag).map_err(schema)?;
                        let next_off = skip_ws(text, reader.buffer_position());
                        match reader.read_event() {
                            Ok(Event::End(_)) => {}
                            _ => {
                                let (line, column) = line_col(text, next_off);
                                return Err(BtError::Schema {
                                    line,
                                    column,
                                    message: format!("<{tag}> cannot have children"),
                                });
                            }
                        }
                        Some(leaf)
                    }
                }
            }
            Event::Empty(e) => {
                let tag = composite_or_leaf(&e).map_err(schema)?;
                match tag {
                    "Sequence" | "Fallback" => return Err(schema(format!("<{tag}> needs at least one child"))),
                    _ => Some(leaf(&e, tag).map_err(schema)?),
                }
            }
            Event::End(_) => {
                let frame = stack.pop().ok_or_else(|| schema("unexpected closing tag".into()))?;
                let node = match frame.tag {
                    "Sequence" | "Fallback" if frame.children.is_empty() => {
                        return Err(BtError::Schema {
                            line: frame.line,
                            column: frame.column,
                            message: format!("<{}> needs at least one child", frame.tag),
                        })
                    }
                    "Sequence" => BtNode::sequence(frame.children),
                    _ => BtNode::fallback(frame.children),
                };
                Some(node)
            }
            Event::Text(t) => {
                if !t.as_ref().trim().is_empty() {
                    return Err(schema("unexpected text content".into()));
                }
                None
            }
            Event::Comment(_) | Event::Decl(_) => None,
            Event::Eof => break,
            other => return Err(schema(format!("unsupported XML construct {other:?}"))),
        };
        if let Some(node) = finished {
            match stack.last_mut() {
                Some(parent) => parent.children.push(node),
                None if root.is_none() => root = Some(node),
                None => return Err(schema("more than one root element".into())),
            }
        }
    }
    if let Some(frame) = stack.last() {
        return Err(BtError::Schema {
            line: frame.line,
            column: frame.column,
            message: format!("unclosed <{}>", frame.tag),
        });
    }
    root.ok_or(BtError::Schema {
        line: 1,
        column: 1,
        message: "document has no root element".into(),
    })
}

fn composite_or_leaf(e: &BytesStart<'_>) -> Result<&'static str, String> {
    match e.name().as_ref() {
        "Sequence" => Ok("Sequence"),
        "Fallback" => Ok("Fallback"),
        "Action" => Ok("Action"),
        "Condition" => Ok("Condition"),
        other => Err(format!("unknown tag <{other}>")),
    }
}

fn attributes(e: &BytesStart<'_>) -> Result<Vec<(String, String)>, String> {
    e.attributes()
        .map(|a| {
            let a = a.map_err(|err| err.to_string())?;
            let value = a
                .normalized_value(XmlVersion::Implicit1_0)
                .map_err(|err| err.to_string())?
                .into_owned();
            Ok((a.key.as_ref().to_string(), value))
        })
        .collect()
}

fn no_attributes(e: &BytesStart<'_>) -> Result<(), String> {
    match attributes(e)?.first() {
        Some((k, _)) => Err(format!("unknown attribute `{k}` on <{}>", e.name().as_ref())),
        None => Ok(()),
    }
}

fn leaf(e: &BytesStart<'_>, tag: &str) -> Result<BtNode, String> {
    let mut skill = None;
    let mut target = None;
    let mut name = None;
    for (k, v) in attributes(e)? {
        match (tag, k.as_str()) {
            ("Action", "skill") => skill = Some(v),
            ("Action", "target") => target = Some(v),
            ("Condition", "name") => name = Some(v),
            _ => return Err(format!("unknown attribute `{k}` on <{tag}>")),
        }
    }
    let node = if tag == "Action" {
        BtNode::Action {
            skill: skill.ok_or("<Action> is missing the `skill` attribute")?,
            target,
        }
    } else {
        BtNode::Condition {
            name: name.ok_or("<Condition> is missing the `name` attribute")?,
        }
    };
    node.validate().map_err(|e| e.to_string())?;
    Ok(node)
}
