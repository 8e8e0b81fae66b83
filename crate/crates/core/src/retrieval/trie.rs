use std::collections::BTreeMap;

use super::RetrievalError;
use crate::kb::{EntityId, KnowledgeBase, OsmId};
use crate::tokenize::EOS;

#[derive(Debug, Clone, PartialEq)]
struct TrieNode {
    children: BTreeMap<String, usize>,
    terminal: Option<(OsmId, String)>,
}

impl TrieNode {
    fn empty() -> Self {
        TrieNode {
            children: BTreeMap::new(),
            terminal: None,
        }
    }
}

/// Prefix tree over entity token sequences, each closed by [`EOS`].
///
/// Terminal nodes sit after the `EOS` edge, so no terminal has children and
/// the ID set is prefix-free.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityTrie {
    nodes: Vec<TrieNode>,
    terminals: usize,
}

/// Handle to a trie node.
pub type NodeRef = usize;

impl EntityTrie {
    pub const ROOT: NodeRef = 0;

    /// Builds the trie; insertion order does not affect the result.
    pub fn build<I>(entries: I) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = (EntityId, OsmId)>,
    {
        let mut entries: Vec<(EntityId, OsmId)> = entries.into_iter().collect();
        entries.sort_by(|a, b| a.0.rendered().cmp(b.0.rendered()));
        for pair in entries.windows(2) {
            if pair[0].0.rendered() == pair[1].0.rendered() {
                return Err(RetrievalError::DuplicateId(pair[0].0.rendered().to_string()));
            }
        }
        let mut trie = EntityTrie {
            nodes: vec![TrieNode::empty()],
            terminals: 0,
        };
        for (id, osm_id) in entries {
            let mut at = Self::ROOT;
            for tok in id.tokens().iter().map(String::as_str).chain(std::iter::once(EOS)) {
                at = match trie.nodes[at].children.get(tok) {
                    Some(next) => *next,
                    None => {
                        trie.nodes.push(TrieNode::empty());
                        let next = trie.nodes.len() - 1;
                        trie.nodes[at].children.insert(tok.to_string(), next);
                        next
                    }
                };
            }
            trie.nodes[at].terminal = Some((osm_id, id.rendered().to_string()));
            trie.terminals += 1;
        }
        Ok(trie)
    }

    pub fn from_kb(kb: &KnowledgeBase) -> Result<Self, RetrievalError> {
        Self::build(kb.entity_ids().map(|(id, k)| (id.clone(), k)))
    }

    pub fn terminal_count(&self) -> usize {
        self.terminals
    }

    pub fn is_empty(&self) -> bool {
        self.terminals == 0
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Follows `prefix` from the root.
    pub fn walk<S: AsRef<str>>(&self, prefix: &[S]) -> Option<NodeRef> {
        prefix
            .iter()
            .try_fold(Self::ROOT, |at, tok| self.child(at, tok.as_ref()))
    }

    pub fn child(&self, node: NodeRef, token: &str) -> Option<NodeRef> {
        self.nodes.get(node)?.children.get(token).copied()
    }

    /// Admissible next tokens at `node`, sorted.
    pub fn children(&self, node: NodeRef) -> impl Iterator<Item = (&str, NodeRef)> {
        self.nodes[node].children.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn child_count(&self, node: NodeRef) -> usize {
        self.nodes[node].children.len()
    }

    /// Entity key and rendered ID if `node` is terminal.
    pub fn terminal(&self, node: NodeRef) -> Option<(OsmId, &str)> {
        self.nodes[node].terminal.as_ref().map(|(k, s)| (*k, s.as_str()))
    }

    /// Every root-to-terminal token path, in sorted order.
    pub fn paths(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        let mut stack = vec![(Self::ROOT, Vec::<String>::new())];
        while let Some((node, path)) = stack.pop() {
            if self.nodes[node].terminal.is_some() {
                out.push(path.clone());
            }
            for (tok, child) in self.nodes[node].children.iter().rev() {
                let mut next = path.clone();
                next.push(tok.clone());
                stack.push((*child, next));
            }
        }
        out
    }
}
