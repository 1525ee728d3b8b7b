//! Semantic graph over items, tags and places, and depth-bounded
//! breadth-first intent expansion.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ItemId, KnowledgeBase};
use crate::text::normalize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("UnknownTagInPair({0})")]
    UnknownTagInPair(String),
    #[error("invalid expansion config: {0}")]
    InvalidConfig(String),
}

/// Node identity. The derived order matches the textual key order
/// (`item:` < `place:` < `tag:`), which fixes traversal tie-breaks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKey {
    Item(String),
    Place(String),
    Tag(String),
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKey::Item(s) => write!(f, "item:{s}"),
            NodeKey::Place(s) => write!(f, "place:{s}"),
            NodeKey::Tag(s) => write!(f, "tag:{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeKind {
    Tagged,
    LocatedAt,
    Related,
}

pub const ALL_EDGE_KINDS: [EdgeKind; 3] = [EdgeKind::Tagged, EdgeKind::LocatedAt, EdgeKind::Related];

/// Curated inter-tag relations and surface aliases.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Relations {
    pub related: Vec<[String; 2]>,
    pub aliases: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default)]
pub struct SemanticGraph {
    nodes: BTreeSet<NodeKey>,
    /// Undirected adjacency; each edge appears under both endpoints.
    adjacency: BTreeMap<NodeKey, BTreeSet<(NodeKey, EdgeKind)>>,
    edges: BTreeSet<(NodeKey, NodeKey, EdgeKind)>,
    aliases: BTreeMap<String, String>,
}

impl SemanticGraph {
    pub fn build(kb: &KnowledgeBase, relations: &Relations) -> Result<Self, GraphError> {
        let mut g = SemanticGraph::default();
        for (surface, tag) in &relations.aliases {
            let tag = normalize(tag);
            if tag.is_empty() {
                continue;
            }
            g.nodes.insert(NodeKey::Tag(tag.clone()));
            g.aliases.insert(normalize(surface), tag);
        }
        for item in kb.items() {
            let node = NodeKey::Item(item.id.0.clone());
            g.nodes.insert(node.clone());
            for tag in &item.tags {
                g.add_edge(node.clone(), NodeKey::Tag(tag.clone()), EdgeKind::Tagged);
            }
            if !item.location_name.trim().is_empty() {
                g.add_edge(node.clone(), NodeKey::Place(item.location_name.trim().to_string()), EdgeKind::LocatedAt);
            }
        }
        for [a, b] in &relations.related {
            let (a, b) = (normalize(a), normalize(b));
            for t in [&a, &b] {
                if !g.nodes.contains(&NodeKey::Tag(t.clone())) {
                    return Err(GraphError::UnknownTagInPair(t.clone()));
                }
            }
            if a != b {
                g.add_edge(NodeKey::Tag(a), NodeKey::Tag(b), EdgeKind::Related);
            }
        }
        Ok(g)
    }

    fn add_edge(&mut self, a: NodeKey, b: NodeKey, kind: EdgeKind) {
        self.nodes.insert(a.clone());
        self.nodes.insert(b.clone());
        let key = if a <= b { (a.clone(), b.clone(), kind) } else { (b.clone(), a.clone(), kind) };
        if self.edges.insert(key) {
            self.adjacency.entry(a.clone()).or_default().insert((b.clone(), kind));
            self.adjacency.entry(b).or_default().insert((a, kind));
        }
    }

    pub fn nodes(&self) -> &BTreeSet<NodeKey> {
        &self.nodes
    }

    /// Each undirected edge once, endpoints in key order.
    pub fn edges(&self) -> &BTreeSet<(NodeKey, NodeKey, EdgeKind)> {
        &self.edges
    }

    pub fn edge_count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.2 == kind).count()
    }

    pub fn neighbors(&self, node: &NodeKey) -> impl Iterator<Item = &(NodeKey, EdgeKind)> {
        self.adjacency.get(node).into_iter().flatten()
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().filter_map(|n| match n {
            NodeKey::Tag(t) => Some(t.as_str()),
            _ => None,
        })
    }

    /// Tag node for an intent, by exact token or alias.
    pub fn resolve_intent(&self, intent: &str) -> Option<NodeKey> {
        let key = normalize(intent);
        let exact = NodeKey::Tag(key.clone());
        if self.nodes.contains(&exact) {
            return Some(exact);
        }
        self.aliases.get(&key).map(|t| NodeKey::Tag(t.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionConfig {
    pub allowed_relations: BTreeSet<EdgeKind>,
    pub max_depth: usize,
    pub max_nodes: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig { allowed_relations: ALL_EDGE_KINDS.into_iter().collect(), max_depth: 2, max_nodes: 64 }
    }
}

impl ExpansionConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.max_depth < 1 {
            return Err(GraphError::InvalidConfig("max_depth must be >= 1".into()));
        }
        if self.max_nodes < 1 {
            return Err(GraphError::InvalidConfig("max_nodes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expansion {
    pub items: BTreeSet<ItemId>,
    /// Tag tokens reached, seeds included.
    pub tags: BTreeSet<String>,
    /// Reached nodes in visit order, after truncation.
    pub order: Vec<NodeKey>,
}

/// Breadth-first expansion from the tag nodes matching `intents`.
///
/// Seeds and neighbors are visited in key order; traversal uses only the
/// allowed edge kinds, stops at `max_depth` hops and keeps the first
/// `max_nodes` nodes reached.
pub fn expand<S: AsRef<str>>(intents: &[S], g: &SemanticGraph, cfg: &ExpansionConfig) -> Result<Expansion, GraphError> {
    cfg.validate()?;
    let seeds: BTreeSet<NodeKey> = intents.iter().filter_map(|i| g.resolve_intent(i.as_ref())).collect();
    let mut visited: BTreeSet<NodeKey> = BTreeSet::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    for s in seeds {
        if visited.insert(s.clone()) {
            order.push(s.clone());
            queue.push_back((s, 0usize));
        }
    }
    while let Some((node, depth)) = queue.pop_front() {
        if order.len() >= cfg.max_nodes {
            break;
        }
        if depth == cfg.max_depth {
            continue;
        }
        for (next, kind) in g.neighbors(&node) {
            if !cfg.allowed_relations.contains(kind) || visited.contains(next) {
                continue;
            }
            visited.insert(next.clone());
            order.push(next.clone());
            queue.push_back((next.clone(), depth + 1));
        }
    }
    order.truncate(cfg.max_nodes);

    let mut out = Expansion::default();
    for n in &order {
        match n {
            NodeKey::Item(id) => {
                out.items.insert(ItemId(id.clone()));
            }
            NodeKey::Tag(t) => {
                out.tags.insert(t.clone());
            }
            NodeKey::Place(_) => {}
        }
    }
    out.order = order;
    Ok(out)
}
