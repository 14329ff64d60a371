//! Metric graph data model: vertices, edges with lengths, incidence, and the
//! vertex condition assignment (standard, Dirichlet, tagged truncation ends).

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{QgError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

/// Which endpoint of an edge an incidence refers to. The tail sits at offset 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Tail,
    Head,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeEnd {
    pub edge: EdgeId,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub label: String,
    pub tail: VertexId,
    pub head: VertexId,
    pub length: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }

    pub fn endpoint(&self, side: Side) -> VertexId {
        match side {
            Side::Tail => self.tail,
            Side::Head => self.head,
        }
    }
}

/// A finite metric graph. Loops and parallel edges are allowed; a loop appears
/// twice in the incidence list of its vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertex_labels: Vec<String>,
    edges: Vec<Edge>,
    incidence: Vec<Vec<EdgeEnd>>,
}

impl MetricGraph {
    /// Builds and validates a connected graph.
    pub fn new(vertex_labels: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let g = Self::new_allow_disconnected(vertex_labels, edges)?;
        let components = g.component_count();
        if components != 1 {
            return Err(QgError::Disconnected { components });
        }
        Ok(g)
    }

    /// Same checks as [`MetricGraph::new`] except connectivity. Surgery may
    /// produce disconnected graphs; the solvers handle them component-wise.
    pub fn new_allow_disconnected(vertex_labels: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        if vertex_labels.is_empty() {
            return Err(QgError::Empty);
        }
        let mut seen = BTreeSet::new();
        for l in &vertex_labels {
            if !seen.insert(l.as_str()) {
                return Err(QgError::DuplicateId(l.clone()));
            }
        }
        let mut seen_edges = BTreeSet::new();
        let n = vertex_labels.len();
        let mut incidence = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if !seen_edges.insert(e.label.as_str()) {
                return Err(QgError::DuplicateId(e.label.clone()));
            }
            if !e.length.is_finite() {
                return Err(QgError::NonFiniteLength(e.label.clone()));
            }
            if e.length <= 0.0 {
                return Err(QgError::NonpositiveLength { edge: e.label.clone(), length: e.length });
            }
            for v in [e.tail, e.head] {
                if v.0 >= n {
                    return Err(QgError::DanglingVertex { edge: e.label.clone(), vertex: format!("#{}", v.0) });
                }
            }
            incidence[e.tail.0].push(EdgeEnd { edge: EdgeId(i), side: Side::Tail });
            incidence[e.head.0].push(EdgeEnd { edge: EdgeId(i), side: Side::Head });
        }
        Ok(Self { vertex_labels, edges, incidence })
    }

    /// Convenience constructor with generated labels `v{i}` / `e{j}`.
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let labels = (0..vertex_count).map(|i| format!("v{i}")).collect();
        let edges = edges
            .iter()
            .enumerate()
            .map(|(j, &(u, v, l))| Edge { label: format!("e{j}"), tail: VertexId(u), head: VertexId(v), length: l })
            .collect();
        Self::new(labels, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertex_labels.len()).map(VertexId)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn vertex_label(&self, v: VertexId) -> &str {
        &self.vertex_labels[v.0]
    }

    pub fn vertex_labels(&self) -> &[String] {
        &self.vertex_labels
    }

    pub fn vertex_by_label(&self, label: &str) -> Option<VertexId> {
        self.vertex_labels.iter().position(|l| l == label).map(VertexId)
    }

    pub fn edge_by_label(&self, label: &str) -> Option<EdgeId> {
        self.edges.iter().position(|e| e.label == label).map(EdgeId)
    }

    pub fn incidence(&self, v: VertexId) -> &[EdgeEnd] {
        &self.incidence[v.0]
    }

    /// Degree with loops counted twice.
    pub fn degree(&self, v: VertexId) -> usize {
        self.incidence[v.0].len()
    }

    pub fn leaves(&self) -> Vec<VertexId> {
        self.vertices().filter(|&v| self.degree(v) == 1).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    /// The vertex at the other end of an incidence.
    pub fn opposite(&self, end: EdgeEnd) -> VertexId {
        let e = self.edge(end.edge);
        match end.side {
            Side::Tail => e.head,
            Side::Head => e.tail,
        }
    }

    /// Component index of every vertex.
    pub fn components(&self) -> Vec<usize> {
        let n = self.vertex_count();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &end in &self.incidence[u] {
                    let w = self.opposite(end).0;
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    pub(crate) fn into_parts(self) -> (Vec<String>, Vec<Edge>) {
        (self.vertex_labels, self.edges)
    }
}

/// Boundary behaviour at a truncation vertex standing in for a graph end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndCondition {
    Neumann,
    Dirichlet,
}

/// Per-vertex condition choice: Dirichlet vertices plus tagged ends. Every
/// other vertex carries standard (continuity + Kirchhoff) conditions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionAssignment {
    dirichlet: BTreeSet<VertexId>,
    end_tags: BTreeMap<VertexId, EndCondition>,
}

impl ConditionAssignment {
    pub fn standard() -> Self {
        Self::default()
    }

    pub fn dirichlet_at(vertices: impl IntoIterator<Item = VertexId>) -> Self {
        Self { dirichlet: vertices.into_iter().collect(), end_tags: BTreeMap::new() }
    }

    /// Dirichlet at every degree-one vertex.
    pub fn dirichlet_leaves(g: &MetricGraph) -> Self {
        Self::dirichlet_at(g.leaves())
    }

    pub fn add_dirichlet(&mut self, v: VertexId) {
        self.dirichlet.insert(v);
    }

    pub fn tag_end(&mut self, v: VertexId, cond: EndCondition) {
        self.end_tags.insert(v, cond);
    }

    pub fn end_tags(&self) -> &BTreeMap<VertexId, EndCondition> {
        &self.end_tags
    }

    pub fn explicit_dirichlet(&self) -> &BTreeSet<VertexId> {
        &self.dirichlet
    }

    /// True for explicit Dirichlet vertices and Dirichlet-tagged ends.
    pub fn is_dirichlet(&self, v: VertexId) -> bool {
        self.dirichlet.contains(&v) || self.end_tags.get(&v) == Some(&EndCondition::Dirichlet)
    }

    /// The effective Dirichlet set, sorted.
    pub fn dirichlet_set(&self) -> Vec<VertexId> {
        let mut set: BTreeSet<VertexId> = self.dirichlet.clone();
        set.extend(self.end_tags.iter().filter(|(_, c)| **c == EndCondition::Dirichlet).map(|(v, _)| *v));
        set.into_iter().collect()
    }

    pub fn has_dirichlet(&self) -> bool {
        !self.dirichlet.is_empty() || self.end_tags.values().any(|c| *c == EndCondition::Dirichlet)
    }

    /// Replaces every end tag by `rule`.
    pub fn with_end_rule(&self, rule: EndCondition) -> Self {
        let mut out = self.clone();
        for c in out.end_tags.values_mut() {
            *c = rule;
        }
        out
    }

    /// Drops every Dirichlet condition, keeping end tags as Neumann.
    pub fn neumann_version(&self) -> Self {
        Self { dirichlet: BTreeSet::new(), end_tags: self.with_end_rule(EndCondition::Neumann).end_tags }
    }

    pub fn validate(&self, g: &MetricGraph) -> Result<()> {
        let n = g.vertex_count();
        for v in self.dirichlet.iter().chain(self.end_tags.keys()) {
            if v.0 >= n {
                return Err(QgError::UnknownVertex(format!("#{}", v.0)));
            }
        }
        for (v, c) in &self.end_tags {
            if *c == EndCondition::Neumann && self.dirichlet.contains(v) {
                return Err(QgError::InvalidCondition(format!(
                    "vertex {} is both dirichlet and a neumann end",
                    g.vertex_label(*v)
                )));
            }
        }
        Ok(())
    }

    /// Transports the assignment through a vertex map `old -> new`.
    pub fn remap(&self, map: &[Option<VertexId>]) -> Self {
        let tr = |v: &VertexId| map.get(v.0).copied().flatten();
        Self {
            dirichlet: self.dirichlet.iter().filter_map(tr).collect(),
            end_tags: self.end_tags.iter().filter_map(|(v, c)| tr(v).map(|w| (w, *c))).collect(),
        }
    }
}

/// Per-vertex condition keyword in the graph document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VertexCondition {
    #[default]
    Standard,
    Dirichlet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexDoc {
    pub id: String,
    #[serde(default)]
    pub condition: VertexCondition,
    #[serde(default)]
    pub end: Option<EndCondition>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub id: String,
    pub endpoints: [String; 2],
    pub length: f64,
}

/// Serialized graph: `{"vertices":[...],"edges":[...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDocument {
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<EdgeDoc>,
}

impl GraphDocument {
    pub fn into_graph(self) -> Result<(MetricGraph, ConditionAssignment)> {
        let mut index = HashMap::new();
        let mut labels = Vec::with_capacity(self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            if index.insert(v.id.clone(), VertexId(i)).is_some() {
                return Err(QgError::DuplicateId(v.id.clone()));
            }
            labels.push(v.id.clone());
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let lookup = |name: &String| {
                index
                    .get(name)
                    .copied()
                    .ok_or_else(|| QgError::DanglingVertex { edge: e.id.clone(), vertex: name.clone() })
            };
            edges.push(Edge {
                label: e.id.clone(),
                tail: lookup(&e.endpoints[0])?,
                head: lookup(&e.endpoints[1])?,
                length: e.length,
            });
        }
        let g = MetricGraph::new(labels, edges)?;
        let mut cond = ConditionAssignment::standard();
        for (i, v) in self.vertices.iter().enumerate() {
            if v.condition == VertexCondition::Dirichlet {
                cond.add_dirichlet(VertexId(i));
            }
            if let Some(end) = v.end {
                cond.tag_end(VertexId(i), end);
            }
        }
        cond.validate(&g)?;
        Ok((g, cond))
    }

    pub fn from_graph(g: &MetricGraph, cond: &ConditionAssignment) -> Self {
        let vertices = g
            .vertices()
            .map(|v| VertexDoc {
                id: g.vertex_label(v).to_string(),
                condition: if cond.explicit_dirichlet().contains(&v) {
                    VertexCondition::Dirichlet
                } else {
                    VertexCondition::Standard
                },
                end: cond.end_tags().get(&v).copied(),
            })
            .collect();
        let edges = g
            .edges()
            .iter()
            .map(|e| EdgeDoc {
                id: e.label.clone(),
                endpoints: [g.vertex_label(e.tail).to_string(), g.vertex_label(e.head).to_string()],
                length: e.length,
            })
            .collect();
        Self { vertices, edges }
    }
}

/// Parses and validates a graph document.
pub fn build_from_json(text: &str) -> Result<(MetricGraph, ConditionAssignment)> {
    let doc: GraphDocument = serde_json::from_str(text)?;
    doc.into_graph()
}

pub fn to_json(g: &MetricGraph, cond: &ConditionAssignment) -> String {
    serde_json::to_string_pretty(&GraphDocument::from_graph(g, cond)).expect("graph document serializes")
}
