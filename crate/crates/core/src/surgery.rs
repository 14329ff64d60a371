//! Local graph surgery: dummy vertices, cutting through a vertex, gluing
//! vertices, and attaching pendant trees.

use std::collections::HashSet;

use crate::error::{QgError, Result};
use crate::graph::{ConditionAssignment, Edge, EdgeEnd, EdgeId, MetricGraph, Side, VertexId};

fn fresh_label(taken: &HashSet<String>, base: &str) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{base}.{i}")).find(|l| !taken.contains(l)).expect("unbounded search")
}

fn edge_labels(edges: &[Edge]) -> HashSet<String> {
    edges.iter().map(|e| e.label.clone()).collect()
}

/// Splits `edge` at `position` (measured from its tail) with a new degree-two
/// vertex. Returns the new graph and the id of the inserted vertex.
pub fn insert_dummy(g: &MetricGraph, edge: EdgeId, position: f64) -> Result<(MetricGraph, VertexId)> {
    if edge.0 >= g.edge_count() {
        return Err(QgError::UnknownEdge(format!("#{}", edge.0)));
    }
    let old = g.edge(edge).clone();
    if !(position > 0.0 && position < old.length) {
        return Err(QgError::Surgery(format!("position {position} outside (0, {})", old.length)));
    }
    let (mut labels, mut edges) = g.clone().into_parts();
    let vset: HashSet<String> = labels.iter().cloned().collect();
    let w = VertexId(labels.len());
    labels.push(fresh_label(&vset, &format!("{}@{position}", old.label)));
    let eset = edge_labels(&edges);
    let second = fresh_label(&eset, &format!("{}'", old.label));
    edges[edge.0] = Edge { label: old.label.clone(), tail: old.tail, head: w, length: position };
    edges.push(Edge { label: second, tail: w, head: old.head, length: old.length - position });
    Ok((MetricGraph::new_allow_disconnected(labels, edges)?, w))
}

/// Removes a degree-two vertex by merging its two edges. Returns the vertex map.
pub fn merge_dummy(g: &MetricGraph, v: VertexId) -> Result<(MetricGraph, Vec<Option<VertexId>>)> {
    if v.0 >= g.vertex_count() {
        return Err(QgError::UnknownVertex(format!("#{}", v.0)));
    }
    let inc = g.incidence(v);
    if inc.len() != 2 || inc[0].edge == inc[1].edge {
        return Err(QgError::Surgery(format!("vertex {} is not an interior degree-two vertex", g.vertex_label(v))));
    }
    let (e1, e2) = (inc[0], inc[1]);
    let a = g.opposite(e1);
    let b = g.opposite(e2);
    let merged_len = g.edge(e1.edge).length + g.edge(e2.edge).length;
    let label = g.edge(e1.edge).label.clone();
    let (labels, edges) = g.clone().into_parts();
    let map: Vec<Option<VertexId>> = (0..labels.len())
        .map(|i| match i.cmp(&v.0) {
            std::cmp::Ordering::Less => Some(VertexId(i)),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(VertexId(i - 1)),
        })
        .collect();
    let mut new_edges = Vec::with_capacity(edges.len() - 1);
    for (i, e) in edges.into_iter().enumerate() {
        if i == e1.edge.0 {
            new_edges.push(Edge { label: label.clone(), tail: map[a.0].unwrap(), head: map[b.0].unwrap(), length: merged_len });
        } else if i != e2.edge.0 {
            new_edges.push(Edge { tail: map[e.tail.0].unwrap(), head: map[e.head.0].unwrap(), ..e });
        }
    }
    let new_labels = labels.into_iter().enumerate().filter(|(i, _)| *i != v.0).map(|(_, l)| l).collect();
    Ok((MetricGraph::new_allow_disconnected(new_labels, new_edges)?, map))
}

/// Result of cutting through a vertex.
#[derive(Debug, Clone)]
pub struct CutOutcome {
    pub graph: MetricGraph,
    /// The cut vertex keeps its id for the first block; these are the others.
    pub new_vertices: Vec<VertexId>,
    pub cut_vertex: VertexId,
    /// Set when the cut disconnected the graph. Not an error.
    pub disconnected: bool,
}

impl CutOutcome {
    /// Number of elementary cuts performed (blocks minus one).
    pub fn cuts(&self) -> usize {
        self.new_vertices.len()
    }

    /// Conditions on the cut graph: every piece of a Dirichlet vertex stays Dirichlet.
    pub fn conditions(&self, cond: &ConditionAssignment) -> ConditionAssignment {
        let mut out = cond.clone();
        if cond.is_dirichlet(self.cut_vertex) {
            for &v in &self.new_vertices {
                out.add_dirichlet(v);
            }
        }
        out
    }
}

/// Replaces `v` by one vertex per block of `partition`, a grouping of the
/// edge-ends incident to `v`.
pub fn cut_vertex(g: &MetricGraph, v: VertexId, partition: &[Vec<EdgeEnd>]) -> Result<CutOutcome> {
    if v.0 >= g.vertex_count() {
        return Err(QgError::UnknownVertex(format!("#{}", v.0)));
    }
    if partition.len() < 2 || partition.iter().any(|b| b.is_empty()) {
        return Err(QgError::Surgery("partition needs at least two nonempty blocks".into()));
    }
    let mut expected: Vec<(usize, bool)> = g.incidence(v).iter().map(|e| (e.edge.0, e.side == Side::Tail)).collect();
    let mut given: Vec<(usize, bool)> = partition.iter().flatten().map(|e| (e.edge.0, e.side == Side::Tail)).collect();
    expected.sort_unstable();
    given.sort_unstable();
    if expected != given {
        return Err(QgError::Surgery(format!("partition does not match the incidences of {}", g.vertex_label(v))));
    }
    let (mut labels, mut edges) = g.clone().into_parts();
    let vset: HashSet<String> = labels.iter().cloned().collect();
    let base = labels[v.0].clone();
    let mut new_vertices = Vec::new();
    for (bi, block) in partition.iter().enumerate().skip(1) {
        let w = VertexId(labels.len());
        labels.push(fresh_label(&vset, &format!("{base}#{bi}")));
        new_vertices.push(w);
        for end in block {
            let e = &mut edges[end.edge.0];
            match end.side {
                Side::Tail => e.tail = w,
                Side::Head => e.head = w,
            }
        }
    }
    let graph = MetricGraph::new_allow_disconnected(labels, edges)?;
    let disconnected = !graph.is_connected();
    Ok(CutOutcome { graph, new_vertices, cut_vertex: v, disconnected })
}

/// Identifies `w` with `v`. Returns the glued graph and the vertex map.
pub fn glue_vertices(g: &MetricGraph, v: VertexId, w: VertexId) -> Result<(MetricGraph, Vec<Option<VertexId>>)> {
    for x in [v, w] {
        if x.0 >= g.vertex_count() {
            return Err(QgError::UnknownVertex(format!("#{}", x.0)));
        }
    }
    if v == w {
        return Err(QgError::Surgery("cannot glue a vertex to itself".into()));
    }
    let (labels, edges) = g.clone().into_parts();
    let map: Vec<Option<VertexId>> = (0..labels.len())
        .map(|i| {
            let target = if i == w.0 { v.0 } else { i };
            Some(VertexId(if target > w.0 { target - 1 } else { target }))
        })
        .collect();
    let new_edges = edges
        .into_iter()
        .map(|e| Edge { tail: map[e.tail.0].unwrap(), head: map[e.head.0].unwrap(), ..e })
        .collect();
    let new_labels = labels.into_iter().enumerate().filter(|(i, _)| *i != w.0).map(|(_, l)| l).collect();
    Ok((MetricGraph::new_allow_disconnected(new_labels, new_edges)?, map))
}

/// Glues the tree `t` to `g` by identifying `root` (a vertex of `t`) with `v`.
pub fn attach_pendant(g: &MetricGraph, v: VertexId, t: &MetricGraph, root: VertexId) -> Result<MetricGraph> {
    if v.0 >= g.vertex_count() {
        return Err(QgError::UnknownVertex(format!("#{}", v.0)));
    }
    if root.0 >= t.vertex_count() {
        return Err(QgError::UnknownVertex(format!("pendant root #{}", root.0)));
    }
    if t.edge_count() + 1 != t.vertex_count() || !t.is_connected() {
        return Err(QgError::NotATree(format!("{} vertices, {} edges", t.vertex_count(), t.edge_count())));
    }
    let (mut labels, mut edges) = g.clone().into_parts();
    let mut vset: HashSet<String> = labels.iter().cloned().collect();
    let mut eset = edge_labels(&edges);
    let mut map = vec![VertexId(usize::MAX); t.vertex_count()];
    for u in t.vertices() {
        if u == root {
            map[u.0] = v;
            continue;
        }
        let l = fresh_label(&vset, t.vertex_label(u));
        vset.insert(l.clone());
        map[u.0] = VertexId(labels.len());
        labels.push(l);
    }
    for e in t.edges() {
        let l = fresh_label(&eset, &e.label);
        eset.insert(l.clone());
        edges.push(Edge { label: l, tail: map[e.tail.0], head: map[e.head.0], length: e.length });
    }
    MetricGraph::new(labels, edges)
}
