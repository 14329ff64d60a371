//! Metric quantities: total length, Betti number, distances between points,
//! diameter with a certified error, inradius and annulus volumes around an end.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{QgError, Result};
use crate::graph::{ConditionAssignment, EdgeId, MetricGraph, VertexId};

/// A point of the metric graph: an edge and an offset from its tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphPoint {
    pub edge: EdgeId,
    pub offset: f64,
}

impl GraphPoint {
    pub fn new(g: &MetricGraph, edge: EdgeId, offset: f64) -> Result<Self> {
        if edge.0 >= g.edge_count() {
            return Err(QgError::UnknownEdge(format!("#{}", edge.0)));
        }
        let l = g.edge(edge).length;
        if !(0.0..=l).contains(&offset) {
            return Err(QgError::OutOfRange(format!("offset {offset} outside [0, {l}]")));
        }
        Ok(Self { edge, offset })
    }

    /// Some representation of vertex `v`, or `None` for an isolated vertex.
    pub fn at_vertex(g: &MetricGraph, v: VertexId) -> Option<Self> {
        g.incidence(v).first().map(|end| {
            let e = g.edge(end.edge);
            let offset = if e.tail == v { 0.0 } else { e.length };
            Self { edge: end.edge, offset }
        })
    }
}

pub fn total_length(g: &MetricGraph) -> f64 {
    g.total_length()
}

/// First Betti number `|E| - |V| + 1` of a connected graph.
pub fn betti_number(g: &MetricGraph) -> Result<usize> {
    let c = g.component_count();
    if c != 1 {
        return Err(QgError::Disconnected { components: c });
    }
    Ok(g.edge_count() + 1 - g.vertex_count())
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Multi-source Dijkstra over the vertex skeleton. Sources carry initial distances.
pub fn vertex_distances(g: &MetricGraph, sources: &[(VertexId, f64)]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.vertex_count()];
    let mut heap = BinaryHeap::new();
    for &(v, d) in sources {
        if d < dist[v.0] {
            dist[v.0] = d;
            heap.push(Entry(d, v.0));
        }
    }
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &end in g.incidence(VertexId(u)) {
            let w = g.opposite(end).0;
            let nd = d + g.edge(end.edge).length;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry(nd, w));
            }
        }
    }
    dist
}

/// Distances from a point to every vertex.
pub fn distances_from_point(g: &MetricGraph, p: GraphPoint) -> Vec<f64> {
    let e = g.edge(p.edge);
    vertex_distances(g, &[(e.tail, p.offset), (e.head, e.length - p.offset)])
}

/// Shortest-path distance between two points.
pub fn point_distance(g: &MetricGraph, p: GraphPoint, q: GraphPoint) -> f64 {
    let d = distances_from_point(g, p);
    let f = g.edge(q.edge);
    let mut best = (d[f.tail.0] + q.offset).min(d[f.head.0] + f.length - q.offset);
    if p.edge == q.edge {
        best = best.min((p.offset - q.offset).abs());
    }
    best
}

/// Maximum over `s in [a, b]` of the lower envelope of the lines `slope * s + intercept`.
pub(crate) fn max_of_min_lines(lines: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let env = |s: f64| lines.iter().map(|(m, c)| m * s + c).fold(f64::INFINITY, f64::min);
    let mut best = env(a).max(env(b));
    for (i, &(m1, c1)) in lines.iter().enumerate() {
        for &(m2, c2) in &lines[i + 1..] {
            if m1 != m2 {
                let s = (c2 - c1) / (m1 - m2);
                if s > a && s < b {
                    best = best.max(env(s));
                }
            }
        }
    }
    best
}

/// Largest value of `min(du + t, dv + len - t)` over `t in [0, len]`.
pub(crate) fn edge_peak(du: f64, dv: f64, len: f64) -> f64 {
    if (du - dv).abs() <= len {
        (du + dv + len) / 2.0
    } else {
        du.max(dv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diameter {
    /// Attained distance; the true diameter lies in `[value, value + error]`.
    pub value: f64,
    pub error: f64,
}

impl Diameter {
    pub fn upper(&self) -> f64 {
        self.value + self.error
    }
}

/// All-pairs vertex distances (one Dijkstra per vertex).
pub fn all_pairs(g: &MetricGraph) -> Vec<Vec<f64>> {
    g.vertices().map(|v| vertex_distances(g, &[(v, 0.0)])).collect()
}

/// Diameter: exact vertex-pair distances, refined on a `resolution` grid over
/// each edge; for every grid point the farthest point of every edge is found
/// in closed form, so the error is bounded by the grid spacing.
pub fn diameter(g: &MetricGraph, resolution: f64) -> Result<Diameter> {
    if !(resolution > 0.0) {
        return Err(QgError::OutOfRange(format!("resolution must be positive, got {resolution}")));
    }
    let apsp = all_pairs(g);
    let mut best = apsp.iter().flatten().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
    let n = g.vertex_count();
    let mut from_x = vec![0.0; n];
    for (ei, e) in g.edges().iter().enumerate() {
        let steps = (e.length / resolution).ceil().max(1.0) as usize;
        let (da, db) = (&apsp[e.tail.0], &apsp[e.head.0]);
        for i in 0..=steps {
            let t = e.length * i as f64 / steps as f64;
            for w in 0..n {
                from_x[w] = (t + da[w]).min(e.length - t + db[w]);
            }
            for (fi, f) in g.edges().iter().enumerate() {
                let (p, q) = (from_x[f.tail.0], from_x[f.head.0]);
                if !p.is_finite() && !q.is_finite() {
                    continue;
                }
                let far = if fi == ei {
                    let below = max_of_min_lines(&[(-1.0, t), (1.0, p), (-1.0, q + f.length)], 0.0, t);
                    let above = max_of_min_lines(&[(1.0, -t), (1.0, p), (-1.0, q + f.length)], t, f.length);
                    below.max(above)
                } else {
                    edge_peak(p, q, f.length)
                };
                best = best.max(far);
            }
        }
    }
    Ok(Diameter { value: best, error: resolution })
}

/// Largest distance from a point of the graph to the Dirichlet set.
pub fn inradius(g: &MetricGraph, cond: &ConditionAssignment) -> Result<f64> {
    let set = cond.dirichlet_set();
    if set.is_empty() {
        return Err(QgError::InvalidCondition("inradius needs a nonempty Dirichlet set".into()));
    }
    let sources: Vec<(VertexId, f64)> = set.into_iter().map(|v| (v, 0.0)).collect();
    let d = vertex_distances(g, &sources);
    Ok(g.edges().iter().map(|e| edge_peak(d[e.tail.0], d[e.head.0], e.length)).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusVolumes {
    /// `volumes[k]` is the measure of `{x : radii[k+1] <= dist(x, gamma) <= radii[k]}`.
    pub volumes: Vec<f64>,
    /// Some radius exceeds the eccentricity or falls inside the cut-off tail.
    pub clipped: bool,
}

/// Annulus volumes around `gamma`. Distances are measured as
/// `origin_offset + dist(x, gamma)`, which places the end `origin_offset`
/// beyond the truncation vertex `gamma`.
pub fn annulus_volumes(g: &MetricGraph, gamma: VertexId, origin_offset: f64, radii: &[f64]) -> Result<AnnulusVolumes> {
    if gamma.0 >= g.vertex_count() {
        return Err(QgError::UnknownVertex(format!("#{}", gamma.0)));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(QgError::OutOfRange("radii must be strictly decreasing".into()));
    }
    let d = vertex_distances(g, &[(gamma, origin_offset)]);
    let ecc = g.edges().iter().map(|e| edge_peak(d[e.tail.0], d[e.head.0], e.length)).fold(origin_offset, f64::max);
    let clipped = radii.first().is_some_and(|&r| r > ecc) || radii.last().is_some_and(|&r| r < origin_offset);
    let overlap = |lo: f64, hi: f64, r1: f64, r2: f64| (hi.min(r2) - lo.max(r1)).max(0.0);
    let volumes = radii
        .windows(2)
        .map(|w| {
            let (outer, inner) = (w[0], w[1]);
            g.edges()
                .iter()
                .map(|e| {
                    let (du, dv) = (d[e.tail.0], d[e.head.0]);
                    // distance rises with slope 1 from du up to the peak, then falls to dv
                    let peak = edge_peak(du, dv, e.length);
                    overlap(du, peak, inner, outer) + overlap(dv, peak, inner, outer)
                })
                .sum()
        })
        .collect();
    Ok(AnnulusVolumes { volumes, clipped })
}

/// Length, diameter, Betti number and (when a Dirichlet set exists) inradius.
#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub total_length: f64,
    pub diameter: Diameter,
    pub betti: usize,
    pub inradius: Option<f64>,
}

pub fn geometry_report(g: &MetricGraph, cond: &ConditionAssignment, resolution: f64) -> Result<GeometryReport> {
    Ok(GeometryReport {
        total_length: g.total_length(),
        diameter: diameter(g, resolution)?,
        betti: betti_number(g)?,
        inradius: if cond.has_dirichlet() { Some(inradius(g, cond)?) } else { None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{make_family, FamilySpec};

    fn star3() -> MetricGraph {
        make_family(&FamilySpec::equilateral_star(3, 1.0)).unwrap().graph
    }

    #[test]
    fn betti_examples() {
        assert_eq!(betti_number(&star3()).unwrap(), 0);
        assert_eq!(betti_number(&make_family(&FamilySpec::loop_graph(1.0)).unwrap().graph).unwrap(), 1);
        let eight = MetricGraph::from_edges(1, &[(0, 0, 1.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(betti_number(&eight).unwrap(), 2);
    }

    #[test]
    fn point_distances() {
        let iv = MetricGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let p = |g: &MetricGraph, e, t| GraphPoint::new(g, EdgeId(e), t).unwrap();
        assert!((point_distance(&iv, p(&iv, 0, 0.2), p(&iv, 0, 0.9)) - 0.7).abs() < 1e-15);
        let lp = make_family(&FamilySpec::loop_graph(1.0)).unwrap().graph;
        assert!((point_distance(&lp, p(&lp, 0, 0.1), p(&lp, 0, 0.8)) - 0.3).abs() < 1e-15);
        // arm 1 runs center -> tip; the point 0.4 from the tip sits at offset 0.6
        let s = star3();
        assert!((point_distance(&s, p(&s, 0, 0.6), p(&s, 1, 1.0)) - 1.6).abs() < 1e-15);
    }

    #[test]
    fn diameter_examples() {
        let d = diameter(&star3(), 0.01).unwrap();
        assert!((d.value - 2.0).abs() <= d.error);
        let lp = make_family(&FamilySpec::loop_graph(1.0)).unwrap().graph;
        let d = diameter(&lp, 0.01).unwrap();
        assert!((d.value - 0.5).abs() <= d.error);
    }

    #[test]
    fn diameter_of_harmonic_path() {
        // vertices at 1/n, n = 1..50, consecutive ones joined
        let edges: Vec<(usize, usize, f64)> =
            (1..50).map(|n| (n - 1, n, 1.0 / n as f64 - 1.0 / (n + 1) as f64)).collect();
        let g = MetricGraph::from_edges(50, &edges).unwrap();
        let d = diameter(&g, 1e-3).unwrap();
        assert!((d.value - (1.0 - 1.0 / 50.0)).abs() < 1e-12);
    }

    #[test]
    fn inradius_examples() {
        let s = make_family(&FamilySpec::equilateral_star(3, 0.7)).unwrap().graph;
        let tips = ConditionAssignment::dirichlet_leaves(&s);
        assert!((inradius(&s, &tips).unwrap() - 0.7).abs() < 1e-15);
        let t = make_family(&FamilySpec::star(vec![1.0, 1.0, 0.5])).unwrap().graph;
        assert!((inradius(&t, &ConditionAssignment::dirichlet_leaves(&t)).unwrap() - 0.75).abs() < 1e-15);
        let iv = MetricGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert!((inradius(&iv, &ConditionAssignment::dirichlet_leaves(&iv)).unwrap() - 0.5).abs() < 1e-15);
        assert!(inradius(&iv, &ConditionAssignment::standard()).is_err());
    }

    #[test]
    fn interval_annuli() {
        let iv = MetricGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let radii: Vec<f64> = (1..=20).map(|k| 1.0 / k as f64).collect();
        let a = annulus_volumes(&iv, VertexId(0), 0.0, &radii).unwrap();
        for (k, v) in a.volumes.iter().enumerate() {
            let k = (k + 1) as f64;
            assert!((v - (1.0 / k - 1.0 / (k + 1.0))).abs() < 1e-15);
        }
    }

    #[test]
    fn max_of_min_lines_tent() {
        let v = max_of_min_lines(&[(1.0, 0.0), (-1.0, 1.0)], 0.0, 1.0);
        assert!((v - 0.5).abs() < 1e-15);
    }
}
