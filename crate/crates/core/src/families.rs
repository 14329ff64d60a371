//! Canonical graph families and their truncations.
//!
//! Every builder computes each edge length in closed form. Truncations of
//! infinite families (comb, geometric tree) carry an end tag on their
//! boundary vertices and use stable labels, so that a larger truncation
//! contains the smaller one label for label.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QgError, Result};
use crate::graph::{ConditionAssignment, Edge, EndCondition, MetricGraph, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Interval,
    Star,
    Loop,
    Necklace,
    DiagonalComb,
    GeometricTree,
    Lasso,
    RandomCompact,
}

/// Which vertices of a compact family get a Dirichlet condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirichletChoice {
    /// `"leaves"` selects every degree-one vertex.
    Keyword(String),
    Labels(Vec<String>),
}

/// Parametric family description. Only the fields relevant to `family` are read.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub family: Option<FamilyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pumpkins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teeth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branching: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_range: Option<[f64; 2]>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_condition: Option<EndCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<DirichletChoice>,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind) -> Self {
        Self { family: Some(kind), ..Self::default() }
    }

    pub fn interval(length: f64) -> Self {
        Self { length: Some(length), ..Self::new(FamilyKind::Interval) }
    }

    pub fn equilateral_star(arms: usize, arm_length: f64) -> Self {
        Self { arms: Some(arms), arm_length: Some(arm_length), ..Self::new(FamilyKind::Star) }
    }

    pub fn star(lengths: Vec<f64>) -> Self {
        Self { lengths: Some(lengths), ..Self::new(FamilyKind::Star) }
    }

    pub fn loop_graph(length: f64) -> Self {
        Self { length: Some(length), ..Self::new(FamilyKind::Loop) }
    }

    /// Necklace of `pumpkins` two-edge pumpkins with every edge of length `edge_length`.
    pub fn symmetric_necklace(pumpkins: usize, edge_length: f64) -> Self {
        Self { pumpkins: Some(pumpkins), edge_length: Some(edge_length), ..Self::new(FamilyKind::Necklace) }
    }

    /// Necklace with explicit edge lengths `[a1, b1, a2, b2, ...]`.
    pub fn necklace(lengths: Vec<f64>) -> Self {
        Self { pumpkins: Some(lengths.len() / 2), lengths: Some(lengths), ..Self::new(FamilyKind::Necklace) }
    }

    pub fn diagonal_comb(alpha: f64, teeth: usize, end: EndCondition) -> Self {
        Self { alpha: Some(alpha), teeth: Some(teeth), end_condition: Some(end), ..Self::new(FamilyKind::DiagonalComb) }
    }

    pub fn geometric_tree(branching: usize, ratio: f64, generations: usize, end: EndCondition) -> Self {
        Self {
            branching: Some(branching),
            ratio: Some(ratio),
            generations: Some(generations),
            end_condition: Some(end),
            ..Self::new(FamilyKind::GeometricTree)
        }
    }

    pub fn lasso(loop_length: f64, tail_length: f64) -> Self {
        Self { length: Some(loop_length), tail_length: Some(tail_length), ..Self::new(FamilyKind::Lasso) }
    }

    pub fn random_compact(vertices: usize, beta: usize, range: [f64; 2], seed: u64) -> Self {
        Self {
            vertices: Some(vertices),
            beta: Some(beta),
            length_range: Some(range),
            seed: Some(seed),
            ..Self::new(FamilyKind::RandomCompact)
        }
    }

    pub fn with_dirichlet(mut self, choice: DirichletChoice) -> Self {
        self.dirichlet = Some(choice);
        self
    }

    pub fn kind(&self) -> Result<FamilyKind> {
        self.family.ok_or_else(|| QgError::UnsupportedFamily("<missing>".into()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        if let Some(name) = v.get("family").and_then(|f| f.as_str()) {
            let known = ["interval", "star", "loop", "necklace", "diagonal_comb", "geometric_tree", "lasso", "random_compact"];
            if !known.contains(&name) {
                return Err(QgError::UnsupportedFamily(name.to_string()));
            }
        }
        let spec: FamilySpec = serde_json::from_value(v)?;
        spec.kind()?;
        Ok(spec)
    }

    /// A copy of this spec truncated at `size` (teeth for combs, generations for trees).
    pub fn truncated(&self, size: usize) -> Result<Self> {
        let mut s = self.clone();
        match self.kind()? {
            FamilyKind::DiagonalComb => s.teeth = Some(size),
            FamilyKind::GeometricTree => s.generations = Some(size),
            other => return Err(QgError::UnsupportedFamily(format!("{other:?} has no truncation parameter"))),
        }
        Ok(s)
    }
}

/// Output of a family builder.
#[derive(Debug, Clone)]
pub struct Family {
    pub graph: MetricGraph,
    pub conditions: ConditionAssignment,
    /// Truncation-boundary vertices (empty for compact families).
    pub boundary: Vec<VertexId>,
    /// Closed-form total length of the built graph.
    pub analytic_length: f64,
}

fn req<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| QgError::OutOfRange(format!("missing parameter `{name}`")))
}

fn positive(x: f64, name: &str) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(QgError::OutOfRange(format!("{name} must be positive, got {x}")))
    }
}

struct Builder {
    labels: Vec<String>,
    edges: Vec<Edge>,
}

impl Builder {
    fn new() -> Self {
        Self { labels: Vec::new(), edges: Vec::new() }
    }

    fn vertex(&mut self, label: impl Into<String>) -> VertexId {
        self.labels.push(label.into());
        VertexId(self.labels.len() - 1)
    }

    fn edge(&mut self, label: impl Into<String>, u: VertexId, v: VertexId, length: f64) {
        self.edges.push(Edge { label: label.into(), tail: u, head: v, length });
    }

    fn finish(self) -> Result<MetricGraph> {
        MetricGraph::new(self.labels, self.edges)
    }
}

/// Position of the `n`-th comb vertex on the shaft, `n^(-alpha)`.
pub fn comb_position(alpha: f64, n: usize) -> f64 {
    (n as f64).powf(-alpha)
}

/// `n^(-alpha) - (n+1)^(-alpha)` without cancellation for large `n`.
pub fn comb_gap(alpha: f64, n: usize) -> f64 {
    let nf = n as f64;
    -nf.powf(-alpha) * (-alpha * (1.0 / nf).ln_1p()).exp_m1()
}

pub fn make_family(spec: &FamilySpec) -> Result<Family> {
    let kind = spec.kind()?;
    let mut fam = match kind {
        FamilyKind::Interval => {
            let l = positive(spec.length.unwrap_or(1.0), "length")?;
            let mut b = Builder::new();
            let a = b.vertex("v0");
            let c = b.vertex("v1");
            b.edge("e0", a, c, l);
            plain(b.finish()?, l)
        }
        FamilyKind::Star => {
            let lengths = match &spec.lengths {
                Some(ls) => ls.clone(),
                None => {
                    let k = req(spec.arms, "arms")?;
                    vec![spec.arm_length.unwrap_or(1.0); k]
                }
            };
            if lengths.is_empty() {
                return Err(QgError::OutOfRange("star needs at least one arm".into()));
            }
            let mut b = Builder::new();
            let c = b.vertex("v0");
            for (i, &l) in lengths.iter().enumerate() {
                positive(l, "arm length")?;
                let t = b.vertex(format!("v{}", i + 1));
                b.edge(format!("e{i}"), c, t, l);
            }
            let total = lengths.iter().sum();
            plain(b.finish()?, total)
        }
        FamilyKind::Loop => {
            let l = positive(spec.length.unwrap_or(1.0), "length")?;
            let mut b = Builder::new();
            let a = b.vertex("v0");
            b.edge("e0", a, a, l);
            plain(b.finish()?, l)
        }
        FamilyKind::Lasso => {
            let l = positive(spec.length.unwrap_or(1.0), "length")?;
            let t = positive(req(spec.tail_length, "tail_length")?, "tail_length")?;
            let mut b = Builder::new();
            let a = b.vertex("v0");
            let c = b.vertex("v1");
            b.edge("e0", a, a, l);
            b.edge("e1", a, c, t);
            plain(b.finish()?, l + t)
        }
        FamilyKind::Necklace => {
            let lengths = match (&spec.lengths, spec.edge_length, spec.length) {
                (Some(ls), _, _) => ls.clone(),
                (None, Some(el), _) => vec![el; 2 * req(spec.pumpkins, "pumpkins")?],
                (None, None, Some(total)) => {
                    let m = req(spec.pumpkins, "pumpkins")?;
                    vec![total / (2 * m) as f64; 2 * m]
                }
                _ => return Err(QgError::OutOfRange("necklace needs lengths, edge_length or length".into())),
            };
            if lengths.is_empty() || lengths.len() % 2 != 0 {
                return Err(QgError::OutOfRange("necklace needs an even, nonzero number of edge lengths".into()));
            }
            let mut b = Builder::new();
            let mut prev = b.vertex("v0");
            for p in 0..lengths.len() / 2 {
                let next = b.vertex(format!("v{}", p + 1));
                b.edge(format!("e{}", 2 * p), prev, next, positive(lengths[2 * p], "edge length")?);
                b.edge(format!("e{}", 2 * p + 1), prev, next, positive(lengths[2 * p + 1], "edge length")?);
                prev = next;
            }
            let total = lengths.iter().sum();
            plain(b.finish()?, total)
        }
        FamilyKind::DiagonalComb => build_comb(spec)?,
        FamilyKind::GeometricTree => build_tree(spec)?,
        FamilyKind::RandomCompact => build_random(spec)?,
    };
    if let Some(choice) = &spec.dirichlet {
        apply_dirichlet(&mut fam, choice)?;
    }
    fam.conditions.validate(&fam.graph)?;
    Ok(fam)
}

fn plain(graph: MetricGraph, analytic_length: f64) -> Family {
    Family { graph, conditions: ConditionAssignment::standard(), boundary: Vec::new(), analytic_length }
}

fn apply_dirichlet(fam: &mut Family, choice: &DirichletChoice) -> Result<()> {
    match choice {
        DirichletChoice::Keyword(k) if k == "leaves" => {
            for v in fam.graph.leaves() {
                if !fam.conditions.end_tags().contains_key(&v) {
                    fam.conditions.add_dirichlet(v);
                }
            }
        }
        DirichletChoice::Keyword(k) => return Err(QgError::OutOfRange(format!("unknown dirichlet keyword `{k}`"))),
        DirichletChoice::Labels(labels) => {
            for l in labels {
                let v = fam.graph.vertex_by_label(l).ok_or_else(|| QgError::UnknownVertex(l.clone()))?;
                fam.conditions.add_dirichlet(v);
            }
        }
    }
    Ok(())
}

fn build_comb(spec: &FamilySpec) -> Result<Family> {
    let alpha = positive(req(spec.alpha, "alpha")?, "alpha")?;
    let teeth = req(spec.teeth, "teeth")?;
    if teeth == 0 {
        return Err(QgError::OutOfRange("teeth must be at least 1".into()));
    }
    let end = spec.end_condition.unwrap_or(EndCondition::Neumann);
    let mut b = Builder::new();
    let mut prev_shaft = None;
    let mut teeth_sum = 0.0;
    for n in 1..=teeth {
        let s = b.vertex(format!("s{n}"));
        let t = b.vertex(format!("t{n}"));
        if let Some(p) = prev_shaft {
            b.edge(format!("shaft{}", n - 1), s, p, comb_gap(alpha, n - 1));
        }
        let tooth = comb_position(alpha, n);
        teeth_sum += tooth;
        b.edge(format!("tooth{n}"), s, t, tooth);
        prev_shaft = Some(s);
    }
    let graph = b.finish()?;
    let boundary = graph.vertex_by_label(&format!("s{teeth}")).expect("boundary vertex exists");
    let mut conditions = ConditionAssignment::standard();
    conditions.tag_end(boundary, end);
    let analytic_length = (1.0 - comb_position(alpha, teeth)) + teeth_sum;
    Ok(Family { graph, conditions, boundary: vec![boundary], analytic_length })
}

fn build_tree(spec: &FamilySpec) -> Result<Family> {
    let branching = req(spec.branching, "branching")?;
    let q = positive(req(spec.ratio, "ratio")?, "ratio")?;
    let generations = req(spec.generations, "generations")?;
    if branching == 0 || generations == 0 {
        return Err(QgError::OutOfRange("branching and generations must be at least 1".into()));
    }
    let end = spec.end_condition.unwrap_or(EndCondition::Neumann);
    let mut b = Builder::new();
    let root = b.vertex("r");
    let mut frontier = vec![(root, String::new())];
    let mut analytic_length = 0.0;
    for g in 0..generations {
        let len = q.powi(g as i32);
        analytic_length += (branching as f64).powi(g as i32 + 1) * len;
        let mut next = Vec::with_capacity(frontier.len() * branching);
        for (parent, path) in &frontier {
            for c in 0..branching {
                let child_path = format!("{path}{c}");
                let child = b.vertex(format!("r{child_path}"));
                b.edge(format!("b{child_path}"), *parent, child, len);
                next.push((child, child_path));
            }
        }
        frontier = next;
    }
    let graph = b.finish()?;
    let mut conditions = ConditionAssignment::standard();
    let boundary: Vec<VertexId> = frontier.iter().map(|(v, _)| *v).collect();
    for &v in &boundary {
        conditions.tag_end(v, end);
    }
    Ok(Family { graph, conditions, boundary, analytic_length })
}

/// Uniform spanning tree of the complete graph on `n` vertices by loop-erased
/// random walks. Returns `parent[i]` for `i >= 1` (vertex 0 is the root).
fn wilson_tree(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut in_tree = vec![false; n];
    let mut next = vec![usize::MAX; n];
    in_tree[0] = true;
    for start in 1..n {
        let mut u = start;
        while !in_tree[u] {
            let mut w = rng.gen_range(0..n - 1);
            if w >= u {
                w += 1;
            }
            next[u] = w;
            u = w;
        }
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            u = next[u];
        }
    }
    next
}

fn build_random(spec: &FamilySpec) -> Result<Family> {
    let n = req(spec.vertices, "vertices")?;
    let beta = spec.beta.unwrap_or(0);
    let [lo, hi] = spec.length_range.unwrap_or([0.3, 2.0]);
    let seed = req(spec.seed, "seed")?;
    if n == 0 {
        return Err(QgError::OutOfRange("vertices must be at least 1".into()));
    }
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(QgError::OutOfRange(format!("invalid length range [{lo}, {hi}]")));
    }
    let non_tree_pairs = n * (n - 1) / 2 - (n - 1);
    if beta > non_tree_pairs {
        return Err(QgError::OutOfRange(format!("beta {beta} exceeds the {non_tree_pairs} available non-tree pairs")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parent = if n > 1 { wilson_tree(n, &mut rng) } else { vec![usize::MAX] };
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (i.min(parent[i]), i.max(parent[i]))).collect();
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|p| !pairs.contains(p))
        .collect();
    candidates.shuffle(&mut rng);
    pairs.extend(candidates.into_iter().take(beta));
    let mut b = Builder::new();
    for i in 0..n {
        b.vertex(format!("v{i}"));
    }
    let mut total = 0.0;
    for (j, &(u, v)) in pairs.iter().enumerate() {
        let l = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        total += l;
        b.edge(format!("e{j}"), VertexId(u), VertexId(v), l);
    }
    Ok(plain(b.finish()?, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::betti_number;

    #[test]
    fn star_counts() {
        let f = make_family(&FamilySpec::equilateral_star(3, 1.0)).unwrap();
        assert_eq!(f.graph.vertex_count(), 4);
        assert_eq!(f.graph.edge_count(), 3);
        assert_eq!(f.graph.total_length(), 3.0);
        assert_eq!(betti_number(&f.graph).unwrap(), 0);
    }

    #[test]
    fn comb_three_teeth() {
        let f = make_family(&FamilySpec::diagonal_comb(0.5, 3, EndCondition::Neumann)).unwrap();
        let s = |n: f64| 1.0 / n.sqrt();
        let expected = (1.0 - s(3.0)) + (1.0 + s(2.0) + s(3.0));
        assert!((f.graph.total_length() - expected).abs() < 1e-12);
        assert!((f.analytic_length - expected).abs() < 1e-12);
        assert!((expected - 2.7071).abs() < 1e-3);
        let tooth3 = f.graph.edge_by_label("tooth3").unwrap();
        assert!((f.graph.edge(tooth3).length - s(3.0)).abs() < 1e-15);
        assert_eq!(f.boundary, vec![f.graph.vertex_by_label("s3").unwrap()]);
    }

    #[test]
    fn comb_gap_matches_direct_difference() {
        for n in [1usize, 2, 10, 1000] {
            let direct = comb_position(1.5, n) - comb_position(1.5, n + 1);
            assert!((comb_gap(1.5, n) - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn necklace_two_pumpkins() {
        let f = make_family(&FamilySpec::symmetric_necklace(2, 0.25)).unwrap();
        assert!((f.graph.total_length() - 1.0).abs() < 1e-15);
        assert_eq!(betti_number(&f.graph).unwrap(), 2);
    }

    #[test]
    fn geometric_tree_is_tree_with_tagged_leaves() {
        let f = make_family(&FamilySpec::geometric_tree(2, 0.4, 3, EndCondition::Dirichlet)).unwrap();
        assert_eq!(f.graph.edge_count(), 2 + 4 + 8);
        assert_eq!(betti_number(&f.graph).unwrap(), 0);
        assert_eq!(f.boundary.len(), 8);
        assert!((f.graph.total_length() - f.analytic_length).abs() < 1e-12);
        assert!(f.boundary.iter().all(|&v| f.conditions.is_dirichlet(v)));
    }

    #[test]
    fn random_compact_is_reproducible() {
        let spec = FamilySpec::random_compact(6, 2, [0.3, 2.0], 42);
        let a = make_family(&spec).unwrap();
        let b = make_family(&spec).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(betti_number(&a.graph).unwrap(), 2);
        assert!(a.graph.edges().iter().all(|e| (0.3..2.0).contains(&e.length)));
        let c = make_family(&FamilySpec::random_compact(6, 2, [0.3, 2.0], 43)).unwrap();
        assert_ne!(a.graph, c.graph);
    }

    #[test]
    fn family_json() {
        let spec = FamilySpec::from_json(r#"{"family":"diagonal_comb","alpha":0.5,"teeth":200,"end_condition":"neumann","seed":null}"#).unwrap();
        assert_eq!(spec.kind().unwrap(), FamilyKind::DiagonalComb);
        assert_eq!(spec.teeth, Some(200));
        assert!(matches!(FamilySpec::from_json(r#"{"family":"hypercube"}"#), Err(QgError::UnsupportedFamily(_))));
        let bad = FamilySpec { alpha: Some(-1.0), ..FamilySpec::diagonal_comb(0.5, 3, EndCondition::Neumann) };
        assert!(matches!(make_family(&bad), Err(QgError::OutOfRange(_))));
    }

    #[test]
    fn dirichlet_choice_by_label_and_leaves() {
        let f = make_family(&FamilySpec::equilateral_star(3, 1.0).with_dirichlet(DirichletChoice::Keyword("leaves".into()))).unwrap();
        assert_eq!(f.conditions.dirichlet_set().len(), 3);
        let f = make_family(&FamilySpec::interval(1.0).with_dirichlet(DirichletChoice::Labels(vec!["v0".into()]))).unwrap();
        assert_eq!(f.conditions.dirichlet_set(), vec![VertexId(0)]);
    }
}
