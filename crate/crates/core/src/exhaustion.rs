//! Compact exhaustions: combinatorial balls, truncation ladders of the
//! infinite families, and eigenvalue convergence along a ladder.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QgError, Result};
use crate::families::{make_family, FamilyKind, FamilySpec};
use crate::fem::{fem_spectrum, FemSettings};
use crate::geometry::{betti_number, diameter};
use crate::graph::{ConditionAssignment, Edge, EndCondition, MetricGraph, VertexId};
use crate::spectrum::Method;

/// Induced subgraph on the vertices within `n` hops of `root`. Returns the
/// subgraph and, for every vertex of `g`, its id in the subgraph.
pub fn combinatorial_ball(g: &MetricGraph, root: VertexId, n: usize) -> Result<(MetricGraph, Vec<Option<VertexId>>)> {
    if root.0 >= g.vertex_count() {
        return Err(QgError::UnknownVertex(format!("#{}", root.0)));
    }
    let mut hops = vec![usize::MAX; g.vertex_count()];
    hops[root.0] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        if hops[v.0] == n {
            continue;
        }
        for &end in g.incidence(v) {
            let w = g.opposite(end);
            if hops[w.0] == usize::MAX {
                hops[w.0] = hops[v.0] + 1;
                queue.push_back(w);
            }
        }
    }
    let mut map = vec![None; g.vertex_count()];
    let mut labels = Vec::new();
    for v in g.vertices().filter(|v| hops[v.0] <= n) {
        map[v.0] = Some(VertexId(labels.len()));
        labels.push(g.vertex_label(v).to_string());
    }
    let edges = g
        .edges()
        .iter()
        .filter_map(|e| match (map[e.tail.0], map[e.head.0]) {
            (Some(t), Some(h)) => Some(Edge { label: e.label.clone(), tail: t, head: h, length: e.length }),
            _ => None,
        })
        .collect();
    Ok((MetricGraph::new(labels, edges)?, map))
}

/// One member `𝒢_n` of a compact exhaustion.
#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionStep {
    pub index: usize,
    /// Truncation parameter (teeth, generations or ball radius).
    pub size: usize,
    #[serde(skip)]
    pub graph: MetricGraph,
    #[serde(skip)]
    pub conditions: ConditionAssignment,
    pub boundary: Vec<VertexId>,
    pub total_length: f64,
    /// Lower end of the certified diameter interval.
    pub diameter: f64,
    pub diameter_error: f64,
    pub betti: usize,
}

fn edge_labels(g: &MetricGraph) -> BTreeSet<&str> {
    g.edges().iter().map(|e| e.label.as_str()).collect()
}

fn check_nested(steps: &[ExhaustionStep]) -> Result<()> {
    for w in steps.windows(2) {
        let (small, big) = (edge_labels(&w[0].graph), edge_labels(&w[1].graph));
        if !small.is_subset(&big) {
            return Err(QgError::Invalid(format!("step {} is not contained in step {}", w[0].index, w[1].index)));
        }
    }
    Ok(())
}

fn strictly_increasing(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() {
        return Err(QgError::OutOfRange("empty size sequence".into()));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(QgError::OutOfRange(format!("non-monotone size sequence {sizes:?}")));
    }
    Ok(())
}

fn step(index: usize, size: usize, graph: MetricGraph, conditions: ConditionAssignment, boundary: Vec<VertexId>, resolution: f64) -> Result<ExhaustionStep> {
    let d = diameter(&graph, resolution)?;
    Ok(ExhaustionStep {
        index,
        size,
        total_length: graph.total_length(),
        diameter: d.value,
        diameter_error: d.error,
        betti: betti_number(&graph)?,
        graph,
        conditions,
        boundary,
    })
}

/// Nested truncations of an infinite family (comb teeth or tree generations),
/// boundary vertices tagged with the spec's end condition.
pub fn truncation_ladder(spec: &FamilySpec, sizes: &[usize], resolution: f64) -> Result<Vec<ExhaustionStep>> {
    strictly_increasing(sizes)?;
    let steps: Vec<ExhaustionStep> = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let fam = make_family(&spec.truncated(n)?)?;
            step(i, n, fam.graph, fam.conditions, fam.boundary, resolution)
        })
        .collect::<Result<_>>()?;
    check_nested(&steps)?;
    Ok(steps)
}

/// Combinatorial balls around `root` with the given radii. Vertices of the
/// ball whose neighbourhood leaves the ball form its boundary.
pub fn ball_ladder(g: &MetricGraph, cond: &ConditionAssignment, root: VertexId, radii: &[usize], end: EndCondition, resolution: f64) -> Result<Vec<ExhaustionStep>> {
    strictly_increasing(radii)?;
    let steps: Vec<ExhaustionStep> = radii
        .par_iter()
        .enumerate()
        .map(|(i, &r)| {
            let (ball, map) = combinatorial_ball(g, root, r)?;
            let mut c = cond.remap(&map);
            let mut boundary = Vec::new();
            for v in g.vertices() {
                let Some(bv) = map[v.0] else { continue };
                if g.incidence(v).iter().any(|&end| map[g.opposite(end).0].is_none()) {
                    boundary.push(bv);
                    if !c.is_dirichlet(bv) {
                        c.tag_end(bv, end);
                    }
                }
            }
            step(i, r, ball, c, boundary, resolution)
        })
        .collect::<Result<_>>()?;
    check_nested(&steps)?;
    Ok(steps)
}

/// Whether the last step of a ladder contains every edge of `g`.
pub fn covers(steps: &[ExhaustionStep], g: &MetricGraph) -> bool {
    steps.last().is_some_and(|s| edge_labels(g).is_subset(&edge_labels(&s.graph)))
}

/// Hurwitz zeta `Σ_{j≥0} (a + j)^(-s)` for `s > 1`, `a > 0`, by Euler–Maclaurin.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    const M: usize = 12;
    // B_2j / (2j)!
    const B: [f64; 6] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0, 1.0 / 47900160.0, -691.0 / 1307674368000.0];
    let head: f64 = (0..M).map(|j| (a + j as f64).powf(-s)).sum();
    let x = a + M as f64;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) times x^(-s-2j+1)
    let mut rise = s;
    let mut pow = x.powf(-s - 1.0);
    for (j, b) in B.iter().enumerate() {
        tail += b * rise * pow;
        let k = 2.0 * j as f64;
        rise *= (s + k + 1.0) * (s + k + 2.0);
        pow /= x * x;
    }
    head + tail
}

/// Closed-form length of the untruncated family, when it is finite.
pub fn limit_length(spec: &FamilySpec) -> Result<Option<f64>> {
    Ok(match spec.kind()? {
        FamilyKind::DiagonalComb => {
            let alpha = spec.alpha.unwrap_or(0.0);
            (alpha > 1.0).then(|| 1.0 + hurwitz_zeta(alpha, 1.0))
        }
        FamilyKind::GeometricTree => {
            let b = spec.branching.unwrap_or(0) as f64;
            let q = spec.ratio.unwrap_or(0.0);
            (b * q < 1.0).then(|| b / (1.0 - b * q))
        }
        _ => Some(make_family(spec)?.analytic_length),
    })
}

/// `L − L_n`: length removed by truncating the family at `size`.
pub fn analytic_tail(spec: &FamilySpec, size: usize) -> Result<Option<f64>> {
    Ok(match spec.kind()? {
        FamilyKind::DiagonalComb => {
            let alpha = spec.alpha.unwrap_or(0.0);
            // the shaft below the last tooth plus all further teeth
            (alpha > 1.0).then(|| (size as f64).powf(-alpha) + hurwitz_zeta(alpha, size as f64 + 1.0))
        }
        FamilyKind::GeometricTree => {
            let b = spec.branching.unwrap_or(0) as f64;
            let q = spec.ratio.unwrap_or(0.0);
            (b * q < 1.0).then(|| b * (b * q).powi(size as i32) / (1.0 - b * q))
        }
        _ => Some(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryRule {
    Dirichlet,
    Neumann,
}

impl BoundaryRule {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryRule::Dirichlet => "dirichlet",
            BoundaryRule::Neumann => "neumann",
        }
    }

    fn end(self) -> EndCondition {
        match self {
            BoundaryRule::Dirichlet => EndCondition::Dirichlet,
            BoundaryRule::Neumann => EndCondition::Neumann,
        }
    }
}

impl std::str::FromStr for BoundaryRule {
    type Err = QgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(BoundaryRule::Dirichlet),
            "neumann" => Ok(BoundaryRule::Neumann),
            other => Err(QgError::OutOfRange(format!("boundary rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub k: usize,
    pub eigenvalue: f64,
    pub method: Method,
    pub mesh_h: f64,
    pub boundary_rule: BoundaryRule,
    /// Relative eigensolver residual of this pair.
    pub residual: f64,
}

/// Size of the last change of `λ_k` along the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CauchyTail {
    pub k: usize,
    pub last_n: usize,
    pub difference: f64,
    pub relative: f64,
}

/// `λ_k` rose from step `from` to step `to` by more than the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub k: usize,
    pub from: usize,
    pub to: usize,
    pub increase: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    /// Sorted by `(k, n)`.
    pub rows: Vec<ConvergenceRow>,
    pub tails: Vec<CauchyTail>,
    pub violations: Vec<MonotonicityViolation>,
    /// Steps whose solve failed, with the error message.
    pub failures: Vec<(usize, String)>,
}

impl ConvergenceTable {
    pub fn series(&self, k: usize) -> Vec<(usize, f64)> {
        self.rows.iter().filter(|r| r.k == k).map(|r| (r.n, r.eigenvalue)).collect()
    }

    pub fn tail(&self, k: usize) -> Option<&CauchyTail> {
        self.tails.iter().find(|t| t.k == k)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,k,eigenvalue,method,mesh_h,boundary_rule\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.15e},{},{:.6e},{}\n", r.n, r.k, r.eigenvalue, r.method, r.mesh_h, r.boundary_rule.as_str()));
        }
        out
    }
}

/// Relative eigenvalue slack granted per pair on top of its residual.
fn solver_tolerance(settings: &FemSettings, residual: f64) -> f64 {
    settings.eigen.tol.max(residual)
}

/// First `k_max` eigenvalues on every step, with ends tagged by `rule`.
/// Monotone decrease is checked for the Dirichlet rule, where each step's
/// form domain embeds in the next.
pub fn convergence_study(steps: &[ExhaustionStep], rule: BoundaryRule, k_max: usize, settings: &FemSettings) -> ConvergenceTable {
    let solved: Vec<(usize, Result<crate::fem::FemResult>)> = steps
        .par_iter()
        .map(|s| {
            let cond = s.conditions.with_end_rule(rule.end());
            (s.size, fem_spectrum(&s.graph, &cond, k_max, settings))
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (n, res) in solved {
        match res {
            Ok(r) => {
                for (i, &ev) in r.spectrum.eigenvalues.iter().enumerate() {
                    rows.push(ConvergenceRow {
                        n,
                        k: i + 1,
                        eigenvalue: ev,
                        method: r.spectrum.method,
                        mesh_h: r.spectrum.mesh_h.unwrap_or(r.mesh.h_max()),
                        boundary_rule: rule,
                        residual: r.spectrum.residuals.get(i).copied().unwrap_or(0.0),
                    });
                }
            }
            Err(e) => failures.push((n, e.to_string())),
        }
    }
    rows.sort_by(|a, b| (a.k, a.n).cmp(&(b.k, b.n)));
    let mut tails = Vec::new();
    let mut violations = Vec::new();
    for k in 1..=k_max {
        let series: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.k == k).collect();
        if let [.., a, b] = series.as_slice() {
            let difference = (b.eigenvalue - a.eigenvalue).abs();
            tails.push(CauchyTail { k, last_n: b.n, difference, relative: difference / b.eigenvalue.abs().max(f64::MIN_POSITIVE) });
        }
        if rule == BoundaryRule::Dirichlet {
            for w in series.windows(2) {
                let tol = 10.0 * solver_tolerance(settings, w[0].residual.max(w[1].residual)) * w[0].eigenvalue.abs();
                let increase = w[1].eigenvalue - w[0].eigenvalue;
                if increase > tol {
                    violations.push(MonotonicityViolation { k, from: w[0].n, to: w[1].n, increase, tolerance: tol });
                }
            }
        }
    }
    ConvergenceTable { rows, tails, violations, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilySpec;

    #[test]
    fn balls() {
        let tree = make_family(&FamilySpec::geometric_tree(2, 0.5, 4, EndCondition::Neumann)).unwrap().graph;
        let root = tree.vertex_by_label("r").unwrap();
        let (b, _) = combinatorial_ball(&tree, root, 2).unwrap();
        assert_eq!((b.vertex_count(), b.edge_count()), (7, 6));
        let (b0, _) = combinatorial_ball(&tree, root, 0).unwrap();
        assert_eq!((b0.vertex_count(), b0.edge_count()), (1, 0));
        let path = MetricGraph::from_edges(9, &(0..8).map(|i| (i, i + 1, 1.0)).collect::<Vec<_>>()).unwrap();
        let (b, _) = combinatorial_ball(&path, VertexId(4), 3).unwrap();
        assert_eq!(b.edge_count(), 6);
        assert!(combinatorial_ball(&path, VertexId(20), 1).is_err());
    }

    #[test]
    fn ball_ladder_covers_and_nests() {
        let g = make_family(&FamilySpec::random_compact(8, 2, [0.3, 2.0], 4)).unwrap().graph;
        let steps = ball_ladder(&g, &ConditionAssignment::standard(), VertexId(0), &[0, 1, 2, 8], EndCondition::Dirichlet, 1e-2).unwrap();
        assert!(covers(&steps, &g));
        assert!(steps.last().unwrap().boundary.is_empty());
        let betti: Vec<usize> = steps.iter().map(|s| s.betti).collect();
        assert!(betti.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*betti.last().unwrap(), 2);
    }

    #[test]
    fn zeta_values() {
        // ζ(2) = π²/6, ζ(3/2) = 2.6123753486854883
        assert!((hurwitz_zeta(2.0, 1.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
        assert!((hurwitz_zeta(1.5, 1.0) - 2.612_375_348_685_488_3).abs() < 1e-13);
        let direct: f64 = (0..20).map(|j| (3.5 + j as f64).powf(-1.5)).sum::<f64>() + hurwitz_zeta(1.5, 23.5);
        assert!((hurwitz_zeta(1.5, 3.5) - direct).abs() < 1e-14);
    }

    #[test]
    fn comb_ladder_lengths() {
        let spec = FamilySpec::diagonal_comb(1.5, 1, EndCondition::Dirichlet);
        let steps = truncation_ladder(&spec, &[10, 20, 40], 1e-2).unwrap();
        let limit = limit_length(&spec).unwrap().unwrap();
        assert!((limit - 3.612_375_348_685_488).abs() < 1e-12);
        for w in steps.windows(2) {
            assert!(w[0].total_length < w[1].total_length);
        }
        for s in &steps {
            let tail = analytic_tail(&spec, s.size).unwrap().unwrap();
            assert!((limit - s.total_length - tail).abs() < 1e-10, "n = {}", s.size);
            assert_eq!(s.betti, 0);
            assert!(s.conditions.has_dirichlet());
        }
        assert!(truncation_ladder(&spec, &[40, 20], 1e-2).is_err());
    }

    #[test]
    fn tree_ladder() {
        let spec = FamilySpec::geometric_tree(2, 0.4, 1, EndCondition::Neumann);
        let steps = truncation_ladder(&spec, &[3, 4, 5, 6, 7, 8], 0.05).unwrap();
        assert!(steps.iter().all(|s| s.betti == 0));
        let limit = limit_length(&spec).unwrap().unwrap();
        for s in &steps {
            let tail = analytic_tail(&spec, s.size).unwrap().unwrap();
            assert!((limit - s.total_length - tail).abs() < 1e-10);
        }
        assert!(truncation_ladder(&FamilySpec::interval(1.0), &[1, 2], 0.1).is_err());
    }

    #[test]
    fn single_step_study() {
        let spec = FamilySpec::diagonal_comb(1.5, 1, EndCondition::Dirichlet);
        let steps = truncation_ladder(&spec, &[8], 1e-2).unwrap();
        let t = convergence_study(&steps, BoundaryRule::Dirichlet, 2, &FemSettings::default());
        assert_eq!(t.rows.len(), 2);
        assert!(t.violations.is_empty() && t.tails.is_empty() && t.failures.is_empty());
        assert!(t.to_csv().starts_with("n,k,eigenvalue,method,mesh_h,boundary_rule\n"));
    }

    #[test]
    fn dirichlet_ladder_decreases() {
        let spec = FamilySpec::diagonal_comb(1.5, 1, EndCondition::Dirichlet);
        let steps = truncation_ladder(&spec, &[5, 10, 20, 40], 1e-2).unwrap();
        let t = convergence_study(&steps, BoundaryRule::Dirichlet, 3, &FemSettings::default());
        assert!(t.failures.is_empty());
        assert!(t.violations.is_empty(), "{:?}", t.violations);
        let s = t.series(1);
        assert!(s.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-8)));
    }
}
