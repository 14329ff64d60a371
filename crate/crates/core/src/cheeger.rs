//! Isoperimetric constants: level-set sweeps of a test function, exact
//! enumeration over small cut classes, and closed forms for canonical shapes.

use serde::Serialize;

use crate::error::{QgError, Result};
use crate::graph::{ConditionAssignment, MetricGraph};
use crate::symmetrization::PLFunction;

/// Largest number of `(cut set, component subset)` pairs `cheeger_exact_small` visits.
pub const ENUMERATION_BUDGET: u64 = 50_000_000;

/// Infimum over regular levels `t` of `n(t) / min(m_f(t), L - m_f(t))`.
///
/// Between consecutive critical values `n` is constant and `m_f` is monotone,
/// so each band contributes `n` over the best balance reachable inside it.
/// The result bounds `h` from above.
pub fn cheeger_sweep(f: &PLFunction) -> Result<f64> {
    let bands = f.regular_bands();
    if bands.is_empty() {
        return Err(QgError::Invalid("cheeger sweep of a constant function".into()));
    }
    let total = f.total_length();
    let mut best = f64::INFINITY;
    for (a, b) in bands {
        let n = f.strict_crossings(0.5 * (a + b));
        if n == 0 {
            continue;
        }
        let lo = f.sublevel_measure_closed(a);
        let hi = f.sublevel_measure(b);
        let balance = |m: f64| m.min(total - m);
        let vol = if lo <= 0.5 * total && 0.5 * total <= hi { 0.5 * total } else { balance(lo).max(balance(hi)) };
        if vol > 0.0 {
            best = best.min(n as f64 / vol);
        }
    }
    Ok(best)
}

/// Which isoperimetric quotient to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheegerKind {
    /// `|dG| / min(|G|, |G^c|)` over proper subgraphs.
    Balanced,
    /// `|dG| / |G|`, Dirichlet points always counted as boundary.
    Dirichlet,
}

/// Optimal value found by enumeration, with the boundary size and volume attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutValue {
    pub value: f64,
    pub boundary_points: usize,
    pub volume: f64,
    /// Cut-site subsets visited.
    pub cut_sets: u64,
}

#[derive(Clone, Copy)]
enum Site {
    Vertex(usize),
    Edge(usize),
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Exact infimum of the balanced quotient over cuts made of at most `max_cut_points`
/// sites, each a vertex or one interior point of an edge. Interior positions
/// enter volumes linearly, so they are optimized in closed form.
pub fn cheeger_exact_small(g: &MetricGraph, max_cut_points: usize) -> Result<CutValue> {
    enumerate_cuts(g, &ConditionAssignment::standard(), max_cut_points, CheegerKind::Balanced)
}

/// As [`cheeger_exact_small`] for `|dG|/|G|`; Dirichlet vertices are forced
/// cut sites and do not count against `max_cut_points`.
pub fn cheeger_dirichlet_small(g: &MetricGraph, cond: &ConditionAssignment, max_cut_points: usize) -> Result<CutValue> {
    enumerate_cuts(g, cond, max_cut_points, CheegerKind::Dirichlet)
}

fn enumerate_cuts(g: &MetricGraph, cond: &ConditionAssignment, p: usize, kind: CheegerKind) -> Result<CutValue> {
    let nv = g.vertex_count();
    let ne = g.edge_count();
    let forced: Vec<usize> = match kind {
        CheegerKind::Balanced => Vec::new(),
        CheegerKind::Dirichlet => cond.dirichlet_set().iter().map(|v| v.0).collect(),
    };
    let pool: Vec<Site> = (0..nv)
        .filter(|v| !forced.contains(v))
        .map(Site::Vertex)
        .chain((0..ne).map(Site::Edge))
        .collect();
    let p = p.min(pool.len());
    let combos: u64 = (0..=p as u64).map(|k| binomial(pool.len() as u64, k)).sum();
    let max_components = ne + p + 1;
    if max_components > 30 || combos.saturating_mul(1u64 << max_components.min(62)) > ENUMERATION_BUDGET {
        return Err(QgError::Budget(format!(
            "{combos} cut sets over up to {max_components} components exceed the enumeration budget"
        )));
    }
    let total = g.total_length();
    let mut best = CutValue { value: f64::INFINITY, boundary_points: 0, volume: 0.0, cut_sets: 0 };
    let mut chosen: Vec<usize> = Vec::with_capacity(p);
    loop {
        evaluate_cut(g, &forced, &pool, &chosen, kind, total, &mut best);
        best.cut_sets += 1;
        // next combination in lexicographic order, sizes 0..=p
        if chosen.len() < p {
            let start = chosen.last().map_or(0, |&i| i + 1);
            if start < pool.len() {
                chosen.push(start);
                continue;
            }
        }
        loop {
            match chosen.pop() {
                None => return Ok(best),
                Some(i) if i + 1 < pool.len() => {
                    chosen.push(i + 1);
                    break;
                }
                Some(_) => {}
            }
        }
    }
}

fn evaluate_cut(
    g: &MetricGraph,
    forced: &[usize],
    pool: &[Site],
    chosen: &[usize],
    kind: CheegerKind,
    total: f64,
    best: &mut CutValue,
) {
    let nv = g.vertex_count();
    let ne = g.edge_count();
    let mut cut_vertex = vec![false; nv];
    let mut cut_edge = vec![false; ne];
    for &v in forced {
        cut_vertex[v] = true;
    }
    for &i in chosen {
        match pool[i] {
            Site::Vertex(v) => cut_vertex[v] = true,
            Site::Edge(e) => cut_edge[e] = true,
        }
    }
    // units: tail piece 2e, head piece 2e+1 (equal for uncut edges)
    let mut dsu = Dsu((0..2 * ne).collect());
    for (e, _) in g.edges().iter().enumerate() {
        if !cut_edge[e] {
            dsu.union(2 * e, 2 * e + 1);
        }
    }
    let mut first_at: Vec<Option<usize>> = vec![None; nv];
    for (e, edge) in g.edges().iter().enumerate() {
        for (v, unit) in [(edge.tail.0, 2 * e), (edge.head.0, 2 * e + 1)] {
            if cut_vertex[v] {
                continue;
            }
            match first_at[v] {
                None => first_at[v] = Some(unit),
                Some(u) => dsu.union(u, unit),
            }
        }
    }
    let mut comp_of = vec![usize::MAX; 2 * ne];
    let mut roots: Vec<usize> = Vec::new();
    for u in 0..2 * ne {
        let r = dsu.find(u);
        let idx = match roots.iter().position(|&x| x == r) {
            Some(i) => i,
            None => {
                roots.push(r);
                roots.len() - 1
            }
        };
        comp_of[u] = idx;
    }
    let nc = roots.len();
    // component volume = constant + sum over cut edges of (+x_e tail piece, -x_e head piece)
    let mut constant = vec![0.0; nc];
    for (e, edge) in g.edges().iter().enumerate() {
        if cut_edge[e] {
            constant[comp_of[2 * e + 1]] += edge.length;
        } else {
            constant[comp_of[2 * e]] += edge.length;
        }
    }
    // each cut site with the components touching it and whether it is a Dirichlet point
    let mut sites: Vec<(u64, bool)> = Vec::new();
    for v in 0..nv {
        if cut_vertex[v] {
            let mask = g.incidence(crate::graph::VertexId(v)).iter().fold(0u64, |m, end| {
                let unit = match end.side {
                    crate::graph::Side::Tail => 2 * end.edge.0,
                    crate::graph::Side::Head => 2 * end.edge.0 + 1,
                };
                m | 1 << comp_of[unit]
            });
            sites.push((mask, forced.contains(&v)));
        }
    }
    for e in 0..ne {
        if cut_edge[e] {
            sites.push((1 << comp_of[2 * e] | 1 << comp_of[2 * e + 1], false));
        }
    }
    let full = if nc >= 64 { u64::MAX } else { (1u64 << nc) - 1 };
    for subset in 1..=full {
        if kind == CheegerKind::Balanced && (subset == full || subset & 1 == 1) {
            // complements give the same quotient; fix component 0 outside
            continue;
        }
        let n = sites
            .iter()
            .filter(|&&(m, dir)| m & subset != 0 && (m & !subset != 0 || dir))
            .count();
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (c, &k) in constant.iter().enumerate() {
            if subset >> c & 1 == 1 {
                lo += k;
                hi += k;
            }
        }
        for (e, edge) in g.edges().iter().enumerate() {
            if !cut_edge[e] {
                continue;
            }
            let tail_in = subset >> comp_of[2 * e] & 1 == 1;
            let head_in = subset >> comp_of[2 * e + 1] & 1 == 1;
            match (tail_in, head_in) {
                (true, false) => hi += edge.length,
                (false, true) => lo -= edge.length,
                _ => {}
            }
        }
        let volume = match kind {
            CheegerKind::Dirichlet => hi,
            CheegerKind::Balanced => {
                let bal = |m: f64| m.min(total - m);
                if lo <= 0.5 * total && 0.5 * total <= hi {
                    0.5 * total
                } else {
                    bal(lo).max(bal(hi))
                }
            }
        };
        if volume <= 0.0 {
            continue;
        }
        let value = n as f64 / volume;
        if value < best.value {
            best.value = value;
            best.boundary_points = n;
            best.volume = volume;
        }
    }
}

/// Closed-form constants for canonical shapes, recognized structurally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticCheeger {
    pub shape: &'static str,
    /// Balanced constant `h`, when known.
    pub h: Option<f64>,
    /// `h0` for the given Dirichlet set, when known.
    pub h0: Option<f64>,
}

/// Registry lookup: intervals, single loops and equilateral stars.
pub fn analytic_cheeger(g: &MetricGraph, cond: &ConditionAssignment) -> Option<AnalyticCheeger> {
    let total = g.total_length();
    let dir = |v: crate::graph::VertexId| cond.is_dirichlet(v);
    if g.edge_count() == 1 {
        let e = &g.edges()[0];
        if e.is_loop() {
            let h0 = if dir(e.tail) { None } else { Some(0.0) };
            return Some(AnalyticCheeger { shape: "loop", h: Some(4.0 / total), h0 });
        }
        let nd = [e.tail, e.head].iter().filter(|&&v| dir(v)).count();
        return Some(AnalyticCheeger { shape: "interval", h: Some(2.0 / total), h0: Some(nd as f64 / total) });
    }
    let center = g.vertices().find(|&v| g.degree(v) == g.edge_count())?;
    let arms = g.edge_count();
    let ell = g.edges()[0].length;
    let is_star = g.vertex_count() == arms + 1
        && g.edges().iter().all(|e| !e.is_loop() && (e.length - ell).abs() <= 1e-12 * ell)
        && g.vertices().filter(|&v| v != center).all(|v| g.degree(v) == 1);
    if !is_star || dir(center) {
        return None;
    }
    let tips = g.vertices().filter(|&v| v != center && dir(v)).count();
    let h0 = match tips {
        0 => Some(0.0),
        t if t == arms => Some(1.0 / ell),
        _ => None,
    };
    Some(AnalyticCheeger { shape: "equilateral_star", h: Some(1.0 / ((arms / 2) as f64 * ell)), h0 })
}
