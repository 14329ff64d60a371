//! Exact eigenvalues of compact graphs from the vertex matching conditions.
//!
//! On edge `e` an eigenfunction with `λ = k²` is `a_e cos(kx) + b_e sin(kx)`,
//! `x` measured from the tail. Continuity, Kirchhoff and Dirichlet conditions
//! give a square `2|E|` system `M(k) c = 0`; eigenvalues are the `k` where
//! `M(k)` is singular, located as valleys of its smallest singular value.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QgError, Result};
use crate::graph::{ConditionAssignment, MetricGraph, Side};
use crate::spectrum::{Method, Spectrum};

/// The matching matrix at one `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecularSystem {
    pub k: f64,
    pub matrix: DMatrix<f64>,
}

impl SecularSystem {
    /// Singular values, ascending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.matrix.clone().singular_values().iter().copied().collect();
        s.sort_by(f64::total_cmp);
        s
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values()[0]
    }
}

/// Rows: for a standard vertex `deg − 1` continuity rows and one Kirchhoff row
/// (outgoing derivatives divided by `k`); for a Dirichlet vertex one
/// zero-value row per incident end.
pub fn secular_matrix(g: &MetricGraph, cond: &ConditionAssignment, k: f64) -> Result<SecularSystem> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(QgError::OutOfRange(format!("spectral parameter k = {k} must be positive")));
    }
    let n = 2 * g.edge_count();
    let mut m = DMatrix::zeros(n, n);
    let mut row = 0;
    // value and outgoing derivative / k of an edge end, as coefficients on (a_e, b_e)
    let value = |side: Side, len: f64| match side {
        Side::Tail => (1.0, 0.0),
        Side::Head => ((k * len).cos(), (k * len).sin()),
    };
    let slope = |side: Side, len: f64| match side {
        Side::Tail => (0.0, 1.0),
        Side::Head => ((k * len).sin(), -(k * len).cos()),
    };
    for v in g.vertices() {
        let ends = g.incidence(v);
        if ends.is_empty() {
            continue;
        }
        let coeffs = |end: &crate::graph::EdgeEnd, f: &dyn Fn(Side, f64) -> (f64, f64)| {
            let (a, b) = f(end.side, g.edge(end.edge).length);
            (2 * end.edge.0, a, b)
        };
        if cond.is_dirichlet(v) {
            for end in ends {
                let (c, a, b) = coeffs(end, &value);
                m[(row, c)] += a;
                m[(row, c + 1)] += b;
                row += 1;
            }
        } else {
            let (c0, a0, b0) = coeffs(&ends[0], &value);
            for end in &ends[1..] {
                let (c, a, b) = coeffs(end, &value);
                m[(row, c0)] += a0;
                m[(row, c0 + 1)] += b0;
                m[(row, c)] -= a;
                m[(row, c + 1)] -= b;
                row += 1;
            }
            for end in ends {
                let (c, a, b) = coeffs(end, &slope);
                m[(row, c)] += a;
                m[(row, c + 1)] += b;
            }
            row += 1;
        }
    }
    debug_assert_eq!(row, n);
    Ok(SecularSystem { k, matrix: m })
}

/// Largest edge count the oracle accepts.
pub const MAX_EDGES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Scan step in `k`; by default `π / (20 · max(ℓ_max, L))`.
    pub step: Option<f64>,
    /// Root refinement tolerance in `k`.
    pub k_tol: f64,
    /// Singular values below this (times `max(1, L)`) count towards multiplicity.
    pub mult_tol: f64,
    /// Finer rescans allowed when the count check fails.
    pub max_rescans: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { step: None, k_tol: 1e-10, mult_tol: 1e-8, max_rescans: 4 }
    }
}

/// A located root with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub k: f64,
    pub multiplicity: usize,
    pub sigma_min: f64,
}

/// Scan output with the counting diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecularSpectrum {
    pub spectrum: Spectrum,
    pub roots: Vec<Root>,
    pub k_upper: f64,
    /// Admissible count of eigenvalues below `k_upper²` with multiplicity.
    pub bracket: (usize, usize),
    /// Index-theorem count just below `k_upper²`, when computable.
    pub exact_count: Option<usize>,
    /// Found count minus `L k_upper / π`.
    pub weyl_deviation: f64,
    pub step: f64,
}

/// Eigenvalue count `< k²` when every vertex is Dirichlet: `Σ_e #{j ≥ 1 : jπ/ℓ_e < k}`.
pub fn decoupled_count(g: &MetricGraph, k: f64) -> usize {
    g.edges()
        .iter()
        .map(|e| {
            let x = k * e.length / std::f64::consts::PI;
            let c = x.ceil() as usize;
            c.saturating_sub(1)
        })
        .sum()
}

/// Bounds on `N(k²)`: imposing Dirichlet values at the non-Dirichlet vertices
/// is a constraint of that codimension in the form domain.
pub fn count_bracket(g: &MetricGraph, cond: &ConditionAssignment, k: f64) -> (usize, usize) {
    let lower = decoupled_count(g, k);
    let free = g.vertices().filter(|&v| !cond.is_dirichlet(v)).count();
    (lower, lower + free)
}

/// Exact `N(k²) = #{λ_j < k²}` with multiplicity, or `None` when `k` is too
/// close to a Dirichlet eigenvalue of some edge.
///
/// The form `t − k²` splits orthogonally into functions vanishing at every
/// vertex and `k²`-harmonic extensions of vertex values, so its negative index
/// is the decoupled count plus the negative index of the vertex form
/// `Σ_e k / sin(kℓ) · (cos(kℓ)(x_u² + x_v²) − 2 x_u x_v)`.
pub fn exact_count(g: &MetricGraph, cond: &ConditionAssignment, k: f64) -> Option<usize> {
    let mut index = vec![None; g.vertex_count()];
    let mut n = 0;
    for v in g.vertices() {
        if !cond.is_dirichlet(v) {
            index[v.0] = Some(n);
            n += 1;
        }
    }
    let mut q = DMatrix::<f64>::zeros(n, n);
    for e in g.edges() {
        let (s, c) = (k * e.length).sin_cos();
        if s.abs() < 1e-9 {
            return None;
        }
        let w = k / s;
        if let Some(u) = index[e.tail.0] {
            q[(u, u)] += w * c;
        }
        if let Some(v) = index[e.head.0] {
            q[(v, v)] += w * c;
        }
        if let (Some(u), Some(v)) = (index[e.tail.0], index[e.head.0]) {
            q[(u, v)] -= w;
            q[(v, u)] -= w;
        }
    }
    if n == 0 {
        return Some(decoupled_count(g, k));
    }
    let scale = q.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let eig = nalgebra::SymmetricEigen::new(q);
    if eig.eigenvalues.iter().any(|x| x.abs() < 1e-10 * scale) {
        // k itself is (numerically) an eigenvalue
        return None;
    }
    Some(decoupled_count(g, k) + eig.eigenvalues.iter().filter(|&&x| x < 0.0).count())
}

/// `exact_count` at `k` or, if that is singular, at a nearby point inside `(lo, hi)`.
fn count_inside(g: &MetricGraph, cond: &ConditionAssignment, k: f64, lo: f64, hi: f64) -> Option<(usize, f64)> {
    let d = 1e-3 * (hi - lo);
    (0..40)
        .map(|j| k + d * if j % 2 == 0 { j as f64 / 2.0 } else { -(j as f64 + 1.0) / 2.0 })
        .filter(|&kk| kk > lo && kk < hi)
        .find_map(|kk| exact_count(g, cond, kk).map(|n| (n, kk)))
}

/// Roots in `(a, b)` located by bisecting the counting function.
fn roots_by_count(g: &MetricGraph, cond: &ConditionAssignment, a: (f64, usize), b: (f64, usize), tol: f64, out: &mut Vec<(f64, usize)>) {
    if b.1 <= a.1 {
        return;
    }
    if b.0 - a.0 <= tol {
        out.push((0.5 * (a.0 + b.0), b.1 - a.1));
        return;
    }
    match count_inside(g, cond, 0.5 * (a.0 + b.0), a.0, b.0) {
        Some((n, m)) => {
            roots_by_count(g, cond, a, (m, n), tol, out);
            roots_by_count(g, cond, (m, n), b, tol, out);
        }
        None => out.push((0.5 * (a.0 + b.0), b.1 - a.1)),
    }
}

/// Checks scanned roots segment by segment against the exact count and
/// re-solves every segment where they disagree.
fn repair_with_count(g: &MetricGraph, cond: &ConditionAssignment, k_lo: f64, k_hi: (f64, usize), zero: usize, roots: Vec<Root>, opts: &ScanOptions) -> Option<(Vec<Root>, bool)> {
    let mut cuts = vec![(k_lo, zero)];
    let inner: Vec<f64> = roots.windows(2).map(|w| 0.5 * (w[0].k + w[1].k)).collect();
    for (i, &m) in inner.iter().enumerate() {
        let (n, kk) = count_inside(g, cond, m, roots[i].k, roots[i + 1].k)?;
        cuts.push((kk, n));
    }
    cuts.push(k_hi);
    let f = |k: f64| secular_matrix(g, cond, k).map(|s| s.sigma_min()).unwrap_or(f64::INFINITY);
    let mut out = Vec::new();
    let mut repaired = false;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mine: Vec<&Root> = roots.iter().filter(|r| r.k > a.0 && r.k < b.0).collect();
        let scanned: usize = mine.iter().map(|r| r.multiplicity).sum();
        if b.1 < a.1 {
            return None;
        }
        if scanned == b.1 - a.1 {
            out.extend(mine.into_iter().cloned());
            continue;
        }
        repaired = true;
        let mut found = Vec::new();
        roots_by_count(g, cond, a, b, 1e-6 * b.0.max(1.0), &mut found);
        for (k, mult) in found {
            let w = 1e-6 * k.max(1.0);
            let k = golden_min(&f, k - w, k + w, opts.k_tol);
            let sigma_min = secular_matrix(g, cond, k).ok()?.sigma_min();
            out.push(Root { k, multiplicity: mult, sigma_min });
        }
    }
    Some((out, repaired))
}

fn golden_min(f: &(dyn Fn(f64) -> f64 + Sync), mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn scan_range(g: &MetricGraph, cond: &ConditionAssignment, k_lo: f64, k_hi: f64, step: f64, opts: &ScanOptions) -> Result<Vec<Root>> {
    let total = g.total_length();
    let points = ((k_hi - k_lo) / step).ceil() as usize + 1;
    let ks: Vec<f64> = (0..=points).map(|i| k_lo + (k_hi - k_lo) * i as f64 / points as f64).collect();
    let sig: Vec<f64> = ks
        .par_iter()
        .map(|&k| secular_matrix(g, cond, k).map(|s| s.sigma_min()))
        .collect::<Result<_>>()?;
    let f = |k: f64| secular_matrix(g, cond, k).map(|s| s.sigma_min()).unwrap_or(f64::INFINITY);
    let valleys: Vec<usize> = (1..ks.len() - 1).filter(|&i| sig[i] <= sig[i - 1] && sig[i] < sig[i + 1]).collect();
    let accept = opts.mult_tol * total.max(1.0);
    let mut roots: Vec<Root> = valleys
        .par_iter()
        .map(|&i| {
            let k = golden_min(&f, ks[i - 1], ks[i + 1], opts.k_tol);
            let s = secular_matrix(g, cond, k).expect("k > 0").singular_values();
            (k, s)
        })
        .filter(|(_, s)| s[0] <= accept)
        .map(|(k, s)| Root { k, multiplicity: s.iter().filter(|&&x| x <= accept).count(), sigma_min: s[0] })
        .collect();
    roots.sort_by(|a, b| a.k.total_cmp(&b.k));
    roots.dedup_by(|b, a| (b.k - a.k).abs() <= 10.0 * opts.k_tol);
    Ok(roots)
}

/// All eigenvalues `λ = k² < k_upper²`, found on a scan grid. A zero eigenvalue
/// is included when there is no Dirichlet condition. With `expected`, the scan
/// is refined until at least that many eigenvalues are found.
pub fn eigs_by_scan(g: &MetricGraph, cond: &ConditionAssignment, k_upper: f64, expected: Option<usize>, opts: &ScanOptions) -> Result<SecularSpectrum> {
    if g.edge_count() > MAX_EDGES {
        return Err(QgError::OutOfRange(format!("secular oracle takes at most {MAX_EDGES} edges")));
    }
    if !(k_upper > 0.0) {
        return Err(QgError::OutOfRange(format!("k_upper = {k_upper}")));
    }
    cond.validate(g)?;
    let total = g.total_length();
    let zero = usize::from(!cond.has_dirichlet() && g.is_connected());
    let k_lo = std::f64::consts::PI / (4.0 * total);
    let mut step = opts.step.unwrap_or(std::f64::consts::PI / (20.0 * total.max(g.max_edge_length())));
    let bracket = count_bracket(g, cond, k_upper);
    let exact = count_inside(g, cond, k_upper * (1.0 - 1e-9), 0.5 * k_upper, k_upper);
    let mut last_found = 0;
    for attempt in 0..=opts.max_rescans {
        let roots: Vec<Root> = if k_lo < k_upper { scan_range(g, cond, k_lo, k_upper, step, opts)? } else { vec![] };
        let check_k = exact.map_or(k_upper, |(_, kk)| kk);
        let mut roots: Vec<Root> = roots.into_iter().filter(|r| r.k < check_k).collect();
        let mut repaired = false;
        let counted = match exact {
            Some((n, kk)) => match repair_with_count(g, cond, k_lo, (kk, n), zero, roots.clone(), opts) {
                Some((fixed, r)) => {
                    roots = fixed;
                    repaired = r;
                    zero + roots.iter().map(|r| r.multiplicity).sum::<usize>() == n
                }
                None => false,
            },
            None => {
                let found = zero + roots.iter().map(|r| r.multiplicity).sum::<usize>();
                found >= bracket.0 && found <= bracket.1
            }
        };
        let found = zero + roots.iter().map(|r| r.multiplicity).sum::<usize>();
        last_found = found;
        let enough = expected.is_none_or(|e| found >= e);
        if counted && enough {
            let mut values = vec![0.0; zero];
            let mut residuals = vec![0.0; zero];
            for r in &roots {
                for _ in 0..r.multiplicity {
                    values.push(r.k * r.k);
                    residuals.push(r.sigma_min);
                }
            }
            let mut spectrum = Spectrum::new(values, Method::Secular);
            spectrum.residuals = residuals;
            if attempt > 0 {
                spectrum.flags.push(format!("scan refined {attempt} times to step {step:.3e}"));
            }
            if repaired {
                spectrum.flags.push("close roots separated by count bisection".into());
            }
            if exact.is_none() {
                spectrum.flags.push("count verified by bracket only".into());
            }
            return Ok(SecularSpectrum {
                spectrum,
                roots,
                k_upper,
                bracket,
                exact_count: exact.map(|(n, _)| n),
                weyl_deviation: found as f64 - total * k_upper / std::f64::consts::PI,
                step,
            });
        }
        step *= 0.5;
    }
    Err(QgError::MissedRoot { found: last_found, k: k_upper, lower: bracket.0, upper: bracket.1 })
}

/// The first `count` eigenvalues with multiplicity, growing the scan window as needed.
pub fn secular_eigenvalues(g: &MetricGraph, cond: &ConditionAssignment, count: usize, opts: &ScanOptions) -> Result<SecularSpectrum> {
    // N(k²) ≥ Σ_e (⌈kℓ_e/π⌉ − 1) ≥ kL/π − |E|, so this window already holds `count`
    let mut k_upper = std::f64::consts::PI * (count + g.edge_count()) as f64 / g.total_length();
    for _ in 0..64 {
        let s = eigs_by_scan(g, cond, k_upper, None, opts)?;
        if s.spectrum.len() >= count {
            let mut s = s;
            s.spectrum.truncate(count);
            return Ok(s);
        }
        k_upper *= 1.5;
    }
    Err(QgError::NoConvergence { iterations: 64, residual: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{make_family, FamilySpec};
    use crate::graph::VertexId;
    use std::f64::consts::PI;

    fn interval() -> MetricGraph {
        MetricGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn matrix_shape_and_singularity() {
        let g = interval();
        let both = ConditionAssignment::dirichlet_at([VertexId(0), VertexId(1)]);
        let s = secular_matrix(&g, &both, PI).unwrap();
        assert_eq!(s.matrix.shape(), (2, 2));
        assert!(s.sigma_min() < 1e-14);
        assert!(secular_matrix(&g, &both, 2.0).unwrap().sigma_min() > 0.1);
        let dn = ConditionAssignment::dirichlet_at([VertexId(0)]);
        assert!(secular_matrix(&g, &dn, PI / 2.0).unwrap().sigma_min() < 1e-14);
        assert!(secular_matrix(&g, &dn, 0.0).is_err());
    }

    #[test]
    fn letter_t_scalar_equation() {
        let fam = make_family(&FamilySpec::star(vec![1.0, 1.0, 0.5])).unwrap();
        let cond = ConditionAssignment::dirichlet_leaves(&fam.graph);
        // root of 2 cot k + cot(k/2) on (π/2, π)
        let h = |k: f64| 2.0 / k.tan() + 1.0 / (k / 2.0).tan();
        let (mut a, mut b) = (1.6, 3.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if h(a) * h(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let k = 0.5 * (a + b);
        assert!(secular_matrix(&fam.graph, &cond, k).unwrap().sigma_min() < 1e-12);
        let s = secular_eigenvalues(&fam.graph, &cond, 1, &ScanOptions::default()).unwrap();
        assert!((s.roots[0].k - k).abs() < 1e-9);
        let l1 = s.spectrum.eigenvalues[0];
        assert!(l1 > 3.6 && l1 < 3.7, "{l1}");
        assert!(PI * PI / (4.0 * 0.75 * 0.75) - l1 > 0.7);
    }

    #[test]
    fn closed_forms() {
        let loop_g = MetricGraph::from_edges(1, &[(0, 0, 1.0)]).unwrap();
        let s = secular_eigenvalues(&loop_g, &ConditionAssignment::standard(), 5, &ScanOptions::default()).unwrap();
        assert_eq!(s.spectrum.multiplicities().len(), 3);
        assert_eq!(s.roots[0].multiplicity, 2);
        assert!((s.roots[0].k - 2.0 * PI).abs() < 1e-9);
        assert!((s.roots[1].k - 4.0 * PI).abs() < 1e-9);

        let star = make_family(&FamilySpec::equilateral_star(3, 1.0)).unwrap().graph;
        let cond = ConditionAssignment::dirichlet_leaves(&star);
        let s = secular_eigenvalues(&star, &cond, 1, &ScanOptions::default()).unwrap();
        assert!((s.roots[0].k - PI / 2.0).abs() < 1e-9);
        let s = secular_eigenvalues(&star, &ConditionAssignment::standard(), 3, &ScanOptions::default()).unwrap();
        assert_eq!(s.spectrum.eigenvalues[0], 0.0);
        assert!((s.roots[0].k - PI / 2.0).abs() < 1e-9);
        assert_eq!(s.roots[0].multiplicity, 2);

        let g = interval();
        let both = ConditionAssignment::dirichlet_at([VertexId(0), VertexId(1)]);
        let s = eigs_by_scan(&g, &both, 10.0, None, &ScanOptions::default()).unwrap();
        assert_eq!(s.roots.len(), 3);
        for (j, r) in s.roots.iter().enumerate() {
            assert!((r.k - (j + 1) as f64 * PI).abs() < 1e-9);
        }
        assert!(s.bracket.0 <= 3 && 3 <= s.bracket.1);
    }

    #[test]
    fn exact_count_matches_closed_forms() {
        let g = interval();
        let both = ConditionAssignment::dirichlet_at([VertexId(0), VertexId(1)]);
        assert_eq!(exact_count(&g, &both, 3.5 * PI), Some(3));
        assert_eq!(exact_count(&g, &ConditionAssignment::standard(), 0.5), Some(1));
        assert_eq!(exact_count(&g, &ConditionAssignment::standard(), 3.5 * PI), Some(4));
        let loop_g = MetricGraph::from_edges(1, &[(0, 0, 1.0)]).unwrap();
        // 0, then 4π² twice
        assert_eq!(exact_count(&loop_g, &ConditionAssignment::standard(), 2.5 * PI), Some(3));
        let star = make_family(&FamilySpec::equilateral_star(3, 1.0)).unwrap().graph;
        assert_eq!(exact_count(&star, &ConditionAssignment::standard(), 1.6), Some(3));
        assert_eq!(exact_count(&star, &ConditionAssignment::standard(), 1.5), Some(1));
    }

    #[test]
    fn close_roots_are_resolved() {
        // two nearly equal arms split a double eigenvalue into a close pair
        let fam = make_family(&FamilySpec::star(vec![1.0, 1.0 + 1e-3, 0.7])).unwrap();
        let cond = ConditionAssignment::standard();
        let coarse = ScanOptions { step: Some(0.05), ..Default::default() };
        let s = eigs_by_scan(&fam.graph, &cond, 4.0, None, &coarse).unwrap();
        assert_eq!(Some(s.spectrum.len()), s.exact_count);
    }

    #[test]
    fn bracket_holds_on_dirichlet_leaves() {
        // many Dirichlet leaves: the Weyl estimate drifts, the bracket does not
        let star = make_family(&FamilySpec::equilateral_star(8, 1.0)).unwrap().graph;
        let cond = ConditionAssignment::dirichlet_leaves(&star);
        let s = eigs_by_scan(&star, &cond, 10.0, None, &ScanOptions::default()).unwrap();
        let n = s.spectrum.len();
        assert!(s.bracket.0 <= n && n <= s.bracket.1);
    }
}
