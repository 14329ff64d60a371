//! Continuous piecewise-linear functions on a compact metric graph, their
//! level sets, the monotone rearrangement onto `[0, L]`, and exact checks of
//! the equimeasurability, Pólya and coarea identities.

use serde::Serialize;

use crate::error::{QgError, Result};
use crate::graph::{EdgeId, MetricGraph, VertexId};

/// Breakpoints `xs` (from 0 to the edge length) and values `ys` on one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProfile {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl EdgeProfile {
    pub fn length(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = match self.xs.partition_point(|&b| b <= x) {
            0 => 0,
            i if i >= self.xs.len() => self.xs.len() - 2,
            i => i - 1,
        };
        let (x0, x1, y0, y1) = (self.xs[i], self.xs[i + 1], self.ys[i], self.ys[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.xs.len() - 1).map(move |i| (self.xs[i + 1] - self.xs[i], self.ys[i], self.ys[i + 1]))
    }
}

/// A continuous piecewise-linear function, one profile per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PLFunction {
    profiles: Vec<EdgeProfile>,
    /// `(tail, head)` vertex of each edge, used to count shared vertex points once.
    ends: Vec<(VertexId, VertexId)>,
    vertex_count: usize,
}

fn lt_measure(h: f64, y0: f64, y1: f64, t: f64) -> f64 {
    match (y0 < t, y1 < t) {
        (true, true) => h,
        (false, false) => 0.0,
        (true, false) => h * (t - y0) / (y1 - y0),
        (false, true) => h * (t - y1) / (y0 - y1),
    }
}

fn le_measure(h: f64, y0: f64, y1: f64, t: f64) -> f64 {
    match (y0 <= t, y1 <= t) {
        (true, true) => h,
        (false, false) => 0.0,
        (true, false) => h * (t - y0) / (y1 - y0),
        (false, true) => h * (t - y1) / (y0 - y1),
    }
}

impl PLFunction {
    /// Builds a function from per-edge profiles, checking continuity at shared vertices.
    pub fn new(g: &MetricGraph, profiles: Vec<EdgeProfile>) -> Result<Self> {
        if profiles.len() != g.edge_count() {
            return Err(QgError::Invalid(format!("{} profiles for {} edges", profiles.len(), g.edge_count())));
        }
        for (p, e) in profiles.iter().zip(g.edges()) {
            if p.xs.len() < 2 || p.xs.len() != p.ys.len() {
                return Err(QgError::Invalid(format!("edge {} needs at least two breakpoints", e.label)));
            }
            if p.xs[0] != 0.0 || (p.length() - e.length).abs() > 1e-12 * e.length.max(1.0) {
                return Err(QgError::Invalid(format!("breakpoints of edge {} do not span it", e.label)));
            }
            if p.xs.windows(2).any(|w| w[1] <= w[0]) {
                return Err(QgError::Invalid(format!("breakpoints of edge {} not increasing", e.label)));
            }
        }
        let scale = profiles.iter().flat_map(|p| p.ys.iter()).fold(0.0f64, |m, y| m.max(y.abs())).max(1.0);
        let mut at_vertex: Vec<Option<f64>> = vec![None; g.vertex_count()];
        for (p, e) in profiles.iter().zip(g.edges()) {
            for (v, y) in [(e.tail, p.ys[0]), (e.head, *p.ys.last().unwrap())] {
                match at_vertex[v.0] {
                    None => at_vertex[v.0] = Some(y),
                    Some(y0) if (y0 - y).abs() > 1e-12 * scale => {
                        return Err(QgError::Invalid(format!("discontinuous at vertex {}", g.vertex_label(v))))
                    }
                    _ => {}
                }
            }
        }
        // agreeing ends within tolerance are snapped to one value so level sets see a single point
        let mut profiles = profiles;
        for (p, e) in profiles.iter_mut().zip(g.edges()) {
            p.ys[0] = at_vertex[e.tail.0].unwrap();
            *p.ys.last_mut().unwrap() = at_vertex[e.head.0].unwrap();
        }
        let ends = g.edges().iter().map(|e| (e.tail, e.head)).collect();
        Ok(Self { profiles, ends, vertex_count: g.vertex_count() })
    }

    /// A function on `[0, xs.last()]`.
    pub fn on_interval(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let len = *xs.last().ok_or_else(|| QgError::Invalid("empty profile".into()))?;
        let g = MetricGraph::from_edges(2, &[(0, 1, len)])?;
        Self::new(&g, vec![EdgeProfile { xs, ys }])
    }

    /// Interpolates `f(edge, x)` on a uniform grid of width at most `h` on each edge.
    pub fn sample(g: &MetricGraph, h: f64, f: impl Fn(EdgeId, f64) -> f64) -> Result<Self> {
        let profiles = g
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let n = ((e.length / h).ceil() as usize).max(1);
                let xs: Vec<f64> = (0..=n).map(|j| e.length * j as f64 / n as f64).collect();
                let ys = xs.iter().map(|&x| f(EdgeId(i), x)).collect();
                EdgeProfile { xs, ys }
            })
            .collect();
        Self::new(g, profiles)
    }

    pub fn profiles(&self) -> &[EdgeProfile] {
        &self.profiles
    }

    pub fn total_length(&self) -> f64 {
        self.profiles.iter().map(EdgeProfile::length).sum()
    }

    pub fn min(&self) -> f64 {
        self.values().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values().fold(f64::NEG_INFINITY, f64::max)
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.profiles.iter().flat_map(|p| p.ys.iter().copied())
    }

    fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.profiles.iter().flat_map(EdgeProfile::segments)
    }

    /// Sorted distinct breakpoint values (vertex values included).
    pub fn critical_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.values().collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// `|{f < t}|`.
    pub fn sublevel_measure(&self, t: f64) -> f64 {
        self.segments().map(|(h, a, b)| lt_measure(h, a, b, t)).sum()
    }

    /// `|{f <= t}|`.
    pub fn sublevel_measure_closed(&self, t: f64) -> f64 {
        self.segments().map(|(h, a, b)| le_measure(h, a, b, t)).sum()
    }

    /// Number of segments crossed strictly by the level `t`.
    pub fn strict_crossings(&self, t: f64) -> usize {
        self.segments().filter(|&(_, a, b)| (a - t) * (b - t) < 0.0).count()
    }

    pub fn energy(&self) -> f64 {
        self.segments().map(|(h, a, b)| (b - a) * (b - a) / h).sum()
    }

    pub fn l2_squared(&self) -> f64 {
        self.segments().map(|(h, a, b)| h * (a * a + a * b + b * b) / 3.0).sum()
    }

    pub fn level_data(&self, t: f64) -> LevelData {
        let mut plateau = false;
        let mut count = self.strict_crossings(t);
        let mut vertex_hit = vec![false; self.vertex_count];
        for (p, &(u, v)) in self.profiles.iter().zip(&self.ends) {
            let last = p.ys.len() - 1;
            for (i, &y) in p.ys.iter().enumerate() {
                if y != t {
                    continue;
                }
                if i < last && p.ys[i + 1] == t {
                    plateau = true;
                }
                match i {
                    0 => vertex_hit[u.0] = true,
                    i if i == last => vertex_hit[v.0] = true,
                    _ => count += 1,
                }
            }
        }
        count += vertex_hit.iter().filter(|&&b| b).count();
        let regular = !self.values().any(|y| y == t);
        LevelData {
            level: t,
            count: if plateau { None } else { Some(count) },
            sublevel_measure: self.sublevel_measure(t),
            regular,
        }
    }

    /// Consecutive critical values `(c_i, c_{i+1})`, skipping bands thinner
    /// than rounding noise in the values (their midpoints are not regular).
    pub fn regular_bands(&self) -> Vec<(f64, f64)> {
        let c = self.critical_values();
        let span = c.last().zip(c.first()).map_or(0.0, |(a, b)| a - b);
        let eps = 64.0 * f64::EPSILON * self.max().abs().max(self.min().abs()).max(span);
        c.windows(2).filter(|w| w[1] - w[0] > eps).map(|w| (w[0], w[1])).collect()
    }

    /// Essential infimum of the level-set cardinality over `(min, max)`; `n`
    /// is constant between consecutive critical values, so midpoints suffice.
    pub fn min_level_count(&self) -> usize {
        self.regular_bands()
            .into_iter()
            .map(|(a, b)| self.strict_crossings(0.5 * (a + b)))
            .min()
            .unwrap_or(0)
    }

    /// Nondecreasing profile on `[0, L]` with the same distribution function.
    pub fn rearrange(&self) -> PLFunction {
        let c = self.critical_values();
        let total = self.total_length();
        let mut xs: Vec<f64> = Vec::with_capacity(2 * c.len());
        let mut ys: Vec<f64> = Vec::with_capacity(2 * c.len());
        let mut push = |x: f64, y: f64| {
            let x = x.clamp(0.0, total);
            if let Some(&last) = xs.last() {
                if x <= last {
                    return;
                }
            }
            xs.push(x);
            ys.push(y);
        };
        for (i, &ci) in c.iter().enumerate() {
            let lo = if i == 0 { 0.0 } else { self.sublevel_measure(ci) };
            let hi = if i + 1 == c.len() { total } else { self.sublevel_measure_closed(ci) };
            push(lo, ci);
            push(hi, ci);
        }
        if xs.len() == 1 {
            // constant function
            xs.push(total);
            ys.push(ys[0]);
        }
        if let Some(x) = xs.first_mut() {
            *x = 0.0;
        }
        PLFunction::on_interval(xs, ys).expect("rearrangement is a valid interval profile")
    }

    /// Value at a point; `edge` indexes the profiles.
    pub fn eval(&self, edge: EdgeId, x: f64) -> f64 {
        self.profiles[edge.0].eval(x)
    }
}

/// Level-set summary at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelData {
    pub level: f64,
    /// `#{f = t}`; `None` when a zero-slope segment sits at the level.
    pub count: Option<usize>,
    /// `|{f < t}|`.
    pub sublevel_measure: f64,
    /// The level avoids every breakpoint value.
    pub regular: bool,
}

pub fn level_data(f: &PLFunction, t: f64) -> LevelData {
    f.level_data(t)
}

pub fn rearrange(f: &PLFunction) -> PLFunction {
    f.rearrange()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub difference: f64,
}

impl IdentityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, difference: (lhs - rhs).abs() }
    }

    pub fn relative(&self) -> f64 {
        self.difference / self.lhs.abs().max(self.rhs.abs()).max(f64::MIN_POSITIVE)
    }
}

/// `||f||^2` on the graph against `||f*||^2` on `[0, L]`.
pub fn check_cavalieri(f: &PLFunction) -> IdentityCheck {
    IdentityCheck::new(f.l2_squared(), f.rearrange().l2_squared())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolyaCheck {
    pub energy: f64,
    pub min_level_count: usize,
    pub rearranged_energy: f64,
    /// `energy / (n_min^2 * rearranged_energy)`; at least one when the inequality holds.
    pub ratio: f64,
}

pub fn check_polya(f: &PLFunction) -> PolyaCheck {
    let energy = f.energy();
    let n = f.min_level_count();
    let star = f.rearrange().energy();
    let rhs = (n * n) as f64 * star;
    let ratio = if rhs == 0.0 {
        if energy == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        energy / rhs
    };
    PolyaCheck { energy, min_level_count: n, rearranged_energy: star, ratio }
}

/// Both sides of the weighted coarea identity: the exact integral of
/// `weight * |f'|`, and the level integral of the weight summed over level sets.
pub fn check_coarea(f: &PLFunction, weight: &PLFunction) -> Result<IdentityCheck> {
    if f.profiles.len() != weight.profiles.len() {
        return Err(QgError::Mismatch("function and weight live on different graphs".into()));
    }
    if weight.min() < 0.0 {
        return Err(QgError::OutOfRange("coarea weight must be nonnegative".into()));
    }
    let mut lhs = 0.0;
    let mut levels: Vec<f64> = f.values().collect();
    for (fp, wp) in f.profiles.iter().zip(&weight.profiles) {
        let mut xs: Vec<f64> = fp.xs.iter().chain(wp.xs.iter()).copied().collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * fp.length().max(1.0));
        for w in xs.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let slope = (fp.eval(x1) - fp.eval(x0)) / (x1 - x0);
            lhs += slope.abs() * (x1 - x0) * 0.5 * (wp.eval(x0) + wp.eval(x1));
        }
        levels.extend(wp.xs.iter().map(|&x| fp.eval(x)));
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let integrand = |t: f64| -> f64 {
        let mut s = 0.0;
        for (fp, wp) in f.profiles.iter().zip(&weight.profiles) {
            for i in 0..fp.xs.len() - 1 {
                let (y0, y1) = (fp.ys[i], fp.ys[i + 1]);
                if (y0 - t) * (y1 - t) < 0.0 {
                    let x = fp.xs[i] + (fp.xs[i + 1] - fp.xs[i]) * (t - y0) / (y1 - y0);
                    s += wp.eval(x);
                }
            }
        }
        s
    };
    // the integrand is linear between consecutive levels; two-point Gauss is exact there
    let g = 0.5 / 3f64.sqrt();
    let rhs = levels
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let half = b - a;
            0.5 * half * (integrand(mid - g * half) + integrand(mid + g * half))
        })
        .sum();
    Ok(IdentityCheck::new(lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn linear() -> PLFunction {
        PLFunction::on_interval(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap()
    }

    fn sine(h: f64) -> PLFunction {
        let g = MetricGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        PLFunction::sample(&g, h, |_, x| (PI * x).sin()).unwrap()
    }

    #[test]
    fn level_data_examples() {
        let d = linear().level_data(0.3);
        assert_eq!(d.count, Some(1));
        assert!((d.sublevel_measure - 0.3).abs() < 1e-15);
        assert!(d.regular);
        let s = sine(1e-3).level_data(0.5);
        assert_eq!(s.count, Some(2));
        assert!((s.sublevel_measure - 1.0 / 3.0).abs() < 1e-3);
        let c = PLFunction::on_interval(vec![0.0, 1.0], vec![2.0, 2.0]).unwrap().level_data(2.0);
        assert_eq!(c.count, None);
        assert!(!c.regular);
    }

    #[test]
    fn rearrange_linear_is_identity() {
        let r = linear().rearrange();
        assert_eq!(r.profiles()[0].xs, vec![0.0, 1.0]);
        assert_eq!(r.profiles()[0].ys, vec![0.0, 1.0]);
    }

    #[test]
    fn rearrange_sine_is_quarter_wave() {
        let r = sine(1e-3).rearrange();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert!((r.eval(EdgeId(0), x) - (PI * x / 2.0).sin()).abs() < 2e-3, "x = {x}");
        }
    }

    #[test]
    fn rearrange_symmetric_tent_on_two_star() {
        // two arms of length 1 meeting at a center value 1, tips at 0
        let g = MetricGraph::from_edges(3, &[(0, 1, 1.0), (0, 2, 1.0)]).unwrap();
        let f = PLFunction::sample(&g, 0.5, |_, x| 1.0 - x).unwrap();
        let r = f.rearrange();
        assert_eq!(r.profiles()[0].xs, vec![0.0, 1.0, 2.0]);
        assert_eq!(r.profiles()[0].ys, vec![0.0, 0.5, 1.0]);
        assert!((r.energy() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cavalieri_and_polya() {
        let c = check_cavalieri(&linear());
        assert!((c.lhs - 1.0 / 3.0).abs() < 1e-15 && c.difference < 1e-15);
        let s = sine(1e-3);
        let c = check_cavalieri(&s);
        assert!((c.lhs - 0.5).abs() < 1e-5);
        assert!(c.relative() < 1e-10);
        let p = check_polya(&s);
        assert_eq!(p.min_level_count, 2);
        assert!((p.ratio - 1.0).abs() < 1e-6);
        assert!((p.energy - PI * PI / 2.0).abs() < 1e-4);
        let p = check_polya(&linear());
        assert_eq!(p.min_level_count, 1);
        assert!((p.ratio - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coarea_examples() {
        let one = PLFunction::on_interval(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let c = check_coarea(&linear(), &one).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-15 && c.difference < 1e-12);
        let c = check_coarea(&linear(), &linear()).unwrap();
        assert!((c.lhs - 0.5).abs() < 1e-15 && c.difference < 1e-12);
        let s = sine(1e-3);
        let g = MetricGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let w = PLFunction::sample(&g, 1.0, |_, _| 1.0).unwrap();
        let c = check_coarea(&s, &w).unwrap();
        assert!((c.lhs - 2.0).abs() < 1e-5);
        assert!(c.difference < 1e-8);
    }

    #[test]
    fn discontinuous_profiles_rejected() {
        let g = MetricGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let p = vec![
            EdgeProfile { xs: vec![0.0, 1.0], ys: vec![0.0, 1.0] },
            EdgeProfile { xs: vec![0.0, 1.0], ys: vec![2.0, 0.0] },
        ];
        assert!(PLFunction::new(&g, p).is_err());
    }
}
