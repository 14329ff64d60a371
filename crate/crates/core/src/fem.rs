//! Piecewise-linear finite elements for the Laplacian on a metric graph.
//!
//! Vertex nodes are shared by every incident edge, which builds continuity
//! into the trial space; the Kirchhoff condition is natural for the form.
//! Dirichlet vertices and Dirichlet-tagged ends are eliminated.

use serde::Serialize;

use crate::error::{QgError, Result};
use crate::graph::{ConditionAssignment, EdgeId, MetricGraph};
use crate::linalg::{self, EigenOptions, SparseCholesky, SparseSym, SymBuilder};
use crate::spectrum::{Method, Spectrum};
use crate::symmetrization::{EdgeProfile, PLFunction};

/// Per-edge subdivision and global node numbering. Nodes `0..|V|` are the
/// graph vertices; interior nodes follow edge by edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FemMesh {
    pub counts: Vec<usize>,
    pub lengths: Vec<f64>,
    /// Global node ids along each edge, tail to head (`counts[e] + 1` entries).
    pub edge_nodes: Vec<Vec<usize>>,
    pub node_count: usize,
    /// Free-DOF index of each node, `None` where eliminated.
    pub free_index: Vec<Option<usize>>,
    pub free_count: usize,
    pub eliminated: Vec<usize>,
    pub h_target: f64,
    /// The DOF cap forced a coarser mesh than `h_target`.
    pub cap_binding: bool,
}

fn count_for(len: f64, h: f64) -> usize {
    ((len / h).ceil() as usize).max(2)
}

fn nodes_for(g: &MetricGraph, h: f64, refine: usize) -> usize {
    g.vertex_count() + g.edges().iter().map(|e| refine * count_for(e.length, h) - 1).sum::<usize>()
}

impl FemMesh {
    fn from_counts(g: &MetricGraph, cond: &ConditionAssignment, counts: Vec<usize>, h_target: f64, cap_binding: bool) -> Self {
        let mut next = g.vertex_count();
        let edge_nodes = g
            .edges()
            .iter()
            .zip(&counts)
            .map(|(e, &c)| {
                let mut nodes = Vec::with_capacity(c + 1);
                nodes.push(e.tail.0);
                for _ in 1..c {
                    nodes.push(next);
                    next += 1;
                }
                nodes.push(e.head.0);
                nodes
            })
            .collect();
        let mut free_index = vec![None; next];
        let mut eliminated = Vec::new();
        let mut free = 0;
        for (node, slot) in free_index.iter_mut().enumerate() {
            if node < g.vertex_count() && cond.is_dirichlet(crate::graph::VertexId(node)) {
                eliminated.push(node);
            } else {
                *slot = Some(free);
                free += 1;
            }
        }
        Self {
            counts,
            lengths: g.edges().iter().map(|e| e.length).collect(),
            edge_nodes,
            node_count: next,
            free_index,
            free_count: free,
            eliminated,
            h_target,
            cap_binding,
        }
    }

    /// Same graph with every edge's subdivision doubled.
    pub fn refined(&self, g: &MetricGraph, cond: &ConditionAssignment) -> Self {
        let counts = self.counts.iter().map(|c| 2 * c).collect();
        Self::from_counts(g, cond, counts, 0.5 * self.h_target, self.cap_binding)
    }

    /// Largest element length.
    pub fn h_max(&self) -> f64 {
        self.lengths.iter().zip(&self.counts).map(|(l, &c)| l / c as f64).fold(0.0, f64::max)
    }

    /// Position of local node `j` on edge `e`.
    pub fn position(&self, e: EdgeId, j: usize) -> f64 {
        self.lengths[e.0] * j as f64 / self.counts[e.0] as f64
    }

    /// Expands a free-DOF vector to all nodes (zeros on eliminated nodes).
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        self.free_index.iter().map(|i| i.map_or(0.0, |i| free[i])).collect()
    }

    /// Restricts a node vector to the free DOFs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.free_count];
        for (node, i) in self.free_index.iter().enumerate() {
            if let Some(i) = i {
                out[*i] = full[node];
            }
        }
        out
    }

    /// Nodal interpolant of `f(edge, x)`.
    pub fn interpolate(&self, f: impl Fn(EdgeId, f64) -> f64) -> Vec<f64> {
        let mut full = vec![0.0; self.node_count];
        for (e, nodes) in self.edge_nodes.iter().enumerate() {
            for (j, &node) in nodes.iter().enumerate() {
                full[node] = f(EdgeId(e), self.position(EdgeId(e), j));
            }
        }
        full
    }

    /// The continuous piecewise-linear function with the given nodal values.
    pub fn to_pl(&self, g: &MetricGraph, full: &[f64]) -> Result<PLFunction> {
        let profiles = self
            .edge_nodes
            .iter()
            .enumerate()
            .map(|(e, nodes)| EdgeProfile {
                xs: (0..nodes.len()).map(|j| self.position(EdgeId(e), j)).collect(),
                ys: nodes.iter().map(|&n| full[n]).collect(),
            })
            .collect();
        PLFunction::new(g, profiles)
    }
}

/// Subdivides each edge into `max(2, ceil(ℓ/h))` elements. When the node count
/// exceeds `dof_cap`, `h` is coarsened uniformly until it fits.
pub fn mesh(g: &MetricGraph, cond: &ConditionAssignment, h_target: f64, dof_cap: usize) -> Result<FemMesh> {
    mesh_with_refinement(g, cond, h_target, dof_cap, 1)
}

/// As [`mesh`], sized so that the mesh refined `refine` times over still fits the cap.
fn mesh_with_refinement(g: &MetricGraph, cond: &ConditionAssignment, h_target: f64, dof_cap: usize, refine: usize) -> Result<FemMesh> {
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(QgError::OutOfRange(format!("mesh width {h_target}")));
    }
    cond.validate(g)?;
    let minimum = nodes_for(g, f64::INFINITY, refine);
    if dof_cap < minimum {
        return Err(QgError::DofCap { cap: dof_cap, minimum });
    }
    let mut h = h_target;
    let mut binding = false;
    if nodes_for(g, h, refine) > dof_cap {
        binding = true;
        let (mut lo, mut hi) = (h, 2.0 * g.max_edge_length());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if nodes_for(g, mid, refine) > dof_cap {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        h = hi;
    }
    let counts = g.edges().iter().map(|e| count_for(e.length, h)).collect();
    Ok(FemMesh::from_counts(g, cond, counts, h, binding))
}

/// Stiffness `K` and mass `M` on the free DOFs.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub stiffness: SparseSym,
    pub mass: SparseSym,
}

fn assemble_edges(mesh: &FemMesh, include: impl Fn(usize) -> bool, stiffness: bool) -> SparseSym {
    let mut b = SymBuilder::new(mesh.free_count);
    for (e, nodes) in mesh.edge_nodes.iter().enumerate() {
        if !include(e) {
            continue;
        }
        let h = mesh.lengths[e] / mesh.counts[e] as f64;
        let (diag, off) = if stiffness { (1.0 / h, -1.0 / h) } else { (h / 3.0, h / 6.0) };
        for w in nodes.windows(2) {
            let (a, c) = (mesh.free_index[w[0]], mesh.free_index[w[1]]);
            if stiffness {
                // difference form; an eliminated Dirichlet neighbour grounds the other node
                match (a, c) {
                    (Some(a), Some(c)) => b.add_link(a, c, diag),
                    (Some(v), None) | (None, Some(v)) => b.add_grounded(v, diag),
                    (None, None) => {}
                }
                continue;
            }
            if let Some(a) = a {
                b.add(a, a, diag);
            }
            if let Some(c) = c {
                b.add(c, c, diag);
            }
            if let (Some(a), Some(c)) = (a, c) {
                b.add(a, c, off);
            }
        }
    }
    b.build()
}

/// Accumulates element matrices `(1/h)[[1,-1],[-1,1]]` and `(h/6)[[2,1],[1,2]]`.
pub fn assemble(mesh: &FemMesh) -> FemSystem {
    FemSystem { stiffness: assemble_edges(mesh, |_| true, true), mass: assemble_edges(mesh, |_| true, false) }
}

/// `uᵀKu / uᵀMu` for a free-DOF vector.
pub fn rayleigh(u: &[f64], system: &FemSystem) -> Result<f64> {
    let den = system.mass.quad(u, u);
    if den <= 0.0 {
        return Err(QgError::Invalid("rayleigh quotient of the zero function".into()));
    }
    Ok(system.stiffness.quad(u, u) / den)
}

/// The `count` smallest eigenpairs on a mesh. With no Dirichlet condition on a
/// connected graph the ground state is set to exactly 0 with the constant
/// eigenfunction `1/sqrt(L)`.
pub fn solve_eigs(g: &MetricGraph, cond: &ConditionAssignment, mesh: &FemMesh, system: &FemSystem, count: usize, opts: &EigenOptions) -> Result<Spectrum> {
    let pairs = linalg::smallest_eigenpairs(&system.stiffness, &system.mass, count, opts)?;
    let mut values = pairs.values;
    let mut vectors = pairs.vectors;
    let mut residuals = pairs.residuals;
    let mut flags = Vec::new();
    if !cond.has_dirichlet() && g.is_connected() && count > 0 {
        let ones = vec![1.0; mesh.free_count];
        let c = 1.0 / system.mass.quad(&ones, &ones).sqrt();
        let scale = values.get(1).copied().unwrap_or(1.0).abs().max(1.0);
        if values[0].abs() > 1e-8 * scale {
            flags.push(format!("ground state {:e} replaced by exact zero", values[0]));
        }
        values[0] = 0.0;
        vectors[0] = vec![c; mesh.free_count];
        residuals[0] = 0.0;
    }
    let over: Vec<String> = residuals
        .iter()
        .zip(&pairs.residual_floors)
        .enumerate()
        .filter(|(_, (r, _))| **r > opts.tol)
        .map(|(i, (r, f))| format!("pair {} residual {:.2e} above {:.0e} (rounding floor {:.2e})", i + 1, r, opts.tol, f))
        .collect();
    flags.extend(over);
    let mut s = Spectrum::new(values, Method::Fem);
    s.mesh_h = Some(mesh.h_max());
    s.residuals = residuals;
    s.vectors = vectors.iter().map(|v| mesh.expand(v)).collect();
    s.flags = flags;
    Ok(s)
}

/// `(4 λ_{h/2} - λ_h) / 3` index by index.
pub fn richardson(coarse: &Spectrum, fine: &Spectrum) -> Result<Spectrum> {
    if coarse.len() != fine.len() {
        return Err(QgError::Mismatch(format!("{} eigenvalues against {}", coarse.len(), fine.len())));
    }
    let values: Vec<f64> = coarse.eigenvalues.iter().zip(&fine.eigenvalues).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    let mut s = Spectrum::new(values, Method::FemExtrapolated);
    if coarse.groups != fine.groups || s.groups != fine.groups {
        s.flags.push("multiplicity structure differs between meshes; extrapolated per index".into());
    }
    s.mesh_h = fine.mesh_h;
    s.residuals = fine.residuals.clone();
    s.vectors = fine.vectors.clone();
    s.flags.extend(fine.flags.iter().cloned());
    Ok(s)
}

/// Discretization settings for [`fem_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FemSettings {
    pub h: f64,
    pub dof_cap: usize,
    pub extrapolate: bool,
    pub eigen: EigenOptions,
}

impl Default for FemSettings {
    fn default() -> Self {
        Self { h: 5e-3, dof_cap: 200_000, extrapolate: true, eigen: EigenOptions::default() }
    }
}

/// Spectrum with the mesh its eigenfunctions live on.
#[derive(Debug, Clone)]
pub struct FemResult {
    pub spectrum: Spectrum,
    pub mesh: FemMesh,
    pub system: FemSystem,
}

impl FemResult {
    /// Eigenfunction `k` (1-based) as a piecewise-linear function.
    pub fn eigenfunction(&self, g: &MetricGraph, k: usize) -> Result<PLFunction> {
        let v = self
            .spectrum
            .vectors
            .get(k.wrapping_sub(1))
            .ok_or_else(|| QgError::OutOfRange(format!("eigenfunction {k}")))?;
        self.mesh.to_pl(g, v)
    }
}

/// The first `count` eigenvalues, extrapolated from meshes `h` and `h/2` when requested.
pub fn fem_spectrum(g: &MetricGraph, cond: &ConditionAssignment, count: usize, settings: &FemSettings) -> Result<FemResult> {
    if settings.extrapolate {
        let base = mesh_with_refinement(g, cond, settings.h, settings.dof_cap, 2)?;
        let fine = base.refined(g, cond);
        let (sa, sb) = (assemble(&base), assemble(&fine));
        let (a, b) = rayon::join(
            || solve_eigs(g, cond, &base, &sa, count, &settings.eigen),
            || solve_eigs(g, cond, &fine, &sb, count, &settings.eigen),
        );
        let mut s = richardson(&a?, &b?)?;
        if base.cap_binding {
            s.flags.push(format!("dof cap {} binds; base mesh width {:.3e}", settings.dof_cap, base.h_target));
        }
        Ok(FemResult { spectrum: s, mesh: fine, system: sb })
    } else {
        let m = mesh(g, cond, settings.h, settings.dof_cap)?;
        let sys = assemble(&m);
        let mut s = solve_eigs(g, cond, &m, &sys, count, &settings.eigen)?;
        if m.cap_binding {
            s.flags.push(format!("dof cap {} binds; mesh width {:.3e}", settings.dof_cap, m.h_target));
        }
        Ok(FemResult { spectrum: s, mesh: m, system: sys })
    }
}

/// Factorization of `K + M` reused across cores for the tail indicator.
pub struct TailIndicator {
    mesh: FemMesh,
    energy: SparseSym,
    factor: SparseCholesky,
    pub seed: u64,
}

/// Largest tail mass fraction on the discrete `H¹` unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailReport {
    pub sigma: f64,
    pub iterations: usize,
    /// The core covers the whole graph, so `σ = 0` trivially.
    pub trivial: bool,
}

impl TailIndicator {
    pub fn new(g: &MetricGraph, cond: &ConditionAssignment, h: f64, dof_cap: usize) -> Result<Self> {
        let mesh = mesh(g, cond, h, dof_cap)?;
        let sys = assemble(&mesh);
        let energy = sys.stiffness.add_scaled(&sys.mass, 1.0);
        let factor = SparseCholesky::new(&energy)?;
        Ok(Self { mesh, energy, factor, seed: 0x7a11 })
    }

    pub fn mesh(&self) -> &FemMesh {
        &self.mesh
    }

    /// `σ = max { |u|²_{L²(tail)} : |u|²_{H¹} = 1 }`, the top eigenvalue of
    /// `M_tail u = σ (K + M) u`, where the tail is every edge outside `core`.
    pub fn sigma(&self, core: &[bool]) -> Result<TailReport> {
        if core.iter().all(|&c| c) {
            return Ok(TailReport { sigma: 0.0, iterations: 0, trivial: true });
        }
        let tail = assemble_edges(&self.mesh, |e| !core[e], false);
        let (sigma, iterations) = linalg::largest_generalized(&self.factor, &self.energy, &tail, 12, 1e-10, 2000, self.seed)?;
        Ok(TailReport { sigma, iterations, trivial: false })
    }
}

/// Tail indicator with the core given as a subgraph matched by edge labels.
pub fn tail_indicator(g: &MetricGraph, core: &MetricGraph, cond: &ConditionAssignment, h: f64, dof_cap: usize) -> Result<TailReport> {
    let mut mask = vec![false; g.edge_count()];
    for e in core.edges() {
        let id = g.edge_by_label(&e.label).ok_or_else(|| QgError::UnknownEdge(e.label.clone()))?;
        mask[id.0] = true;
    }
    TailIndicator::new(g, cond, h, dof_cap)?.sigma(&mask)
}
