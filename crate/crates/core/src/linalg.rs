//! Sparse symmetric matrices and the smallest eigenpairs of `K u = λ M u`.
//!
//! Small problems go through a dense Cholesky reduction. Larger ones use
//! shift-invert block subspace iteration on `(K + σM)^{-1} M` with a sparse
//! Cholesky factor and Rayleigh–Ritz extraction.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{QgError, Result};

/// Symmetric sparse matrix stored as full rows (both triangles).
///
/// A matrix built from links keeps them as well: products then go through
/// differences `x_i - x_j`, which are exact for nearly equal neighbours, so a
/// stiffness matrix with huge entries on very short elements loses no accuracy
/// to cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    split: Option<Box<Split>>,
}

/// `A = Σ w (e_i - e_j)(e_i - e_j)ᵀ + diag(grounded) + rest`.
#[derive(Debug, Clone, PartialEq)]
struct Split {
    links: Vec<(usize, usize, f64)>,
    grounded: Vec<f64>,
    rest: SparseSym,
}

/// Accumulates symmetric entries; duplicates are summed.
#[derive(Debug, Clone, Default)]
pub struct SymBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
    links: Vec<(usize, usize, f64)>,
    grounded: Vec<f64>,
}

impl SymBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new(), links: Vec::new(), grounded: Vec::new() }
    }

    /// Adds `w (e_i - e_j)(e_i - e_j)ᵀ`.
    pub fn add_link(&mut self, i: usize, j: usize, w: f64) {
        self.links.push((i, j, w));
    }

    /// Adds `w` to the diagonal at `i`, kept apart from the plain entries.
    pub fn add_grounded(&mut self, i: usize, w: f64) {
        if self.grounded.is_empty() {
            self.grounded = vec![0.0; self.n];
        }
        self.grounded[i] += w;
    }

    /// Adds `v` at `(i, j)` and, off the diagonal, at `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i, j, v));
        if i != j {
            self.entries.push((j, i, v));
        }
    }

    pub fn build(self) -> SparseSym {
        if self.links.is_empty() && self.grounded.is_empty() {
            return Self::csr(self.n, self.entries);
        }
        let mut full = self.entries.clone();
        for &(i, j, w) in &self.links {
            full.extend([(i, i, w), (j, j, w), (i, j, -w), (j, i, -w)]);
        }
        for (i, &g) in self.grounded.iter().enumerate() {
            full.push((i, i, g));
        }
        let mut grounded = self.grounded;
        grounded.resize(self.n, 0.0);
        let rest = Self::csr(self.n, self.entries);
        let mut out = Self::csr(self.n, full);
        out.split = Some(Box::new(Split { links: self.links, grounded, rest }));
        out
    }

    fn csr(n: usize, mut entries: Vec<(usize, usize, f64)>) -> SparseSym {
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSym { n, row_ptr, cols, vals, split: None }
    }
}

impl SparseSym {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    fn csr_matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let Some(split) = &self.split else { return self.csr_matvec(x) };
        let mut y = split.rest.csr_matvec(x);
        for (i, g) in split.grounded.iter().enumerate() {
            y[i] += g * x[i];
        }
        for &(i, j, w) in &split.links {
            let d = w * (x[i] - x[j]);
            y[i] += d;
            y[j] -= d;
        }
        y
    }

    /// `|A| |x|` over the assembled entries. Rounding `x` to storage precision
    /// perturbs `A x` by about `ε |A| |x|`, so this sets the residual floor.
    pub fn abs_matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| (v * x[j]).abs()).sum()).collect()
    }

    pub fn quad(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(&self.matvec(y), x)
    }

    /// Pushes `s * self` into a builder, keeping links.
    fn push_into(&self, b: &mut SymBuilder, s: f64) {
        match &self.split {
            None => {
                for i in 0..self.n {
                    b.entries.extend(self.row(i).map(|(j, v)| (i, j, s * v)));
                }
            }
            Some(split) => {
                split.rest.push_into(b, s);
                b.links.extend(split.links.iter().map(|&(i, j, w)| (i, j, s * w)));
                for (i, &g) in split.grounded.iter().enumerate() {
                    if g != 0.0 {
                        b.add_grounded(i, s * g);
                    }
                }
            }
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &SparseSym, s: f64) -> SparseSym {
        assert_eq!(self.n, other.n);
        let mut b = SymBuilder::new(self.n);
        self.push_into(&mut b, 1.0);
        other.push_into(&mut b, s);
        b.build()
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    fn to_faer(&self) -> SparseColMat<usize, f64> {
        let trip: Vec<Triplet<usize, usize, f64>> = (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &trip).expect("indices are in range")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sparse Cholesky factor of a symmetric positive definite matrix.
pub struct SparseCholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl SparseCholesky {
    pub fn new(a: &SparseSym) -> Result<Self> {
        let llt = a
            .to_faer()
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| QgError::NotPositiveDefinite(format!("{e:?}")))?;
        Ok(Self { n: a.n, llt })
    }

    /// Solves `A x = b` for every column of `block`.
    pub fn solve_block(&self, block: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let p = block.len();
        let rhs = faer::Mat::<f64>::from_fn(self.n, p, |i, j| block[j][i]);
        let x = self.llt.solve(&rhs);
        (0..p).map(|j| (0..self.n).map(|i| x[(i, j)]).collect()).collect()
    }
}

/// Eigenpairs of `K u = λ M u`, ascending, `M`-orthonormal.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `|K u - λ M u| / max(|K u|, max(λ, λ_ref) |M u|)` per pair, where
    /// `λ_ref` is the default shift, so a zero mode is measured on the scale of
    /// the low spectrum.
    pub residuals: Vec<f64>,
    /// Componentwise rounding floor of each residual.
    pub residual_floors: Vec<f64>,
    pub iterations: usize,
    pub dense: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Problems with at most this many unknowns use the dense path.
    pub dense_threshold: usize,
    /// Shift `σ` in `K + σM`; by default a tenth of the smallest possible
    /// Dirichlet ground state for the total mass.
    pub shift: Option<f64>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 500, seed: 0x5eed, dense_threshold: 400, shift: None }
    }
}

fn residual_pair(k: &SparseSym, m: &SparseSym, lambda: f64, u: &[f64], lambda_ref: f64) -> (f64, f64) {
    let ku = k.matvec(u);
    let mu = m.matvec(u);
    let r: Vec<f64> = ku.iter().zip(&mu).map(|(a, b)| a - lambda * b).collect();
    let scale = norm(&k.abs_matvec(u)) + lambda.abs() * norm(&m.abs_matvec(u));
    let denom = norm(&ku).max(lambda.abs().max(lambda_ref) * norm(&mu)).max(f64::MIN_POSITIVE);
    (norm(&r) / denom, 8.0 * f64::EPSILON * scale / denom)
}

/// A tenth of the smallest Dirichlet ground state any graph of this total mass can have.
fn default_shift(m: &SparseSym) -> f64 {
    let ones = vec![1.0; m.dim()];
    let mass = m.quad(&ones, &ones).max(f64::MIN_POSITIVE);
    0.1 * std::f64::consts::PI.powi(2) / (4.0 * mass * mass)
}

/// The `count` smallest eigenpairs of `K u = λ M u` with `K` positive
/// semidefinite and `M` positive definite.
pub fn smallest_eigenpairs(k: &SparseSym, m: &SparseSym, count: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = k.dim();
    if count > n {
        return Err(QgError::TooManyEigenvalues { requested: count, available: n });
    }
    if count == 0 {
        return Ok(EigenPairs {
            values: vec![],
            vectors: vec![],
            residuals: vec![],
            residual_floors: vec![],
            iterations: 0,
            dense: n <= opts.dense_threshold,
        });
    }
    if n <= opts.dense_threshold {
        dense_eigenpairs(k, m, count)
    } else {
        subspace_eigenpairs(k, m, count, opts)
    }
}

fn finish(k: &SparseSym, m: &SparseSym, values: Vec<f64>, vectors: Vec<Vec<f64>>, iterations: usize, dense: bool) -> EigenPairs {
    let (residuals, residual_floors) = values.iter().zip(&vectors).map(|(&l, u)| residual_pair(k, m, l, u, default_shift(m))).unzip();
    EigenPairs { values, vectors, residuals, residual_floors, iterations, dense }
}

fn dense_eigenpairs(k: &SparseSym, m: &SparseSym, count: usize) -> Result<EigenPairs> {
    let kd = k.to_dense();
    let md = m.to_dense();
    let chol = md
        .cholesky()
        .ok_or_else(|| QgError::NotPositiveDefinite("mass matrix".into()))?;
    let l = chol.l();
    // C = L^{-1} K L^{-T}
    let y = l.solve_lower_triangular(&kd).expect("cholesky factor is nonsingular");
    let c = l.solve_lower_triangular(&y.transpose()).expect("cholesky factor is nonsingular");
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lt = l.transpose();
    let mut values = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    for &i in order.iter().take(count) {
        let z = lt
            .solve_upper_triangular(&eig.eigenvectors.column(i).into_owned())
            .expect("cholesky factor is nonsingular");
        let mut u: Vec<f64> = z.iter().copied().collect();
        normalize_sign(&mut u);
        values.push(eig.eigenvalues[i]);
        vectors.push(u);
    }
    Ok(finish(k, m, values, vectors, 1, true))
}

/// Makes the largest-magnitude entry positive so output is reproducible.
fn normalize_sign(u: &mut [f64]) {
    let pivot = u.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
    if pivot < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Rayleigh–Ritz on the span of `y`: returns Ritz values ascending and the
/// corresponding `M`-orthonormal Ritz vectors.
pub(crate) fn rayleigh_ritz(
    a: &SparseSym,
    b: &SparseSym,
    y: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let p = y.len();
    let by: Vec<Vec<f64>> = y.par_iter().map(|c| b.matvec(c)).collect();
    let ay: Vec<Vec<f64>> = y.par_iter().map(|c| a.matvec(c)).collect();
    let gram = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &by[j]) + dot(&y[j], &by[i])));
    let proj = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &ay[j]) + dot(&y[j], &ay[i])));
    let ge = SymmetricEigen::new(gram);
    let gmax = ge.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
    let keep: Vec<usize> = (0..p).filter(|&i| ge.eigenvalues[i] > 1e-13 * gmax).collect();
    if keep.is_empty() {
        return Err(QgError::NoConvergence { iterations: 0, residual: f64::INFINITY });
    }
    let r = keep.len();
    let basis = DMatrix::from_fn(p, r, |i, j| ge.eigenvectors[(i, keep[j])] / ge.eigenvalues[keep[j]].sqrt());
    let reduced = basis.transpose() * proj * &basis;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let re = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| re.eigenvalues[i].total_cmp(&re.eigenvalues[j]));
    let coeff = basis * &re.eigenvectors;
    let n = y[0].len();
    let vectors: Vec<Vec<f64>> = order
        .par_iter()
        .map(|&c| {
            let mut v = vec![0.0; n];
            for (i, yi) in y.iter().enumerate() {
                let w = coeff[(i, c)];
                v.iter_mut().zip(yi).for_each(|(a, b)| *a += w * b);
            }
            v
        })
        .collect();
    Ok((order.iter().map(|&i| re.eigenvalues[i]).collect(), vectors))
}

fn subspace_eigenpairs(k: &SparseSym, m: &SparseSym, count: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = k.dim();
    let p = (2 * count).max(count + 8).min(n);
    let lambda_ref = default_shift(m);
    let shift = opts.shift.unwrap_or(lambda_ref);
    let factor = SparseCholesky::new(&k.add_scaled(m, shift))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut best_worst = f64::INFINITY;
    let mut stalled = 0;
    for it in 1..=opts.max_iter {
        let mx: Vec<Vec<f64>> = x.par_iter().map(|c| m.matvec(c)).collect();
        let y = factor.solve_block(&mx);
        let (theta, vecs) = rayleigh_ritz(k, m, &y)?;
        if theta.len() < count {
            return Err(QgError::NoConvergence { iterations: it, residual: f64::INFINITY });
        }
        let checks: Vec<(f64, f64)> = (0..count)
            .into_par_iter()
            .map(|i| residual_pair(k, m, theta[i], &vecs[i], lambda_ref))
            .collect();
        // progress is measured against each pair's own target, so a zero mode
        // sitting at its rounding floor does not mask the others
        let worst = checks.iter().map(|&(r, floor)| r / opts.tol.max(floor)).fold(0.0, f64::max);
        x = vecs;
        if worst <= 1.0 {
            let mut vectors: Vec<Vec<f64>> = x.into_iter().take(count).collect();
            vectors.iter_mut().for_each(|u| normalize_sign(u));
            return Ok(finish(k, m, theta[..count].to_vec(), vectors, it, false));
        }
        if worst < 0.5 * best_worst {
            best_worst = worst;
            stalled = 0;
        } else {
            stalled += 1;
        }
        // stagnation within a decade of the rounding floor of this mesh
        if stalled >= 8 && worst <= 10.0 {
            let mut vectors: Vec<Vec<f64>> = x.into_iter().take(count).collect();
            vectors.iter_mut().for_each(|u| normalize_sign(u));
            return Ok(finish(k, m, theta[..count].to_vec(), vectors, it, false));
        }
    }
    Err(QgError::NoConvergence { iterations: opts.max_iter, residual: best_worst })
}

/// Largest eigenpair of `B u = σ A u` with `A` positive definite and `B`
/// positive semidefinite, by block subspace iteration on `A^{-1} B`.
pub fn largest_generalized(
    a_factor: &SparseCholesky,
    a: &SparseSym,
    b: &SparseSym,
    block: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let n = a.dim();
    let p = block.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut prev = f64::NAN;
    for it in 1..=max_iter {
        let bx: Vec<Vec<f64>> = x.par_iter().map(|c| b.matvec(c)).collect();
        let y = a_factor.solve_block(&bx);
        // Ritz values of B against A; the top one is wanted
        let (theta, vecs) = rayleigh_ritz(b, a, &y)?;
        let top = *theta.last().unwrap();
        if (top - prev).abs() <= tol * top.abs().max(f64::MIN_POSITIVE) {
            return Ok((top, it));
        }
        prev = top;
        x = vecs;
        if x.iter().all(|v| v.iter().all(|&c| c == 0.0)) {
            return Ok((0.0, it));
        }
    }
    Err(QgError::NoConvergence { iterations: max_iter, residual: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// P1 stiffness and mass for `[0, 1]` with `n` elements, both ends free.
    fn interval(n: usize) -> (SparseSym, SparseSym) {
        let h = 1.0 / n as f64;
        let mut kb = SymBuilder::new(n + 1);
        let mut mb = SymBuilder::new(n + 1);
        for e in 0..n {
            let (a, b) = (e, e + 1);
            kb.add(a, a, 1.0 / h);
            kb.add(b, b, 1.0 / h);
            kb.add(a, b, -1.0 / h);
            mb.add(a, a, h / 3.0);
            mb.add(b, b, h / 3.0);
            mb.add(a, b, h / 6.0);
        }
        (kb.build(), mb.build())
    }

    /// Closed-form P1 Neumann eigenvalues on a uniform mesh.
    fn discrete_neumann(j: usize, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let c = (j as f64 * PI * h).cos();
        6.0 / (h * h) * (1.0 - c) / (2.0 + c)
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = SymBuilder::new(2);
        b.add(0, 1, 1.0);
        b.add(1, 0, 2.0);
        b.add(0, 0, 4.0);
        let a = b.build();
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(1, 0), 3.0);
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![7.0, 3.0]);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn links_match_plain_entries() {
        let mut plain = SymBuilder::new(3);
        let mut linked = SymBuilder::new(3);
        for (i, j, w) in [(0, 1, 2.0), (1, 2, 5.0)] {
            plain.add(i, i, w);
            plain.add(j, j, w);
            plain.add(i, j, -w);
            linked.add_link(i, j, w);
        }
        plain.add(2, 2, 3.0);
        linked.add_grounded(2, 3.0);
        plain.add(0, 0, 1.0);
        linked.add(0, 0, 1.0);
        let (p, l) = (plain.build(), linked.build());
        assert_eq!(p.to_dense(), l.to_dense());
        let x = [0.3, -1.0, 2.0];
        assert_eq!(p.matvec(&x), l.matvec(&x));
        let sum = l.add_scaled(&p, 2.0);
        assert_eq!(sum.to_dense(), p.to_dense() * 3.0);
        assert!(sum.matvec(&x).iter().zip(p.matvec(&x)).all(|(a, b)| (a - 3.0 * b).abs() < 1e-12));
        // nearly equal neighbours on a stiff link: the difference form is exact
        let mut stiff = SymBuilder::new(2);
        stiff.add_link(0, 1, 1e12);
        stiff.add(0, 0, 1.0);
        stiff.add(1, 1, 1.0);
        let a = stiff.build();
        let y = [1.0 + 1e-13, 1.0];
        let q = a.quad(&y, &y);
        let expected = 1e12 * (y[0] - y[1]) * (y[0] - y[1]) + y[0] * y[0] + y[1] * y[1];
        assert!((q - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn cholesky_solves() {
        let (k, m) = interval(50);
        let a = k.add_scaled(&m, 1.0);
        let f = SparseCholesky::new(&a).unwrap();
        let b: Vec<f64> = (0..51).map(|i| (i as f64).sin()).collect();
        let x = f.solve_block(&[b.clone()]).remove(0);
        let r = a.matvec(&x);
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-10));
    }

    #[test]
    fn dense_matches_closed_form() {
        let (k, m) = interval(100);
        let e = smallest_eigenpairs(&k, &m, 4, &EigenOptions::default()).unwrap();
        assert!(e.dense);
        assert!(e.values[0].abs() < 1e-9);
        for j in 1..4 {
            let exact = discrete_neumann(j, 100);
            assert!((e.values[j] - exact).abs() < 1e-9 * exact, "{} vs {exact}", e.values[j]);
        }
    }

    #[test]
    fn subspace_matches_closed_form() {
        let (k, m) = interval(2000);
        let e = smallest_eigenpairs(&k, &m, 5, &EigenOptions::default()).unwrap();
        assert!(!e.dense);
        for j in 1..5 {
            let exact = discrete_neumann(j, 2000);
            assert!((e.values[j] - exact).abs() < 1e-10 * exact, "{} vs {exact}", e.values[j]);
            assert!(e.residuals[j] <= 1e-9, "{}", e.residuals[j]);
        }
        for i in 0..5 {
            for j in 0..5 {
                let g = m.quad(&e.vectors[i], &e.vectors[j]);
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn paths_agree_and_are_deterministic() {
        let (k, m) = interval(300);
        let dense = smallest_eigenpairs(&k, &m, 3, &EigenOptions::default()).unwrap();
        let opts = EigenOptions { dense_threshold: 0, ..Default::default() };
        let a = smallest_eigenpairs(&k, &m, 3, &opts).unwrap();
        let b = smallest_eigenpairs(&k, &m, 3, &opts).unwrap();
        assert_eq!(a.values, b.values);
        for j in 1..3 {
            assert!((a.values[j] - dense.values[j]).abs() < 1e-9 * dense.values[j]);
        }
        assert!(matches!(
            smallest_eigenpairs(&k, &m, 400, &opts),
            Err(QgError::TooManyEigenvalues { .. })
        ));
    }
}
