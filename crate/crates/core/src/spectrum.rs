//! Ordered eigenvalue lists with multiplicity grouping.

use serde::{Deserialize, Serialize};

/// Relative gap below which neighbouring eigenvalues share a multiplicity group.
pub const CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Fem,
    FemExtrapolated,
    Secular,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fem => "fem",
            Method::FemExtrapolated => "fem-extrapolated",
            Method::Secular => "secular",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// Nondecreasing, repeated according to multiplicity.
    pub eigenvalues: Vec<f64>,
    /// 1-based multiplicity group of each eigenvalue.
    pub groups: Vec<usize>,
    pub method: Method,
    /// Mesh width of the finest mesh used, if any.
    pub mesh_h: Option<f64>,
    pub residuals: Vec<f64>,
    /// Eigenfunctions as values on every mesh node (empty for the secular oracle).
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    /// Diagnostics worth surfacing next to the numbers.
    pub flags: Vec<String>,
}

impl Spectrum {
    pub fn new(eigenvalues: Vec<f64>, method: Method) -> Self {
        let groups = group_multiplicities(&eigenvalues, CLUSTER_TOL);
        let n = eigenvalues.len();
        Self { eigenvalues, groups, method, mesh_h: None, residuals: vec![0.0; n], vectors: Vec::new(), flags: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `k`-th eigenvalue, 1-based as in `λ_1 ≤ λ_2 ≤ …`.
    pub fn nth(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.eigenvalues.get(i).copied())
    }

    /// Distinct values with their multiplicities.
    pub fn multiplicities(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for (i, &g) in self.groups.iter().enumerate() {
            match out.last_mut() {
                Some(last) if i > 0 && self.groups[i - 1] == g => last.1 += 1,
                _ => out.push((self.eigenvalues[i], 1)),
            }
        }
        out
    }

    pub fn truncate(&mut self, n: usize) {
        self.eigenvalues.truncate(n);
        self.groups.truncate(n);
        self.residuals.truncate(n);
        self.vectors.truncate(n.min(self.vectors.len()));
    }

    pub fn regroup(&mut self) {
        self.groups = group_multiplicities(&self.eigenvalues, CLUSTER_TOL);
    }
}

/// Groups sorted values whose relative gap is below `rel_tol`.
pub fn group_multiplicities(values: &[f64], rel_tol: f64) -> Vec<usize> {
    let mut groups = Vec::with_capacity(values.len());
    let mut g = 0;
    for (i, &v) in values.iter().enumerate() {
        let same = i > 0 && {
            let u = values[i - 1];
            (v - u).abs() <= rel_tol * u.abs().max(v.abs())
        };
        if !same {
            g += 1;
        }
        groups.push(g);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grouping() {
        assert_eq!(group_multiplicities(&[0.0, 1.0, 1.0 + 1e-9, 2.0], 1e-6), vec![1, 2, 2, 3]);
        assert_eq!(group_multiplicities(&[0.0, 0.0, 1e-12], 1e-6), vec![1, 1, 2]);
        let s = Spectrum::new(vec![0.0, 2.0, 2.0, 2.0, 5.0], Method::Secular);
        assert_eq!(s.multiplicities(), vec![(0.0, 1), (2.0, 3), (5.0, 1)]);
        assert_eq!(s.nth(2), Some(2.0));
        assert_eq!(s.nth(0), None);
    }
}
