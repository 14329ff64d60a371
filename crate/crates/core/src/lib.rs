//! Metric graphs, their Laplacian spectra, and isoperimetric eigenvalue bounds.

pub mod bounds;
pub mod error;
pub mod exhaustion;
pub mod cheeger;
pub mod families;
pub mod fem;
pub mod geometry;
pub mod graph;
pub mod linalg;
pub mod secular;
pub mod spectrum;
pub mod surgery;
pub mod symmetrization;

pub use bounds::{check_bounds, hypothesis_check, Bound, BoundReport, CombProbe, Hypotheses, Verdict};
pub use error::{QgError, Result};
pub use exhaustion::{convergence_study, truncation_ladder, BoundaryRule, ConvergenceTable, ExhaustionStep};
pub use families::{make_family, Family, FamilyKind, FamilySpec};
pub use fem::{fem_spectrum, FemResult, FemSettings};
pub use geometry::{diameter, geometry_report, inradius, Diameter, GeometryReport, GraphPoint};
pub use graph::{ConditionAssignment, EdgeEnd, EdgeId, EndCondition, MetricGraph, Side, VertexId};
pub use secular::{secular_eigenvalues, ScanOptions};
pub use spectrum::{Method, Spectrum};
pub use symmetrization::{EdgeProfile, PLFunction};
