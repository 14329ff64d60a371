//! Shared fixtures for the solver benchmarks.

use qgraph::bounds::pool_instance;
use qgraph::{make_family, ConditionAssignment, EndCondition, FamilySpec, MetricGraph};

/// A pool member with standard conditions, as the oracle comparison uses it.
pub fn pool_graph(seed: u64) -> (MetricGraph, ConditionAssignment) {
    let p = pool_instance(seed).expect("pool seeds are valid");
    (p.graph, ConditionAssignment::standard())
}

pub fn star(arms: usize) -> (MetricGraph, ConditionAssignment) {
    let f = make_family(&FamilySpec::equilateral_star(arms, 1.0)).expect("valid star");
    (f.graph, f.conditions)
}

/// Diagonal comb truncated at `teeth`, Neumann at the cut.
pub fn comb(alpha: f64, teeth: usize) -> (MetricGraph, ConditionAssignment) {
    let f = make_family(&FamilySpec::diagonal_comb(alpha, teeth, EndCondition::Neumann)).expect("valid comb");
    (f.graph, f.conditions)
}
