//! Tree-label calculus: the label sets `𝒟^(k)`, their weights, composition
//! sets, exact combinatorial sums and the explicit series expansion of the
//! Picard iterates.

mod expansion;
mod labels;
mod sums;

pub use expansion::{
    tree_expand_evaluate, MAX_EXPANSION_LEVEL, MAX_EXPANSION_RADIUS, MAX_QUAD_DEPTH,
};
pub use labels::{
    alpha_multiset, alpha_set, enumerate_labels, weights, TreeLabel, WeightRecord, MAX_ALPHA_SIGMA,
    MAX_LABEL_LEVEL,
};
pub use sums::{
    composition_bound, factorial_comp_sum, label_weight_sum, label_weight_term, lattice_exp_sum,
    majorant_bound_holds, majorant_counted_bound_holds, majorant_p, majorant_rhs,
    majorant_rhs_counted, majorant_sides, LatticeSum, MAX_COMPOSITION_PARTS, MAX_MAJORANT_SIGMA,
    MAX_WEIGHT_SUM_LEVEL,
};
