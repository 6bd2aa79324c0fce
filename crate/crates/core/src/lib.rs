//! Gradient-boosted regression trees, a weighted nearest-neighbour case base
//! that borrows the ensemble's feature importance, and tools to compare
//! additive feature attributions (kernelSHAP, LIME, additive CBR, exact
//! Shapley) on accuracy and ranking agreement.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cbr;
pub mod dataset;
pub mod eval;
pub mod explain;
pub mod gbdt;
pub mod pipeline;
