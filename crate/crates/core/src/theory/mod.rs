//! Exact checks of the tv-embedding theorem on finite two-view models and of
//! the representation power of `(Wx + b)₊` region embeddings.

mod retex;
mod two_view;

pub use retex::{
    enumerate_regions, region_at, region_count, retex_simple_concept, retex_union, retex_universal, seq_vector,
    RetexNet, SimpleConcept, MAX_ENUMERATED,
};
pub use two_view::{
    construct, sample_two_view_model, verify_theorem1, Check, Construction, Report, TwoViewModel, MAX_CONDITION,
    RANK_TOL, SAMPLE_BUDGET,
};
