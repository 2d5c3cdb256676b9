//! Optimal per-GDF spend and budget allocation across a portfolio.

mod allocate;
mod search;
mod spend;

pub use allocate::{
    allocate, allocate_with, value_scale, AllocationMethod, AllocationOptions, AllocationResult, KktCertificate,
};
pub use search::{golden_section_max, scanned_max};
pub use spend::{closed_form_spend, mandatory_min_loss, optimal_spend, optimal_spend_with_mode, optimum, SpendOptimum};

pub(crate) use spend::peak_on;
