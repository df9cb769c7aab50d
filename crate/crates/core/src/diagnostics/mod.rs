//! Relabeling, convergence diagnostics and posterior summaries.

pub mod convergence;
pub mod hpdi;
pub mod relabel;
pub mod summary;

pub use convergence::{ess, rhat, Diagnostic};
pub use hpdi::{hpdi, Interval};
pub use relabel::{as_traces, ordering, relabel, relabel_with, RelabeledTrace, DEFAULT_MIN_WEIGHT};
pub use summary::{
    hard_assignments, mean_responsibilities, occupied_counts, pooled, predictive_zero_fraction,
    summarize, thinned, tracked_convergence, ComponentSummary, Estimate, FitSummary, IrrEstimate,
    ParamConvergence, SummaryOptions,
};
