//! Inverse Strichartz tools: time-interval selection, the refined norm
//! over rescaled coherent states, and profile extraction.

mod interval;
mod profiles;
mod refined;

pub use interval::{find_time_interval, interval_pair, IntervalSearch, TimeInterval};
pub use profiles::{extract_profile, profile_decomposition, DecompositionReport, LedgerEntry, Profile, SearchGrid};
pub use refined::{refined_norm, RefinedReport, THETA_GRID};
