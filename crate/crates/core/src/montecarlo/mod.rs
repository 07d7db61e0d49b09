//! Empirical and exact tails, moment estimates and domination verdicts.

pub mod clopper_pearson;
pub mod domination;
pub mod exact;
pub mod moment;
pub mod tail;

pub use domination::{check_domination, DominationReport, TabulatedEnvelope, Violation};
pub use exact::{enumerate_exact_tail, enumerate_paths, PATH_LIMIT};
pub use moment::{estimate_moment_norm, MomentEstimate};
pub use tail::{centered_samples, estimate_tail, GridPolicy, TailEstimate};
