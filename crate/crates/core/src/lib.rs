//! Fair division of indivisible goods through comparison queries.

pub mod adversary;
pub mod algorithm;
pub mod ef1;
pub mod error;
pub mod generate;
pub mod matching;
pub mod mms;
pub mod oracle;
pub mod prop1;
pub mod report;
pub mod session;
pub mod types;
pub mod verify;

pub use algorithm::{run, Algorithm, RunOutcome};
pub use error::{FairDivError, Result};
pub use oracle::{ComparisonOracle, ExactOracle, PendingQuery, ReplayOracle, TiePolicy};
pub use types::*;
