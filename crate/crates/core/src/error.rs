use thiserror::Error;

use crate::oracle::PendingQuery;
use crate::types::{AgentId, ItemId};

pub type Result<T, E = FairDivError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FairDivError {
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),
    #[error("allocation is incomplete: {0} item(s) still in the pool")]
    IncompleteAllocation(usize),
    #[error("instance carries no valuations")]
    MissingValuations,
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("`{algorithm}` needs exactly {expected} agents, got {actual}")]
    ArityMismatch {
        algorithm: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("maximin share enumeration infeasible: {assignments} assignments exceed budget {budget}")]
    Infeasible { assignments: u128, budget: u128 },
    #[error("value arithmetic overflow")]
    Overflow,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("waiting for an answer to query {} of agent {}", .0.index, .0.agent)]
    Suspended(PendingQuery),
    #[error("no query is pending")]
    NoPendingQuery,
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}
