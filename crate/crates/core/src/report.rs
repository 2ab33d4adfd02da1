//! Run reports.

use serde::Serialize;

use crate::algorithm::{Algorithm, RunOutcome, RunTrace};
use crate::error::Result;
use crate::oracle::TiePolicy;
use crate::types::{Allocation, Instance, QueryLog};
use crate::verify::{fairness_report, Fairness, FairnessReport};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub check: Fairness,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
    pub tie_policy: TiePolicy,
    pub allocation: Allocation,
    pub queries: usize,
    pub per_agent_queries: Vec<u64>,
    pub round_queries: Vec<usize>,
    pub fairness: FairnessReport,
    pub verdicts: Vec<Verdict>,
    pub trace: RunTrace,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// Builds the report, running each of `checks` against the true
/// valuations.
pub fn build_report(
    instance: &Instance,
    tie_policy: TiePolicy,
    outcome: RunOutcome,
    log: &QueryLog,
    checks: &[Fairness],
) -> Result<RunReport> {
    let with_mms = checks.iter().any(|c| matches!(c, Fairness::AlphaMms(_)));
    let fairness = fairness_report(instance, &outcome.allocation, with_mms)?;
    let mut verdicts = Vec::with_capacity(checks.len());
    for &check in checks {
        verdicts.push(Verdict {
            check,
            passed: check.check(instance, &outcome.allocation)?,
        });
    }
    let mut per_agent_queries = log.per_agent.clone();
    per_agent_queries.resize(instance.n, 0);
    Ok(RunReport {
        algorithm: outcome.algorithm,
        n: instance.n,
        m: instance.m,
        tie_policy,
        round_queries: outcome.trace.round_queries(),
        allocation: outcome.allocation,
        queries: log.total(),
        per_agent_queries,
        fairness,
        verdicts,
        trace: outcome.trace,
    })
}
