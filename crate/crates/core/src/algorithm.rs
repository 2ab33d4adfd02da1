//! Dispatch by algorithm name.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ef1::{cut_and_choose, ef1_envy_graph, ef1_identical, ef1_three_agents, ThreeAgentCase};
use crate::error::{FairDivError, Result};
use crate::mms::{main_algorithm, BundleKind, FirstTypeEvent, RoundState};
use crate::oracle::ComparisonOracle;
use crate::prop1::{prop1_general, prop1_identical, Prop1Round};
use crate::types::{AgentId, Allocation, Bundle};
use crate::verify::Fairness;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    Prop1Identical,
    Prop1,
    Ef1Two,
    Ef1Identical,
    Ef1Three,
    Prop1Mms,
    Ef1EnvyGraph,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Prop1Identical,
        Algorithm::Prop1,
        Algorithm::Ef1Two,
        Algorithm::Ef1Identical,
        Algorithm::Ef1Three,
        Algorithm::Prop1Mms,
        Algorithm::Ef1EnvyGraph,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Prop1Identical => "prop1-identical",
            Algorithm::Prop1 => "prop1",
            Algorithm::Ef1Two => "ef1-2",
            Algorithm::Ef1Identical => "ef1-identical",
            Algorithm::Ef1Three => "ef1-3",
            Algorithm::Prop1Mms => "prop1-mms",
            Algorithm::Ef1EnvyGraph => "ef1-envy-graph",
        }
    }

    /// The number of agents the algorithm is restricted to, if any.
    pub fn arity(self) -> Option<usize> {
        match self {
            Algorithm::Ef1Two => Some(2),
            Algorithm::Ef1Three => Some(3),
            _ => None,
        }
    }

    pub fn check_arity(self, n: usize) -> Result<()> {
        match self.arity() {
            Some(expected) if expected != n => Err(FairDivError::ArityMismatch {
                algorithm: self.name(),
                expected,
                actual: n,
            }),
            _ if n == 0 => Err(FairDivError::InvalidInstance("at least one agent is required".into())),
            _ => Ok(()),
        }
    }

    /// Whether only agent 0 is ever asked, which makes the result fair only
    /// when every agent shares that valuation.
    pub fn assumes_identical(self) -> bool {
        matches!(self, Algorithm::Prop1Identical | Algorithm::Ef1Identical)
    }

    /// The properties the algorithm guarantees.
    pub fn guarantees(self) -> Vec<Fairness> {
        match self {
            Algorithm::Prop1Identical | Algorithm::Prop1 => vec![Fairness::Prop1],
            Algorithm::Prop1Mms => vec![Fairness::Prop1, Fairness::half_mms()],
            _ => vec![Fairness::Ef1],
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = FairDivError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| FairDivError::UnknownAlgorithm(s.to_string()))
    }
}

impl TryFrom<String> for Algorithm {
    type Error = FairDivError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.name().to_string()
    }
}

/// Algorithm-specific detail kept next to the allocation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RunTrace {
    None,
    Prop1 {
        rounds: Vec<Prop1Round>,
    },
    ThreeAgents {
        case: ThreeAgentCase,
    },
    Mms {
        kinds: Vec<BundleKind>,
        first_type: Vec<FirstTypeEvent>,
        rounds: Vec<RoundState>,
    },
}

impl RunTrace {
    /// Queries spent per round, for the algorithms that work in rounds.
    pub fn round_queries(&self) -> Vec<usize> {
        match self {
            RunTrace::Prop1 { rounds } => rounds.iter().map(|r| r.queries).collect(),
            RunTrace::Mms { rounds, .. } => rounds.iter().map(|r| r.queries).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunOutcome {
    pub algorithm: Algorithm,
    pub allocation: Allocation,
    pub trace: RunTrace,
}

/// Runs `algorithm` on `n` agents and items `0..m`.
pub fn run(o: &mut dyn ComparisonOracle, algorithm: Algorithm, n: usize, m: usize) -> Result<RunOutcome> {
    algorithm.check_arity(n)?;
    let items = Bundle::full(m);
    let (bundles, trace) = match algorithm {
        Algorithm::Prop1Identical => (prop1_identical(o, AgentId(0), n, &items)?, RunTrace::None),
        Algorithm::Ef1Identical => (ef1_identical(o, AgentId(0), n, &items)?.bundles, RunTrace::None),
        Algorithm::Ef1Two => {
            let (a, b) = cut_and_choose(o, &items)?;
            (vec![a, b], RunTrace::None)
        }
        Algorithm::Ef1Three => {
            let out = ef1_three_agents(o, &items)?;
            (out.bundles, RunTrace::ThreeAgents { case: out.case })
        }
        Algorithm::Ef1EnvyGraph => (ef1_envy_graph(o, n, &items)?, RunTrace::None),
        Algorithm::Prop1 => {
            let out = prop1_general(o, n, m)?;
            return Ok(RunOutcome {
                algorithm,
                allocation: out.allocation,
                trace: RunTrace::Prop1 { rounds: out.rounds },
            });
        }
        Algorithm::Prop1Mms => {
            let out = main_algorithm(o, n, m)?;
            return Ok(RunOutcome {
                algorithm,
                allocation: out.allocation,
                trace: RunTrace::Mms {
                    kinds: out.kinds,
                    first_type: out.first_type,
                    rounds: out.rounds,
                },
            });
        }
    };
    Ok(RunOutcome {
        algorithm,
        allocation: Allocation::from_bundles(bundles, m)?,
        trace,
    })
}
