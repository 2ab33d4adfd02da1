//! Resumable runs driven by externally supplied answers.
//!
//! A session is its configuration plus the answers given so far. Every step
//! replays the algorithm from the start against those answers and stops at
//! the first query that has none.

use serde::{Deserialize, Serialize};

use crate::algorithm::{run, Algorithm, RunOutcome};
use crate::error::{FairDivError, Result};
use crate::oracle::{PendingQuery, ReplayOracle};
use crate::types::{Preferred, QueryLog};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.algorithm.check_arity(self.n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "state")]
pub enum Step {
    Pending { query: PendingQuery },
    Finished { outcome: RunOutcome },
}

/// Where the run stands after `answers`, and the transcript up to there.
///
/// Answers beyond the point where the algorithm finishes are an error.
pub fn step(config: &SessionConfig, answers: &[Preferred]) -> Result<(Step, QueryLog)> {
    config.validate()?;
    let mut oracle = ReplayOracle::new(config.n, answers.to_vec());
    let result = run(&mut oracle, config.algorithm, config.n, config.m);
    let log = oracle.into_log();
    match result {
        Ok(outcome) => {
            if log.total() < answers.len() {
                return Err(FairDivError::NoPendingQuery);
            }
            Ok((Step::Finished { outcome }, log))
        }
        Err(FairDivError::Suspended(query)) => Ok((Step::Pending { query }, log)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ComparisonOracle, ExactOracle, TiePolicy};
    use crate::types::{AgentId, Instance, Valuation};

    fn drive(config: &SessionConfig, inst: &Instance) -> (RunOutcome, Vec<Preferred>) {
        let mut exact = ExactOracle::new(inst, TiePolicy::FirstArgument).unwrap();
        let mut answers = Vec::new();
        loop {
            match step(config, &answers).unwrap().0 {
                Step::Pending { query } => {
                    assert_eq!(query.index, answers.len());
                    answers.push(exact.compare(query.agent, &query.x, &query.y).unwrap());
                }
                Step::Finished { outcome } => return (outcome, answers),
            }
        }
    }

    #[test]
    fn replayed_session_matches_a_direct_run() {
        let inst = Instance::with_valuations(vec![
            Valuation::from_integers([4, 1, 3, 2]),
            Valuation::from_integers([1, 1, 5, 1]),
        ])
        .unwrap();
        let config = SessionConfig {
            algorithm: Algorithm::Ef1Two,
            n: 2,
            m: 4,
        };
        let (outcome, answers) = drive(&config, &inst);
        let mut exact = ExactOracle::new(&inst, TiePolicy::FirstArgument).unwrap();
        let direct = run(&mut exact, Algorithm::Ef1Two, 2, 4).unwrap();
        assert_eq!(outcome, direct);
        assert_eq!(answers.len(), exact.log().total());

        // one answer too many
        let mut extra = answers.clone();
        extra.push(Preferred::X);
        assert!(matches!(step(&config, &extra), Err(FairDivError::NoPendingQuery)));
    }

    #[test]
    fn single_agent_finishes_without_questions() {
        let config = SessionConfig {
            algorithm: Algorithm::Prop1Mms,
            n: 1,
            m: 5,
        };
        let (step, log) = step(&config, &[]).unwrap();
        assert!(matches!(step, Step::Finished { .. }));
        assert_eq!(log.total(), 0);
    }

    #[test]
    fn first_query_goes_to_the_cutter() {
        let config = SessionConfig {
            algorithm: Algorithm::Ef1Two,
            n: 2,
            m: 6,
        };
        let Step::Pending { query } = step(&config, &[]).unwrap().0 else {
            panic!("finished without asking");
        };
        assert_eq!((query.index, query.agent), (0, AgentId(0)));
        assert!(step(&SessionConfig { n: 3, ..config }, &[]).is_err());
    }
}
