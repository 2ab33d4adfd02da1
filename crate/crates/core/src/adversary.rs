//! An adaptive adversary that answers value queries so as to reveal as
//! little as possible, and turns a run that stopped too early into a
//! concrete instance on which its allocation is unfair.

use serde::Serialize;

use crate::algorithm::{run, Algorithm, RunOutcome};
use crate::error::{FairDivError, Result};
use crate::oracle::ComparisonOracle;
use crate::types::{AgentId, Allocation, Bundle, Instance, ItemId, Preferred, QueryLog, Valuation};
use crate::verify::Fairness;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValueQuery {
    pub bundle: Bundle,
    pub answer: u64,
}

/// The valued items are known to lie in `candidates` and nowhere else.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdversaryState {
    pub n: usize,
    pub m: usize,
    pub candidates: Bundle,
    pub transcript: Vec<ValueQuery>,
}

impl AdversaryState {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            candidates: Bundle::full(m),
            transcript: Vec::new(),
        }
    }

    /// Answers `u(h)` as either `n + 1` (every valued item is in `h`) or `0`
    /// (none is), whichever keeps more candidates.
    pub fn answer(&mut self, h: &Bundle) -> u64 {
        let inside = self.candidates.intersection(h);
        let answer = if 2 * inside.len() >= self.candidates.len() && !inside.is_empty() {
            self.candidates = inside;
            self.n as u64 + 1
        } else {
            self.candidates.difference_with(h);
            0
        };
        self.transcript.push(ValueQuery {
            bundle: h.clone(),
            answer,
        });
        answer
    }

    pub fn value_queries(&self) -> usize {
        self.transcript.len()
    }

    /// Whether the run asked enough to pin the valued items down to at most
    /// two per agent.
    pub fn survived(&self) -> bool {
        self.candidates.len() <= 2 * self.n
    }

    /// Whether `v` reproduces every recorded answer.
    pub fn consistent_with(&self, v: &Valuation) -> Result<bool> {
        for q in &self.transcript {
            let value = v.scaled_value(&q.bundle)? / v.scale();
            if value != q.answer as u128 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Comparison oracle backed by the adversary; every comparison costs two
/// value queries and ties go to the first bundle.
pub struct AdversaryOracle {
    pub state: AdversaryState,
    log: QueryLog,
}

impl AdversaryOracle {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            state: AdversaryState::new(n, m),
            log: QueryLog::new(n),
        }
    }
}

impl ComparisonOracle for AdversaryOracle {
    fn compare(&mut self, agent: AgentId, x: &Bundle, y: &Bundle) -> Result<Preferred> {
        if agent.0 >= self.state.n {
            return Err(FairDivError::UnknownAgent(agent));
        }
        let answer = simulate_comparison(&mut self.state, x, y);
        self.log.record(agent, x, y, answer);
        Ok(answer)
    }

    fn log(&self) -> &QueryLog {
        &self.log
    }
}

pub fn simulate_comparison(state: &mut AdversaryState, x: &Bundle, y: &Bundle) -> Preferred {
    let a = state.answer(x);
    let b = state.answer(y);
    if a >= b {
        Preferred::X
    } else {
        Preferred::Y
    }
}

/// A binary valuation consistent with the transcript under which
/// `allocation` fails `fairness`, or `None` if the candidates are already
/// down to `2n`.
///
/// Three valued items go into the bundle holding the most candidates and
/// the rest fill the other candidates in id order. The other `n − 1`
/// bundles share at most `n − 2` valued items, so one of them gets none.
pub fn realize_witness(
    state: &AdversaryState,
    allocation: &Allocation,
    fairness: Fairness,
) -> Result<Option<Valuation>> {
    let n = state.n;
    if state.survived() || n < 2 {
        return Ok(None);
    }
    let crowded = (0..allocation.n())
        .max_by_key(|&i| (allocation.bundles[i].intersection_len(&state.candidates), std::cmp::Reverse(i)))
        .ok_or_else(|| FairDivError::InvalidAllocation("no bundles".into()))?;
    let inside: Vec<ItemId> = allocation.bundles[crowded]
        .intersection(&state.candidates)
        .iter()
        .take(3)
        .collect();
    if inside.len() < 3 {
        return Err(FairDivError::Invariant(format!(
            "{} candidates but no bundle holds three of them",
            state.candidates.len()
        )));
    }
    let mut valued: Bundle = inside.iter().collect();
    let (outside, within): (Vec<ItemId>, Vec<ItemId>) = state
        .candidates
        .iter()
        .partition(|&g| !allocation.bundles[crowded].contains(g));
    for g in outside.into_iter().chain(within) {
        if valued.len() == n + 1 {
            break;
        }
        valued.insert(g);
    }
    let v = Valuation::from_integers((0..state.m).map(|i| u64::from(valued.contains(ItemId(i)))));
    if !state.consistent_with(&v)? {
        return Err(FairDivError::Invariant("witness contradicts the transcript".into()));
    }
    let instance = Instance::with_valuations(vec![v.clone(); n])?;
    if fairness.check(&instance, allocation)? {
        return Err(FairDivError::Invariant(format!("witness does not break {fairness}")));
    }
    Ok(Some(v))
}

/// Queries twice, then splits the items into contiguous id blocks, putting
/// the first block where agent 0 said the value is.
pub fn strawman(o: &mut dyn ComparisonOracle, n: usize, m: usize) -> Result<Allocation> {
    let items: Vec<ItemId> = (0..m).map(ItemId).collect();
    let half = m / 2;
    let left: Bundle = items[..half].iter().collect();
    let right: Bundle = items[half..].iter().collect();
    let first = o.compare(AgentId(0), &left, &right)?;
    let quarter: Bundle = items[..half / 2].iter().collect();
    o.compare(AgentId(0), &quarter, &left.difference(&quarter))?;
    let (base, extra) = (m / n, m % n);
    let mut bundles = Vec::with_capacity(n);
    let mut pos = 0;
    for i in 0..n {
        let len = base + usize::from(i < extra);
        bundles.push(items[pos..pos + len].iter().collect::<Bundle>());
        pos += len;
    }
    if first == Preferred::Y {
        bundles.reverse();
    }
    Allocation::from_bundles(bundles, m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "verdict")]
pub enum Falsification {
    Survived {
        value_queries: usize,
        candidates: usize,
        /// `log₂(m / 2n)`, the fewest value queries that can get there.
        lower_bound: f64,
    },
    Falsified {
        value_queries: usize,
        candidates: usize,
        fairness: Fairness,
        witness: Valuation,
        allocation: Allocation,
    },
}

pub fn lower_bound(n: usize, m: usize) -> f64 {
    (m as f64 / (2 * n) as f64).log2().max(0.0)
}

fn judge(oracle: AdversaryOracle, allocation: Allocation, fairness: Fairness) -> Result<Falsification> {
    let state = oracle.state;
    let (value_queries, candidates) = (state.value_queries(), state.candidates.len());
    Ok(match realize_witness(&state, &allocation, fairness)? {
        None => Falsification::Survived {
            value_queries,
            candidates,
            lower_bound: lower_bound(state.n, state.m),
        },
        Some(witness) => Falsification::Falsified {
            value_queries,
            candidates,
            fairness,
            witness,
            allocation,
        },
    })
}

/// Runs `algorithm` against the adversary and checks the result.
pub fn falsify(algorithm: Algorithm, n: usize, m: usize) -> Result<(RunOutcome, Falsification)> {
    let mut oracle = AdversaryOracle::new(n, m);
    let out = run(&mut oracle, algorithm, n, m)?;
    let fairness = algorithm.guarantees()[0];
    let verdict = judge(oracle, out.allocation.clone(), fairness)?;
    Ok((out, verdict))
}

pub fn falsify_strawman(n: usize, m: usize) -> Result<Falsification> {
    let mut oracle = AdversaryOracle::new(n, m);
    let allocation = strawman(&mut oracle, n, m)?;
    judge(oracle, allocation, Fairness::Prop1)
}
