//! Comparison oracles and the search primitives built on top of them.
//!
//! Algorithms never read values. Everything they learn comes through
//! [`ComparisonOracle::compare`], and every call is logged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FairDivError, Result};
use crate::types::{AgentId, Bundle, Instance, ItemId, Preferred, QueryLog, Valuation};

pub trait ComparisonOracle {
    /// Asks `agent` which of `x` and `y` it prefers.
    fn compare(&mut self, agent: AgentId, x: &Bundle, y: &Bundle) -> Result<Preferred>;

    fn log(&self) -> &QueryLog;
}

/// How an exact oracle answers when both bundles have the same value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TiePolicy {
    #[default]
    FirstArgument,
    SecondArgument,
    /// Ties are answered by a seeded coin flip.
    Scripted { seed: u64 },
}

impl std::str::FromStr for TiePolicy {
    type Err = FairDivError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" | "first-argument" => Ok(TiePolicy::FirstArgument),
            "second" | "second-argument" => Ok(TiePolicy::SecondArgument),
            _ => match s.strip_prefix("scripted:").or(s.strip_prefix("adversarial:")) {
                Some(seed) => seed
                    .parse()
                    .map(|seed| TiePolicy::Scripted { seed })
                    .map_err(|_| FairDivError::Parse(format!("bad tie seed `{seed}`"))),
                None if s == "scripted" || s == "adversarial" => {
                    Ok(TiePolicy::Scripted { seed: 0 })
                }
                None => Err(FairDivError::Parse(format!("unknown tie policy `{s}`"))),
            },
        }
    }
}

/// Answers from hidden additive valuations.
#[derive(Clone, Debug)]
pub struct ExactOracle {
    valuations: Vec<Valuation>,
    tie_policy: TiePolicy,
    rng: ChaCha8Rng,
    log: QueryLog,
}

impl ExactOracle {
    pub fn new(instance: &Instance, tie_policy: TiePolicy) -> Result<Self> {
        Self::from_valuations(instance.valuations()?.to_vec(), tie_policy)
    }

    pub fn from_valuations(valuations: Vec<Valuation>, tie_policy: TiePolicy) -> Result<Self> {
        let seed = match tie_policy {
            TiePolicy::Scripted { seed } => seed,
            _ => 0,
        };
        Ok(Self {
            log: QueryLog::new(valuations.len()),
            valuations,
            tie_policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn into_log(self) -> QueryLog {
        self.log
    }
}

impl ComparisonOracle for ExactOracle {
    fn compare(&mut self, agent: AgentId, x: &Bundle, y: &Bundle) -> Result<Preferred> {
        let v = self
            .valuations
            .get(agent.0)
            .ok_or(FairDivError::UnknownAgent(agent))?;
        let (vx, vy) = (v.scaled_value(x)?, v.scaled_value(y)?);
        let answer = if vx > vy {
            Preferred::X
        } else if vx < vy {
            Preferred::Y
        } else {
            match self.tie_policy {
                TiePolicy::FirstArgument => Preferred::X,
                TiePolicy::SecondArgument => Preferred::Y,
                TiePolicy::Scripted { .. } => {
                    if self.rng.random_bool(0.5) {
                        Preferred::X
                    } else {
                        Preferred::Y
                    }
                }
            }
        };
        self.log.record(agent, x, y, answer);
        Ok(answer)
    }

    fn log(&self) -> &QueryLog {
        &self.log
    }
}

/// A query the algorithm is blocked on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingQuery {
    /// Position of this query in the transcript.
    pub index: usize,
    pub agent: AgentId,
    pub x: Bundle,
    pub y: Bundle,
}

/// Answers from a fixed list, then suspends.
///
/// Re-running a deterministic algorithm against a growing answer list is how
/// interactive sessions resume: the run replays every earlier answer and stops
/// with [`FairDivError::Suspended`] at the first unanswered query.
#[derive(Clone, Debug)]
pub struct ReplayOracle {
    n: usize,
    answers: Vec<Preferred>,
    log: QueryLog,
}

impl ReplayOracle {
    pub fn new(n: usize, answers: Vec<Preferred>) -> Self {
        Self {
            n,
            answers,
            log: QueryLog::new(n),
        }
    }

    pub fn into_log(self) -> QueryLog {
        self.log
    }
}

impl ComparisonOracle for ReplayOracle {
    fn compare(&mut self, agent: AgentId, x: &Bundle, y: &Bundle) -> Result<Preferred> {
        if agent.0 >= self.n {
            return Err(FairDivError::UnknownAgent(agent));
        }
        let index = self.log.total();
        let Some(&answer) = self.answers.get(index) else {
            return Err(FairDivError::Suspended(PendingQuery {
                index,
                agent,
                x: x.clone(),
                y: y.clone(),
            }));
        };
        self.log.record(agent, x, y, answer);
        Ok(answer)
    }

    fn log(&self) -> &QueryLog {
        &self.log
    }
}

/// Counts calls that pass through it, independently of the inner log.
pub struct Spy<'a> {
    inner: &'a mut dyn ComparisonOracle,
    pub calls: usize,
    pub per_agent: Vec<usize>,
}

impl<'a> Spy<'a> {
    pub fn new(inner: &'a mut dyn ComparisonOracle) -> Self {
        Self {
            inner,
            calls: 0,
            per_agent: Vec::new(),
        }
    }
}

impl ComparisonOracle for Spy<'_> {
    fn compare(&mut self, agent: AgentId, x: &Bundle, y: &Bundle) -> Result<Preferred> {
        self.calls += 1;
        if self.per_agent.len() <= agent.0 {
            self.per_agent.resize(agent.0 + 1, 0);
        }
        self.per_agent[agent.0] += 1;
        self.inner.compare(agent, x, y)
    }

    fn log(&self) -> &QueryLog {
        self.inner.log()
    }
}

fn extend(base: &Bundle, items: &[ItemId]) -> Bundle {
    let mut b = base.clone();
    for &g in items {
        b.insert(g);
    }
    b
}

/// Largest `k` in `start..=line.len()` such that `base ∪ line[start..k]` is
/// not preferred over `target` (ties keep the prefix).
///
/// `k = start` is assumed to qualify without asking. If even `base` alone
/// beats `target`, the answer is still `start`.
/// Uses at most `⌈log₂(len − start + 1)⌉` queries.
pub fn max_prefix_not_exceeding(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    base: &Bundle,
    line: &[ItemId],
    start: usize,
    target: &Bundle,
) -> Result<usize> {
    let (mut lo, mut hi) = (start, line.len() + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let candidate = extend(base, &line[start..mid]);
        if o.compare(agent, target, &candidate)? == Preferred::X {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Smallest `k` in `start..=line.len()` such that `base ∪ line[start..k]` is
/// preferred over `target` (ties count as reaching), or `None` if the whole
/// segment falls short.
///
/// Uses at most `⌈log₂(len − start + 1)⌉ + 1` queries.
pub fn min_prefix_reaching(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    base: &Bundle,
    line: &[ItemId],
    start: usize,
    target: &Bundle,
) -> Result<Option<usize>> {
    let full = extend(base, &line[start..]);
    if o.compare(agent, &full, target)? == Preferred::Y {
        return Ok(None);
    }
    // invariant: lo fails (or is the virtual start - 1), hi reaches
    let (mut lo, mut hi) = (start as isize - 1, line.len() as isize);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let candidate = extend(base, &line[start..mid as usize]);
        if o.compare(agent, &candidate, target)? == Preferred::X {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi as usize))
}

/// Index of the most preferred candidate and of the runner-up.
///
/// Lowest index wins ties under the first-argument policy. At most
/// `2·(len − 1)` queries.
pub fn tournament_max(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    candidates: &[Bundle],
) -> Result<(usize, Option<usize>)> {
    if candidates.is_empty() {
        return Err(FairDivError::EmptyCandidates);
    }
    let mut best = 0;
    let mut second: Option<usize> = None;
    for i in 1..candidates.len() {
        if o.compare(agent, &candidates[best], &candidates[i])? == Preferred::Y {
            second = Some(best);
            best = i;
        } else {
            match second {
                None => second = Some(i),
                Some(s) => {
                    if o.compare(agent, &candidates[s], &candidates[i])? == Preferred::Y {
                        second = Some(i);
                    }
                }
            }
        }
    }
    Ok((best, second))
}

/// Index of the least preferred candidate, lowest index on ties.
pub fn argmin(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    candidates: &[Bundle],
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(FairDivError::EmptyCandidates);
    }
    let mut cur = 0;
    for j in 1..candidates.len() {
        if o.compare(agent, &candidates[j], &candidates[cur])? == Preferred::Y {
            cur = j;
        }
    }
    Ok(cur)
}

/// Position at which `item` goes into `order` (indices into `bundles`, sorted
/// ascending) so that it lands after every bundle it does not beat strictly.
pub fn insertion_point(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    bundles: &[Bundle],
    order: &[usize],
    item: &Bundle,
) -> Result<usize> {
    let (mut lo, mut hi) = (0, order.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if o.compare(agent, item, &bundles[order[mid]])? == Preferred::Y {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Indices of `bundles` in ascending preference, stable for ties.
pub fn sort_ascending(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    bundles: &[Bundle],
) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = Vec::with_capacity(bundles.len());
    for i in 0..bundles.len() {
        let at = insertion_point(o, agent, bundles, &order, &bundles[i])?;
        order.insert(at, i);
    }
    Ok(order)
}
