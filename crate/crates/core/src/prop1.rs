//! PROP1 allocations from comparison queries.

use serde::Serialize;

use crate::error::Result;
use crate::matching::{hall_violator_and_matching, EligibilityGraph, HallOutcome};
use crate::oracle::{argmin, insertion_point, max_prefix_not_exceeding, sort_ascending, ComparisonOracle};
use crate::types::{AgentId, Allocation, Bundle, ItemId, Preferred};

/// One iteration of [`item_partition`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionRound {
    /// `B_k = A_k ∪ X_k` for every k.
    pub tentative: Vec<Bundle>,
    pub kept: usize,
    pub pool_after: Bundle,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionOutcome {
    pub bundles: Vec<Bundle>,
    pub pool: Bundle,
    pub history: Vec<PartitionRound>,
}

/// Splits `pool` into `q` contiguous chunks in id order, the first
/// `|pool| mod q` of them one item larger.
pub fn even_chunks(pool: &Bundle, q: usize) -> Vec<Bundle> {
    let items: Vec<ItemId> = pool.iter().collect();
    let (base, extra) = (items.len() / q, items.len() % q);
    let mut chunks = Vec::with_capacity(q);
    let mut at = 0;
    for k in 0..q {
        let size = base + usize::from(k < extra);
        chunks.push(items[at..at + size].iter().collect());
        at += size;
    }
    chunks
}

/// Repeatedly deals the pool into `q` chunks and locks in the least
/// valuable tentative bundle, until fewer than `q` items remain.
///
/// Only `cutter` is queried. The returned pool holds exactly `q − 1` items
/// whenever the input held at least `q`.
pub fn item_partition(
    o: &mut dyn ComparisonOracle,
    cutter: AgentId,
    q: usize,
    pool: &Bundle,
) -> Result<PartitionOutcome> {
    let mut bundles = vec![Bundle::new(); q];
    let mut pool = pool.clone();
    let mut history = Vec::new();
    while q > 0 && pool.len() >= q {
        let chunks = even_chunks(&pool, q);
        let tentative: Vec<Bundle> = bundles.iter().zip(&chunks).map(|(a, x)| a.union(x)).collect();
        let kept = argmin(o, cutter, &tentative)?;
        bundles[kept] = tentative[kept].clone();
        pool.difference_with(&chunks[kept]);
        history.push(PartitionRound {
            tentative,
            kept,
            pool_after: pool.clone(),
        });
    }
    Ok(PartitionOutcome {
        bundles,
        pool,
        history,
    })
}

/// Hands the fewer-than-`n` leftover items to the smallest bundles, keeping
/// the bundles sorted by binary-search re-insertion.
pub fn distribute_leftovers(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    mut bundles: Vec<Bundle>,
    pool: &Bundle,
) -> Result<Vec<Bundle>> {
    let mut order = sort_ascending(o, agent, &bundles)?;
    let mut items: Vec<ItemId> = pool.iter().collect();
    while !items.is_empty() {
        let r = items.len();
        let augmented: Vec<Bundle> = (0..r).map(|t| bundles[order[t]].with(items[t])).collect();
        let i = argmin(o, agent, &augmented)?;
        let stop = r >= order.len()
            || o.compare(agent, &augmented[i], &bundles[order[r]])? == Preferred::X;
        if stop {
            for (t, b) in augmented.into_iter().enumerate() {
                bundles[order[t]] = b;
            }
            break;
        }
        let idx = order.remove(i);
        bundles[idx] = augmented[i].clone();
        items.remove(i);
        let at = insertion_point(o, agent, &bundles, &order, &bundles[idx])?;
        order.insert(at, idx);
    }
    Ok(bundles)
}

/// A PROP1 partition of `items` into `n` bundles under `agent`'s valuation.
pub fn prop1_identical(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    n: usize,
    items: &Bundle,
) -> Result<Vec<Bundle>> {
    let part = item_partition(o, agent, n, items)?;
    distribute_leftovers(o, agent, part.bundles, &part.pool)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
}

/// The decomposition `B, A₁, I₁, …, A_{n−1}, I_{n−1}, R` of the item line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubroutinePartition {
    pub b: Bundle,
    /// `(A_ℓ, I_ℓ)`; trailing pairs may be empty once the line runs out.
    pub pairs: Vec<(Bundle, Option<ItemId>)>,
    pub rest: Bundle,
    pub verdict: Verdict,
}

impl SubroutinePartition {
    /// `A_ℓ ∪ {I_ℓ}` for every pair.
    pub fn blocks(&self) -> Vec<Bundle> {
        self.pairs
            .iter()
            .map(|(a, i)| match i {
                Some(g) => a.with(*g),
                None => a.clone(),
            })
            .collect()
    }
}

/// Decides whether `b` is PROP1 (Yes) or not PROP (No) for `agent` on the
/// instance of `n` agents sharing `items`. The remaining items are lined up
/// in id order.
pub fn prop1_prop_subroutine(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    n: usize,
    items: &Bundle,
    b: &Bundle,
) -> Result<SubroutinePartition> {
    let line: Vec<ItemId> = items.difference(b).iter().collect();
    prop1_prop_subroutine_on_line(o, agent, n, b, &line)
}

/// As [`prop1_prop_subroutine`], with the items outside `b` in the given
/// order.
///
/// With a single agent there are no pairs and `rest` is everything outside
/// `b`; the verdict is Yes iff `b` plus its first valuable outside item is
/// worth as much as the whole set.
pub fn prop1_prop_subroutine_on_line(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    n: usize,
    b: &Bundle,
    line: &[ItemId],
) -> Result<SubroutinePartition> {
    let mut pairs = Vec::with_capacity(n.saturating_sub(1));
    let mut pos = 0;
    for _ in 1..n {
        let k = max_prefix_not_exceeding(o, agent, &Bundle::new(), line, pos, b)?;
        let a: Bundle = line[pos..k].iter().collect();
        let item = line.get(k).copied();
        pairs.push((a, item));
        pos = (k + 1).min(line.len());
    }
    let rest: Bundle = line[pos..].iter().collect();
    let verdict = if n <= 1 {
        single_agent_verdict(o, agent, b, line)?
    } else if rest.is_empty() {
        Verdict::Yes
    } else {
        Verdict::No
    };
    Ok(SubroutinePartition {
        b: b.clone(),
        pairs,
        rest,
        verdict,
    })
}

fn single_agent_verdict(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    b: &Bundle,
    line: &[ItemId],
) -> Result<Verdict> {
    if line.is_empty() {
        return Ok(Verdict::Yes);
    }
    // the longest worthless prefix ends right before the first valuable item
    let k = max_prefix_not_exceeding(o, agent, &Bundle::new(), line, 0, &Bundle::new())?;
    let g = line[k.min(line.len() - 1)];
    let whole = line.iter().fold(b.clone(), |acc, &h| acc.with(h));
    Ok(match o.compare(agent, &b.with(g), &whole)? {
        Preferred::X => Verdict::Yes,
        Preferred::Y => Verdict::No,
    })
}

/// The quadratic alternative: split everything outside `b` among `n − 1`
/// agents and compare `b` with the smallest part.
pub fn prop1_prop_subroutine_alt(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    n: usize,
    items: &Bundle,
    b: &Bundle,
) -> Result<Verdict> {
    if n <= 1 {
        let line: Vec<ItemId> = items.difference(b).iter().collect();
        return single_agent_verdict(o, agent, b, &line);
    }
    let parts = prop1_identical(o, agent, n - 1, &items.difference(b))?;
    let smallest = argmin(o, agent, &parts)?;
    Ok(match o.compare(agent, b, &parts[smallest])? {
        Preferred::X => Verdict::Yes,
        Preferred::Y => Verdict::No,
    })
}

/// Edges from every agent to the bundles it accepts. The cutter (position
/// `cutter`) accepts everything without being asked.
pub fn bipartite_construction(
    o: &mut dyn ComparisonOracle,
    cutter: usize,
    agents: &[AgentId],
    items: &Bundle,
    bundles: &[Bundle],
) -> Result<EligibilityGraph> {
    let mut g = EligibilityGraph::new(agents.to_vec(), bundles.len());
    for j in 0..bundles.len() {
        g.add_edge(cutter, j);
    }
    for (p, &agent) in agents.iter().enumerate() {
        if p == cutter {
            continue;
        }
        for (j, bundle) in bundles.iter().enumerate() {
            let sub = prop1_prop_subroutine(o, agent, agents.len(), items, bundle)?;
            if sub.verdict == Verdict::Yes {
                g.add_edge(p, j);
            }
        }
    }
    Ok(g)
}

/// One pass of the loop in [`prop1_general`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prop1Round {
    pub agents: Vec<AgentId>,
    pub pool: Bundle,
    pub cutter: AgentId,
    pub bundles: Vec<Bundle>,
    pub graph: EligibilityGraph,
    pub hall: HallOutcome,
    pub queries: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prop1Outcome {
    pub allocation: Allocation,
    pub rounds: Vec<Prop1Round>,
}

/// PROP1 for arbitrary additive valuations.
pub fn prop1_general(o: &mut dyn ComparisonOracle, n: usize, m: usize) -> Result<Prop1Outcome> {
    let mut allocation = Allocation::empty(n, m);
    let mut agents: Vec<AgentId> = (0..n).map(AgentId).collect();
    let mut rounds = Vec::new();
    while !agents.is_empty() {
        let before = o.log().total();
        let pool = allocation.pool.clone();
        let cutter = agents[0];
        let bundles = prop1_identical(o, cutter, agents.len(), &pool)?;
        let graph = bipartite_construction(o, 0, &agents, &pool, &bundles)?;
        let hall = hall_violator_and_matching(&graph)?;
        for &(p, j) in &hall.matching {
            allocation.assign(agents[p], &bundles[j])?;
        }
        let remaining: Vec<AgentId> = hall.violator.iter().map(|&p| agents[p]).collect();
        rounds.push(Prop1Round {
            agents: std::mem::replace(&mut agents, remaining),
            pool,
            cutter,
            bundles,
            graph,
            hall,
            queries: o.log().total() - before,
        });
    }
    Ok(Prop1Outcome { allocation, rounds })
}
