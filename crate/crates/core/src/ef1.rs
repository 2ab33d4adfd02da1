//! EF1 allocations from comparison queries.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{FairDivError, Result};
use crate::oracle::{
    insertion_point, max_prefix_not_exceeding, min_prefix_reaching, sort_ascending,
    tournament_max, ComparisonOracle,
};
use crate::prop1::{item_partition, PartitionOutcome};
use crate::types::{AgentId, Allocation, Bundle, ItemId, Preferred};

/// Two agents: agent 0 cuts the id-ordered line, agent 1 picks.
///
/// Returns `(agent 0's bundle, agent 1's bundle)`.
pub fn cut_and_choose(o: &mut dyn ComparisonOracle, items: &Bundle) -> Result<(Bundle, Bundle)> {
    let line: Vec<ItemId> = items.iter().collect();
    if line.is_empty() {
        return Ok((Bundle::new(), Bundle::new()));
    }
    let cutter = AgentId(0);
    // rightmost p with u(line[..p]) < u(line[p+1..]); p = 0 if there is none
    let (mut lo, mut hi) = (-1isize, line.len() as isize);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let p = mid as usize;
        let left: Bundle = line[..p].iter().collect();
        let right: Bundle = line[p + 1..].iter().collect();
        if o.compare(cutter, &left, &right)? == Preferred::Y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = lo.max(0) as usize;
    let first: Bundle = line[..=p].iter().collect();
    let second: Bundle = line[p + 1..].iter().collect();
    Ok(match o.compare(AgentId(1), &first, &second)? {
        Preferred::X => (second, first),
        Preferred::Y => (first, second),
    })
}

/// What the identical-valuation procedure did after the partition phase.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ef1Trace {
    /// Index of the largest partition bundle, the `A_n` every other bundle
    /// is cut against.
    pub top: usize,
    pub snapshot_round: usize,
    /// The other tentative bundles of that round, laid out left to right.
    pub line: Vec<ItemId>,
    /// Leftover items in ascending value.
    pub leftovers: Vec<ItemId>,
    pub a_n: Bundle,
    /// Bundles cut by the moving knife.
    pub after_knife: Vec<Bundle>,
    /// The same bundles after the exchange phase.
    pub after_exchange: Vec<Bundle>,
    /// Unallocated items after the exchange phase, zero-valued part first.
    pub remainder: Vec<ItemId>,
    pub zero_part: Bundle,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ef1Outcome {
    pub bundles: Vec<Bundle>,
    pub trace: Option<Ef1Trace>,
}

/// EF1 partition of `items` into `n` bundles under a single valuation.
pub fn ef1_identical(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    n: usize,
    items: &Bundle,
) -> Result<Ef1Outcome> {
    if n <= 1 {
        return Ok(Ef1Outcome {
            bundles: vec![items.clone(); n],
            trace: None,
        });
    }
    let part = item_partition(o, agent, n, items)?;
    ef1_from_partition(o, agent, &part)
}

/// The steps after the partition phase: cut against the largest bundle,
/// exchange leftovers, then place the last few items on the smallest
/// bundles.
pub fn ef1_from_partition(
    o: &mut dyn ComparisonOracle,
    agent: AgentId,
    part: &PartitionOutcome,
) -> Result<Ef1Outcome> {
    let n = part.bundles.len();
    if part.history.is_empty() {
        // fewer items than bundles: one each
        let mut bundles = part.bundles.clone();
        for (t, g) in part.pool.iter().enumerate() {
            bundles[t].insert(g);
        }
        return Ok(Ef1Outcome {
            bundles,
            trace: None,
        });
    }

    let pool: Vec<ItemId> = part.pool.iter().collect();
    let singles: Vec<Bundle> = pool.iter().map(|&g| Bundle::singleton(g)).collect();
    let leftovers: Vec<ItemId> = sort_ascending(o, agent, &singles)?
        .into_iter()
        .map(|i| pool[i])
        .collect();

    let (mut top, _) = tournament_max(o, agent, &part.bundles)?;
    let last_update = |k: usize| part.history.iter().rposition(|r| r.kept == k);
    let snapshot_round = match last_update(top) {
        Some(r) => r,
        None => {
            // the largest bundle is empty, so every bundle is worthless;
            // any bundle that was kept at some point will do
            top = part.history.last().unwrap().kept;
            part.history.len() - 1
        }
    };
    let snapshot = &part.history[snapshot_round].tentative;
    let a_n = part.bundles[top].clone();

    // the bundle holding the most valuable leftover goes last, with that
    // item at its right end next to A_n
    let last = leftovers.last().copied();
    let holder = last.and_then(|g| (0..n).find(|&j| j != top && snapshot[j].contains(g)));
    let mut line: Vec<ItemId> = Vec::new();
    let mut bounds: Vec<usize> = Vec::with_capacity(n - 1);
    for j in (0..n).filter(|&j| j != top && Some(j) != holder) {
        line.extend(snapshot[j].iter());
        bounds.push(line.len());
    }
    if let (Some(h), Some(g)) = (holder, last) {
        line.extend(snapshot[h].iter().filter(|&x| x != g));
        line.push(g);
        bounds.push(line.len());
    }

    // moving knife; the i-th cut never passes the end of the i-th snapshot
    // bundle, which is worth at least A_n on its own, so a tie answered
    // against the prefix cannot push the knife further right
    let mut cut: Vec<Bundle> = Vec::with_capacity(n - 1);
    let mut pos = 0;
    for i in 0..n - 1 {
        let bound = bounds.get(i).copied().unwrap_or(line.len()).max(pos);
        let end = min_prefix_reaching(o, agent, &Bundle::new(), &line[..bound], pos, &a_n)?
            .unwrap_or(bound);
        cut.push(line[pos..end].iter().collect());
        pos = end;
    }
    let after_knife = cut.clone();

    // exchange phase
    let leftover_set: Bundle = leftovers.iter().collect();
    let mut zero: VecDeque<ItemId> = VecDeque::new();
    let mut loose: Vec<ItemId> = Vec::new();
    let mut tail: VecDeque<ItemId> = VecDeque::new();
    for &g in &line[pos..] {
        if Some(g) == last {
            tail.push_back(g);
        } else if leftover_set.contains(g) {
            loose.push(g);
        } else {
            zero.push_back(g);
        }
    }
    if !tail.is_empty() {
        for idx in (0..leftovers.len().saturating_sub(1)).rev() {
            let g = leftovers[idx];
            if let Some(at) = loose.iter().position(|&x| x == g) {
                loose.remove(at);
                tail.push_front(g);
                continue;
            }
            if zero.is_empty() {
                break;
            }
            let k = cut
                .iter()
                .position(|c| c.contains(g))
                .ok_or_else(|| FairDivError::Invariant(format!("leftover {g} is nowhere")))?;
            let base = cut[k].without(g);
            let s: Vec<ItemId> = zero.iter().copied().collect();
            match min_prefix_reaching(o, agent, &base, &s, 0, &a_n)? {
                Some(len) => {
                    cut[k] = base.union(&s[..len].iter().collect());
                    zero.drain(..len);
                    tail.push_front(g);
                }
                None => {
                    let next = tail.pop_front().ok_or_else(|| {
                        FairDivError::Invariant("exchange ran out of leftover items".into())
                    })?;
                    cut[k] = base.union(&s.iter().collect()).with(next);
                    zero.clear();
                    tail.push_front(g);
                    break;
                }
            }
        }
    }
    let after_exchange = cut.clone();
    let zero_part: Bundle = zero.iter().collect();
    let mut rest: Vec<ItemId> = loose.iter().chain(tail.iter()).copied().collect();
    rest.sort();

    // hand out what is left, always to the currently smallest bundle
    let mut bundles = cut;
    bundles.push(a_n.clone());
    let mut order = sort_ascending(o, agent, &bundles)?;
    let mut gifts: Vec<Bundle> = Vec::new();
    if !zero_part.is_empty() {
        gifts.push(zero_part.clone());
    }
    gifts.extend(rest.iter().map(|&g| Bundle::singleton(g)));
    for gift in gifts {
        let smallest = order.remove(0);
        bundles[smallest].union_with(&gift);
        let at = insertion_point(o, agent, &bundles, &order, &bundles[smallest])?;
        order.insert(at, smallest);
    }

    let mut remainder: Vec<ItemId> = zero_part.iter().collect();
    remainder.extend(rest);
    Ok(Ef1Outcome {
        bundles,
        trace: Some(Ef1Trace {
            top,
            snapshot_round,
            line,
            leftovers,
            a_n,
            after_knife,
            after_exchange,
            remainder,
            zero_part,
        }),
    })
}

/// `graph[p][q]`: the agent at position `p` strictly prefers `q`'s bundle.
///
/// Each edge is asked in both orders and kept only if the answers agree, so
/// an oracle that answers ties by position never reports envy on a tie.
pub fn envy_graph(
    o: &mut dyn ComparisonOracle,
    agents: &[AgentId],
    bundles: &[Bundle],
) -> Result<Vec<Vec<bool>>> {
    let n = agents.len();
    let mut graph = vec![vec![false; n]; n];
    for p in 0..n {
        for q in 0..n {
            if p != q {
                graph[p][q] = o.compare(agents[p], &bundles[p], &bundles[q])? == Preferred::Y
                    && o.compare(agents[p], &bundles[q], &bundles[p])? == Preferred::X;
            }
        }
    }
    Ok(graph)
}

fn find_cycle(graph: &[Vec<bool>]) -> Option<Vec<usize>> {
    let n = graph.len();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut stack: Vec<usize> = Vec::new();
    fn dfs(
        u: usize,
        graph: &[Vec<bool>],
        state: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        state[u] = 1;
        stack.push(u);
        for v in 0..graph.len() {
            if !graph[u][v] {
                continue;
            }
            if state[v] == 1 {
                let from = stack.iter().position(|&x| x == v).unwrap();
                return Some(stack[from..].to_vec());
            }
            if state[v] == 0 {
                if let Some(c) = dfs(v, graph, state, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        state[u] = 2;
        None
    }
    for s in 0..n {
        if state[s] == 0 {
            if let Some(c) = dfs(s, graph, &mut state, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}

/// Rotates bundles along envy cycles until the envy graph is acyclic.
/// Returns the final graph.
///
/// Gives up after a fixed number of rotations, which only an oracle that
/// answers ties inconsistently can force.
pub fn eliminate_cycles(
    o: &mut dyn ComparisonOracle,
    agents: &[AgentId],
    bundles: &mut [Bundle],
) -> Result<Vec<Vec<bool>>> {
    let cap = 64 * agents.len().pow(2) + 64;
    for _ in 0..cap {
        let graph = envy_graph(o, agents, bundles)?;
        let Some(cycle) = find_cycle(&graph) else {
            return Ok(graph);
        };
        // everyone on the cycle takes the bundle it envies
        let taken: Vec<Bundle> = (0..cycle.len())
            .map(|t| bundles[cycle[(t + 1) % cycle.len()]].clone())
            .collect();
        for (t, b) in taken.into_iter().enumerate() {
            bundles[cycle[t]] = b;
        }
    }
    Err(FairDivError::Invariant(format!("envy cycles persist after {cap} rotations")))
}

/// Gives each pool item, in id order, to an agent nobody envies, removing
/// envy cycles before every placement.
pub fn envy_graph_finish(
    o: &mut dyn ComparisonOracle,
    agents: &[AgentId],
    mut bundles: Vec<Bundle>,
    pool: &Bundle,
) -> Result<Vec<Bundle>> {
    for g in pool.iter() {
        let graph = eliminate_cycles(o, agents, &mut bundles)?;
        let source = (0..agents.len())
            .find(|&q| (0..agents.len()).all(|p| !graph[p][q]))
            .ok_or_else(|| FairDivError::Invariant("acyclic envy graph without a source".into()))?;
        bundles[source].insert(g);
    }
    eliminate_cycles(o, agents, &mut bundles)?;
    Ok(bundles)
}

/// EF1 for any number of agents, one item at a time.
pub fn ef1_envy_graph(o: &mut dyn ComparisonOracle, n: usize, items: &Bundle) -> Result<Vec<Bundle>> {
    let agents: Vec<AgentId> = (0..n).map(AgentId).collect();
    envy_graph_finish(o, &agents, vec![Bundle::new(); n], items)
}

/// Agents take their favourite remaining bundle in the given order; each
/// pick is added to what the agent already holds.
fn pick_in_order(
    o: &mut dyn ComparisonOracle,
    held: &mut [Bundle],
    order: [usize; 3],
    mut offers: Vec<Bundle>,
) -> Result<()> {
    for agent in order {
        if offers.is_empty() {
            break;
        }
        let (best, _) = tournament_max(o, AgentId(agent), &offers)?;
        let pick = offers.remove(best);
        held[agent].union_with(&pick);
    }
    Ok(())
}

/// Which branch [`ef1_three_agents`] ended in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThreeAgentCase {
    DistinctFavourites,
    TrimmedBundle,
    LargeItems,
    FewLargeItems,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ThreeAgentOutcome {
    pub bundles: Vec<Bundle>,
    pub case: ThreeAgentCase,
}

/// EF1 for three agents with arbitrary additive valuations.
pub fn ef1_three_agents(o: &mut dyn ComparisonOracle, items: &Bundle) -> Result<ThreeAgentOutcome> {
    let (a0, a1, a2) = (AgentId(0), AgentId(1), AgentId(2));
    let first = ef1_identical(o, a0, 3, items)?.bundles;
    let (fav1, _) = tournament_max(o, a1, &first)?;
    let (fav2, _) = tournament_max(o, a2, &first)?;
    if fav1 != fav2 {
        let other = (0..3).find(|&j| j != fav1 && j != fav2).unwrap();
        return Ok(ThreeAgentOutcome {
            bundles: vec![first[other].clone(), first[fav1].clone(), first[fav2].clone()],
            case: ThreeAgentCase::DistinctFavourites,
        });
    }

    let contested = &first[fav1];
    let (p, q) = match fav1 {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    // agent 1 ranks the other two: b ≥ c
    let (b, c) = match o.compare(a1, &first[p], &first[q])? {
        Preferred::X => (first[p].clone(), first[q].clone()),
        Preferred::Y => (first[q].clone(), first[p].clone()),
    };
    let (s3, s1) = match o.compare(a2, &b, &c)? {
        Preferred::X => (b.clone(), c.clone()),
        Preferred::Y => (c.clone(), b.clone()),
    };

    let line: Vec<ItemId> = contested.iter().collect();
    let k = max_prefix_not_exceeding(o, a1, &Bundle::new(), &line, 0, &b)?;
    let mut trimmed: Bundle = line[..k].iter().collect();

    // agent 2 is happy with the trimmed bundle: it takes it, agent 1 takes
    // b, agent 0 takes c, and the trimmings are shared
    let settle = |o: &mut dyn ComparisonOracle, trimmed: Bundle, trimmings: Bundle| {
        let mut held = vec![c.clone(), b.clone(), trimmed];
        let split = ef1_identical(o, a1, 3, &trimmings)?.bundles;
        pick_in_order(o, &mut held, [2, 0, 1], split)?;
        Ok::<_, FairDivError>(ThreeAgentOutcome {
            bundles: held,
            case: ThreeAgentCase::TrimmedBundle,
        })
    };

    if k == line.len() || o.compare(a2, &trimmed, &s3)? == Preferred::X {
        return settle(o, trimmed, line[k..].iter().collect());
    }

    let mut large = vec![line[k]];
    let mut rest: Vec<ItemId> = line[k + 1..].to_vec();
    while large.len() < 3 && !rest.is_empty() {
        let base = trimmed.with(rest[0]);
        match min_prefix_reaching(o, a1, &base, &rest, 1, &b)? {
            Some(end) => {
                trimmed.union_with(&rest[..end - 1].iter().collect());
                large.push(rest[end - 1]);
                rest.drain(..end);
            }
            None => {
                trimmed.union_with(&rest.iter().collect());
                rest.clear();
            }
        }
        if o.compare(a2, &trimmed, &s3)? == Preferred::X {
            let trimmings: Bundle = large.iter().chain(rest.iter()).collect();
            return settle(o, trimmed, trimmings);
        }
    }

    let mut held = vec![s1, trimmed, s3];
    if large.len() == 3 {
        let rest: Bundle = rest.iter().collect();
        let split = ef1_identical(o, a2, 3, &rest)?.bundles;
        let ascending = sort_ascending(o, a2, &split)?;
        let singles: Vec<Bundle> = large.iter().map(|&g| Bundle::singleton(g)).collect();
        let mut descending = sort_ascending(o, a2, &singles)?;
        descending.reverse();
        let offers: Vec<Bundle> = (0..3)
            .map(|t| split[ascending[t]].with(large[descending[t]]))
            .collect();
        pick_in_order(o, &mut held, [1, 0, 2], offers)?;
        return Ok(ThreeAgentOutcome {
            bundles: held,
            case: ThreeAgentCase::LargeItems,
        });
    }
    held[1].insert(large[0]);
    if let Some(&g) = large.get(1) {
        held[0].insert(g);
    }
    Ok(ThreeAgentOutcome {
        bundles: held,
        case: ThreeAgentCase::FewLargeItems,
    })
}

/// Wraps per-agent bundles into an allocation of `m` items.
pub fn into_allocation(bundles: Vec<Bundle>, m: usize) -> Result<Allocation> {
    Allocation::from_bundles(bundles, m)
}
