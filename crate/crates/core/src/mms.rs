//! Allocations that are PROP1 and ½-MMS at the same time.

use serde::Serialize;

use crate::ef1::ef1_from_partition;
use crate::error::{FairDivError, Result};
use crate::matching::{hall_violator_and_matching, EligibilityGraph, HallOutcome};
use crate::oracle::{tournament_max, ComparisonOracle};
use crate::prop1::{item_partition, prop1_prop_subroutine_on_line, PartitionOutcome, SubroutinePartition, Verdict};
use crate::types::{bundle_value, AgentId, Allocation, Bundle, ItemId, Rational, Valuation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BundleTag {
    /// A single item handed out before the procedure restarts.
    FirstType,
    /// A bundle assigned through the matching.
    SecondType,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BundleKind {
    pub tag: BundleTag,
    pub round: usize,
}

/// Where a first-type singleton came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "source")]
pub enum FirstTypeSource {
    /// The cutter's two favourites were both leftover items.
    Cutter,
    /// Agent's favourites in its split against bundle `bundle` were both
    /// separator items.
    Subroutine { bundle: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FirstTypeEvent {
    pub round: usize,
    pub agent: AgentId,
    pub item: ItemId,
    /// The runner-up item; with it the agent reaches its proportional share.
    pub witness: ItemId,
    pub source: FirstTypeSource,
}

/// A subroutine run recorded while building the eligibility graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitRecord {
    pub agent: AgentId,
    pub bundle: usize,
    pub line: Vec<ItemId>,
    pub split: SubroutinePartition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundState {
    pub index: usize,
    /// Agents and items of the invocation this round belongs to.
    pub invocation_agents: Vec<AgentId>,
    pub invocation_items: Bundle,
    pub agents: Vec<AgentId>,
    pub pool: Bundle,
    pub cutter: AgentId,
    pub partition: PartitionOutcome,
    /// Empty when the round ended in the cutter's first-type exit.
    pub bundles: Vec<Bundle>,
    pub graph: Option<EligibilityGraph>,
    pub splits: Vec<SplitRecord>,
    pub hall: Option<HallOutcome>,
    pub first_type: Option<FirstTypeEvent>,
    pub queries: usize,
}

impl RoundState {
    /// Bundles matched in this round, as `(agent, bundle index)`.
    pub fn assigned(&self) -> Vec<(AgentId, usize)> {
        match &self.hall {
            Some(h) => h.matching.iter().map(|&(p, j)| (self.agents[p], j)).collect(),
            None => Vec::new(),
        }
    }

    pub fn unmatched(&self) -> Vec<AgentId> {
        match &self.hall {
            Some(h) => h.violator.iter().map(|&p| self.agents[p]).collect(),
            None => Vec::new(),
        }
    }

    pub fn split(&self, agent: AgentId, bundle: usize) -> Option<&SplitRecord> {
        self.splits.iter().find(|s| s.agent == agent && s.bundle == bundle)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MmsOutcome {
    pub allocation: Allocation,
    pub kinds: Vec<BundleKind>,
    pub rounds: Vec<RoundState>,
    pub first_type: Vec<FirstTypeEvent>,
}

/// Items of every bundle except `skip`, bundle by bundle starting right
/// after it and wrapping around.
fn cyclic_line(bundles: &[Bundle], skip: usize) -> Vec<ItemId> {
    let q = bundles.len();
    (1..q)
        .flat_map(|t| bundles[(skip + t) % q].iter())
        .collect()
}

enum RoundEnd {
    FirstType(FirstTypeEvent),
    Matched,
}

/// A PROP1 and ½-MMS allocation for `n` agents and `m` items.
///
/// The cutter in each round is the lowest-numbered agent still waiting.
pub fn main_algorithm(o: &mut dyn ComparisonOracle, n: usize, m: usize) -> Result<MmsOutcome> {
    let mut held: Vec<Option<(Bundle, BundleKind)>> = vec![None; n];
    let mut invocation_agents: Vec<AgentId> = (0..n).map(AgentId).collect();
    let mut invocation_items = Bundle::full(m);
    let mut agents = invocation_agents.clone();
    let mut pool = invocation_items.clone();
    let mut rounds: Vec<RoundState> = Vec::new();
    let mut events: Vec<FirstTypeEvent> = Vec::new();

    while !agents.is_empty() {
        let index = rounds.len();
        let before = o.log().total();
        let (state, end) = run_round(o, index, &invocation_agents, &invocation_items, &agents, &pool)?;
        let queries = o.log().total() - before;
        match end {
            RoundEnd::FirstType(ev) => {
                // restart without this agent and item; second-type bundles of
                // the current invocation go back
                for a in &invocation_agents {
                    if matches!(&held[a.0], Some((_, k)) if k.tag == BundleTag::SecondType) {
                        held[a.0] = None;
                    }
                }
                held[ev.agent.0] = Some((
                    Bundle::singleton(ev.item),
                    BundleKind {
                        tag: BundleTag::FirstType,
                        round: index,
                    },
                ));
                invocation_agents.retain(|&a| a != ev.agent);
                invocation_items.remove(ev.item);
                agents = invocation_agents.clone();
                pool = invocation_items.clone();
                events.push(ev);
            }
            RoundEnd::Matched => {
                for (agent, j) in state.assigned() {
                    held[agent.0] = Some((
                        state.bundles[j].clone(),
                        BundleKind {
                            tag: BundleTag::SecondType,
                            round: index,
                        },
                    ));
                    pool.difference_with(&state.bundles[j]);
                }
                agents = state.unmatched();
            }
        }
        rounds.push(RoundState { queries, ..state });
    }

    let mut bundles = Vec::with_capacity(n);
    let mut kinds = Vec::with_capacity(n);
    for (agent, h) in held.into_iter().enumerate() {
        let (b, k) = h.ok_or_else(|| FairDivError::Invariant(format!("agent {agent} got nothing")))?;
        bundles.push(b);
        kinds.push(k);
    }
    Ok(MmsOutcome {
        allocation: Allocation::from_bundles(bundles, m)?,
        kinds,
        rounds,
        first_type: events,
    })
}

fn run_round(
    o: &mut dyn ComparisonOracle,
    index: usize,
    invocation_agents: &[AgentId],
    invocation_items: &Bundle,
    agents: &[AgentId],
    pool: &Bundle,
) -> Result<(RoundState, RoundEnd)> {
    let q = agents.len();
    let cutter = agents[0];
    let partition = item_partition(o, cutter, q, pool)?;
    let mut state = RoundState {
        index,
        invocation_agents: invocation_agents.to_vec(),
        invocation_items: invocation_items.clone(),
        agents: agents.to_vec(),
        pool: pool.clone(),
        cutter,
        partition,
        bundles: Vec::new(),
        graph: None,
        splits: Vec::new(),
        hall: None,
        first_type: None,
        queries: 0,
    };

    // bundles come first, so a tie with a leftover item keeps the bundle
    let leftovers: Vec<ItemId> = state.partition.pool.iter().collect();
    let mut candidates = state.partition.bundles.clone();
    candidates.extend(leftovers.iter().map(|&g| Bundle::singleton(g)));
    let (best, second) = tournament_max(o, cutter, &candidates)?;
    if let Some(second) = second.filter(|&s| best >= q && s >= q) {
        let ev = FirstTypeEvent {
            round: index,
            agent: cutter,
            item: leftovers[best - q],
            witness: leftovers[second - q],
            source: FirstTypeSource::Cutter,
        };
        state.first_type = Some(ev);
        return Ok((state, RoundEnd::FirstType(ev)));
    }

    let bundles = ef1_from_partition(o, cutter, &state.partition)?.bundles;
    let mut graph = EligibilityGraph::new(agents.to_vec(), q);
    for j in 0..q {
        graph.add_edge(0, j);
    }
    state.bundles = bundles;
    for (p, &agent) in agents.iter().enumerate().skip(1) {
        for j in 0..q {
            let line = cyclic_line(&state.bundles, j);
            let split = prop1_prop_subroutine_on_line(o, agent, q, &state.bundles[j], &line)?;
            let verdict = split.verdict;
            let pairs = split.pairs.clone();
            state.splits.push(SplitRecord {
                agent,
                bundle: j,
                line,
                split,
            });
            if verdict == Verdict::No {
                continue;
            }
            // D_0 = C_j, then the D's, then the separator items
            let mut cands = vec![state.bundles[j].clone()];
            cands.extend(pairs.iter().map(|(d, _)| d.clone()));
            let seps: Vec<ItemId> = pairs.iter().filter_map(|(_, g)| *g).collect();
            let first_sep = cands.len();
            cands.extend(seps.iter().map(|&g| Bundle::singleton(g)));
            let (top, runner) = tournament_max(o, agent, &cands)?;
            if let Some(runner) = runner.filter(|&r| top >= first_sep && r >= first_sep) {
                let ev = FirstTypeEvent {
                    round: index,
                    agent,
                    item: seps[top - first_sep],
                    witness: seps[runner - first_sep],
                    source: FirstTypeSource::Subroutine { bundle: j },
                };
                state.graph = Some(graph);
                state.first_type = Some(ev);
                return Ok((state, RoundEnd::FirstType(ev)));
            }
            graph.add_edge(p, j);
        }
    }
    let hall = hall_violator_and_matching(&graph)?;
    state.graph = Some(graph);
    state.hall = Some(hall);
    Ok((state, RoundEnd::Matched))
}

/// Checks the guarantee of a first-type singleton: at least a `1/2n` share,
/// and a full `1/n` share once the witness item is added.
pub fn first_type_guarantee_check(
    v: &Valuation,
    items: &Bundle,
    n: usize,
    bundle: &Bundle,
    witness: ItemId,
) -> Result<bool> {
    let total = bundle_value(v, items)?;
    let own = bundle_value(v, bundle)?;
    let with = bundle_value(v, &bundle.with(witness))?;
    let n = Rational::from_integer(n as u128);
    Ok(own * n * 2 >= total && with * n >= total)
}

/// For an agent left unmatched in `round`, splits the items still unallocated
/// after the round into one part per unmatched agent, each worth at least as
/// much to the agent as any bundle matched in the round.
pub fn second_type_partition_witness(
    v: &Valuation,
    round: &RoundState,
    agent: AgentId,
) -> Result<Vec<Bundle>> {
    let unmatched = round.unmatched();
    if !unmatched.contains(&agent) {
        return Err(FairDivError::InvalidInstance(format!("{agent} was matched in round {}", round.index)));
    }
    let assigned = round.assigned();
    let mut remaining = round.pool.clone();
    for &(_, j) in &assigned {
        remaining.difference_with(&round.bundles[j]);
    }
    if assigned.is_empty() {
        return Ok(vec![remaining]);
    }

    let mut matched: Vec<(Rational, usize)> = Vec::with_capacity(assigned.len());
    for &(_, j) in &assigned {
        matched.push((bundle_value(v, &round.bundles[j])?, j));
    }
    matched.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let top = matched[0].1;
    let record = round.split(agent, top).ok_or_else(|| {
        FairDivError::Invariant(format!("no split recorded for {agent} against bundle {top}"))
    })?;
    if record.split.verdict != Verdict::No {
        return Err(FairDivError::Invariant(format!(
            "{agent} accepts bundle {top} but was left unmatched"
        )));
    }

    let mut parts: Vec<Bundle> = record.split.blocks();
    let mut spare = record.split.rest.clone();
    for &(_, j) in &matched[1..] {
        let s = &round.bundles[j];
        spare.difference_with(s);
        let touched: Vec<usize> = (0..parts.len()).filter(|&t| !parts[t].is_disjoint(s)).collect();
        match touched.len() {
            0 => {}
            1 => {
                let t = touched[0];
                spare.union_with(&parts[t].difference(s));
                parts.remove(t);
            }
            _ => {
                let mut merged = Bundle::new();
                for &t in touched.iter().rev() {
                    merged.union_with(&parts.remove(t));
                }
                merged.difference_with(s);
                parts.push(merged);
            }
        }
    }
    let want = unmatched.len();
    if parts.len() < want {
        return Err(FairDivError::Invariant(format!(
            "only {} parts left for {want} agents",
            parts.len()
        )));
    }
    while parts.len() > want {
        let extra = parts.pop().unwrap();
        parts[0].union_with(&extra);
    }
    parts[0].union_with(&spare);
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ExactOracle, TiePolicy};
    use crate::types::Instance;
    use crate::verify::{is_alpha_mms, is_prop1, mms_exact};

    fn instance(rows: &[&[u64]]) -> Instance {
        Instance::with_valuations(rows.iter().map(|r| Valuation::from_integers(r.iter().copied())).collect())
            .unwrap()
    }

    fn run(inst: &Instance) -> MmsOutcome {
        let mut o = ExactOracle::new(inst, TiePolicy::FirstArgument).unwrap();
        main_algorithm(&mut o, inst.n, inst.m).unwrap()
    }

    #[test]
    fn single_agent_takes_everything() {
        let inst = instance(&[&[1, 2, 3]]);
        let out = run(&inst);
        assert_eq!(out.allocation.bundles[0], Bundle::full(3));
        assert!(out.first_type.is_empty());
    }

    fn check_first_type(inst: &Instance, out: &MmsOutcome) {
        for ev in &out.first_type {
            let v = inst.valuation(ev.agent).unwrap();
            let single = Bundle::singleton(ev.item);
            assert!(first_type_guarantee_check(v, &inst.items(), inst.n, &single, ev.witness).unwrap());
        }
    }

    #[test]
    fn two_agents_never_restart() {
        // one leftover item and one separator at most, so neither exit fires
        let inst = instance(&[&[1, 1, 1, 1, 1, 1], &[100, 1, 1, 1, 1, 1]]);
        let out = run(&inst);
        assert!(out.first_type.is_empty());
        assert!(is_prop1(&inst, &out.allocation).unwrap());
        let mms = mms_exact(&inst, 1).unwrap();
        let got = bundle_value(inst.valuation(AgentId(1)).unwrap(), &out.allocation.bundles[1]).unwrap();
        assert!(got * 2 >= mms);
    }

    #[test]
    fn cutter_takes_a_leftover_item() {
        let inst = instance(&[&[9, 9, 1, 1], &[1, 1, 1, 1], &[9, 9, 1, 9]]);
        let out = run(&inst);
        assert_eq!(out.first_type.len(), 1);
        let ev = out.first_type[0];
        assert_eq!((ev.agent, ev.item, ev.witness, ev.source), (AgentId(0), ItemId(0), ItemId(1), FirstTypeSource::Cutter));
        assert_eq!(out.allocation.bundles[0], Bundle::singleton(ItemId(0)));
        assert_eq!(out.kinds[0].tag, BundleTag::FirstType);
        assert!(is_prop1(&inst, &out.allocation).unwrap());
        assert!(is_alpha_mms(&inst, &out.allocation, Rational::new(1, 2)).unwrap());
        check_first_type(&inst, &out);
    }

    #[test]
    fn separator_items_trigger_a_restart() {
        let inst = instance(&[&[1, 1, 1, 1, 1, 1], &[1, 9, 1, 1, 1, 1], &[1, 9, 1, 1, 1, 9]]);
        let out = run(&inst);
        let ev = out.first_type[0];
        assert_eq!((ev.agent, ev.item, ev.witness), (AgentId(2), ItemId(1), ItemId(5)));
        assert_eq!(ev.source, FirstTypeSource::Subroutine { bundle: 1 });
        assert!(is_prop1(&inst, &out.allocation).unwrap());
        assert!(is_alpha_mms(&inst, &out.allocation, Rational::new(1, 2)).unwrap());
        check_first_type(&inst, &out);
        // the restart hands agent 2 exactly the item
        assert_eq!(out.allocation.bundles[2], Bundle::singleton(ItemId(1)));
    }

    #[test]
    fn identical_agents_need_one_round() {
        let row: &[u64] = &[3, 1, 4, 1, 5, 9, 2, 6];
        let inst = instance(&[row, row, row]);
        let out = run(&inst);
        assert_eq!(out.rounds.len(), 1);
        assert!(out.kinds.iter().all(|k| k.tag == BundleTag::SecondType));
        assert!(out.rounds[0].unmatched().is_empty());
    }

    #[test]
    fn cyclic_line_wraps() {
        let bundles: Vec<Bundle> = vec![
            [ItemId(0)].iter().collect(),
            [ItemId(1), ItemId(2)].iter().collect(),
            [ItemId(3)].iter().collect(),
        ];
        assert_eq!(cyclic_line(&bundles, 1), vec![ItemId(3), ItemId(0)]);
        assert_eq!(cyclic_line(&bundles, 0), vec![ItemId(1), ItemId(2), ItemId(3)]);
    }

    #[test]
    fn first_type_check_at_the_boundary() {
        // two items of 3 each next to 6 units spread thin, n = 2
        let v = Valuation::from_integers([3, 3, 1, 1, 1, 1, 1, 1]);
        let items = Bundle::full(8);
        assert!(first_type_guarantee_check(&v, &items, 2, &Bundle::singleton(ItemId(0)), ItemId(1)).unwrap());
        assert!(!first_type_guarantee_check(&v, &items, 2, &Bundle::singleton(ItemId(2)), ItemId(3)).unwrap());
    }
}
