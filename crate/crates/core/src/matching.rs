//! Agent/bundle eligibility graphs, maximum matching and Hall violators.

use serde::Serialize;

use crate::error::{FairDivError, Result};
use crate::types::AgentId;

/// Bipartite graph between the active agents (left, by position) and the
/// bundles of the current partition (right, by index).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EligibilityGraph {
    pub agents: Vec<AgentId>,
    pub bundles: usize,
    /// `edges[p]` lists the bundles adjacent to `agents[p]`, ascending.
    pub edges: Vec<Vec<usize>>,
}

impl EligibilityGraph {
    pub fn new(agents: Vec<AgentId>, bundles: usize) -> Self {
        let edges = vec![Vec::new(); agents.len()];
        Self {
            agents,
            bundles,
            edges,
        }
    }

    pub fn add_edge(&mut self, left: usize, right: usize) {
        let row = &mut self.edges[left];
        if let Err(at) = row.binary_search(&right) {
            row.insert(at, right);
        }
    }

    pub fn has_edge(&self, left: usize, right: usize) -> bool {
        self.edges[left].binary_search(&right).is_ok()
    }

    /// Γ(S) for a set of left positions, ascending.
    pub fn neighbors(&self, left: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.bundles];
        for &p in left {
            for &j in &self.edges[p] {
                seen[j] = true;
            }
        }
        (0..self.bundles).filter(|&j| seen[j]).collect()
    }
}

/// A maximum matching, as `left → right`. Free bundles are taken before any
/// augmenting path is tried, so a complete graph yields the identity.
pub fn maximum_matching(g: &EligibilityGraph) -> Vec<Option<usize>> {
    let mut left_match: Vec<Option<usize>> = vec![None; g.agents.len()];
    let mut right_match: Vec<Option<usize>> = vec![None; g.bundles];
    for u in 0..g.agents.len() {
        if let Some(&v) = g.edges[u].iter().find(|&&v| right_match[v].is_none()) {
            left_match[u] = Some(v);
            right_match[v] = Some(u);
            continue;
        }
        let mut visited = vec![false; g.bundles];
        augment(g, u, &mut visited, &mut left_match, &mut right_match);
    }
    left_match
}

fn augment(
    g: &EligibilityGraph,
    u: usize,
    visited: &mut [bool],
    left_match: &mut [Option<usize>],
    right_match: &mut [Option<usize>],
) -> bool {
    for &v in &g.edges[u] {
        if visited[v] {
            continue;
        }
        visited[v] = true;
        let free = match right_match[v] {
            None => true,
            Some(w) => augment(g, w, visited, left_match, right_match),
        };
        if free {
            left_match[u] = Some(v);
            right_match[v] = Some(u);
            return true;
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HallOutcome {
    /// Left positions in the violator, ascending. Empty when Hall's condition
    /// holds for every subset.
    pub violator: Vec<usize>,
    /// `(left, right)` pairs covering every left position outside the
    /// violator, none of them touching Γ(violator).
    pub matching: Vec<(usize, usize)>,
}

/// Finds a Hall violator of maximum deficiency `|Z| − |Γ(Z)|` and a matching
/// that saturates the remaining agents using bundles outside `Γ(Z)`.
///
/// `Z` is the set of agents reachable by alternating paths from the agents a
/// maximum matching leaves free.
pub fn hall_violator_and_matching(g: &EligibilityGraph) -> Result<HallOutcome> {
    let left_match = maximum_matching(g);
    let mut right_match: Vec<Option<usize>> = vec![None; g.bundles];
    for (u, v) in left_match.iter().enumerate() {
        if let Some(v) = v {
            right_match[*v] = Some(u);
        }
    }

    let mut in_z = vec![false; g.agents.len()];
    let mut stack: Vec<usize> = (0..g.agents.len())
        .filter(|&u| left_match[u].is_none())
        .collect();
    for &u in &stack {
        in_z[u] = true;
    }
    let mut seen_right = vec![false; g.bundles];
    while let Some(u) = stack.pop() {
        for &v in &g.edges[u] {
            if seen_right[v] {
                continue;
            }
            seen_right[v] = true;
            // v is matched, otherwise the matching was not maximum
            let w = right_match[v].ok_or_else(|| {
                FairDivError::Invariant("augmenting path left after maximum matching".into())
            })?;
            if !in_z[w] {
                in_z[w] = true;
                stack.push(w);
            }
        }
    }

    let violator: Vec<usize> = (0..g.agents.len()).filter(|&u| in_z[u]).collect();
    let mut matching = Vec::new();
    for u in 0..g.agents.len() {
        if in_z[u] {
            continue;
        }
        match left_match[u] {
            Some(v) if !seen_right[v] => matching.push((u, v)),
            _ => {
                return Err(FairDivError::Invariant(format!(
                    "agent at position {u} outside the violator has no usable bundle"
                )))
            }
        }
    }
    Ok(HallOutcome { violator, matching })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(rows: &[&[usize]], bundles: usize) -> EligibilityGraph {
        let mut g = EligibilityGraph::new((0..rows.len()).map(AgentId).collect(), bundles);
        for (u, row) in rows.iter().enumerate() {
            for &v in *row {
                g.add_edge(u, v);
            }
        }
        g
    }

    fn deficiency(g: &EligibilityGraph, set: &[usize]) -> isize {
        set.len() as isize - g.neighbors(set).len() as isize
    }

    fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
        (0u32..1 << n).map(move |mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
    }

    #[test]
    fn complete_graph_has_no_violator() {
        let g = graph(&[&[0, 1, 2], &[0, 1, 2], &[0, 1, 2]], 3);
        let out = hall_violator_and_matching(&g).unwrap();
        assert!(out.violator.is_empty());
        assert_eq!(out.matching, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn two_agents_fighting_over_one_bundle() {
        let g = graph(&[&[0, 1, 2], &[0], &[0]], 3);
        let out = hall_violator_and_matching(&g).unwrap();
        assert_eq!(out.violator, vec![1, 2]);
        assert_eq!(out.matching.len(), 1);
        let (a, bundle) = out.matching[0];
        assert_eq!(a, 0);
        assert!(bundle == 1 || bundle == 2);
    }

    fn arb_graph() -> impl Strategy<Value = EligibilityGraph> {
        (1usize..=6).prop_flat_map(|n| {
            prop::collection::vec(prop::collection::vec(any::<bool>(), n), n).prop_map(move |bits| {
                let mut g = EligibilityGraph::new((0..n).map(AgentId).collect(), n);
                for (u, row) in bits.iter().enumerate() {
                    for (v, &on) in row.iter().enumerate() {
                        if on || u == 0 {
                            g.add_edge(u, v);
                        }
                    }
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn violator_matches_subset_enumeration(g in arb_graph()) {
            let n = g.agents.len();
            let out = hall_violator_and_matching(&g).unwrap();
            let max_def = subsets(n).map(|s| deficiency(&g, &s)).max().unwrap();
            if max_def <= 0 {
                prop_assert!(out.violator.is_empty());
                prop_assert_eq!(out.matching.len(), n);
            } else {
                prop_assert_eq!(deficiency(&g, &out.violator), max_def);
            }
            // the cutter row is complete, so it is never part of a violator
            prop_assert!(!out.violator.contains(&0));

            let gamma = g.neighbors(&out.violator);
            let mut used = vec![false; g.bundles];
            let mut covered: Vec<usize> = Vec::new();
            for &(u, v) in &out.matching {
                prop_assert!(g.has_edge(u, v));
                prop_assert!(!gamma.contains(&v));
                prop_assert!(!used[v]);
                used[v] = true;
                covered.push(u);
            }
            covered.sort();
            let rest: Vec<usize> = (0..n).filter(|u| !out.violator.contains(u)).collect();
            prop_assert_eq!(covered, rest.clone());

            // Hall's condition holds on the complement, restricted to bundles outside Γ(Z)
            for mask in 0u32..1 << rest.len() {
                let w: Vec<usize> = (0..rest.len()).filter(|&i| mask & (1 << i) != 0).map(|i| rest[i]).collect();
                let outside = g.neighbors(&w).into_iter().filter(|v| !gamma.contains(v)).count();
                prop_assert!(outside >= w.len());
            }
        }
    }
}
