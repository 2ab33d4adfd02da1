//! Fairness checks against exact valuations.
//!
//! Nothing here goes through an oracle; the checks read values directly so
//! they stay independent of the algorithms under test.

use serde::Serialize;

use crate::error::{FairDivError, Result};
use crate::types::{bundle_value, Allocation, Bundle, Instance, ItemId, Rational, Valuation};

/// Default cap on `n^m` for exhaustive maximin-share enumeration.
pub const DEFAULT_MMS_BUDGET: u128 = 1 << 20;

/// The enumeration cap, overridable through `FAIRDIV_BUDGET`.
pub fn mms_budget() -> u128 {
    std::env::var("FAIRDIV_BUDGET")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_MMS_BUDGET)
}

fn complete(instance: &Instance, allocation: &Allocation) -> Result<()> {
    allocation.check_partition(instance.m)?;
    if allocation.n() != instance.n {
        return Err(FairDivError::InvalidAllocation(format!(
            "{} bundles for {} agents",
            allocation.n(),
            instance.n
        )));
    }
    if !allocation.is_complete() {
        return Err(FairDivError::IncompleteAllocation(allocation.pool.len()));
    }
    Ok(())
}

/// Whether `n·u(bundle ∪ {g}) ≥ u(items)` for `g = none` or some `g ∈ items ∖ bundle`.
pub fn prop1_holds(v: &Valuation, items: &Bundle, n: usize, bundle: &Bundle) -> Result<bool> {
    let total = v.scaled_value(items)?;
    let own = v.scaled_value(bundle)?;
    let best_extra = items
        .difference(bundle)
        .iter()
        .map(|g| v.scaled_item(g))
        .max()
        .unwrap_or(0);
    Ok((own + best_extra) * n as u128 >= total)
}

pub fn prop_holds(v: &Valuation, items: &Bundle, n: usize, bundle: &Bundle) -> Result<bool> {
    Ok(v.scaled_value(bundle)? * n as u128 >= v.scaled_value(items)?)
}

/// PROP1 verdict per agent.
pub fn prop1_per_agent(instance: &Instance, allocation: &Allocation) -> Result<Vec<bool>> {
    complete(instance, allocation)?;
    let items = instance.items();
    instance
        .valuations()?
        .iter()
        .zip(&allocation.bundles)
        .map(|(v, b)| prop1_holds(v, &items, instance.n, b))
        .collect()
}

pub fn is_prop1(instance: &Instance, allocation: &Allocation) -> Result<bool> {
    Ok(prop1_per_agent(instance, allocation)?.into_iter().all(|x| x))
}

pub fn prop_per_agent(instance: &Instance, allocation: &Allocation) -> Result<Vec<bool>> {
    complete(instance, allocation)?;
    let items = instance.items();
    instance
        .valuations()?
        .iter()
        .zip(&allocation.bundles)
        .map(|(v, b)| prop_holds(v, &items, instance.n, b))
        .collect()
}

/// Whether `i` with `own` does not envy `other` once its best item is removed.
pub fn ef1_holds(v: &Valuation, own: &Bundle, other: &Bundle) -> Result<bool> {
    let mine = v.scaled_value(own)?;
    let theirs = v.scaled_value(other)?;
    let best = other.iter().map(|g| v.scaled_item(g)).max().unwrap_or(0);
    Ok(mine + best >= theirs)
}

/// `matrix[i][j]`: agent `i` is EF1 towards agent `j`.
pub fn ef1_matrix(instance: &Instance, allocation: &Allocation) -> Result<Vec<Vec<bool>>> {
    complete(instance, allocation)?;
    let vals = instance.valuations()?;
    let bundles = &allocation.bundles;
    (0..instance.n)
        .map(|i| {
            (0..instance.n)
                .map(|j| ef1_holds(&vals[i], &bundles[i], &bundles[j]))
                .collect()
        })
        .collect()
}

pub fn is_ef1(instance: &Instance, allocation: &Allocation) -> Result<bool> {
    Ok(ef1_matrix(instance, allocation)?.iter().flatten().all(|&x| x))
}

/// EF1 for a possibly partial allocation, ignoring the pool.
pub fn is_ef1_partial(vals: &[Valuation], bundles: &[Bundle]) -> Result<bool> {
    for (i, v) in vals.iter().enumerate() {
        for other in bundles {
            if !ef1_holds(v, &bundles[i], other)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn ef_per_agent(instance: &Instance, allocation: &Allocation) -> Result<Vec<bool>> {
    complete(instance, allocation)?;
    let vals = instance.valuations()?;
    (0..instance.n)
        .map(|i| {
            let mine = vals[i].scaled_value(&allocation.bundles[i])?;
            for b in &allocation.bundles {
                if vals[i].scaled_value(b)? > mine {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect()
}

/// Maximin share of `v` when `items` are split into `n` bundles, by
/// exhaustive search. Fails with [`FairDivError::Infeasible`] when
/// `n^|items|` exceeds `budget`.
pub fn mms_value(v: &Valuation, items: &Bundle, n: usize, budget: u128) -> Result<Rational> {
    if n == 0 {
        return Err(FairDivError::InvalidInstance("n must be at least 1".into()));
    }
    let m = items.len();
    let assignments = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if n > 1 && assignments > budget {
        return Err(FairDivError::Infeasible {
            assignments,
            budget,
        });
    }
    let mut values: Vec<u128> = items.iter().map(|g| v.scaled_item(g)).collect();
    values.sort_unstable_by(|a, b| b.cmp(a));
    let total: u128 = values.iter().sum();
    let mut search = MmsSearch {
        values: &values,
        sums: vec![0; n],
        suffix: suffix_sums(&values),
        best: 0,
        cap: total / n as u128,
    };
    search.run(0, 0);
    Ok(Rational::new(search.best, v.scale()))
}

fn suffix_sums(values: &[u128]) -> Vec<u128> {
    let mut suffix = vec![0; values.len() + 1];
    for i in (0..values.len()).rev() {
        suffix[i] = suffix[i + 1] + values[i];
    }
    suffix
}

struct MmsSearch<'a> {
    values: &'a [u128],
    sums: Vec<u128>,
    suffix: Vec<u128>,
    best: u128,
    /// `⌊u(M)/n⌋` in scaled units, an upper bound on any minimum.
    cap: u128,
}

impl MmsSearch<'_> {
    /// `used` counts the bundles that have received an item so far; bundles
    /// are filled in order, which removes relabelings of the same partition.
    fn run(&mut self, i: usize, used: usize) {
        if self.best >= self.cap {
            return;
        }
        if i == self.values.len() {
            let low = *self.sums.iter().min().unwrap();
            self.best = self.best.max(low);
            return;
        }
        let n = self.sums.len();
        // the final minimum is at most the smallest bundle plus everything left
        let low = *self.sums.iter().min().unwrap();
        if low + self.suffix[i] <= self.best {
            return;
        }
        if n - used > self.values.len() - i {
            // some bundle stays empty, so this branch is worth 0
            return;
        }
        let limit = (used + 1).min(n);
        for k in 0..limit {
            self.sums[k] += self.values[i];
            self.run(i + 1, used.max(k + 1));
            self.sums[k] -= self.values[i];
        }
    }
}

/// Maximin share by trying every assignment of items to bundles. Only for
/// cross-checking [`mms_value`] on tiny instances.
pub fn mms_brute_force(v: &Valuation, items: &Bundle, n: usize) -> Rational {
    let ids: Vec<ItemId> = items.iter().collect();
    let m = ids.len();
    let mut best = 0u128;
    let mut labels = vec![0usize; m];
    loop {
        let mut sums = vec![0u128; n];
        for (t, &g) in ids.iter().enumerate() {
            sums[labels[t]] += v.scaled_item(g);
        }
        best = best.max(*sums.iter().min().unwrap());
        let mut t = 0;
        while t < m {
            labels[t] += 1;
            if labels[t] < n {
                break;
            }
            labels[t] = 0;
            t += 1;
        }
        if t == m {
            break;
        }
    }
    Rational::new(best, v.scale())
}

pub fn mms_exact(instance: &Instance, agent: usize) -> Result<Rational> {
    let v = instance.valuation(crate::types::AgentId(agent))?;
    mms_value(v, &instance.items(), instance.n, mms_budget())
}

pub fn alpha_mms_per_agent(
    instance: &Instance,
    allocation: &Allocation,
    alpha: Rational,
) -> Result<Vec<bool>> {
    complete(instance, allocation)?;
    let vals = instance.valuations()?;
    (0..instance.n)
        .map(|i| {
            let mms = mms_exact(instance, i)?;
            Ok(bundle_value(&vals[i], &allocation.bundles[i])? >= alpha * mms)
        })
        .collect()
}

pub fn is_alpha_mms(instance: &Instance, allocation: &Allocation, alpha: Rational) -> Result<bool> {
    Ok(alpha_mms_per_agent(instance, allocation, alpha)?
        .into_iter()
        .all(|x| x))
}

fn rational_str(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgentFairness {
    pub agent: usize,
    pub value: String,
    pub prop: bool,
    pub prop1: bool,
    pub ef: bool,
    pub ef1: bool,
    /// Exact maximin share, absent when enumeration was over budget.
    pub mms: Option<String>,
    /// `u(A_i) / MMS_i`, absent when the share is zero or unknown.
    pub mms_ratio: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FairnessReport {
    pub agents: Vec<AgentFairness>,
    pub prop1: bool,
    pub ef1: bool,
    pub mms_feasible: bool,
}

impl FairnessReport {
    /// Whether every agent gets at least `alpha` times its share. `None`
    /// when some share could not be computed.
    pub fn alpha_mms(&self, alpha: Rational) -> Option<bool> {
        if !self.mms_feasible {
            return None;
        }
        Some(self.agents.iter().all(|a| match &a.mms_ratio {
            None => true,
            Some(r) => crate::types::parse_rational(r).is_ok_and(|r| r >= alpha),
        }))
    }
}

/// Runs every check. Maximin shares are computed only when `with_mms` is set.
pub fn fairness_report(
    instance: &Instance,
    allocation: &Allocation,
    with_mms: bool,
) -> Result<FairnessReport> {
    let prop = prop_per_agent(instance, allocation)?;
    let prop1 = prop1_per_agent(instance, allocation)?;
    let ef = ef_per_agent(instance, allocation)?;
    let ef1 = ef1_matrix(instance, allocation)?;
    let vals = instance.valuations()?;
    let mut agents = Vec::with_capacity(instance.n);
    let mut mms_feasible = with_mms;
    for i in 0..instance.n {
        let value = bundle_value(&vals[i], &allocation.bundles[i])?;
        let mms = if with_mms {
            match mms_exact(instance, i) {
                Ok(x) => Some(x),
                Err(FairDivError::Infeasible { .. }) => {
                    mms_feasible = false;
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let ratio = mms.filter(|x| *x > Rational::from_integer(0)).map(|x| value / x);
        agents.push(AgentFairness {
            agent: i,
            value: rational_str(&value),
            prop: prop[i],
            prop1: prop1[i],
            ef: ef[i],
            ef1: ef1[i].iter().all(|&x| x),
            mms: mms.as_ref().map(rational_str),
            mms_ratio: ratio.as_ref().map(rational_str),
        });
    }
    Ok(FairnessReport {
        prop1: prop1.iter().all(|&x| x),
        ef1: ef1.iter().flatten().all(|&x| x),
        mms_feasible,
        agents,
    })
}

/// A fairness property that can be checked on a finished allocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub enum Fairness {
    Prop1,
    Ef1,
    AlphaMms(Rational),
}

impl Fairness {
    pub fn half_mms() -> Self {
        Fairness::AlphaMms(Rational::new(1, 2))
    }

    pub fn check(&self, instance: &Instance, allocation: &Allocation) -> Result<bool> {
        match self {
            Fairness::Prop1 => is_prop1(instance, allocation),
            Fairness::Ef1 => is_ef1(instance, allocation),
            Fairness::AlphaMms(alpha) => is_alpha_mms(instance, allocation, *alpha),
        }
    }
}

impl std::fmt::Display for Fairness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Fairness::Prop1 => f.write_str("prop1"),
            Fairness::Ef1 => f.write_str("ef1"),
            Fairness::AlphaMms(a) => write!(f, "mms={}", rational_str(a)),
        }
    }
}

impl From<Fairness> for String {
    fn from(x: Fairness) -> String {
        x.to_string()
    }
}

impl std::str::FromStr for Fairness {
    type Err = FairDivError;

    /// `prop1`, `ef1`, `mms` (meaning one half) or `mms=α`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prop1" => Ok(Fairness::Prop1),
            "ef1" => Ok(Fairness::Ef1),
            "mms" => Ok(Fairness::half_mms()),
            _ => {
                let alpha = s
                    .strip_prefix("mms=")
                    .ok_or_else(|| FairDivError::Parse(format!("unknown fairness check `{s}`")))?;
                let alpha = crate::types::parse_rational(alpha)?;
                if alpha == Rational::from_integer(0) || alpha > Rational::from_integer(1) {
                    return Err(FairDivError::Parse(format!("α must lie in (0, 1], got {s}")));
                }
                Ok(Fairness::AlphaMms(alpha))
            }
        }
    }
}
