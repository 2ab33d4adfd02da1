//! Domain types shared by every algorithm.
//!
//! Items and agents are dense indices. A [`Bundle`] is a bitset over item
//! indices, so iteration is always in ascending id order and set algebra is
//! cheap even for instances with tens of thousands of items.

use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FairDivError, Result};

/// Exact non-negative value.
pub type Rational = Ratio<u128>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {}", self.0)
    }
}

/// Outcome of a comparison query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preferred {
    X,
    Y,
}

impl Preferred {
    pub fn flip(self) -> Self {
        match self {
            Preferred::X => Preferred::Y,
            Preferred::Y => Preferred::X,
        }
    }
}

/// A set of items.
///
/// Stored as a bitset with no trailing zero words, which keeps equality and
/// hashing structural.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Bundle {
    words: Vec<u64>,
}

impl Bundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// All items `g0..g{m-1}`.
    pub fn full(m: usize) -> Self {
        let mut words = vec![u64::MAX; m / 64];
        if !m.is_multiple_of(64) {
            words.push((1u64 << (m % 64)) - 1);
        }
        Self { words }
    }

    pub fn singleton(item: ItemId) -> Self {
        let mut b = Self::new();
        b.insert(item);
        b
    }

    pub fn insert(&mut self, item: ItemId) -> bool {
        let (w, bit) = (item.0 / 64, item.0 % 64);
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let fresh = self.words[w] & (1 << bit) == 0;
        self.words[w] |= 1 << bit;
        fresh
    }

    pub fn remove(&mut self, item: ItemId) -> bool {
        let (w, bit) = (item.0 / 64, item.0 % 64);
        if w >= self.words.len() {
            return false;
        }
        let present = self.words[w] & (1 << bit) != 0;
        self.words[w] &= !(1 << bit);
        self.trim();
        present
    }

    pub fn contains(&self, item: ItemId) -> bool {
        let (w, bit) = (item.0 / 64, item.0 % 64);
        self.words.get(w).is_some_and(|word| word & (1 << bit) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Items in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(ItemId(w * 64 + bit))
            })
        })
    }

    pub fn first(&self) -> Option<ItemId> {
        self.iter().next()
    }

    /// One past the largest id, or 0 for the empty bundle.
    pub fn upper_bound(&self) -> usize {
        match self.words.last() {
            None => 0,
            Some(&w) => (self.words.len() - 1) * 64 + (64 - w.leading_zeros() as usize),
        }
    }

    pub fn union_with(&mut self, other: &Bundle) {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn difference_with(&mut self, other: &Bundle) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
        self.trim();
    }

    pub fn union(&self, other: &Bundle) -> Bundle {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub fn difference(&self, other: &Bundle) -> Bundle {
        let mut out = self.clone();
        out.difference_with(other);
        out
    }

    pub fn intersection(&self, other: &Bundle) -> Bundle {
        let mut words: Vec<u64> = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a & b)
            .collect();
        while words.last() == Some(&0) {
            words.pop();
        }
        Bundle { words }
    }

    pub fn with(&self, item: ItemId) -> Bundle {
        let mut out = self.clone();
        out.insert(item);
        out
    }

    pub fn without(&self, item: ItemId) -> Bundle {
        let mut out = self.clone();
        out.remove(item);
        out
    }

    pub fn intersection_len(&self, other: &Bundle) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset(&self, other: &Bundle) -> bool {
        self.words.len() <= other.words.len()
            && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &Bundle) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }
}

impl FromIterator<ItemId> for Bundle {
    fn from_iter<I: IntoIterator<Item = ItemId>>(iter: I) -> Self {
        let mut b = Bundle::new();
        for item in iter {
            b.insert(item);
        }
        b
    }
}

impl<'a> FromIterator<&'a ItemId> for Bundle {
    fn from_iter<I: IntoIterator<Item = &'a ItemId>>(iter: I) -> Self {
        iter.into_iter().copied().collect()
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|g| g.0)).finish()
    }
}

impl Serialize for Bundle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for Bundle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let items = Vec::<ItemId>::deserialize(d)?;
        let bundle: Bundle = items.iter().collect();
        if bundle.len() != items.len() {
            return Err(D::Error::custom("bundle lists an item twice"));
        }
        Ok(bundle)
    }
}

/// An ordered arrangement of items, used by the binary searches.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Line {
    pub order: Vec<ItemId>,
}

impl Line {
    pub fn new(order: Vec<ItemId>) -> Self {
        Self { order }
    }

    pub fn of(bundle: &Bundle) -> Self {
        Self::new(bundle.iter().collect())
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Items at positions `start..end`.
    pub fn segment(&self, start: usize, end: usize) -> Bundle {
        self.order[start..end].iter().collect()
    }

    pub fn prefix(&self, k: usize) -> Bundle {
        self.segment(0, k)
    }
}

/// Additive valuation over the items of one instance.
///
/// The values are kept both as given and rescaled to a common denominator so
/// that bundle sums are plain integer additions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Valuation {
    values: Vec<Rational>,
    scale: u128,
    scaled: Vec<u128>,
}

impl Valuation {
    pub fn new(values: Vec<Rational>) -> Result<Self> {
        let mut scale: u128 = 1;
        for v in &values {
            scale = num_integer::lcm(scale, *v.denom());
            if scale > u64::MAX as u128 {
                return Err(FairDivError::Overflow);
            }
        }
        let scaled = values
            .iter()
            .map(|v| {
                v.numer()
                    .checked_mul(scale / v.denom())
                    .filter(|&x| x <= u64::MAX as u128)
                    .ok_or(FairDivError::Overflow)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            values,
            scale,
            scaled,
        })
    }

    pub fn from_integers<I: IntoIterator<Item = u64>>(values: I) -> Self {
        let values: Vec<Rational> = values
            .into_iter()
            .map(|v| Rational::from_integer(v as u128))
            .collect();
        let scaled = values.iter().map(|v| *v.numer()).collect();
        Self {
            values,
            scale: 1,
            scaled,
        }
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn item(&self, item: ItemId) -> Result<Rational> {
        self.values
            .get(item.0)
            .copied()
            .ok_or(FairDivError::UnknownItem(item))
    }

    /// Sum of the bundle in units of `1 / scale()`.
    pub fn scaled_value(&self, bundle: &Bundle) -> Result<u128> {
        if bundle.upper_bound() > self.scaled.len() {
            let bad = bundle.iter().find(|g| g.0 >= self.scaled.len()).unwrap();
            return Err(FairDivError::UnknownItem(bad));
        }
        Ok(bundle.iter().map(|g| self.scaled[g.0]).sum())
    }

    pub fn scaled_item(&self, item: ItemId) -> u128 {
        self.scaled[item.0]
    }

    pub fn scale(&self) -> u128 {
        self.scale
    }

    pub fn total(&self) -> Rational {
        Rational::new(self.scaled.iter().sum(), self.scale)
    }
}

impl Serialize for Valuation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.values.iter().map(RationalRepr))
    }
}

impl<'de> Deserialize<'de> for Valuation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<serde_json::Value>::deserialize(d)?;
        let values = raw
            .iter()
            .map(parse_rational_json)
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Valuation::new(values).map_err(D::Error::custom)
    }
}

struct RationalRepr<'a>(&'a Rational);

impl Serialize for RationalRepr<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let r = self.0;
        if r.is_integer() && *r.numer() <= u64::MAX as u128 {
            s.serialize_u64(*r.numer() as u64)
        } else {
            s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
        }
    }
}

fn parse_rational_json(v: &serde_json::Value) -> Result<Rational> {
    match v {
        serde_json::Value::Number(n) => match n.as_u64() {
            Some(x) => Ok(Rational::from_integer(x as u128)),
            None => parse_rational(&n.to_string()),
        },
        serde_json::Value::String(s) => parse_rational(s),
        other => Err(FairDivError::Parse(format!("not a value: {other}"))),
    }
}

/// Parses `"7"`, `"3/2"` or `"1.25"` into an exact non-negative rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || FairDivError::Parse(format!("not a non-negative rational: `{s}`"));
    if let Some((p, q)) = s.split_once('/') {
        let p: u128 = p.trim().parse().map_err(|_| bad())?;
        let q: u128 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 18 {
            return Err(bad());
        }
        let int: u128 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let denom = 10u128.pow(frac.len() as u32);
        let frac: u128 = frac.parse().map_err(|_| bad())?;
        return Ok(Rational::new(int * denom + frac, denom));
    }
    s.parse::<u128>()
        .map(Rational::from_integer)
        .map_err(|_| bad())
}

/// Additive value of a bundle.
pub fn bundle_value(v: &Valuation, b: &Bundle) -> Result<Rational> {
    let sum = v.scaled_value(b)?;
    if sum.is_zero() {
        return Ok(Rational::zero());
    }
    Ok(Rational::new(sum, v.scale))
}

/// The problem instance. Valuations are hidden from algorithms and only
/// consulted by simulated oracles and verifiers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub valuations: Option<Vec<Valuation>>,
}

impl Instance {
    pub fn new(n: usize, m: usize, valuations: Option<Vec<Valuation>>) -> Result<Self> {
        let instance = Self { n, m, valuations };
        instance.validate()?;
        Ok(instance)
    }

    pub fn with_valuations(valuations: Vec<Valuation>) -> Result<Self> {
        let m = valuations.first().map_or(0, Valuation::m);
        Self::new(valuations.len(), m, Some(valuations))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(FairDivError::InvalidInstance("n must be at least 1".into()));
        }
        if let Some(vals) = &self.valuations {
            if vals.len() != self.n {
                return Err(FairDivError::InvalidInstance(format!(
                    "{} valuations for {} agents",
                    vals.len(),
                    self.n
                )));
            }
            if let Some(bad) = vals.iter().position(|v| v.m() != self.m) {
                return Err(FairDivError::InvalidInstance(format!(
                    "valuation of agent {bad} covers {} items, expected {}",
                    vals[bad].m(),
                    self.m
                )));
            }
        }
        Ok(())
    }

    pub fn items(&self) -> Bundle {
        Bundle::full(self.m)
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.n).map(AgentId)
    }

    pub fn valuations(&self) -> Result<&[Valuation]> {
        self.valuations
            .as_deref()
            .ok_or(FairDivError::MissingValuations)
    }

    pub fn valuation(&self, agent: AgentId) -> Result<&Valuation> {
        self.valuations()?
            .get(agent.0)
            .ok_or(FairDivError::UnknownAgent(agent))
    }
}

/// Map from agents to bundles plus the unallocated pool.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub bundles: Vec<Bundle>,
    pub pool: Bundle,
}

impl Allocation {
    /// Everything still in the pool.
    pub fn empty(n: usize, m: usize) -> Self {
        Self {
            bundles: vec![Bundle::new(); n],
            pool: Bundle::full(m),
        }
    }

    /// Builds an allocation whose pool is whatever the bundles leave out of
    /// `g0..g{m-1}`. Fails if bundles overlap or name unknown items.
    pub fn from_bundles(bundles: Vec<Bundle>, m: usize) -> Result<Self> {
        let mut seen = Bundle::new();
        for (i, b) in bundles.iter().enumerate() {
            if b.upper_bound() > m {
                return Err(FairDivError::InvalidAllocation(format!(
                    "bundle of agent {i} names an item outside g0..g{}",
                    m.saturating_sub(1)
                )));
            }
            if !seen.is_disjoint(b) {
                return Err(FairDivError::InvalidAllocation(format!(
                    "bundle of agent {i} overlaps an earlier bundle"
                )));
            }
            seen.union_with(b);
        }
        Ok(Self {
            bundles,
            pool: Bundle::full(m).difference(&seen),
        })
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_complete(&self) -> bool {
        self.pool.is_empty()
    }

    pub fn bundle(&self, agent: AgentId) -> &Bundle {
        &self.bundles[agent.0]
    }

    /// Moves `bundle` from the pool to `agent`.
    pub fn assign(&mut self, agent: AgentId, bundle: &Bundle) -> Result<()> {
        if !bundle.is_subset(&self.pool) {
            return Err(FairDivError::InvalidAllocation(format!(
                "{agent} was handed items that are not in the pool"
            )));
        }
        self.pool.difference_with(bundle);
        self.bundles[agent.0].union_with(bundle);
        Ok(())
    }

    /// Checks that bundles and pool partition `g0..g{m-1}`.
    pub fn check_partition(&self, m: usize) -> Result<()> {
        let rebuilt = Allocation::from_bundles(self.bundles.clone(), m)?;
        if rebuilt.pool != self.pool {
            return Err(FairDivError::InvalidAllocation(
                "bundles and pool do not partition the item set".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryEntry {
    pub agent: AgentId,
    pub x: Bundle,
    pub y: Bundle,
    pub answer: Preferred,
}

/// Transcript of every comparison issued during a run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLog {
    pub entries: Vec<QueryEntry>,
    pub per_agent: Vec<u64>,
}

impl QueryLog {
    pub fn new(n: usize) -> Self {
        Self {
            entries: Vec::new(),
            per_agent: vec![0; n],
        }
    }

    pub fn record(&mut self, agent: AgentId, x: &Bundle, y: &Bundle, answer: Preferred) {
        if self.per_agent.len() <= agent.0 {
            self.per_agent.resize(agent.0 + 1, 0);
        }
        self.per_agent[agent.0] += 1;
        self.entries.push(QueryEntry {
            agent,
            x: x.clone(),
            y: y.clone(),
            answer,
        });
    }

    pub fn total(&self) -> usize {
        self.entries.len()
    }

    pub fn count(&self, agent: AgentId) -> u64 {
        self.per_agent.get(agent.0).copied().unwrap_or(0)
    }
}
