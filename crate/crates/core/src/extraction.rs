//! Information extraction by an adaptive prober.
//!
//! [`max_leakage`] computes `r_max`, the largest number of knowledge sets any
//! probing strategy can split a set of possible states into. The search works
//! on final knowledge sets: an input either refines the current set (more
//! than one observation occurs) and each part is updated and solved again, or
//! it does not, in which case the updated set is recorded in the flag sets
//! and explored in turn. A set already in the flag sets is redundant. Flag
//! sets are cleared on every refining input.
//!
//! The value from a set reached by a refining input depends only on the set,
//! so those results are memoized. The flag sets are shared by all
//! non-refining continuations of one refined set (not just one path): each
//! non-refining input keeps a single child, so the best refinement anywhere
//! in that closure is the value for the set, and each member needs to be
//! expanded only once.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;
use serde_json::{json, Map, Value};

use crate::absorption::{falling_factorial, lambda_plru};
use crate::cache::{Block, CacheMachine, CacheSetState, Observation, Policy};
use crate::error::{Error, Result};
use crate::mealy::MealyMachine;
use crate::statesets::{BlockUniverse, StateSet};

pub const DEFAULT_MAX_NODES: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackerKind {
    Shared,
    Disjoint,
}

impl AttackerKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackerKind::Shared => "shared",
            AttackerKind::Disjoint => "disjoint",
        }
    }
}

impl fmt::Display for AttackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(AttackerKind::Shared),
            "disjoint" => Ok(AttackerKind::Disjoint),
            other => Err(Error::InvalidConfig(format!("unknown attacker '{other}'"))),
        }
    }
}

/// The blocks an attacker may access.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackerModel {
    kind: AttackerKind,
    alphabet: Vec<Block>,
}

impl AttackerModel {
    pub fn new(
        kind: AttackerKind,
        mut alphabet: Vec<Block>,
        universe: &BlockUniverse,
    ) -> Result<Self> {
        alphabet.sort_unstable();
        alphabet.dedup();
        for &b in &alphabet {
            universe.check(b)?;
        }
        match kind {
            AttackerKind::Shared => {
                if let Some(b) = universe
                    .victim_blocks()
                    .into_iter()
                    .find(|b| alphabet.binary_search(b).is_err())
                {
                    return Err(Error::InvalidConfig(format!(
                        "shared attacker alphabet lacks victim block '{}'",
                        universe.name(b)
                    )));
                }
            }
            AttackerKind::Disjoint => {
                if let Some(&b) = alphabet.iter().find(|&&b| universe.is_victim(b)) {
                    return Err(Error::InvalidConfig(format!(
                        "disjoint attacker alphabet contains victim block '{}'",
                        universe.name(b)
                    )));
                }
            }
        }
        if alphabet.is_empty() {
            return Err(Error::InvalidConfig("empty attacker alphabet".into()));
        }
        Ok(Self { kind, alphabet })
    }

    pub fn kind(&self) -> AttackerKind {
        self.kind
    }

    pub fn alphabet(&self) -> &[Block] {
        &self.alphabet
    }
}

/// Extends `universe` with `fresh` probe blocks and returns the attacker's
/// alphabet over it: the fillers and probe blocks it owns, plus the victim's
/// blocks for a shared attacker.
pub fn attacker_alphabet(
    kind: AttackerKind,
    universe: &BlockUniverse,
    assoc: usize,
    fresh: usize,
) -> Result<(BlockUniverse, AttackerModel)> {
    let fillers = universe.filler_blocks().len();
    if fillers < assoc {
        return Err(Error::InsufficientFillers {
            needed: assoc,
            available: fillers,
        });
    }
    let extended = universe.with_fresh(fresh);
    let mut alphabet: Vec<Block> = extended
        .filler_blocks()
        .into_iter()
        .chain(extended.fresh_blocks())
        .collect();
    if kind == AttackerKind::Shared {
        alphabet.extend(extended.victim_blocks());
    }
    let model = AttackerModel::new(kind, alphabet, &extended)?;
    Ok((extended, model))
}

/// Resource limits for [`max_leakage`]. Hitting one makes the result a lower
/// bound (`exact == false`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    /// Cap on expanded final knowledge sets.
    pub max_nodes: u64,
    /// Cap on probe length.
    pub max_depth: Option<usize>,
    /// Skip inputs the machine reports as interchangeable.
    pub symmetry: bool,
    /// Reconstruct an optimal strategy tree.
    pub witness: bool,
    /// Among optimal strategies prefer the one with the shortest longest
    /// probe. Disables some pruning.
    pub shortest: bool,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self {
            max_nodes: DEFAULT_MAX_NODES,
            max_depth: None,
            symmetry: true,
            witness: false,
            shortest: false,
        }
    }
}

impl SearchLimits {
    /// Default probe-length budget for a cache analysis: `4 * A * (fp + 1)`.
    pub fn for_cache(assoc: usize, fp: usize) -> Self {
        Self {
            max_depth: Some(4 * assoc * (fp + 1)),
            ..Self::default()
        }
    }
}

/// A probing strategy: the input to issue and one subtree per observation.
/// Leaves have no input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyTree<I, O: Ord> {
    pub input: Option<I>,
    pub children: BTreeMap<O, StrategyTree<I, O>>,
}

impl<I, O: Ord> StrategyTree<I, O> {
    pub fn leaf() -> Self {
        Self {
            input: None,
            children: BTreeMap::new(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        if self.children.is_empty() {
            1
        } else {
            self.children.values().map(Self::leaf_count).sum()
        }
    }

    /// Longest probe in the tree.
    pub fn depth(&self) -> usize {
        self.children
            .values()
            .map(|c| c.depth() + 1)
            .max()
            .unwrap_or(0)
    }

    /// Nested `{input, children: {observation: subtree}}` document.
    pub fn to_json(&self, input: &impl Fn(&I) -> String, obs: &impl Fn(&O) -> String) -> Value {
        let mut children = Map::new();
        for (o, sub) in &self.children {
            children.insert(obs(o), sub.to_json(input, obs));
        }
        json!({
            "input": self.input.as_ref().map(input),
            "children": children,
        })
    }
}

impl<I: Clone, O: Clone + Ord> StrategyTree<I, O> {
    /// Runs the strategy on each initial state and groups the states by the
    /// observation sequence they produce.
    pub fn classify<M>(&self, machine: &M, states: &[M::State]) -> BTreeMap<Vec<O>, Vec<M::State>>
    where
        M: MealyMachine<Input = I, Output = O>,
    {
        let mut out: BTreeMap<Vec<O>, Vec<M::State>> = BTreeMap::new();
        for start in states {
            let mut node = self;
            let mut state = start.clone();
            let mut trace = Vec::new();
            while let Some(input) = &node.input {
                let o = machine.view(&state, input);
                state = machine.upd(&state, input);
                trace.push(o.clone());
                match node.children.get(&o) {
                    Some(child) => node = child,
                    None => break,
                }
            }
            out.entry(trace).or_default().push(start.clone());
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct PartitionResult<I, O: Ord> {
    pub r_max: u64,
    /// False when a budget was hit; `r_max` is then a lower bound.
    pub exact: bool,
    pub nodes: u64,
    /// Longest probe explored.
    pub depth: usize,
    pub witness: Option<StrategyTree<I, O>>,
}

impl<I, O: Ord> PartitionResult<I, O> {
    pub fn bits(&self) -> f64 {
        (self.r_max as f64).log2()
    }
}

/// Non-refining continuations seen since the last refining input.
#[derive(Debug)]
pub struct FlagSets<S> {
    index: FxHashMap<Vec<S>, usize>,
    visits: Vec<Visit>,
    sets: Vec<Vec<S>>,
}

#[derive(Clone, Copy, Debug)]
struct Visit {
    parent: usize,
    via: usize,
    dist: usize,
}

impl<S: Clone + Eq + std::hash::Hash> FlagSets<S> {
    fn new(root: Vec<S>) -> Self {
        let mut index = FxHashMap::default();
        index.insert(root.clone(), 0);
        Self {
            index,
            visits: vec![Visit {
                parent: 0,
                via: usize::MAX,
                dist: 0,
            }],
            sets: vec![root],
        }
    }

    pub fn contains(&self, set: &[S]) -> bool {
        self.index.contains_key(set)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    fn insert(&mut self, set: Vec<S>, parent: usize, via: usize) -> Option<usize> {
        if self.index.contains_key(&set) {
            return None;
        }
        let id = self.sets.len();
        self.index.insert(set.clone(), id);
        self.visits.push(Visit {
            parent,
            via,
            dist: self.visits[parent].dist + 1,
        });
        self.sets.push(set);
        Some(id)
    }

    fn path_to(&self, mut id: usize) -> Vec<usize> {
        let mut path = Vec::new();
        while id != 0 {
            path.push(self.visits[id].via);
            id = self.visits[id].parent;
        }
        path.reverse();
        path
    }
}

// Non-refining inputs to apply, then the refining one.
#[derive(Clone, Debug)]
struct Plan {
    detour: Vec<usize>,
    split: usize,
}

#[derive(Clone, Debug)]
struct Memo {
    value: u64,
    height: usize,
    plan: Option<Plan>,
}

struct Search<'a, M: MealyMachine> {
    machine: &'a M,
    alphabet: &'a [M::Input],
    limits: &'a SearchLimits,
    memo: FxHashMap<Vec<M::State>, Memo>,
    nodes: u64,
    truncated: bool,
    deepest: usize,
}

impl<'a, M: MealyMachine> Search<'a, M> {
    fn image(&self, states: &[M::State], input: &M::Input) -> Vec<M::State> {
        let mut out: Vec<M::State> = states.iter().map(|s| self.machine.upd(s, input)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn split(&self, states: &[M::State], input: &M::Input) -> Vec<Vec<M::State>> {
        let mut groups: BTreeMap<M::Output, Vec<M::State>> = BTreeMap::new();
        for s in states {
            groups
                .entry(self.machine.view(s, input))
                .or_default()
                .push(self.machine.upd(s, input));
        }
        groups
            .into_values()
            .map(|mut g| {
                g.sort_unstable();
                g.dedup();
                g
            })
            .collect()
    }

    fn refines(&self, states: &[M::State], input: &M::Input) -> bool {
        let first = self.machine.view(&states[0], input);
        states[1..]
            .iter()
            .any(|s| self.machine.view(s, input) != first)
    }

    fn depth_ok(&mut self, depth: usize) -> bool {
        if let Some(max) = self.limits.max_depth {
            if depth > max {
                self.truncated = true;
                return false;
            }
        }
        self.deepest = self.deepest.max(depth);
        true
    }

    // Is (value, height) a strict improvement over (best, best_height)?
    fn improves(&self, value: u64, height: usize, best: u64, best_height: usize) -> bool {
        value > best || (self.limits.shortest && value == best && height < best_height)
    }

    // Can a candidate bounded by `bound` still improve on `best`?
    fn may_improve(&self, bound: u64, best: u64) -> bool {
        if self.limits.shortest {
            bound >= best
        } else {
            bound > best
        }
    }

    /// Best knowledge-set count obtainable from `root`, reached after a probe
    /// of length `depth`, with the height of the strategy achieving it.
    fn solve(&mut self, root: Vec<M::State>, depth: usize) -> (u64, usize) {
        if root.len() <= 1 {
            return (1, 0);
        }
        if let Some(m) = self.memo.get(&root) {
            return (m.value, m.height);
        }
        let target = root.len() as u64;
        let mut best = 1u64;
        let mut best_height = 0usize;
        let mut plan: Option<Plan> = None;
        let mut flags = FlagSets::new(root.clone());
        let mut cursor = 0;

        'epoch: while cursor < flags.len() {
            let dist = flags.visits[cursor].dist;
            // Candidates from here have height at least dist + 1.
            if best == target && (!self.limits.shortest || best_height <= dist + 1) {
                break;
            }
            if self.nodes >= self.limits.max_nodes {
                self.truncated = true;
                break;
            }
            self.nodes += 1;
            let here = cursor;
            cursor += 1;
            let set = flags.sets[here].clone();
            let at = depth + dist;
            let mut seen_classes: Vec<u64> = Vec::new();

            for (idx, input) in self.alphabet.iter().enumerate() {
                if best == target && (!self.limits.shortest || best_height <= dist + 1) {
                    break 'epoch;
                }
                if self.limits.symmetry {
                    if let Some(class) = self.machine.symmetry_class(&set, input) {
                        if seen_classes.contains(&class) {
                            continue;
                        }
                        seen_classes.push(class);
                    }
                }
                if !self.refines(&set, input) {
                    let next = self.image(&set, input);
                    if !self.may_improve(next.len() as u64, best) || flags.contains(&next) {
                        continue;
                    }
                    if !self.depth_ok(at + 1) {
                        continue;
                    }
                    if let Some(m) = self.memo.get(&next) {
                        // Already solved from scratch: its closure is covered.
                        let height = dist + 1 + m.height;
                        if m.plan.is_some() && self.improves(m.value, height, best, best_height) {
                            best = m.value;
                            best_height = height;
                            let mut detour = flags.path_to(here);
                            detour.push(idx);
                            plan = m.plan.as_ref().map(|p| {
                                detour.extend_from_slice(&p.detour);
                                Plan {
                                    detour,
                                    split: p.split,
                                }
                            });
                        }
                        continue;
                    }
                    flags.insert(next, here, idx);
                    continue;
                }

                let parts = self.split(&set, input);
                let bound: u64 = parts.iter().map(|p| p.len() as u64).sum();
                if !self.may_improve(bound, best) || !self.depth_ok(at + 1) {
                    continue;
                }
                let mut remaining = bound;
                let mut total = 0u64;
                let mut tallest = 0usize;
                for part in parts {
                    remaining -= part.len() as u64;
                    let (value, height) = self.solve(part, at + 1);
                    total += value;
                    tallest = tallest.max(height);
                    if !self.may_improve(total + remaining, best) {
                        break;
                    }
                }
                let height = dist + 1 + tallest;
                if self.improves(total, height, best, best_height) {
                    best = total;
                    best_height = height;
                    plan = Some(Plan {
                        detour: flags.path_to(here),
                        split: idx,
                    });
                }
            }
        }

        self.memo.insert(
            root,
            Memo {
                value: best,
                height: best_height,
                plan,
            },
        );
        (best, best_height)
    }

    fn witness(&self, set: &[M::State]) -> StrategyTree<M::Input, M::Output> {
        match self.memo.get(set).and_then(|m| m.plan.clone()) {
            Some(plan) if set.len() > 1 => self.follow(set.to_vec(), &plan.detour, plan.split),
            _ => self.deplete(set),
        }
    }

    // A leaf that cannot be refined any further. When some non-refining
    // probe collapses it to a single state, emit that probe so the leaf's
    // final knowledge set is a singleton.
    fn deplete(&self, set: &[M::State]) -> StrategyTree<M::Input, M::Output> {
        const MAX_SETS: usize = 4096;
        if set.len() <= 1 {
            return StrategyTree::leaf();
        }
        let mut flags = FlagSets::new(set.to_vec());
        let mut cursor = 0;
        let mut found = None;
        'bfs: while cursor < flags.len() && flags.len() < MAX_SETS {
            let here = cursor;
            cursor += 1;
            let current = flags.sets[here].clone();
            for (idx, input) in self.alphabet.iter().enumerate() {
                if self.refines(&current, input) {
                    continue;
                }
                let next = self.image(&current, input);
                let single = next.len() == 1;
                if let Some(id) = flags.insert(next, here, idx) {
                    if single {
                        found = Some(id);
                        break 'bfs;
                    }
                }
            }
        }
        let Some(id) = found else {
            return StrategyTree::leaf();
        };
        let mut tree = StrategyTree::leaf();
        let path = flags.path_to(id);
        let mut current = set.to_vec();
        let mut observations = Vec::with_capacity(path.len());
        for &idx in &path {
            let input = &self.alphabet[idx];
            observations.push(self.machine.view(&current[0], input));
            current = self.image(&current, input);
        }
        for (&idx, obs) in path.iter().zip(observations).rev() {
            let mut children = BTreeMap::new();
            children.insert(obs, tree);
            tree = StrategyTree {
                input: Some(self.alphabet[idx].clone()),
                children,
            };
        }
        tree
    }

    fn follow(
        &self,
        set: Vec<M::State>,
        detour: &[usize],
        split: usize,
    ) -> StrategyTree<M::Input, M::Output> {
        let (input_idx, rest) = match detour.split_first() {
            Some((&first, rest)) => (first, Some(rest)),
            None => (split, None),
        };
        let input = self.alphabet[input_idx].clone();
        let mut children = BTreeMap::new();
        match rest {
            Some(rest) => {
                let obs = self.machine.view(&set[0], &input);
                let next = self.image(&set, &input);
                children.insert(obs, self.follow(next, rest, split));
            }
            None => {
                let mut groups: BTreeMap<M::Output, Vec<M::State>> = BTreeMap::new();
                for s in &set {
                    groups
                        .entry(self.machine.view(s, &input))
                        .or_default()
                        .push(self.machine.upd(s, &input));
                }
                for (obs, mut part) in groups {
                    part.sort_unstable();
                    part.dedup();
                    children.insert(obs, self.witness(&part));
                }
            }
        }
        StrategyTree {
            input: Some(input),
            children,
        }
    }
}

/// Maximum number of knowledge sets an adaptive prober using `alphabet` can
/// split `possible` into.
pub fn max_leakage<M: MealyMachine>(
    machine: &M,
    possible: &[M::State],
    alphabet: &[M::Input],
    limits: &SearchLimits,
) -> Result<PartitionResult<M::Input, M::Output>> {
    if possible.is_empty() {
        return Err(Error::InvalidConfig("empty set of possible states".into()));
    }
    if alphabet.is_empty() {
        return Err(Error::InvalidConfig("empty attacker alphabet".into()));
    }
    for input in alphabet {
        machine.check_input(input)?;
    }
    let mut root = possible.to_vec();
    root.sort_unstable();
    root.dedup();

    let mut search = Search {
        machine,
        alphabet,
        limits,
        memo: FxHashMap::default(),
        nodes: 0,
        truncated: false,
        deepest: 0,
    };
    let (r_max, _) = search.solve(root.clone(), 0);
    let witness = limits.witness.then(|| search.witness(&root));
    Ok(PartitionResult {
        r_max,
        exact: !search.truncated,
        nodes: search.nodes,
        depth: search.deepest,
        witness,
    })
}

/// Runs [`max_leakage`] on a cache state set for the given attacker class,
/// adding `fresh` probe blocks to the attacker's fillers.
pub fn cache_leakage(
    set: &StateSet,
    kind: AttackerKind,
    fresh: usize,
    limits: &SearchLimits,
) -> Result<(
    PartitionResult<Block, Observation>,
    CacheMachine,
    AttackerModel,
)> {
    let (universe, attacker) = attacker_alphabet(kind, set.universe(), set.assoc(), fresh)?;
    let machine = CacheMachine::new(set.policy(), set.assoc(), universe)?;
    let result = max_leakage(&machine, set.states(), attacker.alphabet(), limits)?;
    Ok((result, machine, attacker))
}

/// Length of the longest age prefix occupied by the same block in every state.
pub fn deterministic_ages(states: &[CacheSetState]) -> usize {
    let Some(first) = states.first() else {
        return 0;
    };
    let assoc = states.iter().map(|s| s.assoc()).min().unwrap_or(0);
    (0..assoc)
        .take_while(|&age| states.iter().all(|s| s.lines()[age] == first.lines()[age]))
        .count()
}

/// Analytic cap on `r_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LeakageBound {
    Finite(BigUint),
    /// No footprint-independent bound; only `|S_v|` applies.
    StateCount,
}

impl LeakageBound {
    pub fn finite(&self) -> Option<&BigUint> {
        match self {
            LeakageBound::Finite(n) => Some(n),
            LeakageBound::StateCount => None,
        }
    }
}

impl fmt::Display for LeakageBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeakageBound::Finite(n) => write!(f, "{n}"),
            LeakageBound::StateCount => f.write_str("|S_v|"),
        }
    }
}

pub fn leakage_bound(
    policy: Policy,
    assoc: usize,
    kind: AttackerKind,
    fp: usize,
) -> Result<LeakageBound> {
    policy.validate_assoc(assoc)?;
    let bound = match (policy, kind) {
        (Policy::Lru, AttackerKind::Shared) => BigUint::one() << assoc,
        // PLRU and LRU coincide for associativity 2.
        (Policy::Plru, AttackerKind::Shared) if assoc <= 2 => BigUint::one() << assoc,
        (Policy::Plru, AttackerKind::Shared) => return Ok(LeakageBound::StateCount),
        (Policy::Fifo, AttackerKind::Shared) => falling_factorial(assoc + 1, assoc + 1),
        (Policy::Lru | Policy::Fifo, AttackerKind::Disjoint) => BigUint::from(assoc + 1),
        (Policy::Plru, AttackerKind::Disjoint) => {
            let mut sum = BigUint::zero();
            for k in 0..=fp.min(assoc) {
                sum += lambda_plru(k, assoc)?;
            }
            sum
        }
    };
    Ok(LeakageBound::Finite(bound))
}

/// Upper bound `min(1, max_prior * channel_count)` on the probability of
/// guessing the secret.
pub fn success_probability_bound(max_prior: f64, channel_count: u64) -> Result<f64> {
    if !(max_prior > 0.0 && max_prior <= 1.0) {
        return Err(Error::InvalidProbability(max_prior));
    }
    if channel_count == 0 {
        return Err(Error::InvalidConfig(
            "channel count must be positive".into(),
        ));
    }
    Ok((max_prior * channel_count as f64).min(1.0))
}

/// Leakage of independent cache sets: the product of the per-set counts.
pub fn compose_sets(per_set_counts: &[BigUint]) -> Result<BigUint> {
    if per_set_counts.is_empty() {
        return Err(Error::InvalidConfig("no per-set counts".into()));
    }
    if per_set_counts.iter().any(Zero::is_zero) {
        return Err(Error::InvalidConfig(
            "per-set counts must be positive".into(),
        ));
    }
    Ok(per_set_counts.iter().product())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mealy::ToyMachine;
    use crate::statesets::{generate, InitialStatus};

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn toy_machine_splits_into_singletons() {
        let limits = SearchLimits {
            witness: true,
            shortest: true,
            ..SearchLimits::default()
        };
        let r = max_leakage(
            &ToyMachine,
            &ToyMachine.states(),
            &ToyMachine.inputs(),
            &limits,
        )
        .unwrap();
        assert_eq!(r.r_max, 7);
        assert!(r.exact);
        let w = r.witness.unwrap();
        assert_eq!(w.leaf_count(), 7);
        assert!(w.depth() <= 4, "depth {}", w.depth());
        let classes = w.classify(&ToyMachine, &ToyMachine.states());
        assert_eq!(classes.len(), 7);
        assert!(classes.values().all(|c| c.len() == 1));
    }

    #[test]
    fn singleton_leaks_nothing() {
        let r = max_leakage(
            &ToyMachine,
            &[3],
            &ToyMachine.inputs(),
            &SearchLimits::default(),
        )
        .unwrap();
        assert_eq!(r.r_max, 1);
        assert_eq!(r.bits(), 0.0);
    }

    #[test]
    fn rejects_empty_inputs() {
        let l = SearchLimits::default();
        assert!(max_leakage(&ToyMachine, &[], &[0], &l).is_err());
        assert!(max_leakage(&ToyMachine, &[0, 1], &[], &l).is_err());
        assert!(matches!(
            max_leakage(&ToyMachine, &[0, 1], &[9], &l),
            Err(Error::UnknownInput(_))
        ));
    }

    #[test]
    fn lru_two_way_pair() {
        let set = generate(Policy::Lru, 2, 2, InitialStatus::Filled).unwrap();
        assert_eq!(set.len(), 2);
        let (r, _, _) = cache_leakage(
            &set,
            AttackerKind::Shared,
            2,
            &SearchLimits::for_cache(2, 2),
        )
        .unwrap();
        assert_eq!(r.r_max, 2);
        assert!(r.exact);
    }

    #[test]
    fn node_budget_yields_lower_bound() {
        let set = generate(Policy::Lru, 4, 4, InitialStatus::Empty).unwrap();
        let limits = SearchLimits {
            max_nodes: 3,
            ..SearchLimits::default()
        };
        let (r, _, _) = cache_leakage(&set, AttackerKind::Shared, 4, &limits).unwrap();
        assert!(!r.exact);
        assert!(r.r_max >= 1 && r.r_max <= 16);
    }

    #[test]
    fn bound_examples() {
        let b = |p, a, k, fp| leakage_bound(p, a, k, fp).unwrap();
        use AttackerKind::*;
        assert_eq!(b(Policy::Lru, 4, Shared, 3), LeakageBound::Finite(big(16)));
        assert_eq!(b(Policy::Lru, 2, Shared, 3), LeakageBound::Finite(big(4)));
        assert_eq!(
            b(Policy::Fifo, 4, Shared, 3),
            LeakageBound::Finite(big(120))
        );
        assert_eq!(
            b(Policy::Plru, 4, Disjoint, 4),
            LeakageBound::Finite(big(9))
        );
        assert_eq!(
            b(Policy::Plru, 4, Disjoint, 2),
            LeakageBound::Finite(big(4))
        );
        assert_eq!(
            b(Policy::Plru, 4, Disjoint, 9),
            LeakageBound::Finite(big(9))
        );
        assert_eq!(b(Policy::Lru, 4, Disjoint, 3), LeakageBound::Finite(big(5)));
        assert_eq!(b(Policy::Plru, 4, Shared, 5), LeakageBound::StateCount);
        assert_eq!(b(Policy::Plru, 2, Shared, 5), LeakageBound::Finite(big(4)));
    }

    #[test]
    fn deterministic_age_examples() {
        let s = |ids: &[u16]| {
            CacheSetState::from_lines(&ids.iter().map(|&i| Block(i)).collect::<Vec<_>>()).unwrap()
        };
        assert_eq!(deterministic_ages(&[s(&[0, 1, 2, 3])]), 4);
        assert_eq!(deterministic_ages(&[s(&[0, 1, 4, 5]), s(&[0, 2, 4, 5])]), 1);
        assert_eq!(deterministic_ages(&[s(&[0, 1]), s(&[1, 0])]), 0);
        assert_eq!(deterministic_ages(&[]), 0);
    }

    #[test]
    fn success_probability() {
        assert!((success_probability_bound(1.0 / 256.0, 16).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(success_probability_bound(0.3, 1).unwrap(), 0.3);
        assert_eq!(success_probability_bound(0.5, 10).unwrap(), 1.0);
        assert!(success_probability_bound(0.0, 2).is_err());
        assert!(success_probability_bound(1.5, 2).is_err());
        assert!(success_probability_bound(f64::NAN, 2).is_err());
        assert!(success_probability_bound(0.5, 0).is_err());
    }

    #[test]
    fn composition() {
        assert_eq!(compose_sets(&[big(4), big(2)]).unwrap(), big(8));
        assert_eq!(compose_sets(&[big(7)]).unwrap(), big(7));
        assert_eq!(compose_sets(&[big(16), big(16), big(1)]).unwrap(), big(256));
        assert!(compose_sets(&[]).is_err());
        assert!(compose_sets(&[big(0)]).is_err());
    }

    #[test]
    fn alphabets() {
        let u = BlockUniverse::new(2, 2, 0);
        let (ext, shared) = attacker_alphabet(AttackerKind::Shared, &u, 2, 2).unwrap();
        let names: Vec<&str> = shared.alphabet().iter().map(|&b| ext.name(b)).collect();
        assert_eq!(names, ["b0", "b1", "x0", "x1", "p0", "p1"]);
        let (ext, disjoint) = attacker_alphabet(AttackerKind::Disjoint, &u, 2, 2).unwrap();
        let names: Vec<&str> = disjoint.alphabet().iter().map(|&b| ext.name(b)).collect();
        assert_eq!(names, ["x0", "x1", "p0", "p1"]);
        assert!(
            attacker_alphabet(AttackerKind::Shared, &BlockUniverse::new(2, 1, 0), 2, 2).is_err()
        );
    }

    #[test]
    fn attacker_model_validation() {
        let u = BlockUniverse::new(2, 2, 2);
        assert!(AttackerModel::new(AttackerKind::Shared, vec![Block(0), Block(4)], &u).is_err());
        assert!(AttackerModel::new(AttackerKind::Disjoint, vec![Block(0), Block(4)], &u).is_err());
        assert!(AttackerModel::new(AttackerKind::Disjoint, vec![Block(4)], &u).is_ok());
        assert!(AttackerModel::new(AttackerKind::Disjoint, vec![Block(40)], &u).is_err());
    }

    #[test]
    fn witness_json_shape() {
        let limits = SearchLimits {
            witness: true,
            ..SearchLimits::default()
        };
        let r = max_leakage(&ToyMachine, &[0, 1, 2], &ToyMachine.inputs(), &limits).unwrap();
        let doc = r
            .witness
            .unwrap()
            .to_json(&|i: &u8| i.to_string(), &|o: &u8| o.to_string());
        assert!(doc["input"].is_string());
        assert!(doc["children"].is_object());
    }
}
