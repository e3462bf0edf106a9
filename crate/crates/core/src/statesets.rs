//! Victim state sets: initial states, reachable-set fixpoints and the JSON
//! interchange format.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::cache::{Block, CacheMachine, CacheSetState, Policy};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Default ceiling on the number of states a fixpoint may produce.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// Named blocks, laid out as victim blocks, then attacker fillers, then
/// attacker probe blocks that no initial state contains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockUniverse {
    names: Vec<String>,
    victims: usize,
    fillers: usize,
}

impl BlockUniverse {
    /// Default names: `b0..`, `x0..`, `p0..`.
    pub fn new(victims: usize, fillers: usize, fresh: usize) -> Self {
        let names = (0..victims)
            .map(|i| format!("b{i}"))
            .chain((0..fillers).map(|i| format!("x{i}")))
            .chain((0..fresh).map(|i| format!("p{i}")))
            .collect();
        Self {
            names,
            victims,
            fillers,
        }
    }

    pub fn from_names(
        victims: Vec<String>,
        fillers: Vec<String>,
        fresh: Vec<String>,
    ) -> Result<Self> {
        let (nv, nf) = (victims.len(), fillers.len());
        let names: Vec<String> = victims.into_iter().chain(fillers).chain(fresh).collect();
        let mut seen = FxHashSet::default();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "block name '{n}' declared twice"
                )));
            }
        }
        if names.len() > u16::MAX as usize {
            return Err(Error::InvalidConfig("too many blocks".into()));
        }
        Ok(Self {
            names,
            victims: nv,
            fillers: nf,
        })
    }

    /// Adds `count` probe blocks named `p0..`, skipping taken names.
    pub fn with_fresh(&self, count: usize) -> Self {
        let mut out = self.clone();
        let mut i = 0;
        let mut added = 0;
        while added < count {
            let name = format!("p{i}");
            if !out.names.contains(&name) {
                out.names.push(name);
                added += 1;
            }
            i += 1;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn footprint(&self) -> usize {
        self.victims
    }

    pub fn victim_blocks(&self) -> Vec<Block> {
        (0..self.victims).map(|i| Block(i as u16)).collect()
    }

    pub fn filler_blocks(&self) -> Vec<Block> {
        (self.victims..self.victims + self.fillers)
            .map(|i| Block(i as u16))
            .collect()
    }

    pub fn fresh_blocks(&self) -> Vec<Block> {
        (self.victims + self.fillers..self.len())
            .map(|i| Block(i as u16))
            .collect()
    }

    pub fn all_blocks(&self) -> Vec<Block> {
        (0..self.len()).map(|i| Block(i as u16)).collect()
    }

    pub fn is_victim(&self, block: Block) -> bool {
        block.id() < self.victims
    }

    pub fn check(&self, block: Block) -> Result<()> {
        if block.id() < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownBlock(format!("#{}", block.0)))
        }
    }

    pub fn name(&self, block: Block) -> &str {
        self.names
            .get(block.id())
            .map(String::as_str)
            .unwrap_or("?")
    }

    pub fn lookup(&self, name: &str) -> Option<Block> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| Block(i as u16))
    }

    /// `[b0,b1,x0,x1 | uncached: b2,x2]`, youngest first.
    pub fn format_state(&self, state: &CacheSetState) -> String {
        let cached: Vec<&str> = state.lines().iter().map(|&b| self.name(b)).collect();
        let uncached: Vec<&str> = self
            .all_blocks()
            .into_iter()
            .filter(|&b| !state.is_cached(b))
            .map(|b| self.name(b))
            .collect();
        format!("[{} | uncached: {}]", cached.join(","), uncached.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InitialStatus {
    Filled,
    Empty,
}

impl InitialStatus {
    pub fn name(self) -> &'static str {
        match self {
            InitialStatus::Filled => "filled",
            InitialStatus::Empty => "empty",
        }
    }
}

impl fmt::Display for InitialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitialStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "filled" => Ok(InitialStatus::Filled),
            "empty" => Ok(InitialStatus::Empty),
            other => Err(Error::InvalidConfig(format!(
                "unknown initial status '{other}'"
            ))),
        }
    }
}

fn fillers_for(assoc: usize, universe: &BlockUniverse) -> Result<Vec<Block>> {
    let fillers = universe.filler_blocks();
    if fillers.len() < assoc {
        return Err(Error::InsufficientFillers {
            needed: assoc,
            available: fillers.len(),
        });
    }
    Ok(fillers[..assoc].to_vec())
}

/// All victim blocks uncached; fillers at ages `0..A` in id order.
pub fn initial_empty(assoc: usize, universe: &BlockUniverse) -> Result<CacheSetState> {
    CacheSetState::from_lines(&fillers_for(assoc, universe)?)
}

/// Victim blocks in id order take the youngest ages; fillers take the rest.
pub fn initial_filled(assoc: usize, universe: &BlockUniverse) -> Result<CacheSetState> {
    let fillers = fillers_for(assoc, universe)?;
    let lines: Vec<Block> = universe
        .victim_blocks()
        .into_iter()
        .chain(fillers)
        .take(assoc)
        .collect();
    CacheSetState::from_lines(&lines)
}

pub fn initial_state(
    status: InitialStatus,
    assoc: usize,
    universe: &BlockUniverse,
) -> Result<CacheSetState> {
    match status {
        InitialStatus::Filled => initial_filled(assoc, universe),
        InitialStatus::Empty => initial_empty(assoc, universe),
    }
}

/// Possible victim states for one configuration, sorted and duplicate free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSet {
    policy: Policy,
    assoc: usize,
    universe: BlockUniverse,
    states: Vec<CacheSetState>,
}

impl StateSet {
    pub fn new(
        policy: Policy,
        assoc: usize,
        universe: BlockUniverse,
        mut states: Vec<CacheSetState>,
    ) -> Result<Self> {
        policy.validate_assoc(assoc)?;
        for s in &states {
            if s.assoc() != assoc {
                return Err(Error::InvariantViolation(format!(
                    "state of associativity {} in a set of associativity {assoc}",
                    s.assoc()
                )));
            }
            for &b in s.lines() {
                universe.check(b)?;
            }
        }
        states.sort_unstable();
        states.dedup();
        Ok(Self {
            policy,
            assoc,
            universe,
            states,
        })
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn assoc(&self) -> usize {
        self.assoc
    }

    pub fn universe(&self) -> &BlockUniverse {
        &self.universe
    }

    pub fn states(&self) -> &[CacheSetState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, state: &CacheSetState) -> bool {
        self.states.binary_search(state).is_ok()
    }

    pub fn machine(&self) -> Result<CacheMachine> {
        CacheMachine::new(self.policy, self.assoc, self.universe.clone())
    }

    pub fn to_json(&self) -> String {
        let doc = StateSetDoc {
            version: FORMAT_VERSION,
            policy: self.policy,
            assoc: self.assoc,
            victim_blocks: self
                .universe
                .victim_blocks()
                .into_iter()
                .map(|b| self.universe.name(b).to_owned())
                .collect(),
            filler_blocks: self
                .universe
                .filler_blocks()
                .into_iter()
                .map(|b| self.universe.name(b).to_owned())
                .collect(),
            states: self
                .states
                .iter()
                .map(|s| {
                    s.lines()
                        .iter()
                        .map(|&b| self.universe.name(b).to_owned())
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("state set document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StateSetDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if doc.version != FORMAT_VERSION {
            return Err(Error::Parse {
                location: "version".into(),
                message: format!("unsupported version {}", doc.version),
            });
        }
        doc.policy.validate_assoc(doc.assoc)?;
        let universe = BlockUniverse::from_names(doc.victim_blocks, doc.filler_blocks, Vec::new())
            .map_err(|e| Error::Parse {
                location: "victim_blocks/filler_blocks".into(),
                message: e.to_string(),
            })?;
        let mut states = Vec::with_capacity(doc.states.len());
        for (i, row) in doc.states.iter().enumerate() {
            if row.len() != doc.assoc {
                return Err(Error::Parse {
                    location: format!("states[{i}]"),
                    message: format!("expected {} blocks, found {}", doc.assoc, row.len()),
                });
            }
            let mut lines = Vec::with_capacity(row.len());
            for (j, name) in row.iter().enumerate() {
                let block = universe.lookup(name).ok_or_else(|| Error::Parse {
                    location: format!("states[{i}][{j}]"),
                    message: format!("undeclared block '{name}'"),
                })?;
                lines.push(block);
            }
            let state = CacheSetState::from_lines(&lines).map_err(|e| match e {
                Error::InvariantViolation(_) => {
                    Error::InvariantViolation(format!("states[{i}]: a block appears at two ages"))
                }
                other => other,
            })?;
            states.push(state);
        }
        StateSet::new(doc.policy, doc.assoc, universe, states)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateSetDoc {
    version: u32,
    policy: Policy,
    assoc: usize,
    victim_blocks: Vec<String>,
    filler_blocks: Vec<String>,
    states: Vec<Vec<String>>,
}

pub fn export_stateset(set: &StateSet, destination: &Path) -> Result<()> {
    std::fs::write(destination, set.to_json() + "\n")?;
    Ok(())
}

pub fn import_stateset(source: &Path) -> Result<StateSet> {
    StateSet::from_json(&std::fs::read_to_string(source)?)
}

/// Least set containing `start` and closed under accesses to `inputs`.
pub fn reachable_states(
    machine: &CacheMachine,
    start: CacheSetState,
    inputs: &[Block],
    cap: usize,
) -> Result<StateSet> {
    let universe = machine.universe();
    for &b in inputs {
        universe.check(b)?;
        if !universe.is_victim(b) {
            return Err(Error::InvalidConfig(format!(
                "victim inputs may not include attacker block '{}'",
                universe.name(b)
            )));
        }
    }
    machine.check_state(&start)?;

    let hits = machine.hit_table();
    let mut seen = FxHashSet::default();
    let mut queue = VecDeque::new();
    seen.insert(start);
    queue.push_back(start);
    while let Some(state) = queue.pop_front() {
        for &b in inputs {
            let next = state.access(hits, b);
            if seen.insert(next) {
                if seen.len() > cap {
                    return Err(Error::StateCap { cap });
                }
                queue.push_back(next);
            }
        }
    }
    StateSet::new(
        machine.policy(),
        machine.assoc(),
        universe.clone(),
        seen.into_iter().collect(),
    )
}

/// Reachable set for footprint `fp` from a filled or empty start, using the
/// default universe of `fp` victim blocks and `assoc` fillers.
pub fn generate(
    policy: Policy,
    assoc: usize,
    fp: usize,
    initial: InitialStatus,
) -> Result<StateSet> {
    let universe = BlockUniverse::new(fp, assoc, 0);
    let machine = CacheMachine::new(policy, assoc, universe.clone())?;
    let start = initial_state(initial, assoc, &universe)?;
    reachable_states(
        &machine,
        start,
        &universe.victim_blocks(),
        DEFAULT_STATE_CAP,
    )
}
