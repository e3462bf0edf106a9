//! A single cache set modelled as a Mealy machine.
//!
//! A state maps every block of a finite universe to an age in `0..=A`,
//! where `A` is the associativity and age `A` means "not cached". Only the
//! cached part is stored: an age-indexed array of `A` blocks, youngest first.
//! Blocks not in the array are implicitly at age `A`.
//!
//! Hits reorder the cached blocks with the policy's age permutation; misses
//! insert at age 0 and push everything else one age older, evicting the
//! occupant of age `A - 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mealy::MealyMachine;
use crate::statesets::BlockUniverse;

/// Largest associativity the compact state representation can hold.
pub const MAX_ASSOC: usize = 8;

/// Opaque memory block identifier. Ids index into a [`BlockUniverse`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Block(pub u16);

impl Block {
    const PAD: Block = Block(u16::MAX);

    pub fn id(self) -> usize {
        self.0 as usize
    }
}

/// Age of a block in a set; `A` means not cached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Age(pub usize);

impl Age {
    pub fn value(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Fifo,
    Lru,
    Plru,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Fifo, Policy::Lru, Policy::Plru];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Fifo => "fifo",
            Policy::Lru => "lru",
            Policy::Plru => "plru",
        }
    }

    pub fn validate_assoc(self, assoc: usize) -> Result<()> {
        if assoc == 0 || assoc > MAX_ASSOC {
            return Err(Error::InvalidAssoc {
                assoc,
                policy: self.name(),
                reason: "associativity must be between 1 and 8",
            });
        }
        if self == Policy::Plru && !assoc.is_power_of_two() {
            return Err(Error::InvalidAssoc {
                assoc,
                policy: self.name(),
                reason: "PLRU requires a power of two",
            });
        }
        Ok(())
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fifo" => Ok(Policy::Fifo),
            "lru" => Ok(Policy::Lru),
            "plru" => Ok(Policy::Plru),
            other => Err(Error::InvalidConfig(format!("unknown policy '{other}'"))),
        }
    }
}

/// Hit (`H`) or miss (`M`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observation {
    H,
    M,
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Observation::H => "H",
            Observation::M => "M",
        })
    }
}

/// New age of the block at age `target` after a hit on the block at age `base`.
pub fn permutation(policy: Policy, assoc: usize, base: Age, target: Age) -> Result<Age> {
    policy.validate_assoc(assoc)?;
    for age in [base, target] {
        if age.0 >= assoc {
            return Err(Error::InvalidAge { age: age.0, assoc });
        }
    }
    Ok(Age(permute(policy, base.0, target.0)))
}

fn permute(policy: Policy, base: usize, target: usize) -> usize {
    match policy {
        Policy::Fifo => target,
        Policy::Lru => {
            if target == base {
                0
            } else if target < base {
                target + 1
            } else {
                target
            }
        }
        Policy::Plru => plru(base, target),
    }
}

// Age bit i records whether the arrow at tree level i points towards the
// block; the low bit is the root.
fn plru(base: usize, target: usize) -> usize {
    if target == base {
        0
    } else if base.is_multiple_of(2) && !target.is_multiple_of(2) {
        target
    } else if !base.is_multiple_of(2) && target.is_multiple_of(2) {
        target + 1
    } else {
        2 * plru(base / 2, target / 2)
    }
}

/// Precomputed hit permutations for one policy and associativity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HitTable {
    policy: Policy,
    assoc: usize,
    table: [[u8; MAX_ASSOC]; MAX_ASSOC],
}

impl HitTable {
    pub fn new(policy: Policy, assoc: usize) -> Result<Self> {
        policy.validate_assoc(assoc)?;
        let mut table = [[0u8; MAX_ASSOC]; MAX_ASSOC];
        for (base, row) in table.iter_mut().enumerate().take(assoc) {
            for (target, cell) in row.iter_mut().enumerate().take(assoc) {
                *cell = permute(policy, base, target) as u8;
            }
        }
        Ok(Self {
            policy,
            assoc,
            table,
        })
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn assoc(&self) -> usize {
        self.assoc
    }

    #[inline]
    fn get(&self, base: usize, target: usize) -> usize {
        self.table[base][target] as usize
    }
}

/// Cached contents of one cache set, youngest first.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheSetState {
    assoc: u8,
    lines: [Block; MAX_ASSOC],
}

impl CacheSetState {
    /// Builds a state from its age-indexed occupants. Rejects repeated blocks.
    pub fn from_lines(lines: &[Block]) -> Result<Self> {
        let assoc = lines.len();
        if assoc == 0 || assoc > MAX_ASSOC {
            return Err(Error::InvalidAssoc {
                assoc,
                policy: "state",
                reason: "associativity must be between 1 and 8",
            });
        }
        for (i, b) in lines.iter().enumerate() {
            if lines[..i].contains(b) {
                return Err(Error::InvariantViolation(format!(
                    "block #{} holds ages {} and {}",
                    b.0,
                    lines.iter().position(|x| x == b).unwrap_or(0),
                    i
                )));
            }
        }
        let mut out = [Block::PAD; MAX_ASSOC];
        out[..assoc].copy_from_slice(lines);
        Ok(Self {
            assoc: assoc as u8,
            lines: out,
        })
    }

    pub fn assoc(&self) -> usize {
        self.assoc as usize
    }

    pub fn lines(&self) -> &[Block] {
        &self.lines[..self.assoc()]
    }

    pub fn age(&self, block: Block) -> Age {
        Age(self
            .lines()
            .iter()
            .position(|&b| b == block)
            .unwrap_or(self.assoc()))
    }

    pub fn is_cached(&self, block: Block) -> bool {
        self.lines().contains(&block)
    }

    pub fn view(&self, block: Block) -> Observation {
        if self.is_cached(block) {
            Observation::H
        } else {
            Observation::M
        }
    }

    /// Applies one access. `hits.assoc()` must equal `self.assoc()`.
    pub fn access(&self, hits: &HitTable, block: Block) -> Self {
        debug_assert_eq!(hits.assoc(), self.assoc());
        let assoc = self.assoc();
        let mut next = *self;
        match self.lines().iter().position(|&b| b == block) {
            Some(base) => {
                for target in 0..assoc {
                    next.lines[hits.get(base, target)] = self.lines[target];
                }
            }
            None => {
                next.lines.copy_within(0..assoc - 1, 1);
                next.lines[0] = block;
            }
        }
        next
    }

    /// Applies a block renaming to every cached block.
    pub fn rename(&self, mut f: impl FnMut(Block) -> Block) -> Self {
        let mut next = *self;
        for slot in next.lines[..self.assoc()].iter_mut() {
            *slot = f(*slot);
        }
        next
    }
}

impl fmt::Debug for CacheSetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, b) in self.lines().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "#{}", b.0)?;
        }
        f.write_str("]")
    }
}

/// A cache set together with its policy and block universe.
#[derive(Clone, Debug)]
pub struct CacheMachine {
    hits: HitTable,
    universe: BlockUniverse,
}

impl CacheMachine {
    pub fn new(policy: Policy, assoc: usize, universe: BlockUniverse) -> Result<Self> {
        Ok(Self {
            hits: HitTable::new(policy, assoc)?,
            universe,
        })
    }

    pub fn policy(&self) -> Policy {
        self.hits.policy()
    }

    pub fn assoc(&self) -> usize {
        self.hits.assoc()
    }

    pub fn universe(&self) -> &BlockUniverse {
        &self.universe
    }

    pub fn hit_table(&self) -> &HitTable {
        &self.hits
    }

    pub fn check_state(&self, state: &CacheSetState) -> Result<()> {
        if state.assoc() != self.assoc() {
            return Err(Error::InvariantViolation(format!(
                "state has associativity {}, machine has {}",
                state.assoc(),
                self.assoc()
            )));
        }
        for &b in state.lines() {
            self.universe.check(b)?;
        }
        Ok(())
    }

    pub fn update(&self, state: &CacheSetState, block: Block) -> Result<CacheSetState> {
        self.check_state(state)?;
        self.universe.check(block)?;
        Ok(state.access(&self.hits, block))
    }

    pub fn view(&self, state: &CacheSetState, block: Block) -> Result<Observation> {
        self.check_state(state)?;
        self.universe.check(block)?;
        Ok(state.view(block))
    }
}

impl MealyMachine for CacheMachine {
    type State = CacheSetState;
    type Input = Block;
    type Output = Observation;

    fn check_input(&self, input: &Block) -> Result<()> {
        self.universe.check(*input)
    }

    fn upd(&self, state: &CacheSetState, input: &Block) -> CacheSetState {
        state.access(&self.hits, *input)
    }

    fn view(&self, state: &CacheSetState, input: &Block) -> Observation {
        state.view(*input)
    }

    // Blocks cached in no state of the set are interchangeable: swapping two
    // of them fixes the set and maps the alphabet onto itself.
    fn symmetry_class(&self, states: &[CacheSetState], input: &Block) -> Option<u64> {
        if states.iter().all(|s| !s.is_cached(*input)) {
            Some(0)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(ids: &[u16]) -> CacheSetState {
        CacheSetState::from_lines(&ids.iter().map(|&i| Block(i)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn permutation_examples() {
        assert_eq!(
            permutation(Policy::Fifo, 4, Age(2), Age(1)).unwrap(),
            Age(1)
        );
        assert_eq!(permutation(Policy::Lru, 4, Age(2), Age(2)).unwrap(), Age(0));
        assert_eq!(
            permutation(Policy::Plru, 4, Age(1), Age(3)).unwrap(),
            Age(2)
        );
    }

    #[test]
    fn permutation_rejects_uncached_ages() {
        assert!(matches!(
            permutation(Policy::Lru, 4, Age(4), Age(0)),
            Err(Error::InvalidAge { age: 4, .. })
        ));
        assert!(matches!(
            permutation(Policy::Lru, 4, Age(0), Age(4)),
            Err(Error::InvalidAge { .. })
        ));
        assert!(matches!(
            permutation(Policy::Plru, 6, Age(0), Age(1)),
            Err(Error::InvalidAssoc { assoc: 6, .. })
        ));
        assert!(permutation(Policy::Lru, 6, Age(0), Age(1)).is_ok());
    }

    #[test]
    fn permutation_is_bijective() {
        for policy in Policy::ALL {
            for assoc in [2, 4, 8] {
                for base in 0..assoc {
                    let mut image: Vec<usize> = (0..assoc)
                        .map(|t| permutation(policy, assoc, Age(base), Age(t)).unwrap().0)
                        .collect();
                    image.sort_unstable();
                    assert_eq!(
                        image,
                        (0..assoc).collect::<Vec<_>>(),
                        "{policy} A={assoc} base={base}"
                    );
                }
            }
        }
    }

    // c=0 b=1 a=2 x0=3
    #[test]
    fn hit_on_second_youngest() {
        let s = st(&[0, 1, 2, 3]);
        let fifo = HitTable::new(Policy::Fifo, 4).unwrap();
        let lru = HitTable::new(Policy::Lru, 4).unwrap();
        let plru = HitTable::new(Policy::Plru, 4).unwrap();
        assert_eq!(s.access(&fifo, Block(1)), s);
        assert_eq!(s.access(&lru, Block(1)), st(&[1, 0, 2, 3]));
        assert_eq!(s.access(&plru, Block(1)), st(&[1, 0, 3, 2]));
    }

    #[test]
    fn miss_inserts_and_evicts() {
        let lru = HitTable::new(Policy::Lru, 4).unwrap();
        let s = st(&[10, 11, 12, 13]);
        let next = s.access(&lru, Block(0));
        assert_eq!(next, st(&[0, 10, 11, 12]));
        assert_eq!(next.age(Block(13)), Age(4));
        assert_eq!(next.age(Block(0)), Age(0));
    }

    #[test]
    fn view_hits_and_misses() {
        let s = st(&[0, 1, 2, 3]);
        assert_eq!(s.view(Block(0)), Observation::H);
        assert_eq!(s.view(Block(3)), Observation::H);
        assert_eq!(s.view(Block(7)), Observation::M);
    }

    #[test]
    fn from_lines_rejects_duplicates() {
        assert!(matches!(
            CacheSetState::from_lines(&[Block(0), Block(1), Block(1)]),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn machine_rejects_unknown_blocks() {
        let u = BlockUniverse::new(2, 4, 0);
        let m = CacheMachine::new(Policy::Lru, 4, u.clone()).unwrap();
        let s = crate::statesets::initial_empty(4, &u).unwrap();
        assert!(matches!(
            m.update(&s, Block(99)),
            Err(Error::UnknownBlock(_))
        ));
        assert!(matches!(m.view(&s, Block(99)), Err(Error::UnknownBlock(_))));
        assert_eq!(m.view(&s, Block(0)).unwrap(), Observation::M);
    }
}
