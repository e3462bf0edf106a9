//! Quantifies how much information cache replacement policies absorb from a
//! victim and how much an adaptive prober can extract again.
//!
//! The cache set is a Mealy machine ([`cache`]), victim state sets come from
//! reachability fixpoints or imported documents ([`statesets`]), absorption
//! has closed forms ([`absorption`]) and extraction is computed by a memoized
//! strategy search ([`extraction`]) over any [`mealy::MealyMachine`].

pub mod absorption;
pub mod cache;
pub mod cli;
pub mod error;
pub mod extraction;
pub mod mealy;
pub mod statesets;

pub use absorption::{absorb, absorb_empty, absorb_filled, lambda_plru, CountResult};
pub use cache::{permutation, Age, Block, CacheMachine, CacheSetState, Observation, Policy};
pub use error::{Error, Result};
pub use extraction::{
    attacker_alphabet, cache_leakage, compose_sets, deterministic_ages, leakage_bound, max_leakage,
    success_probability_bound, AttackerKind, AttackerModel, LeakageBound, PartitionResult,
    SearchLimits, StrategyTree,
};
pub use mealy::{final_knowledge_set, knowledge_set, run_trace, MealyMachine, Probe, ToyMachine};
pub use statesets::{
    generate, initial_empty, initial_filled, reachable_states, BlockUniverse, InitialStatus,
    StateSet,
};
