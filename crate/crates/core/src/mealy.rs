//! Deterministic Mealy machines, probes and knowledge sets.

use std::fmt::Debug;
use std::hash::Hash;

use crate::error::{Error, Result};

/// Finite deterministic Mealy machine.
///
/// `upd` and `view` are only required to be meaningful for inputs accepted by
/// [`MealyMachine::check_input`]; checked entry points such as [`run_trace`]
/// validate inputs before calling them.
pub trait MealyMachine {
    type State: Clone + Eq + Hash + Ord + Debug;
    type Input: Clone + Eq + Debug;
    type Output: Clone + Eq + Hash + Ord + Debug;

    fn check_input(&self, input: &Self::Input) -> Result<()>;

    fn upd(&self, state: &Self::State, input: &Self::Input) -> Self::State;

    fn view(&self, state: &Self::State, input: &Self::Input) -> Self::Output;

    /// Inputs sharing a class on `states` lead to equivalent searches, so
    /// only one of them needs exploring. `None` means no known symmetry.
    fn symmetry_class(&self, _states: &[Self::State], _input: &Self::Input) -> Option<u64> {
        None
    }
}

/// Alternating sequence of inputs and the observations they produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Probe<I, O> {
    pub steps: Vec<(I, O)>,
}

impl<I, O> Probe<I, O> {
    pub fn empty() -> Self {
        Self { steps: Vec::new() }
    }

    pub fn new(steps: Vec<(I, O)>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Feeds `inputs` to the machine and collects the observations.
pub fn run_trace<M: MealyMachine>(
    machine: &M,
    start: &M::State,
    inputs: &[M::Input],
) -> Result<(M::State, Vec<M::Output>)> {
    for input in inputs {
        machine.check_input(input)?;
    }
    let mut state = start.clone();
    let mut observations = Vec::with_capacity(inputs.len());
    for input in inputs {
        observations.push(machine.view(&state, input));
        state = machine.upd(&state, input);
    }
    Ok((state, observations))
}

// Returns the final state if `start` is coherent with the probe.
fn replay<M: MealyMachine>(
    machine: &M,
    start: &M::State,
    probe: &Probe<M::Input, M::Output>,
) -> Option<M::State> {
    let mut state = start.clone();
    for (input, obs) in &probe.steps {
        if machine.view(&state, input) != *obs {
            return None;
        }
        state = machine.upd(&state, input);
    }
    Some(state)
}

fn check_probe<M: MealyMachine>(machine: &M, probe: &Probe<M::Input, M::Output>) -> Result<()> {
    probe
        .steps
        .iter()
        .try_for_each(|(input, _)| machine.check_input(input))
}

/// Candidates coherent with `probe`, in their original order.
pub fn knowledge_set<M: MealyMachine>(
    machine: &M,
    candidates: &[M::State],
    probe: &Probe<M::Input, M::Output>,
) -> Result<Vec<M::State>> {
    check_probe(machine, probe)?;
    Ok(candidates
        .iter()
        .filter(|s| replay(machine, s, probe).is_some())
        .cloned()
        .collect())
}

/// Images of the coherent candidates under the probe's inputs, sorted and
/// deduplicated.
pub fn final_knowledge_set<M: MealyMachine>(
    machine: &M,
    candidates: &[M::State],
    probe: &Probe<M::Input, M::Output>,
) -> Result<Vec<M::State>> {
    check_probe(machine, probe)?;
    let mut out: Vec<M::State> = candidates
        .iter()
        .filter_map(|s| replay(machine, s, probe))
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// The seven-state machine where inputs and states are both `0..=6`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ToyMachine;

impl ToyMachine {
    pub const SIZE: u8 = 7;

    pub fn states(&self) -> Vec<u8> {
        (0..Self::SIZE).collect()
    }

    pub fn inputs(&self) -> Vec<u8> {
        (0..Self::SIZE).collect()
    }
}

impl MealyMachine for ToyMachine {
    type State = u8;
    type Input = u8;
    type Output = u8;

    fn check_input(&self, input: &u8) -> Result<()> {
        if *input < Self::SIZE {
            Ok(())
        } else {
            Err(Error::UnknownInput(input.to_string()))
        }
    }

    fn upd(&self, state: &u8, input: &u8) -> u8 {
        let (s, sigma) = (*state as i32, *input as i32);
        let next = if s < sigma {
            s + 1
        } else if s <= sigma + 1 {
            s
        } else {
            s - 1
        };
        next as u8
    }

    fn view(&self, state: &u8, input: &u8) -> u8 {
        let (s, sigma) = (*state as i32, *input as i32);
        if s < sigma - 1 {
            0
        } else if s <= sigma + 1 {
            2
        } else {
            1
        }
    }
}
