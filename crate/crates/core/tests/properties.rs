use cacheleak::extraction::deterministic_ages;
use cacheleak::statesets::BlockUniverse;
use cacheleak::{
    absorb, absorb_empty, absorb_filled, cache_leakage, generate, leakage_bound, max_leakage,
    permutation, Age, AttackerKind, Block, CacheMachine, CacheSetState, InitialStatus,
    LeakageBound, MealyMachine, Observation, Policy, SearchLimits, StateSet,
};
use num_bigint::BigUint;
use proptest::prelude::*;

const UNIVERSE: u16 = 12;

fn policy() -> impl Strategy<Value = Policy> {
    prop::sample::select(Policy::ALL.to_vec())
}

fn initial() -> impl Strategy<Value = InitialStatus> {
    prop::sample::select(vec![InitialStatus::Filled, InitialStatus::Empty])
}

fn kind() -> impl Strategy<Value = AttackerKind> {
    prop::sample::select(vec![AttackerKind::Shared, AttackerKind::Disjoint])
}

/// A state over blocks `0..UNIVERSE` together with an access sequence.
fn state_and_accesses(assoc: usize) -> impl Strategy<Value = (Vec<u16>, Vec<u16>)> {
    (
        Just((0..UNIVERSE).collect::<Vec<u16>>()).prop_shuffle(),
        prop::collection::vec(0..UNIVERSE, 0..40),
    )
        .prop_map(move |(perm, seq)| (perm[..assoc].to_vec(), seq))
}

fn blocks(ids: &[u16]) -> Vec<Block> {
    ids.iter().map(|&b| Block(b)).collect()
}

fn machine(policy: Policy, assoc: usize) -> CacheMachine {
    CacheMachine::new(policy, assoc, BlockUniverse::new(0, UNIVERSE as usize, 0)).unwrap()
}

/// Explicit PLRU tree: one arrow per inner node (heap order) and one block
/// per leaf. An arrow bit of 1 points to the right child.
struct PlruTree {
    arrows: Vec<u8>,
    leaves: Vec<u16>,
}

impl PlruTree {
    fn levels(&self) -> usize {
        self.leaves.len().trailing_zeros() as usize
    }

    fn path(&self, leaf: usize) -> Vec<(usize, u8)> {
        let levels = self.levels();
        (0..levels)
            .map(|level| {
                let node = (1 << level) + (leaf >> (levels - level));
                let dir = ((leaf >> (levels - level - 1)) & 1) as u8;
                (node, dir)
            })
            .collect()
    }

    fn access(&mut self, block: u16) {
        let leaf = match self.leaves.iter().position(|&b| b == block) {
            Some(leaf) => leaf,
            None => {
                let mut node = 1;
                for _ in 0..self.levels() {
                    node = 2 * node + self.arrows[node] as usize;
                }
                let leaf = node - self.leaves.len();
                self.leaves[leaf] = block;
                leaf
            }
        };
        for (node, dir) in self.path(leaf) {
            self.arrows[node] = 1 - dir;
        }
    }

    fn age(&self, leaf: usize) -> usize {
        self.path(leaf)
            .into_iter()
            .enumerate()
            .map(|(level, (node, dir))| ((self.arrows[node] == dir) as usize) << level)
            .sum()
    }

    fn as_state(&self) -> CacheSetState {
        let mut lines = vec![Block(0); self.leaves.len()];
        for (leaf, &b) in self.leaves.iter().enumerate() {
            lines[self.age(leaf)] = Block(b);
        }
        CacheSetState::from_lines(&lines).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn permutations_are_bijections(policy in policy(), exp in 0u32..=3, base_seed in 0usize..8) {
        let assoc = 1usize << exp;
        let base = base_seed % assoc;
        let mut image: Vec<usize> = (0..assoc)
            .map(|t| permutation(policy, assoc, Age(base), Age(t)).unwrap().value())
            .collect();
        if policy != Policy::Fifo {
            prop_assert_eq!(image[base], 0);
        }
        image.sort_unstable();
        prop_assert_eq!(image, (0..assoc).collect::<Vec<_>>());
    }

    #[test]
    fn plru_ages_follow_the_tree(
        exp in 1u32..=3,
        arrows in prop::collection::vec(0u8..=1, 8),
        (lines, seq) in state_and_accesses(8),
    ) {
        let assoc = 1usize << exp;
        let mut tree = PlruTree { arrows: arrows[..assoc].to_vec(), leaves: lines[..assoc].to_vec() };
        let m = machine(Policy::Plru, assoc);
        let mut state = tree.as_state();
        for b in seq {
            tree.access(b);
            state = m.update(&state, Block(b)).unwrap();
            prop_assert_eq!(state, tree.as_state());
        }
    }

    #[test]
    fn updates_preserve_the_state_invariant(policy in policy(), (assoc, (lines, seq)) in
        (1usize..=8).prop_flat_map(|a| (Just(a), state_and_accesses(a))))
    {
        prop_assume!(policy != Policy::Plru || assoc.is_power_of_two());
        let m = machine(policy, assoc);
        let mut state = CacheSetState::from_lines(&blocks(&lines)).unwrap();
        for b in seq {
            let b = Block(b);
            let next = m.update(&state, b).unwrap();
            prop_assert!(m.check_state(&next).is_ok());
            prop_assert!(CacheSetState::from_lines(next.lines()).is_ok());
            prop_assert!(next.is_cached(b));
            if state.is_cached(b) {
                let mut before = state.lines().to_vec();
                let mut after = next.lines().to_vec();
                before.sort();
                after.sort();
                prop_assert_eq!(before, after);
                match policy {
                    Policy::Fifo => prop_assert_eq!(next, state),
                    _ => prop_assert_eq!(next.age(b), Age(0)),
                }
            } else {
                prop_assert_eq!(next.age(b), Age(0));
                prop_assert_eq!(&next.lines()[1..], &state.lines()[..assoc - 1]);
            }
            state = next;
        }
    }

    #[test]
    fn updates_are_data_independent(
        policy in policy(),
        exp in 0u32..=3,
        perm in Just((0..UNIVERSE).collect::<Vec<u16>>()).prop_shuffle(),
        (lines, seq) in state_and_accesses(8),
    ) {
        let assoc = 1usize << exp;
        let m = machine(policy, assoc);
        let rename = |b: Block| Block(perm[b.0 as usize]);
        let mut state = CacheSetState::from_lines(&blocks(&lines[..assoc])).unwrap();
        let mut renamed = state.rename(rename);
        for b in seq {
            let b = Block(b);
            prop_assert_eq!(m.view(&state, b), m.view(&renamed, rename(b)));
            state = m.update(&state, b).unwrap();
            renamed = m.update(&renamed, rename(b)).unwrap();
            prop_assert_eq!(state.rename(rename), renamed);
        }
    }

    #[test]
    fn plru_of_two_ways_is_lru((lines, seq) in state_and_accesses(2)) {
        let lru = machine(Policy::Lru, 2);
        let plru = machine(Policy::Plru, 2);
        let mut a = CacheSetState::from_lines(&blocks(&lines)).unwrap();
        let mut b = a;
        for x in seq {
            a = lru.update(&a, Block(x)).unwrap();
            b = plru.update(&b, Block(x)).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn absorption_grows_with_the_footprint(policy in policy(), fp in 0usize..20) {
        let assoc = if policy == Policy::Plru { 4 } else { 5 };
        for init in [InitialStatus::Filled, InitialStatus::Empty] {
            let now = absorb(policy, assoc, fp, init).unwrap().count;
            let next = absorb(policy, assoc, fp + 1, init).unwrap().count;
            prop_assert!(next >= now);
        }
        prop_assert!(absorb_empty(policy, assoc, fp).unwrap().count >= absorb_filled(policy, assoc, fp).unwrap().count);
    }

    #[test]
    fn stateset_documents_round_trip(policy in policy(), exp in 0u32..=2, fp in 0usize..=4,
        init in initial(), keep in prop::collection::vec(any::<bool>(), 64))
    {
        let assoc = 1usize << exp;
        let set = generate(policy, assoc, fp, init).unwrap();
        prop_assert_eq!(&StateSet::from_json(&set.to_json()).unwrap(), &set);
        let subset: Vec<CacheSetState> = set
            .states()
            .iter()
            .zip(keep.iter().cycle())
            .filter(|(_, &k)| k)
            .map(|(s, _)| *s)
            .collect();
        prop_assume!(!subset.is_empty());
        let part = StateSet::new(policy, assoc, set.universe().clone(), subset).unwrap();
        prop_assert_eq!(&StateSet::from_json(&part.to_json()).unwrap(), &part);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn extraction_respects_absorption_and_bounds(policy in policy(), exp in 1u32..=2, fp in 0usize..=4,
        init in initial(), kind in kind())
    {
        let assoc = 1usize << exp;
        let set = generate(policy, assoc, fp, init).unwrap();
        let limits = SearchLimits { witness: true, ..SearchLimits::for_cache(assoc, fp) };
        let (r, machine, _) = cache_leakage(&set, kind, assoc, &limits).unwrap();
        prop_assert!(r.exact);
        prop_assert!(r.r_max as usize <= set.len());
        let absorbed = absorb(policy, assoc, fp, init).unwrap();
        prop_assert!(r.bits() <= absorbed.bits + 1e-12);
        if let LeakageBound::Finite(b) = leakage_bound(policy, assoc, kind, fp).unwrap() {
            prop_assert!(BigUint::from(r.r_max) <= b);
        }
        // Partition law.
        let w = r.witness.as_ref().unwrap();
        let classes = w.classify(&machine, set.states());
        prop_assert_eq!(classes.len() as u64, r.r_max);
        let mut seen: Vec<CacheSetState> = classes.values().flatten().copied().collect();
        seen.sort();
        prop_assert_eq!(seen.as_slice(), set.states());
        // Depleted leaves have a single final state, hence assoc deterministic ages.
        if policy != Policy::Plru {
            for class in classes.values() {
                let finals: Vec<CacheSetState> = class.iter().map(|s| run(&machine, w, *s)).collect();
                let mut unique = finals.clone();
                unique.sort();
                unique.dedup();
                prop_assert_eq!(deterministic_ages(&unique), assoc);
            }
        }
    }

    #[test]
    fn renaming_victim_blocks_keeps_extraction(policy in policy(), fp in 1usize..=4, init in initial(),
        kind in kind(), perm in Just((0..4u16).collect::<Vec<_>>()).prop_shuffle())
    {
        let set = generate(policy, 2, fp, init).unwrap();
        let sigma: Vec<u16> = perm.iter().copied().filter(|&p| (p as usize) < fp).collect();
        let rename = |b: Block| if (b.0 as usize) < fp { Block(sigma[b.0 as usize]) } else { b };
        let states: Vec<CacheSetState> = set.states().iter().map(|s| s.rename(rename)).collect();
        let renamed = StateSet::new(policy, 2, set.universe().clone(), states).unwrap();
        let l = SearchLimits::for_cache(2, fp);
        let (a, _, _) = cache_leakage(&set, kind, 2, &l).unwrap();
        let (b, _, _) = cache_leakage(&renamed, kind, 2, &l).unwrap();
        prop_assert_eq!(a.r_max, b.r_max);
    }

    #[test]
    fn repeating_a_deterministic_block_keeps_the_count(lru in any::<bool>(), fp in 2usize..=6,
        init in initial(), probe in prop::collection::vec((0usize..16, any::<bool>()), 0..12))
    {
        let policy = if lru { Policy::Lru } else { Policy::Fifo };
        let assoc = 4;
        let set = generate(policy, assoc, fp, init).unwrap();
        let (universe, attacker) =
            cacheleak::attacker_alphabet(AttackerKind::Shared, set.universe(), assoc, assoc).unwrap();
        let m = CacheMachine::new(policy, assoc, universe).unwrap();
        let alphabet = attacker.alphabet();
        // Follow a random branch of a random probe.
        let mut current: Vec<CacheSetState> = set.states().to_vec();
        for (pick, want_hit) in probe {
            let b = alphabet[pick % alphabet.len()];
            let want = if want_hit { Observation::H } else { Observation::M };
            let branch: Vec<CacheSetState> =
                current.iter().filter(|s| MealyMachine::view(&m, s, &b) == want).copied().collect();
            let chosen = if branch.is_empty() { current.clone() } else { branch };
            current = chosen.iter().map(|s| m.upd(s, &b)).collect();
            current.sort();
            current.dedup();
        }
        let n = deterministic_ages(&current);
        for age in 0..n {
            let b = current[0].lines()[age];
            let next: Vec<CacheSetState> = current.iter().map(|s| m.upd(s, &b)).collect();
            prop_assert_eq!(deterministic_ages(&next), n);
        }
    }
}

fn run(
    machine: &CacheMachine,
    tree: &cacheleak::StrategyTree<Block, Observation>,
    mut state: CacheSetState,
) -> CacheSetState {
    let mut node = tree;
    while let Some(input) = node.input {
        let o = MealyMachine::view(machine, &state, &input);
        state = machine.upd(&state, &input);
        match node.children.get(&o) {
            Some(child) => node = child,
            None => break,
        }
    }
    state
}

#[test]
fn toy_partition_law_over_restricted_alphabets() {
    use cacheleak::ToyMachine;
    for mask in 1u32..(1 << 7) {
        let inputs: Vec<u8> = (0..7).filter(|i| mask & (1 << i) != 0).collect();
        let limits = SearchLimits {
            witness: true,
            ..SearchLimits::default()
        };
        let r = max_leakage(&ToyMachine, &ToyMachine.states(), &inputs, &limits).unwrap();
        let classes = r
            .witness
            .unwrap()
            .classify(&ToyMachine, &ToyMachine.states());
        assert_eq!(classes.len() as u64, r.r_max);
        assert_eq!(classes.values().map(Vec::len).sum::<usize>(), 7);
    }
}
