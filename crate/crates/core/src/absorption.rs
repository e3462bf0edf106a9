//! Closed-form absorption counts for filled and empty initial states.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::cache::Policy;
use crate::error::{Error, Result};
use crate::statesets::InitialStatus;

/// An exact count together with its base-2 logarithm.
#[derive(Clone, Debug, PartialEq)]
pub struct CountResult {
    pub count: BigUint,
    pub bits: f64,
}

impl CountResult {
    pub fn new(count: BigUint) -> Self {
        let bits = log2(&count);
        Self { count, bits }
    }
}

impl From<u64> for CountResult {
    fn from(v: u64) -> Self {
        Self::new(BigUint::from(v))
    }
}

/// Base-2 logarithm of a positive integer; 0 maps to negative infinity.
pub fn log2(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 1000 {
        n.to_f64().map(f64::log2).unwrap_or(f64::INFINITY)
    } else {
        let shift = bits - 64;
        let top = (n >> shift).to_f64().unwrap_or(f64::INFINITY);
        top.log2() + shift as f64
    }
}

/// `n! / (n - k)!`, the number of ordered arrangements of `k` out of `n`.
pub fn falling_factorial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    ((n - k + 1)..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

fn factorial(n: usize) -> BigUint {
    falling_factorial(n, n)
}

/// States reachable from a cache filled with the victim's `fp` blocks.
pub fn absorb_filled(policy: Policy, assoc: usize, fp: usize) -> Result<CountResult> {
    policy.validate_assoc(assoc)?;
    if fp == 0 {
        return Ok(CountResult::from(1));
    }
    let count = match policy {
        Policy::Lru if fp < assoc => factorial(fp),
        Policy::Fifo if fp <= assoc => BigUint::one(),
        Policy::Fifo if fp == assoc + 1 => BigUint::from(assoc + 1),
        Policy::Plru if fp <= assoc => BigUint::one() << (fp - 1),
        _ => falling_factorial(fp, assoc),
    };
    Ok(CountResult::new(count))
}

/// States reachable from a cache holding none of the victim's `fp` blocks.
pub fn absorb_empty(policy: Policy, assoc: usize, fp: usize) -> Result<CountResult> {
    policy.validate_assoc(assoc)?;
    let mut total = BigUint::zero();
    for k in 0..=fp.min(assoc) {
        total += lambda(policy, k, assoc)? * falling_factorial(fp, k);
    }
    Ok(CountResult::new(total))
}

pub fn absorb(
    policy: Policy,
    assoc: usize,
    fp: usize,
    initial: InitialStatus,
) -> Result<CountResult> {
    match initial {
        InitialStatus::Filled => absorb_filled(policy, assoc, fp),
        InitialStatus::Empty => absorb_empty(policy, assoc, fp),
    }
}

/// Reachable placeholder configurations with exactly `k` victim blocks.
/// Constantly 1 for LRU and FIFO.
pub fn lambda(policy: Policy, k: usize, assoc: usize) -> Result<BigUint> {
    match policy {
        Policy::Plru => lambda_plru(k, assoc),
        _ => {
            policy.validate_assoc(assoc)?;
            check_k(k, assoc)?;
            Ok(BigUint::one())
        }
    }
}

fn check_k(k: usize, assoc: usize) -> Result<()> {
    if k > assoc {
        return Err(Error::OutOfRange {
            what: "k",
            value: k,
            range: format!("0..={assoc}"),
        });
    }
    Ok(())
}

fn lambda_memo() -> &'static Mutex<HashMap<(usize, usize), BigUint>> {
    static MEMO: OnceLock<Mutex<HashMap<(usize, usize), BigUint>>> = OnceLock::new();
    MEMO.get_or_init(Default::default)
}

/// PLRU configuration count, split over the two subtrees of the root.
pub fn lambda_plru(k: usize, assoc: usize) -> Result<BigUint> {
    if assoc == 0 || !assoc.is_power_of_two() {
        return Err(Error::InvalidAssoc {
            assoc,
            policy: "plru",
            reason: "PLRU requires a power of two",
        });
    }
    check_k(k, assoc)?;
    Ok(lambda_rec(k, assoc))
}

fn lambda_rec(k: usize, assoc: usize) -> BigUint {
    if k <= 1 || k == assoc {
        return BigUint::one();
    }
    if let Some(v) = lambda_memo().lock().unwrap().get(&(k, assoc)) {
        return v.clone();
    }
    let half = assoc / 2;
    let lo = 1.max(k.saturating_sub(half));
    let hi = half.min(k - 1);
    let mut sum = BigUint::zero();
    for i in lo..=hi {
        sum += lambda_rec(i, half) * lambda_rec(k - i, half);
    }
    let value = sum * 2u32;
    // A racing thread computes the same value, so either insert wins.
    lambda_memo()
        .lock()
        .unwrap()
        .entry((k, assoc))
        .or_insert_with(|| value.clone());
    value
}
