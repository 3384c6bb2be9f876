//! Shuffle-model amplification and the batched shuffled binary search.
//!
//! A trusted shuffler that uniformly permutes a batch of `m` messages, each
//! produced by the same eps_L-LDP randomizer, yields `(eps, delta)`-shuffle DP
//! for the whole batch with
//!
//!   eps_L = ln(eps^2 * m / (80 ln(4/delta))),
//!
//! valid when `eps <= 1`, `eps > 16 sqrt(ln(4/delta)/m)`, and the expression
//! is positive. Running one binary-search pivot per shuffled batch trades the
//! fully adaptive search's sample efficiency for a much larger per-message
//! budget. All logs are natural.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::metrics::CoinResult;
use crate::naive::{allocate_batches, noisy_binary_search};
use crate::rng::{derive_seed, seeded_rng, stream};
use crate::rr::RRChannel;

/// Result of the amplification calculator. Infeasibility is a value, not a
/// fault: it reports the smallest batch that would work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplification {
    Feasible { eps_local: f64 },
    Infeasible { min_batch_size: u64 },
}

/// Raw formula value `ln(eps^2 * batch / (80 ln(4/delta)))`, when defined.
pub fn eps_local_formula(eps: f64, delta: f64, batch_size: u64) -> Option<f64> {
    let arg = eps * eps * batch_size as f64 / (80.0 * (4.0 / delta).ln());
    (arg > 0.0).then(|| arg.ln())
}

/// Does the amplification lemma's precondition `eps > 16 sqrt(ln(4/delta)/m)` hold?
pub fn lemma_precondition_holds(eps: f64, delta: f64, batch_size: u64) -> bool {
    eps > 16.0 * ((4.0 / delta).ln() / batch_size as f64).sqrt()
}

/// Smallest batch size for which [`amplified_local_eps`] is feasible.
pub fn min_feasible_batch(eps: f64, delta: f64) -> u64 {
    // The precondition eps > 16 sqrt(ln(4/delta)/m) needs m > 256 ln(4/delta)/eps^2,
    // which also makes the formula positive (256/80 > 1).
    let m = (256.0 * (4.0 / delta).ln() / (eps * eps)).floor() as u64 + 1;
    debug_assert!(lemma_precondition_holds(eps, delta, m));
    debug_assert!(eps_local_formula(eps, delta, m).is_some_and(|e| e > 0.0));
    m
}

/// Per-message budget granted by shuffling a batch under a `(eps, delta)`
/// central target.
pub fn amplified_local_eps(eps: f64, delta: f64, batch_size: u64) -> Result<Amplification> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("eps={eps} outside (0, 1]")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta={delta} outside (0, 1]")));
    }
    if batch_size == 0 {
        return Err(invalid("batch_size must be >= 1"));
    }
    let feasible = eps_local_formula(eps, delta, batch_size)
        .is_some_and(|e| e > 0.0 && lemma_precondition_holds(eps, delta, batch_size));
    if feasible {
        Ok(Amplification::Feasible {
            eps_local: eps_local_formula(eps, delta, batch_size).expect("positive"),
        })
    } else {
        Ok(Amplification::Infeasible {
            min_batch_size: min_feasible_batch(eps, delta),
        })
    }
}

/// Uniformly permutes a batch of messages in place (Fisher-Yates).
pub fn shuffle_batch<T, R: Rng + ?Sized>(messages: &mut [T], rng: &mut R) {
    messages.shuffle(rng);
}

/// Binary search with one shuffled batch of fresh users per pivot.
///
/// Each round consumes the next batch of `~n/ceil(log2 B)` users from a random
/// permutation; every user reports `[x <= pivot]` through randomized response
/// at the experiments' per-message budget
/// `eps_RR = ln(eps^2/(80 ln(4/delta)) * (floor(n/ceil(log2 B)) + 1))`,
/// the batch's bits are shuffled, and the aggregator branches on the unbiased
/// mean (which only depends on the bit sum, making the shuffle harmless to
/// utility and valuable to privacy).
pub fn shuffle_nbs(ds: &Dataset, eps: f64, delta: f64, seed: u64) -> Result<CoinResult> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta={delta} outside (0, 1]")));
    }
    let n = ds.n() as u64;
    let b = ds.domain_size();
    let plan = allocate_batches(n, b)?;
    let rounds = plan.sizes().len() as u64;
    let nominal_batch = n / rounds + 1;
    let eps_rr = eps_local_formula(eps, delta, nominal_batch)
        .filter(|&e| e > 0.0)
        .ok_or_else(|| {
            Error::ProtocolInfeasible(format!(
                "amplification needs batches of at least {}, got {}",
                min_feasible_batch(eps.min(1.0), delta),
                nominal_batch
            ))
        })?;
    let channel = RRChannel::new(eps_rr)?;

    let mut perm_rng = seeded_rng(derive_seed(seed, stream::PERMUTATION));
    let mut noise_rng = seeded_rng(derive_seed(seed, stream::NOISE));
    let mut shuffle_rng = seeded_rng(derive_seed(seed, stream::SHUFFLE));

    let mut order: Vec<u32> = ds.values().to_vec();
    order.shuffle(&mut perm_rng);

    let mut cursor = 0usize;
    let mut next_batch = 0usize;
    let mut flips = 0u64;
    let (index, _) = noisy_binary_search(b, |pivot| {
        let size = plan.sizes()[next_batch] as usize;
        next_batch += 1;
        let mut bits: Vec<bool> = order[cursor..cursor + size]
            .iter()
            .map(|&x| channel.flip(x <= pivot, &mut noise_rng))
            .collect();
        cursor += size;
        flips += size as u64;
        shuffle_batch(&mut bits, &mut shuffle_rng);
        let ones = bits.iter().filter(|&&b| b).count();
        Ok(channel.unbias(ones as f64 / size as f64))
    })?;
    Ok(CoinResult {
        index,
        flips_used: flips,
        users_consumed: flips,
    })
}
