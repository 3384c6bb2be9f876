//! Noisy binary search with one batch of private flips per pivot.
//!
//! Classic binary search over the coin domain. Each pivot's CDF value is
//! estimated from the next batch of fresh users, unbiased through the
//! randomized-response inverse, and compared against 1/2. The search hunts the
//! last coin whose (unbiased) estimate stays below 1/2: an estimate `>= 1/2`
//! at the pivot sends the search left (ties count as "already at or past the
//! target"), otherwise right. The returned index is therefore in `[0, B-1]`,
//! with 0 meaning even coin 1 looked at-or-past the target.

use crate::error::{invalid, Error, Result};
use crate::metrics::CoinResult;
use crate::oracle::CoinOracle;

/// Per-pivot user allocation: `ceil(log2 B)` batches covering all n users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    sizes: Vec<u64>,
}

impl BatchPlan {
    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn total(&self) -> u64 {
        self.sizes.iter().sum()
    }
}

/// Splits `n` users into `ceil(log2 B)` batches of base size `floor(n / k)`,
/// distributing the remainder one user at a time starting from the first
/// batch (so larger batches come first).
pub fn allocate_batches(n: u64, domain_size: u32) -> Result<BatchPlan> {
    if domain_size < 2 {
        return Err(invalid("domain size must be >= 2"));
    }
    let k = (domain_size as f64).log2().ceil() as u64;
    let k = k.max(1);
    if n < k {
        return Err(Error::ProtocolInfeasible(format!(
            "need at least {k} users for {k} search steps, got {n}"
        )));
    }
    let base = n / k;
    let extra = n - base * k;
    let sizes = (0..k)
        .map(|i| if i < extra { base + 1 } else { base })
        .collect();
    Ok(BatchPlan { sizes })
}

/// Binary-search skeleton over coins `1..B-1`, generic in how a pivot's CDF
/// value is estimated. Returns `(index, pivots_visited)`.
///
/// Maintains `[lo, hi]` (initially `[0, B-1]`) as the candidate range for the
/// last coin with CDF below 1/2; pivots are the upper midpoints, so at most
/// `ceil(log2 B)` estimates are made and exactly `log2 B` when `B` is a power
/// of two.
pub fn noisy_binary_search<E>(domain_size: u32, mut estimate: E) -> Result<(u32, u32)>
where
    E: FnMut(u32) -> Result<f64>,
{
    let mut lo = 0u32;
    let mut hi = domain_size - 1;
    let mut pivots = 0u32;
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        pivots += 1;
        if estimate(mid)? >= 0.5 {
            hi = mid - 1;
        } else {
            lo = mid;
        }
    }
    Ok((lo, pivots))
}

/// Differentially private noisy binary search: at each pivot, consumes the
/// next batch from `plan`, averages the private flips, and unbiases with the
/// oracle's channel.
pub fn dp_naive_nbs(
    oracle: &mut dyn CoinOracle,
    domain_size: u32,
    plan: &BatchPlan,
) -> Result<CoinResult> {
    if oracle.remaining() < plan.total() {
        return Err(Error::UsersExhausted {
            requested: plan.total(),
            remaining: oracle.remaining(),
        });
    }
    let mut next_batch = 0usize;
    let mut flips = 0u64;
    let (index, _) = noisy_binary_search(domain_size, |pivot| {
        let size = *plan
            .sizes
            .get(next_batch)
            .ok_or_else(|| invalid("batch plan shorter than the search"))?;
        next_batch += 1;
        let mut ones = 0u64;
        for _ in 0..size {
            if oracle.flip(pivot)? {
                ones += 1;
            }
        }
        flips += size;
        let mean = ones as f64 / size as f64;
        Ok(match oracle.channel() {
            Some(ch) => ch.unbias(mean),
            None => mean,
        })
    })?;
    Ok(CoinResult {
        index,
        flips_used: flips,
        users_consumed: flips,
    })
}
