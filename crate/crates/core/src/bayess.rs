//! Adaptive Bayesian screening search for a target-quantile coin.
//!
//! The learner keeps a posterior over which interval between consecutive
//! candidate coins contains the crossing of the target level `tau`. Each round
//! it selects the interval at a fixed posterior quantile `q*`, rounds it to
//! one of its endpoint coins, flips that coin through one fresh user, and
//! reweights multiplicatively:
//!
//! - `q*` maximizes the information capacity of the binary asymmetric channel
//!   with crossover probabilities `tau - alpha` and `tau + alpha`,
//!   `C = max_x H((1-x)(tau-a) + x(tau+a)) - (1-x) H(tau-a) - x H(tau+a)`;
//! - the reweighting factors `d_{y,side}` are the Bayes updates for that
//!   channel, normalized so every update preserves the total weight exactly.
//!
//! A run's value is the *trace*: after enough rounds a `gamma` fraction of all
//! visited intervals are good, so the gamma-quantiles of the sorted trace form
//! a small candidate set that still contains a good coin. The full driver
//! ([`dp_bayess`]) performs two such reductions and then estimates each
//! surviving candidate directly, returning the one whose unbiased estimate
//! crosses 1/2 best.

use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::metrics::CoinResult;
use crate::oracle::{CoinOracle, EmpiricalOracle};
use crate::rng::{derive_seed, seeded_rng, stream};
use crate::rr::RRChannel;
use crate::weights::{DenseWeights, PosteriorWeights, TreeWeights};

/// Above this domain size the posterior lives in a segment tree.
const DENSE_LIMIT: usize = 4096;

/// Query quantile, capacity, and Bayes multipliers of the `(tau, alpha)`
/// binary asymmetric channel.
#[derive(Debug, Clone, Copy)]
pub struct BacParams {
    pub tau: f64,
    pub alpha: f64,
    /// The capacity-achieving selection quantile.
    pub q_star: f64,
    /// Channel capacity in bits.
    pub capacity: f64,
    pub d00: f64,
    pub d01: f64,
    pub d10: f64,
    pub d11: f64,
}

fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// Ternary-searches the concave capacity objective to 1e-12 and derives the
/// multiplicative Bayes weights. Requires `0 < alpha <= min(tau, 1-tau)/2`.
pub fn bac_quantile_and_capacity(tau: f64, alpha: f64) -> Result<BacParams> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid(format!("tau={tau} outside (0, 1)")));
    }
    if !(alpha > 0.0) || alpha > 0.5 * tau.min(1.0 - tau) + 1e-15 {
        return Err(invalid(format!(
            "alpha={alpha} outside (0, min(tau, 1-tau)/2] for tau={tau}"
        )));
    }
    let objective = |x: f64| {
        binary_entropy((1.0 - x) * (tau - alpha) + x * (tau + alpha))
            - (1.0 - x) * binary_entropy(tau - alpha)
            - x * binary_entropy(tau + alpha)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let f1 = objective(m1);
        let f2 = objective(m2);
        if f1 < f2 {
            lo = m1;
        } else if f2 < f1 {
            hi = m2;
        } else {
            lo = m1;
            hi = m2;
        }
    }
    let q = 0.5 * (lo + hi);
    let capacity = objective(q);
    let skew = (2.0 * q - 1.0) * alpha;
    Ok(BacParams {
        tau,
        alpha,
        q_star: q,
        capacity,
        d00: (1.0 - tau - alpha) / (1.0 - tau - skew),
        d01: (1.0 - tau + alpha) / (1.0 - tau - skew),
        d10: (tau + alpha) / (tau + skew),
        d11: (tau - alpha) / (tau + skew),
    })
}

/// Smallest interval index `i` with `W(i) >= q`.
pub fn get_interval_from_quantile<W: PosteriorWeights>(w: &W, q: f64) -> usize {
    w.quantile_index(q)
}

/// Rounds a selected interval to one of its endpoint coins: the left endpoint
/// `i` when the quantile falls in the first `q` fraction of the interval's
/// mass, the right endpoint `i + 1` otherwise.
pub fn round_interval_to_coin<W: PosteriorWeights>(i: usize, w: &W, q: f64) -> usize {
    let frac = (q - w.prefix_sum(i - 1)) / w.weight(i);
    if frac <= q {
        i
    } else {
        i + 1
    }
}

/// One multiplicative posterior update after observing flip result `heads` at
/// the coin rounded from `interval`. The selected interval's weight is split
/// at the query quantile, so the total weight is preserved exactly.
pub fn bayes_update<W: PosteriorWeights>(w: &mut W, interval: usize, heads: bool, par: &BacParams) {
    let (d_left, d_right) = if heads {
        (par.d10, par.d11)
    } else {
        (par.d00, par.d01)
    };
    let k = w.len();
    let w_before = w.prefix_sum(interval - 1);
    let w_through = w.prefix_sum(interval);
    let split = d_left * (par.q_star - w_before) + d_right * (w_through - par.q_star);
    w.mul_range(1, interval - 1, d_left);
    w.mul_range(interval + 1, k, d_right);
    w.set(interval, split);
}

/// The visited-interval trace of one learning run.
#[derive(Debug, Clone)]
pub struct LearnTrace {
    /// Interval indices (1-based within the candidate coin list) in visit order.
    pub visits: Vec<usize>,
}

/// Runs `rounds` Bayesian updates over the intervals of `coins` (a sorted
/// candidate list; interval `i` spans `coins[i-1]..coins[i]`), flipping one
/// fresh user per round. Returns the visit trace.
pub fn bayes_learn<W: PosteriorWeights>(
    oracle: &mut dyn CoinOracle,
    coins: &[u32],
    w: &mut W,
    par: &BacParams,
    rounds: u64,
) -> Result<LearnTrace> {
    debug_assert!(coins.len() >= 2);
    debug_assert_eq!(w.len(), coins.len() - 1);
    let mut visits = Vec::with_capacity(rounds as usize);
    for _ in 0..rounds {
        let j = get_interval_from_quantile(w, par.q_star * w.total());
        let c = round_interval_to_coin(j, w, par.q_star);
        let coin = coins[c - 1];
        let heads = oracle.flip(coin)?;
        bayes_update(w, j, heads, par);
        visits.push(j);
    }
    Ok(LearnTrace { visits })
}

/// Learns for `rounds` flips and keeps only the `gamma`-quantiles of the
/// sorted visit trace: positions `s, 2s, ..., floor(|L|/s)*s` of the sorted
/// trace with stride `s = ceil(gamma * |L|)`. Visited intervals are mapped to
/// their left-endpoint coins, deduplicated, and sorted. At most
/// `floor(1/gamma)` coins survive.
pub fn reduction_to_gamma(
    oracle: &mut dyn CoinOracle,
    coins: &[u32],
    par: &BacParams,
    rounds: u64,
    gamma: f64,
) -> Result<Vec<u32>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("gamma={gamma} outside (0, 1)")));
    }
    if coins.len() < 2 {
        return Ok(coins.to_vec());
    }
    let trace = if coins.len() - 1 <= DENSE_LIMIT {
        let mut w = DenseWeights::uniform(coins.len() - 1);
        bayes_learn(oracle, coins, &mut w, par, rounds)?
    } else {
        let mut w = TreeWeights::uniform(coins.len() - 1);
        bayes_learn(oracle, coins, &mut w, par, rounds)?
    };
    let mut sorted = trace.visits;
    if sorted.is_empty() {
        return Ok(Vec::new());
    }
    sorted.sort_unstable();
    let len = sorted.len();
    let stride = (gamma * len as f64).ceil() as usize;
    let stride = stride.max(1);
    let mut picked: Vec<u32> = (1..=len / stride)
        .map(|i| coins[sorted[i * stride - 1] - 1])
        .collect();
    picked.sort_unstable();
    picked.dedup();
    Ok(picked)
}

/// Estimates each candidate coin with an equal share of `budget` flips and
/// picks the one whose unbiased estimate is closest to 1/2 (ties to the
/// smaller coin). Two crossing-aware refinements keep the answer meaningful at
/// the domain edges: if every estimate is at or above 1/2 the crossing lies
/// left of all candidates and `min - 1` is returned; if every estimate is
/// below 1/2 the largest candidate is returned.
fn closest_to_half(
    oracle: &mut dyn CoinOracle,
    candidates: &[u32],
    budget: u64,
) -> Result<(u32, u64)> {
    debug_assert!(!candidates.is_empty());
    let k = candidates.len() as u64;
    if budget < k {
        return Err(Error::ProtocolInfeasible(format!(
            "final stage has {budget} users for {k} candidate coins"
        )));
    }
    let base = budget / k;
    let extra = budget - base * k;
    let mut flips = 0u64;
    let mut estimates = Vec::with_capacity(candidates.len());
    for (idx, &coin) in candidates.iter().enumerate() {
        let share = base + u64::from((idx as u64) < extra);
        let mut ones = 0u64;
        for _ in 0..share {
            if oracle.flip(coin)? {
                ones += 1;
            }
        }
        flips += share;
        let mean = ones as f64 / share as f64;
        let est = match oracle.channel() {
            Some(ch) => ch.unbias(mean),
            None => mean,
        };
        estimates.push((coin, est));
    }
    if estimates.iter().all(|&(_, e)| e >= 0.5) {
        return Ok((candidates[0] - 1, flips));
    }
    if estimates.iter().all(|&(_, e)| e < 0.5) {
        return Ok((*candidates.last().expect("nonempty"), flips));
    }
    let mut best = estimates[0];
    for &(coin, est) in &estimates[1..] {
        if (est - 0.5).abs() < (best.1 - 0.5).abs() {
            best = (coin, est);
        }
    }
    Ok((best.0, flips))
}

/// Budget split across the two learning stages and the final estimation
/// stage, in the ratios `log B : log log B : 1` (natural logs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetSplit {
    pub learn1: u64,
    pub learn2: u64,
    pub finish: u64,
}

pub fn split_budget(n: u64, domain_size: u32) -> Result<BudgetSplit> {
    let ln_b = (domain_size as f64).ln();
    let ln_ln_b = ln_b.ln();
    let denom = ln_b + ln_ln_b + 1.0;
    let learn1 = (n as f64 * ln_b / denom).floor() as u64;
    let learn2 = (n as f64 * ln_ln_b / denom).floor() as u64;
    if learn1 == 0 || learn1 + learn2 >= n {
        return Err(Error::ProtocolInfeasible(format!(
            "cannot split n={n} users over B={domain_size}"
        )));
    }
    Ok(BudgetSplit {
        learn1,
        learn2,
        finish: n - learn1 - learn2,
    })
}

/// The empirically tuned posterior-update accuracy `0.6 * sqrt(ln B / n)`,
/// clamped into the valid channel range `(0, 1/4]` for `tau = 1/2`.
pub fn update_alpha(n: u64, domain_size: u32) -> f64 {
    (0.6 * ((domain_size as f64).ln() / n as f64).sqrt()).min(0.25)
}

/// Full adaptive median search under local randomized response.
///
/// Stage 1 learns over the whole domain and keeps the `1/ln^2 B` quantiles of
/// the trace. If more than 13 candidates survive, they are padded with the
/// domain extremes and reduced once more at `gamma = 1/13`; otherwise the
/// second stage's budget rolls over to the final stage. The final stage
/// estimates each candidate and returns the best crossing. Consumes at most
/// `n` users in total, one flip each.
pub fn dp_bayess(ds: &Dataset, channel: Option<RRChannel>, seed: u64) -> Result<CoinResult> {
    let n = ds.n() as u64;
    let b = ds.domain_size();
    let mut perm_rng = seeded_rng(derive_seed(seed, stream::PERMUTATION));
    let noise_rng = seeded_rng(derive_seed(seed, stream::NOISE));
    let mut oracle = EmpiricalOracle::new(ds, channel, &mut perm_rng, noise_rng);

    if b == 2 {
        // One interval; just estimate coin 1 with everything.
        let (index, flips) = closest_to_half(&mut oracle, &[1], n)?;
        return Ok(CoinResult {
            index,
            flips_used: flips,
            users_consumed: oracle.users_consumed(),
        });
    }

    let split = split_budget(n, b)?;
    let alpha = update_alpha(n, b);
    let par = bac_quantile_and_capacity(0.5, alpha)?;

    let domain: Vec<u32> = (1..=b).collect();
    let ln_b = (b as f64).ln();
    let gamma1 = 1.0 / (ln_b * ln_b);
    let gamma1 = gamma1.min(0.5);
    let reduced = reduction_to_gamma(&mut oracle, &domain, &par, split.learn1, gamma1)?;
    let reduced = if reduced.is_empty() {
        vec![1, b]
    } else {
        reduced
    };

    let (candidates, final_budget) = if reduced.len() > 13 {
        let mut padded = reduced;
        padded.push(1);
        padded.push(b);
        padded.sort_unstable();
        padded.dedup();
        let r2 = reduction_to_gamma(&mut oracle, &padded, &par, split.learn2, 1.0 / 13.0)?;
        let r2 = if r2.is_empty() { padded } else { r2 };
        (r2, split.finish)
    } else {
        (reduced, split.learn2 + split.finish)
    };

    let (index, _) = closest_to_half(&mut oracle, &candidates, final_budget)?;
    Ok(CoinResult {
        index,
        flips_used: oracle.users_consumed(),
        users_consumed: oracle.users_consumed(),
    })
}
