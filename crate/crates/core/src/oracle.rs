//! One-flip-per-user coin oracles.
//!
//! A protocol sees the dataset only through `flip(j)`: "does the next fresh
//! user's value lie at or below j?", passed through the oracle's randomized
//! response channel. Three backings share the interface:
//!
//! - [`EmpiricalOracle`]: walks a random permutation of a finite population
//!   without replacement. The coin biases drift as users are consumed; the
//!   drift is the quantity bounded by [`drift_tail_bound`] and measured by
//!   [`measure_max_drift`].
//! - [`StatisticalOracle`]: i.i.d. draws from a fixed distribution.
//! - [`AdversarialOracle`]: scripted per-round bias perturbations within
//!   `|p~ - p| <= bound`, for robustness tests.
//!
//! Every flip consumes one unit of budget; exceeding it is an error, not a
//! silent recycle, because reusing a user would break the one-report privacy
//! accounting.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::rr::RRChannel;

pub trait CoinOracle {
    /// Flips coin `j` (1-based, `1 <= j <= B`): one fresh user reports
    /// `[x <= j]` through the channel.
    fn flip(&mut self, coin: u32) -> Result<bool>;

    /// Budget still available.
    fn remaining(&self) -> u64;

    /// The randomized-response channel applied inside `flip`, if any.
    fn channel(&self) -> Option<&RRChannel>;
}

// ---------------------------------------------------------------------------
// Empirical (without replacement)
// ---------------------------------------------------------------------------

pub struct EmpiricalOracle {
    /// (value, original index) in permuted order.
    order: Vec<(u32, usize)>,
    cursor: usize,
    channel: Option<RRChannel>,
    /// Users at original index >= this bound answer without noise (used to
    /// simulate virtual padded users noiselessly when requested).
    noiseless_from: Option<usize>,
    rng: ChaCha8Rng,
    domain_size: u32,
}

impl EmpiricalOracle {
    /// Permutes the dataset with Fisher-Yates driven by `perm_rng`; later
    /// flips draw their channel noise from `noise_rng`.
    pub fn new(
        ds: &Dataset,
        channel: Option<RRChannel>,
        perm_rng: &mut ChaCha8Rng,
        noise_rng: ChaCha8Rng,
    ) -> Self {
        let mut order: Vec<(u32, usize)> =
            ds.values().iter().copied().zip(0..ds.n()).collect();
        order.shuffle(perm_rng);
        Self {
            order,
            cursor: 0,
            channel,
            noiseless_from: None,
            rng: noise_rng,
            domain_size: ds.domain_size(),
        }
    }

    /// As [`new`](Self::new), but users with original index `>= bound` skip
    /// the channel and answer truthfully.
    pub fn with_noiseless_tail(
        ds: &Dataset,
        channel: Option<RRChannel>,
        bound: usize,
        perm_rng: &mut ChaCha8Rng,
        noise_rng: ChaCha8Rng,
    ) -> Self {
        let mut o = Self::new(ds, channel, perm_rng, noise_rng);
        o.noiseless_from = Some(bound);
        o
    }

    /// Original dataset indices of the users consumed so far.
    pub fn consumed_indices(&self) -> Vec<usize> {
        self.order[..self.cursor].iter().map(|&(_, i)| i).collect()
    }

    pub fn users_consumed(&self) -> u64 {
        self.cursor as u64
    }
}

impl CoinOracle for EmpiricalOracle {
    fn flip(&mut self, coin: u32) -> Result<bool> {
        debug_assert!(coin >= 1 && coin <= self.domain_size);
        let (value, orig_idx) = *self.order.get(self.cursor).ok_or(Error::UsersExhausted {
            requested: 1,
            remaining: 0,
        })?;
        self.cursor += 1;
        let bit = value <= coin;
        let noiseless = self.noiseless_from.is_some_and(|b| orig_idx >= b);
        Ok(match (&self.channel, noiseless) {
            (Some(ch), false) => ch.flip(bit, &mut self.rng),
            _ => bit,
        })
    }

    fn remaining(&self) -> u64 {
        (self.order.len() - self.cursor) as u64
    }

    fn channel(&self) -> Option<&RRChannel> {
        self.channel.as_ref()
    }
}

// ---------------------------------------------------------------------------
// Statistical (i.i.d.)
// ---------------------------------------------------------------------------

pub struct StatisticalOracle {
    /// cdf[j-1] = Pr[x <= j]; nondecreasing with last element 1.
    cdf: Vec<f64>,
    budget: u64,
    channel: Option<RRChannel>,
    rng: ChaCha8Rng,
}

impl StatisticalOracle {
    pub fn from_pmf(
        pmf: &[f64],
        budget: u64,
        channel: Option<RRChannel>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if pmf.len() < 2 {
            return Err(invalid("distribution needs a domain of size >= 2"));
        }
        if pmf.iter().any(|&p| p < 0.0) {
            return Err(invalid("negative probability mass"));
        }
        let total: f64 = pmf.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("zero total mass"));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|&p| {
                acc += p / total;
                acc
            })
            .collect();
        *cdf.last_mut().expect("nonempty") = 1.0;
        Ok(Self {
            cdf,
            budget,
            channel,
            rng,
        })
    }

    /// The empirical distribution of a dataset, sampled with replacement.
    pub fn from_dataset(
        ds: &Dataset,
        budget: u64,
        channel: Option<RRChannel>,
        rng: ChaCha8Rng,
    ) -> Self {
        let n = ds.n() as f64;
        let cdf = (1..=ds.domain_size())
            .map(|j| ds.count_le(j) as f64 / n)
            .collect();
        Self {
            cdf,
            budget,
            channel,
            rng,
        }
    }

    /// True flip bias of coin `j` before the channel.
    pub fn bias(&self, coin: u32) -> f64 {
        self.cdf[(coin - 1) as usize]
    }
}

impl CoinOracle for StatisticalOracle {
    fn flip(&mut self, coin: u32) -> Result<bool> {
        if self.budget == 0 {
            return Err(Error::UsersExhausted {
                requested: 1,
                remaining: 0,
            });
        }
        self.budget -= 1;
        let u: f64 = self.rng.gen();
        let x = self.cdf.partition_point(|&c| c < u) as u32 + 1;
        let bit = x <= coin;
        Ok(match &self.channel {
            Some(ch) => ch.flip(bit, &mut self.rng),
            None => bit,
        })
    }

    fn remaining(&self) -> u64 {
        self.budget
    }

    fn channel(&self) -> Option<&RRChannel> {
        self.channel.as_ref()
    }
}

// ---------------------------------------------------------------------------
// Adversarial (test harnesses)
// ---------------------------------------------------------------------------

/// Flips coins whose bias an adversary perturbs round by round, subject to
/// `|p~_j - p_j| <= bound`. The bound is enforced at construction time for the
/// schedule's extremes and asserted again at every flip.
pub struct AdversarialOracle {
    base: Vec<f64>,
    bound: f64,
    schedule: Box<dyn FnMut(u64, u32) -> f64>,
    round: u64,
    budget: u64,
    rng: ChaCha8Rng,
}

impl AdversarialOracle {
    pub fn new(
        base: Vec<f64>,
        bound: f64,
        schedule: Box<dyn FnMut(u64, u32) -> f64>,
        budget: u64,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if base.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("base coin biases must be nondecreasing"));
        }
        if base.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(invalid("base biases outside [0, 1]"));
        }
        if !(bound >= 0.0) {
            return Err(invalid("perturbation bound must be nonnegative"));
        }
        Ok(Self {
            base,
            bound,
            schedule,
            round: 0,
            budget,
            rng,
        })
    }
}

impl CoinOracle for AdversarialOracle {
    fn flip(&mut self, coin: u32) -> Result<bool> {
        if self.budget == 0 {
            return Err(Error::UsersExhausted {
                requested: 1,
                remaining: 0,
            });
        }
        self.budget -= 1;
        self.round += 1;
        let p = self.base[(coin - 1) as usize];
        let delta = (self.schedule)(self.round, coin);
        assert!(
            delta.abs() <= self.bound + 1e-12,
            "adversary exceeded its bound: |{delta}| > {}",
            self.bound
        );
        let p_tilde = (p + delta).clamp(0.0, 1.0);
        Ok(self.rng.gen::<f64>() < p_tilde)
    }

    fn remaining(&self) -> u64 {
        self.budget
    }

    fn channel(&self) -> Option<&RRChannel> {
        None
    }
}

// ---------------------------------------------------------------------------
// Permutation drift
// ---------------------------------------------------------------------------

/// Tail bound on the CDF drift of the remaining suffix after consuming up to
/// half of a population of size `2n` in random order: `min(1, 2 exp(-t^2 n / 2))`.
pub fn drift_tail_bound(n: u64, t: f64) -> f64 {
    (2.0 * (-t * t * n as f64 / 2.0).exp()).min(1.0)
}

/// For each trial: draws a fresh permutation of the dataset and returns the
/// exact maximum of `|p_j^t - p_j^0|` over coins `j` in `[1, B]` and removal
/// counts `t <= n/2`, where `p_j^t` is the CDF of the un-consumed suffix.
///
/// Odd-sized datasets are padded by duplicating the last value so the
/// half-way point is well defined.
pub fn measure_max_drift(ds: &Dataset, trials: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut values = ds.values().to_vec();
    if values.len() % 2 == 1 {
        values.push(*values.last().expect("nonempty"));
    }
    let n = values.len();
    let b = ds.domain_size() as usize;

    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        values.shuffle(rng);
        // counts[j-1] = number of suffix values <= j.
        let mut counts = vec![0i64; b];
        for &v in &values {
            counts[(v - 1) as usize] += 1;
        }
        for j in 1..b {
            counts[j] += counts[j - 1];
        }
        let p0: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();

        let mut max_drift = 0.0f64;
        // Per-value histogram of the suffix, updated as users are removed.
        let mut hist = vec![0i64; b];
        for &v in &values {
            hist[(v - 1) as usize] += 1;
        }
        for t in 1..=n / 2 {
            hist[(values[t - 1] - 1) as usize] -= 1;
            let denom = (n - t) as f64;
            let mut acc = 0i64;
            for j in 0..b {
                acc += hist[j];
                let drift = (acc as f64 / denom - p0[j]).abs();
                if drift > max_drift {
                    max_drift = drift;
                }
            }
        }
        out.push(max_drift);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_seed, seeded_rng, stream};

    fn ds(values: &[u32], b: u32) -> Dataset {
        Dataset::new(values.to_vec(), b).unwrap()
    }

    fn oracle(d: &Dataset, channel: Option<RRChannel>, seed: u64) -> EmpiricalOracle {
        let mut perm = seeded_rng(derive_seed(seed, stream::PERMUTATION));
        let noise = seeded_rng(derive_seed(seed, stream::NOISE));
        EmpiricalOracle::new(d, channel, &mut perm, noise)
    }

    #[test]
    fn noiseless_flips_count_exactly() {
        let d = ds(&[1, 2, 3, 4, 5, 6, 7, 8], 8);
        let mut o = oracle(&d, None, 3);
        let ones = (0..8).filter(|_| o.flip(4).unwrap()).count();
        assert_eq!(ones, 4);
        assert_eq!(o.remaining(), 0);
        assert!(matches!(o.flip(4), Err(Error::UsersExhausted { .. })));
    }

    #[test]
    fn infinite_eps_matches_noiseless_bit_for_bit() {
        let d = ds(&[2, 5, 7, 7, 9, 11], 16);
        let mut a = oracle(&d, None, 9);
        let mut b = oracle(&d, Some(RRChannel::noiseless()), 9);
        for coin in [3u32, 8, 12, 1, 16, 7] {
            assert_eq!(a.flip(coin).unwrap(), b.flip(coin).unwrap());
        }
    }

    #[test]
    fn first_flip_expectation_matches_closed_form() {
        // E[flip(j)] at cursor 0 equals q * e/(1+e) + (1-q)/(1+e) for eps = 1,
        // estimated over 1e5 fresh oracles.
        let d = ds(&[1, 1, 2, 3, 4, 4, 4, 8], 8);
        let coin = 3u32;
        let q = d.count_le(coin) as f64 / d.n() as f64;
        let ch = RRChannel::new(1.0).unwrap();
        let expect = ch.forward(q);
        let reps = 100_000;
        let mut ones = 0u64;
        for seed in 0..reps {
            let mut o = oracle(&d, Some(ch), seed);
            if o.flip(coin).unwrap() {
                ones += 1;
            }
        }
        let freq = ones as f64 / reps as f64;
        let sigma = (expect * (1.0 - expect) / reps as f64).sqrt();
        assert!(
            (freq - expect).abs() <= 4.0 * sigma,
            "freq {freq} vs {expect}"
        );
    }

    #[test]
    fn without_replacement_bookkeeping() {
        let d = ds(&[3, 1, 4, 1, 5, 9, 2, 6], 9);
        let mut o = oracle(&d, Some(RRChannel::new(0.5).unwrap()), 17);
        for _ in 0..8 {
            o.flip(4).unwrap();
        }
        let mut consumed = o.consumed_indices();
        consumed.sort_unstable();
        assert_eq!(consumed, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn noiseless_tail_skips_channel() {
        // All virtual users (index >= 2) hold value 9 = B; their flips at coin
        // 9 must be deterministically 1 even at tiny eps.
        let d = ds(&[1, 1, 9, 9, 9, 9], 9);
        for seed in 0..20 {
            let mut perm = seeded_rng(derive_seed(seed, stream::PERMUTATION));
            let noise = seeded_rng(derive_seed(seed, stream::NOISE));
            let mut o = EmpiricalOracle::with_noiseless_tail(
                &d,
                Some(RRChannel::new(0.01).unwrap()),
                2,
                &mut perm,
                noise,
            );
            for _ in 0..6 {
                let before = o.consumed_indices().len();
                let bit = o.flip(9).unwrap();
                let idx = o.consumed_indices()[before];
                if idx >= 2 {
                    assert!(bit);
                }
            }
        }
    }

    #[test]
    fn statistical_oracle_monotone_in_coin() {
        let pmf = [0.1, 0.3, 0.2, 0.05, 0.15, 0.2];
        let flips = 10_000u64;
        let mut prev = -1.0f64;
        for coin in 1..=6u32 {
            let mut o = StatisticalOracle::from_pmf(
                &pmf,
                flips,
                None,
                seeded_rng(derive_seed(100, coin as u64)),
            )
            .unwrap();
            let ones = (0..flips).filter(|_| o.flip(coin).unwrap()).count();
            let p = ones as f64 / flips as f64;
            let slack = 4.0 * (0.25f64 / flips as f64).sqrt();
            assert!(p >= prev - 2.0 * slack, "coin {coin}: {p} < {prev}");
            prev = p;
        }
    }

    #[test]
    fn adversary_bound_enforced() {
        let base = vec![0.2, 0.4, 0.6, 0.8];
        let o = AdversarialOracle::new(
            base.clone(),
            0.05,
            Box::new(|t, _| if t % 2 == 0 { 0.05 } else { -0.05 }),
            100,
            seeded_rng(5),
        );
        let mut o = o.unwrap();
        for _ in 0..100 {
            o.flip(2).unwrap();
        }
        assert!(AdversarialOracle::new(
            vec![0.5, 0.2],
            0.05,
            Box::new(|_, _| 0.0),
            1,
            seeded_rng(5)
        )
        .is_err());
    }

    #[test]
    #[should_panic(expected = "adversary exceeded its bound")]
    fn adversary_violation_panics() {
        let mut o = AdversarialOracle::new(
            vec![0.2, 0.8],
            0.01,
            Box::new(|_, _| 0.5),
            10,
            seeded_rng(5),
        )
        .unwrap();
        let _ = o.flip(1);
    }

    #[test]
    fn drift_tail_bound_values() {
        assert_eq!(drift_tail_bound(100, 0.0), 1.0);
        let v = drift_tail_bound(800, 0.2);
        assert!((v - 2.0 * (-16.0f64).exp()).abs() < 1e-18, "{v}");
        // Monotone decreasing in both arguments.
        assert!(drift_tail_bound(800, 0.2) < drift_tail_bound(400, 0.2));
        assert!(drift_tail_bound(800, 0.3) < drift_tail_bound(800, 0.2));
    }

    #[test]
    fn constant_dataset_never_drifts() {
        let d = ds(&[5; 40], 8);
        let mut rng = seeded_rng(2);
        for drift in measure_max_drift(&d, 50, &mut rng) {
            assert_eq!(drift, 0.0);
        }
    }

    #[test]
    fn two_user_extreme_drift_is_half() {
        // {1, B}: after one removal the suffix CDF at coin 1 is 0 or 1,
        // so the drift is exactly 1/2 in every permutation.
        let d = ds(&[1, 16], 16);
        let mut rng = seeded_rng(3);
        for drift in measure_max_drift(&d, 20, &mut rng) {
            assert!((drift - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn drift_respects_union_bound_small() {
        // Scaled-down version of the acceptance check: n = 200, B = 8.
        let values: Vec<u32> = (0..200).map(|i| (i % 8) + 1).collect();
        let d = ds(&values, 8);
        let mut rng = seeded_rng(4);
        let drifts = measure_max_drift(&d, 2000, &mut rng);
        for t0 in [0.15, 0.2, 0.3] {
            let emp =
                drifts.iter().filter(|&&m| m >= t0).count() as f64 / drifts.len() as f64;
            let bound = (8.0 * drift_tail_bound(100, t0)).min(1.0);
            assert!(emp <= bound, "t0={t0}: {emp} > {bound}");
        }
    }
}
