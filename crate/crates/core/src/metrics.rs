//! Success predicate and quantile-error metric, in exact arithmetic.

use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::rational::Rational;

/// Outcome of one protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoinResult {
    /// Returned coin index in `[0, B]`. Index 0 means "the crossing lies left
    /// of the whole domain" (e.g. more than half the mass sits on value 1).
    pub index: u32,
    pub flips_used: u64,
    pub users_consumed: u64,
}

/// The protocols the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Bayess,
    Naive,
    Hierarchical,
    ShuffleNaive,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Bayess => "bayess",
            Self::Naive => "naive",
            Self::Hierarchical => "hier",
            Self::ShuffleNaive => "shuffle-naive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bayess" => Ok(Self::Bayess),
            "naive" => Ok(Self::Naive),
            "hier" | "hierarchical" => Ok(Self::Hierarchical),
            "shuffle-naive" | "shuffle_naive" => Ok(Self::ShuffleNaive),
            other => Err(invalid(format!("unknown protocol {other:?}"))),
        }
    }
}

/// One trial's CSV row.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub protocol: Protocol,
    pub seed: u64,
    pub trial: u64,
    pub n: usize,
    pub b: u32,
    pub eps: f64,
    pub delta: f64,
    pub alpha_test: Rational,
    /// Returned index, or `None` when the protocol was infeasible.
    pub m_tilde: Option<u32>,
    pub abs_error: Option<Rational>,
    pub success: bool,
    pub users_consumed: u64,
    pub reason: String,
}

/// Is `m` a `(tau, alpha)`-good coin: does the CDF bracket `[F(m), F(m+1)]`
/// intersect the open interval `(tau - alpha, tau + alpha)`?
///
/// Since `F(m) <= F(m+1)` this is equivalent to the pair of strict
/// inequalities `F(m) < tau + alpha` and `F(m+1) > tau - alpha`, which is the
/// form evaluated here (exactly, in integer arithmetic). `m` may be 0; the
/// bracket upper end uses `F(B) = 1` when `m = B - 1`.
pub fn is_good_coin(ds: &Dataset, m: u32, tau: Rational, alpha: Rational) -> Result<bool> {
    if m >= ds.domain_size() {
        return Err(invalid(format!(
            "coin {m} outside [0, {}]",
            ds.domain_size() - 1
        )));
    }
    let lower = ds.empirical_cdf(m)?;
    let upper = ds.empirical_cdf(m + 1)?;
    Ok(lower < tau.add(&alpha) && upper > tau.sub(&alpha))
}

/// The reference answer for the error metric: `max{m : F(m) <= tau}`.
///
/// Always exists in `[0, B-1]` because `F(0) = 0 <= tau` and `F(B) = 1 > tau`
/// for `tau < 1`.
pub fn true_median_coin(ds: &Dataset, tau: Rational) -> u32 {
    debug_assert!(tau > Rational::zero() && tau < Rational::one());
    // F is monotone, so binary-search the last index with F <= tau.
    let (mut lo, mut hi) = (0u32, ds.domain_size() - 1);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if ds.cdf_extended(mid) <= tau {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Scores a returned index: exact absolute CDF error against
/// [`true_median_coin`], plus the good-coin success flag.
///
/// `m_tilde` may be anywhere in `[0, B]`; an index of `B` is scored with the
/// extended CDF (`F(B+1) = 1`) and can never be good for `tau + alpha <= 1`.
pub fn evaluate_trial(
    ds: &Dataset,
    m_tilde: u32,
    tau: Rational,
    alpha_test: Rational,
) -> Result<(Rational, bool)> {
    if m_tilde > ds.domain_size() {
        return Err(invalid(format!(
            "returned index {m_tilde} outside [0, {}]",
            ds.domain_size()
        )));
    }
    let m_true = true_median_coin(ds, tau);
    let abs_error = ds
        .cdf_extended(m_tilde)
        .sub(&ds.cdf_extended(m_true))
        .abs();
    let success = if m_tilde < ds.domain_size() {
        is_good_coin(ds, m_tilde, tau, alpha_test)?
    } else {
        // Bracket [F(B), F(B+1)] = [1, 1].
        ds.cdf_extended(m_tilde) < tau.add(&alpha_test)
    };
    Ok((abs_error, success))
}
