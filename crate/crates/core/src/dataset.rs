//! The sensitive input: an ordered multiset of user values in `[1, B]`.

use crate::error::{invalid, Result};
use crate::rational::Rational;

/// A dataset of `n ≥ 1` user values over the discrete domain `{1, ..., B}`.
///
/// Keeps a sorted copy so empirical CDF queries are `O(log n)`.
#[derive(Debug, Clone)]
pub struct Dataset {
    values: Vec<u32>,
    sorted: Vec<u32>,
    domain_size: u32,
}

impl Dataset {
    pub fn new(values: Vec<u32>, domain_size: u32) -> Result<Self> {
        if domain_size < 2 {
            return Err(invalid(format!("domain size B={domain_size}, need B >= 2")));
        }
        if values.is_empty() {
            return Err(invalid("dataset must contain at least one value"));
        }
        if let Some(&v) = values.iter().find(|&&v| v < 1 || v > domain_size) {
            return Err(invalid(format!("value {v} outside [1, {domain_size}]")));
        }
        let mut sorted = values.clone();
        sorted.sort_unstable();
        Ok(Self {
            values,
            sorted,
            domain_size,
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn domain_size(&self) -> u32 {
        self.domain_size
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// Number of values `<= i`, by binary search on the sorted copy.
    pub fn count_le(&self, i: u32) -> u64 {
        self.sorted.partition_point(|&v| v <= i) as u64
    }

    /// Empirical CDF `F(i) = |{j : x_j <= i}| / n` as an exact rational,
    /// defined on `0 <= i <= B` with `F(0) = 0` and `F(B) = 1`.
    pub fn empirical_cdf(&self, i: u32) -> Result<Rational> {
        if i > self.domain_size {
            return Err(invalid(format!(
                "CDF index {i} outside [0, {}]",
                self.domain_size
            )));
        }
        Rational::new(self.count_le(i) as i64, self.n() as i64)
    }

    /// CDF extended past the domain: `F(i) = 1` for every `i >= B`. Used when
    /// scoring a returned index of `B` (whose bracket upper end is off-domain).
    pub fn cdf_extended(&self, i: u32) -> Rational {
        if i >= self.domain_size {
            Rational::one()
        } else {
            Rational::new(self.count_le(i) as i64, self.n() as i64).expect("n >= 1")
        }
    }
}

/// Target quantile `q`, accuracy `α`, and privacy budget for one estimation task.
#[derive(Debug, Clone)]
pub struct QuantileSpec {
    pub q: Rational,
    pub alpha: Rational,
    pub eps: f64,
    pub delta: f64,
}

impl QuantileSpec {
    pub fn new(q: Rational, alpha: Rational, eps: f64, delta: f64) -> Result<Self> {
        if q <= Rational::zero() || q >= Rational::one() {
            return Err(invalid(format!("quantile q={q} outside (0, 1)")));
        }
        let quarter = Rational::new(1, 4).expect("const");
        if alpha <= Rational::zero() || alpha >= quarter {
            return Err(invalid(format!("alpha={alpha} outside (0, 1/4)")));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(invalid(format!("eps={eps}, need eps > 0")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(invalid(format!("delta={delta} outside [0, 1)")));
        }
        Ok(Self {
            q,
            alpha,
            eps,
            delta,
        })
    }
}

/// Maps continuous raw values onto bucket indices `1..=B` where `B = cuts.len() + 1`.
///
/// Value `v` lands in bucket `i` with `y_{i-1} <= v < y_i` (left-closed,
/// `y_0 = -inf`, `y_B = +inf`); a value exactly on a cut goes to the right
/// bucket.
pub fn bucketize(raw: &[f64], cuts: &[f64]) -> Result<Dataset> {
    if cuts.is_empty() {
        return Err(invalid("need at least one cut"));
    }
    if cuts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("cuts must be strictly increasing"));
    }
    if raw.is_empty() {
        return Err(invalid("no raw values to bucketize"));
    }
    let b = (cuts.len() + 1) as u32;
    let values = raw
        .iter()
        .map(|&v| cuts.partition_point(|&c| v >= c) as u32 + 1)
        .collect();
    Dataset::new(values, b)
}
