//! Reduction from general quantiles to the median by padding.
//!
//! Appending `(1-q)n` copies of 1 and `qn` copies of `B` to a dataset of size
//! `n` produces a set of `2n` values whose CDF at every interior point is
//! `(1-q)/2 + F(y)/2`: its median sits exactly where the original q-quantile
//! sat, so a median solver with accuracy `alpha` yields a `2*alpha`-accurate
//! q-quantile. The padded "virtual" users are simulated like real users by
//! default (they run the same response mechanism), which keeps the privacy
//! analysis of the solver unchanged.

use crate::dataset::{Dataset, QuantileSpec};
use crate::error::Result;
use crate::metrics::CoinResult;
use crate::rational::Rational;

/// Rounds `q` to the nearest multiple of `1/n` (half away from zero) and
/// returns the padded dataset of size `2n`. The rounding shifts the target
/// quantile by at most `1/(2n)`.
pub fn pad_for_quantile(ds: &Dataset, q: Rational) -> Result<Dataset> {
    let n = ds.n() as i64;
    let b = ds.domain_size();
    // k = round(q * n) with exact integer arithmetic.
    let num = q.numer() as i128 * n as i128;
    let den = q.denom() as i128;
    let k = ((2 * num + den) / (2 * den)) as i64;
    let k = k.clamp(0, n) as usize;

    let mut values = ds.values().to_vec();
    values.extend(std::iter::repeat(1).take(ds.n() - k));
    values.extend(std::iter::repeat(b).take(k));
    Dataset::new(values, b)
}

/// Runs a median solver on the padded dataset to answer a general quantile.
///
/// The solver receives the padded dataset together with the index boundary
/// separating real users (below) from virtual ones (at or above); callers that
/// want noiseless virtual reports pass the boundary to the oracle.
///
/// Quantiles within `alpha` of the edges short-circuit to the trivial answers
/// 1 and `B` without consuming any users.
pub fn quantile_via_median<S>(solver: S, ds: &Dataset, spec: &QuantileSpec) -> Result<CoinResult>
where
    S: FnOnce(&Dataset, usize) -> Result<CoinResult>,
{
    if spec.q <= spec.alpha {
        return Ok(CoinResult {
            index: 1,
            flips_used: 0,
            users_consumed: 0,
        });
    }
    if spec.q >= Rational::one().sub(&spec.alpha) {
        return Ok(CoinResult {
            index: ds.domain_size(),
            flips_used: 0,
            users_consumed: 0,
        });
    }
    let padded = pad_for_quantile(ds, spec.q)?;
    solver(&padded, ds.n())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::is_good_coin;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn ds(values: &[u32], b: u32) -> Dataset {
        Dataset::new(values.to_vec(), b).unwrap()
    }

    fn r(s: &str) -> Rational {
        Rational::parse(s).unwrap()
    }

    #[test]
    fn quarter_quantile_pad() {
        let d = ds(&[1, 2, 3, 4], 8);
        let p = pad_for_quantile(&d, r("0.25")).unwrap();
        let mut vals = p.values().to_vec();
        vals.sort_unstable();
        assert_eq!(vals, vec![1, 1, 1, 1, 2, 3, 4, 8]);
        assert_eq!(p.empirical_cdf(1).unwrap(), r("0.5"));
    }

    #[test]
    fn median_pad_counts() {
        let d = ds(&[3, 5, 5, 7, 9, 11], 16);
        let p = pad_for_quantile(&d, r("0.5")).unwrap();
        assert_eq!(p.n(), 12);
        let ones = p.values().iter().filter(|&&v| v == 1).count();
        let tops = p.values().iter().filter(|&&v| v == 16).count();
        assert_eq!((ones, tops), (3, 3));
    }

    #[test]
    fn padding_identity_exhaustive() {
        // Pr_{D_P}[x <= y] = (1-q)/2 + Pr_D[x <= y]/2 for all interior y,
        // exactly, over random small datasets and all integral q = k/n.
        let mut rng = seeded_rng(42);
        for _ in 0..200 {
            let n = rng.gen_range(1..=16) * 2;
            let b = rng.gen_range(3..=12);
            let values: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=b)).collect();
            let d = ds(&values, b);
            for k in 0..=n {
                let q = Rational::new(k as i64, n as i64).unwrap();
                if q <= Rational::zero() || q >= Rational::one() {
                    continue;
                }
                let p = pad_for_quantile(&d, q).unwrap();
                assert_eq!(p.n(), 2 * n as usize);
                for y in 1..b {
                    let lhs = p.empirical_cdf(y).unwrap();
                    let rhs = Rational::one()
                        .sub(&q)
                        .mul(&r("0.5"))
                        .add(&d.empirical_cdf(y).unwrap().mul(&r("0.5")));
                    assert_eq!(lhs, rhs, "n={n} b={b} k={k} y={y}");
                }
            }
        }
    }

    #[test]
    fn q_rounds_to_grid() {
        // q = 0.3 on n = 4 rounds to 1/4: one copy of B appended.
        let d = ds(&[2, 2, 3, 3], 4);
        let p = pad_for_quantile(&d, r("0.3")).unwrap();
        let tops = p.values().iter().filter(|&&v| v == 4).count();
        assert_eq!(tops, 1);
    }

    #[test]
    fn trivial_edges_skip_solver() {
        let d = ds(&[2, 3], 4);
        let spec = QuantileSpec::new(r("0.03"), r("0.04"), 1.0, 0.0).unwrap();
        let res = quantile_via_median(|_, _| unreachable!(), &d, &spec).unwrap();
        assert_eq!((res.index, res.users_consumed), (1, 0));
        let spec = QuantileSpec::new(r("0.97"), r("0.04"), 1.0, 0.0).unwrap();
        let res = quantile_via_median(|_, _| unreachable!(), &d, &spec).unwrap();
        assert_eq!((res.index, res.users_consumed), (4, 0));
    }

    #[test]
    fn median_case_passes_padded_set_through() {
        let d = ds(&[2, 5, 7, 8], 8);
        let spec = QuantileSpec::new(r("0.5"), r("0.1"), 1.0, 0.0).unwrap();
        let res = quantile_via_median(
            |padded, real_n| {
                assert_eq!(real_n, 4);
                assert_eq!(padded.n(), 8);
                Ok(CoinResult {
                    index: 5,
                    flips_used: 8,
                    users_consumed: 8,
                })
            },
            &d,
            &spec,
        )
        .unwrap();
        assert_eq!(res.index, 5);
    }

    #[test]
    fn noiseless_solver_hits_two_alpha_quantile() {
        // A noiseless median solver on the padded set returns an m that is a
        // (q, 2*alpha)-good coin of the original dataset; verified by the
        // brute-force good-coin check.
        let d = ds(&[2, 3, 3, 6, 9, 10, 12, 12], 16);
        let spec = QuantileSpec::new(r("0.25"), r("0.05"), 1.0, 0.0).unwrap();
        let res = quantile_via_median(
            |padded, _| {
                let m = crate::metrics::true_median_coin(padded, r("0.5"));
                Ok(CoinResult {
                    index: m,
                    flips_used: 0,
                    users_consumed: 0,
                })
            },
            &d,
            &spec,
        )
        .unwrap();
        let two_alpha = r("0.1");
        assert!(is_good_coin(&d, res.index, spec.q, two_alpha).unwrap());
    }
}
