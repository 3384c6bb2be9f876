//! Binary randomized response and its calibration math.
//!
//! The mechanism keeps a bit with probability `e^eps / (e^eps + 1)` and flips
//! it otherwise, which satisfies eps-LDP: for either output the likelihood
//! ratio between the two inputs is exactly `e^eps`. An observed frequency
//! `p_hat` of noised bits unbiases to
//!
//!   (p_hat - 1/(e^eps + 1)) * (e^eps + 1)/(e^eps - 1),
//!
//! the affine inverse of the forward channel. Unbiased estimates are *not*
//! clamped to [0, 1]: the search protocols compare them against 1/2, and
//! clamping would bias comparisons near the boundary. Clamp only for display.
//!
//! The sample-complexity calculators come from Bernstein's inequality applied
//! to the noised Bernoulli; "log" means natural log throughout.

use rand::Rng;

use crate::error::{invalid, Result};

/// An immutable binary randomized-response channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RRChannel {
    eps: f64,
    retain_prob: f64,
}

impl RRChannel {
    /// A channel with privacy parameter `eps > 0`.
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(invalid(format!("RR channel needs eps > 0, got {eps}")));
        }
        let retain_prob = if eps.is_finite() {
            let e = eps.exp();
            e / (e + 1.0)
        } else {
            1.0
        };
        Ok(Self { eps, retain_prob })
    }

    /// The degenerate eps -> infinity channel (retain probability 1).
    pub fn noiseless() -> Self {
        Self {
            eps: f64::INFINITY,
            retain_prob: 1.0,
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn retain_prob(&self) -> f64 {
        self.retain_prob
    }

    pub fn flip_prob(&self) -> f64 {
        1.0 - self.retain_prob
    }

    /// Randomizes one bit, consuming exactly one uniform draw.
    pub fn flip<R: Rng + ?Sized>(&self, bit: bool, rng: &mut R) -> bool {
        if rng.gen::<f64>() < self.retain_prob {
            bit
        } else {
            !bit
        }
    }

    /// Forward image of a bias: `Pr[output = 1]` when `Pr[input = 1] = p`.
    pub fn forward(&self, p: f64) -> f64 {
        self.retain_prob * p + (1.0 - self.retain_prob) * (1.0 - p)
    }

    /// Unbiases an observed frequency of noised bits (see [`rr_unbias`]).
    pub fn unbias(&self, p_hat: f64) -> f64 {
        if !self.eps.is_finite() {
            return p_hat;
        }
        let e = self.eps.exp();
        (p_hat - 1.0 / (e + 1.0)) * (e + 1.0) / (e - 1.0)
    }
}

/// Standalone unbiasing; errors on `eps <= 0` (the inverse degenerates).
pub fn rr_unbias(p_hat: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid(format!("rr_unbias needs eps > 0, got {eps}")));
    }
    Ok(RRChannel::new(eps)?.unbias(p_hat))
}

/// Flips needed to learn the statistical mean `p` of a coin observed through
/// eps-RR to additive error `alpha` with failure probability `beta`:
///
///   ceil[(2p(1-p)/a^2 + 2e^eps/(a^2 (e^eps-1)^2) + 2(e^eps+1)/(3a(e^eps-1))) ln(1/beta)]
pub fn stat_coin_sample_bound(p: f64, alpha: f64, beta: f64, eps: f64) -> Result<u64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("p={p} outside [0, 1]")));
    }
    check_bound_args(alpha, beta, eps)?;
    let e = eps.exp();
    let val = (2.0 * p * (1.0 - p) / (alpha * alpha)
        + 2.0 * e / (alpha * alpha * (e - 1.0) * (e - 1.0))
        + 2.0 * (e + 1.0) / (3.0 * alpha * (e - 1.0)))
        * (1.0 / beta).ln();
    Ok(val.ceil() as u64)
}

/// Flips needed to learn a coin's *sample* mean through eps-RR; equals
/// [`stat_coin_sample_bound`] with the sampling-variance term dropped (p = 0).
pub fn emp_coin_sample_bound(alpha: f64, beta: f64, eps: f64) -> Result<u64> {
    stat_coin_sample_bound(0.0, alpha, beta, eps)
}

fn check_bound_args(alpha: f64, beta: f64, eps: f64) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha={alpha}, need alpha > 0")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("beta={beta} outside (0, 1)")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("eps={eps}, need finite eps > 0")));
    }
    Ok(())
}
