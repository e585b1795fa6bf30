//! Single-round statistics for a finite sample of `N` pairs processed in
//! `N/2` independent two-pair steps.

use crate::bell::{distill_step, fidelity, success_probability, BellDiagonalState};
use crate::error::{Error, Result};

/// Above this many trials binomial coefficients come from `ln Γ`.
const LGAMMA_THRESHOLD: usize = 500;

/// Largest trial count for which `C(m, k) * m` stays within `u128`.
const EXACT_INT_THRESHOLD: usize = 120;

/// Fidelity assigned to a round in which every step failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnsuccessfulConvention {
    /// A locally prepared pair of fidelity 1/2.
    LoccFloor,
    /// The conditioned failure state of the step.
    Conditional,
}

impl UnsuccessfulConvention {
    pub fn failure_fidelity(self, s: &BellDiagonalState) -> f64 {
        match self {
            Self::LoccFloor => 0.5,
            Self::Conditional => fidelity(&distill_step(s).failure_state),
        }
    }
}

/// Distribution of the number of surviving pairs after one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundStats {
    pub n_pairs: usize,
    pub p_success: f64,
    /// `pmf[j]` is the probability that `j` pairs survive, `j = 0..=N/2`.
    pub pmf: Vec<f64>,
}

fn check_even(n: usize) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidEvenCount(n));
    }
    Ok(())
}

/// `C(m, k)` as a float, from exact integers up to `m = 120`.
fn binomial_coefficient(m: usize, k: usize) -> f64 {
    let k = k.min(m - k);
    if m <= EXACT_INT_THRESHOLD {
        let mut acc: u128 = 1;
        for i in 0..k {
            // acc * (m - i) is divisible by (i + 1) at every step.
            acc = acc * (m - i) as u128 / (i + 1) as u128;
        }
        acc as f64
    } else {
        (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
    }
}

fn ln_binomial(m: usize, k: usize) -> f64 {
    libm::lgamma(m as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((m - k) as f64 + 1.0)
}

/// `Binom(trials, p)` probability mass function.
pub(crate) fn binomial_pmf(trials: usize, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    if p <= 0.0 || q <= 0.0 {
        let mut pmf = vec![0.0; trials + 1];
        pmf[if p <= 0.0 { 0 } else { trials }] = 1.0;
        return pmf;
    }
    if trials <= LGAMMA_THRESHOLD {
        (0..=trials)
            .map(|j| {
                binomial_coefficient(trials, j) * p.powi(j as i32) * q.powi((trials - j) as i32)
            })
            .collect()
    } else {
        let (lp, lq) = (p.ln(), q.ln());
        (0..=trials)
            .map(|j| (ln_binomial(trials, j) + j as f64 * lp + (trials - j) as f64 * lq).exp())
            .collect()
    }
}

pub fn survivor_pmf(n: usize, s: &BellDiagonalState) -> Result<RoundStats> {
    check_even(n)?;
    let p = success_probability(s);
    Ok(RoundStats {
        n_pairs: n,
        p_success: p,
        pmf: binomial_pmf(n / 2, p),
    })
}

/// Round-averaged fidelity: the distilled fidelity unless every step
/// failed, in which case the convention's fallback fidelity.
pub fn avg_fidelity_one_round(
    n: usize,
    s: &BellDiagonalState,
    conv: UnsuccessfulConvention,
) -> Result<f64> {
    check_even(n)?;
    let out = distill_step(s);
    let all_fail = (1.0 - out.p_success).powi((n / 2) as i32);
    let fallback = conv.failure_fidelity(s);
    Ok(all_fail * fallback + (1.0 - all_fail) * fidelity(&out.success_state))
}

/// Continuous sample size at which the round-averaged fidelity equals the
/// input fidelity.
pub fn n_min(s: &BellDiagonalState, conv: UnsuccessfulConvention) -> Result<f64> {
    let a = fidelity(s);
    let out = distill_step(s);
    let distilled = fidelity(&out.success_state);
    if a <= 0.5 || distilled <= a {
        return Err(Error::NotDistillable { fidelity: a });
    }
    let fallback = conv.failure_fidelity(s);
    if fallback >= a {
        return Err(Error::FallbackNotBelowTarget {
            fallback,
            target: a,
        });
    }
    let ratio = (a - distilled) / (fallback - distilled);
    Ok(2.0 * ratio.ln() / (1.0 - out.p_success).ln())
}

/// Smallest even sample size, at least 2, not below `n`.
pub fn round_up_even(n: f64) -> usize {
    let up = n.ceil().max(2.0) as usize;
    up + up % 2
}

/// Largest even integer not above `n` (may be 0).
pub fn round_down_even(n: f64) -> usize {
    let down = n.floor().max(0.0) as usize;
    down - down % 2
}
