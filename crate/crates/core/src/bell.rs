//! Bell-diagonal two-qubit states and the closed-form single-step maps of
//! the recurrence (CNOT) distillation protocol.
//!
//! Coefficients are always ordered (Φ⁺, Ψ⁻, Ψ⁺, Φ⁻). The local rotation that
//! exchanges the Ψ⁻ and Φ⁻ weights before the bilateral CNOT is already folded
//! into [`distill_step`]; it is never applied separately at this level.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Tolerance on `a + b + c + d = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Negative coefficients down to this value are treated as rounding noise
/// and clamped to zero.
pub const CLAMP_TOL: f64 = 1e-15;

/// Below this failure probability the unsuccessful branch is considered
/// unreachable.
pub const UNREACHABLE_TOL: f64 = 1e-14;

const NAMES: [&str; 4] = ["a", "b", "c", "d"];

/// A mixture `a Φ⁺ + b Ψ⁻ + c Ψ⁺ + d Φ⁻` of the four Bell projectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellDiagonalState {
    coeffs: [f64; 4],
}

impl BellDiagonalState {
    /// Validates and builds a state. Coefficients in `[-1e-15, 0)` are
    /// clamped to zero and the vector is renormalized.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::from_array([a, b, c, d])
    }

    pub fn from_array(coeffs: [f64; 4]) -> Result<Self> {
        let clamped = clamp(coeffs)?;
        let sum: f64 = clamped.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        if clamped == coeffs {
            return Ok(Self { coeffs });
        }
        Ok(Self {
            coeffs: clamped.map(|x| x / sum),
        })
    }

    /// Builds a state from nonnegative weights of arbitrary positive total.
    /// Used for conditioned post-measurement states whose numerators are
    /// divided by a branch probability.
    pub(crate) fn from_weights(weights: [f64; 4]) -> Result<Self> {
        let clamped = clamp(weights)?;
        let sum: f64 = clamped.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self {
            coeffs: clamped.map(|x| x / sum),
        })
    }

    /// Pure Φ⁺.
    pub fn pure() -> Self {
        Self {
            coeffs: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn maximally_mixed() -> Self {
        Self { coeffs: [0.25; 4] }
    }

    /// Equal Φ⁺/Ψ⁻ mixture with fidelity exactly one half. Reported as the
    /// placeholder failure state when failure has zero probability.
    pub fn locc_floor() -> Self {
        Self {
            coeffs: [0.5, 0.5, 0.0, 0.0],
        }
    }

    pub fn a(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn b(&self) -> f64 {
        self.coeffs[1]
    }

    pub fn c(&self) -> f64 {
        self.coeffs[2]
    }

    pub fn d(&self) -> f64 {
        self.coeffs[3]
    }

    pub fn coefficients(&self) -> [f64; 4] {
        self.coeffs
    }
}

fn clamp(coeffs: [f64; 4]) -> Result<[f64; 4]> {
    let mut out = coeffs;
    for (x, name) in out.iter_mut().zip(NAMES) {
        if !x.is_finite() {
            return Err(Error::NonFinite { name });
        }
        if *x < -CLAMP_TOL {
            return Err(Error::NegativeCoefficient { name, value: *x });
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    Ok(out)
}

/// Four space-separated decimals in (Φ⁺, Ψ⁻, Ψ⁺, Φ⁻) order.
impl fmt::Display for BellDiagonalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.coeffs;
        match f.precision() {
            Some(p) => write!(f, "{a:.p$} {b:.p$} {c:.p$} {d:.p$}"),
            None => write!(f, "{a} {b} {c} {d}"),
        }
    }
}

impl FromStr for BellDiagonalState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parsed: Vec<f64> = s
            .split(|ch: char| ch.is_whitespace() || ch == ',')
            .filter(|tok| !tok.is_empty())
            .map(|tok| tok.parse::<f64>().map_err(|_| Error::NonFinite { name: "token" }))
            .collect::<Result<_>>()?;
        let coeffs: [f64; 4] = parsed
            .try_into()
            .map_err(|_| Error::NotNormalized { sum: f64::NAN })?;
        Self::from_array(coeffs)
    }
}

/// Result of one two-pair distillation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub p_success: f64,
    pub success_state: BellDiagonalState,
    pub failure_state: BellDiagonalState,
    /// False when `1 - p_success` vanishes; `failure_state` is then the
    /// LOCC floor placeholder.
    pub failure_reachable: bool,
}

/// Overlap with Φ⁺.
pub fn fidelity(s: &BellDiagonalState) -> f64 {
    s.a()
}

pub fn werner(fidelity: f64) -> Result<BellDiagonalState> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::OutOfRange {
            name: "A",
            value: fidelity,
            min: 0.0,
            max: 1.0,
        });
    }
    let rest = (1.0 - fidelity) / 3.0;
    Ok(BellDiagonalState {
        coeffs: [fidelity, rest, rest, rest],
    })
}

/// Strictly one coefficient above one half.
pub fn is_distillable(s: &BellDiagonalState) -> bool {
    s.coeffs.iter().any(|&x| x > 0.5)
}

/// Probability that the two target measurements agree.
pub fn success_probability(s: &BellDiagonalState) -> f64 {
    let [a, b, c, d] = s.coeffs;
    (a + b).powi(2) + (c + d).powi(2)
}

/// One step on two identical pairs: success probability and both
/// conditioned states of the kept pair.
pub fn distill_step(s: &BellDiagonalState) -> StepOutcome {
    let [a, b, c, d] = s.coeffs;
    let p = success_probability(s);
    // p >= 1/2 for any normalized state, so the success branch always exists.
    let success_state =
        BellDiagonalState::from_weights([a * a + b * b, 2.0 * c * d, c * c + d * d, 2.0 * a * b])
            .expect("success weights are nonnegative with positive total");

    let q = 1.0 - p;
    let same = a * c + b * d;
    let cross = a * d + b * c;
    let (failure_state, failure_reachable) = if q < UNREACHABLE_TOL || same + cross <= 0.0 {
        (BellDiagonalState::locc_floor(), false)
    } else {
        // 1 - p = 2(ac + bd) + 2(ad + bc); c mirrors a and d mirrors b.
        let total = 2.0 * (same + cross);
        let (x, y) = (same / total, cross / total);
        (
            BellDiagonalState {
                coeffs: [x, y, x, y],
            },
            true,
        )
    };

    StepOutcome {
        p_success: p,
        success_state,
        failure_state,
        failure_reachable,
    }
}

/// Average fidelity of one step when a failed step is replaced by a
/// fidelity-one-half pair prepared locally.
pub fn avg_fidelity_single_locc(s: &BellDiagonalState) -> f64 {
    let [a, b, _, _] = s.coeffs;
    a + b * (1.0 - 2.0 * a)
}

/// Average fidelity of one step keeping the conditioned failure state.
pub fn avg_fidelity_single_conditional(s: &BellDiagonalState) -> f64 {
    let [a, b, c, _] = s.coeffs;
    a * a + a * (c - b) + b * (1.0 - c)
}

/// `k`-fold composition of the success branch.
pub fn iterate_map(s: &BellDiagonalState, k: usize) -> BellDiagonalState {
    (0..k).fold(*s, |acc, _| distill_step(&acc).success_state)
}

/// The success-branch states `s, map(s), map²(s), …` up to and including
/// depth `max_depth`.
pub fn success_ladder(s: &BellDiagonalState, max_depth: usize) -> Vec<BellDiagonalState> {
    let mut ladder = Vec::with_capacity(max_depth + 1);
    ladder.push(*s);
    for _ in 0..max_depth {
        let next = distill_step(ladder.last().unwrap()).success_state;
        ladder.push(next);
    }
    ladder
}
