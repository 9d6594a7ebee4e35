//! Per-letter optimality checks shared by the finite- and infinite-horizon
//! verifiers.
//!
//! For a candidate value `v` at state `b_prev` and per-letter right-hand
//! sides `rhs(a)`, a policy row is optimal iff `rhs(a) = v` for every letter
//! in its support and `rhs(a) <= v` for the others.

use serde::Serialize;

use crate::channel::UnitMemoryChannel;
use crate::constrained::CostFunction;
use crate::info::letter_divergences;

/// Policy mass at or below this counts as `pi(a | b) = 0`.
pub const SUPPORT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct LetterCheck {
    pub input: usize,
    pub rhs: f64,
    pub on_support: bool,
    pub violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateCheck {
    /// Stage index for finite-horizon checks.
    pub stage: Option<usize>,
    pub b_prev: usize,
    /// The candidate value the letters are compared against.
    pub value: f64,
    pub letters: Vec<LetterCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub passed: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub per_state: Vec<StateCheck>,
}

impl ConditionReport {
    pub(crate) fn from_states(per_state: Vec<StateCheck>, tolerance: f64) -> Self {
        let worst_violation = per_state
            .iter()
            .flat_map(|s| s.letters.iter().map(|l| l.violation))
            .fold(0.0, f64::max);
        ConditionReport {
            passed: worst_violation <= tolerance,
            worst_violation,
            tolerance,
            per_state,
        }
    }
}

pub(crate) fn check_state(stage: Option<usize>, b_prev: usize, value: f64, weights: &[f64], rhs: &[f64]) -> StateCheck {
    let letters = rhs
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(input, (&r, &w))| {
            let on_support = w > SUPPORT_EPS;
            let raw = if on_support {
                (r - value).abs()
            } else {
                (r - value).max(0.0)
            };
            LetterCheck {
                input,
                rhs: r,
                on_support,
                violation: if raw.is_nan() { f64::INFINITY } else { raw },
            }
        })
        .collect();
    StateCheck {
        stage,
        b_prev,
        value,
        letters,
    }
}

/// Lagrangian penalty `s * gamma(a, b_prev)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Penalty<'a> {
    pub multiplier: f64,
    pub cost: &'a CostFunction,
}

/// Continuation-plus-penalty bias per letter:
/// `sum_b V(b) P(b | b_prev, a) - s gamma(a, b_prev)`.
pub(crate) fn letter_bias(
    channel: &UnitMemoryChannel,
    b_prev: usize,
    continuation: Option<&[f64]>,
    penalty: Option<Penalty<'_>>,
) -> Vec<f64> {
    (0..channel.input_size())
        .map(|a| {
            let cont = continuation.map_or(0.0, |v| channel.row(b_prev, a).iter().zip(v).map(|(p, x)| p * x).sum());
            let pen = penalty.map_or(0.0, |p| p.multiplier * p.cost.get(b_prev, a));
            cont - pen
        })
        .collect()
}

/// Full per-letter right-hand side: divergence under `weights` plus bias.
pub(crate) fn letter_rhs(
    channel: &UnitMemoryChannel,
    b_prev: usize,
    weights: &[f64],
    continuation: Option<&[f64]>,
    penalty: Option<Penalty<'_>>,
) -> Vec<f64> {
    let d = letter_divergences(channel, b_prev, weights);
    let bias = letter_bias(channel, b_prev, continuation, penalty);
    d.iter().zip(&bias).map(|(d, c)| d + c).collect()
}
