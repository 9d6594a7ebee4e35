//! Backward dynamic programming for the n-stage directed-information
//! maximization, with optional Lagrangian cost penalty.
//!
//! Stage `t` maximizes, independently for every previous output `b_prev`,
//!
//! ```text
//! V_t(b_prev) = sup_pi sum_a pi(a) [ D(P(.|b_prev,a) || P^pi(.|b_prev))
//!                                    + sum_b V_{t+1}(b) P(b|b_prev,a)
//!                                    - s gamma(a, b_prev) ]
//! ```
//!
//! with no continuation term at the terminal stage `t = n`.

use serde::Serialize;

use crate::blahut::{maximize_row, InnerOptions};
use crate::channel::{Distribution, InputPolicy, UnitMemoryChannel};
use crate::conditions::{check_state, letter_bias, letter_rhs, ConditionReport, Penalty};
use crate::constrained::CostFunction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct DpSolution {
    pub horizon: usize,
    /// `values[t][b_prev]`, bits, for `t = 0..=horizon`.
    pub values: Vec<Vec<f64>>,
    pub policies: Vec<InputPolicy>,
    /// Lagrange multiplier `s`, present iff the penalized recursion was solved.
    pub multiplier: Option<f64>,
    pub cost: Option<CostFunction>,
    /// Total inner-solver iterations per stage.
    pub inner_iterations: Vec<usize>,
    /// Largest certified per-state gap per stage, bits.
    pub inner_gaps: Vec<f64>,
}

pub(crate) fn penalty_from<'a>(
    channel: &UnitMemoryChannel,
    cost: Option<&'a CostFunction>,
    multiplier: Option<f64>,
) -> Result<Option<Penalty<'a>>> {
    match (cost, multiplier) {
        (None, None) => Ok(None),
        (None, Some(_)) => Err(Error::Validation("a multiplier requires a cost function".into())),
        (Some(cost), s) => {
            cost.check_against(channel)?;
            let multiplier = s.unwrap_or(0.0);
            if !(multiplier >= 0.0 && multiplier.is_finite()) {
                return Err(Error::Validation(format!(
                    "multiplier must be finite and nonnegative, got {multiplier}"
                )));
            }
            Ok(Some(Penalty { multiplier, cost }))
        }
    }
}

/// Solves the finite-horizon recursion for stages `0..=horizon`.
///
/// With a cost present the recursion is the penalized one; a missing
/// multiplier is then taken as `s = 0`.
pub fn solve_finite_horizon(
    channel: &UnitMemoryChannel,
    horizon: usize,
    cost: Option<&CostFunction>,
    multiplier: Option<f64>,
    inner: &InnerOptions,
) -> Result<DpSolution> {
    let penalty = penalty_from(channel, cost, multiplier)?;
    let states = channel.output_size();
    let inputs = channel.input_size();
    let uniform = vec![1.0 / inputs as f64; inputs];

    let stages = horizon + 1;
    let mut values = vec![Vec::new(); stages];
    let mut policies = vec![None; stages];
    let mut inner_iterations = vec![0; stages];
    let mut inner_gaps = vec![0.0; stages];

    for t in (0..stages).rev() {
        let continuation = if t == horizon {
            None
        } else {
            Some(values[t + 1].clone())
        };
        let mut stage_values = Vec::with_capacity(states);
        let mut matrix = Vec::with_capacity(states * inputs);
        for b_prev in 0..states {
            let bias = letter_bias(channel, b_prev, continuation.as_deref(), penalty);
            let sol = maximize_row(channel, b_prev, &bias, &uniform, inner)?;
            inner_iterations[t] += sol.iterations;
            inner_gaps[t] = f64::max(inner_gaps[t], sol.gap);
            let value = if penalty.is_none() && t == horizon {
                sol.value.max(0.0)
            } else {
                sol.value
            };
            stage_values.push(value);
            matrix.extend(sol.weights);
        }
        values[t] = stage_values;
        policies[t] = Some(InputPolicy::new(states, inputs, matrix)?.with_stage(t));
    }

    Ok(DpSolution {
        horizon,
        values,
        policies: policies.into_iter().map(|p| p.expect("every stage solved")).collect(),
        multiplier: penalty.map(|p| p.multiplier),
        cost: penalty.map(|p| p.cost.clone()),
        inner_iterations,
        inner_gaps,
    })
}

/// `sum_b V_0(b) mu(b)`.
///
/// For a penalized solution this is the Lagrangian value without the
/// `s (n + 1) kappa` term; callers add it back themselves.
pub fn ftfi_capacity(solution: &DpSolution, initial: &Distribution) -> Result<f64> {
    let v0 = &solution.values[0];
    if initial.len() != v0.len() {
        return Err(Error::DimensionMismatch {
            what: "initial distribution",
            expected: v0.len(),
            found: initial.len(),
        });
    }
    Ok(v0.iter().zip(initial.weights()).map(|(v, m)| v * m).sum())
}

/// Checks the per-letter equality/inequality conditions at every stage and
/// state of `solution`.
pub fn verify_optimality_conditions(
    channel: &UnitMemoryChannel,
    solution: &DpSolution,
    tol: f64,
) -> Result<ConditionReport> {
    if solution.values.iter().any(|v| v.len() != channel.output_size()) {
        return Err(Error::DimensionMismatch {
            what: "value function",
            expected: channel.output_size(),
            found: solution.values.first().map_or(0, Vec::len),
        });
    }
    for p in &solution.policies {
        p.check_against(channel)?;
    }
    let penalty = match (&solution.cost, solution.multiplier) {
        (Some(cost), Some(multiplier)) => Some(Penalty { multiplier, cost }),
        _ => None,
    };

    let mut per_state = Vec::new();
    for t in 0..=solution.horizon {
        let continuation = (t < solution.horizon).then(|| solution.values[t + 1].as_slice());
        let policy = &solution.policies[t];
        for b_prev in 0..channel.output_size() {
            let weights = policy.row(b_prev);
            let rhs = letter_rhs(channel, b_prev, weights, continuation, penalty);
            per_state.push(check_state(Some(t), b_prev, solution.values[t][b_prev], weights, &rhs));
        }
    }
    Ok(ConditionReport::from_states(per_state, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NestednessKind {
    Nested,
    NonNested,
    NonNestedTimeInvariant,
}

#[derive(Debug, Clone, Serialize)]
pub struct NestednessVerdict {
    pub kind: NestednessKind,
    /// `max_b V_t(b) - min_b V_t(b)` per stage, bits.
    pub state_spread: Vec<f64>,
    /// Largest sup-norm distance between any stage policy and stage 0's.
    pub policy_spread: f64,
}

/// Classifies a DP solution as nested, non-nested, or non-nested with
/// time-invariant policies, by direct inspection.
pub fn classify_non_nested(solution: &DpSolution, tol: f64) -> NestednessVerdict {
    let state_spread: Vec<f64> = solution
        .values
        .iter()
        .map(|v| {
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .collect();
    let policy_spread = solution
        .policies
        .iter()
        .map(|p| p.sup_distance(&solution.policies[0]))
        .fold(0.0, f64::max);
    let constant = state_spread.iter().all(|&s| s <= tol);
    let kind = if !constant {
        NestednessKind::Nested
    } else if policy_spread <= tol {
        NestednessKind::NonNestedTimeInvariant
    } else {
        NestednessKind::NonNested
    };
    NestednessVerdict {
        kind,
        state_spread,
        policy_spread,
    }
}
