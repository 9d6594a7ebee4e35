//! Average-reward solvers for feedback capacity.
//!
//! The gain/bias pair `(J, V)` solves
//!
//! ```text
//! J + V(b_prev) = sup_pi { l(b_prev, pi) + sum_b V(b) P^pi(b | b_prev) }
//! ```
//!
//! where `l` is the per-stage conditional mutual information (minus the
//! cost penalty when a multiplier is given). `J` is the feedback capacity
//! when the Bellman equation has a solution.

use serde::Serialize;

use crate::blahut::{maximize_row, InnerOptions};
use crate::channel::{Distribution, InputPolicy, OutputKernel, UnitMemoryChannel};
use crate::conditions::{check_state, letter_bias, letter_rhs, ConditionReport, Penalty};
use crate::constrained::CostFunction;
use crate::error::{Error, Result};
use crate::finite::penalty_from;
use crate::info::{induced_output_kernel, row_reward};
use crate::linalg;
use crate::markov::{closed_classes, is_irreducible, stationary_distribution};

const REDUCIBLE_HINT: &str = "; policy iteration needs an irreducible output chain, use relative_value_iteration \
     and check the result with generalized_dp_check";

/// Stopping rules for the average-reward solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfiniteOptions {
    /// Span tolerance (value iteration) or policy sup-norm tolerance
    /// (policy iteration).
    pub tol: f64,
    pub max_iter: usize,
    pub inner: InnerOptions,
}

impl Default for InfiniteOptions {
    fn default() -> Self {
        InfiniteOptions {
            tol: 1e-9,
            max_iter: 100_000,
            inner: InnerOptions {
                tol: 1e-12,
                max_iter: 100_000,
            },
        }
    }
}

impl InfiniteOptions {
    /// Defaults suited to policy iteration.
    pub fn policy_iteration() -> Self {
        InfiniteOptions {
            tol: 1e-9,
            max_iter: 1_000,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InfiniteHorizonSolution {
    /// Average reward `J*`, bits per channel use.
    pub gain: f64,
    /// Relative values, normalized so that `bias[0] = 0`.
    pub bias: Vec<f64>,
    pub policy: InputPolicy,
    pub output_kernel: OutputKernel,
    pub invariant_dist: Option<Distribution>,
    pub irreducible: bool,
    pub iterations: usize,
    /// Span of the last Bellman residual, bits.
    pub span_residual: f64,
    pub multiplier: Option<f64>,
    pub cost: Option<CostFunction>,
    /// Gain estimate after every iteration.
    pub gain_trace: Vec<f64>,
}

impl InfiniteHorizonSolution {
    fn penalty(&self) -> Option<Penalty<'_>> {
        match (&self.cost, self.multiplier) {
            (Some(cost), Some(multiplier)) => Some(Penalty { multiplier, cost }),
            _ => None,
        }
    }

    /// Per-state stage rewards `l(b, pi)` of the solution's policy, penalty
    /// included.
    pub fn stage_rewards(&self, channel: &UnitMemoryChannel) -> Vec<f64> {
        stage_rewards(channel, &self.policy, self.penalty())
    }
}

fn stage_rewards(channel: &UnitMemoryChannel, policy: &InputPolicy, penalty: Option<Penalty<'_>>) -> Vec<f64> {
    (0..channel.output_size())
        .map(|b| {
            let row = policy.row(b);
            let pen = penalty.map_or(0.0, |p| {
                p.multiplier * row.iter().enumerate().map(|(a, w)| w * p.cost.get(b, a)).sum::<f64>()
            });
            row_reward(channel, b, row) - pen
        })
        .collect()
}

fn span(v: &[f64]) -> (f64, f64) {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    (lo, hi)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    channel: &UnitMemoryChannel,
    policy: InputPolicy,
    gain: f64,
    bias: Vec<f64>,
    iterations: usize,
    span_residual: f64,
    penalty: Option<Penalty<'_>>,
    gain_trace: Vec<f64>,
) -> Result<InfiniteHorizonSolution> {
    let output_kernel = induced_output_kernel(channel, &policy)?;
    let irreducible = is_irreducible(&output_kernel);
    let invariant_dist = if irreducible {
        Some(stationary_distribution(&output_kernel)?)
    } else {
        None
    };
    Ok(InfiniteHorizonSolution {
        gain,
        bias,
        policy,
        output_kernel,
        invariant_dist,
        irreducible,
        iterations,
        span_residual,
        multiplier: penalty.map(|p| p.multiplier),
        cost: penalty.map(|p| p.cost.clone()),
        gain_trace,
    })
}

/// Relative value iteration with a span-seminorm stopping rule.
///
/// Each sweep applies the one-stage Bellman operator to the current
/// relative values and re-anchors them at state 0. It stops once
/// `max - min` of the sweep increment is at most `opts.tol`; the gain is
/// the midpoint of that bracket.
pub fn relative_value_iteration(
    channel: &UnitMemoryChannel,
    cost: Option<&CostFunction>,
    multiplier: Option<f64>,
    opts: &InfiniteOptions,
) -> Result<InfiniteHorizonSolution> {
    let penalty = penalty_from(channel, cost, multiplier)?;
    let states = channel.output_size();
    let inputs = channel.input_size();

    let mut h = vec![0.0; states];
    let mut rows = vec![vec![1.0 / inputs as f64; inputs]; states];
    let mut next = vec![0.0; states];
    let mut trace = Vec::new();
    let mut last_span = f64::INFINITY;

    for sweep in 1..=opts.max_iter {
        for b in 0..states {
            let bias = letter_bias(channel, b, Some(&h), penalty);
            let sol = maximize_row(channel, b, &bias, &rows[b], &opts.inner)?;
            next[b] = sol.value;
            rows[b] = sol.weights;
        }
        let diff: Vec<f64> = next.iter().zip(&h).map(|(n, o)| n - o).collect();
        let (lo, hi) = span(&diff);
        let gain = 0.5 * (lo + hi);
        trace.push(gain);
        last_span = hi - lo;
        let anchor = next[0];
        h.iter_mut().zip(&next).for_each(|(x, n)| *x = n - anchor);

        if last_span <= opts.tol {
            let policy = InputPolicy::new(states, inputs, rows.concat())?;
            return finish(channel, policy, gain, h, sweep, last_span, penalty, trace);
        }
    }
    Err(Error::NonConvergence {
        what: "relative value iteration",
        iterations: opts.max_iter,
        residual: last_span,
    })
}

/// Solves `J + V(b) = l(b) + sum_b' P(b'|b) V(b')` with `V(0) = 0`.
fn evaluate_policy(rewards: &[f64], kernel: &OutputKernel) -> Result<(f64, Vec<f64>)> {
    let n = kernel.size();
    // Unknowns: [J, V(1), .., V(n-1)].
    let mut a = vec![0.0; n * n];
    for b in 0..n {
        a[b * n] = 1.0;
        for j in 1..n {
            a[b * n + j] = if b == j { 1.0 } else { 0.0 } - kernel.prob(b, j);
        }
    }
    let x = linalg::solve(a, rewards.to_vec()).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!("{msg}{REDUCIBLE_HINT}")),
        other => other,
    })?;
    let mut bias = vec![0.0; n];
    bias[1..].copy_from_slice(&x[1..]);
    Ok((x[0], bias))
}

/// Policy iteration: exact evaluation of the current policy followed by
/// per-state improvement, until the policy moves by at most `opts.tol` in
/// sup norm.
pub fn policy_iteration(
    channel: &UnitMemoryChannel,
    initial_policy: &InputPolicy,
    cost: Option<&CostFunction>,
    multiplier: Option<f64>,
    opts: &InfiniteOptions,
) -> Result<InfiniteHorizonSolution> {
    let penalty = penalty_from(channel, cost, multiplier)?;
    initial_policy.check_against(channel)?;
    let states = channel.output_size();
    let inputs = channel.input_size();

    let evaluate = |policy: &InputPolicy| -> Result<(f64, Vec<f64>)> {
        let kernel = induced_output_kernel(channel, policy)?;
        if !is_irreducible(&kernel) {
            return Err(Error::Reducible {
                closed_classes: closed_classes(&kernel),
                hint: REDUCIBLE_HINT,
            });
        }
        evaluate_policy(&stage_rewards(channel, policy, penalty), &kernel)
    };

    let mut policy = initial_policy.clone();
    policy.stage = None;
    let mut trace = Vec::new();
    for iteration in 1..=opts.max_iter {
        let (gain, bias) = evaluate(&policy)?;
        trace.push(gain);

        let mut matrix = Vec::with_capacity(states * inputs);
        let mut residual = vec![0.0; states];
        for b in 0..states {
            let c = letter_bias(channel, b, Some(&bias), penalty);
            let sol = maximize_row(channel, b, &c, policy.row(b), &opts.inner)?;
            residual[b] = sol.value - bias[b];
            matrix.extend(sol.weights);
        }
        let improved = InputPolicy::new(states, inputs, matrix)?;
        let change = improved.sup_distance(&policy);
        policy = improved;

        if change <= opts.tol {
            let (gain, bias) = evaluate(&policy)?;
            trace.push(gain);
            let (lo, hi) = span(&residual);
            return finish(channel, policy, gain, bias, iteration, hi - lo, penalty, trace);
        }
    }
    Err(Error::NonConvergence {
        what: "policy iteration",
        iterations: opts.max_iter,
        residual: f64::NAN,
    })
}

/// Checks `J + V(b_prev)` against every letter's right-hand side.
pub fn verify_bellman_conditions(
    channel: &UnitMemoryChannel,
    solution: &InfiniteHorizonSolution,
    tol: f64,
) -> Result<ConditionReport> {
    solution.policy.check_against(channel)?;
    if solution.bias.len() != channel.output_size() {
        return Err(Error::DimensionMismatch {
            what: "bias vector",
            expected: channel.output_size(),
            found: solution.bias.len(),
        });
    }
    let penalty = solution.penalty();
    let per_state = (0..channel.output_size())
        .map(|b| {
            let weights = solution.policy.row(b);
            let rhs = letter_rhs(channel, b, weights, Some(&solution.bias), penalty);
            check_state(None, b, solution.gain + solution.bias[b], weights, &rhs)
        })
        .collect();
    Ok(ConditionReport::from_states(per_state, tol))
}

/// A candidate for the generalized (multichain) equations, where the gain
/// may depend on the state.
#[derive(Debug, Clone, Serialize)]
pub struct GeneralizedCandidate {
    pub gains: Vec<f64>,
    pub bias: Vec<f64>,
    pub policy: InputPolicy,
    pub multiplier: Option<f64>,
    pub cost: Option<CostFunction>,
}

impl From<&InfiniteHorizonSolution> for GeneralizedCandidate {
    fn from(sol: &InfiniteHorizonSolution) -> Self {
        GeneralizedCandidate {
            gains: vec![sol.gain; sol.bias.len()],
            bias: sol.bias.clone(),
            policy: sol.policy.clone(),
            multiplier: sol.multiplier,
            cost: sol.cost.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneralizedReport {
    pub passed: bool,
    /// A constant gain is invariant under every kernel, so the gain equation
    /// holds automatically.
    pub constant_gain: bool,
    /// `J(b) = sup_pi sum_b' J(b') P^pi(b' | b)`.
    pub gain_equation: ConditionReport,
    /// `J(b) + V(b) = sup_pi { l(b, pi) + sum_b' V(b') P^pi(b' | b) }`.
    pub bias_equation: ConditionReport,
}

/// Checks a candidate against the generalized dynamic programming pair.
///
/// This is a verifier only: reducible problems have no solver here.
pub fn generalized_dp_check(
    channel: &UnitMemoryChannel,
    candidate: &GeneralizedCandidate,
    tol: f64,
) -> Result<GeneralizedReport> {
    candidate.policy.check_against(channel)?;
    let states = channel.output_size();
    for (what, len) in [
        ("gain vector", candidate.gains.len()),
        ("bias vector", candidate.bias.len()),
    ] {
        if len != states {
            return Err(Error::DimensionMismatch {
                what,
                expected: states,
                found: len,
            });
        }
    }
    let penalty = penalty_from(channel, candidate.cost.as_ref(), candidate.multiplier)?;
    let (lo, hi) = span(&candidate.gains);
    let constant_gain = hi - lo <= tol;

    let gain_states = (0..states)
        .map(|b| {
            let rhs: Vec<f64> = (0..channel.input_size())
                .map(|a| channel.row(b, a).iter().zip(&candidate.gains).map(|(p, j)| p * j).sum())
                .collect();
            check_state(None, b, candidate.gains[b], candidate.policy.row(b), &rhs)
        })
        .collect();
    let gain_equation = ConditionReport::from_states(gain_states, tol);

    let bias_states = (0..states)
        .map(|b| {
            let weights = candidate.policy.row(b);
            let rhs = letter_rhs(channel, b, weights, Some(&candidate.bias), penalty);
            check_state(None, b, candidate.gains[b] + candidate.bias[b], weights, &rhs)
        })
        .collect();
    let bias_equation = ConditionReport::from_states(bias_states, tol);

    Ok(GeneralizedReport {
        passed: gain_equation.passed && bias_equation.passed,
        constant_gain,
        gain_equation,
        bias_equation,
    })
}
