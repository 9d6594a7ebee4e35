//! Capacity under an average transmission-cost budget.
//!
//! The budgeted problem is solved through its Lagrangian dual: for a
//! multiplier `s >= 0` the average-reward problem with per-stage reward
//! `l - s gamma` is solved, and `s` is bisected until the optimal policy
//! spends the budget. The reported capacity is the dual value
//! `J(s*) + s* kappa`.

use serde::{Deserialize, Serialize};

use crate::channel::{InputPolicy, UnitMemoryChannel};
use crate::error::{Error, Result};
use crate::infinite::{relative_value_iteration, InfiniteHorizonSolution, InfiniteOptions};
use crate::info::induced_output_kernel;
use crate::markov::stationary_distribution;

/// A per-letter cost `gamma(a, b_prev) >= 0`, stored `[b_prev][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    states: usize,
    inputs: usize,
    gamma: Vec<f64>,
}

impl CostFunction {
    pub fn new(states: usize, inputs: usize, gamma: Vec<f64>) -> Result<Self> {
        if states == 0 || inputs == 0 {
            return Err(Error::Validation("cost function must be non-empty".into()));
        }
        if gamma.len() != states * inputs {
            return Err(Error::DimensionMismatch {
                what: "cost function",
                expected: states * inputs,
                found: gamma.len(),
            });
        }
        if let Some(bad) = gamma.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::Validation(format!(
                "cost entries must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(CostFunction { states, inputs, gamma })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let states = rows.len();
        let inputs = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != inputs) {
            return Err(Error::DimensionMismatch {
                what: "cost row",
                expected: inputs,
                found: r.len(),
            });
        }
        Self::new(states, inputs, rows.concat())
    }

    #[inline]
    pub fn get(&self, b_prev: usize, a: usize) -> f64 {
        self.gamma[b_prev * self.inputs + a]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.gamma.chunks(self.inputs).map(<[f64]>::to_vec).collect()
    }

    pub fn check_against(&self, channel: &UnitMemoryChannel) -> Result<()> {
        if self.states != channel.output_size() || self.inputs != channel.input_size() {
            return Err(Error::DimensionMismatch {
                what: "cost function",
                expected: channel.output_size() * channel.input_size(),
                found: self.states * self.inputs,
            });
        }
        Ok(())
    }
}

/// A cost function together with its budget `kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub gamma: CostFunction,
    pub kappa: f64,
}

impl CostSpec {
    pub fn new(gamma: CostFunction, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::Validation(format!(
                "budget must be finite and nonnegative, got {kappa}"
            )));
        }
        Ok(CostSpec { gamma, kappa })
    }
}

/// Stationary average cost `sum_b nu(b) sum_a pi(a|b) gamma(a, b)`.
pub fn average_cost(channel: &UnitMemoryChannel, policy: &InputPolicy, cost: &CostFunction) -> Result<f64> {
    cost.check_against(channel)?;
    let kernel = induced_output_kernel(channel, policy)?;
    let nu = stationary_distribution(&kernel)?;
    Ok(nu
        .weights()
        .iter()
        .enumerate()
        .map(|(b, w)| {
            w * policy
                .row(b)
                .iter()
                .enumerate()
                .map(|(a, p)| p * cost.get(b, a))
                .sum::<f64>()
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedOptions {
    /// Bisection stops when the multiplier bracket is this narrow.
    pub dual_tol: f64,
    /// Bisection stops when the achieved cost is this close to the budget.
    pub cost_tol: f64,
    /// Upper limit for the doubling search on the multiplier.
    pub max_multiplier: f64,
    pub solver: InfiniteOptions,
}

impl Default for ConstrainedOptions {
    fn default() -> Self {
        ConstrainedOptions {
            dual_tol: 1e-8,
            cost_tol: 1e-6,
            max_multiplier: (1u64 << 40) as f64,
            solver: InfiniteOptions::default(),
        }
    }
}

/// One evaluation of the dual function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualStep {
    pub multiplier: f64,
    pub gain: f64,
    pub achieved_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstrainedResult {
    pub kappa: f64,
    /// Dual value `J(s*) + s* kappa`, bits per channel use.
    pub capacity: f64,
    pub multiplier: f64,
    pub achieved_cost: f64,
    pub policy: InputPolicy,
    /// The budget is spent (within the cost tolerance).
    pub binding: bool,
    /// Average cost of the unconstrained optimal policy.
    pub kappa_max: Option<f64>,
    /// Every dual evaluation, in the order performed.
    pub trace: Vec<DualStep>,
}

struct Evaluated {
    step: DualStep,
    solution: InfiniteHorizonSolution,
}

fn evaluate(
    channel: &UnitMemoryChannel,
    cost: &CostFunction,
    multiplier: f64,
    opts: &ConstrainedOptions,
    trace: &mut Vec<DualStep>,
) -> Result<Evaluated> {
    let solution = relative_value_iteration(channel, Some(cost), Some(multiplier), &opts.solver)?;
    let achieved_cost = average_cost(channel, &solution.policy, cost)?;
    let step = DualStep {
        multiplier,
        gain: solution.gain,
        achieved_cost,
    };
    trace.push(step);
    Ok(Evaluated { step, solution })
}

fn result_from(
    spec: &CostSpec,
    at: Evaluated,
    kappa_max: f64,
    opts: &ConstrainedOptions,
    trace: Vec<DualStep>,
) -> ConstrainedResult {
    let binding = (at.step.achieved_cost - spec.kappa).abs() <= opts.cost_tol;
    ConstrainedResult {
        kappa: spec.kappa,
        capacity: at.step.gain + at.step.multiplier * spec.kappa,
        multiplier: at.step.multiplier,
        achieved_cost: at.step.achieved_cost,
        policy: at.solution.policy,
        binding,
        kappa_max: Some(kappa_max),
        trace,
    }
}

/// Feedback capacity subject to `average cost <= kappa`.
pub fn constrained_capacity(
    channel: &UnitMemoryChannel,
    spec: &CostSpec,
    opts: &ConstrainedOptions,
) -> Result<ConstrainedResult> {
    spec.gamma.check_against(channel)?;
    let cost = &spec.gamma;
    let kappa = spec.kappa;
    let mut trace = Vec::new();

    let free = evaluate(channel, cost, 0.0, opts, &mut trace)?;
    let kappa_max = free.step.achieved_cost;
    if free.step.achieved_cost <= kappa + opts.cost_tol {
        return Ok(result_from(spec, free, kappa_max, opts, trace));
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut upper = evaluate(channel, cost, hi, opts, &mut trace)?;
    while upper.step.achieved_cost > kappa + opts.cost_tol {
        if hi >= opts.max_multiplier {
            return Err(Error::Infeasible {
                kappa,
                minimum_cost: upper.step.achieved_cost,
            });
        }
        lo = hi;
        hi *= 2.0;
        upper = evaluate(channel, cost, hi, opts, &mut trace)?;
    }

    while (upper.step.achieved_cost - kappa).abs() > opts.cost_tol && hi - lo > opts.dual_tol {
        let mid = 0.5 * (lo + hi);
        let probe = evaluate(channel, cost, mid, opts, &mut trace)?;
        if probe.step.achieved_cost > kappa + opts.cost_tol {
            lo = mid;
        } else {
            hi = mid;
            upper = probe;
        }
    }
    Ok(result_from(spec, upper, kappa_max, opts, trace))
}

/// One grid point of a capacity-cost curve.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub kappa: f64,
    pub result: Result<ConstrainedResult>,
}

/// Evaluates [`constrained_capacity`] at every budget in `kappa_grid`.
///
/// Failures at individual points are recorded and the sweep continues.
pub fn capacity_cost_curve(
    channel: &UnitMemoryChannel,
    gamma: &CostFunction,
    kappa_grid: &[f64],
    opts: &ConstrainedOptions,
) -> Result<Vec<CurvePoint>> {
    gamma.check_against(channel)?;
    if kappa_grid.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(Error::Validation("budgets must be finite and nonnegative".into()));
    }
    if kappa_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Validation("budget grid must be sorted".into()));
    }
    Ok(kappa_grid
        .iter()
        .map(|&kappa| CurvePoint {
            kappa,
            result: CostSpec::new(gamma.clone(), kappa).and_then(|spec| constrained_capacity(channel, &spec, opts)),
        })
        .collect())
}
