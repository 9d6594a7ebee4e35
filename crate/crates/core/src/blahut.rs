//! Per-state concave maximization over the input simplex.
//!
//! Every solver in this crate reduces to the one-stage problem
//!
//! ```text
//! maximize_pi  sum_a pi(a) [ D(P(.|b_prev,a) || P^pi(.|b_prev)) + bias(a) ]
//! ```
//!
//! which is a channel-capacity computation with a per-letter bias (the
//! continuation value minus any cost penalty). It is solved with the
//! multiplicative update `pi(a) <- pi(a) 2^{D_a + bias_a}` (normalized),
//! interleaved with a Newton step restricted to the current support. The
//! multiplicative update alone slows to a sublinear crawl when a letter's
//! optimal mass is zero with a vanishing margin, which is exactly where the
//! cost multiplier search ends up. The stopping certificate is the gap
//! `max_a (D_a + bias_a) - objective`, which upper-bounds the distance to the
//! optimum whichever step produced the iterate.

use crate::channel::UnitMemoryChannel;
use crate::error::{Error, Result};
use crate::info::{letter_divergences, mix_rows};
use crate::linalg;

/// Stopping rule for the per-state solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    /// Gap tolerance in bits.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

/// Mass given to a zero letter that the certificate says should re-enter.
const REVIVAL_MASS: f64 = 1e-3;

/// Backtracking halvings before a Newton step is abandoned.
const MAX_HALVINGS: usize = 40;

/// `sum_a w_a (D(P_a || q) + c_a)`.
fn objective_at(channel: &UnitMemoryChannel, b_prev: usize, bias: &[f64], w: &[f64]) -> f64 {
    let d = letter_divergences(channel, b_prev, w);
    (0..w.len())
        .filter(|&a| w[a] > 0.0)
        .map(|a| w[a] * (d[a] + bias[a]))
        .sum()
}

/// One Newton step on the face `{w : w_a = 0 off the support}` with a ratio
/// test and backtracking. Returns the new point only if it improves the
/// objective.
fn newton_step(
    channel: &UnitMemoryChannel,
    b_prev: usize,
    bias: &[f64],
    w: &[f64],
    scores: &[f64],
    current: f64,
) -> Option<Vec<f64>> {
    let support: Vec<usize> = (0..w.len()).filter(|&a| w[a] > 0.0).collect();
    let k = support.len();
    if k < 2 {
        return None;
    }
    let mut q = vec![0.0; channel.output_size()];
    mix_rows(channel, b_prev, w, &mut q);

    // KKT system [H 1; 1' 0] [d; mu] = [-g; 0] with
    // H_ij = -(1/ln 2) sum_b P_i(b) P_j(b) / q(b).
    let m = k + 1;
    let mut sys = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for (i, &ai) in support.iter().enumerate() {
        let pi = channel.row(b_prev, ai);
        for (j, &aj) in support.iter().enumerate().skip(i) {
            let pj = channel.row(b_prev, aj);
            let h: f64 = (0..q.len())
                .filter(|&b| q[b] > 0.0)
                .map(|b| pi[b] * pj[b] / q[b])
                .sum::<f64>()
                * -std::f64::consts::LOG2_E;
            sys[i * m + j] = h;
            sys[j * m + i] = h;
        }
        // slight regularization keeps repeated rows solvable
        sys[i * m + i] -= 1e-12 * (1.0 + sys[i * m + i].abs());
        sys[i * m + k] = 1.0;
        sys[k * m + i] = 1.0;
        rhs[i] = -scores[ai];
    }
    let sol = linalg::solve(sys, rhs).ok()?;
    let d = &sol[..k];

    let mut t_max = 1.0f64;
    let mut blocking = None;
    for (i, &ai) in support.iter().enumerate() {
        if d[i] < 0.0 && w[ai] + d[i] < 0.0 {
            let t = w[ai] / -d[i];
            if t < t_max {
                t_max = t;
                blocking = Some(ai);
            }
        }
    }

    let mut t = t_max;
    for _ in 0..MAX_HALVINGS {
        let mut next = w.to_vec();
        for (i, &ai) in support.iter().enumerate() {
            next[ai] = (w[ai] + t * d[i]).max(0.0);
        }
        if t == t_max {
            if let Some(a) = blocking {
                next[a] = 0.0;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let value = objective_at(channel, b_prev, bias, &next);
        if value > current {
            return Some(next);
        }
        t *= 0.5;
    }
    None
}

/// Newton steps taken after the gap certificate is met. A flat row can meet
/// the certificate while individual scores are still off by far more than
/// the gap; a couple of face steps settle them.
const POLISH_STEPS: usize = 4;

/// Scores, objective and gap at `w`.
fn certify(channel: &UnitMemoryChannel, b_prev: usize, bias: &[f64], w: &[f64]) -> (Vec<f64>, f64, f64) {
    let d = letter_divergences(channel, b_prev, w);
    let scores: Vec<f64> = (0..w.len()).map(|a| d[a] + bias[a]).collect();
    let objective: f64 = (0..w.len()).filter(|&a| w[a] > 0.0).map(|a| w[a] * scores[a]).sum();
    let upper = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (scores, objective, upper - objective)
}

#[allow(clippy::too_many_arguments)]
fn polish(
    channel: &UnitMemoryChannel,
    b_prev: usize,
    bias: &[f64],
    mut w: Vec<f64>,
    mut scores: Vec<f64>,
    mut objective: f64,
    mut gap: f64,
    tol: f64,
) -> (Vec<f64>, f64, f64) {
    for _ in 0..POLISH_STEPS {
        let Some(next) = newton_step(channel, b_prev, bias, &w, &scores, objective) else {
            break;
        };
        let (next_scores, value, next_gap) = certify(channel, b_prev, bias, &next);
        if !(value >= objective && next_gap <= tol) {
            break;
        }
        (w, scores, objective, gap) = (next, next_scores, value, next_gap);
    }
    (w, objective, gap)
}

#[derive(Debug, Clone)]
pub(crate) struct RowSolution {
    pub weights: Vec<f64>,
    /// Objective at `weights`, bias included.
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Maximizes the biased one-stage objective at `b_prev`, starting from
/// `init` (which must be a probability vector over the inputs).
pub(crate) fn maximize_row(
    channel: &UnitMemoryChannel,
    b_prev: usize,
    bias: &[f64],
    init: &[f64],
    opts: &InnerOptions,
) -> Result<RowSolution> {
    let inputs = channel.input_size();
    debug_assert_eq!(bias.len(), inputs);
    debug_assert_eq!(init.len(), inputs);

    // A common offset does not move the maximizer; removing it keeps the
    // certificate well conditioned when the continuation values are large.
    let offset = bias.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = bias.iter().map(|c| c - offset).collect();

    let mut w = init.to_vec();
    let mut scores = vec![0.0; inputs];
    let mut iterations = 0;
    loop {
        let d = letter_divergences(channel, b_prev, &w);
        for a in 0..inputs {
            scores[a] = d[a] + shifted[a];
        }
        let objective: f64 = (0..inputs).filter(|&a| w[a] > 0.0).map(|a| w[a] * scores[a]).sum();
        let upper = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut gap = upper - objective;
        if gap.is_nan() {
            gap = f64::INFINITY;
        }
        if gap <= opts.tol {
            let (w, objective, gap) = polish(channel, b_prev, &shifted, w, scores, objective, gap, opts.tol);
            return Ok(RowSolution {
                weights: w,
                value: objective + offset,
                gap: gap.max(0.0),
                iterations,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::InnerNonConvergence { iterations, gap });
        }
        iterations += 1;

        let mut revived = false;
        for a in 0..inputs {
            if w[a] == 0.0 && scores[a] > objective + opts.tol {
                w[a] = REVIVAL_MASS / inputs as f64;
                revived = true;
            }
        }
        if revived {
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            continue;
        }

        if let Some(next) = newton_step(channel, b_prev, &shifted, &w, &scores, objective) {
            w = next;
            continue;
        }

        let peak = (0..inputs)
            .filter(|&a| w[a] > 0.0)
            .map(|a| scores[a])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for a in 0..inputs {
            if w[a] > 0.0 {
                w[a] *= (scores[a] - peak).exp2();
                total += w[a];
            }
        }
        w.iter_mut().for_each(|x| *x /= total);
    }
}
