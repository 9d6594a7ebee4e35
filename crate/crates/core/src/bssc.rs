//! Closed forms for the binary state symmetric channel.
//!
//! Given the state `s = a xor b_prev`, the channel is a BSC with crossover
//! `1 - alpha` (state 0) or `1 - beta` (state 1):
//!
//! ```text
//!            b_prev,a:  0,0    0,1    1,0    1,1
//!   P(b=0 | ...)      alpha  1-beta  beta  1-alpha
//! ```

use serde::Serialize;

use crate::channel::{Distribution, InputPolicy, UnitMemoryChannel};
use crate::constrained::CostFunction;
use crate::error::{Error, Result};
use crate::info::h2;

/// Values of `alpha + beta` this close to 1 are treated as singular.
const SINGULAR_EPS: f64 = 1e-12;

/// Conditional probabilities below this make `P(a_i | b_{i-1})` undefined.
const MASS_EPS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BsscParams {
    alpha: f64,
    beta: f64,
}

impl BsscParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("{name} = {v} is not in [0, 1]")));
            }
        }
        Ok(BsscParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

pub fn bssc_channel(params: BsscParams) -> UnitMemoryChannel {
    let (al, be) = (params.alpha, params.beta);
    let mut kernel = Vec::with_capacity(8);
    for b_prev in 0..2 {
        for a in 0..2 {
            // probability that the output repeats the input
            let keep = if a == b_prev { al } else { be };
            let p0 = if a == 0 { keep } else { 1.0 - keep };
            kernel.extend([p0, 1.0 - p0]);
        }
    }
    UnitMemoryChannel::new(2, 2, kernel).expect("BSSC kernel is stochastic")
}

/// `gamma(a, b_prev) = 1` if `a = b_prev`, else 0.
pub fn bssc_cost_function() -> CostFunction {
    CostFunction::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).expect("valid cost")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsscSolution {
    pub alpha: f64,
    pub beta: f64,
    /// Diagonal of the induced output kernel.
    pub lambda: f64,
    /// Diagonal of the optimal input policy (state-zero occupancy).
    pub nu: f64,
    pub bssc_exponent: f64,
    /// Bits per channel use.
    pub capacity: f64,
    pub constrained: bool,
    pub kappa: Option<f64>,
    pub lambda_bar: Option<f64>,
    /// Set when `lambda` or `nu` falls outside `[0, 1]`.
    pub warning: Option<String>,
}

impl BsscSolution {
    /// Probability of `a = b_prev` under the policy this solution describes.
    pub fn occupancy(&self) -> f64 {
        match (self.constrained, self.kappa) {
            (true, Some(k)) => k,
            _ => self.nu,
        }
    }

    /// The time-invariant input policy `pi(a | b_prev)`.
    pub fn policy(&self) -> Result<InputPolicy> {
        let d = self.occupancy();
        InputPolicy::from_rows(vec![vec![d, 1.0 - d], vec![1.0 - d, d]])
    }
}

fn range_warning(lambda: f64, nu: f64) -> Option<String> {
    let bad: Vec<String> = [("lambda", lambda), ("nu", nu)]
        .iter()
        .filter(|(_, v)| !(0.0..=1.0).contains(v))
        .map(|(n, v)| format!("{n} = {v}"))
        .collect();
    (!bad.is_empty()).then(|| {
        format!(
            "{} outside [0, 1]; relabel the inputs (swap a and 1 - a) and solve again",
            bad.join(", ")
        )
    })
}

/// Unconstrained feedback capacity and its optimal policy.
pub fn bssc_closed_form(params: BsscParams) -> Result<BsscSolution> {
    let (al, be) = (params.alpha, params.beta);
    let (mu, lambda, nu) = if al == be {
        (0.0, 0.5, 0.5)
    } else {
        let denom = 1.0 - al - be;
        if denom.abs() < SINGULAR_EPS {
            return Err(Error::Degenerate(format!(
                "alpha + beta = 1 (alpha = {al}, beta = {be}) makes 1 - alpha - beta vanish"
            )));
        }
        let mu = (h2(be) - h2(al)) / denom;
        let t = 1.0 + mu.exp2();
        let nu = (1.0 - (1.0 - be) * t) / ((al + be - 1.0) * t);
        (mu, 1.0 / t, nu)
    };
    Ok(BsscSolution {
        alpha: al,
        beta: be,
        lambda,
        nu,
        bssc_exponent: mu,
        capacity: h2(lambda) - nu * h2(al) - (1.0 - nu) * h2(be),
        constrained: false,
        kappa: None,
        lambda_bar: None,
        warning: range_warning(lambda, nu),
    })
}

/// Feedback capacity when the average binary cost may not exceed `kappa`.
///
/// Budgets at or above `nu` leave the unconstrained solution in place.
pub fn bssc_constrained_closed_form(params: BsscParams, kappa: f64) -> Result<BsscSolution> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::Validation(format!("kappa = {kappa} is not in [0, 1]")));
    }
    let mut sol = bssc_closed_form(params)?;
    sol.kappa = Some(kappa);
    if kappa <= sol.nu {
        let (al, be) = (params.alpha, params.beta);
        let lambda_bar = al * kappa + (1.0 - kappa) * (1.0 - be);
        sol.lambda_bar = Some(lambda_bar);
        sol.capacity = h2(lambda_bar) - kappa * h2(al) - (1.0 - kappa) * h2(be);
        sol.constrained = true;
    }
    Ok(sol)
}

/// A time-invariant first-order Markov input `P(a_i | a_{i-1})`, used
/// without feedback.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovInput {
    /// Indexed `[a_prev][a]`.
    pub matrix: Vec<Vec<f64>>,
    pub sigma: Option<f64>,
}

impl MarkovInput {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        // Reuse the policy validation: same shape and row constraints.
        let checked = InputPolicy::from_rows(matrix)?;
        if checked.states() != checked.inputs() {
            return Err(Error::DimensionMismatch {
                what: "Markov input",
                expected: checked.states(),
                found: checked.inputs(),
            });
        }
        Ok(MarkovInput {
            matrix: checked.to_rows(),
            sigma: None,
        })
    }

    /// Binary symmetric Markov input with the given diagonal.
    pub fn symmetric(diagonal: f64) -> Result<Self> {
        Self::new(vec![vec![diagonal, 1.0 - diagonal], vec![1.0 - diagonal, diagonal]])
    }
}

/// The Markov input that achieves the feedback capacity without feedback.
pub fn bssc_nofeedback_markov(params: BsscParams, kappa: f64) -> Result<MarkovInput> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::Validation(format!("kappa = {kappa} is not in [0, 1]")));
    }
    let sigma = params.alpha * kappa + params.beta * (1.0 - kappa);
    let denom = 1.0 - 2.0 * sigma;
    if denom.abs() < SINGULAR_EPS {
        return Err(Error::Degenerate(format!("sigma = {sigma} makes 1 - 2 sigma vanish")));
    }
    let diag = (1.0 - kappa - sigma) / denom;
    let off = (kappa - sigma) / denom;
    if !(0.0..=1.0).contains(&diag) || !(0.0..=1.0).contains(&off) {
        return Err(Error::Domain(format!(
            "Markov input entries {diag}, {off} are not probabilities"
        )));
    }
    Ok(MarkovInput {
        matrix: vec![vec![diag, off], vec![off, diag]],
        sigma: Some(sigma),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NofbReport {
    pub holds: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// `max_{b, a} |P(a_i | b_{i-1}) - pi(a | b)|` for stages `0..=horizon`.
    pub stage_deviations: Vec<f64>,
    pub first_violation: Option<usize>,
    /// `(stage, b_prev)` pairs skipped because `P(b_{i-1})` vanished.
    pub skipped: Vec<(usize, usize)>,
}

/// Propagates the joint law of `(A_i, B_i)` under a Markov input without
/// feedback and compares the induced `P(a_i | b_{i-1})` with `target`.
///
/// Stage 0 draws `a_0` from `target` given `b_{-1} ~ initial`.
pub fn verify_nofb_induces_fb(
    channel: &UnitMemoryChannel,
    markov: &MarkovInput,
    target: &InputPolicy,
    initial: &Distribution,
    horizon: usize,
    tol: f64,
) -> Result<NofbReport> {
    target.check_against(channel)?;
    let na = channel.input_size();
    let nb = channel.output_size();
    if markov.matrix.len() != na || markov.matrix.iter().any(|r| r.len() != na) {
        return Err(Error::DimensionMismatch {
            what: "Markov input",
            expected: na,
            found: markov.matrix.len(),
        });
    }
    if initial.len() != nb {
        return Err(Error::DimensionMismatch {
            what: "initial distribution",
            expected: nb,
            found: initial.len(),
        });
    }

    // conditional[b][a] = P(a_i = a | b_{i-1} = b) from the joint p_ab[a][b]
    // of (a_i, b_{i-1}); returns the deviation and skipped states.
    let compare = |p_ab: &[Vec<f64>], stage: usize, skipped: &mut Vec<(usize, usize)>| {
        let mut dev: f64 = 0.0;
        for b in 0..nb {
            let mass: f64 = (0..na).map(|a| p_ab[a][b]).sum();
            if mass <= MASS_EPS {
                skipped.push((stage, b));
                continue;
            }
            for a in 0..na {
                dev = dev.max((p_ab[a][b] / mass - target.prob(b, a)).abs());
            }
        }
        dev
    };

    let mut skipped = Vec::new();
    let mut stage_deviations = Vec::with_capacity(horizon + 1);
    // joint of (a_i, b_{i-1}) at stage 0
    let mut p_ab: Vec<Vec<f64>> = (0..na)
        .map(|a| (0..nb).map(|b| initial.weights()[b] * target.prob(b, a)).collect())
        .collect();
    stage_deviations.push(compare(&p_ab, 0, &mut skipped));

    for stage in 1..=horizon {
        // joint of (a_{i-1}, b_{i-1})
        let mut joint = vec![vec![0.0; nb]; na];
        for (a, row) in p_ab.iter().enumerate() {
            for (bp, &w) in row.iter().enumerate() {
                for (b, p) in channel.row(bp, a).iter().enumerate() {
                    joint[a][b] += w * p;
                }
            }
        }
        p_ab = (0..na)
            .map(|a| {
                (0..nb)
                    .map(|b| (0..na).map(|ap| joint[ap][b] * markov.matrix[ap][a]).sum())
                    .collect()
            })
            .collect();
        stage_deviations.push(compare(&p_ab, stage, &mut skipped));
    }

    let max_deviation = stage_deviations.iter().copied().fold(0.0, f64::max);
    let first_violation = stage_deviations.iter().position(|d| *d > tol);
    Ok(NofbReport {
        holds: first_violation.is_none(),
        max_deviation,
        tolerance: tol,
        stage_deviations,
        first_violation,
        skipped,
    })
}

/// One row of an `(alpha, beta)` sweep. Failed points carry the error text.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: Option<f64>,
    pub solution: std::result::Result<BsscSolution, String>,
}

/// Closed forms over the grid `alphas x betas`, optionally at budget `kappa`.
pub fn bssc_sweep(alphas: &[f64], betas: &[f64], kappa: Option<f64>) -> Vec<SweepPoint> {
    let mut out = Vec::with_capacity(alphas.len() * betas.len());
    for &alpha in alphas {
        for &beta in betas {
            let solution = BsscParams::new(alpha, beta)
                .and_then(|p| match kappa {
                    Some(k) => bssc_constrained_closed_form(p, k),
                    None => bssc_closed_form(p),
                })
                .map_err(|e| e.to_string());
            out.push(SweepPoint {
                alpha,
                beta,
                kappa,
                solution,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::induced_output_kernel;

    fn params(a: f64, b: f64) -> BsscParams {
        BsscParams::new(a, b).unwrap()
    }

    #[test]
    fn kernel_layout() {
        let ch = bssc_channel(params(0.9, 0.2));
        assert_eq!(ch.prob(0, 0, 0), 0.9);
        assert_eq!(ch.prob(1, 0, 0), 0.2);
        assert!((ch.prob(0, 1, 0) - 0.8).abs() < 1e-15);
        assert!((ch.prob(1, 1, 0) - 0.1).abs() < 1e-15);

        let ch = bssc_channel(params(1.0, 0.5));
        assert_eq!(ch.row(0, 0), &[1.0, 0.0]);
        assert_eq!(ch.row(0, 1), &[0.5, 0.5]);
    }

    #[test]
    fn cost_function_layout() {
        let g = bssc_cost_function();
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(0, 1), 0.0);
        assert!(g.to_rows().iter().all(|r| r.iter().sum::<f64>() == 1.0));
    }

    #[test]
    fn best_worst_special_case() {
        let s = bssc_closed_form(params(1.0, 0.5)).unwrap();
        assert!((s.bssc_exponent + 2.0).abs() < 1e-15);
        assert!((s.lambda - 0.8).abs() < 1e-15);
        assert!((s.nu - 0.6).abs() < 1e-15);
        assert!((s.capacity - 0.3219).abs() < 1e-4);
        assert!(s.warning.is_none());
        let k = induced_output_kernel(&bssc_channel(params(1.0, 0.5)), &s.policy().unwrap()).unwrap();
        assert!((k.prob(0, 0) - 0.8).abs() < 1e-15);
        assert!((k.prob(1, 1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn memoryless_branch() {
        let s = bssc_closed_form(params(0.9, 0.9)).unwrap();
        assert_eq!((s.lambda, s.nu, s.bssc_exponent), (0.5, 0.5, 0.0));
        assert!((s.capacity - (1.0 - h2(0.9))).abs() < 1e-15);
        // alpha = beta = 0.5 also has alpha + beta = 1; the memoryless branch wins.
        assert_eq!(bssc_closed_form(params(0.5, 0.5)).unwrap().capacity, 0.0);
    }

    #[test]
    fn singular_parameters() {
        assert!(matches!(bssc_closed_form(params(0.7, 0.3)), Err(Error::Degenerate(_))));
        assert!(BsscParams::new(1.1, 0.5).is_err());
    }

    #[test]
    fn constrained_special_cases() {
        let p = params(1.0, 0.5);
        let at = |k| bssc_constrained_closed_form(p, k).unwrap();
        let s = at(0.6);
        assert!(s.constrained && (s.lambda_bar.unwrap() - 0.8).abs() < 1e-15);
        assert!((s.capacity - 0.3219).abs() < 1e-4);
        assert!(at(0.0).capacity.abs() < 1e-15);
        assert!((at(0.5).capacity - (h2(0.75) - 0.5)).abs() < 1e-15);
        assert!((at(0.5).capacity - 0.31128).abs() < 1e-5);
        assert!((at(0.3).capacity - 0.23407).abs() < 1e-5);
        let free = at(0.9);
        assert!(!free.constrained);
        assert_eq!(free.capacity, bssc_closed_form(p).unwrap().capacity);
        assert!(bssc_constrained_closed_form(p, 1.5).is_err());
    }

    #[test]
    fn nofeedback_markov_special_cases() {
        let m = bssc_nofeedback_markov(params(1.0, 0.5), 0.6).unwrap();
        assert!((m.sigma.unwrap() - 0.8).abs() < 1e-15);
        assert!((m.matrix[0][0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.matrix[0][1] - 1.0 / 3.0).abs() < 1e-15);
        let m = bssc_nofeedback_markov(params(0.8, 0.8), 0.5).unwrap();
        assert!((m.matrix[0][0] - 0.5).abs() < 1e-15);
        assert!(matches!(
            bssc_nofeedback_markov(params(0.5, 0.5), 0.5),
            Err(Error::Degenerate(_))
        ));
    }

    fn nofb(diag: f64, horizon: usize) -> NofbReport {
        let p = params(1.0, 0.5);
        let ch = bssc_channel(p);
        let target = bssc_closed_form(p).unwrap().policy().unwrap();
        let markov = MarkovInput::symmetric(diag).unwrap();
        verify_nofb_induces_fb(&ch, &markov, &target, &Distribution::uniform(2).unwrap(), horizon, 1e-9).unwrap()
    }

    #[test]
    fn nofb_induction_holds() {
        let r = nofb(2.0 / 3.0, 10);
        assert!(r.holds, "{r:?}");
        assert_eq!(r.stage_deviations.len(), 11);
        assert!(nofb(2.0 / 3.0, 0).holds);
    }

    #[test]
    fn nofb_perturbed_fails_early() {
        let r = nofb(0.7, 10);
        assert!(!r.holds);
        assert!(r.first_violation.unwrap() <= 2);
        // stage 1: P(a_0 = 0 | b_0 = 0) = 0.8, so 0.8 * 0.7 + 0.2 * 0.3 = 0.62
        assert!((r.stage_deviations[1] - 0.02).abs() < 1e-12);
    }

    #[test]
    fn nofb_skips_unreachable_states() {
        // alpha = 1 with a = b_prev at stage 0 and a point mass start keeps b at 0.
        let p = params(1.0, 0.5);
        let ch = bssc_channel(p);
        let stay = InputPolicy::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let markov = MarkovInput::symmetric(1.0).unwrap();
        let r = verify_nofb_induces_fb(&ch, &markov, &stay, &Distribution::point_mass(2, 0).unwrap(), 3, 1e-9).unwrap();
        assert!(r.holds);
        assert!(r.skipped.contains(&(0, 1)) && r.skipped.contains(&(3, 1)));
    }

    #[test]
    fn sweep_reports_failures_inline() {
        let pts = bssc_sweep(&[0.7, 0.9], &[0.3], None);
        assert!(pts[0].solution.is_err());
        assert!(pts[1].solution.is_ok());
    }
}
