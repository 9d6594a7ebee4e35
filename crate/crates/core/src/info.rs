//! Information measures in bits.

use crate::channel::{InputPolicy, OutputKernel, UnitMemoryChannel};
use crate::error::{Error, Result};

/// `-p log2 p - (1 - p) log2 (1 - p)`, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("binary entropy of {p}")));
    }
    Ok(entropy_term(p) + entropy_term(1.0 - p))
}

/// Same as [`binary_entropy`] for callers that already hold a probability.
pub(crate) fn h2(p: f64) -> f64 {
    entropy_term(p) + entropy_term(1.0 - p)
}

#[inline]
fn entropy_term(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Mixture `sum_a weights[a] * P(. | b_prev, a)`, written into `out`.
pub(crate) fn mix_rows(channel: &UnitMemoryChannel, b_prev: usize, weights: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|q| *q = 0.0);
    for (a, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (q, &p) in out.iter_mut().zip(channel.row(b_prev, a)) {
            *q += w * p;
        }
    }
}

/// Relative entropy `D(p || q)` in bits. Infinite when `p` charges a symbol
/// that `q` does not.
#[inline]
pub(crate) fn divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&pb, &qb) in p.iter().zip(q) {
        if pb > 0.0 {
            if qb <= 0.0 {
                return f64::INFINITY;
            }
            d += pb * (pb / qb).log2();
        }
    }
    d
}

/// `P^pi(b | b_prev) = sum_a P(b | b_prev, a) pi(a | b_prev)`.
pub fn induced_output_kernel(channel: &UnitMemoryChannel, policy: &InputPolicy) -> Result<OutputKernel> {
    policy.check_against(channel)?;
    let n = channel.output_size();
    let mut matrix = vec![0.0; n * n];
    for (b_prev, out) in matrix.chunks_mut(n).enumerate() {
        mix_rows(channel, b_prev, policy.row(b_prev), out);
    }
    OutputKernel::new(n, matrix)
}

/// Per-letter divergences `D(P(. | b_prev, a) || P^pi(. | b_prev))` for the
/// policy row `weights`.
pub(crate) fn letter_divergences(channel: &UnitMemoryChannel, b_prev: usize, weights: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; channel.output_size()];
    mix_rows(channel, b_prev, weights, &mut q);
    (0..channel.input_size())
        .map(|a| divergence(channel.row(b_prev, a), &q))
        .collect()
}

/// Reward of one stage from state `b_prev` under a policy row: the
/// conditional mutual information `I(A; B | B_prev = b_prev)`.
pub(crate) fn row_reward(channel: &UnitMemoryChannel, b_prev: usize, weights: &[f64]) -> f64 {
    let d = letter_divergences(channel, b_prev, weights);
    weights
        .iter()
        .zip(&d)
        .filter(|(&w, _)| w > 0.0)
        .map(|(w, d)| w * d)
        .sum()
}

/// `I(A; B | B_prev = b_prev)` under `policy`, in bits.
pub fn stage_reward(channel: &UnitMemoryChannel, policy: &InputPolicy, b_prev: usize) -> Result<f64> {
    policy.check_against(channel)?;
    if b_prev >= channel.output_size() {
        return Err(Error::DimensionMismatch {
            what: "previous output symbol",
            expected: channel.output_size(),
            found: b_prev,
        });
    }
    Ok(row_reward(channel, b_prev, policy.row(b_prev)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bssc::{bssc_channel, BsscParams};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!(close(binary_entropy(0.2).unwrap(), 0.721_928_094_887_362_3, 1e-12));
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn best_worst_bssc_output_kernel() {
        let ch = bssc_channel(BsscParams::new(1.0, 0.5).unwrap());
        let pol = InputPolicy::from_rows(vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        let k = induced_output_kernel(&ch, &pol).unwrap();
        assert!(close(k.prob(0, 0), 0.8, 1e-15));
        assert!(close(k.prob(1, 1), 0.8, 1e-15));
    }

    #[test]
    fn point_mass_policy_selects_column() {
        let ch = bssc_channel(BsscParams::new(0.9, 0.2).unwrap());
        let pol = InputPolicy::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let k = induced_output_kernel(&ch, &pol).unwrap();
        for b in 0..2 {
            assert_eq!(k.row(b), ch.row(b, b));
            assert_eq!(stage_reward(&ch, &pol, b).unwrap(), 0.0);
        }
    }

    #[test]
    fn uniform_policy_on_symmetric_bssc() {
        let ch = bssc_channel(BsscParams::new(0.9, 0.9).unwrap());
        let pol = InputPolicy::uniform_for(&ch);
        let k = induced_output_kernel(&ch, &pol).unwrap();
        assert!(close(k.prob(0, 0), 0.5, 1e-15));
        let r = stage_reward(&ch, &pol, 0).unwrap();
        // 1 - H(0.9)
        assert!(close(r, 0.531_004_406_410_718_5, 1e-12));
    }

    #[test]
    fn reward_at_optimal_bssc_policy() {
        let ch = bssc_channel(BsscParams::new(1.0, 0.5).unwrap());
        let pol = InputPolicy::from_rows(vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        let r = stage_reward(&ch, &pol, 0).unwrap();
        assert!(close(r, 0.3219, 1e-4));
    }

    #[test]
    fn dimension_mismatch() {
        let ch = bssc_channel(BsscParams::new(1.0, 0.5).unwrap());
        let pol = InputPolicy::uniform(3, 2).unwrap();
        assert!(induced_output_kernel(&ch, &pol).is_err());
        assert!(stage_reward(&ch, &InputPolicy::uniform_for(&ch), 2).is_err());
    }
}
