//! Feedback capacity of channels with unit memory on the previous output.
//!
//! A unit-memory channel `P(b | b_prev, a)` used with feedback has a
//! capacity-achieving input of the form `pi(a | b_prev)`, so capacity is the
//! optimal average reward of a small Markov decision problem whose state is
//! the previous output. This crate solves that problem by finite-horizon
//! dynamic programming, relative value iteration and policy iteration, adds
//! an average-cost constraint through its Lagrangian dual, and evaluates
//! maximum-likelihood error exponents through the Perron root of a weight
//! matrix. Closed forms for the binary state symmetric channel are included
//! as references. All logarithms are base 2.

#![allow(clippy::needless_range_loop)]

mod blahut;
mod conditions;
mod linalg;

pub mod bssc;
pub mod channel;
pub mod constrained;
pub mod error;
pub mod exponent;
pub mod finite;
pub mod format;
pub mod infinite;
pub mod info;
pub mod markov;

pub use blahut::InnerOptions;
pub use bssc::{
    bssc_channel, bssc_closed_form, bssc_constrained_closed_form, bssc_cost_function, bssc_nofeedback_markov,
    bssc_sweep, verify_nofb_induces_fb, BsscParams, BsscSolution, MarkovInput, NofbReport,
};
pub use channel::{Alphabet, Distribution, InputPolicy, OutputKernel, UnitMemoryChannel};
pub use conditions::{ConditionReport, LetterCheck, StateCheck, SUPPORT_EPS};
pub use constrained::{
    average_cost, capacity_cost_curve, constrained_capacity, ConstrainedOptions, ConstrainedResult, CostFunction,
    CostSpec, CurvePoint,
};
pub use error::{Error, Result};
pub use exponent::{
    error_probability_bound, exponent_curve, finite_horizon_exponent_oracle, finite_horizon_exponent_paths,
    gallager_exponent_infinite, lambda_matrix, random_coding_exponent, ErrorBound, ExponentCurve, LambdaMatrix,
    PerronResult, RandomCodingPoint,
};
pub use finite::{
    classify_non_nested, ftfi_capacity, solve_finite_horizon, verify_optimality_conditions, DpSolution, NestednessKind,
    NestednessVerdict,
};
pub use format::{load_channel, load_channel_document, serialize_channel, ChannelDocument};
pub use infinite::{
    generalized_dp_check, policy_iteration, relative_value_iteration, verify_bellman_conditions, GeneralizedCandidate,
    GeneralizedReport, InfiniteHorizonSolution, InfiniteOptions,
};
pub use info::{binary_entropy, induced_output_kernel, stage_reward};
pub use markov::{closed_classes, is_irreducible, stationary_distribution};

/// Binary-input binary-output unit-memory channel given by
/// `P(b = 0 | b_prev, a)` for `(b_prev, a) = 00, 01, 10, 11`.
pub fn bibo_umco(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<UnitMemoryChannel> {
    UnitMemoryChannel::from_nested(vec![
        vec![vec![p00, 1.0 - p00], vec![p01, 1.0 - p01]],
        vec![vec![p10, 1.0 - p10], vec![p11, 1.0 - p11]],
    ])
}
