//! Maximum-likelihood error exponents for feedback codes on unit-memory
//! channels.
//!
//! With the state identified with the previous output, the Gallager sum
//! over `n` uses factors into products of the weights
//!
//! ```text
//! Lambda(s, s') = [ sum_a pi(a|s') P(b = s | s', a)^(1/(1+rho)) ]^(1+rho)
//! ```
//!
//! and its growth rate is the Perron root of `Lambda`.

use serde::Serialize;

use crate::channel::{InputPolicy, UnitMemoryChannel};
use crate::error::{Error, Result};
use crate::markov::{closed_classes_of, strongly_connected, SUPPORT_THRESHOLD};

/// Relative width of the Collatz-Wielandt bracket at which power iteration
/// stops.
pub const PERRON_TOL: f64 = 1e-12;
const PERRON_MAX_ITER: usize = 1_000_000;

/// Coarse grid step in `rho` before golden-section refinement.
pub const RHO_GRID_STEP: f64 = 0.01;
/// Final bracket width of the golden-section search in `rho`.
pub const RHO_TOL: f64 = 1e-6;

/// Longest horizon the path-enumeration oracle accepts.
pub const MAX_ENUMERATION_HORIZON: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaMatrix {
    pub rho: f64,
    size: usize,
    /// Row-major, indexed `[s_next][s_prev]`.
    matrix: Vec<f64>,
}

impl LambdaMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, s_next: usize, s_prev: usize) -> f64 {
        self.matrix[s_next * self.size + s_prev]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.matrix.chunks(self.size).map(<[f64]>::to_vec).collect()
    }

    fn edge(&self, from: usize, to: usize) -> bool {
        self.get(to, from) > SUPPORT_THRESHOLD
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Validation(format!("rho = {rho} is not in [0, 1]")));
    }
    Ok(())
}

pub fn lambda_matrix(channel: &UnitMemoryChannel, policy: &InputPolicy, rho: f64) -> Result<LambdaMatrix> {
    check_rho(rho)?;
    policy.check_against(channel)?;
    let n = channel.output_size();
    let t = 1.0 / (1.0 + rho);
    let mut matrix = vec![0.0; n * n];
    for s_prev in 0..n {
        let pol = policy.row(s_prev);
        for s_next in 0..n {
            let inner: f64 = pol
                .iter()
                .enumerate()
                .map(|(a, w)| w * channel.prob(s_prev, a, s_next).powf(t))
                .sum();
            matrix[s_next * n + s_prev] = if rho == 0.0 { inner } else { inner.powf(1.0 + rho) };
        }
    }
    Ok(LambdaMatrix { rho, size: n, matrix })
}

#[derive(Debug, Clone, Serialize)]
pub struct PerronResult {
    pub rho: f64,
    pub lambda_max: f64,
    /// `-log2 lambda_max`, bits.
    pub f_infinity: f64,
    /// `v_max / v_min` of the eigenvector below.
    pub eigen_ratio: f64,
    /// Positive `v` with `v^T Lambda = lambda_max v^T`, scaled to max 1.
    pub eigenvector: Vec<f64>,
    pub iterations: usize,
}

/// Perron root of a nonnegative irreducible matrix and its left eigenvector.
///
/// Power iteration on `Lambda^T + I` (primitive, same eigenvector) from the
/// all-ones vector, stopped by the Collatz-Wielandt bounds.
pub fn perron(lambda: &LambdaMatrix) -> Result<PerronResult> {
    let n = lambda.size();
    if !strongly_connected(n, &|i, j| lambda.edge(i, j)) {
        return Err(Error::Reducible {
            closed_classes: closed_classes_of(n, &|i, j| lambda.edge(i, j)),
            hint: "; the Perron bound is not certified for a reducible weight matrix",
        });
    }
    let finish = |root: f64, v: Vec<f64>, iterations| {
        let vmax = v.iter().copied().fold(0.0, f64::max);
        let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
        PerronResult {
            rho: lambda.rho,
            lambda_max: root,
            f_infinity: if root == 1.0 { 0.0 } else { -root.log2() },
            eigen_ratio: vmax / vmin,
            eigenvector: v.iter().map(|x| x / vmax).collect(),
            iterations,
        }
    };
    if lambda.rho == 0.0 {
        // Columns are output-kernel rows: ones is the left eigenvector for 1.
        return Ok(finish(1.0, vec![1.0; n], 0));
    }

    let mut v = vec![1.0; n];
    let mut w = vec![0.0; n];
    let mut last = (0.0, f64::INFINITY);
    for iter in 1..=PERRON_MAX_ITER {
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = v[j] + (0..n).map(|i| lambda.get(i, j) * v[i]).sum::<f64>();
        }
        let (lo, hi) = w
            .iter()
            .zip(&v)
            .map(|(a, b)| a / b)
            .fold((f64::INFINITY, 0.0), |(lo, hi): (f64, f64), r| (lo.min(r), hi.max(r)));
        let top = w.iter().copied().fold(0.0, f64::max);
        v.iter_mut().zip(&w).for_each(|(x, y)| *x = y / top);
        last = (lo, hi);
        if hi - lo <= PERRON_TOL * hi {
            return Ok(finish(0.5 * (lo + hi) - 1.0, v, iter));
        }
    }
    Err(Error::NonConvergence {
        what: "Perron power iteration",
        iterations: PERRON_MAX_ITER,
        residual: last.1 - last.0,
    })
}

/// `F_infinity(rho) = -log2 lambda_max(rho)` with its eigenvector ratio.
pub fn gallager_exponent_infinite(channel: &UnitMemoryChannel, policy: &InputPolicy, rho: f64) -> Result<PerronResult> {
    perron(&lambda_matrix(channel, policy, rho)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentCurve {
    pub samples: Vec<PerronResult>,
    /// Indices `i` with `F(rho_{i+1}) < F(rho_i)`; expected empty.
    pub monotonicity_violations: Vec<usize>,
}

pub fn exponent_curve(channel: &UnitMemoryChannel, policy: &InputPolicy, rhos: &[f64]) -> Result<ExponentCurve> {
    let samples = rhos
        .iter()
        .map(|&r| gallager_exponent_infinite(channel, policy, r))
        .collect::<Result<Vec<_>>>()?;
    let monotonicity_violations = samples
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].rho > w[0].rho && w[1].f_infinity < w[0].f_infinity - 1e-12)
        .map(|(i, _)| i)
        .collect();
    Ok(ExponentCurve {
        samples,
        monotonicity_violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomCodingPoint {
    /// Bits per channel use.
    pub rate: f64,
    /// `max(0, max_rho F(rho) - rho R)`, bits.
    pub e_r: f64,
    pub rho_star: f64,
}

/// `E_r(R) = max_{0 <= rho <= 1} F_infinity(rho) - rho R`.
pub fn random_coding_exponent(
    channel: &UnitMemoryChannel,
    policy: &InputPolicy,
    rate: f64,
) -> Result<RandomCodingPoint> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::Validation(format!("rate = {rate} must be nonnegative")));
    }
    let objective =
        |rho: f64| -> Result<f64> { Ok(gallager_exponent_infinite(channel, policy, rho)?.f_infinity - rho * rate) };

    let steps = (1.0 / RHO_GRID_STEP).round() as usize;
    let mut best = (0.0, 0.0);
    let mut best_k = 0;
    for k in 0..=steps {
        let rho = (k as f64 * RHO_GRID_STEP).min(1.0);
        let val = objective(rho)?;
        if val > best.1 {
            best = (rho, val);
            best_k = k;
        }
    }

    // Golden section on the grid cell pair around the best sample.
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = (best_k.saturating_sub(1) as f64 * RHO_GRID_STEP).max(0.0);
    let mut hi = ((best_k + 1) as f64 * RHO_GRID_STEP).min(1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while hi - lo > RHO_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1)?;
        }
    }
    for (rho, val) in [(x1, f1), (x2, f2)] {
        if val > best.1 {
            best = (rho, val);
        }
    }
    Ok(RandomCodingPoint {
        rate,
        e_r: best.1.max(0.0),
        rho_star: best.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBound {
    pub rate: f64,
    pub n: usize,
    pub e_r: f64,
    pub rho_star: f64,
    /// `4 |B| (v_max / v_min)`, or `4 (v_max / v_min)` when the state is known.
    pub coefficient: f64,
    /// `log2(coefficient) - n E_r`, uncapped.
    pub log2_raw_bound: f64,
    /// `min(1, 2^log2_raw_bound)`.
    pub bound: f64,
    /// `rho* log2|B| / n`, the finite-length term dropped from the exponent.
    pub finite_length_term: f64,
    /// True when that term exceeds 1e-3 bits.
    pub short_block: bool,
}

pub fn error_probability_bound(
    channel: &UnitMemoryChannel,
    policy: &InputPolicy,
    rate: f64,
    n: usize,
    state_known: bool,
) -> Result<ErrorBound> {
    if n == 0 {
        return Err(Error::Validation("block length must be at least 1".into()));
    }
    let point = random_coding_exponent(channel, policy, rate)?;
    let ratio = gallager_exponent_infinite(channel, policy, point.rho_star)?.eigen_ratio;
    let states = channel.output_size() as f64;
    let coefficient = 4.0 * if state_known { 1.0 } else { states } * ratio;
    let log2_raw_bound = coefficient.log2() - n as f64 * point.e_r;
    let finite_length_term = point.rho_star * states.log2() / n as f64;
    Ok(ErrorBound {
        rate,
        n,
        e_r: point.e_r,
        rho_star: point.rho_star,
        coefficient,
        log2_raw_bound,
        bound: log2_raw_bound.exp2().min(1.0),
        finite_length_term,
        short_block: finite_length_term > 1e-3,
    })
}

fn check_start(lambda: &LambdaMatrix, n: usize, b_init: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Validation("horizon must be at least 1".into()));
    }
    if b_init >= lambda.size() {
        return Err(Error::Validation(format!(
            "initial symbol {b_init} is outside the output alphabet"
        )));
    }
    Ok(())
}

/// `-(1/n) log2 sum_{s_1..s_n} prod_i Lambda(s_i, s_{i-1})` with
/// `s_0 = b_init`, by repeated vector-matrix products.
pub fn finite_horizon_exponent_oracle(
    channel: &UnitMemoryChannel,
    policy: &InputPolicy,
    rho: f64,
    n: usize,
    b_init: usize,
) -> Result<f64> {
    let lambda = lambda_matrix(channel, policy, rho)?;
    check_start(&lambda, n, b_init)?;
    let size = lambda.size();
    // mass[s]: total weight of the paths currently ending in s
    let mut mass = vec![0.0; size];
    mass[b_init] = 1.0;
    for _ in 0..n {
        mass = (0..size)
            .map(|s| (0..size).map(|sp| lambda.get(s, sp) * mass[sp]).sum())
            .collect();
    }
    Ok(-mass.iter().sum::<f64>().log2() / n as f64)
}

/// The same quantity by explicit enumeration of every state path.
pub fn finite_horizon_exponent_paths(
    channel: &UnitMemoryChannel,
    policy: &InputPolicy,
    rho: f64,
    n: usize,
    b_init: usize,
) -> Result<f64> {
    let lambda = lambda_matrix(channel, policy, rho)?;
    check_start(&lambda, n, b_init)?;
    let size = lambda.size();
    let paths = (size as f64).powi(n as i32);
    if n > MAX_ENUMERATION_HORIZON || paths > (1u64 << 24) as f64 {
        return Err(Error::Validation(format!(
            "enumerating {size}^{n} paths is out of range; use the matrix-product oracle"
        )));
    }
    let mut total = 0.0;
    let mut path = vec![0usize; n];
    loop {
        let mut prod = 1.0;
        let mut prev = b_init;
        for &s in &path {
            prod *= lambda.get(s, prev);
            prev = s;
        }
        total += prod;
        // odometer increment
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(-total.log2() / n as f64);
            }
            i -= 1;
            path[i] += 1;
            if path[i] < size {
                break;
            }
            path[i] = 0;
        }
    }
}
