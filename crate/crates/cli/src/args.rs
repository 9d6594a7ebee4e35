use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Feedback capacity, capacity-cost curves and error exponents for
/// unit-memory channels. Logarithms are base 2; rates and capacities are in
/// bits per channel use.
///
/// Exit status: 0 on success, 1 on invalid input or when `nofb-verify` or
/// `check-conditions` finds the property false, 2 when a solver fails to
/// converge.
#[derive(Debug, Parser)]
#[command(name = "umco", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infinite-horizon feedback capacity (relative value or policy iteration).
    FbCapacity(FbCapacityArgs),
    /// Finite-horizon dynamic programming over stages 0..=n.
    FiniteHorizon(FiniteHorizonArgs),
    /// Capacity under an average-cost budget, at one budget or over a sweep.
    Constrained(ConstrainedArgs),
    /// Closed forms for the binary state symmetric channel.
    Bssc(BsscArgs),
    /// Checks that the no-feedback Markov input reproduces the feedback policy.
    NofbVerify(NofbArgs),
    /// Gallager exponent, random-coding exponent and ML error bound.
    ErrorExponent(ExponentArgs),
    /// Solves and then checks the optimality conditions, or checks a candidate.
    CheckConditions(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Relative value iteration with a span stopping rule.
    Rvi,
    /// Policy iteration from the uniform policy.
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyChoice {
    /// BSSC closed-form policy (channel must be a BSSC).
    ClosedForm,
    /// Optimal policy from policy iteration.
    Optimal,
    /// Uniform input in every state.
    Uniform,
}

/// Where the channel comes from: a file, or a BSSC given by its parameters.
#[derive(Debug, Clone, Args)]
pub struct ChannelArgs {
    /// Channel file (JSON: input_size, output_size, kernel[b_prev][a][b],
    /// optional cost[b_prev][a], optional name).
    #[arg(long, conflicts_with_all = ["alpha", "beta"])]
    pub channel: Option<PathBuf>,
    /// BSSC parameter alpha (use with --beta instead of --channel).
    #[arg(long, requires = "beta")]
    pub alpha: Option<f64>,
    /// BSSC parameter beta.
    #[arg(long, requires = "alpha")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Outer tolerance: span for value iteration, policy change for policy
    /// iteration.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Outer iteration limit.
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Gap tolerance of the per-state inner solver, bits.
    #[arg(long, default_value_t = 1e-12)]
    pub inner_tol: f64,
    /// Inner iteration limit.
    #[arg(long, default_value_t = 100_000)]
    pub inner_max_iter: usize,
}

#[derive(Debug, Args)]
pub struct FbCapacityArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Method::Rvi)]
    pub method: Method,
    /// Lagrange multiplier s; requires a cost in the channel file.
    #[arg(long)]
    pub multiplier: Option<f64>,
    /// CSV of the policy, bias and invariant law per state.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct FiniteHorizonArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Horizon n (stages 0..=n).
    #[arg(long)]
    pub horizon: usize,
    /// Lagrange multiplier s; requires a cost in the channel file.
    #[arg(long)]
    pub multiplier: Option<f64>,
    /// Inner gap tolerance, bits.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub inner_max_iter: usize,
    /// Tolerance for the nestedness verdict, bits.
    #[arg(long, default_value_t = 1e-6)]
    pub nested_tol: f64,
    /// CSV of values and policies per stage and state.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct ConstrainedArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Budget kappa.
    #[arg(long, required_unless_present = "sweep")]
    pub kappa: Option<f64>,
    /// Budget sweep, `kappa=start:end:step` (endpoints inclusive within half a step).
    #[arg(long)]
    pub sweep: Option<String>,
    /// Bisection stops when the multiplier bracket is this narrow.
    #[arg(long, default_value_t = 1e-8)]
    pub dual_tol: f64,
    /// Bisection stops when the achieved cost is this close to the budget.
    #[arg(long, default_value_t = 1e-6)]
    pub cost_tol: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// CSV of the capacity-cost curve.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct BsscArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    /// Budget for the constrained closed form.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Sweep over `kappa=a:b:s`, `alpha=a:b:s` or `beta=a:b:s`; repeatable.
    #[arg(long)]
    pub sweep: Vec<String>,
    /// CSV of the sweep.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct NofbArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    /// Budget; defaults to nu of the unconstrained solution.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Override the Markov input diagonal (to test a perturbed input).
    #[arg(long)]
    pub diagonal: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub horizon: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Initial output symbol; the default is the uniform law.
    #[arg(long)]
    pub initial: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct ExponentArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, value_enum, default_value_t = PolicyChoice::Optimal)]
    pub policy: PolicyChoice,
    /// Rate sweep `start:end:step`, bits.
    #[arg(long)]
    pub rates: Option<String>,
    /// rho sweep `start:end:step` within [0, 1].
    #[arg(long)]
    pub rho_grid: Option<String>,
    /// Block length for the error-probability bound.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Drop the output-alphabet factor from the bound coefficient.
    #[arg(long)]
    pub state_known: bool,
    /// CSV of the rate sweep (or of the rho sweep when --rates is absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of the rho sweep when both sweeps are requested.
    #[arg(long)]
    pub rho_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Check the finite-horizon solution at this horizon instead of the
    /// infinite-horizon one.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Candidate file (JSON: policy, bias, and gain or per-state gains) to
    /// check instead of a solver result.
    #[arg(long, conflicts_with = "horizon")]
    pub candidate: Option<PathBuf>,
    /// Lagrange multiplier s; requires a cost in the channel file.
    #[arg(long)]
    pub multiplier: Option<f64>,
    /// Check tolerance; defaults to 10x the solver tolerance.
    #[arg(long)]
    pub check_tol: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

/// `start:end:step`, inclusive of `end` within half a step.
pub fn parse_range(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, s] = parts.as_slice() else {
        return Err(format!("range `{text}` is not start:end:step"));
    };
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{x}` in range `{text}` is not a number"))
    };
    let (start, end, step) = (num(a)?, num(b)?, num(s)?);
    if !(start.is_finite() && end.is_finite() && step.is_finite()) {
        return Err(format!("range `{text}` is not finite"));
    }
    if step <= 0.0 {
        return Err(format!("range `{text}` needs a positive step"));
    }
    if end < start {
        return Err(format!("range `{text}` ends before it starts"));
    }
    let count = ((end - start) / step + 0.5).floor() as usize;
    // Rounding to 12 decimals keeps 0.1 * 3 from printing as 0.30000000000000004.
    Ok((0..=count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// `name=start:end:step`.
pub fn parse_named_range(text: &str) -> Result<(String, Vec<f64>), String> {
    let (name, range) = text
        .split_once('=')
        .ok_or_else(|| format!("sweep `{text}` is not name=start:end:step"))?;
    Ok((name.trim().to_owned(), parse_range(range)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_include_endpoint() {
        assert_eq!(parse_range("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_range("0:1:0.05").unwrap().len(), 21);
        assert_eq!(parse_range("0:0.4:0.01").unwrap().len(), 41);
        assert_eq!(parse_range("0:0.3:0.1").unwrap(), vec![0.0, 0.1, 0.2, 0.3]);
        // 0.96 is within half a step of 1
        assert_eq!(*parse_range("0:0.96:0.25").unwrap().last().unwrap(), 1.0);
        assert_eq!(parse_range("0.5:0.5:0.1").unwrap(), vec![0.5]);
    }

    #[test]
    fn bad_ranges() {
        for bad in ["0:1", "0:1:0", "1:0:0.1", "a:1:0.1", "0:1:-1", "0:inf:1"] {
            assert!(parse_range(bad).is_err(), "{bad}");
        }
        assert!(parse_named_range("0:1:0.1").is_err());
        assert_eq!(parse_named_range("kappa=0:1:0.5").unwrap().0, "kappa");
    }
}
