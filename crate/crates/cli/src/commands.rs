use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use umco::format::{bssc_sweep_csv, capacity_curve_csv, error_bound_csv, exponent_curve_csv, format_matrix};
use umco::*;

use crate::args::*;
use crate::CheckFailed;

/// A channel ready for the solvers, with whatever came along with it.
struct Loaded {
    name: String,
    channel: UnitMemoryChannel,
    cost: Option<CostFunction>,
    bssc: Option<BsscParams>,
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::Validation(msg.into()).into()
}

/// Recovers `(alpha, beta)` when the kernel is exactly a BSSC.
fn detect_bssc(channel: &UnitMemoryChannel) -> Option<BsscParams> {
    if channel.input_size() != 2 || channel.output_size() != 2 {
        return None;
    }
    let p = BsscParams::new(channel.prob(0, 0, 0), channel.prob(1, 0, 0)).ok()?;
    let same = bssc_channel(p)
        .kernel()
        .iter()
        .zip(channel.kernel())
        .all(|(x, y)| (x - y).abs() <= 1e-12);
    same.then_some(p)
}

fn load(args: &ChannelArgs) -> Result<Loaded> {
    match (&args.channel, args.alpha, args.beta) {
        (Some(path), _, _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let doc = load_channel_document(&text).with_context(|| format!("loading {}", path.display()))?;
            Ok(Loaded {
                name: doc.name.unwrap_or_else(|| path.display().to_string()),
                bssc: detect_bssc(&doc.channel),
                channel: doc.channel,
                cost: doc.cost,
            })
        }
        (None, Some(alpha), Some(beta)) => {
            let p = BsscParams::new(alpha, beta)?;
            Ok(Loaded {
                name: format!("BSSC(alpha={alpha}, beta={beta})"),
                channel: bssc_channel(p),
                cost: Some(bssc_cost_function()),
                bssc: Some(p),
            })
        }
        _ => Err(invalid("give --channel <file> or both --alpha and --beta")),
    }
}

fn cost_for(loaded: &Loaded, multiplier: Option<f64>) -> Result<Option<&CostFunction>> {
    match (multiplier, &loaded.cost) {
        (None, _) => Ok(None),
        (Some(_), Some(c)) => Ok(Some(c)),
        (Some(_), None) => Err(invalid("--multiplier needs a cost in the channel file")),
    }
}

fn check_tol(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(invalid(format!("--{name} must be positive, got {x}")));
    }
    Ok(())
}

fn infinite_options(s: &SolverArgs) -> Result<InfiniteOptions> {
    check_tol("tol", s.tol)?;
    check_tol("inner-tol", s.inner_tol)?;
    Ok(InfiniteOptions {
        tol: s.tol,
        max_iter: s.max_iter,
        inner: InnerOptions {
            tol: s.inner_tol,
            max_iter: s.inner_max_iter,
        },
    })
}

fn write_out(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Six decimals, without the `-0.000000` that rounding noise produces.
fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        s[1..].to_owned()
    } else {
        s
    }
}

fn vector(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|&x| fixed6(x)).collect();
    format!("[{}]", cells.join(" "))
}

fn solve_infinite(
    loaded: &Loaded,
    method: Method,
    multiplier: Option<f64>,
    opts: &InfiniteOptions,
) -> Result<InfiniteHorizonSolution> {
    let cost = cost_for(loaded, multiplier)?;
    let sol = match method {
        Method::Rvi => relative_value_iteration(&loaded.channel, cost, multiplier, opts)?,
        Method::Pi => {
            let start = InputPolicy::uniform_for(&loaded.channel);
            let pi_opts = InfiniteOptions {
                max_iter: opts.max_iter.min(InfiniteOptions::policy_iteration().max_iter),
                ..*opts
            };
            policy_iteration(&loaded.channel, &start, cost, multiplier, &pi_opts)?
        }
    };
    Ok(sol)
}

pub fn fb_capacity(a: FbCapacityArgs) -> Result<()> {
    let loaded = load(&a.channel)?;
    let opts = infinite_options(&a.solver)?;
    let sol = solve_infinite(&loaded, a.method, a.multiplier, &opts)?;

    if let Some(path) = &a.out {
        let mut csv = String::from("b_prev,bias_bits,invariant_prob");
        for x in 0..loaded.channel.input_size() {
            let _ = write!(csv, ",pi_{x}");
        }
        csv.push('\n');
        for b in 0..loaded.channel.output_size() {
            let nu = sol
                .invariant_dist
                .as_ref()
                .map(|d| d.weights()[b].to_string())
                .unwrap_or_default();
            let _ = write!(csv, "{b},{},{nu}", sol.bias[b]);
            for p in sol.policy.row(b) {
                let _ = write!(csv, ",{p}");
            }
            csv.push('\n');
        }
        write_out(path, &csv)?;
    }

    match a.format {
        OutputFormat::Json => print_json(&sol),
        OutputFormat::Text => {
            let method = match a.method {
                Method::Rvi => "relative value iteration",
                Method::Pi => "policy iteration",
            };
            println!("channel: {}", loaded.name);
            println!(
                "method: {method}, {} iterations, residual {:.2e}",
                sol.iterations, sol.span_residual
            );
            if let Some(s) = sol.multiplier {
                println!("multiplier s: {s} (gain is the penalized average reward)");
            }
            println!("gain: {} bits per channel use", fixed6(sol.gain));
            println!("policy pi(a | b_prev):");
            print!("{}", format_matrix(&sol.policy.to_rows(), 6));
            println!("bias V(b_prev): {}", vector(&sol.bias));
            println!("output kernel P(b | b_prev):");
            print!("{}", format_matrix(&sol.output_kernel.to_rows(), 6));
            match &sol.invariant_dist {
                Some(nu) => println!("invariant law: {}", vector(nu.weights())),
                None => println!("invariant law: none (output chain is reducible)"),
            }
            Ok(())
        }
    }
}

pub fn finite_horizon(a: FiniteHorizonArgs) -> Result<()> {
    let loaded = load(&a.channel)?;
    check_tol("tol", a.tol)?;
    let inner = InnerOptions {
        tol: a.tol,
        max_iter: a.inner_max_iter,
    };
    let cost = cost_for(&loaded, a.multiplier)?;
    let sol = solve_finite_horizon(&loaded.channel, a.horizon, cost, a.multiplier, &inner)?;
    let verdict = classify_non_nested(&sol, a.nested_tol);
    let uniform = Distribution::uniform(loaded.channel.output_size())?;
    let ftfi = ftfi_capacity(&sol, &uniform)?;

    if let Some(path) = &a.out {
        let mut csv = String::from("stage,b_prev,value_bits");
        for x in 0..loaded.channel.input_size() {
            let _ = write!(csv, ",pi_{x}");
        }
        csv.push('\n');
        for (t, (values, policy)) in sol.values.iter().zip(&sol.policies).enumerate() {
            for (b, v) in values.iter().enumerate() {
                let _ = write!(csv, "{t},{b},{v}");
                for p in policy.row(b) {
                    let _ = write!(csv, ",{p}");
                }
                csv.push('\n');
            }
        }
        write_out(path, &csv)?;
    }

    match a.format {
        OutputFormat::Json => print_json(&serde_json::json!({
            "solution": sol,
            "nestedness": verdict,
            "ftfi_uniform_initial": ftfi,
        })),
        OutputFormat::Text => {
            let uses = (a.horizon + 1) as f64;
            println!("channel: {}", loaded.name);
            println!("horizon: n = {} ({} channel uses)", a.horizon, a.horizon + 1);
            println!("V_0(b_prev): {}", vector(&sol.values[0]));
            let avg: Vec<f64> = sol.values[0].iter().map(|v| v / uses).collect();
            println!("V_0(b_prev)/(n+1): {}", vector(&avg));
            println!(
                "FTFI capacity, uniform initial: {ftfi:.6} bits ({:.6} per use)",
                ftfi / uses
            );
            println!(
                "nestedness: {} (state spread at t=0 {:.2e}, policy spread {:.2e})",
                serde_json::to_value(verdict.kind)?.as_str().unwrap_or_default(),
                verdict.state_spread[0],
                verdict.policy_spread
            );
            println!("stage 0 policy pi(a | b_prev):");
            print!("{}", format_matrix(&sol.policies[0].to_rows(), 6));
            Ok(())
        }
    }
}

pub fn constrained(a: ConstrainedArgs) -> Result<()> {
    let loaded = load(&a.channel)?;
    let gamma = loaded
        .cost
        .clone()
        .ok_or_else(|| invalid("the channel has no cost; add `cost` to the channel file"))?;
    check_tol("dual-tol", a.dual_tol)?;
    check_tol("cost-tol", a.cost_tol)?;
    let opts = ConstrainedOptions {
        dual_tol: a.dual_tol,
        cost_tol: a.cost_tol,
        solver: infinite_options(&a.solver)?,
        ..Default::default()
    };
    let kappas = match (&a.sweep, a.kappa) {
        (Some(sweep), _) => {
            let (name, values) = parse_named_range(sweep).map_err(invalid)?;
            if name != "kappa" {
                bail!(invalid(format!("constrained sweeps kappa only, got `{name}`")));
            }
            values
        }
        (None, Some(k)) => vec![k],
        (None, None) => unreachable!("clap requires --kappa or --sweep"),
    };
    let points = capacity_cost_curve(&loaded.channel, &gamma, &kappas, &opts)?;

    if let Some(path) = &a.out {
        write_out(path, &capacity_curve_csv(&points))?;
    }
    match a.format {
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = points
                .iter()
                .map(|p| match &p.result {
                    Ok(r) => serde_json::to_value(r).unwrap_or_default(),
                    Err(e) => serde_json::json!({ "kappa": p.kappa, "error": e.to_string() }),
                })
                .collect();
            print_json(&rows)?;
        }
        OutputFormat::Text => {
            println!("channel: {}", loaded.name);
            for p in &points {
                match &p.result {
                    Ok(r) => {
                        println!(
                            "kappa {:.6}: capacity {:.6} bits, s* {:.6}, cost {:.6}, binding {}",
                            p.kappa, r.capacity, r.multiplier, r.achieved_cost, r.binding
                        );
                        if points.len() == 1 {
                            if let Some(k) = r.kappa_max {
                                println!("unconstrained optimal cost (kappa_max): {k:.6}");
                            }
                            println!("policy pi(a | b_prev):");
                            print!("{}", format_matrix(&r.policy.to_rows(), 6));
                        }
                    }
                    Err(e) => println!("kappa {:.6}: failed: {e}", p.kappa),
                }
            }
        }
    }
    // Report every point, then fail on the first error.
    if let Some(err) = points.into_iter().find_map(|p| p.result.err()) {
        return Err(err.into());
    }
    Ok(())
}

pub fn bssc(a: BsscArgs) -> Result<()> {
    let params = BsscParams::new(a.alpha, a.beta)?;
    let mut alphas = vec![a.alpha];
    let mut betas = vec![a.beta];
    let mut kappas: Option<Vec<f64>> = None;
    for sweep in &a.sweep {
        let (name, values) = parse_named_range(sweep).map_err(invalid)?;
        match name.as_str() {
            "alpha" => alphas = values,
            "beta" => betas = values,
            "kappa" => kappas = Some(values),
            other => bail!(invalid(format!("unknown sweep variable `{other}`"))),
        }
    }

    let free = bssc_closed_form(params)?;
    let at_kappa = a.kappa.map(|k| bssc_constrained_closed_form(params, k)).transpose()?;
    let markov_kappa = match &at_kappa {
        Some(s) if s.constrained => s.kappa.unwrap_or(free.nu),
        _ => free.nu,
    };
    let markov = bssc_nofeedback_markov(params, markov_kappa);

    if !a.sweep.is_empty() {
        let points: Vec<_> = match &kappas {
            Some(ks) => ks.iter().flat_map(|&k| bssc_sweep(&alphas, &betas, Some(k))).collect(),
            None => bssc_sweep(&alphas, &betas, a.kappa),
        };
        let csv = bssc_sweep_csv(&points);
        match &a.out {
            Some(path) => write_out(path, &csv)?,
            None if a.format == OutputFormat::Text => print!("{csv}"),
            None => {}
        }
    } else if a.out.is_some() {
        bail!(invalid("--out needs at least one --sweep"));
    }

    match a.format {
        OutputFormat::Json => print_json(&serde_json::json!({
            "unconstrained": free,
            "constrained": at_kappa,
            "nofeedback_markov": markov.as_ref().ok(),
        })),
        OutputFormat::Text => {
            let show = |s: &BsscSolution| {
                println!("  lambda {:.6}  nu {:.6}  mu {:.6}", s.lambda, s.nu, s.bssc_exponent);
                if let Some(lb) = s.lambda_bar {
                    println!("  lambda_bar {lb:.6}");
                }
                println!("  capacity {:.6} bits per channel use", s.capacity);
                if let Some(w) = &s.warning {
                    println!("  warning: {w}");
                }
            };
            println!("BSSC(alpha={}, beta={})", a.alpha, a.beta);
            println!("feedback capacity:");
            show(&free);
            println!("  policy pi(a | b_prev):");
            print!("{}", format_matrix(&free.policy()?.to_rows(), 6));
            if let Some(s) = &at_kappa {
                if s.constrained {
                    println!("with average cost <= {}:", s.kappa.unwrap_or_default());
                    show(s);
                } else {
                    println!(
                        "with average cost <= {}: budget not binding (kappa_max = nu = {:.6})",
                        s.kappa.unwrap_or_default(),
                        free.nu
                    );
                }
            }
            match &markov {
                Ok(m) => {
                    println!(
                        "no-feedback Markov input (kappa {markov_kappa:.6}, sigma {:.6}):",
                        m.sigma.unwrap_or(f64::NAN)
                    );
                    print!("{}", format_matrix(&m.matrix, 6));
                }
                Err(e) => println!("no-feedback Markov input: {e}"),
            }
            Ok(())
        }
    }
}

pub fn nofb_verify(a: NofbArgs) -> Result<()> {
    let params = BsscParams::new(a.alpha, a.beta)?;
    let free = bssc_closed_form(params)?;
    let kappa = a.kappa.unwrap_or(free.nu);
    let target = bssc_constrained_closed_form(params, kappa)?;
    let markov = match a.diagonal {
        Some(d) => MarkovInput::symmetric(d)?,
        None => bssc_nofeedback_markov(params, kappa.min(free.nu))?,
    };
    let initial = match a.initial {
        Some(b) => Distribution::point_mass(2, b)?,
        None => Distribution::uniform(2)?,
    };
    let report = verify_nofb_induces_fb(
        &bssc_channel(params),
        &markov,
        &target.policy()?,
        &initial,
        a.horizon,
        a.tol,
    )?;
    match a.format {
        OutputFormat::Json => print_json(&report)?,
        OutputFormat::Text => {
            println!("BSSC(alpha={}, beta={}), kappa {kappa:.6}", a.alpha, a.beta);
            println!("Markov input P(a_i | a_(i-1)):");
            print!("{}", format_matrix(&markov.matrix, 6));
            println!("target policy pi(a | b_prev):");
            print!("{}", format_matrix(&target.policy()?.to_rows(), 6));
            println!(
                "stages 0..={}: max deviation {:.3e} (tol {:.1e})",
                a.horizon, report.max_deviation, a.tol
            );
            if let Some(s) = report.first_violation {
                println!(
                    "first violation at stage {s} (deviation {:.3e})",
                    report.stage_deviations[s]
                );
            }
            if !report.skipped.is_empty() {
                println!("skipped (stage, b_prev) with zero mass: {:?}", report.skipped);
            }
            println!("holds: {}", report.holds);
        }
    }
    if !report.holds {
        return Err(CheckFailed(format!(
            "the Markov input does not induce the target policy (max deviation {:.3e})",
            report.max_deviation
        ))
        .into());
    }
    Ok(())
}

pub fn error_exponent(a: ExponentArgs) -> Result<()> {
    let loaded = load(&a.channel)?;
    let ch = &loaded.channel;
    let policy = match a.policy {
        PolicyChoice::Uniform => InputPolicy::uniform_for(ch),
        PolicyChoice::Optimal => {
            policy_iteration(
                ch,
                &InputPolicy::uniform_for(ch),
                None,
                None,
                &InfiniteOptions::policy_iteration(),
            )?
            .policy
        }
        PolicyChoice::ClosedForm => {
            let p = loaded
                .bssc
                .ok_or_else(|| invalid("--policy closed-form needs a BSSC channel"))?;
            bssc_closed_form(p)?.policy()?
        }
    };
    let rhos = match &a.rho_grid {
        Some(r) => Some(parse_range(r).map_err(invalid)?),
        None if a.rates.is_none() => Some(parse_range("0:1:0.1").map_err(invalid)?),
        None => None,
    };
    let rates = a.rates.as_deref().map(parse_range).transpose().map_err(invalid)?;

    let curve = rhos.map(|r| exponent_curve(ch, &policy, &r)).transpose()?;
    let bounds = rates
        .map(|rs| {
            rs.iter()
                .map(|&r| error_probability_bound(ch, &policy, r, a.n, a.state_known))
                .collect::<umco::Result<Vec<_>>>()
        })
        .transpose()?;

    match (&bounds, &curve) {
        (Some(b), Some(c)) => {
            if let Some(path) = &a.out {
                write_out(path, &error_bound_csv(b))?;
            }
            if let Some(path) = &a.rho_out {
                write_out(path, &exponent_curve_csv(c))?;
            }
        }
        (Some(b), None) => {
            if let Some(path) = &a.out {
                write_out(path, &error_bound_csv(b))?;
            }
        }
        (None, Some(c)) => {
            if let Some(path) = a.rho_out.as_ref().or(a.out.as_ref()) {
                write_out(path, &exponent_curve_csv(c))?;
            }
        }
        (None, None) => {}
    }

    match a.format {
        OutputFormat::Json => print_json(&serde_json::json!({
            "policy": policy,
            "exponent_curve": curve,
            "bounds": bounds,
        })),
        OutputFormat::Text => {
            println!("channel: {}", loaded.name);
            println!("policy pi(a | b_prev):");
            print!("{}", format_matrix(&policy.to_rows(), 6));
            if let Some(c) = &curve {
                println!(
                    "{:>8} {:>14} {:>14} {:>12}",
                    "rho", "lambda_max", "F_inf (bits)", "v_max/v_min"
                );
                for s in &c.samples {
                    println!(
                        "{:>8.4} {:>14.10} {:>14.10} {:>12.6}",
                        s.rho, s.lambda_max, s.f_infinity, s.eigen_ratio
                    );
                }
                if !c.monotonicity_violations.is_empty() {
                    println!("warning: F_inf decreases after samples {:?}", c.monotonicity_violations);
                }
            }
            if let Some(bs) = &bounds {
                println!(
                    "block length n = {}, coefficient {} ({})",
                    a.n,
                    bs.first().map(|b| format!("{:.4}", b.coefficient)).unwrap_or_default(),
                    if a.state_known {
                        "state known"
                    } else {
                        "4 |B| v_max/v_min"
                    }
                );
                println!("{:>10} {:>14} {:>10} {:>14}", "rate", "E_r (bits)", "rho*", "bound");
                for b in bs {
                    println!(
                        "{:>10.4} {:>14.10} {:>10.6} {:>14.6e}",
                        b.rate, b.e_r, b.rho_star, b.bound
                    );
                }
                if let Some(b) = bs
                    .iter()
                    .filter(|b| b.short_block)
                    .max_by(|x, y| x.finite_length_term.total_cmp(&y.finite_length_term))
                {
                    println!(
                        "note: the finite-length term rho* log2|B| / n reaches {:.2e} bits at rate {:.4}; it is dropped from E_r",
                        b.finite_length_term, b.rate
                    );
                }
            }
            Ok(())
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateFile {
    policy: Vec<Vec<f64>>,
    bias: Vec<f64>,
    gain: Option<f64>,
    gains: Option<Vec<f64>>,
}

fn report_conditions(name: &str, r: &ConditionReport) {
    println!(
        "{name}: {} (worst violation {:.3e}, tol {:.1e})",
        if r.passed { "passed" } else { "failed" },
        r.worst_violation,
        r.tolerance
    );
}

pub fn check_conditions(a: CheckArgs) -> Result<()> {
    let loaded = load(&a.channel)?;
    let opts = infinite_options(&a.solver)?;
    let cost = cost_for(&loaded, a.multiplier)?;
    let ch = &loaded.channel;

    let passed = if let Some(path) = &a.candidate {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: CandidateFile =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let gains = match (file.gain, file.gains) {
            (Some(g), None) => vec![g; ch.output_size()],
            (None, Some(gs)) => gs,
            _ => bail!(invalid("the candidate needs exactly one of `gain` and `gains`")),
        };
        let candidate = GeneralizedCandidate {
            gains,
            bias: file.bias,
            policy: InputPolicy::from_rows(file.policy)?,
            multiplier: a.multiplier,
            cost: cost.cloned(),
        };
        let tol = a.check_tol.unwrap_or(10.0 * opts.tol);
        let report = generalized_dp_check(ch, &candidate, tol)?;
        match a.format {
            OutputFormat::Json => print_json(&report)?,
            OutputFormat::Text => {
                println!("channel: {}", loaded.name);
                println!(
                    "candidate: {} (constant gain: {})",
                    path.display(),
                    report.constant_gain
                );
                report_conditions("gain equation", &report.gain_equation);
                report_conditions("bias equation", &report.bias_equation);
            }
        }
        report.passed
    } else if let Some(n) = a.horizon {
        let inner = opts.inner;
        let sol = solve_finite_horizon(ch, n, cost, a.multiplier, &inner)?;
        let tol = a.check_tol.unwrap_or(10.0 * inner.tol);
        let report = verify_optimality_conditions(ch, &sol, tol)?;
        match a.format {
            OutputFormat::Json => print_json(&report)?,
            OutputFormat::Text => {
                println!("channel: {}", loaded.name);
                report_conditions(&format!("finite-horizon conditions, n = {n}"), &report);
            }
        }
        report.passed
    } else {
        let sol = relative_value_iteration(ch, cost, a.multiplier, &opts)?;
        let tol = a.check_tol.unwrap_or(10.0 * opts.tol);
        let report = verify_bellman_conditions(ch, &sol, tol)?;
        match a.format {
            OutputFormat::Json => print_json(&report)?,
            OutputFormat::Text => {
                println!("channel: {}", loaded.name);
                println!("gain: {} bits per channel use", fixed6(sol.gain));
                report_conditions("Bellman conditions", &report);
            }
        }
        report.passed
    };
    if !passed {
        return Err(CheckFailed("optimality conditions violated".into()).into());
    }
    Ok(())
}
