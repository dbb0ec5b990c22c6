//! `kramers-lz`: run built-in spin models or `.hamspec` files through
//! propagation, no-scattering verification, level diagrams and sweeps.

mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use kramers_lz::analysis::{
    level_diagram, partner_pairs, probability_vs_time, run_propagation, scattering_matrix, sweep,
    theta_identity_defect, verify_no_scattering, ScatteringProblem, StepPolicy, SweepConfig, SweepSpec,
    TheoremStatus, VerifyOptions, DEFAULT_TOL,
};
use kramers_lz::hamiltonian::{check_hermitian, check_parity_symmetry, symmetric_sample_grid};
use kramers_lz::hamspec::{self, HamSpecDocument};
use kramers_lz::models::{DiabaticBasis, Model, ModelKind};
use kramers_lz::propagator::{default_steps, Propagation, TimeGrid};
use kramers_lz::{Error, Hamiltonian};

use output::{emit, Cell, Document, Format, Table};

/// Largest `‖U†U - I‖` accepted before a run is reported as a numerical abort.
const UNITARITY_ABORT: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "kramers-lz", version, about = "Multistate Landau-Zener scattering and Kramers-partner checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Check that every state has zero probability to reach its Kramers partner.
    Verify,
    /// Full scattering matrix (amplitudes and probabilities).
    Scatter,
    /// Instantaneous eigenvalues over [-T, T].
    Levels,
    /// Transition probabilities as functions of time.
    Curve,
    /// Repeat a propagation over a parameter range.
    Sweep,
    /// Static checks only: parity, dynamic symmetry, Hermiticity, partners.
    Check,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Scatter => "scatter",
            Command::Levels => "levels",
            Command::Curve => "curve",
            Command::Sweep => "sweep",
            Command::Check => "check",
        }
    }
}

#[derive(clap::Args, Debug, Clone)]
struct RunArgs {
    /// Built-in model: lz2, spin32, half-one, central-spin.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Model parameters, `key=value,key=value`.
    #[arg(long, global = true, requires = "model")]
    params: Option<String>,
    /// Hamiltonian file in `.hamspec` format.
    #[arg(long, global = true, conflicts_with = "model")]
    hamspec: Option<PathBuf>,
    /// Half-interval: evolution runs over (-T, T).
    #[arg(long = "T", global = true, default_value_t = 6.0, allow_negative_numbers = true)]
    half_interval: f64,
    /// Steps per half-interval (default: dt·max‖H‖ ≤ 0.05).
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Probability threshold for a zero.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL, allow_negative_numbers = true)]
    tol: f64,
    /// Checkpoint stride in steps for `curve`.
    #[arg(long, global = true, default_value_t = 100)]
    stride: usize,
    /// Transition pairs `from:to,from:to` (default: Kramers partners).
    #[arg(long, global = true)]
    pairs: Option<String>,
    /// Sweep, `key=start:stop:count` or `key*scale+key*scale=start:stop:count`.
    #[arg(long, global = true)]
    sweep: Option<String>,
    /// Number of samples for `levels`.
    #[arg(long, global = true, default_value_t = 601)]
    samples: usize,
    /// Continue eigenvalue branches instead of sorting at each time.
    #[arg(long, global = true)]
    branches: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "KRAMERS_LZ_WORKERS")]
    workers: Option<usize>,
    /// Double the step count until probabilities settle.
    #[arg(long, global = true)]
    converge: bool,
    /// Seed for the random superposition states used by `verify`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

/// Configuration errors, reported with exit code 2.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Numerical breakdowns, reported with exit code 3.
#[derive(Debug)]
struct Numerical(String);

impl fmt::Display for Numerical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Numerical {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Numerical>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::NotHermitian { .. } | Error::NonHermitianAt { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}

struct Input {
    problem: ScatteringProblem,
    model: Option<Model>,
    hamiltonian: Hamiltonian,
    document: Option<HamSpecDocument>,
    describe: Value,
}

fn parse_params(text: &str) -> Result<Vec<(String, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (key, value) =
                item.split_once('=').ok_or_else(|| usage(format!("parameter `{item}` is not key=value")))?;
            let value: f64 =
                value.trim().parse().map_err(|_| usage(format!("parameter `{}` has a non-numeric value", key.trim())))?;
            Ok((key.trim().to_string(), value))
        })
        .collect()
}

fn load_input(args: &RunArgs) -> Result<Input> {
    match (&args.model, &args.hamspec) {
        (Some(name), None) => {
            let kind: ModelKind = name.parse()?;
            let params = match &args.params {
                Some(text) => parse_params(text)?,
                None => Vec::new(),
            };
            let model = Model::with_params(kind, params.iter().map(|(k, v)| (k.as_str(), *v)))?;
            let problem = ScatteringProblem::from_model(&model)?;
            Ok(Input {
                problem,
                hamiltonian: model.operator_form()?,
                describe: json!({ "model": kind.name(), "params": model.params() }),
                model: Some(model),
                document: None,
            })
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let doc = hamspec::parse_named(&path.display().to_string(), &text)
                .map_err(|e| usage(format!("{}:{e}", path.display())))?;
            for w in &doc.warnings {
                eprintln!("warning: {}:{w}", path.display());
            }
            let h = doc.hamiltonian()?;
            let basis = DiabaticBasis::numbered(h.system().dim());
            let problem = ScatteringProblem::from_hamiltonian(h.clone(), basis)?;
            Ok(Input {
                problem,
                hamiltonian: h,
                describe: json!({ "hamspec": path.display().to_string(), "spins": doc.system.to_string() }),
                model: None,
                document: Some(doc),
            })
        }
        _ => Err(usage("give exactly one of --model or --hamspec")),
    }
}

fn validate(args: &RunArgs) -> Result<()> {
    if !(args.half_interval.is_finite() && args.half_interval > 0.0) {
        bail!(usage(format!("--T must be positive, got {}", args.half_interval)));
    }
    if args.steps == Some(0) {
        bail!(usage("--steps must be at least 1"));
    }
    if !(args.tol.is_finite() && args.tol > 0.0) {
        bail!(usage(format!("--tol must be positive, got {}", args.tol)));
    }
    if args.stride == 0 {
        bail!(usage("--stride must be at least 1"));
    }
    if args.workers == Some(0) {
        bail!(usage("--workers must be at least 1"));
    }
    Ok(())
}

fn policy(args: &RunArgs) -> StepPolicy {
    StepPolicy { steps: args.steps, converge: args.converge }
}

fn parse_pairs(text: &str, problem: &ScatteringProblem) -> Result<Vec<(usize, usize)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (a, b) = item.split_once(':').ok_or_else(|| usage(format!("pair `{item}` is not from:to")))?;
            Ok((problem.position(a.trim())?, problem.position(b.trim())?))
        })
        .collect()
}

fn requested_pairs(args: &RunArgs, problem: &ScatteringProblem) -> Result<Vec<(usize, usize)>> {
    match &args.pairs {
        Some(text) => parse_pairs(text, problem),
        None => Ok(partner_pairs(problem)?),
    }
}

fn pair_column(problem: &ScatteringProblem, (a, b): (usize, usize)) -> String {
    let labels = problem.basis().labels();
    format!("P_{}_{}", labels[a], labels[b])
}

fn check_unitarity(defect: f64) -> Result<()> {
    if defect > UNITARITY_ABORT {
        bail!(Numerical(format!("unitarity lost: ‖U†U - I‖ = {defect:.3e} exceeds {UNITARITY_ABORT:e}")));
    }
    Ok(())
}

fn meta(command: Command, args: &RunArgs, input: &Input) -> Value {
    json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "input": input.describe,
        "half_interval": args.half_interval,
        "tolerance": args.tol,
    })
}

fn grid_meta(p: &Propagation) -> Value {
    json!({ "start": p.grid.start(), "end": p.grid.end(), "steps": p.grid.len(), "dt": p.grid.dt() })
}

struct Outcome {
    document: Document,
    pass: bool,
}

fn cmd_verify(args: &RunArgs, input: &Input) -> Result<Outcome> {
    if let Some(doc) = &input.document {
        for d in doc.symmetry_diagnostics() {
            eprintln!("{}:{d}", doc.source);
        }
    }
    let opts = VerifyOptions { tol: args.tol, random_states: 10, seed: args.seed };
    let report = verify_no_scattering(&input.problem, args.half_interval, policy(args), &opts)?;
    let mut m = meta(Command::Verify, args, input);
    m["status"] = json!(report.status.describe());

    let mut table = Table::new(["from", "to", "probability", "tolerance", "pass"].map(String::from));
    match (&report.status, &report.scattering) {
        (TheoremStatus::SymmetryViolated, _) => {
            eprintln!(
                "FAIL: dynamic symmetry violated (max ‖ΘH(t)Θ⁻¹ - H(-t)‖ = {:.3e} at t = {}); not propagated",
                report.symmetry.max_deviation, report.symmetry.worst_time
            );
        }
        (_, Some(s)) => {
            check_unitarity(s.unitarity_defect)?;
            m["grid"] = serde_json::to_value(&s.grid)?;
            m["unitarity_defect"] = json!(s.unitarity_defect);
            for v in &s.verdicts {
                table.push(vec![
                    v.from.as_str().into(),
                    v.to.as_str().into(),
                    v.probability.into(),
                    args.tol.into(),
                    v.pass.into(),
                ]);
            }
            let verdict = if report.pass() { "PASS" } else { "FAIL" };
            match report.status {
                TheoremStatus::IntegerSpin => eprintln!(
                    "{}: largest partner probability {:.3e}",
                    report.status.describe(),
                    report.max_partner_probability()
                ),
                _ => eprintln!(
                    "{verdict}: largest partner probability {:.3e} (tolerance {:e}, {} steps, ‖U†U - I‖ = {:.1e})",
                    report.max_partner_probability(),
                    args.tol,
                    s.grid.steps,
                    s.unitarity_defect
                ),
            }
        }
        (_, None) => unreachable!("propagated reports carry a scattering matrix"),
    }
    let pass = report.pass();
    let extra = vec![("report", serde_json::to_value(&report)?)];
    Ok(Outcome { document: Document { meta: m, table, extra }, pass })
}

fn cmd_scatter(args: &RunArgs, input: &Input) -> Result<Outcome> {
    let (p, convergence) = run_propagation(input.problem.hamiltonian(), args.half_interval, policy(args))?;
    check_unitarity(p.unitarity_defect)?;
    let report = scattering_matrix(&input.problem, &p, args.tol)?;
    let mut m = meta(Command::Scatter, args, input);
    m["grid"] = grid_meta(&p);
    m["unitarity_defect"] = json!(p.unitarity_defect);
    m["theta_identity_defect"] = json!(theta_identity_defect(&input.problem, &p)?);
    m["convergence"] = serde_json::to_value(convergence)?;

    let mut table = Table::new(["from", "to", "re", "im", "probability"].map(String::from));
    for (from, label_from) in report.labels.iter().enumerate() {
        for (to, label_to) in report.labels.iter().enumerate() {
            let (re, im) = report.amplitudes[to][from];
            table.push(vec![
                label_from.as_str().into(),
                label_to.as_str().into(),
                re.into(),
                im.into(),
                report.probability(from, to).into(),
            ]);
        }
    }
    let extra = vec![
        ("labels", json!(report.labels)),
        ("probabilities", json!(report.probabilities)),
        ("kramers_pairs", serde_json::to_value(&report.kramers_pairs)?),
    ];
    Ok(Outcome { document: Document { meta: m, table, extra }, pass: true })
}

fn cmd_levels(args: &RunArgs, input: &Input) -> Result<Outcome> {
    let t = args.half_interval;
    let diagram = level_diagram(input.problem.hamiltonian(), -t, t, args.samples)?;
    let n = input.problem.dim();
    let mut table = Table::new(std::iter::once("t".to_string()).chain((1..=n).map(|k| format!("E{k}"))));
    for (i, &time) in diagram.times.iter().enumerate() {
        let values: Vec<f64> = if args.branches {
            diagram.branches.iter().map(|b| b[i]).collect()
        } else {
            diagram.sorted[i].clone()
        };
        table.push(std::iter::once(time).chain(values).map(Cell::from).collect());
    }
    let mut m = meta(Command::Levels, args, input);
    m["samples"] = json!(args.samples);
    m["ordering"] = json!(if args.branches { "branches" } else { "sorted" });
    Ok(Outcome { document: Document { meta: m, table, extra: Vec::new() }, pass: true })
}

fn cmd_curve(args: &RunArgs, input: &Input) -> Result<Outcome> {
    if args.converge {
        bail!(usage("--converge applies to verify, scatter and sweep"));
    }
    let pairs = requested_pairs(args, &input.problem)?;
    let steps = args.steps.unwrap_or_else(|| default_steps(input.problem.hamiltonian(), args.half_interval));
    let grid = TimeGrid::symmetric(args.half_interval, steps)?;
    let curves = probability_vs_time(&input.problem, &grid, args.stride, &pairs)?;
    let mut table = Table::new(
        std::iter::once("t".to_string()).chain(pairs.iter().map(|&p| pair_column(&input.problem, p))),
    );
    for (i, &time) in curves.times.iter().enumerate() {
        table.push(std::iter::once(time).chain(curves.columns.iter().map(|c| c[i])).map(Cell::from).collect());
    }
    let mut m = meta(Command::Curve, args, input);
    m["grid"] = json!({ "start": grid.start(), "end": grid.end(), "steps": grid.len(), "dt": grid.dt() });
    m["stride"] = json!(args.stride);
    m["final"] = json!(curves.final_values());
    Ok(Outcome { document: Document { meta: m, table, extra: Vec::new() }, pass: true })
}

fn cmd_sweep(args: &RunArgs, input: &Input) -> Result<Outcome> {
    let Some(model) = input.model else {
        bail!(usage("sweep needs a built-in --model"));
    };
    let Some(text) = &args.sweep else {
        bail!(usage("sweep needs --sweep key=start:stop:count"));
    };
    let spec = SweepSpec::parse(text)?;
    let positions = requested_pairs(args, &input.problem)?;
    let labels = input.problem.basis().labels();
    let pairs: Vec<(String, String)> = positions.iter().map(|&(a, b)| (labels[a].clone(), labels[b].clone())).collect();
    let config = SweepConfig {
        half_interval: args.half_interval,
        policy: policy(args),
        tol: args.tol,
        workers: args.workers,
    };
    let result = sweep(&model, &spec, &pairs, &config)?;
    let worst_unitarity = result.points.iter().map(|p| p.unitarity_defect).fold(0.0, f64::max);
    check_unitarity(worst_unitarity)?;

    let mut columns = vec![result.parameter.clone()];
    columns.extend(positions.iter().map(|&p| pair_column(&input.problem, p)));
    columns.extend(["max_partner_probability", "stochasticity_defect", "unitarity_defect", "pass"].map(String::from));
    let mut table = Table::new(columns);
    for p in &result.points {
        let mut row: Vec<Cell> = vec![p.value.into()];
        row.extend(p.probabilities.iter().map(|&x| Cell::from(x)));
        row.extend([
            p.max_partner_probability.into(),
            p.stochasticity_defect.into(),
            p.unitarity_defect.into(),
            p.pass.into(),
        ]);
        table.push(row);
    }
    let mut m = meta(Command::Sweep, args, input);
    m["sweep"] = json!({ "parameter": result.parameter, "targets": spec.targets, "values": spec.values });
    m["steps"] = json!(args.steps);
    m["converge"] = json!(args.converge);
    let failures = result.points.iter().filter(|p| !p.pass).count();
    eprintln!(
        "{}: {} of {} points pass (tolerance {:e})",
        if failures == 0 { "PASS" } else { "FAIL" },
        result.points.len() - failures,
        result.points.len(),
        args.tol
    );
    let extra = vec![("points", serde_json::to_value(&result.points)?)];
    Ok(Outcome { document: Document { meta: m, table, extra }, pass: failures == 0 })
}

fn cmd_check(args: &RunArgs, input: &Input) -> Result<Outcome> {
    let h = &input.hamiltonian;
    let parity = check_parity_symmetry(h);
    let symmetry = input.problem.dynamic_symmetry(args.half_interval)?;
    let hermitian = check_hermitian(h, &symmetric_sample_grid(args.half_interval, 8));
    let pairs = input.problem.kramers_pairs();
    let half = input.problem.is_half_integer();

    if let Some(doc) = &input.document {
        for d in doc.symmetry_diagnostics() {
            eprintln!("{}:{d}", doc.source);
        }
    }
    let failing_terms = parity.failures().count();
    let mut table = Table::new(["check", "value", "tolerance", "pass"].map(String::from));
    table.push(vec!["parity".into(), (failing_terms as f64).into(), 0.0.into(), parity.pass.into()]);
    table.push(vec![
        "dynamic_symmetry".into(),
        symmetry.max_deviation.into(),
        symmetry.tolerance.into(),
        symmetry.pass.into(),
    ]);
    table.push(vec![
        "hermiticity".into(),
        hermitian.max_deviation.into(),
        hermitian.tolerance.into(),
        hermitian.pass.into(),
    ]);
    table.push(vec![
        "theta_squared".into(),
        (if half { -1.0 } else { 1.0 }).into(),
        0.0.into(),
        true.into(),
    ]);
    table.push(vec!["kramers_pairs".into(), pairs.as_ref().map_or(0.0, |p| p.len() as f64).into(), 0.0.into(), pairs.is_ok().into()]);

    let status = match (symmetry.pass, half) {
        (false, _) => TheoremStatus::SymmetryViolated,
        (true, false) => TheoremStatus::IntegerSpin,
        (true, true) => TheoremStatus::Applicable,
    };
    let mut m = meta(Command::Check, args, input);
    m["status"] = json!(status.describe());
    let pass = symmetry.pass && hermitian.pass && pairs.is_ok();
    eprintln!("{}: {}", if pass { "PASS" } else { "FAIL" }, status.describe());
    let extra = vec![
        ("parity", serde_json::to_value(&parity)?),
        ("kramers_pairs", pairs.as_ref().map_or(Value::Null, |p| json!(p))),
    ];
    Ok(Outcome { document: Document { meta: m, table, extra }, pass })
}

fn run(cli: &Cli) -> Result<bool> {
    let args = &cli.run;
    validate(args)?;
    let input = load_input(args)?;
    let outcome = match cli.command {
        Command::Verify => cmd_verify(args, &input)?,
        Command::Scatter => cmd_scatter(args, &input)?,
        Command::Levels => cmd_levels(args, &input)?,
        Command::Curve => cmd_curve(args, &input)?,
        Command::Sweep => cmd_sweep(args, &input)?,
        Command::Check => cmd_check(args, &input)?,
    };
    let bytes = outcome.document.render(args.format)?;
    emit(&bytes, args.out.as_deref().map(Path::new))?;
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
