//! Command-line front end. Exit codes: 0 success, 1 a checked property failed,
//! 2 usage or configuration error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::bounds::{poly_rate_exponent, Variant};
use crate::chains::ChainModel;
use crate::error::{Error, Result};
use crate::lab::config::{ChainSpec, Experiment, ExperimentConfig};
use crate::lab::lemmas::{verify_lemmas, LemmaGrid};
use crate::lab::montecarlo::{coverage, monte_carlo, run_trial};
use crate::lab::stats::rate_fit;
use crate::mixing::{self, fit_exponential_envelope, fit_polynomial_envelope};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ssmgd", version, about = "Markov chain gradient descent laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
struct ChainArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline chain spec, e.g. '{"kind":"two_state","params":{"p":0.25,"q":0.25}}'.
    #[arg(long)]
    chain: Option<String>,
    /// Number of mixing coefficients to compute.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a chain and print it as JSON.
    Chains(ChainArgs),
    /// Exact φ/β coefficients with fitted envelopes, as CSV.
    Mixing(ChainArgs),
    /// Certificate and closed-form bounds at the checkpoints.
    Bounds {
        #[command(flatten)]
        overrides: Overrides,
        /// Print only the assumption certificate as JSON.
        #[arg(long)]
        certificate: bool,
    },
    /// One trajectory with its error decomposition.
    Run(Overrides),
    /// Many trajectories: quantile curves, bounds and coverage.
    MonteCarlo(Overrides),
    /// Rate exponents over grids of θ and renewal-chain tail exponents k.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.6, 0.75, 0.9])]
        thetas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0])]
        ks: Vec<f64>,
        /// Truncation size of the renewal chain.
        #[arg(long, default_value_t = 50)]
        renewal_states: usize,
    },
    /// Audit the coefficient inequalities over a grid.
    VerifyLemmas {
        #[arg(long, default_value_t = 10_000)]
        t_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl clap::ValueEnum for Variant {
    fn value_variants<'a>() -> &'a [Self] {
        &[Variant::Paper, Variant::Conservative]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.as_str()))
    }
}

enum Failure {
    Usage(Error),
    Runtime(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e),
            other => Failure::Runtime(other),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command, writing
/// default output to `stdout`.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_CHECK_FAILED
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            EXIT_CHECK_FAILED
        }
    }
}

/// Entry point used by the binary.
pub fn cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    run_cli(args, &mut lock)
}

fn open_out<'a>(path: Option<&PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn load_overridden(o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&o.config)?;
    if let Some(v) = o.theta {
        cfg.theta = v;
    }
    if let Some(v) = o.trials {
        cfg.trials = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.delta {
        cfg.delta = v;
    }
    if let Some(v) = o.horizon {
        cfg.horizon = v;
        if cfg.checkpoints.as_ref().is_some_and(|c| c.iter().any(|&t| t > v)) {
            cfg.checkpoints = None;
        }
    }
    if let Some(v) = o.variant {
        cfg.variant = v;
    }
    if o.out.is_some() {
        cfg.out = o.out.clone();
    }
    Ok(cfg)
}

fn resolve_chain(args: &ChainArgs) -> Result<(ChainModel, Option<usize>)> {
    let (spec, cfg_horizon) = match (&args.chain, &args.config) {
        (Some(json), _) => (serde_json::from_str::<ChainSpec>(json).map_err(|e| Error::Config(e.to_string()))?, None),
        (None, Some(path)) => {
            let cfg = ExperimentConfig::load(path)?;
            (cfg.chain, Some(cfg.horizon))
        }
        (None, None) => return Err(Error::Config("either --config or --chain is required".into())),
    };
    let chain = spec.build().map_err(|e| Error::Config(e.to_string()))?;
    Ok((chain, args.horizon.or(cfg_horizon)))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> CliResult {
    match command {
        Command::Chains(args) => cmd_chains(&args, stdout),
        Command::Mixing(args) => cmd_mixing(&args, stdout),
        Command::Bounds { overrides, certificate } => cmd_bounds(&overrides, certificate, stdout),
        Command::Run(o) => cmd_run(&o, stdout),
        Command::MonteCarlo(o) => cmd_monte_carlo(&o, stdout),
        Command::Sweep { overrides, thetas, ks, renewal_states } => {
            cmd_sweep(&overrides, &thetas, &ks, renewal_states, stdout)
        }
        Command::VerifyLemmas { t_max, out } => cmd_verify_lemmas(t_max, out.as_ref(), stdout),
    }
}

fn cmd_chains(args: &ChainArgs, stdout: &mut dyn Write) -> CliResult {
    let (chain, _) = resolve_chain(args)?;
    let mut out = open_out(args.out.as_ref(), stdout)?;
    writeln!(out, "{}", chain.to_json()?).map_err(Error::from)?;
    out.flush().map_err(Error::from)?;
    Ok(())
}

fn envelope_json<T: serde::Serialize>(fit: Result<T>, kind: &str) -> serde_json::Value {
    match fit {
        Ok(env) => json!({ "kind": kind, "params": env }),
        Err(e) => json!({ "kind": kind, "error": e.to_string() }),
    }
}

fn cmd_mixing(args: &ChainArgs, stdout: &mut dyn Write) -> CliResult {
    let (chain, horizon) = resolve_chain(args)?;
    let horizon = horizon.unwrap_or(50).max(1);
    let profile = mixing::mixing_profile(&chain, horizon)?;
    // prefer a geometric envelope, fall back to a polynomial one
    let pick = |seq: &[f64]| -> (serde_json::Value, Box<dyn Fn(usize) -> Option<f64>>) {
        match fit_exponential_envelope(seq) {
            Ok(e) => (envelope_json(Ok(e), "exponential"), Box::new(move |t| Some(e.value(t)))),
            Err(_) => match fit_polynomial_envelope(seq) {
                Ok(p) => (envelope_json(Ok(p), "polynomial"), Box::new(move |t| Some(p.value(t)))),
                Err(err) => (envelope_json::<()>(Err(err), "none"), Box::new(|_| None)),
            },
        }
    };
    let (phi_header, phi_env) = pick(&profile.phi);
    let (beta_header, beta_env) = pick(&profile.beta);
    let mut out = open_out(args.out.as_ref(), stdout)?;
    let header = json!({ "phi_envelope": phi_header, "beta_envelope": beta_header, "n_states": chain.n_states() });
    writeln!(out, "# {header}").map_err(Error::from)?;
    let mut w = csv_writer(&mut out);
    w.write_record(["t", "phi", "beta", "phi_envelope", "beta_envelope"]).map_err(Error::from)?;
    let show = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    for t in 1..=horizon {
        w.write_record([
            t.to_string(),
            fmt(profile.phi_at(t)),
            fmt(profile.beta_at(t)),
            show(phi_env(t)),
            show(beta_env(t)),
        ])
        .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn build(o: &Overrides) -> std::result::Result<Experiment, Failure> {
    let cfg = load_overridden(o).map_err(Failure::Usage)?;
    cfg.build().map_err(Failure::Usage)
}

fn cmd_bounds(o: &Overrides, certificate_only: bool, stdout: &mut dyn Write) -> CliResult {
    let exp = build(o)?;
    let mut out = open_out(exp.config.out.as_ref(), stdout)?;
    if certificate_only {
        writeln!(out, "{}", serde_json::to_string(&exp.certificate).map_err(Error::from)?).map_err(Error::from)?;
        return Ok(());
    }
    let header = json!({
        "certificate": exp.certificate,
        "formula": exp.formula.as_str(),
        "variant": exp.config.variant.as_str(),
        "r1_norm": exp.r1_norm,
        "envelope": exp.bound_params.envelope_summary(),
    });
    writeln!(out, "# {header}").map_err(Error::from)?;
    let init_paper = exp.init_bounds(Variant::Paper)?;
    let init_cons = exp.init_bounds(Variant::Conservative)?;
    let samp = exp.samp_bounds()?;
    let mut w = csv_writer(&mut out);
    w.write_record(["t", "init_bound_paper", "init_bound_conservative", "samp_bound", "formula"]).map_err(Error::from)?;
    for (j, &t) in exp.checkpoints.iter().enumerate() {
        w.write_record([t.to_string(), fmt(init_paper[j]), fmt(init_cons[j]), fmt(samp[j]), exp.formula.as_str().into()])
            .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn cmd_run(o: &Overrides, stdout: &mut dyn Write) -> CliResult {
    let exp = build(o)?;
    let traj = run_trial(&exp, 0)?;
    let mut out = open_out(exp.config.out.as_ref(), stdout)?;
    let mut w = csv_writer(&mut out);
    w.write_record(["t", "total_err", "init_err", "samp_err", "step_size"]).map_err(Error::from)?;
    let init = traj.init_err.as_deref().unwrap_or_default();
    let samp = traj.samp_err.as_deref().unwrap_or_default();
    for (j, &t) in traj.checkpoints.iter().enumerate() {
        w.write_record([t.to_string(), fmt(traj.total_err[j]), fmt(init[j]), fmt(samp[j]), fmt(traj.step_size[j])])
            .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn cmd_monte_carlo(o: &Overrides, stdout: &mut dyn Write) -> CliResult {
    let exp = build(o)?;
    let result = monte_carlo(&exp)?;
    let init_bounds = exp.init_bounds(exp.config.variant)?;
    let samp_bounds = exp.samp_bounds()?;
    let cov = coverage(&result.samp_err_sq, &samp_bounds)?;
    let mut out = open_out(exp.config.out.as_ref(), stdout)?;
    let mut w = csv_writer(&mut out);
    w.write_record([
        "t", "median_err", "q_err", "mean_err", "median_samp2", "q_samp2", "init_bound", "samp_bound", "coverage",
    ])
    .map_err(Error::from)?;
    for (j, p) in result.curve.points.iter().enumerate() {
        w.write_record([
            p.t.to_string(),
            fmt(p.total_err.median),
            fmt(p.total_err.quantile),
            fmt(p.total_err.mean),
            fmt(p.samp_err_sq.median),
            fmt(p.samp_err_sq.quantile),
            fmt(init_bounds[j]),
            fmt(samp_bounds[j]),
            fmt(cov[j]),
        ])
        .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    let target = 1.0 - exp.config.delta;
    if let Some((j, c)) = cov.iter().enumerate().find(|(_, &c)| c < target) {
        return Err(Failure::Check(format!("coverage {c} below {target} at t = {}", exp.checkpoints[j])));
    }
    Ok(())
}

fn cmd_sweep(o: &Overrides, thetas: &[f64], ks: &[f64], renewal_states: usize, stdout: &mut dyn Write) -> CliResult {
    let base = load_overridden(o).map_err(Failure::Usage)?;
    let mut rows = Vec::new();
    for &theta in thetas {
        for &k in ks {
            let mut cfg = base.clone();
            cfg.theta = theta;
            cfg.chain = ChainSpec::RenewalTail { k, m: renewal_states };
            let exp = cfg.build().map_err(Failure::Usage)?;
            let result = monte_carlo(&exp)?;
            let range = cfg.rate_range.unwrap_or(((cfg.horizon / 100).max(1), cfg.horizon));
            let fit = rate_fit(&exp.checkpoints, &result.curve.median_total(), range)?;
            let (predicted, log_factor) = match poly_rate_exponent(theta, k) {
                Ok((e, l)) => (fmt(e), l.to_string()),
                Err(_) => (String::new(), String::new()),
            };
            rows.push([
                fmt(theta),
                fmt(k),
                predicted,
                log_factor,
                fmt(fit.slope),
                fmt(fit.intercept),
                fmt(fit.r_squared),
            ]);
        }
    }
    let mut out = open_out(base.out.as_ref(), stdout)?;
    let mut w = csv_writer(&mut out);
    w.write_record(["theta", "k", "predicted_exponent", "log_factor", "slope", "intercept", "r_squared"])
        .map_err(Error::from)?;
    for r in rows {
        w.write_record(r).map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn cmd_verify_lemmas(t_max: usize, out_path: Option<&PathBuf>, stdout: &mut dyn Write) -> CliResult {
    if t_max == 0 {
        return Err(Failure::Usage(Error::Config("--t-max must be at least 1".into())));
    }
    let report = verify_lemmas(&LemmaGrid::with_t_max(t_max))?;
    let mut out = open_out(out_path, stdout)?;
    let mut w = csv_writer(&mut out);
    w.write_record(["lemma", "variant", "theta", "alpha", "i", "t", "exact", "bound", "holds"]).map_err(Error::from)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &report.rows {
        w.write_record([
            r.lemma.as_str().to_string(),
            r.variant.as_str().to_string(),
            opt(r.theta.map(fmt)),
            fmt(r.alpha),
            opt(r.i.map(|i| i.to_string())),
            r.t.to_string(),
            fmt(r.exact),
            fmt(r.bound),
            r.holds.to_string(),
        ])
        .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    for s in &report.summaries {
        eprintln!(
            "{} ({}): {} evaluated, {} violations{}",
            s.lemma.as_str(),
            s.variant.as_str(),
            s.evaluated,
            s.violations,
            if s.asserted { "" } else { " (reported only)" }
        );
    }
    let bad = report.asserted_violations();
    if bad > 0 {
        return Err(Failure::Check(format!("{bad} asserted inequality violations")));
    }
    Ok(())
}
