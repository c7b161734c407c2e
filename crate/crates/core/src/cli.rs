//! Command-line front end.
//!
//! Every subcommand validates its configuration before computing anything,
//! prints numbers with 12 significant digits, and reports failures as a
//! single JSON line on standard error. Exit codes: 0 success, 2 invalid
//! input, 3 capacity exceeded, 1 anything else.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::estimation::{
    rate_curve, simulate_tail, theoretical_bounds, Sampler, SimulationConfig, StrategySpec, TailEstimate,
};
use crate::expfam::{ExponentialFamily, Halfspace, Side};
use crate::families::{
    ClassicalDiagonalFamily, EquatorialQubitFamily, GaussianFockFamily, StateFamily,
};
use crate::qmetrics::{affinity, bures_distance, family_fisher, family_relative_entropy, fidelity, limit_table};
use crate::repdecomp::sandwich_kl;
use crate::stats::stream_rng;

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "QLDEV_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "qldev",
    version,
    about = "Quantum Fisher information, divergences and large-deviation estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fisher informations and divergences at a parameter value.
    Metrics(MetricsArgs),
    /// Small-ε limit table of divergences against Fisher informations.
    Limits(LimitsArgs),
    /// Monte-Carlo tail probabilities of an estimation strategy.
    Simulate(SimulateArgs),
    /// Exponent regression over simulated tails, with theoretical bounds.
    Rates(SimulateArgs),
    /// Schur-Weyl sandwich for the refined irrep measurement.
    Schur(SchurArgs),
    /// Theoretical exponent bounds J/2, J̃/2 and the relative-entropy infimum.
    Bounds(BoundsArgs),
    /// Cramér rates and tail simulation for classical exponential families.
    Expfam(ExpfamArgs),
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Validate the configuration and print the resolved plan only.
    #[arg(long)]
    dry_run: bool,
    /// Write results to this file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format for tables.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FamilyKind {
    Equatorial,
    Gaussian,
    GaussianHalf,
    Diagonal,
}

#[derive(Args, Debug, Clone)]
struct FamilyArgs {
    /// State family.
    #[arg(long, value_enum)]
    family: Option<FamilyKind>,
    /// Bloch radius of the equatorial family.
    #[arg(long = "r", default_value_t = 0.5)]
    r: f64,
    /// Mean photon number of the Gaussian family.
    #[arg(long, default_value_t = 1.0)]
    nbar: f64,
    /// Fock-space truncation of the Gaussian family.
    #[arg(long, default_value_t = 60)]
    trunc: usize,
    /// Outcome labels of the diagonal family (uniform base measure).
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    labels: Vec<f64>,
}

impl FamilyArgs {
    fn kind(&self, fallback: FamilyKind) -> FamilyKind {
        self.family.unwrap_or(fallback)
    }

    fn build(&self, fallback: FamilyKind) -> Result<Box<dyn StateFamily>> {
        Ok(match self.kind(fallback) {
            FamilyKind::Equatorial => Box::new(EquatorialQubitFamily::new(self.r)?),
            FamilyKind::Gaussian => Box::new(GaussianFockFamily::new(self.nbar, self.trunc)?),
            FamilyKind::GaussianHalf => Box::new(GaussianFockFamily::new(self.nbar, self.trunc)?.half_line()),
            FamilyKind::Diagonal => {
                let k = self.labels.len();
                let fam = ExponentialFamily::scalar(self.labels.clone(), vec![1.0; k])?;
                Box::new(ClassicalDiagonalFamily::new(fam)?)
            }
        })
    }
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Parameter value θ.
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    /// Second parameter value for the divergences D(ρ_θ‖ρ_θ0), fidelity and friends.
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct LimitsArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    /// Comma-separated ε values.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
    eps: Vec<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum StrategyKind {
    FixedSld,
    TwoStage,
    Superefficient,
    MAdaptive,
    GaussianHomodyne,
    GaussianNumber,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SamplerKind {
    Direct,
    Tilted,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, value_enum)]
    strategy: StrategyKind,
    /// True parameter value.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    theta: f64,
    /// Reference point of the fixed-SLD and m-adaptive strategies.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    theta0: f64,
    /// Target point of the superefficient strategy.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    theta1: f64,
    /// Stage-one fraction (two-stage) or product-part weight (m-adaptive).
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    /// Block size of the m-adaptive strategy.
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Comma-separated ε values.
    #[arg(long, value_delimiter = ',', required = true)]
    eps: Vec<f64>,
    /// Sample sizes as start:stop:step.
    #[arg(long, default_value = "50:400:50")]
    ngrid: String,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker-count hint; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = SamplerKind::Direct)]
    sampler: SamplerKind,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct SchurArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, allow_hyphen_values = true)]
    theta0: f64,
    #[arg(long, allow_hyphen_values = true)]
    theta1: f64,
    /// Block sizes as start:stop:step.
    #[arg(long, default_value = "1:6:1")]
    mgrid: String,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    eps: Vec<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ExpfamKind {
    Bernoulli,
    Multinomial,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SideKind {
    Upper,
    Lower,
}

#[derive(Args, Debug)]
struct ExpfamArgs {
    #[arg(long, value_enum, default_value_t = ExpfamKind::Bernoulli)]
    family: ExpfamKind,
    /// Success probability (bernoulli) or comma-separated outcome probabilities (multinomial).
    #[arg(long, value_delimiter = ',', default_value = "0.4")]
    p: Vec<f64>,
    /// Statistic index of the halfspace event.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Threshold of the halfspace event on the empirical mean.
    #[arg(long, allow_hyphen_values = true)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = SideKind::Upper)]
    side: SideKind,
    /// Print the Cramér rate.
    #[arg(long)]
    rate: bool,
    /// Simulate tail probabilities over the n grid.
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value = "100:1000:100")]
    ngrid: String,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SamplerKind::Direct)]
    sampler: SamplerKind,
    #[command(flatten)]
    out: OutputArgs,
}

/// Parses `start:stop:step` into the inclusive arithmetic grid.
pub fn parse_grid(s: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Validation(format!("grid `{s}` must have the form start:stop:step with positive integers"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if start == 0 || step == 0 || stop < start {
        return Err(bad());
    }
    Ok((start..=stop).step_by(step).collect())
}

/// Rounds to 12 significant digits.
fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Locale-independent text form with 12 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round12(x);
    if r != 0.0 && (r.abs() < 1e-4 || r.abs() >= 1e15) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round12(x))
    } else {
        Value::String(format_number(x))
    }
}

#[derive(Debug, Clone)]
enum Cell {
    Text(String),
    Num(f64),
    Int(u64),
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = self.columns.join(",");
                s.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|c| match c {
                            Cell::Text(t) => t.clone(),
                            Cell::Num(x) => format_number(*x),
                            Cell::Int(i) => i.to_string(),
                        })
                        .collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                s
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let mut m = Map::new();
                        for (k, c) in self.columns.iter().zip(row) {
                            let v = match c {
                                Cell::Text(t) => Value::String(t.clone()),
                                Cell::Num(x) => num(*x),
                                Cell::Int(i) => json!(i),
                            };
                            m.insert((*k).to_string(), v);
                        }
                        Value::Object(m)
                    })
                    .collect();
                let mut s = Value::Array(rows).to_string();
                s.push('\n');
                s
            }
        }
    }
}

fn json_line(v: &Value) -> String {
    let mut s = v.to_string();
    s.push('\n');
    s
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Domain(_) | Error::Configuration(_) => 2,
        Error::Capacity(_) => 3,
        _ => 1,
    }
}

fn diagnostic(kind: &str, message: &str) -> String {
    json_line(&json!({ "error": kind, "message": message }))
}

/// Runs the CLI on `argv` (including the program name), reading the seed
/// override from the environment.
pub fn run(argv: &[String]) -> i32 {
    let seed = std::env::var(SEED_ENV).ok();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, seed.as_deref(), &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI with an explicit seed override and output streams.
pub fn run_with(argv: &[String], seed_override: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{e}");
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        2
                    } else {
                        0
                    }
                }
                _ => {
                    let msg = e.to_string();
                    let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
                    let _ = err.write_all(diagnostic("validation", first).as_bytes());
                    2
                }
            };
        }
    };
    let seed = match seed_override {
        None => None,
        Some(s) => match s.trim().parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                let e = Error::Validation(format!("{SEED_ENV} = `{s}` is not an unsigned 64-bit integer"));
                let _ = err.write_all(diagnostic(e.kind(), &e.to_string()).as_bytes());
                return 2;
            }
        },
    };
    match execute(cli.command, seed) {
        Ok((text, path)) => {
            let written = match path {
                Some(p) => std::fs::write(&p, text.as_bytes()).map_err(Error::from),
                None => out.write_all(text.as_bytes()).map_err(Error::from),
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    let _ = err.write_all(diagnostic(e.kind(), &e.to_string()).as_bytes());
                    exit_code(&e)
                }
            }
        }
        Err(e) => {
            let _ = err.write_all(diagnostic(e.kind(), &e.to_string()).as_bytes());
            exit_code(&e)
        }
    }
}

type Output = (String, Option<PathBuf>);

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("--{name} must be finite")))
    }
}

fn check_eps(eps: &[f64]) -> Result<()> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::Validation("--eps must list positive finite values".into()));
    }
    Ok(())
}

fn dry_run(command: &str, plan: Value) -> String {
    json_line(&json!({ "dry_run": true, "command": command, "plan": plan }))
}

fn execute(command: Command, seed: Option<u64>) -> Result<Output> {
    match command {
        Command::Metrics(a) => metrics(a),
        Command::Limits(a) => limits(a),
        Command::Simulate(a) => simulate(a, seed, false),
        Command::Rates(a) => simulate(a, seed, true),
        Command::Schur(a) => schur(a),
        Command::Bounds(a) => bounds(a),
        Command::Expfam(a) => expfam(a, seed),
    }
}

fn metrics(a: MetricsArgs) -> Result<Output> {
    check_finite("theta", a.theta)?;
    let family = a.family.build(FamilyKind::Equatorial)?;
    family.domain().require(a.theta)?;
    if let Some(t0) = a.theta0 {
        check_finite("theta0", t0)?;
        family.domain().require(t0)?;
    }
    if a.out.dry_run {
        let plan = json!({ "family": family.name(), "theta": a.theta, "theta0": a.theta0 });
        return Ok((dry_run("metrics", plan), a.out.output));
    }
    let report = family_fisher(family.as_ref(), a.theta)?;
    let mut m = Map::new();
    m.insert("family".into(), json!(family.name()));
    m.insert("theta".into(), num(a.theta));
    m.insert("dim".into(), json!(family.dim()));
    m.insert("j_sld".into(), num(report.j_sld));
    m.insert("j_kmb".into(), num(report.j_kmb));
    m.insert("j_rld".into(), report.j_rld.map(num).unwrap_or(Value::Null));
    if let Some(t0) = a.theta0 {
        let rho = family.state(a.theta)?;
        let sigma = family.state(t0)?;
        m.insert("theta0".into(), num(t0));
        m.insert("relative_entropy".into(), num(family_relative_entropy(family.as_ref(), a.theta, t0)?));
        m.insert("fidelity".into(), num(fidelity(&rho, &sigma)?));
        m.insert("bures_distance".into(), num(bures_distance(&rho, &sigma)?));
        m.insert("affinity".into(), num(affinity(&rho, &sigma)?));
    }
    if let Some(cf) = family.closed_forms() {
        let mut c = Map::new();
        c.insert("j_sld".into(), num((cf.j_sld)(a.theta)));
        c.insert("j_kmb".into(), num((cf.j_kmb)(a.theta)));
        if let Some(t0) = a.theta0 {
            c.insert("relative_entropy".into(), num((cf.d)(a.theta, t0)));
        }
        m.insert("closed_form".into(), Value::Object(c));
    }
    Ok((json_line(&Value::Object(m)), a.out.output))
}

fn limits(a: LimitsArgs) -> Result<Output> {
    check_finite("theta", a.theta)?;
    check_eps(&a.eps)?;
    let family = a.family.build(FamilyKind::Equatorial)?;
    family.domain().require(a.theta)?;
    let format = a.out.format.unwrap_or(Format::Csv);
    if a.out.dry_run {
        let plan = json!({ "family": family.name(), "theta": a.theta, "eps": a.eps });
        return Ok((dry_run("limits", plan), a.out.output));
    }
    let rows = limit_table(family.as_ref(), a.theta, &a.eps)?;
    let table = Table {
        columns: vec!["eps", "two_d", "four_b2", "affinity", "j_sld", "j_kmb"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Num(r.eps),
                    Cell::Num(r.two_d),
                    Cell::Num(r.four_b2),
                    Cell::Num(r.affinity),
                    Cell::Num(r.j_sld),
                    Cell::Num(r.j_kmb),
                ]
            })
            .collect(),
    };
    Ok((table.render(format), a.out.output))
}

fn strategy_of(a: &SimulateArgs) -> StrategySpec {
    match a.strategy {
        StrategyKind::FixedSld => StrategySpec::FixedSld { theta0: a.theta0 },
        StrategyKind::TwoStage => StrategySpec::TwoStage { delta: a.delta },
        StrategyKind::Superefficient => StrategySpec::Superefficient { theta1: a.theta1 },
        StrategyKind::MAdaptive => StrategySpec::MAdaptive {
            theta0: a.theta0,
            m: a.m,
            delta: a.delta,
        },
        StrategyKind::GaussianHomodyne => StrategySpec::GaussianHomodyne { nbar: a.family.nbar },
        StrategyKind::GaussianNumber => StrategySpec::GaussianNumber { nbar: a.family.nbar },
    }
}

fn simulate(a: SimulateArgs, seed: Option<u64>, rates: bool) -> Result<Output> {
    check_finite("theta", a.theta)?;
    let strategy = strategy_of(&a);
    strategy.validate()?;
    let fallback = match a.strategy {
        StrategyKind::GaussianHomodyne | StrategyKind::GaussianNumber => FamilyKind::Gaussian,
        _ => FamilyKind::Equatorial,
    };
    let family = a.family.build(fallback)?;
    family.domain().require(a.theta)?;
    let mut cfg = SimulationConfig::new(parse_grid(&a.ngrid)?, a.eps.clone(), a.trials, seed.unwrap_or(a.seed));
    cfg.workers = a.workers;
    cfg.sampler = match a.sampler {
        SamplerKind::Direct => Sampler::Direct,
        SamplerKind::Tilted => Sampler::Tilted,
    };
    cfg.validate()?;
    let name = if rates { "rates" } else { "simulate" };
    if a.out.dry_run {
        let plan = json!({
            "family": family.name(),
            "strategy": strategy.name(),
            "strategy_parameters": format!("{strategy:?}"),
            "theta_true": a.theta,
            "eps": cfg.eps_list,
            "n_grid": cfg.n_grid,
            "trials": cfg.trials,
            "seed": cfg.seed,
            "sampler": format!("{:?}", cfg.sampler).to_lowercase(),
        });
        return Ok((dry_run(name, plan), a.out.output));
    }
    let estimates = simulate_tail(strategy, family.as_ref(), a.theta, &cfg)?;
    if rates {
        let curve = rate_curve(&estimates, family.as_ref(), a.theta)?;
        let points: Vec<Value> = curve
            .points
            .iter()
            .map(|p| {
                json!({
                    "eps": num(p.eps),
                    "beta": p.fit.as_ref().map(|f| num(f.beta)).unwrap_or(Value::Null),
                    "stderr": p.fit.as_ref().map(|f| num(f.stderr)).unwrap_or(Value::Null),
                    "used_n": p.fit.as_ref().map(|f| json!(f.used)).unwrap_or(json!([])),
                    "bounds": {
                        "j_half": num(p.bounds.j_half),
                        "jt_half": num(p.bounds.jt_half),
                        "inf_d": num(p.bounds.inf_d),
                        "inf_d_printed": num(p.bounds.inf_d_printed),
                    },
                })
            })
            .collect();
        let v = json!({
            "strategy": strategy.name(),
            "family": family.name(),
            "theta_true": num(a.theta),
            "alpha": curve.alpha.map(num).unwrap_or(Value::Null),
            "note": curve.note,
            "points": points,
        });
        return Ok((json_line(&v), a.out.output));
    }
    let table = tail_table(strategy.name(), a.theta, &estimates);
    Ok((table.render(a.out.format.unwrap_or(Format::Csv)), a.out.output))
}

fn tail_table(strategy: &str, theta: f64, estimates: &[TailEstimate]) -> Table {
    Table {
        columns: vec![
            "strategy", "theta_true", "epsilon", "n", "trials", "hits", "p_hat", "wilson_lo", "wilson_hi",
        ],
        rows: estimates
            .iter()
            .map(|e| {
                vec![
                    Cell::Text(strategy.to_string()),
                    Cell::Num(theta),
                    Cell::Num(e.eps),
                    Cell::Int(e.n as u64),
                    Cell::Int(e.trials),
                    Cell::Int(e.hits),
                    Cell::Num(e.p_hat),
                    Cell::Num(e.wilson_lo),
                    Cell::Num(e.wilson_hi),
                ]
            })
            .collect(),
    }
}

fn schur(a: SchurArgs) -> Result<Output> {
    check_finite("theta0", a.theta0)?;
    check_finite("theta1", a.theta1)?;
    let family = a.family.build(FamilyKind::Equatorial)?;
    if family.dim() != 2 {
        return Err(Error::Configuration("the schur subcommand needs a qubit family".into()));
    }
    family.domain().require(a.theta0)?;
    family.domain().require(a.theta1)?;
    let grid = parse_grid(&a.mgrid)?;
    if let Some(&m) = grid.iter().find(|&&m| m > 10) {
        return Err(Error::Capacity(format!("block size m = {m} exceeds 10")));
    }
    if a.out.dry_run {
        let plan = json!({ "family": family.name(), "theta0": a.theta0, "theta1": a.theta1, "m": grid });
        return Ok((dry_run("schur", plan), a.out.output));
    }
    let d = family_relative_entropy(family.as_ref(), a.theta0, a.theta1)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &m in &grid {
        let value = sandwich_kl(family.as_ref(), a.theta0, a.theta1, m)?;
        let mf = m as f64;
        rows.push(vec![
            Cell::Int(m as u64),
            Cell::Num(d),
            Cell::Num(mf * d - (mf + 1.0).ln()),
            Cell::Num(value),
            Cell::Num(mf * d),
        ]);
    }
    let table = Table {
        columns: vec!["m", "D", "lower", "value", "upper"],
        rows,
    };
    Ok((table.render(a.out.format.unwrap_or(Format::Csv)), a.out.output))
}

fn bounds(a: BoundsArgs) -> Result<Output> {
    check_finite("theta", a.theta)?;
    check_eps(&a.eps)?;
    let family = a.family.build(FamilyKind::Equatorial)?;
    family.domain().require(a.theta)?;
    if a.out.dry_run {
        let plan = json!({ "family": family.name(), "theta": a.theta, "eps": a.eps });
        return Ok((dry_run("bounds", plan), a.out.output));
    }
    let mut rows = Vec::with_capacity(a.eps.len());
    for &eps in &a.eps {
        let b = theoretical_bounds(family.as_ref(), a.theta, eps)?;
        rows.push(vec![
            Cell::Num(eps),
            Cell::Num(b.j_half),
            Cell::Num(b.jt_half),
            Cell::Num(b.inf_d),
            Cell::Num(b.inf_d_printed),
        ]);
    }
    let table = Table {
        columns: vec!["eps", "j_half", "jt_half", "inf_d", "inf_d_printed"],
        rows,
    };
    Ok((table.render(a.out.format.unwrap_or(Format::Json)), a.out.output))
}

fn expfam(a: ExpfamArgs, seed: Option<u64>) -> Result<Output> {
    check_finite("threshold", a.threshold)?;
    let (fam, theta0) = match a.family {
        ExpfamKind::Bernoulli => {
            if a.p.len() != 1 || !(a.p[0] > 0.0 && a.p[0] < 1.0) {
                return Err(Error::Validation("bernoulli needs a single --p in (0, 1)".into()));
            }
            let p = a.p[0];
            (ExponentialFamily::bernoulli(), vec![(p / (1.0 - p)).ln()])
        }
        ExpfamKind::Multinomial => {
            let total: f64 = a.p.iter().sum();
            if a.p.len() < 2 || a.p.iter().any(|x| !(*x > 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(
                    "multinomial needs at least two positive --p values summing to 1".into(),
                ));
            }
            let fam = ExponentialFamily::multinomial(&a.p)?;
            let d = fam.dim();
            (fam, vec![0.0; d])
        }
    };
    if a.index >= fam.dim() {
        return Err(Error::Validation(format!(
            "--index {} out of range for {} statistics",
            a.index,
            fam.dim()
        )));
    }
    let hs = Halfspace {
        index: a.index,
        threshold: a.threshold,
        side: match a.side {
            SideKind::Upper => Side::Upper,
            SideKind::Lower => Side::Lower,
        },
    };
    let grid = if a.simulate { parse_grid(&a.ngrid)? } else { Vec::new() };
    if a.simulate && a.trials == 0 {
        return Err(Error::Validation("--trials must be positive".into()));
    }
    let seed = seed.unwrap_or(a.seed);
    let want_rate = a.rate || !a.simulate;
    if a.out.dry_run {
        let plan = json!({
            "family": format!("{:?}", a.family).to_lowercase(),
            "p": a.p,
            "index": a.index,
            "threshold": a.threshold,
            "side": format!("{:?}", a.side).to_lowercase(),
            "rate": want_rate,
            "n_grid": grid,
            "trials": a.trials,
            "seed": seed,
        });
        return Ok((dry_run("expfam", plan), a.out.output));
    }
    let rate = fam.cramer_rate(&theta0, hs)?;
    if !a.simulate {
        return Ok((json_line(&json!({ "rate": num(rate) })), a.out.output));
    }
    let mut columns = vec!["n", "p_hat", "neg_log_p_hat_over_n"];
    if want_rate {
        columns.push("rate");
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (i, &n) in grid.iter().enumerate() {
        let mut rng = stream_rng(seed, &[0, i as u64]);
        let p_hat = match a.sampler {
            SamplerKind::Direct => fam.sample_tail_hits(&theta0, hs, n as u64, a.trials, &mut rng)? as f64 / a.trials as f64,
            SamplerKind::Tilted => fam.sample_tail_tilted(&theta0, hs, n as u64, a.trials, &mut rng)?.p_hat,
        };
        let mut row = vec![Cell::Int(n as u64), Cell::Num(p_hat), Cell::Num(-p_hat.ln() / n as f64)];
        if want_rate {
            row.push(Cell::Num(rate));
        }
        rows.push(row);
    }
    let table = Table { columns, rows };
    Ok((table.render(a.out.format.unwrap_or(Format::Csv)), a.out.output))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let argv: Vec<String> = std::iter::once("qldev").chain(args.iter().copied()).map(String::from).collect();
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(&argv, None, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("50:400:50").unwrap().len(), 8);
        assert!(parse_grid("0:10:1").is_err());
        assert!(parse_grid("10:1:1").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.81), "0.81");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(format_number(2.5e-27), "2.5e-27");
    }

    #[test]
    fn metrics_example() {
        let (code, out, _) = call(&["metrics", "--family", "equatorial", "--r", "0.9", "--theta", "0.4"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert!((v["j_sld"].as_f64().unwrap() - 0.81).abs() < 1e-8);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(call(&["--help"]).0, 0);
        let (code, _, err) = call(&["metrics", "--theta", "0.1", "--bogus"]);
        assert_eq!(code, 2);
        assert_eq!(err.lines().count(), 1);
        assert!(serde_json::from_str::<Value>(&err).is_ok());
        assert_eq!(call(&["metrics", "--theta", "4.0"]).0, 2);
        assert_eq!(call(&["schur", "--theta0", "0.1", "--theta1", "0.2", "--mgrid", "1:12:1"]).0, 3);
    }
}
