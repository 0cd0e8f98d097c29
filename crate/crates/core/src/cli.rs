//! Command-line surface. Each command returns a [`Report`] holding the human
//! text, a JSON document and optionally a CSV body; [`main_with`] writes them.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::design::{ContrastMatrix, FactorialDesign};
use crate::error::{Error, Result};
use crate::estimation::{self, summarize, Alternative, Correction, GroupSummary, InferenceOptions};
use crate::exact::{self, Rational};
use crate::exec::Execution;
use crate::io::{self, Estimand, RunConfig, SummaryFile};
use crate::nonlinear::{self, NonlinearKind, NonlinearOptions};
use crate::power::{self, AllocationPlan, Criterion, PowerCurveOptions, PowerSpec, VarianceGuess};
use crate::sim::{self, EnumerationOptions, PotentialOutcomesTable, SimulationOptions};

#[derive(Debug, Parser)]
#[command(name = "neyfact", version, about = "Randomization-based analysis and design of 2^K factorial experiments with binary outcomes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Point estimates, standard errors, intervals and p-values.
    Analyze,
    /// Main-effect and two-factor interaction plot points.
    PlotData,
    /// Analytic power over a grid of total sample sizes.
    PowerCurve,
    /// Conservative sample size for a one-sided test.
    SampleSize,
    /// Optimal arm sizes for a given total.
    Allocate,
    /// Monte Carlo power on a finite population.
    Simulate,
    /// Exact randomization distribution of a tiny population.
    Enumerate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::PlotData => "plot-data",
            Command::PowerCurve => "power-curve",
            Command::SampleSize => "sample-size",
            Command::Allocate => "allocate",
            Command::Simulate => "simulate",
            Command::Enumerate => "enumerate",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Unit-level CSV (factor columns or `treatment`, plus `y`).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Summary CSV (`treatment,n,n1`) or JSON.
    #[arg(long, global = true)]
    pub summary: Option<PathBuf>,
    /// Science table CSV (`y1,…,yJ`).
    #[arg(long, global = true)]
    pub population: Option<PathBuf>,
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated factor names.
    #[arg(long, global = true)]
    pub factors: Option<String>,
    /// Significance level (default 0.05).
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// two-sided (default), greater or less.
    #[arg(long, global = true)]
    pub alternative: Option<Alternative>,
    /// ier (default) or bonferroni.
    #[arg(long, global = true)]
    pub correction: Option<Correction>,
    /// Estimands to report: linear, logfe, logitfe (comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub estimand: Vec<Estimand>,
    /// Use `(n1 + ½)/(n + 1)` for the log and logit estimands.
    #[arg(long, global = true)]
    pub haldane: bool,
    /// Clip linear intervals to [-1, 1].
    #[arg(long, global = true)]
    pub clip: bool,
    /// Comma-separated effect labels forming the tested family.
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// Allocation rule: d (balanced, default), a or e.
    #[arg(long, global = true)]
    pub criterion: Option<Criterion>,
    /// Master seed for simulation streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Randomizations per simulated population (default 1000).
    #[arg(long, global = true)]
    pub draws: Option<usize>,
    /// Number of permuted populations in the simulation protocol.
    #[arg(long, global = true)]
    pub populations: Option<usize>,
    /// Total sample size.
    #[arg(long, global = true)]
    pub n: Option<u64>,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, global = true)]
    pub n_grid: Option<String>,
    /// Joint power the curve must reach (default 0.8).
    #[arg(long, global = true)]
    pub target_power: Option<f64>,
    /// `LABEL=size`, repeatable.
    #[arg(long, global = true)]
    pub effect: Vec<String>,
    /// Comma-separated labels that must all be rejected.
    #[arg(long, global = true)]
    pub joint: Option<String>,
    /// Comma-separated proportions, one per treatment.
    #[arg(long, global = true)]
    pub proportions: Option<String>,
    /// Treat `--proportions` as a pilot with this many units per arm.
    #[arg(long, global = true)]
    pub pilot_arm_size: Option<u64>,
    /// Comma-separated arm sizes.
    #[arg(long, global = true)]
    pub plan: Option<String>,
    /// Maximum number of assignments to enumerate.
    #[arg(long, global = true)]
    pub cap: Option<u64>,
    /// Run on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Write JSON here (`-` for stdout instead of the text report).
    #[arg(long, global = true)]
    pub json_out: Option<PathBuf>,
    /// Write the CSV table here.
    #[arg(long, global = true)]
    pub csv_out: Option<PathBuf>,
}

/// Output of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub json: Value,
    pub csv: Option<String>,
}

fn split(list: &str) -> Vec<String> {
    list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// Overlays command-line flags on the configuration file.
pub fn resolve(options: &Options) -> Result<RunConfig> {
    let mut c = match &options.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! over {
        ($($f:ident),*) => {$( if options.$f.is_some() { c.$f = options.$f.clone(); } )*};
    }
    over!(input, summary, population, alpha, alternative, correction, criterion, seed, draws, populations, n, n_grid, target_power, proportions, pilot_arm_size, plan, cap, json_out, csv_out);
    if let Some(f) = &options.factors {
        c.factors = Some(split(f));
    }
    if let Some(f) = &options.family {
        c.family = Some(split(f));
    }
    if let Some(f) = &options.joint {
        c.joint = Some(split(f));
    }
    if !options.estimand.is_empty() {
        c.estimand = Some(options.estimand.clone());
    }
    if !options.effect.is_empty() {
        c.effect = Some(options.effect.clone());
    }
    if options.haldane {
        c.haldane = Some(true);
    }
    if options.clip {
        c.clip = Some(true);
    }
    if options.sequential {
        c.execution = Some(Execution::Sequential);
    }
    if let Some(a) = c.alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::input(format!("alpha must lie in (0, 1), got {a}")));
        }
    }
    Ok(c)
}

pub fn run(command: Command, config: &RunConfig) -> Result<Report> {
    match command {
        Command::Analyze => cmd_analyze(config),
        Command::PlotData => cmd_plot_data(config),
        Command::PowerCurve => cmd_power_curve(config),
        Command::SampleSize => cmd_sample_size(config),
        Command::Allocate => cmd_allocate(config),
        Command::Simulate => cmd_simulate(config),
        Command::Enumerate => cmd_enumerate(config),
    }
}

/// Parses `args`, runs the command, writes outputs and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.downcast_ref::<Error>().map_or(1, Error::exit_code)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let config = resolve(&cli.options).context("reading options")?;
    let report = run(cli.command, &config).with_context(|| format!("running {}", cli.command.name()))?;
    let json = serde_json::to_string_pretty(&report.json).map_err(Error::from)? + "\n";
    let write = |p: &std::path::Path, body: &str| {
        io::write_output(p, body).with_context(|| format!("writing {}", p.display()))
    };
    match &config.json_out {
        Some(p) if p.as_os_str() == "-" => print!("{json}"),
        Some(p) => {
            write(p, &json)?;
            print!("{}", report.text);
        }
        None => print!("{}", report.text),
    }
    if let Some(p) = &config.csv_out {
        match &report.csv {
            Some(body) => write(p, body)?,
            None => log::warn!("this command has no CSV output"),
        }
    }
    Ok(())
}

fn factors(c: &RunConfig) -> Option<&[String]> {
    c.factors.as_deref()
}

fn execution(c: &RunConfig) -> Execution {
    c.execution.unwrap_or_default()
}

fn load_summary(c: &RunConfig) -> Result<GroupSummary> {
    match (&c.input, &c.summary) {
        (Some(_), Some(_)) => Err(Error::input("give either --input or --summary, not both")),
        (Some(p), None) => summarize(&io::read_unit_csv(p, factors(c))?),
        (None, Some(p)) => io::read_summary(p, factors(c)),
        (None, None) => Err(Error::input("no data: pass --input or --summary")),
    }
}

fn parse_floats(list: &str, what: &str) -> Result<Vec<f64>> {
    split(list)
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .or_else(|_| exact::parse_decimal(s).map(|r| exact::to_f64(&r)))
                .map_err(|_| Error::input(format!("{what}: {s:?} is not a number")))
        })
        .collect()
}

fn parse_counts(list: &str, what: &str) -> Result<Vec<u64>> {
    split(list)
        .iter()
        .map(|s| s.parse::<u64>().map_err(|_| Error::input(format!("{what}: {s:?} is not a non-negative integer"))))
        .collect()
}

fn design_for(c: &RunConfig, treatments: usize) -> Result<FactorialDesign> {
    if treatments < 2 || !treatments.is_power_of_two() {
        return Err(Error::input(format!("{treatments} treatments do not form a 2^K design")));
    }
    let k = treatments.trailing_zeros() as usize;
    match factors(c) {
        Some(f) if f.len() == k => FactorialDesign::new(f.iter().cloned()),
        Some(f) => Err(Error::input(format!("{} factor names for {treatments} treatments", f.len()))),
        None => FactorialDesign::with_factors(k),
    }
}

/// Design-stage variances and the design they belong to.
fn variance_guess(c: &RunConfig) -> Result<(VarianceGuess, FactorialDesign)> {
    if let Some(list) = &c.proportions {
        let p = parse_floats(list, "--proportions")?;
        let design = design_for(c, p.len())?;
        let guess = match c.pilot_arm_size {
            Some(r) => VarianceGuess::Pilot { proportions: p, arm_size: r },
            None => VarianceGuess::Proportions(p),
        };
        guess.validate(design.treatments())?;
        return Ok((guess, design));
    }
    let summary = load_summary(c)?;
    Ok((VarianceGuess::from_summary(&summary)?, summary.design().clone()))
}

fn effect_index(l: &ContrastMatrix, label: &str) -> Result<usize> {
    l.find(label)
        .map(|e| e.index)
        .ok_or_else(|| {
            let known: Vec<&str> = l.effects().iter().map(|e| e.label.as_str()).collect();
            Error::input(format!("unknown effect {label:?}; effects are {}", known.join(", ")))
        })
}

fn parse_specs(c: &RunConfig, l: &ContrastMatrix) -> Result<Vec<(usize, PowerSpec)>> {
    let list = c.effect.as_deref().unwrap_or_default();
    if list.is_empty() {
        return Err(Error::input("no effect sizes: pass --effect LABEL=size"));
    }
    list.iter()
        .map(|s| {
            let (label, tau) = s
                .split_once('=')
                .ok_or_else(|| Error::input(format!("effect {s:?} is not LABEL=size")))?;
            let index = effect_index(l, label.trim())?;
            let tau: f64 = tau
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("effect size {tau:?} is not a number")))?;
            Ok((index, PowerSpec { label: l.columns()[index].label.clone(), tau }))
        })
        .collect()
}

fn labels_to_indices(l: &ContrastMatrix, labels: &Option<Vec<String>>) -> Result<Option<Vec<usize>>> {
    labels
        .as_ref()
        .map(|v| v.iter().map(|s| effect_index(l, s)).collect())
        .transpose()
}

fn inference_options(c: &RunConfig, l: &ContrastMatrix) -> Result<InferenceOptions> {
    Ok(InferenceOptions {
        alpha: c.alpha.unwrap_or(0.05),
        alternative: c.alternative.unwrap_or_default(),
        correction: c.correction.unwrap_or_default(),
        family: labels_to_indices(l, &c.family)?,
        clip: c.clip.unwrap_or(false),
    })
}

fn inputs(c: &RunConfig) -> Value {
    serde_json::to_value(c).unwrap_or(Value::Null)
}

fn rational_text(r: &Rational) -> String {
    r.to_string()
}

pub fn cmd_analyze(c: &RunConfig) -> Result<Report> {
    let summary = load_summary(c)?;
    let l = ContrastMatrix::new(summary.design());
    let options = inference_options(c, &l)?;
    let linear = estimation::infer(&summary, &l, &options)?;
    let exact = estimation::estimate_effects(&summary, &l);
    let nl_opts = NonlinearOptions { haldane: c.haldane.unwrap_or(false) };
    let mut nonlinear_tables = Vec::new();
    for e in c.estimand.as_deref().unwrap_or(&[]) {
        let kind = match e {
            Estimand::Linear => continue,
            Estimand::LogFe => NonlinearKind::LogFe,
            Estimand::LogitFe => NonlinearKind::LogitFe,
        };
        nonlinear_tables.push(nonlinear::infer(&summary, &l, kind, nl_opts, &options)?);
    }
    let mut text = io::summary_text(&summary);
    text.push('\n');
    text.push_str(&io::inference_text(&linear));
    for t in &nonlinear_tables {
        text.push('\n');
        text.push_str(&io::nonlinear_text(t));
    }
    let exact_json: Vec<Value> = l
        .effects()
        .iter()
        .zip(&exact.effects)
        .map(|(e, v)| json!({"label": e.label, "value": rational_text(v)}))
        .collect();
    let json = json!({
        "command": "analyze",
        "inputs": inputs(c),
        "summary": SummaryFile::from_summary(&summary),
        "grand_mean": rational_text(&exact.grand_mean),
        "exact_estimates": exact_json,
        "linear": linear,
        "nonlinear": nonlinear_tables,
    });
    let csv = io::inference_csv(&linear, &nonlinear_tables)?;
    Ok(Report { text, json, csv: Some(csv) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub kind: &'static str,
    pub factors: String,
    pub levels: String,
    pub mean: f64,
    pub mean_exact: String,
}

/// Averages of `p_j` at each level of every factor and every factor pair,
/// weighting the remaining factors uniformly.
pub fn plot_points(summary: &GroupSummary) -> Vec<PlotPoint> {
    let design = summary.design();
    let p = summary.proportions_exact();
    let levels: Vec<Vec<u8>> = (1..=design.treatments())
        .map(|t| design.treatment_levels(t).expect("valid treatment"))
        .collect();
    let names = design.factor_names();
    let average = |pred: &dyn Fn(&[u8]) -> bool| {
        let (sum, count) = levels
            .iter()
            .zip(&p)
            .filter(|(lv, _)| pred(lv))
            .fold((Rational::from_integer(0.into()), 0i64), |(s, n), (_, v)| (s + v, n + 1));
        sum / exact::int(count)
    };
    let mut out = Vec::new();
    for (f, name) in names.iter().enumerate() {
        for lv in 0..2u8 {
            let m = average(&|x: &[u8]| x[f] == lv);
            out.push(PlotPoint {
                kind: "main",
                factors: name.clone(),
                levels: lv.to_string(),
                mean: exact::to_f64(&m),
                mean_exact: rational_text(&m),
            });
        }
    }
    for a in 0..names.len() {
        for b in a + 1..names.len() {
            for la in 0..2u8 {
                for lb in 0..2u8 {
                    let m = average(&|x: &[u8]| x[a] == la && x[b] == lb);
                    out.push(PlotPoint {
                        kind: "interaction",
                        factors: format!("{}{}{}", names[a], crate::design::INTERACTION_SEP, names[b]),
                        levels: format!("{la},{lb}"),
                        mean: exact::to_f64(&m),
                        mean_exact: rational_text(&m),
                    });
                }
            }
        }
    }
    out
}

pub fn cmd_plot_data(c: &RunConfig) -> Result<Report> {
    let summary = load_summary(c)?;
    let points = plot_points(&summary);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "factors", "levels", "mean"])?;
    let mut text = format!("{:<12} {:<12} {:<7} {:>8}\n", "kind", "factors", "levels", "mean");
    for pt in &points {
        w.write_record([pt.kind.to_string(), pt.factors.clone(), pt.levels.clone(), pt.mean.to_string()])?;
        let _ = writeln!(text, "{:<12} {:<12} {:<7} {:>8.4}", pt.kind, pt.factors, pt.levels, pt.mean);
    }
    Ok(Report {
        text,
        json: json!({"command": "plot-data", "inputs": inputs(c), "points": points}),
        csv: Some(io::into_string(w)?),
    })
}

fn parse_grid(c: &RunConfig, treatments: usize) -> Result<Vec<u64>> {
    let Some(spec) = &c.n_grid else {
        let j = treatments as u64;
        return Ok(power::default_grid(j, 256 * j).into_iter().filter(|&n| n >= 2 * j).collect());
    };
    if let Some((start, rest)) = spec.split_once(':') {
        let parts: Vec<&str> = rest.split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::input(format!("--n-grid: {s:?} is not an integer")))
        };
        let (start, stop, step) = match parts.as_slice() {
            [stop] => (num(start)?, num(stop)?, treatments as u64),
            [stop, step] => (num(start)?, num(stop)?, num(step)?),
            _ => return Err(Error::input("--n-grid must be start:stop[:step]")),
        };
        if step == 0 || stop < start {
            return Err(Error::input("--n-grid needs step > 0 and stop ≥ start"));
        }
        return Ok((start..=stop).step_by(step as usize).collect());
    }
    let grid = parse_counts(spec, "--n-grid")?;
    if grid.is_empty() {
        return Err(Error::input("--n-grid is empty"));
    }
    Ok(grid)
}

pub fn cmd_power_curve(c: &RunConfig) -> Result<Report> {
    let (guess, design) = variance_guess(c)?;
    let l = ContrastMatrix::new(&design);
    let specs: Vec<PowerSpec> = parse_specs(c, &l)?.into_iter().map(|(_, s)| s).collect();
    let grid = parse_grid(c, design.treatments())?;
    let family = labels_to_indices(&l, &c.family)?;
    let options = PowerCurveOptions {
        alpha: c.alpha.unwrap_or(0.05),
        correction: c.correction.unwrap_or_default(),
        family_size: family.map(|f| f.len()),
        criterion: c.criterion.unwrap_or_default(),
        target: c.target_power.unwrap_or(0.8),
        execution: execution(c),
    };
    let curve = power::power_curve(&specs, &guess, design.k(), &grid, &options)?;

    let mut text = format!(
        "power curve ({}, G = {}, criterion {:?}, target {})\n{:>6} {:>8}",
        curve.correction, curve.family_size, curve.criterion, curve.target, "N", "se"
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["n".to_string(), "feasible".into(), "se".into()];
    for s in &specs {
        let _ = write!(text, " {:>10}", s.label);
        header.push(format!("power_{}", s.label));
    }
    text.push_str(&format!(" {:>8}\n", "joint"));
    header.extend(["joint".to_string(), "note".into()]);
    w.write_record(&header)?;
    for p in &curve.points {
        let mut rec = vec![p.n.to_string(), p.feasible.to_string(), p.se.map_or(String::new(), |v| v.to_string())];
        match (p.se, p.joint) {
            (Some(se), Some(joint)) => {
                let _ = write!(text, "{:>6} {:>8.4}", p.n, se);
                for b in &p.powers {
                    let _ = write!(text, " {b:>10.4}");
                    rec.push(b.to_string());
                }
                let _ = writeln!(text, " {joint:>8.4}");
                rec.push(joint.to_string());
            }
            _ => {
                let _ = writeln!(text, "{:>6} {}", p.n, p.note.as_deref().unwrap_or(""));
                rec.extend(std::iter::repeat_n(String::new(), specs.len() + 1));
            }
        }
        rec.push(p.note.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    match curve.smallest_n {
        Some(n) => {
            let _ = writeln!(text, "smallest N with joint power ≥ {}: {n}", curve.target);
        }
        None => {
            let _ = writeln!(text, "no grid N reaches joint power {}", curve.target);
        }
    }
    Ok(Report {
        text,
        json: json!({"command": "power-curve", "inputs": inputs(c), "grid": grid, "curve": curve}),
        csv: Some(io::into_string(w)?),
    })
}

pub fn cmd_sample_size(c: &RunConfig) -> Result<Report> {
    let (guess, design) = variance_guess(c)?;
    let l = ContrastMatrix::new(&design);
    let specs = parse_specs(c, &l)?;
    let alpha = c.alpha.unwrap_or(0.05);
    let beta = c.target_power.unwrap_or(0.8);
    let criterion = c.criterion.unwrap_or_default();
    let weights = match &guess {
        // The N/(N−1) factor is common to every arm and does not move the optimum.
        VarianceGuess::Proportions(p) => p.iter().map(|p| p * (1.0 - p)).collect(),
        other => other.variances(0),
    };
    let deltas = power::optimal_fractions(criterion, &weights)?;
    let mut text = format!("sample size (one-sided, alpha = {alpha}, power = {beta}, criterion {criterion:?})\n");
    let _ = writeln!(text, "{:<12} {:>9} {:>12} {:>8} {:>9}", "effect", "size", "raw N", "ceil", "feasible");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["effect", "tau", "mode", "raw", "rounded", "feasible"])?;
    let mut results = Vec::new();
    for (_, spec) in &specs {
        let s = power::sample_size(spec.tau, alpha, beta, Some(&deltas), &guess)?;
        let _ = writeln!(
            text,
            "{:<12} {:>9.4} {:>12.4} {:>8} {:>9}",
            spec.label, spec.tau, s.raw, s.rounded, s.feasible
        );
        let mode = serde_json::to_value(s.mode)?.as_str().unwrap_or_default().to_string();
        w.write_record([
            spec.label.clone(),
            spec.tau.to_string(),
            mode,
            s.raw.to_string(),
            s.rounded.to_string(),
            s.feasible.to_string(),
        ])?;
        results.push(json!({"effect": spec.label, "tau": spec.tau, "result": s}));
    }
    Ok(Report {
        text,
        json: json!({"command": "sample-size", "inputs": inputs(c), "results": results}),
        csv: Some(io::into_string(w)?),
    })
}

fn plan_text(plan: &AllocationPlan) -> String {
    let mut text = format!("{:<10} {:>6} {:>9}\n", "treatment", "N_j", "fraction");
    for (j, (n, f)) in plan.arms.iter().zip(plan.fractions()).enumerate() {
        let _ = writeln!(text, "{:<10} {:>6} {:>9.4}", j + 1, n, f);
    }
    text
}

pub fn cmd_allocate(c: &RunConfig) -> Result<Report> {
    let (guess, design) = variance_guess(c)?;
    let n = c.n.ok_or_else(|| Error::input("pass the total sample size with --n"))?;
    let criterion = c.criterion.unwrap_or_default();
    let plan = power::allocate_optimal(criterion, &guess, n, design.treatments())?;
    let se = power::se_tilde(&guess, &plan, design.k())?;
    let fractions = power::optimal_fractions(criterion, &guess.variances(n))?;
    let mut text = format!("{criterion:?}-optimal allocation of N = {n}\n");
    text.push_str(&plan_text(&plan));
    let _ = writeln!(text, "conservative SE {se:.4}");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["treatment", "n", "fraction", "optimal_fraction"])?;
    for (j, (a, f)) in plan.arms.iter().zip(&fractions).enumerate() {
        w.write_record([(j + 1).to_string(), a.to_string(), (*a as f64 / n as f64).to_string(), f.to_string()])?;
    }
    Ok(Report {
        text,
        json: json!({
            "command": "allocate",
            "inputs": inputs(c),
            "plan": plan,
            "optimal_fractions": fractions,
            "se": se,
        }),
        csv: Some(io::into_string(w)?),
    })
}

/// The science table to simulate on, and whether it was built from targets.
fn load_table(c: &RunConfig) -> Result<(PotentialOutcomesTable, bool)> {
    match (&c.population, &c.proportions) {
        (Some(_), Some(_)) => Err(Error::input("give either --population or --proportions, not both")),
        (Some(p), None) => Ok((io::read_population_csv(p, factors(c))?, false)),
        (None, Some(list)) => {
            let targets = split(list)
                .iter()
                .map(|s| exact::parse_decimal(s))
                .collect::<Result<Vec<_>>>()?;
            let design = design_for(c, targets.len())?;
            let n = c.n.ok_or_else(|| Error::input("pass the population size with --n"))?;
            Ok((sim::construct_population(n, &targets, &design)?, true))
        }
        (None, None) => Err(Error::input("no population: pass --population or --proportions with --n")),
    }
}

fn table_plan(c: &RunConfig, table: &PotentialOutcomesTable) -> Result<AllocationPlan> {
    if let Some(list) = &c.plan {
        return AllocationPlan::explicit(parse_counts(list, "--plan")?);
    }
    let guess = VarianceGuess::Variances(table.variances_exact().iter().map(exact::to_f64).collect());
    power::allocate_optimal(
        c.criterion.unwrap_or_default(),
        &guess,
        table.n_units() as u64,
        table.design().treatments(),
    )
}

pub fn cmd_simulate(c: &RunConfig) -> Result<Report> {
    let (table, constructed) = load_table(c)?;
    let l = ContrastMatrix::new(table.design());
    let plan = table_plan(c, &table)?;
    let options = SimulationOptions {
        draws: c.draws.unwrap_or(1000),
        alpha: c.alpha.unwrap_or(0.05),
        family: labels_to_indices(&l, &c.family)?,
        joint: labels_to_indices(&l, &c.joint)?,
        seed: c.seed.unwrap_or(0),
        execution: execution(c),
    };
    let populations = c.populations.or(if constructed { Some(10) } else { None });
    let mut text = format!("N = {}, arms {:?}, seed {}\n", table.n_units(), plan.arms, options.seed);
    let mut w = csv::Writer::from_writer(Vec::new());
    let json = match populations {
        Some(m) => {
            let report = sim::run_protocol(&table, &plan.arms, m, &options)?;
            let _ = writeln!(text, "{m} populations × {} draws", report.draws);
            let _ = writeln!(text, "{:>10} {:>12} {:>12}", "population", "joint IER", "joint EER");
            w.write_record(["population", "seed", "joint_power_ier", "joint_power_eer", "familywise_ier", "familywise_eer"])?;
            for p in &report.populations {
                let _ = writeln!(text, "{:>10} {:>12.4} {:>12.4}", p.index, p.joint_power_ier, p.joint_power_eer);
                w.write_record([
                    p.index.to_string(),
                    p.seed.to_string(),
                    p.joint_power_ier.to_string(),
                    p.joint_power_eer.to_string(),
                    p.familywise_ier.to_string(),
                    p.familywise_eer.to_string(),
                ])?;
            }
            let _ = writeln!(text, "{:>10} {:>12.4} {:>12.4}", "mean", report.joint_power_ier, report.joint_power_eer);
            json!({"command": "simulate", "inputs": inputs(c), "arms": plan.arms, "protocol": report})
        }
        None => {
            let report = sim::simulate(&table, &plan.arms, &options)?;
            let _ = writeln!(
                text,
                "{:<10} {:>9} {:>9} {:>10} {:>10} {:>8} {:>8} {:>8}",
                "effect", "tau", "bias", "var", "true var", "rej IER", "rej EER", "cover"
            );
            w.write_record([
                "effect", "tau", "bias", "empirical_variance", "true_variance", "mean_se2", "rejection_ier",
                "rejection_eer", "coverage_ier", "coverage_eer",
            ])?;
            for e in &report.effects {
                let _ = writeln!(
                    text,
                    "{:<10} {:>9.4} {:>9.5} {:>10.6} {:>10.6} {:>8.4} {:>8.4} {:>8.4}",
                    e.label, e.tau, e.bias, e.empirical_variance, e.true_variance, e.rejection_ier, e.rejection_eer, e.coverage_ier
                );
                w.write_record([
                    e.label.clone(),
                    e.tau.to_string(),
                    e.bias.to_string(),
                    e.empirical_variance.to_string(),
                    e.true_variance.to_string(),
                    e.mean_se2.to_string(),
                    e.rejection_ier.to_string(),
                    e.rejection_eer.to_string(),
                    e.coverage_ier.to_string(),
                    e.coverage_eer.to_string(),
                ])?;
            }
            let _ = writeln!(
                text,
                "joint power {:.4} (IER) {:.4} (Bonferroni); family-wise rejection {:.4} / {:.4}; {} degenerate draws",
                report.joint_power_ier, report.joint_power_eer, report.familywise_ier, report.familywise_eer, report.degenerate
            );
            json!({"command": "simulate", "inputs": inputs(c), "arms": plan.arms, "report": report})
        }
    };
    Ok(Report { text, json, csv: Some(io::into_string(w)?) })
}

fn matrix_text(m: &[Vec<Rational>]) -> Vec<Vec<String>> {
    m.iter().map(|r| r.iter().map(rational_text).collect()).collect()
}

pub fn cmd_enumerate(c: &RunConfig) -> Result<Report> {
    let (table, _) = load_table(c)?;
    let l = ContrastMatrix::new(table.design());
    let plan = table_plan(c, &table)?;
    let options = EnumerationOptions {
        cap: c.cap.unwrap_or(sim::DEFAULT_CAP),
        execution: execution(c),
    };
    let dist = sim::enumerate_randomizations(&table, &plan.arms, &options)?;
    let mean = dist.mean_effects();
    let cov = dist.effect_covariance();
    let tau = table.tau_fp_exact(&l);
    let mut text = format!("{} assignments of N = {} with arms {:?}\n", dist.assignments(), table.n_units(), plan.arms);
    let _ = writeln!(text, "{:<10} {:>14} {:>14} {:>14}", "effect", "E(estimate)", "tau", "Var");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["effect", "mean", "tau", "variance"])?;
    for e in l.effects() {
        let i = e.index;
        let _ = writeln!(text, "{:<10} {:>14} {:>14} {:>14}", e.label, mean[i].to_string(), tau[i].to_string(), cov[i][i].to_string());
        w.write_record([e.label.clone(), mean[i].to_string(), tau[i].to_string(), cov[i][i].to_string()])?;
    }
    let s2 = dist.mean_sample_variances().ok();
    let se2 = dist.mean_neyman_variance().ok();
    if let Some(v) = &se2 {
        let _ = writeln!(text, "E(SE²) = {v}");
    }
    let json = json!({
        "command": "enumerate",
        "inputs": inputs(c),
        "arms": plan.arms,
        "assignments": dist.assignments(),
        "labels": l.columns().iter().map(|e| e.label.clone()).collect::<Vec<_>>(),
        "mean_effects": mean.iter().map(rational_text).collect::<Vec<_>>(),
        "effect_covariance": matrix_text(&cov),
        "mean_proportions": dist.mean_proportions().iter().map(rational_text).collect::<Vec<_>>(),
        "proportion_covariance": matrix_text(&dist.proportion_covariance()),
        "mean_sample_variances": s2.map(|v| v.iter().map(rational_text).collect::<Vec<_>>()),
        "mean_neyman_variance": se2.as_ref().map(rational_text),
    });
    Ok(Report { text, json, csv: Some(io::into_string(w)?) })
}
