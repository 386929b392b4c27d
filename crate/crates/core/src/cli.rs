//! Command-line surface: argument parsing, pipelines and exit codes.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evidence::{
    automatic_count, count_in_region, encompassing_bf, reorder_by_violations, stepwise_count,
    AutoOptions, ConstantEstimate, CountResult, EvidenceResult, EvidenceStatus,
};
use crate::fit::ppp_value;
use crate::io::report::{fmt_num, Timing};
use crate::io::{read_model_file, validate, ModelSpec, RunReport, SpecConstraint, Table, REPORT_SCHEMA};
use crate::model::{complete_theta, log_likelihood, posterior_shapes, Theta};
use crate::par::{init_threads, Exec};
use crate::rng::derive_seed;
use crate::sampler::{
    effective_sample_size, map_estimate, run_parallel_chains, Chain, GibbsOptions, ScanOrder,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_INFEASIBLE: i32 = 5;

/// Rows checked on pilot draws when reordering constraints.
const REORDER_PILOT: u64 = 1000;

#[derive(Parser, Debug)]
#[command(
    name = "ineqmn",
    version,
    about = "Bayesian inference for multinomial models with convex inequality constraints"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw from the constrained posterior with parallel Gibbs chains.
    Sample(SampleArgs),
    /// Encompassing Bayes factors from prior and posterior counts.
    Bf(CountArgs),
    /// Count the prior (or posterior) mass inside the constraints.
    Count(CountArgs),
    /// Posterior-predictive p-value of Pearson's X².
    Ppp(SampleArgs),
    /// Maximum a-posteriori estimate.
    Map(MapArgs),
    /// Test whether a parameter vector satisfies the constraints.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScanArg {
    Systematic,
    Random,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Counts, all categories or the free ones (replaces the file's k).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub k: Option<Vec<i64>>,
    /// Totals per item type (replaces the file's n).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub n: Option<Vec<i64>>,
    /// Categories per item type (replaces the file's options).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub options: Option<Vec<i64>>,
    /// Dirichlet shapes, one per category or a single shared value.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub prior: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write the JSON report to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Format of the report printed to stdout.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Worker threads.
    #[arg(long, env = "INEQMN_THREADS")]
    pub threads: Option<usize>,
    /// Run every loop on the calling thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Iterations per chain, including burn-in.
    #[arg(long, default_value_t = 5000)]
    pub samples: usize,
    #[arg(long, default_value_t = 8)]
    pub chains: usize,
    /// Iterations discarded at the start of each chain.
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long, value_enum, default_value_t = ScanArg::Systematic)]
    pub scan: ScanArg,
    /// Write the retained draws as CSV.
    #[arg(long)]
    pub draws: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CountArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Draws per counting run (per step when stepwise).
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Increasing row counts for stepwise counting.
    #[arg(long, value_delimiter = ',')]
    pub steps: Option<Vec<usize>>,
    /// Minimum hits per step; switches to automatic counting.
    #[arg(long)]
    pub cmin: Option<u64>,
    /// Draws per batch in automatic counting.
    #[arg(long)]
    pub block: Option<u64>,
    /// Draw budget of automatic counting.
    #[arg(long, default_value_t = crate::evidence::count::DEFAULT_MAX_DRAWS)]
    pub max_draws: u64,
    /// Draws used to propagate counting uncertainty.
    #[arg(long, default_value_t = crate::evidence::DEFAULT_UNCERTAINTY_DRAWS)]
    pub uncertainty_draws: usize,
    /// Check the most often violated rows first (plain counting only).
    #[arg(long)]
    pub reorder: bool,
    /// Count posterior instead of prior mass (count only).
    #[arg(long)]
    pub posterior: bool,
}

#[derive(Args, Debug, Clone)]
pub struct MapArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Free parameters to test.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub theta: Vec<f64>,
}

impl Command {
    fn run_args(&self) -> &RunArgs {
        match self {
            Command::Sample(a) | Command::Ppp(a) => &a.run,
            Command::Bf(a) | Command::Count(a) => &a.run,
            Command::Map(a) => &a.run,
            Command::Check(a) => &a.run,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Bf(_) => "bf",
            Command::Count(_) => "count",
            Command::Ppp(_) => "ppp",
            Command::Map(_) => "map",
            Command::Check(_) => "check",
        }
    }
}

/// Exit code for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::Dimension { .. }
        | Error::Layout(_)
        | Error::InvalidValue(_)
        | Error::OutsideSimplex(_) => EXIT_PARSE,
        Error::Infeasible | Error::OutsideHull => EXIT_INFEASIBLE,
        Error::Numeric(_) | Error::Lp(_) | Error::EmptyInterval { .. } => EXIT_NUMERIC,
        Error::Chain { source, .. } => exit_code(source),
        Error::Io(_) => EXIT_IO,
    }
}

fn load_model(args: &ModelArgs) -> Result<ModelSpec> {
    let mut raw = read_model_file(&args.model)?;
    if let Some(o) = &args.options {
        raw.options = o.clone();
    }
    if let Some(k) = &args.k {
        raw.k = Some(k.clone());
        // totals from the file belong to the file's counts
        if args.n.is_none() {
            raw.n = None;
        }
    }
    if let Some(n) = &args.n {
        raw.n = Some(n.clone());
    }
    if let Some(p) = &args.prior {
        raw.prior = Some(p.clone());
    }
    validate(raw, &args.model)
}

fn model_summary(spec: &ModelSpec, args: &ModelArgs) -> Value {
    let constraint = match &spec.constraint {
        SpecConstraint::Ab(p) => json!({"kind": "ab", "rows": p.n_rows()}),
        SpecConstraint::V(p) => json!({"kind": "vertices", "vertices": p.n_vertices()}),
    };
    json!({
        "path": args.model.display().to_string(),
        "description": spec.description,
        "options": spec.layout.options(),
        "dim": spec.layout.dim(),
        "count_convention": spec.convention,
        "k": spec.data.k(),
        "n": spec.data.n(),
        "prior": spec.prior.shapes(),
        "constraint": constraint,
    })
}

fn exec_of(run: &RunArgs) -> Exec {
    if run.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

/// Output of one pipeline before it is wrapped into a report.
struct Outcome {
    settings: Value,
    result: Value,
    table: Table,
}

/// Parses nothing; runs an already parsed command and builds its report.
pub fn execute(cli: &Cli) -> Result<RunReport> {
    let started = Instant::now();
    let run = cli.command.run_args();
    if let Some(t) = run.threads {
        init_threads(t.max(1));
    }
    let (model_args, outcome) = match &cli.command {
        Command::Sample(a) => (&a.model, cmd_sample(a, false)?),
        Command::Ppp(a) => (&a.model, cmd_sample(a, true)?),
        Command::Bf(a) => (&a.model, cmd_count(a, true)?),
        Command::Count(a) => (&a.model, cmd_count(a, false)?),
        Command::Map(a) => (&a.model, cmd_map(a)?),
        Command::Check(a) => (&a.model, cmd_check(a)?),
    };
    let spec = load_model(model_args)?;
    Ok(RunReport {
        schema: REPORT_SCHEMA,
        command: cli.command.name().to_string(),
        seed: run.seed,
        model: model_summary(&spec, model_args),
        settings: outcome.settings,
        result: outcome.result,
        table: outcome.table,
        timing: Timing {
            seconds: started.elapsed().as_secs_f64(),
        },
    })
}

fn param_names(spec: &ModelSpec) -> Vec<String> {
    let layout = &spec.layout;
    (0..layout.dim())
        .map(|d| {
            let i = layout.item_of(d);
            let j = d - layout.free_range(i).start;
            format!("theta[{},{}]", i + 1, j + 1)
        })
        .collect()
}

fn quantile_of(mut v: Vec<f64>, p: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn write_draws(path: &PathBuf, chains: &[Chain], names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    let mut header = vec!["chain".to_string(), "iteration".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
    for (c, chain) in chains.iter().enumerate() {
        for (t, s) in chain.samples().enumerate() {
            let mut rec = vec![(c + 1).to_string(), (t + 1).to_string()];
            rec.extend(s.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| Error::Io(e.into()))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_sample(a: &SampleArgs, ppp: bool) -> Result<Outcome> {
    let spec = load_model(&a.model)?;
    let model = spec.constraint_model()?;
    let exec = exec_of(&a.run);
    let scan = match a.scan {
        ScanArg::Systematic => ScanOrder::Systematic,
        ScanArg::Random => ScanOrder::Random,
    };
    let mut opts = GibbsOptions::new(a.samples).scan(scan);
    opts.burnin = a.burnin;
    let start = map_estimate(&model, &spec.data, &spec.prior)?;
    opts.start = Some(start.clone());
    if opts.burnin.is_none() {
        // the start is the MAP estimate computed here
        opts.burnin = Some(crate::sampler::BURNIN_FROM_MAP);
    }
    let chains = run_parallel_chains(
        &model,
        &spec.data,
        &spec.prior,
        &opts,
        a.chains,
        derive_seed(a.run.seed, 10),
        exec,
    )?;
    let names = param_names(&spec);
    if let Some(path) = &a.draws {
        write_draws(path, &chains, &names)?;
    }
    let pooled = Chain::pooled(&chains)?;
    if pooled.is_empty() {
        return Err(Error::InvalidValue("no draws retained after burn-in".into()));
    }
    let ess: Vec<_> = chains.iter().map(effective_sample_size).collect();
    let settings = json!({
        "samples": a.samples,
        "chains": a.chains,
        "burnin": opts.burnin,
        "scan": scan,
        "start": "map",
    });
    let diagnostics = json!({
        "ess_ratio_by_chain": ess.iter().map(|e| e.ratio.clone()).collect::<Vec<_>>(),
        "ess_mean_ratio": ess.iter().map(|e| e.mean_ratio()).sum::<f64>() / ess.len() as f64,
        "degenerate": ess.iter().map(|e| e.degenerate.clone()).collect::<Vec<_>>(),
    });

    if ppp {
        let r = ppp_value(&pooled, &spec.data, &spec.layout, derive_seed(a.run.seed, 20), exec)?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mut table = Table::new(["", "p_B", "x2_obs", "x2_pred"]);
        table.push([
            "total".to_string(),
            fmt_num(r.p_value),
            fmt_num(mean(&r.x2_obs)),
            fmt_num(mean(&r.x2_pred)),
        ]);
        for (i, p) in r.p_by_item.iter().enumerate() {
            table.push([format!("item {}", i + 1), fmt_num(*p), String::new(), String::new()]);
        }
        let result = json!({
            "p_value": r.p_value,
            "p_by_item": r.p_by_item,
            "t": r.t,
            "x2_obs_mean": mean(&r.x2_obs),
            "x2_pred_mean": mean(&r.x2_pred),
            "map": start.as_slice(),
            "diagnostics": diagnostics,
        });
        return Ok(Outcome { settings, result, table });
    }

    let means = pooled.means();
    let sds = pooled.sds();
    let mut table = Table::new(["", "mean", "sd", "q05", "q95", "ess_ratio"]);
    let mut params = Vec::new();
    for (d, name) in names.iter().enumerate() {
        let col = pooled.column(d);
        let q05 = quantile_of(col.clone(), 0.05);
        let q95 = quantile_of(col, 0.95);
        let ratio = ess.iter().map(|e| e.ratio[d]).sum::<f64>() / ess.len() as f64;
        table.push([
            name.clone(),
            fmt_num(means[d]),
            fmt_num(sds[d]),
            fmt_num(q05),
            fmt_num(q95),
            fmt_num(ratio),
        ]);
        params.push(json!({
            "name": name, "mean": means[d], "sd": sds[d], "q05": q05, "q95": q95, "ess_ratio": ratio,
        }));
    }
    let result = json!({
        "draws": pooled.len(),
        "map": start.as_slice(),
        "parameters": params,
        "diagnostics": diagnostics,
    });
    Ok(Outcome { settings, result, table })
}

/// Counting strategy implied by the flags.
fn count_constant(
    a: &CountArgs,
    spec: &ModelSpec,
    shapes: &[f64],
    seed: u64,
) -> Result<(CountResult, &'static str)> {
    let exec = exec_of(&a.run);
    let model = spec.constraint_model()?;
    let facets = match &spec.constraint {
        SpecConstraint::Ab(p) => Some(p),
        SpecConstraint::V(_) => None,
    };
    match (&a.steps, a.cmin) {
        (None, None) => {
            if a.reorder {
                if let Some(p) = facets {
                    let prior = spec.prior.shapes();
                    let reordered = reorder_by_violations(p, &spec.layout, prior, REORDER_PILOT, a.run.seed)?;
                    let m = crate::sampler::ConstraintModel::ab(spec.layout.clone(), reordered)?;
                    return Ok((count_in_region(&m, shapes, a.samples, seed, exec)?, "plain"));
                }
            }
            Ok((count_in_region(&model, shapes, a.samples, seed, exec)?, "plain"))
        }
        (steps, cmin) => {
            let p = facets.ok_or_else(|| {
                Error::InvalidValue("stepwise and automatic counting need an 'ab' constraint".into())
            })?;
            if a.reorder {
                return Err(Error::InvalidValue(
                    "--reorder changes the meaning of --steps; use it with plain counting only".into(),
                ));
            }
            let steps = steps.clone().unwrap_or_else(|| vec![p.n_rows()]);
            match cmin {
                Some(cmin) => {
                    let opts = AutoOptions {
                        cmin,
                        block: a.block,
                        max_draws: a.max_draws,
                    };
                    Ok((automatic_count(p, &spec.layout, &steps, shapes, &opts, seed)?, "automatic"))
                }
                None => Ok((
                    stepwise_count(p, &spec.layout, &steps, shapes, a.samples, seed, exec)?,
                    "stepwise",
                )),
            }
        }
    }
}

fn count_table(result: &CountResult) -> Table {
    let mut table = Table::new(["step", "rows", "inside", "total", "effective", "proportion"]);
    match &result.per_step {
        Some(steps) => {
            for (m, s) in steps.iter().enumerate() {
                table.push([
                    (m + 1).to_string(),
                    s.rows.to_string(),
                    s.inside.to_string(),
                    s.total.to_string(),
                    fmt_num(s.effective),
                    fmt_num(s.proportion()),
                ]);
            }
            table.push([
                "product".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                fmt_num(result.proportion()),
            ]);
        }
        None => table.push([
            "1".to_string(),
            String::new(),
            result.inside.to_string(),
            result.total.to_string(),
            fmt_num(result.total as f64),
            fmt_num(result.proportion()),
        ]),
    }
    table
}

fn bf_table(e: &EvidenceResult) -> Table {
    if e.status == EvidenceStatus::Estimated {
        let mut table = Table::new(["", "bf", "se", "ci5", "ci95"]);
        for (name, s) in [("bf_0u", e.bf_0u), ("bf_u0", e.bf_u0), ("bf_00c", e.bf_00c)] {
            match s {
                Some(s) => table.push([
                    name.to_string(),
                    fmt_num(s.estimate),
                    fmt_num(s.se),
                    fmt_num(s.q05),
                    fmt_num(s.q95),
                ]),
                None => table.push([name, "NA", "NA", "NA", "NA"]),
            }
        }
        table
    } else {
        let mut table = Table::new(["", "bound"]);
        let b = e.bounds.expect("bounds accompany unestimated results");
        for (name, v) in [
            ("bf_0u >", b.bf_0u_lower),
            ("bf_0u <", b.bf_0u_upper),
            ("f <", b.f_upper),
            ("c <", b.c_upper),
        ] {
            if let Some(v) = v {
                table.push([name.to_string(), fmt_num(v)]);
            }
        }
        table
    }
}

fn cmd_count(a: &CountArgs, bf: bool) -> Result<Outcome> {
    let spec = load_model(&a.model)?;
    let posterior = posterior_shapes(&spec.data, &spec.prior)?;
    let settings = json!({
        "samples": a.samples,
        "steps": a.steps,
        "cmin": a.cmin,
        "block": a.block,
        "max_draws": a.max_draws,
        "uncertainty_draws": a.uncertainty_draws,
        "reorder": a.reorder,
        "posterior": a.posterior,
    });
    if !bf {
        let (shapes, which) = if a.posterior {
            (posterior, "posterior")
        } else {
            (spec.prior.shapes().to_vec(), "prior")
        };
        let (count, method) = count_constant(a, &spec, &shapes, derive_seed(a.run.seed, 1))?;
        let estimate = count.proportion();
        let mut table = count_table(&count);
        if estimate > 0.0 {
            table.push(["1/estimate".to_string(), String::new(), String::new(), String::new(), String::new(), fmt_num(1.0 / estimate)]);
        }
        let result = json!({
            "of": which,
            "method": method,
            "count": count,
            "estimate": estimate,
            "upper_bound": count.has_zero_step().then(|| count.upper_bound()),
        });
        return Ok(Outcome { settings, result, table });
    }
    let (prior, method) = count_constant(a, &spec, spec.prior.shapes(), derive_seed(a.run.seed, 1))?;
    let (post, _) = count_constant(a, &spec, &posterior, derive_seed(a.run.seed, 2))?;
    let evidence = encompassing_bf(
        &ConstantEstimate::Counted(prior.clone()),
        &ConstantEstimate::Counted(post.clone()),
        a.uncertainty_draws,
        derive_seed(a.run.seed, 3),
    )?;
    let table = bf_table(&evidence);
    let result = json!({
        "method": method,
        "prior_count": prior,
        "posterior_count": post,
        "evidence": evidence,
    });
    Ok(Outcome { settings, result, table })
}

fn cmd_map(a: &MapArgs) -> Result<Outcome> {
    let spec = load_model(&a.model)?;
    let model = spec.constraint_model()?;
    let theta = map_estimate(&model, &spec.data, &spec.prior)?;
    let ll = log_likelihood(&spec.data, theta.as_slice(), &spec.layout)?;
    let mut table = Table::new(["", "value"]);
    for (name, v) in param_names(&spec).iter().zip(theta.as_slice()) {
        table.push([name.clone(), fmt_num(*v)]);
    }
    table.push(["log_likelihood".to_string(), fmt_num(ll)]);
    let result = json!({
        "theta": theta.as_slice(),
        "probabilities": complete_theta(theta.as_slice(), &spec.layout)?,
        "log_likelihood": ll,
    });
    Ok(Outcome {
        settings: json!({}),
        result,
        table,
    })
}

fn cmd_check(a: &CheckArgs) -> Result<Outcome> {
    let spec = load_model(&a.model)?;
    let theta = Theta::new(a.theta.clone(), &spec.layout)?;
    let model = spec.constraint_model()?;
    let inside = model.contains(theta.as_slice())?;
    let verdict = if inside { "inside" } else { "outside" };
    let mut table = Table::new(["", "value"]);
    table.push(["verdict", verdict]);
    let result = match &spec.constraint {
        SpecConstraint::Ab(p) => {
            let slack = p.slack(theta.as_slice());
            for (r, s) in slack.iter().enumerate() {
                table.push([format!("slack row {}", r + 1), fmt_num(*s)]);
            }
            json!({"inside": inside, "verdict": verdict, "slack": slack})
        }
        SpecConstraint::V(p) => {
            let value = crate::geometry::hull_lp_value(p, theta.as_slice())?;
            table.push(["hull_lp_value".to_string(), fmt_num(value)]);
            json!({"inside": inside, "verdict": verdict, "hull_lp_value": value})
        }
    };
    Ok(Outcome {
        settings: json!({"theta": a.theta}),
        result,
        table,
    })
}

/// Writes the report where the flags ask for it.
fn emit(report: &RunReport, run: &RunArgs, out: &mut dyn std::io::Write) -> Result<()> {
    if let Some(path) = &run.output {
        std::fs::write(path, report.to_json() + "\n")?;
    }
    match run.format {
        Format::Json => writeln!(out, "{}", report.to_json())?,
        Format::Table => write!(out, "{}", report.table.render())?,
    }
    Ok(())
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = write!(err, "{}", e.render());
            if !e.use_stderr() {
                let _ = write!(out, "{}", e.render());
            }
            return code;
        }
    };
    let result = execute(&cli).and_then(|report| emit(&report, cli.command.run_args(), out));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e);
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let parse = exit_code(&Error::Parse { path: "m".into(), msg: "x".into() });
        let numeric = exit_code(&Error::Numeric("x".into()));
        let infeasible = exit_code(&Error::Chain { index: 0, source: Box::new(Error::Infeasible) });
        assert_eq!((parse, numeric, infeasible), (3, 4, 5));
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with_args(["ineqmn", "bf", "--model", "m.json", "--bogus"], &mut out, &mut err);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn missing_model_is_a_parse_error() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with_args(["ineqmn", "map", "--model", "/nonexistent/m.json"], &mut out, &mut err);
        assert_eq!(code, EXIT_PARSE);
    }
}
