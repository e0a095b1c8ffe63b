use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rlcm_core::conditions::{decide_with, ConditionReport, DecideOptions, Level, SearchBudget, Status, Verdict, SCHEMA};
use rlcm_core::datasets;
use rlcm_core::gamma::equivalence_partition;
use rlcm_core::models::{
    default_params, fit_em_two_param, generate_params, random_proportions, simulate_with, Dataset, EmOptions, ItemParams,
    Proportions,
};
use rlcm_core::par::Execution;
use rlcm_core::tmatrix::{brute_force_oracle, construct_counterexample, Construction, CounterexampleOptions, OracleOptions};
use rlcm_core::{build_gamma, LatentClassSpace, ModelSpec, MultiFamily, QMatrix};
use serde_json::json;
use std::fmt::Write;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "rlcm", version, about = "Identifiability analysis for restricted latent class models")]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide the identifiability level of a Q-matrix under a model.
    Check(CheckArgs),
    /// List the equivalence classes of the latent class space.
    Classes(ClassesArgs),
    /// Simulate response data and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a two-parameter model to response data by EM.
    Estimate(EstimateArgs),
    /// Build a verified counterexample for a non-identifiable model.
    Counterexample(CounterexampleArgs),
    /// Search numerically for a distinct parameter set with the same distribution.
    Oracle(OracleArgs),
    /// List the bundled Q-matrices or print one as CSV.
    Datasets(DatasetsArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Q-matrix CSV file, one row per item.
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    q: Option<PathBuf>,
    /// Bundled Q-matrix (toefl_a, toefl_b, timss, fraction).
    #[arg(long)]
    dataset: Option<String>,
    /// Latent class space file, one profile per line; saturated when absent.
    #[arg(long)]
    space: Option<PathBuf>,
    /// conj, disj, multi, or one c/d/m code per item.
    #[arg(long, default_value = "conj")]
    model: String,
    /// Family used when generating multi-parameter item parameters.
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Accept Q-matrices with attributes no item requires.
    #[arg(long)]
    allow_zero_columns: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Family {
    Identity,
    Logit,
    Log,
    All,
}

impl From<Family> for MultiFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Identity => MultiFamily::MainEffectIdentity,
            Family::Logit => MultiFamily::MainEffectLogit,
            Family::Log => MultiFamily::MainEffectLog,
            Family::All => MultiFamily::AllEffect,
        }
    }
}

struct Model {
    q: QMatrix,
    space: LatentClassSpace,
    spec: ModelSpec,
}

impl ModelArgs {
    fn load(&self) -> Result<Model> {
        let q = match (&self.q, &self.dataset) {
            (Some(path), _) => QMatrix::from_file(path, self.allow_zero_columns)
                .with_context(|| format!("reading Q-matrix {}", path.display()))?,
            (None, Some(name)) => {
                datasets::by_name(name).with_context(|| format!("unknown dataset '{name}'; try `rlcm datasets`"))?.q
            }
            (None, None) => bail!("either --q or --dataset is required"),
        };
        let space = match &self.space {
            Some(path) => LatentClassSpace::from_file(path).with_context(|| format!("reading space {}", path.display()))?,
            None => LatentClassSpace::saturated(q.k())?,
        };
        if space.k() != q.k() {
            bail!("space profiles have {} attributes but Q has {}", space.k(), q.k());
        }
        let mut spec = ModelSpec::parse(&self.model, q.j())?;
        if let Some(f) = self.family {
            spec = spec.with_family(f.into());
        }
        Ok(Model { q, space, spec })
    }
}

#[derive(Args, Debug)]
struct ParamArgs {
    /// Draw item parameters and proportions from the seed instead of the fixed defaults.
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ParamArgs {
    fn params(&self, m: &Model) -> Result<(ItemParams, Proportions)> {
        if self.random {
            let theta = generate_params(&m.q, &m.space, &m.spec, None, self.seed)?;
            Ok((theta, random_proportions(m.space.len(), self.seed)))
        } else {
            Ok((default_params(&m.q, &m.space, &m.spec)?, Proportions::uniform(m.space.len())))
        }
    }
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Also report the categorical-response extension.
    #[arg(long)]
    categorical: bool,
    /// Emit the verdict as JSON.
    #[arg(long)]
    json: bool,
    /// Maximum subsets visited by each combinatorial search.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args, Debug)]
struct ClassesArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Number of response vectors.
    #[arg(long, short = 'n')]
    n: usize,
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the generating parameters as JSON.
    #[arg(long)]
    params_out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Response CSV: N rows of J comma-separated 0/1.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct CounterexampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Construction to use; the verdict's own construction when absent.
    #[arg(long)]
    construction: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 200)]
    restarts: usize,
    /// Size of the pinned departure from the original parameters.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct DatasetsArgs {
    /// Print this dataset's Q-matrix as CSV.
    name: Option<String>,
    #[arg(long)]
    json: bool,
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn push_json(out: &mut String, value: &serde_json::Value) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Satisfied => "satisfied",
        Status::Violated => "violated",
        Status::Undetermined => "undetermined",
    }
}

fn report_line(r: &ConditionReport) -> String {
    let mut s = format!("  {:<12} {}", status_name(r.status), r.id);
    if r.definitive {
        s.push_str(" (definitive)");
    }
    if r.budget_exhausted {
        s.push_str(" (budget exhausted)");
    }
    if let Some(note) = &r.note {
        s.push_str(": ");
        s.push_str(note);
    }
    s
}

fn push_verdict(out: &mut String, v: &Verdict) -> std::fmt::Result {
    writeln!(out, "level: {}", v.level)?;
    writeln!(out, "definitive: {}", v.definitive)?;
    writeln!(out, "equivalence classes: {}", v.classes)?;
    writeln!(out, "separable: {}", v.separable)?;
    writeln!(out, "conditions:")?;
    for r in &v.trace {
        writeln!(out, "{}", report_line(r))?;
    }
    if let Some(ce) = &v.counterexample {
        writeln!(out, "counterexample: {} at {} (distance {:.1e}, parameter gap {:.3})", ce.construction, ce.site, ce.distance, ce.param_gap)?;
    }
    Ok(())
}

fn check(out: &mut String, a: CheckArgs) -> Result<u8> {
    let m = a.model.load()?;
    let mut budget = SearchBudget::default();
    if let Some(b) = a.budget {
        budget.max_subsets = b;
    }
    let opts = DecideOptions { budget, categorical: a.categorical, ..DecideOptions::default() };
    let v = decide_with(&m.q, &m.space, &m.spec, &opts)?;
    if a.json {
        push_json(out, &v.to_json())?;
    } else {
        push_verdict(out, &v)?;
    }
    Ok(v.exit_code() as u8)
}

fn classes(out: &mut String, a: ClassesArgs) -> Result<u8> {
    let m = a.model.load()?;
    let g = build_gamma(&m.q, &m.space, &m.spec)?;
    let part = equivalence_partition(&g);
    let listing: Vec<serde_json::Value> = part
        .classes
        .iter()
        .zip(&part.representatives)
        .map(|(members, rep)| {
            let names: Vec<String> = members.iter().map(|&a| m.space.profiles()[a].to_string()).collect();
            json!({ "representative": rep.to_string(), "size": members.len(), "members": names })
        })
        .collect();
    if a.json {
        push_json(out, &json!({ "schema": SCHEMA, "count": part.len(), "separable": g.is_separable(), "classes": listing }))?;
    } else {
        writeln!(out, "{} equivalence classes over {} profiles", part.len(), m.space.len())?;
        for c in &listing {
            let members: Vec<&str> = c["members"].as_array().unwrap().iter().filter_map(|v| v.as_str()).collect();
            writeln!(out, "  {}  size {}  {{{}}}", c["representative"].as_str().unwrap(), c["size"], members.join(", "))?;
        }
    }
    Ok(0)
}

fn params_json(theta: &ItemParams, p: &Proportions, space: &LatentClassSpace, seed: Option<u64>) -> serde_json::Value {
    let profiles: Vec<String> = space.profiles().iter().map(|a| a.to_string()).collect();
    json!({ "schema": SCHEMA, "profiles": profiles, "theta": theta.rows(), "p": p.as_slice(), "seed": seed })
}

fn simulate(out: &mut String, a: SimulateArgs) -> Result<u8> {
    let m = a.model.load()?;
    let (theta, p) = a.params.params(&m)?;
    let data = simulate_with(exec(a.sequential), &theta, &p, a.n, a.params.seed)?;
    match &a.out {
        Some(path) => std::fs::write(path, data.to_csv()).with_context(|| format!("writing {}", path.display()))?,
        None => write!(out, "{}", data.to_csv())?,
    }
    if let Some(path) = &a.params_out {
        let seed = a.params.random.then_some(a.params.seed);
        let text = serde_json::to_string_pretty(&params_json(&theta, &p, &m.space, seed))?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    log::info!("simulated {} responses to {} items", data.len(), data.j());
    Ok(0)
}

fn estimate(out: &mut String, a: EstimateArgs) -> Result<u8> {
    let m = a.model.load()?;
    let data = Dataset::from_file(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let opts = EmOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        restarts: a.restarts,
        seed: a.seed,
        exec: exec(a.sequential),
        ..EmOptions::default()
    };
    let fit = fit_em_two_param(&data, &m.q, &m.space, &m.spec, &opts)?;
    push_json(out, &fit.to_json())?;
    Ok(0)
}

fn counterexample(out: &mut String, a: CounterexampleArgs) -> Result<u8> {
    let m = a.model.load()?;
    let v = decide_with(&m.q, &m.space, &m.spec, &DecideOptions::default())?;
    if v.level != Level::NotIdentifiable || !v.definitive {
        bail!("the verdict is {} (definitive: {}); counterexamples are built only for definitive negative verdicts", v.level, v.definitive);
    }
    let construction = match &a.construction {
        Some(name) => name.parse::<Construction>()?,
        None => v.counterexample.as_ref().map(|c| c.construction).context("the verdict carries no construction")?,
    };
    let (theta, p) = a.params.params(&m)?;
    let opts = CounterexampleOptions { delta: a.delta, seed: Some(a.params.seed), ..CounterexampleOptions::default() };
    let ce = construct_counterexample(&m.q, &m.space, &m.spec, &theta, &p, construction, &opts)?;
    push_json(out, &ce.to_json())?;
    Ok(0)
}

fn oracle(out: &mut String, a: OracleArgs) -> Result<u8> {
    let m = a.model.load()?;
    let (theta, p) = a.params.params(&m)?;
    let opts = OracleOptions {
        epsilon: a.epsilon,
        restarts: a.restarts,
        seed: a.params.seed,
        exec: exec(a.sequential),
        ..OracleOptions::default()
    };
    let r = brute_force_oracle(&m.q, &m.space, &m.spec, &theta, &p, &opts)?;
    push_json(out, &r.to_json())?;
    Ok(0)
}

fn list_datasets(out: &mut String, a: DatasetsArgs) -> Result<u8> {
    if let Some(name) = &a.name {
        let d = datasets::by_name(name).with_context(|| format!("unknown dataset '{name}'"))?;
        write!(out, "{}", d.q.to_csv())?;
        return Ok(0);
    }
    let all = datasets::all();
    if a.json {
        let list: Vec<serde_json::Value> =
            all.iter().map(|d| json!({ "name": d.name, "items": d.q.j(), "attributes": d.q.k(), "notes": d.notes })).collect();
        push_json(out, &json!({ "schema": SCHEMA, "datasets": list }))?;
    } else {
        for d in &all {
            writeln!(out, "{:<9} {:>2} x {:<2} {}", d.name, d.q.j(), d.q.k(), d.notes)?;
        }
    }
    Ok(0)
}

/// Runs one command, appending its stdout text to `out`.
pub fn run(cli: Cli, out: &mut String) -> Result<u8> {
    match cli.command {
        Command::Check(a) => check(out, a),
        Command::Classes(a) => classes(out, a),
        Command::Simulate(a) => simulate(out, a),
        Command::Estimate(a) => estimate(out, a),
        Command::Counterexample(a) => counterexample(out, a),
        Command::Oracle(a) => oracle(out, a),
        Command::Datasets(a) => list_datasets(out, a),
    }
}
