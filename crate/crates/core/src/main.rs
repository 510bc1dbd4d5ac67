use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gh_metric::constructions::SpaceSpec;
use gh_metric::experiment::{load_manifest, render_table, run_manifest, thread_cap};
use gh_metric::io::{read_space, space_to_csv, space_to_json, write_space, Format};
use gh_metric::relaxation::{relax_mgh_direction, RelaxConfig};
use gh_metric::solvers::{exact_gh, exact_mgh, gh_to_simplex, mgh_to_simplex};
use gh_metric::spaces::{greedy_epsilon_net, DEFAULT_METRIC_TOLERANCE};
use gh_metric::{DistanceResult, FiniteMetricSpace, SolverBudget};

#[derive(Parser)]
#[command(name = "gh-metric", version, about = "Gromov–Hausdorff distances between finite metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a space (or a pair) from a construction.
    Gen(GenArgs),
    /// Check that a file holds a valid distance matrix.
    Validate(ValidateArgs),
    /// Exact GH and/or mGH distance between two spaces.
    Dist(DistArgs),
    /// GH and mGH distance from a space to a regular simplex.
    SimplexDist(SimplexArgs),
    /// Relaxed search for a low-distortion map X -> Y.
    Relax(RelaxArgs),
    /// Greedy ε-net of a space.
    Net(NetArgs),
    /// Run an experiment manifest.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Simplex,
    USequence,
    CounterexamplePair,
    TightPair,
    RandomMetric,
    RandomUltrametric,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Gh,
    Mgh,
    Both,
}

#[derive(Args)]
struct InputArgs {
    /// maximum distance-matrix error, relative to the diameter
    #[arg(long, default_value_t = DEFAULT_METRIC_TOLERANCE)]
    tolerance: f64,
    /// read inputs as CSV point coordinates
    #[arg(long)]
    coords: bool,
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long)]
    budget_nodes: Option<u64>,
    /// seconds
    #[arg(long)]
    time_limit: Option<f64>,
}

impl BudgetArgs {
    fn budget(&self) -> Result<SolverBudget, String> {
        let mut b = SolverBudget::unlimited();
        if let Some(n) = self.budget_nodes {
            if n == 0 {
                return Err("--budget-nodes must be positive".into());
            }
            b.max_nodes = Some(n);
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0 && t.is_finite()) {
                return Err("--time-limit must be positive".into());
            }
            b = b.with_time_limit(Duration::from_secs_f64(t));
        }
        Ok(b)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, required_unless_present = "spec", conflicts_with = "spec")]
    kind: Option<GenKind>,
    /// JSON `{"kind": ..., "params": ...}` spec, inline or as a file path
    #[arg(long)]
    spec: Option<String>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    diam: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// output path; pairs are written as `<stem>_x.<ext>` and `<stem>_y.<ext>`
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct ValidateArgs {
    path: PathBuf,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct DistArgs {
    x: PathBuf,
    y: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    kind: KindArg,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Args)]
struct SimplexArgs {
    x: PathBuf,
    /// number of simplex points
    #[arg(long)]
    m: usize,
    /// common distance between simplex points
    #[arg(long, alias = "diam")]
    lambda: f64,
    #[arg(long, value_enum, default_value = "both")]
    kind: KindArg,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Args)]
struct RelaxArgs {
    x: PathBuf,
    y: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// exponent of the smooth surrogate
    #[arg(long, default_value_t = 8)]
    p: u32,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct NetArgs {
    path: PathBuf,
    #[arg(long)]
    epsilon: f64,
    /// also write the net as a space
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    manifest: PathBuf,
    /// where to write the run record (defaults to the manifest's `output`, then stdout)
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// How a successful command ended.
enum Outcome {
    Exact,
    Bracketed,
    Failed,
}

type CmdResult = Result<Outcome, String>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = thread_cap() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Validate(a) => validate(a),
        Command::Dist(a) => dist(a),
        Command::SimplexDist(a) => simplex_dist(a),
        Command::Relax(a) => relax(a),
        Command::Net(a) => net(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(Outcome::Exact) => ExitCode::SUCCESS,
        Ok(Outcome::Bracketed) => ExitCode::from(2),
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path, input: &InputArgs) -> Result<FiniteMetricSpace, String> {
    read_space(path, input.tolerance, input.coords).map_err(|e| e.to_string())
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("--{flag} is required for this kind"))
}

fn spec_from_args(a: &GenArgs) -> Result<SpaceSpec, String> {
    if let Some(s) = &a.spec {
        let text = if Path::new(s).is_file() { fs::read_to_string(s).map_err(|e| e.to_string())? } else { s.clone() };
        return serde_json::from_str(&text).map_err(|e| format!("invalid spec: {e}"));
    }
    let diam = a.diam.unwrap_or(1.0);
    Ok(match a.kind.expect("clap enforces kind or spec") {
        GenKind::Simplex => SpaceSpec::Simplex { m: need(a.m, "m")?, diam },
        GenKind::USequence => SpaceSpec::USequence { k: need(a.k, "k")? },
        GenKind::CounterexamplePair => SpaceSpec::CounterexamplePair { k: need(a.k, "k")? },
        GenKind::TightPair => SpaceSpec::TightPair {
            n: need(a.n, "n")?.try_into().map_err(|_| "--n is too large".to_string())?,
        },
        GenKind::RandomMetric => SpaceSpec::RandomMetric { n: need(a.n, "n")?, seed: a.seed, diam },
        GenKind::RandomUltrametric => SpaceSpec::RandomUltrametric { n: need(a.n, "n")?, seed: a.seed, diam },
    })
}

fn with_suffix(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn render(x: &FiniteMetricSpace, format: Format) -> String {
    match format {
        Format::Json => space_to_json(x),
        Format::Csv => space_to_csv(x),
    }
}

fn gen(a: GenArgs) -> CmdResult {
    let spec = spec_from_args(&a)?;
    let spaces = spec.generate().map_err(|e| e.to_string())?;
    let format = Format::from(a.format);
    match (&a.out, spaces.as_slice()) {
        (Some(out), [x]) => {
            let path = if out.extension().is_some() { out.clone() } else { with_suffix(out, "", format.extension()) };
            write_space(x, &path, format).map_err(|e| e.to_string())?;
            println!("{}", path.display());
        }
        (Some(out), [x, y]) => {
            for (space, suffix) in [(x, "_x"), (y, "_y")] {
                let path = with_suffix(out, suffix, format.extension());
                write_space(space, &path, format).map_err(|e| e.to_string())?;
                println!("{}", path.display());
            }
        }
        (None, spaces) => {
            for s in spaces {
                print!("{}", render(s, format));
                if format == Format::Json {
                    println!();
                }
            }
        }
        _ => unreachable!("specs produce one or two spaces"),
    }
    Ok(Outcome::Exact)
}

fn validate(a: ValidateArgs) -> CmdResult {
    match load(&a.path, &a.input) {
        Ok(x) => {
            let report = json!({
                "valid": true,
                "n": x.len(),
                "diameter": x.diameter(),
                "ultrametric": x.is_ultrametric(a.input.tolerance),
            });
            println!("{report}");
            Ok(Outcome::Exact)
        }
        Err(msg) => {
            println!("{}", json!({ "valid": false, "error": msg }));
            Ok(Outcome::Failed)
        }
    }
}

fn print_results(gh: Option<DistanceResult>, mgh: Option<DistanceResult>) -> CmdResult {
    let exact = gh.iter().chain(&mgh).all(|r| r.exact);
    let out = match (gh, mgh) {
        (Some(g), None) => serde_json::to_value(g),
        (None, Some(m)) => serde_json::to_value(m),
        (g, m) => Ok(json!({ "gh": g, "mgh": m })),
    }
    .map_err(|e| e.to_string())?;
    println!("{}", serde_json::to_string_pretty(&out).map_err(|e| e.to_string())?);
    Ok(if exact { Outcome::Exact } else { Outcome::Bracketed })
}

fn dist(a: DistArgs) -> CmdResult {
    let x = load(&a.x, &a.input)?;
    let y = load(&a.y, &a.input)?;
    let budget = a.budget.budget()?;
    let gh = match a.kind {
        KindArg::Mgh => None,
        _ => Some(exact_gh(&x, &y, &budget).map_err(|e| e.to_string())?),
    };
    let mgh = match a.kind {
        KindArg::Gh => None,
        _ => Some(exact_mgh(&x, &y, &budget).map_err(|e| e.to_string())?),
    };
    print_results(gh, mgh)
}

fn simplex_dist(a: SimplexArgs) -> CmdResult {
    let x = load(&a.x, &a.input)?;
    let budget = a.budget.budget()?;
    let gh = match a.kind {
        KindArg::Mgh => None,
        _ => Some(gh_to_simplex(&x, a.m, a.lambda, &budget).map_err(|e| e.to_string())?),
    };
    let mgh = match a.kind {
        KindArg::Gh => None,
        _ => Some(mgh_to_simplex(&x, a.m, a.lambda, &budget).map_err(|e| e.to_string())?),
    };
    print_results(gh, mgh)
}

fn relax(a: RelaxArgs) -> CmdResult {
    let x = load(&a.x, &a.input)?;
    let y = load(&a.y, &a.input)?;
    let cfg = RelaxConfig { p: a.p, restarts: a.restarts, max_iters: a.max_iters, seed: a.seed, ..RelaxConfig::default() };
    let r = relax_mgh_direction(&x, &y, &cfg).map_err(|e| e.to_string())?;
    let out = json!({
        "rounded": r.rounded,
        "rounded_distortion": r.rounded_distortion,
        "continuous_objective": r.continuous_objective,
        "iterations": r.iterations,
        "converged": r.converged,
        "restart": r.restart,
        "soft": r.soft.to_rows(),
        "trace": r.trace,
    });
    println!("{}", serde_json::to_string_pretty(&out).map_err(|e| e.to_string())?);
    Ok(Outcome::Exact)
}

fn net(a: NetArgs) -> CmdResult {
    if !(a.epsilon >= 0.0 && a.epsilon.is_finite()) {
        return Err(format!("--epsilon must be non-negative, got {}", a.epsilon));
    }
    let x = load(&a.path, &a.input)?;
    let net = greedy_epsilon_net(&x, a.epsilon);
    if let Some(out) = &a.out {
        write_space(&net.to_space(), out, a.format.into()).map_err(|e| e.to_string())?;
    }
    let report = json!({
        "epsilon": a.epsilon,
        "indices": net.indices(),
        "covering_radius": net.covering_radius(),
    });
    println!("{report}");
    Ok(Outcome::Exact)
}

fn experiment(a: ExperimentArgs) -> CmdResult {
    let loaded = load_manifest(&a.manifest).map_err(|e| e.to_string())?;
    let record = run_manifest(&loaded, thread_cap()).map_err(|e| e.to_string())?;
    eprint!("{}", render_table(&record));
    let text = serde_json::to_string_pretty(&record).map_err(|e| e.to_string())?;
    let out = a.out.clone().or_else(|| loaded.manifest.output.as_ref().map(|p| loaded.base_dir.join(p)));
    match out {
        Some(path) => fs::write(&path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(if !record.passed {
        Outcome::Failed
    } else if record.instances.iter().all(|r| r.exact()) {
        Outcome::Exact
    } else {
        Outcome::Bracketed
    })
}
