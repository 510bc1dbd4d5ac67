//! Experiment manifests and run records.
//!
//! A manifest lists instances (a pair of spaces, given as generator specs or
//! files), the solvers to run on each, and assertions on the results. Each
//! assertion carries a stable claim id so a [`RunRecord`] reads on its own.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constructions::{ConstructionError, SpaceSpec};
use crate::io::{read_space, IoError};
use crate::solvers::{
    exact_gh, exact_mgh, gh_to_simplex, mgh_to_simplex, DistanceResult, SolverBudget, SolverError,
    VALUE_TOLERANCE,
};
use crate::spaces::{FiniteMetricSpace, DEFAULT_METRIC_TOLERANCE};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "GH_METRIC_THREADS";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("instance {id}: {source}")]
    Space { id: String, source: Box<dyn std::error::Error + Send + Sync> },
    #[error("instance {id}: {source}")]
    Solver { id: String, source: SolverError },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default)]
    pub max_nodes: Option<u64>,
    #[serde(default)]
    pub time_limit_secs: Option<f64>,
}

impl BudgetSpec {
    fn to_budget(&self) -> Result<SolverBudget, String> {
        let mut b = SolverBudget::unlimited();
        if let Some(n) = self.max_nodes {
            if n == 0 {
                return Err("max_nodes must be positive".into());
            }
            b.max_nodes = Some(n);
        }
        if let Some(t) = self.time_limit_secs {
            if !(t > 0.0 && t.is_finite()) {
                return Err(format!("time_limit_secs must be positive, got {t}"));
            }
            b = b.with_time_limit(Duration::from_secs_f64(t));
        }
        Ok(b)
    }
}

/// Where a space comes from: a file (relative to the manifest) or a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceSource {
    File { path: PathBuf },
    Spec(SpaceSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Gh,
    Mgh,
    /// treats the second space as a regular simplex
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Gh,
    Mgh,
    /// `d_GH / d̂_GH`
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Eq,
    Ge,
    Le,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub claim: String,
    pub quantity: Quantity,
    pub op: Comparison,
    pub value: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    VALUE_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub id: String,
    #[serde(default)]
    pub pair: Option<SpaceSpec>,
    #[serde(default)]
    pub x: Option<SpaceSource>,
    #[serde(default)]
    pub y: Option<SpaceSource>,
    pub solvers: Vec<SolverChoice>,
    #[serde(default)]
    pub budget: Option<BudgetSpec>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub name: String,
    #[serde(default)]
    pub budget: BudgetSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub instances: Vec<InstanceSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub claim: String,
    pub quantity: Quantity,
    pub op: Comparison,
    pub expected: f64,
    pub actual: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub x_size: usize,
    pub y_size: usize,
    pub gh: Option<DistanceResult>,
    pub mgh: Option<DistanceResult>,
    pub ratio: Option<f64>,
    pub assertions: Vec<AssertionOutcome>,
    pub wall_ms: f64,
}

impl InstanceRecord {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn exact(&self) -> bool {
        self.gh.iter().chain(&self.mgh).all(|r| r.exact)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub manifest_hash: String,
    pub instances: Vec<InstanceRecord>,
    pub passed: bool,
    pub wall_ms: f64,
}

/// A parsed manifest with its hash and the directory relative paths resolve
/// against.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: ExperimentManifest,
    pub hash: String,
    pub base_dir: PathBuf,
}

pub fn load_manifest(path: &Path) -> Result<LoadedManifest, ExperimentError> {
    let bytes = fs::read(path).map_err(|source| ExperimentError::Read { path: path.to_path_buf(), source })?;
    let manifest: ExperimentManifest = serde_json::from_slice(&bytes)?;
    Ok(LoadedManifest {
        manifest,
        hash: hex_digest(&bytes),
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

pub fn parse_manifest(text: &str) -> Result<LoadedManifest, ExperimentError> {
    Ok(LoadedManifest {
        manifest: serde_json::from_str(text)?,
        hash: hex_digest(text.as_bytes()),
        base_dir: PathBuf::from("."),
    })
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Worker count from `GH_METRIC_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

struct Prepared<'a> {
    spec: &'a InstanceSpec,
    x: FiniteMetricSpace,
    y: FiniteMetricSpace,
    budget: SolverBudget,
}

fn space_err<E: std::error::Error + Send + Sync + 'static>(id: &str, e: E) -> ExperimentError {
    ExperimentError::Space { id: id.to_string(), source: Box::new(e) }
}

fn load_source(id: &str, src: &SpaceSource, base: &Path) -> Result<FiniteMetricSpace, ExperimentError> {
    match src {
        SpaceSource::File { path } => {
            read_space(&base.join(path), DEFAULT_METRIC_TOLERANCE, false).map_err(|e: IoError| space_err(id, e))
        }
        SpaceSource::Spec(spec) => spec.generate_single().map_err(|e: ConstructionError| space_err(id, e)),
    }
}

fn prepare<'a>(
    spec: &'a InstanceSpec,
    default_budget: &BudgetSpec,
    base: &Path,
) -> Result<Prepared<'a>, ExperimentError> {
    let id = spec.id.as_str();
    let (x, y) = match (&spec.pair, &spec.x, &spec.y) {
        (Some(pair), None, None) => {
            if pair.arity() != 2 {
                return Err(ExperimentError::Manifest(format!("instance {id}: `pair` must produce two spaces")));
            }
            let mut both = pair.generate().map_err(|e| space_err(id, e))?;
            let y = both.pop().unwrap();
            (both.pop().unwrap(), y)
        }
        (None, Some(x), Some(y)) => (load_source(id, x, base)?, load_source(id, y, base)?),
        _ => {
            return Err(ExperimentError::Manifest(format!(
                "instance {id}: give either `pair` or both `x` and `y`"
            )))
        }
    };
    if spec.solvers.is_empty() {
        return Err(ExperimentError::Manifest(format!("instance {id}: no solvers listed")));
    }
    let budget = spec
        .budget
        .as_ref()
        .unwrap_or(default_budget)
        .to_budget()
        .map_err(|m| ExperimentError::Manifest(format!("instance {id}: {m}")))?;
    Ok(Prepared { spec, x, y, budget })
}

fn simplex_shape(y: &FiniteMetricSpace) -> Option<(usize, f64)> {
    let m = y.len();
    if m == 1 {
        return Some((1, 1.0));
    }
    let lambda = y.dist(0, 1);
    let regular = (0..m).all(|i| (0..m).all(|j| i == j || y.dist(i, j) == lambda));
    regular.then_some((m, lambda))
}

fn run_instance(p: &Prepared<'_>) -> Result<InstanceRecord, ExperimentError> {
    let started = Instant::now();
    let id = &p.spec.id;
    let solver_err = |source| ExperimentError::Solver { id: id.clone(), source };
    let mut gh = None;
    let mut mgh = None;
    for choice in &p.spec.solvers {
        match choice {
            SolverChoice::Gh => gh = Some(exact_gh(&p.x, &p.y, &p.budget).map_err(solver_err)?),
            SolverChoice::Mgh => mgh = Some(exact_mgh(&p.x, &p.y, &p.budget).map_err(solver_err)?),
            SolverChoice::Simplex => {
                let (m, lambda) = simplex_shape(&p.y).ok_or_else(|| {
                    ExperimentError::Manifest(format!("instance {id}: second space is not a regular simplex"))
                })?;
                gh = Some(gh_to_simplex(&p.x, m, lambda, &p.budget).map_err(solver_err)?);
                mgh = Some(mgh_to_simplex(&p.x, m, lambda, &p.budget).map_err(solver_err)?);
            }
        }
    }
    let ratio = match (&gh, &mgh) {
        (Some(a), Some(b)) if b.value > 0.0 => Some(a.value / b.value),
        _ => None,
    };
    let assertions = p
        .spec
        .assertions
        .iter()
        .map(|a| {
            let actual = match a.quantity {
                Quantity::Gh => gh.as_ref().map(|r| r.value),
                Quantity::Mgh => mgh.as_ref().map(|r| r.value),
                Quantity::Ratio => ratio,
            };
            let passed = actual.is_some_and(|v| match a.op {
                Comparison::Eq => (v - a.value).abs() <= a.tolerance,
                Comparison::Ge => v >= a.value - a.tolerance,
                Comparison::Le => v <= a.value + a.tolerance,
            });
            AssertionOutcome {
                claim: a.claim.clone(),
                quantity: a.quantity,
                op: a.op,
                expected: a.value,
                actual,
                passed,
            }
        })
        .collect();
    Ok(InstanceRecord {
        id: id.clone(),
        x_size: p.x.len(),
        y_size: p.y.len(),
        gh,
        mgh,
        ratio,
        assertions,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs every instance (concurrently, capped by `threads`) and evaluates the
/// assertions. Records follow manifest order.
pub fn run_manifest(loaded: &LoadedManifest, threads: Option<usize>) -> Result<RunRecord, ExperimentError> {
    let started = Instant::now();
    let m = &loaded.manifest;
    let prepared: Vec<Prepared<'_>> = m
        .instances
        .iter()
        .map(|spec| prepare(spec, &m.budget, &loaded.base_dir))
        .collect::<Result<_, _>>()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| ExperimentError::Manifest(e.to_string()))?;
    let instances: Vec<InstanceRecord> =
        pool.install(|| prepared.par_iter().map(run_instance).collect::<Result<_, _>>())?;
    let passed = instances.iter().all(InstanceRecord::passed);
    Ok(RunRecord {
        name: m.name.clone(),
        manifest_hash: loaded.hash.clone(),
        instances,
        passed,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

/// Plain-text summary table of a run.
pub fn render_table(record: &RunRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "experiment: {}", record.name);
    let _ = writeln!(
        out,
        "{:<16} {:>4} {:>4} {:>12} {:>12} {:>10} {:>6} {:>8}",
        "instance", "|X|", "|Y|", "mGH", "GH", "ratio", "exact", "checks"
    );
    for r in &record.instances {
        let passed = r.assertions.iter().filter(|a| a.passed).count();
        let _ = writeln!(
            out,
            "{:<16} {:>4} {:>4} {:>12} {:>12} {:>10} {:>6} {:>8}",
            r.id,
            r.x_size,
            r.y_size,
            fmt_opt(r.mgh.as_ref().map(|d| d.value)),
            fmt_opt(r.gh.as_ref().map(|d| d.value)),
            fmt_opt(r.ratio),
            if r.exact() { "yes" } else { "no" },
            format!("{passed}/{}", r.assertions.len()),
        );
        for a in r.assertions.iter().filter(|a| !a.passed) {
            let _ = writeln!(
                out,
                "  FAILED {}: {:?} {:?} {} (actual {})",
                a.claim,
                a.quantity,
                a.op,
                a.expected,
                fmt_opt(a.actual)
            );
        }
    }
    let _ = writeln!(out, "result: {}", if record.passed { "PASS" } else { "FAIL" });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_passes() {
        let loaded = parse_manifest(r#"{"name": "empty"}"#).unwrap();
        let record = run_manifest(&loaded, Some(1)).unwrap();
        assert!(record.instances.is_empty());
        assert!(record.passed);
        assert_eq!(record.manifest_hash.len(), 64);
    }

    #[test]
    fn assertions_are_evaluated() {
        let text = r#"{
            "name": "two-point",
            "instances": [{
                "id": "p",
                "x": {"kind": "simplex", "params": {"m": 2, "diam": 1}},
                "y": {"kind": "simplex", "params": {"m": 2, "diam": 4}},
                "solvers": ["gh", "mgh"],
                "assertions": [
                    {"claim": "small.equal", "quantity": "gh", "op": "eq", "value": 1.5},
                    {"claim": "small.ratio", "quantity": "ratio", "op": "eq", "value": 1.0},
                    {"claim": "deliberately.wrong", "quantity": "mgh", "op": "le", "value": 1.0}
                ]
            }]
        }"#;
        let record = run_manifest(&parse_manifest(text).unwrap(), Some(2)).unwrap();
        let r = &record.instances[0];
        assert!(r.assertions[0].passed && r.assertions[1].passed);
        assert!(!r.assertions[2].passed);
        assert!(!record.passed);
        assert!(render_table(&record).contains("FAILED deliberately.wrong"));
    }

    #[test]
    fn malformed_instances_are_rejected() {
        let text = r#"{"name": "bad", "instances": [{"id": "a", "solvers": ["gh"]}]}"#;
        assert!(matches!(
            run_manifest(&parse_manifest(text).unwrap(), None),
            Err(ExperimentError::Manifest(_))
        ));
        let text = r#"{"name": "bad", "budget": {"max_nodes": 0}, "instances": [
            {"id": "a", "pair": {"kind": "tight_pair", "params": {"n": 1}}, "solvers": ["gh"]}]}"#;
        assert!(run_manifest(&parse_manifest(text).unwrap(), None).is_err());
    }
}
