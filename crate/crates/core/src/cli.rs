//! Command-line front end.
//!
//! Every invocation is parsed into a [`RunConfig`], validated in full, and
//! only then executed. Output goes to `--out` or standard output:
//!
//! * CSV starts with `# schema_version=1` and `# config={...}` lines;
//! * JSON is an object `{"schema_version": 1, "config": {...}, "result": ...}`;
//! * `sample-sbm` writes the edge-list format of
//!   [`LabeledGraph::write_edge_list`](crate::graphs::LabeledGraph::write_edge_list)
//!   after the same two comment lines.
//!
//! Exit codes: 0 success, 1 usage error (bad flags or parameters), 2 runtime
//! error. Failures print a single `error: kind=<kind> message=<text>` line to
//! standard error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bp::{CyclicBallPolicy, LocalTestOptions, DEFAULT_ENUMERATION_BUDGET};
use crate::density_evolution::{self as de, DensityEvolution};
use crate::error::{Error, Result};
use crate::experiments::{
    self, Classifier, PopulationOptions, SbmEstimateOptions, TestFunction, TreeEstimateOptions,
    TreeSampler,
};
use crate::graphs::{self, DEFAULT_BALL_BUDGET, DEFAULT_TREE_BUDGET};
use crate::model::{Community, ModelParams, ParamSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "asym-sbm",
    version,
    about = "Asymmetric two-community SBM: density evolution, BP and Monte Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Clone, Default)]
struct ModelArgs {
    /// Size of community 1, in (0, 1/2].
    #[arg(long)]
    p: Option<f64>,
    /// Mean degree.
    #[arg(long)]
    d: Option<f64>,
    /// Signal-to-noise ratio d(1-b)^2.
    #[arg(long)]
    lambda: Option<f64>,
    /// Affinities; give all three instead of --lambda.
    #[arg(long, requires_all = ["b", "c"], conflicts_with = "lambda")]
    a: Option<f64>,
    #[arg(long, requires_all = ["a", "c"])]
    b: Option<f64>,
    #[arg(long, requires_all = ["a", "b"])]
    c: Option<f64>,
    /// JSON file holding {p, d, lambda} or {p, d, a, b, c}.
    #[arg(long, conflicts_with_all = ["p", "d", "lambda", "a", "b", "c"])]
    params: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct DeArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    lambda: f64,
    /// Gauss-Hermite nodes.
    #[arg(long, default_value_t = de::DEFAULT_QUAD_NODES)]
    quad_nodes: usize,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerArg {
    #[default]
    Streaming,
    Explicit,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CyclicArg {
    #[default]
    SpanningTree,
    Prior,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierArg {
    #[default]
    Optimal,
    Constant1,
    Constant2,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Derive and validate model parameters.
    Params {
        #[command(flatten)]
        model: ModelArgs,
        /// Also print the connectivity matrix for this many vertices.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Sample a labeled SBM graph.
    SampleSbm {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Sample a labeled Galton-Watson tree.
    SampleGw {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_TREE_BUDGET)]
        budget: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Density-evolution trace mu_1, mu_2, ...
    DeIterate {
        #[command(flatten)]
        de: DeArgs,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = de::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = de::DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Fixed points of G and their stability.
    FixedPoints {
        #[command(flatten)]
        de: DeArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Spinodal lambda_sp(p).
    Spinodal {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = de::DEFAULT_QUAD_NODES)]
        quad_nodes: usize,
        #[command(flatten)]
        common: Common,
    },
    /// lambda_sp and lambda_KS over a grid of p.
    PhaseDiagram {
        /// start:stop:step
        #[arg(long, default_value = "0.01:0.5:0.01")]
        p_grid: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = de::DEFAULT_QUAD_NODES)]
        quad_nodes: usize,
        #[command(flatten)]
        common: Common,
    },
    /// success_from_mu(alpha) and the q-threshold over a grid of lambda.
    PerfCurve {
        #[arg(long)]
        p: f64,
        /// start:stop:step
        #[arg(long)]
        lambda_grid: String,
        #[arg(long, default_value_t = de::DEFAULT_QUAD_NODES)]
        quad_nodes: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo success of the optimal test on Galton-Watson trees.
    SimulateTree {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, value_enum, default_value_t = SamplerArg::Streaming)]
        sampler: SamplerArg,
        #[arg(long, value_enum, default_value_t = ClassifierArg::Optimal)]
        classifier: ClassifierArg,
        #[arg(long, default_value_t = DEFAULT_TREE_BUDGET)]
        budget: usize,
        /// Write root messages to <PREFIX>.xi1.txt and <PREFIX>.xi2.txt.
        #[arg(long)]
        dump_xi: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo success of the local test on an SBM graph.
    SimulateSbm {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: f64,
        /// Radius, or a comma-separated list of radii sharing graph and centers.
        #[arg(long, alias = "radius", value_delimiter = ',', required = true)]
        r: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, value_enum, default_value_t = ClassifierArg::Optimal)]
        classifier: ClassifierArg,
        #[arg(long, value_enum, default_value_t = CyclicArg::SpanningTree)]
        cyclic: CyclicArg,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        enumeration_budget: usize,
        #[arg(long, default_value_t = DEFAULT_BALL_BUDGET)]
        budget: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Population dynamics and the Nishimori identity check.
    Nishimori {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 100_000)]
        pool: usize,
        /// Disable the moment-matching correction of the pools.
        #[arg(long)]
        no_moment_matching: bool,
        /// Write the pools to <PREFIX>.xi1.txt and <PREFIX>.xi2.txt.
        #[arg(long)]
        dump_xi: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// Fully resolved invocation; serialized into every output header.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub r: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_nodes: Option<usize>,
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cyclic: Option<CyclicArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enumeration_budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_matching: Option<bool>,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub dump_xi: Option<PathBuf>,
}

impl RunConfig {
    fn base(command: &str, common: &Common, default_format: Format) -> Self {
        Self {
            command: command.to_string(),
            params: None,
            p: None,
            lambda: None,
            q: None,
            n: None,
            r: Vec::new(),
            depth: None,
            pool: None,
            reps: None,
            seed: common.seed,
            tol: None,
            max_iter: None,
            quad_nodes: None,
            workers: common
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            grid: None,
            budget: None,
            sampler: None,
            classifier: None,
            cyclic: None,
            enumeration_budget: None,
            moment_matching: None,
            format: common.format.unwrap_or(default_format),
            out: common.out.clone(),
            dump_xi: None,
        }
    }

    fn model(&self) -> Result<&ModelParams> {
        self.params
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("model parameters are required".into()))
    }

    /// Checks every field against the preconditions of the selected command.
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidParameter(msg));
        if self.workers == 0 {
            return invalid("workers must be positive".into());
        }
        if let Some(q) = self.q {
            if !(0.0..=1.0).contains(&q) {
                return invalid(format!("q must lie in [0, 1], got {q}"));
            }
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return invalid(format!("tol must be positive, got {tol}"));
            }
        }
        if let Some(k) = self.quad_nodes {
            if k < 2 {
                return invalid(format!("quad-nodes must be at least 2, got {k}"));
            }
        }
        if let (Some(p), Some(lambda)) = (self.p, self.lambda) {
            if !(p > 0.0 && p <= 0.5) {
                return invalid(format!("p must lie in (0, 1/2], got {p}"));
            }
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return invalid(format!("lambda must be non-negative, got {lambda}"));
            }
        }
        if self.p.is_some_and(|p| !(p > 0.0 && p <= 0.5)) {
            return invalid(format!(
                "p must lie in (0, 1/2], got {}",
                self.p.unwrap_or_default()
            ));
        }
        match self.command.as_str() {
            "sample-sbm" | "simulate-sbm" => {
                let n = self.n.unwrap_or(0);
                let min = if self.command == "simulate-sbm" {
                    1000
                } else {
                    1
                };
                if n < min {
                    return invalid(format!("n must be at least {min}, got {n}"));
                }
                let m = self.model()?.connectivity(n);
                if m.iter().flatten().any(|&x| x > 1.0) {
                    return invalid(format!(
                        "n = {n} is too small: some connection probability exceeds 1"
                    ));
                }
                if self.command == "simulate-sbm" && self.reps == Some(0) {
                    return invalid("reps must be positive".into());
                }
            }
            "simulate-tree" => {
                if self.reps.unwrap_or(0) < 100 {
                    return invalid(format!(
                        "reps must be at least 100, got {}",
                        self.reps.unwrap_or(0)
                    ));
                }
            }
            "nishimori" if self.pool.unwrap_or(0) < 1000 => {
                return invalid(format!(
                    "pool must be at least 1000, got {}",
                    self.pool.unwrap_or(0)
                ));
            }
            _ => {}
        }
        if let Some(grid) = &self.grid {
            parse_grid(grid)?;
        }
        Ok(())
    }
}

/// Expands `start:stop:step` into `start, start + step, ...` up to `stop`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || {
        Error::InvalidParameter(format!(
            "grid must be start:stop:step with step > 0 and start <= stop, got {spec:?}"
        ))
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0 && start <= stop && start.is_finite() && stop.is_finite()) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(bad());
    }
    // Round to 12 decimals so that 0.5 + 3 * 0.01 prints as 0.53.
    Ok((0..count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn resolve_model(m: &ModelArgs) -> Result<ModelParams> {
    if let Some(path) = &m.params {
        let text = std::fs::read_to_string(path)?;
        let spec: ParamSpec = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        return spec.resolve();
    }
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::InvalidParameter(format!("--{name} is required")))
    };
    let (p, d) = (need(m.p, "p")?, need(m.d, "d")?);
    match (m.a, m.b, m.c) {
        (Some(a), Some(b), Some(c)) => ModelParams::from_abc(p, d, a, b, c),
        _ => ModelParams::new(p, d, need(m.lambda, "lambda")?),
    }
}

fn classifier(c: ClassifierArg) -> Classifier {
    match c {
        ClassifierArg::Optimal => Classifier::Optimal,
        ClassifierArg::Constant1 => Classifier::Constant(Community::One),
        ClassifierArg::Constant2 => Classifier::Constant(Community::Two),
    }
}

fn build(cli: Cli) -> Result<RunConfig> {
    let cfg = match cli.command {
        Cmd::Params { model, n, common } => {
            let mut c = RunConfig::base("params", &common, Format::Json);
            c.params = Some(resolve_model(&model)?);
            c.n = n;
            c
        }
        Cmd::SampleSbm { model, n, common } => {
            let mut c = RunConfig::base("sample-sbm", &common, Format::Csv);
            c.params = Some(resolve_model(&model)?);
            c.n = Some(n);
            c
        }
        Cmd::SampleGw {
            model,
            depth,
            budget,
            common,
        } => {
            let mut c = RunConfig::base("sample-gw", &common, Format::Json);
            c.params = Some(resolve_model(&model)?);
            c.depth = Some(depth);
            c.budget = Some(budget);
            c
        }
        Cmd::DeIterate {
            de,
            q,
            tol,
            max_iter,
            common,
        } => {
            let mut c = RunConfig::base("de-iterate", &common, Format::Csv);
            (c.p, c.lambda, c.quad_nodes) = (Some(de.p), Some(de.lambda), Some(de.quad_nodes));
            (c.q, c.tol, c.max_iter) = (Some(q), Some(tol), Some(max_iter));
            c
        }
        Cmd::FixedPoints { de, common } => {
            let mut c = RunConfig::base("fixed-points", &common, Format::Json);
            (c.p, c.lambda, c.quad_nodes) = (Some(de.p), Some(de.lambda), Some(de.quad_nodes));
            c
        }
        Cmd::Spinodal {
            p,
            tol,
            quad_nodes,
            common,
        } => {
            let mut c = RunConfig::base("spinodal", &common, Format::Csv);
            (c.p, c.tol, c.quad_nodes) = (Some(p), Some(tol), Some(quad_nodes));
            c
        }
        Cmd::PhaseDiagram {
            p_grid,
            tol,
            quad_nodes,
            common,
        } => {
            let mut c = RunConfig::base("phase-diagram", &common, Format::Csv);
            (c.grid, c.tol, c.quad_nodes) = (Some(p_grid), Some(tol), Some(quad_nodes));
            c
        }
        Cmd::PerfCurve {
            p,
            lambda_grid,
            quad_nodes,
            common,
        } => {
            let mut c = RunConfig::base("perf-curve", &common, Format::Csv);
            (c.p, c.grid, c.quad_nodes) = (Some(p), Some(lambda_grid), Some(quad_nodes));
            c
        }
        Cmd::SimulateTree {
            model,
            q,
            depth,
            reps,
            sampler,
            classifier,
            budget,
            dump_xi,
            common,
        } => {
            let mut c = RunConfig::base("simulate-tree", &common, Format::Json);
            c.params = Some(resolve_model(&model)?);
            (c.q, c.depth, c.reps, c.budget) = (Some(q), Some(depth), Some(reps), Some(budget));
            (c.sampler, c.classifier, c.dump_xi) = (Some(sampler), Some(classifier), dump_xi);
            c
        }
        Cmd::SimulateSbm {
            model,
            n,
            q,
            r,
            reps,
            classifier,
            cyclic,
            enumeration_budget,
            budget,
            common,
        } => {
            let mut c = RunConfig::base("simulate-sbm", &common, Format::Json);
            c.params = Some(resolve_model(&model)?);
            (c.n, c.q, c.r, c.reps) = (Some(n), Some(q), r, Some(reps));
            (c.classifier, c.cyclic, c.enumeration_budget, c.budget) = (
                Some(classifier),
                Some(cyclic),
                Some(enumeration_budget),
                Some(budget),
            );
            c
        }
        Cmd::Nishimori {
            model,
            q,
            r,
            pool,
            no_moment_matching,
            dump_xi,
            common,
        } => {
            let mut c = RunConfig::base("nishimori", &common, Format::Json);
            c.params = Some(resolve_model(&model)?);
            (c.q, c.r, c.pool, c.moment_matching, c.dump_xi) = (
                Some(q),
                vec![r],
                Some(pool),
                Some(!no_moment_matching),
                dump_xi,
            );
            c
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// A command's result before rendering.
enum Output {
    Table {
        columns: Vec<&'static str>,
        rows: Vec<Vec<Value>>,
    },
    Record(Value),
    EdgeList(graphs::LabeledGraph),
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<Vec<Value>>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, rows);
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, rows);
            }
        }
        leaf => rows.push(vec![Value::String(prefix.to_string()), leaf.clone()]),
    }
}

fn render(cfg: &RunConfig, output: Output) -> Result<String> {
    let config = serde_json::to_string(cfg)?;
    let header = format!("# schema_version={SCHEMA_VERSION}\n# config={config}\n");
    let mut text = String::new();
    match (cfg.format, output) {
        (_, Output::EdgeList(graph)) if cfg.format == Format::Csv => {
            let mut buf = header.into_bytes();
            graph.write_edge_list(&mut buf)?;
            text = String::from_utf8(buf).expect("edge list is ASCII");
        }
        (_, Output::EdgeList(graph)) => {
            let edges: Vec<[usize; 2]> = graph.edges().map(|(u, v)| [u, v]).collect();
            let result = json!({ "n": graph.n(), "labels": graph.labels(), "edges": edges });
            text = envelope(cfg, result)?;
        }
        (Format::Csv, Output::Table { columns, rows }) => {
            text.push_str(&header);
            text.push_str(&columns.join(","));
            text.push('\n');
            for row in rows {
                text.push_str(&row.iter().map(cell).collect::<Vec<_>>().join(","));
                text.push('\n');
            }
        }
        (Format::Json, Output::Table { columns, rows }) => {
            let objects: Vec<Value> = rows
                .into_iter()
                .map(|row| Value::Object(columns.iter().map(|c| c.to_string()).zip(row).collect()))
                .collect();
            text = envelope(cfg, Value::Array(objects))?;
        }
        (Format::Csv, Output::Record(value)) => {
            let mut rows = Vec::new();
            flatten("", &value, &mut rows);
            text.push_str(&header);
            text.push_str("key,value\n");
            for row in rows {
                text.push_str(&format!("{},{}\n", cell(&row[0]), cell(&row[1])));
            }
        }
        (Format::Json, Output::Record(value)) => text = envelope(cfg, value)?,
    }
    Ok(text)
}

fn envelope(cfg: &RunConfig, result: Value) -> Result<String> {
    let doc = json!({ "schema_version": SCHEMA_VERSION, "config": cfg, "result": result });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn num(x: f64) -> Value {
    json!(x)
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn dump_pair(prefix: &Path, xi1: &[f64], xi2: &[f64]) -> Result<()> {
    for (suffix, xs) in [("xi1.txt", xi1), ("xi2.txt", xi2)] {
        let path = PathBuf::from(format!("{}.{suffix}", prefix.display()));
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for x in xs {
            writeln!(w, "{x}")?;
        }
        w.flush()?;
    }
    Ok(())
}

fn execute(cfg: &RunConfig) -> Result<Output> {
    let quad = cfg.quad_nodes.unwrap_or(de::DEFAULT_QUAD_NODES);
    let out = match cfg.command.as_str() {
        "params" => {
            let m = cfg.model()?;
            let t = m.transition_matrix();
            let mut v = json!({
                "p": m.p(), "d": m.d(), "lambda": m.lambda(), "epsilon": m.epsilon(),
                "a": m.a(), "b": m.b(), "c": m.c(), "h": m.h(),
                "affinity": m.affinity(),
                "transition_matrix": t.rows,
                "eigenvalues": t.eigenvalues(),
                "above_ks": m.lambda() > 1.0,
            });
            if let Some(n) = cfg.n {
                v["connectivity"] = json!(m.connectivity(n));
            }
            Output::Record(v)
        }
        "sample-sbm" => Output::EdgeList(graphs::sample_sbm(
            cfg.model()?,
            cfg.n.unwrap_or(0),
            cfg.seed,
        )?),
        "sample-gw" => {
            let depth = cfg.depth.unwrap_or(0);
            let tree = graphs::sample_gw_with_budget(
                cfg.model()?,
                depth,
                cfg.seed,
                cfg.budget.unwrap_or(DEFAULT_TREE_BUDGET),
            )?;
            Output::Record(serde_json::to_value(tree.to_record())?)
        }
        "de-iterate" => {
            let dens = DensityEvolution::new(
                cfg.p.unwrap_or_default(),
                cfg.lambda.unwrap_or_default(),
                quad,
            )?;
            let trace = dens.iterate(
                cfg.q.unwrap_or_default(),
                cfg.tol.unwrap_or(de::DEFAULT_TOL),
                cfg.max_iter.unwrap_or(de::DEFAULT_MAX_ITER),
            )?;
            if cfg.format == Format::Json {
                Output::Record(serde_json::to_value(&trace)?)
            } else {
                let rows = trace
                    .mus
                    .iter()
                    .enumerate()
                    .map(|(k, &mu)| vec![json!(k + 1), num(mu)])
                    .collect();
                Output::Table {
                    columns: vec!["k", "mu_k"],
                    rows,
                }
            }
        }
        "fixed-points" => {
            let report = DensityEvolution::new(
                cfg.p.unwrap_or_default(),
                cfg.lambda.unwrap_or_default(),
                quad,
            )?
            .fixed_points();
            if cfg.format == Format::Json {
                Output::Record(serde_json::to_value(&report)?)
            } else {
                let mut rows = vec![vec![
                    num(0.0),
                    num(report.zero_slope),
                    json!(report.zero_stable),
                    json!("zero"),
                ]];
                for r in &report.roots {
                    let role = if Some(r.mu) == report.alpha {
                        "alpha"
                    } else if Some(r.mu) == report.beta {
                        "beta"
                    } else {
                        "other"
                    };
                    rows.push(vec![num(r.mu), num(r.slope), json!(r.stable), json!(role)]);
                }
                Output::Table {
                    columns: vec!["mu", "slope", "stable", "role"],
                    rows,
                }
            }
        }
        "spinodal" => {
            let p = cfg.p.unwrap_or_default();
            let sp = de::spinodal(p, cfg.tol.unwrap_or(1e-6), quad)?;
            Output::Table {
                columns: vec!["p", "lambda_sp"],
                rows: vec![vec![num(p), num(sp)]],
            }
        }
        "phase-diagram" => {
            let grid = parse_grid(cfg.grid.as_deref().unwrap_or_default())?;
            let rows = de::phase_diagram(&grid, cfg.tol.unwrap_or(1e-6), quad)?
                .into_iter()
                .map(|r| vec![num(r.p), num(r.lambda_sp), num(r.lambda_ks)])
                .collect();
            Output::Table {
                columns: vec!["p", "lambda_sp", "lambda_ks"],
                rows,
            }
        }
        "perf-curve" => {
            let grid = parse_grid(cfg.grid.as_deref().unwrap_or_default())?;
            let rows = de::perf_curve(cfg.p.unwrap_or_default(), &grid, quad)?
                .into_iter()
                .map(|r| {
                    vec![
                        num(r.lambda),
                        opt(r.alpha),
                        num(r.psucc_alpha),
                        opt(r.beta),
                        opt(r.q_threshold),
                    ]
                })
                .collect();
            Output::Table {
                columns: vec!["lambda", "alpha", "psucc_alpha", "beta", "q_threshold"],
                rows,
            }
        }
        "simulate-tree" => {
            let m = cfg.model()?;
            let (q, depth) = (cfg.q.unwrap_or_default(), cfg.depth.unwrap_or_default());
            let options = TreeEstimateOptions {
                classifier: classifier(cfg.classifier.unwrap_or_default()),
                sampler: match cfg.sampler.unwrap_or_default() {
                    SamplerArg::Streaming => TreeSampler::Streaming,
                    SamplerArg::Explicit => TreeSampler::Explicit,
                },
                budget: cfg.budget.unwrap_or(DEFAULT_TREE_BUDGET),
            };
            let (samples, report) = experiments::tree_replicates(
                m,
                q,
                depth,
                cfg.reps.unwrap_or_default(),
                cfg.seed,
                &options,
            )?;
            if let Some(prefix) = &cfg.dump_xi {
                let pick = |x: Community| {
                    samples
                        .iter()
                        .filter(|s| s.0 == x)
                        .map(|s| s.1 .0)
                        .collect::<Vec<_>>()
                };
                dump_pair(prefix, &pick(Community::One), &pick(Community::Two))?;
            }
            let mut v = json!({ "report": report });
            if depth > 0 {
                let trace = DensityEvolution::from_params(m, quad)?.iterate(q, 1e-300, depth)?;
                let mu = trace.mus[depth - 1];
                v["density_evolution"] = json!({ "mu": mu, "psucc": de::success_from_mu(mu) });
            }
            Output::Record(v)
        }
        "simulate-sbm" => {
            let m = cfg.model()?;
            let options = SbmEstimateOptions {
                classifier: classifier(cfg.classifier.unwrap_or_default()),
                local: LocalTestOptions {
                    enumeration_budget: cfg
                        .enumeration_budget
                        .unwrap_or(DEFAULT_ENUMERATION_BUDGET),
                    cyclic: match cfg.cyclic.unwrap_or_default() {
                        CyclicArg::SpanningTree => CyclicBallPolicy::SpanningTree,
                        CyclicArg::Prior => CyclicBallPolicy::PriorDecision,
                    },
                },
                ball_budget: cfg.budget.unwrap_or(DEFAULT_BALL_BUDGET),
            };
            let reports = experiments::estimate_psucc_sbm_radii(
                m,
                cfg.n.unwrap_or_default(),
                cfg.q.unwrap_or_default(),
                &cfg.r,
                cfg.reps.unwrap_or_default(),
                cfg.seed,
                &options,
            )?;
            let rows = cfg
                .r
                .iter()
                .zip(&reports)
                .map(|(r, e)| {
                    vec![
                        json!(r),
                        num(e.estimate),
                        num(e.stderr),
                        json!(e.n_samples),
                        num(e.flagged_fraction),
                        json!(e.class_counts[0]),
                        json!(e.class_counts[1]),
                    ]
                })
                .collect();
            Output::Table {
                columns: vec![
                    "r",
                    "estimate",
                    "stderr",
                    "n_samples",
                    "flagged_fraction",
                    "class1",
                    "class2",
                ],
                rows,
            }
        }
        "nishimori" => {
            let m = cfg.model()?;
            let options = PopulationOptions {
                moment_matching: cfg.moment_matching.unwrap_or(true),
            };
            let r = cfg.r.first().copied().unwrap_or_default();
            let pair = experiments::population_dynamics_with(
                m,
                cfg.q.unwrap_or_default(),
                r,
                cfg.pool.unwrap_or_default(),
                cfg.seed,
                &options,
            )?;
            if let Some(prefix) = &cfg.dump_xi {
                dump_pair(prefix, &pair.xi1, &pair.xi2)?;
            }
            let report = experiments::nishimori_check(&pair, &TestFunction::BATTERY)?;
            let finite = |xs: &[f64]| {
                xs.iter()
                    .copied()
                    .filter(|x| x.is_finite())
                    .collect::<Vec<_>>()
            };
            let (m1, v1) = experiments::mean_var(&finite(&pair.xi1));
            let (m2, v2) = experiments::mean_var(&finite(&pair.xi2));
            Output::Record(json!({
                "nishimori": report,
                "xi1": { "mean": m1, "var": v1 },
                "xi2": { "mean": m2, "var": v2 },
            }))
        }
        other => return Err(Error::InvalidParameter(format!("unknown command {other}"))),
    };
    Ok(out)
}

/// Executes a validated configuration and writes its output.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
    let output = pool.install(|| execute(cfg))?;
    let text = render(cfg, output)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn report_error(e: &Error) {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("error: kind={} message={msg}", e.kind());
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                    1
                } else {
                    0
                };
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error: kind=usage message={first}");
            return 1;
        }
    };
    let cfg = match build(cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            report_error(&e);
            return if matches!(e, Error::Io(_)) { 2 } else { 1 };
        }
    };
    match run(&cfg) {
        Ok(()) => 0,
        Err(e) => {
            report_error(&e);
            2
        }
    }
}
