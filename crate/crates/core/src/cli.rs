//! Command-line front end.
//!
//! Every option may also be given in a TOML file passed with `--config`, using
//! the long flag name with underscores (`neighbor_intercept = true`). Flags on
//! the command line take precedence over the file.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::Table;
use crate::effects::{
    fit_multi_network, fit_naive, fit_partially_known, fit_total_known, EffectEstimate,
    EstimateOptions, EstimatorKind, Estimation,
};
use crate::error::{Error, ErrorClass, Result};
use crate::graph::{load_edge_list, load_node_labels, AdjacencyMatrix, EdgeListOptions, Normalize};
use crate::regress::{aic, VcovKind, VcovSpec};
use crate::simulate::{run_simulation, ErrorSpec, GraphFamily, SimConfig, SimEstimator};

#[derive(Debug, Parser)]
#[command(name = "spillover", version, about = "Total effects under network interference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the total effect from a data table and interference graphs.
    Estimate(EstimateArgs),
    /// Monte Carlo study of the estimators on simulated data.
    Simulate(SimulateArgs),
    /// Degree summary of an edge list.
    GraphInfo(GraphInfoArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Er,
    Ba,
    Ws,
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ErrorsName {
    Homo,
    Corr,
    Noiseless,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateArgs {
    /// TOML file with default values for any option.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Data CSV with a header row and one row per unit.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Edge-list CSV; repeat for several networks G1, G2, ...
    #[arg(long = "edges")]
    pub edges: Option<Vec<PathBuf>>,
    /// Node label file (header `label`) for edge lists that use labels.
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    #[arg(long)]
    pub outcome: Option<String>,
    #[arg(long)]
    pub treatment: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorKind>,
    #[arg(long, value_enum)]
    pub vcov: Option<VcovKind>,
    /// Leverage constant for hc5.
    #[arg(long)]
    pub hc5_k: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub directed: Option<bool>,
    /// Read edge records as `G[dst][src]`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub transpose: Option<bool>,
    #[arg(long, value_enum)]
    pub normalize: Option<Normalize>,
    /// Add the weighted-degree column `G·1` for each network.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub neighbor_intercept: Option<bool>,
    /// Fit without the intercept column.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_intercept: Option<bool>,
    /// Replace each graph by its k-th power (diagonal removed).
    #[arg(long)]
    pub power: Option<usize>,
    /// Data column holding weighted degrees, for the partial estimator.
    #[arg(long)]
    pub degree_column: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub graph: Option<FamilyName>,
    /// Edge probability (er).
    #[arg(long)]
    pub p: Option<f64>,
    /// Directed edges (er).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub directed: Option<bool>,
    /// Attachment exponent (ba).
    #[arg(long)]
    pub power: Option<f64>,
    /// Edges added per new node (ba).
    #[arg(long)]
    pub m: Option<usize>,
    /// Lattice neighbors on each side (ws).
    #[arg(long)]
    pub nei: Option<usize>,
    /// Rewiring probability (ws).
    #[arg(long)]
    pub p_rewire: Option<f64>,
    #[arg(long, value_enum)]
    pub errors: Option<ErrorsName>,
    /// Diagonal weight of Σ = aI + bG (corr).
    #[arg(long)]
    pub a: Option<f64>,
    /// Graph weight of Σ = aI + bG (corr).
    #[arg(long)]
    pub b: Option<f64>,
    /// Comma-separated subset of full, partial, naive, full-gls.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub estimators: Option<Vec<SimEstimator>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reuse the replicate-0 graph in every replicate.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fixed_graph: Option<bool>,
    /// Use the true Σ in full-gls instead of estimating it.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub gls_known: Option<bool>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Worker threads (0: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphInfoArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Node count, for graphs with trailing isolated nodes or no edges.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub directed: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub transpose: Option<bool>,
    #[arg(long, value_enum)]
    pub normalize: Option<Normalize>,
    #[arg(long)]
    pub power: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

/// Fill every unset field of `$flags` from `$file`.
macro_rules! merge {
    ($flags:expr, $file:expr, $($field:ident),* $(,)?) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field.take(); } )*
    };
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("config {}: {e}", path.display())))
}

impl EstimateArgs {
    fn resolved(mut self) -> Result<Self> {
        if let Some(path) = self.config.clone() {
            let mut f: Self = read_config(&path)?;
            merge!(
                self, f, data, edges, nodes, outcome, treatment, covariates, estimator, vcov, hc5_k,
                alpha, directed, transpose, normalize, neighbor_intercept, no_intercept, power, degree_column, out,
                format
            );
        }
        Ok(self)
    }
}

impl SimulateArgs {
    fn resolved(mut self) -> Result<Self> {
        if let Some(path) = self.config.clone() {
            let mut f: Self = read_config(&path)?;
            merge!(
                self, f, n, graph, p, directed, power, m, nei, p_rewire, errors, a, b, estimators,
                reps, seed, fixed_graph, gls_known, alpha, threads, out, format
            );
        }
        Ok(self)
    }

    /// Translate flags into a simulation configuration.
    pub fn to_config(&self) -> Result<SimConfig> {
        let graph = match self.graph.unwrap_or(FamilyName::Er) {
            FamilyName::Er => GraphFamily::Er {
                p: self.p.unwrap_or(0.01),
                directed: self.directed.unwrap_or(false),
            },
            FamilyName::Ba => GraphFamily::Ba { power: self.power.unwrap_or(0.05), m: self.m.unwrap_or(1) },
            FamilyName::Ws => GraphFamily::Ws {
                nei: self.nei.unwrap_or(10),
                p_rewire: self.p_rewire.unwrap_or(0.05),
            },
            FamilyName::Empty => GraphFamily::Empty,
        };
        let errors = match self.errors.unwrap_or(ErrorsName::Homo) {
            ErrorsName::Homo => ErrorSpec::Homo,
            ErrorsName::Corr => ErrorSpec::Corr { a: self.a.unwrap_or(3.0), b: self.b.unwrap_or(1.5) },
            ErrorsName::Noiseless => ErrorSpec::NoiselessOutcome,
        };
        if !matches!(errors, ErrorSpec::Corr { .. }) && (self.a.is_some() || self.b.is_some()) {
            return Err(Error::InvalidParameter("--a and --b apply only to --errors corr".into()));
        }
        let mut cfg = SimConfig::new(self.n.unwrap_or(400), graph, errors);
        if let Some(e) = &self.estimators {
            cfg.estimators = e.clone();
        }
        cfg.reps = self.reps.unwrap_or(100);
        cfg.base_seed = self.seed.unwrap_or(1);
        cfg.fixed_graph = self.fixed_graph.unwrap_or(false);
        cfg.gls_known = self.gls_known.unwrap_or(false);
        cfg.alpha = self.alpha.unwrap_or(0.05);
        cfg.threads = self.threads.unwrap_or(0);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl GraphInfoArgs {
    fn resolved(mut self) -> Result<Self> {
        if let Some(path) = self.config.clone() {
            let mut f: Self = read_config(&path)?;
            merge!(self, f, edges, nodes, n, directed, transpose, normalize, power, out, format);
        }
        Ok(self)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_graph(
    path: &Path,
    nodes: Option<&Path>,
    n_hint: Option<usize>,
    directed: bool,
    transpose: bool,
    normalize: Normalize,
    power: usize,
) -> Result<AdjacencyMatrix> {
    let labels = nodes.map(|p| load_node_labels(open(p)?)).transpose()?;
    let opts = EdgeListOptions { directed, transpose, n_hint, labels, normalize };
    let g = load_edge_list(open(path)?, &opts)?;
    if power == 0 {
        return Err(Error::InvalidParameter("--power must be at least 1".into()));
    }
    if power == 1 {
        Ok(g)
    } else {
        g.matrix_power(power)
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

/// Column order of the estimate CSV.
pub const ESTIMATE_CSV_COLUMNS: [&str; 14] = [
    "estimator", "psi", "se", "ci_lower", "ci_upper", "alpha", "beta_a", "beta_as", "f_bar", "vcov",
    "n", "dropped", "warnings", "aic",
];

fn estimate_csv(est: &EffectEstimate, aic_value: Option<f64>) -> Result<Vec<u8>> {
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ESTIMATE_CSV_COLUMNS)?;
    w.write_record([
        est.estimator.as_str().to_string(),
        est.psi.to_string(),
        est.se.to_string(),
        est.ci.0.to_string(),
        est.ci.1.to_string(),
        est.alpha.to_string(),
        est.beta_a.to_string(),
        join(&est.beta_as),
        join(&est.f_bar),
        est.vcov.to_string(),
        est.n.to_string(),
        est.dropped.join(";"),
        est.warnings.join(";"),
        aic_value.map(|a| a.to_string()).unwrap_or_default(),
    ])?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn cmd_estimate(args: EstimateArgs, stdout: &mut dyn Write) -> Result<Estimation> {
    let args = args.resolved()?;
    let data_path = args
        .data
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("--data is required".into()))?;
    let estimator = args.estimator.unwrap_or(EstimatorKind::Full);
    let edges = args.edges.clone().unwrap_or_default();
    match estimator {
        EstimatorKind::Full | EstimatorKind::Multi if edges.is_empty() => {
            return Err(Error::InvalidParameter(format!(
                "estimator {} needs at least one --edges file",
                estimator.as_str()
            )));
        }
        EstimatorKind::Partial if edges.is_empty() == args.degree_column.is_none() => {
            return Err(Error::InvalidParameter(
                "estimator partial needs exactly one of --edges or --degree-column".into(),
            ));
        }
        _ => {}
    }
    let alpha = args.alpha.unwrap_or(0.05);
    let vcov = VcovSpec {
        kind: args.vcov.unwrap_or_default(),
        hc5_k: args.hc5_k.unwrap_or(VcovSpec::DEFAULT_HC5_K),
    };
    let opts = EstimateOptions {
        vcov,
        alpha,
        neighbor_intercept: args.neighbor_intercept.unwrap_or(false),
        intercept: !args.no_intercept.unwrap_or(false),
    };
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }

    let outcome = args.outcome.clone().unwrap_or_else(|| "Y".into());
    let treatment = args.treatment.clone().unwrap_or_else(|| "A".into());
    let covariates = args.covariates.clone().unwrap_or_default();
    let mut wanted: Vec<&str> = vec![&outcome, &treatment];
    wanted.extend(covariates.iter().map(String::as_str));
    if let Some(d) = &args.degree_column {
        wanted.push(d);
    }
    let table = Table::read(open(data_path)?, &wanted)?;
    let data = table.dataset(&outcome, &treatment, &covariates)?;

    let graphs = edges
        .iter()
        .map(|p| {
            load_graph(
                p,
                args.nodes.as_deref(),
                Some(data.n()),
                args.directed.unwrap_or(false),
                args.transpose.unwrap_or(false),
                args.normalize.unwrap_or_default(),
                args.power.unwrap_or(1),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let est = match estimator {
        EstimatorKind::Full => fit_total_known(&data, &graphs, opts)?,
        EstimatorKind::Multi => fit_multi_network(&data, &graphs, opts)?,
        EstimatorKind::Naive => fit_naive(&data, opts)?,
        EstimatorKind::Partial => {
            let f = match &args.degree_column {
                Some(col) => table.column(col)?,
                None => DVector::from_vec(graphs[0].degree_summary().degrees),
            };
            fit_partially_known(&data, &f, opts)?
        }
    };
    let aic_value = aic(&est.fit).ok();
    let e = &est.estimate;
    writeln!(
        stdout,
        "{}: psi = {:.6}, se = {:.6}, {:.0}% CI [{:.6}, {:.6}], n = {}, vcov = {}, aic = {}",
        e.estimator.as_str(),
        e.psi,
        e.se,
        100.0 * (1.0 - e.alpha),
        e.ci.0,
        e.ci.1,
        e.n,
        e.vcov,
        aic_value.map_or_else(|| "n/a".into(), |a| format!("{a:.4}")),
    )?;
    for w in &e.warnings {
        writeln!(stdout, "warning: {w}")?;
    }
    if let Some(out) = &args.out {
        let bytes = match args.format.unwrap_or_default() {
            OutputFormat::Json => json_bytes(e)?,
            OutputFormat::Csv => estimate_csv(e, aic_value)?,
        };
        write_out(out, &bytes)?;
    }
    Ok(est)
}

pub fn cmd_simulate(args: SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let args = args.resolved()?;
    let cfg = args.to_config()?;
    let report = run_simulation(&cfg)?;
    for s in &report.summaries {
        let f = |v: Option<f64>| v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"));
        writeln!(
            stdout,
            "{}: bias = {}, sd = {}, mean se = {}, coverage = {}, reps = {}/{}",
            s.estimator.as_str(),
            f(s.mean_bias),
            f(s.emp_sd),
            f(s.mean_se),
            f(s.coverage),
            s.reps_ok,
            s.reps_ok + s.failures,
        )?;
    }
    if let Some(out) = &args.out {
        let bytes = match args.format.unwrap_or_default() {
            OutputFormat::Json => json_bytes(&report)?,
            OutputFormat::Csv => {
                let mut buf = Vec::new();
                report.write_csv(&mut buf)?;
                buf
            }
        };
        write_out(out, &bytes)?;
    }
    Ok(())
}

/// Degree report printed by `graph-info`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub n: usize,
    pub directed: bool,
    pub power: usize,
    pub nonzero_entries: usize,
    pub total_weight: f64,
    pub mean_degree: f64,
    pub min_degree: f64,
    pub max_degree: f64,
    pub sd_degree: f64,
}

pub fn cmd_graph_info(args: GraphInfoArgs, stdout: &mut dyn Write) -> Result<GraphReport> {
    let args = args.resolved()?;
    let path = args
        .edges
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("--edges is required".into()))?;
    let power = args.power.unwrap_or(1);
    let g = load_graph(
        path,
        args.nodes.as_deref(),
        args.n,
        args.directed.unwrap_or(false),
        args.transpose.unwrap_or(false),
        args.normalize.unwrap_or_default(),
        power,
    )?;
    let s = g.degree_summary();
    let report = GraphReport {
        n: g.n(),
        directed: g.is_directed(),
        power,
        nonzero_entries: g.nnz(),
        total_weight: s.total_weight,
        mean_degree: s.mean,
        min_degree: s.min,
        max_degree: s.max,
        sd_degree: s.sd,
    };
    writeln!(
        stdout,
        "n = {}, W = {}, mean F = {}, min F = {}, max F = {}, sd F = {}",
        report.n, report.total_weight, report.mean_degree, report.min_degree, report.max_degree, report.sd_degree
    )?;
    if let Some(out) = &args.out {
        let bytes = match args.format.unwrap_or_default() {
            OutputFormat::Json => json_bytes(&report)?,
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.serialize(&report)?;
                w.into_inner().map_err(|e| Error::Io(e.into_error()))?
            }
        };
        write_out(out, &bytes)?;
    }
    Ok(report)
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(a, stdout).map(|_| ()),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::GraphInfo(a) => cmd_graph_info(a, stdout).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(e.class())
        }
    }
}
