//! Monte Carlo operating characteristics of the total-effect estimators.
//!
//! Each replicate draws covariates, treatment and outcome from
//!
//! ```text
//! L1 ~ Gamma(3, 1), L2 ~ Pois(1), L3 ~ Beta(2, 5), L4 ~ Bern(0.6)
//! A = L1 + 2 L2 + 3 L3 + 4 L4 + e_A
//! Y = A + L1 + 2 L2 + 3 L3 + 4 L4 + G A + e_Y
//! ```
//!
//! with `e_A`, `e_Y` independent draws from `N(0, Σ)`.
//!
//! so the total effect is `1 + F̄`. Replicate seeds depend only on the base
//! seed and the replicate index, so results do not depend on scheduling.

use std::fmt;
use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Beta, Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::effects::{
    fit_naive, fit_partially_known, fit_total_known, fit_total_known_sigma, EffectEstimate,
    EstimateOptions,
};
use crate::error::{Error, Result};
use crate::graph::{generate_ba, generate_er, generate_ws, AdjacencyMatrix};
use crate::regress::VcovKind;

/// Coefficients of `L1..L4` in both the treatment and outcome equations.
pub const COVARIATE_WEIGHTS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GraphFamily {
    Er { p: f64, directed: bool },
    Ba { power: f64, m: usize },
    Ws { nei: usize, p_rewire: f64 },
    /// No edges.
    Empty,
}

impl GraphFamily {
    pub fn name(&self) -> &'static str {
        match self {
            GraphFamily::Er { .. } => "er",
            GraphFamily::Ba { .. } => "ba",
            GraphFamily::Ws { .. } => "ws",
            GraphFamily::Empty => "empty",
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<AdjacencyMatrix> {
        match *self {
            GraphFamily::Er { p, directed } => generate_er(n, p, seed, directed),
            GraphFamily::Ba { power, m } => generate_ba(n, power, m, seed),
            GraphFamily::Ws { nei, p_rewire } => generate_ws(n, 1, nei, p_rewire, seed),
            GraphFamily::Empty => AdjacencyMatrix::empty(n, false),
        }
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphFamily::Er { p, directed } => write!(f, "er(p={p},directed={directed})"),
            GraphFamily::Ba { power, m } => write!(f, "ba(power={power},m={m})"),
            GraphFamily::Ws { nei, p_rewire } => write!(f, "ws(nei={nei},p_rewire={p_rewire})"),
            GraphFamily::Empty => f.write_str("empty"),
        }
    }
}

/// Error law of both equations. `Corr` gives `N(0, aI + bG)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorSpec {
    Homo,
    Corr { a: f64, b: f64 },
    /// `e_Y ≡ 0` and `e_A ~ N(0, I)`; `e_A` stays random so that `A` is not
    /// a combination of `L`.
    NoiselessOutcome,
}

impl ErrorSpec {
    pub const DEFAULT_CORR: ErrorSpec = ErrorSpec::Corr { a: 3.0, b: 1.5 };

    /// `(a, b)` of `Σ`, `None` when the outcome is noise-free.
    pub fn covariance(&self) -> Option<(f64, f64)> {
        match *self {
            ErrorSpec::Homo => Some((1.0, 0.0)),
            ErrorSpec::Corr { a, b } => Some((a, b)),
            ErrorSpec::NoiselessOutcome => None,
        }
    }
}

impl fmt::Display for ErrorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorSpec::Homo => f.write_str("homo"),
            ErrorSpec::Corr { a, b } => write!(f, "corr(a={a},b={b})"),
            ErrorSpec::NoiselessOutcome => f.write_str("noiseless"),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum SimEstimator {
    Full,
    Partial,
    Naive,
    FullGls,
}

impl SimEstimator {
    pub fn as_str(self) -> &'static str {
        match self {
            SimEstimator::Full => "full",
            SimEstimator::Partial => "partial",
            SimEstimator::Naive => "naive",
            SimEstimator::FullGls => "full_gls",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub graph: GraphFamily,
    pub errors: ErrorSpec,
    pub estimators: Vec<SimEstimator>,
    pub reps: usize,
    pub base_seed: u64,
    /// Use the replicate-0 graph for every replicate.
    pub fixed_graph: bool,
    pub alpha: f64,
    /// `full_gls` plugs in the true `(a, b)` instead of estimating `θ`.
    pub gls_known: bool,
    /// Worker threads; 0 uses the global pool. Does not affect results.
    #[serde(skip)]
    pub threads: usize,
}

impl SimConfig {
    pub fn new(n: usize, graph: GraphFamily, errors: ErrorSpec) -> Self {
        Self {
            n,
            graph,
            errors,
            estimators: vec![SimEstimator::Full, SimEstimator::Partial, SimEstimator::Naive],
            reps: 100,
            base_seed: 1,
            fixed_graph: false,
            alpha: 0.05,
            gls_known: false,
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let ErrorSpec::Corr { a, b } = self.errors {
            if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
                return bad(format!("need a > 0 and finite b, got a = {a}, b = {b}"));
            }
            if b != 0.0 && matches!(self.graph, GraphFamily::Er { directed: true, .. }) {
                return bad("correlated errors need an undirected graph".into());
            }
        }
        match self.graph {
            GraphFamily::Er { p, .. } if !(0.0..=1.0).contains(&p) => bad(format!("p = {p} outside [0, 1]")),
            GraphFamily::Ws { p_rewire, .. } if !(0.0..=1.0).contains(&p_rewire) => {
                bad(format!("p_rewire = {p_rewire} outside [0, 1]"))
            }
            GraphFamily::Ws { nei, .. } if self.n <= 2 * nei => {
                bad(format!("ring lattice needs n > 2·nei, got n = {}, nei = {nei}", self.n))
            }
            GraphFamily::Ba { m, .. } if m == 0 || m >= self.n => {
                bad(format!("ba needs 1 ≤ m < n, got m = {m}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub rep: u64,
    pub seed: u64,
    pub estimator: SimEstimator,
    pub true_psi: f64,
    pub f_bar: f64,
    pub psi_hat: Option<f64>,
    pub se_hat: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub covered: Option<bool>,
    /// Failure message when the estimator did not produce an estimate.
    pub error: Option<String>,
}

impl ReplicateResult {
    fn from_estimate(base: Self, est: &EffectEstimate) -> Self {
        let (lo, hi) = est.ci;
        Self {
            psi_hat: Some(est.psi),
            se_hat: Some(est.se),
            ci_lower: Some(lo),
            ci_upper: Some(hi),
            covered: Some(lo <= base.true_psi && base.true_psi <= hi),
            ..base
        }
    }
}

/// Aggregates over the successful replicates of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: SimEstimator,
    pub reps_ok: usize,
    pub failures: usize,
    /// Every replicate failed.
    pub failed: bool,
    /// Mean of `ψ̂ − ψ`.
    pub mean_bias: Option<f64>,
    /// Standard deviation of `ψ̂ − ψ`.
    pub emp_sd: Option<f64>,
    /// Standard deviation of `ψ̂` itself.
    pub emp_sd_psi: Option<f64>,
    pub emp_var_psi: Option<f64>,
    pub mean_se: Option<f64>,
    /// Mean of `se²`.
    pub mean_var_hat: Option<f64>,
    pub coverage: Option<f64>,
    pub mean_true_psi: Option<f64>,
    pub mean_f_bar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimConfig,
    pub summaries: Vec<EstimatorSummary>,
    pub replicates: Vec<ReplicateResult>,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const GRAPH_STREAM: u64 = 0x6A09_E667_F3BC_C909;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `rep`; injective in `rep` for a fixed base seed.
pub fn replicate_seed(base_seed: u64, rep: u64) -> u64 {
    mix64(base_seed.wrapping_add(GOLDEN.wrapping_mul(rep.wrapping_add(1))))
}

fn graph_seed(base_seed: u64, rep: u64) -> u64 {
    mix64(replicate_seed(base_seed, rep) ^ GRAPH_STREAM)
}

/// The graph used by replicate `rep`.
pub fn replicate_graph(config: &SimConfig, rep: u64) -> Result<AdjacencyMatrix> {
    let rep = if config.fixed_graph { 0 } else { rep };
    config.graph.generate(config.n, graph_seed(config.base_seed, rep))
}

/// `n × 4` matrix of independent `Gamma(3,1)`, `Pois(1)`, `Beta(2,5)`, `Bern(0.6)` columns.
pub fn sample_covariates<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let gamma = Gamma::new(3.0, 1.0).expect("valid gamma");
    let pois = Poisson::new(1.0).expect("valid poisson");
    let beta = Beta::new(2.0, 5.0).expect("valid beta");
    let bern = Bernoulli::new(0.6).expect("valid bernoulli");
    let mut l = DMatrix::zeros(n, 4);
    for i in 0..n {
        l[(i, 0)] = gamma.sample(rng);
    }
    for i in 0..n {
        l[(i, 1)] = pois.sample(rng);
    }
    for i in 0..n {
        l[(i, 2)] = beta.sample(rng);
    }
    for i in 0..n {
        l[(i, 3)] = if bern.sample(rng) { 1.0 } else { 0.0 };
    }
    l
}

fn standard_normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Factor of `aI + bG`; `None` stands for `√a·I`.
fn covariance_factor(a: f64, b: f64, g: &AdjacencyMatrix) -> Result<Option<DMatrix<f64>>> {
    if !(a > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("need a > 0 and finite b, got a = {a}, b = {b}")));
    }
    if b == 0.0 || g.nnz() == 0 {
        return Ok(None);
    }
    if !g.is_symmetric() {
        return Err(Error::InvalidParameter("aI + bG must be symmetric; the graph is directed".into()));
    }
    let mut sigma = g.to_dense() * b;
    for i in 0..g.n() {
        sigma[(i, i)] += a;
    }
    let chol = Cholesky::new(sigma).ok_or(Error::NotPositiveDefinite { a, b, family: None })?;
    Ok(Some(chol.unpack()))
}

fn draw<R: Rng + ?Sized>(a: f64, factor: &Option<DMatrix<f64>>, n: usize, rng: &mut R) -> DVector<f64> {
    let z = standard_normals(n, rng);
    match factor {
        Some(l) => l * z,
        None => z * a.sqrt(),
    }
}

/// Draw from `N(0, aI + bG)` through a Cholesky factor.
pub fn sample_correlated_normal<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    g: &AdjacencyMatrix,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let factor = covariance_factor(a, b, g)?;
    Ok(draw(a, &factor, g.n(), rng))
}

/// One draw of the data-generating process on `g`; returns the data and `1 + F̄`.
pub fn generate_dgp<R: Rng + ?Sized>(
    g: &AdjacencyMatrix,
    errors: ErrorSpec,
    rng: &mut R,
) -> Result<(Dataset, f64)> {
    let n = g.n();
    let l = sample_covariates(n, rng);
    let w = DVector::from_column_slice(&COVARIATE_WEIGHTS);
    let lw = &l * &w;
    let (e_a, e_y) = match errors.covariance() {
        Some((va, vb)) => {
            let factor = covariance_factor(va, vb, g)?;
            let e_a = draw(va, &factor, n, rng);
            (e_a, draw(va, &factor, n, rng))
        }
        None => (standard_normals(n, rng), DVector::zeros(n)),
    };
    let a = &lw + e_a;
    let y = &a + &lw + g.exposure(&a)? + e_y;
    let names = (1..=4).map(|k| format!("L{k}")).collect();
    let data = Dataset::new(y, a, l, names)?;
    Ok((data, 1.0 + g.degree_summary().mean))
}

fn run_on_graph(
    config: &SimConfig,
    rep: u64,
    g: &AdjacencyMatrix,
) -> Result<Vec<ReplicateResult>> {
    let seed = replicate_seed(config.base_seed, rep);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (data, true_psi) =
        generate_dgp(g, config.errors, &mut rng).map_err(|e| e.with_family(&config.graph.to_string()))?;
    let f_bar = true_psi - 1.0;
    let classical = EstimateOptions::new(VcovKind::Classical, config.alpha);
    let graphs = std::slice::from_ref(g);

    let mut out = Vec::with_capacity(config.estimators.len());
    for &est in &config.estimators {
        let fitted = match est {
            SimEstimator::Full => fit_total_known(&data, graphs, classical),
            SimEstimator::Naive => fit_naive(&data, classical),
            SimEstimator::Partial => {
                let f = DVector::from_vec(g.degree_summary().degrees);
                fit_partially_known(&data, &f, classical)
            }
            SimEstimator::FullGls => match (config.gls_known, config.errors.covariance()) {
                (true, Some((a, b))) => fit_total_known_sigma(&data, g, a, b, config.alpha),
                _ => fit_total_known(&data, graphs, EstimateOptions::new(VcovKind::Gls, config.alpha)),
            },
        };
        let base = ReplicateResult {
            rep,
            seed,
            estimator: est,
            true_psi,
            f_bar,
            psi_hat: None,
            se_hat: None,
            ci_lower: None,
            ci_upper: None,
            covered: None,
            error: None,
        };
        out.push(match fitted {
            Ok(e) => ReplicateResult::from_estimate(base, &e.estimate),
            Err(e) => ReplicateResult { error: Some(e.to_string()), ..base },
        });
    }
    Ok(out)
}

/// Run every configured estimator on replicate `rep`. Estimator failures are
/// recorded in the results; data-generation failures are returned as errors.
pub fn run_replicate(config: &SimConfig, rep: u64) -> Result<Vec<ReplicateResult>> {
    config.validate()?;
    let g = replicate_graph(config, rep)?;
    run_on_graph(config, rep, &g)
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Results for replicate indices in `reps`, ordered by replicate then estimator.
pub fn run_replicates(config: &SimConfig, reps: Range<u64>) -> Result<Vec<ReplicateResult>> {
    config.validate()?;
    let fixed = if config.fixed_graph { Some(replicate_graph(config, 0)?) } else { None };
    let batches: Result<Vec<Vec<ReplicateResult>>> = with_pool(config.threads, || {
        reps.into_par_iter()
            .map(|rep| match &fixed {
                Some(g) => run_on_graph(config, rep, g),
                None => run_on_graph(config, rep, &replicate_graph(config, rep)?),
            })
            .collect()
    })?;
    Ok(batches?.into_iter().flatten().collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    Some(v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64)
}

/// Aggregate replicate results for one estimator.
pub fn summarize(estimator: SimEstimator, results: &[ReplicateResult]) -> EstimatorSummary {
    let mine: Vec<_> = results.iter().filter(|r| r.estimator == estimator).collect();
    let ok: Vec<_> = mine.iter().filter(|r| r.psi_hat.is_some()).collect();
    let failures = mine.len() - ok.len();
    let col = |f: &dyn Fn(&ReplicateResult) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
    let some_mean = |v: Vec<f64>| if v.is_empty() { None } else { Some(mean(&v)) };

    let psi = col(&|r| r.psi_hat.unwrap_or(f64::NAN));
    let err = col(&|r| r.psi_hat.unwrap_or(f64::NAN) - r.true_psi);
    let se = col(&|r| r.se_hat.unwrap_or(f64::NAN));
    let var_hat = se.iter().map(|s| s * s).collect();
    let covered = col(&|r| if r.covered == Some(true) { 1.0 } else { 0.0 });
    EstimatorSummary {
        estimator,
        reps_ok: ok.len(),
        failures,
        failed: ok.is_empty(),
        emp_sd: sample_var(&err).map(f64::sqrt),
        mean_bias: some_mean(err),
        emp_sd_psi: sample_var(&psi).map(f64::sqrt),
        emp_var_psi: sample_var(&psi),
        mean_se: some_mean(se),
        mean_var_hat: some_mean(var_hat),
        coverage: some_mean(covered),
        mean_true_psi: some_mean(col(&|r| r.true_psi)),
        mean_f_bar: some_mean(col(&|r| r.f_bar)),
    }
}

pub fn run_simulation(config: &SimConfig) -> Result<SimulationReport> {
    let replicates = run_replicates(config, 0..config.reps as u64)?;
    let mut seen = Vec::new();
    for &e in &config.estimators {
        if !seen.contains(&e) {
            seen.push(e);
        }
    }
    let summaries = seen.iter().map(|&e| summarize(e, &replicates)).collect();
    Ok(SimulationReport { config: config.clone(), summaries, replicates })
}

/// Column order of [`SimulationReport::write_csv`].
pub const CSV_COLUMNS: [&str; 21] = [
    "n",
    "graph",
    "errors",
    "reps",
    "base_seed",
    "fixed_graph",
    "gls_known",
    "estimator",
    "reps_ok",
    "failures",
    "failed",
    "mean_bias",
    "emp_sd",
    "emp_sd_psi",
    "emp_var_psi",
    "mean_se",
    "mean_var_hat",
    "coverage",
    "mean_true_psi",
    "mean_f_bar",
    "alpha",
];

impl SimulationReport {
    /// One row per estimator.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        let c = &self.config;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for s in &self.summaries {
            w.write_record([
                c.n.to_string(),
                c.graph.to_string(),
                c.errors.to_string(),
                c.reps.to_string(),
                c.base_seed.to_string(),
                c.fixed_graph.to_string(),
                c.gls_known.to_string(),
                s.estimator.as_str().to_string(),
                s.reps_ok.to_string(),
                s.failures.to_string(),
                s.failed.to_string(),
                opt(s.mean_bias),
                opt(s.emp_sd),
                opt(s.emp_sd_psi),
                opt(s.emp_var_psi),
                opt(s.mean_se),
                opt(s.mean_var_hat),
                opt(s.coverage),
                opt(s.mean_true_psi),
                opt(s.mean_f_bar),
                c.alpha.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self, estimator: SimEstimator) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }
}
