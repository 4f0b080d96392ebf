//! Experiment configs, runners and report writers behind the command line.
//!
//! A config is one JSON document. It is echoed verbatim into `report.json`
//! after flag overrides are applied, so a report reruns the exact experiment.

use crate::coeffgen::{standardized_functional, CoefficientModel, FunctionalSpec, InnovationFamily};
use crate::oracle::{kac_rice_expected_zeros, KacRiceSpec, SincSampler};
use crate::spectral::{
    density_from_finite_covariance, functional_density, hermite_coefficients, ClosedForm, CovarianceSequence,
    DEFAULT_GRID, DEFAULT_HERMITE_ORDER,
};
use crate::stats::{
    clt_samples, empirical_small_ball, factorial_radius, kolmogorov_distance, run_zero_density, sinc_zero_counts,
    tail_moment_of_counts, universal_limit, Engine, MCEstimate, SmallBallMode, ZeroEstimator, DEFAULT_TAIL_EPSILON,
};
use crate::tvbound::truncation_sweep;
use crate::zeros::{count_zeros, rademacher_smallball_exact, DEFAULT_OVERSAMPLE};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ExpectZeros,
    Clt,
    SmallBall,
    TvBound,
    Spectral,
    SincOracle,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ExpectZeros => "expect-zeros",
            Self::Clt => "clt",
            Self::SmallBall => "small-ball",
            Self::TvBound => "tv-bound",
            Self::Spectral => "spectral",
            Self::SincOracle => "sinc-oracle",
        }
    }

    fn default_reps(self) -> usize {
        match self {
            Self::ExpectZeros => 500,
            Self::Clt => 20_000,
            Self::SmallBall => 10_000,
            Self::SincOracle => 100_000,
            Self::TvBound | Self::Spectral => 0,
        }
    }
}

/// Correlation sequence: a closed form, optionally truncated, or explicit values with `rho(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl CovarianceConfig {
    pub fn build(&self) -> Result<CovarianceSequence> {
        match (&self.closed_form, &self.values) {
            (Some(kind), None) => {
                let support = self.support.unwrap_or(kind.default_support());
                CovarianceSequence::from_fn(support, |k| kind.correlation(k))
            }
            (None, Some(v)) => {
                if self.support.is_some() {
                    return Err(config_err("covariance.support", "support only applies to closed forms"));
                }
                CovarianceSequence::new(v.clone())
            }
            _ => Err(config_err("covariance", "give exactly one of `closed_form` or `values`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalConfig {
    Sign,
    Identity,
    Square,
    /// Coefficients `c_q` of `sum_q c_q He_q`, standardized before use.
    Hermite(Vec<f64>),
}

impl FunctionalConfig {
    fn build(&self) -> Result<FunctionalSpec> {
        let raw = match self {
            Self::Sign => FunctionalSpec::sign(),
            Self::Identity => FunctionalSpec::identity(),
            Self::Square => FunctionalSpec::square(),
            Self::Hermite(c) => FunctionalSpec::hermite(c.clone()),
        };
        standardized_functional(&raw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Iid {
        family: InnovationFamily,
    },
    /// Kernel is rescaled to unit norm.
    MovingAverage {
        kernel: Vec<f64>,
        innovation: InnovationFamily,
    },
    GaussianFunctional {
        covariance: CovarianceConfig,
        functional: FunctionalConfig,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<CoefficientModel> {
        let model = match self {
            Self::Iid { family } => CoefficientModel::Iid(family.clone()),
            Self::MovingAverage { kernel, innovation } => CoefficientModel::MovingAverage {
                kernel: crate::coeffgen::normalize_ma_kernel(kernel)?,
                innovation: innovation.clone(),
            },
            Self::GaussianFunctional { covariance, functional } => CoefficientModel::GaussianFunctional {
                covariance: covariance.build()?,
                functional: functional.build()?,
            },
        };
        model.validate()?;
        Ok(model)
    }

    fn rademacher_kernel(&self) -> Option<Vec<f64>> {
        match self {
            Self::Iid { family: InnovationFamily::Rademacher } => Some(vec![1.0]),
            Self::MovingAverage { kernel, innovation: InnovationFamily::Rademacher } => {
                crate::coeffgen::normalize_ma_kernel(kernel).ok()
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance against the universal limit `2 / sqrt 3`.
    #[serde(default = "default_relative")]
    pub relative: f64,
    /// Allowed `|mean - oracle| / stderr`.
    #[serde(default = "default_se_multiple")]
    pub se_multiple: f64,
    /// Ceiling on small-ball frequencies at the factorial radius.
    #[serde(default = "default_small_ball_ceiling")]
    pub small_ball_ceiling: f64,
}

fn default_relative() -> f64 {
    0.02
}

fn default_se_multiple() -> f64 {
    5.0
}

fn default_small_ball_ceiling() -> f64 {
    0.01
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            relative: default_relative(),
            se_multiple: default_se_multiple(),
            small_ball_ceiling: default_small_ball_ceiling(),
        }
    }
}

/// Small-ball radius: a number, or `{"factorial_beta": b}` for `1 / floor(n^b)!`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaConfig {
    Value(f64),
    Factorial { factorial_beta: f64 },
}

impl DeltaConfig {
    fn at(self, n: usize) -> f64 {
        match self {
            Self::Value(d) => d,
            Self::Factorial { factorial_beta } => factorial_radius(n, factorial_beta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeConfig {
    AtPoint { t: f64, x: f64 },
    SupNorm,
}

impl From<ModeConfig> for SmallBallMode {
    fn from(m: ModeConfig) -> Self {
        match m {
            ModeConfig::AtPoint { t, x } => SmallBallMode::AtPoint { t, x },
            ModeConfig::SupNorm => SmallBallMode::SupNorm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorConfig {
    Full,
    Localized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oversample: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Latent Gaussian correlation for `tv-bound` and `spectral`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

/// Deserialize a config, reporting the path of the first offending entry.
pub fn parse_config(value: Value) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let message = e.inner().to_string();
        let mut path = e.path().to_string();
        if let Some(field) = message.strip_prefix("missing field `").and_then(|s| s.split('`').next()) {
            path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
        }
        Error::Config { path, message }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Read a JSON config and apply overrides before validation.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| config_err(".", format!("{}: {e}", path.display())))?;
    let obj = value.as_object_mut().ok_or_else(|| config_err(".", "config must be a JSON object"))?;
    if let Some(kind) = overrides.kind {
        match obj.get("kind").and_then(Value::as_str) {
            Some(k) if k != kind.name() => {
                return Err(config_err("kind", format!("config is `{k}` but the subcommand is `{}`", kind.name())));
            }
            _ => {
                obj.insert("kind".into(), json!(kind.name()));
            }
        }
    }
    if let Some(seed) = overrides.seed {
        obj.insert("seed".into(), json!(seed));
    }
    if let Some(out) = &overrides.out {
        obj.insert("out".into(), json!(out));
    }
    if let Some(reps) = overrides.reps {
        obj.insert("reps".into(), json!(reps));
    }
    parse_config(value)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        if !(t.relative > 0.0 && t.se_multiple > 0.0 && t.small_ball_ceiling > 0.0) {
            return Err(config_err("tolerances", "tolerances must be positive"));
        }
        if let Some(i) = self.n.iter().position(|&n| n == 0) {
            return Err(config_err(&format!("n[{i}]"), "degree must be positive"));
        }
        let needs_model = matches!(self.kind, ExperimentKind::ExpectZeros | ExperimentKind::Clt | ExperimentKind::SmallBall);
        if needs_model && self.model.is_none() {
            return Err(config_err("model", format!("`{}` needs a model", self.kind.name())));
        }
        let needs_n = !matches!(self.kind, ExperimentKind::Spectral | ExperimentKind::SincOracle);
        if needs_n && self.n.is_empty() {
            return Err(config_err("n", "give at least one degree"));
        }
        match self.kind {
            ExperimentKind::SmallBall if self.delta.is_none() => {
                return Err(config_err("delta", "`small-ball` needs a radius"));
            }
            ExperimentKind::TvBound => {
                if self.covariance.is_none() {
                    return Err(config_err("covariance", "`tv-bound` needs the latent covariance"));
                }
                if self.m.is_empty() {
                    return Err(config_err("m", "give at least one truncation lag"));
                }
                if self.m.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(config_err("m", "truncation lags must be strictly ascending"));
                }
            }
            ExperimentKind::Spectral if self.covariance.is_none() && self.model.is_none() => {
                return Err(config_err("covariance", "`spectral` needs a covariance or a model"));
            }
            _ => {}
        }
        if let Some(m) = &self.model {
            m.build().map_err(|e| config_err("model", e.to_string()))?;
        }
        if let Some(c) = &self.covariance {
            c.build().map_err(|e| config_err("covariance", e.to_string()))?;
        }
        Ok(())
    }

    pub fn reps(&self) -> usize {
        self.reps.unwrap_or(self.kind.default_reps())
    }
}

/// One pass/fail check of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// A CSV table; every float is written with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn plot(name: &str) -> Self {
        Self::new(&format!("plot_{name}"), &["x", "y", "yerr"])
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Runtime {
    pub wall_time: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub results: Vec<Value>,
    pub verdicts: Vec<Verdict>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub runtime: Runtime,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// Write `report.json` and every table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for t in &self.tables {
            files.push(t.write(dir)?);
        }
        let path = dir.join("report.json");
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        files.push(path);
        Ok(files)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} ({} rows, {:.2} s)\n", self.config.kind.name(), self.results.len(), self.runtime.wall_time);
        for v in &self.verdicts {
            s.push_str(&format!("  [{}] {}: {}\n", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail));
        }
        for w in &self.warnings {
            s.push_str(&format!("  warning: {w}\n"));
        }
        s
    }
}

struct Outcome {
    results: Vec<Value>,
    verdicts: Vec<Verdict>,
    warnings: Vec<String>,
    tables: Vec<Table>,
}

impl Outcome {
    fn new() -> Self {
        Self { results: Vec::new(), verdicts: Vec::new(), warnings: Vec::new(), tables: Vec::new() }
    }
}

fn streams(seed: u64, engine: Engine, n: usize, reps: usize) -> Value {
    json!({ "seed": seed, "engine": engine, "block": engine.block(n), "first": 0, "count": reps })
}

fn estimate_json(e: &MCEstimate) -> Value {
    json!({ "mean": e.mean, "stderr": e.stderr, "ci95": e.ci95, "replicates": e.replicates })
}

/// Run a validated config. Outputs are written when `out` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let outcome = match cfg.kind {
        ExperimentKind::ExpectZeros => run_expect_zeros(cfg)?,
        ExperimentKind::Clt => run_clt(cfg)?,
        ExperimentKind::SmallBall => run_small_ball(cfg)?,
        ExperimentKind::TvBound => run_tv_bound(cfg)?,
        ExperimentKind::Spectral => run_spectral(cfg)?,
        ExperimentKind::SincOracle => run_sinc_oracle(cfg)?,
    };
    let report = ExperimentReport {
        version: format!("trigzeros {}", env!("CARGO_PKG_VERSION")),
        config: cfg.clone(),
        results: outcome.results,
        verdicts: outcome.verdicts,
        warnings: outcome.warnings,
        runtime: Runtime { wall_time: start.elapsed().as_secs_f64(), threads: rayon::current_num_threads() },
        tables: outcome.tables,
    };
    if let Some(dir) = &cfg.out {
        report.write(dir)?;
    }
    Ok(report)
}

fn model_of(cfg: &ExperimentConfig) -> Result<CoefficientModel> {
    cfg.model.as_ref().ok_or_else(|| config_err("model", "missing model"))?.build()
}

fn run_expect_zeros(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = model_of(cfg)?;
    let reps = cfg.reps();
    let tol = cfg.tolerances;
    let (estimator, engine) = match cfg.estimator.unwrap_or(EstimatorConfig::Full) {
        EstimatorConfig::Full => (ZeroEstimator::Full, Engine::ZerosFull),
        EstimatorConfig::Localized => (ZeroEstimator::Localized, Engine::ZerosLocal),
    };
    let oversample = cfg.oversample.unwrap_or(DEFAULT_OVERSAMPLE);
    let limit = universal_limit();
    let mut out = Outcome::new();
    let mut summary =
        Table::new("zero_density", &["n", "mean", "stderr", "ci_lo", "ci_hi", "kac_rice", "universal", "suspicious"]);
    let mut plot = Table::plot("zero_density");
    for &n in &cfg.n {
        let run = run_zero_density(&model, n, reps, cfg.seed, estimator, oversample)?;
        let e = &run.estimate;
        let kr = if model.is_gaussian_linear() {
            let scale = if estimator == ZeroEstimator::Full { n as f64 } else { 1.0 };
            Some(kac_rice_expected_zeros(&KacRiceSpec::new(model.covariance()?, n))? / scale)
        } else {
            None
        };
        match kr {
            Some(k) => {
                let z = e.z_score(k);
                out.verdicts.push(Verdict::new(
                    format!("kac-rice n={n}"),
                    z <= tol.se_multiple,
                    format!("mean {:.6} vs {:.6}, z = {z:.2} (limit {})", e.mean, k, tol.se_multiple),
                ));
            }
            None => {
                let rel = (e.mean - limit).abs() / limit;
                out.verdicts.push(Verdict::new(
                    format!("universality n={n}"),
                    rel <= tol.relative,
                    format!("mean {:.6} vs {limit:.6}, relative error {rel:.4} (limit {})", e.mean, tol.relative),
                ));
            }
        }
        out.warnings.extend(e.warnings.iter().map(|w| format!("n={n}: {w}")));
        out.results.push(json!({
            "n": n,
            "estimator": estimator,
            "estimate": estimate_json(e),
            "kac_rice": kr,
            "universal": limit,
            "suspicious_replicates": run.suspicious_replicates,
            "streams": streams(cfg.seed, engine, n, reps),
        }));
        summary.push(vec![
            n.to_string(),
            fmt_f64(e.mean),
            fmt_f64(e.stderr),
            fmt_f64(e.ci95[0]),
            fmt_f64(e.ci95[1]),
            kr.map(fmt_f64).unwrap_or_default(),
            fmt_f64(limit),
            run.suspicious_replicates.to_string(),
        ]);
        plot.push(vec![n.to_string(), fmt_f64(e.mean), fmt_f64(e.stderr)]);
        let mut counts = Table::new(&format!("counts_n{n}"), &["replicate", "n", "count"]);
        for (r, n, c) in run.rows() {
            counts.push(vec![r.to_string(), n.to_string(), c.to_string()]);
        }
        out.tables.push(counts);
    }
    out.tables.push(summary);
    out.tables.push(plot);
    Ok(out)
}

/// Strictly decreasing apart from at most one upward step.
fn decreasing_with_one_inversion(values: &[f64]) -> bool {
    values.windows(2).filter(|w| w[1] >= w[0]).count() <= 1
}

fn run_clt(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = model_of(cfg)?;
    let reps = cfg.reps();
    let mut out = Outcome::new();
    let mut table = Table::new("clt", &["n", "kolmogorov", "dkw95"]);
    let mut plot = Table::plot("clt");
    let dkw = (2.0f64 / 0.05).ln().sqrt() / (2.0 * reps as f64).sqrt();
    let mut distances = Vec::new();
    for &n in &cfg.n {
        let d = kolmogorov_distance(&clt_samples(&model, n, reps, cfg.seed)?)?;
        distances.push(d);
        out.results.push(json!({
            "n": n,
            "kolmogorov": d,
            "dkw95": dkw,
            "streams": streams(cfg.seed, Engine::Clt, n, reps),
        }));
        table.push(vec![n.to_string(), fmt_f64(d), fmt_f64(dkw)]);
        plot.push(vec![n.to_string(), fmt_f64(d), fmt_f64(dkw)]);
    }
    if distances.len() >= 2 {
        out.verdicts.push(Verdict::new(
            "kolmogorov trend",
            decreasing_with_one_inversion(&distances),
            format!("distances {distances:.4?}, at most one inversion allowed"),
        ));
    }
    out.tables.push(table);
    out.tables.push(plot);
    Ok(out)
}

fn run_small_ball(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = model_of(cfg)?;
    let reps = cfg.reps();
    let tol = cfg.tolerances;
    let delta_cfg = cfg.delta.ok_or_else(|| config_err("delta", "missing radius"))?;
    let mode = cfg.mode.unwrap_or(ModeConfig::SupNorm);
    let kernel = cfg.model.as_ref().and_then(ModelConfig::rademacher_kernel);
    let mut out = Outcome::new();
    let mut table = Table::new("small_ball", &["n", "delta", "frequency", "stderr", "exact"]);
    let mut plot = Table::plot("small_ball");
    for &n in &cfg.n {
        let delta = delta_cfg.at(n);
        let e = empirical_small_ball(&model, n, delta, mode.into(), reps, cfg.seed)?;
        let exact = match (mode, &kernel) {
            (ModeConfig::AtPoint { t, x }, Some(k)) if n <= 12 && n + k.len() <= 23 => {
                Some(rademacher_smallball_exact(n, x, t, delta, k)?)
            }
            _ => None,
        };
        match (mode, exact) {
            (_, Some(p)) => {
                let z = e.z_score(p);
                out.verdicts.push(Verdict::new(
                    format!("exact n={n}"),
                    z <= tol.se_multiple,
                    format!("frequency {:.6} vs exact {p:.6}, z = {z:.2}", e.mean),
                ));
            }
            (ModeConfig::SupNorm, None) if matches!(delta_cfg, DeltaConfig::Factorial { .. }) => {
                out.verdicts.push(Verdict::new(
                    format!("factorial radius n={n}"),
                    e.mean < tol.small_ball_ceiling,
                    format!("frequency {:.6} at delta {delta:.3e} (ceiling {})", e.mean, tol.small_ball_ceiling),
                ));
            }
            _ => {}
        }
        out.results.push(json!({
            "n": n,
            "delta": delta,
            "estimate": estimate_json(&e),
            "exact": exact,
            "streams": streams(cfg.seed, Engine::SmallBall, n, reps),
        }));
        table.push(vec![
            n.to_string(),
            fmt_f64(delta),
            fmt_f64(e.mean),
            fmt_f64(e.stderr),
            exact.map(fmt_f64).unwrap_or_default(),
        ]);
        plot.push(vec![n.to_string(), fmt_f64(e.mean), fmt_f64(e.stderr)]);
    }
    out.tables.push(table);
    out.tables.push(plot);
    Ok(out)
}

fn run_tv_bound(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rho = cfg.covariance.as_ref().ok_or_else(|| config_err("covariance", "missing covariance"))?.build()?;
    let mut out = Outcome::new();
    let mut table = Table::new("tv_bound", &["n", "m", "tv_bound", "trace_bound", "kappa", "valid"]);
    let mut plot = Table::plot("tv_bound");
    for &n in &cfg.n {
        let rows = truncation_sweep(&rho, n, &cfg.m, None)?;
        let tv: Vec<f64> = rows.iter().map(|r| r.tv_bound).collect();
        out.verdicts.push(Verdict::new(
            format!("monotone n={n}"),
            tv.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15),
            format!("bounds [{}]", tv.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")),
        ));
        out.verdicts.push(Verdict::new(
            format!("tv <= trace n={n}"),
            rows.iter().all(|r| r.tv_bound <= r.trace_bound * (1.0 + 1e-9) + 1e-15),
            "Frobenius bound against the trace bound".to_string(),
        ));
        // Lags past the support or past n - 1 leave the Toeplitz matrix unchanged.
        let exact: Vec<&_> = rows.iter().filter(|r| r.m >= rho.support().min(n - 1)).collect();
        if !exact.is_empty() {
            out.verdicts.push(Verdict::new(
                format!("exact truncation n={n}"),
                exact.iter().all(|r| r.tv_bound == 0.0),
                format!("bound is zero for m >= {}", rho.support().min(n - 1)),
            ));
        }
        for r in &rows {
            out.results.push(json!({ "n": n, "row": r }));
            table.push(vec![
                n.to_string(),
                r.m.to_string(),
                fmt_f64(r.tv_bound),
                fmt_f64(r.trace_bound),
                fmt_f64(r.kappa),
                r.valid.to_string(),
            ]);
            plot.push(vec![r.m.to_string(), fmt_f64(r.tv_bound), fmt_f64(0.0)]);
        }
    }
    out.tables.push(table);
    out.tables.push(plot);
    Ok(out)
}

fn run_spectral(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid.unwrap_or(DEFAULT_GRID);
    let mut out = Outcome::new();
    let (latent, functional) = match (&cfg.covariance, &cfg.model) {
        (Some(c), _) => (c.build()?, None),
        (None, Some(m)) => match m.build()? {
            CoefficientModel::GaussianFunctional { covariance, functional } => (covariance, Some(functional)),
            other => (other.covariance()?, None),
        },
        (None, None) => return Err(config_err("covariance", "missing covariance")),
    };
    let psi_g = density_from_finite_covariance(&latent, grid)?;
    let psi = match &functional {
        Some(f) => {
            let exp = hermite_coefficients(f, DEFAULT_HERMITE_ORDER)?;
            if exp.coarse {
                out.warnings.push(format!("Hermite residual {:.3e} above 0.05", exp.residual));
            }
            let mut hermite = Table::new("hermite", &["q", "c_q", "weight"]);
            for (q, c, w) in exp.rows() {
                hermite.push(vec![q.to_string(), fmt_f64(c), fmt_f64(w)]);
            }
            out.tables.push(hermite);
            out.results.push(json!({ "hermite": exp }));
            functional_density(&exp, &psi_g)?
        }
        None => psi_g,
    };
    out.verdicts.push(Verdict::new(
        "density is a covariance",
        psi.validate().is_ok(),
        format!("grid minimum {:.3e}, mass {:.12}", psi.grid_min(), psi.mass()),
    ));
    out.results.push(json!({
        "grid": grid,
        "kappa": psi.kappa(),
        "mass": psi.mass(),
        "grid_min": psi.grid_min(),
        "asymmetry": psi.asymmetry(),
    }));
    let mut table = Table::new("density", &["x", "psi"]);
    let mut plot = Table::plot("density");
    for (x, v) in psi.table() {
        table.push(vec![fmt_f64(x), fmt_f64(v)]);
        plot.push(vec![fmt_f64(x), fmt_f64(v), fmt_f64(0.0)]);
    }
    out.tables.push(table);
    out.tables.push(plot);
    Ok(out)
}

fn run_sinc_oracle(cfg: &ExperimentConfig) -> Result<Outcome> {
    let reps = cfg.reps();
    let tol = cfg.tolerances;
    let epsilon = cfg.epsilon.unwrap_or(DEFAULT_TAIL_EPSILON);
    let sampler = SincSampler::native()?;
    let start = Instant::now();
    let counts = sinc_zero_counts(&sampler, reps, cfg.seed)?;
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let e = MCEstimate::from_samples(&values, cfg.seed, start.elapsed().as_secs_f64())?;
    let tail = tail_moment_of_counts(&counts, epsilon, cfg.seed)?;
    let limit = universal_limit();
    let z = e.z_score(limit);
    let mut out = Outcome::new();
    out.verdicts.push(Verdict::new(
        "sinc intensity",
        z <= tol.se_multiple,
        format!("mean {:.6} vs {limit:.6}, z = {z:.2} (limit {})", e.mean, tol.se_multiple),
    ));
    out.results.push(json!({
        "estimate": estimate_json(&e),
        "tail_moment": estimate_json(&tail),
        "epsilon": epsilon,
        "universal": limit,
        "rank": sampler.rank(),
        "streams": streams(cfg.seed, Engine::Sinc, 0, reps),
    }));
    let mut table = Table::new("sinc_oracle", &["statistic", "mean", "stderr"]);
    table.push(vec!["intensity".into(), fmt_f64(e.mean), fmt_f64(e.stderr)]);
    table.push(vec!["tail_moment".into(), fmt_f64(tail.mean), fmt_f64(tail.stderr)]);
    let mut hist = Table::new("sinc_counts", &["count", "frequency"]);
    let max = counts.iter().copied().max().unwrap_or(0);
    for c in 0..=max {
        let k = counts.iter().filter(|&&v| v == c).count();
        hist.push(vec![c.to_string(), fmt_f64(k as f64 / reps as f64)]);
    }
    let mut plot = Table::plot("sinc_counts");
    for row in &hist.rows {
        plot.push(vec![row[0].clone(), row[1].clone(), fmt_f64(0.0)]);
    }
    out.tables.extend([table, hist, plot]);
    Ok(out)
}

/// Zero count of `cos(k t)` on `[0, 2 pi]`, a quick health check of the zero counter.
pub fn self_check(k: usize) -> Result<bool> {
    let f = (|t: f64| (k as f64 * t).cos(), k.max(1));
    Ok(count_zeros(&f, 0.0, TAU, DEFAULT_OVERSAMPLE, None)?.count == 2 * k)
}
