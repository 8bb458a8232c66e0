//! Replicated estimation experiments, `L_∞` validation runs and boxplot
//! summaries.
//!
//! Configuration files are flat TOML (`key = value`); see [`ExperimentConfig`]
//! for the keys and defaults. All output CSVs are comma separated with a
//! header row and `\n` line endings, and depend only on the configuration
//! (wall times are left empty unless `record_timing` is set).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::sample_environment;
use crate::error::{Error, Result};
use crate::estimators::{estimate, Method};
use crate::infinite_valley::{l_infinity, l_infinity_closed, sample_valleys, LimitValue, McSummary};
use crate::model::{family_to_theta, FamilyKind, ModelFamily, ThetaParams};
use crate::optimize::{DEFAULT_RESTARTS, DEFAULT_TOL};
use crate::rng::{stream_id, substream, TAG_ENVIRONMENT, TAG_WALK};
use crate::walk::Walker;

/// Candidate supports for `limit` runs: one number per candidate for the
/// one-parameter families, or one list per candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Candidates {
    Scalars(Vec<f64>),
    Vectors(Vec<Vec<f64>>),
}

impl Candidates {
    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        match self {
            Candidates::Scalars(v) => v.iter().map(|&a| vec![a]).collect(),
            Candidates::Vectors(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `temkin`, `two-point` or `lazy-temkin`.
    pub family: String,
    /// True free parameters of the family.
    pub truth: Vec<f64>,
    /// Horizons at which every estimator is evaluated, increasing.
    pub n_grid: Vec<u64>,
    pub replicates: u64,
    pub seed: u64,
    /// Subset of `MLE`, `MPLE`, `AE`, `Naive`.
    pub estimators: Vec<String>,
    /// Environment window `{1, …, x_max}`.
    pub x_max: usize,
    /// Deep-site parameter for valley diagnostics.
    pub delta: f64,
    pub eps0: f64,
    pub tol: f64,
    pub restarts: usize,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    /// Fill the `wall_ms` column (makes the output machine dependent).
    pub record_timing: bool,
    pub output: Option<PathBuf>,
    /// Infinite-valley window radius `M`.
    pub window: usize,
    /// Extra steps over which the valley branches are conditioned.
    pub lookahead: usize,
    /// Infinite-valley samples per `limit` run.
    pub samples: usize,
    pub candidates: Candidates,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: "temkin".into(),
            truth: vec![0.3],
            n_grid: vec![10_000, 30_000, 100_000],
            replicates: 100,
            seed: 1,
            estimators: vec!["MPLE".into(), "MLE".into(), "AE".into()],
            x_max: crate::environment::DEFAULT_X_MAX,
            delta: 0.5,
            eps0: crate::model::DEFAULT_EPS0,
            tol: DEFAULT_TOL,
            restarts: DEFAULT_RESTARTS,
            workers: 0,
            record_timing: false,
            output: None,
            window: crate::infinite_valley::DEFAULT_WINDOW,
            lookahead: 0,
            samples: 2000,
            candidates: Candidates::Scalars(Vec::new()),
        }
    }
}

pub fn parse_family(name: &str) -> Result<FamilyKind> {
    match name.trim().to_ascii_lowercase().as_str() {
        "temkin" => Ok(FamilyKind::Temkin),
        "two-point" | "twopoint" | "two_point" => Ok(FamilyKind::TwoPoint),
        "lazy-temkin" | "lazy" | "lazy_temkin" => Ok(FamilyKind::LazyTemkin),
        other => Err(Error::Config(format!("unknown family {other:?}"))),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n_grid {:?} must be positive and strictly increasing", self.n_grid));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} outside (0,1)", self.delta));
        }
        if self.x_max == 0 || self.window < 10 || !(self.tol > 0.0) {
            return bad("x_max, window >= 10 and tol must be positive".into());
        }
        self.methods()?;
        self.theta()?;
        Ok(())
    }

    pub fn family(&self) -> Result<ModelFamily> {
        ModelFamily::new(parse_family(&self.family)?, self.eps0)
    }

    pub fn theta(&self) -> Result<ThetaParams> {
        family_to_theta(&self.family()?, &self.truth).map_err(|e| Error::Config(format!("truth: {e}")))
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        let mut m = self.estimators.iter().map(|s| Method::parse(s)).collect::<Result<Vec<_>>>()?;
        m.sort();
        m.dedup();
        Ok(m)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new().num_threads(self.workers).build().map_err(|e| Error::Config(format!("thread pool: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    NoSolution,
    Error,
}

/// One CSV row: one parameter of one estimator at one horizon of one
/// replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub replicate: u64,
    pub seed: u64,
    pub n: u64,
    pub family: String,
    pub estimator: String,
    pub parameter: String,
    pub truth: Option<f64>,
    pub estimate: Option<f64>,
    pub criterion: Option<f64>,
    pub status: Status,
    pub wall_ms: Option<f64>,
}

/// Parameter names each estimator reports for a family.
pub fn reported_params(method: Method, kind: FamilyKind) -> Vec<&'static str> {
    match (method, kind) {
        (Method::Ae, _) => vec!["a", "w"],
        (Method::Naive, FamilyKind::TwoPoint) => vec!["a1", "a2"],
        (Method::Naive, FamilyKind::LazyTemkin) | (Method::Mle, FamilyKind::LazyTemkin) => vec!["a", "r"],
        (Method::Naive, _) => vec!["a"],
        (_, FamilyKind::Temkin) => vec!["a", "p1", "p2"],
        (_, FamilyKind::TwoPoint) => vec!["a1", "a2", "p1", "p2"],
        (Method::Mple, FamilyKind::LazyTemkin) => vec!["a", "r", "p1", "p2", "p3"],
        (_, FamilyKind::GeneralRecurrent { .. }) => vec![],
    }
}

/// True value of a reported parameter.
pub fn true_value(name: &str, theta: &ThetaParams) -> Option<f64> {
    let idx = |s: &str| s.parse::<usize>().ok().filter(|&i| i >= 1 && i <= theta.d()).map(|i| i - 1);
    match name {
        "a" => Some(theta.a()[0]),
        "r" => (theta.d() == 3).then(|| theta.p()[1]),
        "w" => Some(theta.a()[0].powi(2) + (1.0 - theta.a()[0]).powi(2)),
        _ => {
            if let Some(i) = name.strip_prefix('a').and_then(idx) {
                Some(theta.a()[i])
            } else {
                name.strip_prefix('p').and_then(idx).map(|i| theta.p()[i])
            }
        }
    }
}

fn run_replicate(cfg: &ExperimentConfig, family: &ModelFamily, theta: &ThetaParams, methods: &[Method], r: u64) -> Vec<EstimateRecord> {
    let kind = family.kind();
    let mut rows = Vec::new();
    let mut push = |n: u64, method: Method, outcome: std::result::Result<&crate::estimators::Estimate, Status>, ms: Option<f64>| {
        for name in reported_params(method, kind) {
            let (estimate, criterion, status) = match outcome {
                Ok(e) => (e.param(name), Some(e.criterion_value), Status::Ok),
                Err(s) => (None, None, s),
            };
            rows.push(EstimateRecord {
                replicate: r,
                seed: cfg.seed,
                n,
                family: kind.name().into(),
                estimator: method.name().into(),
                parameter: name.into(),
                truth: true_value(name, theta),
                estimate,
                criterion,
                status,
                wall_ms: ms,
            });
        }
    };

    let env = sample_environment(theta, cfg.x_max, &mut substream(cfg.seed, stream_id(r, TAG_ENVIRONMENT)));
    let env = match env {
        Ok(e) => e,
        Err(_) => {
            for &n in &cfg.n_grid {
                methods.iter().for_each(|&m| push(n, m, Err(Status::Error), None));
            }
            return rows;
        }
    };
    let need_path = methods.contains(&Method::Ae);
    let mut walker = Walker::new(&env, substream(cfg.seed, stream_id(r, TAG_WALK)), need_path);
    let mut walk_ok = true;
    for &n in &cfg.n_grid {
        walk_ok = walk_ok && walker.advance_to(n).is_ok();
        if !walk_ok {
            methods.iter().for_each(|&m| push(n, m, Err(Status::Error), None));
            continue;
        }
        let stats = walker.stats();
        for &m in methods {
            let start = Instant::now();
            let res = estimate(m, &stats, walker.path(), family, cfg.tol, cfg.restarts);
            let ms = cfg.record_timing.then(|| start.elapsed().as_secs_f64() * 1e3);
            match res {
                Ok(e) => push(n, m, Ok(&e), ms),
                Err(Error::NoSolution { .. }) => push(n, m, Err(Status::NoSolution), ms),
                Err(_) => push(n, m, Err(Status::Error), ms),
            }
        }
    }
    rows
}

/// Runs every replicate (in parallel) and returns the rows sorted by
/// replicate, horizon, estimator and parameter order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<EstimateRecord>> {
    cfg.validate()?;
    let family = cfg.family()?;
    let theta = cfg.theta()?;
    let methods = cfg.methods()?;
    let blocks: Vec<Vec<EstimateRecord>> =
        cfg.pool()?.install(|| (0..cfg.replicates).into_par_iter().map(|r| run_replicate(cfg, &family, &theta, &methods, r)).collect());
    Ok(blocks.into_iter().flatten().collect())
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_records<W: Write>(records: &[EstimateRecord], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Unparseable CSV lines: 1-based line number and reason.
pub type Skipped = Vec<(u64, String)>;

/// Rows of an estimate CSV; malformed rows are returned separately with
/// their 1-based line number.
pub fn read_records<R: Read>(input: R) -> Result<(Vec<EstimateRecord>, Skipped)> {
    let mut rd = csv::Reader::from_reader(input);
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for (i, row) in rd.deserialize::<EstimateRecord>().enumerate() {
        match row {
            Ok(r) => good.push(r),
            Err(e) => bad.push((i as u64 + 2, e.to_string())),
        }
    }
    Ok((good, bad))
}

/// Sample quantile with linear interpolation between order statistics
/// ("type 7"). `sorted` must be sorted and nonempty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Five-number summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveNumbers {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumbers {
    pub fn of_sorted(x: &[f64]) -> Self {
        Self { min: x[0], q1: quantile(x, 0.25), median: quantile(x, 0.5), q3: quantile(x, 0.75), max: x[x.len() - 1] }
    }

    /// `[Q1 − 1.5 IQR, Q3 + 1.5 IQR]`.
    pub fn fences(&self) -> (f64, f64) {
        let iqr = self.q3 - self.q1;
        (self.q1 - 1.5 * iqr, self.q3 + 1.5 * iqr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: u64,
    pub estimator: String,
    pub parameter: String,
    pub trimmed: bool,
    /// All rows of the group, whatever their status.
    pub rows: usize,
    pub no_solution: usize,
    pub errors: usize,
    /// Estimates entering the statistics (after trimming when requested).
    pub count: usize,
    pub outliers: usize,
    pub outlier_fraction: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean_abs_error: Option<f64>,
    pub median_abs_error: Option<f64>,
}

/// Per `(n, estimator, parameter)` statistics; with `trim`, estimates
/// outside the 1.5·IQR fences are dropped before computing them.
pub fn summarize_records(records: &[EstimateRecord], trim: bool) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(u64, String, String), Vec<&EstimateRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.n, r.estimator.clone(), r.parameter.clone())).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((n, estimator, parameter), rows) in groups {
        let mut vals: Vec<(f64, Option<f64>)> = rows
            .iter()
            .filter(|r| r.status == Status::Ok)
            .filter_map(|r| r.estimate.filter(|v| v.is_finite()).map(|v| (v, r.truth)))
            .collect();
        if vals.is_empty() {
            continue;
        }
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let raw: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let (lo, hi) = FiveNumbers::of_sorted(&raw).fences();
        let inside = |v: f64| v >= lo && v <= hi;
        let outliers = raw.iter().filter(|&&v| !inside(v)).count();
        if trim {
            vals.retain(|v| inside(v.0));
        }
        let used: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let five = FiveNumbers::of_sorted(&used);
        let mut errs: Vec<f64> = vals.iter().filter_map(|&(v, t)| t.map(|t| (v - t).abs())).collect();
        errs.sort_by(f64::total_cmp);
        let (mae, med) =
            if errs.is_empty() { (None, None) } else { (Some(errs.iter().sum::<f64>() / errs.len() as f64), Some(quantile(&errs, 0.5))) };
        out.push(SummaryRow {
            n,
            estimator,
            parameter,
            trimmed: trim,
            rows: rows.len(),
            no_solution: rows.iter().filter(|r| r.status == Status::NoSolution).count(),
            errors: rows.iter().filter(|r| r.status == Status::Error).count(),
            count: used.len(),
            outliers,
            outlier_fraction: outliers as f64 / raw.len() as f64,
            min: five.min,
            q1: five.q1,
            median: five.median,
            q3: five.q3,
            max: five.max,
            mean_abs_error: mae,
            median_abs_error: med,
        });
    }
    out
}

/// Summary of an estimate CSV on disk, plus the malformed rows skipped.
pub fn summarize(path: &Path, trim: bool) -> Result<(Vec<SummaryRow>, Skipped)> {
    let (records, skipped) = read_records(std::fs::File::open(path)?)?;
    Ok((summarize_records(&records, trim), skipped))
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Closed form versus Monte Carlo for one candidate support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRow {
    /// Candidate free parameters joined by `;`.
    pub candidate: String,
    /// `deterministic` or `random`.
    pub closed_form: String,
    /// Deterministic value, or the prediction `intercept + slope · mean ν^{(1/2)}`.
    pub closed_value: f64,
    pub intercept: Option<f64>,
    pub slope: Option<f64>,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub mc_variance: f64,
    pub truncation_mean: f64,
    pub noise_floor: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    pub rows: Vec<LimitRow>,
    /// Per candidate, the `L_∞` value of every landscape sample.
    pub samples: Vec<Vec<f64>>,
    /// Monte Carlo summaries of the mass `ν^{(j)}` of each atom of `θ*`.
    pub atom_mass: Vec<McSummary>,
    pub truncation: McSummary,
    /// Mean of `truncation_mass_bound²`: the variance truncation alone can
    /// produce.
    pub noise_floor: f64,
    /// Accepted landscapes per branch attempt.
    pub acceptance_rate: f64,
}

/// `L_∞` validation: the same landscapes are used for every candidate.
pub fn limit_run(cfg: &ExperimentConfig) -> Result<LimitReport> {
    cfg.validate()?;
    let family = cfg.family()?;
    let theta = cfg.theta()?;
    if cfg.samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let valleys = cfg.pool()?.install(|| sample_valleys(&theta, cfg.window, cfg.lookahead, cfg.samples, cfg.seed))?;
    let tmb: Vec<f64> = valleys.iter().map(|s| s.truncation_mass_bound).collect();
    let truncation = McSummary::of(&tmb);
    let noise_floor = tmb.iter().map(|t| t * t).sum::<f64>() / tmb.len() as f64;
    let atom_mass = (0..theta.d()).map(|j| McSummary::of(&valleys.iter().map(|s| s.atom_mass(j)).collect::<Vec<_>>())).collect::<Vec<_>>();
    let attempts: u64 = valleys.iter().map(|s| s.attempts.0 + s.attempts.1).sum();

    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for cand in cfg.candidates.to_vecs() {
        if cand.len() != family.support_box().dim() {
            return Err(Error::Config(format!("candidate {cand:?} has the wrong dimension")));
        }
        let a = family.support_from(&cand);
        let xs = valleys.iter().map(|s| l_infinity(&a, s)).collect::<Result<Vec<_>>>()?;
        let mc = McSummary::of(&xs);
        let tolerance = (3.0 * mc.se).max(2.0 * truncation.mean);
        let (kind, value, intercept, slope, agree) = match l_infinity_closed(&family, &a, &theta)? {
            LimitValue::Deterministic(v) => {
                ("deterministic", v, None, None, (mc.mean - v).abs() <= tolerance && mc.variance <= noise_floor)
            }
            LimitValue::Random { intercept, slope } => {
                // ½ is the middle atom of the lazy family
                let pred = intercept + slope * atom_mass[1].mean;
                ("random", pred, Some(intercept), Some(slope), (mc.mean - pred).abs() <= tolerance && mc.variance > 10.0 * noise_floor)
            }
        };
        rows.push(LimitRow {
            candidate: cand.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
            closed_form: kind.into(),
            closed_value: value,
            intercept,
            slope,
            mc_mean: mc.mean,
            mc_se: mc.se,
            mc_variance: mc.variance,
            truncation_mean: truncation.mean,
            noise_floor,
            verdict: if agree { "agree" } else { "disagree" }.into(),
        });
        samples.push(xs);
    }
    Ok(LimitReport { rows, samples, atom_mass, truncation, noise_floor, acceptance_rate: 2.0 * valleys.len() as f64 / attempts as f64 })
}

pub fn write_limit_rows<W: Write>(rows: &[LimitRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `sample_id,L_inf` table of one candidate.
pub fn write_samples<W: Write>(xs: &[f64], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["sample_id", "L_inf"])?;
    for (i, x) in xs.iter().enumerate() {
        w.write_record([i.to_string(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
