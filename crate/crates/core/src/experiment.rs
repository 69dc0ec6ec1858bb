//! Seeded parameter sweeps comparing the recovery pipeline with baselines.
//!
//! Every (point, trial) pair gets its own derived seed and results are
//! merged in (point, trial) order, so output does not depend on thread
//! scheduling.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{loopy_bp, majority_vote, BpOptions};
use crate::datagen::{
    apply_noise, derive_seed, gen_random_tree, load_pgm, mosaic_image, quantize_image, rng_from_seed, GrayImage,
    NoiseParams, RNG_ALGORITHM,
};
use crate::decomposition::{decompose, Heuristic, TreeDecomposition};
use crate::error::{Error, Result};
use crate::global::{recover_graph_with, RecoveryOptions};
use crate::graph::{hamming, EdgeSigns, LabeledGraph, NodeLabeling};
use crate::local::{LocalMethod, LocalOptions, Matcher};
use crate::tree_solver::{edge_budget, solve_tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SweepK,
    SweepP,
    Single,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SweepK => "sweep-k",
            ExperimentKind::SweepP => "sweep-p",
            ExperimentKind::Single => "single",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ours,
    Majority,
    Lbp,
    CopyZ,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Majority => "majority",
            Method::Lbp => "lbp",
            Method::CopyZ => "copy-z",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceSource {
    /// Random trees; each trial draws `n` uniformly from `[n_min, n_max]`.
    RandomTree { n_min: usize, n_max: usize },
    /// 4-neighbor grid quantized from a PGM image, or from a fresh random
    /// mosaic per trial when no image is given.
    Grid {
        #[serde(default)]
        pgm: Option<PathBuf>,
        #[serde(default)]
        rows: usize,
        #[serde(default)]
        cols: usize,
        #[serde(default = "default_cells")]
        cells: usize,
    },
}

fn default_cells() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub matcher: Matcher,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub use_p_prime: bool,
    #[serde(default)]
    pub heuristic: Heuristic,
}

fn default_restarts() -> usize {
    LocalOptions::default().restarts
}

fn default_delta() -> f64 {
    0.1
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            matcher: Matcher::default(),
            restarts: default_restarts(),
            delta: default_delta(),
            use_p_prime: false,
            heuristic: Heuristic::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub resamples: usize,
    /// Two-sided confidence level.
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { resamples: 1000, level: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub source: InstanceSource,
    pub k: Vec<u32>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub trials: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub bp: BpOptions,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub base_seed: u64,
    /// Fill the `millis` column. Off by default because timings break
    /// byte-for-byte reproducibility.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub trials_csv: Option<PathBuf>,
    #[serde(default)]
    pub summary_csv: Option<PathBuf>,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Ours, Method::Majority, Method::CopyZ]
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k.is_empty() || self.p.is_empty() || self.q.is_empty() {
            return config_err("k, p and q ranges must be nonempty");
        }
        if self.trials == 0 {
            return config_err("trials must be at least 1");
        }
        if self.methods.is_empty() {
            return config_err("at least one method is required");
        }
        let fixed = |name: &str, len: usize| {
            if len == 1 {
                Ok(())
            } else {
                config_err(format!("{} holds {name} fixed, got {len} values", self.experiment.name()))
            }
        };
        match self.experiment {
            ExperimentKind::SweepK => {
                fixed("p", self.p.len())?;
                fixed("q", self.q.len())?;
            }
            ExperimentKind::SweepP => {
                fixed("k", self.k.len())?;
                fixed("q", self.q.len())?;
            }
            ExperimentKind::Single => {
                fixed("k", self.k.len())?;
                fixed("p", self.p.len())?;
                fixed("q", self.q.len())?;
            }
        }
        for &k in &self.k {
            if !(2..=256).contains(&k) {
                return config_err(format!("k = {k} must lie in [2, 256]"));
            }
        }
        for &p in &self.p {
            if !(0.0..0.5).contains(&p) {
                return config_err(format!("p = {p} must lie in [0, 0.5)"));
            }
        }
        for &q in &self.q {
            if !(0.0..0.5).contains(&q) {
                return config_err(format!("q = {q} must lie in [0, 0.5)"));
            }
        }
        if !(self.solver.delta > 0.0 && self.solver.delta < 1.0) {
            return config_err("delta must lie in (0, 1)");
        }
        if self.bootstrap.resamples == 0 || !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
            return config_err("bootstrap needs resamples >= 1 and level in (0, 1)");
        }
        match &self.source {
            InstanceSource::RandomTree { n_min, n_max } => {
                if n_min > n_max {
                    return config_err("n_min exceeds n_max");
                }
                let k_max = *self.k.iter().max().expect("nonempty") as usize;
                if *n_min < k_max {
                    return config_err(format!("n_min = {n_min} cannot cover k = {k_max} labels"));
                }
            }
            InstanceSource::Grid { pgm: None, rows, cols, cells } => {
                if *rows == 0 || *cols == 0 || *cells == 0 {
                    return config_err("grid source needs rows, cols and cells >= 1, or a pgm path");
                }
            }
            InstanceSource::Grid { pgm: Some(_), .. } => {}
        }
        Ok(())
    }

    /// Grid points in sweep order: k outermost, then p, then q.
    pub fn points(&self) -> Vec<(u32, f64, f64)> {
        let mut out = Vec::with_capacity(self.k.len() * self.p.len() * self.q.len());
        for &k in &self.k {
            for &p in &self.p {
                for &q in &self.q {
                    out.push((k, p, q));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: String,
    pub k: u32,
    pub p: f64,
    pub q: f64,
    pub n: usize,
    pub seed: u64,
    pub method: String,
    pub hamming: usize,
    pub normalized: f64,
    pub millis: Option<f64>,
    #[serde(rename = "K_n")]
    pub k_n: Option<f64>,
    /// Global decoder budget on grids; the edge budget `t` on trees.
    #[serde(rename = "L_n")]
    pub l_n: Option<f64>,
    /// `|`-separated markers: `mincut-proxy`, `local-search`, `infeasible`.
    pub heuristic_flags: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub k: u32,
    pub p: f64,
    pub q: f64,
    pub method: String,
    pub trials: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Per-trial instance: graph, truth and (for grids) a shared decomposition.
struct Instance<'a> {
    graph: LabeledGraph,
    truth: NodeLabeling,
    td: Option<&'a TreeDecomposition>,
}

/// Grid structure shared by all trials: the graph and its decomposition
/// depend only on the image dimensions.
struct GridCache {
    image: Option<GrayImage>,
    rows: usize,
    cols: usize,
    td: TreeDecomposition,
}

fn build_grid_cache(cfg: &ExperimentConfig) -> Result<Option<GridCache>> {
    let InstanceSource::Grid { pgm, rows, cols, .. } = &cfg.source else {
        return Ok(None);
    };
    let image = pgm.as_ref().map(load_pgm).transpose()?;
    let (rows, cols) = image.as_ref().map_or((*rows, *cols), |im| (im.height, im.width));
    let graph = LabeledGraph::grid(rows, cols)?;
    let td = decompose(&graph, cfg.solver.heuristic)?;
    Ok(Some(GridCache { image, rows, cols, td }))
}

fn make_instance<'a>(cfg: &ExperimentConfig, cache: Option<&'a GridCache>, k: u32, seed: u64) -> Result<Instance<'a>> {
    let inst_seed = derive_seed(seed, 0);
    match (&cfg.source, cache) {
        (InstanceSource::RandomTree { n_min, n_max }, _) => {
            let n = rng_from_seed(inst_seed).gen_range(*n_min..=*n_max);
            let (graph, truth) = gen_random_tree(n, k, derive_seed(inst_seed, 1))?;
            Ok(Instance { graph, truth, td: None })
        }
        (InstanceSource::Grid { cells, .. }, Some(cache)) => {
            let image = match &cache.image {
                Some(im) => im.clone(),
                None => mosaic_image(cache.rows, cache.cols, *cells, inst_seed)?,
            };
            let grid = quantize_image(&image, k)?;
            Ok(Instance { graph: grid.graph, truth: grid.truth, td: Some(&cache.td) })
        }
        (InstanceSource::Grid { .. }, None) => unreachable!("grid cache built for grid sources"),
    }
}

struct Outcome {
    labels: NodeLabeling,
    k_n: Option<f64>,
    l_n: Option<f64>,
    flags: Vec<&'static str>,
}

#[allow(clippy::too_many_arguments)]
fn run_method(
    cfg: &ExperimentConfig,
    method: Method,
    inst: &Instance,
    x: &EdgeSigns,
    z: &NodeLabeling,
    k: u32,
    p: f64,
    q: f64,
    seed: u64,
) -> Result<Outcome> {
    let plain = |labels| Outcome { labels, k_n: None, l_n: None, flags: Vec::new() };
    match method {
        Method::CopyZ => Ok(plain(z.clone())),
        Method::Majority => Ok(plain(majority_vote(&inst.graph, x, z, k)?)),
        Method::Lbp => Ok(plain(loopy_bp(&inst.graph, x, z, p, q, k, &cfg.bp)?)),
        Method::Ours => match inst.td {
            None => {
                let budget = edge_budget(inst.graph.n(), p, cfg.solver.delta)?;
                let sol = solve_tree(&inst.graph, x, z, k, budget.effective_budget)?;
                Ok(Outcome { labels: sol.labels, k_n: None, l_n: Some(budget.t), flags: Vec::new() })
            }
            Some(td) => {
                let opts = RecoveryOptions {
                    heuristic: cfg.solver.heuristic,
                    local: LocalOptions { matcher: cfg.solver.matcher, restarts: cfg.solver.restarts, seed },
                    delta: cfg.solver.delta,
                    p: Some(p),
                    use_p_prime: cfg.solver.use_p_prime,
                };
                let rep = recover_graph_with(&inst.graph, td, x, z, k, &opts, None)?;
                let mut flags = Vec::new();
                let budget = rep.budget.as_ref();
                if budget.is_some_and(|b| b.heuristic) {
                    flags.push("mincut-proxy");
                }
                if rep.per_bag.iter().any(|b| b.method == LocalMethod::LocalSearch) {
                    flags.push("local-search");
                }
                if rep.infeasible {
                    flags.push("infeasible");
                }
                Ok(Outcome { labels: rep.labels, k_n: budget.map(|b| b.k_n), l_n: budget.map(|b| b.l_n), flags })
            }
        },
    }
}

fn run_trial(
    cfg: &ExperimentConfig,
    cache: Option<&GridCache>,
    point: (u32, f64, f64),
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let (k, p, q) = point;
    let inst = make_instance(cfg, cache, k, seed)?;
    let params = NoiseParams::new(p, q, k, derive_seed(seed, 2))?;
    let (z, x) = apply_noise(&inst.graph, &inst.truth, &params)?;
    let mut methods: Vec<Method> = cfg.methods.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    methods.sort();
    methods
        .into_iter()
        .map(|method| {
            let start = Instant::now();
            let out = run_method(cfg, method, &inst, &x, &z, k, p, q, derive_seed(seed, 3))?;
            let millis = start.elapsed().as_secs_f64() * 1e3;
            let h = hamming(&out.labels, &inst.truth)?;
            Ok(TrialRecord {
                experiment: cfg.experiment.name().to_string(),
                k,
                p,
                q,
                n: inst.graph.n(),
                seed,
                method: method.name().to_string(),
                hamming: h,
                normalized: h as f64 / inst.graph.n() as f64,
                millis: cfg.record_timing.then_some(millis),
                k_n: out.k_n,
                l_n: out.l_n,
                heuristic_flags: out.flags.join("|"),
            })
        })
        .collect()
}

/// Seed of trial `t` at grid point `i`.
pub fn trial_seed(base: u64, point: usize, trial: usize) -> u64 {
    derive_seed(derive_seed(base, point as u64), trial as u64)
}

/// Runs every trial of every point; records come back in (point, trial,
/// method) order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let cache = build_grid_cache(cfg)?;
    let points = cfg.points();
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..cfg.trials).map(move |t| (i, t))).collect();
    let nested: Vec<Vec<TrialRecord>> = jobs
        .par_iter()
        .map(|&(i, t)| run_trial(cfg, cache.as_ref(), points[i], trial_seed(cfg.base_seed, i, t)))
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Percentile bootstrap interval for `Σ_j coefs[j] · mean(samples[j])`,
/// resampling each sample independently.
pub fn bootstrap_linear_ci(samples: &[&[f64]], coefs: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    assert_eq!(samples.len(), coefs.len());
    assert!(samples.iter().all(|s| !s.is_empty()), "bootstrap needs nonempty samples");
    let mut rng = rng_from_seed(seed);
    let mut stats: Vec<f64> = (0..resamples.max(1))
        .map(|_| {
            samples
                .iter()
                .zip(coefs)
                .map(|(s, c)| {
                    let total: f64 = (0..s.len()).map(|_| s[rng.gen_range(0..s.len())]).sum();
                    c * total / s.len() as f64
                })
                .sum()
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let idx = |f: f64| ((f * (stats.len() - 1) as f64).round() as usize).min(stats.len() - 1);
    (stats[idx(alpha)], stats[idx(1.0 - alpha)])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Normalized errors of one method at one point, in trial order.
pub fn errors_at(records: &[TrialRecord], k: u32, p: f64, q: f64, method: Method) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.k == k && r.p == p && r.q == q && r.method == method.name())
        .map(|r| r.normalized)
        .collect()
}

/// Mean and bootstrap interval per (point, method), computed from the
/// per-trial records alone.
pub fn summarize(records: &[TrialRecord], boot: &BootstrapConfig, base_seed: u64) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, u32, f64, f64, String)> = Vec::new();
    for r in records {
        let key = (r.experiment.clone(), r.k, r.p, r.q, r.method.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .enumerate()
        .map(|(i, (experiment, k, p, q, method))| {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.experiment == experiment && r.k == k && r.p == p && r.q == q && r.method == method)
                .map(|r| r.normalized)
                .collect();
            let (ci_low, ci_high) = bootstrap_linear_ci(
                &[&vals],
                &[1.0],
                boot.resamples,
                boot.level,
                derive_seed(base_seed ^ 0xb007, i as u64),
            );
            SummaryRow { experiment, k, p, q, method, trials: vals.len(), mean: mean(&vals), ci_low, ci_high }
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn trials_to_csv(records: &[TrialRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_trials_csv(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    pub rng: &'static str,
}

/// Runs the sweep and writes the CSVs named in the config.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let records = run_trials(cfg)?;
    let summary = summarize(&records, &cfg.bootstrap, cfg.base_seed);
    if let Some(path) = &cfg.trials_csv {
        write_csv(&records, std::fs::File::create(path)?)?;
    }
    if let Some(path) = &cfg.summary_csv {
        write_csv(&summary, std::fs::File::create(path)?)?;
    }
    Ok(SweepOutput { records, summary, rng: RNG_ALGORITHM })
}
