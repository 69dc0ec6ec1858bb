use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use catrec::baselines::{loopy_bp, majority_vote, BpOptions};
use catrec::bounds::{graph_bound, threshold_report, tree_bound, TrustScores};
use catrec::datagen::{
    apply_noise, gen_random_tree, load_pgm, mosaic_image, quantize_image, GrayImage, NoiseParams, RNG_ALGORITHM,
};
use catrec::decomposition::{decompose, Heuristic};
use catrec::error::{Error, Result};
use catrec::experiment::{run_sweep, ExperimentConfig, ExperimentKind};
use catrec::global::{recover_graph, RecoveryOptions};
use catrec::graph::{hamming, normalized_hamming, EdgeSigns, LabeledGraph, NodeLabeling};
use catrec::io::{
    format_graph, format_labels, format_noise, format_signs, parse_graph, parse_labels, parse_signs, read_to_string,
    GraphFile,
};
use catrec::local::{LocalOptions, Matcher};
use catrec::tree_solver::{edge_budget, solve_tree};

#[derive(Parser)]
#[command(name = "catrec", version, about = "Recover categorical node labels from noisy node and edge observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random labeled tree plus noisy observations.
    SimulateTree(SimulateTree),
    /// Quantized image grid plus noisy observations.
    SimulateGrid(SimulateGrid),
    /// Exact budgeted solver on a tree.
    RecoverTree(RecoverTree),
    /// Decomposition pipeline on a general connected graph.
    RecoverGraph(RecoverGraph),
    /// Reference methods.
    Baseline(Baseline),
    /// Analytical bounds as JSON.
    Bounds(Bounds),
    /// Seeded parameter sweeps.
    Experiment(Experiment),
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix: writes PREFIX.graph, PREFIX.signs, PREFIX.observed and PREFIX.noise.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateTree {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Args)]
struct SimulateGrid {
    /// Source image; a random mosaic is drawn when absent.
    #[arg(long)]
    pgm: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    rows: usize,
    #[arg(long, default_value_t = 16)]
    cols: usize,
    #[arg(long, default_value_t = 6)]
    cells: usize,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Args)]
struct Observations {
    /// Graph file, optionally with ground-truth labels.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    signs: PathBuf,
    #[arg(long)]
    observed: PathBuf,
    #[arg(long)]
    k: u32,
    /// Write labels here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverTree {
    #[command(flatten)]
    obs: Observations,
    /// Explicit disagreement budget.
    #[arg(long, conflicts_with = "p")]
    budget: Option<usize>,
    /// Edge noise used to derive the budget.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
}

#[derive(Args)]
struct RecoverGraph {
    #[command(flatten)]
    obs: Observations,
    /// Edge noise used for the global budget; unconstrained when absent.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value = "greedy")]
    matcher: String,
    #[arg(long, default_value_t = 4)]
    cc_restarts: usize,
    #[arg(long)]
    use_p_prime: bool,
    #[arg(long, default_value = "min-fill")]
    heuristic: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Majority,
    Lbp,
}

#[derive(Args)]
struct Baseline {
    #[arg(value_enum)]
    method: BaselineKind,
    #[command(flatten)]
    obs: Observations,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundMode {
    Tree,
    Graph,
    Threshold,
    Trust,
}

#[derive(Args)]
struct Bounds {
    #[arg(long, value_enum)]
    mode: BoundMode,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: u32,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Graph file for `graph` mode, or for sign counts and maximum degree.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Sign file used to count positive and negative edges in `trust` mode.
    #[arg(long)]
    signs: Option<PathBuf>,
    #[arg(long)]
    max_degree: Option<usize>,
    #[arg(long)]
    count_pos: Option<usize>,
    #[arg(long)]
    count_neg: Option<usize>,
    #[arg(long, default_value = "min-fill")]
    heuristic: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    SweepK,
    SweepP,
}

#[derive(Args)]
struct Experiment {
    #[arg(value_enum)]
    kind: SweepKind,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trials_csv: Option<PathBuf>,
    #[arg(long)]
    summary_csv: Option<PathBuf>,
    #[arg(long)]
    base_seed: Option<u64>,
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_instance(out: &Path, g: &LabeledGraph, y: &NodeLabeling, params: &NoiseParams) -> Result<Value> {
    let (z, x) = apply_noise(g, y, params)?;
    let files = [
        ("graph", format_graph(g, params.k, Some(y))),
        ("signs", format_signs(&x)),
        ("observed", format_labels(&z)),
        ("noise", format_noise(params)),
    ];
    let mut written = serde_json::Map::new();
    for (ext, text) in files {
        let path = with_suffix(out, ext);
        std::fs::write(&path, text)?;
        written.insert(ext.into(), json!(path));
    }
    Ok(json!({
        "n": g.n(),
        "m": g.m(),
        "k": params.k,
        "rng": RNG_ALGORITHM,
        "copy_z_normalized": normalized_hamming(&z, y)?,
        "files": written,
    }))
}

fn noise_params(a: &NoiseArgs) -> Result<NoiseParams> {
    NoiseParams::new(a.p, a.q, a.k, a.seed)
}

fn simulate_tree(a: &SimulateTree) -> Result<Value> {
    let params = noise_params(&a.noise)?;
    let (g, y) = gen_random_tree(a.n, a.noise.k, a.noise.seed)?;
    write_instance(&a.noise.out, &g, &y, &params)
}

fn simulate_grid(a: &SimulateGrid) -> Result<Value> {
    let params = noise_params(&a.noise)?;
    let image: GrayImage = match &a.pgm {
        Some(p) => load_pgm(p)?,
        None => mosaic_image(a.rows, a.cols, a.cells, a.noise.seed)?,
    };
    let grid = quantize_image(&image, a.noise.k)?;
    let quantized = GrayImage {
        width: grid.cols,
        height: grid.rows,
        pixels: grid.truth.labels().iter().map(|&l| grid.bin_medians[l as usize]).collect(),
    };
    std::fs::write(with_suffix(&a.noise.out, "pgm"), quantized.to_pgm())?;
    let mut stats = write_instance(&a.noise.out, &grid.graph, &grid.truth, &params)?;
    stats["rows"] = json!(grid.rows);
    stats["cols"] = json!(grid.cols);
    stats["bin_medians"] = json!(grid.bin_medians);
    Ok(stats)
}

struct Loaded {
    file: GraphFile,
    x: EdgeSigns,
    z: NodeLabeling,
}

fn load(obs: &Observations) -> Result<Loaded> {
    let file = parse_graph(&read_to_string(&obs.graph)?)?;
    if file.k != obs.k {
        return Err(Error::Input(format!("graph file declares k = {}, got --k {}", file.k, obs.k)));
    }
    let x = parse_signs(&read_to_string(&obs.signs)?)?;
    let z = parse_labels(&read_to_string(&obs.observed)?, obs.k)?;
    x.check_len(file.graph.m())?;
    z.check_len(file.graph.n())?;
    Ok(Loaded { file, x, z })
}

/// Prints or writes labels and returns truth-based metrics when available.
fn emit_labels(obs: &Observations, loaded: &Loaded, labels: &NodeLabeling, stats: &mut Value) -> Result<()> {
    match &obs.output {
        Some(path) => std::fs::write(path, format_labels(labels))?,
        None => print!("{}", format_labels(labels)),
    }
    if let Some(y) = &loaded.file.truth {
        stats["hamming"] = json!(hamming(labels, y)?);
        stats["normalized"] = json!(normalized_hamming(labels, y)?);
    }
    Ok(())
}

fn recover_tree_cmd(a: &RecoverTree) -> Result<Value> {
    let loaded = load(&a.obs)?;
    let start = Instant::now();
    let budget = match (a.budget, a.p) {
        (Some(b), _) => b,
        (None, Some(p)) => edge_budget(loaded.file.graph.n(), p, a.delta)?.effective_budget,
        (None, None) => return Err(Error::Config("recover-tree needs --budget or --p".into())),
    };
    let sol = solve_tree(&loaded.file.graph, &loaded.x, &loaded.z, a.obs.k, budget)?;
    let mut stats = json!({
        "objective": sol.objective,
        "violations": sol.violations,
        "budget": sol.budget,
        "millis": start.elapsed().as_secs_f64() * 1e3,
    });
    emit_labels(&a.obs, &loaded, &sol.labels, &mut stats)?;
    Ok(stats)
}

fn recover_graph_cmd(a: &RecoverGraph) -> Result<Value> {
    let loaded = load(&a.obs)?;
    let opts = RecoveryOptions {
        heuristic: a.heuristic.parse()?,
        local: LocalOptions { matcher: a.matcher.parse::<Matcher>()?, restarts: a.cc_restarts, seed: a.seed },
        delta: a.delta,
        p: a.p,
        use_p_prime: a.use_p_prime,
    };
    let rep = recover_graph(&loaded.file.graph, &loaded.x, &loaded.z, a.obs.k, &opts, None)?;
    let mut stats = json!({
        "K_n": rep.budget.as_ref().map(|b| b.k_n),
        "L_n": rep.budget.as_ref().map(|b| b.l_n),
        "budget": rep.budget,
        "swap_budget": rep.swap_budget,
        "swap_objective": rep.swap_objective,
        "swap_violations": rep.swap_violations,
        "fast_path": rep.fast_path,
        "infeasible": rep.infeasible,
        "bags": rep.bags,
        "wid": rep.wid,
        "wid_star": rep.wid_star,
        "deg_T": rep.deg_t,
        "per_bag": rep.per_bag,
        "millis": rep.millis,
    });
    emit_labels(&a.obs, &loaded, &rep.labels, &mut stats)?;
    Ok(stats)
}

fn baseline_cmd(a: &Baseline) -> Result<Value> {
    let loaded = load(&a.obs)?;
    let start = Instant::now();
    let (g, x, z, k) = (&loaded.file.graph, &loaded.x, &loaded.z, a.obs.k);
    let labels = match a.method {
        BaselineKind::Majority => majority_vote(g, x, z, k)?,
        BaselineKind::Lbp => {
            let (Some(p), Some(q)) = (a.p, a.q) else {
                return Err(Error::Config("lbp needs --p and --q".into()));
            };
            let opts = BpOptions { max_iters: a.max_iters, damping: a.damping, tolerance: a.tolerance };
            loopy_bp(g, x, z, p, q, k, &opts)?
        }
    };
    let mut stats = json!({ "millis": start.elapsed().as_secs_f64() * 1e3 });
    emit_labels(&a.obs, &loaded, &labels, &mut stats)?;
    Ok(stats)
}

fn need<T>(v: Option<T>, flag: &str, mode: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("--mode {mode} needs --{flag}")))
}

fn bounds_cmd(a: &Bounds) -> Result<Value> {
    let graph = a.graph.as_ref().map(|p| read_to_string(p).and_then(|t| parse_graph(&t))).transpose()?;
    let value = match a.mode {
        BoundMode::Tree => {
            let n = match (a.n, &graph) {
                (Some(n), _) => n,
                (None, Some(f)) => f.graph.n(),
                (None, None) => return Err(Error::Config("--mode tree needs --n or --graph".into())),
            };
            serde_json::to_value(tree_bound(n, a.k, need(a.p, "p", "tree")?, a.q, a.delta)?)
        }
        BoundMode::Graph => {
            let f = need(graph.as_ref(), "graph", "graph")?;
            let h: Heuristic = a.heuristic.parse()?;
            let td = decompose(&f.graph, h)?;
            serde_json::to_value(graph_bound(&td, f.graph.n(), a.k, need(a.p, "p", "graph")?, a.q, a.delta)?)
        }
        BoundMode::Threshold => {
            let d = match (a.max_degree, &graph) {
                (Some(d), _) => d,
                (None, Some(f)) => f.graph.max_degree(),
                (None, None) => return Err(Error::Config("--mode threshold needs --max-degree or --graph".into())),
            };
            serde_json::to_value(threshold_report(a.q, a.k, d)?)
        }
        BoundMode::Trust => {
            let (pos, neg) = match (a.count_pos, a.count_neg, &a.signs) {
                (Some(pos), Some(neg), _) => (pos, neg),
                (_, _, Some(path)) => {
                    let x = parse_signs(&read_to_string(path)?)?;
                    let pos = x.signs().iter().filter(|&&s| s > 0).count();
                    (pos, x.len() - pos)
                }
                _ => return Err(Error::Config("--mode trust needs --count-pos and --count-neg, or --signs".into())),
            };
            serde_json::to_value(TrustScores::new(need(a.p, "p", "trust")?, a.q, a.k, pos, neg)?)
        }
    };
    value.map_err(|e| Error::Input(e.to_string()))
}

fn experiment_cmd(a: &Experiment) -> Result<Value> {
    let mut cfg = ExperimentConfig::from_json(&read_to_string(&a.config)?)?;
    let want = match a.kind {
        SweepKind::SweepK => ExperimentKind::SweepK,
        SweepKind::SweepP => ExperimentKind::SweepP,
    };
    if cfg.experiment != want {
        return Err(Error::Config(format!("config describes {}, not {}", cfg.experiment.name(), want.name())));
    }
    if a.trials_csv.is_some() {
        cfg.trials_csv.clone_from(&a.trials_csv);
    }
    if a.summary_csv.is_some() {
        cfg.summary_csv.clone_from(&a.summary_csv);
    }
    if let Some(seed) = a.base_seed {
        cfg.base_seed = seed;
    }
    let out = run_sweep(&cfg)?;
    Ok(json!({
        "experiment": cfg.experiment.name(),
        "rng": out.rng,
        "base_seed": cfg.base_seed,
        "records": out.records.len(),
        "summary": out.summary,
    }))
}

fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::SimulateTree(a) => simulate_tree(a),
        Command::SimulateGrid(a) => simulate_grid(a),
        Command::RecoverTree(a) => recover_tree_cmd(a),
        Command::RecoverGraph(a) => recover_graph_cmd(a),
        Command::Baseline(a) => baseline_cmd(a),
        Command::Bounds(a) => bounds_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(stats) => {
            println!("{stats}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
