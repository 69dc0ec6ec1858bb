//! Acceptance suite. Each criterion prints one PASS/FAIL line to stderr
//! (uncaptured) and then asserts the same condition.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use catrec::bounds::{channel_violation_probability, separation_by_enumeration, separation_constant, trust_case};
use catrec::datagen::{
    apply_noise, gen_random_connected, gen_random_tree, mosaic_image, quantize_image, random_labeling, rng_from_seed,
    NoiseParams,
};
use catrec::decomposition::{decompose, validate_decomposition, Heuristic, TreeDecomposition};
use catrec::experiment::{
    bootstrap_linear_ci, errors_at, mean, run_sweep, run_trials, trials_to_csv, ExperimentConfig, Method,
};
use catrec::global::{
    recover_graph, swap_violations, tree_decode_swaps, InterBagSign, InterBagSigns, RecoveryOptions, SwapCostTable,
};
use catrec::graph::{
    apply_perm, apply_swap, edge_disagreement, induce_edge_signs, normalized_hamming, EdgeSigns, FullPerm,
    LabeledGraph, NodeLabeling, SwapPerm,
};
use catrec::local::{greedy_match, match_weight, optimal_match};
use catrec::tree_solver::{brute_force_tree, edge_budget, solve_tree};

const TREE_ORACLE_TIME_LIMIT: Duration = Duration::from_secs(60);
const COVERAGE_MIN: f64 = 0.90;
const SWEEP_K_TIME_LIMIT: Duration = Duration::from_secs(30 * 60);
const ZERO_P_MAX_ERROR: f64 = 0.02;
const PLATEAU_TOLERANCE: f64 = 0.03;
const CHANNEL_TOLERANCE: f64 = 1e-12;
const CI_LEVEL: f64 = 0.95;
const CI_RESAMPLES: usize = 1000;
const CI_SEED: u64 = 0xac1;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {id:>2} [{verdict}] {name}: {detail}\n");
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn random_graph(rng: &mut impl Rng, max_n: usize) -> LabeledGraph {
    let n = rng.gen_range(1..=max_n);
    let density: f64 = rng.gen_range(0.0..1.0);
    let edges: Vec<(usize, usize)> =
        (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).filter(|_| rng.gen_bool(density)).collect();
    LabeledGraph::new(n, edges).unwrap()
}

fn random_signs(rng: &mut impl Rng, m: usize) -> EdgeSigns {
    EdgeSigns::new((0..m).map(|_| if rng.gen() { 1 } else { -1 }).collect()).unwrap()
}

fn random_perm(rng: &mut impl Rng, k: u32) -> FullPerm {
    let mut m: Vec<u32> = (0..k).collect();
    m.shuffle(rng);
    FullPerm::new(m).unwrap()
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

fn ci(samples: &[&[f64]], coefs: &[f64], seed: u64) -> (f64, f64) {
    bootstrap_linear_ci(samples, coefs, CI_RESAMPLES, CI_LEVEL, seed)
}

#[test]
fn criterion_01_tree_solver_matches_brute_force() {
    let start = Instant::now();
    let mut rng = rng_from_seed(1);
    let mut mismatches = 0;
    for case in 0..200u64 {
        let k = rng.gen_range(2..=3u32);
        let n = rng.gen_range(k as usize..=10);
        let p = *[0.0, 0.1, 0.3].choose(&mut rng).unwrap();
        let q = *[0.0, 0.1, 0.3].choose(&mut rng).unwrap();
        let (g, y) = gen_random_tree(n, k, case).unwrap();
        let (z, x) = apply_noise(&g, &y, &NoiseParams::new(p, q, k, case ^ 0x55).unwrap()).unwrap();
        for budget in 0..=4 {
            let fast = solve_tree(&g, &x, &z, k, budget).unwrap();
            let slow = brute_force_tree(&g, &x, &z, k, budget).unwrap();
            if fast.objective != slow.objective || fast.violations > budget {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < TREE_ORACLE_TIME_LIMIT;
    report(1, "tree oracle", pass, &format!("{mismatches} mismatches over 1000 solves, {:.2}s", elapsed.as_secs_f64()));
}

#[test]
fn criterion_02_edge_budget_coverage() {
    let (n, p, delta) = (200, 0.1, 0.1);
    let t = edge_budget(n, p, delta).unwrap().t;
    let (g, y) = gen_random_tree(n, 2, 2).unwrap();
    let clean = induce_edge_signs(&g, &y).unwrap();
    let draws = 1000;
    let covered = (0..draws as u64)
        .filter(|&s| {
            let (_, x) = apply_noise(&g, &y, &NoiseParams::new(p, 0.0, 2, s).unwrap()).unwrap();
            let flipped = x.signs().iter().zip(clean.signs()).filter(|(a, b)| a != b).count();
            flipped as f64 <= t
        })
        .count();
    let rate = covered as f64 / draws as f64;
    report(2, "edge budget coverage", rate >= COVERAGE_MIN, &format!("t = {t:.4}, P[flips <= t] = {rate:.3}"));
}

#[test]
fn criterion_03_tree_error_grows_concavely_in_k() {
    let start = Instant::now();
    let cfg = config(
        r#"{"experiment":"sweep-k","source":{"type":"random-tree","n_min":500,"n_max":500},
            "k":[2,4,8,16],"p":[0.1],"q":[0.2],"trials":200,"methods":["ours"],"base_seed":3}"#,
    );
    let records = run_trials(&cfg).unwrap();
    let errs: Vec<Vec<f64>> = cfg.k.iter().map(|&k| errors_at(&records, k, 0.1, 0.2, Method::Ours)).collect();
    let means: Vec<f64> = errs.iter().map(|e| mean(e)).collect();
    let increasing = means.windows(2).all(|w| w[0] < w[1]);
    // Second differences (d_next - d_prev) must not be significantly positive.
    let lows: Vec<f64> =
        (0..2).map(|i| ci(&[&errs[i], &errs[i + 1], &errs[i + 2]], &[1.0, -2.0, 1.0], CI_SEED + i as u64).0).collect();
    let concave = lows.iter().all(|&l| l <= 0.0);
    let elapsed = start.elapsed();
    let pass = increasing && concave && elapsed < SWEEP_K_TIME_LIMIT;
    report(
        3,
        "tree sweep over k",
        pass,
        &format!("means {means:.4?}, second-difference CI lows {lows:.4?}, {:.1}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_04_zero_noise_is_exact() {
    let mut rng = rng_from_seed(4);
    let opts = RecoveryOptions { p: Some(0.0), ..RecoveryOptions::default() };
    let mut failures = Vec::new();
    let mut check = |what: &str, i: usize, g: &LabeledGraph, y: &NodeLabeling, graph_only: bool| {
        let k = y.k();
        let (z, x) = apply_noise(g, y, &NoiseParams::new(0.0, 0.0, k, i as u64).unwrap()).unwrap();
        if !graph_only {
            let budget = edge_budget(g.n(), 0.0, 0.1).unwrap().effective_budget;
            let sol = solve_tree(g, &x, &z, k, budget).unwrap();
            if normalized_hamming(&sol.labels, y).unwrap() != 0.0 {
                failures.push(format!("recover-tree on {what} {i}"));
            }
        }
        let rep = recover_graph(g, &x, &z, k, &opts, Some(y)).unwrap();
        if rep.normalized != Some(0.0) {
            failures.push(format!("recover-graph on {what} {i}"));
        }
    };
    for i in 0..50 {
        let k = rng.gen_range(2..=6u32);
        let n = rng.gen_range(k as usize..=60);
        let (g, y) = gen_random_tree(n, k, 100 + i as u64).unwrap();
        check("tree", i, &g, &y, false);
    }
    for i in 0..10 {
        let (rows, cols) = (rng.gen_range(2..=7), rng.gen_range(2..=8));
        let k = rng.gen_range(2..=8u32);
        let inst = quantize_image(&mosaic_image(rows, cols, 4, 200 + i as u64).unwrap(), k).unwrap();
        check("grid", i, &inst.graph, &inst.truth, true);
    }
    for i in 0..10 {
        let n = rng.gen_range(2..=60);
        let g = gen_random_connected(n, rng.gen_range(0..=n), 300 + i as u64).unwrap();
        let y = random_labeling(n, rng.gen_range(2..=5), 400 + i as u64);
        check("connected graph", i, &g, &y, true);
    }
    report(4, "zero-noise exactness", failures.is_empty(), &format!("70 instances, failures: {failures:?}"));
}

#[test]
fn criterion_05_grid_error_plateaus_in_p() {
    let ps: Vec<f64> = (0..=15).map(|i| f64::from(i) / 100.0).collect();
    let cfg = config(&format!(
        r#"{{"experiment":"sweep-p","source":{{"type":"grid","rows":32,"cols":32}},
            "k":[16],"p":{ps:?},"q":[0.1],"trials":100,"methods":["ours","copy-z"],"base_seed":5}}"#
    ));
    let records = run_trials(&cfg).unwrap();
    let errs: Vec<Vec<f64>> = ps.iter().map(|&p| errors_at(&records, 16, p, 0.1, Method::Ours)).collect();
    let means: Vec<f64> = errs.iter().map(|e| mean(e)).collect();
    let decreases: Vec<f64> = (0..ps.len() - 1)
        .filter(|&i| ci(&[&errs[i + 1], &errs[i]], &[1.0, -1.0], CI_SEED + i as u64).1 < 0.0)
        .map(|i| ps[i + 1])
        .collect();
    let copy_z = mean(&errors_at(&records, 16, 0.15, 0.1, Method::CopyZ));
    let start_ok = means[0] < ZERO_P_MAX_ERROR;
    let end = *means.last().unwrap();
    let plateau_ok = (end - 0.1).abs() <= PLATEAU_TOLERANCE;
    let pass = decreases.is_empty() && start_ok && plateau_ok;
    report(
        5,
        "grid sweep over p",
        pass,
        &format!(
            "means {means:.4?}; significant decreases at {decreases:?}; err(0) = {:.4}; err(0.15) = {end:.4} \
             (copy-z {copy_z:.4}, target 0.1 +/- {PLATEAU_TOLERANCE})",
            means[0]
        ),
    );
}

#[test]
fn criterion_06_ours_beats_majority_and_copy_z() {
    let cfg = config(
        r#"{"experiment":"single","source":{"type":"grid","rows":16,"cols":16},
            "k":[8],"p":[0.05],"q":[0.1],"trials":100,"methods":["ours","majority","copy-z"],"base_seed":6}"#,
    );
    let records = run_trials(&cfg).unwrap();
    let ours = errors_at(&records, 8, 0.05, 0.1, Method::Ours);
    let majority = errors_at(&records, 8, 0.05, 0.1, Method::Majority);
    // Methods share each trial's instance and noise, so the difference is
    // bootstrapped over paired trials.
    let diff: Vec<f64> = ours.iter().zip(&majority).map(|(a, b)| a - b).collect();
    let (_, hi_paired) = ci(&[&diff], &[1.0], CI_SEED);
    let (_, hi_unpaired) = ci(&[&ours, &majority], &[1.0, -1.0], CI_SEED);
    let (_, hi_ours) = ci(&[&ours], &[1.0], CI_SEED + 1);
    let (mo, mm) = (mean(&ours), mean(&majority));
    let pass = mo < mm && mo < 0.1 && hi_paired < 0.0 && hi_ours < 0.1;
    report(
        6,
        "method ranking on grids",
        pass,
        &format!(
            "ours {mo:.4} (CI high {hi_ours:.4}), majority {mm:.4}, CI high of ours - majority: \
             paired {hi_paired:.4}, unpaired {hi_unpaired:.4}"
        ),
    );
}

#[test]
fn criterion_07_swaps_and_permutations_preserve_disagreement() {
    let mut rng = rng_from_seed(7);
    let mut swap_failures = 0;
    for _ in 0..10_000 {
        let g = random_graph(&mut rng, 12);
        let k = rng.gen_range(2..=6u32);
        let y = random_labeling(g.n(), k, rng.gen());
        let x = random_signs(&mut rng, g.m());
        let (a, b) = (rng.gen_range(0..k), rng.gen_range(0..k));
        let s = if a == b { SwapPerm::Identity } else { SwapPerm::transposition(a.min(b), a.max(b)).unwrap() };
        if edge_disagreement(&g, &apply_swap(&y, s), &x).unwrap() != edge_disagreement(&g, &y, &x).unwrap() {
            swap_failures += 1;
        }
    }
    let mut perm_failures = 0;
    for _ in 0..1_000 {
        let g = random_graph(&mut rng, 12);
        let k = rng.gen_range(2..=6u32);
        let y = random_labeling(g.n(), k, rng.gen());
        let x = random_signs(&mut rng, g.m());
        let perm = random_perm(&mut rng, k);
        if edge_disagreement(&g, &apply_perm(&y, &perm), &x).unwrap() != edge_disagreement(&g, &y, &x).unwrap() {
            perm_failures += 1;
        }
    }
    let pass = swap_failures == 0 && perm_failures == 0;
    report(
        7,
        "swap invariance",
        pass,
        &format!("{swap_failures}/10000 swap and {perm_failures}/1000 permutation failures"),
    );
}

fn all_perms(k: u32) -> Vec<FullPerm> {
    fn rec(prefix: &mut Vec<u32>, k: u32, out: &mut Vec<FullPerm>) {
        if prefix.len() == k as usize {
            out.push(FullPerm::new(prefix.clone()).unwrap());
            return;
        }
        for l in 0..k {
            if !prefix.contains(&l) {
                prefix.push(l);
                rec(prefix, k, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), k, &mut out);
    out
}

/// Labelings whose label-intersection matrix is `counts`.
fn from_intersections(counts: &[[usize; 3]; 3]) -> (NodeLabeling, NodeLabeling) {
    let (mut y, mut z) = (Vec::new(), Vec::new());
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            y.extend(std::iter::repeat_n(i as u32, c));
            z.extend(std::iter::repeat_n(j as u32, c));
        }
    }
    (NodeLabeling::new(y, 3).unwrap(), NodeLabeling::new(z, 3).unwrap())
}

#[test]
fn criterion_08_matchers() {
    let mut rng = rng_from_seed(8);
    let (mut opt_failures, mut greedy_failures) = (0, 0);
    for _ in 0..200 {
        let k = rng.gen_range(2..=5u32);
        let n = rng.gen_range(1..=40);
        let y = random_labeling(n, k, rng.gen());
        let z = random_labeling(n, k, rng.gen());
        let best = all_perms(k).iter().map(|p| match_weight(&y, &z, p)).max().unwrap();
        let o = optimal_match(&y, &z, k).unwrap();
        let g = greedy_match(&y, &z, k).unwrap();
        if match_weight(&y, &z, &o) != best {
            opt_failures += 1;
        }
        let mut image = g.mapping().to_vec();
        image.sort_unstable();
        if image != (0..k).collect::<Vec<_>>() || 2 * match_weight(&y, &z, &g) < best {
            greedy_failures += 1;
        }
    }
    let (y, z) = from_intersections(&[[10, 9, 0], [9, 0, 0], [0, 0, 1]]);
    let greedy = match_weight(&y, &z, &greedy_match(&y, &z, 3).unwrap());
    let optimal = match_weight(&y, &z, &optimal_match(&y, &z, 3).unwrap());
    let pass = opt_failures == 0 && greedy_failures == 0 && greedy == 11 && optimal == 19;
    report(
        8,
        "matchers",
        pass,
        &format!("{opt_failures} optimal and {greedy_failures} greedy failures over 200; gap instance greedy {greedy} vs optimal {optimal}"),
    );
}

fn exhaustive_swaps(costs: &[SwapCostTable], signs: &InterBagSigns, k: u32, budget: usize) -> Option<usize> {
    let options = SwapPerm::all(k);
    let b = costs.len();
    let total = options.len().pow(b as u32);
    (0..total)
        .filter_map(|mut code| {
            let idx: Vec<usize> = (0..b)
                .map(|_| {
                    let i = code % options.len();
                    code /= options.len();
                    i
                })
                .collect();
            let swaps: Vec<SwapPerm> = idx.iter().map(|&i| options[i]).collect();
            (swap_violations(signs, &swaps) <= budget)
                .then(|| idx.iter().enumerate().map(|(w, &i)| costs[w].cost(i)).sum())
        })
        .min()
}

#[test]
fn criterion_09_swap_decoder_matches_exhaustive() {
    let mut rng = rng_from_seed(9);
    let mut mismatches = Vec::new();
    for case in 0..100 {
        let k = rng.gen_range(2..=3u32);
        let nb = rng.gen_range(1..=4usize);
        // Bags {0, i + 1} over a star share the hub, so any bag tree is valid.
        let g = LabeledGraph::star(nb + 1).unwrap();
        let bags: Vec<Vec<usize>> = (0..nb).map(|i| vec![0, i + 1]).collect();
        let edges: Vec<(usize, usize)> = (1..nb).map(|i| (rng.gen_range(0..i), i)).collect();
        let td = TreeDecomposition::from_parts(&g, bags, edges).unwrap();
        let options = SwapPerm::all(k);
        let costs: Vec<SwapCostTable> = (0..nb)
            .map(|w| SwapCostTable { bag_index: w, costs: options.iter().map(|&s| (s, rng.gen_range(0..6))).collect() })
            .collect();
        let signs = InterBagSigns {
            entries: td
                .tree_edges
                .iter()
                .map(|&edge| InterBagSign {
                    edge,
                    vertex: 0,
                    label_a: rng.gen_range(0..k),
                    label_b: rng.gen_range(0..k),
                    sign: if rng.gen() { 1 } else { -1 },
                })
                .collect(),
        };
        for budget in 0..=td.tree_edges.len() {
            let d = tree_decode_swaps(&td, &costs, &signs, k, budget).unwrap();
            let ok = match exhaustive_swaps(&costs, &signs, k, budget) {
                Some(best) => {
                    let recount: usize = d
                        .swaps
                        .iter()
                        .enumerate()
                        .map(|(w, s)| costs[w].costs.iter().find(|(o, _)| o == s).unwrap().1)
                        .sum();
                    !d.infeasible && d.objective == best && recount == best && d.violations <= budget
                }
                None => d.infeasible,
            };
            if !ok {
                mismatches.push((case, budget));
            }
        }
    }
    report(9, "swap decoder oracle", mismatches.is_empty(), &format!("100 instances, mismatches {mismatches:?}"));
}

#[test]
fn criterion_10_channel_constants() {
    let mut sep_err: f64 = 0.0;
    let mut trust_err: f64 = 0.0;
    let mut worst = String::new();
    for k in 2..=5u32 {
        for q in [0.1, 0.3] {
            let (lo, hi) = separation_by_enumeration(k, q);
            let c = 1.0 - f64::from(k) / f64::from(k - 1) * q;
            sep_err = sep_err.max((lo - c).abs()).max((hi - c).abs()).max((separation_constant(k, q) - c).abs());
            for sign in [1, -1] {
                for violated in [true, false] {
                    let err =
                        (trust_case(sign, violated, q, k) - channel_violation_probability(sign, violated, q, k)).abs();
                    if err > trust_err {
                        trust_err = err;
                        worst = format!("k={k} q={q} sign={sign} violated={violated}");
                    }
                }
            }
        }
    }
    let pass = sep_err <= CHANNEL_TOLERANCE && trust_err <= CHANNEL_TOLERANCE;
    report(
        10,
        "channel constants",
        pass,
        &format!("separation constant max error {sep_err:.2e}; trust cases max error {trust_err:.2e} at {worst}"),
    );
}

#[test]
fn criterion_11_decompositions_are_valid() {
    let mut rng = rng_from_seed(11);
    let mut invalid = Vec::new();
    let mut tree_widths = Vec::new();
    for i in 0..100u64 {
        let n = rng.gen_range(1..=80);
        let g = match i % 3 {
            0 => gen_random_tree(n.max(2), 2, i).unwrap().0,
            1 => gen_random_connected(n, rng.gen_range(0..=2 * n), i).unwrap(),
            _ => random_graph(&mut rng, 80),
        };
        for h in [Heuristic::MinFill, Heuristic::MinDegree] {
            let td = decompose(&g, h).unwrap();
            if !validate_decomposition(&g, &td).is_valid() {
                invalid.push((i, h));
            }
            if g.is_tree() && g.n() >= 2 {
                tree_widths.push(td.stats.wid);
            }
        }
    }
    let trees_ok = !tree_widths.is_empty() && tree_widths.iter().all(|&w| w == 1);
    let pass = invalid.is_empty() && trees_ok;
    report(
        11,
        "decomposition validity",
        pass,
        &format!(
            "200 decompositions, invalid {invalid:?}; {} tree inputs, widths all 1: {trees_ok}",
            tree_widths.len()
        ),
    );
}

#[test]
fn criterion_12_reruns_are_byte_identical() {
    let configs = [
        r#"{"experiment":"sweep-k","source":{"type":"random-tree","n_min":30,"n_max":80},
            "k":[2,5],"p":[0.1],"q":[0.2],"trials":8,"methods":["ours","majority","lbp","copy-z"],"base_seed":12}"#,
        r#"{"experiment":"sweep-p","source":{"type":"grid","rows":8,"cols":9},
            "k":[4],"p":[0.0,0.1],"q":[0.1],"trials":6,"methods":["ours","majority","lbp","copy-z"],"base_seed":13}"#,
    ];
    let mut identical = true;
    for cfg in configs.map(config) {
        let a = trials_to_csv(&run_sweep(&cfg).unwrap().records).unwrap();
        let b = trials_to_csv(&run_sweep(&cfg).unwrap().records).unwrap();
        identical &= a.as_bytes() == b.as_bytes();
    }
    report(12, "reproducibility", identical, &format!("tree and grid sweeps rerun, identical CSV: {identical}"));
}
