use std::collections::VecDeque;

use proptest::prelude::*;

use catrec::datagen::{apply_noise, gen_random_connected, gen_random_tree, NoiseParams};
use catrec::decomposition::{decompose, extend_bag, mincut_star, validate_decomposition, Heuristic};
use catrec::graph::{
    apply_perm, apply_swap, edge_disagreement, hamming, induce_edge_signs, phi, EdgeSigns, FullPerm, LabeledGraph,
    NodeLabeling, SwapPerm,
};
use catrec::local::{greedy_match, match_weight, optimal_match};
use catrec::tree_solver::{brute_force_tree, solve_tree};

/// Random simple graph with up to `max_n` vertices.
fn graph_strategy(max_n: usize) -> impl Strategy<Value = LabeledGraph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let len = pairs.len();
        proptest::collection::vec(any::<bool>(), len).prop_map(move |keep| {
            let edges = pairs.iter().zip(&keep).filter(|(_, &k)| k).map(|(&e, _)| e);
            LabeledGraph::new(n, edges).unwrap()
        })
    })
}

/// Graph, labeling over `k` labels, and signs.
fn instance_strategy(max_n: usize) -> impl Strategy<Value = (LabeledGraph, NodeLabeling, EdgeSigns, u32)> {
    (graph_strategy(max_n), 2u32..=6).prop_flat_map(|(g, k)| {
        let n = g.n();
        let m = g.m();
        (
            Just(g),
            proptest::collection::vec(0..k, n),
            proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], m),
            Just(k),
        )
            .prop_map(|(g, y, x, k)| (g, NodeLabeling::new(y, k).unwrap(), EdgeSigns::new(x).unwrap(), k))
    })
}

fn perm_strategy(k: u32) -> impl Strategy<Value = FullPerm> {
    Just((0..k).collect::<Vec<u32>>()).prop_shuffle().prop_map(|m| FullPerm::new(m).unwrap())
}

proptest! {
    #[test]
    fn phi_symmetric_and_reflexive(a in 0u32..50, b in 0u32..50) {
        prop_assert_eq!(phi(a, b), phi(b, a));
        prop_assert_eq!(phi(a, a), 1);
    }

    #[test]
    fn swap_preserves_disagreement((g, y, x, k) in instance_strategy(9), a in 0u32..6, b in 0u32..6) {
        let (a, b) = (a % k, b % k);
        let s = if a == b { SwapPerm::Identity } else { SwapPerm::transposition(a.min(b), a.max(b)).unwrap() };
        let swapped = apply_swap(&y, s);
        prop_assert_eq!(edge_disagreement(&g, &swapped, &x).unwrap(), edge_disagreement(&g, &y, &x).unwrap());
        prop_assert_eq!(apply_swap(&swapped, s), y);
    }

    #[test]
    fn permutation_preserves_disagreement_and_hamming(
        (inst, perm, other) in instance_strategy(9).prop_flat_map(|(g, y, x, k)| {
            let n = y.len();
            (Just((g, y, x, k)), perm_strategy(k), proptest::collection::vec(0..k, n))
        })
    ) {
        let (g, y, x, k) = inst;
        let y2 = NodeLabeling::new(other, k).unwrap();
        let py = apply_perm(&y, &perm);
        prop_assert_eq!(edge_disagreement(&g, &py, &x).unwrap(), edge_disagreement(&g, &y, &x).unwrap());
        prop_assert_eq!(hamming(&py, &apply_perm(&y2, &perm)).unwrap(), hamming(&y, &y2).unwrap());
    }

    #[test]
    fn induced_signs_have_no_disagreement((g, y, _x, _k) in instance_strategy(10)) {
        let x = induce_edge_signs(&g, &y).unwrap();
        prop_assert_eq!(edge_disagreement(&g, &y, &x).unwrap(), 0);
    }

    #[test]
    fn noise_is_deterministic(n in 5usize..40, k in 2u32..6, seed in any::<u64>(), p in 0.0f64..0.49, q in 0.0f64..0.49) {
        let k = k.min(n as u32);
        let (g, y) = gen_random_tree(n, k, seed).unwrap();
        let params = NoiseParams::new(p, q, k, seed ^ 1).unwrap();
        let a = apply_noise(&g, &y, &params).unwrap();
        let b = apply_noise(&g, &y, &params).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn random_trees_cover_labels(n in 2usize..60, k in 2u32..8, seed in any::<u64>()) {
        prop_assume!(n >= k as usize);
        let (g, y) = gen_random_tree(n, k, seed).unwrap();
        prop_assert!(g.is_tree());
        prop_assert_eq!(g.m(), n - 1);
        for l in 0..k {
            prop_assert!(y.labels().contains(&l));
        }
    }

    #[test]
    fn tree_solver_matches_brute_force(
        n in 1usize..8, k in 2u32..=3, seed in any::<u64>(), budget in 0usize..5,
        p in prop_oneof![Just(0.0), Just(0.1), Just(0.3)], q in prop_oneof![Just(0.0), Just(0.1), Just(0.3)],
    ) {
        let k = k.min(n.max(2) as u32);
        prop_assume!(n >= k as usize);
        let (g, y) = gen_random_tree(n, k, seed).unwrap();
        let (z, x) = apply_noise(&g, &y, &NoiseParams::new(p, q, k, seed ^ 7).unwrap()).unwrap();
        let fast = solve_tree(&g, &x, &z, k, budget).unwrap();
        let slow = brute_force_tree(&g, &x, &z, k, budget).unwrap();
        prop_assert_eq!(fast.objective, slow.objective);
        prop_assert!(fast.violations <= budget.min(n - 1));
    }

    #[test]
    fn decompositions_are_valid(n in 1usize..40, extra in 0usize..30, seed in any::<u64>()) {
        let g = gen_random_connected(n, extra, seed).unwrap();
        for h in [Heuristic::MinFill, Heuristic::MinDegree] {
            let td = decompose(&g, h).unwrap();
            let report = validate_decomposition(&g, &td);
            prop_assert!(report.all_pass(), "{:?}", report);
            prop_assert!(td.stats.wid <= td.stats.wid_star);
        }
    }

    #[test]
    fn extend_bag_is_monotone(g in graph_strategy(12), mask in any::<u16>(), extra in any::<u16>()) {
        let n = g.n();
        let w1: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let w2: Vec<usize> = (0..n).filter(|&v| (mask | extra) >> v & 1 == 1).collect();
        let e1 = extend_bag(&g, &w1);
        let e2 = extend_bag(&g, &w2);
        prop_assert!(w1.iter().all(|v| e1.contains(v)));
        prop_assert!(e1.iter().all(|v| e2.contains(v)));
    }

    #[test]
    fn mincut_matches_max_flow(g in graph_strategy(10), mask in any::<u16>()) {
        let n = g.n();
        let w: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let w_star = extend_bag(&g, &w);
        let got = mincut_star(&g, &w, &w_star);
        prop_assert!(got.exact);
        prop_assert_eq!(got.value, max_flow_mincut(&g, &w, &w_star));
    }

    #[test]
    fn matchers_are_bijections_and_greedy_half_optimal(
        (k, y, z) in (2u32..=5, 1usize..30).prop_flat_map(|(k, n)| {
            (Just(k), proptest::collection::vec(0..k, n), proptest::collection::vec(0..k, n))
        })
    ) {
        let y = NodeLabeling::new(y, k).unwrap();
        let z = NodeLabeling::new(z, k).unwrap();
        let g = greedy_match(&y, &z, k).unwrap();
        let o = optimal_match(&y, &z, k).unwrap();
        for p in [&g, &o] {
            let mut seen = p.mapping().to_vec();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..k).collect::<Vec<_>>());
        }
        let (wg, wo) = (match_weight(&y, &z, &g), match_weight(&y, &z, &o));
        prop_assert!(wg <= wo && 2 * wg >= wo);
        prop_assert!(hamming(&apply_perm(&y, &o), &z).unwrap() <= hamming(&apply_perm(&y, &g), &z).unwrap());
    }
}

/// Minimum over pairs `s, t` in `w` of the unit-capacity s-t cut in `G(w*)`.
fn max_flow_mincut(g: &LabeledGraph, w: &[usize], w_star: &[usize]) -> Option<usize> {
    if w.len() < 2 {
        return None;
    }
    let (sub, _) = g.induced(w_star);
    let local = |v: usize| w_star.binary_search(&v).unwrap();
    let n = sub.n();
    let mut best = usize::MAX;
    for (i, &s) in w.iter().enumerate() {
        for &t in &w[i + 1..] {
            best = best.min(unit_max_flow(&sub, n, local(s), local(t)));
        }
    }
    Some(best)
}

fn unit_max_flow(g: &LabeledGraph, n: usize, s: usize, t: usize) -> usize {
    let mut cap = vec![vec![0i32; n]; n];
    for &(u, v) in g.edges() {
        cap[u][v] += 1;
        cap[v][u] += 1;
    }
    let mut flow = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if cap[u][v] > 0 && prev[v] == usize::MAX {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            return flow;
        }
        let mut v = t;
        while v != s {
            let u = prev[v];
            cap[u][v] -= 1;
            cap[v][u] += 1;
            v = u;
        }
        flow += 1;
    }
}
