//! Local-to-global decoding: per-bag swap costs, inter-bag agreement signs,
//! the swap budget, and the budgeted swap decoder over the bag tree.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::adjust_p_for_approx;
use crate::budget_dp::{self, DpModel, RootedTree};
use crate::decomposition::{decompose, Heuristic, TreeDecomposition};
use crate::error::{input_err, Error, Result};
use crate::graph::{hamming, normalized_hamming, phi, EdgeSigns, Label, LabeledGraph, NodeLabeling, Sign, SwapPerm};
use crate::local::{local_labelings, BagLabeling, LocalMethod, LocalOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapCostTable {
    pub bag_index: usize,
    /// One entry per option of [`SwapPerm::all`], in that order.
    pub costs: Vec<(SwapPerm, usize)>,
}

impl SwapCostTable {
    pub fn cost(&self, option: usize) -> usize {
        self.costs[option].1
    }

    /// Smallest-index option of minimum cost.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &(_, c)) in self.costs.iter().enumerate() {
            if c < self.costs[best].1 {
                best = i;
            }
        }
        best
    }
}

/// `Cost[σ] = Σ_{v∈W} 1{σ(Ỹ_v) ≠ Z_v}` for the identity and every
/// transposition. Swaps of labels absent from the bag cost the same as the
/// identity.
pub fn swap_costs(bag: &BagLabeling, z: &NodeLabeling, k: u32) -> Result<SwapCostTable> {
    let ku = k as usize;
    let mut counts = vec![0usize; ku * ku];
    for (&v, &l) in bag.vertices.iter().zip(bag.labels.labels()) {
        let zl = z.get(v);
        if l >= k || zl >= k {
            return input_err("label outside 0..k");
        }
        counts[l as usize * ku + zl as usize] += 1;
    }
    let c = |a: usize, b: usize| counts[a * ku + b] as i64;
    let identity = bag.vertices.len() as i64 - (0..ku).map(|l| c(l, l)).sum::<i64>();
    let costs = SwapPerm::all(k)
        .into_iter()
        .map(|s| {
            let cost = match s {
                SwapPerm::Identity => identity,
                SwapPerm::Transposition(a, b) => {
                    let (a, b) = (a as usize, b as usize);
                    identity + c(a, a) - c(a, b) + c(b, b) - c(b, a)
                }
            };
            (s, cost as usize)
        })
        .collect();
    Ok(SwapCostTable { bag_index: bag.bag_index, costs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterBagSign {
    /// Bag tree edge `(a, b)` with `a < b`.
    pub edge: (usize, usize),
    /// Smallest vertex shared by both bags.
    pub vertex: usize,
    pub label_a: Label,
    pub label_b: Label,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterBagSigns {
    /// Aligned with the decomposition's tree edges.
    pub entries: Vec<InterBagSign>,
}

/// `S(W, W') = 2·1{Ỹ^W_v = Ỹ^{W'}_v} − 1` at the smallest shared vertex.
pub fn inter_bag_signs(td: &TreeDecomposition, bags: &[BagLabeling]) -> Result<InterBagSigns> {
    if bags.len() != td.len() {
        return input_err(format!("{} bag labelings for {} bags", bags.len(), td.len()));
    }
    let label_in = |b: usize, v: usize| {
        let i = td.bags[b].binary_search(&v).expect("vertex in bag");
        bags[b].labels.get(i)
    };
    let entries = td
        .tree_edges
        .iter()
        .map(|&(a, b)| {
            let vertex = td.bags[a]
                .iter()
                .copied()
                .find(|v| td.bags[b].binary_search(v).is_ok())
                .ok_or_else(|| Error::Decomposition(format!("adjacent bags {a} and {b} share no vertex")))?;
            let (label_a, label_b) = (label_in(a, vertex), label_in(b, vertex));
            Ok(InterBagSign { edge: (a, b), vertex, label_a, label_b, sign: phi(label_a, label_b) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InterBagSigns { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalBudget {
    pub k_n: f64,
    pub l_n: f64,
    /// `⌊L_n⌋` capped at the number of bag tree edges.
    pub effective: usize,
    /// Edge noise used in the power terms (after optional adjustment).
    pub p_used: f64,
    pub delta: f64,
    pub wid_star: usize,
    pub power_sum: f64,
    pub deg_e_star: usize,
    pub max_edges_star: usize,
    pub deg_t: usize,
    pub use_p_prime: bool,
    /// Some mincut* value came from the degree proxy.
    pub heuristic: bool,
}

/// `K_n = 2^{wid*+2} Σ_W p^⌈mincut*/2⌉ + 6 deg_E* max|E(W*)| ln(2/δ)`,
/// `L_n = deg(T) K_n`.
pub fn compute_global_budget(td: &TreeDecomposition, p: f64, delta: f64, use_p_prime: bool) -> Result<GlobalBudget> {
    if !(0.0..=1.0).contains(&p) {
        return input_err(format!("p = {p} must lie in [0, 1]"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return input_err(format!("delta = {delta} must lie in (0, 1)"));
    }
    let s = &td.stats;
    let p_used = if use_p_prime { adjust_p_for_approx(p)? } else { p };
    let power_sum: f64 = s.mincut_star.iter().filter_map(|m| m.value).map(|c| p_used.powi(c.div_ceil(2) as i32)).sum();
    let k_n = 2f64.powi(s.wid_star as i32 + 2) * power_sum
        + 6.0 * s.deg_e_star as f64 * s.max_edges_star as f64 * (2.0 / delta).ln();
    let l_n = s.deg_t as f64 * k_n;
    let cap = td.tree_edges.len();
    let effective = if l_n.is_finite() && l_n < cap as f64 { l_n.floor() as usize } else { cap };
    Ok(GlobalBudget {
        k_n,
        l_n,
        effective,
        p_used,
        delta,
        wid_star: s.wid_star,
        power_sum,
        deg_e_star: s.deg_e_star,
        max_edges_star: s.max_edges_star,
        deg_t: s.deg_t,
        use_p_prime,
        heuristic: !s.all_exact(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapDecode {
    pub swaps: Vec<SwapPerm>,
    pub objective: usize,
    pub violations: usize,
    pub budget: usize,
    /// The unconstrained per-bag minima already met the budget.
    pub fast_path: bool,
    /// No assignment met the budget; the result minimizes cost among
    /// assignments with the fewest achievable violations.
    pub infeasible: bool,
}

struct SwapModel<'a> {
    options: Vec<SwapPerm>,
    costs: &'a [SwapCostTable],
    /// Per bag: the inter-bag sign entry of its parent edge and whether the
    /// bag is that edge's `a` side.
    up: Vec<Option<(InterBagSign, bool)>>,
    k: usize,
}

impl SwapModel<'_> {
    fn labels_at(&self, child: usize) -> (Label, Label) {
        let (s, child_is_a) = self.up[child].expect("non-root bag");
        if child_is_a {
            (s.label_b, s.label_a)
        } else {
            (s.label_a, s.label_b)
        }
    }
}

impl DpModel for SwapModel<'_> {
    fn options(&self, _u: usize) -> usize {
        self.options.len()
    }
    fn cost(&self, u: usize, option: usize) -> u32 {
        self.costs[u].cost(option) as u32
    }
    fn num_labels(&self) -> usize {
        self.k
    }
    fn child_label(&self, child: usize, option: usize) -> Label {
        self.options[option].apply(self.labels_at(child).1)
    }
    fn parent_label(&self, child: usize, option: usize) -> Label {
        self.options[option].apply(self.labels_at(child).0)
    }
    fn edge_sign(&self, child: usize) -> Sign {
        self.up[child].expect("non-root bag").0.sign
    }
}

/// Number of bag tree edges where `ψ(π_W, π_W')`, evaluated at the shared
/// representative vertex, differs from `S(W, W')`.
pub fn swap_violations(signs: &InterBagSigns, swaps: &[SwapPerm]) -> usize {
    signs
        .entries
        .iter()
        .filter(|s| {
            let (a, b) = s.edge;
            phi(swaps[a].apply(s.label_a), swaps[b].apply(s.label_b)) != s.sign
        })
        .count()
}

/// Minimum total swap cost subject to at most `budget` inter-bag
/// violations, by dynamic programming over the bag tree rooted at bag 0.
pub fn tree_decode_swaps(
    td: &TreeDecomposition,
    costs: &[SwapCostTable],
    signs: &InterBagSigns,
    k: u32,
    budget: usize,
) -> Result<SwapDecode> {
    let b = td.len();
    if costs.len() != b || signs.entries.len() != td.tree_edges.len() {
        return input_err("cost tables or signs do not match the decomposition");
    }
    let options = SwapPerm::all(k);
    if costs.iter().any(|t| t.costs.len() != options.len()) {
        return input_err("cost table size does not match k");
    }
    let cap = budget.min(td.tree_edges.len());
    let argmins: Vec<SwapPerm> = costs.iter().map(|t| options[t.argmin()]).collect();
    let v0 = swap_violations(signs, &argmins);
    if v0 <= cap {
        let objective = costs.iter().map(|t| t.cost(t.argmin())).sum();
        return Ok(SwapDecode {
            swaps: argmins,
            objective,
            violations: v0,
            budget,
            fast_path: true,
            infeasible: false,
        });
    }
    let tree = RootedTree::new(&td.tree_adjacency(), 0).map_err(|e| Error::Decomposition(e.to_string()))?;
    let mut up = vec![None; b];
    for s in &signs.entries {
        let (a, c) = s.edge;
        if tree.parent[c] == Some(a) {
            up[c] = Some((*s, false));
        } else if tree.parent[a] == Some(c) {
            up[a] = Some((*s, true));
        } else {
            return Err(Error::Decomposition(format!("sign entry for non-tree edge ({a},{c})")));
        }
    }
    let model = SwapModel { options: options.clone(), costs, up, k: k as usize };
    let (sol, infeasible) = match budget_dp::solve(&tree, &model, cap)? {
        Some(sol) => (sol, false),
        None => {
            // Smallest achievable violation count, by bisection on the budget.
            let (mut lo, mut hi) = (cap + 1, td.tree_edges.len());
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if budget_dp::solve(&tree, &model, mid)?.is_some() {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let found =
                budget_dp::solve(&tree, &model, hi)?.ok_or_else(|| Error::Input("no swap assignment exists".into()))?;
            (found, true)
        }
    };
    let swaps: Vec<SwapPerm> = sol.choice.iter().map(|&o| options[o]).collect();
    let violations = swap_violations(signs, &swaps);
    Ok(SwapDecode { swaps, objective: sol.objective as usize, violations, budget, fast_path: false, infeasible })
}

/// `Ŷ_v = π_W(Ỹ^W_v)` for the lowest-index bag `W` containing `v`.
pub fn assemble(
    td: &TreeDecomposition,
    bags: &[BagLabeling],
    swaps: &[SwapPerm],
    n: usize,
    k: u32,
) -> Result<NodeLabeling> {
    if bags.len() != td.len() || swaps.len() != td.len() {
        return input_err("bag labelings or swaps do not match the decomposition");
    }
    let mut out: Vec<Option<Label>> = vec![None; n];
    for (b, bag) in bags.iter().enumerate() {
        for (&v, &l) in td.bags[b].iter().zip(bag.labels.labels()) {
            if out[v].is_none() {
                out[v] = Some(swaps[b].apply(l));
            }
        }
    }
    let labels = out
        .into_iter()
        .enumerate()
        .map(|(v, l)| l.ok_or_else(|| Error::Decomposition(format!("vertex {v} lies in no bag"))))
        .collect::<Result<Vec<_>>>()?;
    NodeLabeling::new(labels, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub heuristic: Heuristic,
    pub local: LocalOptions,
    pub delta: f64,
    /// Edge noise used for the swap budget; without it the decoder runs
    /// unconstrained.
    pub p: Option<f64>,
    pub use_p_prime: bool,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { heuristic: Heuristic::MinFill, local: LocalOptions::default(), delta: 0.1, p: None, use_p_prime: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagDiagnostics {
    pub bag: usize,
    pub size: usize,
    pub size_star: usize,
    pub agreement: usize,
    pub edges: usize,
    pub method: LocalMethod,
    pub restarts: usize,
    pub swap: SwapPerm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub labels: NodeLabeling,
    pub hamming: Option<usize>,
    pub normalized: Option<f64>,
    pub budget: Option<GlobalBudget>,
    pub swap_objective: usize,
    pub swap_violations: usize,
    pub swap_budget: usize,
    pub fast_path: bool,
    /// Even the full bag tree could not meet the swap budget.
    pub infeasible: bool,
    pub bags: usize,
    pub wid: usize,
    pub wid_star: usize,
    pub deg_t: usize,
    pub per_bag: Vec<BagDiagnostics>,
    pub millis: f64,
}

/// Full pipeline on a precomputed decomposition.
pub fn recover_graph_with(
    g: &LabeledGraph,
    td: &TreeDecomposition,
    x: &EdgeSigns,
    z: &NodeLabeling,
    k: u32,
    opts: &RecoveryOptions,
    truth: Option<&NodeLabeling>,
) -> Result<RecoveryReport> {
    let start = Instant::now();
    if k < 2 {
        return input_err("k must be at least 2");
    }
    x.check_len(g.m())?;
    z.check_len(g.n())?;
    if z.k() != k {
        return input_err(format!("observed labels are over k = {}, expected {k}", z.k()));
    }
    let bags = local_labelings(g, td, x, z, k, &opts.local)?;
    let costs = bags.par_iter().map(|b| swap_costs(b, z, k)).collect::<Result<Vec<_>>>()?;
    let signs = inter_bag_signs(td, &bags)?;
    let budget = match opts.p {
        Some(p) => Some(compute_global_budget(td, p, opts.delta, opts.use_p_prime)?),
        None => None,
    };
    let swap_budget = budget.as_ref().map_or(td.tree_edges.len(), |b| b.effective);
    let decode = tree_decode_swaps(td, &costs, &signs, k, swap_budget)?;
    let labels = assemble(td, &bags, &decode.swaps, g.n(), k)?;
    let (ham, norm) = match truth {
        Some(y) => (Some(hamming(&labels, y)?), Some(normalized_hamming(&labels, y)?)),
        None => (None, None),
    };
    let per_bag = bags
        .iter()
        .zip(&decode.swaps)
        .map(|(b, &swap)| BagDiagnostics {
            bag: b.bag_index,
            size: b.vertices.len(),
            size_star: b.vertices_star.len(),
            agreement: b.agreement,
            edges: b.edges,
            method: b.method,
            restarts: b.restarts,
            swap,
        })
        .collect();
    Ok(RecoveryReport {
        labels,
        hamming: ham,
        normalized: norm,
        budget,
        swap_objective: decode.objective,
        swap_violations: decode.violations,
        swap_budget,
        fast_path: decode.fast_path,
        infeasible: decode.infeasible,
        bags: td.len(),
        wid: td.stats.wid,
        wid_star: td.stats.wid_star,
        deg_t: td.stats.deg_t,
        per_bag,
        millis: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Decompose, solve bags locally, decode swaps and assemble.
pub fn recover_graph(
    g: &LabeledGraph,
    x: &EdgeSigns,
    z: &NodeLabeling,
    k: u32,
    opts: &RecoveryOptions,
    truth: Option<&NodeLabeling>,
) -> Result<RecoveryReport> {
    if !g.is_connected() {
        return input_err("graph must be connected");
    }
    let td = decompose(g, opts.heuristic)?;
    recover_graph_with(g, &td, x, z, k, opts, truth)
}
