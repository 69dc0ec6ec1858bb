//! Exact recovery on trees.
//!
//! Minimizes the Hamming distance to the observed labels `z` over all
//! labelings whose edge disagreement with the observed signs `x` stays within
//! a violation budget.

use serde::{Deserialize, Serialize};

use crate::budget_dp::{self, DpModel, RootedTree};
use crate::error::{input_err, Error, Result};
use crate::graph::{disagreement_raw, hamming_raw, EdgeSigns, Label, LabeledGraph, NodeLabeling, Sign};

/// Concentration budget on the number of flipped edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetBound {
    pub t: f64,
    pub delta: f64,
    /// The three addends of `t`: mean, range term, variance term.
    pub components: [f64; 3],
    pub effective_budget: usize,
}

/// `t = (n-1)p + (2/3) ln(2/δ)(1-p) + sqrt(2 (n-1) p (1-p) ln(2/δ))`.
pub fn edge_budget(n: usize, p: f64, delta: f64) -> Result<BudgetBound> {
    if n == 0 {
        return input_err("n must be at least 1");
    }
    if !(0.0..0.5).contains(&p) {
        return input_err(format!("p = {p} must lie in [0, 0.5)"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return input_err(format!("delta = {delta} must lie in (0, 1)"));
    }
    let m = (n - 1) as f64;
    let log_term = (2.0 / delta).ln();
    let components = [m * p, 2.0 / 3.0 * log_term * (1.0 - p), (2.0 * m * p * (1.0 - p) * log_term).sqrt()];
    let t: f64 = components.iter().sum();
    let effective_budget = (t.floor() as usize).min(n - 1);
    Ok(BudgetBound { t, delta, components, effective_budget })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSolution {
    pub labels: NodeLabeling,
    /// Hamming distance to `z`.
    pub objective: usize,
    /// Edge disagreements with `x`.
    pub violations: usize,
    pub budget: usize,
    pub feasible: bool,
}

fn check_inputs(g: &LabeledGraph, x: &EdgeSigns, z: &NodeLabeling, k: u32) -> Result<()> {
    if k < 2 {
        return input_err("k must be at least 2");
    }
    x.check_len(g.m())?;
    z.check_len(g.n())?;
    if z.k() != k {
        return input_err(format!("observed labels are over k = {}, expected {k}", z.k()));
    }
    Ok(())
}

fn finish(g: &LabeledGraph, x: &EdgeSigns, z: &NodeLabeling, labels: Vec<Label>, budget: usize) -> TreeSolution {
    let objective = hamming_raw(&labels, z.labels());
    let violations = disagreement_raw(g, &labels, x.signs());
    TreeSolution {
        labels: NodeLabeling::new_unchecked(labels, z.k()),
        objective,
        violations,
        budget,
        feasible: violations <= budget,
    }
}

struct TreeModel<'a> {
    z: &'a [Label],
    /// Sign of the edge from each vertex to its parent.
    up_sign: Vec<Sign>,
    k: usize,
}

impl DpModel for TreeModel<'_> {
    fn options(&self, _u: usize) -> usize {
        self.k
    }
    fn cost(&self, u: usize, option: usize) -> u32 {
        u32::from(option as Label != self.z[u])
    }
    fn num_labels(&self) -> usize {
        self.k
    }
    fn child_label(&self, _child: usize, option: usize) -> Label {
        option as Label
    }
    fn parent_label(&self, _child: usize, option: usize) -> Label {
        option as Label
    }
    fn edge_sign(&self, child: usize) -> Sign {
        self.up_sign[child]
    }
}

/// Exact budgeted solve by dynamic programming, rooted at vertex 0.
///
/// Among optimal labelings the root takes its smallest optimal label, then
/// vertices are fixed in BFS order, each child taking the smallest budget
/// share and then the smallest label that still completes an optimum.
pub fn solve_tree(g: &LabeledGraph, x: &EdgeSigns, z: &NodeLabeling, k: u32, budget: usize) -> Result<TreeSolution> {
    check_inputs(g, x, z, k)?;
    if !g.is_tree() {
        return input_err("graph is not a tree");
    }
    let n = g.n();
    let adj: Vec<Vec<usize>> = (0..n).map(|v| g.neighbors(v).collect()).collect();
    let tree = RootedTree::new(&adj, 0)?;
    let up_sign: Vec<Sign> =
        (0..n).map(|v| tree.parent[v].map_or(1, |p| x.get(g.edge_index(p, v).expect("tree edge")))).collect();
    let model = TreeModel { z: z.labels(), up_sign, k: k as usize };
    let cap = budget.min(n - 1);
    let sol = budget_dp::solve(&tree, &model, cap)?.expect("sign-consistent labelings always exist");
    let labels = sol.choice.into_iter().map(|o| o as Label).collect();
    let out = finish(g, x, z, labels, budget);
    debug_assert_eq!(out.objective as u64, sol.objective);
    Ok(out)
}

/// Brute-force guard: at most this many labelings are enumerated.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

pub(crate) fn labeling_count(k: u32, n: usize) -> Option<u64> {
    let mut total: u64 = 1;
    for _ in 0..n {
        total = total.checked_mul(k as u64)?;
        if total > BRUTE_FORCE_LIMIT {
            return None;
        }
    }
    Some(total)
}

/// Exhaustive solve over all `k^n` labelings; ties go to the
/// lexicographically smallest label vector.
pub fn brute_force_tree(
    g: &LabeledGraph,
    x: &EdgeSigns,
    z: &NodeLabeling,
    k: u32,
    budget: usize,
) -> Result<TreeSolution> {
    check_inputs(g, x, z, k)?;
    if !g.is_tree() {
        return input_err("graph is not a tree");
    }
    let n = g.n();
    if labeling_count(k, n).is_none() {
        return Err(Error::TooLarge(format!("{k}^{n} labelings exceed {BRUTE_FORCE_LIMIT}")));
    }
    let mut cur: Vec<Label> = vec![0; n];
    let mut best: Option<(usize, Vec<Label>)> = None;
    loop {
        if disagreement_raw(g, &cur, x.signs()) <= budget {
            let obj = hamming_raw(&cur, z.labels());
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, cur.clone()));
            }
        }
        // Odometer with the last vertex varying fastest; lexicographic order.
        let mut i = n;
        loop {
            if i == 0 {
                let (_, labels) = best.expect("a consistent labeling always exists");
                return Ok(finish(g, x, z, labels, budget));
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < k {
                break;
            }
            cur[i] = 0;
        }
    }
}
