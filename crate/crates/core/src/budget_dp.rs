//! Budget-constrained dynamic program over a rooted tree.
//!
//! Every node picks one option; options map to labels at the endpoints of
//! each tree edge and an edge is violated when the induced same/different
//! relation disagrees with the edge's sign. The program minimizes the total
//! option cost subject to at most `budget` violated edges.
//!
//! Each edge is charged once, at its child. Tables use "at most b" budget
//! semantics, so they are nonincreasing in `b` and the budget axis of a
//! subtree is capped by its edge count.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::{phi, Label, Sign};

pub(crate) const INF: u32 = u32::MAX / 4;

/// Refuse to allocate more table cells than this.
pub(crate) const MAX_CELLS: usize = 150_000_000;

#[derive(Debug, Clone)]
pub(crate) struct RootedTree {
    /// BFS order from the root.
    pub order: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    /// Children in increasing id order.
    pub children: Vec<Vec<usize>>,
}

impl RootedTree {
    /// Roots a tree given by neighbor lists; fails unless the lists describe
    /// a spanning tree on `0..adj.len()`.
    pub fn new(adj: &[Vec<usize>], root: usize) -> Result<Self> {
        let n = adj.len();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut children = vec![Vec::new(); n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        let mut half_edges = 0usize;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs = adj[u].clone();
            nbrs.sort_unstable();
            half_edges += nbrs.len();
            for v in nbrs {
                if Some(v) == parent[u] {
                    continue;
                }
                if seen[v] {
                    return Err(Error::Input("structure contains a cycle".into()));
                }
                seen[v] = true;
                parent[v] = Some(u);
                children[u].push(v);
                queue.push_back(v);
            }
        }
        if order.len() != n {
            return Err(Error::Input("structure is not connected".into()));
        }
        if half_edges != 2 * (n - 1) {
            return Err(Error::Input("structure is not a tree".into()));
        }
        Ok(Self { order, parent, children })
    }
}

pub(crate) trait DpModel {
    fn options(&self, u: usize) -> usize;
    fn cost(&self, u: usize, option: usize) -> u32;
    fn num_labels(&self) -> usize;
    /// Label seen at the edge into `child` under the child's option.
    fn child_label(&self, child: usize, option: usize) -> Label;
    /// Label seen at the edge into `child` under its parent's option.
    fn parent_label(&self, child: usize, option: usize) -> Label;
    fn edge_sign(&self, child: usize) -> Sign;
}

pub(crate) struct DpSolution {
    pub choice: Vec<usize>,
    pub objective: u64,
}

struct Tables {
    cap_g: Vec<usize>,
    /// `g[u][o * (cap_g + 1) + b]`: best subtree cost with option `o` and at
    /// most `b` violations strictly inside the subtree.
    g: Vec<Vec<u32>>,
    /// `h[c][a * (cap_g[c] + 2) + b]`: best cost of `c`'s subtree plus its
    /// parent edge when the parent side shows label `a`.
    h: Vec<Vec<u32>>,
}

#[inline]
fn at(row: &[u32], b: usize) -> u32 {
    row[b.min(row.len() - 1)]
}

/// Min-plus convolution of two nonincreasing at-most profiles.
fn convolve(a: &[u32], c: &[u32], cap: usize) -> Vec<u32> {
    let mut out = vec![INF; cap + 1];
    for (b, slot) in out.iter_mut().enumerate() {
        let hi = b.min(a.len() - 1);
        let best = a[..=hi].iter().enumerate().map(|(b1, &v)| v.saturating_add(at(c, b - b1))).min().unwrap_or(INF);
        *slot = best.min(INF);
    }
    out
}

fn child_profile<M: DpModel>(model: &M, c: usize, gc: &[u32], cap_g: usize, cap_h: usize) -> Vec<u32> {
    let k = model.num_labels();
    let w = cap_g + 1;
    let mut best = vec![INF; k * w];
    for co in 0..model.options(c) {
        let l = model.child_label(c, co) as usize;
        let row = &gc[co * w..(co + 1) * w];
        for (slot, &v) in best[l * w..(l + 1) * w].iter_mut().zip(row) {
            if v < *slot {
                *slot = v;
            }
        }
    }
    // Smallest and second smallest over labels, per budget.
    let mut first = vec![(INF, usize::MAX); w];
    let mut second = vec![INF; w];
    for l in 0..k {
        for b in 0..w {
            let v = best[l * w + b];
            if v < first[b].0 {
                second[b] = first[b].0;
                first[b] = (v, l);
            } else if v < second[b] {
                second[b] = v;
            }
        }
    }
    let others = |a: usize, b: usize| {
        if first[b].1 == a {
            second[b]
        } else {
            first[b].0
        }
    };
    let sign = model.edge_sign(c);
    let wh = cap_h + 1;
    let mut h = vec![INF; k * wh];
    for a in 0..k {
        for b in 0..wh {
            let bi = b.min(cap_g);
            let (keep, viol) = if sign > 0 {
                (best[a * w + bi], if b >= 1 { others(a, (b - 1).min(cap_g)) } else { INF })
            } else {
                (others(a, bi), if b >= 1 { best[a * w + (b - 1).min(cap_g)] } else { INF })
            };
            h[a * wh + b] = keep.min(viol);
        }
    }
    h
}

fn build<M: DpModel>(tree: &RootedTree, model: &M, budget: usize) -> Result<Tables> {
    let n = tree.order.len();
    let mut sub_edges = vec![0usize; n];
    for &u in tree.order.iter().rev() {
        if let Some(p) = tree.parent[u] {
            sub_edges[p] += sub_edges[u] + 1;
        }
    }
    let cap_g: Vec<usize> = sub_edges.iter().map(|&s| s.min(budget)).collect();
    let cells: usize = (0..n).map(|u| model.options(u) * (cap_g[u] + 1)).sum();
    if cells > MAX_CELLS {
        return Err(Error::TooLarge(format!("budget table needs {cells} cells (limit {MAX_CELLS})")));
    }
    let mut g: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut h: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &u in tree.order.iter().rev() {
        for &c in &tree.children[u] {
            let cap_h = (sub_edges[c] + 1).min(budget);
            h[c] = child_profile(model, c, &g[c], cap_g[c], cap_h);
        }
        let w = cap_g[u] + 1;
        let mut table = vec![INF; model.options(u) * w];
        for o in 0..model.options(u) {
            let mut acc = vec![model.cost(u, o)];
            let mut acc_cap = 0usize;
            for &c in &tree.children[u] {
                let wh = cap_g[c] + 2;
                let wh = wh.min(budget + 1);
                let a = model.parent_label(c, o) as usize;
                let row = &h[c][a * wh..(a + 1) * wh];
                acc_cap = (acc_cap + wh - 1).min(budget);
                acc = convolve(&acc, row, acc_cap);
            }
            debug_assert_eq!(acc.len(), w);
            table[o * w..(o + 1) * w].copy_from_slice(&acc);
        }
        g[u] = table;
    }
    Ok(Tables { cap_g, g, h })
}

/// Optimal choice per node, or `None` when no assignment meets the budget.
pub(crate) fn solve<M: DpModel>(tree: &RootedTree, model: &M, budget: usize) -> Result<Option<DpSolution>> {
    let n = tree.order.len();
    let t = build(tree, model, budget)?;
    let root = tree.order[0];
    let mut choice = vec![0usize; n];
    let mut node_budget = vec![0usize; n];
    let w_root = t.cap_g[root] + 1;
    let mut best = (INF, 0usize);
    for o in 0..model.options(root) {
        let v = t.g[root][o * w_root + t.cap_g[root]];
        if v < best.0 {
            best = (v, o);
        }
    }
    if best.0 >= INF {
        return Ok(None);
    }
    choice[root] = best.1;
    node_budget[root] = t.cap_g[root];
    let width_h = |c: usize| (t.cap_g[c] + 2).min(budget + 1);
    for &u in &tree.order {
        let o = choice[u];
        let kids = &tree.children[u];
        if kids.is_empty() {
            continue;
        }
        let rows: Vec<&[u32]> = kids
            .iter()
            .map(|&c| {
                let wh = width_h(c);
                let a = model.parent_label(c, o) as usize;
                &t.h[c][a * wh..(a + 1) * wh]
            })
            .collect();
        // suffix[i] = convolution of rows[i..].
        let mut suffix: Vec<Vec<u32>> = vec![vec![0]; kids.len() + 1];
        let mut cap = 0usize;
        for i in (0..kids.len()).rev() {
            cap = (cap + rows[i].len() - 1).min(budget);
            suffix[i] = convolve(&suffix[i + 1], rows[i], cap);
        }
        let mut b = node_budget[u];
        for (i, &c) in kids.iter().enumerate() {
            let target = at(&suffix[i], b);
            let max_b1 = b.min(rows[i].len() - 1);
            let b1 = (0..=max_b1)
                .find(|&b1| rows[i][b1].saturating_add(at(&suffix[i + 1], b - b1)) == target)
                .expect("optimal split exists");
            let a = model.parent_label(c, o);
            let sign = model.edge_sign(c);
            let w = t.cap_g[c] + 1;
            let (co, sub_b) = (0..model.options(c))
                .find_map(|co| {
                    let viol = usize::from(phi(a, model.child_label(c, co)) != sign);
                    if b1 < viol {
                        return None;
                    }
                    let sb = (b1 - viol).min(t.cap_g[c]);
                    (t.g[c][co * w + sb] == rows[i][b1]).then_some((co, sb))
                })
                .expect("optimal child option exists");
            choice[c] = co;
            node_budget[c] = sub_b;
            b -= b1;
        }
    }
    Ok(Some(DpSolution { choice, objective: best.0 as u64 }))
}
