//! Per-bag labelings: maximize edge agreement on each extended bag, then
//! align the result to the observed labels with a label permutation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{derive_seed, rng_from_seed};
use crate::decomposition::TreeDecomposition;
use crate::error::{input_err, Error, Result};
use crate::graph::{apply_perm, disagreement_raw, EdgeSigns, FullPerm, Label, LabeledGraph, NodeLabeling};
use crate::tree_solver::labeling_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalMethod {
    Exact,
    LocalSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Matcher {
    #[default]
    Greedy,
    Exact,
}

impl std::str::FromStr for Matcher {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Self::Greedy),
            "exact" => Ok(Self::Exact),
            _ => Err(Error::Config(format!("unknown matcher {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalOptions {
    pub matcher: Matcher,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self { matcher: Matcher::Greedy, restarts: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagLabeling {
    pub bag_index: usize,
    /// Vertices of the bag, sorted.
    pub vertices: Vec<usize>,
    /// Vertices of the extended bag, sorted.
    pub vertices_star: Vec<usize>,
    pub labels_star: NodeLabeling,
    /// Restriction of `labels_star` to the bag, in bag order.
    pub labels: NodeLabeling,
    pub agreement: usize,
    pub edges: usize,
    pub method: LocalMethod,
    pub restarts: usize,
}

fn agreement(sub: &LabeledGraph, labels: &[Label], x: &EdgeSigns) -> usize {
    sub.m() - disagreement_raw(sub, labels, x.signs())
}

/// Exhaustive maximum-agreement labeling by branch and bound.
///
/// Ties are broken by Hamming distance to `hint` when given, then by the
/// lexicographically smallest label vector.
pub fn solve_bag_exact(
    sub: &LabeledGraph,
    x_sub: &EdgeSigns,
    k: u32,
    hint: Option<&NodeLabeling>,
) -> Result<NodeLabeling> {
    let n = sub.n();
    x_sub.check_len(sub.m())?;
    if let Some(h) = hint {
        h.check_len(n)?;
    }
    if labeling_count(k, n).is_none() {
        return Err(Error::TooLarge(format!("{k}^{n} labelings exceed the exact-solve guard")));
    }
    // Edges to earlier vertices, checked when the later endpoint is set.
    let mut back: Vec<Vec<(usize, i8)>> = vec![Vec::new(); n];
    for (e, &(u, v)) in sub.edges().iter().enumerate() {
        back[v].push((u, x_sub.get(e)));
    }
    struct Search<'a> {
        back: &'a [Vec<(usize, i8)>],
        hint: Option<&'a [Label]>,
        k: u32,
        cur: Vec<Label>,
        best: (usize, usize),
        best_labels: Vec<Label>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, dis: usize, ham: usize) {
            if (dis, ham) >= self.best {
                return;
            }
            if i == self.cur.len() {
                self.best = (dis, ham);
                self.best_labels.clone_from(&self.cur);
                return;
            }
            // Without a hint labels are interchangeable: only open one new label at a time.
            let top = match self.hint {
                Some(_) => self.k,
                None => (self.cur[..i].iter().max().map_or(0, |&m| m + 1) + 1).min(self.k),
            };
            for l in 0..top {
                let d = self.back[i].iter().filter(|&&(u, s)| crate::graph::phi(l, self.cur[u]) != s).count();
                let h = self.hint.map_or(0, |z| usize::from(z[i] != l));
                self.cur[i] = l;
                self.go(i + 1, dis + d, ham + h);
            }
        }
    }
    let mut s = Search {
        back: &back,
        hint: hint.map(|h| h.labels()),
        k,
        cur: vec![0; n],
        best: (usize::MAX, usize::MAX),
        best_labels: vec![0; n],
    };
    s.go(0, 0, 0);
    Ok(NodeLabeling::new_unchecked(s.best_labels, k))
}

/// Best strictly improving merge of one label class into another, as
/// `(from, into)`.
fn best_merge(sub: &LabeledGraph, x: &EdgeSigns, k: u32, labels: &[Label]) -> Option<(Label, Label)> {
    let k = k as usize;
    // gain[a][b]: agreement change from relabeling class a to b.
    let mut gain = vec![0i64; k * k];
    for (e, &(u, v)) in sub.edges().iter().enumerate() {
        let (a, b) = (labels[u] as usize, labels[v] as usize);
        if a != b {
            let s = i64::from(x.get(e));
            gain[a * k + b] += s;
            gain[b * k + a] += s;
        }
    }
    let mut best = (0i64, None);
    for a in 0..k {
        for b in 0..k {
            if a != b && gain[a * k + b] > best.0 {
                best = (gain[a * k + b], Some((a as Label, b as Label)));
            }
        }
    }
    best.1
}

/// Best strictly improving relabeling of a block, a maximal set of
/// equally labeled vertices joined by positive edges. Returns the block's
/// vertices and the new label.
fn best_block_move(sub: &LabeledGraph, x: &EdgeSigns, k: u32, labels: &[Label]) -> Option<(Vec<usize>, Label)> {
    let n = sub.n();
    let mut block = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if block[s] != usize::MAX {
            continue;
        }
        let id = members.len();
        let mut list = vec![s];
        block[s] = id;
        let mut i = 0;
        while i < list.len() {
            let v = list[i];
            i += 1;
            for &(u, e) in sub.incident(v) {
                if block[u] == usize::MAX && x.get(e) > 0 && labels[u] == labels[v] {
                    block[u] = id;
                    list.push(u);
                }
            }
        }
        members.push(list);
    }
    let k = k as usize;
    let mut best: (i64, Option<(usize, Label)>) = (0, None);
    let mut gain = vec![0i64; k];
    for (id, list) in members.iter().enumerate() {
        gain.iter_mut().for_each(|g| *g = 0);
        let a = labels[list[0]];
        for &v in list {
            for &(u, e) in sub.incident(v) {
                if block[u] == id {
                    continue;
                }
                let s = x.get(e);
                let before = i64::from(crate::graph::phi(a, labels[u]) == s);
                for (l, g) in gain.iter_mut().enumerate() {
                    *g += i64::from(crate::graph::phi(l as Label, labels[u]) == s) - before;
                }
            }
        }
        for (l, &g) in gain.iter().enumerate() {
            if g > best.0 {
                best = (g, Some((id, l as Label)));
            }
        }
    }
    best.1.map(|(id, l)| (members.swap_remove(id), l))
}

/// Local search from `labels`: single-vertex best-improvement sweeps; once
/// those stall, the best improving merge of two label classes, then the best
/// improving block relabeling.
/// Every accepted move strictly increases agreement; returns moves made.
fn local_search(sub: &LabeledGraph, x: &EdgeSigns, k: u32, labels: &mut [Label], max_moves: usize) -> usize {
    let n = sub.n();
    let mut score = vec![0i64; k as usize];
    let mut moves = 0;
    loop {
        let mut moved = false;
        for v in 0..n {
            score.iter_mut().for_each(|s| *s = 0);
            // Agreement of v under each label, up to the constant count of
            // negative edges.
            for &(u, e) in sub.incident(v) {
                score[labels[u] as usize] += i64::from(x.get(e));
            }
            let cur = labels[v] as usize;
            let mut best = cur;
            for l in 0..k as usize {
                if score[l] > score[best] {
                    best = l;
                }
            }
            if best != cur {
                labels[v] = best as Label;
                moves += 1;
                moved = true;
                if moves >= max_moves {
                    return moves;
                }
            }
        }
        if moved {
            continue;
        }
        if let Some((from, into)) = best_merge(sub, x, k, labels) {
            labels.iter_mut().filter(|l| **l == from).for_each(|l| *l = into);
        } else if let Some((vertices, to)) = best_block_move(sub, x, k, labels) {
            vertices.into_iter().for_each(|v| labels[v] = to);
        } else {
            return moves;
        }
        moves += 1;
        if moves >= max_moves {
            return moves;
        }
    }
}

/// Moves vertices to their observed label whenever that leaves edge
/// agreement unchanged, so that vertices tied under the edge objective
/// follow `z`.
fn polish_toward(sub: &LabeledGraph, x: &EdgeSigns, labels: &mut [Label], z: &[Label]) -> usize {
    let mut moves = 0;
    loop {
        let mut moved = false;
        for v in 0..sub.n() {
            if labels[v] == z[v] {
                continue;
            }
            let gain: i64 = sub
                .incident(v)
                .iter()
                .map(|&(u, e)| {
                    let s = i64::from(x.get(e));
                    i64::from(labels[u] == z[v]) * s - i64::from(labels[u] == labels[v]) * s
                })
                .sum();
            if gain == 0 {
                labels[v] = z[v];
                moves += 1;
                moved = true;
            }
        }
        if !moved {
            return moves;
        }
    }
}

/// Constructive labeling: vertices in BFS order, each taking the label
/// that best agrees with its already labeled neighbors (ties to the
/// smallest label).
fn greedy_construct(sub: &LabeledGraph, x: &EdgeSigns, k: u32) -> Vec<Label> {
    let n = sub.n();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut score = vec![0i64; k as usize];
    let mut queued = vec![false; n];
    for s in 0..n {
        if queued[s] {
            continue;
        }
        queued[s] = true;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            score.iter_mut().for_each(|c| *c = 0);
            for &(u, e) in sub.incident(v) {
                if let Some(l) = labels[u] {
                    score[l as usize] += i64::from(x.get(e));
                }
                if !queued[u] {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
            let best = (0..k as usize).fold(0, |b, l| if score[l] > score[b] { l } else { b });
            labels[v] = Some(best as Label);
        }
    }
    labels.into_iter().map(|l| l.expect("every vertex visited")).collect()
}

/// Correlation clustering into at most `k` clusters by restarted local
/// search. The first restart starts from `init` when given, the next from
/// a greedy BFS construction, and the rest from uniformly random labelings.
/// The best restart by agreement wins, earlier restarts winning ties.
pub fn solve_bag_cc(
    sub: &LabeledGraph,
    x_sub: &EdgeSigns,
    k: u32,
    restarts: usize,
    seed: u64,
    init: Option<&NodeLabeling>,
) -> Result<NodeLabeling> {
    if k < 2 {
        return input_err("k must be at least 2");
    }
    x_sub.check_len(sub.m())?;
    if let Some(z) = init {
        z.check_len(sub.n())?;
    }
    let n = sub.n();
    let mut rng = rng_from_seed(seed);
    let mut best: Option<(usize, Vec<Label>)> = None;
    let offset = usize::from(init.is_none());
    for r in 0..restarts.max(1) {
        let mut labels: Vec<Label> = match (r + offset, init) {
            (0, Some(z)) => z.labels().to_vec(),
            (1, _) => greedy_construct(sub, x_sub, k),
            _ => (0..n).map(|_| rng.gen_range(0..k)).collect(),
        };
        local_search(sub, x_sub, k, &mut labels, 100 * n.max(1));
        let a = agreement(sub, &labels, x_sub);
        if best.as_ref().is_none_or(|(b, _)| a > *b) {
            best = Some((a, labels));
        }
    }
    Ok(NodeLabeling::new_unchecked(best.expect("at least one restart").1, k))
}

fn intersections(y_bar: &NodeLabeling, z: &NodeLabeling, k: u32) -> Result<Vec<Vec<i64>>> {
    if y_bar.len() != z.len() {
        return input_err("labelings differ in length");
    }
    let k = k as usize;
    let mut w = vec![vec![0i64; k]; k];
    for (&a, &b) in y_bar.labels().iter().zip(z.labels()) {
        if a as usize >= k || b as usize >= k {
            return input_err("label outside 0..k");
        }
        w[a as usize][b as usize] += 1;
    }
    Ok(w)
}

/// Total intersection weight `Σ_i I[i][π(i)]`.
pub fn match_weight(y_bar: &NodeLabeling, z: &NodeLabeling, perm: &FullPerm) -> usize {
    y_bar.labels().iter().zip(z.labels()).filter(|(&a, &b)| perm.apply(a) == b).count()
}

/// Greedy permutation alignment: repeatedly match the largest remaining
/// intersection count (ties to smaller source, then smaller target), then
/// map unmatched labels to unmatched targets in increasing order.
pub fn greedy_match(y_bar: &NodeLabeling, z: &NodeLabeling, k: u32) -> Result<FullPerm> {
    let w = intersections(y_bar, z, k)?;
    let k = k as usize;
    let mut cells: Vec<(i64, usize, usize)> = Vec::new();
    for (i, row) in w.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                cells.push((-c, i, j));
            }
        }
    }
    cells.sort_unstable();
    let mut map = vec![usize::MAX; k];
    let mut used = vec![false; k];
    for (_, i, j) in cells {
        if map[i] == usize::MAX && !used[j] {
            map[i] = j;
            used[j] = true;
        }
    }
    let mut free = (0..k).filter(|&j| !used[j]);
    for slot in map.iter_mut().filter(|m| **m == usize::MAX) {
        *slot = free.next().expect("as many free targets as free sources");
    }
    FullPerm::new(map.into_iter().map(|j| j as Label).collect())
}

/// Minimum-cost assignment with potentials; returns the row assignment and
/// dual potentials satisfying `cost[i][j] - u[i] - v[j] >= 0`, with
/// equality on every optimal assignment's edges.
fn hungarian(cost: &[Vec<i64>]) -> (Vec<usize>, Vec<i64>, Vec<i64>) {
    let n = cost.len();
    const BIG: i64 = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![BIG; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = BIG;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    (assign, u[1..].to_vec(), v[1..].to_vec())
}

/// Permutation maximizing total intersection weight (equivalently,
/// minimizing Hamming distance to `z`); among optima the lexicographically
/// smallest mapping.
pub fn optimal_match(y_bar: &NodeLabeling, z: &NodeLabeling, k: u32) -> Result<FullPerm> {
    let w = intersections(y_bar, z, k)?;
    let k = k as usize;
    let cost: Vec<Vec<i64>> = w.iter().map(|row| row.iter().map(|&c| -c).collect()).collect();
    let (mut assign, u, v) = hungarian(&cost);
    // Optimal assignments are exactly the perfect matchings on tight edges.
    let tight = |i: usize, j: usize| cost[i][j] - u[i] - v[j] == 0;
    let mut owner = vec![0usize; k];
    for (i, &j) in assign.iter().enumerate() {
        owner[j] = i;
    }
    for i in 0..k {
        for j in 0..k {
            if !tight(i, j) {
                continue;
            }
            if assign[i] == j {
                break;
            }
            // Move i to j; the displaced row r must reach i's old column
            // along tight edges through rows not yet fixed.
            let r = owner[j];
            if r < i {
                continue;
            }
            let target = assign[i];
            if let Some(path) = augment(k, i, r, target, j, &assign, &owner, &tight) {
                assign[i] = j;
                owner[j] = i;
                for (row, col) in path {
                    assign[row] = col;
                    owner[col] = row;
                }
                break;
            }
        }
    }
    FullPerm::new(assign.into_iter().map(|j| j as Label).collect())
}

/// Alternating path on tight edges from row `start` to the free column
/// `target`, through rows greater than `fixed` and never using column
/// `taken`; returns the new (row, column) pairs.
#[allow(clippy::too_many_arguments)]
fn augment(
    k: usize,
    fixed: usize,
    start: usize,
    target: usize,
    taken: usize,
    assign: &[usize],
    owner: &[usize],
    tight: &impl Fn(usize, usize) -> bool,
) -> Option<Vec<(usize, usize)>> {
    let mut col_from = vec![usize::MAX; k];
    let mut seen_row = vec![false; k];
    seen_row[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(r) = queue.pop_front() {
        for c in 0..k {
            if c == taken || col_from[c] != usize::MAX || !tight(r, c) {
                continue;
            }
            col_from[c] = r;
            if c == target {
                let mut path = Vec::new();
                let mut col = c;
                loop {
                    let row = col_from[col];
                    path.push((row, col));
                    if row == start {
                        return Some(path);
                    }
                    col = assign[row];
                }
            }
            let next = owner[c];
            if next > fixed && !seen_row[next] {
                seen_row[next] = true;
                queue.push_back(next);
            }
        }
    }
    None
}

/// Per-bag local labelings, processed in parallel and returned in bag order.
pub fn local_labelings(
    g: &LabeledGraph,
    td: &TreeDecomposition,
    x: &EdgeSigns,
    z: &NodeLabeling,
    k: u32,
    opts: &LocalOptions,
) -> Result<Vec<BagLabeling>> {
    x.check_len(g.m())?;
    z.check_len(g.n())?;
    (0..td.len())
        .into_par_iter()
        .map(|b| {
            let ws = &td.extended_bags[b];
            let (sub, origin) = g.induced(ws);
            let x_sub = x.select(&origin);
            let z_sub = z.restrict(ws);
            let (y_bar, method) = if labeling_count(k, ws.len()).is_some() {
                (solve_bag_exact(&sub, &x_sub, k, Some(&z_sub))?, LocalMethod::Exact)
            } else {
                let seed = derive_seed(opts.seed, b as u64);
                (solve_bag_cc(&sub, &x_sub, k, opts.restarts, seed, Some(&z_sub))?, LocalMethod::LocalSearch)
            };
            let perm = match opts.matcher {
                Matcher::Greedy => greedy_match(&y_bar, &z_sub, k)?,
                Matcher::Exact => optimal_match(&y_bar, &z_sub, k)?,
            };
            let mut labels_star = apply_perm(&y_bar, &perm);
            if method == LocalMethod::LocalSearch {
                let mut raw = labels_star.into_labels();
                polish_toward(&sub, &x_sub, &mut raw, z_sub.labels());
                labels_star = NodeLabeling::new_unchecked(raw, k);
            }
            let agree = agreement(&sub, labels_star.labels(), &x_sub);
            debug_assert_eq!(agree, agreement(&sub, y_bar.labels(), &x_sub));
            let pos: Vec<usize> =
                td.bags[b].iter().map(|v| ws.binary_search(v).expect("bag inside its extension")).collect();
            let labels = labels_star.restrict(&pos);
            Ok(BagLabeling {
                bag_index: b,
                vertices: td.bags[b].clone(),
                vertices_star: ws.clone(),
                labels_star,
                labels,
                agreement: agree,
                edges: sub.m(),
                method,
                restarts: if method == LocalMethod::Exact { 0 } else { opts.restarts.max(1) },
            })
        })
        .collect()
}
