//! Tree decompositions: elimination heuristics, validation, extended bags
//! and the structural statistics consumed by the bounds.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;

/// Largest extended bag for which mincut* is enumerated exactly.
pub const EXACT_MINCUT_LIMIT: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Heuristic {
    #[default]
    MinFill,
    MinDegree,
}

impl std::str::FromStr for Heuristic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-fill" => Ok(Self::MinFill),
            "min-degree" => Ok(Self::MinDegree),
            _ => Err(Error::Config(format!("unknown heuristic {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MincutStar {
    /// `None` when the bag has a single vertex and admits no split.
    pub value: Option<usize>,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompStats {
    pub wid: usize,
    pub wid_star: usize,
    pub deg_t: usize,
    pub deg_e_star: usize,
    pub max_edges_star: usize,
    pub edges_star: Vec<usize>,
    pub mincut_star: Vec<MincutStar>,
}

impl DecompStats {
    /// True when every mincut* value was computed exactly.
    pub fn all_exact(&self) -> bool {
        self.mincut_star.iter().all(|m| m.exact)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeDecomposition {
    /// Sorted vertex lists.
    pub bags: Vec<Vec<usize>>,
    /// Bag index pairs `(a, b)` with `a < b`.
    pub tree_edges: Vec<(usize, usize)>,
    pub extended_bags: Vec<Vec<usize>>,
    pub stats: DecompStats,
}

impl TreeDecomposition {
    /// Builds extended bags and statistics for the given bags and tree.
    /// The result is not validated.
    pub fn from_parts(g: &LabeledGraph, mut bags: Vec<Vec<usize>>, tree_edges: Vec<(usize, usize)>) -> Result<Self> {
        if bags.is_empty() {
            return Err(Error::Decomposition("decomposition has no bags".into()));
        }
        for bag in &mut bags {
            bag.sort_unstable();
            bag.dedup();
            if bag.is_empty() {
                return Err(Error::Decomposition("empty bag".into()));
            }
            if let Some(&v) = bag.iter().find(|&&v| v >= g.n()) {
                return Err(Error::Decomposition(format!("bag vertex {v} outside graph")));
            }
        }
        let b = bags.len();
        let tree_edges: Vec<(usize, usize)> = tree_edges.into_iter().map(|(a, c)| (a.min(c), a.max(c))).collect();
        if let Some(&(a, c)) = tree_edges.iter().find(|&&(a, c)| c >= b || a == c) {
            return Err(Error::Decomposition(format!("bad tree edge ({a},{c})")));
        }
        let extended_bags: Vec<Vec<usize>> = bags.iter().map(|w| extend_bag(g, w)).collect();
        let stats = compute_stats(g, &bags, &tree_edges, &extended_bags);
        Ok(Self { bags, tree_edges, extended_bags, stats })
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    /// Neighbor lists of the bag tree.
    pub fn tree_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.bags.len()];
        for &(a, b) in &self.tree_edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Text dump: bag count, bags, tree edges, extended bags.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.bags.len());
        let line = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        for bag in &self.bags {
            let _ = writeln!(out, "{}", line(bag));
        }
        for &(a, b) in &self.tree_edges {
            let _ = writeln!(out, "{a} {b}");
        }
        for bag in &self.extended_bags {
            let _ = writeln!(out, "{}", line(bag));
        }
        out
    }

    /// Parses [`TreeDecomposition::to_text`] output; extended bags, when
    /// present, must match the ones recomputed from `g`.
    pub fn from_text(g: &LabeledGraph, text: &str) -> Result<Self> {
        let fmt = |m: String| Error::Format(m);
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let count: usize = lines
            .next()
            .ok_or_else(|| fmt("empty decomposition".into()))?
            .parse()
            .map_err(|_| fmt("bad bag count".into()))?;
        let parse_line = |l: &str| -> Result<Vec<usize>> {
            l.split_whitespace().map(|t| t.parse::<usize>().map_err(|_| fmt(format!("bad vertex {t:?}")))).collect()
        };
        let mut bags = Vec::with_capacity(count);
        for _ in 0..count {
            bags.push(parse_line(lines.next().ok_or_else(|| fmt("missing bag line".into()))?)?);
        }
        let mut edges = Vec::with_capacity(count.saturating_sub(1));
        for _ in 1..count {
            let pair = parse_line(lines.next().ok_or_else(|| fmt("missing tree edge".into()))?)?;
            if pair.len() != 2 {
                return Err(fmt("tree edge needs two bag indices".into()));
            }
            edges.push((pair[0], pair[1]));
        }
        let td = Self::from_parts(g, bags, edges).map_err(|e| fmt(e.to_string()))?;
        let rest: Vec<&str> = lines.collect();
        if !rest.is_empty() {
            if rest.len() != count {
                return Err(fmt(format!("expected {count} extended bags, found {}", rest.len())));
            }
            for (i, l) in rest.iter().enumerate() {
                let mut ext = parse_line(l)?;
                ext.sort_unstable();
                if ext != td.extended_bags[i] {
                    return Err(fmt(format!("extended bag {i} does not match the graph")));
                }
            }
        }
        Ok(td)
    }
}

/// `W ∪ N(W)`, sorted.
pub fn extend_bag(g: &LabeledGraph, w: &[usize]) -> Vec<usize> {
    let mut out: BTreeSet<usize> = w.iter().copied().collect();
    for &v in w {
        out.extend(g.neighbors(v));
    }
    out.into_iter().collect()
}

/// Edges of the subgraph induced by `vertices` (global edge indices).
pub(crate) fn induced_edges(g: &LabeledGraph, vertices: &[usize]) -> Vec<usize> {
    let set: HashSet<usize> = vertices.iter().copied().collect();
    let mut out = Vec::new();
    for &v in vertices {
        for &(u, e) in g.incident(v) {
            if v < u && set.contains(&u) {
                out.push(e);
            }
        }
    }
    out.sort_unstable();
    out
}

fn compute_stats(
    g: &LabeledGraph,
    bags: &[Vec<usize>],
    tree_edges: &[(usize, usize)],
    ext: &[Vec<usize>],
) -> DecompStats {
    let wid = bags.iter().map(Vec::len).max().unwrap_or(1) - 1;
    let wid_star = ext.iter().map(Vec::len).max().unwrap_or(1) - 1;
    let mut deg = vec![0usize; bags.len()];
    for &(a, b) in tree_edges {
        deg[a] += 1;
        deg[b] += 1;
    }
    let deg_t = deg.into_iter().max().unwrap_or(0);
    let per_bag: Vec<(Vec<usize>, MincutStar)> =
        bags.par_iter().zip(ext.par_iter()).map(|(w, ws)| (induced_edges(g, ws), mincut_star(g, w, ws))).collect();
    let mut cover = vec![0usize; g.m()];
    for (edges, _) in &per_bag {
        for &e in edges {
            cover[e] += 1;
        }
    }
    let edges_star: Vec<usize> = per_bag.iter().map(|(e, _)| e.len()).collect();
    DecompStats {
        wid,
        wid_star,
        deg_t,
        deg_e_star: cover.into_iter().max().unwrap_or(0),
        max_edges_star: edges_star.iter().copied().max().unwrap_or(0),
        edges_star,
        mincut_star: per_bag.into_iter().map(|(_, m)| m).collect(),
    }
}

/// Minimum number of `G(W*)` edges crossing a split `S ⊂ W*` that leaves
/// vertices of `W` on both sides. Exact for `|W*| ≤ 14`; above that the
/// minimum degree inside `G(W*)` over vertices of `W` stands in.
pub fn mincut_star(g: &LabeledGraph, w: &[usize], w_star: &[usize]) -> MincutStar {
    if w.len() < 2 {
        return MincutStar { value: None, exact: true };
    }
    let pos = |v: usize| w_star.binary_search(&v).ok();
    if w_star.len() > EXACT_MINCUT_LIMIT {
        let value = w.iter().map(|&v| g.neighbors(v).filter(|&u| pos(u).is_some()).count()).min();
        return MincutStar { value, exact: false };
    }
    let s = w_star.len();
    let mut nbr = vec![0u32; s];
    for (i, &v) in w_star.iter().enumerate() {
        for u in g.neighbors(v) {
            if let Some(j) = pos(u) {
                nbr[i] |= 1 << j;
            }
        }
    }
    let wmask: u32 = w.iter().filter_map(|&v| pos(v)).fold(0, |m, i| m | (1 << i));
    // Gray-code walk over all subsets, tracking the cut size incrementally.
    let mut mask = 0u32;
    let mut cut: i64 = 0;
    let mut best = usize::MAX;
    for step in 1u32..(1u32 << s) {
        let i = step.trailing_zeros() as usize;
        let bit = 1u32 << i;
        let deg = nbr[i].count_ones() as i64;
        let inside = (nbr[i] & mask).count_ones() as i64;
        if mask & bit == 0 {
            cut += deg - 2 * inside;
        } else {
            cut -= deg - 2 * inside;
        }
        mask ^= bit;
        let split = mask & wmask;
        if split != 0 && split != wmask {
            best = best.min(cut as usize);
        }
    }
    MincutStar { value: Some(best), exact: true }
}

struct Elimination {
    adj: Vec<HashSet<usize>>,
    alive: Vec<bool>,
}

impl Elimination {
    fn fill(&self, v: usize) -> usize {
        let nb: Vec<usize> = self.adj[v].iter().copied().collect();
        let mut missing = 0;
        for i in 0..nb.len() {
            for j in i + 1..nb.len() {
                if !self.adj[nb[i]].contains(&nb[j]) {
                    missing += 1;
                }
            }
        }
        missing
    }

    fn key(&self, v: usize, h: Heuristic) -> (usize, usize, usize) {
        let d = self.adj[v].len();
        match h {
            Heuristic::MinFill => (self.fill(v), d, v),
            Heuristic::MinDegree => (d, 0, v),
        }
    }
}

/// Elimination ordering and the bag of each eliminated vertex.
fn eliminate(g: &LabeledGraph, h: Heuristic) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = g.n();
    let mut st = Elimination { adj: (0..n).map(|v| g.neighbors(v).collect()).collect(), alive: vec![true; n] };
    let mut keys: Vec<(usize, usize, usize)> = (0..n).map(|v| st.key(v, h)).collect();
    let mut queue: BTreeSet<(usize, usize, usize)> = keys.iter().copied().collect();
    let mut order = Vec::with_capacity(n);
    let mut bags = vec![Vec::new(); n];
    while let Some(top) = queue.pop_first() {
        let v = top.2;
        let nb: Vec<usize> = {
            let mut x: Vec<usize> = st.adj[v].iter().copied().collect();
            x.sort_unstable();
            x
        };
        let mut bag = nb.clone();
        bag.push(v);
        bag.sort_unstable();
        bags[v] = bag;
        order.push(v);
        st.alive[v] = false;
        for &a in &nb {
            st.adj[a].remove(&v);
        }
        for i in 0..nb.len() {
            for j in i + 1..nb.len() {
                st.adj[nb[i]].insert(nb[j]);
                st.adj[nb[j]].insert(nb[i]);
            }
        }
        st.adj[v].clear();
        // Fill scores can change within distance two of v.
        let mut touched: BTreeSet<usize> = nb.iter().copied().collect();
        if h == Heuristic::MinFill {
            for &a in &nb {
                touched.extend(st.adj[a].iter().copied());
            }
        }
        for u in touched {
            if !st.alive[u] {
                continue;
            }
            let nk = st.key(u, h);
            if nk != keys[u] {
                queue.remove(&keys[u]);
                keys[u] = nk;
                queue.insert(nk);
            }
        }
    }
    (order, bags)
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    // Both sorted.
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

/// Decomposition from an elimination heuristic. Bags are made
/// non-redundant (no bag is a subset of an adjacent bag) and numbered in
/// BFS order from bag 0.
pub fn decompose(g: &LabeledGraph, h: Heuristic) -> Result<TreeDecomposition> {
    let n = g.n();
    let (order, bags) = eliminate(g, h);
    let mut rank = vec![0usize; n];
    for (i, &v) in order.iter().enumerate() {
        rank[v] = i;
    }
    // Bag tree over eliminated vertices; component roots chained together.
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut roots = Vec::new();
    for &v in &order {
        match bags[v].iter().filter(|&&u| u != v).min_by_key(|&&u| rank[u]) {
            Some(&p) => {
                adj[v].insert(p);
                adj[p].insert(v);
            }
            None => roots.push(v),
        }
    }
    for w in roots.windows(2) {
        adj[w[0]].insert(w[1]);
        adj[w[1]].insert(w[0]);
    }
    // Contract tree edges whose bags are nested.
    let mut alive = vec![true; n];
    let mut work: VecDeque<usize> = order.iter().copied().collect();
    while let Some(a) = work.pop_front() {
        if !alive[a] {
            continue;
        }
        let host = adj[a].iter().copied().find(|&b| is_subset(&bags[a], &bags[b]));
        if let Some(b) = host {
            alive[a] = false;
            let nbrs: Vec<usize> = adj[a].iter().copied().filter(|&c| c != b).collect();
            adj[a].clear();
            adj[b].remove(&a);
            for c in nbrs {
                adj[c].remove(&a);
                adj[c].insert(b);
                adj[b].insert(c);
                work.push_back(c);
            }
            work.push_back(b);
        }
    }
    let root = *order.iter().rev().find(|&&v| alive[v]).expect("one bag survives");
    let mut index = vec![usize::MAX; n];
    let mut out_bags = Vec::new();
    let mut out_edges = Vec::new();
    let mut queue = VecDeque::from([root]);
    index[root] = 0;
    out_bags.push(bags[root].clone());
    while let Some(a) = queue.pop_front() {
        let mut kids: Vec<usize> = adj[a].iter().copied().filter(|&c| index[c] == usize::MAX).collect();
        kids.sort_by(|x, y| bags[*x].cmp(&bags[*y]));
        for c in kids {
            index[c] = out_bags.len();
            out_bags.push(bags[c].clone());
            out_edges.push((index[a], index[c]));
            queue.push_back(c);
        }
    }
    TreeDecomposition::from_parts(g, out_bags, out_edges)
}

pub fn min_fill_decomposition(g: &LabeledGraph) -> Result<TreeDecomposition> {
    decompose(g, Heuristic::MinFill)
}

pub fn min_degree_decomposition(g: &LabeledGraph) -> Result<TreeDecomposition> {
    decompose(g, Heuristic::MinDegree)
}

/// Per-condition validation outcome; `None` means the condition holds,
/// otherwise the field carries a witness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ValidationReport {
    /// A vertex in no bag.
    pub uncovered_vertex: Option<usize>,
    /// A graph edge contained in no bag.
    pub uncovered_edge: Option<(usize, usize)>,
    /// A vertex whose bags do not form a connected subtree.
    pub broken_intersection: Option<usize>,
    /// Why the bag structure is not a tree.
    pub not_a_tree: Option<String>,
    /// Adjacent bags with the first contained in the second.
    pub redundant: Option<(usize, usize)>,
    /// A bag whose extended bag is not `W ∪ N(W)`.
    pub bad_extension: Option<usize>,
}

impl ValidationReport {
    /// Covering, edge, running-intersection and tree conditions all hold.
    pub fn is_valid(&self) -> bool {
        self.uncovered_vertex.is_none()
            && self.uncovered_edge.is_none()
            && self.broken_intersection.is_none()
            && self.not_a_tree.is_none()
            && self.bad_extension.is_none()
    }

    pub fn all_pass(&self) -> bool {
        self.is_valid() && self.redundant.is_none()
    }
}

pub fn validate_decomposition(g: &LabeledGraph, td: &TreeDecomposition) -> ValidationReport {
    let b = td.bags.len();
    let mut report = ValidationReport::default();
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); g.n()];
    for (i, bag) in td.bags.iter().enumerate() {
        for &v in bag {
            if v < g.n() {
                holders[v].push(i);
            }
        }
    }
    report.uncovered_vertex = holders.iter().position(Vec::is_empty);
    let sets: Vec<HashSet<usize>> = td.bags.iter().map(|w| w.iter().copied().collect()).collect();
    report.uncovered_edge = g.edges().iter().copied().find(|&(u, v)| !holders[u].iter().any(|&i| sets[i].contains(&v)));
    let adj = td.tree_adjacency();
    if td.tree_edges.len() + 1 != b {
        report.not_a_tree = Some(format!("{} tree edges for {b} bags", td.tree_edges.len()));
    } else {
        let mut seen = vec![false; b];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for &c in &adj[a] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            report.not_a_tree = Some(format!("bag {i} unreachable from bag 0"));
        }
    }
    report.broken_intersection = (0..g.n()).find(|&v| {
        let hs = &holders[v];
        if hs.len() <= 1 {
            return false;
        }
        let mut seen: HashSet<usize> = HashSet::from([hs[0]]);
        let mut stack = vec![hs[0]];
        while let Some(a) = stack.pop() {
            for &c in &adj[a] {
                if sets[c].contains(&v) && seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        seen.len() != hs.len()
    });
    report.redundant = td.tree_edges.iter().find_map(|&(a, c)| {
        if is_subset(&td.bags[a], &td.bags[c]) {
            Some((a, c))
        } else if is_subset(&td.bags[c], &td.bags[a]) {
            Some((c, a))
        } else {
            None
        }
    });
    report.bad_extension = (0..b).find(|&i| td.extended_bags.get(i) != Some(&extend_bag(g, &td.bags[i])));
    report
}
