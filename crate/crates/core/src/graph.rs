//! Graphs, labelings, edge signs and the label permutation algebra.
//!
//! Labels are 0-based (`0..k`). Edges are stored canonically with `u < v`
//! and every per-edge quantity is indexed by edge position.

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};

pub type Label = u32;
/// Edge sign, always `+1` or `-1`.
pub type Sign = i8;

/// Same/different measurement between two labels.
#[inline]
pub fn phi(a: Label, b: Label) -> Sign {
    if a == b {
        1
    } else {
        -1
    }
}

/// Undirected simple graph with canonical edge list and incidence lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    /// `adj[v]` holds `(neighbor, edge index)` sorted by neighbor.
    adj: Vec<Vec<(usize, usize)>>,
}

impl LabeledGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return input_err("graph must have at least one vertex");
        }
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return input_err(format!("edge ({u},{v}) has endpoint outside [0,{n})"));
            }
            if u == v {
                return input_err(format!("self loop at vertex {u}"));
            }
            canon.push((u.min(v), u.max(v)));
        }
        let mut adj = vec![Vec::new(); n];
        for (i, &(u, v)) in canon.iter().enumerate() {
            adj[u].push((v, i));
            adj[v].push((u, i));
        }
        for (v, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0].0 == w[1].0) {
                return input_err(format!("duplicate edge at vertex {v}"));
            }
        }
        Ok(Self { n, edges: canon, adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbors of `v` with the index of the connecting edge.
    pub fn incident(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().map(|&(u, _)| u)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let list = self.adj.get(u)?;
        list.binary_search_by_key(&v, |&(w, _)| w).ok().map(|pos| list[pos].1)
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    /// Connected component id per vertex, numbered by smallest member.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for w in self.neighbors(u) {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_tree(&self) -> bool {
        self.m() + 1 == self.n && self.is_connected()
    }

    /// Subgraph induced by `vertices` (local ids follow the given order) and
    /// the original index of each kept edge.
    pub fn induced(&self, vertices: &[usize]) -> (LabeledGraph, Vec<usize>) {
        let mut local = vec![usize::MAX; self.n];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let mut edges = Vec::new();
        let mut origin = Vec::new();
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if local[u] != usize::MAX && local[v] != usize::MAX {
                edges.push((local[u], local[v]));
                origin.push(i);
            }
        }
        let sub =
            LabeledGraph::new(vertices.len().max(1), edges).expect("induced subgraph of a simple graph is simple");
        (sub, origin)
    }

    /// 4-neighbor grid, vertex `r * cols + c`.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let mut edges = Vec::with_capacity(2 * rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        Self::new(rows * cols, edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|v| (v - 1, v)))
    }

    pub fn star(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|v| (0, v)))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(|v| (v, (v + 1) % n)))
    }
}

/// A label per vertex over the alphabet `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeLabeling {
    labels: Vec<Label>,
    k: u32,
}

impl NodeLabeling {
    pub fn new(labels: Vec<Label>, k: u32) -> Result<Self> {
        if let Some((v, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return input_err(format!("label {l} at vertex {v} is outside [0,{k})"));
        }
        Ok(Self { labels, k })
    }

    pub fn constant(n: usize, label: Label, k: u32) -> Result<Self> {
        Self::new(vec![label; n], k)
    }

    pub(crate) fn new_unchecked(labels: Vec<Label>, k: u32) -> Self {
        debug_assert!(labels.iter().all(|&l| l < k));
        Self { labels, k }
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<Label> {
        self.labels
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, v: usize) -> Label {
        self.labels[v]
    }

    /// Labels of the given vertices, in order.
    pub fn restrict(&self, vertices: &[usize]) -> NodeLabeling {
        Self::new_unchecked(vertices.iter().map(|&v| self.labels[v]).collect(), self.k)
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.labels.len() != n {
            return input_err(format!("labeling has {} entries, expected {n}", self.labels.len()));
        }
        Ok(())
    }
}

/// One sign per graph edge, indexed like [`LabeledGraph::edges`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeSigns {
    signs: Vec<Sign>,
}

impl EdgeSigns {
    pub fn new(signs: Vec<Sign>) -> Result<Self> {
        if let Some((i, &s)) = signs.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
            return input_err(format!("sign {s} at edge {i} is not +1/-1"));
        }
        Ok(Self { signs })
    }

    pub(crate) fn new_unchecked(signs: Vec<Sign>) -> Self {
        Self { signs }
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn get(&self, e: usize) -> Sign {
        self.signs[e]
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn check_len(&self, m: usize) -> Result<()> {
        if self.signs.len() != m {
            return input_err(format!("{} signs for {m} edges", self.signs.len()));
        }
        Ok(())
    }

    /// Signs of the given edge indices, in order.
    pub fn select(&self, edges: &[usize]) -> EdgeSigns {
        Self::new_unchecked(edges.iter().map(|&e| self.signs[e]).collect())
    }
}

pub fn induce_edge_signs(g: &LabeledGraph, y: &NodeLabeling) -> Result<EdgeSigns> {
    y.check_len(g.n())?;
    Ok(EdgeSigns::new_unchecked(g.edges().iter().map(|&(u, v)| phi(y.get(u), y.get(v))).collect()))
}

/// Number of edges whose induced sign differs from the observed one.
pub fn edge_disagreement(g: &LabeledGraph, y: &NodeLabeling, x: &EdgeSigns) -> Result<usize> {
    y.check_len(g.n())?;
    x.check_len(g.m())?;
    Ok(disagreement_raw(g, y.labels(), x.signs()))
}

pub(crate) fn disagreement_raw(g: &LabeledGraph, labels: &[Label], signs: &[Sign]) -> usize {
    g.edges().iter().zip(signs).filter(|(&(u, v), &s)| phi(labels[u], labels[v]) != s).count()
}

pub fn hamming(a: &NodeLabeling, b: &NodeLabeling) -> Result<usize> {
    if a.len() != b.len() {
        return input_err(format!("labelings differ in length ({} vs {})", a.len(), b.len()));
    }
    Ok(hamming_raw(a.labels(), b.labels()))
}

pub(crate) fn hamming_raw(a: &[Label], b: &[Label]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

pub fn normalized_hamming(a: &NodeLabeling, b: &NodeLabeling) -> Result<f64> {
    let d = hamming(a, b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(d as f64 / a.len() as f64)
}

/// Identity or a single transposition of two labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SwapPerm {
    Identity,
    /// Exchanges `a` and `b`, with `a < b`.
    Transposition(Label, Label),
}

impl SwapPerm {
    pub fn transposition(a: Label, b: Label) -> Result<Self> {
        if a == b {
            return input_err("transposition needs two distinct labels");
        }
        Ok(SwapPerm::Transposition(a.min(b), a.max(b)))
    }

    #[inline]
    pub fn apply(&self, l: Label) -> Label {
        match *self {
            SwapPerm::Identity => l,
            SwapPerm::Transposition(a, b) if l == a => b,
            SwapPerm::Transposition(a, b) if l == b => a,
            SwapPerm::Transposition(..) => l,
        }
    }

    /// Identity followed by `(0,1), (0,2), .., (0,k-1), (1,2), ..`:
    /// `k(k-1)/2 + 1` entries in tie-breaking order.
    pub fn all(k: u32) -> Vec<SwapPerm> {
        let mut out = Vec::with_capacity((k as usize) * (k as usize).saturating_sub(1) / 2 + 1);
        out.push(SwapPerm::Identity);
        for a in 0..k {
            for b in a + 1..k {
                out.push(SwapPerm::Transposition(a, b));
            }
        }
        out
    }
}

/// A bijection on `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FullPerm {
    mapping: Vec<Label>,
}

impl FullPerm {
    pub fn new(mapping: Vec<Label>) -> Result<Self> {
        let k = mapping.len();
        let mut seen = vec![false; k];
        for &l in &mapping {
            let l = l as usize;
            if l >= k || seen[l] {
                return input_err("mapping is not a bijection");
            }
            seen[l] = true;
        }
        Ok(Self { mapping })
    }

    pub fn identity(k: u32) -> Self {
        Self { mapping: (0..k).collect() }
    }

    pub fn mapping(&self) -> &[Label] {
        &self.mapping
    }

    pub fn k(&self) -> u32 {
        self.mapping.len() as u32
    }

    #[inline]
    pub fn apply(&self, l: Label) -> Label {
        self.mapping[l as usize]
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &l)| i as Label == l)
    }
}

pub fn apply_swap(y: &NodeLabeling, s: SwapPerm) -> NodeLabeling {
    NodeLabeling::new_unchecked(y.labels().iter().map(|&l| s.apply(l)).collect(), y.k())
}

pub fn apply_perm(y: &NodeLabeling, p: &FullPerm) -> NodeLabeling {
    NodeLabeling::new_unchecked(y.labels().iter().map(|&l| p.apply(l)).collect(), y.k())
}
