//! Reference methods: neighbor majority vote and loopy belief propagation.

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::graph::{EdgeSigns, Label, LabeledGraph, NodeLabeling};

fn check(g: &LabeledGraph, x: &EdgeSigns, z: &NodeLabeling, k: u32) -> Result<()> {
    x.check_len(g.m())?;
    z.check_len(g.n())?;
    if z.k() != k {
        return input_err(format!("observed labels are over k = {}, expected {k}", z.k()));
    }
    Ok(())
}

/// Each vertex scores labels by `s[Z_u] += X_uv` over its neighbors and
/// keeps `Z_v` when it ties for the top score, else takes the smallest
/// top-scoring label.
pub fn majority_vote(g: &LabeledGraph, x: &EdgeSigns, z: &NodeLabeling, k: u32) -> Result<NodeLabeling> {
    check(g, x, z, k)?;
    let mut score = vec![0i64; k as usize];
    let labels = (0..g.n())
        .map(|v| {
            score.iter_mut().for_each(|s| *s = 0);
            for &(u, e) in g.incident(v) {
                score[z.get(u) as usize] += i64::from(x.get(e));
            }
            let top = *score.iter().max().expect("k >= 2");
            if score[z.get(v) as usize] == top {
                z.get(v)
            } else {
                score.iter().position(|&s| s == top).expect("top exists") as Label
            }
        })
        .collect();
    Ok(NodeLabeling::new_unchecked(labels, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpOptions {
    pub max_iters: usize,
    /// Weight of the previous message in each update.
    pub damping: f64,
    /// Stop once no message entry moves more than this.
    pub tolerance: f64,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self { max_iters: 50, damping: 0.5, tolerance: 1e-6 }
    }
}

/// Sum-product on the pairwise model of the noise channels.
///
/// Node potential: `1 - q` at `Z_v`, `q/(k-1)` elsewhere. Edge potential for
/// sign `X`: the `1 - p` mass is spread uniformly over label pairs agreeing
/// with `X` and the `p` mass over the others. Synchronous damped updates;
/// decoding by max marginal, ties to the smallest label.
pub fn loopy_bp(
    g: &LabeledGraph,
    x: &EdgeSigns,
    z: &NodeLabeling,
    p: f64,
    q: f64,
    k: u32,
    opts: &BpOptions,
) -> Result<NodeLabeling> {
    check(g, x, z, k)?;
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return input_err("p and q must lie in [0, 1]");
    }
    if !(0.0..1.0).contains(&opts.damping) {
        return input_err("damping must lie in [0, 1)");
    }
    let n = g.n();
    let ku = k as usize;
    let kf = k as f64;
    let log_node: Vec<Vec<f64>> = (0..n)
        .map(|v| (0..ku).map(|a| if a as Label == z.get(v) { (1.0 - q).ln() } else { (q / (kf - 1.0)).ln() }).collect())
        .collect();
    // Potential values on equal and unequal label pairs per sign.
    let same_pos = (1.0 - p) / kf;
    let diff_pos = p / (kf * kf - kf);
    let same_neg = p / kf;
    let diff_neg = (1.0 - p) / (kf * kf - kf);
    // msg[2e] flows u -> v, msg[2e + 1] flows v -> u for edge e = (u, v).
    let uniform = vec![1.0 / kf; ku];
    let mut msg: Vec<Vec<f64>> = vec![uniform.clone(); 2 * g.m()];
    let slot = |e: usize, from_low: bool| if from_low { 2 * e } else { 2 * e + 1 };
    let incoming_logs = |msg: &[Vec<f64>], v: usize| -> Vec<Vec<f64>> {
        g.incident(v).iter().map(|&(u, e)| msg[slot(e, u < v)].iter().map(|m| m.ln()).collect()).collect()
    };
    for _ in 0..opts.max_iters {
        let mut next = msg.clone();
        for u in 0..n {
            let inc = incoming_logs(&msg, u);
            let d = inc.len();
            // suffix[i] = Σ_{j>=i} inc[j]
            let mut suffix = vec![vec![0.0; ku]; d + 1];
            for i in (0..d).rev() {
                for a in 0..ku {
                    suffix[i][a] = suffix[i + 1][a] + inc[i][a];
                }
            }
            let mut prefix = log_node[u].clone();
            for (i, &(v, e)) in g.incident(u).iter().enumerate() {
                let excl: Vec<f64> = (0..ku).map(|a| prefix[a] + suffix[i + 1][a]).collect();
                let top = excl.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let out = &mut next[slot(e, u < v)];
                if top == f64::NEG_INFINITY {
                    out.clone_from(&uniform);
                } else {
                    let f: Vec<f64> = excl.iter().map(|&l| (l - top).exp()).collect();
                    let total: f64 = f.iter().sum();
                    let (same, diff) = if x.get(e) > 0 { (same_pos, diff_pos) } else { (same_neg, diff_neg) };
                    let mut sum = 0.0;
                    for b in 0..ku {
                        out[b] = diff * (total - f[b]) + same * f[b];
                        sum += out[b];
                    }
                    if sum > 0.0 && sum.is_finite() {
                        out.iter_mut().for_each(|m| *m /= sum);
                    } else {
                        out.clone_from(&uniform);
                    }
                }
                for a in 0..ku {
                    prefix[a] += inc[i][a];
                }
            }
        }
        let mut change = 0.0f64;
        for (old, new) in msg.iter_mut().zip(next) {
            for (o, nv) in old.iter_mut().zip(new) {
                let damped = opts.damping * *o + (1.0 - opts.damping) * nv;
                change = change.max((damped - *o).abs());
                *o = damped;
            }
        }
        if change < opts.tolerance {
            break;
        }
    }
    let labels = (0..n)
        .map(|v| {
            let inc = incoming_logs(&msg, v);
            let belief: Vec<f64> = (0..ku).map(|a| log_node[v][a] + inc.iter().map(|m| m[a]).sum::<f64>()).collect();
            let mut best = 0;
            for a in 1..ku {
                if belief[a] > belief[best] {
                    best = a;
                }
            }
            best as Label
        })
        .collect();
    Ok(NodeLabeling::new_unchecked(labels, k))
}
