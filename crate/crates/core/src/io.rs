//! Plain-text instance formats.
//!
//! Graph file: first line `n m k`, then `m` lines `u v` (0-based), then
//! optionally `n` lines holding ground-truth labels in `0..k`.
//! Sign file: `m` whitespace-separated values `1`/`+1`/`-1` in edge order.
//! Label file: `n` whitespace-separated labels.
//! Noise record: one line `p q k seed`.

use std::fmt::Write as _;
use std::path::Path;

use crate::datagen::NoiseParams;
use crate::error::{Error, Result};
use crate::graph::{EdgeSigns, LabeledGraph, NodeLabeling, Sign};

#[derive(Debug, Clone)]
pub struct GraphFile {
    pub graph: LabeledGraph,
    pub k: u32,
    pub truth: Option<NodeLabeling>,
}

fn fmt_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

fn parse_usize(tok: Option<&str>, what: &str) -> Result<usize> {
    match tok {
        Some(t) => t.parse::<usize>().map_err(|_| Error::Format(format!("bad {what}: {t:?}"))),
        None => fmt_err(format!("missing {what}")),
    }
}

pub fn parse_graph(text: &str) -> Result<GraphFile> {
    let mut tokens = text.split_whitespace();
    let n = parse_usize(tokens.next(), "vertex count")?;
    let m = parse_usize(tokens.next(), "edge count")?;
    let k = parse_usize(tokens.next(), "label count")?;
    let mut edges = Vec::with_capacity(m);
    for i in 0..m {
        let u = parse_usize(tokens.next(), &format!("edge {i} endpoint"))?;
        let v = parse_usize(tokens.next(), &format!("edge {i} endpoint"))?;
        edges.push((u, v));
    }
    let graph = LabeledGraph::new(n, edges).map_err(|e| Error::Format(e.to_string()))?;
    let rest: Vec<&str> = tokens.collect();
    let truth = if rest.is_empty() {
        None
    } else if rest.len() == n {
        let labels = rest
            .iter()
            .map(|t| t.parse::<u32>().map_err(|_| Error::Format(format!("bad label {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Some(NodeLabeling::new(labels, k as u32).map_err(|e| Error::Format(e.to_string()))?)
    } else {
        return fmt_err(format!("expected 0 or {n} trailing labels, found {}", rest.len()));
    };
    Ok(GraphFile { graph, k: k as u32, truth })
}

pub fn format_graph(g: &LabeledGraph, k: u32, truth: Option<&NodeLabeling>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", g.n(), g.m(), k);
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    if let Some(y) = truth {
        out.push_str(&format_labels(y));
    }
    out
}

pub fn parse_signs(text: &str) -> Result<EdgeSigns> {
    let signs = text
        .split_whitespace()
        .map(|t| match t {
            "1" | "+1" => Ok(1 as Sign),
            "-1" => Ok(-1),
            _ => fmt_err(format!("bad sign {t:?}")),
        })
        .collect::<Result<Vec<_>>>()?;
    EdgeSigns::new(signs)
}

pub fn format_signs(x: &EdgeSigns) -> String {
    let mut out = String::new();
    for &s in x.signs() {
        let _ = writeln!(out, "{s}");
    }
    out
}

pub fn parse_labels(text: &str, k: u32) -> Result<NodeLabeling> {
    let labels = text
        .split_whitespace()
        .map(|t| t.parse::<u32>().map_err(|_| Error::Format(format!("bad label {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    NodeLabeling::new(labels, k).map_err(|e| Error::Format(e.to_string()))
}

pub fn format_labels(y: &NodeLabeling) -> String {
    let mut out = String::new();
    for &l in y.labels() {
        let _ = writeln!(out, "{l}");
    }
    out
}

pub fn format_noise(params: &NoiseParams) -> String {
    format!("{} {} {} {}\n", params.p, params.q, params.k, params.seed)
}

pub fn parse_noise(text: &str) -> Result<NoiseParams> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() != 4 {
        return fmt_err("noise record must be `p q k seed`");
    }
    let f = |t: &str| t.parse::<f64>().map_err(|_| Error::Format(format!("bad number {t:?}")));
    let p = f(toks[0])?;
    let q = f(toks[1])?;
    let k = parse_usize(Some(toks[2]), "k")? as u32;
    let seed = toks[3].parse::<u64>().map_err(|_| Error::Format(format!("bad seed {:?}", toks[3])))?;
    NoiseParams::new(p, q, k, seed).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_text_round_trip() {
        let text = "3 2 2\n0 1\n1 2\n0\n0\n1\n";
        let gf = parse_graph(text).unwrap();
        assert_eq!(gf.graph.m(), 2);
        assert_eq!(gf.truth.as_ref().unwrap().labels(), &[0, 0, 1]);
        assert_eq!(format_graph(&gf.graph, gf.k, gf.truth.as_ref()), text);
    }

    #[test]
    fn graph_without_labels() {
        let gf = parse_graph("2 1 3\n0 1\n").unwrap();
        assert!(gf.truth.is_none());
        assert_eq!(gf.k, 3);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_graph("3 2 2\n0 1\n"), Err(Error::Format(_))));
        assert!(matches!(parse_graph("3 1 2\n0 1\n0 0\n"), Err(Error::Format(_))));
        assert!(matches!(parse_graph("2 1 2\n0 1\n0 5\n"), Err(Error::Format(_))));
        assert!(matches!(parse_signs("1 0"), Err(Error::Format(_))));
        assert!(parse_signs("+1 -1 1").unwrap().signs() == [1, -1, 1]);
        assert!(matches!(parse_noise("0.1 0.2 3"), Err(Error::Format(_))));
    }

    #[test]
    fn noise_record() {
        let p = NoiseParams::new(0.1, 0.2, 4, 99).unwrap();
        let back = parse_noise(&format_noise(&p)).unwrap();
        assert_eq!(back, p);
    }
}
