//! Noise channels and instance generators.
//!
//! All randomness flows through [`rng_from_seed`] (ChaCha8, seeded through
//! `SeedableRng::seed_from_u64`), so identical seeds reproduce identical
//! instances on every platform.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::graph::{phi, EdgeSigns, Label, LabeledGraph, NodeLabeling};

/// Identifier written into run metadata.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.3, seed_from_u64)";

pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed for item `index` of a run, independent of evaluation order.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Edge flip probability.
    pub p: f64,
    /// Node corruption probability.
    pub q: f64,
    pub k: u32,
    pub seed: u64,
}

impl NoiseParams {
    pub fn new(p: f64, q: f64, k: u32, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&p) {
            return input_err(format!("edge noise p = {p} must lie in [0, 0.5)"));
        }
        if !(0.0..0.5).contains(&q) {
            return input_err(format!("node noise q = {q} must lie in [0, 0.5)"));
        }
        if k < 2 {
            return input_err("k must be at least 2");
        }
        Ok(Self { p, q, k, seed })
    }
}

/// Draws the observed labels `z` and observed signs `x` from the uniform
/// noise model around ground truth `y`. Edges are sampled first, in edge
/// order, then nodes in vertex order.
pub fn apply_noise(g: &LabeledGraph, y: &NodeLabeling, params: &NoiseParams) -> Result<(NodeLabeling, EdgeSigns)> {
    y.check_len(g.n())?;
    if y.k() != params.k {
        return input_err(format!("labeling over k = {}, noise over k = {}", y.k(), params.k));
    }
    let mut rng = rng_from_seed(params.seed);
    let signs = g
        .edges()
        .iter()
        .map(|&(u, v)| {
            let m = phi(y.get(u), y.get(v));
            if rng.gen::<f64>() < params.p {
                -m
            } else {
                m
            }
        })
        .collect();
    let k = params.k;
    let z = y
        .labels()
        .iter()
        .map(|&truth| {
            if rng.gen::<f64>() < params.q {
                loop {
                    let l = rng.gen_range(0..k);
                    if l != truth {
                        break l;
                    }
                }
            } else {
                truth
            }
        })
        .collect();
    Ok((NodeLabeling::new_unchecked(z, k), EdgeSigns::new_unchecked(signs)))
}

/// Uniform composition of `total` into `parts` nonnegative counts.
fn uniform_composition(total: usize, parts: usize, rng: &mut Rng64) -> Vec<usize> {
    if parts == 1 {
        return vec![total];
    }
    // Stars and bars: choose parts-1 bar positions among total+parts-1 slots.
    let slots = total + parts - 1;
    let mut bars = rand::seq::index::sample(rng, slots, parts - 1).into_vec();
    bars.sort_unstable();
    let mut counts = Vec::with_capacity(parts);
    counts.push(bars[0]);
    counts.extend(bars.windows(2).map(|w| w[1] - w[0] - 1));
    counts.push(slots - 1 - bars[parts - 2]);
    counts
}

/// Random labeled tree on `n` nodes in which every label `0..k` appears.
///
/// Node `i < k` is the seed node for label `i`; the other `n - k` nodes get
/// labels from a uniform composition of `n - k` into `k` counts. Nodes are
/// then attached one at a time to a random already-attached node, so every
/// edge sign is consistent with its endpoint labels.
pub fn gen_random_tree(n: usize, k: u32, seed: u64) -> Result<(LabeledGraph, NodeLabeling)> {
    if k < 2 {
        return input_err("k must be at least 2");
    }
    if n < k as usize {
        return input_err(format!("n = {n} cannot cover k = {k} labels"));
    }
    let mut rng = rng_from_seed(seed);
    let mut labels: Vec<Label> = (0..k).collect();
    let counts = uniform_composition(n - k as usize, k as usize, &mut rng);
    for (label, &c) in counts.iter().enumerate() {
        labels.extend(std::iter::repeat_n(label as Label, c));
    }
    let mut pending: Vec<usize> = (0..n).collect();
    let mut attached: Vec<usize> = Vec::with_capacity(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let first = pending.swap_remove(rng.gen_range(0..pending.len()));
    attached.push(first);
    if !pending.is_empty() {
        let second = pending.swap_remove(rng.gen_range(0..pending.len()));
        edges.push((first, second));
        attached.push(second);
    }
    while !pending.is_empty() {
        let v = attached[rng.gen_range(0..attached.len())];
        let u = pending.swap_remove(rng.gen_range(0..pending.len()));
        edges.push((v, u));
        attached.push(u);
    }
    let g = LabeledGraph::new(n, edges)?;
    Ok((g, NodeLabeling::new_unchecked(labels, k)))
}

/// 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major pixel values.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Binary P5 encoding with maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let bytes = std::fs::read(path)?;
    parse_pgm(&bytes)
}

/// Parses P2 (ASCII) or P5 (binary) PGM with maxval 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let binary = match header[0].as_str() {
        "P5" => true,
        "P2" => false,
        other => return Err(Error::Format(format!("unsupported PGM magic {other:?}"))),
    };
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM {what}: {s:?}")));
    let width = num(&header[1], "width")?;
    let height = num(&header[2], "height")?;
    let maxval = num(&header[3], "maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("PGM maxval must be 255, found {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("PGM has zero size".into()));
    }
    let count = width * height;
    let pixels = if binary {
        // Exactly one whitespace byte separates maxval from the raster.
        pos += 1;
        if bytes.len() < pos + count {
            return Err(Error::Format(format!(
                "truncated PGM raster: need {count} bytes, have {}",
                bytes.len().saturating_sub(pos)
            )));
        }
        bytes[pos..pos + count].to_vec()
    } else {
        let text = String::from_utf8_lossy(&bytes[pos..]);
        let values = text
            .split_whitespace()
            .take(count)
            .map(|t| match t.parse::<u16>() {
                Ok(v) if v <= 255 => Ok(v as u8),
                _ => Err(Error::Format(format!("bad PGM pixel {t:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        if values.len() < count {
            return Err(Error::Format(format!("truncated PGM raster: need {count} values, have {}", values.len())));
        }
        values
    };
    Ok(GrayImage { width, height, pixels })
}

/// Quantized image on its 4-neighbor grid.
#[derive(Debug, Clone)]
pub struct GridInstance {
    pub rows: usize,
    pub cols: usize,
    pub graph: LabeledGraph,
    pub truth: NodeLabeling,
    /// Representative pixel value per label.
    pub bin_medians: Vec<u8>,
}

fn bin_bounds(i: u32, k: u32) -> (u32, u32) {
    (256 * i / k, 256 * (i + 1) / k)
}

/// Splits `[0, 256)` into `k` ranges `[⌊256 i/k⌋, ⌊256 (i+1)/k⌋)`; a pixel's
/// label is its range index and each range is represented by its integer
/// midpoint.
pub fn quantize_image(image: &GrayImage, k: u32) -> Result<GridInstance> {
    if !(2..=256).contains(&k) {
        return input_err(format!("k = {k} must lie in [2, 256]"));
    }
    let mut lookup = [0 as Label; 256];
    let mut bin_medians = Vec::with_capacity(k as usize);
    for i in 0..k {
        let (lo, hi) = bin_bounds(i, k);
        for px in lo..hi {
            lookup[px as usize] = i;
        }
        bin_medians.push(((lo + hi - 1) / 2) as u8);
    }
    let labels = image.pixels.iter().map(|&px| lookup[px as usize]).collect();
    let graph = LabeledGraph::grid(image.height, image.width)?;
    Ok(GridInstance {
        rows: image.height,
        cols: image.width,
        graph,
        truth: NodeLabeling::new_unchecked(labels, k),
        bin_medians,
    })
}

/// Piecewise-constant test image: a Voronoi mosaic of `cells` random sites,
/// each cell filled with one uniformly random intensity.
pub fn mosaic_image(rows: usize, cols: usize, cells: usize, seed: u64) -> Result<GrayImage> {
    if rows == 0 || cols == 0 || cells == 0 {
        return input_err("mosaic needs positive dimensions and at least one cell");
    }
    let mut rng = rng_from_seed(seed);
    let sites: Vec<(f64, f64, u8)> = (0..cells)
        .map(|_| (rng.gen_range(0.0..rows as f64), rng.gen_range(0.0..cols as f64), rng.gen::<u8>()))
        .collect();
    let mut pixels = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
            let nearest = sites
                .iter()
                .min_by(|a, b| {
                    let da = (a.0 - y).powi(2) + (a.1 - x).powi(2);
                    let db = (b.0 - y).powi(2) + (b.1 - x).powi(2);
                    da.total_cmp(&db)
                })
                .expect("at least one site");
            pixels.push(nearest.2);
        }
    }
    Ok(GrayImage { width: cols, height: rows, pixels })
}

/// Random connected graph: a random spanning tree plus `extra` random
/// non-tree edges (fewer if the graph saturates).
pub fn gen_random_connected(n: usize, extra: usize, seed: u64) -> Result<LabeledGraph> {
    if n == 0 {
        return input_err("graph must have at least one vertex");
    }
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut present = std::collections::BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let (a, b) = (order[i], order[j]);
        present.insert((a.min(b), a.max(b)));
    }
    let max_edges = n * (n - 1) / 2;
    let target = (present.len() + extra).min(max_edges);
    while present.len() < target {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            present.insert((a.min(b), a.max(b)));
        }
    }
    LabeledGraph::new(n, present)
}

/// Uniformly random labels over `0..k`.
pub fn random_labeling(n: usize, k: u32, seed: u64) -> NodeLabeling {
    let mut rng = rng_from_seed(seed);
    NodeLabeling::new_unchecked((0..n).map(|_| rng.gen_range(0..k)).collect(), k)
}
