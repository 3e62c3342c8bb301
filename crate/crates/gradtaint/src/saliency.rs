//! Saliency maps over trained surrogates and hot-byte selection.
//!
//! The coarse map aggregates sensitivity over every model output: score of
//! byte `j` is the column-wise L1 norm `Σ_i |J(i,j)|` of the input Jacobian
//! at one input. The fine map is a single row of the same Jacobian,
//! `|J(i*,j)|` for one named sink. Hot bytes are the top `max(1, ⌊f·m⌋)`
//! positions of the coarse map, default `f` = 0.05.
//!
//! Gradients are taken with respect to the scaled input (bytes / 255), so
//! scores are proportional rather than absolute sensitivities; every
//! consumer ranks, and ranking is scale-invariant. Ties break toward the
//! smaller byte index so selection is deterministic.
//!
//! Maps are computed at a single representative input by default;
//! [`mean_coarse_saliency`] averages over a batch for callers that want a
//! corpus-level view.

use crate::embedding::{scale_input, NeuralProgram};
use crate::error::{Error, Result};
use std::fmt::Write as _;

/// Default hot-byte fraction of the input length.
pub const DEFAULT_HOT_FRACTION: f64 = 0.05;

/// What a map's scores measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Coarse,
    Fine(String),
}

/// Per-byte influence scores for one model at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    /// Nonnegative, finite; length equals the model input size.
    pub scores: Vec<f64>,
    pub scope: Scope,
    /// Input the Jacobian was evaluated at. For averaged maps, the first
    /// input of the batch.
    pub source_input: Vec<u8>,
}

impl SaliencyMap {
    fn new(scores: Vec<f64>, scope: Scope, source_input: &[u8]) -> SaliencyMap {
        debug_assert!(scores.iter().all(|s| s.is_finite() && *s >= 0.0));
        SaliencyMap { scores, scope, source_input: source_input.to_vec() }
    }
}

/// Byte positions selected by [`top_k`], ordered by (score descending,
/// index ascending).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HotByteSet {
    pub indices: Vec<usize>,
    pub k: usize,
}

impl HotByteSet {
    pub fn contains(&self, idx: usize) -> bool {
        self.indices.contains(&idx)
    }

    /// Membership mask over an input of length `m`.
    pub fn mask(&self, m: usize) -> Vec<bool> {
        let mut mask = vec![false; m];
        for &i in &self.indices {
            mask[i] = true;
        }
        mask
    }
}

/// Column-wise L1 norms of a row-major `n x m` Jacobian.
pub fn coarse_scores(jacobian: &[f64], n: usize, m: usize) -> Vec<f64> {
    assert_eq!(jacobian.len(), n * m, "jacobian shape mismatch");
    let mut scores = vec![0.0; m];
    for row in 0..n {
        for (s, v) in scores.iter_mut().zip(&jacobian[row * m..(row + 1) * m]) {
            *s += v.abs();
        }
    }
    scores
}

fn check_input(np: &NeuralProgram, x: &[u8]) -> Result<()> {
    let m = np.net.input_dim();
    if x.len() != m {
        return Err(Error::contract(format!(
            "input length {} does not match model input size {m}",
            x.len()
        )));
    }
    Ok(())
}

/// Coarse map: total sensitivity of every output to each input byte.
pub fn coarse_saliency(np: &NeuralProgram, x: &[u8]) -> Result<SaliencyMap> {
    check_input(np, x)?;
    let jac = np.net.input_jacobian(&scale_input(x));
    Ok(SaliencyMap::new(coarse_scores(jac.data(), jac.n, jac.m), Scope::Coarse, x))
}

/// Coarse map of the pre-sigmoid outputs. Per-row rankings are what the
/// sigmoid-free view preserves; used by rank-level invariance checks.
pub fn coarse_saliency_presigmoid(np: &NeuralProgram, x: &[u8]) -> Result<SaliencyMap> {
    check_input(np, x)?;
    let jac = np.net.input_jacobian_presigmoid(&scale_input(x));
    Ok(SaliencyMap::new(coarse_scores(jac.data(), jac.n, jac.m), Scope::Coarse, x))
}

/// Fine map: sensitivity of one named sink to each input byte.
pub fn fine_saliency(np: &NeuralProgram, x: &[u8], sink_id: &str) -> Result<SaliencyMap> {
    check_input(np, x)?;
    let row = np
        .sink_index(sink_id)
        .ok_or_else(|| Error::contract(format!("model has no sink {sink_id:?}")))?;
    let jac = np.net.input_jacobian(&scale_input(x));
    let scores = jac.row(row).iter().map(|v| v.abs()).collect();
    Ok(SaliencyMap::new(scores, Scope::Fine(sink_id.to_string()), x))
}

/// Entrywise mean of the coarse maps over a batch of inputs.
pub fn mean_coarse_saliency(np: &NeuralProgram, inputs: &[Vec<u8>]) -> Result<SaliencyMap> {
    if inputs.is_empty() {
        return Err(Error::contract("mean saliency over an empty batch"));
    }
    let mut acc = vec![0.0; np.net.input_dim()];
    for x in inputs {
        let map = coarse_saliency(np, x)?;
        for (a, s) in acc.iter_mut().zip(&map.scores) {
            *a += s;
        }
    }
    let inv = 1.0 / inputs.len() as f64;
    for a in &mut acc {
        *a *= inv;
    }
    Ok(SaliencyMap::new(acc, Scope::Coarse, &inputs[0]))
}

/// Byte indices ordered by (score descending, index ascending).
fn ranked_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("saliency scores are finite")
            .then(a.cmp(&b))
    });
    idx
}

/// The `k` highest-scoring byte positions.
pub fn top_k(map: &SaliencyMap, k: usize) -> Result<HotByteSet> {
    let m = map.scores.len();
    if k == 0 || k > m {
        return Err(Error::contract(format!("k={k} out of range 1..={m}")));
    }
    let mut indices = ranked_indices(&map.scores);
    indices.truncate(k);
    Ok(HotByteSet { indices, k })
}

/// Hot-byte count for an input of length `m`: `max(1, ⌊fraction·m⌋)`.
pub fn hot_count(m: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::contract(format!("hot-byte fraction {fraction} outside (0, 1]")));
    }
    Ok(((fraction * m as f64).floor() as usize).max(1))
}

/// Top `max(1, ⌊fraction·m⌋)` bytes of the coarse map at `x`.
pub fn hot_bytes_for_input(np: &NeuralProgram, x: &[u8], fraction: f64) -> Result<HotByteSet> {
    let map = coarse_saliency(np, x)?;
    top_k(&map, hot_count(np.net.input_dim(), fraction)?)
}

/// CSV rows in byte order: `byte_index,score,rank` (rank 1 = highest).
pub fn saliency_csv(map: &SaliencyMap) -> String {
    let order = ranked_indices(&map.scores);
    let mut rank = vec![0usize; map.scores.len()];
    for (r, &idx) in order.iter().enumerate() {
        rank[idx] = r + 1;
    }
    let mut out = String::from("byte_index,score,rank\n");
    for (j, score) in map.scores.iter().enumerate() {
        writeln!(out, "{j},{score},{}", rank[j]).expect("string write");
    }
    out
}

/// Density of hot bytes per fixed-width index interval:
/// `interval_start,interval_end,hot_byte_count` rows covering `[0, m)`.
pub fn interval_density_csv(hot: &HotByteSet, m: usize, interval: usize) -> Result<String> {
    if interval == 0 {
        return Err(Error::contract("interval width must be positive"));
    }
    if let Some(&bad) = hot.indices.iter().find(|&&i| i >= m) {
        return Err(Error::contract(format!("hot byte {bad} outside input of length {m}")));
    }
    let mut counts = vec![0usize; m.div_ceil(interval)];
    for &i in &hot.indices {
        counts[i / interval] += 1;
    }
    let mut out = String::from("interval_start,interval_end,hot_byte_count\n");
    for (bin, count) in counts.iter().enumerate() {
        let start = bin * interval;
        let end = (start + interval).min(m);
        writeln!(out, "{start},{end},{count}").expect("string write");
    }
    Ok(out)
}

/// 8-bit grayscale PGM strip: width = map length, `height` identical rows,
/// brightness proportional to score (map maximum = 255).
pub fn pgm_strip(map: &SaliencyMap, height: usize) -> Vec<u8> {
    let m = map.scores.len();
    let peak = map.scores.iter().copied().fold(0.0f64, f64::max);
    let row: Vec<u8> = map
        .scores
        .iter()
        .map(|&s| if peak > 0.0 { (s / peak * 255.0).round() as u8 } else { 0 })
        .collect();
    let mut out = format!("P5\n{m} {height}\n255\n").into_bytes();
    for _ in 0..height {
        out.extend_from_slice(&row);
    }
    out
}
