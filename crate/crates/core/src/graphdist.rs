//! Graph-distance objective: squared error between the cosine of two word
//! vectors and an affine rescaling `a * WordSim + b` of their WordNet
//! similarity.

use crate::admm::Coupled;
use crate::corpus::WordId;
use crate::embedding::{dot, norm, EmbeddingTable};
use crate::error::{Error, Result};
use crate::sgd::{apply_words, SgdOptions, WordGrads};
use crate::wordnet::WordPair;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdParams {
    pub a: f64,
    pub b: f64,
}

impl Default for GdParams {
    fn default() -> Self {
        GdParams { a: 1.0, b: 0.0 }
    }
}

impl GdParams {
    /// `a = 1 / max(WordSim)` over the batch, `b = 0`, so the initial target
    /// starts inside `[-1, 1]`. Falls back to `a = 1` when no similarity is
    /// positive.
    pub fn from_batch(pairs: &[WordPair]) -> Self {
        let max = pairs.iter().map(|p| p.sim).fold(f64::NEG_INFINITY, f64::max);
        let a = if max > 0.0 && max.is_finite() { 1.0 / max } else { 1.0 };
        GdParams { a, b: 0.0 }
    }
}

struct Residual {
    cos: f64,
    residual: f64,
    ni: f64,
    nj: f64,
}

fn residual(p: &GdParams, vi: &[f64], vj: &[f64], ws: f64) -> Result<Residual> {
    let ni = norm(vi);
    let nj = norm(vj);
    if ni == 0.0 || nj == 0.0 {
        return Err(Error::ZeroVector);
    }
    let cos = dot(vi, vj) / (ni * nj);
    Ok(Residual {
        cos,
        residual: cos - (p.a * ws + p.b),
        ni,
        nj,
    })
}

fn rows(emb: &EmbeddingTable, i: WordId, j: WordId) -> Result<(&[f64], &[f64])> {
    emb.check(i)?;
    emb.check(j)?;
    Ok((emb.row(i), emb.row(j)))
}

pub fn gd_loss(params: &GdParams, emb: &EmbeddingTable, i: WordId, j: WordId, ws: f64) -> Result<f64> {
    let (vi, vj) = rows(emb, i, j)?;
    let r = residual(params, vi, vj, ws)?;
    Ok(r.residual * r.residual)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdGrads {
    pub loss: f64,
    pub a: f64,
    pub b: f64,
    pub words: WordGrads,
}

/// Analytic gradients. For `d cos / d v_i` the quotient rule gives
/// `v_j / (|v_i||v_j|) - cos * v_i / |v_i|^2`. When `i == j` both
/// contributions land on the same row and cancel.
pub fn gd_gradients(params: &GdParams, emb: &EmbeddingTable, i: WordId, j: WordId, ws: f64) -> Result<GdGrads> {
    let (vi, vj) = rows(emb, i, j)?;
    let r = residual(params, vi, vj, ws)?;
    let two_r = 2.0 * r.residual;
    let inv = 1.0 / (r.ni * r.nj);

    let gi: Vec<f64> = vi
        .iter()
        .zip(vj)
        .map(|(a, b)| two_r * (b * inv - r.cos * a / (r.ni * r.ni)))
        .collect();
    let gj: Vec<f64> = vi
        .iter()
        .zip(vj)
        .map(|(a, b)| two_r * (a * inv - r.cos * b / (r.nj * r.nj)))
        .collect();
    let mut words = WordGrads::default();
    words.add(i, 1.0, &gi);
    words.add(j, 1.0, &gj);
    Ok(GdGrads {
        loss: r.residual * r.residual,
        a: -two_r * ws,
        b: -two_r,
        words,
    })
}

/// Mean loss over a pair sample, no updates.
pub fn gd_sample_loss(params: &GdParams, emb: &EmbeddingTable, pairs: &[WordPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in pairs {
        total += gd_loss(params, emb, p.i, p.j, p.sim)?;
    }
    Ok(total / pairs.len() as f64)
}

/// One SGD pass over the pairs. Word vectors step per pair; the affine map
/// is shared by every pair, so it steps once per pass on the mean gradient,
/// otherwise it would move `pairs.len()` times faster than any word vector.
/// With `coupled`, the pass ends with one step of the coupling penalty.
pub fn gd_sgd_step(
    params: &mut GdParams,
    emb: &mut EmbeddingTable,
    pairs: &[WordPair],
    opts: &SgdOptions,
    coupled: Option<&Coupled<'_>>,
) -> Result<f64> {
    let weight = coupled.map_or(1.0, Coupled::weight);
    let mut total = 0.0;
    let mut ab_grad = [0.0, 0.0];
    for p in pairs {
        let g = gd_gradients(params, emb, p.i, p.j, p.sim)?;
        total += g.loss;
        ab_grad[0] += g.a;
        ab_grad[1] += g.b;
        apply_words(emb, &g.words, weight, opts);
    }
    if !pairs.is_empty() {
        let n = pairs.len() as f64;
        let mut ab = [params.a, params.b];
        crate::sgd::apply_dense(&mut ab, &[ab_grad[0] / n, ab_grad[1] / n], weight, opts);
        params.a = ab[0];
        params.b = ab[1];
    }
    if let Some(c) = coupled {
        c.penalty_step(emb, opts.lr);
    }
    let mean = if pairs.is_empty() {
        0.0
    } else {
        total / pairs.len() as f64
    };
    if !mean.is_finite() {
        return Err(Error::NonFiniteLoss("graph-distance"));
    }
    Ok(mean)
}
