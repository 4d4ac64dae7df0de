//! Distributional objective: a two-layer scorer over concatenated word
//! vectors, trained by ranking each corpus n-gram above a corrupted copy
//! with a unit-margin hinge loss.

use rand_distr::{Distribution, Normal};

use crate::admm::Coupled;
use crate::corpus::{corrupt_ngram, CorruptPosition, NgramBlock, Vocabulary, WordId};
use crate::embedding::{sigmoid, EmbeddingTable};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sgd::{apply_dense, apply_words, SgdOptions, WordGrads};

/// Scorer parameters: `a` is `hidden x (order * dim)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NlmParams {
    pub order: usize,
    pub dim: usize,
    pub hidden: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub u: Vec<f64>,
}

impl NlmParams {
    pub fn zeros(order: usize, dim: usize, hidden: usize) -> Self {
        NlmParams {
            order,
            dim,
            hidden,
            a: vec![0.0; hidden * order * dim],
            b: vec![0.0; hidden],
            u: vec![0.0; hidden],
        }
    }

    /// Gaussian `a` and `u` with std `1/sqrt(fan_in)`, zero bias.
    pub fn init(order: usize, dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(order, dim, hidden);
        let fan_a = Normal::new(0.0, 1.0 / ((order * dim) as f64).sqrt()).expect("positive std");
        let fan_u = Normal::new(0.0, 1.0 / (hidden as f64).sqrt()).expect("positive std");
        p.a.iter_mut().for_each(|x| *x = fan_a.sample(rng));
        p.u.iter_mut().for_each(|x| *x = fan_u.sample(rng));
        p
    }

    pub fn input_len(&self) -> usize {
        self.order * self.dim
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(&self.b).chain(&self.u).all(|x| x.is_finite())
    }

    fn check(&self, emb: &EmbeddingTable, ngram: &[WordId]) -> Result<()> {
        if ngram.len() != self.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                found: ngram.len(),
            });
        }
        if emb.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: emb.dim(),
            });
        }
        ngram.iter().try_for_each(|&w| emb.check(w))
    }
}

struct Forward {
    x: Vec<f64>,
    act: Vec<f64>,
    score: f64,
}

fn forward(p: &NlmParams, emb: &EmbeddingTable, ngram: &[WordId]) -> Forward {
    let mut x = Vec::with_capacity(p.input_len());
    for &w in ngram {
        x.extend_from_slice(emb.row(w));
    }
    let n_in = p.input_len();
    let act: Vec<f64> = (0..p.hidden)
        .map(|k| {
            let row = &p.a[k * n_in..(k + 1) * n_in];
            let z: f64 = row.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() + p.b[k];
            sigmoid(z)
        })
        .collect();
    let score = p.u.iter().zip(&act).map(|(u, s)| u * s).sum();
    Forward { x, act, score }
}

/// `u . sigmoid(A x + b)` with `x` the concatenated word vectors.
pub fn score_ngram(params: &NlmParams, emb: &EmbeddingTable, ngram: &[WordId]) -> Result<f64> {
    params.check(emb, ngram)?;
    Ok(forward(params, emb, ngram).score)
}

/// `max(0, 1 - pos + neg)`.
pub fn hinge_loss(s_pos: f64, s_neg: f64) -> f64 {
    (1.0 - s_pos + s_neg).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlmGrads {
    pub loss: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub u: Vec<f64>,
    pub words: WordGrads,
}

/// Adds `coef * dS/d(everything)` for one scored n-gram.
fn backward(p: &NlmParams, f: &Forward, ngram: &[WordId], coef: f64, g: &mut NlmGrads) {
    let n_in = p.input_len();
    let mut dx = vec![0.0; n_in];
    for k in 0..p.hidden {
        let s = f.act[k];
        g.u[k] += coef * s;
        let delta = coef * p.u[k] * s * (1.0 - s);
        if delta == 0.0 {
            continue;
        }
        g.b[k] += delta;
        let row = &p.a[k * n_in..(k + 1) * n_in];
        let grow = &mut g.a[k * n_in..(k + 1) * n_in];
        for i in 0..n_in {
            grow[i] += delta * f.x[i];
            dx[i] += delta * row[i];
        }
    }
    for (slot, &w) in ngram.iter().enumerate() {
        g.words.add(w, 1.0, &dx[slot * p.dim..(slot + 1) * p.dim]);
    }
}

/// Exact gradients of the hinge loss for one (clean, corrupted) pair. In the
/// flat region (and at the kink) every gradient is zero; the touched words
/// are still listed.
pub fn nlm_gradients(
    params: &NlmParams,
    emb: &EmbeddingTable,
    ngram: &[WordId],
    corrupted: &[WordId],
) -> Result<NlmGrads> {
    params.check(emb, ngram)?;
    params.check(emb, corrupted)?;
    let clean = forward(params, emb, ngram);
    let noisy = forward(params, emb, corrupted);
    let loss = hinge_loss(clean.score, noisy.score);
    let mut g = NlmGrads {
        loss,
        a: vec![0.0; params.a.len()],
        b: vec![0.0; params.hidden],
        u: vec![0.0; params.hidden],
        words: WordGrads::default(),
    };
    for &w in ngram.iter().chain(corrupted) {
        g.words.touch(w, params.dim);
    }
    if loss > 0.0 {
        backward(params, &clean, ngram, -1.0, &mut g);
        backward(params, &noisy, corrupted, 1.0, &mut g);
    }
    Ok(g)
}

/// One corruption per n-gram, drawn in block order.
pub fn corrupt_block(
    block: &NgramBlock,
    vocab: &Vocabulary,
    position: CorruptPosition,
    rng: &mut Rng,
) -> Result<Vec<Vec<WordId>>> {
    block.iter().map(|g| corrupt_ngram(g, vocab, position, rng)).collect()
}

/// Mean hinge loss over prepared pairs, without updating anything.
pub fn nlm_block_loss(
    params: &NlmParams,
    emb: &EmbeddingTable,
    block: &NgramBlock,
    corrupted: &[Vec<WordId>],
) -> Result<f64> {
    if block.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (g, c) in block.iter().zip(corrupted) {
        total += hinge_loss(score_ngram(params, emb, g)?, score_ngram(params, emb, c)?);
    }
    Ok(total / block.len() as f64)
}

/// One SGD pass over prepared (clean, corrupted) pairs; returns the mean
/// pre-update loss.
pub fn nlm_sgd_pass(
    params: &mut NlmParams,
    emb: &mut EmbeddingTable,
    block: &NgramBlock,
    corrupted: &[Vec<WordId>],
    opts: &SgdOptions,
    coupled: Option<&Coupled<'_>>,
) -> Result<f64> {
    let weight = coupled.map_or(1.0, Coupled::weight);
    let mut total = 0.0;
    for (g, c) in block.iter().zip(corrupted) {
        let grads = nlm_gradients(params, emb, g, c)?;
        total += grads.loss;
        apply_dense(&mut params.a, &grads.a, weight, opts);
        apply_dense(&mut params.b, &grads.b, weight, opts);
        apply_dense(&mut params.u, &grads.u, weight, opts);
        apply_words(emb, &grads.words, weight, opts);
    }
    let mean = if block.is_empty() {
        0.0
    } else {
        total / block.len() as f64
    };
    if let Some(c) = coupled {
        c.penalty_step(emb, opts.lr);
    }
    if !mean.is_finite() {
        return Err(Error::NonFiniteLoss("NLM"));
    }
    Ok(mean)
}

/// Corrupts each n-gram of the block (one noise sample each) and runs one
/// SGD pass. With `coupled`, the pass ends with one step of the coupling
/// penalty on every shared row.
#[allow(clippy::too_many_arguments)]
pub fn nlm_sgd_step(
    params: &mut NlmParams,
    emb: &mut EmbeddingTable,
    block: &NgramBlock,
    vocab: &Vocabulary,
    position: CorruptPosition,
    opts: &SgdOptions,
    rng: &mut Rng,
    coupled: Option<&Coupled<'_>>,
) -> Result<f64> {
    if opts.lr < 0.0 {
        return Err(Error::InvalidConfig("learning rate must be non-negative".into()));
    }
    let corrupted = corrupt_block(block, vocab, position, rng)?;
    nlm_sgd_pass(params, emb, block, &corrupted, opts, coupled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use approx::assert_relative_eq;

    fn table(rows: &[&[f64]]) -> EmbeddingTable {
        EmbeddingTable::from_rows(rows[0].len(), &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_output_weights_score_zero() {
        let mut p = NlmParams::init(3, 2, 4, &mut from_seed(0));
        p.u.iter_mut().for_each(|u| *u = 0.0);
        let emb = table(&[&[0.3, -1.0], &[2.0, 0.5]]);
        assert_eq!(score_ngram(&p, &emb, &[0, 1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn zero_layer_scores_half_per_unit() {
        let mut p = NlmParams::zeros(2, 2, 5);
        p.u.iter_mut().for_each(|u| *u = 1.0);
        let emb = table(&[&[0.3, -1.0], &[2.0, 0.5]]);
        assert_eq!(score_ngram(&p, &emb, &[0, 1]).unwrap(), 2.5);
    }

    #[test]
    fn hand_sized_score() {
        let p = NlmParams {
            order: 2,
            dim: 1,
            hidden: 1,
            a: vec![1.0, 1.0],
            b: vec![0.0],
            u: vec![2.0],
        };
        let emb = table(&[&[0.5]]);
        assert_relative_eq!(
            score_ngram(&p, &emb, &[0, 0]).unwrap(),
            1.462_117_157_260_01,
            epsilon = 1e-12
        );
    }

    #[test]
    fn wrong_length_is_rejected() {
        let p = NlmParams::zeros(3, 1, 1);
        let emb = table(&[&[0.5]]);
        assert!(matches!(
            score_ngram(&p, &emb, &[0, 0]),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge_loss(0.4, 0.4), 1.0);
        assert_eq!(hinge_loss(2.5, 0.5), 0.0);
        assert_relative_eq!(hinge_loss(0.3, 0.5), 1.2, epsilon = 1e-15);
    }

    #[test]
    fn satisfied_margin_has_zero_gradient() {
        let p = NlmParams {
            order: 1,
            dim: 1,
            hidden: 1,
            a: vec![10.0],
            b: vec![0.0],
            u: vec![4.0],
        };
        let emb = table(&[&[1.0], &[-1.0]]);
        let g = nlm_gradients(&p, &emb, &[0], &[1]).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.a.iter().chain(&g.b).chain(&g.u).all(|x| *x == 0.0));
        assert!(g.words.iter().all(|(_, v)| v.iter().all(|x| *x == 0.0)));
        assert_eq!(g.words.len(), 2);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let vocab = Vocabulary::from_words(["a", "b", "c"]);
        let mut emb = EmbeddingTable::init_for_vocab(&vocab, 3, 1);
        let mut p = NlmParams::init(3, 3, 2, &mut from_seed(2));
        let block = NgramBlock::new(3, &[vec![1, 2, 3], vec![3, 2, 1]]).unwrap();
        let (p0, e0) = (p.clone(), emb.clone());
        let loss = nlm_sgd_step(
            &mut p,
            &mut emb,
            &block,
            &vocab,
            CorruptPosition::Middle,
            &SgdOptions::new(0.0),
            &mut from_seed(3),
            None,
        )
        .unwrap();
        assert!(loss > 0.0);
        assert_eq!(p, p0);
        assert_eq!(emb, e0);
    }
}
