//! Relation-typed objectives. TransE scores a tuple by how well the relation
//! vector translates the left word onto the right one; NTN feeds both words
//! through a per-relation bilinear tensor plus affine layer. Both train with
//! the same unit-margin hinge as the language model, against tuples with one
//! slot corrupted.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::admm::Coupled;
use crate::embedding::{sigmoid, EmbeddingTable};
use crate::error::{Error, Result};
use crate::nlm::hinge_loss;
use crate::rng::Rng;
use crate::sgd::{apply_dense, apply_words, SgdOptions, WordGrads};
use crate::wordnet::{corrupt_word_tuple, word_tuple, RelationId, RelationTupleSet, WordSynsetMap, WordTuple};

#[derive(Debug, Clone, PartialEq)]
pub struct TransEParams {
    /// One translation vector per relation.
    pub relations: EmbeddingTable,
}

impl TransEParams {
    /// Uniform in `[-0.5/d, 0.5/d]`.
    pub fn init(n_relations: usize, dim: usize, rng: &mut Rng) -> Self {
        let half = 0.5 / dim as f64;
        let rows: Vec<Vec<f64>> = (0..n_relations)
            .map(|_| (0..dim).map(|_| rng.random_range(-half..=half)).collect())
            .collect();
        TransEParams {
            relations: EmbeddingTable::from_rows(dim, &rows).expect("rows have length dim"),
        }
    }
}

/// Parameters of one NTN relation. `w` holds `hidden` slices of `dim x dim`
/// (`w[k*d*d + i*d + j]`), `v` is `hidden x 2*dim` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NtnRelation {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub b: Vec<f64>,
}

impl NtnRelation {
    fn zeros(dim: usize, hidden: usize) -> Self {
        NtnRelation {
            w: vec![0.0; hidden * dim * dim],
            v: vec![0.0; hidden * 2 * dim],
            b: vec![0.0; hidden],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NtnParams {
    pub dim: usize,
    pub hidden: usize,
    pub relations: Vec<NtnRelation>,
    /// Output weights shared by all relations.
    pub u: Vec<f64>,
}

impl NtnParams {
    pub fn zeros(n_relations: usize, dim: usize, hidden: usize) -> Self {
        NtnParams {
            dim,
            hidden,
            relations: vec![NtnRelation::zeros(dim, hidden); n_relations],
            u: vec![0.0; hidden],
        }
    }

    /// Tensors Gaussian with std `1/d`, the affine block with std
    /// `1/sqrt(2d)`, `u` with std `1/sqrt(h)`, zero bias.
    pub fn init(n_relations: usize, dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(n_relations, dim, hidden);
        let tensor = Normal::new(0.0, 1.0 / dim as f64).expect("positive std");
        let affine = Normal::new(0.0, 1.0 / ((2 * dim) as f64).sqrt()).expect("positive std");
        let out = Normal::new(0.0, 1.0 / (hidden as f64).sqrt()).expect("positive std");
        for r in &mut p.relations {
            r.w.iter_mut().for_each(|x| *x = tensor.sample(rng));
            r.v.iter_mut().for_each(|x| *x = affine.sample(rng));
        }
        p.u.iter_mut().for_each(|x| *x = out.sample(rng));
        p
    }

    fn pre_activation(&self, rel: &NtnRelation, vl: &[f64], vr: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..self.hidden)
            .map(|k| {
                let wk = &rel.w[k * d * d..(k + 1) * d * d];
                let mut z = rel.b[k];
                for i in 0..d {
                    let row = &wk[i * d..(i + 1) * d];
                    z += vl[i] * row.iter().zip(vr).map(|(w, r)| w * r).sum::<f64>();
                }
                let vk = &rel.v[k * 2 * d..(k + 1) * 2 * d];
                z += vk[..d].iter().zip(vl).map(|(a, b)| a * b).sum::<f64>();
                z += vk[d..].iter().zip(vr).map(|(a, b)| a * b).sum::<f64>();
                z
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KbModel {
    TransE(TransEParams),
    Ntn(NtnParams),
}

impl KbModel {
    pub fn n_relations(&self) -> usize {
        match self {
            KbModel::TransE(p) => p.relations.len(),
            KbModel::Ntn(p) => p.relations.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            KbModel::TransE(p) => p.relations.dim(),
            KbModel::Ntn(p) => p.dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KbModel::TransE(_) => "transe",
            KbModel::Ntn(_) => "ntn",
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            KbModel::TransE(p) => p.relations.is_finite(),
            KbModel::Ntn(p) => p
                .relations
                .iter()
                .flat_map(|r| r.w.iter().chain(&r.v).chain(&r.b))
                .chain(&p.u)
                .all(|x| x.is_finite()),
        }
    }

    fn check(&self, vl: &[f64], rel: RelationId, vr: &[f64]) -> Result<()> {
        if rel >= self.n_relations() {
            return Err(Error::UnknownRelation(rel));
        }
        for v in [vl, vr] {
            if v.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    found: v.len(),
                });
            }
        }
        Ok(())
    }

    /// Scores raw vectors; evaluation uses this with synset-level vectors.
    pub fn score_vectors(&self, vl: &[f64], rel: RelationId, vr: &[f64]) -> Result<f64> {
        self.check(vl, rel, vr)?;
        Ok(match self {
            KbModel::TransE(p) => -transe_residual(vl, p.relations.row(rel), vr).1,
            KbModel::Ntn(p) => {
                let z = p.pre_activation(&p.relations[rel], vl, vr);
                p.u.iter().zip(z).map(|(u, z)| u * sigmoid(z)).sum()
            }
        })
    }

    pub fn score(&self, emb: &EmbeddingTable, t: &WordTuple) -> Result<f64> {
        emb.check(t.left)?;
        emb.check(t.right)?;
        self.score_vectors(emb.row(t.left), t.relation, emb.row(t.right))
    }
}

fn transe_residual(vl: &[f64], r: &[f64], vr: &[f64]) -> (Vec<f64>, f64) {
    let e: Vec<f64> = vl.iter().zip(r).zip(vr).map(|((l, r), t)| l + r - t).collect();
    let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    (e, n)
}

/// `-||v_l + R - v_r||_2`.
pub fn transe_score(p: &TransEParams, emb: &EmbeddingTable, t: &WordTuple) -> Result<f64> {
    emb.check(t.left)?;
    emb.check(t.right)?;
    if t.relation >= p.relations.len() {
        return Err(Error::UnknownRelation(t.relation));
    }
    Ok(-transe_residual(emb.row(t.left), p.relations.row(t.relation), emb.row(t.right)).1)
}

/// `U . sigmoid(v_l' W_R v_r + V_R [v_l; v_r] + b_R)`.
pub fn ntn_score(p: &NtnParams, emb: &EmbeddingTable, t: &WordTuple) -> Result<f64> {
    emb.check(t.left)?;
    emb.check(t.right)?;
    let (vl, vr) = (emb.row(t.left), emb.row(t.right));
    if t.relation >= p.relations.len() {
        return Err(Error::UnknownRelation(t.relation));
    }
    if vl.len() != p.dim {
        return Err(Error::DimensionMismatch {
            expected: p.dim,
            found: vl.len(),
        });
    }
    let z = p.pre_activation(&p.relations[t.relation], vl, vr);
    Ok(p.u.iter().zip(z).map(|(u, z)| u * sigmoid(z)).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub enum KbParamGrads {
    TransE(Vec<(RelationId, Vec<f64>)>),
    Ntn {
        relations: Vec<(RelationId, NtnRelation)>,
        u: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbGrads {
    pub loss: f64,
    pub params: KbParamGrads,
    pub words: WordGrads,
}

impl KbGrads {
    fn zero(model: &KbModel) -> Self {
        let params = match model {
            KbModel::TransE(_) => KbParamGrads::TransE(Vec::new()),
            KbModel::Ntn(p) => KbParamGrads::Ntn {
                relations: Vec::new(),
                u: vec![0.0; p.hidden],
            },
        };
        KbGrads {
            loss: 0.0,
            params,
            words: WordGrads::default(),
        }
    }
}

fn transe_slot(grads: &mut Vec<(RelationId, Vec<f64>)>, rel: RelationId, dim: usize) -> &mut Vec<f64> {
    let pos = grads.iter().position(|(r, _)| *r == rel).unwrap_or_else(|| {
        grads.push((rel, vec![0.0; dim]));
        grads.len() - 1
    });
    &mut grads[pos].1
}

fn ntn_slot(
    grads: &mut Vec<(RelationId, NtnRelation)>,
    rel: RelationId,
    dim: usize,
    hidden: usize,
) -> &mut NtnRelation {
    let pos = grads.iter().position(|(r, _)| *r == rel).unwrap_or_else(|| {
        grads.push((rel, NtnRelation::zeros(dim, hidden)));
        grads.len() - 1
    });
    &mut grads[pos].1
}

/// Adds `coef * dS/d(everything)` for one tuple.
fn add_score_gradient(model: &KbModel, emb: &EmbeddingTable, t: &WordTuple, coef: f64, g: &mut KbGrads) {
    let (vl, vr) = (emb.row(t.left), emb.row(t.right));
    let d = model.dim();
    match (model, &mut g.params) {
        (KbModel::TransE(p), KbParamGrads::TransE(rels)) => {
            let (e, n) = transe_residual(vl, p.relations.row(t.relation), vr);
            if n == 0.0 {
                return;
            }
            // dS/dv_l = dS/dR = -e/|e|, dS/dv_r = e/|e|
            let unit: Vec<f64> = e.iter().map(|x| x / n).collect();
            g.words.add(t.left, -coef, &unit);
            g.words.add(t.right, coef, &unit);
            let slot = transe_slot(rels, t.relation, d);
            for (s, x) in slot.iter_mut().zip(&unit) {
                *s -= coef * x;
            }
        }
        (KbModel::Ntn(p), KbParamGrads::Ntn { relations, u }) => {
            let rel = &p.relations[t.relation];
            let z = p.pre_activation(rel, vl, vr);
            let mut gl = vec![0.0; d];
            let mut gr = vec![0.0; d];
            let slot = ntn_slot(relations, t.relation, d, p.hidden);
            for k in 0..p.hidden {
                let s = sigmoid(z[k]);
                u[k] += coef * s;
                let delta = coef * p.u[k] * s * (1.0 - s);
                if delta == 0.0 {
                    continue;
                }
                slot.b[k] += delta;
                let wk = &rel.w[k * d * d..(k + 1) * d * d];
                let gwk = &mut slot.w[k * d * d..(k + 1) * d * d];
                for i in 0..d {
                    for j in 0..d {
                        gwk[i * d + j] += delta * vl[i] * vr[j];
                        gl[i] += delta * wk[i * d + j] * vr[j];
                        gr[j] += delta * wk[i * d + j] * vl[i];
                    }
                }
                let vk = &rel.v[k * 2 * d..(k + 1) * 2 * d];
                let gvk = &mut slot.v[k * 2 * d..(k + 1) * 2 * d];
                for i in 0..d {
                    gvk[i] += delta * vl[i];
                    gvk[d + i] += delta * vr[i];
                    gl[i] += delta * vk[i];
                    gr[i] += delta * vk[d + i];
                }
            }
            g.words.add(t.left, 1.0, &gl);
            g.words.add(t.right, 1.0, &gr);
        }
        _ => unreachable!("gradient container matches the model"),
    }
}

/// Exact gradients of `max(0, 1 - S(tuple) + S(corrupted))`.
pub fn kb_gradients(
    model: &KbModel,
    emb: &EmbeddingTable,
    tuple: &WordTuple,
    corrupted: &WordTuple,
) -> Result<KbGrads> {
    let pos = model.score(emb, tuple)?;
    let neg = model.score(emb, corrupted)?;
    let mut g = KbGrads::zero(model);
    g.loss = hinge_loss(pos, neg);
    let d = model.dim();
    for w in [tuple.left, tuple.right, corrupted.left, corrupted.right] {
        g.words.touch(w, d);
    }
    if g.loss > 0.0 {
        add_score_gradient(model, emb, tuple, -1.0, &mut g);
        add_score_gradient(model, emb, corrupted, 1.0, &mut g);
    }
    Ok(g)
}

fn apply_params(model: &mut KbModel, grads: &KbParamGrads, weight: f64, opts: &SgdOptions) {
    match (model, grads) {
        (KbModel::TransE(p), KbParamGrads::TransE(rels)) => {
            for (r, g) in rels {
                apply_dense(p.relations.row_mut(*r), g, weight, opts);
            }
        }
        (KbModel::Ntn(p), KbParamGrads::Ntn { relations, u }) => {
            for (r, g) in relations {
                let rel = &mut p.relations[*r];
                apply_dense(&mut rel.w, &g.w, weight, opts);
                apply_dense(&mut rel.v, &g.v, weight, opts);
                apply_dense(&mut rel.b, &g.b, weight, opts);
            }
            apply_dense(&mut p.u, u, weight, opts);
        }
        _ => unreachable!("gradient container matches the model"),
    }
}

/// The whole training split in shuffled order, each tuple mapped to words
/// and paired with a corruption. Tuples whose synsets have no vocabulary
/// member are skipped.
pub fn kb_epoch_instances(
    tuples: &RelationTupleSet,
    map: &WordSynsetMap,
    entity_words: &[usize],
    rng: &mut Rng,
) -> Result<Vec<(WordTuple, WordTuple)>> {
    if tuples.train.is_empty() {
        return Err(Error::NoTrainingData("relation training split is empty".into()));
    }
    let mut order: Vec<usize> = (0..tuples.train.len()).collect();
    order.shuffle(rng);
    let mut out = Vec::with_capacity(order.len());
    for i in order {
        let Some(wt) = word_tuple(&tuples.train[i], map, rng) else {
            continue;
        };
        let c = corrupt_word_tuple(&wt, tuples.relations.len(), entity_words, rng)?;
        out.push((wt, c));
    }
    if out.is_empty() {
        return Err(Error::NoTrainingData(
            "no training tuple has in-vocabulary words on both sides".into(),
        ));
    }
    Ok(out)
}

pub fn kb_instances_loss(model: &KbModel, emb: &EmbeddingTable, instances: &[(WordTuple, WordTuple)]) -> Result<f64> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (t, c) in instances {
        total += hinge_loss(model.score(emb, t)?, model.score(emb, c)?);
    }
    Ok(total / instances.len() as f64)
}

/// One SGD update per prepared instance, in order; returns the mean
/// pre-update loss.
pub fn kb_sgd_pass(
    model: &mut KbModel,
    emb: &mut EmbeddingTable,
    instances: &[(WordTuple, WordTuple)],
    opts: &SgdOptions,
    coupled: Option<&Coupled<'_>>,
) -> Result<f64> {
    let weight = coupled.map_or(1.0, Coupled::weight);
    let mut total = 0.0;
    for (t, c) in instances {
        let g = kb_gradients(model, emb, t, c)?;
        total += g.loss;
        apply_params(model, &g.params, weight, opts);
        apply_words(emb, &g.words, weight, opts);
    }
    let mean = if instances.is_empty() {
        0.0
    } else {
        total / instances.len() as f64
    };
    if let Some(c) = coupled {
        c.penalty_step(emb, opts.lr);
    }
    if !mean.is_finite() {
        return Err(Error::NonFiniteLoss("relational"));
    }
    Ok(mean)
}

/// Presents the whole training split once, in random order, one instance at
/// a time.
#[allow(clippy::too_many_arguments)]
pub fn kb_sgd_step(
    model: &mut KbModel,
    emb: &mut EmbeddingTable,
    tuples: &RelationTupleSet,
    map: &WordSynsetMap,
    entity_words: &[usize],
    opts: &SgdOptions,
    rng: &mut Rng,
    coupled: Option<&Coupled<'_>>,
) -> Result<f64> {
    let instances = kb_epoch_instances(tuples, map, entity_words, rng)?;
    kb_sgd_pass(model, emb, &instances, opts, coupled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use approx::assert_relative_eq;

    fn table(rows: &[Vec<f64>]) -> EmbeddingTable {
        EmbeddingTable::from_rows(rows[0].len(), rows).unwrap()
    }

    fn wt(left: usize, relation: usize, right: usize) -> WordTuple {
        WordTuple { left, relation, right }
    }

    #[test]
    fn transe_examples() {
        let p = TransEParams {
            relations: table(&[vec![0.0, 1.0]]),
        };
        let emb = table(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert_relative_eq!(
            transe_score(&p, &emb, &wt(0, 0, 1)).unwrap(),
            -std::f64::consts::SQRT_2,
            epsilon = 1e-15
        );
        assert_eq!(transe_score(&p, &emb, &wt(0, 0, 2)).unwrap(), 0.0);
        assert!(matches!(
            transe_score(&p, &emb, &wt(0, 3, 2)),
            Err(Error::UnknownRelation(3))
        ));
    }

    #[test]
    fn ntn_examples() {
        let mut p = NtnParams::zeros(1, 1, 1);
        p.relations[0].w = vec![2.0];
        p.relations[0].v = vec![1.0, 1.0];
        p.u = vec![1.0];
        let emb = table(&[vec![1.0]]);
        assert_relative_eq!(
            ntn_score(&p, &emb, &wt(0, 0, 0)).unwrap(),
            0.982_013_790_037_908_5,
            epsilon = 1e-12
        );
        p.u = vec![0.0];
        assert_eq!(ntn_score(&p, &emb, &wt(0, 0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn ntn_without_tensor_is_an_affine_layer() {
        let mut p = NtnParams::init(2, 3, 2, &mut from_seed(4));
        for r in &mut p.relations {
            r.w.iter_mut().for_each(|x| *x = 0.0);
        }
        let emb = table(&[vec![0.2, -0.4, 0.9], vec![-1.0, 0.3, 0.5]]);
        for rel in 0..2 {
            let r = &p.relations[rel];
            let x = [emb.row(0), emb.row(1)].concat();
            let expected: f64 = (0..2)
                .map(|k| {
                    let z: f64 = (0..6).map(|i| r.v[k * 6 + i] * x[i]).sum::<f64>() + r.b[k];
                    p.u[k] / (1.0 + (-z).exp())
                })
                .sum();
            assert_relative_eq!(ntn_score(&p, &emb, &wt(0, rel, 1)).unwrap(), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn satisfied_margin_has_zero_gradient() {
        let model = KbModel::TransE(TransEParams {
            relations: table(&[vec![1.0, 0.0]]),
        });
        let emb = table(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![-5.0, 0.0]]);
        let g = kb_gradients(&model, &emb, &wt(0, 0, 1), &wt(0, 0, 2)).unwrap();
        assert_eq!(g.loss, 0.0);
        assert_eq!(g.params, KbParamGrads::TransE(Vec::new()));
        assert!(g.words.iter().all(|(_, v)| v.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn tied_ntn_relations_score_alike() {
        let mut p = NtnParams::init(3, 2, 2, &mut from_seed(1));
        let first = p.relations[0].clone();
        p.relations.iter_mut().for_each(|r| *r = first.clone());
        let emb = table(&[vec![0.3, 0.1], vec![-0.2, 0.8]]);
        let s0 = ntn_score(&p, &emb, &wt(0, 0, 1)).unwrap();
        for rel in 1..3 {
            assert_eq!(ntn_score(&p, &emb, &wt(0, rel, 1)).unwrap(), s0);
        }
    }
}
