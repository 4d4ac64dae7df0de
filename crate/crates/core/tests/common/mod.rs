//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use jointvec::admm::{AdmmCoupling, CorpusData, Coupled, Side};
use jointvec::corpus::{build_vocabulary, NgramCorpus, WordId};
use jointvec::embedding::EmbeddingTable;
use jointvec::graphdist::{gd_gradients, gd_loss, GdParams};
use jointvec::kb::{kb_gradients, KbModel, KbParamGrads, NtnParams, TransEParams};
use jointvec::nlm::{hinge_loss, nlm_gradients, score_ngram, NlmParams};
use jointvec::rng::{from_seed, Rng};
use jointvec::sgd::WordGrads;
use jointvec::wordnet::WordTuple;
use rand::Rng as _;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|)` over whole gradient vectors; zero when both are
/// zero.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = analytic.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x`.
pub fn numeric_gradient(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + FD_STEP;
            let up = f(&p);
            p[k] = orig - FD_STEP;
            let down = f(&p);
            p[k] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn gaussian(rng: &mut Rng, scale: f64) -> f64 {
    // Box-Muller keeps this helper free of extra dependencies.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    scale * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_table(rng: &mut Rng, len: usize, dim: usize) -> EmbeddingTable {
    let rows: Vec<Vec<f64>> = (0..len)
        .map(|_| (0..dim).map(|_| gaussian(rng, 1.0)).collect())
        .collect();
    EmbeddingTable::from_rows(dim, &rows).unwrap()
}

fn words_into(grads: &WordGrads, dim: usize, out: &mut [f64], weight: f64) {
    for (id, g) in grads.iter() {
        for k in 0..dim {
            out[id * dim + k] += weight * g[k];
        }
    }
}

/// Optional coupling for one side: every row of a `len`-row table is shared
/// with the same row of a random partner table.
pub struct CouplingFixture {
    pub coupling: AdmmCoupling,
    pub partner: EmbeddingTable,
    pub side: Side,
}

impl CouplingFixture {
    pub fn random(rng: &mut Rng, len: usize, dim: usize, side: Side) -> Self {
        let pairs = (0..len).map(|i| (format!("w{i}"), i, i)).collect();
        let rho = rng.random_range(0.01..1.0);
        let alpha = rng.random_range(0.1..0.9);
        let mut coupling = AdmmCoupling::from_pairs(pairs, dim, rho, alpha);
        coupling.set_y(random_table(rng, len, dim)).unwrap();
        CouplingFixture {
            coupling,
            partner: random_table(rng, len, dim),
            side,
        }
    }

    pub fn coupled(&self) -> Coupled<'_> {
        Coupled {
            coupling: &self.coupling,
            side: self.side,
            partner: &self.partner,
        }
    }

    /// `L_P` as a function of this side's table.
    pub fn penalty(&self, emb: &EmbeddingTable) -> f64 {
        let c = self.coupled();
        (0..emb.len()).map(|id| c.penalty_term(id, emb.row(id))).sum()
    }

    pub fn add_gradient(&self, emb: &EmbeddingTable, out: &mut [f64]) {
        let c = self.coupled();
        let d = emb.dim();
        for id in 0..emb.len() {
            c.add_penalty_gradient(id, emb.row(id), &mut out[id * d..(id + 1) * d]);
        }
    }
}

fn table_from(flat: &[f64], len: usize, dim: usize) -> EmbeddingTable {
    let rows: Vec<Vec<f64>> = flat[..len * dim].chunks(dim).map(<[f64]>::to_vec).collect();
    EmbeddingTable::from_rows(dim, &rows).unwrap()
}

/// Outcome of one finite-difference instance.
pub struct FdCase {
    pub error: f64,
    pub params: usize,
}

/// Draws a random small NLM instance away from the hinge kink and compares
/// analytic and numeric gradients over every word row and layer weight.
pub fn nlm_case(seed: u64, coupled: bool) -> FdCase {
    let mut rng = from_seed(seed);
    loop {
        let dim = rng.random_range(1..=4);
        let order = rng.random_range(1..=3);
        let hidden = rng.random_range(1..=2);
        let len = 5;
        let emb = random_table(&mut rng, len, dim);
        let mut p = NlmParams::zeros(order, dim, hidden);
        p.a.iter_mut().for_each(|x| *x = gaussian(&mut rng, 1.0));
        p.b.iter_mut().for_each(|x| *x = gaussian(&mut rng, 1.0));
        p.u.iter_mut().for_each(|x| *x = gaussian(&mut rng, 2.0));
        let ngram: Vec<WordId> = (0..order).map(|_| rng.random_range(0..len)).collect();
        let mut corrupted = ngram.clone();
        let mid = order / 2;
        corrupted[mid] = (ngram[mid] + rng.random_range(1..len)) % len;

        let margin = 1.0 - score_ngram(&p, &emb, &ngram).unwrap() + score_ngram(&p, &emb, &corrupted).unwrap();
        if margin < 1e-3 {
            // Flat side of the hinge or too close to the kink.
            continue;
        }
        let fix = coupled.then(|| CouplingFixture::random(&mut rng, len, dim, Side::W));
        let weight = fix.as_ref().map_or(1.0, |f| f.coupled().weight());

        let mut x: Vec<f64> = emb.as_slice().to_vec();
        x.extend(&p.a);
        x.extend(&p.b);
        x.extend(&p.u);
        let (na, nb) = (p.a.len(), p.b.len());
        let unpack = |x: &[f64]| {
            let e = table_from(x, len, dim);
            let mut q = p.clone();
            let off = len * dim;
            q.a.copy_from_slice(&x[off..off + na]);
            q.b.copy_from_slice(&x[off + na..off + na + nb]);
            q.u.copy_from_slice(&x[off + na + nb..]);
            (e, q)
        };
        let f = |x: &[f64]| {
            let (e, q) = unpack(x);
            let l = hinge_loss(
                score_ngram(&q, &e, &ngram).unwrap(),
                score_ngram(&q, &e, &corrupted).unwrap(),
            );
            weight * l + fix.as_ref().map_or(0.0, |f| f.penalty(&e))
        };

        let g = nlm_gradients(&p, &emb, &ngram, &corrupted).unwrap();
        let mut analytic = vec![0.0; x.len()];
        words_into(&g.words, dim, &mut analytic, weight);
        if let Some(f) = &fix {
            f.add_gradient(&emb, &mut analytic[..len * dim]);
        }
        let off = len * dim;
        for (k, v) in g.a.iter().chain(&g.b).chain(&g.u).enumerate() {
            analytic[off + k] = weight * v;
        }
        let numeric = numeric_gradient(&x, f);
        return FdCase {
            error: rel_error(&analytic, &numeric),
            params: x.len(),
        };
    }
}

/// Random GD pair with its affine map; covers `i == j` now and then.
pub fn gd_case(seed: u64, coupled: bool) -> FdCase {
    let mut rng = from_seed(seed);
    let dim = rng.random_range(1..=4);
    let len = 4;
    let emb = random_table(&mut rng, len, dim);
    let i = rng.random_range(0..len);
    let j = if rng.random_bool(0.1) {
        i
    } else {
        rng.random_range(0..len)
    };
    let ws = rng.random_range(0.0..2.0);
    let params = GdParams {
        a: rng.random_range(-1.0..1.0),
        b: rng.random_range(-1.0..1.0),
    };
    let fix = coupled.then(|| CouplingFixture::random(&mut rng, len, dim, Side::V));
    let weight = fix.as_ref().map_or(1.0, |f| f.coupled().weight());

    let mut x: Vec<f64> = emb.as_slice().to_vec();
    x.push(params.a);
    x.push(params.b);
    let f = |x: &[f64]| {
        let e = table_from(x, len, dim);
        let p = GdParams {
            a: x[len * dim],
            b: x[len * dim + 1],
        };
        weight * gd_loss(&p, &e, i, j, ws).unwrap() + fix.as_ref().map_or(0.0, |f| f.penalty(&e))
    };
    let g = gd_gradients(&params, &emb, i, j, ws).unwrap();
    let mut analytic = vec![0.0; x.len()];
    words_into(&g.words, dim, &mut analytic, weight);
    if let Some(f) = &fix {
        f.add_gradient(&emb, &mut analytic[..len * dim]);
    }
    analytic[len * dim] = weight * g.a;
    analytic[len * dim + 1] = weight * g.b;
    FdCase {
        error: rel_error(&analytic, &numeric_gradient(&x, f)),
        params: x.len(),
    }
}

fn flatten_kb(model: &KbModel) -> Vec<f64> {
    match model {
        KbModel::TransE(p) => p.relations.as_slice().to_vec(),
        KbModel::Ntn(p) => {
            let mut v = Vec::new();
            for r in &p.relations {
                v.extend(&r.w);
                v.extend(&r.v);
                v.extend(&r.b);
            }
            v.extend(&p.u);
            v
        }
    }
}

fn unflatten_kb(template: &KbModel, x: &[f64]) -> KbModel {
    match template {
        KbModel::TransE(p) => KbModel::TransE(TransEParams {
            relations: table_from(x, p.relations.len(), p.relations.dim()),
        }),
        KbModel::Ntn(p) => {
            let mut q = p.clone();
            let mut off = 0;
            for r in &mut q.relations {
                for part in [&mut r.w, &mut r.v, &mut r.b] {
                    let n = part.len();
                    part.copy_from_slice(&x[off..off + n]);
                    off += n;
                }
            }
            q.u.copy_from_slice(&x[off..]);
            KbModel::Ntn(q)
        }
    }
}

fn flatten_kb_grads(model: &KbModel, g: &KbParamGrads) -> Vec<f64> {
    match (model, g) {
        (KbModel::TransE(p), KbParamGrads::TransE(rels)) => {
            let d = p.relations.dim();
            let mut v = vec![0.0; p.relations.len() * d];
            for (r, gr) in rels {
                for k in 0..d {
                    v[r * d + k] += gr[k];
                }
            }
            v
        }
        (KbModel::Ntn(p), KbParamGrads::Ntn { relations, u }) => {
            let mut per = vec![None; p.relations.len()];
            for (r, gr) in relations {
                per[*r] = Some(gr);
            }
            let mut v = Vec::new();
            for (r, rel) in p.relations.iter().enumerate() {
                match per[r] {
                    Some(gr) => {
                        v.extend(&gr.w);
                        v.extend(&gr.v);
                        v.extend(&gr.b);
                    }
                    None => v.extend(std::iter::repeat_n(0.0, rel.w.len() + rel.v.len() + rel.b.len())),
                }
            }
            v.extend(u);
            v
        }
        _ => unreachable!(),
    }
}

/// TransE or NTN instance with one corrupted slot.
pub fn kb_case(seed: u64, ntn: bool, coupled: bool) -> FdCase {
    let mut rng = from_seed(seed);
    loop {
        let dim = rng.random_range(1..=4);
        let hidden = rng.random_range(1..=2);
        let n_rel = 2;
        let len = 5;
        let emb = random_table(&mut rng, len, dim);
        let model = if ntn {
            let mut p = NtnParams::zeros(n_rel, dim, hidden);
            for r in &mut p.relations {
                for x in r.w.iter_mut().chain(&mut r.v).chain(&mut r.b) {
                    *x = gaussian(&mut rng, 1.0);
                }
            }
            p.u.iter_mut().for_each(|x| *x = gaussian(&mut rng, 2.0));
            KbModel::Ntn(p)
        } else {
            KbModel::TransE(TransEParams {
                relations: random_table(&mut rng, n_rel, dim),
            })
        };
        let t = WordTuple {
            left: rng.random_range(0..len),
            relation: rng.random_range(0..n_rel),
            right: rng.random_range(0..len),
        };
        let mut c = t;
        match rng.random_range(0..3) {
            0 => c.left = (t.left + rng.random_range(1..len)) % len,
            1 => c.relation = 1 - t.relation,
            _ => c.right = (t.right + rng.random_range(1..len)) % len,
        }
        let margin = 1.0 - model.score(&emb, &t).unwrap() + model.score(&emb, &c).unwrap();
        if margin < 1e-3 {
            // Flat side of the hinge or too close to the kink.
            continue;
        }
        let fix = coupled.then(|| CouplingFixture::random(&mut rng, len, dim, Side::V));
        let weight = fix.as_ref().map_or(1.0, |f| f.coupled().weight());

        let mut x: Vec<f64> = emb.as_slice().to_vec();
        x.extend(flatten_kb(&model));
        let f = |x: &[f64]| {
            let e = table_from(x, len, dim);
            let m = unflatten_kb(&model, &x[len * dim..]);
            let l = hinge_loss(m.score(&e, &t).unwrap(), m.score(&e, &c).unwrap());
            weight * l + fix.as_ref().map_or(0.0, |f| f.penalty(&e))
        };
        let g = kb_gradients(&model, &emb, &t, &c).unwrap();
        let mut analytic = vec![0.0; x.len()];
        words_into(&g.words, dim, &mut analytic, weight);
        if let Some(f) = &fix {
            f.add_gradient(&emb, &mut analytic[..len * dim]);
        }
        for (k, v) in flatten_kb_grads(&model, &g.params).into_iter().enumerate() {
            analytic[len * dim + k] = weight * v;
        }
        return FdCase {
            error: rel_error(&analytic, &numeric_gradient(&x, f)),
            params: x.len(),
        };
    }
}

/// Sentences of random planted entity names, so a corpus shares its
/// vocabulary with the planted WordNet.
pub fn entity_corpus(words: &[String], sentences: usize, len: usize, order: usize, seed: u64) -> CorpusData {
    let mut rng = from_seed(seed);
    let lines: Vec<String> = (0..sentences)
        .map(|_| {
            (0..len)
                .map(|_| words[rng.random_range(0..words.len())].as_str())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let vocab = build_vocabulary(lines.iter().flat_map(|l| l.split_whitespace()), words.len());
    let ngrams = NgramCorpus::from_sentences(order, &lines, &vocab).unwrap();
    CorpusData { vocab, ngrams }
}
